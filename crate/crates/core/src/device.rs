//! Device parameters, coupler–emitter hybridization and drive calibration.
//!
//! Frequencies here are linear: GHz for carriers, MHz for couplings, shifts and
//! rates. Coherence times are in μs.

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result, Warning};
use crate::linalg::{c64, eigh, Matrix};

/// Bundled default parameter file.
pub const DEFAULT_DEVICE_FILE: &str = include_str!("../data/default_device.cfg");

const DEGENERACY_GHZ: f64 = 1e-9;
const SINGULAR_COS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviceParams {
    /// Qubit D g–e frequency, GHz.
    pub omega_d_ge: f64,
    /// Qubit D anharmonicity α = 2χ_d, MHz. Negative for a transmon.
    pub alpha_d: f64,
    /// Coupler frequency at zero flux, GHz.
    pub omega_c0: f64,
    /// Emitter frequency without flux bias, GHz.
    pub omega_e0: f64,
    /// Emitter operating frequency, GHz. The coupler is biased into resonance with it.
    pub omega_e_op: f64,
    /// Qubit D – coupler coupling, MHz.
    pub g_dc: f64,
    /// Coupler – emitter coupling, MHz.
    pub g_ec: f64,
    /// Emitter decay rate into the waveguide, MHz.
    pub gamma_e: f64,
    pub t1_ge: f64,
    pub t1_ef: f64,
    pub t2_ge: f64,
    pub t2_ef: f64,
    /// Coupler energy relaxation time, μs.
    pub t1_coupler: f64,
    /// Coupler coherence time, μs.
    pub t2_coupler: f64,
    /// DC flux working point, rad.
    pub phi_dc: f64,
}

const KEYS: [&str; 15] = [
    "omega_D_ge_GHz",
    "alpha_D_MHz",
    "omega_C0_GHz",
    "omega_E0_GHz",
    "omega_E_op_GHz",
    "g_dc_MHz",
    "g_ec_MHz",
    "Gamma_E_MHz",
    "T1_ge_us",
    "T1_ef_us",
    "T2_ge_us",
    "T2_ef_us",
    "T1_coupler_us",
    "T2_coupler_us",
    "phi_dc_rad",
];

impl Default for DeviceParams {
    fn default() -> Self {
        Self::parse_onto(DEFAULT_DEVICE_FILE, Self::nan()).expect("bundled device file is valid")
    }
}

impl DeviceParams {
    fn fields(&self) -> [f64; 15] {
        [
            self.omega_d_ge,
            self.alpha_d,
            self.omega_c0,
            self.omega_e0,
            self.omega_e_op,
            self.g_dc,
            self.g_ec,
            self.gamma_e,
            self.t1_ge,
            self.t1_ef,
            self.t2_ge,
            self.t2_ef,
            self.t1_coupler,
            self.t2_coupler,
            self.phi_dc,
        ]
    }

    fn fields_mut(&mut self) -> [&mut f64; 15] {
        [
            &mut self.omega_d_ge,
            &mut self.alpha_d,
            &mut self.omega_c0,
            &mut self.omega_e0,
            &mut self.omega_e_op,
            &mut self.g_dc,
            &mut self.g_ec,
            &mut self.gamma_e,
            &mut self.t1_ge,
            &mut self.t1_ef,
            &mut self.t2_ge,
            &mut self.t2_ef,
            &mut self.t1_coupler,
            &mut self.t2_coupler,
            &mut self.phi_dc,
        ]
    }

    /// Same device with every coherence time set to infinity.
    pub fn without_decoherence(&self) -> Self {
        Self {
            t1_ge: f64::INFINITY,
            t1_ef: f64::INFINITY,
            t2_ge: f64::INFINITY,
            t2_ef: f64::INFINITY,
            t1_coupler: f64::INFINITY,
            t2_coupler: f64::INFINITY,
            ..self.clone()
        }
    }

    /// χ_d = α/2 in MHz.
    pub fn chi_d(&self) -> f64 {
        self.alpha_d / 2.0
    }

    /// Qubit D e–f frequency in GHz.
    pub fn omega_d_ef(&self) -> f64 {
        self.omega_d_ge + self.alpha_d * 1e-3
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("omega_D_ge_GHz", self.omega_d_ge),
            ("omega_C0_GHz", self.omega_c0),
            ("omega_E0_GHz", self.omega_e0),
            ("omega_E_op_GHz", self.omega_e_op),
            ("Gamma_E_MHz", self.gamma_e),
            ("T1_ge_us", self.t1_ge),
            ("T1_ef_us", self.t1_ef),
            ("T2_ge_us", self.t2_ge),
            ("T2_ef_us", self.t2_ef),
            ("T1_coupler_us", self.t1_coupler),
            ("T2_coupler_us", self.t2_coupler),
        ];
        for (key, v) in positive {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter(format!("{key} must be positive, got {v}")));
            }
        }
        for (key, v) in [("g_dc_MHz", self.g_dc), ("g_ec_MHz", self.g_ec)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{key} must be non-negative, got {v}")));
            }
        }
        if !(self.alpha_d <= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha_D_MHz must be negative (transmon sign convention), got {}",
                self.alpha_d
            )));
        }
        for (name, t1, t2) in [
            ("ge", self.t1_ge, self.t2_ge),
            ("ef", self.t1_ef, self.t2_ef),
            ("coupler", self.t1_coupler, self.t2_coupler),
        ] {
            if t2 > 2.0 * t1 {
                return Err(Error::InvalidParameter(format!("T2 > 2 T1 for {name}: {t2} vs {t1}")));
            }
        }
        if !self.phi_dc.is_finite() {
            return Err(Error::InvalidParameter("phi_dc_rad must be finite".into()));
        }
        Ok(())
    }

    /// Parse a `key = value` document. Unknown keys are rejected and missing keys
    /// fall back to the bundled defaults.
    pub fn from_config_str(text: &str) -> Result<Self> {
        Self::parse_onto(text, Self::default())
    }

    fn parse_onto(text: &str, mut out: Self) -> Result<Self> {
        let entries = parse_key_values(text)?;
        let slots = out.fields_mut();
        for (key, value) in entries {
            let idx = KEYS
                .iter()
                .position(|k| *k == key)
                .ok_or_else(|| Error::Config(format!("unknown device key '{key}'")))?;
            *slots[idx] = value;
        }
        if out.fields().iter().any(|v| v.is_nan()) {
            return Err(Error::Config("device file is missing keys".into()));
        }
        out.validate()?;
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_config_str(&text)
    }

    pub fn to_config_string(&self) -> String {
        let mut s = String::from("# device parameters\n");
        for (k, v) in KEYS.iter().zip(self.fields()) {
            let _ = writeln!(s, "{k} = {v:?}");
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_config_string())?;
        Ok(())
    }

    /// Apply one `key=value` override.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        let idx = KEYS
            .iter()
            .position(|k| *k == key)
            .ok_or_else(|| Error::Config(format!("unknown device key '{key}'")))?;
        *self.fields_mut()[idx] = value;
        self.validate()
    }

    fn nan() -> Self {
        Self {
            omega_d_ge: f64::NAN,
            alpha_d: f64::NAN,
            omega_c0: f64::NAN,
            omega_e0: f64::NAN,
            omega_e_op: f64::NAN,
            g_dc: f64::NAN,
            g_ec: f64::NAN,
            gamma_e: f64::NAN,
            t1_ge: f64::NAN,
            t1_ef: f64::NAN,
            t2_ge: f64::NAN,
            t2_ef: f64::NAN,
            t1_coupler: f64::NAN,
            t2_coupler: f64::NAN,
            phi_dc: f64::NAN,
        }
    }
}

/// Parse `key = value` lines; `#` starts a comment.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
        let key = k.trim().to_string();
        let value: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("line {}: bad number '{}'", lineno + 1, v.trim())))?;
        if out.insert(key.clone(), value).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key '{key}'", lineno + 1)));
        }
    }
    Ok(out)
}

/// Coupler and emitter hybridized into symmetric/antisymmetric modes, plus the
/// dressed-mode coefficients of the three normal modes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HybridizedFrame {
    pub omega_a: f64,
    pub omega_s: f64,
    /// Dressed qubit frequency, GHz.
    pub omega_d: f64,
    /// Dressed `d̂` in the `{d, a_A, a_S}` basis: `(φ_d, φ_A, φ_S)`.
    pub phi: [f64; 3],
    /// Dressed `â_S`: `(φ'_d, φ'_A, φ'_S)`.
    pub phi_s_mode: [f64; 3],
    /// Dressed `â_A`: `(φ''_d, φ''_A, φ''_S)`.
    pub phi_a_mode: [f64; 3],
    /// Eigenvectors over the bare `{d, c, e}` basis, rows ordered (D-like, S, A).
    pub bare_vectors: [[f64; 3]; 3],
}

impl HybridizedFrame {
    /// `(φ'_d − φ''_d)(φ'_A − φ''_A)`
    pub fn flux_coefficient_product(&self) -> f64 {
        (self.phi_s_mode[0] - self.phi_a_mode[0]) * (self.phi_s_mode[1] - self.phi_a_mode[1])
    }

    pub fn splitting_mhz(&self) -> f64 {
        (self.omega_s - self.omega_a) * 1e3
    }
}

/// Diagonalize the single-excitation block over `{d, c, e}` with the coupler
/// tuned to the emitter.
pub fn hybridize(params: &DeviceParams) -> Result<HybridizedFrame> {
    let w_d = params.omega_d_ge;
    let w_e = params.omega_e_op;
    let g_dc = params.g_dc * 1e-3;
    let g_ec = params.g_ec * 1e-3;
    let entries = [[w_d, g_dc, 0.0], [g_dc, w_e, g_ec], [0.0, g_ec, w_e]];
    let mut m = Matrix::zeros((3, 3));
    for i in 0..3 {
        for j in 0..3 {
            m[[i, j]] = c64(entries[i][j], 0.0);
        }
    }
    let e = eigh(&m);
    for k in 0..2 {
        let gap = e.values[k + 1] - e.values[k];
        if gap < DEGENERACY_GHZ {
            return Err(Error::IllConditionedHybridization { gap_ghz: gap });
        }
    }
    let vecs: Vec<[f64; 3]> = (0..3)
        .map(|k| {
            let v = e.vector(k);
            // real symmetric input: make the largest component real positive
            let big = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
            let phase = big.conj() / big.norm();
            [(v[0] * phase).re, (v[1] * phase).re, (v[2] * phase).re]
        })
        .collect();
    let d_idx = (0..3).max_by(|&a, &b| vecs[a][0].abs().total_cmp(&vecs[b][0].abs())).unwrap();
    let mut others: Vec<usize> = (0..3).filter(|&k| k != d_idx).collect();
    others.sort_by(|&a, &b| e.values[a].total_cmp(&e.values[b]));
    let (a_idx, s_idx) = (others[0], others[1]);

    let dressed = |v: &[f64; 3], sign: f64| {
        let (vd, vc, ve) = (v[0] * sign, v[1] * sign, v[2] * sign);
        [vd, (ve - vc) / SQRT_2, (ve + vc) / SQRT_2]
    };
    let mut phi = dressed(&vecs[d_idx], 1.0);
    if phi[0] < 0.0 {
        phi = dressed(&vecs[d_idx], -1.0);
    }
    let mut phi_s = dressed(&vecs[s_idx], 1.0);
    if phi_s[2] < 0.0 {
        phi_s = dressed(&vecs[s_idx], -1.0);
    }
    let mut phi_a = dressed(&vecs[a_idx], 1.0);
    if phi_a[1] < 0.0 {
        phi_a = dressed(&vecs[a_idx], -1.0);
    }
    Ok(HybridizedFrame {
        omega_a: e.values[a_idx],
        omega_s: e.values[s_idx],
        omega_d: e.values[d_idx],
        phi,
        phi_s_mode: phi_s,
        phi_a_mode: phi_a,
        bare_vectors: [vecs[d_idx], vecs[s_idx], vecs[a_idx]],
    })
}

/// `ω_C(φ) = ω_c⁰ √|cos φ|`
pub fn coupler_frequency(phi: f64, omega_c0: f64) -> f64 {
    omega_c0 * phi.cos().abs().sqrt()
}

/// `(ω_C, ∂ω_C/∂φ, ∂²ω_C/∂φ²)` at `phi`, in GHz, GHz/rad, GHz/rad².
pub fn coupler_frequency_derivatives(phi: f64, omega_c0: f64) -> Result<(f64, f64, f64)> {
    let cos = phi.cos();
    let u = cos.abs();
    if u < SINGULAR_COS {
        return Err(Error::SingularWorkingPoint(u));
    }
    let du = -cos.signum() * phi.sin();
    let d2u = -u;
    let root = u.sqrt();
    let f = omega_c0 * root;
    let df = omega_c0 * du / (2.0 * root);
    let d2f = omega_c0 * (d2u / (2.0 * root) - du * du / (4.0 * u * root));
    Ok((f, df, d2f))
}

/// Flux working point that tunes the coupler to `omega_target` (GHz).
pub fn flux_bias_for(omega_target: f64, omega_c0: f64) -> Result<f64> {
    let ratio = (omega_target / omega_c0).powi(2);
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::InvalidParameter(format!(
            "coupler cannot reach {omega_target} GHz from {omega_c0} GHz"
        )));
    }
    Ok(ratio.acos())
}

/// `η = ½ (∂ω_c/∂φ) η′ · coefficient_product`, derivative in GHz/rad, result in MHz.
pub fn eta_from_slope(dw_dphi_ghz: f64, eta_prime: f64, coefficient_product: f64) -> f64 {
    0.5 * dw_dphi_ghz * 1e3 * eta_prime * coefficient_product
}

/// Parametric coupling η (MHz) produced by a flux modulation of amplitude `eta_prime`.
pub fn flux_amplitude_to_eta(eta_prime: f64, frame: &HybridizedFrame, params: &DeviceParams) -> Result<f64> {
    let (_, df, _) = coupler_frequency_derivatives(params.phi_dc, params.omega_c0)?;
    Ok(eta_from_slope(df, eta_prime, frame.flux_coefficient_product()))
}

/// Parametric-drive Stark shift `S(η′) = ¼ ∂²ω_c/∂φ² η′²` in MHz.
pub fn parametric_stark_shift(eta_prime: f64, params: &DeviceParams) -> Result<f64> {
    let (_, _, d2f) = coupler_frequency_derivatives(params.phi_dc, params.omega_c0)?;
    Ok(0.25 * d2f * 1e3 * eta_prime * eta_prime)
}

/// Displacement ε giving second-order amplitude `zeta` (MHz): `ζ = 2εχ_dφ_d³φ_S`.
/// Zero when the qubit has no weight in the symmetric mode.
pub fn epsilon_for_zeta(zeta: f64, frame: &HybridizedFrame, params: &DeviceParams) -> f64 {
    let denom = 2.0 * params.chi_d() * frame.phi[0].powi(3) * frame.phi[2];
    if denom.abs() < 1e-15 {
        0.0
    } else {
        zeta / denom
    }
}

/// Displacement from a lab-frame drive amplitude ζ′ (MHz), `ε = −ζ′/(ω_d + 2χ_d − ω_S)`.
pub fn epsilon_from_lab_amplitude(zeta_lab: f64, omega_drive_ghz: f64, frame: &HybridizedFrame, params: &DeviceParams) -> f64 {
    let detuning_mhz = (omega_drive_ghz - frame.omega_s) * 1e3 + params.alpha_d;
    -zeta_lab / detuning_mhz
}

/// `ω_AC = 4ε²χ_dφ_d⁴` in MHz.
pub fn ac_stark_shift(epsilon: f64, frame: &HybridizedFrame, params: &DeviceParams) -> f64 {
    4.0 * epsilon * epsilon * params.chi_d() * frame.phi[0].powi(4)
}

/// How the quoted drive amplitude maps onto the Hamiltonian coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum AmplitudeConvention {
    /// The quoted η and ζ multiply the coupling operators directly.
    #[default]
    AsPrinted,
    /// The quoted values are half the operator coefficients.
    Doubled,
}

impl AmplitudeConvention {
    pub fn factor(self) -> f64 {
        match self {
            AmplitudeConvention::AsPrinted => 1.0,
            AmplitudeConvention::Doubled => 2.0,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "as-printed" => Ok(Self::AsPrinted),
            "doubled" => Ok(Self::Doubled),
            _ => Err(Error::Config(format!("unknown amplitude convention '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum Calibration {
    /// ω_AC and the drive frequencies follow from η.
    #[default]
    Auto,
    /// Frequencies were set by hand.
    Manual,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriveConfig {
    /// Parametric amplitude, MHz.
    pub eta: f64,
    /// Second-order amplitude, MHz.
    pub zeta: f64,
    /// Flux-modulation amplitude, rad.
    pub eta_prime: f64,
    pub epsilon: f64,
    /// Parametric drive frequency, GHz.
    pub omega_param: f64,
    /// Second-order drive frequency, GHz.
    pub omega_2nd: f64,
    /// AC Stark shift of Qubit D, MHz.
    pub omega_ac: f64,
    /// Parametric-drive Stark shift, MHz.
    pub stark_param: f64,
    /// Total drive duration, μs. Zero selects the automatic estimate.
    pub duration: f64,
    /// Cosine ramp length at each edge, μs.
    pub ramp: f64,
    pub convention: AmplitudeConvention,
    pub calibration: Calibration,
}

/// Calibrated drives for parametric amplitude `eta` (MHz).
///
/// Frequencies use the positive-difference convention: the parametric drive sits
/// at `ω_A − ω_ge − ω_AC` and the second-order drive at `2ω_ge + α − ω_S + 2ω_AC`.
pub fn calibrate_drives(frame: &HybridizedFrame, params: &DeviceParams, eta: f64) -> Result<(DriveConfig, Vec<Warning>)> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::InvalidParameter(format!("eta must be non-negative, got {eta}")));
    }
    let mut warnings = Vec::new();
    if eta > params.gamma_e / 2.0 {
        warnings.push(Warning::WeakDriveAssumptionViolated { eta_mhz: eta, limit_mhz: params.gamma_e / 2.0 });
    }
    let zeta = eta / SQRT_2;
    let epsilon = epsilon_for_zeta(zeta, frame, params);
    let omega_ac = ac_stark_shift(epsilon, frame, params);
    let eta_prime = match coupler_frequency_derivatives(params.phi_dc, params.omega_c0) {
        Ok((_, df, _)) => {
            let per_rad = eta_from_slope(df, 1.0, frame.flux_coefficient_product());
            if per_rad.abs() > 1e-12 {
                (eta / per_rad).abs()
            } else {
                0.0
            }
        }
        Err(_) => 0.0,
    };
    let stark_param = parametric_stark_shift(eta_prime, params).unwrap_or(0.0);
    let omega_param = frame.omega_a - params.omega_d_ge - omega_ac * 1e-3;
    let omega_2nd = 2.0 * params.omega_d_ge + params.alpha_d * 1e-3 - frame.omega_s + 2.0 * omega_ac * 1e-3;
    Ok((
        DriveConfig {
            eta,
            zeta,
            eta_prime,
            epsilon,
            omega_param,
            omega_2nd,
            omega_ac,
            stark_param,
            duration: 0.0,
            ramp: 0.01,
            convention: AmplitudeConvention::AsPrinted,
            calibration: Calibration::Auto,
        },
        warnings,
    ))
}

/// Angular frequency in rad/μs from linear MHz.
pub fn mhz_to_angular(f_mhz: f64) -> f64 {
    2.0 * PI * f_mhz
}
