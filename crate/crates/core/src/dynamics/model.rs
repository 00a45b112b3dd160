//! Effective Hamiltonian and dissipators of the driven emitter.
//!
//! Subsystem order is Qubit D, antisymmetric mode A, symmetric mode S, then the
//! optional capture cavities v_A and v_S. Everything inside is angular, rad/μs.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use super::system::{Channel, Coefficient, FrameKind, SystemSpec};
use crate::device::{DeviceParams, DriveConfig, HybridizedFrame};
use crate::error::{Error, Result};
use crate::linalg::{annihilation, outer, Operator};

pub const SLOT_D: usize = 0;
pub const SLOT_A: usize = 1;
pub const SLOT_S: usize = 2;
pub const SLOT_VA: usize = 3;
pub const SLOT_VS: usize = 4;

pub const SENDER_DIMS: [usize; 3] = [3, 2, 2];
pub const CAPTURE_DIMS: [usize; 5] = [3, 2, 2, 2, 2];

/// Qubit-D levels.
pub const G: usize = 0;
pub const E: usize = 1;
pub const F: usize = 2;

fn tau() -> f64 {
    2.0 * PI
}

/// Smooth rectangular drive envelope with cosine edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ramp {
    pub duration: f64,
    pub edge: f64,
}

impl Ramp {
    pub fn new(duration: f64, edge: f64) -> Self {
        Self { duration, edge: edge.clamp(0.0, duration / 2.0) }
    }

    pub fn at(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.duration {
            return 0.0;
        }
        if self.edge <= 0.0 {
            return 1.0;
        }
        let rise = |s: f64| 0.5 * (1.0 - (PI * s / self.edge).cos());
        if t < self.edge {
            rise(t)
        } else if t > self.duration - self.edge {
            rise(self.duration - t)
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianOptions {
    pub frame: FrameKind,
    /// Include the Kerr, cross-Kerr and Stark terms of the full effective model.
    pub full_model: bool,
    /// Append the two capture cavities to the Hilbert space.
    pub with_capture: bool,
}

impl Default for HamiltonianOptions {
    fn default() -> Self {
        Self { frame: FrameKind::Anharmonic, full_model: false, with_capture: false }
    }
}

/// Operator factory for the emitter Hilbert space.
pub struct Ops {
    pub dims: Vec<usize>,
}

impl Ops {
    pub fn new(with_capture: bool) -> Self {
        let dims = if with_capture { CAPTURE_DIMS.to_vec() } else { SENDER_DIMS.to_vec() };
        Self { dims }
    }

    pub fn embed(&self, local: &Operator, slot: usize) -> Operator {
        Operator::embed(local, slot, &self.dims).expect("slot within the emitter space")
    }

    /// Lowering operator of slot `k`.
    pub fn lower(&self, k: usize) -> Operator {
        self.embed(&annihilation(self.dims[k]).unwrap(), k)
    }

    pub fn number(&self, k: usize) -> Operator {
        let a = self.lower(k);
        &a.adjoint() * &a
    }

    /// `|i⟩⟨j|` on Qubit D.
    pub fn d_flip(&self, i: usize, j: usize) -> Operator {
        self.embed(&outer(3, i, j), SLOT_D)
    }
}

/// Population decay rate of the slowest emission channel, rad/μs.
pub fn emission_rate_estimate(params: &DeviceParams, drive: &DriveConfig) -> f64 {
    let kappa = waveguide_rate(params);
    let factor = drive.convention.factor();
    let couplings = [tau() * drive.eta * factor, tau() * 2f64.sqrt() * drive.zeta * factor];
    couplings
        .iter()
        .filter(|g| **g > 0.0)
        .map(|g| {
            let disc = kappa * kappa / 16.0 - g * g;
            2.0 * (kappa / 4.0 - disc.max(0.0).sqrt())
        })
        .fold(f64::INFINITY, f64::min)
}

/// Waveguide decay of each hybridized mode, `Γ_E/2` in rad/μs.
pub fn waveguide_rate(params: &DeviceParams) -> f64 {
    tau() * params.gamma_e / 2.0
}

/// Drive-on time (μs): the configured duration, else 8 emission lifetimes.
pub fn drive_duration(params: &DeviceParams, drive: &DriveConfig) -> f64 {
    if drive.duration > 0.0 {
        return drive.duration;
    }
    let rate = emission_rate_estimate(params, drive);
    if rate.is_finite() && rate > 0.0 {
        8.0 / rate
    } else {
        1.0
    }
}

/// Total simulated window: drives plus a field-free tail of five mode lifetimes.
pub fn emission_window(params: &DeviceParams, drive: &DriveConfig) -> f64 {
    drive_duration(params, drive) + 5.0 / waveguide_rate(params)
}

/// Effective Hamiltonian of the driven emitter. `detuning_param` and
/// `detuning_2nd` (MHz) offset the applied drive frequencies from `drive`.
pub fn build_effective_hamiltonian(
    params: &DeviceParams,
    frame: &HybridizedFrame,
    drive: &DriveConfig,
    detuning_param: f64,
    detuning_2nd: f64,
    opts: &HamiltonianOptions,
) -> Result<SystemSpec> {
    if opts.frame == FrameKind::PerMode {
        return Err(Error::InvalidParameter("the per-mode frame is reserved for spectroscopy".into()));
    }
    let ops = Ops::new(opts.with_capture);
    let mut spec = SystemSpec::new(ops.dims.clone(), opts.frame)?;
    let ramp = Ramp::new(drive_duration(params, drive), drive.ramp);
    let factor = drive.convention.factor();
    let eta = tau() * drive.eta * factor;
    let zeta = tau() * drive.zeta * factor;
    let alpha = tau() * params.alpha_d;

    let a_a = ops.lower(SLOT_A);
    let a_s = ops.lower(SLOT_S);
    let d = ops.lower(SLOT_D);
    // d†² = √2 |f⟩⟨g| on three levels
    let d_dag2 = &d.adjoint() * &d.adjoint();

    if eta != 0.0 {
        // η (d â_A† + h.c.); within the rotating-wave approximation only |g⟩⟨e| survives
        let lower = match opts.frame {
            FrameKind::Anharmonic => ops.d_flip(G, E),
            _ => d.clone(),
        };
        let op = &lower * &a_a.adjoint();
        spec.add_hermitian_pair(Coefficient::func(eta, move |t| C64::new(eta * ramp.at(t), 0.0)), &op);
    }
    if zeta != 0.0 {
        let op = &d_dag2 * &a_s;
        let coef = match opts.frame {
            FrameKind::Qubit => Coefficient::func(zeta, move |t| C64::from_polar(zeta * ramp.at(t), -alpha * t)),
            _ => Coefficient::func(zeta, move |t| C64::new(zeta * ramp.at(t), 0.0)),
        };
        spec.add_hermitian_pair(coef, &op);
    }
    if opts.frame == FrameKind::Qubit && alpha != 0.0 {
        let op = &d_dag2 * &(&d * &d);
        spec.add_term(Coefficient::real(alpha / 2.0), &op);
    }

    let (delta_a, delta_s) = if opts.full_model {
        let applied_param = drive.omega_param + detuning_param * 1e-3;
        let applied_2nd = drive.omega_2nd + detuning_2nd * 1e-3;
        let da = -(applied_param - (frame.omega_a - params.omega_d_ge)) * 1e3;
        let ds = (applied_2nd - (2.0 * params.omega_d_ge + params.alpha_d * 1e-3 - frame.omega_s)) * 1e3;
        (tau() * da, tau() * ds)
    } else {
        (-tau() * detuning_param, tau() * detuning_2nd)
    };
    let n_a = ops.number(SLOT_A);
    let n_s = ops.number(SLOT_S);
    let n_d = ops.number(SLOT_D);
    if delta_a != 0.0 {
        spec.add_term(Coefficient::real(delta_a), &n_a);
    }
    if delta_s != 0.0 {
        spec.add_term(Coefficient::real(delta_s), &n_s);
    }

    if opts.full_model {
        let chi = tau() * params.chi_d();
        let [pd, pa, ps] = frame.phi;
        let eps2 = drive.epsilon * drive.epsilon;
        let stark = tau() * drive.stark_param;
        let dp = frame.phi_s_mode;
        let dpp = frame.phi_a_mode;
        // static cross-Kerr couplings
        spec.add_term(Coefficient::real(4.0 * chi * pd * pd * ps * ps), &(&n_d * &n_s));
        spec.add_term(Coefficient::real(4.0 * chi * pd * pd * pa * pa), &(&n_d * &n_a));
        // drive-induced shifts follow the squared envelope
        let shifts = [
            (4.0 * eps2 * chi * pd.powi(4) + stark * (dp[0] - dpp[0]).powi(2), &n_d),
            (4.0 * eps2 * chi * pd * pd * ps * ps + stark * (dp[2] - dpp[2]).powi(2), &n_s),
            (4.0 * eps2 * chi * pd * pd * pa * pa + stark * (dp[1] - dpp[1]).powi(2), &n_a),
        ];
        for (w, op) in shifts {
            if w != 0.0 {
                spec.add_term(Coefficient::func(w.abs(), move |t| C64::new(w * ramp.at(t).powi(2), 0.0)), op);
            }
        }
    }
    Ok(spec)
}

/// Collapse operators of Qubit D: relaxation on both transitions and pure
/// dephasing built from the coherence times.
pub fn qubit_channels(params: &DeviceParams, ops: &Ops) -> Vec<Channel> {
    let mut out = Vec::new();
    let g1_ge = 1.0 / params.t1_ge;
    let g1_ef = 1.0 / params.t1_ef;
    let phi_e = (1.0 / params.t2_ge - g1_ge / 2.0).max(0.0);
    let phi_f = (1.0 / params.t2_ef - (g1_ef + g1_ge) / 2.0 - phi_e).max(0.0);
    let candidates = [
        ("D_relax_ge", g1_ge, ops.d_flip(G, E)),
        ("D_relax_ef", g1_ef, ops.d_flip(E, F)),
        ("D_dephase_e", 2.0 * phi_e, ops.d_flip(E, E)),
        ("D_dephase_f", 2.0 * phi_f, ops.d_flip(F, F)),
    ];
    for (name, rate, op) in candidates {
        if rate > 0.0 {
            out.push(Channel::constant(name, rate, &op));
        }
    }
    out
}

/// Coupler decoherence written in the hybridized basis, with the secular
/// approximation applied: cross terms between the two mode frequencies are dropped.
pub fn coupler_channels(params: &DeviceParams, ops: &Ops) -> Vec<Channel> {
    let mut out = Vec::new();
    let a_a = ops.lower(SLOT_A);
    let a_s = ops.lower(SLOT_S);
    let relax = 1.0 / params.t1_coupler;
    if relax > 0.0 {
        out.push(Channel::constant("C_relax_A", relax / 2.0, &a_a));
        out.push(Channel::constant("C_relax_S", relax / 2.0, &a_s));
    }
    let dephase = (1.0 / params.t2_coupler - relax / 2.0).max(0.0);
    if dephase > 0.0 {
        let rate = 2.0 * dephase / 4.0;
        let n_sum = &ops.number(SLOT_A) + &ops.number(SLOT_S);
        out.push(Channel::constant("C_dephase", rate, &n_sum));
        out.push(Channel::constant("C_dephase_SA", rate, &(&a_s.adjoint() * &a_a)));
        out.push(Channel::constant("C_dephase_AS", rate, &(&a_a.adjoint() * &a_s)));
    }
    out
}

/// Waveguide emission channels `√(Γ_E/2) â_A` and `√(Γ_E/2) â_S`, named "A" and "S".
pub fn waveguide_channels(params: &DeviceParams, ops: &Ops) -> Vec<Channel> {
    let kappa = waveguide_rate(params);
    vec![
        Channel::constant("A", kappa, &ops.lower(SLOT_A)),
        Channel::constant("S", kappa, &ops.lower(SLOT_S)),
    ]
}

/// Sender system: Hamiltonian plus waveguide, qubit and coupler dissipators.
/// With `with_capture` the (still uncoupled) capture cavities are appended.
pub fn sender_system(
    params: &DeviceParams,
    frame: &HybridizedFrame,
    drive: &DriveConfig,
    detuning_param: f64,
    detuning_2nd: f64,
    opts: &HamiltonianOptions,
) -> Result<SystemSpec> {
    let mut spec = build_effective_hamiltonian(params, frame, drive, detuning_param, detuning_2nd, opts)?;
    let ops = Ops::new(opts.with_capture);
    for ch in waveguide_channels(params, &ops)
        .into_iter()
        .chain(qubit_channels(params, &ops))
        .chain(coupler_channels(params, &ops))
    {
        spec.add_channel(ch)?;
    }
    Ok(spec)
}
