//! Experiment orchestration: emission, measurement, calibration and reconstruction.

use std::sync::Mutex;

use freqbin::detection::{denoise_moments, moments_from_state, normalize_moments, synthesize_repeat, MomentSet, NoiseModel};
use freqbin::device::DeviceParams;
use freqbin::dynamics::{EmissionOptions, EmissionResult, EmissionSetup, ModePair};
use freqbin::linalg::{state_fidelity, DensityMatrix};
use freqbin::tomography::{
    cardinal_amplitudes, cardinal_states, gd_qst, ls_qst, process_fidelity, project_logical, qpt, CholeskyAnsatz,
    LogicalState, LsOptions, ProcessMatrix, QptOptions, QptResult, Reconstruction,
};
use freqbin::{Error, Result, Warning};
use num_complex::Complex64 as C64;

/// Logical amplitudes `[α, β]` of `α|10⟩ + β|01⟩`.
pub type Logical = [C64; 2];

pub fn logical_from_theta(theta: f64) -> Logical {
    [C64::new((theta / 2.0).cos(), 0.0), C64::new((theta / 2.0).sin(), 0.0)]
}

/// Two-mode target over `|00⟩, |01⟩, |10⟩, |11⟩`.
pub fn field_target(amp: &Logical) -> Result<DensityMatrix> {
    let z = C64::new(0.0, 0.0);
    DensityMatrix::from_pure(vec![2, 2], &[z, amp[1], amp[0], z])
}

pub fn logical_target(amp: &Logical) -> Result<DensityMatrix> {
    DensityMatrix::from_pure(vec![2], amp)
}

/// A calibrated emitter with fixed capture filters. Emission runs are cached
/// by their logical amplitudes.
pub struct Lab {
    pub setup: EmissionSetup,
    pub modes: ModePair,
    pub warnings: Vec<Warning>,
    cache: Mutex<Vec<(Logical, EmissionResult)>>,
}

impl Lab {
    pub fn new(params: DeviceParams, eta: f64) -> Result<Self> {
        let (setup, mut warnings) = EmissionSetup::calibrated(params, eta, EmissionOptions::default())?;
        let modes = setup.reference_modes()?;
        warnings.extend(modes.warnings.iter().cloned());
        Ok(Self { setup, modes, warnings, cache: Mutex::new(Vec::new()) })
    }

    pub fn emit(&self, amp: &Logical) -> Result<EmissionResult> {
        let same = |a: &Logical| (a[0] - amp[0]).norm() < 1e-12 && (a[1] - amp[1]).norm() < 1e-12;
        if let Some((_, hit)) = self.cache.lock().unwrap().iter().find(|(a, _)| same(a)) {
            return Ok(hit.clone());
        }
        let result = self.setup.simulate_logical(amp[0], amp[1], &self.modes)?;
        self.cache.lock().unwrap().push((*amp, result.clone()));
        Ok(result)
    }
}

/// Noisy moment measurement followed by denoising. Each measurement uses its
/// own random stream so results do not depend on evaluation order.
#[derive(Debug, Clone, Copy)]
pub struct Detector {
    pub noise: NoiseModel,
}

impl Detector {
    pub fn new(n_added: f64, shots: Option<u64>, seed: u64) -> Result<Self> {
        Ok(Self { noise: NoiseModel::new(n_added, shots, seed)? })
    }

    pub fn measure(&self, rho: &DensityMatrix, stream: u64) -> Result<MomentSet> {
        let (raw, reference) = synthesize_repeat(&moments_from_state(rho)?, &self.noise, stream)?;
        denoise_moments(&raw, &reference)
    }
}

/// Calibration runs with Qubit D in `|e⟩` (mode A) and `|f⟩` (mode S).
#[derive(Debug, Clone)]
pub struct Calibration {
    pub e: MomentSet,
    pub f: MomentSet,
    pub gamma_a: f64,
    pub gamma_s: f64,
}

const STREAM_CAL_E: u64 = 0;
const STREAM_CAL_F: u64 = 1;
const STREAM_FIRST: u64 = 2;

impl Calibration {
    pub fn run(lab: &Lab, det: &Detector) -> Result<Self> {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let e = det.measure(&lab.emit(&[one, zero])?.state, STREAM_CAL_E)?;
        let f = det.measure(&lab.emit(&[zero, one])?.state, STREAM_CAL_F)?;
        let rate = |env: &freqbin::dynamics::Envelope, name: &str| {
            env.gamma_eff.ok_or_else(|| Error::CannotNormalize(format!("no decay rate fitted for mode {name}")))
        };
        Ok(Self { e, f, gamma_a: rate(&lab.modes.a, "A")?, gamma_s: rate(&lab.modes.s, "S")? })
    }

    pub fn normalize(&self, denoised: &MomentSet, params: &DeviceParams) -> Result<(MomentSet, Vec<Warning>)> {
        normalize_moments(denoised, &self.e, &self.f, self.gamma_a, self.gamma_s, params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Ls,
    Gd { rank: usize },
}

impl Method {
    pub fn parse(name: &str, rank: usize) -> Result<Self> {
        match name {
            "ls" => Ok(Method::Ls),
            "gd" if (1..=4).contains(&rank) => Ok(Method::Gd { rank }),
            "gd" => Err(Error::Config(format!("rank must be 1..=4, got {rank}"))),
            other => Err(Error::Config(format!("unknown method {other:?} (ls or gd)"))),
        }
    }

    pub fn reconstruct(self, moments: &MomentSet) -> Result<Reconstruction> {
        match self {
            Method::Ls => ls_qst(moments, &LsOptions::default()),
            Method::Gd { rank } => gd_qst(moments, &CholeskyAnsatz::new(rank)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StateReport {
    pub amplitudes: Logical,
    /// Fidelity of the captured field before measurement.
    pub captured_fidelity: f64,
    pub moments: MomentSet,
    pub reconstruction: Reconstruction,
    /// Two-mode fidelity of the reconstruction.
    pub fidelity: f64,
    pub logical: LogicalState,
    pub logical_fidelity: f64,
    pub warnings: Vec<Warning>,
}

/// Reconstruct each preparation. Without a calibration the denoised moments are
/// used as they are.
pub fn state_tomography(
    lab: &Lab,
    det: &Detector,
    cal: Option<&Calibration>,
    preparations: &[Logical],
    method: Method,
) -> Result<Vec<StateReport>> {
    preparations
        .iter()
        .enumerate()
        .map(|(k, amp)| {
            let emitted = lab.emit(amp)?;
            let target = field_target(amp)?;
            let denoised = det.measure(&emitted.state, STREAM_FIRST + k as u64)?;
            let (moments, mut warnings) = match cal {
                Some(cal) => cal.normalize(&denoised, &lab.setup.params)?,
                None => (denoised, Vec::new()),
            };
            let reconstruction = method.reconstruct(&moments)?;
            let logical = project_logical(&reconstruction.rho)?;
            warnings.extend(emitted.warnings.iter().cloned());
            warnings.extend(reconstruction.warnings.iter().cloned());
            Ok(StateReport {
                amplitudes: *amp,
                captured_fidelity: state_fidelity(&target, &emitted.state)?,
                fidelity: state_fidelity(&target, &reconstruction.rho)?,
                logical_fidelity: state_fidelity(&logical_target(amp)?, &logical.rho)?,
                moments,
                reconstruction,
                logical,
                warnings,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ProcessReport {
    pub states: Vec<StateReport>,
    pub qpt: QptResult,
    /// Process fidelity against the identity channel.
    pub fidelity: f64,
}

/// Emit the four cardinal states, reconstruct each and fit the logical channel.
pub fn process_tomography(lab: &Lab, det: &Detector, cal: Option<&Calibration>, method: Method) -> Result<ProcessReport> {
    let states = state_tomography(lab, det, cal, &cardinal_amplitudes(), method)?;
    let outputs: Vec<DensityMatrix> = states.iter().map(|s| s.logical.rho.clone()).collect();
    let qpt = qpt(&cardinal_states(), &outputs, &QptOptions::default())?;
    let fidelity = process_fidelity(&qpt.process, &ProcessMatrix::identity());
    Ok(ProcessReport { states, qpt, fidelity })
}
