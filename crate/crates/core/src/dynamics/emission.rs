//! End-to-end emission: state preparation, driven decay, envelope extraction
//! and capture of the two frequency-bin modes.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use super::capture::{cascaded_capture, CaptureOptions, CaptureResult, CaptureTarget};
use super::correlation::{filtered_moments, mode_decompose, two_time_correlation, Correlations, Envelope, FilteredMoments};
use super::evolve::{evolve, EvolveOptions, Trajectory, DEFAULT_DT};
use super::model::{emission_window, sender_system, waveguide_rate, HamiltonianOptions, Ops, SLOT_A, SLOT_S, SLOT_VA, SLOT_VS};
use super::system::SystemSpec;
use crate::device::{calibrate_drives, hybridize, DeviceParams, DriveConfig, HybridizedFrame};
use crate::error::{Error, Result, Warning};
use crate::linalg::{DensityMatrix, Operator};

/// Qubit-D preparation before the drives are switched on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    /// `cos(θ/2)|e⟩ + sin(θ/2)|f⟩`
    Encoded,
    /// `½|g⟩ + 1/√2|e⟩ + ½|f⟩`, giving a vacuum component in the field.
    Displaced,
}

impl Protocol {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "encoded" => Ok(Protocol::Encoded),
            "displaced" => Ok(Protocol::Displaced),
            other => Err(Error::InvalidParameter(format!("unknown protocol {other:?}"))),
        }
    }

    /// Qubit-D amplitudes over `g, e, f`.
    pub fn qubit_state(self, theta: f64) -> [C64; 3] {
        let r = |x: f64| C64::new(x, 0.0);
        match self {
            Protocol::Encoded => [r(0.0), r((theta / 2.0).cos()), r((theta / 2.0).sin())],
            Protocol::Displaced => [r(0.5), r(0.5f64.sqrt()), r(0.5)],
        }
    }

    /// Ideal two-mode field over `|n_A n_S⟩ = 00, 01, 10, 11`.
    pub fn ideal_field(self, theta: f64) -> [C64; 4] {
        let [g, e, f] = self.qubit_state(theta);
        [g, f, e, C64::new(0.0, 0.0)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmissionOptions {
    pub hamiltonian: HamiltonianOptions,
    /// Offset of the parametric drive from its calibrated frequency, MHz.
    pub detuning_param: f64,
    /// Offset of the second-order drive, MHz.
    pub detuning_2nd: f64,
    /// Sender integration step, μs; zero selects `min(1 ns, admissible)`.
    pub dt: f64,
    /// Integration steps per correlation sample.
    pub sample_every: usize,
    /// Capture-run step, μs; zero selects the largest admissible step.
    pub capture_dt: f64,
    /// Capture-rate clamp in units of `Γ_E` (angular).
    pub capture_rate_factor: f64,
    /// Fail with envelope-mismatch when capture efficiency is off by more than 2%.
    pub check_capture: bool,
}

impl Default for EmissionOptions {
    fn default() -> Self {
        Self {
            hamiltonian: HamiltonianOptions::default(),
            detuning_param: 0.0,
            detuning_2nd: 0.0,
            dt: 0.0,
            sample_every: 4,
            capture_dt: 0.0,
            capture_rate_factor: 10.0,
            check_capture: true,
        }
    }
}

/// Everything needed to run one emission experiment.
#[derive(Debug, Clone)]
pub struct EmissionSetup {
    pub params: DeviceParams,
    pub frame: HybridizedFrame,
    pub drive: DriveConfig,
    pub options: EmissionOptions,
}

/// Temporal modes of the two channels, used as capture filters.
#[derive(Debug, Clone)]
pub struct ModePair {
    pub a: Envelope,
    pub s: Envelope,
    pub warnings: Vec<Warning>,
}

#[derive(Debug, Clone)]
pub struct EmissionResult {
    pub theta: f64,
    pub protocol: Protocol,
    /// Sender-only run with mode and qubit populations.
    pub trajectory: Trajectory,
    pub capture: CaptureResult,
    /// Captured two-mode field, `|n_A n_S⟩` order.
    pub state: DensityMatrix,
    pub warnings: Vec<Warning>,
}

impl EmissionSetup {
    /// Hybridize `params` and calibrate both drives for parametric amplitude `eta` (MHz).
    pub fn calibrated(params: DeviceParams, eta: f64, options: EmissionOptions) -> Result<(Self, Vec<Warning>)> {
        let frame = hybridize(&params)?;
        let (drive, warnings) = calibrate_drives(&frame, &params, eta)?;
        Ok((Self { params, frame, drive, options }, warnings))
    }

    pub fn t_end(&self) -> f64 {
        emission_window(&self.params, &self.drive)
    }

    /// Sender system, optionally with the capture cavities appended.
    pub fn system(&self, with_capture: bool) -> Result<SystemSpec> {
        let opts = HamiltonianOptions { with_capture, ..self.options.hamiltonian };
        sender_system(
            &self.params,
            &self.frame,
            &self.drive,
            self.options.detuning_param,
            self.options.detuning_2nd,
            &opts,
        )
    }

    fn sender_dt(&self, spec: &SystemSpec) -> f64 {
        if self.options.dt > 0.0 {
            self.options.dt
        } else {
            spec.max_step().min(DEFAULT_DT)
        }
    }

    /// Initial state of the emitter with all modes (and cavities) in vacuum.
    pub fn initial_state(&self, theta: f64, protocol: Protocol, with_capture: bool) -> Result<DensityMatrix> {
        check_theta(theta)?;
        self.initial_state_from(protocol.qubit_state(theta), with_capture)
    }

    /// As [`EmissionSetup::initial_state`] for arbitrary Qubit-D amplitudes over `g, e, f`.
    pub fn initial_state_from(&self, dq: [C64; 3], with_capture: bool) -> Result<DensityMatrix> {
        let ops = Ops::new(with_capture);
        let rest: usize = ops.dims[1..].iter().product();
        let mut psi = vec![C64::new(0.0, 0.0); 3 * rest];
        for (k, amp) in dq.iter().enumerate() {
            psi[k * rest] = *amp;
        }
        DensityMatrix::from_pure(ops.dims, &psi)
    }

    /// Two-time correlations of the "A" and "S" channels.
    pub fn correlations(&self, theta: f64, protocol: Protocol) -> Result<Correlations> {
        check_theta(theta)?;
        self.correlations_from(protocol.qubit_state(theta))
    }

    fn correlations_from(&self, dq: [C64; 3]) -> Result<Correlations> {
        let spec = self.system(false)?;
        let rho0 = self.initial_state_from(dq, false)?;
        let dt = self.sender_dt(&spec);
        two_time_correlation(&spec, &rho0, &["A", "S"], self.t_end(), dt, self.options.sample_every)
    }

    /// Dominant temporal modes from the correlations of a given preparation.
    pub fn modes_from(&self, corr: &Correlations) -> Result<ModePair> {
        let mut warnings = Vec::new();
        let mut take = |name: &str, carrier: f64| -> Result<Envelope> {
            let (mut env, w) = mode_decompose(corr.get(name, name).unwrap(), corr.dt)?;
            env.carrier_ghz = carrier;
            warnings.extend(w);
            Ok(env)
        };
        let a = take("A", self.frame.omega_a)?;
        let s = take("S", self.frame.omega_s)?;
        Ok(ModePair { a, s, warnings })
    }

    /// Reference modes from the balanced superposition, which populates both channels.
    pub fn reference_modes(&self) -> Result<ModePair> {
        self.modes_from(&self.correlations(PI / 2.0, Protocol::Encoded)?)
    }

    /// Regression-theorem moments of the modes for one preparation.
    pub fn regression_moments(&self, theta: f64, protocol: Protocol, modes: &ModePair) -> Result<FilteredMoments> {
        let corr = self.correlations(theta, protocol)?;
        filtered_moments(&corr, &[&modes.a, &modes.s])
    }

    /// Sender-only trajectory with populations of D and both modes.
    pub fn sender_trajectory(&self, theta: f64, protocol: Protocol) -> Result<Trajectory> {
        check_theta(theta)?;
        self.trajectory_from(protocol.qubit_state(theta))
    }

    fn trajectory_from(&self, dq: [C64; 3]) -> Result<Trajectory> {
        let spec = self.system(false)?;
        let rho0 = self.initial_state_from(dq, false)?;
        let ops = Ops::new(false);
        let observables = vec![
            ("n_A".to_string(), ops.number(SLOT_A)),
            ("n_S".to_string(), ops.number(SLOT_S)),
            ("P_e".to_string(), ops.d_flip(1, 1)),
            ("P_f".to_string(), ops.d_flip(2, 2)),
        ];
        let opts = EvolveOptions { observables, sample_every: self.options.sample_every, store_states: false };
        evolve(&rho0, &spec, self.t_end(), self.sender_dt(&spec), &opts)
    }

    /// Run the protocol and capture both modes with the given filters.
    ///
    /// With `check_capture`, the run's own correlations are computed as well and
    /// the captured photons are compared against its dominant-mode photon numbers.
    pub fn simulate(&self, theta: f64, protocol: Protocol, modes: &ModePair) -> Result<EmissionResult> {
        check_theta(theta)?;
        self.run(protocol.qubit_state(theta), theta, protocol, modes)
    }

    /// Emit the logical state `α|10⟩ + β|01⟩` (Qubit D prepared in `α|e⟩ + β|f⟩`).
    pub fn simulate_logical(&self, alpha: C64, beta: C64, modes: &ModePair) -> Result<EmissionResult> {
        let norm = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidParameter("zero logical amplitudes".into()));
        }
        let theta = 2.0 * beta.norm().atan2(alpha.norm());
        self.run([C64::new(0.0, 0.0), alpha / norm, beta / norm], theta, Protocol::Encoded, modes)
    }

    fn run(&self, dq: [C64; 3], theta: f64, protocol: Protocol, modes: &ModePair) -> Result<EmissionResult> {
        let trajectory = self.trajectory_from(dq)?;
        let own_modes = if self.options.check_capture {
            Some(self.modes_from(&self.correlations_from(dq)?)?)
        } else {
            None
        };
        let expected = |pick: fn(&ModePair) -> &Envelope| own_modes.as_ref().map(|m| pick(m).photons);
        let spec = self.system(true)?;
        let rho0 = self.initial_state_from(dq, true)?;
        let targets = [
            CaptureTarget { channel: "A", cavity_slot: SLOT_VA, envelope: &modes.a, expected: expected(|m| &m.a) },
            CaptureTarget { channel: "S", cavity_slot: SLOT_VS, envelope: &modes.s, expected: expected(|m| &m.s) },
        ];
        let opts = CaptureOptions {
            t_end: self.t_end(),
            dt: self.options.capture_dt,
            max_rate: self.options.capture_rate_factor * 2.0 * waveguide_rate(&self.params),
            offset: 0.0,
            check: self.options.check_capture,
        };
        let capture = cascaded_capture(&spec, &rho0, &targets, &opts)?;
        let state = capture.state.clone();
        let mut warnings = modes.warnings.clone();
        let double = state.population(3);
        if double > 0.02 {
            warnings.push(Warning::ProtocolViolation { double_occupancy: double });
        }
        Ok(EmissionResult { theta, protocol, trajectory, capture, state, warnings })
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if !(0.0..=PI + 1e-12).contains(&theta) {
        return Err(Error::InvalidParameter(format!("theta = {theta} outside [0, pi]")));
    }
    Ok(())
}

/// Convenience wrapper: compute reference modes from the balanced superposition
/// and run one preparation.
pub fn simulate_emission(theta: f64, protocol: Protocol, setup: &EmissionSetup) -> Result<EmissionResult> {
    let modes = setup.reference_modes()?;
    setup.simulate(theta, protocol, &modes)
}

/// `|n_A n_S⟩` target of a preparation, as a density matrix.
pub fn ideal_field_state(theta: f64, protocol: Protocol) -> Result<DensityMatrix> {
    DensityMatrix::from_pure(vec![2, 2], &protocol.ideal_field(theta))
}

/// Observable helper for the captured field: `b_A`, `b_S` on `|n_A n_S⟩`.
pub fn field_lowering() -> (Operator, Operator) {
    let dims = [2, 2];
    let a = crate::linalg::annihilation(2).unwrap();
    (Operator::embed(&a, 0, &dims).unwrap(), Operator::embed(&a, 1, &dims).unwrap())
}
