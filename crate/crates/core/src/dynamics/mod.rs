//! Open-system dynamics of the emitter: model construction, master-equation
//! integration, two-time correlations, capture and spectroscopy.

mod capture;
mod correlation;
mod emission;
mod evolve;
pub mod model;
mod spectroscopy;
mod system;

pub use capture::{cascaded_capture, CaptureCoupling, CaptureOptions, CaptureResult, CaptureTarget, CAPTURE_TOLERANCE};
pub use correlation::{
    filtered_moments, fit_exponential_decay, mode_decompose, two_time_correlation, Correlations, Envelope,
    FilteredMoments, PURITY_WARN,
};
pub use emission::{
    field_lowering, ideal_field_state, simulate_emission, EmissionOptions, EmissionResult, EmissionSetup, ModePair,
    Protocol,
};
pub use evolve::{evolve, step_grid, EvolveOptions, Rk4, Trajectory, DEFAULT_DT, TRACE_DRIFT_TOL};
pub use model::{build_effective_hamiltonian, HamiltonianOptions, Ramp};
pub use spectroscopy::{
    linspace, mode_coupling_ratio, spectroscopy_point, spectroscopy_sweep, spectroscopy_system, SpectroscopySurface,
    SweepKind, SweepOptions,
};
pub use system::{Channel, Coefficient, FrameKind, SparseOp, SystemSpec, Term, MAX_DIMENSION};
