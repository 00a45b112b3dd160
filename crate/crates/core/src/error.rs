use std::fmt;

use thiserror::Error;

/// Failures raised by the simulation, detection and reconstruction stages.
///
/// The `Display` text of each variant starts with a stable kebab-case tag so that
/// front ends can echo it verbatim.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid-dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid-subsystem: {0}")]
    InvalidSubsystem(String),

    #[error("dimension-mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid-state: {0}")]
    InvalidState(String),

    #[error("invalid-parameter: {0}")]
    InvalidParameter(String),

    #[error("ill-conditioned-hybridization: eigenvalue gap {gap_ghz:.3e} GHz")]
    IllConditionedHybridization { gap_ghz: f64 },

    #[error("singular-working-point: |cos(phi_dc)| = {0:.3e}")]
    SingularWorkingPoint(f64),

    #[error("step-size-too-large: {0}")]
    StepSizeTooLarge(String),

    #[error("fit-failed: {0}")]
    FitFailed(String),

    #[error("envelope-mismatch: captured {captured:.4} photons, emitted {emitted:.4}")]
    EnvelopeMismatch { captured: f64, emitted: f64 },

    #[error("grid-mismatch: record has {record} samples, envelope has {envelope}")]
    GridMismatch { record: usize, envelope: usize },

    #[error("bad-reference: {0}")]
    BadReference(String),

    #[error("cannot-normalize: {0}")]
    CannotNormalize(String),

    #[error("empty-subspace: projected weight {0:.3e}")]
    EmptySubspace(f64),

    #[error("all-flagged: no weight outside the |f> herald state")]
    AllFlagged,

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Whether the failure is an invariant violation (as opposed to a numerical
    /// failure or a bad input).
    pub fn is_invariant_violation(&self) -> bool {
        matches!(
            self,
            Error::InvalidState(_) | Error::EnvelopeMismatch { .. } | Error::StepSizeTooLarge(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Non-fatal conditions. They travel alongside results and are surfaced in
/// reports rather than aborting a computation.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    WeakDriveAssumptionViolated { eta_mhz: f64, limit_mhz: f64 },
    MultimodeEmission { purity: f64 },
    EmptyEnvelope,
    RankDeficient { loss: f64 },
    NotConverged { iterations: usize, objective: f64 },
    NonTracePreserving { residual: f64 },
    ProtocolViolation { double_occupancy: f64 },
    DegenerateNormalization { target: f64 },
}

impl Warning {
    pub fn tag(&self) -> &'static str {
        match self {
            Warning::WeakDriveAssumptionViolated { .. } => "weak-drive-assumption-violated",
            Warning::MultimodeEmission { .. } => "multimode-emission",
            Warning::EmptyEnvelope => "empty-envelope",
            Warning::RankDeficient { .. } => "rank-deficient",
            Warning::NotConverged { .. } => "non-convergence",
            Warning::NonTracePreserving { .. } => "non-TP",
            Warning::ProtocolViolation { .. } => "protocol-violation",
            Warning::DegenerateNormalization { .. } => "degenerate-normalization",
        }
    }
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.tag())?;
        match self {
            Warning::WeakDriveAssumptionViolated { eta_mhz, limit_mhz } => {
                write!(f, ": eta = {eta_mhz} MHz exceeds {limit_mhz} MHz")
            }
            Warning::MultimodeEmission { purity } => write!(f, ": mode purity {purity:.4}"),
            Warning::EmptyEnvelope => write!(f, ": no photons in channel"),
            Warning::RankDeficient { loss } => write!(f, ": loss plateau {loss:.3e}"),
            Warning::NotConverged { iterations, objective } => {
                write!(f, ": {iterations} iterations, objective {objective:.3e}")
            }
            Warning::NonTracePreserving { residual } => write!(f, ": TP residual {residual:.3e}"),
            Warning::ProtocolViolation { double_occupancy } => {
                write!(f, ": |11> weight {double_occupancy:.4}")
            }
            Warning::DegenerateNormalization { target } => {
                write!(f, ": calibration target {target:.3e}")
            }
        }
    }
}
