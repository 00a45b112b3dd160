//! State tomography from field moments and qubit process tomography.

mod json;
mod process;
mod sensing;
mod state;

pub use json::{density_json, matrix_from_json, matrix_json, process_json};
pub use process::{
    cardinal_amplitudes, cardinal_states, process_fidelity, qpt, ProcessMatrix, QptOptions, QptResult, TP_FLAG,
};
pub use sensing::{build_sensing_matrix, moment_operator, SensingMatrix, FIELD_DIM, FIELD_DIMS};
pub use state::{
    gd_loss_and_gradient, gd_qst, ls_qst, project_logical, CholeskyAnsatz, LogicalState, LsOptions, Reconstruction,
    LOGICAL_INDICES,
};
