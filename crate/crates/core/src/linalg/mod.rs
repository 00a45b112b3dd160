//! Dense complex linear algebra over small tensor-product Hilbert spaces.

mod eigen;
mod operator;
mod state;

use ndarray::Array2;
use num_complex::Complex64;

pub use eigen::{eigh, project_simplex, Eigh};
pub use operator::{
    adjoint, annihilation, basis_vector, creation, kron, number, outer, partial_trace_matrix, pauli,
    Operator,
};
pub use state::{psd_clip, psd_trace1_project, sqrt_psd, state_fidelity, trace_distance, DensityMatrix};

/// Complex square matrix, row-major.
pub type Matrix = Array2<Complex64>;

pub(crate) fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Frobenius norm.
pub fn frobenius(m: &Matrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Hilbert-Schmidt inner product `Tr(a† b)`.
pub fn hs_inner(a: &Matrix, b: &Matrix) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Row-major vectorization.
pub fn vec_row_major(m: &Matrix) -> Vec<Complex64> {
    m.iter().copied().collect()
}

pub fn unvec_row_major(v: &[Complex64], n: usize) -> Matrix {
    Matrix::from_shape_vec((n, n), v.to_vec()).expect("vector length must be n^2")
}

/// `(m + m†)/2`
pub fn hermitian_part(m: &Matrix) -> Matrix {
    (m + &adjoint(m)) * c64(0.5, 0.0)
}
