use num_complex::Complex64 as C64;

use super::{c64, eigh, hermitian_part, partial_trace_matrix, project_simplex, Matrix, Operator};
use crate::error::{Error, Result};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const EIGEN_FLOOR: f64 = -1e-10;
pub const DEFAULT_TRACE_TOL: f64 = 1e-10;

/// A validated density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dims: Vec<usize>,
    data: Matrix,
    trace_tol: f64,
}

impl DensityMatrix {
    /// Validate and wrap `data`. Hermiticity, unit trace and positivity are checked.
    pub fn new(dims: Vec<usize>, data: Matrix) -> Result<Self> {
        Self::with_tolerance(dims, data, DEFAULT_TRACE_TOL)
    }

    pub fn with_tolerance(dims: Vec<usize>, data: Matrix, trace_tol: f64) -> Result<Self> {
        let op = Operator::new(dims, data)?;
        let herm = op.hermiticity_error();
        if herm >= HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (max |M - M†| = {herm:.3e})")));
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > trace_tol || tr.im.abs() > trace_tol {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = eigh(op.matrix()).values[0];
        if min < EIGEN_FLOOR {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        let dims = op.dims().to_vec();
        Ok(Self { dims, data: op.into_matrix(), trace_tol })
    }

    /// Turn an integrator or solver output into a valid state: Hermitian part,
    /// eigenvalues clipped at zero, trace renormalized.
    pub fn from_numerical(dims: Vec<usize>, data: &Matrix) -> Result<Self> {
        let op = Operator::new(dims, data.clone())?;
        let h = hermitian_part(op.matrix());
        let clipped = psd_clip(&h);
        let tr = clipped.diag().sum().re;
        if !(tr > 0.0) {
            return Err(Error::InvalidState(format!("non-positive trace {tr:.3e}")));
        }
        let data = clipped.mapv(|z| z / tr);
        Ok(Self { dims: op.dims().to_vec(), data: hermitian_part(&data), trace_tol: DEFAULT_TRACE_TOL })
    }

    pub fn from_pure(dims: Vec<usize>, psi: &[C64]) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if norm2 <= 0.0 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let n = psi.len();
        let mut data = Matrix::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                data[[i, j]] = psi[i] * psi[j].conj() / norm2;
            }
        }
        let op = Operator::new(dims, data)?;
        Ok(Self { dims: op.dims().to_vec(), data: hermitian_part(op.matrix()), trace_tol: DEFAULT_TRACE_TOL })
    }

    pub fn maximally_mixed(dims: Vec<usize>) -> Self {
        let n: usize = dims.iter().product();
        let data = Matrix::eye(n).mapv(|z| z / n as f64);
        Self { dims, data, trace_tol: DEFAULT_TRACE_TOL }
    }

    /// Computational basis state `|k⟩⟨k|`.
    pub fn basis(dims: Vec<usize>, k: usize) -> Result<Self> {
        let n: usize = dims.iter().product();
        if k >= n {
            return Err(Error::InvalidDimension(format!("basis index {k} in dimension {n}")));
        }
        Self::from_pure(dims, &super::basis_vector(n, k))
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.data
    }

    pub fn trace_tol(&self) -> f64 {
        self.trace_tol
    }

    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let (dims, data) = partial_trace_matrix(&self.data, &self.dims, keep)?;
        Ok(Self { dims, data, trace_tol: self.trace_tol })
    }

    /// `Tr(O ρ)`
    pub fn expectation(&self, op: &Matrix) -> C64 {
        let n = self.dim();
        let mut acc = c64(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += op[[i, j]] * self.data[[j, i]];
            }
        }
        acc
    }

    pub fn purity(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn population(&self, k: usize) -> f64 {
        self.data[[k, k]].re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eigh(&self.data).values
    }
}

/// Zero out negative eigenvalues.
pub fn psd_clip(h: &Matrix) -> Matrix {
    eigh(h).reconstruct_with(|x| x.max(0.0))
}

/// Principal square root of a PSD matrix, negative eigenvalues clipped.
pub fn sqrt_psd(h: &Matrix) -> Matrix {
    eigh(h).reconstruct_with(|x| x.max(0.0).sqrt())
}

/// Frobenius-nearest density matrix: eigenvalues projected onto the simplex.
pub fn psd_trace1_project(h: &Matrix) -> Matrix {
    let e = eigh(&hermitian_part(h));
    let projected = project_simplex(&e.values);
    let rebuilt = super::Eigh { values: projected, vectors: e.vectors }.reconstruct_with(|x| x);
    hermitian_part(&rebuilt)
}

/// Jozsa fidelity `(Tr √(√σ ρ √σ))²` with `σ` the ideal state.
pub fn state_fidelity(ideal: &DensityMatrix, rho: &DensityMatrix) -> Result<f64> {
    if ideal.dims() != rho.dims() {
        return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", ideal.dims(), rho.dims())));
    }
    let e = eigh(ideal.matrix());
    let top = *e.values.last().unwrap();
    let f = if (top - 1.0).abs() < 1e-12 {
        // pure ideal: F = <psi|rho|psi>
        let psi = e.vector(e.values.len() - 1);
        let n = psi.len();
        let mut acc = c64(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += psi[i].conj() * rho.matrix()[[i, j]] * psi[j];
            }
        }
        acc.re
    } else {
        let s = e.reconstruct_with(|x| x.max(0.0).sqrt());
        let inner = s.dot(rho.matrix()).dot(&s);
        let root_trace: f64 = eigh(&inner).values.iter().map(|x| x.max(0.0).sqrt()).sum();
        root_trace * root_trace
    };
    Ok(f.clamp(0.0, 1.0))
}

/// `½ ‖ρ − σ‖₁`
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", a.dims(), b.dims())));
    }
    let diff = a.matrix() - b.matrix();
    Ok(0.5 * eigh(&diff).values.iter().map(|x| x.abs()).sum::<f64>())
}
