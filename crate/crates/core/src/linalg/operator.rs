use std::ops::{Add, Mul, Sub};

use ndarray::Array2;
use num_complex::Complex64 as C64;

use super::Matrix;
use crate::error::{Error, Result};

/// A linear operator on a tensor product of small Hilbert spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    dims: Vec<usize>,
    data: Matrix,
}

impl Operator {
    pub fn new(dims: Vec<usize>, data: Matrix) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(Error::InvalidDimension(format!(
                "operator matrix is {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidDimension(format!("bad subsystem dims {dims:?}")));
        }
        let total: usize = dims.iter().product();
        if total != data.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "dims {dims:?} give {total}, matrix is {}",
                data.nrows()
            )));
        }
        Ok(Self { dims, data })
    }

    /// Single-subsystem operator.
    pub fn from_matrix(data: Matrix) -> Result<Self> {
        let n = data.nrows();
        Self::new(vec![n], data)
    }

    pub fn identity(dims: &[usize]) -> Self {
        let n = dims.iter().product();
        Self { dims: dims.to_vec(), data: Array2::eye(n) }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let n = dims.iter().product();
        Self { dims: dims.to_vec(), data: Matrix::zeros((n, n)) }
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

    pub fn into_matrix(self) -> Matrix {
        self.data
    }

    pub fn adjoint(&self) -> Self {
        Self { dims: self.dims.clone(), data: adjoint(&self.data) }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { dims: self.dims.clone(), data: &self.data * s }
    }

    pub fn trace(&self) -> C64 {
        self.data.diag().sum()
    }

    pub fn compose(&self, other: &Operator) -> Result<Operator> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        Ok(Self { dims: self.dims.clone(), data: self.data.dot(&other.data) })
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.data[[i, j]] - self.data[[j, i]].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() < tol
    }

    /// Lift a single-subsystem operator into the product space `dims` at slot `k`.
    pub fn embed(local: &Operator, k: usize, dims: &[usize]) -> Result<Operator> {
        if k >= dims.len() {
            return Err(Error::InvalidSubsystem(format!("slot {k} of {} subsystems", dims.len())));
        }
        if local.dim() != dims[k] {
            return Err(Error::DimensionMismatch(format!(
                "local operator has dimension {}, slot {k} has {}",
                local.dim(),
                dims[k]
            )));
        }
        let factor = |i: usize| if i == k { local.clone() } else { Operator::identity(&[dims[i]]) };
        Ok((1..dims.len()).fold(factor(0), |acc, i| kron(&acc, &factor(i))))
    }

    /// Matrix-vector product.
    pub fn apply(&self, psi: &[C64]) -> Vec<C64> {
        assert_eq!(psi.len(), self.dim());
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.data[[i, j]] * psi[j]).sum())
            .collect()
    }
}

impl<'a> Mul<&'a Operator> for &'a Operator {
    type Output = Operator;

    fn mul(self, rhs: &'a Operator) -> Operator {
        self.compose(rhs).expect("operator product with mismatched dims")
    }
}

impl<'a> Add<&'a Operator> for &'a Operator {
    type Output = Operator;

    fn add(self, rhs: &'a Operator) -> Operator {
        assert_eq!(self.dims, rhs.dims, "operator sum with mismatched dims");
        Operator { dims: self.dims.clone(), data: &self.data + &rhs.data }
    }
}

impl<'a> Sub<&'a Operator> for &'a Operator {
    type Output = Operator;

    fn sub(self, rhs: &'a Operator) -> Operator {
        assert_eq!(self.dims, rhs.dims, "operator difference with mismatched dims");
        Operator { dims: self.dims.clone(), data: &self.data - &rhs.data }
    }
}

pub fn adjoint(m: &Matrix) -> Matrix {
    m.t().mapv(|z| z.conj())
}

/// Kronecker product; subsystem dims are concatenated.
pub fn kron(a: &Operator, b: &Operator) -> Operator {
    let (na, nb) = (a.dim(), b.dim());
    let mut data = Matrix::zeros((na * nb, na * nb));
    for i in 0..na {
        for j in 0..na {
            let aij = a.data[[i, j]];
            if aij == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..nb {
                for l in 0..nb {
                    data[[i * nb + k, j * nb + l]] = aij * b.data[[k, l]];
                }
            }
        }
    }
    let mut dims = a.dims.clone();
    dims.extend_from_slice(&b.dims);
    Operator { dims, data }
}

/// Truncated bosonic lowering operator, `a[n-1, n] = sqrt(n)`.
pub fn annihilation(dim: usize) -> Result<Operator> {
    if dim < 2 {
        return Err(Error::InvalidDimension(format!("ladder operator needs dim >= 2, got {dim}")));
    }
    let mut data = Matrix::zeros((dim, dim));
    for n in 1..dim {
        data[[n - 1, n]] = C64::new((n as f64).sqrt(), 0.0);
    }
    Operator::from_matrix(data)
}

pub fn creation(dim: usize) -> Result<Operator> {
    Ok(annihilation(dim)?.adjoint())
}

pub fn number(dim: usize) -> Result<Operator> {
    let a = annihilation(dim)?;
    Ok(&a.adjoint() * &a)
}

/// `|i><j|` on a `dim`-level system.
pub fn outer(dim: usize, i: usize, j: usize) -> Operator {
    let mut data = Matrix::zeros((dim, dim));
    data[[i, j]] = C64::new(1.0, 0.0);
    Operator { dims: vec![dim], data }
}

/// Pauli basis `{I, X, Y, Z}` indexed 0..4.
pub fn pauli(k: usize) -> Operator {
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let entries = match k {
        0 => [o, z, z, o],
        1 => [z, o, o, z],
        2 => [z, -i, i, z],
        3 => [o, z, z, -o],
        _ => panic!("Pauli index {k} out of range"),
    };
    Operator { dims: vec![2], data: Matrix::from_shape_vec((2, 2), entries.to_vec()).unwrap() }
}

pub fn basis_vector(dim: usize, i: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); dim];
    v[i] = C64::new(1.0, 0.0);
    v
}

/// Partial trace of an arbitrary square matrix over a tensor-product space,
/// keeping the listed subsystems in their original order.
pub fn partial_trace_matrix(m: &Matrix, dims: &[usize], keep: &[usize]) -> Result<(Vec<usize>, Matrix)> {
    if keep.is_empty() {
        return Err(Error::InvalidSubsystem("keep set is empty".into()));
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if kept.len() != keep.len() {
        return Err(Error::InvalidSubsystem(format!("duplicate indices in {keep:?}")));
    }
    if let Some(&bad) = kept.iter().find(|&&k| k >= dims.len()) {
        return Err(Error::InvalidSubsystem(format!("index {bad} of {} subsystems", dims.len())));
    }
    let total: usize = dims.iter().product();
    if m.nrows() != total || m.ncols() != total {
        return Err(Error::DimensionMismatch(format!("matrix {} vs dims {dims:?}", m.nrows())));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !kept.contains(k)).collect();
    let kept_dims: Vec<usize> = kept.iter().map(|&k| dims[k]).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&k| dims[k]).collect();
    let nk: usize = kept_dims.iter().product();
    let nt: usize = traced_dims.iter().product();

    // strides of each subsystem in the full index
    let mut strides = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    let compose = |sub: &[usize], sub_dims: &[usize], mut idx: usize| -> usize {
        let mut full = 0;
        for (pos, &k) in sub.iter().enumerate().rev() {
            let d = sub_dims[pos];
            full += (idx % d) * strides[k];
            idx /= d;
        }
        full
    };
    let kept_offsets: Vec<usize> = (0..nk).map(|i| compose(&kept, &kept_dims, i)).collect();
    let traced_offsets: Vec<usize> = (0..nt).map(|i| compose(&traced, &traced_dims, i)).collect();

    let mut out = Matrix::zeros((nk, nk));
    for i in 0..nk {
        for j in 0..nk {
            let mut acc = C64::new(0.0, 0.0);
            for &t in &traced_offsets {
                acc += m[[kept_offsets[i] + t, kept_offsets[j] + t]];
            }
            out[[i, j]] = acc;
        }
    }
    Ok((kept_dims, out))
}
