use num_complex::Complex64 as C64;

use crate::detection::{MomentIndex, MomentSet};
use crate::error::{Error, Result};
use crate::linalg::{annihilation, Matrix, Operator};

/// Two-mode space `|n_A n_S⟩` with one photon per mode at most.
pub const FIELD_DIMS: [usize; 2] = [2, 2];
pub const FIELD_DIM: usize = 4;

/// `(a_A†)^m a_A^n (a_S†)^p a_S^q` on the truncated two-mode space.
pub fn moment_operator(k: MomentIndex) -> Matrix {
    let a = Operator::embed(&annihilation(2).unwrap(), 0, &FIELD_DIMS).unwrap();
    let b = Operator::embed(&annihilation(2).unwrap(), 1, &FIELD_DIMS).unwrap();
    let power = |op: &Operator, k: u8| (0..k).fold(Operator::identity(&FIELD_DIMS), |acc, _| &acc * op);
    let op = &(&(&power(&a.adjoint(), k[0]) * &power(&a, k[1])) * &power(&b.adjoint(), k[2])) * &power(&b, k[3]);
    op.into_matrix()
}

/// Linear map from row-major `vec(ρ)` to moment expectation values.
#[derive(Debug, Clone)]
pub struct SensingMatrix {
    pub indices: Vec<MomentIndex>,
    /// One row per index; `rows.row(r) · vec(ρ) = Tr(O_r ρ)`.
    pub rows: Matrix,
}

pub fn build_sensing_matrix(indices: &[MomentIndex]) -> Result<SensingMatrix> {
    if indices.is_empty() {
        return Err(Error::InvalidParameter("sensing matrix needs at least one moment".into()));
    }
    let mut rows = Matrix::zeros((indices.len(), FIELD_DIM * FIELD_DIM));
    for (r, &k) in indices.iter().enumerate() {
        let o = moment_operator(k);
        for i in 0..FIELD_DIM {
            for j in 0..FIELD_DIM {
                rows[[r, FIELD_DIM * i + j]] = o[[j, i]];
            }
        }
    }
    Ok(SensingMatrix { indices: indices.to_vec(), rows })
}

impl SensingMatrix {
    pub fn for_moments(moments: &MomentSet) -> Result<Self> {
        build_sensing_matrix(&moments.indices().collect::<Vec<_>>())
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Observable of row `r` as a matrix.
    pub fn observable(&self, r: usize) -> Matrix {
        Matrix::from_shape_fn((FIELD_DIM, FIELD_DIM), |(j, i)| self.rows[[r, FIELD_DIM * i + j]])
    }

    /// Predicted moments `A·vec(ρ)`.
    pub fn apply(&self, rho: &Matrix) -> Vec<C64> {
        let v: Vec<C64> = rho.iter().copied().collect();
        self.rows.outer_iter().map(|row| row.iter().zip(&v).map(|(a, x)| a * x).sum()).collect()
    }

    /// Measured values in row order.
    pub fn data(&self, moments: &MomentSet) -> Vec<C64> {
        self.indices.iter().map(|&k| moments.get(k)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::{moment_grid, moments_from_state};
    use crate::linalg::DensityMatrix;

    #[test]
    fn rows_reproduce_moments() {
        let r = |x: f64| C64::new(x, 0.0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let rho = DensityMatrix::from_pure(vec![2, 2], &[r(0.0), r(s), r(s), r(0.0)]).unwrap();
        let a = build_sensing_matrix(&moment_grid()).unwrap();
        let m = moments_from_state(&rho).unwrap();
        for (k, v) in a.indices.iter().zip(a.apply(rho.matrix())) {
            assert!((v - m.get(*k)).norm() < 1e-12);
        }
    }

    #[test]
    fn identity_and_number_rows() {
        let a = build_sensing_matrix(&[[0, 0, 0, 0], [1, 1, 0, 0]]).unwrap();
        let rho = DensityMatrix::basis(vec![2, 2], 2).unwrap();
        let v = a.apply(rho.matrix());
        assert_eq!(v[0], C64::new(1.0, 0.0));
        assert_eq!(v[1], C64::new(1.0, 0.0));
        assert_eq!(a.observable(1)[[2, 2]], C64::new(1.0, 0.0));
        assert!(build_sensing_matrix(&[]).is_err());
    }
}
