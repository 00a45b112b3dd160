//! Single-qubit process tomography in the Pauli (χ) representation.
//!
//! Convention: `E(ρ) = Σ_mn χ_mn σ_m ρ σ_n` with `σ = {I, X, Y, Z}`, so a
//! trace-preserving map has `Tr χ = 1` and `Σ_mn χ_mn σ_n σ_m = I`.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result, Warning};
use crate::linalg::{adjoint, eigh, frobenius, hermitian_part, pauli, psd_clip, DensityMatrix, Matrix};

/// TP residual above which a reconstruction is flagged non-TP.
pub const TP_FLAG: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessMatrix {
    pub chi: Matrix,
}

fn paulis() -> [Matrix; 4] {
    [0, 1, 2, 3].map(|k| pauli(k).into_matrix())
}

/// Columns are row-major `vec(σ_m)`.
fn pauli_vec_basis() -> Matrix {
    let p = paulis();
    Matrix::from_shape_fn((4, 4), |(r, m)| p[m][[r / 2, r % 2]])
}

impl ProcessMatrix {
    pub fn identity() -> Self {
        let mut chi = Matrix::zeros((4, 4));
        chi[[0, 0]] = C64::new(1.0, 0.0);
        Self { chi }
    }

    /// `χ_mn = c_m c_n*` for `U = Σ c_m σ_m`.
    pub fn from_unitary(u: &Matrix) -> Self {
        let p = paulis();
        let c: Vec<C64> = p.iter().map(|s| s.dot(u).diag().sum() * 0.5).collect();
        Self { chi: Matrix::from_shape_fn((4, 4), |(m, n)| c[m] * c[n].conj()) }
    }

    pub fn apply(&self, rho: &Matrix) -> Matrix {
        let p = paulis();
        let mut out = Matrix::zeros((2, 2));
        for m in 0..4 {
            let left = p[m].dot(rho);
            for n in 0..4 {
                out.scaled_add(self.chi[[m, n]], &left.dot(&p[n]));
            }
        }
        out
    }

    pub fn trace(&self) -> f64 {
        self.chi.diag().iter().map(|z| z.re).sum()
    }

    /// `‖Σ χ_mn σ_n σ_m − I‖_F`
    pub fn tp_residual(&self) -> f64 {
        let p = paulis();
        let mut s = Matrix::zeros((2, 2));
        for m in 0..4 {
            for n in 0..4 {
                s.scaled_add(self.chi[[m, n]], &p[n].dot(&p[m]));
            }
        }
        frobenius(&(s - Matrix::eye(2)))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        eigh(&self.chi).values[0]
    }

    /// Choi matrix `J = Σ χ_mn vec(σ_m) vec(σ_n)†`, with `Tr₁ J = I` for TP maps.
    pub fn to_choi(&self) -> Matrix {
        let w = pauli_vec_basis();
        w.dot(&self.chi).dot(&adjoint(&w))
    }

    pub fn from_choi(j: &Matrix) -> Self {
        let w = pauli_vec_basis();
        Self { chi: adjoint(&w).dot(j).dot(&w) * C64::new(0.25, 0.0) }
    }
}

/// `Tr(χ_ideal χ)`; both are taken trace-normalized.
pub fn process_fidelity(chi: &ProcessMatrix, chi_ideal: &ProcessMatrix) -> f64 {
    chi_ideal.chi.iter().zip(chi.chi.t().iter()).map(|(a, b)| a * b).sum::<C64>().re
}

/// Logical preparations `|0⟩, (|0⟩+|1⟩)/√2, |1⟩, (|0⟩−i|1⟩)/√2`.
pub fn cardinal_amplitudes() -> [[C64; 2]; 4] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let r = |x: f64| C64::new(x, 0.0);
    [[r(1.0), r(0.0)], [r(s), r(s)], [r(0.0), r(1.0)], [r(s), C64::new(0.0, -s)]]
}

pub fn cardinal_states() -> Vec<DensityMatrix> {
    cardinal_amplitudes().iter().map(|a| DensityMatrix::from_pure(vec![2], a).unwrap()).collect()
}

fn partial_trace_first(j: &Matrix) -> Matrix {
    Matrix::from_shape_fn((2, 2), |(c, d)| j[[c, d]] + j[[2 + c, 2 + d]])
}

/// Nearest point of `{J : Tr₁ J = I}`.
fn project_tp(j: &Matrix) -> Matrix {
    let excess = partial_trace_first(j) - Matrix::eye(2);
    let mut out = j.clone();
    for a in 0..2 {
        for c in 0..2 {
            for d in 0..2 {
                out[[2 * a + c, 2 * a + d]] -= excess[[c, d]] * 0.5;
            }
        }
    }
    out
}

/// Dykstra's alternating projections onto PSD ∩ TP in Choi space.
fn project_cptp(j: &Matrix, tol: f64, max_rounds: usize) -> Matrix {
    let mut x = hermitian_part(j);
    let mut p = Matrix::zeros((4, 4));
    let mut q = Matrix::zeros((4, 4));
    for _ in 0..max_rounds {
        let y = project_tp(&(&x + &p));
        p = &x + &p - &y;
        let next = psd_clip(&(&y + &q));
        q = &y + &q - &next;
        let change = frobenius(&(&next - &x));
        x = next;
        if change < tol && frobenius(&(partial_trace_first(&x) - Matrix::eye(2))) < tol {
            break;
        }
    }
    hermitian_part(&x)
}

#[derive(Debug, Clone)]
pub struct QptOptions {
    pub max_iterations: usize,
    /// Target for the Dykstra inner loop and the outer step size.
    pub tolerance: f64,
}

impl Default for QptOptions {
    fn default() -> Self {
        Self { max_iterations: 20_000, tolerance: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct QptResult {
    pub process: ProcessMatrix,
    /// `Σ_j ‖E(ρ_j) − out_j‖_F²` at the solution.
    pub objective: f64,
    pub iterations: usize,
    pub warnings: Vec<Warning>,
}

/// Least-squares χ from input/output pairs, constrained to completely positive
/// trace-preserving maps.
pub fn qpt(inputs: &[DensityMatrix], outputs: &[DensityMatrix], opts: &QptOptions) -> Result<QptResult> {
    if inputs.len() != outputs.len() || inputs.is_empty() {
        return Err(Error::InvalidParameter(format!("{} inputs vs {} outputs", inputs.len(), outputs.len())));
    }
    if inputs.iter().chain(outputs).any(|r| r.dim() != 2) {
        return Err(Error::DimensionMismatch("process tomography needs qubit states".into()));
    }
    let p = paulis();
    // M[(j,a,b), (m,n)] = (σ_m ρ_j σ_n)_ab
    let rows = 4 * inputs.len();
    let mut big = Matrix::zeros((rows, 16));
    let mut d = Vec::with_capacity(rows);
    for (j, (rin, rout)) in inputs.iter().zip(outputs).enumerate() {
        for m in 0..4 {
            let left = p[m].dot(rin.matrix());
            for n in 0..4 {
                let block = left.dot(&p[n]);
                for a in 0..2 {
                    for b in 0..2 {
                        big[[4 * j + 2 * a + b, 4 * m + n]] = block[[a, b]];
                    }
                }
            }
        }
        d.extend(rout.matrix().iter().copied());
    }
    let normal = adjoint(&big).dot(&big);
    let spectrum = eigh(&normal).values;
    let (lo, hi) = (spectrum[0], *spectrum.last().unwrap());
    if lo < 1e-10 * hi {
        return Err(Error::InvalidParameter("input states do not span the qubit operator space".into()));
    }
    let residual = |chi: &Matrix| -> (f64, Vec<C64>) {
        let x: Vec<C64> = chi.iter().copied().collect();
        let r: Vec<C64> = (0..rows).map(|i| big.row(i).iter().zip(&x).map(|(a, b)| a * b).sum::<C64>() - d[i]).collect();
        (r.iter().map(|z| z.norm_sqr()).sum(), r)
    };
    let step = 1.0 / (2.0 * hi);
    let project = |chi: &Matrix| ProcessMatrix::from_choi(&project_cptp(&ProcessMatrix { chi: chi.clone() }.to_choi(), opts.tolerance * 1e-2, 5000)).chi;

    let mut x = project(&ProcessMatrix::identity().chi);
    let mut y = x.clone();
    let mut momentum = 1.0f64;
    let (mut f, _) = residual(&x);
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        let (_, r) = residual(&y);
        let grad_vec: Vec<C64> = (0..16).map(|c| big.column(c).iter().zip(&r).map(|(a, b)| a.conj() * b).sum::<C64>() * 2.0).collect();
        let grad = hermitian_part(&Matrix::from_shape_vec((4, 4), grad_vec).unwrap());
        let next = project(&(&y - &(grad * C64::new(step, 0.0))));
        let (f_next, _) = residual(&next);
        let change = frobenius(&(&next - &x));
        if f_next > f * (1.0 + 1e-12) + 1e-24 {
            if momentum == 1.0 {
                // a plain gradient step no longer descends
                break;
            }
            y = x.clone();
            momentum = 1.0;
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        y = &next + &((&next - &x) * C64::new((momentum - 1.0) / t_next, 0.0));
        momentum = t_next;
        x = next;
        f = f_next;
        if change < opts.tolerance * 1e-4 {
            break;
        }
    }
    let mut warnings = Vec::new();
    let process = ProcessMatrix { chi: x };
    let tp = process.tp_residual();
    if tp > TP_FLAG {
        warnings.push(Warning::NonTracePreserving { residual: tp });
    }
    if iterations >= opts.max_iterations {
        warnings.push(Warning::NotConverged { iterations, objective: f });
    }
    Ok(QptResult { process, objective: f, iterations, warnings })
}
