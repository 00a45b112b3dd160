//! Density-matrix reconstruction from field moments.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::sensing::{SensingMatrix, FIELD_DIM, FIELD_DIMS};
use crate::detection::{MomentSet, Stage};
use crate::error::{Error, Result, Warning};
use crate::linalg::{adjoint, eigh, hermitian_part, psd_clip, psd_trace1_project, DensityMatrix, Matrix};

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub rho: DensityMatrix,
    /// `‖B − A·vec(ρ)‖₂` at the returned state.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub warnings: Vec<Warning>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsOptions {
    pub max_iterations: usize,
    /// Stop once the objective fell by less than this over `window` steps.
    pub tolerance: f64,
    pub window: usize,
    /// Optional per-moment weights in grid order (e.g. inverse variances).
    pub weights: Option<Vec<f64>>,
}

impl Default for LsOptions {
    fn default() -> Self {
        Self { max_iterations: 100_000, tolerance: 1e-12, window: 50, weights: None }
    }
}

/// Cholesky-factor parameterization `ρ(T) = T†T / Tr(T†T)` with `T` of shape `rank × 4`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyAnsatz {
    pub rank: usize,
    pub learning_rate: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl CholeskyAnsatz {
    pub fn new(rank: usize) -> Self {
        Self { rank, learning_rate: 0.01, max_iterations: 50_000, tolerance: 1e-14, seed: 0 }
    }
}

/// Weighted least-squares loss `Σ w_k |Tr(O_k ρ) − b_k|²` and its gradient.
struct Objective {
    ops: Vec<Matrix>,
    data: Vec<C64>,
    weights: Vec<f64>,
}

impl Objective {
    fn new(moments: &MomentSet, weights: Option<&[f64]>) -> Result<(Self, SensingMatrix)> {
        match moments.stage {
            Stage::Ideal | Stage::Denoised | Stage::Normalized => {}
            other => {
                return Err(Error::InvalidParameter(format!("cannot reconstruct from {other} moments")));
            }
        }
        let a = SensingMatrix::for_moments(moments)?;
        let weights = match weights {
            Some(w) if w.len() != a.len() => {
                return Err(Error::DimensionMismatch(format!("{} weights for {} moments", w.len(), a.len())));
            }
            Some(w) => w.to_vec(),
            None => vec![1.0; a.len()],
        };
        let ops = (0..a.len()).map(|r| a.observable(r)).collect();
        Ok((Self { ops, data: a.data(moments), weights }, a))
    }

    fn residuals(&self, rho: &Matrix) -> Vec<C64> {
        self.ops
            .iter()
            .zip(&self.data)
            .map(|(o, b)| o.iter().zip(rho.t().iter()).map(|(x, y)| x * y).sum::<C64>() - b)
            .collect()
    }

    fn value(&self, rho: &Matrix) -> f64 {
        self.residuals(rho).iter().zip(&self.weights).map(|(r, w)| w * r.norm_sqr()).sum()
    }

    /// Hermitian `G` with `dL = Tr(G dρ)` for Hermitian `dρ`.
    fn gradient(&self, rho: &Matrix) -> (f64, Matrix) {
        let res = self.residuals(rho);
        let mut g = Matrix::zeros((FIELD_DIM, FIELD_DIM));
        let mut value = 0.0;
        for ((o, r), w) in self.ops.iter().zip(&res).zip(&self.weights) {
            value += w * r.norm_sqr();
            g.scaled_add(C64::new(*w, 0.0) * r.conj(), o);
        }
        (value, &g + &adjoint(&g))
    }

    /// Upper bound on the gradient's Lipschitz constant.
    fn lipschitz(&self) -> f64 {
        2.0 * self
            .ops
            .iter()
            .zip(&self.weights)
            .map(|(o, w)| w * o.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum::<f64>()
    }

    fn residual_norm(&self, rho: &Matrix) -> f64 {
        self.residuals(rho).iter().map(|r| r.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Constrained least squares over density matrices by accelerated projected
/// gradient with an exact simplex-eigenvalue projection.
pub fn ls_qst(moments: &MomentSet, opts: &LsOptions) -> Result<Reconstruction> {
    let (obj, _) = Objective::new(moments, opts.weights.as_deref())?;
    let step = 1.0 / obj.lipschitz().max(1e-12);
    let mut x = Matrix::eye(FIELD_DIM) * C64::new(1.0 / FIELD_DIM as f64, 0.0);
    let mut y = x.clone();
    let mut momentum = 1.0f64;
    let mut history = vec![obj.value(&x)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        let (_, g) = obj.gradient(&y);
        let next = psd_trace1_project(&(&y - &(g * C64::new(step, 0.0))));
        let f_next = obj.value(&next);
        let f_prev = *history.last().unwrap();
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        if f_next > f_prev {
            // restart the momentum when the objective goes up
            y = x.clone();
            momentum = 1.0;
            history.push(f_prev);
        } else {
            let beta = (momentum - 1.0) / t_next;
            y = &next + &((&next - &x) * C64::new(beta, 0.0));
            x = next;
            momentum = t_next;
            history.push(f_next);
        }
        if history.len() > opts.window {
            let old = history[history.len() - 1 - opts.window];
            if old - history[history.len() - 1] < opts.tolerance {
                converged = true;
                break;
            }
        }
    }
    let mut warnings = Vec::new();
    if !converged {
        warnings.push(Warning::NotConverged { iterations, objective: *history.last().unwrap() });
    }
    let rho = DensityMatrix::from_numerical(FIELD_DIMS.to_vec(), &x)?;
    let residual = obj.residual_norm(rho.matrix());
    Ok(Reconstruction { rho, residual, iterations, converged, warnings })
}

fn rho_of(t: &Matrix) -> (Matrix, f64) {
    let m = adjoint(t).dot(t);
    let tau = m.diag().iter().map(|z| z.re).sum::<f64>();
    (m.mapv(|z| z / tau), tau)
}

/// Loss of the Cholesky ansatz at `T`, and its gradient `∇` in the sense
/// `dL = Re Tr(∇† dT)` (Wirtinger derivative `2·∂L/∂T*`).
pub fn gd_loss_and_gradient(moments: &MomentSet, t: &Matrix) -> Result<(f64, Matrix)> {
    let (obj, _) = Objective::new(moments, None)?;
    Ok(loss_and_gradient(&obj, t))
}

fn loss_and_gradient(obj: &Objective, t: &Matrix) -> (f64, Matrix) {
    let (rho, tau) = rho_of(t);
    let (value, g) = obj.gradient(&rho);
    let shift: f64 = g.iter().zip(rho.t().iter()).map(|(a, b)| a * b).sum::<C64>().re;
    let h = (&g - &(Matrix::eye(FIELD_DIM) * C64::new(shift, 0.0))) * C64::new(1.0 / tau, 0.0);
    (value, t.dot(&h) * C64::new(2.0, 0.0))
}

/// Unconstrained least-squares estimate via the pseudo-inverse of the sensing matrix.
fn linear_inversion(obj: &Objective) -> Matrix {
    let n = FIELD_DIM * FIELD_DIM;
    // normal equations over row-major vec(ρ): Σ w conj(o_r) o_rᵀ
    let rows: Vec<Vec<C64>> = obj
        .ops
        .iter()
        .map(|o| (0..n).map(|c| o[[c % FIELD_DIM, c / FIELD_DIM]]).collect())
        .collect();
    let mut normal = Matrix::zeros((n, n));
    let mut rhs = vec![C64::new(0.0, 0.0); n];
    for ((row, b), w) in rows.iter().zip(&obj.data).zip(&obj.weights) {
        for i in 0..n {
            rhs[i] += row[i].conj() * b * *w;
            for j in 0..n {
                normal[[i, j]] += row[i].conj() * row[j] * *w;
            }
        }
    }
    let e = eigh(&normal);
    let top = e.values.iter().cloned().fold(0.0, f64::max);
    let mut x = vec![C64::new(0.0, 0.0); n];
    for (k, &lam) in e.values.iter().enumerate() {
        if lam <= 1e-10 * top {
            continue;
        }
        let v = e.vectors.column(k);
        let coef: C64 = v.iter().zip(&rhs).map(|(a, b)| a.conj() * b).sum::<C64>() / lam;
        for i in 0..n {
            x[i] += v[i] * coef;
        }
    }
    hermitian_part(&Matrix::from_shape_vec((FIELD_DIM, FIELD_DIM), x).unwrap())
}

fn initial_factor(obj: &Objective, rank: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };
    let estimate = psd_clip(&linear_inversion(obj));
    let tr = estimate.diag().iter().map(|z| z.re).sum::<f64>();
    let mut t = Matrix::zeros((rank, FIELD_DIM));
    if tr > 1e-9 {
        // rows √λ_k v_k† for the largest eigenvalues
        let e = eigh(&estimate.mapv(|z| z / tr));
        for r in 0..rank {
            let k = FIELD_DIM - 1 - r;
            let s = e.values[k].max(0.0).sqrt();
            for j in 0..FIELD_DIM {
                t[[r, j]] = e.vectors[[j, k]].conj() * s;
            }
        }
        // small kick so that rows started at zero can grow
        t.mapv_inplace(|z| z + C64::new(gauss(), gauss()) * 1e-3);
    } else {
        t.mapv_inplace(|_| C64::new(gauss(), gauss()));
    }
    t
}

/// Gradient-descent reconstruction over the Cholesky ansatz with backtracking.
pub fn gd_qst(moments: &MomentSet, ansatz: &CholeskyAnsatz) -> Result<Reconstruction> {
    if !(1..=FIELD_DIM).contains(&ansatz.rank) {
        return Err(Error::InvalidParameter(format!("rank {} outside 1..=4", ansatz.rank)));
    }
    if !(ansatz.learning_rate > 0.0) {
        return Err(Error::InvalidParameter(format!("learning rate {}", ansatz.learning_rate)));
    }
    let (obj, _) = Objective::new(moments, None)?;
    let mut t = initial_factor(&obj, ansatz.rank, ansatz.seed);
    let (mut loss, mut grad) = loss_and_gradient(&obj, &t);
    let mut lr = ansatz.learning_rate;
    let mut converged = false;
    let mut iterations = 0;
    let mut history = vec![loss];
    while iterations < ansatz.max_iterations {
        iterations += 1;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = &t - &(&grad * C64::new(lr, 0.0));
            let (l, g) = loss_and_gradient(&obj, &trial);
            if l <= loss {
                accepted = Some((trial, l, g));
                break;
            }
            lr *= 0.5;
        }
        let Some((trial, l, g)) = accepted else {
            converged = true;
            break;
        };
        t = trial;
        loss = l;
        grad = g;
        lr = (lr * 2.0).min(ansatz.learning_rate);
        history.push(loss);
        let gnorm = grad.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if gnorm < 1e-12 {
            converged = true;
            break;
        }
        if history.len() > 50 && history[history.len() - 51] - loss < ansatz.tolerance * loss.max(1e-300) + 1e-300 {
            converged = true;
            break;
        }
    }
    let mut warnings = Vec::new();
    if !converged {
        warnings.push(Warning::NotConverged { iterations, objective: loss });
    }
    if ansatz.rank == 1 && loss > 1e-3 {
        warnings.push(Warning::RankDeficient { loss });
    }
    let (rho, _) = rho_of(&t);
    let rho = DensityMatrix::from_numerical(FIELD_DIMS.to_vec(), &rho)?;
    let residual = obj.residual_norm(rho.matrix());
    Ok(Reconstruction { rho, residual, iterations, converged, warnings })
}

/// Logical qubit carried by the single-photon subspace.
#[derive(Debug, Clone)]
pub struct LogicalState {
    /// Basis `|0_L⟩ = |1_A 0_S⟩`, `|1_L⟩ = |0_A 1_S⟩`.
    pub rho: DensityMatrix,
    /// Weight outside the single-photon subspace.
    pub discarded: f64,
}

/// Indices of `|10⟩` and `|01⟩` in `|n_A n_S⟩` order.
pub const LOGICAL_INDICES: [usize; 2] = [2, 1];

pub fn project_logical(rho: &DensityMatrix) -> Result<LogicalState> {
    if rho.dims() != FIELD_DIMS {
        return Err(Error::DimensionMismatch(format!("expected dims [2, 2], got {:?}", rho.dims())));
    }
    let block = Matrix::from_shape_fn((2, 2), |(i, j)| rho.matrix()[[LOGICAL_INDICES[i], LOGICAL_INDICES[j]]]);
    let weight = block.diag().iter().map(|z| z.re).sum::<f64>();
    if weight < 1e-6 {
        return Err(Error::EmptySubspace(weight));
    }
    let rho = DensityMatrix::from_numerical(vec![2], &block.mapv(|z| z / weight))?;
    Ok(LogicalState { rho, discarded: (1.0 - weight).max(0.0) })
}
