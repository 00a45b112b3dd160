//! Photon loss on the two frequency bins, ideal re-absorption by a receiver
//! qubit, and loss heralding through its `|f⟩` state.

use std::io::Write;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result, Warning};
use crate::linalg::{adjoint, kron, partial_trace_matrix, DensityMatrix, Matrix, Operator};

/// Double occupancy above which reception is flagged.
pub const LEAKAGE_WARN: f64 = 0.05;

/// Independent loss probabilities of the two modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossChannel {
    pub p_a: f64,
    pub p_s: f64,
}

impl LossChannel {
    pub fn new(p_a: f64, p_s: f64) -> Result<Self> {
        for p in [p_a, p_s] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("loss probability {p} outside [0, 1]")));
            }
        }
        Ok(Self { p_a, p_s })
    }

    pub fn equal(p: f64) -> Result<Self> {
        Self::new(p, p)
    }

    /// Kraus operators on `|n_A n_S⟩`.
    pub fn kraus(&self) -> Vec<Matrix> {
        let single = |p: f64| {
            let r = |x: f64| C64::new(x, 0.0);
            let k0 = Matrix::from_shape_vec((2, 2), vec![r(1.0), r(0.0), r(0.0), r((1.0 - p).sqrt())]).unwrap();
            let k1 = Matrix::from_shape_vec((2, 2), vec![r(0.0), r(p.sqrt()), r(0.0), r(0.0)]).unwrap();
            [k0, k1].map(|m| Operator::new(vec![2], m).unwrap())
        };
        let (a, s) = (single(self.p_a), single(self.p_s));
        a.iter().flat_map(|ka| s.iter().map(move |ks| kron(ka, ks).into_matrix())).collect()
    }

    /// `‖Σ K†K − I‖_F`
    pub fn completeness_residual(&self) -> f64 {
        let sum = self.kraus().iter().fold(Matrix::zeros((4, 4)), |acc, k| acc + adjoint(k).dot(k));
        crate::linalg::frobenius(&(sum - Matrix::eye(4)))
    }
}

fn conjugate_sum(kraus: &[Matrix], rho: &Matrix) -> Matrix {
    kraus.iter().fold(Matrix::zeros(rho.raw_dim()), |acc, k| acc + k.dot(rho).dot(&adjoint(k)))
}

/// Amplitude damping with probability `p_A`, `p_S` on each mode.
pub fn apply_loss(rho: &DensityMatrix, ch: &LossChannel) -> Result<DensityMatrix> {
    if rho.dims() != [2, 2] {
        return Err(Error::DimensionMismatch(format!("expected dims [2, 2], got {:?}", rho.dims())));
    }
    DensityMatrix::new(vec![2, 2], hermitian(conjugate_sum(&ch.kraus(), rho.matrix())))
}

/// `I_n ⊗ m` for a possibly rectangular `m`.
fn kron_identity(n: usize, m: &Matrix) -> Matrix {
    let (r, c) = m.dim();
    let mut out = Matrix::zeros((n * r, n * c));
    for k in 0..n {
        out.slice_mut(ndarray::s![k * r..(k + 1) * r, k * c..(k + 1) * c]).assign(m);
    }
    out
}

fn hermitian(m: Matrix) -> Matrix {
    crate::linalg::hermitian_part(&m)
}

/// Receiver state after absorbing the field.
#[derive(Debug, Clone)]
pub struct Received {
    /// Receiver qubit over `g, e, f`, conditioned on no double occupancy.
    pub rho: DensityMatrix,
    /// Weight of `|11⟩`, which the single-photon receiver cannot absorb.
    pub leakage: f64,
    pub warnings: Vec<Warning>,
}

/// `|10⟩ → |g⟩`, `|01⟩ → |e⟩`, `|00⟩ → |f⟩`.
fn receive_isometry() -> Matrix {
    let mut v = Matrix::zeros((3, 4));
    v[[0, 2]] = C64::new(1.0, 0.0);
    v[[1, 1]] = C64::new(1.0, 0.0);
    v[[2, 0]] = C64::new(1.0, 0.0);
    v
}

pub fn ideal_receive(rho: &DensityMatrix) -> Result<Received> {
    if rho.dims() != [2, 2] {
        return Err(Error::DimensionMismatch(format!("expected dims [2, 2], got {:?}", rho.dims())));
    }
    let v = receive_isometry();
    let leakage = rho.population(3);
    let mut warnings = Vec::new();
    if leakage > LEAKAGE_WARN {
        warnings.push(Warning::ProtocolViolation { double_occupancy: leakage });
    }
    let out = v.dot(rho.matrix()).dot(&adjoint(&v));
    let rho = DensityMatrix::from_numerical(vec![3], &out)?;
    Ok(Received { rho, leakage, warnings })
}

#[derive(Debug, Clone)]
pub struct HeraldOutcome {
    pub p_success: f64,
    pub p_flag: f64,
    /// Receiver state in the `g, e` block, renormalized.
    pub rho_success: DensityMatrix,
    pub fidelity_success: f64,
}

fn target_fidelity(rho: &Matrix, target: &[C64; 2]) -> f64 {
    let n = target.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..2 {
        for j in 0..2 {
            acc += target[i].conj() * rho[[i, j]] * target[j];
        }
    }
    acc.re / n
}

/// Measure whether the receiver ended in `|f⟩`; on success compare with `α|g⟩ + β|e⟩`.
pub fn herald(rho_receiver: &DensityMatrix, target: &[C64; 2]) -> Result<HeraldOutcome> {
    if rho_receiver.dims() != [3] {
        return Err(Error::DimensionMismatch(format!("expected a qutrit, got dims {:?}", rho_receiver.dims())));
    }
    let m = rho_receiver.matrix();
    let p_flag = m[[2, 2]].re.clamp(0.0, 1.0);
    let p_success = 1.0 - p_flag;
    if p_success < 1e-12 {
        return Err(Error::AllFlagged);
    }
    let block = Matrix::from_shape_fn((2, 2), |(i, j)| m[[i, j]] / p_success);
    let rho_success = DensityMatrix::from_numerical(vec![2], &block)?;
    let fidelity_success = target_fidelity(rho_success.matrix(), target);
    Ok(HeraldOutcome { p_success, p_flag, rho_success, fidelity_success })
}

/// Logical target `cos(θ/2)|g⟩ + sin(θ/2)|e⟩`.
pub fn logical_target(theta: f64) -> [C64; 2] {
    [C64::new((theta / 2.0).cos(), 0.0), C64::new((theta / 2.0).sin(), 0.0)]
}

/// `cos(θ/2)|10⟩ + sin(θ/2)|01⟩`
pub fn encoded_field(theta: f64) -> DensityMatrix {
    let r = |x: f64| C64::new(x, 0.0);
    DensityMatrix::from_pure(vec![2, 2], &[r(0.0), r((theta / 2.0).sin()), r((theta / 2.0).cos()), r(0.0)]).unwrap()
}

#[derive(Debug, Clone)]
pub struct RemoteEntanglement {
    /// Auxiliary qubit X (`g, e`) and receiver D (`g, e, f`), dims `[2, 3]`.
    pub joint: DensityMatrix,
    pub p_flag: f64,
    /// X–D state conditioned on no flag, dims `[2, 2]`; `None` when every run is flagged.
    pub conditional: Option<DensityMatrix>,
    /// Overlap of the conditional state with `cos(θ/2)|gg⟩ + sin(θ/2)|ee⟩`.
    pub fidelity: Option<f64>,
    /// `2|⟨gg|ρ|ee⟩|` of the conditional state.
    pub coherence: Option<f64>,
    /// Reduced state of X over all runs.
    pub x_marginal: DensityMatrix,
}

/// Entangle an auxiliary qubit with the emitted photon, send it through the lossy
/// channel and absorb it in a remote receiver.
pub fn remote_entanglement(theta: f64, ch: &LossChannel) -> Result<RemoteEntanglement> {
    if !(0.0..=std::f64::consts::PI + 1e-12).contains(&theta) {
        return Err(Error::InvalidParameter(format!("theta = {theta} outside [0, pi]")));
    }
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    // X ⊗ |n_A n_S⟩: |g⟩|10⟩ at 2, |e⟩|01⟩ at 4 + 1
    let mut psi = vec![C64::new(0.0, 0.0); 8];
    psi[2] = C64::new(c, 0.0);
    psi[5] = C64::new(s, 0.0);
    let rho = DensityMatrix::from_pure(vec![2, 2, 2], &psi)?;
    let kraus: Vec<Matrix> = ch.kraus().iter().map(|k| kron_identity(2, k)).collect();
    let lossy = conjugate_sum(&kraus, rho.matrix());
    let v = kron_identity(2, &receive_isometry());
    let joint = hermitian(v.dot(&lossy).dot(&adjoint(&v)));
    let joint = DensityMatrix::from_numerical(vec![2, 3], &joint)?;

    let m = joint.matrix();
    let p_flag = (m[[2, 2]].re + m[[5, 5]].re).clamp(0.0, 1.0);
    let keep = [0usize, 1, 3, 4];
    let block = Matrix::from_shape_fn((4, 4), |(i, j)| m[[keep[i], keep[j]]]);
    let weight = 1.0 - p_flag;
    let (conditional, fidelity, coherence) = if weight > 1e-12 {
        let cond = DensityMatrix::from_numerical(vec![2, 2], &block.mapv(|z| z / weight))?;
        let cm = cond.matrix();
        let f = (c * c * cm[[0, 0]] + s * s * cm[[3, 3]] + c * s * (cm[[0, 3]] + cm[[3, 0]])).re;
        let w = 2.0 * cm[[0, 3]].norm();
        (Some(cond), Some(f), Some(w))
    } else {
        (None, None, None)
    };
    let (_, xm) = partial_trace_matrix(m, &[2, 3], &[0])?;
    let x_marginal = DensityMatrix::from_numerical(vec![2], &xm)?;
    Ok(RemoteEntanglement { joint, p_flag, conditional, fidelity, coherence, x_marginal })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossSweepRow {
    pub p: f64,
    pub p_flag: f64,
    /// `None` when every run is flagged.
    pub f_heralded: Option<f64>,
    pub f_unheralded: f64,
}

/// Equal loss `p` on both modes for each grid point. Flagged runs count with
/// fidelity `failure_fidelity` in the unheralded figure.
pub fn loss_sweep_with(theta: f64, grid: &[f64], failure_fidelity: f64) -> Result<Vec<LossSweepRow>> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty loss grid".into()));
    }
    let target = logical_target(theta);
    let field = encoded_field(theta);
    grid.par_iter()
        .map(|&p| {
            let received = ideal_receive(&apply_loss(&field, &LossChannel::equal(p)?)?)?;
            let m = received.rho.matrix();
            let p_flag = m[[2, 2]].re.clamp(0.0, 1.0);
            let ge = Matrix::from_shape_fn((2, 2), |(i, j)| m[[i, j]]);
            let f_unheralded = target_fidelity(&ge, &target) + p_flag * failure_fidelity;
            let f_heralded = match herald(&received.rho, &target) {
                Ok(h) => Some(h.fidelity_success),
                Err(Error::AllFlagged) => None,
                Err(e) => return Err(e),
            };
            Ok(LossSweepRow { p, p_flag, f_heralded, f_unheralded })
        })
        .collect()
}

pub fn loss_sweep(theta: f64, grid: &[f64]) -> Result<Vec<LossSweepRow>> {
    loss_sweep_with(theta, grid, 0.0)
}

/// CSV with header `p,p_flag,F_heralded,F_unheralded`; undefined entries print as `nan`.
pub fn write_loss_sweep<W: Write>(rows: &[LossSweepRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "p,p_flag,F_heralded,F_unheralded")?;
    for r in rows {
        let fh = r.f_heralded.map_or("nan".to_string(), |f| format!("{f:.12}"));
        writeln!(w, "{:.6},{:.12},{},{:.12}", r.p, r.p_flag, fh, r.f_unheralded)?;
    }
    Ok(())
}
