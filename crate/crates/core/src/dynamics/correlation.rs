//! Two-time correlations of the output field and their temporal-mode content.

use std::io::Write;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::evolve::{evolve, step_grid, write_series, EvolveOptions, Rk4};
use super::system::{SparseOp, SystemSpec};
use crate::error::{Error, Result, Warning};
use crate::linalg::{eigh, DensityMatrix, Matrix};

/// Mode purity below which emission is reported as multimode.
pub const PURITY_WARN: f64 = 0.95;

/// Temporal mode of one emission channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    /// Sample times relative to the start of the emission window, μs.
    pub times: Vec<f64>,
    /// `f(t)`, 1/√μs.
    pub samples: Vec<C64>,
    /// Sample spacing, μs.
    pub dt: f64,
    /// Carrier frequency, GHz.
    pub carrier_ghz: f64,
    /// Photons in the dominant mode.
    pub photons: f64,
    /// Dominant eigenvalue over the trace of `G·dt`.
    pub purity: f64,
    /// Fitted decay rate `Γ_eff/2π`, MHz.
    pub gamma_eff: Option<f64>,
    /// Whether `∫|f|² dt = 1`; false for an empty channel.
    pub normalized: bool,
}

impl Envelope {
    pub fn norm(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.dt
    }

    /// `∫ f(t) x(t) dt` over the sample grid.
    pub fn project(&self, x: &[C64]) -> C64 {
        self.samples.iter().zip(x).map(|(f, v)| f * v).sum::<C64>() * self.dt
    }

    /// Linear interpolation of `f` at `t`; zero outside the sampled window.
    pub fn at(&self, t: f64) -> C64 {
        let last = self.times.len().saturating_sub(1) as f64 * self.dt;
        if self.samples.is_empty() || t < 0.0 || t > last {
            return C64::new(0.0, 0.0);
        }
        let x = t / self.dt;
        let k = (x.floor() as usize).min(self.samples.len() - 1);
        if k + 1 >= self.samples.len() {
            return self.samples[k];
        }
        let w = x - k as f64;
        self.samples[k] * (1.0 - w) + self.samples[k + 1] * w
    }

    /// CSV with `series,t_us,re,im` rows under the given series name.
    pub fn write_csv<W: Write>(&self, mut w: W, name: &str, header: bool) -> std::io::Result<()> {
        if header {
            writeln!(w, "series,t_us,re,im")?;
        }
        write_series(&mut w, name, &self.times, &self.samples)
    }

    /// `|f(t)|` samples.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.samples.iter().map(|z| z.norm()).collect()
    }
}

/// Correlation functions `G_jk(t₁,t₂) = ⟨L_j†(t₁) L_k(t₂)⟩` for a set of collapse channels.
#[derive(Debug, Clone)]
pub struct Correlations {
    pub names: Vec<String>,
    pub times: Vec<f64>,
    /// Sample spacing, μs.
    pub dt: f64,
    /// `g[j][k]` holds `G_jk` on the sample grid.
    pub g: Vec<Vec<Matrix>>,
    /// `⟨L_j(t)⟩` on the sample grid.
    pub means: Vec<Vec<C64>>,
    /// `∫⟨L_j†L_j⟩dt` per channel.
    pub photons: Vec<f64>,
}

impl Correlations {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, j: &str, k: &str) -> Option<&Matrix> {
        Some(&self.g[self.index(j)?][self.index(k)?])
    }
}

fn jump_at(spec: &SystemSpec, ch: usize, t: f64) -> SparseOp {
    SparseOp::from_triplets(spec.dim(), &spec.channels[ch].at(t))
}

/// Two-time correlations via the quantum regression theorem: for `t₂ ≥ t₁`,
/// `L_j ρ(t₁)` is propagated under the same Liouvillian and traced against `L_k†`.
/// The other half follows from `G_kj(t₂,t₁) = G_jk(t₁,t₂)*`.
///
/// `sample_every` integration steps make one grid point.
pub fn two_time_correlation(
    spec: &SystemSpec,
    rho0: &DensityMatrix,
    channels: &[&str],
    t_end: f64,
    dt: f64,
    sample_every: usize,
) -> Result<Correlations> {
    let idx: Vec<usize> = channels
        .iter()
        .map(|c| spec.channel_index(c).ok_or_else(|| Error::InvalidParameter(format!("no channel named {c}"))))
        .collect::<Result<_>>()?;
    let every = sample_every.max(1);
    let opts = EvolveOptions { store_states: true, sample_every: every, ..Default::default() };
    let traj = evolve(rho0, spec, t_end, dt, &opts)?;
    let (steps, dt) = step_grid(t_end, dt);
    // a final partial block is not sampled; the grid ends at the last full block
    let m = traj.states.len().min(steps / every + 1);
    let times: Vec<f64> = traj.times[..m].to_vec();
    let h = dt * every as f64;
    let nc = idx.len();

    let means: Vec<Vec<C64>> = idx
        .iter()
        .map(|&c| (0..m).map(|i| jump_at(spec, c, times[i]).trace_with(traj.states[i].as_slice().unwrap())).collect())
        .collect();
    let jumps_dag: Vec<Vec<SparseOp>> =
        idx.iter().map(|&c| times.iter().map(|&t| jump_at(spec, c, t).adjoint()).collect()).collect();

    // rows[i][j][k][m] = Tr[L_k(t_m)† Λ(t_m,t_i)(L_j ρ(t_i))] for m ≥ i
    let rows: Vec<Vec<Vec<Vec<C64>>>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut rk = Rk4::new(spec);
            let rho = traj.states[i].as_slice().unwrap();
            (0..nc)
                .map(|j| {
                    let mut x = jump_at(spec, idx[j], times[i]).left_mul(rho);
                    let mut out = vec![Vec::with_capacity(m - i); nc];
                    for mm in i..m {
                        if mm > i {
                            for s in 0..every {
                                rk.step(times[mm - 1] + s as f64 * dt, dt, &mut x);
                            }
                        }
                        for (k, o) in out.iter_mut().enumerate() {
                            o.push(jumps_dag[k][mm].trace_with(&x));
                        }
                    }
                    out
                })
                .collect()
        })
        .collect();

    let mut g = vec![vec![Matrix::zeros((m, m)); nc]; nc];
    for (i, row) in rows.iter().enumerate() {
        for (j, per_k) in row.iter().enumerate() {
            for (k, vals) in per_k.iter().enumerate() {
                for (off, &v) in vals.iter().enumerate() {
                    let mm = i + off;
                    g[k][j][[mm, i]] = v;
                    g[j][k][[i, mm]] = v.conj();
                }
            }
        }
    }
    let photons = (0..nc).map(|j| (0..m).map(|i| g[j][j][[i, i]].re).sum::<f64>() * h).collect();
    Ok(Correlations { names: channels.iter().map(|s| s.to_string()).collect(), times, dt: h, g, means, photons })
}

/// Dominant eigenpair of a Hermitian matrix. Dense diagonalization for small
/// sizes, power iteration otherwise.
fn dominant_eigenpair(a: &Matrix) -> (f64, Vec<C64>, f64) {
    let m = a.nrows();
    let trace: f64 = (0..m).map(|i| a[[i, i]].re).sum();
    if m <= 96 {
        let e = eigh(a);
        let k = m - 1;
        return (e.values[k], e.vector(k).to_vec(), trace);
    }
    // start from the column with the largest diagonal entry
    let start = (0..m).max_by(|&i, &j| a[[i, i]].re.total_cmp(&a[[j, j]].re)).unwrap_or(0);
    let mut v: Vec<C64> = (0..m).map(|i| a[[i, start]] + if i == start { 1e-3 } else { 0.0 }).collect();
    let normalize = |v: &mut Vec<C64>| {
        let s = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if s > 0.0 {
            v.iter_mut().for_each(|z| *z /= s);
        }
        s
    };
    normalize(&mut v);
    let mut lambda = 0.0;
    for _ in 0..20_000 {
        let mut w: Vec<C64> = (0..m).map(|i| (0..m).map(|j| a[[i, j]] * v[j]).sum()).collect();
        let next: f64 = v.iter().zip(&w).map(|(x, y)| (x.conj() * y).re).sum();
        normalize(&mut w);
        let change: f64 = v.iter().zip(&w).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>();
        v = w;
        let done = (next - lambda).abs() <= 1e-14 * next.abs().max(1e-300) && change < 1e-20;
        lambda = next;
        if done {
            break;
        }
    }
    (lambda, v, trace)
}

/// Dominant temporal mode of a correlation matrix sampled with spacing `dt`:
/// `G ≈ n f(t₁) f*(t₂)`. The phase is fixed so the largest sample is real positive.
pub fn mode_decompose(g: &Matrix, dt: f64) -> Result<(Envelope, Vec<Warning>)> {
    let m = g.nrows();
    if g.ncols() != m || m == 0 {
        return Err(Error::DimensionMismatch(format!("correlation matrix {}x{}", g.nrows(), g.ncols())));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt = {dt}")));
    }
    let times: Vec<f64> = (0..m).map(|k| k as f64 * dt).collect();
    let scale = g.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale * dt * m as f64 <= 1e-12 {
        let env = Envelope {
            times,
            samples: vec![C64::new(0.0, 0.0); m],
            dt,
            carrier_ghz: 0.0,
            photons: 0.0,
            purity: 0.0,
            gamma_eff: None,
            normalized: false,
        };
        return Ok((env, vec![Warning::EmptyEnvelope]));
    }
    let (lambda, v, trace) = dominant_eigenpair(&g.mapv(|z| z * dt));
    let peak = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
    let phase = peak.conj() / peak.norm();
    let samples: Vec<C64> = v.iter().map(|z| z * phase / dt.sqrt()).collect();
    let purity = if trace > 0.0 { lambda / trace } else { 0.0 };
    let mut warnings = Vec::new();
    if purity < PURITY_WARN {
        warnings.push(Warning::MultimodeEmission { purity });
    }
    let mut env = Envelope {
        times,
        samples,
        dt,
        carrier_ghz: 0.0,
        photons: lambda.max(0.0),
        purity,
        gamma_eff: None,
        normalized: true,
    };
    env.gamma_eff = fit_exponential_decay(&env.times, &env.magnitudes()).ok();
    Ok((env, warnings))
}

/// Decay rate of `|f(t)|²` (state-decay convention), `Γ/2π` in MHz, from a
/// weighted least-squares fit of `ln|f|` between the peak and the point where
/// the envelope falls below 10% of it.
pub fn fit_exponential_decay(times: &[f64], magnitude: &[f64]) -> Result<f64> {
    if times.len() != magnitude.len() {
        return Err(Error::DimensionMismatch(format!("{} times vs {} samples", times.len(), magnitude.len())));
    }
    let (peak_at, &peak) = magnitude
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::FitFailed("empty envelope".into()))?;
    if !(peak > 0.0) {
        return Err(Error::FitFailed("no peak".into()));
    }
    let pts: Vec<(f64, f64, f64)> = times[peak_at..]
        .iter()
        .zip(&magnitude[peak_at..])
        .take_while(|(_, &y)| y >= 0.1 * peak)
        .map(|(&t, &y)| (t, y.ln(), y * y))
        .collect();
    if pts.len() < 3 {
        return Err(Error::FitFailed(format!("only {} points in the tail", pts.len())));
    }
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let mt = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let stt: f64 = pts.iter().map(|p| p.2 * (p.0 - mt).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| p.2 * (p.0 - mt) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| p.2 * (p.1 - my).powi(2)).sum();
    if stt <= 0.0 {
        return Err(Error::FitFailed("degenerate time grid".into()));
    }
    let slope = sty / stt;
    if !(slope < 0.0) || syy <= 0.0 {
        return Err(Error::FitFailed("tail does not decay".into()));
    }
    let r2 = sty * sty / (stt * syy);
    if r2 < 0.9 {
        return Err(Error::FitFailed(format!("non-exponential tail, R^2 = {r2:.3}")));
    }
    Ok(-2.0 * slope / (2.0 * std::f64::consts::PI))
}

/// Normally ordered mode moments obtained by filtering the correlations with
/// the envelopes: `⟨b_j⟩ = ∫f_j⟨L_j⟩` and `⟨b_j†b_k⟩ = ∬f_j* f_k G_jk`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredMoments {
    pub mean: Vec<C64>,
    /// `second[j][k] = ⟨b_j† b_k⟩`.
    pub second: Vec<Vec<C64>>,
}

pub fn filtered_moments(corr: &Correlations, envelopes: &[&Envelope]) -> Result<FilteredMoments> {
    let nc = corr.names.len();
    if envelopes.len() != nc {
        return Err(Error::DimensionMismatch(format!("{} envelopes for {nc} channels", envelopes.len())));
    }
    let m = corr.times.len();
    for e in envelopes {
        if e.samples.len() != m {
            return Err(Error::GridMismatch { record: m, envelope: e.samples.len() });
        }
    }
    let h = corr.dt;
    let mean = (0..nc).map(|j| envelopes[j].project(&corr.means[j])).collect();
    let second = (0..nc)
        .map(|j| {
            (0..nc)
                .map(|k| {
                    let g = &corr.g[j][k];
                    let (fj, fk) = (&envelopes[j].samples, &envelopes[k].samples);
                    let mut acc = C64::new(0.0, 0.0);
                    for a in 0..m {
                        let mut row = C64::new(0.0, 0.0);
                        for b in 0..m {
                            row += g[[a, b]] * fk[b];
                        }
                        acc += fj[a].conj() * row;
                    }
                    acc * h * h
                })
                .collect()
        })
        .collect();
    Ok(FilteredMoments { mean, second })
}
