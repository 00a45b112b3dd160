//! Cascaded capture of the emitted temporal modes into virtual cavities.

use num_complex::Complex64 as C64;

use super::correlation::Envelope;
use super::evolve::{evolve, EvolveOptions, Trajectory, DEFAULT_DT};
use super::system::{Channel, Coefficient, SparseOp, SystemSpec, Term};
use crate::error::{Error, Result};
use crate::linalg::{annihilation, DensityMatrix, Operator};

/// Allowed relative deviation between captured and emitted photon numbers.
pub const CAPTURE_TOLERANCE: f64 = 0.02;

/// Time-dependent coupling `g(t) = −u*(t)/√∫₀ᵗ|u|²` of a virtual cavity that
/// absorbs the mode `u`. With `G(t₁,t₂) = n f(t₁) f*(t₂)` the physical mode is
/// `u = f*`, so the coupling reads `−f(t)/√∫₀ᵗ|f|²`.
#[derive(Debug, Clone)]
pub struct CaptureCoupling {
    envelope: Envelope,
    cumulative: Vec<f64>,
    offset: f64,
    start: f64,
    g_max: f64,
}

impl CaptureCoupling {
    /// `offset` is the system time of the envelope's first sample. The rate
    /// `|g|²` is clamped to `max_rate` (1/μs) near the onset, where the
    /// denominator vanishes.
    pub fn new(envelope: &Envelope, offset: f64, max_rate: f64) -> Self {
        let p: Vec<f64> = envelope.samples.iter().map(|z| z.norm_sqr()).collect();
        let mut cumulative = vec![0.0; p.len()];
        for k in 1..p.len() {
            cumulative[k] = cumulative[k - 1] + 0.5 * (p[k - 1] + p[k]) * envelope.dt;
        }
        let peak = p.iter().copied().fold(0.0, f64::max);
        let onset = p.iter().position(|&x| x >= 1e-6 * peak).unwrap_or(0);
        let start = (onset + 1) as f64 * envelope.dt;
        Self { envelope: envelope.clone(), cumulative, offset, start, g_max: max_rate.sqrt() }
    }

    fn integral(&self, s: f64) -> f64 {
        let dt = self.envelope.dt;
        let k = ((s / dt).floor() as usize).min(self.cumulative.len() - 1);
        let lo = self.envelope.samples[k].norm_sqr();
        let hi = self.envelope.at(s).norm_sqr();
        self.cumulative[k] + 0.5 * (lo + hi) * (s - k as f64 * dt)
    }

    pub fn at(&self, t: f64) -> C64 {
        let s = t - self.offset;
        if s < self.start || self.envelope.samples.is_empty() {
            return C64::new(0.0, 0.0);
        }
        let c = self.integral(s);
        if c <= 0.0 {
            return C64::new(0.0, 0.0);
        }
        let g = -self.envelope.at(s) / c.sqrt();
        if g.norm() > self.g_max {
            g * (self.g_max / g.norm())
        } else {
            g
        }
    }
}

/// One sender channel routed into one virtual cavity.
#[derive(Debug, Clone)]
pub struct CaptureTarget<'a> {
    pub channel: &'a str,
    pub cavity_slot: usize,
    pub envelope: &'a Envelope,
    /// Photons in the dominant mode of this run, when known. The mismatch
    /// check compares against these, else against all emitted photons.
    pub expected: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct CaptureResult {
    /// Joint state of the capture cavities, in target order.
    pub state: DensityMatrix,
    pub trajectory: Trajectory,
    /// Photons that left through each target channel, `∫⟨L†L⟩dt` of the bare channel.
    pub emitted: Vec<f64>,
    /// Photons found in each cavity at the end.
    pub captured: Vec<f64>,
}

impl CaptureResult {
    pub fn efficiency(&self) -> f64 {
        let e: f64 = self.emitted.iter().sum();
        if e > 0.0 {
            self.captured.iter().sum::<f64>() / e
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaptureOptions {
    pub t_end: f64,
    /// Integration step; zero picks the largest admissible step.
    pub dt: f64,
    /// Clamp on the capture rate `|g|²`, 1/μs.
    pub max_rate: f64,
    /// System time of the envelopes' first sample.
    pub offset: f64,
    /// Raise envelope-mismatch when the captured photons deviate from the
    /// expected ones by more than 2%.
    pub check: bool,
}

fn channel_operator(spec: &SystemSpec, ch: usize) -> Result<(C64, SparseOp)> {
    match spec.channels[ch].terms.as_slice() {
        [Term { coef: Coefficient::Const(c), op }] => Ok((*c, op.clone())),
        _ => Err(Error::InvalidParameter(format!(
            "channel {} must be a single constant operator",
            spec.channels[ch].name
        ))),
    }
}

/// Evolve the sender cascaded into virtual cavities. `spec` must already
/// contain the cavity slots; each target channel `L = c·A` becomes
/// `c·A + g*(t) v` and the Hamiltonian gains `(i/2)(c* g* A†v − c g A v†)`.
pub fn cascaded_capture(
    spec: &SystemSpec,
    rho0: &DensityMatrix,
    targets: &[CaptureTarget<'_>],
    opts: &CaptureOptions,
) -> Result<CaptureResult> {
    let mut full = spec.clone();
    let n = spec.dim();
    let mut observables = Vec::new();
    let mut cavity_ops = Vec::new();
    for target in targets {
        if target.envelope.normalized && (target.envelope.norm() - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidParameter(format!("envelope for {} is not normalized", target.channel)));
        }
        let ch = spec
            .channel_index(target.channel)
            .ok_or_else(|| Error::InvalidParameter(format!("no channel named {}", target.channel)))?;
        let (c, a) = channel_operator(spec, ch)?;
        let dim = *spec
            .dims
            .get(target.cavity_slot)
            .ok_or_else(|| Error::InvalidSubsystem(format!("slot {}", target.cavity_slot)))?;
        let v_op = Operator::embed(&annihilation(dim)?, target.cavity_slot, &spec.dims)?;
        let v = SparseOp::from_dense(v_op.matrix());
        let coupling = CaptureCoupling::new(target.envelope, opts.offset, opts.max_rate);
        let bound = opts.max_rate.sqrt();

        let mut terms = full.channels[ch].terms.clone();
        let gc = coupling.clone();
        terms.push(Term { coef: Coefficient::func(bound, move |t| gc.at(t).conj()), op: v.clone() });
        let name = full.channels[ch].name.clone();
        full.channels[ch] = Channel::new(name, terms);

        let forward = a.adjoint().product(&v);
        let half = 0.5 * c.norm() * bound;
        let gf = coupling.clone();
        let cf = c.conj();
        full.hamiltonian.push(Term {
            coef: Coefficient::func(half, move |t| C64::new(0.0, 0.5) * cf * gf.at(t).conj()),
            op: forward.clone(),
        });
        let gb = coupling;
        full.hamiltonian.push(Term {
            coef: Coefficient::func(half, move |t| C64::new(0.0, -0.5) * c * gb.at(t)),
            op: forward.adjoint(),
        });

        let emitted = Operator::new(spec.dims.clone(), {
            let mut m = crate::linalg::Matrix::zeros((n, n));
            for &(i, j, z) in a.adjoint().product(&a).entries() {
                m[[i, j]] = z * c.norm_sqr();
            }
            m
        })?;
        observables.push((format!("emitted_{}", target.channel), emitted));
        let nv = &v_op.adjoint() * &v_op;
        observables.push((format!("captured_{}", target.channel), nv));
        cavity_ops.push(target.cavity_slot);
    }

    let evolve_opts = EvolveOptions { observables, sample_every: 1, store_states: false };
    let dt = if opts.dt > 0.0 { opts.dt } else { full.max_step().min(DEFAULT_DT) };
    let trajectory = evolve(rho0, &full, opts.t_end, dt, &evolve_opts)?;
    let h = trajectory.dt;
    let mut emitted = Vec::new();
    let mut captured = Vec::new();
    for target in targets {
        let rate = trajectory.record(&format!("emitted_{}", target.channel)).unwrap();
        // trapezoid over the full step grid
        let total: f64 = rate.windows(2).map(|w| 0.5 * (w[0].re + w[1].re) * h).sum();
        emitted.push(total);
        captured.push(trajectory.record(&format!("captured_{}", target.channel)).unwrap().last().unwrap().re);
    }
    let state = trajectory.final_density()?.partial_trace(&cavity_ops)?;
    let result = CaptureResult { state, trajectory, emitted, captured };
    if opts.check {
        let e: f64 = targets.iter().zip(&result.emitted).map(|(t, e)| t.expected.unwrap_or(*e)).sum();
        let c: f64 = result.captured.iter().sum();
        if e > 1e-9 && (c / e - 1.0).abs() > CAPTURE_TOLERANCE {
            return Err(Error::EnvelopeMismatch { captured: c, emitted: e });
        }
    }
    Ok(result)
}
