use std::borrow::Cow;
use std::collections::BTreeMap;
use std::io::Write;

use num_complex::Complex64 as C64;

use super::system::{Coefficient, Generator, SparseOp, SystemSpec};
use crate::error::{Error, Result};
use crate::linalg::{DensityMatrix, Matrix, Operator};

/// Maximum tolerated drift of `Tr ρ` over a run.
pub const TRACE_DRIFT_TOL: f64 = 1e-6;

/// Default integration step, μs.
pub const DEFAULT_DT: f64 = 1e-3;

/// Fixed-step RK4 propagator for `ẋ = 𝓛(t) x`.
pub struct Rk4<'a> {
    spec: &'a SystemSpec,
    n: usize,
    scratch: Matrix,
    frozen: Option<Generator>,
    k: [Vec<C64>; 4],
    tmp: Vec<C64>,
}

impl<'a> Rk4<'a> {
    pub fn new(spec: &'a SystemSpec) -> Self {
        let n = spec.dim();
        let is_static = spec.hamiltonian.iter().all(|t| matches!(t.coef, Coefficient::Const(_)))
            && spec
                .channels
                .iter()
                .all(|c| c.terms.iter().all(|t| matches!(t.coef, Coefficient::Const(_))));
        let mut scratch = Matrix::zeros((n, n));
        let frozen = is_static.then(|| spec.generator_at(0.0, &mut scratch));
        let zero = vec![C64::new(0.0, 0.0); n * n];
        Self { spec, n, scratch, frozen, k: [zero.clone(), zero.clone(), zero.clone(), zero.clone()], tmp: zero }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Advance `x` from `t` by `dt`.
    pub fn step(&mut self, t: f64, dt: f64, x: &mut [C64]) {
        let Self { spec, scratch, frozen, k, tmp, .. } = self;
        let [k0, k1, k2, k3] = k;
        let half = 0.5 * dt;
        generator(spec, frozen, scratch, t).apply(x, k0);
        axpy(tmp, x, half, k0);
        // the midpoint generator serves k2 and k3
        let mid = generator(spec, frozen, scratch, t + half);
        mid.apply(tmp, k1);
        axpy(tmp, x, half, k1);
        mid.apply(tmp, k2);
        axpy(tmp, x, dt, k2);
        generator(spec, frozen, scratch, t + dt).apply(tmp, k3);
        let w = dt / 6.0;
        for i in 0..x.len() {
            x[i] += (k0[i] + 2.0 * k1[i] + 2.0 * k2[i] + k3[i]) * w;
        }
    }
}

fn generator<'g>(spec: &SystemSpec, frozen: &'g Option<Generator>, scratch: &mut Matrix, t: f64) -> Cow<'g, Generator> {
    match frozen {
        Some(g) => Cow::Borrowed(g),
        None => Cow::Owned(spec.generator_at(t, scratch)),
    }
}

// dst = x + a·k
fn axpy(dst: &mut [C64], x: &[C64], a: f64, k: &[C64]) {
    for (d, (xi, ki)) in dst.iter_mut().zip(x.iter().zip(k)) {
        *d = xi + ki * a;
    }
}

/// Options controlling what `evolve` keeps.
#[derive(Debug, Clone, Default)]
pub struct EvolveOptions {
    /// Named observables recorded on the sample grid.
    pub observables: Vec<(String, Operator)>,
    /// Record every this many steps (1 when zero).
    pub sample_every: usize,
    /// Keep the full state at each sample.
    pub store_states: bool,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dims: Vec<usize>,
    /// Sample times, μs.
    pub times: Vec<f64>,
    pub records: BTreeMap<String, Vec<C64>>,
    pub states: Vec<Matrix>,
    pub final_state: Matrix,
    /// Integration step actually used, μs.
    pub dt: f64,
    pub sample_every: usize,
    pub max_trace_drift: f64,
}

impl Trajectory {
    pub fn final_density(&self) -> Result<DensityMatrix> {
        DensityMatrix::from_numerical(self.dims.clone(), &self.final_state)
    }

    pub fn record(&self, name: &str) -> Option<&[C64]> {
        self.records.get(name).map(|v| v.as_slice())
    }

    /// CSV with `series,t_us,re,im` rows, one block per recorded observable.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "series,t_us,re,im")?;
        for (name, values) in &self.records {
            write_series(&mut w, name, &self.times, values)?;
        }
        Ok(())
    }
}

pub(crate) fn write_series<W: Write>(w: &mut W, name: &str, times: &[f64], values: &[C64]) -> std::io::Result<()> {
    for (t, v) in times.iter().zip(values) {
        writeln!(w, "{name},{t:.6},{:.12e},{:.12e}", v.re, v.im)?;
    }
    Ok(())
}

/// Number of steps and the adjusted step so that `steps · dt == t_end`.
pub fn step_grid(t_end: f64, dt: f64) -> (usize, f64) {
    let steps = ((t_end / dt) - 1e-9).ceil().max(1.0) as usize;
    (steps, t_end / steps as f64)
}

/// Integrate the master equation from `rho0` to `t_end` with fixed step `dt`.
pub fn evolve(rho0: &DensityMatrix, spec: &SystemSpec, t_end: f64, dt: f64, opts: &EvolveOptions) -> Result<Trajectory> {
    if rho0.dims() != spec.dims.as_slice() {
        return Err(Error::DimensionMismatch(format!("state {:?} vs system {:?}", rho0.dims(), spec.dims)));
    }
    if !(t_end >= 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("t_end = {t_end}, dt = {dt}")));
    }
    let limit = spec.max_step();
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::StepSizeTooLarge(format!("dt = {dt:.3e} us exceeds 1/(20 scale) = {limit:.3e} us")));
    }
    let n = spec.dim();
    let (steps, dt) = if t_end == 0.0 { (0, dt) } else { step_grid(t_end, dt) };
    let every = opts.sample_every.max(1);
    let observables: Vec<(String, SparseOp)> =
        opts.observables.iter().map(|(k, o)| (k.clone(), SparseOp::from_dense(o.matrix()))).collect();
    let mut records: BTreeMap<String, Vec<C64>> = observables.iter().map(|(k, _)| (k.clone(), Vec::new())).collect();
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut x: Vec<C64> = rho0.matrix().iter().copied().collect();
    let trace = |x: &[C64]| (0..n).map(|i| x[i * n + i]).sum::<C64>();
    let tr0 = trace(&x);
    let mut drift: f64 = 0.0;
    let mut rk = Rk4::new(spec);

    let sample = |step: usize, x: &[C64], times: &mut Vec<f64>, states: &mut Vec<Matrix>, records: &mut BTreeMap<String, Vec<C64>>| {
        times.push(step as f64 * dt);
        for (k, o) in &observables {
            records.get_mut(k).unwrap().push(o.trace_with(x));
        }
        if opts.store_states {
            states.push(Matrix::from_shape_vec((n, n), x.to_vec()).unwrap());
        }
    };
    sample(0, &x, &mut times, &mut states, &mut records);
    for s in 0..steps {
        rk.step(s as f64 * dt, dt, &mut x);
        if (s + 1) % every == 0 || s + 1 == steps {
            let d = (trace(&x) - tr0).norm();
            if !d.is_finite() {
                return Err(Error::StepSizeTooLarge(format!("integration diverged at t = {:.4} us", (s + 1) as f64 * dt)));
            }
            drift = drift.max(d);
            if (s + 1) % every == 0 {
                sample(s + 1, &x, &mut times, &mut states, &mut records);
            }
        }
    }
    if drift > TRACE_DRIFT_TOL {
        return Err(Error::StepSizeTooLarge(format!("trace drift {drift:.3e} over the run")));
    }
    Ok(Trajectory {
        dims: spec.dims.clone(),
        times,
        records,
        states,
        final_state: Matrix::from_shape_vec((n, n), x).unwrap(),
        dt,
        sample_every: every,
        max_trace_drift: drift,
    })
}
