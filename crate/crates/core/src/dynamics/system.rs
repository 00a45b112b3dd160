use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Operator};

pub const MAX_DIMENSION: usize = 192;

/// Sparse operator stored as `(row, col, value)` triplets, sorted by row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOp {
    n: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl SparseOp {
    pub fn from_dense(m: &Matrix) -> Self {
        let n = m.nrows();
        let mut entries = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = m[[i, j]];
                if v.norm_sqr() > 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        Self { n, entries }
    }

    /// From `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, C64)]) -> Self {
        let mut dense = Matrix::zeros((n, n));
        for &(i, j, v) in triplets {
            dense[[i, j]] += v;
        }
        Self::from_dense(&dense)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `self · x` for a row-major `x`.
    pub fn left_mul(&self, x: &[C64]) -> Vec<C64> {
        let n = self.n;
        let mut out = vec![C64::new(0.0, 0.0); n * n];
        for &(i, k, v) in &self.entries {
            for j in 0..n {
                out[i * n + j] += v * x[k * n + j];
            }
        }
        out
    }

    pub fn entries(&self) -> &[(usize, usize, C64)] {
        &self.entries
    }

    pub fn adjoint(&self) -> Self {
        let mut entries: Vec<_> = self.entries.iter().map(|&(i, j, v)| (j, i, v.conj())).collect();
        entries.sort_by_key(|&(i, j, _)| (i, j));
        Self { n: self.n, entries }
    }

    /// `self · other`
    pub fn product(&self, other: &SparseOp) -> SparseOp {
        let mut dense = Matrix::zeros((self.n, self.n));
        for &(i, k, a) in &self.entries {
            for &(k2, j, b) in &other.entries {
                if k == k2 {
                    dense[[i, j]] += a * b;
                }
            }
        }
        Self::from_dense(&dense)
    }

    /// Infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        let mut rows = vec![0.0; self.n];
        for &(i, _, v) in &self.entries {
            rows[i] += v.norm();
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    /// `Tr(self · x)` for a row-major `x`.
    pub fn trace_with(&self, x: &[C64]) -> C64 {
        self.entries.iter().map(|&(i, j, v)| v * x[j * self.n + i]).sum()
    }
}

/// Scalar coefficient of a Hamiltonian or collapse term.
#[derive(Clone)]
pub enum Coefficient {
    Const(C64),
    /// Time-dependent value with a bound on its modulus, used for step-size checks.
    Func { f: Arc<dyn Fn(f64) -> C64 + Send + Sync>, bound: f64 },
}

impl Coefficient {
    pub fn real(x: f64) -> Self {
        Coefficient::Const(C64::new(x, 0.0))
    }

    pub fn func(bound: f64, f: impl Fn(f64) -> C64 + Send + Sync + 'static) -> Self {
        Coefficient::Func { f: Arc::new(f), bound }
    }

    pub fn at(&self, t: f64) -> C64 {
        match self {
            Coefficient::Const(c) => *c,
            Coefficient::Func { f, .. } => f(t),
        }
    }

    pub fn bound(&self) -> f64 {
        match self {
            Coefficient::Const(c) => c.norm(),
            Coefficient::Func { bound, .. } => *bound,
        }
    }
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Const(c) => write!(f, "Const({c})"),
            Coefficient::Func { bound, .. } => write!(f, "Func(|c| <= {bound})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Term {
    pub coef: Coefficient,
    pub op: SparseOp,
}

impl Term {
    pub fn new(coef: Coefficient, op: &Operator) -> Self {
        Self { coef, op: SparseOp::from_dense(op.matrix()) }
    }
}

/// Collapse operator `L(t) = Σ c_m(t) A_m`.
#[derive(Debug, Clone)]
pub struct Channel {
    pub name: String,
    pub terms: Vec<Term>,
    // A_m† A_n for every pair
    products: Vec<(usize, usize, SparseOp)>,
}

impl Channel {
    pub fn new(name: impl Into<String>, terms: Vec<Term>) -> Self {
        let mut products = Vec::new();
        for (m, a) in terms.iter().enumerate() {
            let ad = a.op.adjoint();
            for (k, b) in terms.iter().enumerate() {
                let p = ad.product(&b.op);
                if !p.entries.is_empty() {
                    products.push((m, k, p));
                }
            }
        }
        Self { name: name.into(), terms, products }
    }

    /// Single constant-rate channel `√rate · A`.
    pub fn constant(name: impl Into<String>, rate: f64, op: &Operator) -> Self {
        Self::new(name, vec![Term::new(Coefficient::real(rate.max(0.0).sqrt()), op)])
    }

    pub fn bound(&self) -> f64 {
        self.terms.iter().map(|t| t.coef.bound() * t.op.norm_inf()).sum()
    }

    /// `L(t)` as triplets (duplicates allowed).
    pub fn at(&self, t: f64) -> Vec<(usize, usize, C64)> {
        let mut out = Vec::new();
        for term in &self.terms {
            let c = term.coef.at(t);
            if c.norm_sqr() == 0.0 {
                continue;
            }
            out.extend(term.op.entries.iter().map(|&(i, j, v)| (i, j, c * v)));
        }
        out
    }
}

/// Which rotating frame the Hamiltonian is written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameKind {
    /// Frame of the bare qubit, hybridized modes and the anharmonic shift, drive
    /// terms within the rotating-wave approximation.
    Anharmonic,
    /// Frame of the harmonic part only; the anharmonic shift stays in H and the
    /// second-order drive term carries `e^{-iαt}`.
    Qubit,
    /// Static per-mode frame used for spectroscopy.
    PerMode,
}

/// Everything needed to integrate a master equation.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub dims: Vec<usize>,
    pub hamiltonian: Vec<Term>,
    pub channels: Vec<Channel>,
    pub frame: FrameKind,
}

impl SystemSpec {
    pub fn new(dims: Vec<usize>, frame: FrameKind) -> Result<Self> {
        let n: usize = dims.iter().product();
        if dims.is_empty() || n == 0 || n > MAX_DIMENSION {
            return Err(Error::InvalidDimension(format!("system dims {dims:?} (limit {MAX_DIMENSION})")));
        }
        Ok(Self { dims, hamiltonian: Vec::new(), channels: Vec::new(), frame })
    }

    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn add_term(&mut self, coef: Coefficient, op: &Operator) {
        assert_eq!(op.dim(), self.dim(), "term dimension");
        self.hamiltonian.push(Term::new(coef, op));
    }

    /// Add `c(t) A + c(t)* A†`.
    pub fn add_hermitian_pair(&mut self, coef: Coefficient, op: &Operator) {
        let conj = match &coef {
            Coefficient::Const(c) => Coefficient::Const(c.conj()),
            Coefficient::Func { f, bound } => {
                let f = f.clone();
                Coefficient::Func { f: Arc::new(move |t| f(t).conj()), bound: *bound }
            }
        };
        self.add_term(coef, op);
        self.add_term(conj, &op.adjoint());
    }

    pub fn add_channel(&mut self, channel: Channel) -> Result<()> {
        if let Some(t) = channel.terms.iter().find(|t| t.op.dim() != self.dim()) {
            return Err(Error::DimensionMismatch(format!(
                "channel {} has dimension {}, system {}",
                channel.name,
                t.op.dim(),
                self.dim()
            )));
        }
        self.channels.push(channel);
        Ok(())
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c.name == name)
    }

    /// Upper bound on the fastest angular rate in the generator, rad/μs.
    ///
    /// Upper bound on `‖H(t)‖∞ + ½‖Σ L†L‖∞` over all times, from the
    /// elementwise moduli of the terms weighted by their coefficient bounds.
    pub fn frequency_scale(&self) -> f64 {
        let n = self.dim();
        let mut h = vec![0.0; n * n];
        for t in &self.hamiltonian {
            for &(i, j, v) in t.op.entries() {
                h[i * n + j] += t.coef.bound() * v.norm();
            }
        }
        let mut d = vec![0.0; n * n];
        for ch in &self.channels {
            let mut l = vec![0.0; n * n];
            for t in &ch.terms {
                for &(i, j, v) in t.op.entries() {
                    l[i * n + j] += t.coef.bound() * v.norm();
                }
            }
            // |L†L| ≤ |L|ᵀ|L| elementwise
            for k in 0..n {
                for i in 0..n {
                    let a = l[k * n + i];
                    if a == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        d[i * n + j] += a * l[k * n + j];
                    }
                }
            }
        }
        let row_max = |m: &[f64]| m.chunks(n.max(1)).map(|r| r.iter().sum::<f64>()).fold(0.0, f64::max);
        row_max(&h) + 0.5 * row_max(&d)
    }

    /// Largest step accepted by `evolve`.
    pub fn max_step(&self) -> f64 {
        let s = self.frequency_scale();
        if s > 0.0 {
            1.0 / (20.0 * s)
        } else {
            f64::INFINITY
        }
    }

    /// Assemble the generator at time `t`.
    pub(crate) fn generator_at(&self, t: f64, scratch: &mut Matrix) -> Generator {
        let n = self.dim();
        scratch.fill(C64::new(0.0, 0.0));
        for term in &self.hamiltonian {
            let c = term.coef.at(t);
            if c.norm_sqr() == 0.0 {
                continue;
            }
            for &(i, j, v) in &term.op.entries {
                scratch[[i, j]] += c * v;
            }
        }
        let mut jumps = Vec::with_capacity(self.channels.len());
        let half_i = C64::new(0.0, -0.5);
        for ch in &self.channels {
            let coefs: Vec<C64> = ch.terms.iter().map(|term| term.coef.at(t)).collect();
            for (m, k, p) in &ch.products {
                let c = coefs[*m].conj() * coefs[*k];
                if c.norm_sqr() == 0.0 {
                    continue;
                }
                for &(i, j, v) in &p.entries {
                    scratch[[i, j]] += half_i * c * v;
                }
            }
            let l = ch.at(t);
            if !l.is_empty() {
                jumps.push(l);
            }
        }
        let mut heff = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = scratch[[i, j]];
                if v.norm_sqr() > 0.0 {
                    heff.push((i, j, v));
                }
            }
        }
        Generator { n, heff, jumps }
    }
}

/// Master-equation generator frozen at one instant.
#[derive(Clone)]
pub(crate) struct Generator {
    n: usize,
    heff: Vec<(usize, usize, C64)>,
    jumps: Vec<Vec<(usize, usize, C64)>>,
}

impl Generator {
    /// `out = −i(H_eff x − x H_eff†) + Σ L x L†`, row-major `x`.
    ///
    /// Valid for any operator `x`, not only Hermitian ones, which the regression
    /// theorem needs.
    pub(crate) fn apply(&self, x: &[C64], out: &mut [C64]) {
        let n = self.n;
        out.fill(C64::new(0.0, 0.0));
        let mi = C64::new(0.0, -1.0);
        for &(i, j, h) in &self.heff {
            // −i H x : row i += −i h x[j, :]
            let c = mi * h;
            let (src, dst) = (j * n, i * n);
            for k in 0..n {
                out[dst + k] += c * x[src + k];
            }
            // +i x H† : column i += i conj(h) x[:, j]
            let c = -mi * h.conj();
            for k in 0..n {
                out[k * n + i] += c * x[k * n + j];
            }
        }
        for l in &self.jumps {
            for &(i, j, a) in l {
                for &(k, m, b) in l {
                    out[i * n + k] += a * x[j * n + m] * b.conj();
                }
            }
        }
    }
}
