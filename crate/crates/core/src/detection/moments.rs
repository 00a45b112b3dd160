use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{annihilation, eigh, DensityMatrix, Matrix, Operator};

/// Highest total order `m_A + n_A + m_S + n_S` kept on the moment grid.
pub const MAX_ORDER: u8 = 4;

/// Exponents `(m_A, n_A, m_S, n_S)` of `⟨(a_A†)^m_A a_A^n_A (a_S†)^m_S a_S^n_S⟩`.
pub type MomentIndex = [u8; 4];

/// All indices with entries in {0,1,2} and total order ≤ 4, by order then lexicographically.
pub fn moment_grid() -> Vec<MomentIndex> {
    let mut out = Vec::new();
    for order in 0..=MAX_ORDER {
        for ma in 0..3u8 {
            for na in 0..3u8 {
                for ms in 0..3u8 {
                    for ns in 0..3u8 {
                        if ma + na + ms + ns == order {
                            out.push([ma, na, ms, ns]);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Index of the complex-conjugate moment.
pub fn conjugate_index(k: MomentIndex) -> MomentIndex {
    [k[1], k[0], k[3], k[2]]
}

pub fn order(k: MomentIndex) -> u8 {
    k.iter().sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Ideal,
    Raw,
    Reference,
    Denoised,
    Normalized,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ideal => "ideal",
            Stage::Raw => "raw",
            Stage::Reference => "reference",
            Stage::Denoised => "denoised",
            Stage::Normalized => "normalized",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "ideal" => Stage::Ideal,
            "raw" => Stage::Raw,
            "reference" => Stage::Reference,
            "denoised" => Stage::Denoised,
            "normalized" => Stage::Normalized,
            other => return Err(Error::InvalidParameter(format!("unknown moment stage {other:?}"))),
        })
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Joint normally ordered moments of the two field modes.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    pub values: BTreeMap<MomentIndex, C64>,
    pub stage: Stage,
    /// Number of averaged repetitions; `None` for exact values.
    pub shots: Option<u64>,
}

impl MomentSet {
    /// All-zero grid with the unit moment set.
    pub fn vacuum(stage: Stage) -> Self {
        let mut values: BTreeMap<_, _> = moment_grid().into_iter().map(|k| (k, C64::new(0.0, 0.0))).collect();
        values.insert([0, 0, 0, 0], C64::new(1.0, 0.0));
        Self { values, stage, shots: None }
    }

    pub fn get(&self, k: MomentIndex) -> C64 {
        self.values.get(&k).copied().unwrap_or(C64::new(0.0, 0.0))
    }

    pub fn set(&mut self, k: MomentIndex, v: C64) {
        self.values.insert(k, v);
    }

    pub fn indices(&self) -> impl Iterator<Item = MomentIndex> + '_ {
        self.values.keys().copied()
    }

    /// Largest violation of `value(m,n,p,q) = conj(value(n,m,q,p))`.
    pub fn conjugation_defect(&self) -> f64 {
        self.values
            .iter()
            .map(|(&k, v)| (v - self.get(conjugate_index(k)).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Largest deviation from another set over the shared grid.
    pub fn max_difference(&self, other: &MomentSet) -> f64 {
        self.values.iter().map(|(&k, v)| (v - other.get(k)).norm()).fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of `M_XY = ⟨X†Y⟩` over
    /// `X, Y ∈ {1, a_A, a_S, a_A², a_S², a_A a_S}`. Non-negative for physical states.
    pub fn moment_matrix_min_eigenvalue(&self) -> f64 {
        let basis: [[u8; 2]; 6] = [[0, 0], [1, 0], [0, 1], [2, 0], [0, 2], [1, 1]];
        let m = Matrix::from_shape_fn((6, 6), |(x, y)| {
            let (bx, by) = (basis[x], basis[y]);
            self.get([bx[0], by[0], bx[1], by[1]])
        });
        eigh(&crate::linalg::hermitian_part(&m)).values[0]
    }

    /// CSV with a `mA,nA,mS,nS,re,im,stage` header. Values use the shortest
    /// representation that round-trips exactly.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "mA,nA,mS,nS,re,im,stage")?;
        for (k, v) in &self.values {
            writeln!(w, "{},{},{},{},{:?},{:?},{}", k[0], k[1], k[2], k[3], v.re, v.im, self.stage)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = Vec::new();
        self.write_csv(&mut out).expect("writing to memory");
        String::from_utf8(out).expect("ascii output")
    }

    /// Read a set written by [`MomentSet::write_csv`]. All rows must share one stage.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut values = BTreeMap::new();
        let mut stage = None;
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("mA") {
                continue;
            }
            let bad = || Error::Config(format!("moment csv line {}: {line:?}", lineno + 1));
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 7 {
                return Err(bad());
            }
            let mut k = [0u8; 4];
            for (slot, c) in k.iter_mut().zip(&cols[..4]) {
                *slot = c.parse().map_err(|_| bad())?;
            }
            let re: f64 = cols[4].parse().map_err(|_| bad())?;
            let im: f64 = cols[5].parse().map_err(|_| bad())?;
            let st = Stage::parse(cols[6])?;
            if *stage.get_or_insert(st) != st {
                return Err(Error::Config("mixed stages in one moment file".into()));
            }
            values.insert(k, C64::new(re, im));
        }
        let stage = stage.ok_or_else(|| Error::Config("empty moment file".into()))?;
        Ok(Self { values, stage, shots: None })
    }
}

/// Exact moments of a two-mode state on `|n_A n_S⟩`.
pub fn moments_from_state(rho: &DensityMatrix) -> Result<MomentSet> {
    let dims = rho.dims().to_vec();
    if dims.len() != 2 {
        return Err(Error::DimensionMismatch(format!("expected two modes, got dims {dims:?}")));
    }
    let a = Operator::embed(&annihilation(dims[0])?, 0, &dims)?;
    let b = Operator::embed(&annihilation(dims[1])?, 1, &dims)?;
    let power = |op: &Operator, k: u8| (0..k).fold(Operator::identity(&dims), |acc, _| &acc * op);
    let (ad, bd) = (a.adjoint(), b.adjoint());
    let mut out = MomentSet::vacuum(Stage::Ideal);
    // the unit moment stays exactly 1
    for k in moment_grid().into_iter().skip(1) {
        let op = &(&(&power(&ad, k[0]) * &power(&a, k[1])) * &power(&bd, k[2])) * &power(&b, k[3]);
        out.set(k, rho.expectation(op.matrix()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn psi_theta(theta: f64) -> DensityMatrix {
        let r = |x: f64| C64::new(x, 0.0);
        DensityMatrix::from_pure(vec![2, 2], &[r(0.0), r((theta / 2.0).sin()), r((theta / 2.0).cos()), r(0.0)]).unwrap()
    }

    #[test]
    fn grid_size_and_order() {
        let g = moment_grid();
        assert_eq!(g[0], [0, 0, 0, 0]);
        assert!(g.windows(2).all(|w| order(w[0]) <= order(w[1])));
        // coefficients of (1 + x + x²)^4 up to x⁴: 1 + 4 + 10 + 16 + 19
        assert_eq!(g.len(), 50);
    }

    #[test]
    fn balanced_state_moments() {
        let m = moments_from_state(&psi_theta(std::f64::consts::FRAC_PI_2)).unwrap();
        assert_abs_diff_eq!(m.get([1, 0, 0, 1]).re, 0.5, epsilon = 1e-12);
        assert_eq!(m.get([0, 1, 0, 1]), C64::new(0.0, 0.0));
        assert_eq!(m.get([2, 2, 0, 0]), C64::new(0.0, 0.0));
        assert!(m.conjugation_defect() < 1e-15);
        assert!(m.moment_matrix_min_eigenvalue() > -1e-12);
    }

    #[test]
    fn closed_forms_on_theta_grid() {
        for k in 0..21 {
            let theta = std::f64::consts::PI * k as f64 / 20.0;
            let m = moments_from_state(&psi_theta(theta)).unwrap();
            assert_abs_diff_eq!(m.get([1, 1, 0, 0]).re, (theta / 2.0).cos().powi(2), epsilon = 1e-12);
            assert_abs_diff_eq!(m.get([0, 0, 1, 1]).re, (theta / 2.0).sin().powi(2), epsilon = 1e-12);
            assert_abs_diff_eq!(m.get([1, 0, 0, 1]).re, theta.sin() / 2.0, epsilon = 1e-12);
            assert_abs_diff_eq!(m.get([0, 1, 0, 1]).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut m = moments_from_state(&psi_theta(1.0)).unwrap();
        m.set([1, 0, 0, 0], C64::new(0.1 + 0.2, -1.0 / 3.0));
        let text = m.to_csv_string();
        assert!(text.starts_with("mA,nA,mS,nS,re,im,stage\n"));
        let back = MomentSet::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back.values, m.values);
        assert_eq!(back.stage, Stage::Ideal);
        assert_eq!(back.to_csv_string(), text);
    }

    #[test]
    fn unphysical_moments_fail_psd_gate() {
        let mut m = MomentSet::vacuum(Stage::Ideal);
        m.set([1, 1, 0, 0], C64::new(-0.2, 0.0));
        assert!(m.moment_matrix_min_eigenvalue() < 0.0);
    }
}
