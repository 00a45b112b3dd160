//! Drive spectroscopy: residual Qubit-D population after a fixed-length
//! square pulse, on a frequency × amplitude grid.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::evolve::{evolve, EvolveOptions, DEFAULT_DT};
use super::model::{coupler_channels, qubit_channels, waveguide_channels, Ops, E, F, G, SLOT_A, SLOT_S};
use super::system::{Coefficient, FrameKind, SystemSpec};
use crate::device::{ac_stark_shift, epsilon_for_zeta, DeviceParams, HybridizedFrame};
use crate::error::{Error, Result};
use crate::linalg::DensityMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    /// Parametric drive, starting from `|e⟩`.
    Param,
    /// Second-order drive, starting from `|f⟩`.
    Second,
}

impl SweepKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "param" => Ok(SweepKind::Param),
            "2nd" | "second" => Ok(SweepKind::Second),
            other => Err(Error::InvalidParameter(format!("unknown sweep {other:?}"))),
        }
    }

    fn start_level(self) -> usize {
        match self {
            SweepKind::Param => E,
            SweepKind::Second => F,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    /// Pulse length, μs.
    pub duration: f64,
    /// Integration step, μs; zero selects `min(1 ns, admissible)`.
    pub dt: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { duration: 0.5, dt: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectroscopySurface {
    pub kind: SweepKind,
    /// Drive frequencies, GHz.
    pub freqs: Vec<f64>,
    /// Drive amplitudes, MHz.
    pub amps: Vec<f64>,
    /// `population[a][f]`: residual population of the starting level.
    pub population: Vec<Vec<f64>>,
}

impl SpectroscopySurface {
    /// Frequency of the deepest point on row `a`.
    pub fn dip(&self, a: usize) -> f64 {
        let row = &self.population[a];
        let k = (0..row.len()).min_by(|&i, &j| row[i].total_cmp(&row[j])).unwrap();
        self.freqs[k]
    }

    /// Local minima on row `a` lying below `threshold`, as frequencies.
    pub fn dips_below(&self, a: usize, threshold: f64) -> Vec<f64> {
        let row = &self.population[a];
        let n = row.len();
        (0..n)
            .filter(|&k| {
                row[k] < threshold
                    && (k == 0 || row[k] <= row[k - 1])
                    && (k + 1 == n || row[k] < row[k + 1])
            })
            .map(|k| self.freqs[k])
            .collect()
    }

    /// CSV with `freq_GHz,amp,population` rows, amplitude-major.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "freq_GHz,amp,population")?;
        for (a, amp) in self.amps.iter().enumerate() {
            for (f, freq) in self.freqs.iter().enumerate() {
                writeln!(w, "{freq:.6},{amp:.6},{:.9}", self.population[a][f])?;
            }
        }
        Ok(())
    }
}

/// Relative coupling of the drive to the second mode: `S` for the parametric
/// drive, `A` for the second-order drive. Falls back to −1 when undefined.
pub fn mode_coupling_ratio(kind: SweepKind, frame: &HybridizedFrame) -> f64 {
    let (num, den) = match kind {
        SweepKind::Param => (
            frame.phi_s_mode[2] - frame.phi_a_mode[2],
            frame.phi_s_mode[1] - frame.phi_a_mode[1],
        ),
        SweepKind::Second => (frame.phi[1], frame.phi[2]),
    };
    let r = num / den;
    if den.abs() < 1e-12 || !r.is_finite() {
        -1.0
    } else {
        r
    }
}

/// Static system for one grid point, each mode in the frame of the drive.
pub fn spectroscopy_system(
    kind: SweepKind,
    freq_ghz: f64,
    amp_mhz: f64,
    params: &DeviceParams,
    frame: &HybridizedFrame,
) -> Result<SystemSpec> {
    let ops = Ops::new(false);
    let mut spec = SystemSpec::new(ops.dims.clone(), FrameKind::PerMode)?;
    let tau = 2.0 * PI;
    let a_a = ops.lower(SLOT_A);
    let a_s = ops.lower(SLOT_S);
    let ratio = mode_coupling_ratio(kind, frame);
    let (delta_a, delta_s, lower, amp_a, amp_s) = match kind {
        SweepKind::Param => {
            let da = (frame.omega_a - params.omega_d_ge - freq_ghz) * 1e3;
            let ds = (frame.omega_s - params.omega_d_ge - freq_ghz) * 1e3;
            (da, ds, ops.d_flip(G, E), amp_mhz, amp_mhz * ratio)
        }
        SweepKind::Second => {
            let zeta = amp_mhz;
            let stark = ac_stark_shift(epsilon_for_zeta(zeta, frame, params), frame, params);
            let level_f = (2.0 * params.omega_d_ge - freq_ghz) * 1e3 + params.alpha_d + 2.0 * stark;
            let da = frame.omega_a * 1e3 - level_f;
            let ds = frame.omega_s * 1e3 - level_f;
            let s = 2f64.sqrt();
            (da, ds, ops.d_flip(G, F), s * zeta * ratio, s * zeta)
        }
    };
    for (amp, mode) in [(amp_a, &a_a), (amp_s, &a_s)] {
        if amp != 0.0 {
            spec.add_hermitian_pair(Coefficient::real(tau * amp), &(&lower * &mode.adjoint()));
        }
    }
    spec.add_term(Coefficient::real(tau * delta_a), &ops.number(SLOT_A));
    spec.add_term(Coefficient::real(tau * delta_s), &ops.number(SLOT_S));
    for ch in waveguide_channels(params, &ops)
        .into_iter()
        .chain(qubit_channels(params, &ops))
        .chain(coupler_channels(params, &ops))
    {
        spec.add_channel(ch)?;
    }
    Ok(spec)
}

/// Residual population of the starting level after a square pulse.
pub fn spectroscopy_point(
    kind: SweepKind,
    freq_ghz: f64,
    amp_mhz: f64,
    params: &DeviceParams,
    frame: &HybridizedFrame,
    opts: &SweepOptions,
) -> Result<f64> {
    let spec = spectroscopy_system(kind, freq_ghz, amp_mhz, params, frame)?;
    let level = kind.start_level();
    let rest = 4;
    let mut psi = vec![C64::new(0.0, 0.0); 12];
    psi[level * rest] = C64::new(1.0, 0.0);
    let rho0 = DensityMatrix::from_pure(spec.dims.clone(), &psi)?;
    let dt = if opts.dt > 0.0 { opts.dt } else { spec.max_step().min(DEFAULT_DT) };
    let traj = evolve(&rho0, &spec, opts.duration, dt, &EvolveOptions::default())?;
    let rho = &traj.final_state;
    Ok((0..rest).map(|k| rho[[level * rest + k, level * rest + k]].re).sum())
}

/// Sweep over `freqs × amps`, run in parallel over grid points.
pub fn spectroscopy_sweep(
    kind: SweepKind,
    freqs: &[f64],
    amps: &[f64],
    params: &DeviceParams,
    frame: &HybridizedFrame,
    opts: &SweepOptions,
) -> Result<SpectroscopySurface> {
    if freqs.is_empty() || amps.is_empty() {
        return Err(Error::InvalidParameter("empty sweep grid".into()));
    }
    let points: Vec<(usize, usize)> = (0..amps.len()).flat_map(|a| (0..freqs.len()).map(move |f| (a, f))).collect();
    let values: Vec<f64> = points
        .par_iter()
        .map(|&(a, f)| spectroscopy_point(kind, freqs[f], amps[a], params, frame, opts))
        .collect::<Result<_>>()?;
    let population = values.chunks(freqs.len()).map(|c| c.to_vec()).collect();
    Ok(SpectroscopySurface { kind, freqs: freqs.to_vec(), amps: amps.to_vec(), population })
}

/// Evenly spaced grid including both ends.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n).map(|k| start + (stop - start) * k as f64 / (n - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::hybridize;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_amplitude_is_flat() {
        let p = DeviceParams::default().without_decoherence();
        let f = hybridize(&p).unwrap();
        let freqs = linspace(0.6, 0.8, 5);
        let s = spectroscopy_sweep(SweepKind::Param, &freqs, &[0.0], &p, &f, &SweepOptions::default()).unwrap();
        for v in &s.population[0] {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn resonant_point_is_depleted() {
        let p = DeviceParams::default().without_decoherence();
        let f = hybridize(&p).unwrap();
        let on = spectroscopy_point(SweepKind::Param, f.omega_a - p.omega_d_ge, 2.0, &p, &f, &SweepOptions::default()).unwrap();
        let off = spectroscopy_point(SweepKind::Param, f.omega_a - p.omega_d_ge + 0.03, 2.0, &p, &f, &SweepOptions::default()).unwrap();
        assert!(on < 0.1, "on resonance {on}");
        assert!(off > 0.8, "off resonance {off}");
    }

    #[test]
    fn csv_layout() {
        let s = SpectroscopySurface {
            kind: SweepKind::Param,
            freqs: vec![1.0, 2.0],
            amps: vec![0.5],
            population: vec![vec![0.25, 0.75]],
        };
        let mut out = Vec::new();
        s.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().next(), Some("freq_GHz,amp,population"));
        assert_eq!(text.lines().count(), 3);
        assert_eq!(s.dip(0), 1.0);
    }
}
