use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::moments::{conjugate_index, moment_grid, MomentIndex, MomentSet, Stage};
use crate::device::DeviceParams;
use crate::dynamics::Envelope;
use crate::error::{Error, Result, Warning};

/// Phase-insensitive amplifier chain: the detected mode is `S = a + h†` with
/// `h` thermal (one independent noise mode per channel).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Added noise photons `n̄`.
    pub n_added: f64,
    /// Repetitions averaged per moment; `None` for the infinite-shot limit.
    pub shots: Option<u64>,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(n_added: f64, shots: Option<u64>, seed: u64) -> Result<Self> {
        if !(n_added >= 0.0) || !n_added.is_finite() {
            return Err(Error::InvalidParameter(format!("n_added = {n_added}")));
        }
        if shots == Some(0) {
            return Err(Error::InvalidParameter("shots must be at least 1".into()));
        }
        Ok(Self { n_added, shots, seed })
    }

    /// Detection efficiency `η = ½/(½ + n̄)`.
    pub fn quantum_efficiency(&self) -> f64 {
        0.5 / (0.5 + self.n_added)
    }

    /// Added noise implied by an efficiency.
    pub fn n_added_for_efficiency(eta: f64) -> f64 {
        0.5 / eta - 0.5
    }

    /// Anti-normally ordered noise moment `⟨h_A^m (h_A†)^n h_S^p (h_S†)^q⟩`.
    pub fn noise_moment(&self, k: MomentIndex) -> C64 {
        let single = |a: u8, b: u8| {
            if a != b {
                0.0
            } else {
                (1..=a as u32).map(|j| j as f64 * (self.n_added + 1.0)).product::<f64>()
            }
        };
        C64::new(single(k[0], k[1]) * single(k[2], k[3]), 0.0)
    }

    /// Reference moments: the detected modes with the field in vacuum.
    pub fn reference(&self) -> MomentSet {
        let mut out = MomentSet::vacuum(Stage::Reference);
        for k in moment_grid() {
            out.set(k, self.noise_moment(k));
        }
        out
    }
}

fn binomial(n: u8, k: u8) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Terms of the expansion of `⟨(S_A†)^m S_A^n (S_S†)^p S_S^q⟩` with `S = a + h†`:
/// `Σ C(m,i)C(n,j)C(p,k)C(q,l) ⟨a-part(i,j,k,l)⟩ ⟨h^{m−i}(h†)^{n−j} …⟩`.
fn expansion(k: MomentIndex) -> impl Iterator<Item = (f64, MomentIndex, MomentIndex)> {
    let [m, n, p, q] = k;
    (0..=m).flat_map(move |i| {
        (0..=n).flat_map(move |j| {
            (0..=p).flat_map(move |r| {
                (0..=q).map(move |s| {
                    let c = binomial(m, i) * binomial(n, j) * binomial(p, r) * binomial(q, s);
                    (c, [i, j, r, s], [m - i, n - j, p - r, q - s])
                })
            })
        })
    })
}

fn combine(signal: &MomentSet, noise: &MomentSet, stage: Stage) -> MomentSet {
    let mut out = MomentSet::vacuum(stage);
    for k in moment_grid() {
        let v: C64 = expansion(k).map(|(c, a, h)| signal.get(a) * noise.get(h) * c).sum();
        out.set(k, v);
    }
    out
}

/// Gaussian (Isserlis) estimate of `E|s_A^{*m} s_A^n s_S^{*p} s_S^q|²` for
/// phase-symmetric detected fields with powers `power_a`, `power_s`.
fn sample_variance(k: MomentIndex, power_a: f64, power_s: f64, mean: C64) -> f64 {
    let fact = |n: u32| (1..=n).map(|x| x as f64).product::<f64>();
    let oa = (k[0] + k[1]) as u32;
    let os = (k[2] + k[3]) as u32;
    (fact(oa) * power_a.powi(oa as i32) * fact(os) * power_s.powi(os as i32) - mean.norm_sqr()).max(0.0)
}

/// Add the estimation error of a finite-shot average, keeping conjugation symmetry.
fn add_shot_noise(set: &mut MomentSet, shots: u64, rng: &mut ChaCha8Rng) {
    let power_a = set.get([1, 1, 0, 0]).re.max(0.0);
    let power_s = set.get([0, 0, 1, 1]).re.max(0.0);
    let exact = set.clone();
    for k in moment_grid() {
        let partner = conjugate_index(k);
        if k == [0, 0, 0, 0] || partner < k {
            continue;
        }
        let sigma = (sample_variance(k, power_a, power_s, exact.get(k)) / shots as f64).sqrt();
        let mut gauss = || -> f64 { StandardNormal.sample(rng) };
        let err = if partner == k {
            C64::new(sigma * gauss(), 0.0)
        } else {
            C64::new(gauss(), gauss()) * (sigma / 2f64.sqrt())
        };
        let v = exact.get(k) + err;
        set.set(k, v);
        if partner != k {
            set.set(partner, v.conj());
        }
    }
    set.shots = Some(shots);
}

/// Detected-mode moments for the signal run and the interleaved reference run.
pub fn synthesize_raw_moments(ideal: &MomentSet, noise: &NoiseModel) -> Result<(MomentSet, MomentSet)> {
    synthesize_repeat(ideal, noise, 0)
}

/// As [`synthesize_raw_moments`] on random stream `repeat`, for Monte-Carlo repeats.
pub fn synthesize_repeat(ideal: &MomentSet, noise: &NoiseModel, repeat: u64) -> Result<(MomentSet, MomentSet)> {
    if ideal.stage != Stage::Ideal {
        return Err(Error::InvalidParameter(format!("expected ideal moments, got {}", ideal.stage)));
    }
    let reference_exact = noise.reference();
    let mut raw = combine(ideal, &reference_exact, Stage::Raw);
    let mut reference = reference_exact;
    if let Some(shots) = noise.shots {
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        rng.set_stream(repeat);
        // signal and reference alternate, so they draw from one stream in turn
        add_shot_noise(&mut raw, shots, &mut rng);
        add_shot_noise(&mut reference, shots, &mut rng);
    }
    Ok((raw, reference))
}

/// Denoised moments of `repeats` independent acquisitions, each on its own
/// random stream. Runs in parallel; the result is ordered by repeat.
pub fn monte_carlo_denoised(ideal: &MomentSet, noise: &NoiseModel, repeats: u64) -> Result<Vec<MomentSet>> {
    use rayon::prelude::*;
    (0..repeats)
        .into_par_iter()
        .map(|r| {
            let (raw, reference) = synthesize_repeat(ideal, noise, r)?;
            denoise_moments(&raw, &reference)
        })
        .collect()
}

/// Sample standard deviation of each moment over a batch, real and imaginary parts pooled.
pub fn moment_spread(batch: &[MomentSet]) -> MomentSet {
    let mut out = MomentSet::vacuum(Stage::Denoised);
    out.set([0, 0, 0, 0], C64::new(0.0, 0.0));
    let n = batch.len() as f64;
    if batch.len() < 2 {
        return out;
    }
    for k in moment_grid() {
        let mean: C64 = batch.iter().map(|m| m.get(k)).sum::<C64>() / n;
        let var = batch.iter().map(|m| (m.get(k) - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
        out.set(k, C64::new(var.sqrt(), 0.0));
    }
    out
}

/// Invert the signal–noise expansion order by order, using the reference as
/// the noise moments.
pub fn denoise_moments(raw: &MomentSet, reference: &MomentSet) -> Result<MomentSet> {
    let grid = moment_grid();
    if grid.iter().any(|k| !raw.values.contains_key(k) || !reference.values.contains_key(k)) {
        return Err(Error::GridMismatch { record: raw.values.len(), envelope: reference.values.len() });
    }
    if (reference.get([0, 0, 0, 0]) - 1.0).norm() > 1e-9 {
        return Err(Error::BadReference(format!("unit moment {}", reference.get([0, 0, 0, 0]))));
    }
    // ⟨h h†⟩ = n̄ + 1 must not fall below the vacuum value
    let slack = reference.shots.map_or(1e-9, |n| 5.0 / (n as f64).sqrt());
    for (k, name) in [([1, 1, 0, 0], "A"), ([0, 0, 1, 1], "S")] {
        let p = reference.get(k).re;
        if p - 1.0 < -slack * p.max(1.0) {
            return Err(Error::BadReference(format!("negative inferred noise power in channel {name}: {:.4}", p - 1.0)));
        }
    }
    let mut out = MomentSet::vacuum(Stage::Denoised);
    out.shots = raw.shots;
    for &k in &grid {
        let mut v = raw.get(k);
        for (c, a, h) in expansion(k) {
            if a != k {
                v -= out.get(a) * reference.get(h) * c;
            }
        }
        out.set(k, v);
    }
    Ok(out)
}

/// Calibration target `Γ_eff/(Γ_eff + Γ_D)` with both rates as `Γ/2π` in MHz.
pub fn normalization_target(gamma_eff_mhz: f64, gamma_d_mhz: f64) -> f64 {
    gamma_eff_mhz / (gamma_eff_mhz + gamma_d_mhz)
}

/// Rescale mode amplitudes so that the calibration runs (Qubit D in `|e⟩` for
/// mode A, `|f⟩` for mode S) reach `Γ_eff/(Γ_eff + 1/T1)`. An amplitude scale
/// `s` multiplies a moment by `s^(m+n)` in that mode.
pub fn normalize_moments(
    denoised: &MomentSet,
    calibration_e: &MomentSet,
    calibration_f: &MomentSet,
    gamma_eff_a: f64,
    gamma_eff_s: f64,
    params: &DeviceParams,
) -> Result<(MomentSet, Vec<Warning>)> {
    let to_mhz = |t1: f64| 1.0 / (2.0 * std::f64::consts::PI * t1);
    let target_a = normalization_target(gamma_eff_a, to_mhz(params.t1_ge));
    let target_s = normalization_target(gamma_eff_s, to_mhz(params.t1_ef));
    let mut warnings = Vec::new();
    let mut scale = |measured: f64, target: f64, name: &str| -> Result<f64> {
        if !(measured.abs() > 1e-12) || !measured.is_finite() {
            return Err(Error::CannotNormalize(format!("calibration photon number in mode {name} is {measured:.3e}")));
        }
        if !(target > 1e-9) {
            warnings.push(Warning::DegenerateNormalization { target });
        }
        Ok((target.max(0.0) / measured).max(0.0).sqrt())
    };
    let sa = scale(calibration_e.get([1, 1, 0, 0]).re, target_a, "A")?;
    let ss = scale(calibration_f.get([0, 0, 1, 1]).re, target_s, "S")?;
    let mut out = denoised.clone();
    out.stage = Stage::Normalized;
    for (k, v) in out.values.iter_mut() {
        *v *= sa.powi((k[0] + k[1]) as i32) * ss.powi((k[2] + k[3]) as i32);
    }
    Ok((out, warnings))
}

/// Mode amplitude `Σ f(t)·x(t)·dt` of a record on the envelope's time grid.
pub fn temporal_filter(record: &[C64], envelope: &Envelope) -> Result<C64> {
    if record.len() != envelope.samples.len() {
        return Err(Error::GridMismatch { record: record.len(), envelope: envelope.samples.len() });
    }
    Ok(envelope.project(record))
}
