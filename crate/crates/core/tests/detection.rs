use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use freqbin::detection::*;
use freqbin::dynamics::Envelope;
use freqbin::linalg::DensityMatrix;
use freqbin::Error;
use ndarray::Array2;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn psi_theta(theta: f64) -> DensityMatrix {
    let r = |x: f64| C64::new(x, 0.0);
    DensityMatrix::from_pure(vec![2, 2], &[r(0.0), r((theta / 2.0).sin()), r((theta / 2.0).cos()), r(0.0)]).unwrap()
}

fn random_state(entries: &[(f64, f64)]) -> DensityMatrix {
    let g = Array2::from_shape_fn((4, 4), |(i, j)| {
        let (re, im) = entries[4 * i + j];
        C64::new(re, im)
    });
    let rho = g.dot(&g.t().mapv(|z| z.conj()));
    let tr = rho.diag().iter().map(|z| z.re).sum::<f64>();
    DensityMatrix::from_numerical(vec![2, 2], &rho.mapv(|z| z / tr)).unwrap()
}

fn exponential_envelope(gamma_mhz: f64, carrier_mhz: f64, t_len: f64, dt: f64) -> Envelope {
    let gamma = 2.0 * PI * gamma_mhz;
    let n = (t_len / dt).round() as usize;
    let times: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
    let samples: Vec<C64> = times
        .iter()
        .map(|&t| C64::from_polar(gamma.sqrt() * (-gamma * t / 2.0).exp(), 2.0 * PI * carrier_mhz * t))
        .collect();
    let norm = (samples.iter().map(|z| z.norm_sqr()).sum::<f64>() * dt).sqrt();
    Envelope {
        times,
        samples: samples.iter().map(|z| z / norm).collect(),
        dt,
        carrier_ghz: carrier_mhz * 1e-3,
        photons: 1.0,
        purity: 1.0,
        gamma_eff: Some(gamma_mhz),
        normalized: true,
    }
}

#[test]
fn fourth_order_vanishes_for_single_photon_states() {
    for k in 0..9 {
        let m = moments_from_state(&psi_theta(PI * k as f64 / 8.0)).unwrap();
        assert_eq!(m.get([0, 1, 0, 1]), C64::new(0.0, 0.0));
        assert_eq!(m.get([2, 2, 0, 0]), C64::new(0.0, 0.0));
        assert_eq!(m.get([0, 0, 2, 2]), C64::new(0.0, 0.0));
        assert_eq!(m.get([1, 1, 1, 1]), C64::new(0.0, 0.0));
    }
}

#[test]
fn filter_self_overlap_and_orthogonality() {
    let dt = 1e-4;
    let fa = exponential_envelope(4.59, 0.0, 1.0, dt);
    let fs = exponential_envelope(4.59, 92.0, 1.0, dt);
    let conj = |e: &Envelope| e.samples.iter().map(|z| z.conj()).collect::<Vec<_>>();

    let own = temporal_filter(&conj(&fa), &fa).unwrap();
    assert_abs_diff_eq!(own.re, 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(own.im, 0.0, epsilon = 1e-12);

    let cross = temporal_filter(&conj(&fs), &fa).unwrap().norm();
    // continuous overlap of two normalized exponentials split by Δ: Γ/|Γ + iΔ|
    let closed = 4.59 / (4.59f64.powi(2) + 92.0f64.powi(2)).sqrt();
    assert!(cross < 0.05, "overlap {cross}");
    assert!((cross - closed).abs() < 1e-3, "{cross} vs {closed}");

    let zero = vec![C64::new(0.0, 0.0); fa.samples.len()];
    assert_eq!(temporal_filter(&zero, &fa).unwrap(), C64::new(0.0, 0.0));
    assert!(matches!(temporal_filter(&zero[1..], &fa), Err(Error::GridMismatch { .. })));
}

#[test]
fn shot_noise_scales_as_inverse_root_shots() {
    let ideal = moments_from_state(&psi_theta(PI / 2.0)).unwrap();
    let shots = 5_000_000u64;
    let fine = NoiseModel::new(2.1, Some(shots), 11).unwrap();
    let coarse = NoiseModel::new(2.1, Some(shots / 4), 12).unwrap();
    let s_fine = moment_spread(&monte_carlo_denoised(&ideal, &fine, 100).unwrap());
    let s_coarse = moment_spread(&monte_carlo_denoised(&ideal, &coarse, 100).unwrap());
    let ratios: Vec<f64> = moment_grid()
        .into_iter()
        .skip(1)
        .map(|k| s_coarse.get(k).re / s_fine.get(k).re)
        .collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!((mean / 2.0 - 1.0).abs() < 0.2, "mean ratio {mean}");
    let photon = s_coarse.get([1, 1, 0, 0]).re / s_fine.get([1, 1, 0, 0]).re;
    assert!((photon / 2.0 - 1.0).abs() < 0.2, "photon-number ratio {photon}");
}

#[test]
fn sampled_denoising_stays_close() {
    let ideal = moments_from_state(&psi_theta(1.1)).unwrap();
    let noise = NoiseModel::new(2.1, Some(5_000_000), 3).unwrap();
    let (raw, reference) = synthesize_raw_moments(&ideal, &noise).unwrap();
    let back = denoise_moments(&raw, &reference).unwrap();
    assert!((back.get([1, 1, 0, 0]) - ideal.get([1, 1, 0, 0])).norm() < 0.02);
    assert!((back.get([1, 0, 0, 1]) - ideal.get([1, 0, 0, 1])).norm() < 0.02);
}

#[test]
fn grid_mismatch_is_reported() {
    let ideal = moments_from_state(&psi_theta(1.1)).unwrap();
    let (mut raw, reference) = synthesize_raw_moments(&ideal, &NoiseModel::new(1.0, None, 0).unwrap()).unwrap();
    raw.values.remove(&[2, 2, 0, 0]);
    assert!(matches!(denoise_moments(&raw, &reference), Err(Error::GridMismatch { .. })));
}

fn entries() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 16)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn moments_of_physical_states_are_consistent(e in entries()) {
        let m = moments_from_state(&random_state(&e)).unwrap();
        prop_assert!(m.conjugation_defect() < 1e-12);
        prop_assert!(m.moment_matrix_min_eigenvalue() > -1e-10);
        prop_assert_eq!(m.get([0, 0, 0, 0]), C64::new(1.0, 0.0));
    }

    #[test]
    fn denoise_inverts_synthesis(e in entries(), n_added in 0.0..5.0f64) {
        let ideal = moments_from_state(&random_state(&e)).unwrap();
        let noise = NoiseModel::new(n_added, None, 0).unwrap();
        let (raw, reference) = synthesize_raw_moments(&ideal, &noise).unwrap();
        prop_assert!(raw.conjugation_defect() < 1e-9);
        let back = denoise_moments(&raw, &reference).unwrap();
        prop_assert!(back.max_difference(&ideal) < 1e-10);
    }

    #[test]
    fn sampled_sets_are_conjugation_symmetric(e in entries(), seed in 0u64..1000, shots in 1u64..10_000_000) {
        let ideal = moments_from_state(&random_state(&e)).unwrap();
        let noise = NoiseModel::new(2.1, Some(shots), seed).unwrap();
        let (raw, reference) = synthesize_raw_moments(&ideal, &noise).unwrap();
        prop_assert!(raw.conjugation_defect() < 1e-12);
        prop_assert!(reference.conjugation_defect() < 1e-12);
    }

    #[test]
    fn csv_round_trip(e in entries()) {
        let m = moments_from_state(&random_state(&e)).unwrap();
        let back = MomentSet::read_csv(m.to_csv_string().as_bytes()).unwrap();
        prop_assert_eq!(back.values, m.values);
    }
}
