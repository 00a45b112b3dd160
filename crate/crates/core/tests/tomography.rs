use std::f64::consts::PI;

use freqbin::detection::{denoise_moments, moment_grid, moments_from_state, synthesize_repeat, MomentSet, NoiseModel};
use freqbin::linalg::{adjoint, pauli, state_fidelity, trace_distance, DensityMatrix, Matrix};
use freqbin::tomography::*;
use ndarray::Array2;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_state(rng: &mut ChaCha8Rng, rank: usize) -> DensityMatrix {
    let g = Array2::from_shape_fn((4, rank), |_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let rho = g.dot(&adjoint(&g));
    let tr = rho.diag().iter().map(|z| z.re).sum::<f64>();
    DensityMatrix::from_numerical(vec![2, 2], &rho.mapv(|z| z / tr)).unwrap()
}

fn noisy_moments(rho: &DensityMatrix, shots: u64, seed: u64, repeat: u64) -> MomentSet {
    let noise = NoiseModel::new(2.1, Some(shots), seed).unwrap();
    let (raw, reference) = synthesize_repeat(&moments_from_state(rho).unwrap(), &noise, repeat).unwrap();
    denoise_moments(&raw, &reference).unwrap()
}

fn random_unitary(rng: &mut ChaCha8Rng) -> Matrix {
    // exp(-i n·σ φ/2) times a global phase
    let n: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
    let norm = n.iter().map(|x| x * x).sum::<f64>().sqrt();
    let phi: f64 = rng.random_range(0.0..2.0 * PI);
    let mut u = Matrix::eye(2) * C64::new((phi / 2.0).cos(), 0.0);
    for k in 0..3 {
        u = u - pauli(k + 1).into_matrix() * C64::new(0.0, (phi / 2.0).sin() * n[k] / norm);
    }
    u * C64::from_polar(1.0, rng.random_range(0.0..2.0 * PI))
}

#[test]
fn sensing_matrix_matches_moments_on_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = build_sensing_matrix(&moment_grid()).unwrap();
    for _ in 0..5 {
        let rho = random_state(&mut rng, 4);
        let m = moments_from_state(&rho).unwrap();
        for (k, v) in a.indices.iter().zip(a.apply(rho.matrix())) {
            assert!((v - m.get(*k)).norm() < 1e-12);
        }
    }
}

#[test]
fn ls_and_gd_agree_on_noisy_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst: f64 = 0.0;
    for trial in 0..50 {
        let rank = 1 + trial % 4;
        let rho = random_state(&mut rng, rank);
        let m = noisy_moments(&rho, 1_000_000, 23, trial as u64);
        let ls = ls_qst(&m, &LsOptions::default()).unwrap();
        let gd = gd_qst(&m, &CholeskyAnsatz::new(4)).unwrap();
        worst = worst.max(trace_distance(&ls.rho, &gd.rho).unwrap());
    }
    assert!(worst <= 0.02, "worst trace distance {worst}");
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let target = random_state(&mut rng, 2);
    let m = noisy_moments(&target, 10_000, 1, 0);
    let h = 1e-6;
    for _ in 0..20 {
        let t = Array2::from_shape_fn((3, 4), |_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        let (_, grad) = gd_loss_and_gradient(&m, &t).unwrap();
        let mut fd = Matrix::zeros((3, 4));
        for idx in 0..12 {
            let (i, j) = (idx / 4, idx % 4);
            for (dir, unit) in [(0, C64::new(1.0, 0.0)), (1, C64::new(0.0, 1.0))] {
                let mut tp = t.clone();
                let mut tm = t.clone();
                tp[[i, j]] += unit * h;
                tm[[i, j]] -= unit * h;
                let d = (gd_loss_and_gradient(&m, &tp).unwrap().0 - gd_loss_and_gradient(&m, &tm).unwrap().0) / (2.0 * h);
                if dir == 0 {
                    fd[[i, j]].re = d;
                } else {
                    fd[[i, j]].im = d;
                }
            }
        }
        let diff = (&grad - &fd).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let scale = grad.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(diff / scale < 1e-5, "relative error {}", diff / scale);
    }
}

#[test]
fn unitary_channels_are_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let u = random_unitary(&mut rng);
        let chi = ProcessMatrix::from_unitary(&u);
        let outs: Vec<DensityMatrix> = cardinal_states()
            .iter()
            .map(|r| DensityMatrix::from_numerical(vec![2], &u.dot(r.matrix()).dot(&adjoint(&u))).unwrap())
            .collect();
        let res = qpt(&cardinal_states(), &outs, &QptOptions::default()).unwrap();
        assert!(process_fidelity(&res.process, &chi) >= 0.9999);
        assert!(res.process.min_eigenvalue() > -1e-8);
        assert!(res.process.tp_residual() < 1e-4);
    }
}

#[test]
fn rank_one_fit_returns_pure_state() {
    let r = |x: f64| C64::new(x, 0.0);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let ideal = DensityMatrix::from_pure(vec![2, 2], &[r(0.0), r(s), r(s), r(0.0)]).unwrap();
    // slightly dephased single-photon state
    let mut m = ideal.matrix().clone();
    m[[1, 2]] *= 0.9;
    m[[2, 1]] *= 0.9;
    let mixed = DensityMatrix::new(vec![2, 2], m).unwrap();
    let moments = moments_from_state(&mixed).unwrap();
    let r1 = gd_qst(&moments, &CholeskyAnsatz::new(1)).unwrap();
    let r4 = gd_qst(&moments, &CholeskyAnsatz::new(4)).unwrap();
    assert!((r1.rho.purity() - 1.0).abs() < 1e-9);
    assert!(state_fidelity(&ideal, &r1.rho).unwrap() > state_fidelity(&ideal, &r4.rho).unwrap());
}

#[test]
fn shot_noise_does_not_help_on_average() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let rho = random_state(&mut rng, 1);
    let exact = ls_qst(&moments_from_state(&rho).unwrap(), &LsOptions::default()).unwrap();
    let f_exact = state_fidelity(&rho, &exact.rho).unwrap();
    let batch: Vec<f64> = (0..16)
        .map(|k| {
            let rec = ls_qst(&noisy_moments(&rho, 100_000, 4, k), &LsOptions::default()).unwrap();
            state_fidelity(&rho, &rec.rho).unwrap()
        })
        .collect();
    let mean = batch.iter().sum::<f64>() / batch.len() as f64;
    assert!(mean <= f_exact + 1e-9, "{mean} vs {f_exact}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn reconstructions_are_valid_states(seed in 0u64..10_000, rank in 1usize..=4, shots in 1_000u64..1_000_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_state(&mut rng, rank);
        let m = noisy_moments(&rho, shots, seed, 0);
        for rec in [ls_qst(&m, &LsOptions::default()).unwrap(), gd_qst(&m, &CholeskyAnsatz::new(rank)).unwrap()] {
            // the constructor re-validates Hermiticity, trace and positivity
            prop_assert!(DensityMatrix::new(vec![2, 2], rec.rho.matrix().clone()).is_ok());
        }
    }

    #[test]
    fn process_fidelity_of_pure_process_with_itself(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let chi = ProcessMatrix::from_unitary(&random_unitary(&mut rng));
        prop_assert!((process_fidelity(&chi, &chi) - 1.0).abs() < 1e-12);
        prop_assert!(chi.tp_residual() < 1e-12);
    }
}
