use std::f64::consts::PI;

use freqbin::heralding::*;
use freqbin::linalg::{DensityMatrix, Matrix};
use ndarray::Array2;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn grid21() -> Vec<f64> {
    (0..21).map(|k| k as f64 / 20.0).collect()
}

#[test]
fn heralded_never_worse_than_unheralded() {
    for k in 0..21 {
        let theta = PI * k as f64 / 20.0;
        for row in loss_sweep(theta, &grid21()).unwrap() {
            if let Some(fh) = row.f_heralded {
                assert!(fh >= row.f_unheralded - 1e-12, "theta {theta} p {}", row.p);
                assert!((fh - 1.0).abs() < 1e-9);
            } else {
                assert_eq!(row.p, 1.0);
                assert!(row.f_unheralded.abs() < 1e-12);
            }
            assert!((row.p_flag - row.p).abs() < 1e-9);
            assert!((row.f_unheralded - (1.0 - row.p)).abs() < 1e-9);
        }
    }
}

#[test]
fn lossless_remote_entanglement_is_maximal() {
    let r = remote_entanglement(PI / 2.0, &LossChannel::equal(0.0).unwrap()).unwrap();
    let cond = r.conditional.unwrap();
    assert!((cond.purity() - 1.0).abs() < 1e-9);
    let x = cond.partial_trace(&[0]).unwrap();
    let d = cond.partial_trace(&[1]).unwrap();
    for reduced in [x, d] {
        let diff = reduced.matrix() - &(Matrix::eye(2) * C64::new(0.5, 0.0));
        assert!(diff.iter().all(|z| z.norm() < 1e-9));
    }
    assert!(r.fidelity.unwrap() >= 0.999);
}

#[test]
fn flagged_runs_leave_x_dephased() {
    let r = remote_entanglement(PI / 2.0, &LossChannel::equal(0.6).unwrap()).unwrap();
    assert!((r.p_flag - 0.6).abs() < 1e-12);
    // heralded branch keeps full entanglement under equal loss
    assert!((r.fidelity.unwrap() - 1.0).abs() < 1e-12);
    assert!((r.x_marginal.matrix()[[0, 0]].re - 0.5).abs() < 1e-12);
}

fn state(entries: &[(f64, f64)]) -> DensityMatrix {
    let g = Array2::from_shape_fn((4, 4), |(i, j)| C64::new(entries[4 * i + j].0, entries[4 * i + j].1));
    let rho = g.dot(&g.t().mapv(|z| z.conj()));
    let tr = rho.diag().iter().map(|z| z.re).sum::<f64>();
    DensityMatrix::from_numerical(vec![2, 2], &rho.mapv(|z| z / tr)).unwrap()
}

proptest! {
    #[test]
    fn loss_is_cptp(p_a in 0.0..=1.0f64, p_s in 0.0..=1.0f64, e in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 16)) {
        let ch = LossChannel::new(p_a, p_s).unwrap();
        prop_assert!(ch.completeness_residual() < 1e-14);
        let out = apply_loss(&state(&e), &ch).unwrap();
        let tr: f64 = out.matrix().diag().iter().map(|z| z.re).sum();
        prop_assert!((tr - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flag_probability_is_monotone(theta in 0.0..=PI, p_a in 0.0..0.9f64, p_s in 0.0..0.9f64, dp in 0.0..0.1f64) {
        let flag = |a: f64, s: f64| remote_entanglement(theta, &LossChannel::new(a, s).unwrap()).unwrap().p_flag;
        let base = flag(p_a, p_s);
        prop_assert!(flag(p_a + dp, p_s) >= base - 1e-14);
        prop_assert!(flag(p_a, p_s + dp) >= base - 1e-14);
    }

    #[test]
    fn success_and_flag_sum_to_one(theta in 0.0..=PI, p_a in 0.0..0.99f64, p_s in 0.0..0.99f64) {
        let rx = ideal_receive(&apply_loss(&encoded_field(theta), &LossChannel::new(p_a, p_s).unwrap()).unwrap()).unwrap();
        let h = herald(&rx.rho, &logical_target(theta)).unwrap();
        prop_assert!((h.p_success + h.p_flag - 1.0).abs() < 1e-12);
        prop_assert!(h.fidelity_success <= 1.0 + 1e-12);
    }
}
