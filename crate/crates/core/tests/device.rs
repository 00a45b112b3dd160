use std::f64::consts::PI;

use freqbin::device::*;
use proptest::prelude::*;

/// Roots of the characteristic polynomial of a real symmetric 3×3 matrix by
/// bisection on sign changes, independent of any eigen solver.
fn char_roots(m: [[f64; 3]; 3]) -> Vec<f64> {
    let det = |x: f64| {
        let a = [[m[0][0] - x, m[0][1], m[0][2]], [m[1][0], m[1][1] - x, m[1][2]], [m[2][0], m[2][1], m[2][2] - x]];
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let bound = 1.0 + m.iter().flatten().map(|x| x.abs()).sum::<f64>();
    let steps = 200_000;
    let mut roots = Vec::new();
    let mut prev = -bound;
    for k in 1..=steps {
        let x = -bound + 2.0 * bound * k as f64 / steps as f64;
        if det(prev).signum() != det(x).signum() {
            let (mut lo, mut hi) = (prev, x);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if det(lo).signum() == det(mid).signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        prev = x;
    }
    roots
}

#[test]
fn hybridized_frequencies_are_characteristic_roots() {
    let p = DeviceParams::default();
    let f = hybridize(&p).unwrap();
    // single-excitation block over {d, c, e}, GHz, coupler tuned to the emitter
    let (gd, ge) = (p.g_dc * 1e-3, p.g_ec * 1e-3);
    let wc = p.omega_e_op;
    let block = [[p.omega_d_ge, gd, 0.0], [gd, wc, ge], [0.0, ge, p.omega_e_op]];
    let mut roots = char_roots(block);
    roots.sort_by(f64::total_cmp);
    assert_eq!(roots.len(), 3);
    let mut ours = vec![f.omega_a, f.omega_s, f.omega_d];
    ours.sort_by(f64::total_cmp);
    for (a, b) in ours.iter().zip(&roots) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
    let v = f.bare_vectors;
    for i in 0..3 {
        for j in 0..3 {
            let dot: f64 = (0..3).map(|k| v[i][k] * v[j][k]).sum();
            assert!((dot - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
        }
    }
}

#[test]
fn bare_pair_frequencies() {
    let p = DeviceParams { g_dc: 0.0, omega_e_op: 5.745, ..DeviceParams::default() };
    let f = hybridize(&p).unwrap();
    assert!((f.omega_s - 5.79).abs() < 0.005);
    assert!((f.omega_a - 5.70).abs() < 0.005);
    assert!((f.splitting_mhz() - 92.0).abs() < 1e-9);
}

#[test]
fn default_drive_amplitude() {
    let p = DeviceParams::default();
    let f = hybridize(&p).unwrap();
    let (d, _) = calibrate_drives(&f, &p, 1.1).unwrap();
    assert!((d.zeta - 0.778).abs() < 1e-3);
}

proptest! {
    #[test]
    fn zeta_is_eta_over_root_two(eta in 0.0..3.0f64) {
        let p = DeviceParams::default();
        let f = hybridize(&p).unwrap();
        let (d, _) = calibrate_drives(&f, &p, eta).unwrap();
        prop_assert!((d.zeta - eta / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn coupler_frequency_is_even_and_periodic(phi in -3.0..3.0f64, w0 in 1.0..10.0f64) {
        let f = coupler_frequency(phi, w0);
        prop_assert!((f - coupler_frequency(-phi, w0)).abs() < 1e-12);
        prop_assert!((f - coupler_frequency(phi + PI, w0)).abs() < 1e-9);
    }

    #[test]
    fn stark_shift_quadratic(eps in 0.0..0.1f64) {
        let p = DeviceParams::default();
        let f = hybridize(&p).unwrap();
        let one = ac_stark_shift(eps, &f, &p);
        let two = ac_stark_shift(2.0 * eps, &f, &p);
        prop_assert!((two - 4.0 * one).abs() <= 1e-12 * (1.0 + two.abs()));
    }

    #[test]
    fn flux_drive_is_linear(eta_prime in 0.0..0.05f64) {
        let p = DeviceParams::default();
        let f = hybridize(&p).unwrap();
        let a = flux_amplitude_to_eta(eta_prime, &f, &p).unwrap();
        let b = flux_amplitude_to_eta(2.0 * eta_prime, &f, &p).unwrap();
        prop_assert!((b - 2.0 * a).abs() <= 1e-12 * (1.0 + b.abs()));
    }
}
