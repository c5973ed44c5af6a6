//! Independent checks of the Floquet engine against closed forms.

use std::f64::consts::PI;

use chiralmag::floquet::{
    bessel_j, chiral_root, compact_matrix, correction_magnitudes, effective_model, g_eff_series,
    Chirality, DriveParams,
};
use chiralmag::Complex64;
use nalgebra::Matrix3;

/// `J_n(x) = (1/π) ∫_0^π cos(nτ − x sin τ) dτ`; the trapezoid rule is spectrally
/// accurate for this periodic integrand.
fn bessel_quadrature(n: u32, x: f64) -> f64 {
    let m = 4000;
    let h = PI / m as f64;
    let mut s = 0.5 * (1.0 + (n as f64 * PI).cos());
    for i in 1..m {
        let tau = i as f64 * h;
        s += (n as f64 * tau - x * tau.sin()).cos();
    }
    s * h / PI
}

fn cis(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, x)
}

/// Clockwise coefficient matrix written out for general `f` and `G`.
fn clockwise_closed_form(f: f64, g: Complex64) -> Matrix3<Complex64> {
    let gc = g.conj();
    Matrix3::new(
        Complex64::new(0.0, 0.0),
        gc * cis(-f),
        g * cis(-f / 2.0),
        g * cis(f),
        Complex64::new(0.0, 0.0),
        gc * cis(f / 2.0),
        gc * cis(f / 2.0),
        g * cis(-f / 2.0),
        Complex64::new(0.0, 0.0),
    )
}

fn max_diff(a: &Matrix3<Complex64>, b: &Matrix3<Complex64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn swap_23(m: &Matrix3<Complex64>) -> Matrix3<Complex64> {
    let p = [0usize, 2, 1];
    Matrix3::from_fn(|r, c| m[(p[r], p[c])])
}

#[test]
fn bessel_matches_quadrature_oracle() {
    for n in 0..12 {
        for &x in &[0.3, 1.0, 2.404_825_557_695_773, 5.5, 13.0, 27.7, 49.9] {
            let (a, b) = (bessel_j(n, x), bessel_quadrature(n, x));
            assert!((a - b).abs() < 1e-12, "J_{n}({x}): {a} vs {b}");
        }
    }
}

#[test]
fn bessel_values_at_chiral_root() {
    let f = chiral_root();
    // J1 = 0.519147 is quoted as 0.5192, so allow one unit in the last digit.
    let want = [0.5192, 0.4318, 0.1990, 0.0647, 0.0164, 0.0034];
    for (n, w) in want.iter().enumerate() {
        let v = bessel_j(n as u32 + 1, f);
        assert!((v - w).abs() <= 1e-4, "J_{}(f) = {v}", n + 1);
    }
}

#[test]
fn bessel_recurrence_on_grid() {
    for i in 1..200 {
        let x = i as f64 * 0.25;
        for n in 1..20 {
            let lhs = bessel_j(n - 1, x) + bessel_j(n + 1, x);
            let rhs = 2.0 * n as f64 / x * bessel_j(n, x);
            assert!((lhs - rhs).abs() < 1e-10, "n={n} x={x}");
        }
    }
}

#[test]
fn bessel_parseval_at_root() {
    let f = chiral_root();
    let s: f64 =
        bessel_j(0, f).powi(2) + 2.0 * (1..60).map(|n| bessel_j(n, f).powi(2)).sum::<f64>();
    assert!((s - 1.0).abs() < 1e-10);
}

#[test]
fn g_eff_matches_direct_partial_sum() {
    let f = 2.40483;
    let direct: f64 = (1..=60)
        .map(|n| bessel_quadrature(n, f).powi(2) / n as f64 * (n as f64 * PI / 3.0).sin())
        .sum::<f64>()
        * 2.0
        / 20.0;
    let v = g_eff_series(f, 1.0, 20.0).unwrap();
    assert!((v - direct).abs() < 1e-12);
    assert!((v - 0.0313).abs() < 5e-5);
}

#[test]
fn chiral_drive_amplitude_at_twenty_g() {
    let d = DriveParams::chiral(20.0, Chirality::Clockwise).unwrap();
    assert!((d.delta_amp - 27.7685).abs() < 1e-4);
}

#[test]
fn clockwise_matrix_is_the_closed_form_for_any_amplitude() {
    for &delta in &[3.0, 11.0, 27.768_5, 40.0] {
        let phases = Chirality::Clockwise.phases().unwrap().to_vec();
        let d = DriveParams::new(delta, 20.0, phases).unwrap();
        let m = effective_model(&d, 1.0).unwrap();
        let f = 3f64.sqrt() * delta / 20.0;
        let g = Complex64::new(bessel_j(0, f), g_eff_series(f, 1.0, 20.0).unwrap());
        assert!(
            max_diff(&m.matrix, &clockwise_closed_form(f, g)) < 1e-12,
            "Δ={delta}"
        );
        assert!((m.coupling - g).norm() < 1e-12);
    }
}

#[test]
fn clockwise_chiral_point() {
    let m = effective_model(
        &DriveParams::chiral(20.0, Chirality::Clockwise).unwrap(),
        1.0,
    )
    .unwrap();
    assert_eq!(m.chirality, Chirality::Clockwise);
    assert!((m.flux - PI / 2.0).abs() < 1e-9);
    assert!(m.coupling.re.abs() < 1e-12);
    assert!((m.coupling.im - m.g_eff).abs() < 1e-15);
    assert!((m.phi - PI / 2.0).abs() < 1e-9);
    let (t3, t2) = (m.t3(), m.t2());
    assert!((t3 - 2.0 * PI / (3.0 * 3f64.sqrt() * m.g_eff)).abs() < 1e-9);
    assert!((t2 - 2.0 * t3).abs() < 1e-9);
}

#[test]
fn anticlockwise_matrix_is_relabeled_clockwise() {
    let cw = effective_model(
        &DriveParams::chiral(20.0, Chirality::Clockwise).unwrap(),
        1.0,
    )
    .unwrap();
    let acw = effective_model(
        &DriveParams::chiral(20.0, Chirality::Anticlockwise).unwrap(),
        1.0,
    )
    .unwrap();
    assert_eq!(acw.chirality, Chirality::Anticlockwise);
    assert!(max_diff(&acw.matrix, &swap_23(&cw.matrix)) < 1e-12);
    assert!((acw.flux + PI / 2.0).abs() < 1e-9);
    assert!((acw.coupling - cw.coupling.conj()).norm() < 1e-12);
}

#[test]
fn loop_phase_bookkeeping() {
    for &delta in &[0.0, 5.0, 27.768_5, 33.0] {
        for ch in [Chirality::Clockwise, Chirality::Anticlockwise] {
            let d = DriveParams::new(delta, 20.0, ch.phases().unwrap().to_vec()).unwrap();
            let m = effective_model(&d, 1.0).unwrap();
            let sum = m.hopping.phi_12 + m.hopping.phi_23 + m.hopping.phi_31;
            let r1 = (sum - m.flux).rem_euclid(2.0 * PI);
            let r2 = (-3.0 * m.phi - m.flux).rem_euclid(2.0 * PI);
            for r in [r1, r2] {
                assert!(r < 1e-9 || 2.0 * PI - r < 1e-9, "Δ={delta} {ch:?}");
            }
            let g2 = (bessel_j(0, m.f)).powi(2) + m.g_eff.powi(2);
            assert!((m.coupling.norm_sqr() - g2).abs() < 1e-12);
        }
    }
}

#[test]
fn characteristic_polynomial_of_compact_form() {
    for &flux in &[0.0, 0.4, PI / 2.0, 2.0, PI] {
        let m = compact_matrix(flux, 2.4);
        let herm = nalgebra::DMatrix::from_fn(3, 3, |r, c| m[(r, c)]);
        for e in herm.symmetric_eigenvalues().iter() {
            let p = e.powi(3) - 3.0 * e - 2.0 * flux.cos();
            assert!(p.abs() < 1e-10, "Φ={flux}: E={e}");
        }
    }
    let m = compact_matrix(PI, 2.4);
    let mut e: Vec<f64> = nalgebra::DMatrix::from_fn(3, 3, |r, c| m[(r, c)])
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    e.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert!((e[0] + 2.0).abs() < 1e-12 && (e[1] - 1.0).abs() < 1e-12 && (e[2] - 1.0).abs() < 1e-12);
}

#[test]
fn corrections_scale_with_frequency() {
    let small = correction_magnitudes(
        &DriveParams::chiral(20.0, Chirality::Clockwise).unwrap(),
        1.0,
    )
    .unwrap();
    assert!(small.third_order_bound / small.second_order <= 0.2);
    let big = correction_magnitudes(
        &DriveParams::chiral(40.0, Chirality::Clockwise).unwrap(),
        1.0,
    )
    .unwrap();
    assert!((small.second_order / big.second_order - 2.0).abs() < 1e-9);
    assert!((small.third_order_bound / big.third_order_bound - 4.0).abs() < 1e-9);
    let zero = correction_magnitudes(
        &DriveParams::chiral(20.0, Chirality::Clockwise).unwrap(),
        0.0,
    )
    .unwrap();
    assert_eq!(zero.second_order, 0.0);
    assert_eq!(zero.third_order_bound, 0.0);
}
