mod common;

use std::f64::consts::{PI, SQRT_2};

use common::{c, circle, circle_delta, constant_monodromy, dist, random_c64, random_potential, rk4_monodromy, rng, vacuum, TWO_PI};
use finitegap::frame::{alpha, alpha_at, discriminant, floquet_mu, floquet_mu_path, integrate_frame};
use finitegap::{Error, Integrator, Mat2, Potential, Sheet, C64};
use proptest::prelude::*;

#[test]
fn alpha_examples() {
    assert_eq!(alpha(C64::from(0.0), C64::from(2.0)), Mat2::diag(c(0.0, 1.0), c(0.0, -1.0)));
    let a = alpha_at(&circle(), 0.77, c(0.0, 1.0));
    let want = Mat2::new(C64::from(-0.5), C64::from(SQRT_2 / 2.0), C64::from(-SQRT_2 / 2.0), C64::from(0.5));
    assert!(dist(&a, &want) < 1e-15);
    let mut r = rng(3);
    for _ in 0..10 {
        assert!(alpha(random_c64(&mut r, 3.0), random_c64(&mut r, 5.0)).trace().norm() < 1e-15);
    }
}

#[test]
fn vacuum_monodromy_closed_form() {
    let m = integrate_frame(&vacuum(), C64::from(1.0), 64).unwrap().monodromy;
    assert!(dist(&m, &(-Mat2::IDENTITY)) < 1e-14);
    for lam in [c(0.3, 0.0), c(-1.7, 0.4), c(0.0, 2.0)] {
        let m = Integrator::new(&vacuum(), 256).unwrap().monodromy(lam).unwrap();
        let e = (C64::i() * lam * PI).exp();
        assert!(dist(&m, &Mat2::diag(e, e.inv())) < 1e-12 * e.norm().max(e.inv().norm()));
    }
}

#[test]
fn frame_starts_at_identity_and_matches_grid() {
    let fr = integrate_frame(&circle(), c(0.2, 0.5), 128).unwrap();
    assert_eq!(fr.frames[0], Mat2::IDENTITY);
    assert_eq!(fr.frames.len(), 129);
    assert_eq!(fr.times.len(), 129);
    assert!((fr.times[128] - TWO_PI).abs() < 1e-13);
    assert_eq!(fr.frames[128], fr.monodromy);
}

#[test]
fn circle_monodromy_at_sym_point() {
    let m = Integrator::new(&circle(), 2048).unwrap().monodromy(c(0.0, 1.0)).unwrap();
    assert!(dist(&m, &(-Mat2::IDENTITY)) < 1e-10);
    assert!(dist(&constant_monodromy(C64::from(SQRT_2), TWO_PI, c(0.0, 1.0)), &(-Mat2::IDENTITY)) < 1e-12);
}

#[test]
fn constant_potentials_match_matrix_exponential() {
    let mut r = rng(4);
    for _ in 0..6 {
        let v = random_c64(&mut r, 2.0);
        let lam = random_c64(&mut r, 3.0);
        let q = Potential::constant(TWO_PI, v);
        let m = Integrator::new(&q, 1024).unwrap().monodromy(lam).unwrap();
        let want = constant_monodromy(v, TWO_PI, lam);
        assert!(dist(&m, &want) < 1e-10 * (1.0 + want.max_abs()));
    }
}

#[test]
fn agrees_with_rk4_on_random_potentials() {
    let mut r = rng(5);
    for _ in 0..4 {
        let q = random_potential(&mut r, 4, 2.0);
        let lam = random_c64(&mut r, 2.0);
        let m = Integrator::new(&q, 1024).unwrap().monodromy(lam).unwrap();
        let oracle = rk4_monodromy(&q, lam, 8192);
        assert!(dist(&m, &oracle) < 1e-9 * (1.0 + m.max_abs()), "{}", dist(&m, &oracle));
    }
}

#[test]
fn fourth_order_richardson_ratio() {
    let mut r = rng(6);
    let q = random_potential(&mut r, 3, 1.5);
    let lam = c(0.7, 0.3);
    let reference = Integrator::new(&q, 4096).unwrap().monodromy(lam).unwrap();
    let err = |n| dist(&Integrator::new(&q, n).unwrap().monodromy(lam).unwrap(), &reference);
    let (e1, e2) = (err(32), err(64));
    let ratio = e1 / e2;
    assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn rejects_too_few_steps() {
    assert!(matches!(integrate_frame(&circle(), C64::from(1.0), 4), Err(Error::TooFewSteps(4))));
}

#[test]
fn overflow_is_reported() {
    assert!(matches!(
        Integrator::new(&circle(), 64).unwrap().monodromy(c(0.0, 1e3)),
        Err(Error::IntegrationOverflow(_))
    ));
}

#[test]
fn discriminant_examples() {
    let d = discriminant(&vacuum(), C64::from(0.0), 2048, 1e-4).unwrap();
    assert!((d.delta - 2.0).norm() < 1e-12);
    assert!(d.delta1.norm() < 1e-8);
    assert!((d.delta2 + 2.0 * PI * PI).norm() < 1e-3);
    let d = discriminant(&vacuum(), c(0.0, 1.0), 2048, 1e-4).unwrap();
    assert!((d.delta - 2.0 * PI.cosh()).norm() < 1e-10);
    assert!((d.delta.re - 23.18391).abs() < 1e-5);

    let d = discriminant(&circle(), c(0.0, 1.0), 2048, 1e-4).unwrap();
    assert!((d.delta + 2.0).norm() < 1e-10);
    assert!(d.delta1.norm() < 1e-7);
    let (delta, delta1, _) = Integrator::new(&circle(), 2048).unwrap().delta_variational(c(0.0, 1.0)).unwrap();
    assert!((delta + 2.0).norm() < 1e-10 && delta1.norm() < 1e-10);
}

#[test]
fn circle_discriminant_closed_form() {
    let integ = Integrator::new(&circle(), 2048).unwrap();
    for lam in [c(0.3, 0.0), c(1.2, 0.4), c(-0.5, 1.5), c(2.5, -0.2)] {
        let d = integ.discriminant(lam, 1e-4).unwrap();
        assert!((d.delta - circle_delta(lam)).norm() < 1e-10 * (1.0 + d.delta.norm()));
        let h = 1e-6;
        let fd = (circle_delta(lam + h) - circle_delta(lam - h)) / (2.0 * h);
        assert!((d.delta1 - fd).norm() < 1e-6 * (1.0 + fd.norm()));
        let (_, var, _) = integ.delta_variational(lam).unwrap();
        assert!((var - fd).norm() < 1e-6 * (1.0 + fd.norm()));
    }
}

#[test]
fn floquet_examples() {
    assert!((floquet_mu(C64::from(2.0), Sheet::Plus) - 1.0).norm() < 1e-15);
    assert!((floquet_mu(C64::from(2.0), Sheet::Minus) - 1.0).norm() < 1e-15);
    let mu = floquet_mu(C64::from(0.0), Sheet::Plus);
    assert!((mu.norm() - 1.0).abs() < 1e-15 && mu.re.abs() < 1e-15);
    assert!((floquet_mu(C64::from(0.0), Sheet::Minus) - mu.conj()).norm() < 1e-15);
    for lam in [0.1, 0.9, 1.7, -2.3] {
        let d = Integrator::new(&vacuum(), 256).unwrap().delta(C64::from(lam)).unwrap();
        assert!((floquet_mu(d, Sheet::Plus).norm() - 1.0).abs() < 1e-10);
    }
    let path: Vec<C64> = (0..50).map(|j| circle_delta(c(0.1 * j as f64, 0.05))).collect();
    let mus = floquet_mu_path(&path, Sheet::Plus);
    for w in mus.windows(2) {
        assert!((w[1] - w[0]).norm() < 1.0);
    }
}

fn potential_strategy() -> impl Strategy<Value = Potential> {
    (any::<u64>(), 0usize..5, 0.1f64..3.0).prop_map(|(s, k, sup)| random_potential(&mut rng(s), k, sup))
}

fn lambda_strategy(radius: f64) -> impl Strategy<Value = C64> {
    (-radius..radius, -radius..radius).prop_map(|(a, b)| c(a, b)).prop_filter("disc", move |l| l.norm() <= radius)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn monodromy_has_unit_determinant(q in potential_strategy(), lam in lambda_strategy(10.0)) {
        let m = Integrator::new(&q, 2048).unwrap().monodromy(lam).unwrap();
        prop_assert!((m.det() - 1.0).norm() <= 1e-10 * (1.0 + m.norm_fro().powi(2)));
    }

    #[test]
    fn reality_symmetry(q in potential_strategy(), lam in lambda_strategy(3.0)) {
        let integ = Integrator::new(&q, 2048).unwrap();
        let m = integ.monodromy(lam).unwrap();
        let mb = integ.monodromy(lam.conj()).unwrap();
        let scale = 1.0 + m.norm_fro().powi(2);
        prop_assert!(dist(&(mb.adjoint() * m), &Mat2::IDENTITY) <= 1e-9 * scale);
        let d = integ.delta(lam).unwrap();
        let db = integ.delta(lam.conj()).unwrap();
        prop_assert!((db.conj() - d).norm() <= 1e-9 * (1.0 + d.norm()));
        let fr = integ.frames(lam).unwrap();
        prop_assert!(fr.max_det_drift() <= 1e-10 * scale);
        prop_assert!(fr.reality_defect(&integ.frames(lam.conj()).unwrap()) <= 1e-9 * scale);
    }

    #[test]
    fn translation_covariance(q in potential_strategy(), lam in lambda_strategy(2.0), j in 1usize..256) {
        let integ = Integrator::new(&q, 256).unwrap();
        let fr = integ.frames(lam).unwrap();
        let x = fr.times[j];
        let w = q.omega();
        let shifted = Potential::new(q.period(), 0.0, q.modes().map(|(k, v)| (k, v * C64::from_polar(1.0, k as f64 * w * x)))).unwrap();
        let ms = Integrator::new(&shifted, 2048).unwrap().monodromy(lam).unwrap();
        let fx = integrate_frame(&q, lam, 2048).unwrap().frames[j * 8];
        let want = fx.inverse().unwrap() * integrate_frame(&q, lam, 2048).unwrap().monodromy * fx;
        prop_assert!(dist(&ms, &want) <= 1e-9 * (1.0 + want.norm_fro().powi(2)));
    }
}
