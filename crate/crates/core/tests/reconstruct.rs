mod common;

use std::f64::consts::{PI, SQRT_2};

use common::{c, circle, perturbed_circle, random_c64, random_potential, random_real_potential, real_perturbed_circle, rng, vacuum, TWO_PI};
use finitegap::potential::{hasimoto_curvature, l2_distance};
use finitegap::reconstruct::{curve_closure_gap, frenet_data, initial_velocity, sym_reconstruct, sym_reconstruct_from};
use finitegap::{Config, Error, Mat2, Potential, C64};

#[test]
fn curve_starts_at_origin_with_unit_velocity() {
    let curve = sym_reconstruct(&circle(), 0.0, 65, 512).unwrap();
    assert_eq!(curve.points()[0].matrix(), Mat2::IDENTITY);
    assert_eq!(curve.len(), 65);
    assert!((curve.times()[64] - TWO_PI).abs() < 1e-13);
    let v0 = curve.velocities().unwrap()[0];
    assert!((v0 - initial_velocity()).max_abs() < 1e-15);
    assert!((-v0.det().re - 1.0).abs() < 1e-15);
}

#[test]
fn circle_curve_is_closed_with_constant_curvature() {
    let curve = sym_reconstruct(&circle(), 0.0, 1025, 2048).unwrap();
    assert!(curve.endpoint_gap() <= 1e-7);
    assert!(curve_closure_gap(&circle(), 0.0, 2048).unwrap() <= 1e-8);
    let (kappa, tau) = frenet_data(&curve).unwrap();
    for (k, t) in kappa.iter().zip(&tau) {
        assert!((k - SQRT_2).abs() <= 1e-5, "kappa {k}");
        assert!(t.abs() <= 1e-5, "tau {t}");
    }
}

#[test]
fn vacuum_traces_a_geodesic() {
    let curve = sym_reconstruct(&vacuum(), 0.0, 129, 256).unwrap();
    assert!((curve.endpoint_gap() - TWO_PI).abs() < 1e-9);
    assert!((curve_closure_gap(&vacuum(), 0.0, 256).unwrap() - (PI.exp() - 1.0)).abs() < 1e-8);
    assert!(matches!(frenet_data(&curve), Err(Error::DegenerateCurve(_))));
}

#[test]
fn real_potentials_give_planar_curves() {
    let mut r = rng(40);
    for _ in 0..3 {
        let q = random_real_potential(&mut r, 3, 1.5);
        let curve = sym_reconstruct(&q, 0.0, 257, 1024).unwrap();
        for p in curve.points() {
            assert!(p.ball()[1].abs() <= 1e-7);
        }
    }
}

#[test]
fn helix_has_constant_torsion() {
    let q = Potential::constant(TWO_PI, C64::from(SQRT_2)).with_theta(0.3);
    let curve = sym_reconstruct(&q, 0.3, 1025, 2048).unwrap();
    let (kappa, tau) = frenet_data(&curve).unwrap();
    for (k, t) in kappa.iter().zip(&tau) {
        assert!((k - SQRT_2).abs() <= 1e-4, "kappa {k}");
        assert!((t - 0.3).abs() <= 1e-4, "tau {t}");
    }
}

#[test]
fn curves_have_unit_speed() {
    let mut r = rng(41);
    for _ in 0..3 {
        let q = random_potential(&mut r, 4, 2.0);
        let curve = sym_reconstruct(&q, 0.0, 2049, 4096).unwrap();
        assert!(curve.velocity_defect().unwrap() <= 1e-6);
        assert!(curve.speed_defect() <= 1e-5, "{}", curve.speed_defect());
    }
}

#[test]
fn initial_frame_acts_by_isometry() {
    let mut r = rng(42);
    let q = random_potential(&mut r, 3, 1.0);
    let (a, b, cc) = (random_c64(&mut r, 1.0) + 1.0, random_c64(&mut r, 1.0), random_c64(&mut r, 1.0));
    let g = Mat2::new(a, b, cc, (C64::from(1.0) + b * cc) / a);
    let base = sym_reconstruct(&q, 0.0, 65, 512).unwrap();
    let moved = sym_reconstruct_from(&q, 0.0, 65, 512, g).unwrap();
    for (p, m) in base.points().iter().zip(moved.points()) {
        let want = g * p.matrix() * g.adjoint();
        assert!((m.matrix() - want).max_abs() <= 1e-10 * (1.0 + want.max_abs()));
    }
    for w in base.points().windows(2).zip(moved.points().windows(2)) {
        assert!((w.0[0].distance(&w.0[1]) - w.1[0].distance(&w.1[1])).abs() <= 1e-8);
    }
}

#[test]
fn hasimoto_inverts_reconstruction_on_closed_curves() {
    let cfg = Config::default();
    for q in [perturbed_circle(&cfg), real_perturbed_circle(&cfg)] {
        let curve = sym_reconstruct(&q, 0.0, 1025, 2048).unwrap();
        assert!(curve.endpoint_gap() <= 1e-7);
        let back = hasimoto_curvature(&curve, 8).unwrap();
        assert!(back.theta().abs() < 1e-6);
        assert!(l2_distance(&back, &q).unwrap() <= 1e-4, "{}", l2_distance(&back, &q).unwrap());
        if q.imag_defect() == 0.0 {
            assert!(back.is_real(1e-6));
        }
    }
}

#[test]
fn endpoint_gap_tracks_monodromy_gap() {
    let cfg = Config::default();
    let closed = perturbed_circle(&cfg);
    let open = closed.add(&Potential::constant(TWO_PI, c(0.05, 0.0)), 1.0).unwrap();
    for q in [closed, open] {
        let gap = curve_closure_gap(&q, 0.0, 2048).unwrap();
        let d = sym_reconstruct(&q, 0.0, 129, 2048).unwrap().endpoint_gap();
        assert!(d <= 4.0 * gap + 1e-9, "d {d} gap {gap}");
        assert!((d <= 1e-7) == (gap <= 1e-7));
    }
}

#[test]
fn rejects_too_few_samples() {
    assert!(matches!(sym_reconstruct(&circle(), 0.0, 7, 512), Err(Error::InvalidInput(_))));
    assert!(matches!(sym_reconstruct(&circle(), 0.0, 64, 4), Err(Error::TooFewSteps(4))));
}
