mod common;

use std::f64::consts::{PI, SQRT_2};

use common::{c, dist, expm};
use finitegap::sl2::{exp_tracefree, h3_coordinates, hermitian_projection};
use finitegap::{CPLine, Error, H3Point, Mat2, C64};
use proptest::prelude::*;

#[test]
fn exp_tracefree_examples() {
    assert_eq!(exp_tracefree(&Mat2::ZERO).unwrap(), Mat2::IDENTITY);
    let a = Mat2::diag(c(0.0, PI / 2.0), c(0.0, -PI / 2.0));
    assert!(dist(&exp_tracefree(&a).unwrap(), &Mat2::diag(c(0.0, 1.0), c(0.0, -1.0))) < 1e-15);
    let gen = Mat2::new(c(-1.0, 0.0), C64::from(SQRT_2), C64::from(-SQRT_2), c(1.0, 0.0)) * PI;
    assert!(dist(&exp_tracefree(&gen).unwrap(), &(-Mat2::IDENTITY)) < 1e-14);
}

#[test]
fn exp_tracefree_rejects_trace() {
    let a = Mat2::diag(c(1.0, 0.0), c(0.5, 0.0));
    assert!(matches!(exp_tracefree(&a), Err(Error::NotTracefree(_))));
}

#[test]
fn exp_tracefree_small_omega_matches_series() {
    let a = Mat2::new(c(1e-6, 2e-7), c(3e-6, 0.0), c(0.0, -1e-6), c(-1e-6, -2e-7));
    assert!(dist(&exp_tracefree(&a).unwrap(), &expm(&a)) < 4e-15);
    let nil = Mat2::new(C64::from(0.0), C64::from(4.0), C64::from(0.0), C64::from(0.0));
    assert!(dist(&exp_tracefree(&nil).unwrap(), &(Mat2::IDENTITY + nil)) < 1e-15);
}

#[test]
fn hermitian_projection_examples() {
    let p = hermitian_projection(&CPLine::real(1.0, 0.0).unwrap());
    assert!(dist(&p, &Mat2::real(1.0, 0.0, 0.0, 0.0)) < 1e-15);
    let p = hermitian_projection(&CPLine::real(1.0, 1.0).unwrap());
    assert!(dist(&p, &Mat2::real(0.5, 0.5, 0.5, 0.5)) < 1e-15);
    let p = hermitian_projection(&CPLine::real(SQRT_2, 1.0).unwrap());
    let want = Mat2::real(2.0, SQRT_2, SQRT_2, 1.0) * (1.0 / 3.0);
    assert!(dist(&p, &want) < 1e-15);
}

#[test]
fn zero_vector_is_not_a_line() {
    assert!(matches!(CPLine::real(0.0, 0.0), Err(Error::ZeroVector)));
}

#[test]
fn line_equality_ignores_phase_and_scale() {
    let l = CPLine::new(c(1.0, 2.0), c(-0.5, 0.25)).unwrap();
    let m = CPLine::new(c(1.0, 2.0) * C64::from_polar(3.0, 0.7), c(-0.5, 0.25) * C64::from_polar(3.0, 0.7)).unwrap();
    assert!(l.approx_eq(&m, 1e-12));
    assert!(!l.approx_eq(&l.perp(), 1e-6));
    assert!(l.perp().perp().approx_eq(&l, 1e-14));
}

#[test]
fn h3_coordinates_examples() {
    let (h, b) = h3_coordinates(&H3Point::origin());
    assert_eq!(h, [1.0, 0.0, 0.0, 0.0]);
    assert_eq!(b, [0.0, 0.0, 0.0]);
    let e = std::f64::consts::E;
    let p = H3Point::new(Mat2::real(e, 0.0, 0.0, 1.0 / e), 1e-12).unwrap();
    let (h, b) = h3_coordinates(&p);
    assert!((h[0] - 1f64.cosh()).abs() < 1e-15 && h[1].abs() < 1e-15 && h[2].abs() < 1e-15);
    assert!((h[3] - 1f64.sinh()).abs() < 1e-15);
    assert!(b[0].abs() < 1e-15 && b[1].abs() < 1e-15 && (b[2] - 0.5f64.tanh()).abs() < 1e-15);
    assert!((b[2] - 0.46212).abs() < 1e-5);
}

#[test]
fn h3_point_rejects_invalid_matrices() {
    assert!(H3Point::new(Mat2::real(1.0, 1.0, 0.0, 1.0), 1e-10).is_err());
    assert!(H3Point::new(Mat2::real(-1.0, 0.0, 0.0, -1.0), 1e-10).is_err());
    assert!(H3Point::new(Mat2::real(2.0, 0.0, 0.0, 2.0), 1e-10).is_err());
}

fn tracefree() -> impl Strategy<Value = Mat2> {
    (prop::array::uniform6(-2.9f64..2.9)).prop_map(|x| Mat2::new(c(x[0], x[1]), c(x[2], x[3]), c(x[4], x[5]), c(-x[0], -x[1])))
}

proptest! {
    #[test]
    fn exp_inverse_identity(a in tracefree()) {
        let e = exp_tracefree(&a).unwrap() * exp_tracefree(&(-a)).unwrap();
        prop_assert!(dist(&e, &Mat2::IDENTITY) < 1e-12 * (1.0 + exp_tracefree(&a).unwrap().norm_fro().powi(2)));
    }

    #[test]
    fn exp_matches_series_and_has_unit_det(a in tracefree()) {
        let e = exp_tracefree(&a).unwrap();
        let scale = 1.0 + e.norm_fro().powi(2);
        prop_assert!(dist(&e, &expm(&a)) < 1e-12 * scale);
        prop_assert!((e.det() - 1.0).norm() < 1e-12 * scale);
    }

    #[test]
    fn projection_is_rank_one_idempotent(re in prop::array::uniform4(-3.0f64..3.0)) {
        prop_assume!(re.iter().map(|x| x * x).sum::<f64>() > 1e-6);
        let p = hermitian_projection(&CPLine::new(c(re[0], re[1]), c(re[2], re[3])).unwrap());
        prop_assert!(dist(&(p * p), &p) < 1e-14);
        prop_assert!(p.is_hermitian(1e-15));
        prop_assert!(p.det().norm() < 1e-14);
        prop_assert!((p.trace() - 1.0).norm() < 1e-14);
    }

    #[test]
    fn hyperboloid_round_trip(x in prop::array::uniform3(-4.0f64..4.0)) {
        let x0 = (1.0 + x.iter().map(|v| v * v).sum::<f64>()).sqrt();
        let v = [x0, x[0], x[1], x[2]];
        let p = H3Point::from_hyperboloid(v, 1e-10).unwrap();
        let (h, b) = h3_coordinates(&p);
        for j in 0..4 {
            prop_assert!((h[j] - v[j]).abs() < 1e-12 * x0);
        }
        prop_assert!(b.iter().map(|v| v * v).sum::<f64>() < 1.0);
    }
}
