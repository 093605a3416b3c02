//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::{PI, SQRT_2};

use finitegap::{Mat2, Potential, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TWO_PI: f64 = 2.0 * PI;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn circle() -> Potential {
    Potential::constant(TWO_PI, C64::from(SQRT_2))
}

pub fn vacuum() -> Potential {
    Potential::zero(TWO_PI, 0.0, 0)
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn random_c64(rng: &mut ChaCha8Rng, radius: f64) -> C64 {
    C64::from_polar(radius * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..TWO_PI))
}

/// Random trigonometric polynomial on `[0, 2π)` with `‖q‖∞ ≤ sup`.
pub fn random_potential(rng: &mut ChaCha8Rng, kmax: usize, sup: f64) -> Potential {
    let modes: Vec<(i64, C64)> = (-(kmax as i64)..=kmax as i64).map(|k| (k, random_c64(rng, 1.0))).collect();
    let q = Potential::new(TWO_PI, 0.0, modes).unwrap();
    let bound: f64 = q.modes().map(|(_, v)| v.norm()).sum();
    q.scaled(sup * rng.gen_range(0.2..1.0) / bound)
}

/// Random real potential (`q̂₋ₖ = conj q̂ₖ`) with `‖q‖∞ ≤ sup`.
pub fn random_real_potential(rng: &mut ChaCha8Rng, kmax: usize, sup: f64) -> Potential {
    let q = random_potential(rng, kmax, sup);
    q.real_part()
}

pub fn dist(a: &Mat2, b: &Mat2) -> f64 {
    (*a - *b).max_abs()
}

/// `dF/dt = F α(t)` by classical RK4 with `n` steps, sampling `q` by direct evaluation.
pub fn rk4_monodromy(q: &Potential, lambda: C64, n: usize) -> Mat2 {
    let h = q.period() / n as f64;
    let alpha = |t: f64| {
        let v = q.evaluate(t);
        Mat2::new(C64::i() * lambda * 0.5, v * 0.5, -v.conj() * 0.5, -C64::i() * lambda * 0.5)
    };
    let mut f = Mat2::IDENTITY;
    for j in 0..n {
        let t = j as f64 * h;
        let k1 = f * alpha(t);
        let k2 = (f + k1 * (0.5 * h)) * alpha(t + 0.5 * h);
        let k3 = (f + k2 * (0.5 * h)) * alpha(t + 0.5 * h);
        let k4 = (f + k3 * h) * alpha(t + h);
        f += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    f
}

/// Matrix exponential by scaling and squaring of the Taylor series.
pub fn expm(a: &Mat2) -> Mat2 {
    let s = (a.max_abs().max(1.0).log2().ceil() as i32 + 4).max(0);
    let b = *a * 0.5f64.powi(s);
    let mut term = Mat2::IDENTITY;
    let mut sum = Mat2::IDENTITY;
    for j in 1..30 {
        term = term * b * (1.0 / j as f64);
        sum += term;
    }
    for _ in 0..s {
        sum = sum * sum;
    }
    sum
}

/// Monodromy of a constant potential, `exp(T α)`.
pub fn constant_monodromy(value: C64, period: f64, lambda: C64) -> Mat2 {
    let a = Mat2::new(C64::i() * lambda * 0.5, value * 0.5, -value.conj() * 0.5, -C64::i() * lambda * 0.5);
    expm(&(a * period))
}

/// `Δ(λ) = 2cos(π√(λ²+2))` for the circle potential on `[0, 2π]`.
pub fn circle_delta(lambda: C64) -> C64 {
    (lambda * lambda + 2.0).sqrt().scale(PI).cos() * 2.0
}

/// Quadrature of `∫₀ᵀ |q₁ − q₂|²` by the trapezoid rule on `n` points.
pub fn l2_quadrature(q1: &Potential, q2: &Potential, n: usize) -> f64 {
    let h = q1.period() / n as f64;
    let s: f64 = (0..n).map(|j| (q1.evaluate(j as f64 * h) - q2.evaluate(j as f64 * h)).norm_sqr()).sum();
    (s * h).sqrt()
}

/// `√2 + 0.05 cos 2t + 0.02 i sin 3t`, closed at `λ* = i` by correcting modes `0, ±1`.
pub fn perturbed_circle(cfg: &finitegap::Config) -> Potential {
    let dq = Potential::new(TWO_PI, 0.0, [(-3, c(-0.01, 0.0)), (-2, c(0.025, 0.0)), (2, c(0.025, 0.0)), (3, c(0.01, 0.0))]).unwrap();
    finitegap::closing::close_perturbation(&circle(), 0.0, &dq, &[0, -1, 1], cfg).unwrap()
}

/// Real `√2 + 0.05 cos 2t + 0.02 sin 3t`, closed at `λ* = i` by correcting modes `0, ±1`.
pub fn real_perturbed_circle(cfg: &finitegap::Config) -> Potential {
    let dq = Potential::new(TWO_PI, 0.0, [(-3, c(0.0, 0.01)), (-2, c(0.025, 0.0)), (2, c(0.025, 0.0)), (3, c(0.0, -0.01))]).unwrap();
    finitegap::closing::close_perturbation(&circle(), 0.0, &dq, &[0, -1, 1], cfg).unwrap()
}
