//! Extended frames `F' = F α(q, λ)`, monodromy and discriminant.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::sl2::{exp_tf, Mat2, C64, I};

const SQRT3: f64 = 1.732_050_807_568_877_2;
pub(crate) const NODE1: f64 = 0.5 - SQRT3 / 6.0;
pub(crate) const NODE2: f64 = 0.5 + SQRT3 / 6.0;
const W_MAJOR: f64 = 0.25 + SQRT3 / 6.0;
const W_MINOR: f64 = 0.25 - SQRT3 / 6.0;

/// `α = ½[[iλ, q], [−q̄, −iλ]]`.
#[inline]
pub fn alpha(q: C64, lambda: C64) -> Mat2 {
    let d = I * lambda * 0.5;
    Mat2::new(d, q * 0.5, -q.conj() * 0.5, -d)
}

pub fn alpha_at(q: &Potential, t: f64, lambda: C64) -> Mat2 {
    alpha(q.evaluate(t), lambda)
}

/// Sheet of the spectral curve; `Plus` carries `|μ| ≥ 1` at the reference point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sheet {
    Plus,
    Minus,
}

impl Sheet {
    pub fn sign(self) -> f64 {
        match self {
            Sheet::Plus => 1.0,
            Sheet::Minus => -1.0,
        }
    }

    pub fn other(self) -> Sheet {
        match self {
            Sheet::Plus => Sheet::Minus,
            Sheet::Minus => Sheet::Plus,
        }
    }
}

/// Frame samples along one period for a single spectral value.
#[derive(Clone, Debug)]
pub struct FrameResult {
    pub lambda: C64,
    pub times: Vec<f64>,
    pub frames: Vec<Mat2>,
    pub monodromy: Mat2,
}

impl FrameResult {
    pub fn max_det_drift(&self) -> f64 {
        self.frames.iter().map(|f| (f.det() - 1.0).norm()).fold(0.0, f64::max)
    }

    /// `max_j ‖conj(F(t_j, λ̄))ᵗ F(t_j, λ) − 𝟙‖` against a frame computed at `λ̄`.
    pub fn reality_defect(&self, conjugate: &FrameResult) -> f64 {
        self.frames
            .iter()
            .zip(&conjugate.frames)
            .map(|(f, g)| (g.adjoint() * *f - Mat2::IDENTITY).norm())
            .fold(0.0, f64::max)
    }
}

/// `Δ(λ)` with its first two λ-derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Discriminant {
    pub delta: C64,
    pub delta1: C64,
    pub delta2: C64,
}

/// A potential sampled at the two Gauss nodes of every step.
#[derive(Clone, Debug)]
pub struct Integrator {
    period: f64,
    n_steps: usize,
    q1: Vec<C64>,
    q2: Vec<C64>,
}

impl Integrator {
    pub fn new(q: &Potential, n_steps: usize) -> Result<Self> {
        if n_steps < 8 {
            return Err(Error::TooFewSteps(n_steps));
        }
        Ok(Integrator {
            period: q.period(),
            n_steps,
            q1: q.sample_shifted(n_steps, NODE1),
            q2: q.sample_shifted(n_steps, NODE2),
        })
    }

    /// Integrator for an explicitly sampled potential; `q1`, `q2` hold the node values.
    pub fn from_node_values(period: f64, q1: Vec<C64>, q2: Vec<C64>) -> Result<Self> {
        if q1.len() != q2.len() {
            return Err(Error::InvalidInput("node sample lengths differ".into()));
        }
        if q1.len() < 8 {
            return Err(Error::TooFewSteps(q1.len()));
        }
        Ok(Integrator { period, n_steps: q1.len(), q1, q2 })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn step_size(&self) -> f64 {
        self.period / self.n_steps as f64
    }

    #[inline]
    fn step(&self, j: usize, lambda: C64) -> Mat2 {
        cf4_step(self.q1[j], self.q2[j], lambda, self.step_size())
    }

    pub fn monodromy(&self, lambda: C64) -> Result<Mat2> {
        let mut f = Mat2::IDENTITY;
        for j in 0..self.n_steps {
            f = f * self.step(j, lambda);
            if j % 256 == 255 && !f.is_finite() {
                return Err(Error::IntegrationOverflow(lambda));
            }
        }
        if !f.is_finite() {
            return Err(Error::IntegrationOverflow(lambda));
        }
        Ok(f)
    }

    pub fn frames(&self, lambda: C64) -> Result<FrameResult> {
        let h = self.step_size();
        let mut f = Mat2::IDENTITY;
        let mut frames = Vec::with_capacity(self.n_steps + 1);
        frames.push(f);
        for j in 0..self.n_steps {
            f = f * self.step(j, lambda);
            frames.push(f);
        }
        if !f.is_finite() {
            return Err(Error::IntegrationOverflow(lambda));
        }
        let times = (0..=self.n_steps).map(|j| j as f64 * h).collect();
        Ok(FrameResult { lambda, times, frames, monodromy: f })
    }

    /// Monodromies on a λ-grid, evaluated in parallel; order matches the input.
    pub fn monodromies(&self, lambdas: &[C64]) -> Result<Vec<Mat2>> {
        lambdas.par_iter().map(|&l| self.monodromy(l)).collect()
    }

    pub fn delta(&self, lambda: C64) -> Result<C64> {
        Ok(self.monodromy(lambda)?.trace())
    }

    /// `(Δ, Δ′, M)` in one pass, with `Δ′ = (i/2) tr(M ∫ F σ₃ F⁻¹ dt)` by the periodic trapezoid rule.
    pub fn delta_variational(&self, lambda: C64) -> Result<(C64, C64, Mat2)> {
        let mut f = Mat2::IDENTITY;
        let mut acc = Mat2::ZERO;
        let sigma3 = Mat2::real(1.0, 0.0, 0.0, -1.0);
        for j in 0..self.n_steps {
            acc += f * sigma3 * f.adjugate();
            f = f * self.step(j, lambda);
        }
        if !f.is_finite() || !acc.is_finite() {
            return Err(Error::IntegrationOverflow(lambda));
        }
        let delta1 = (f * acc).trace() * C64::new(0.0, 0.5 * self.step_size());
        Ok((f.trace(), delta1, f))
    }

    /// Five-point central stencil with step `h_rel·(1 + |λ|)`.
    pub fn discriminant(&self, lambda: C64, h_rel: f64) -> Result<Discriminant> {
        let (d, _) = self.discriminant_with_monodromy(lambda, h_rel)?;
        Ok(d)
    }

    pub fn discriminant_with_monodromy(&self, lambda: C64, h_rel: f64) -> Result<(Discriminant, Mat2)> {
        let h = h_rel * (1.0 + lambda.norm());
        let pts = [lambda, lambda + h, lambda - h, lambda + 2.0 * h, lambda - 2.0 * h];
        let m = self.monodromies(&pts)?;
        let t: Vec<C64> = m.iter().map(Mat2::trace).collect();
        let delta1 = (8.0 * (t[1] - t[2]) - (t[3] - t[4])) / (12.0 * h);
        let delta2 = (16.0 * (t[1] + t[2]) - (t[3] + t[4]) - 30.0 * t[0]) / (12.0 * h * h);
        Ok((Discriminant { delta: t[0], delta1, delta2 }, m[0]))
    }
}

/// One step `exp(h(w₊A₁ + w₋A₂)) exp(h(w₋A₁ + w₊A₂))` of the fourth-order commutator-free Magnus scheme.
#[inline]
pub(crate) fn cf4_step(q1: C64, q2: C64, lambda: C64, h: f64) -> Mat2 {
    let a1 = alpha(q1, lambda);
    let a2 = alpha(q2, lambda);
    let first = (a1 * W_MAJOR + a2 * W_MINOR) * h;
    let second = (a1 * W_MINOR + a2 * W_MAJOR) * h;
    exp_tf(&first) * exp_tf(&second)
}

/// Frame along `[0, T]` with `n_steps` steps.
pub fn integrate_frame(q: &Potential, lambda: C64, n_steps: usize) -> Result<FrameResult> {
    Integrator::new(q, n_steps)?.frames(lambda)
}

pub fn discriminant(q: &Potential, lambda: C64, n_steps: usize, h_rel: f64) -> Result<Discriminant> {
    Integrator::new(q, n_steps)?.discriminant(lambda, h_rel)
}

/// Both Floquet multipliers `½(Δ ± √(Δ²−4))`, the first of modulus ≥ 1.
fn mu_pair(delta: C64) -> (C64, C64) {
    let root = (delta * delta - 4.0).sqrt();
    let a = (delta + root) * 0.5;
    let b = (delta - root) * 0.5;
    if b.norm() > a.norm() {
        (b, a)
    } else {
        (a, b)
    }
}

/// Floquet multiplier on the requested sheet.
pub fn floquet_mu(delta: C64, sheet: Sheet) -> C64 {
    let (big, small) = mu_pair(delta);
    match sheet {
        Sheet::Plus => big,
        Sheet::Minus => small,
    }
}

/// Multipliers along a λ-path, continued from `sheet` at the first point by nearest-root tracking.
pub fn floquet_mu_path(deltas: &[C64], sheet: Sheet) -> Vec<C64> {
    let mut out: Vec<C64> = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let mu = match out.last() {
            None => floquet_mu(d, sheet),
            Some(prev) => {
                let (a, b) = mu_pair(d);
                if (a - prev).norm() <= (b - prev).norm() {
                    a
                } else {
                    b
                }
            }
        };
        out.push(mu);
    }
    out
}
