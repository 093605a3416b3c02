//! Periodic complex curvature potentials as trigonometric polynomials.

use std::f64::consts::PI;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reconstruct::{frenet_data, CurveSamples};
use crate::sl2::{C64, I};

/// `q(t) = Σ_{|k|≤K} q̂(k) e^{2πikt/T}`, together with the torsion rate θ of the ungauged curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    period: f64,
    theta: f64,
    kmax: usize,
    modes: Vec<C64>,
}

impl Potential {
    pub fn new<I2>(period: f64, theta: f64, modes: I2) -> Result<Self>
    where
        I2: IntoIterator<Item = (i64, C64)>,
    {
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::InvalidInput(format!("period must be positive, got {period}")));
        }
        if !theta.is_finite() {
            return Err(Error::InvalidInput("theta must be finite".into()));
        }
        let pairs: Vec<(i64, C64)> = modes.into_iter().collect();
        let kmax = pairs.iter().map(|(k, _)| k.unsigned_abs() as usize).max().unwrap_or(0);
        let mut p = Potential::zero(period, theta, kmax);
        for (k, c) in pairs {
            if !c.is_finite() {
                return Err(Error::InvalidInput(format!("mode {k} is not finite")));
            }
            p.modes[(k + kmax as i64) as usize] += c;
        }
        Ok(p)
    }

    pub fn zero(period: f64, theta: f64, kmax: usize) -> Self {
        Potential { period, theta, kmax, modes: vec![C64::default(); 2 * kmax + 1] }
    }

    pub fn constant(period: f64, value: C64) -> Self {
        Potential { period, theta: 0.0, kmax: 0, modes: vec![value] }
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn kmax(&self) -> usize {
        self.kmax
    }

    /// Base frequency 2π/T.
    pub fn omega(&self) -> f64 {
        2.0 * PI / self.period
    }

    pub fn mode(&self, k: i64) -> C64 {
        if k.unsigned_abs() as usize > self.kmax {
            C64::default()
        } else {
            self.modes[(k + self.kmax as i64) as usize]
        }
    }

    pub fn set_mode(&mut self, k: i64, value: C64) {
        let need = k.unsigned_abs() as usize;
        if need > self.kmax {
            *self = self.resized(need);
        }
        let idx = (k + self.kmax as i64) as usize;
        self.modes[idx] = value;
    }

    /// `(k, q̂(k))` for all stored modes, ascending in k.
    pub fn modes(&self) -> impl Iterator<Item = (i64, C64)> + '_ {
        let km = self.kmax as i64;
        self.modes.iter().enumerate().map(move |(i, c)| (i as i64 - km, *c))
    }

    /// Same potential stored with mode bound `kmax` (dropping or zero-padding).
    pub fn resized(&self, kmax: usize) -> Self {
        let mut p = Potential::zero(self.period, self.theta, kmax);
        for (k, c) in self.modes() {
            if k.unsigned_abs() as usize <= kmax {
                p.modes[(k + kmax as i64) as usize] = c;
            }
        }
        p
    }

    /// Drops trailing modes whose magnitude is at most `tol`.
    pub fn trimmed(&self, tol: f64) -> Self {
        let mut k = self.kmax;
        while k > 0 && self.mode(k as i64).norm() <= tol && self.mode(-(k as i64)).norm() <= tol {
            k -= 1;
        }
        self.resized(k)
    }

    pub fn evaluate(&self, t: f64) -> C64 {
        let w = self.omega() * t;
        let step = C64::from_polar(1.0, w);
        let km = self.kmax as i64;
        let mut e = C64::from_polar(1.0, -w * km as f64);
        let mut acc = C64::default();
        for (i, c) in self.modes.iter().enumerate() {
            if i % 64 == 0 {
                e = C64::from_polar(1.0, w * (i as i64 - km) as f64);
            }
            acc += c * e;
            e *= step;
        }
        acc
    }

    /// Values on the grid `t_j = (j + shift) T/n`, `j < n`, exactly (modes folded mod n).
    pub fn sample_shifted(&self, n: usize, shift: f64) -> Vec<C64> {
        let mut bins = vec![C64::default(); n];
        for (k, c) in self.modes() {
            if c == C64::default() {
                continue;
            }
            let phase = C64::from_polar(1.0, 2.0 * PI * k as f64 * shift / n as f64);
            bins[k.rem_euclid(n as i64) as usize] += c * phase;
        }
        let mut planner = FftPlanner::new();
        planner.plan_fft_inverse(n).process(&mut bins);
        bins
    }

    pub fn sample(&self, n: usize) -> Vec<C64> {
        self.sample_shifted(n, 0.0)
    }

    /// Projects `n` uniform samples on `[0, T)` onto modes `|k| ≤ kmax` (requires `2·kmax < n`).
    pub fn from_samples(samples: &[C64], period: f64, theta: f64, kmax: usize) -> Result<Self> {
        let n = samples.len();
        if n == 0 || 2 * kmax >= n {
            return Err(Error::InvalidInput(format!(
                "{n} samples cannot resolve {kmax} modes"
            )));
        }
        let mut buf = samples.to_vec();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let scale = 1.0 / n as f64;
        let mut p = Potential::zero(period, theta, kmax);
        for k in -(kmax as i64)..=kmax as i64 {
            p.modes[(k + kmax as i64) as usize] = buf[k.rem_euclid(n as i64) as usize] * scale;
        }
        Ok(p)
    }

    /// `max_t |Im q(t)|` measured through the mode symmetry `q̂(−k) = conj q̂(k)`.
    pub fn imag_defect(&self) -> f64 {
        (0..=self.kmax as i64)
            .map(|k| (self.mode(-k) - self.mode(k).conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.imag_defect() <= tol
    }

    /// The potential `conj q(t)`.
    pub fn conj(&self) -> Self {
        let mut p = Potential::zero(self.period, -self.theta, self.kmax);
        for (k, c) in self.modes() {
            p.modes[(-k + self.kmax as i64) as usize] = c.conj();
        }
        p
    }

    /// Real part `(q + q̄)/2`, keeping θ.
    pub fn real_part(&self) -> Self {
        let mut p = self.clone();
        for k in -(self.kmax as i64)..=self.kmax as i64 {
            let v = (self.mode(k) + self.mode(-k).conj()) * 0.5;
            p.modes[(k + self.kmax as i64) as usize] = v;
        }
        p
    }

    pub fn add(&self, other: &Potential, scale: f64) -> Result<Self> {
        check_periods(self, other)?;
        let kmax = self.kmax.max(other.kmax);
        let mut p = self.resized(kmax);
        for (k, c) in other.modes() {
            p.modes[(k + kmax as i64) as usize] += c * scale;
        }
        Ok(p)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut p = self.clone();
        p.modes.iter_mut().for_each(|c| *c *= s);
        p
    }

    /// `(Σ|q̂(k)|² T)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.modes.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.period).sqrt()
    }

    pub fn sup_bound(&self) -> f64 {
        self.modes.iter().map(|c| c.norm()).sum()
    }
}

fn check_periods(a: &Potential, b: &Potential) -> Result<()> {
    if (a.period - b.period).abs() > 1e-12 * a.period.max(b.period) {
        return Err(Error::PeriodMismatch(a.period, b.period));
    }
    Ok(())
}

/// L² distance between two potentials of equal period, by Parseval.
pub fn l2_distance(q1: &Potential, q2: &Potential) -> Result<f64> {
    check_periods(q1, q2)?;
    let kmax = q1.kmax.max(q2.kmax) as i64;
    let s: f64 = (-kmax..=kmax).map(|k| (q1.mode(k) - q2.mode(k)).norm_sqr()).sum();
    Ok((s * q1.period).sqrt())
}

/// Gauges quasi-periodic samples to a periodic potential.
///
/// `q_raw` holds `2n` uniform samples on `[0, 2T)`. The rate θ is read off from
/// the least-squares multiplier between the two periods; its 2π/T ambiguity is
/// resolved by the unwrapped phase increment over the first period.
pub fn gauge_periodic(q_raw: &[C64], period: f64, kmax: usize, tol: f64) -> Result<Potential> {
    let m = q_raw.len();
    if m < 16 || !m.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "need an even number (at least 16) of samples over two periods, got {m}"
        )));
    }
    let n = m / 2;
    let (first, second) = q_raw.split_at(n);
    let energy: f64 = first.iter().map(|c| c.norm_sqr()).sum();
    if !(energy > 0.0) {
        return Potential::new(period, 0.0, std::iter::empty()).map(|p| p.resized(kmax.min(n / 2 - 1)));
    }
    let rho: C64 = second.iter().zip(first).map(|(b, a)| b * a.conj()).sum::<C64>() / energy;
    let principal = rho.arg();
    let unwrapped: f64 = (0..n)
        .filter(|&j| first[j].norm() > 0.0 && q_raw[j + 1].norm() > 0.0)
        .map(|j| (q_raw[j + 1] * first[j].conj()).arg())
        .sum();
    let wraps = ((unwrapped - principal) / (2.0 * PI)).round();
    let total = principal + 2.0 * PI * wraps;
    let mult = C64::from_polar(1.0, total);
    let resid = (second.iter().zip(first).map(|(b, a)| (b - mult * a).norm_sqr()).sum::<f64>()
        / energy)
        .sqrt();
    if resid > tol {
        return Err(Error::NotQuasiPeriodic(resid));
    }
    let theta = total / period;
    let dt = period / n as f64;
    let gauged: Vec<C64> = first
        .iter()
        .enumerate()
        .map(|(j, c)| c * C64::from_polar(1.0, -theta * dt * j as f64))
        .collect();
    Potential::from_samples(&gauged, period, theta, kmax.min((n - 1) / 2))
}

/// Complex curvature `κ e^{i∫τ}` of a closed unit-speed curve, gauged to a periodic potential.
pub fn hasimoto_curvature(curve: &CurveSamples, kmax: usize) -> Result<Potential> {
    let m = curve.len();
    if m < 9 {
        return Err(Error::InvalidInput(format!("need at least 8 curve samples, got {}", m.saturating_sub(1))));
    }
    let n = m - 1;
    let period = curve.times()[n] - curve.times()[0];
    let speed_defect = curve.speed_defect();
    if speed_defect > 1e-2 {
        return Err(Error::NotUnitSpeed(speed_defect));
    }
    let gap = curve.points()[n].distance(&curve.points()[0]);
    if gap > 1e-6 * (1.0 + period) {
        return Err(Error::NotClosed(gap));
    }
    let (kappa, tau) = frenet_data(curve)?;
    // Spectral antiderivative of τ on the periodic grid.
    let mut tau_hat: Vec<C64> = tau[..n].iter().map(|&x| C64::from(x)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut tau_hat);
    let w = 2.0 * PI / period;
    let mean = tau_hat[0].re / n as f64;
    let phase_at = |t: f64| -> f64 {
        let mut acc = mean * t;
        for (idx, c) in tau_hat.iter().enumerate().skip(1) {
            let k = if idx <= n / 2 { idx as f64 } else { idx as f64 - n as f64 };
            if n.is_multiple_of(2) && idx == n / 2 {
                continue;
            }
            let ck = c / n as f64;
            acc += (ck * (C64::from_polar(1.0, k * w * t) - 1.0) / (I * k * w)).re;
        }
        acc
    };
    let dt = period / n as f64;
    let q_raw: Vec<C64> = (0..2 * n)
        .map(|j| {
            let t = j as f64 * dt;
            C64::from_polar(kappa[j % n], phase_at(t))
        })
        .collect();
    gauge_periodic(&q_raw, period, kmax, 1e-6)
}
