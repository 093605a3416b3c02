//! Spectral data of the monodromy.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::frame::{floquet_mu, FrameResult, Integrator, Sheet};
use crate::potential::Potential;
use crate::sl2::{CPLine, Mat2, C64};

/// Root `λ_k` of `a − d` near `2πk/T` and the perturbed Fourier coefficient `z_k = 2(−1)^k b(λ_k)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralSample {
    pub k: i64,
    pub lambda_k: C64,
    pub z_k: C64,
}

fn seed(period: f64, k: i64) -> C64 {
    C64::from(2.0 * PI * k as f64 / period)
}

fn window(cfg: &Config, period: f64) -> f64 {
    cfg.root_window.unwrap_or(PI / period)
}

fn a_minus_d(m: &Mat2) -> C64 {
    m.a - m.d
}

/// Newton iteration on `a − d` with a central-difference derivative.
fn newton_root(integ: &Integrator, start: C64, cfg: &Config, max_drift: f64) -> Option<C64> {
    let mut lam = start;
    for _ in 0..cfg.root_max_iter {
        let h = 1e-6 * (1.0 + lam.norm());
        let ms = integ.monodromies(&[lam, lam + h, lam - h]).ok()?;
        let f = a_minus_d(&ms[0]);
        let df = (a_minus_d(&ms[1]) - a_minus_d(&ms[2])) / (2.0 * h);
        if df.norm() == 0.0 || !df.is_finite() {
            return None;
        }
        let step = f / df;
        lam -= step;
        if !lam.is_finite() || (lam - start).norm() > max_drift {
            return None;
        }
        if step.norm() <= cfg.root_tol * (1.0 + lam.norm()) {
            return Some(lam);
        }
    }
    None
}

/// Winding number of `a − d` around a closed polygon, refining the sampling until phase steps stay below π/2.
fn winding(integ: &Integrator, path: &dyn Fn(f64) -> C64) -> Result<i64> {
    let mut nodes = 64;
    loop {
        let lams: Vec<C64> = (0..nodes).map(|j| path(j as f64 / nodes as f64)).collect();
        let f: Vec<C64> = integ.monodromies(&lams)?.iter().map(a_minus_d).collect();
        let mut total = 0.0;
        let mut coarse = false;
        for j in 0..nodes {
            let step = (f[(j + 1) % nodes] / f[j]).arg();
            coarse |= step.abs() > PI / 2.0;
            total += step;
        }
        if !coarse || nodes >= 1024 {
            return Ok((total / (2.0 * PI)).round() as i64);
        }
        nodes *= 2;
    }
}

fn square_path(center: C64, half: f64) -> impl Fn(f64) -> C64 {
    move |s: f64| {
        let u = 4.0 * s;
        let side = u.floor().min(3.0);
        let f = u - side;
        let (x, y) = match side as i32 {
            0 => (-1.0 + 2.0 * f, -1.0),
            1 => (1.0, -1.0 + 2.0 * f),
            2 => (1.0 - 2.0 * f, 1.0),
            _ => (-1.0, 1.0 - 2.0 * f),
        };
        center + C64::new(x, y) * half
    }
}

/// Argument-principle localization in the disc `|λ − center| < radius`, then quadrisection.
fn contour_root(integ: &Integrator, k: i64, center: C64, radius: f64, cfg: &Config) -> Result<C64> {
    let disc = |s: f64| center + C64::from_polar(radius, 2.0 * PI * s);
    let count = winding(integ, &disc)?;
    if count != 1 {
        return Err(Error::RootLocalization { k, center, radius, winding: count });
    }
    let mut c = center;
    let mut half = radius;
    while half > 1e-3 * radius {
        let h2 = half / 2.0;
        let mut next = None;
        for off in [C64::new(-h2, -h2), C64::new(h2, -h2), C64::new(h2, h2), C64::new(-h2, h2)] {
            if winding(integ, &square_path(c + off, h2))? == 1 {
                next = Some(c + off);
                break;
            }
        }
        match next {
            Some(n) => {
                c = n;
                half = h2;
            }
            // Root on a sub-square edge: stop refining and let Newton finish.
            None => break,
        }
    }
    newton_root(integ, c, cfg, 2.0 * radius)
        .filter(|l| (l - center).norm() <= radius)
        .ok_or(Error::RootLocalization { k, center, radius, winding: count })
}

/// Continuation of `λ_k` along `s ↦ s·q` from the vacuum, `s ∈ (0, 1]`.
pub fn track_lambda_k(q: &Potential, ks: &[i64], cfg: &Config) -> Result<Vec<C64>> {
    let mut lams: Vec<C64> = ks.iter().map(|&k| seed(q.period(), k)).collect();
    let mut s = 0.0;
    let mut ds = 1.0 / cfg.continuation_steps.max(1) as f64;
    while s < 1.0 {
        let target = (s + ds).min(1.0);
        let integ = Integrator::new(&q.scaled(target), cfg.n_steps)?;
        let drift = 4.0 * ds * q.sup_bound().max(1.0);
        let next: Vec<Option<C64>> =
            lams.par_iter().map(|&l| newton_root(&integ, l, cfg, drift)).collect();
        if next.iter().all(Option::is_some) {
            lams = next.into_iter().map(Option::unwrap).collect();
            s = target;
            ds = (ds * 1.5).min(0.25);
        } else {
            ds /= 2.0;
            if ds < 1e-4 {
                let k = ks[next.iter().position(Option::is_none).unwrap()];
                return Err(Error::RootLocalization {
                    k,
                    center: seed(q.period(), k),
                    radius: window(cfg, q.period()),
                    winding: -1,
                });
            }
        }
    }
    Ok(lams)
}

/// Newton from caller-supplied seeds (warm start after a small change of `q`).
pub fn refine_lambda_k(integ: &Integrator, seeds: &[(i64, C64)], cfg: &Config, max_drift: f64) -> Result<Vec<C64>> {
    seeds
        .par_iter()
        .map(|&(k, l)| {
            newton_root(integ, l, cfg, max_drift).ok_or(Error::RootLocalization {
                k,
                center: l,
                radius: max_drift,
                winding: -1,
            })
        })
        .collect()
}

fn check_distinct(ks: &[i64], lams: &[C64]) -> Result<()> {
    for i in 0..lams.len() {
        for j in 0..i {
            if (lams[i] - lams[j]).norm() <= 1e-8 * (1.0 + lams[i].norm()) {
                return Err(Error::RootLocalization { k: ks[i], center: lams[i], radius: 0.0, winding: 2 });
            }
        }
    }
    Ok(())
}

/// Roots `λ_k` for the given indices.
///
/// Newton from `2πk/T` is accepted inside the search window; otherwise the
/// window is searched by the argument principle. Indices that still fail are
/// continued from the vacuum along `s·q`.
pub fn find_lambda_k(q: &Potential, ks: &[i64], cfg: &Config) -> Result<Vec<SpectralSample>> {
    let integ = Integrator::new(q, cfg.n_steps)?;
    let win = window(cfg, q.period());
    let direct: Vec<Option<C64>> = ks
        .par_iter()
        .map(|&k| {
            let c = seed(q.period(), k);
            newton_root(&integ, c, cfg, 4.0 * win)
                .filter(|l| (l - c).norm() <= win)
                .or_else(|| contour_root(&integ, k, c, win, cfg).ok())
        })
        .collect();
    let missing: Vec<i64> = ks.iter().zip(&direct).filter(|(_, d)| d.is_none()).map(|(k, _)| *k).collect();
    let tracked = if missing.is_empty() { Vec::new() } else { track_lambda_k(q, &missing, cfg)? };
    let mut it = tracked.into_iter();
    let lams: Vec<C64> = direct.into_iter().map(|d| d.unwrap_or_else(|| it.next().unwrap())).collect();
    check_distinct(ks, &lams)?;
    Ok(ks
        .iter()
        .zip(lams)
        .map(|(&k, lambda_k)| SpectralSample { k, lambda_k, z_k: C64::default() })
        .collect())
}

/// Roots found index by index; indices whose root is missing or claimed by several labels are
/// returned separately. Shared roots go to the label whose continuation from the vacuum reaches them.
pub fn find_lambda_k_partial(q: &Potential, ks: &[i64], cfg: &Config) -> Result<(Vec<SpectralSample>, Vec<i64>)> {
    if let Ok(all) = find_lambda_k(q, ks, cfg) {
        return Ok((all, Vec::new()));
    }
    let single: Vec<Option<C64>> = ks
        .iter()
        .map(|&k| find_lambda_k(q, &[k], cfg).ok().map(|s| s[0].lambda_k))
        .collect();
    let same = |a: C64, b: C64| (a - b).norm() <= 1e-8 * (1.0 + a.norm());
    let mut found = Vec::new();
    let mut unresolved = Vec::new();
    for (i, &k) in ks.iter().enumerate() {
        let Some(l) = single[i] else {
            unresolved.push(k);
            continue;
        };
        let shared = single.iter().enumerate().any(|(j, o)| j != i && o.is_some_and(|m| same(l, m)));
        let keep = !shared || track_lambda_k(q, &[k], cfg).is_ok_and(|t| same(t[0], l));
        if keep {
            found.push(SpectralSample { k, lambda_k: l, z_k: C64::default() });
        } else {
            unresolved.push(k);
        }
    }
    Ok((found, unresolved))
}

fn sign_k(k: i64) -> f64 {
    if k.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `z_k = 2(−1)^k b(λ_k)` at known roots.
pub fn coeffs_at(integ: &Integrator, roots: &[(i64, C64)]) -> Result<Vec<SpectralSample>> {
    let lams: Vec<C64> = roots.iter().map(|r| r.1).collect();
    let ms = integ.monodromies(&lams)?;
    Ok(roots
        .iter()
        .zip(ms)
        .map(|(&(k, lambda_k), m)| SpectralSample { k, lambda_k, z_k: m.b * (2.0 * sign_k(k)) })
        .collect())
}

/// Perturbed Fourier coefficients for the given indices.
pub fn perturbed_coeffs(q: &Potential, ks: &[i64], cfg: &Config) -> Result<Vec<SpectralSample>> {
    let found = find_lambda_k(q, ks, cfg)?;
    let integ = Integrator::new(q, cfg.n_steps)?;
    let roots: Vec<(i64, C64)> = found.iter().map(|s| (s.k, s.lambda_k)).collect();
    coeffs_at(&integ, &roots)
}

/// Least-squares slope of `log|z_k|` against `|k|`; negative for decaying tails.
pub fn decay_rate(samples: &[SpectralSample]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.z_k.norm() > 0.0)
        .map(|s| (s.k.unsigned_abs() as f64, s.z_k.norm().ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / n, sy / n);
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + (p.0 - mx) * (p.1 - my), a.1 + (p.0 - mx).powi(2)));
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Eigenvalue, eigenvectors of `M` and `Mᵗ`, and the projector `v wᵗ/(wᵗv)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenData {
    pub lambda: C64,
    pub mu: C64,
    pub v: [C64; 2],
    pub w: [C64; 2],
    pub projector: Mat2,
}

fn eigvec(m: &Mat2, mu: C64) -> [C64; 2] {
    let c1 = [m.b, mu - m.a];
    let c2 = [mu - m.d, m.c];
    let n1 = c1[0].norm_sqr() + c1[1].norm_sqr();
    let n2 = c2[0].norm_sqr() + c2[1].norm_sqr();
    let (v, n) = if n1 >= n2 { (c1, n1.sqrt()) } else { (c2, n2.sqrt()) };
    [v[0] / n, v[1] / n]
}

/// Eigen-decomposition data of `M` on one sheet.
pub fn eigen_projector(m: &Mat2, sheet: Sheet, lambda: C64, tol: f64) -> Result<EigenData> {
    let mu = floquet_mu(m.trace(), sheet);
    let sep = (mu - mu.inv()).norm();
    if sep <= tol {
        return Err(Error::EigenlineIllConditioned(sep));
    }
    let v = eigvec(m, mu);
    let w = eigvec(&m.transpose(), mu);
    let wv = w[0] * v[0] + w[1] * v[1];
    let projector = Mat2::outer(v, w).scale(wv.inv());
    Ok(EigenData { lambda, mu, v, w, projector })
}

/// Gradient of `Δ(λ)` in Fourier coordinates: `∂Δ·δq = Σ_k g₁(k) δq̂(k) + g₂(k) conj(δq̂(k))`.
#[derive(Clone, Debug)]
pub struct DeltaGradient {
    period: f64,
    kmax: usize,
    g1: Vec<C64>,
    g2: Vec<C64>,
}

/// Integral representation used for a gradient of `Δ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GradientFormula {
    /// `((μ − μ⁻¹)/(wᵗv)) ∫ wᵗ(t) δα v(t) dt`; needs distinct Floquet multipliers.
    Eigen,
    /// `∫ tr(δα F⁻¹ M F) dt`; valid everywhere, including Jordan points `μ = ±1`.
    Trace,
}

impl DeltaGradient {
    /// Built from frames at `λ` by the periodic trapezoid rule.
    pub fn from_frames(fr: &FrameResult, period: f64, kmax: usize, formula: GradientFormula, tol: f64) -> Result<Self> {
        let n = fr.frames.len() - 1;
        let h = period / n as f64;
        // ∂Δ·δq = ∫ (δq K₁ + conj(δq) K₂) dt with K₁ = ½X₂₁, K₂ = −½X₁₂.
        let mut k1: Vec<C64> = Vec::with_capacity(n);
        let mut k2: Vec<C64> = Vec::with_capacity(n);
        match formula {
            GradientFormula::Eigen => {
                let e = eigen_projector(&fr.monodromy, Sheet::Plus, fr.lambda, tol)?;
                let wv = e.w[0] * e.v[0] + e.w[1] * e.v[1];
                let coef = (e.mu - e.mu.inv()) / wv * (0.5 * h);
                for f in &fr.frames[..n] {
                    let vt = f.adjugate().apply(e.v);
                    let wt = f.transpose().apply(e.w);
                    k1.push(coef * vt[1] * wt[0]);
                    k2.push(-coef * vt[0] * wt[1]);
                }
            }
            GradientFormula::Trace => {
                let m = fr.monodromy;
                for f in &fr.frames[..n] {
                    let y = f.adjugate() * m * *f;
                    k1.push(y.c * (0.5 * h));
                    k2.push(-y.b * (0.5 * h));
                }
            }
        }
        let mut planner = FftPlanner::new();
        // g₁(k) = Σ_j K₁_j e^{+iωk t_j} (inverse transform); g₂(k) = Σ_j K₂_j e^{−iωk t_j} (forward).
        planner.plan_fft_inverse(n).process(&mut k1);
        planner.plan_fft_forward(n).process(&mut k2);
        let kmax = kmax.min((n - 1) / 2);
        let pick = |buf: &[C64]| -> Vec<C64> {
            (-(kmax as i64)..=kmax as i64).map(|k| buf[k.rem_euclid(n as i64) as usize]).collect()
        };
        Ok(DeltaGradient { period, kmax, g1: pick(&k1), g2: pick(&k2) })
    }

    pub fn kmax(&self) -> usize {
        self.kmax
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// `(g₁(k), g₂(k))`.
    pub fn coefficients(&self, k: i64) -> (C64, C64) {
        if k.unsigned_abs() as usize > self.kmax {
            return (C64::default(), C64::default());
        }
        let i = (k + self.kmax as i64) as usize;
        (self.g1[i], self.g2[i])
    }

    pub fn apply(&self, dq: &Potential) -> C64 {
        dq.modes().map(|(k, c)| {
            let (a, b) = self.coefficients(k);
            a * c + b * c.conj()
        }).sum()
    }

    /// Linear combination `Σ cᵢ gradᵢ` (used for λ-stencils).
    pub fn combine(parts: &[(f64, &DeltaGradient)]) -> DeltaGradient {
        let base = parts[0].1;
        let mut g1 = vec![C64::default(); base.g1.len()];
        let mut g2 = vec![C64::default(); base.g2.len()];
        for (c, g) in parts {
            for i in 0..g1.len() {
                g1[i] += g.g1[i] * *c;
                g2[i] += g.g2[i] * *c;
            }
        }
        DeltaGradient { period: base.period, kmax: base.kmax, g1, g2 }
    }
}

/// Gradients of `Δ` and `Δ′` at `λ`; the latter by the five-point stencil over gradients.
pub fn delta_gradients(
    q: &Potential,
    lambda: C64,
    kmax: usize,
    formula: GradientFormula,
    cfg: &Config,
) -> Result<(DeltaGradient, DeltaGradient)> {
    let integ = Integrator::new(q, cfg.n_steps)?;
    let h = cfg.lambda_stencil_h * (1.0 + lambda.norm());
    let pts = [lambda, lambda + h, lambda - h, lambda + 2.0 * h, lambda - 2.0 * h];
    let grads: Vec<DeltaGradient> = pts
        .par_iter()
        .map(|&l| DeltaGradient::from_frames(&integ.frames(l)?, q.period(), kmax, formula, cfg.eigen_tol))
        .collect::<Result<_>>()?;
    let s = 1.0 / (12.0 * h);
    let d1 = DeltaGradient::combine(&[
        (8.0 * s, &grads[1]),
        (-8.0 * s, &grads[2]),
        (-s, &grads[3]),
        (s, &grads[4]),
    ]);
    let mut it = grads.into_iter();
    Ok((it.next().unwrap(), d1))
}

/// `∂Δ(λ)/∂q · δq`.
pub fn directional_derivative_delta(q: &Potential, lambda: C64, dq: &Potential, cfg: &Config) -> Result<C64> {
    let fr = Integrator::new(q, cfg.n_steps)?.frames(lambda)?;
    let g = DeltaGradient::from_frames(&fr, q.period(), dq.kmax(), GradientFormula::Eigen, cfg.eigen_tol)?;
    Ok(g.apply(dq))
}

/// `∂Δ′(λ)/∂q · δq`, by λ-stencil over the directional derivative.
pub fn directional_derivative_delta1(q: &Potential, lambda: C64, dq: &Potential, cfg: &Config) -> Result<C64> {
    let (_, g1) = delta_gradients(q, lambda, dq.kmax(), GradientFormula::Eigen, cfg)?;
    Ok(g1.apply(dq))
}

/// Zero orders of `Δ² − 4` and of `N = M − ½Δ𝟙` at `λ*`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrderReport {
    pub lambda_star: C64,
    pub n: usize,
    pub j0: usize,
    /// Leading Taylor coefficient `Ñ(λ*)` of `N`.
    pub n_tilde: Mat2,
    pub ba_line: Option<CPLine>,
    pub nilpotent_flag: bool,
    pub noise_floor: f64,
    pub delta: C64,
}

/// Counts zeros by winding on `|λ − λ*| = r` and reads `j₀` off Cauchy–Taylor coefficients.
pub fn zero_order_at(q: &Potential, lambda_star: C64, cfg: &Config) -> Result<OrderReport> {
    let integ = Integrator::new(q, cfg.n_steps)?;
    let r = cfg.contour_radius;
    let m = cfg.contour_nodes;
    let lams: Vec<C64> = (0..m).map(|l| lambda_star + C64::from_polar(r, 2.0 * PI * l as f64 / m as f64)).collect();
    let ms = integ.monodromies(&lams)?;
    let f: Vec<C64> = ms.iter().map(|x| x.trace() * x.trace() - 4.0).collect();
    let fmax = f.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if f.iter().any(|v| v.norm() <= 1e-13 * fmax.max(1.0)) {
        return Err(Error::RadiusMisconfigured(format!("Δ²−4 vanishes on the contour of radius {r}")));
    }
    let mut total = 0.0;
    for j in 0..m {
        let step = (f[(j + 1) % m] / f[j]).arg();
        if step.abs() > PI / 2.0 {
            return Err(Error::RadiusMisconfigured(format!(
                "phase of Δ²−4 jumps by {step:.3} between contour nodes; reduce the radius {r}"
            )));
        }
        total += step;
    }
    let n = (total / (2.0 * PI)).round() as i64;
    if n < 0 || (total / (2.0 * PI) - n as f64).abs() > 1e-6 {
        return Err(Error::RadiusMisconfigured(format!("winding {}", total / (2.0 * PI))));
    }
    let n = n as usize;

    // Scaled Taylor coefficients a_j = r^j N_j by the trapezoid rule (one FFT per entry).
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    let mut entries: [Vec<C64>; 4] = Default::default();
    for x in &ms {
        let nn = x.tracefree_part();
        entries[0].push(nn.a);
        entries[1].push(nn.b);
        entries[2].push(nn.c);
        entries[3].push(nn.d);
    }
    for e in entries.iter_mut() {
        fft.process(e);
    }
    let coeff = |j: usize| -> Mat2 {
        Mat2::new(entries[0][j], entries[1][j], entries[2][j], entries[3][j]).scale(C64::from(1.0 / m as f64))
    };
    let noise = (m / 2..m).map(|j| coeff(j).norm()).fold(0.0, f64::max);
    let scale = (0..m / 2).map(|j| coeff(j).norm()).fold(0.0, f64::max);
    let threshold = (100.0 * noise).max(cfg.order_rel_tol * scale);
    let j0 = (0..m / 2).find(|&j| coeff(j).norm() > threshold).ok_or_else(|| {
        Error::OrderDetection(format!("N vanishes to the noise floor {noise:e} on the contour"))
    })?;
    let n_tilde = coeff(j0).scale(C64::from(r.powi(-(j0 as i32))));
    if j0 > n / 2 {
        return Err(Error::OrderDetection(format!("j0 = {j0} exceeds floor(n/2) with n = {n}")));
    }
    let delta = integ.delta(lambda_star)?;
    let mut report = OrderReport {
        lambda_star,
        n,
        j0,
        n_tilde,
        ba_line: None,
        nilpotent_flag: false,
        noise_floor: noise * r.powi(-(j0 as i32)),
        delta,
    };
    if n >= 1 {
        let (line, nil) = baker_akhiezer_line(&report, cfg)?;
        report.ba_line = Some(line);
        report.nilpotent_flag = nil;
    }
    Ok(report)
}

/// Kernel of `Ñ(λ*)` when it is nilpotent; otherwise an eigenline of `Ñ(λ*)` (flag false).
pub fn baker_akhiezer_line(report: &OrderReport, cfg: &Config) -> Result<(CPLine, bool)> {
    let nt = report.n_tilde;
    let size = nt.norm();
    if report.n == 0 {
        return Err(Error::OrderDetection("Δ²−4 does not vanish at λ*".into()));
    }
    if size <= report.noise_floor || size == 0.0 {
        return Err(Error::OrderDetection(format!("Ñ(λ*) is below the noise floor ({size:e})")));
    }
    if nt.det().norm() <= cfg.nilpotent_tol * size * size {
        return Ok((CPLine::from_vec(nt.smallest_singular_vector())?, true));
    }
    let nu = (-nt.det()).sqrt();
    Ok((CPLine::from_vec(eigvec(&nt, nu))?, false))
}

/// The two eigenlines of a tracefree matrix `A` (eigenvalues `±√(−det A)`).
pub fn tracefree_eigenlines(a: &Mat2) -> Result<(CPLine, CPLine)> {
    let nu = (-a.det()).sqrt();
    Ok((CPLine::from_vec(eigvec(a, nu))?, CPLine::from_vec(eigvec(a, -nu))?))
}

/// Eigenlines of `M` (for `M ≠ ±𝟙`).
pub fn monodromy_eigenlines(m: &Mat2) -> Result<(CPLine, CPLine)> {
    tracefree_eigenlines(&m.tracefree_part())
}
