//! Closing conditions, Newton inversion of the spectral target map, and the finite-gap pipeline.

use serde::{Deserialize, Serialize};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::config::{Config, SignPolicy};
use crate::dressing::{dress_potential, SimpleFactor};
use crate::error::{Error, Result, StageExt};
use crate::frame::{integrate_frame, Integrator};
use crate::potential::{l2_distance, Potential};
use crate::sl2::{CPLine, Mat2, C64};
use crate::spectral::{
    coeffs_at, delta_gradients, find_lambda_k, perturbed_coeffs, refine_lambda_k, zero_order_at, DeltaGradient,
    GradientFormula, OrderReport, SpectralSample,
};

/// Closing diagnostics at the Sym point `λ* = i + θ`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClosureReport {
    pub lambda_star: C64,
    pub delta: C64,
    pub delta1: C64,
    pub sign: i8,
    pub m_residual: f64,
    pub order_n: Option<usize>,
    pub order_j0: Option<usize>,
    pub semisimple: bool,
    pub monodromy: Mat2,
}

pub fn lambda_star(theta: f64) -> C64 {
    C64::new(theta, 1.0)
}

pub(crate) fn target_sign(delta: C64, policy: SignPolicy) -> i8 {
    match policy {
        SignPolicy::Plus => 1,
        SignPolicy::Minus => -1,
        SignPolicy::Nearest => {
            if delta.re >= 0.0 {
                1
            } else {
                -1
            }
        }
    }
}

/// Evaluates the closing condition `M(i+θ) = ±𝟙`.
pub fn closure_residual(q: &Potential, theta: f64, cfg: &Config) -> Result<ClosureReport> {
    let ls = lambda_star(theta);
    let integ = Integrator::new(q, cfg.n_steps)?;
    let (d, m) = integ.discriminant_with_monodromy(ls, cfg.lambda_stencil_h)?;
    let sign = target_sign(d.delta, cfg.sign_policy);
    let m_residual = (m - Mat2::scalar(C64::from(sign as f64))).norm();
    let order = zero_order_at(q, ls, cfg).ok();
    Ok(ClosureReport {
        lambda_star: ls,
        delta: d.delta,
        delta1: d.delta1,
        sign,
        m_residual,
        order_n: order.as_ref().map(|o| o.n),
        order_j0: order.as_ref().map(|o| o.j0),
        semisimple: m_residual <= cfg.closure_tol,
        monodromy: m,
    })
}

/// Closing equations `Δ(λ*) = 2s`, `Δ′(λ*) = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosingTarget {
    pub lambda_star: C64,
    pub sign: i8,
}

/// Modes reserved for the closing equations, with the sensitivity matrix that justified them.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DirectionSet {
    /// Two modes (complex case) or one positive mode paired with its conjugate (real case).
    pub modes: Vec<i64>,
    pub real: bool,
    /// Rows: `Re Δ, Im Δ, Re Δ′, Im Δ′` (complex) or `Re Δ, Im Δ′` (real); columns: real unknowns.
    pub eta: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
}

impl DirectionSet {
    /// Unit perturbations, one per real unknown.
    pub fn perturbations(&self, period: f64, theta: f64) -> Vec<Potential> {
        let kmax = self.modes.iter().map(|k| k.unsigned_abs() as usize).max().unwrap_or(0);
        let mut out = Vec::new();
        for &k in &self.modes {
            for unit in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                let mut p = Potential::zero(period, theta, kmax);
                p.set_mode(k, unit);
                if self.real {
                    p.set_mode(-k, unit.conj());
                }
                out.push(p);
            }
        }
        out
    }
}

fn closing_column(g: &DeltaGradient, g1: &DeltaGradient, k: i64, unit: C64, real: bool) -> Vec<f64> {
    let apply = |grad: &DeltaGradient| -> C64 {
        let (a, b) = grad.coefficients(k);
        let mut v = a * unit + b * unit.conj();
        if real {
            let (a, b) = grad.coefficients(-k);
            v += a * unit.conj() + b * unit;
        }
        v
    };
    let (d, d1) = (apply(g), apply(g1));
    if real {
        vec![d.re, d1.im]
    } else {
        vec![d.re, d.im, d1.re, d1.im]
    }
}

fn singular_values(rows: &[Vec<f64>]) -> Vec<f64> {
    let m = DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]);
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// First candidate mode set, in order of increasing mode size, whose closing sensitivity matrix has
/// smallest singular value above `direction_threshold`.
pub fn select_directions(q: &Potential, theta: f64, real: bool, cfg: &Config) -> Result<DirectionSet> {
    let ls = lambda_star(theta);
    let lo = cfg.fixed_modes as i64 + 1;
    let hi = cfg.direction_max_mode as i64;
    if hi < lo {
        return Err(Error::InvalidInput("direction_max_mode must exceed fixed_modes".into()));
    }
    let (g, g1) = delta_gradients(q, ls, hi as usize, GradientFormula::Trace, cfg)?;
    let mut candidates: Vec<Vec<i64>> = Vec::new();
    if real {
        candidates.extend((lo..=hi).map(|k| vec![k]));
    } else {
        let modes: Vec<i64> = (lo..=hi).flat_map(|k| [-k, k]).collect();
        for (i, &a) in modes.iter().enumerate() {
            for &b in &modes[i + 1..] {
                candidates.push(vec![a, b]);
            }
        }
        candidates.sort_by_key(|c| (c[0].abs().max(c[1].abs()), c[0].abs() + c[1].abs(), c[0], c[1]));
    }
    let mut best: Vec<f64> = Vec::new();
    for modes in candidates {
        let cols: Vec<Vec<f64>> = modes
            .iter()
            .flat_map(|&k| [C64::new(1.0, 0.0), C64::new(0.0, 1.0)].map(|u| closing_column(&g, &g1, k, u, real)))
            .collect();
        let eta: Vec<Vec<f64>> = (0..cols[0].len()).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
        let sv = singular_values(&eta);
        if sv.last().copied().unwrap_or(0.0) > cfg.direction_threshold {
            return Ok(DirectionSet { modes, real, eta, singular_values: sv });
        }
        if best.last().copied().unwrap_or(-1.0) < sv.last().copied().unwrap_or(0.0) {
            best = sv;
        }
    }
    Err(Error::DirectionSelection(best))
}

/// `z_k` kept for `|k| ≤ n` and zeroed beyond; the real variant also enforces `z_{−k} = conj z_k`.
pub fn truncate_coeffs(samples: &[SpectralSample], n: usize, real: bool) -> Vec<SpectralSample> {
    let kept = |s: &SpectralSample| if s.k.unsigned_abs() as usize <= n { s.z_k } else { C64::default() };
    samples
        .iter()
        .map(|s| {
            let mut z = kept(s);
            if real {
                if let Some(p) = samples.iter().find(|p| p.k == -s.k) {
                    z = (z + kept(p).conj()) * 0.5;
                }
            }
            SpectralSample { z_k: z, ..*s }
        })
        .collect()
}

/// Square system for Newton: unknown mode coefficients against `z_k` targets on the unknown
/// non-direction modes, plus the closing equations when present.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NewtonTarget {
    pub closing: Option<ClosingTarget>,
    /// Conjugate-symmetric parametrization; only `k > 0` appears in the mode lists.
    pub real: bool,
    pub unknowns: Vec<i64>,
    pub directions: Vec<i64>,
    pub z_targets: Vec<(i64, C64)>,
}

impl NewtonTarget {
    /// Unknowns `N < |k| ≤ K` (or `N < k ≤ K` when real); targets still to be attached.
    pub fn banded(fixed_modes: usize, kmax: usize, real: bool, directions: Vec<i64>, closing: Option<ClosingTarget>) -> Self {
        let lo = fixed_modes as i64 + 1;
        let hi = kmax as i64;
        let unknowns = if real { (lo..=hi).collect() } else { (-hi..=hi).filter(|k| k.abs() >= lo).collect() };
        NewtonTarget { closing, real, unknowns, directions, z_targets: Vec::new() }
    }

    pub fn kmax(&self) -> usize {
        self.unknowns.iter().map(|k| k.unsigned_abs() as usize).max().unwrap_or(0)
    }

    /// Indices needing a `z_k` target.
    pub fn target_indices(&self) -> Vec<i64> {
        self.unknowns.iter().copied().filter(|k| !self.directions.contains(k)).collect()
    }

    pub fn with_targets(mut self, samples: &[SpectralSample]) -> Result<Self> {
        self.z_targets = self
            .target_indices()
            .into_iter()
            .map(|k| {
                samples
                    .iter()
                    .find(|s| s.k == k)
                    .map(|s| (k, s.z_k))
                    .ok_or_else(|| Error::InvalidInput(format!("no z target for k = {k}")))
            })
            .collect::<Result<_>>()?;
        Ok(self)
    }

    fn check(&self) -> Result<()> {
        let eqs = 2 * self.z_targets.len()
            + match (self.closing, self.real) {
                (None, _) => 0,
                (Some(_), true) => 2,
                (Some(_), false) => 4,
            };
        let unknowns = 2 * self.unknowns.len();
        if eqs != unknowns || unknowns == 0 {
            return Err(Error::InvalidInput(format!("Newton system is {eqs} equations in {unknowns} unknowns")));
        }
        let targets: Vec<i64> = self.z_targets.iter().map(|t| t.0).collect();
        if targets != self.target_indices() {
            return Err(Error::InvalidInput("z targets do not match the free non-direction modes".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NewtonOutcome {
    pub potential: Potential,
    pub iterations: usize,
    /// Max-norm residual before each iteration and at the end.
    pub residual_history: Vec<f64>,
    pub roots: Vec<SpectralSample>,
    /// Jacobian condition number at the last iteration.
    pub condition: f64,
}

struct System<'a> {
    target: &'a NewtonTarget,
    base: Potential,
    modes: Vec<i64>,
    cfg: &'a Config,
}

impl System<'_> {
    fn pack(&self, q: &Potential) -> Vec<f64> {
        self.modes.iter().flat_map(|&k| [q.mode(k).re, q.mode(k).im]).collect()
    }

    fn unpack(&self, x: &[f64]) -> Potential {
        let mut q = self.base.clone();
        for (i, &k) in self.modes.iter().enumerate() {
            let v = C64::new(x[2 * i], x[2 * i + 1]);
            q.set_mode(k, v);
            if self.target.real {
                q.set_mode(-k, v.conj());
            }
        }
        q
    }

    fn residual(&self, q: &Potential, seeds: &[(i64, C64)], drift: f64) -> Result<(Vec<f64>, Vec<SpectralSample>)> {
        let integ = Integrator::new(q, self.cfg.n_steps)?;
        let lams = refine_lambda_k(&integ, seeds, self.cfg, drift)?;
        let roots: Vec<(i64, C64)> = seeds.iter().map(|s| s.0).zip(lams).collect();
        let samples = coeffs_at(&integ, &roots)?;
        let mut r = Vec::with_capacity(2 * self.modes.len());
        for (s, (_, zt)) in samples.iter().zip(&self.target.z_targets) {
            let d = s.z_k - zt;
            r.extend([d.re, d.im]);
        }
        if let Some(c) = self.target.closing {
            let (delta, delta1, _) = integ.delta_variational(c.lambda_star)?;
            let e = delta - 2.0 * c.sign as f64;
            if self.target.real {
                r.extend([e.re, delta1.im]);
            } else {
                r.extend([e.re, e.im, delta1.re, delta1.im]);
            }
        }
        Ok((r, samples))
    }
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn two_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Newton with roots `λ_k` located from scratch.
pub fn newton_close(target: &NewtonTarget, q0: &Potential, cfg: &Config) -> Result<NewtonOutcome> {
    let ks = target.target_indices();
    let seeds: Vec<(i64, C64)> = if ks.is_empty() {
        Vec::new()
    } else {
        find_lambda_k(q0, &ks, cfg)?.into_iter().map(|s| (s.k, s.lambda_k)).collect()
    };
    newton_close_seeded(target, q0, &seeds, cfg)
}

/// Damped Newton on the target system with a forward-difference Jacobian; roots are warm-started
/// from `seeds` and carried between iterations.
pub fn newton_close_seeded(
    target: &NewtonTarget,
    q0: &Potential,
    seeds: &[(i64, C64)],
    cfg: &Config,
) -> Result<NewtonOutcome> {
    target.check()?;
    if q0.kmax() < target.kmax() {
        return Err(Error::InvalidInput(format!("potential has {} modes, target needs {}", q0.kmax(), target.kmax())));
    }
    let sys = System { target, base: q0.clone(), modes: target.unknowns.clone(), cfg };
    let drift_step = cfg.root_window.unwrap_or(std::f64::consts::PI / q0.period());
    let mut x = sys.pack(q0);
    let mut roots: Vec<(i64, C64)> = seeds.to_vec();
    let (mut r, mut samples) = sys.residual(q0, &roots, drift_step)?;
    roots = samples.iter().map(|s| (s.k, s.lambda_k)).collect();
    let mut history = vec![max_norm(&r)];
    let mut condition = 1.0;
    let mut iterations = 0;
    while max_norm(&r) > cfg.newton_tol {
        if iterations == cfg.max_iter {
            return Err(Error::NewtonMaxIter { iterations, residual: max_norm(&r) });
        }
        iterations += 1;
        let cols: Vec<Vec<f64>> = (0..x.len())
            .into_par_iter()
            .map(|j| {
                let mut xp = x.clone();
                let e = cfg.fd_step * (1.0 + x[j].abs());
                xp[j] += e;
                let (rp, _) = sys.residual(&sys.unpack(&xp), &roots, 0.1 * drift_step)?;
                Ok(rp.iter().zip(&r).map(|(a, b)| (a - b) / e).collect())
            })
            .collect::<Result<_>>()?;
        let jac = DMatrix::from_fn(r.len(), x.len(), |i, j| cols[j][i]);
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if !(condition <= 1e12) {
            return Err(Error::JacobianSingular(condition));
        }
        let dx = svd
            .solve(&DVector::from_column_slice(&r), 0.0)
            .map_err(|e| Error::InvalidInput(format!("Newton solve: {e}")))?;
        let merit = two_norm(&r);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..12 {
            let xn: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a - alpha * d).collect();
            if let Ok((rn, sn)) = sys.residual(&sys.unpack(&xn), &roots, drift_step) {
                if two_norm(&rn) <= (1.0 - 1e-4 * alpha) * merit {
                    accepted = Some((xn, rn, sn));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((xn, rn, sn)) = accepted else {
            return Err(Error::NewtonMaxIter { iterations, residual: max_norm(&r) });
        };
        x = xn;
        r = rn;
        samples = sn;
        roots = samples.iter().map(|s| (s.k, s.lambda_k)).collect();
        history.push(max_norm(&r));
    }
    Ok(NewtonOutcome { potential: sys.unpack(&x), iterations, residual_history: history, roots: samples, condition })
}

/// Gauss-Newton on `M(λ*) − s𝟙` over the given modes, each step moving to the point of the
/// linearized closed set nearest to the starting potential.
///
/// Removes the residual that re-dressing leaves when `Δ(λ*)` is only known to discretization accuracy.
pub fn polish_closure(
    q: &Potential,
    theta: f64,
    sign: i8,
    modes: &[i64],
    real: bool,
    cfg: &Config,
) -> Result<(Potential, Vec<f64>)> {
    let ls = lambda_star(theta);
    let target = Mat2::scalar(C64::from(sign as f64));
    let kmax = modes.iter().map(|k| k.unsigned_abs() as usize).max().unwrap_or(0).max(q.kmax());
    let base = q.resized(kmax);
    let put = |x: &[f64]| -> Potential {
        let mut p = base.clone();
        for (i, &k) in modes.iter().enumerate() {
            let v = C64::new(x[2 * i], x[2 * i + 1]);
            if real && k == 0 {
                p.set_mode(0, C64::from(v.re));
            } else if real {
                p.set_mode(k, v);
                p.set_mode(-k, v.conj());
            } else {
                p.set_mode(k, v);
            }
        }
        p
    };
    let resid = |p: &Potential| -> Result<Vec<f64>> {
        let d = Integrator::new(p, cfg.n_steps)?.monodromy(ls)? - target;
        Ok(vec![d.a.re, d.a.im, d.b.re, d.b.im, d.c.re, d.c.im, d.d.re, d.d.im])
    };
    let x0: Vec<f64> = modes.iter().flat_map(|&k| [base.mode(k).re, base.mode(k).im]).collect();
    let mut x = x0.clone();
    let mut r = resid(&base)?;
    let mut history = vec![max_norm(&r)];
    for _ in 0..cfg.polish_max_iter {
        if max_norm(&r) <= 1e-14 {
            break;
        }
        let cols: Vec<Vec<f64>> = (0..x.len())
            .into_par_iter()
            .map(|j| {
                let mut xp = x.clone();
                let e = cfg.fd_step * (1.0 + x[j].abs());
                xp[j] += e;
                Ok(resid(&put(&xp))?.iter().zip(&r).map(|(a, b)| (a - b) / e).collect())
            })
            .collect::<Result<_>>()?;
        let jac = DMatrix::from_fn(r.len(), x.len(), |i, j| cols[j][i]);
        let svd = jac.clone().svd(true, true);
        // M stays in SL₂, so two of the eight singular values are finite-difference noise.
        let cut = 1e-6 * svd.singular_values.max();
        // Nearest point to the start on the linearized closed set: y ← J⁺(J y − r), y = x − x₀.
        let y = DVector::from_iterator(x.len(), x.iter().zip(&x0).map(|(a, b)| a - b));
        let rhs = &jac * &y - DVector::from_column_slice(&r);
        let y_new = svd.solve(&rhs, cut).map_err(|e| Error::InvalidInput(format!("polish solve: {e}")))?;
        let dx = &y - y_new;
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..12 {
            let xn: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a - alpha * d).collect();
            let rn = resid(&put(&xn))?;
            if two_norm(&rn) < (1.0 - 1e-4 * alpha) * two_norm(&r) {
                accepted = Some((xn, rn));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xn, rn)) = accepted else { break };
        x = xn;
        r = rn;
        history.push(max_norm(&r));
    }
    Ok((put(&x), history))
}

/// Real symmetry class of a real potential.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RealForm {
    R2,
    S2,
    H2,
}

/// Everything produced by the finite-gap pipeline.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineOutcome {
    /// The closed finite-gap approximation `q_n`.
    pub potential: Potential,
    /// Undressed input `q̃` and its Newton correction `q̃_n`.
    pub undressed: Potential,
    pub undressed_n: Potential,
    /// Baker-Akhiezer lines used for undressing and re-dressing.
    pub line_in: Option<CPLine>,
    pub line_out: Option<CPLine>,
    pub directions: Option<DirectionSet>,
    pub z_targets: Vec<SpectralSample>,
    pub newton: NewtonOutcome,
    pub polish_history: Vec<f64>,
    pub closure: Option<ClosureReport>,
    pub l2_distance: f64,
}

/// Line used to undress a closed potential (the undressing factor uses its perpendicular).
fn undressing_line(report: &OrderReport, real: bool) -> Result<CPLine> {
    let line = report
        .ba_line
        .ok_or_else(|| Error::OrderDetection("no Baker-Akhiezer line at lambda*".into()))?;
    if !real {
        return Ok(line);
    }
    if report.nilpotent_flag {
        return realify(&line);
    }
    // Real line L maximizing ‖π_L Ñ π_{L⊥}‖, so that L⊥ is far from the eigenlines of Ñ.
    let nt = report.n_tilde;
    let coupling = |phi: f64| -> f64 {
        let v = [C64::from(phi.cos()), C64::from(phi.sin())];
        let p = [C64::from(-phi.sin()), C64::from(phi.cos())];
        let np = nt.apply(p);
        (v[0] * np[0] + v[1] * np[1]).norm()
    };
    let best = (0..360).map(|j| j as f64 * std::f64::consts::PI / 360.0).max_by(|a, b| coupling(*a).total_cmp(&coupling(*b))).unwrap();
    CPLine::real(best.cos(), best.sin())
}

/// Nearest real line to a line that is real up to a phase.
fn realify(line: &CPLine) -> Result<CPLine> {
    let v = line.vector();
    let big = if v[0].norm() >= v[1].norm() { v[0] } else { v[1] };
    let phase = big.conj() / big.norm();
    CPLine::real((v[0] * phase).re, (v[1] * phase).re)
}

fn undress(q: &Potential, theta: f64, line: &CPLine, cfg: &Config) -> Result<Potential> {
    let ls = lambda_star(theta);
    let fr = integrate_frame(q, ls, cfg.n_steps)?;
    let sf = SimpleFactor::new(ls, *line)?.inverse();
    let d = dress_potential(q, &sf, &fr, cfg.dress_modes, 1e-6)?;
    if d.warning.is_some() {
        return Err(Error::NotEigenline(d.periodicity_defect));
    }
    Ok(d.potential)
}

/// Re-dresses with the kernel of the nilpotent `Ñ(λ*)` of `q̃`; returns the potential and the line.
fn redress(qt: &Potential, theta: f64, real: bool, cfg: &Config) -> Result<(Potential, CPLine)> {
    let ls = lambda_star(theta);
    let order = zero_order_at(qt, ls, cfg)?;
    if order.j0 != 0 {
        return Err(Error::OrderDetection(format!("undressed potential has j0 = {} at lambda*", order.j0)));
    }
    let mut line = order
        .ba_line
        .ok_or_else(|| Error::OrderDetection("no Baker-Akhiezer line after Newton".into()))?;
    if real {
        line = realify(&line)?;
    }
    let fr = integrate_frame(qt, ls, cfg.n_steps)?;
    let sf = SimpleFactor::new(ls, line)?;
    let d = dress_potential(qt, &sf, &fr, cfg.dress_modes, 1e-6)?;
    if d.warning.is_some() {
        return Err(Error::NotEigenline(d.periodicity_defect));
    }
    Ok((d.potential, line))
}

fn polish_modes(cfg: &Config, real: bool) -> Vec<i64> {
    let lo = cfg.fixed_modes as i64 + 1;
    if real {
        (lo..lo + 3).collect()
    } else {
        (lo..lo + 3).flat_map(|k| [-k, k]).collect()
    }
}

fn symmetrize(q: Potential, real: bool) -> Result<Potential> {
    if !real {
        return Ok(q);
    }
    let defect = q.imag_defect();
    if defect > 1e-9 {
        return Err(Error::SymmetryViolation(format!("imaginary part {defect:.3e} after dressing")));
    }
    Ok(q.real_part())
}

fn already_solved(qt: &Potential, theta: f64, n: usize, kmax: usize, sign: i8, d: &DirectionSet, cfg: &Config) -> bool {
    let closing = Some(ClosingTarget { lambda_star: lambda_star(theta), sign });
    let target = NewtonTarget::banded(cfg.fixed_modes, kmax, d.real, d.modes.clone(), closing);
    let Ok(samples) = perturbed_coeffs(qt, &target.target_indices(), cfg) else {
        return false;
    };
    let Ok(target) = target.with_targets(&truncate_coeffs(&samples, n, d.real)) else {
        return false;
    };
    let seeds: Vec<(i64, C64)> = samples.iter().map(|s| (s.k, s.lambda_k)).collect();
    let start = qt.resized(qt.kmax().max(kmax));
    let sys = System { target: &target, base: start.clone(), modes: target.unknowns.clone(), cfg };
    sys.residual(&start, &seeds, 0.1).is_ok_and(|(r, _)| max_norm(&r) <= cfg.newton_tol)
}

fn closed_pipeline(q: &Potential, theta: f64, n: usize, real: bool, cfg: &Config) -> Result<PipelineOutcome> {
    let ls = lambda_star(theta);
    let input = closure_residual(q, theta, cfg).stage("input")?;
    if input.m_residual > cfg.closure_tol {
        return Err(Error::InputNotClosed(input.m_residual)).stage("input");
    }
    let order = zero_order_at(q, ls, cfg).stage("order")?;
    let line_in = undressing_line(&order, real).stage("order")?;
    let qt = symmetrize(undress(q, theta, &line_in, cfg)?, real).stage("undress")?;
    let kmax = n + cfg.k_margin;
    let directions = match select_directions(&qt, theta, real, cfg) {
        Ok(d) => d,
        Err(e) => {
            // Symmetric inputs (the circle) can be rank deficient yet already finite-gap.
            let nominal = if real { vec![cfg.fixed_modes as i64 + 1] } else { vec![-(cfg.fixed_modes as i64) - 1, cfg.fixed_modes as i64 + 1] };
            let probe = DirectionSet { modes: nominal, real, eta: Vec::new(), singular_values: Vec::new() };
            if !already_solved(&qt, theta, n, kmax, input.sign, &probe, cfg) {
                return Err(e).stage("directions");
            }
            probe
        }
    };

    let closing = Some(ClosingTarget { lambda_star: ls, sign: input.sign });
    let mut target = NewtonTarget::banded(cfg.fixed_modes, kmax, real, directions.modes.clone(), closing);
    let ks = target.target_indices();
    let samples = perturbed_coeffs(&qt, &ks, cfg).stage("spectral")?;
    let truncated = truncate_coeffs(&samples, n, real);
    target = target.with_targets(&truncated).stage("spectral")?;
    let seeds: Vec<(i64, C64)> = samples.iter().map(|s| (s.k, s.lambda_k)).collect();
    let start = qt.resized(qt.kmax().max(kmax));
    let newton = newton_close_seeded(&target, &start, &seeds, cfg).stage("newton")?;
    let qtn = symmetrize(newton.potential.clone(), real).stage("newton")?;
    if newton.iterations == 0 {
        let closure = closure_residual(q, theta, cfg).stage("verify")?;
        return Ok(PipelineOutcome {
            potential: q.clone(),
            undressed: qt,
            undressed_n: qtn,
            line_in: Some(line_in),
            line_out: Some(line_in),
            directions: Some(directions),
            z_targets: truncated,
            newton,
            polish_history: Vec::new(),
            closure: Some(closure),
            l2_distance: 0.0,
        });
    }

    let (mut qn, line_out) = redress(&qtn, theta, real, cfg).stage("redress")?;
    qn = symmetrize(qn, real).stage("redress")?;
    let mut polish_history = Vec::new();
    if cfg.polish {
        let (p, h) = polish_closure(&qn, theta, input.sign, &polish_modes(cfg, real), real, cfg).stage("polish")?;
        qn = symmetrize(p, real).stage("polish")?;
        polish_history = h;
    }
    let closure = closure_residual(&qn, theta, cfg).stage("verify")?;
    let l2_distance = l2_distance(q, &qn).stage("verify")?;
    Ok(PipelineOutcome {
        potential: qn,
        undressed: qt,
        undressed_n: qtn,
        line_in: Some(line_in),
        line_out: Some(line_out),
        directions: Some(directions),
        z_targets: truncated,
        newton,
        polish_history,
        closure: Some(closure),
        l2_distance,
    })
}

/// Closed finite-gap approximation of order `n` of a closed potential.
///
/// Undresses at `λ* = i + θ`, replaces the perturbed Fourier coefficients beyond `n` by zero with
/// Newton (the closing equations absorbed by two low modes), and dresses back.
pub fn finite_gap_approximate(q: &Potential, theta: f64, n: usize, cfg: &Config) -> Result<PipelineOutcome> {
    closed_pipeline(&q.clone().with_theta(theta), theta, n, false, cfg)
}

/// Real variant. `H2` runs the closed pipeline with real lines at `λ* = i`; `R2` and `S2` only
/// truncate the perturbed Fourier coefficients.
pub fn finite_gap_approximate_real(q: &Potential, form: RealForm, n: usize, cfg: &Config) -> Result<PipelineOutcome> {
    let defect = q.imag_defect();
    if defect > 1e-12 {
        return Err(Error::NotReal(defect)).stage("input");
    }
    let q = q.real_part().with_theta(0.0);
    if form == RealForm::H2 {
        return closed_pipeline(&q, 0.0, n, true, cfg);
    }
    let kmax = n + cfg.k_margin;
    let mut target = NewtonTarget::banded(cfg.fixed_modes, kmax, true, Vec::new(), None);
    let ks = target.target_indices();
    let all: Vec<i64> = ks.iter().flat_map(|&k| [k, -k]).collect();
    let samples = perturbed_coeffs(&q, &all, cfg).stage("spectral")?;
    let truncated: Vec<SpectralSample> = truncate_coeffs(&samples, n, true).into_iter().filter(|s| s.k > 0).collect();
    target = target.with_targets(&truncated).stage("spectral")?;
    let seeds: Vec<(i64, C64)> = samples.iter().filter(|s| s.k > 0).map(|s| (s.k, s.lambda_k)).collect();
    let start = q.resized(q.kmax().max(kmax));
    let newton = newton_close_seeded(&target, &start, &seeds, cfg).stage("newton")?;
    let qn = symmetrize(newton.potential.clone(), true).stage("newton")?;
    let l2_distance = l2_distance(&q, &qn).stage("verify")?;
    Ok(PipelineOutcome {
        potential: qn.clone(),
        undressed: q,
        undressed_n: qn,
        line_in: None,
        line_out: None,
        directions: None,
        z_targets: truncated,
        newton,
        polish_history: Vec::new(),
        closure: None,
        l2_distance,
    })
}

/// Closed potential near `q + dq` for a closed `q`: Gauss-Newton on `M(λ*) = s𝟙` over the
/// correction modes, started from `q + dq`. Modes outside `modes` keep their values; real inputs
/// with `θ = 0` stay real.
pub fn close_perturbation(q: &Potential, theta: f64, dq: &Potential, modes: &[i64], cfg: &Config) -> Result<Potential> {
    let q = q.clone().with_theta(theta);
    let input = closure_residual(&q, theta, cfg).stage("input")?;
    if input.m_residual > cfg.closure_tol {
        return Err(Error::InputNotClosed(input.m_residual)).stage("input");
    }
    let moved = q.add(dq, 1.0).stage("input")?;
    let real = theta == 0.0 && moved.imag_defect() == 0.0;
    let modes: Vec<i64> = modes.iter().copied().filter(|&k| !real || k >= 0).collect();
    let steps = Config { polish_max_iter: cfg.polish_max_iter.max(cfg.max_iter), ..cfg.clone() };
    let (qc, history) = polish_closure(&moved, theta, input.sign, &modes, real, &steps).stage("polish")?;
    let last = history.last().copied().unwrap_or(f64::INFINITY);
    if last > cfg.closure_tol {
        return Err(Error::NewtonMaxIter { iterations: history.len() - 1, residual: last }).stage("polish");
    }
    Ok(qc)
}
