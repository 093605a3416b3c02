//! Curves in H³ from potentials (Sym formula) and the inverse Frenet analysis.

use crate::error::{Error, Result};
use crate::frame::{cf4_step, Integrator, NODE1, NODE2};
use crate::potential::Potential;
use crate::sl2::{H3Point, Mat2, C64, I};

/// Uniformly sampled curve in H³ with optional velocity matrices.
#[derive(Clone, Debug)]
pub struct CurveSamples {
    times: Vec<f64>,
    points: Vec<H3Point>,
    velocities: Option<Vec<Mat2>>,
}

impl CurveSamples {
    pub fn new(times: Vec<f64>, points: Vec<H3Point>, velocities: Option<Vec<Mat2>>) -> Result<Self> {
        if times.len() != points.len() || velocities.as_ref().is_some_and(|v| v.len() != times.len()) {
            return Err(Error::InvalidInput("curve sample lengths differ".into()));
        }
        if times.len() < 2 {
            return Err(Error::InvalidInput("curve needs at least two samples".into()));
        }
        let dt = times[1] - times[0];
        let uniform = dt > 0.0
            && times.windows(2).all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * (1.0 + dt));
        if !uniform {
            return Err(Error::InvalidInput("curve times must be uniform and increasing".into()));
        }
        Ok(CurveSamples { times, points, velocities })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[H3Point] {
        &self.points
    }

    pub fn velocities(&self) -> Option<&[Mat2]> {
        self.velocities.as_deref()
    }

    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    /// Hyperbolic distance between the last and first sample.
    pub fn endpoint_gap(&self) -> f64 {
        self.points[self.len() - 1].distance(&self.points[0])
    }

    /// `max_j |d(γ_j, γ_{j+1})/Δt − 1|`; chords undershoot arcs by `O(κ²Δt²)`.
    pub fn speed_defect(&self) -> f64 {
        let dt = self.dt();
        self.points
            .windows(2)
            .map(|w| (w[0].distance(&w[1]) / dt - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `max_j |⟨γ′, γ′⟩ − 1|` from the stored velocities.
    pub fn velocity_defect(&self) -> Option<f64> {
        self.velocities.as_ref().map(|vs| {
            vs.iter().map(|v| (-v.det().re - 1.0).abs()).fold(0.0, f64::max)
        })
    }
}

/// Curve `γ = F(t, i+θ) F(t, i+θ)*` on `n_samples` uniform points of `[0, T]`, endpoints included.
pub fn sym_reconstruct(q: &Potential, theta: f64, n_samples: usize, n_steps: usize) -> Result<CurveSamples> {
    sym_reconstruct_from(q, theta, n_samples, n_steps, Mat2::IDENTITY)
}

/// As [`sym_reconstruct`] with initial frame `F(0) = g`.
pub fn sym_reconstruct_from(
    q: &Potential,
    theta: f64,
    n_samples: usize,
    n_steps: usize,
    g: Mat2,
) -> Result<CurveSamples> {
    if n_samples < 8 {
        return Err(Error::InvalidInput(format!("need at least 8 samples, got {n_samples}")));
    }
    if n_steps < 8 {
        return Err(Error::TooFewSteps(n_steps));
    }
    let period = q.period();
    let lambda = C64::new(theta, 1.0);
    let dt = period / (n_samples - 1) as f64;
    let h_max = period / n_steps as f64;
    let sub = (dt / h_max).ceil().max(1.0) as usize;
    let h = dt / sub as f64;
    let i_eps = Mat2::diag((-1.0).into(), 1.0.into());
    let mut f = g;
    let mut times = Vec::with_capacity(n_samples);
    let mut points = Vec::with_capacity(n_samples);
    let mut vels = Vec::with_capacity(n_samples);
    for j in 0..n_samples {
        let t0 = j as f64 * dt;
        if j > 0 {
            let start = (j - 1) as f64 * dt;
            for s in 0..sub {
                let ts = start + s as f64 * h;
                let q1 = q.evaluate(ts + NODE1 * h);
                let q2 = q.evaluate(ts + NODE2 * h);
                f = f * cf4_step(q1, q2, lambda, h);
            }
            if !f.is_finite() {
                return Err(Error::IntegrationOverflow(lambda));
            }
        }
        let fh = f.adjoint();
        let x = f * fh;
        let x = (x + x.adjoint()) * 0.5;
        times.push(t0);
        points.push(H3Point::new(x, 1e-8)?);
        vels.push(f * i_eps * fh);
    }
    CurveSamples::new(times, points, Some(vels))
}

/// `min_s max(‖M(i+θ) − s𝟙‖, ‖M(−i+θ) − s𝟙‖)` with `M(−i+θ) = (M(i+θ)*)⁻¹`.
pub fn curve_closure_gap(q: &Potential, theta: f64, n_steps: usize) -> Result<f64> {
    let m = Integrator::new(q, n_steps)?.monodromy(C64::new(theta, 1.0))?;
    let other = m.adjoint().adjugate();
    let gap = |s: f64| {
        let id = Mat2::scalar(s.into());
        (m - id).norm().max((other - id).norm())
    };
    Ok(gap(1.0).min(gap(-1.0)))
}

/// Fornberg finite-difference weights for derivatives `0..=m` at `x0` on `nodes`.
fn fornberg(x0: f64, nodes: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

fn minkowski(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    -a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

#[allow(clippy::needless_range_loop)]
fn det4(m: [[f64; 4]; 4]) -> f64 {
    let mut a = m;
    let mut det = 1.0;
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        if a[piv][col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            a.swap(piv, col);
            det = -det;
        }
        det *= a[col][col];
        for r in col + 1..4 {
            let f = a[r][col] / a[col][col];
            for k in col..4 {
                a[r][k] -= f * a[col][k];
            }
        }
    }
    det
}

/// Orientation making `q = κ e^{i∫τ}` consistent with the frame `F` of the Sym formula.
const TORSION_SIGN: f64 = 1.0;

/// Geodesic curvature and torsion at every sample.
///
/// Closed curves (endpoint gap ≤ 1e−6) are differentiated periodically; open
/// curves use one-sided stencils near the ends.
pub fn frenet_data(curve: &CurveSamples) -> Result<(Vec<f64>, Vec<f64>)> {
    const HALF: usize = 3;
    let len = curve.len();
    if len < 2 * HALF + 2 {
        return Err(Error::InvalidInput(format!("need at least {} samples", 2 * HALF + 2)));
    }
    let dt = curve.dt();
    let xs: Vec<[f64; 4]> = curve.points().iter().map(H3Point::hyperboloid).collect();
    let periodic = curve.endpoint_gap() <= 1e-6;
    let n = if periodic { len - 1 } else { len };
    let offsets: Vec<f64> = (0..=2 * HALF).map(|i| i as f64).collect();
    let mut kappa = Vec::with_capacity(len);
    let mut tau = Vec::with_capacity(len);
    for j in 0..len {
        let (start, x0) = if periodic {
            (j as i64 - HALF as i64, HALF as f64)
        } else {
            let s = (j as i64 - HALF as i64).clamp(0, (len - 1 - 2 * HALF) as i64);
            (s, (j as i64 - s) as f64)
        };
        let w = fornberg(x0, &offsets, 3);
        let mut d = [[0.0f64; 4]; 4];
        for (i, _) in offsets.iter().enumerate() {
            let idx = (start + i as i64).rem_euclid(n as i64) as usize;
            let x = &xs[idx];
            for order in 1..=3 {
                let scale = w[order][i] / dt.powi(order as i32);
                for c in 0..4 {
                    d[order][c] += scale * x[c];
                }
            }
        }
        d[0] = xs[j % n];
        let x = d[0];
        let v = d[1];
        let s2 = minkowski(&v, &v);
        if !(s2 > 0.0) {
            return Err(Error::DegenerateCurve(format!("non-spacelike velocity at sample {j}")));
        }
        // Covariant acceleration: tangent-space projection of x'' minus its velocity component.
        let mut acc = d[2];
        let ax = minkowski(&acc, &x);
        for c in 0..4 {
            acc[c] += ax * x[c];
        }
        let av = minkowski(&acc, &v) / s2;
        for c in 0..4 {
            acc[c] -= av * v[c];
        }
        let k = minkowski(&acc, &acc).max(0.0).sqrt() / s2;
        if k < 1e-6 {
            return Err(Error::DegenerateCurve(format!("curvature vanishes at t = {}", curve.times()[j])));
        }
        let vol = det4([x, v, d[2], d[3]]);
        kappa.push(k);
        tau.push(TORSION_SIGN * vol / (k * k * s2.powi(3)));
    }
    Ok((kappa, tau))
}

/// Velocity `γ′ = i F ε F*` at `t = 0` for the identity initial frame.
pub fn initial_velocity() -> Mat2 {
    Mat2::eps() * I
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_central_first_derivative() {
        let nodes = [-1.0, 0.0, 1.0];
        let w = fornberg(0.0, &nodes, 2);
        assert!((w[1][0] + 0.5).abs() < 1e-15 && (w[1][2] - 0.5).abs() < 1e-15);
        assert!((w[2][0] - 1.0).abs() < 1e-15 && (w[2][1] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn det4_of_permutation() {
        let m = [[0.0, 1.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 2.0, 0.0], [0.0, 0.0, 0.0, 3.0]];
        assert!((det4(m) + 6.0).abs() < 1e-15);
    }
}
