//! Simple-factor dressing `g_{λ*,L}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::FrameResult;
use crate::potential::Potential;
use crate::sl2::{hermitian_projection, CPLine, Mat2, C64, I};

/// `g(λ) = s[(1 − λ*/λ)π_L + (1 − λ̄*/λ)π_{L⊥}]`, `s = ((1 − λ*/λ)(1 − λ̄*/λ))^{−1/2}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimpleFactor {
    lambda_star: C64,
    line: CPLine,
}

impl SimpleFactor {
    pub fn new(lambda_star: C64, line: CPLine) -> Result<Self> {
        if lambda_star.im.abs() <= 1e-14 * (1.0 + lambda_star.norm()) || !lambda_star.is_finite() {
            return Err(Error::RealPole(lambda_star));
        }
        Ok(SimpleFactor { lambda_star, line })
    }

    pub fn lambda_star(&self) -> C64 {
        self.lambda_star
    }

    pub fn line(&self) -> CPLine {
        self.line
    }

    /// The factor `(λ*, L⊥)`, which is the pointwise inverse.
    pub fn inverse(&self) -> SimpleFactor {
        SimpleFactor { lambda_star: self.lambda_star, line: self.line.perp() }
    }

    fn weights(&self, lambda: C64) -> Result<(C64, C64)> {
        let tiny = 1e-14 * (1.0 + self.lambda_star.norm());
        if lambda.norm() <= tiny {
            return Err(Error::Pole(lambda));
        }
        if (lambda - self.lambda_star).norm() <= tiny || (lambda - self.lambda_star.conj()).norm() <= tiny {
            return Err(Error::Pole(lambda));
        }
        Ok((1.0 - self.lambda_star / lambda, 1.0 - self.lambda_star.conj() / lambda))
    }

    pub fn eval(&self, lambda: C64) -> Result<Mat2> {
        let (a, b) = self.weights(lambda)?;
        let s = (a * b).sqrt().inv();
        let p = hermitian_projection(&self.line);
        let pp = Mat2::IDENTITY - p;
        Ok((p.scale(a) + pp.scale(b)).scale(s))
    }

    /// Values along a λ-path with the scalar branch kept continuous.
    pub fn eval_path(&self, lambdas: &[C64]) -> Result<Vec<Mat2>> {
        let mut out = Vec::with_capacity(lambdas.len());
        let mut prev: Option<C64> = None;
        for &l in lambdas {
            let (a, b) = self.weights(l)?;
            let mut s = (a * b).sqrt().inv();
            if let Some(p) = prev {
                if (s - p).norm() > (s + p).norm() {
                    s = -s;
                }
            }
            prev = Some(s);
            let p = hermitian_projection(&self.line);
            out.push((p.scale(a) + (Mat2::IDENTITY - p).scale(b)).scale(s));
        }
        Ok(out)
    }
}

pub fn simple_factor_eval(sf: &SimpleFactor, lambda: C64) -> Result<Mat2> {
    sf.eval(lambda)
}

pub fn invert_factor(sf: &SimpleFactor) -> SimpleFactor {
    sf.inverse()
}

/// `‖π_{L⊥} M v‖ / ‖M‖` for the unit representative `v` of `L`.
pub fn eigenline_defect(m: &Mat2, line: &CPLine) -> f64 {
    let v = line.vector();
    let mv = m.apply(v);
    let along = v[0].conj() * mv[0] + v[1].conj() * mv[1];
    let r = [mv[0] - along * v[0], mv[1] - along * v[1]];
    (r[0].norm_sqr() + r[1].norm_sqr()).sqrt() / m.norm().max(f64::MIN_POSITIVE)
}

/// Result of dressing a potential.
#[derive(Clone, Debug)]
pub struct DressedPotential {
    pub potential: Potential,
    /// Grid times `t_j` (one period, endpoint excluded) and the added term `c(t_j)`.
    pub times: Vec<f64>,
    pub c_samples: Vec<C64>,
    /// `|c(T) − c(0)|`, zero when `L` is an eigenline of `M(λ*)`.
    pub periodicity_defect: f64,
    pub warning: Option<String>,
}

/// `q + c` with `c` the upper-right entry of `2i(λ* − λ̄*)π_{L′}`, `L′ = F(t, λ*)⁻¹L`.
///
/// The result keeps `kmax_out` modes (capped by the frame grid).
pub fn dress_potential(
    q: &Potential,
    sf: &SimpleFactor,
    frame_at_star: &FrameResult,
    kmax_out: usize,
    periodicity_tol: f64,
) -> Result<DressedPotential> {
    let ls = sf.lambda_star();
    if (frame_at_star.lambda - ls).norm() > 1e-12 * (1.0 + ls.norm()) {
        return Err(Error::FrameMismatch { expected: ls, found: frame_at_star.lambda });
    }
    let scale = I * (ls - ls.conj()) * 2.0;
    let v = sf.line().vector();
    let c_of = |f: &Mat2| -> C64 {
        let u = f.adjugate().apply(v);
        let n2 = u[0].norm_sqr() + u[1].norm_sqr();
        scale * u[0] * u[1].conj() / n2
    };
    let n = frame_at_star.frames.len() - 1;
    let c: Vec<C64> = frame_at_star.frames[..n].iter().map(c_of).collect();
    let c_end = c_of(&frame_at_star.frames[n]);
    let periodicity_defect = (c_end - c[0]).norm();
    let warning = (periodicity_defect > periodicity_tol).then(|| {
        format!("line is not an eigenline of M(lambda*): dressed potential is not periodic (defect {periodicity_defect:.3e})")
    });
    let kmax = kmax_out.max(q.kmax()).min((n - 1) / 2);
    let added = Potential::from_samples(&c, q.period(), q.theta(), kmax)?;
    let potential = q.add(&added, 1.0)?;
    Ok(DressedPotential {
        potential,
        times: frame_at_star.times[..n].to_vec(),
        c_samples: c,
        periodicity_defect,
        warning,
    })
}

/// `g(λ) M g(λ)⁻¹`, optionally checking that `L` is an eigenline of `M(λ*)`.
pub fn dressed_monodromy(m: &Mat2, sf: &SimpleFactor, lambda: C64, eigen_check: Option<(&Mat2, f64)>) -> Result<Mat2> {
    if let Some((m_star, tol)) = eigen_check {
        let d = eigenline_defect(m_star, &sf.line());
        if d > tol {
            return Err(Error::NotEigenline(d));
        }
    }
    let g = sf.eval(lambda)?;
    let gi = sf.inverse().eval(lambda)?;
    Ok(g * *m * gi)
}

/// Dressed frame `g_L(λ) F(t, λ) g_{L′(t)}(λ)⁻¹`.
pub fn dressed_frame(f: &Mat2, f_star: &Mat2, sf: &SimpleFactor, lambda: C64) -> Result<Mat2> {
    let moved = CPLine::from_vec(f_star.adjugate().apply(sf.line().vector()))?;
    let inner = SimpleFactor::new(sf.lambda_star(), moved)?.inverse();
    Ok(sf.eval(lambda)? * *f * inner.eval(lambda)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_at_two() {
        let sf = SimpleFactor::new(I, CPLine::real(1.0, 0.0).unwrap()).unwrap();
        let g = sf.eval(C64::from(2.0)).unwrap();
        let s5 = 5f64.sqrt();
        let want = Mat2::diag(C64::new(2.0, -1.0) / s5, C64::new(2.0, 1.0) / s5);
        assert!((g - want).max_abs() < 1e-15, "{g}");
    }

    #[test]
    fn inverse_lines() {
        let sf = SimpleFactor::new(I, CPLine::real(1.0, 1.0).unwrap()).unwrap();
        assert_eq!(sf.inverse().line(), CPLine::real(1.0, -1.0).unwrap());
        assert_eq!(sf.inverse().inverse().line(), sf.line());
        let sf = SimpleFactor::new(I, CPLine::real(1.0, 0.0).unwrap()).unwrap();
        assert_eq!(invert_factor(&sf).line(), CPLine::real(0.0, 1.0).unwrap());
    }

    #[test]
    fn poles_and_real_pole() {
        let sf = SimpleFactor::new(I, CPLine::real(1.0, 0.0).unwrap()).unwrap();
        assert!(matches!(sf.eval(C64::default()), Err(Error::Pole(_))));
        assert!(matches!(sf.eval(I), Err(Error::Pole(_))));
        assert!(matches!(sf.eval(-I), Err(Error::Pole(_))));
        assert!(matches!(SimpleFactor::new(C64::from(0.5), CPLine::real(1.0, 0.0).unwrap()), Err(Error::RealPole(_))));
    }

    #[test]
    fn normalized_at_infinity() {
        let sf = SimpleFactor::new(C64::new(0.3, 1.2), CPLine::new(C64::new(1.0, 0.5), C64::new(-0.2, 2.0)).unwrap()).unwrap();
        let g = sf.eval(C64::from(1e8)).unwrap();
        assert!((g - Mat2::IDENTITY).max_abs() < 1e-7);
    }
}
