//! Numerical settings shared by all stages, loadable from JSON.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SignPolicy {
    /// Closest of ±2 to the input discriminant.
    #[default]
    Nearest,
    Plus,
    Minus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Integration steps per period.
    pub n_steps: usize,
    /// Relative λ-stencil step for discriminant derivatives.
    pub lambda_stencil_h: f64,
    /// Half-width of the root search window; `None` means π/T.
    pub root_window: Option<f64>,
    pub root_tol: f64,
    pub root_max_iter: usize,
    /// Homotopy steps for λ_k continuation from the vacuum.
    pub continuation_steps: usize,
    pub contour_radius: f64,
    pub contour_nodes: usize,
    /// Relative threshold below which a Taylor coefficient counts as zero.
    pub order_rel_tol: f64,
    /// Relative singularity threshold for the nilpotent branch of the Baker-Akhiezer line.
    pub nilpotent_tol: f64,
    pub eigen_tol: f64,
    pub closure_tol: f64,
    /// Truncation order of the pipeline.
    pub n: usize,
    #[serde(rename = "K_margin")]
    pub k_margin: usize,
    pub newton_tol: f64,
    pub max_iter: usize,
    pub sign_policy: SignPolicy,
    /// Modes |k| ≤ N kept fixed by Newton.
    pub fixed_modes: usize,
    /// Largest |k| searched by direction selection.
    pub direction_max_mode: usize,
    pub direction_threshold: f64,
    /// Forward-difference step for Newton Jacobians.
    pub fd_step: f64,
    /// Mode count of dressed potentials.
    pub dress_modes: usize,
    /// Final Gauss-Newton polish of M(λ*) = ±𝟙 after re-dressing.
    pub polish: bool,
    pub polish_max_iter: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            n_steps: 2048,
            lambda_stencil_h: 1e-4,
            root_window: None,
            root_tol: 1e-12,
            root_max_iter: 40,
            continuation_steps: 8,
            contour_radius: 1e-2,
            contour_nodes: 64,
            order_rel_tol: 1e-4,
            nilpotent_tol: 1e-6,
            eigen_tol: 1e-8,
            closure_tol: 1e-7,
            n: 4,
            k_margin: 8,
            newton_tol: 1e-10,
            max_iter: 20,
            sign_policy: SignPolicy::Nearest,
            fixed_modes: 0,
            direction_max_mode: 6,
            direction_threshold: 1e-6,
            fd_step: 1e-7,
            dress_modes: 48,
            polish: true,
            polish_max_iter: 8,
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config =
            serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("config: {m}")));
        if self.n_steps < 8 {
            return bad("n_steps must be at least 8");
        }
        if !(self.lambda_stencil_h > 0.0) {
            return bad("lambda_stencil_h must be positive");
        }
        if !(self.contour_radius > 0.0) || self.contour_nodes < 8 {
            return bad("contour needs positive radius and at least 8 nodes");
        }
        if !(self.newton_tol > 0.0) || !(self.closure_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.fd_step > 0.0) {
            return bad("fd_step must be positive");
        }
        Ok(())
    }
}
