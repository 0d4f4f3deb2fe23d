//! Step-size sequences for the adaptive solver and the freeze criterion.
//!
//! The schedule follows `alpha_j = alpha + gamma / (j+1)^r` indexed by a
//! dedicated decrease counter `j` (advanced once per decrease event, not per
//! iteration), with
//!
//! ```text
//!     rho(alpha_k)  = l_phi/2 + 3 sigma_A gamma / (2 (alpha_k - alpha)^2) + mu
//!     delta(alpha_k) = alpha / alpha_k
//! ```
//!
//! and constant `beta_k = beta0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecmath::norm;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepSchedule {
    /// Limit value of the alpha sequence.
    pub alpha: f64,
    pub gamma: f64,
    /// Exponent of the decrease, in (0, 1].
    #[serde(default = "default_r_exp")]
    pub r_exp: f64,
    /// Descent margin in the rho formula.
    pub mu: f64,
    /// Gradient Lipschitz constant of the smooth term.
    #[serde(default)]
    pub lip_phi: f64,
    /// Squared norm of the operator A (power-iteration estimate with safety factor).
    #[serde(default)]
    pub sigma_a: f64,
    /// Freeze threshold of the adaptive criterion.
    pub eps: f64,
    /// Constant dual step size for the y-update.
    pub beta0: f64,
}

fn default_r_exp() -> f64 {
    0.5
}

impl StepSchedule {
    /// Validates the parameter inequalities; errors name the violated one.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::Config("alpha > 0 violated".into()));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::Config("gamma > 0 violated".into()));
        }
        if !(self.alpha < self.gamma / 2.0) {
            return Err(Error::Config("alpha < gamma/2 violated".into()));
        }
        if !(self.r_exp > 0.0 && self.r_exp <= 1.0) {
            return Err(Error::Config("r_exp in (0, 1] violated".into()));
        }
        if !(self.mu > 0.0) {
            return Err(Error::Config("mu > 0 violated".into()));
        }
        if !(self.lip_phi >= 0.0) {
            return Err(Error::Config("lip_phi >= 0 violated".into()));
        }
        if !(self.sigma_a >= 0.0) {
            return Err(Error::Config("sigma_a >= 0 violated".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Config("eps > 0 violated".into()));
        }
        if !(self.beta0 > 0.0) {
            return Err(Error::Config("beta0 > 0 violated".into()));
        }
        Ok(())
    }

    /// `alpha + gamma / (j+1)^r`, strictly decreasing in `j` with limit `alpha`.
    /// At `j = 0` this is `alpha + gamma`.
    pub fn alpha_at(&self, j: usize) -> f64 {
        self.alpha + self.gamma / ((j + 1) as f64).powf(self.r_exp)
    }

    /// `l_phi/2 + 3 sigma_A gamma / (2 (alpha_k - alpha)^2) + mu`.
    pub fn rho_of(&self, alpha_k: f64) -> Result<f64> {
        if !(alpha_k > self.alpha) {
            return Err(Error::invalid(format!(
                "rho_of requires alpha_k > alpha ({} <= {})",
                alpha_k, self.alpha
            )));
        }
        let d = alpha_k - self.alpha;
        Ok(self.lip_phi / 2.0 + 3.0 * self.sigma_a * self.gamma / (2.0 * d * d) + self.mu)
    }

    /// `alpha / alpha_k`, in (0, 1] for alpha_k >= alpha.
    pub fn delta_of(&self, alpha_k: f64) -> f64 {
        debug_assert!(alpha_k > 0.0);
        self.alpha / alpha_k
    }

    /// Freeze criterion: step sizes keep decreasing while
    /// `(alpha_k - alpha) ||z_next|| > eps`.
    pub fn should_decrease(&self, alpha_k: f64, z_next: &[f64]) -> bool {
        (alpha_k - self.alpha) * norm(z_next) > self.eps
    }

    pub fn beta_at(&self, _k: usize) -> f64 {
        self.beta0
    }
}
