//! Variance-preserving noise schedule with linear `beta(t)`.
//!
//! The forward SDE is `dx = -1/2 beta(t) x dt + sqrt(beta(t)) dw`, so the transition
//! kernel is `N(alpha_t x0, sigma_t^2 I)` with
//! `alpha_t = exp(-1/2 int_0^t beta)` and `sigma_t^2 = 1 - alpha_t^2`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    #[default]
    Vp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSchedule {
    pub beta_min: f64,
    pub beta_max: f64,
    #[serde(default)]
    pub kind: ScheduleKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleEval {
    pub alpha: f64,
    pub sigma: f64,
    /// Linear drift coefficient: `f(x, t) = f_scale * x`.
    pub f_scale: f64,
    pub g: f64,
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self {
            beta_min: 0.1,
            beta_max: 20.0,
            kind: ScheduleKind::Vp,
        }
    }
}

impl NoiseSchedule {
    pub fn vp(beta_min: f64, beta_max: f64) -> Result<Self> {
        let s = Self {
            beta_min,
            beta_max,
            kind: ScheduleKind::Vp,
        };
        s.validate()?;
        Ok(s)
    }

    /// `beta == 0`: no drift, no noise. Only useful for degenerate test fields.
    pub fn frozen() -> Self {
        Self {
            beta_min: 0.0,
            beta_max: 0.0,
            kind: ScheduleKind::Vp,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |b: f64| b.is_finite() && b >= 0.0;
        if ok(self.beta_min) && ok(self.beta_max) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "beta range [{}, {}] must be finite and non-negative",
                self.beta_min, self.beta_max
            )))
        }
    }

    fn check_time(t: f64) -> Result<()> {
        if (0.0..=1.0).contains(&t) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("time {t} outside [0, 1]")))
        }
    }

    pub fn beta(&self, t: f64) -> f64 {
        self.beta_min + t * (self.beta_max - self.beta_min)
    }

    /// `int_0^t beta(s) ds` in closed form.
    pub fn integrated_beta(&self, t: f64) -> f64 {
        self.beta_min * t + 0.5 * (self.beta_max - self.beta_min) * t * t
    }

    pub fn eval(&self, t: f64) -> Result<ScheduleEval> {
        Self::check_time(t)?;
        Ok(self.eval_unchecked(t))
    }

    pub(crate) fn eval_unchecked(&self, t: f64) -> ScheduleEval {
        let b = self.integrated_beta(t);
        let beta = self.beta(t);
        ScheduleEval {
            alpha: (-0.5 * b).exp(),
            // 1 - exp(-b) without cancellation for small t
            sigma: (-(-b).exp_m1()).sqrt(),
            f_scale: -0.5 * beta,
            g: beta.sqrt(),
        }
    }

    pub fn alpha(&self, t: f64) -> Result<f64> {
        Ok(self.eval(t)?.alpha)
    }

    pub fn sigma(&self, t: f64) -> Result<f64> {
        Ok(self.eval(t)?.sigma)
    }

    /// `x_t = alpha_t x0 + sigma_t x1`.
    pub fn perturb(&self, x0: &[f64], x1: &[f64], t: f64) -> Result<Vec<f64>> {
        ensure_dim("perturb", x0.len(), x1.len())?;
        let e = self.eval(t)?;
        Ok(x0
            .iter()
            .zip(x1)
            .map(|(a, b)| e.alpha * a + e.sigma * b)
            .collect())
    }
}
