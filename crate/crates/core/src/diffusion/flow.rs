//! Probability-flow drift `v(x, t) = f(x, t) - 1/2 g(t)^2 s(x, t)` with the score
//! recovered from the noise predictor as `s = -eps / sigma_t`.

use super::ode::{ode_solve, ode_solve_batch, Direction, OdeConfig, Trajectory, VectorField};
use super::predictor::NoisePredictor;
use crate::error::{ensure_dim, Error, Result};
use crate::schedule::NoiseSchedule;

pub const DEFAULT_T_MIN: f64 = 1e-4;

pub struct ProbabilityFlow<'a, M: NoisePredictor + ?Sized> {
    pub model: &'a M,
    pub schedule: NoiseSchedule,
    pub t_min: f64,
    /// Per-row conditions `(n, condition_dim)` for conditional predictors.
    pub conds: Option<&'a [f64]>,
}

impl<'a, M: NoisePredictor + ?Sized> ProbabilityFlow<'a, M> {
    pub fn new(model: &'a M, schedule: NoiseSchedule) -> Self {
        Self {
            model,
            schedule,
            t_min: DEFAULT_T_MIN,
            conds: None,
        }
    }

    pub fn with_t_min(mut self, t_min: f64) -> Self {
        self.t_min = t_min;
        self
    }

    pub fn with_conds(mut self, conds: Option<&'a [f64]>) -> Self {
        self.conds = conds;
        self
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t < self.t_min || t > 1.0 || t.is_nan() {
            Err(Error::InvalidArgument(format!(
                "drift evaluated at t = {t}, outside [{}, 1]",
                self.t_min
            )))
        } else {
            Ok(())
        }
    }
}

impl<M: NoisePredictor + ?Sized> VectorField for ProbabilityFlow<'_, M> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn eval_batch(&self, xs: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        self.check_time(t)?;
        let e = self.schedule.eval(t)?;
        let eps = self.model.predict_batch(xs, t, self.conds)?;
        let coef = if e.g == 0.0 {
            0.0
        } else {
            0.5 * e.g * e.g / e.sigma
        };
        for ((o, x), n) in out.iter_mut().zip(xs).zip(&eps) {
            *o = e.f_scale * x + coef * n;
        }
        Ok(())
    }
}

/// Drift of the probability-flow ODE at a single point.
pub fn drift<M: NoisePredictor + ?Sized>(
    model: &M,
    schedule: &NoiseSchedule,
    x: &[f64],
    t: f64,
    t_min: f64,
) -> Result<Vec<f64>> {
    ensure_dim("drift input", model.dim(), x.len())?;
    let flow = ProbabilityFlow::new(model, *schedule).with_t_min(t_min);
    let mut out = vec![0.0; x.len()];
    flow.eval_batch(x, t, &mut out)?;
    Ok(out)
}

/// Tweedie-style jump `(x_t - sigma_t eps) / alpha_t` to the clean-data estimate.
pub fn posterior_mean<M: NoisePredictor + ?Sized>(
    model: &M,
    schedule: &NoiseSchedule,
    xs: &[f64],
    t: f64,
    conds: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let e = schedule.eval(t)?;
    let eps = model.predict_batch(xs, t, conds)?;
    Ok(xs
        .iter()
        .zip(&eps)
        .map(|(x, n)| (x - e.sigma * n) / e.alpha)
        .collect())
}

fn finish<M: NoisePredictor + ?Sized>(
    model: &M,
    schedule: &NoiseSchedule,
    x: Vec<f64>,
    cfg: &OdeConfig,
    conds: Option<&[f64]>,
) -> Result<Vec<f64>> {
    if cfg.denoise_final && cfg.direction == Direction::Reverse {
        posterior_mean(model, schedule, &x, cfg.t_min.max(f64::MIN_POSITIVE), conds)
    } else {
        Ok(x)
    }
}

/// Probability-flow solve of a batch `(n, dim)` under `model`.
pub fn flow_solve_batch<M: NoisePredictor + ?Sized>(
    model: &M,
    schedule: &NoiseSchedule,
    xs: &[f64],
    cfg: &OdeConfig,
    conds: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let flow = ProbabilityFlow::new(model, *schedule)
        .with_t_min(cfg.t_min)
        .with_conds(conds);
    let x = ode_solve_batch(&flow, xs, cfg)?;
    finish(model, schedule, x, cfg, conds)
}

/// Probability-flow solve of one point, with its trajectory.
pub fn flow_solve<M: NoisePredictor + ?Sized>(
    model: &M,
    schedule: &NoiseSchedule,
    x: &[f64],
    cfg: &OdeConfig,
    cond: Option<&[f64]>,
) -> Result<(Vec<f64>, Trajectory)> {
    let flow = ProbabilityFlow::new(model, *schedule)
        .with_t_min(cfg.t_min)
        .with_conds(cond);
    let (end, traj) = ode_solve(&flow, x, cfg)?;
    Ok((finish(model, schedule, end, cfg, cond)?, traj))
}

/// Forward solve followed by a reverse solve with the same grid; returns the reconstruction.
pub fn cycle<M: NoisePredictor + ?Sized>(
    model: &M,
    schedule: &NoiseSchedule,
    xs: &[f64],
    cfg: &OdeConfig,
) -> Result<Vec<f64>> {
    let cfg = OdeConfig {
        denoise_final: false,
        ..*cfg
    };
    let latent = flow_solve_batch(model, schedule, xs, &cfg.forward(), None)?;
    flow_solve_batch(model, schedule, &latent, &cfg.reverse(), None)
}
