//! Noise predictors `eps(x_t, t, cond)`: the trained network plus closed-form
//! stand-ins used as oracles and degenerate fields.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::nd::ScoreNet;
use crate::schedule::NoiseSchedule;

/// Rows per parallel chunk in batched evaluation.
const CHUNK_ROWS: usize = 256;

pub trait NoisePredictor: Sync {
    fn dim(&self) -> usize;

    fn condition_dim(&self) -> usize {
        0
    }

    /// `xs` is `(n, dim)` row-major, all rows at time `t`; `conds` is `(n, condition_dim)`.
    fn predict_batch(&self, xs: &[f64], t: f64, conds: Option<&[f64]>) -> Result<Vec<f64>>;

    fn predict(&self, x: &[f64], t: f64, cond: Option<&[f64]>) -> Result<Vec<f64>> {
        ensure_dim("predictor input", self.dim(), x.len())?;
        self.predict_batch(x, t, cond)
    }
}

impl NoisePredictor for ScoreNet {
    fn dim(&self) -> usize {
        self.spec.input_dim
    }

    fn condition_dim(&self) -> usize {
        self.spec.condition_dim
    }

    fn predict_batch(&self, xs: &[f64], t: f64, conds: Option<&[f64]>) -> Result<Vec<f64>> {
        let d = self.spec.input_dim;
        let c = self.spec.condition_dim;
        if !xs.len().is_multiple_of(d) {
            return Err(Error::Shape {
                what: "batched predictor input",
                expected: d * (xs.len() / d + 1),
                got: xs.len(),
            });
        }
        let n = xs.len() / d;
        if n <= CHUNK_ROWS {
            return self.forward_batch(xs, &vec![t; n], conds);
        }
        let chunks: Vec<Result<Vec<f64>>> = xs
            .par_chunks(CHUNK_ROWS * d)
            .enumerate()
            .map(|(k, rows)| {
                let m = rows.len() / d;
                let cs = conds.map(|cs| &cs[k * CHUNK_ROWS * c..(k * CHUNK_ROWS + m) * c]);
                self.forward_batch(rows, &vec![t; m], cs)
            })
            .collect();
        let mut out = Vec::with_capacity(xs.len());
        for chunk in chunks {
            out.extend(chunk?);
        }
        Ok(out)
    }
}

/// Exact noise prediction for data distributed as `N(mean, var * I)` under `schedule`:
/// `eps = sigma_t (x - alpha_t mean) / (alpha_t^2 var + sigma_t^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianScore {
    pub mean: Vec<f64>,
    pub var: f64,
    pub schedule: NoiseSchedule,
}

impl GaussianScore {
    pub fn new(mean: Vec<f64>, var: f64, schedule: NoiseSchedule) -> Result<Self> {
        if !(var > 0.0 && var.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "variance must be positive, got {var}"
            )));
        }
        Ok(Self {
            mean,
            var,
            schedule,
        })
    }

    /// `grad log q_t(x)` for the Gaussian marginal.
    pub fn score(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        ensure_dim("gaussian score input", self.mean.len(), x.len())?;
        let e = self.schedule.eval(t)?;
        let v = e.alpha * e.alpha * self.var + e.sigma * e.sigma;
        Ok(x.iter()
            .zip(&self.mean)
            .map(|(xi, mi)| -(xi - e.alpha * mi) / v)
            .collect())
    }
}

impl NoisePredictor for GaussianScore {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn predict_batch(&self, xs: &[f64], t: f64, conds: Option<&[f64]>) -> Result<Vec<f64>> {
        if conds.is_some() {
            return Err(Error::Contract(
                "condition given to an unconditional model".into(),
            ));
        }
        let d = self.mean.len();
        if !xs.len().is_multiple_of(d) {
            return Err(Error::InvalidArgument(
                "batched input length not a multiple of dim".into(),
            ));
        }
        let e = self.schedule.eval(t)?;
        let v = e.alpha * e.alpha * self.var + e.sigma * e.sigma;
        Ok(xs
            .iter()
            .enumerate()
            .map(|(i, x)| e.sigma * (x - e.alpha * self.mean[i % d]) / v)
            .collect())
    }
}

/// The predictor that is identically zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZeroPredictor {
    pub dim: usize,
}

impl NoisePredictor for ZeroPredictor {
    fn dim(&self) -> usize {
        self.dim
    }

    fn predict_batch(&self, xs: &[f64], _t: f64, _conds: Option<&[f64]>) -> Result<Vec<f64>> {
        Ok(vec![0.0; xs.len()])
    }
}

/// Serializable choice of predictor carried by a model checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScoreModel {
    Net(ScoreNet),
    Gaussian(GaussianScore),
    Zero(ZeroPredictor),
}

impl NoisePredictor for ScoreModel {
    fn dim(&self) -> usize {
        match self {
            ScoreModel::Net(n) => n.dim(),
            ScoreModel::Gaussian(g) => g.dim(),
            ScoreModel::Zero(z) => z.dim(),
        }
    }

    fn condition_dim(&self) -> usize {
        match self {
            ScoreModel::Net(n) => n.condition_dim(),
            _ => 0,
        }
    }

    fn predict_batch(&self, xs: &[f64], t: f64, conds: Option<&[f64]>) -> Result<Vec<f64>> {
        match self {
            ScoreModel::Net(n) => n.predict_batch(xs, t, conds),
            ScoreModel::Gaussian(g) => g.predict_batch(xs, t, conds),
            ScoreModel::Zero(z) => z.predict_batch(xs, t, conds),
        }
    }
}
