//! Denoising score matching against an arbitrary coupling of `(x0, x1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nd::{adam_step, AdamConfig, AdamState, Rng, ScoreNet, StepOutcome};
use crate::schedule::NoiseSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Paired,
    Unpaired,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledDraw {
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
    pub provenance: Provenance,
    pub label: Option<usize>,
}

/// A source of `(x0, x1)` endpoint pairs.
pub trait CouplingSampler {
    fn dim(&self) -> usize;

    /// Number of stored entries; zero means the sampler cannot produce draws.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn sample(&self, rng: &mut Rng) -> CoupledDraw;
}

/// Loss weighting `omega(t)` applied to the score-space residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// `omega = sigma_t^2`: the plain noise-prediction MSE.
    #[default]
    SigmaSquared,
    /// `omega = 1`: residual `|eps - x1|^2 / sigma_t^2`.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrDecay {
    Constant,
    #[default]
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub weighting: Weighting,
    pub t_min: f64,
    pub adam: AdamConfig,
    pub lr_decay: LrDecay,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            batch_size: 128,
            weighting: Weighting::SigmaSquared,
            t_min: 1e-4,
            adam: AdamConfig::default(),
            lr_decay: LrDecay::Cosine,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be positive".into()));
        }
        if !(self.t_min > 0.0 && self.t_min < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "t_min must lie in (0, 1), got {}",
                self.t_min
            )));
        }
        self.adam.validate()
    }

    pub fn lr_at(&self, step: usize) -> f64 {
        match self.lr_decay {
            LrDecay::Constant => self.adam.lr,
            LrDecay::Cosine => {
                let frac = step as f64 / self.steps.max(1) as f64;
                0.5 * self.adam.lr * (1.0 + (std::f64::consts::PI * frac).cos())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    /// Mean batch loss per optimizer step.
    pub losses: Vec<f64>,
    pub skipped_steps: usize,
}

impl TrainReport {
    /// Mean of the first and last `window` losses.
    pub fn head_tail_means(&self, window: usize) -> (f64, f64) {
        let n = self.losses.len();
        let w = window.min(n).max(1);
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len().max(1) as f64;
        (
            mean(&self.losses[..w.min(n)]),
            mean(&self.losses[n.saturating_sub(w)..]),
        )
    }
}

pub(crate) fn one_hot(label: usize, width: usize, out: &mut [f64]) -> Result<()> {
    if label >= width {
        return Err(Error::InvalidArgument(format!(
            "class {label} out of range for {width} classes"
        )));
    }
    out.fill(0.0);
    out[label] = 1.0;
    Ok(())
}

/// Trains `net` as a noise predictor: minimizes
/// `E[w(t) |eps(alpha_t x0 + sigma_t x1, t) - x1|^2]` with `t ~ U(t_min, 1)` and
/// `(x0, x1)` drawn from `sampler`.
pub fn dsm_train<S: CouplingSampler + ?Sized>(
    net: &mut ScoreNet,
    schedule: &NoiseSchedule,
    sampler: &S,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if sampler.is_empty() {
        return Err(Error::InvalidArgument("coupling sampler is empty".into()));
    }
    let d = sampler.dim();
    if net.spec.input_dim != d || net.spec.output_dim != d {
        return Err(Error::Shape {
            what: "score network width vs data dimension",
            expected: d,
            got: net.spec.input_dim,
        });
    }
    let c = net.spec.condition_dim;
    let root = Rng::new(cfg.seed);
    let mut pair_rng = root.fork("coupling");
    let mut time_rng = root.fork("time");

    let b = cfg.batch_size;
    let mut xs = vec![0.0; b * d];
    let mut targets = vec![0.0; b * d];
    let mut ts = vec![0.0; b];
    let mut weights = vec![0.0; b];
    let mut conds = vec![0.0; b * c];
    let mut upstream = vec![0.0; b * d];
    let mut grad = net.params.zeros_like();
    let mut state = AdamState::new(net.params.len());
    let mut report = TrainReport::default();

    for step in 0..cfg.steps {
        for i in 0..b {
            let draw = sampler.sample(&mut pair_rng);
            let t = time_rng.uniform_range(cfg.t_min, 1.0);
            let e = schedule.eval(t)?;
            for k in 0..d {
                xs[i * d + k] = e.alpha * draw.x0[k] + e.sigma * draw.x1[k];
            }
            targets[i * d..(i + 1) * d].copy_from_slice(&draw.x1);
            ts[i] = t;
            weights[i] = match cfg.weighting {
                Weighting::SigmaSquared => 1.0,
                Weighting::Uniform => 1.0 / (e.sigma * e.sigma),
            };
            if c > 0 {
                let label = draw.label.ok_or_else(|| {
                    Error::Contract("conditional network trained on an unlabeled draw".into())
                })?;
                one_hot(label, c, &mut conds[i * c..(i + 1) * c])?;
            }
        }
        let cache = net.forward_train(&xs, &ts, (c > 0).then_some(conds.as_slice()))?;
        let mut loss = 0.0;
        for i in 0..b {
            let mut sq = 0.0;
            for k in 0..d {
                let r = cache.output[i * d + k] - targets[i * d + k];
                sq += r * r;
                upstream[i * d + k] = 2.0 * weights[i] * r / b as f64;
            }
            loss += weights[i] * sq;
        }
        loss /= b as f64;
        if !loss.is_finite() {
            return Err(Error::Training {
                step,
                reason: format!("loss became {loss}"),
            });
        }
        grad.values.fill(0.0);
        net.backward_batch(&cache, &upstream, &mut grad)?;
        match adam_step(
            &mut net.params,
            &grad,
            &mut state,
            &cfg.adam,
            cfg.lr_at(step),
        )? {
            StepOutcome::Applied => {}
            StepOutcome::SkippedNonFinite => report.skipped_steps += 1,
        }
        if !net.params.is_finite() {
            return Err(Error::Training {
                step,
                reason: "parameters became non-finite".into(),
            });
        }
        report.losses.push(loss);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nd::MlpSpec;

    struct Fixed {
        x0: Vec<f64>,
    }

    impl CouplingSampler for Fixed {
        fn dim(&self) -> usize {
            self.x0.len()
        }
        fn len(&self) -> usize {
            1
        }
        fn sample(&self, rng: &mut Rng) -> CoupledDraw {
            CoupledDraw {
                x0: self.x0.clone(),
                x1: rng.normal_vec(self.x0.len()),
                provenance: Provenance::Unpaired,
                label: None,
            }
        }
    }

    struct Empty;

    impl CouplingSampler for Empty {
        fn dim(&self) -> usize {
            2
        }
        fn len(&self) -> usize {
            0
        }
        fn sample(&self, _rng: &mut Rng) -> CoupledDraw {
            unreachable!()
        }
    }

    fn small_net(seed: u64) -> ScoreNet {
        let spec = MlpSpec {
            hidden_dims: vec![16, 16],
            ..MlpSpec::for_dim(2)
        };
        ScoreNet::new(spec, &mut Rng::new(seed))
            .unwrap()
            .with_zero_output()
    }

    #[test]
    fn empty_sampler_rejected() {
        let mut net = small_net(0);
        let r = dsm_train(
            &mut net,
            &NoiseSchedule::default(),
            &Empty,
            &TrainConfig::default(),
        );
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn seeded_training_is_reproducible_and_decreases_loss() {
        let cfg = TrainConfig {
            steps: 300,
            batch_size: 32,
            ..TrainConfig::default()
        };
        let s = NoiseSchedule::default();
        let data = Fixed {
            x0: vec![1.0, -1.0],
        };
        let mut a = small_net(1);
        let mut b = small_net(1);
        let ra = dsm_train(&mut a, &s, &data, &cfg).unwrap();
        let rb = dsm_train(&mut b, &s, &data, &cfg).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(a, b);
        let (head, tail) = ra.head_tail_means(50);
        assert!(tail < head, "loss did not decrease: {head} -> {tail}");
    }

    #[test]
    fn conditional_net_needs_labels() {
        let spec = MlpSpec {
            hidden_dims: vec![4],
            condition_dim: 2,
            ..MlpSpec::for_dim(2)
        };
        let mut net = ScoreNet::new(spec, &mut Rng::new(0)).unwrap();
        let cfg = TrainConfig {
            steps: 1,
            batch_size: 2,
            ..TrainConfig::default()
        };
        let r = dsm_train(
            &mut net,
            &NoiseSchedule::default(),
            &Fixed { x0: vec![0.0, 0.0] },
            &cfg,
        );
        assert!(matches!(r, Err(Error::Contract(_))));
    }

    #[test]
    fn cosine_decay_endpoints() {
        let cfg = TrainConfig {
            steps: 10,
            ..TrainConfig::default()
        };
        assert_eq!(cfg.lr_at(0), cfg.adam.lr);
        assert!(cfg.lr_at(10).abs() < 1e-18);
    }
}
