//! A toy denoising diffusion bridge over a flat schedule: `f = 0`, `g = sigma_c`,
//! so the pinned process is a scaled Brownian bridge with closed-form kernels.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datasets::Pairs;
use crate::diffusion::{TrainConfig, TrainReport, Weighting};
use crate::error::{ensure_dim, ensure_finite, Error, Result};
use crate::io::{read_json, write_json};
use crate::ladb::{NetConfig, TrainingMeta};
use crate::nd::{adam_step, AdamState, Rng, ScoreNet, StepOutcome};

/// Bridge hyperparameters shared by training and sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BridgeConfig {
    pub sigma_c: f64,
    pub t_min: f64,
    pub n_steps: usize,
    /// Replace the last Euler-Maruyama state by the posterior mean of `x0`.
    pub denoise_final: bool,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        Self {
            sigma_c: 1.0,
            t_min: 1e-3,
            n_steps: 200,
            denoise_final: false,
        }
    }
}

impl BridgeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_c.is_finite() && self.sigma_c > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sigma_c must be positive, got {}",
                self.sigma_c
            )));
        }
        if !(self.t_min > 0.0 && self.t_min < 0.5) {
            return Err(Error::InvalidArgument(format!(
                "bridge t_min must lie in (0, 0.5), got {}",
                self.t_min
            )));
        }
        if self.n_steps == 0 {
            return Err(Error::InvalidArgument("n_steps must be positive".into()));
        }
        Ok(())
    }
}

/// `(1 - t) x0 + t x1`.
pub fn bridge_mean(x0: &[f64], x1: &[f64], t: f64) -> Vec<f64> {
    x0.iter()
        .zip(x1)
        .map(|(a, b)| (1.0 - t) * a + t * b)
        .collect()
}

/// Per-coordinate variance `sigma_c^2 t (1 - t)` of the bridge kernel.
pub fn bridge_variance(sigma_c: f64, t: f64) -> f64 {
    sigma_c * sigma_c * t * (1.0 - t)
}

/// `grad_x log q(x_t = x | x0, x1)`.
pub fn bridge_score(x: &[f64], x0: &[f64], x1: &[f64], t: f64, sigma_c: f64) -> Vec<f64> {
    let v = bridge_variance(sigma_c, t);
    x.iter()
        .zip(bridge_mean(x0, x1, t))
        .map(|(xi, m)| -(xi - m) / v)
        .collect()
}

/// `grad_x log q(x_t = x | x0)` for the unpinned process `x_t ~ N(x0, sigma_c^2 t)`.
pub fn forward_kernel_score(x: &[f64], x0: &[f64], t: f64, sigma_c: f64) -> Vec<f64> {
    let v = sigma_c * sigma_c * t;
    x.iter().zip(x0).map(|(a, b)| -(a - b) / v).collect()
}

/// The h-transform term `grad_x log q(x1 = y | x_t = x) = (y - x) / (sigma_c^2 (1 - t))`.
pub fn h_transform(x: &[f64], y: &[f64], t: f64, sigma_c: f64) -> Vec<f64> {
    let v = sigma_c * sigma_c * (1.0 - t);
    x.iter().zip(y).map(|(a, b)| (b - a) / v).collect()
}

/// Largest score-target norm reachable in training for a noise draw of norm `eps_norm`.
pub fn bridge_target_bound(sigma_c: f64, t_min: f64, eps_norm: f64) -> f64 {
    eps_norm / bridge_variance(sigma_c, t_min).sqrt()
}

/// Score of `q(x_t | x1 = y)` for a batch of rows.
pub trait BridgeScore: Sync {
    fn dim(&self) -> usize;
    fn sigma_c(&self) -> f64;
    fn score_batch(&self, xs: &[f64], t: f64, ys: &[f64]) -> Result<Vec<f64>>;
}

/// Exact pinned score when the target is the single point `x0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointBridgeScore {
    pub x0: Vec<f64>,
    pub sigma_c: f64,
}

impl BridgeScore for PointBridgeScore {
    fn dim(&self) -> usize {
        self.x0.len()
    }

    fn sigma_c(&self) -> f64 {
        self.sigma_c
    }

    fn score_batch(&self, xs: &[f64], t: f64, ys: &[f64]) -> Result<Vec<f64>> {
        let d = self.x0.len();
        let mut out = Vec::with_capacity(xs.len());
        for (x, y) in xs.chunks_exact(d).zip(ys.chunks_exact(d)) {
            out.extend(bridge_score(x, &self.x0, y, t, self.sigma_c));
        }
        Ok(out)
    }
}

/// Checkpoint tag distinguishing bridge networks from diffusion models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BridgeKind {
    #[default]
    Ddbm,
}

/// A noise predictor `eps(x_t, t; y)` with the pinned endpoint fed as a condition;
/// the score is `-eps / sqrt(v_t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BridgeNet {
    pub kind: BridgeKind,
    pub source_tag: String,
    pub target_tag: String,
    pub sigma_c: f64,
    pub t_min: f64,
    pub net: ScoreNet,
    pub training: Option<TrainingMeta>,
}

impl BridgeNet {
    pub fn new(net: ScoreNet, sigma_c: f64, t_min: f64) -> Result<Self> {
        let d = net.spec.input_dim;
        ensure_dim("bridge condition width", d, net.spec.condition_dim)?;
        ensure_dim("bridge output width", d, net.spec.output_dim)?;
        BridgeConfig {
            sigma_c,
            t_min,
            ..BridgeConfig::default()
        }
        .validate()?;
        Ok(Self {
            kind: BridgeKind::Ddbm,
            source_tag: "source".into(),
            target_tag: "target".into(),
            sigma_c,
            t_min,
            net,
            training: None,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingPrerequisite(path.to_path_buf()));
        }
        let b: BridgeNet = read_json(path)?;
        BridgeNet::new(b.net.clone(), b.sigma_c, b.t_min)?;
        Ok(b)
    }

    /// Network input width: point, time embedding, pinned endpoint.
    pub fn input_width(&self) -> usize {
        self.net.spec.first_layer_width()
    }
}

impl BridgeScore for BridgeNet {
    fn dim(&self) -> usize {
        self.net.spec.input_dim
    }

    fn sigma_c(&self) -> f64 {
        self.sigma_c
    }

    fn score_batch(&self, xs: &[f64], t: f64, ys: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        ensure_dim("bridge batch", xs.len(), ys.len())?;
        let n = xs.len() / d;
        let eps = self.net.forward_batch(xs, &vec![t; n], Some(ys))?;
        let sd = bridge_variance(self.sigma_c, t).sqrt();
        Ok(eps.into_iter().map(|e| -e / sd).collect())
    }
}

/// Trains a bridge from `pairs.target` (`t = 0`) to `pairs.source` (`t = 1`) by
/// denoising bridge score matching with `t ~ U(t_min, 1 - t_min)`.
pub fn ddbm_train(
    pairs: &Pairs,
    bridge: &BridgeConfig,
    net_cfg: &NetConfig,
    cfg: &TrainConfig,
) -> Result<(BridgeNet, TrainReport)> {
    bridge.validate()?;
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::InvalidArgument(
            "bridge training needs at least one pair".into(),
        ));
    }
    let d = pairs.source.dim;
    ensure_dim("pair dimension", d, pairs.target.dim)?;
    let root = Rng::new(cfg.seed);
    let mut init = root.fork("init");
    let net = ScoreNet::new(net_cfg.spec(d, d), &mut init)?;
    let mut model = BridgeNet::new(net, bridge.sigma_c, bridge.t_min)?;
    model.source_tag = pairs.source.domain_tag.clone();
    model.target_tag = pairs.target.domain_tag.clone();
    let mut pair_rng = root.fork("coupling");
    let mut time_rng = root.fork("time");
    let mut noise_rng = root.fork("noise");

    let b = cfg.batch_size;
    let (mut xs, mut ys, mut eps) = (vec![0.0; b * d], vec![0.0; b * d], vec![0.0; b * d]);
    let (mut ts, mut weights) = (vec![0.0; b], vec![0.0; b]);
    let mut upstream = vec![0.0; b * d];
    let mut grad = model.net.params.zeros_like();
    let mut state = AdamState::new(grad.len());
    let mut report = TrainReport::default();
    for step in 0..cfg.steps {
        for i in 0..b {
            let k = pair_rng.index(pairs.len());
            let (x0, x1) = (pairs.target.point(k), pairs.source.point(k));
            let t = time_rng.uniform_range(bridge.t_min, 1.0 - bridge.t_min);
            let v = bridge_variance(bridge.sigma_c, t);
            let sd = v.sqrt();
            let row = i * d..(i + 1) * d;
            noise_rng.fill_normal(&mut eps[row.clone()]);
            for (j, m) in bridge_mean(x0, x1, t).into_iter().enumerate() {
                xs[i * d + j] = m + sd * eps[i * d + j];
            }
            ys[row].copy_from_slice(x1);
            ts[i] = t;
            weights[i] = match cfg.weighting {
                Weighting::SigmaSquared => 1.0,
                Weighting::Uniform => 1.0 / v,
            };
        }
        let cache = model.net.forward_train(&xs, &ts, Some(&ys))?;
        let mut loss = 0.0;
        for i in 0..b {
            for j in i * d..(i + 1) * d {
                let r = cache.output[j] - eps[j];
                loss += weights[i] * r * r;
                upstream[j] = 2.0 * weights[i] * r / b as f64;
            }
        }
        loss /= b as f64;
        if !loss.is_finite() {
            return Err(Error::Training {
                step,
                reason: format!("loss became {loss}"),
            });
        }
        grad.values.fill(0.0);
        model.net.backward_batch(&cache, &upstream, &mut grad)?;
        if adam_step(
            &mut model.net.params,
            &grad,
            &mut state,
            &cfg.adam,
            cfg.lr_at(step),
        )? == StepOutcome::SkippedNonFinite
        {
            report.skipped_steps += 1;
        }
        report.losses.push(loss);
    }
    model.training = Some(TrainingMeta {
        seed: cfg.seed,
        steps: cfg.steps,
        batch_size: cfg.batch_size,
        final_loss: report.losses.last().copied(),
        paired_count: pairs.len(),
        unpaired_count: 0,
    });
    Ok((model, report))
}

/// Reverse-time grid from `1 - t_min` down to `t_min`.
fn bridge_grid(cfg: &BridgeConfig) -> Vec<f64> {
    let (hi, lo) = (1.0 - cfg.t_min, cfg.t_min);
    let n = cfg.n_steps;
    (0..=n)
        .map(|k| {
            if k == n {
                lo
            } else {
                hi - (hi - lo) * k as f64 / n as f64
            }
        })
        .collect()
}

/// Euler-Maruyama on the pinned reverse SDE for rows `ys`, row `i` drawing its
/// increments from `rngs[i]`. Returns end points and, when `keep_path`, every state.
fn integrate<S: BridgeScore + ?Sized>(
    net: &S,
    ys: &[f64],
    cfg: &BridgeConfig,
    rngs: &mut [Rng],
    keep_path: bool,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    cfg.validate()?;
    let d = net.dim();
    ensure_dim("pinned endpoint batch", 0, ys.len() % d)?;
    ensure_dim("rng streams", ys.len() / d, rngs.len())?;
    ensure_finite("pinned endpoint", ys)?;
    let s2 = net.sigma_c() * net.sigma_c();
    let grid = bridge_grid(cfg);
    let mut x = ys.to_vec();
    let mut path = Vec::new();
    if keep_path {
        path.push(x.clone());
    }
    let mut z = vec![0.0; d];
    for (step, w) in grid.windows(2).enumerate() {
        let (t, h) = (w[0], w[0] - w[1]);
        let s = net.score_batch(&x, t, ys)?;
        let sd = net.sigma_c() * h.sqrt();
        for (i, rng) in rngs.iter_mut().enumerate() {
            rng.fill_normal(&mut z);
            for j in 0..d {
                let k = i * d + j;
                let hterm = (ys[k] - x[k]) / (s2 * (1.0 - t));
                x[k] += s2 * (s[k] - hterm) * h + sd * z[j];
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integration { step });
        }
        if keep_path {
            path.push(x.clone());
        }
    }
    if cfg.denoise_final {
        let t = *grid.last().unwrap_or(&cfg.t_min);
        let s = net.score_batch(&x, t, ys)?;
        for k in 0..x.len() {
            let hterm = (ys[k] - x[k]) / (s2 * (1.0 - t));
            x[k] += s2 * t * (s[k] - hterm);
        }
    }
    Ok((x, path))
}

/// One pinned reverse path from `y`; returns the end point and the visited states.
pub fn ddbm_sample_path<S: BridgeScore + ?Sized>(
    net: &S,
    y: &[f64],
    cfg: &BridgeConfig,
    rng: &mut Rng,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    ensure_dim("pinned endpoint", net.dim(), y.len())?;
    integrate(net, y, cfg, std::slice::from_mut(rng), true)
}

pub fn ddbm_sample<S: BridgeScore + ?Sized>(
    net: &S,
    y: &[f64],
    cfg: &BridgeConfig,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    ensure_dim("pinned endpoint", net.dim(), y.len())?;
    Ok(integrate(net, y, cfg, std::slice::from_mut(rng), false)?.0)
}

/// Batched sampling; row `i` uses the stream `Rng::new(seed).fork_indexed("bridge", i)`,
/// so each row's result is independent of the batch it is in.
pub fn ddbm_sample_batch<S: BridgeScore + ?Sized>(
    net: &S,
    ys: &[f64],
    cfg: &BridgeConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    let d = net.dim();
    let root = Rng::new(seed);
    let mut rngs: Vec<Rng> = (0..ys.len() / d.max(1))
        .map(|i| root.fork_indexed("bridge", i as u64))
        .collect();
    Ok(integrate(net, ys, cfg, &mut rngs, false)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nd::Rng;
    use proptest::prelude::*;

    #[test]
    fn target_vanishes_at_bridge_mean() {
        let (x0, x1) = ([1.0, -2.0], [0.5, 3.0]);
        let m = bridge_mean(&x0, &x1, 0.3);
        assert!(bridge_score(&m, &x0, &x1, 0.3, 1.0)
            .iter()
            .all(|v| *v == 0.0));
        assert_eq!(bridge_variance(1.0, 0.5), 0.25);
    }

    proptest! {
        #[test]
        fn bridge_score_decomposes(
            x in proptest::collection::vec(-3.0f64..3.0, 2),
            x0 in proptest::collection::vec(-3.0f64..3.0, 2),
            x1 in proptest::collection::vec(-3.0f64..3.0, 2),
            t in 0.01f64..0.99,
            sigma in 0.2f64..3.0,
        ) {
            // q(x_t | x0, x1) = q(x_t | x0) q(x1 | x_t) / q(x1 | x0); the last factor is constant in x_t.
            let lhs = bridge_score(&x, &x0, &x1, t, sigma);
            let a = forward_kernel_score(&x, &x0, t, sigma);
            let h = h_transform(&x, &x1, t, sigma);
            for k in 0..2 {
                let scale = 1.0 + lhs[k].abs();
                prop_assert!((lhs[k] - (a[k] + h[k])).abs() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn grid_runs_from_top_to_bottom() {
        let g = bridge_grid(&BridgeConfig::default());
        assert_eq!(g.len(), 201);
        assert_eq!(g[0], 1.0 - 1e-3);
        assert_eq!(*g.last().unwrap(), 1e-3);
        assert!(g.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn low_noise_path_follows_the_chord() {
        let x0 = vec![1.0, 2.0];
        let y = vec![-1.0, 0.5];
        let cfg = BridgeConfig {
            sigma_c: 1e-3,
            ..BridgeConfig::default()
        };
        let score = PointBridgeScore {
            x0: x0.clone(),
            sigma_c: cfg.sigma_c,
        };
        let (end, path) = ddbm_sample_path(&score, &y, &cfg, &mut Rng::new(0)).unwrap();
        let dev = |p: &[f64]| {
            // distance from the segment through y and x0
            let (dx, dy) = (x0[0] - y[0], x0[1] - y[1]);
            let (px, py) = (p[0] - y[0], p[1] - y[1]);
            (px * dy - py * dx).abs() / (dx * dx + dy * dy).sqrt()
        };
        assert!(path.iter().all(|p| dev(p) <= 1e-2));
        assert!((end[0] - x0[0]).abs() < 2e-2 && (end[1] - x0[1]).abs() < 2e-2);
    }

    #[test]
    fn batch_rows_match_single_paths() {
        let score = PointBridgeScore {
            x0: vec![0.0, 1.0],
            sigma_c: 1.0,
        };
        let cfg = BridgeConfig {
            n_steps: 20,
            ..BridgeConfig::default()
        };
        let ys = [0.5, 0.5, -1.0, 2.0];
        let batch = ddbm_sample_batch(&score, &ys, &cfg, 11).unwrap();
        let mut r1 = Rng::new(11).fork_indexed("bridge", 1);
        let single = ddbm_sample(&score, &ys[2..], &cfg, &mut r1).unwrap();
        assert_eq!(&batch[2..], single.as_slice());
    }

    #[test]
    fn empty_pairs_rejected() {
        let p = Pairs::new(
            crate::datasets::Batch::empty(2, "s"),
            crate::datasets::Batch::empty(2, "t"),
        )
        .unwrap();
        let r = ddbm_train(
            &p,
            &BridgeConfig::default(),
            &NetConfig::default(),
            &TrainConfig::default(),
        );
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn checkpoint_is_tagged_and_round_trips() {
        let net = ScoreNet::new(NetConfig::default().spec(2, 2), &mut Rng::new(1)).unwrap();
        let b = BridgeNet::new(net, 1.0, 1e-3).unwrap();
        assert_eq!(b.input_width(), 2 * 2 + 16);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ddbm.json");
        b.save(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.contains("\"kind\": \"ddbm\""));
        assert_eq!(BridgeNet::load(&p).unwrap(), b);
    }
}
