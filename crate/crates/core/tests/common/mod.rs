//! Helpers shared by the integration test targets.

#![allow(dead_code)]

use ladb_core::datasets::Batch;
use ladb_core::nd::{Activation, MlpSpec, Rng, ScoreNet};

/// A `2-16-16-2` network with small random weights.
pub fn small_net(activation: Activation, condition_dim: usize, seed: u64) -> ScoreNet {
    let spec = MlpSpec {
        input_dim: 2,
        hidden_dims: vec![16, 16],
        output_dim: 2,
        activation,
        time_embedding_dim: 4,
        condition_dim,
    };
    ScoreNet::new(spec, &mut Rng::new(seed)).unwrap()
}

/// Largest per-parameter relative error between the analytic gradient of
/// `<upstream, net(x, t, cond)>` and central finite differences with step `h`.
pub fn max_gradient_rel_err(
    net: &ScoreNet,
    x: &[f64],
    t: f64,
    cond: Option<&[f64]>,
    upstream: &[f64],
    h: f64,
) -> f64 {
    let analytic = net.backward(x, t, cond, upstream).unwrap();
    let objective = |n: &ScoreNet| -> f64 {
        let y = n.forward(x, t, cond).unwrap();
        y.iter().zip(upstream).map(|(a, b)| a * b).sum()
    };
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for i in 0..net.params.len() {
        let orig = probe.params.values[i];
        probe.params.values[i] = orig + h;
        let up = objective(&probe);
        probe.params.values[i] = orig - h;
        let down = objective(&probe);
        probe.params.values[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let a = analytic.values[i];
        let denom = a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((a - numeric).abs() / denom);
    }
    worst
}

pub fn gaussian_batch(n: usize, mean: &[f64], std: f64, rng: &mut Rng) -> Batch {
    let d = mean.len();
    let mut pts = Vec::with_capacity(n * d);
    for _ in 0..n {
        for m in mean {
            pts.push(m + std * rng.normal());
        }
    }
    Batch::new(d, pts, "gaussian").unwrap()
}

pub fn mean_and_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Column `k` of a row-major `(n, dim)` buffer.
pub fn column(xs: &[f64], dim: usize, k: usize) -> Vec<f64> {
    xs.chunks_exact(dim).map(|r| r[k]).collect()
}
