use serde::{Deserialize, Serialize};

use crate::datasets::Batch;
use crate::error::{ensure_dim, Error, Result};
use crate::nd::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricConfig {
    pub n_projections: usize,
    /// Subsample size for the quadratic-cost MMD estimate.
    pub mmd_max_points: usize,
    /// Gaussian kernel bandwidth; `None` selects the median pairwise distance.
    pub mmd_bandwidth: Option<f64>,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            n_projections: 128,
            mmd_max_points: 2000,
            mmd_bandwidth: None,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_projections == 0 {
            return Err(Error::InvalidArgument(
                "n_projections must be positive".into(),
            ));
        }
        if self.mmd_max_points < 2 {
            return Err(Error::InvalidArgument(
                "mmd_max_points must be at least 2".into(),
            ));
        }
        if let Some(h) = self.mmd_bandwidth {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "mmd_bandwidth must be positive, got {h}"
                )));
            }
        }
        Ok(())
    }
}

/// Squared 2-Wasserstein distance between two 1-D empirical measures with uniform
/// weights, integrating the squared quantile difference exactly (sizes may differ).
pub fn w2_squared_1d(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    if n == m {
        return a
            .iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            / n as f64;
    }
    // Walk the merged CDF breakpoints k/n and l/m using integer arithmetic on n*m.
    let (mut i, mut j) = (0usize, 0usize);
    let (mut ca, mut cb) = (m, n);
    let mut total = 0.0;
    while i < n && j < m {
        let step = ca.min(cb);
        total += step as f64 * (a[i] - b[j]).powi(2);
        ca -= step;
        cb -= step;
        if ca == 0 {
            i += 1;
            ca = m;
        }
        if cb == 0 {
            j += 1;
            cb = n;
        }
    }
    total / (n * m) as f64
}

fn directions(dim: usize, count: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    if dim == 1 {
        return vec![vec![1.0]];
    }
    if dim == 2 {
        // Equally spaced angles over a half turn with a random offset; the mean of
        // cos^2 over such a set is exactly 1/2 whenever count >= 2.
        let offset = rng.uniform() * std::f64::consts::PI / count as f64;
        return (0..count)
            .map(|k| {
                let th = offset + std::f64::consts::PI * k as f64 / count as f64;
                vec![th.cos(), th.sin()]
            })
            .collect();
    }
    (0..count)
        .map(|_| loop {
            let v = rng.normal_vec(dim);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break v.into_iter().map(|x| x / norm).collect();
            }
        })
        .collect()
}

fn check_pair(a: &Batch, b: &Batch) -> Result<()> {
    ensure_dim("metric batch dimension", a.dim, b.dim)?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument(
            "metric batches must be non-empty".into(),
        ));
    }
    Ok(())
}

/// Sliced 2-Wasserstein distance: the root of the mean squared 1-D W2 over
/// `n_projections` unit directions. Two point masses at distance `D` in the plane
/// give exactly `D / sqrt(2)`; in `d` dimensions the expectation is `D / sqrt(d)`.
pub fn sliced_w2(a: &Batch, b: &Batch, n_projections: usize, rng: &mut Rng) -> Result<f64> {
    check_pair(a, b)?;
    if n_projections == 0 {
        return Err(Error::InvalidArgument(
            "n_projections must be positive".into(),
        ));
    }
    let dirs = directions(a.dim, n_projections, rng);
    let project = |batch: &Batch, u: &[f64]| -> Vec<f64> {
        batch
            .iter()
            .map(|p| p.iter().zip(u).map(|(x, w)| x * w).sum())
            .collect()
    };
    let total: f64 = dirs
        .iter()
        .map(|u| w2_squared_1d(&mut project(a, u), &mut project(b, u)))
        .sum();
    Ok((total / dirs.len() as f64).sqrt())
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum()
}

/// Median pairwise Euclidean distance over the union of `a` and `b`.
pub fn median_bandwidth(a: &Batch, b: &Batch) -> f64 {
    let pts: Vec<&[f64]> = a.iter().chain(b.iter()).collect();
    let mut d = Vec::with_capacity(pts.len() * (pts.len() - 1) / 2);
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            d.push(sq_dist(pts[i], pts[j]).sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    if *m > 0.0 {
        *m
    } else {
        1.0
    }
}

fn kernel_sums(a: &Batch, b: &Batch, h: f64) -> (f64, f64, f64) {
    let k = |x: &[f64], y: &[f64]| (-sq_dist(x, y) / (2.0 * h * h)).exp();
    let within = |s: &Batch| -> f64 {
        let mut t = 0.0;
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                t += 2.0 * k(s.point(i), s.point(j));
            }
        }
        t
    };
    let mut cross = 0.0;
    for x in a.iter() {
        for y in b.iter() {
            cross += k(x, y);
        }
    }
    (within(a), within(b), cross)
}

fn check_mmd(a: &Batch, b: &Batch, bandwidth: Option<f64>) -> Result<f64> {
    ensure_dim("metric batch dimension", a.dim, b.dim)?;
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidArgument(
            "MMD needs at least 2 points per batch".into(),
        ));
    }
    let h = bandwidth.unwrap_or_else(|| median_bandwidth(a, b));
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bandwidth must be positive, got {h}"
        )));
    }
    Ok(h)
}

/// Unbiased squared MMD with a Gaussian kernel `exp(-|x - y|^2 / (2 h^2))`.
/// It can be slightly negative; on identical multisets it is never positive.
pub fn mmd(a: &Batch, b: &Batch, bandwidth: Option<f64>) -> Result<f64> {
    let h = check_mmd(a, b, bandwidth)?;
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (kaa, kbb, kab) = kernel_sums(a, b, h);
    Ok(kaa / (n * (n - 1.0)) + kbb / (m * (m - 1.0)) - 2.0 * kab / (n * m))
}

/// Biased (V-statistic) squared MMD; zero on identical multisets.
pub fn mmd_biased(a: &Batch, b: &Batch, bandwidth: Option<f64>) -> Result<f64> {
    let h = check_mmd(a, b, bandwidth)?;
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (kaa, kbb, kab) = kernel_sums(a, b, h);
    Ok((kaa + n) / (n * n) + (kbb + m) / (m * m) - 2.0 * kab / (n * m))
}

/// Mean squared Euclidean error between index-aligned batches.
pub fn pairing_mse(translated: &Batch, ground_truth: &Batch) -> Result<f64> {
    ensure_dim("pairing counts", ground_truth.len(), translated.len())?;
    ensure_dim("pairing dimension", ground_truth.dim, translated.dim)?;
    if translated.is_empty() {
        return Err(Error::InvalidArgument(
            "pairing_mse needs at least one point".into(),
        ));
    }
    let total: f64 = translated
        .iter()
        .zip(ground_truth.iter())
        .map(|(x, y)| sq_dist(x, y))
        .sum();
    Ok(total / translated.len() as f64)
}

/// Mean of `|x - y| / max(|x|, floor)` over aligned rows.
pub fn mean_relative_error(x: &[f64], y: &[f64], dim: usize, floor: f64) -> Result<f64> {
    ensure_dim("aligned rows", x.len(), y.len())?;
    let rel = relative_errors(x, y, dim, floor);
    Ok(rel.iter().sum::<f64>() / rel.len().max(1) as f64)
}

/// Per-row `|x - y| / max(|x|, floor)`.
pub fn relative_errors(x: &[f64], y: &[f64], dim: usize, floor: f64) -> Vec<f64> {
    x.chunks_exact(dim)
        .zip(y.chunks_exact(dim))
        .map(|(a, b)| {
            let n = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            sq_dist(a, b).sqrt() / n.max(floor)
        })
        .collect()
}
