use std::collections::BTreeMap;
use std::time::Instant;

use crate::baselines::{ddbm_sample_batch, ddib_translate, BridgeNet};
use crate::config::{derive_seed, ExperimentConfig, Method};
use crate::coupling::LatentPairs;
use crate::datasets::Batch;
use crate::error::{Error, Result};
use crate::eval::metrics::{mmd, pairing_mse, sliced_w2};
use crate::io::{fmt_f64, Table};
use crate::ladb::{decode_from_prior, encode_to_prior, ladb_sample, LadmModel};
use crate::nd::Rng;
use crate::pipeline::{
    generate_data, train_ddbm_stage, train_ddib_stage, train_ladm_stage, train_source_stage,
    transfer_stage, DataBundle,
};

pub const REPORT_COLUMNS: [&str; 10] = [
    "task",
    "method",
    "paired_fraction",
    "seed",
    "n",
    "sliced_w2",
    "mmd",
    "pairing_mse",
    "cycle_err",
    "wall_ms",
];

/// One benchmark cell. Metrics are `None` when undefined for the method or when the
/// cell failed, in which case `error` holds the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub task: String,
    pub method: String,
    pub paired_fraction: f64,
    pub seed: u64,
    pub n: usize,
    pub sliced_w2: Option<f64>,
    pub mmd: Option<f64>,
    pub pairing_mse: Option<f64>,
    pub cycle_err: Option<f64>,
    pub wall_ms: Option<f64>,
    pub error: Option<String>,
}

impl MetricReport {
    fn failed(task: &str, method: &str, fraction: f64, seed: u64, error: String) -> Self {
        Self {
            task: task.into(),
            method: method.into(),
            paired_fraction: fraction,
            seed,
            n: 0,
            sliced_w2: None,
            mmd: None,
            pairing_mse: None,
            cycle_err: None,
            wall_ms: None,
            error: Some(error),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Displacement statistics along the rho path of the interpolation task.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpPath {
    pub seed: u64,
    /// Weight on the second source at each step.
    pub rhos: Vec<f64>,
    /// Mean over traced points of `|y_(k+1) - y_k|`.
    pub mean_displacement: Vec<f64>,
    /// Largest per-point ratio of a step's displacement to that point's median step.
    pub max_jump_ratio: f64,
    /// Same ratio for the mean displacement curve.
    pub mean_jump_ratio: f64,
    /// Largest single displacement over the median of all per-point displacements.
    pub pooled_jump_ratio: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, Default)]
pub struct BenchOutcome {
    pub reports: Vec<MetricReport>,
    /// `(file stem, translated points)` per successful cell.
    pub samples: Vec<(String, Batch)>,
    pub interp_paths: Vec<InterpPath>,
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn mean_std(vals: &[f64]) -> (Option<f64>, Option<f64>) {
    if vals.is_empty() {
        return (None, None);
    }
    let n = vals.len() as f64;
    let m = vals.iter().sum::<f64>() / n;
    let var = if vals.len() > 1 {
        vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (Some(m), Some(var.sqrt()))
}

impl BenchOutcome {
    /// Long-format report; `wall_ms` stays blank unless `with_timing`.
    pub fn report_table(&self, with_timing: bool) -> Table {
        let mut t = Table::new(REPORT_COLUMNS);
        for r in &self.reports {
            t.push(vec![
                r.task.clone(),
                r.method.clone(),
                fmt_f64(r.paired_fraction),
                r.seed.to_string(),
                r.n.to_string(),
                opt(r.sliced_w2),
                opt(r.mmd),
                opt(r.pairing_mse),
                opt(r.cycle_err),
                if with_timing {
                    opt(r.wall_ms)
                } else {
                    String::new()
                },
            ]);
        }
        t
    }

    /// Mean and sample std over seeds per `(task, method, fraction)`, failed cells excluded.
    pub fn summary_table(&self) -> Table {
        let mut header = vec!["task", "method", "paired_fraction", "n_seeds"]
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>();
        for m in ["sliced_w2", "mmd", "pairing_mse", "cycle_err"] {
            header.push(format!("{m}_mean"));
            header.push(format!("{m}_std"));
        }
        let mut t = Table::new(header);
        let mut keys: Vec<(String, String, f64)> = Vec::new();
        for r in &self.reports {
            let k = (r.task.clone(), r.method.clone(), r.paired_fraction);
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        for (task, method, f) in keys {
            let cells: Vec<&MetricReport> = self
                .reports
                .iter()
                .filter(|r| {
                    r.task == task && r.method == method && r.paired_fraction == f && r.is_ok()
                })
                .collect();
            let mut row = vec![
                task.clone(),
                method.clone(),
                fmt_f64(f),
                cells.len().to_string(),
            ];
            let getters: [fn(&MetricReport) -> Option<f64>; 4] = [
                |r| r.sliced_w2,
                |r| r.mmd,
                |r| r.pairing_mse,
                |r| r.cycle_err,
            ];
            for g in getters {
                let vals: Vec<f64> = cells.iter().filter_map(|r| g(r)).collect();
                let (m, s) = mean_std(&vals);
                row.push(opt(m));
                row.push(opt(s));
            }
            t.push(row);
        }
        t
    }

    /// Failed cells as `task,method,paired_fraction,seed,error`.
    pub fn error_table(&self) -> Table {
        let mut t = Table::new(["task", "method", "paired_fraction", "seed", "error"]);
        for r in self.reports.iter().filter(|r| !r.is_ok()) {
            t.push(vec![
                r.task.clone(),
                r.method.clone(),
                fmt_f64(r.paired_fraction),
                r.seed.to_string(),
                r.error.clone().unwrap_or_default(),
            ]);
        }
        t
    }

    pub fn interp_table(&self) -> Table {
        let mut t = Table::new(["seed", "step", "rho", "mean_displacement"]);
        for p in &self.interp_paths {
            for (k, rho) in p.rhos.iter().enumerate() {
                t.push(vec![
                    p.seed.to_string(),
                    k.to_string(),
                    fmt_f64(*rho),
                    if k == 0 {
                        String::new()
                    } else {
                        fmt_f64(p.mean_displacement[k - 1])
                    },
                ]);
            }
        }
        t
    }

    pub fn all_failed(&self) -> bool {
        !self.reports.is_empty() && self.reports.iter().all(|r| !r.is_ok())
    }

    /// Mean of a metric over successful seeds of one cell.
    pub fn mean_metric(
        &self,
        task: &str,
        method: &str,
        fraction: f64,
        metric: fn(&MetricReport) -> Option<f64>,
    ) -> Option<f64> {
        let vals: Vec<f64> = self
            .reports
            .iter()
            .filter(|r| {
                r.task == task && r.method == method && r.paired_fraction == fraction && r.is_ok()
            })
            .filter_map(metric)
            .collect();
        mean_std(&vals).0
    }
}

type Cached<T> = std::result::Result<T, String>;

fn cache<T>(slot: &mut Option<Cached<T>>, f: impl FnOnce() -> Result<T>) -> &Cached<T> {
    slot.get_or_insert_with(|| f().map_err(|e| e.to_string()))
}

fn fraction_key(f: f64) -> String {
    fmt_f64(f)
}

struct Evaluator<'a> {
    cfg: &'a ExperimentConfig,
    seed: u64,
    data: &'a DataBundle,
}

impl Evaluator<'_> {
    fn rng(&self, task: &str, method: &str, fraction: f64) -> Rng {
        Rng::new(self.seed).fork(&format!(
            "metric:{task}:{method}:{}",
            fraction_key(fraction)
        ))
    }

    fn subsample(&self, b: &Batch, rng: &mut Rng) -> Batch {
        let m = self.cfg.metrics.mmd_max_points;
        if b.len() <= m {
            b.clone()
        } else {
            b.select(&rng.subset(b.len(), m))
        }
    }

    /// Metrics of `out` against the reference and the aligned ground truth.
    fn score(
        &self,
        task: &str,
        method: &str,
        fraction: f64,
        out: &Batch,
        cycle_err: Option<f64>,
        started: Instant,
    ) -> Result<MetricReport> {
        let test = &self.data.test;
        let mut rng = self.rng(task, method, fraction);
        let sw = sliced_w2(
            out,
            &test.reference,
            self.cfg.metrics.n_projections,
            &mut rng,
        )?;
        let (a, b) = (
            self.subsample(out, &mut rng),
            self.subsample(&test.reference, &mut rng),
        );
        let m = mmd(&a, &b, self.cfg.metrics.mmd_bandwidth)?.max(0.0);
        let pm = pairing_mse(out, &test.ground_truth)?;
        for (name, v) in [("sliced_w2", sw), ("pairing_mse", pm)] {
            if !v.is_finite() {
                return Err(Error::NonFinite(name.into()));
            }
        }
        Ok(MetricReport {
            task: task.into(),
            method: method.into(),
            paired_fraction: fraction,
            seed: self.seed,
            n: out.len(),
            sliced_w2: Some(sw),
            mmd: Some(m),
            pairing_mse: Some(pm),
            cycle_err,
            wall_ms: Some(started.elapsed().as_secs_f64() * 1e3),
            error: None,
        })
    }
}

fn to_batch(points: Vec<f64>, dim: usize, tag: &str) -> Result<Batch> {
    Batch::new(dim, points, tag)
}

/// Mean Euclidean distance between aligned rows.
fn mean_distance(a: &[f64], b: &[f64], dim: usize) -> f64 {
    let n = a.len() / dim;
    a.chunks_exact(dim)
        .zip(b.chunks_exact(dim))
        .map(|(x, y)| {
            x.iter()
                .zip(y)
                .map(|(p, q)| (p - q).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .sum::<f64>()
        / n.max(1) as f64
}

fn two_step_translation(
    ev: &Evaluator,
    source: &LadmModel,
    target: &LadmModel,
    inputs: &Batch,
    via: Method,
) -> Result<(Batch, f64)> {
    let ode = &ev.cfg.ode;
    let out = match via {
        Method::Ddib => ddib_translate(source, target, &inputs.points, ode)?,
        _ => ladb_sample(source, target, &inputs.points, ode, None)?,
    };
    let back = decode_from_prior(source, &encode_to_prior(target, &out, ode)?, ode, None)?;
    let cyc = mean_distance(&inputs.points, &back, inputs.dim);
    Ok((to_batch(out, inputs.dim, "target")?, cyc))
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn jump_ratio(steps: &mut [f64]) -> f64 {
    let max = steps.iter().copied().fold(0.0, f64::max);
    let med = median(steps);
    if med > 0.0 {
        max / med
    } else if max == 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

/// Runs the seeded benchmark grid of `cfg.bench`. Every cell failure becomes an
/// error row; the run always completes. `progress` receives one line per cell.
pub fn benchmark_run(cfg: &ExperimentConfig, progress: &mut dyn FnMut(&str)) -> BenchOutcome {
    let mut outcome = BenchOutcome::default();
    for &seed in &cfg.bench.seeds {
        run_seed(cfg, seed, &mut outcome, progress);
    }
    outcome
}

fn run_seed(
    cfg: &ExperimentConfig,
    seed: u64,
    outcome: &mut BenchOutcome,
    progress: &mut dyn FnMut(&str),
) {
    let task = "translate";
    let primary = cfg.primary_source();
    let mut source_models: BTreeMap<String, Option<Cached<LadmModel>>> = BTreeMap::new();
    let mut ddib: Option<Cached<LadmModel>> = None;

    let mut bundles: Vec<(f64, Cached<DataBundle>)> = Vec::new();
    for &f in &cfg.bench.fractions {
        bundles.push((f, generate_data(cfg, seed, f).map_err(|e| e.to_string())));
    }

    let mut source_model = |tag: &str, data: &DataBundle| -> Cached<LadmModel> {
        let slot = source_models.entry(tag.to_string()).or_default();
        cache(slot, || {
            train_source_stage(cfg, data.source(tag)?, seed).map(|r| r.0)
        })
        .clone()
    };

    for (f, bundle) in &bundles {
        let f = *f;
        let data = match bundle {
            Ok(d) => d,
            Err(e) => {
                for m in &cfg.bench.methods {
                    outcome
                        .reports
                        .push(MetricReport::failed(task, m.name(), f, seed, e.clone()));
                }
                continue;
            }
        };
        let ev = Evaluator { cfg, seed, data };
        let inputs = &data.test.inputs[&primary];
        for &method in &cfg.bench.methods {
            let started = Instant::now();
            let result: Result<(Batch, MetricReport)> = (|| {
                let (out, cyc) = match method {
                    Method::Ladb => {
                        let src = source_model(&primary, data).map_err(Error::InvalidArgument)?;
                        let sd = data.source(&primary)?;
                        let lp = transfer_stage(cfg, &src, sd)?;
                        let (ladm, _) = train_ladm_stage(
                            cfg,
                            &[lp],
                            std::slice::from_ref(&sd.unpaired_target),
                            seed,
                            false,
                        )?;
                        let (o, c) = two_step_translation(&ev, &src, &ladm, inputs, Method::Ladb)?;
                        (o, Some(c))
                    }
                    Method::Ddib => {
                        let src = source_model(&primary, data).map_err(Error::InvalidArgument)?;
                        let tgt = cache(&mut ddib, || {
                            train_ddib_stage(cfg, &data.target, seed).map(|r| r.0)
                        })
                        .clone()
                        .map_err(Error::InvalidArgument)?;
                        let (o, c) = two_step_translation(&ev, &src, &tgt, inputs, Method::Ddib)?;
                        (o, Some(c))
                    }
                    Method::Ddbm => {
                        let (net, _) =
                            train_ddbm_stage(cfg, &[&data.source(&primary)?.paired], seed)?;
                        let o = ddbm_sample_batch(
                            &net,
                            &inputs.points,
                            &cfg.bridge,
                            derive_seed(seed, &format!("bridge-sample:{}", fraction_key(f))),
                        )?;
                        (to_batch(o, inputs.dim, "target")?, None)
                    }
                };
                let r = ev.score(task, method.name(), f, &out, cyc, started)?;
                Ok((out, r))
            })();
            push_cell(outcome, cfg, task, method.name(), f, seed, result, progress);
        }
    }

    if let Some(ic) = &cfg.bench.interp {
        run_interp(cfg, seed, ic, &mut source_model, outcome, progress);
    }
}

#[allow(clippy::too_many_arguments)]
fn push_cell(
    outcome: &mut BenchOutcome,
    cfg: &ExperimentConfig,
    task: &str,
    method: &str,
    f: f64,
    seed: u64,
    result: Result<(Batch, MetricReport)>,
    progress: &mut dyn FnMut(&str),
) {
    match result {
        Ok((out, r)) => {
            progress(&format!(
                "{task} {method} fraction={} seed={seed}: sliced_w2={} pairing_mse={}",
                fraction_key(f),
                opt(r.sliced_w2),
                opt(r.pairing_mse)
            ));
            if cfg.bench.dump_samples {
                let stem = format!(
                    "{task}_{}_{}_{seed}",
                    method.replace(':', "-"),
                    fraction_key(f)
                );
                outcome.samples.push((stem, out));
            }
            outcome.reports.push(r);
        }
        Err(e) => {
            progress(&format!(
                "{task} {method} fraction={} seed={seed}: failed: {e}",
                fraction_key(f)
            ));
            outcome
                .reports
                .push(MetricReport::failed(task, method, f, seed, e.to_string()));
        }
    }
}

fn run_interp(
    cfg: &ExperimentConfig,
    seed: u64,
    ic: &crate::config::InterpConfig,
    source_model: &mut dyn FnMut(&str, &DataBundle) -> Cached<LadmModel>,
    outcome: &mut BenchOutcome,
    progress: &mut dyn FnMut(&str),
) {
    let task = "interp";
    let tags = cfg.source_tags();
    let (ta, tb) = (tags[0].clone(), tags[1].clone());
    let f = ic.fraction;
    let methods = [
        "ladb:a",
        "ladb:b",
        "ladb:interp",
        "ddbm:a",
        "ddbm:b",
        "ddbm:interp",
    ];
    let data = match generate_data(cfg, seed, f) {
        Ok(d) => d,
        Err(e) => {
            for m in methods {
                outcome
                    .reports
                    .push(MetricReport::failed(task, m, f, seed, e.to_string()));
            }
            return;
        }
    };
    let ev = Evaluator {
        cfg,
        seed,
        data: &data,
    };
    let (xa, xb) = (&data.test.inputs[&ta], &data.test.inputs[&tb]);
    let dim = xa.dim;
    let ode = &cfg.ode;

    // LADB: one pooled target model, latents of both sources mixed in prior space.
    let ladb: Result<(LadmModel, Vec<f64>, Vec<f64>)> = (|| {
        let ma = source_model(&ta, &data).map_err(Error::InvalidArgument)?;
        let mb = source_model(&tb, &data).map_err(Error::InvalidArgument)?;
        let (sa, sb) = (data.source(&ta)?, data.source(&tb)?);
        let lps: Vec<LatentPairs> =
            vec![transfer_stage(cfg, &ma, sa)?, transfer_stage(cfg, &mb, sb)?];
        let unpaired = [sa.unpaired_target.clone(), sb.unpaired_target.clone()];
        let (ladm, _) = train_ladm_stage(cfg, &lps, &unpaired, seed, false)?;
        let za = encode_to_prior(&ma, &xa.points, ode)?;
        let zb = encode_to_prior(&mb, &xb.points, ode)?;
        Ok((ladm, za, zb))
    })();
    let mix = |za: &[f64], zb: &[f64], rho_b: f64| -> Vec<f64> {
        // Same accumulation order as multi-source sampling: first term, then the rest.
        if rho_b == 0.0 {
            return za.to_vec();
        }
        if rho_b == 1.0 {
            return zb.to_vec();
        }
        let mut m: Vec<f64> = za.iter().map(|v| (1.0 - rho_b) * v).collect();
        m.iter_mut().zip(zb).for_each(|(acc, v)| *acc += rho_b * v);
        m
    };
    for (name, rho_b) in [("ladb:a", 0.0), ("ladb:b", 1.0), ("ladb:interp", 0.5)] {
        let started = Instant::now();
        let result = match &ladb {
            Ok((ladm, za, zb)) => (|| {
                let out = decode_from_prior(ladm, &mix(za, zb, rho_b), ode, None)?;
                let out = to_batch(out, dim, "target")?;
                let r = ev.score(task, name, f, &out, None, started)?;
                Ok((out, r))
            })(),
            Err(e) => Err(Error::InvalidArgument(e.to_string())),
        };
        push_cell(outcome, cfg, task, name, f, seed, result, progress);
    }
    if let Ok((ladm, za, zb)) = &ladb {
        let n = ic.path_points.min(xa.len());
        let k = n * dim;
        let rhos: Vec<f64> = (0..ic.steps)
            .map(|s| s as f64 / (ic.steps - 1) as f64)
            .collect();
        let path: Result<Vec<Vec<f64>>> = rhos
            .iter()
            .map(|&r| decode_from_prior(ladm, &mix(&za[..k], &zb[..k], r), ode, None))
            .collect();
        if let Ok(path) = path {
            let mut per_point: Vec<Vec<f64>> = vec![Vec::new(); n];
            let mut mean_disp = Vec::new();
            for w in path.windows(2) {
                let mut total = 0.0;
                for (i, (p, q)) in w[0]
                    .chunks_exact(dim)
                    .zip(w[1].chunks_exact(dim))
                    .enumerate()
                {
                    let d = p
                        .iter()
                        .zip(q)
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    per_point[i].push(d);
                    total += d;
                }
                mean_disp.push(total / n as f64);
            }
            let mut pooled: Vec<f64> = per_point.concat();
            let pooled_jump_ratio = jump_ratio(&mut pooled);
            let max_jump_ratio = per_point
                .iter_mut()
                .map(|s| jump_ratio(s))
                .fold(0.0, f64::max);
            let mean_jump_ratio = jump_ratio(&mut mean_disp.clone());
            outcome.interp_paths.push(InterpPath {
                seed,
                rhos,
                mean_displacement: mean_disp,
                max_jump_ratio,
                mean_jump_ratio,
                pooled_jump_ratio,
                n_points: n,
            });
        }
    }

    // DDBM: one bridge on both sources' pairs; interpolation mixes the pinned endpoints.
    let ddbm: Result<BridgeNet> = train_ddbm_stage(
        cfg,
        &[&data.sources[&ta].paired, &data.sources[&tb].paired],
        seed,
    )
    .map(|r| r.0);
    for (name, rho_b) in [("ddbm:a", 0.0), ("ddbm:b", 1.0), ("ddbm:interp", 0.5)] {
        let started = Instant::now();
        let result = match &ddbm {
            Ok(net) => (|| {
                let ys = mix(&xa.points, &xb.points, rho_b);
                let s = derive_seed(seed, &format!("bridge-sample:interp:{name}"));
                let out = to_batch(ddbm_sample_batch(net, &ys, &cfg.bridge, s)?, dim, "target")?;
                let r = ev.score(task, name, f, &out, None, started)?;
                Ok((out, r))
            })(),
            Err(e) => Err(Error::InvalidArgument(e.to_string())),
        };
        push_cell(outcome, cfg, task, name, f, seed, result, progress);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{InterpConfig, SourceConfig};
    use crate::datasets::PairingMap;

    fn tiny() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.data.base.n = 128;
        c.data.n_test = 32;
        c.net.hidden_dims = vec![16];
        for t in [
            &mut c.train.source,
            &mut c.train.ladm,
            &mut c.train.ddib_target,
            &mut c.train.ddbm,
        ] {
            t.steps = 10;
            t.batch_size = 16;
        }
        c.ode.n_steps = 8;
        c.bridge.n_steps = 8;
        c.metrics.n_projections = 8;
        c.bench.fractions = vec![0.25, 1.0];
        c.bench.seeds = vec![0];
        c
    }

    #[test]
    fn grid_shape_and_determinism() {
        let c = tiny();
        let a = benchmark_run(&c, &mut |_| {});
        assert_eq!(a.reports.len(), 6);
        assert!(a.reports.iter().all(|r| r.is_ok()), "{:?}", a.error_table());
        let b = benchmark_run(&c, &mut |_| {});
        assert_eq!(
            a.report_table(false).to_bytes().unwrap(),
            b.report_table(false).to_bytes().unwrap()
        );
        let ddbm = a.reports.iter().find(|r| r.method == "ddbm").unwrap();
        assert!(ddbm.cycle_err.is_none());
        let bytes = String::from_utf8(a.report_table(false).to_bytes().unwrap()).unwrap();
        assert!(bytes.starts_with(
            "task,method,paired_fraction,seed,n,sliced_w2,mmd,pairing_mse,cycle_err,wall_ms\n"
        ));
    }

    #[test]
    fn failing_cells_become_error_rows() {
        let mut c = tiny();
        c.bench.methods = vec![Method::Ddbm, Method::Ladb];
        // Too few points for any pair at 1%: the bridge has nothing to train on.
        c.bench.fractions = vec![0.001];
        let out = benchmark_run(&c, &mut |_| {});
        let ddbm = out.reports.iter().find(|r| r.method == "ddbm").unwrap();
        assert!(!ddbm.is_ok());
        assert!(out.reports.iter().any(|r| r.is_ok()));
        assert!(!out.all_failed());
        assert_eq!(out.error_table().rows.len(), 1);
    }

    #[test]
    fn interp_task_rows_and_endpoints() {
        let mut c = tiny();
        c.bench.methods = vec![Method::Ladb];
        c.bench.fractions = vec![0.5];
        c.data.sources.insert(
            "z".into(),
            SourceConfig {
                transform: PairingMap::Affine {
                    matrix: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                    offset: vec![2.0, 0.0],
                },
            },
        );
        c.bench.interp = Some(InterpConfig {
            fraction: 0.5,
            steps: 5,
            path_points: 8,
        });
        let out = benchmark_run(&c, &mut |_| {});
        let interp: Vec<_> = out.reports.iter().filter(|r| r.task == "interp").collect();
        assert_eq!(interp.len(), 6);
        assert!(interp.iter().all(|r| r.is_ok()));
        let p = &out.interp_paths[0];
        assert_eq!(p.rhos.len(), 5);
        assert_eq!(p.mean_displacement.len(), 4);
    }
}
