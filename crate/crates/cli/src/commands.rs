//! Subcommand implementations. Every artifact lives under the config's `out_dir`.

use std::collections::BTreeMap;
use std::path::Path;

use ladb_core::config::ExperimentConfig;
use ladb_core::coupling::{LatentPairs, MixtureManifest, MixtureSourceEntry};
use ladb_core::datasets::{Batch, Pairs};
use ladb_core::diffusion::TrainReport;
use ladb_core::eval::benchmark_run;
use ladb_core::io::{fmt_f64, Table};
use ladb_core::ladb::{ladb_sample, multi_source_sample, LadmModel, SourceWeighting};
use ladb_core::pipeline::{
    generate_data, train_ddbm_stage, train_ddib_stage, train_ladm_stage, train_source_stage,
    transfer_stage, SourceData,
};
use ladb_core::{Error, Result};

use crate::layout::Layout;

/// Tolerance on `sum(rho) = 1` for weights given on the command line.
pub const CLI_WEIGHT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Source,
    Ladm,
    DdibTarget,
    Ddbm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    Ladm,
    Ddib,
}

fn load_batch(path: &Path) -> Result<Batch> {
    if !path.exists() {
        return Err(Error::MissingPrerequisite(path.to_path_buf()));
    }
    Batch::load_csv(path)
}

fn load_table(path: &Path) -> Result<Table> {
    if !path.exists() {
        return Err(Error::MissingPrerequisite(path.to_path_buf()));
    }
    Table::load(path)
}

fn save_losses(path: &Path, report: &TrainReport) -> Result<()> {
    let mut t = Table::new(["step", "loss"]);
    for (i, l) in report.losses.iter().enumerate() {
        t.push(vec![i.to_string(), fmt_f64(*l)]);
    }
    t.save(path)
}

pub fn gen_data(cfg: &ExperimentConfig, seed: u64, log: &mut dyn FnMut(&str)) -> Result<()> {
    let lay = Layout::new(&cfg.out_dir);
    let bundle = generate_data(cfg, seed, cfg.data.fraction)?;
    let mut entries = Vec::new();
    for (tag, s) in &bundle.sources {
        s.points.to_table().save(&lay.source_points(tag))?;
        s.paired.to_table().save(&lay.source_pairs(tag))?;
        s.unpaired_target
            .to_table()
            .save(&lay.root.join(Layout::unpaired_rel(tag)))?;
        bundle.test.inputs[tag]
            .to_table()
            .save(&lay.test_input(tag))?;
        entries.push(MixtureSourceEntry {
            tag: tag.clone(),
            paired_file: (!s.paired.is_empty()).then(|| Layout::latents_rel(tag)),
            paired_count: s.paired.len(),
            unpaired_file: (!s.unpaired_target.is_empty()).then(|| Layout::unpaired_rel(tag)),
            unpaired_count: s.unpaired_target.len(),
        });
        log(&format!(
            "source {tag}: {} points, {} paired, {} unpaired targets",
            s.points.len(),
            s.paired.len(),
            s.unpaired_target.len()
        ));
    }
    aligned_inputs(&bundle.test.inputs)?.save(&lay.test_inputs())?;
    bundle.target.to_table().save(&lay.target())?;
    bundle
        .test
        .ground_truth
        .to_table()
        .save(&lay.test_ground_truth())?;
    bundle.test.reference.to_table().save(&lay.reference())?;
    let manifest = MixtureManifest {
        dim: cfg.data.base.dim,
        total_paired: entries.iter().map(|e| e.paired_count).sum(),
        total_unpaired: entries.iter().map(|e| e.unpaired_count).sum(),
        sources: entries,
        transfer_ode: None,
    };
    manifest.save(&lay.mixture())?;
    log(&format!("wrote {}", lay.mixture().display()));
    Ok(())
}

fn aligned_inputs(inputs: &BTreeMap<String, Batch>) -> Result<Table> {
    let mut header = Vec::new();
    for (tag, b) in inputs {
        header.extend((0..b.dim).map(|i| format!("{tag}.x{i}")));
    }
    let n = inputs.values().next().map_or(0, Batch::len);
    let mut t = Table::new(header);
    for i in 0..n {
        t.push(
            inputs
                .values()
                .flat_map(|b| b.point(i).iter().map(|&v| fmt_f64(v)))
                .collect(),
        );
    }
    Ok(t)
}

fn source_data(lay: &Layout, tag: &str) -> Result<SourceData> {
    let points = load_batch(&lay.source_points(tag))?;
    let paired = Pairs::from_table(&load_table(&lay.source_pairs(tag))?, tag, "target")?;
    let unpaired_target = load_batch(&lay.root.join(Layout::unpaired_rel(tag)))?;
    Ok(SourceData {
        points,
        paired,
        unpaired_target,
    })
}

pub fn train(
    cfg: &ExperimentConfig,
    seed: u64,
    stage: Stage,
    log: &mut dyn FnMut(&str),
) -> Result<()> {
    let lay = Layout::new(&cfg.out_dir);
    match stage {
        Stage::Source => {
            for tag in cfg.source_tags() {
                let data = source_data(&lay, &tag)?;
                let (model, report) = train_source_stage(cfg, &data, seed)?;
                model.save(&lay.source_model(&tag))?;
                save_losses(&lay.losses(&format!("source_{tag}")), &report)?;
                log(&format!("trained source model {tag}"));
            }
        }
        Stage::Ladm => {
            let mut manifest = MixtureManifest::load(&lay.mixture())?;
            let mut unpaired = Vec::new();
            for entry in &manifest.sources {
                let source = LadmModel::load(&lay.source_model(&entry.tag))?;
                let data = source_data(&lay, &entry.tag)?;
                if let Some(rel) = &entry.paired_file {
                    // Single pass of the source flow over this source's pairs.
                    let latents = transfer_stage(cfg, &source, &data)?;
                    latents.to_table().save(&lay.root.join(rel))?;
                    log(&format!(
                        "transferred {} pairs of {}",
                        latents.len(),
                        entry.tag
                    ));
                }
                unpaired.push(data.unpaired_target);
            }
            manifest.transfer_ode = Some(cfg.ode);
            manifest.save(&lay.mixture())?;
            let latents: Vec<LatentPairs> = manifest
                .sources
                .iter()
                .zip(&unpaired)
                .map(|(e, u)| match &e.paired_file {
                    Some(rel) => LatentPairs::from_table(&Table::load(&lay.root.join(rel))?),
                    None => Ok(LatentPairs::empty(u.dim)),
                })
                .collect::<Result<_>>()?;
            let (model, report) =
                train_ladm_stage(cfg, &latents, &unpaired, seed, cfg.data.conditional)?;
            model.save(&lay.model("ladm"))?;
            save_losses(&lay.losses("ladm"), &report)?;
            log(&format!(
                "trained pooled target model on {} paired and {} unpaired entries",
                manifest.total_paired, manifest.total_unpaired
            ));
        }
        Stage::DdibTarget => {
            let target = load_batch(&lay.target())?;
            let (model, report) = train_ddib_stage(cfg, &target, seed)?;
            model.save(&lay.model("ddib_target"))?;
            save_losses(&lay.losses("ddib_target"), &report)?;
            log("trained independent target model");
        }
        Stage::Ddbm => {
            let mut pairs = Vec::new();
            for tag in cfg.source_tags() {
                pairs.push(Pairs::from_table(
                    &load_table(&lay.source_pairs(&tag))?,
                    &tag,
                    "target",
                )?);
            }
            let refs: Vec<&Pairs> = pairs.iter().collect();
            let (model, report) = train_ddbm_stage(cfg, &refs, seed)?;
            model.save(&lay.model("ddbm"))?;
            save_losses(&lay.losses("ddbm"), &report)?;
            log("trained bridge model");
        }
    }
    Ok(())
}

fn load_target(lay: &Layout, kind: TargetKind) -> Result<LadmModel> {
    LadmModel::load(&lay.model(match kind {
        TargetKind::Ladm => "ladm",
        TargetKind::Ddib => "ddib_target",
    }))
}

/// Columns `<prefix>x0, <prefix>x1, ...` of `table`, row-major.
fn prefixed_rows(table: &Table, prefix: &str) -> Result<(usize, Vec<f64>)> {
    let cols: Vec<usize> = (0..)
        .map_while(|i| table.column(&format!("{prefix}x{i}")))
        .collect();
    if cols.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "input CSV has no `{prefix}x0` column"
        )));
    }
    Ok((cols.len(), table.numeric(&cols)?))
}

/// Input rows for each weighted tag: `<tag>.x*` columns, or plain `x*` when a single
/// tag is given and no prefixed columns exist.
fn inputs_for(table: &Table, weighting: &SourceWeighting) -> Result<Vec<Vec<f64>>> {
    weighting
        .entries()
        .iter()
        .map(|(tag, _)| {
            let prefixed = format!("{tag}.");
            if table.column(&format!("{prefixed}x0")).is_some() || weighting.len() > 1 {
                prefixed_rows(table, &prefixed).map(|r| r.1)
            } else {
                prefixed_rows(table, "").map(|r| r.1)
            }
        })
        .collect()
}

fn load_sources(
    lay: &Layout,
    weighting: &SourceWeighting,
    known: &[String],
) -> Result<BTreeMap<String, LadmModel>> {
    let mut out = BTreeMap::new();
    for (tag, _) in weighting.entries() {
        if !known.contains(tag) {
            return Err(Error::UnknownTag(tag.clone()));
        }
        out.insert(tag.clone(), LadmModel::load(&lay.source_model(tag))?);
    }
    Ok(out)
}

fn points_table(dim: usize, rows: &[f64]) -> Table {
    let mut t = Table::new((0..dim).map(|i| format!("x{i}")));
    for r in rows.chunks_exact(dim) {
        t.push(r.iter().map(|&v| fmt_f64(v)).collect());
    }
    t
}

pub fn parse_weights(spec: Option<&str>, cfg: &ExperimentConfig) -> Result<SourceWeighting> {
    match spec {
        Some(s) => SourceWeighting::parse(s, CLI_WEIGHT_TOL),
        None => Ok(SourceWeighting::single(cfg.primary_source())),
    }
}

pub fn translate(
    cfg: &ExperimentConfig,
    input: &Path,
    out: &Path,
    weighting: &SourceWeighting,
    class: Option<usize>,
    target_kind: TargetKind,
) -> Result<usize> {
    let lay = Layout::new(&cfg.out_dir);
    let sources = load_sources(&lay, weighting, &cfg.source_tags())?;
    let target = load_target(&lay, target_kind)?;
    let table = load_table(input)?;
    let inputs = inputs_for(&table, weighting)?;
    let out_rows = if weighting.len() == 1 {
        let src = &sources[&weighting.entries()[0].0];
        ladb_sample(src, &target, &inputs[0], &cfg.ode, class)?
    } else {
        let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
        multi_source_sample(&sources, &target, &refs, weighting, &cfg.ode, class)?
    };
    let dim = target.data_dim();
    points_table(dim, &out_rows).save(out)?;
    Ok(out_rows.len() / dim)
}

/// Weighted translations along `rho_to = k / (steps - 1)`, with endpoints computed as
/// single-source translations.
#[allow(clippy::too_many_arguments)]
pub fn interp_sweep(
    cfg: &ExperimentConfig,
    input: &Path,
    out: &Path,
    from: &str,
    to: &str,
    steps: usize,
    class: Option<usize>,
    target_kind: TargetKind,
) -> Result<()> {
    if steps < 2 {
        return Err(Error::InvalidArgument("--steps must be at least 2".into()));
    }
    let lay = Layout::new(&cfg.out_dir);
    let pair = SourceWeighting::new(vec![(from.to_string(), 0.5), (to.to_string(), 0.5)])?;
    let sources = load_sources(&lay, &pair, &cfg.source_tags())?;
    let target = load_target(&lay, target_kind)?;
    let table = load_table(input)?;
    let inputs = inputs_for(&table, &pair)?;
    let (xa, xb) = (inputs[0].as_slice(), inputs[1].as_slice());
    let dim = target.data_dim();
    let mut outputs: Vec<(f64, Vec<f64>)> = Vec::with_capacity(steps);
    for k in 0..steps {
        let rho = k as f64 / (steps - 1) as f64;
        let y = if k == 0 {
            ladb_sample(&sources[from], &target, xa, &cfg.ode, class)?
        } else if k == steps - 1 {
            ladb_sample(&sources[to], &target, xb, &cfg.ode, class)?
        } else {
            let w =
                SourceWeighting::new(vec![(from.to_string(), 1.0 - rho), (to.to_string(), rho)])?;
            multi_source_sample(&sources, &target, &[xa, xb], &w, &cfg.ode, class)?
        };
        outputs.push((rho, y));
    }
    let mut header = vec!["row".to_string(), "step".into(), "rho".into()];
    header.extend((0..dim).map(|i| format!("x{i}")));
    header.push("displacement".into());
    let mut t = Table::new(header);
    let n = outputs[0].1.len() / dim;
    for i in 0..n {
        for (k, (rho, y)) in outputs.iter().enumerate() {
            let row_pts = &y[i * dim..(i + 1) * dim];
            let mut row = vec![i.to_string(), k.to_string(), fmt_f64(*rho)];
            row.extend(row_pts.iter().map(|&v| fmt_f64(v)));
            row.push(if k == 0 {
                String::new()
            } else {
                let prev = &outputs[k - 1].1[i * dim..(i + 1) * dim];
                let d: f64 = row_pts.iter().zip(prev).map(|(a, b)| (a - b).powi(2)).sum();
                fmt_f64(d.sqrt())
            });
            t.push(row);
        }
    }
    t.save(out)
}

pub struct BenchSummary {
    pub cells: usize,
    pub failed: usize,
}

pub fn bench(
    cfg: &ExperimentConfig,
    record_timing: bool,
    log: &mut dyn FnMut(&str),
) -> Result<BenchSummary> {
    let lay = Layout::new(&cfg.out_dir);
    let outcome = benchmark_run(cfg, log);
    outcome.report_table(false).save(&lay.bench("report.csv"))?;
    outcome.summary_table().save(&lay.bench("summary.csv"))?;
    outcome.error_table().save(&lay.bench("errors.csv"))?;
    if !outcome.interp_paths.is_empty() {
        outcome.interp_table().save(&lay.bench("interp_path.csv"))?;
    }
    if record_timing {
        outcome.report_table(true).save(&lay.bench("timing.csv"))?;
    }
    if cfg.bench.dump_samples {
        for (stem, batch) in &outcome.samples {
            batch
                .to_table()
                .save(&lay.bench(&format!("samples/{stem}.csv")))?;
        }
    }
    Ok(BenchSummary {
        cells: outcome.reports.len(),
        failed: outcome.reports.iter().filter(|r| !r.is_ok()).count(),
    })
}
