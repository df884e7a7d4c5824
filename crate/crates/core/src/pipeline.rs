//! Experiment stages shared by the command line and the benchmark: data
//! generation from a config and training of every model it describes.

use std::collections::BTreeMap;

use crate::baselines::{ddbm_train, train_ddib_target, BridgeNet};
use crate::config::ExperimentConfig;
use crate::coupling::LatentPairs;
use crate::datasets::{generate, paired_count, Batch, DatasetSpec, Pairs};
use crate::diffusion::TrainReport;
use crate::error::{Error, Result};
use crate::ladb::{
    train_conditional_ladm, train_ladm, train_source_ldm, transfer_correspondences, Autoencoder,
    LadmModel,
};
use crate::nd::Rng;

/// One source's share of the training data.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceData {
    /// The full source sample.
    pub points: Batch,
    pub paired: Pairs,
    /// Targets whose source counterpart is withheld.
    pub unpaired_target: Batch,
}

/// Aligned held-out inputs: row `i` of every source and of `ground_truth` come from
/// the same base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSet {
    pub inputs: BTreeMap<String, Batch>,
    pub ground_truth: Batch,
    /// An independent target sample for distribution metrics.
    pub reference: Batch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataBundle {
    pub sources: BTreeMap<String, SourceData>,
    /// `target_map` applied to the whole base sample.
    pub target: Batch,
    pub test: TestSet,
}

impl DataBundle {
    pub fn source(&self, tag: &str) -> Result<&SourceData> {
        self.sources
            .get(tag)
            .ok_or_else(|| Error::UnknownTag(tag.to_string()))
    }
}

fn domains(cfg: &ExperimentConfig, base: &Batch) -> Result<(BTreeMap<String, Batch>, Batch)> {
    let mut sources = BTreeMap::new();
    for (tag, s) in &cfg.data.sources {
        sources.insert(tag.clone(), s.transform.apply_batch(base, tag.clone()));
    }
    Ok((sources, cfg.data.target_map.apply_batch(base, "target")))
}

/// Draws the base, test and reference samples for `seed` and splits each source at
/// `fraction`. Streams are keyed by name, so changing `fraction` leaves every sample
/// except the paired subsets unchanged.
pub fn generate_data(cfg: &ExperimentConfig, seed: u64, fraction: f64) -> Result<DataBundle> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!(
            "fraction {fraction} outside [0, 1]"
        )));
    }
    let root = Rng::new(seed);
    let base = generate(&cfg.data.base, &mut root.fork("data"))?;
    let test_spec = DatasetSpec {
        n: cfg.data.n_test,
        ..cfg.data.base
    };
    let test_base = generate(&test_spec, &mut root.fork("test"))?;
    let reference_base = generate(&test_spec, &mut root.fork("reference"))?;

    let (full, target) = domains(cfg, &base)?;
    let (test_inputs, ground_truth) = domains(cfg, &test_base)?;
    let reference = cfg.data.target_map.apply_batch(&reference_base, "target");

    let n = base.len();
    let k = paired_count(fraction, n).min(n);
    let mut sources = BTreeMap::new();
    for (tag, points) in full {
        let idx = root.fork(&format!("pairs:{tag}")).subset(n, k);
        let mut is_paired = vec![false; n];
        idx.iter().for_each(|&i| is_paired[i] = true);
        let rest: Vec<usize> = (0..n).filter(|&i| !is_paired[i]).collect();
        sources.insert(
            tag,
            SourceData {
                paired: Pairs::new(points.select(&idx), target.select(&idx))?,
                unpaired_target: target.select(&rest),
                points,
            },
        );
    }
    Ok(DataBundle {
        sources,
        target,
        test: TestSet {
            inputs: test_inputs,
            ground_truth,
            reference,
        },
    })
}

pub fn train_source_stage(
    cfg: &ExperimentConfig,
    data: &SourceData,
    seed: u64,
) -> Result<(LadmModel, TrainReport)> {
    let tc = cfg.stage_train("source", seed)?;
    train_source_ldm(
        &data.points,
        Autoencoder::identity(data.points.dim),
        cfg.schedule,
        &cfg.net,
        &tc,
    )
}

/// Latent correspondences of one source's pairs under its trained model.
pub fn transfer_stage(
    cfg: &ExperimentConfig,
    source: &LadmModel,
    data: &SourceData,
) -> Result<LatentPairs> {
    transfer_correspondences(
        source,
        &Autoencoder::identity(data.paired.target.dim),
        &data.paired,
        &cfg.ode,
    )
}

/// Pools the given sources' latent pairs and unpaired targets into one target model.
/// Conditional training uses `max(label) + 1` classes.
pub fn train_ladm_stage(
    cfg: &ExperimentConfig,
    latents: &[LatentPairs],
    unpaired: &[Batch],
    seed: u64,
    conditional: bool,
) -> Result<(LadmModel, TrainReport)> {
    let tc = cfg.stage_train("ladm", seed)?;
    let dim = cfg.data.base.dim;
    if conditional {
        let classes = latents
            .iter()
            .map(|l| &l.targets)
            .chain(unpaired)
            .filter_map(|b| b.labels.as_ref())
            .flatten()
            .max()
            .map(|m| m + 1)
            .ok_or_else(|| Error::Contract("conditional training needs labeled targets".into()))?;
        train_conditional_ladm(
            latents,
            unpaired,
            Autoencoder::identity(dim),
            cfg.schedule,
            &cfg.net,
            &tc,
            classes,
        )
    } else {
        train_ladm(
            latents,
            unpaired,
            Autoencoder::identity(dim),
            cfg.schedule,
            &cfg.net,
            &tc,
        )
    }
}

pub fn train_ddib_stage(
    cfg: &ExperimentConfig,
    target: &Batch,
    seed: u64,
) -> Result<(LadmModel, TrainReport)> {
    let tc = cfg.stage_train("ddib_target", seed)?;
    train_ddib_target(
        target,
        Autoencoder::identity(target.dim),
        cfg.schedule,
        &cfg.net,
        &tc,
    )
}

/// Bridge trained on the paired subsets of the given sources only.
pub fn train_ddbm_stage(
    cfg: &ExperimentConfig,
    pairs: &[&Pairs],
    seed: u64,
) -> Result<(BridgeNet, TrainReport)> {
    let tc = cfg.stage_train("ddbm", seed)?;
    let src: Vec<&Batch> = pairs.iter().map(|p| &p.source).collect();
    let tgt: Vec<&Batch> = pairs.iter().map(|p| &p.target).collect();
    let pooled = Pairs::new(
        Batch::concat(&src, "source")?,
        Batch::concat(&tgt, "target")?,
    )?;
    ddbm_train(&pooled, &cfg.bridge, &cfg.net, &tc)
}
