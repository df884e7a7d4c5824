//! Latent-aligned diffusion bridges: per-domain diffusion models joined through
//! a shared Gaussian prior space, with the target model trained on a coupling that
//! mixes inferred paired latents with independent noise.

mod autoencoder;
mod model;

use std::collections::BTreeMap;

pub use autoencoder::Autoencoder;
pub use model::{LadmModel, ModelRole, NetConfig, TrainingMeta};

use crate::coupling::{CouplingMixture, LatentPairs};
use crate::datasets::{Batch, Pairs};
use crate::diffusion::{
    dsm_train, flow_solve_batch, CouplingSampler, OdeConfig, ScoreModel, TrainConfig, TrainReport,
};
use crate::error::{ensure_dim, Error, Result};
use crate::nd::{Rng, ScoreNet};
use crate::schedule::NoiseSchedule;

fn fit<S: CouplingSampler + ?Sized>(
    sampler: &S,
    condition_dim: usize,
    schedule: &NoiseSchedule,
    net: &NetConfig,
    cfg: &TrainConfig,
) -> Result<(ScoreNet, TrainReport)> {
    let mut init = Rng::new(cfg.seed).fork("init");
    let mut score = ScoreNet::new(net.spec(sampler.dim(), condition_dim), &mut init)?;
    let report = dsm_train(&mut score, schedule, sampler, cfg)?;
    Ok((score, report))
}

fn meta(cfg: &TrainConfig, report: &TrainReport, paired: usize, unpaired: usize) -> TrainingMeta {
    TrainingMeta {
        seed: cfg.seed,
        steps: cfg.steps,
        batch_size: cfg.batch_size,
        final_loss: report.losses.last().copied(),
        paired_count: paired,
        unpaired_count: unpaired,
    }
}

/// Unconditional diffusion model of `data`, trained against the independent coupling.
pub fn train_source_ldm(
    data: &Batch,
    autoencoder: Autoencoder,
    schedule: NoiseSchedule,
    net: &NetConfig,
    cfg: &TrainConfig,
) -> Result<(LadmModel, TrainReport)> {
    ensure_dim("data dimension", autoencoder.data_dim(), data.dim)?;
    let encoded = autoencoder.encode_batch(data)?;
    let coupling = CouplingMixture::independent(&encoded)?;
    let (score, report) = fit(&coupling, 0, &schedule, net, cfg)?;
    let mut m = LadmModel::new(
        ModelRole::Source,
        data.domain_tag.clone(),
        autoencoder,
        schedule,
        ScoreModel::Net(score),
    )?;
    m.training = Some(meta(cfg, &report, 0, data.len()));
    Ok((m, report))
}

/// Maps each paired source point to the prior space with the source probability flow.
/// Targets are stored encoded by `target_autoencoder`.
pub fn transfer_correspondences(
    source: &LadmModel,
    target_autoencoder: &Autoencoder,
    pairs: &Pairs,
    ode: &OdeConfig,
) -> Result<LatentPairs> {
    let latents = encode_to_prior(source, &pairs.source.points, ode)?;
    let latents = Batch::new(source.latent_dim(), latents, "latent")?;
    let targets = target_autoencoder.encode_batch(&pairs.target)?;
    LatentPairs::new(targets, latents)
}

fn train_target(
    paired: &[LatentPairs],
    unpaired: &[Batch],
    autoencoder: Autoencoder,
    schedule: NoiseSchedule,
    net: &NetConfig,
    cfg: &TrainConfig,
    num_classes: usize,
) -> Result<(LadmModel, TrainReport)> {
    for u in unpaired {
        ensure_dim("unpaired target dimension", autoencoder.data_dim(), u.dim)?;
    }
    let encoded: Vec<Batch> = unpaired
        .iter()
        .map(|u| autoencoder.encode_batch(u))
        .collect::<Result<_>>()?;
    let coupling = CouplingMixture::build(paired, &encoded)?;
    ensure_dim(
        "coupling dimension",
        autoencoder.latent_dim(),
        coupling.dim(),
    )?;
    if num_classes > 0 && !coupling.is_labeled() {
        return Err(Error::Contract(
            "conditional training needs a label on every target".into(),
        ));
    }
    let (score, report) = fit(&coupling, num_classes, &schedule, net, cfg)?;
    let tag = unpaired
        .iter()
        .map(|u| u.domain_tag.clone())
        .find(|t| !t.is_empty())
        .unwrap_or_else(|| "target".into());
    let mut m = LadmModel::new(
        ModelRole::Ladm,
        tag,
        autoencoder,
        schedule,
        ScoreModel::Net(score),
    )?;
    m.training = Some(meta(
        cfg,
        &report,
        coupling.paired_len(),
        coupling.unpaired_len(),
    ));
    Ok((m, report))
}

/// Target model trained on the semi-supervised coupling of every source's paired
/// latents (`paired[j]`) with the unpaired targets (`unpaired[j]`, data space).
pub fn train_ladm(
    paired: &[LatentPairs],
    unpaired: &[Batch],
    autoencoder: Autoencoder,
    schedule: NoiseSchedule,
    net: &NetConfig,
    cfg: &TrainConfig,
) -> Result<(LadmModel, TrainReport)> {
    train_target(paired, unpaired, autoencoder, schedule, net, cfg, 0)
}

/// Class-conditional variant; labels are fed to the network as one-hot vectors.
pub fn train_conditional_ladm(
    paired: &[LatentPairs],
    unpaired: &[Batch],
    autoencoder: Autoencoder,
    schedule: NoiseSchedule,
    net: &NetConfig,
    cfg: &TrainConfig,
    num_classes: usize,
) -> Result<(LadmModel, TrainReport)> {
    if num_classes == 0 {
        return Err(Error::InvalidArgument(
            "num_classes must be positive".into(),
        ));
    }
    train_target(
        paired,
        unpaired,
        autoencoder,
        schedule,
        net,
        cfg,
        num_classes,
    )
}

/// Encodes rows of `xs` and integrates the source flow forward to the prior space.
pub fn encode_to_prior(source: &LadmModel, xs: &[f64], ode: &OdeConfig) -> Result<Vec<f64>> {
    let z = source.autoencoder.encode_rows(xs)?;
    flow_solve_batch(&source.score, &source.schedule, &z, &ode.forward(), None)
}

fn class_conditions(
    target: &LadmModel,
    n: usize,
    class: Option<usize>,
) -> Result<Option<Vec<f64>>> {
    let c = target.num_classes();
    match (c, class) {
        (0, None) => Ok(None),
        (0, Some(_)) => Err(Error::Contract(
            "class given to an unconditional target model".into(),
        )),
        (_, None) => Err(Error::Contract(
            "conditional target model needs a class".into(),
        )),
        (c, Some(k)) => {
            if k >= c {
                return Err(Error::InvalidArgument(format!(
                    "class {k} out of range for {c} classes"
                )));
            }
            let mut conds = vec![0.0; n * c];
            for row in conds.chunks_exact_mut(c) {
                row[k] = 1.0;
            }
            Ok(Some(conds))
        }
    }
}

/// Integrates the target flow in reverse from prior-space rows and decodes.
pub fn decode_from_prior(
    target: &LadmModel,
    latents: &[f64],
    ode: &OdeConfig,
    class: Option<usize>,
) -> Result<Vec<f64>> {
    let k = target.latent_dim();
    ensure_dim("prior batch", 0, latents.len() % k)?;
    let conds = class_conditions(target, latents.len() / k, class)?;
    let z = flow_solve_batch(
        &target.score,
        &target.schedule,
        latents,
        &ode.reverse(),
        conds.as_deref(),
    )?;
    target.autoencoder.decode_rows(&z)
}

fn check_compatible(source: &LadmModel, target: &LadmModel) -> Result<()> {
    ensure_dim(
        "target latent vs source latent dimension",
        source.latent_dim(),
        target.latent_dim(),
    )
}

/// Source-to-target translation of rows of `xs`: forward source flow, reverse target flow.
pub fn ladb_sample(
    source: &LadmModel,
    target: &LadmModel,
    xs: &[f64],
    ode: &OdeConfig,
    class: Option<usize>,
) -> Result<Vec<f64>> {
    check_compatible(source, target)?;
    ensure_dim("input batch", 0, xs.len() % source.data_dim())?;
    class_conditions(target, 0, class)?;
    let latents = encode_to_prior(source, xs, ode)?;
    decode_from_prior(target, &latents, ode, class)
}

/// Positive weights over source tags summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceWeighting {
    entries: Vec<(String, f64)>,
}

/// Tolerance on `sum(rho) = 1` for a constructed weighting.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

impl SourceWeighting {
    pub fn new(entries: Vec<(String, f64)>) -> Result<Self> {
        Self::check(&entries, WEIGHT_SUM_TOL)?;
        Ok(Self { entries })
    }

    pub fn single(tag: impl Into<String>) -> Self {
        Self {
            entries: vec![(tag.into(), 1.0)],
        }
    }

    /// Accepts weights summing to one within `tol` and rescales them by their sum.
    pub fn normalized(entries: Vec<(String, f64)>, tol: f64) -> Result<Self> {
        let sum = Self::check(&entries, tol)?;
        let entries = if sum == 1.0 {
            entries
        } else {
            entries.into_iter().map(|(t, r)| (t, r / sum)).collect()
        };
        Self::new(entries)
    }

    fn check(entries: &[(String, f64)], tol: f64) -> Result<f64> {
        if entries.is_empty() {
            return Err(Error::InvalidArgument(
                "weighting needs at least one source".into(),
            ));
        }
        for (tag, r) in entries {
            if !(r.is_finite() && *r > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "weight for '{tag}' must be positive, got {r}"
                )));
            }
        }
        let sum: f64 = entries.iter().map(|(_, r)| r).sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::WeightSum(sum));
        }
        Ok(sum)
    }

    /// Parses `tag:rho,tag:rho,...` and normalizes within `tol`.
    pub fn parse(s: &str, tol: f64) -> Result<Self> {
        let entries = s
            .split(',')
            .map(|item| {
                let (tag, rho) = item.split_once(':').ok_or_else(|| {
                    Error::InvalidArgument(format!("weight '{item}' is not tag:rho"))
                })?;
                let rho: f64 = rho.trim().parse().map_err(|_| {
                    Error::InvalidArgument(format!("weight '{item}' is not a number"))
                })?;
                Ok((tag.trim().to_string(), rho))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::normalized(entries, tol)
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Weighted prior-space average of several sources' latents, decoded by the target:
/// `x = T^-1(sum_i rho_i S_i(x_i))`. `inputs[i]` holds rows for entry `i` of
/// `weighting`; all inputs must have the same number of rows.
pub fn multi_source_sample(
    sources: &BTreeMap<String, LadmModel>,
    target: &LadmModel,
    inputs: &[&[f64]],
    weighting: &SourceWeighting,
    ode: &OdeConfig,
    class: Option<usize>,
) -> Result<Vec<f64>> {
    ensure_dim("input sets vs weights", weighting.len(), inputs.len())?;
    let mut models = Vec::with_capacity(weighting.len());
    for (tag, _) in weighting.entries() {
        let m = sources
            .get(tag)
            .ok_or_else(|| Error::UnknownTag(tag.clone()))?;
        check_compatible(m, target)?;
        models.push(m);
    }
    class_conditions(target, 0, class)?;
    let rows = |m: &LadmModel, xs: &[f64]| -> Result<usize> {
        ensure_dim("input batch", 0, xs.len() % m.data_dim())?;
        Ok(xs.len() / m.data_dim())
    };
    let n = rows(models[0], inputs[0])?;
    for (m, xs) in models.iter().zip(inputs) {
        ensure_dim("rows per source", n, rows(m, xs)?)?;
    }
    let mut mixed: Vec<f64> = Vec::new();
    for (i, ((_, rho), (m, xs))) in weighting
        .entries()
        .iter()
        .zip(models.iter().zip(inputs))
        .enumerate()
    {
        let z = encode_to_prior(m, xs, ode)?;
        if i == 0 {
            mixed = z.iter().map(|v| rho * v).collect();
        } else {
            for (acc, v) in mixed.iter_mut().zip(&z) {
                *acc += rho * v;
            }
        }
    }
    decode_from_prior(target, &mixed, ode, class)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{GaussianScore, OdeMethod};

    fn gaussian_model(role: ModelRole, tag: &str, mean: Vec<f64>) -> LadmModel {
        let d = mean.len();
        let s = NoiseSchedule::default();
        LadmModel::new(
            role,
            tag,
            Autoencoder::identity(d),
            s,
            ScoreModel::Gaussian(GaussianScore::new(mean, 1.0, s).unwrap()),
        )
        .unwrap()
    }

    fn ode() -> OdeConfig {
        OdeConfig {
            n_steps: 100,
            method: OdeMethod::Heun,
            ..OdeConfig::default()
        }
    }

    #[test]
    fn gaussian_translation_is_a_shift() {
        let a = gaussian_model(ModelRole::Source, "a", vec![0.0, 0.0]);
        let b = gaussian_model(ModelRole::Ladm, "b", vec![3.0, -1.0]);
        let xs = [0.5, 0.5, -1.0, 2.0];
        let out = ladb_sample(&a, &b, &xs, &ode(), None).unwrap();
        // Unit-variance Gaussians: the flow is x - alpha_t mu = const, so the
        // round trip ends at x + (alpha_tmin - alpha_1)(mu_b - mu_a) up to solver error.
        let s = NoiseSchedule::default();
        let shift = s.alpha(1e-4).unwrap() - s.alpha(1.0).unwrap();
        for (o, (x, m)) in out.iter().zip(xs.iter().zip([3.0, -1.0, 3.0, -1.0])) {
            assert!(
                (o - (x + shift * m)).abs() < 1e-3,
                "{o} vs {}",
                x + shift * m
            );
        }
    }

    #[test]
    fn incompatible_dimensions_rejected_before_solving() {
        let a = gaussian_model(ModelRole::Source, "a", vec![0.0, 0.0]);
        let b = gaussian_model(ModelRole::Ladm, "b", vec![0.0, 0.0, 0.0]);
        let r = ladb_sample(&a, &b, &[0.0, 0.0], &ode(), None);
        assert!(matches!(r, Err(Error::Shape { .. })));
    }

    #[test]
    fn class_contract_enforced() {
        let a = gaussian_model(ModelRole::Source, "a", vec![0.0, 0.0]);
        let b = gaussian_model(ModelRole::Ladm, "b", vec![0.0, 0.0]);
        assert!(matches!(
            ladb_sample(&a, &b, &[0.0, 0.0], &ode(), Some(0)),
            Err(Error::Contract(_))
        ));
        let net = ScoreNet::new(NetConfig::default().spec(2, 2), &mut Rng::new(0)).unwrap();
        let cond = LadmModel::new(
            ModelRole::Ladm,
            "b",
            Autoencoder::identity(2),
            NoiseSchedule::default(),
            ScoreModel::Net(net),
        )
        .unwrap();
        assert!(matches!(
            ladb_sample(&a, &cond, &[0.0, 0.0], &ode(), None),
            Err(Error::Contract(_))
        ));
        assert!(ladb_sample(&a, &cond, &[0.0, 0.0], &ode(), Some(1)).is_ok());
        assert!(ladb_sample(&a, &cond, &[0.0, 0.0], &ode(), Some(2)).is_err());
    }

    #[test]
    fn single_unit_weight_is_bit_identical_to_ladb_sample() {
        let a = gaussian_model(ModelRole::Source, "a", vec![1.0, 0.0]);
        let b = gaussian_model(ModelRole::Ladm, "b", vec![0.0, 2.0]);
        let xs = [0.1, 0.2, 0.3, -0.4, 2.0, 1.0];
        let mut sources = BTreeMap::new();
        sources.insert("a".to_string(), a.clone());
        let multi = multi_source_sample(
            &sources,
            &b,
            &[&xs],
            &SourceWeighting::single("a"),
            &ode(),
            None,
        )
        .unwrap();
        assert_eq!(multi, ladb_sample(&a, &b, &xs, &ode(), None).unwrap());
    }

    #[test]
    fn weighting_validation() {
        let w = |v: &[(&str, f64)]| {
            v.iter()
                .map(|(t, r)| (t.to_string(), *r))
                .collect::<Vec<_>>()
        };
        assert!(SourceWeighting::new(w(&[("a", 0.5), ("b", 0.5)])).is_ok());
        assert!(matches!(
            SourceWeighting::new(w(&[("a", 0.5), ("b", 0.4)])),
            Err(Error::WeightSum(_))
        ));
        assert!(SourceWeighting::new(w(&[("a", 1.0), ("b", 0.0)])).is_err());
        assert!(SourceWeighting::new(vec![]).is_err());
        let p = SourceWeighting::parse("a:0.3,b:0.7000000001", 1e-9).unwrap();
        let sum: f64 = p.entries().iter().map(|e| e.1).sum();
        assert!((sum - 1.0).abs() <= WEIGHT_SUM_TOL);
        assert!(matches!(
            SourceWeighting::parse("a:0.3,b:0.71", 1e-9),
            Err(Error::WeightSum(_))
        ));
        assert!(SourceWeighting::parse("a=1", 1e-9).is_err());
    }

    #[test]
    fn unknown_tag_reported() {
        let b = gaussian_model(ModelRole::Ladm, "b", vec![0.0, 0.0]);
        let r = multi_source_sample(
            &BTreeMap::new(),
            &b,
            &[&[0.0, 0.0]],
            &SourceWeighting::single("nope"),
            &ode(),
            None,
        );
        assert!(matches!(r, Err(Error::UnknownTag(t)) if t == "nope"));
    }

    #[test]
    fn weighted_latents_average_linearly() {
        // Identical zero-mean unit Gaussians: the flow is the identity map, so the
        // output is the rho-weighted average of the inputs.
        let a = gaussian_model(ModelRole::Source, "a", vec![0.0, 0.0]);
        let mut sources = BTreeMap::new();
        sources.insert("a".into(), a.clone());
        sources.insert("b".into(), a.clone());
        let w = SourceWeighting::new(vec![("a".into(), 0.25), ("b".into(), 0.75)]).unwrap();
        let out = multi_source_sample(&sources, &a, &[&[4.0, 0.0], &[0.0, 4.0]], &w, &ode(), None)
            .unwrap();
        assert!((out[0] - 1.0).abs() < 1e-12 && (out[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn training_pipeline_runs_and_transfers() {
        use crate::datasets::{generate, make_pairs, DatasetKind, DatasetSpec, PairingMap};
        let mut rng = Rng::new(3);
        let src = generate(
            &DatasetSpec {
                kind: DatasetKind::TwoMoons,
                n: 64,
                noise: 0.05,
                dim: 2,
            },
            &mut rng,
        )
        .unwrap();
        let split = make_pairs(&src, &PairingMap::default(), 0.5, "target", &mut rng).unwrap();
        let net = NetConfig {
            hidden_dims: vec![16],
            ..NetConfig::default()
        };
        let cfg = TrainConfig {
            steps: 20,
            batch_size: 16,
            ..TrainConfig::default()
        };
        let (s, _) = train_source_ldm(
            &src,
            Autoencoder::identity(2),
            NoiseSchedule::default(),
            &net,
            &cfg,
        )
        .unwrap();
        let fast = OdeConfig {
            n_steps: 10,
            ..ode()
        };
        let lp =
            transfer_correspondences(&s, &Autoencoder::identity(2), &split.paired, &fast).unwrap();
        assert_eq!(lp.len(), split.paired.len());
        let (t, rep) = train_ladm(
            &[lp],
            std::slice::from_ref(&split.unpaired_target),
            Autoencoder::identity(2),
            NoiseSchedule::default(),
            &net,
            &cfg,
        )
        .unwrap();
        assert_eq!(rep.losses.len(), 20);
        let meta = t.training.as_ref().unwrap();
        assert_eq!(meta.paired_count + meta.unpaired_count, 64);
        let out = ladb_sample(&s, &t, &src.points[..8], &fast, None).unwrap();
        assert_eq!(out.len(), 8);
    }
}
