//! Experiment configuration: one strict JSON document describing data, models,
//! training budgets, integrators, metrics and the benchmark grid.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::BridgeConfig;
use crate::datasets::{DatasetKind, DatasetSpec, PairingMap};
use crate::diffusion::{OdeConfig, TrainConfig};
use crate::error::{Error, Result};
use crate::eval::MetricConfig;
use crate::ladb::NetConfig;
use crate::nd::Rng;
use crate::schedule::NoiseSchedule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    /// Map from the shared base sample to this source domain.
    #[serde(default = "identity_map")]
    pub transform: PairingMap,
}

fn identity_map() -> PairingMap {
    PairingMap::Identity
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            transform: identity_map(),
        }
    }
}

/// Every domain is an image of one base sample: source `j` is `transform_j(base)`
/// and the target is `target_map(base)`, so aligned ground truth is always known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub base: DatasetSpec,
    #[serde(default = "default_sources")]
    pub sources: BTreeMap<String, SourceConfig>,
    #[serde(default)]
    pub target_map: PairingMap,
    #[serde(default = "default_fraction")]
    pub fraction: f64,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    /// Train the target model class-conditionally on the base labels.
    #[serde(default)]
    pub conditional: bool,
}

fn default_sources() -> BTreeMap<String, SourceConfig> {
    BTreeMap::from([("source".to_string(), SourceConfig::default())])
}

fn default_fraction() -> f64 {
    0.25
}

fn default_n_test() -> usize {
    2000
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            base: DatasetSpec {
                kind: DatasetKind::TwoMoons,
                n: 4000,
                noise: 0.05,
                dim: 2,
            },
            sources: default_sources(),
            target_map: PairingMap::default(),
            fraction: default_fraction(),
            n_test: default_n_test(),
            conditional: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StageTrainConfigs {
    pub source: TrainConfig,
    pub ladm: TrainConfig,
    pub ddib_target: TrainConfig,
    pub ddbm: TrainConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ddib,
    Ddbm,
    Ladb,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ddib => "ddib",
            Method::Ddbm => "ddbm",
            Method::Ladb => "ladb",
        }
    }
}

/// Multi-source interpolation task run by the benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterpConfig {
    pub fraction: f64,
    /// Points on the rho path from the first source to the second, endpoints included.
    pub steps: usize,
    /// Test points whose full rho path is traced.
    pub path_points: usize,
}

impl Default for InterpConfig {
    fn default() -> Self {
        Self {
            fraction: 0.5,
            steps: 11,
            path_points: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub methods: Vec<Method>,
    pub fractions: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Source used by the single-source grid; defaults to the first tag.
    pub primary_source: Option<String>,
    /// Requires at least two sources; uses the first two tags.
    pub interp: Option<InterpConfig>,
    /// Write per-cell translated samples next to the report.
    pub dump_samples: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            methods: vec![Method::Ddib, Method::Ddbm, Method::Ladb],
            fractions: vec![0.1, 0.25, 0.5, 1.0],
            seeds: vec![0, 1, 2],
            primary_source: None,
            interp: None,
            dump_samples: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub schedule: NoiseSchedule,
    #[serde(default)]
    pub net: NetConfig,
    #[serde(default)]
    pub train: StageTrainConfigs,
    #[serde(default)]
    pub ode: OdeConfig,
    #[serde(default)]
    pub bridge: BridgeConfig,
    #[serde(default)]
    pub metrics: MetricConfig,
    #[serde(default)]
    pub bench: BenchConfig,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("run")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: default_out_dir(),
            data: DataConfig::default(),
            schedule: NoiseSchedule::default(),
            net: NetConfig::default(),
            train: StageTrainConfigs::default(),
            ode: OdeConfig::default(),
            bridge: BridgeConfig::default(),
            metrics: MetricConfig::default(),
            bench: BenchConfig::default(),
        }
    }
}

fn config_err(key: impl Into<String>, reason: impl ToString) -> Error {
    Error::Config {
        key: key.into(),
        reason: reason.to_string(),
    }
}

/// Attaches `key` to any library validation error.
fn at<T>(key: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| config_err(key, e))
}

pub const STAGES: [&str; 4] = ["source", "ladm", "ddib_target", "ddbm"];

impl ExperimentConfig {
    /// Parses strict JSON; unknown or mistyped keys are reported with their dotted path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let msg = inner.to_string();
            let key = match msg.split('`').nth(1) {
                Some(field) if path == "." && msg.starts_with("unknown field") => field.to_string(),
                _ => path,
            };
            config_err(key, inner)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingPrerequisite(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.data;
        if d.sources.is_empty() {
            return Err(config_err(
                "data.sources",
                "at least one source is required",
            ));
        }
        if d.base.n == 0 {
            return Err(config_err("data.base.n", "must be positive"));
        }
        if !(d.base.noise.is_finite() && d.base.noise >= 0.0) {
            return Err(config_err(
                "data.base.noise",
                "must be a finite non-negative number",
            ));
        }
        if !(2..=crate::datasets::MAX_DIM).contains(&d.base.dim) {
            return Err(config_err("data.base.dim", "must lie in 2..=16"));
        }
        for (tag, s) in &d.sources {
            if tag.is_empty() || tag.contains([',', ':', '.', '/']) {
                return Err(config_err(
                    format!("data.sources.{tag}"),
                    "tags must be non-empty without ',', ':', '.' or '/'",
                ));
            }
            at(
                &format!("data.sources.{tag}.transform"),
                s.transform.validate(d.base.dim),
            )?;
            at(
                &format!("data.sources.{tag}.transform"),
                s.transform.inverse(d.base.dim).map(|_| ()),
            )?;
        }
        at("data.target_map", d.target_map.validate(d.base.dim))?;
        if !(0.0..=1.0).contains(&d.fraction) {
            return Err(config_err("data.fraction", "must lie in [0, 1]"));
        }
        if d.n_test < 2 {
            return Err(config_err("data.n_test", "must be at least 2"));
        }
        at("schedule", self.schedule.validate())?;
        if self.net.time_embedding_dim == 0 || !self.net.time_embedding_dim.is_multiple_of(2) {
            return Err(config_err(
                "net.time_embedding_dim",
                "must be even and positive",
            ));
        }
        if self.net.hidden_dims.contains(&0) {
            return Err(config_err("net.hidden_dims", "widths must be positive"));
        }
        for (name, t) in STAGES.iter().zip(self.stage_configs()) {
            at(&format!("train.{name}"), t.validate())?;
            if t.seed != 0 {
                return Err(config_err(
                    format!("train.{name}.seed"),
                    "stage seeds are derived from the top-level `seed`",
                ));
            }
        }
        at("ode", self.ode.validate())?;
        at("bridge", self.bridge.validate())?;
        at("metrics", self.metrics.validate())?;
        let b = &self.bench;
        if b.methods.is_empty() {
            return Err(config_err("bench.methods", "must not be empty"));
        }
        if b.fractions.is_empty() || b.fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            return Err(config_err(
                "bench.fractions",
                "need one or more fractions in (0, 1]",
            ));
        }
        if b.seeds.is_empty() {
            return Err(config_err("bench.seeds", "must not be empty"));
        }
        if let Some(p) = &b.primary_source {
            if !d.sources.contains_key(p) {
                return Err(config_err(
                    "bench.primary_source",
                    format!("unknown source `{p}`"),
                ));
            }
        }
        if let Some(i) = &b.interp {
            if d.sources.len() < 2 {
                return Err(config_err("bench.interp", "needs at least two sources"));
            }
            if !(i.fraction > 0.0 && i.fraction <= 1.0) {
                return Err(config_err("bench.interp.fraction", "must lie in (0, 1]"));
            }
            if i.steps < 2 {
                return Err(config_err("bench.interp.steps", "must be at least 2"));
            }
            if i.path_points == 0 {
                return Err(config_err("bench.interp.path_points", "must be positive"));
            }
        }
        Ok(())
    }

    fn stage_configs(&self) -> [&TrainConfig; 4] {
        let t = &self.train;
        [&t.source, &t.ladm, &t.ddib_target, &t.ddbm]
    }

    /// Training config of `stage` with its seed derived from `seed`.
    pub fn stage_train(&self, stage: &str, seed: u64) -> Result<TrainConfig> {
        let i = STAGES
            .iter()
            .position(|s| *s == stage)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown stage `{stage}`")))?;
        Ok(TrainConfig {
            seed: derive_seed(seed, stage),
            ..*self.stage_configs()[i]
        })
    }

    pub fn source_tags(&self) -> Vec<String> {
        self.data.sources.keys().cloned().collect()
    }

    pub fn primary_source(&self) -> String {
        self.bench
            .primary_source
            .clone()
            .unwrap_or_else(|| self.source_tags()[0].clone())
    }
}

/// Seed of the named child stream of `seed`.
pub fn derive_seed(seed: u64, name: &str) -> u64 {
    Rng::new(seed).fork(name).seed()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        let back = ExperimentConfig::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_are_named() {
        let e = ExperimentConfig::from_json(
            r#"{"data": {"base": {"kind": {"name": "two_moons"}, "n": 10, "nosie": 0.1}}}"#,
        )
        .unwrap_err();
        match e {
            Error::Config { key, .. } => assert_eq!(key, "data.base.nosie"),
            other => panic!("{other}"),
        }
        let e = ExperimentConfig::from_json(r#"{"sed": 1}"#).unwrap_err();
        assert!(matches!(e, Error::Config { key, .. } if key == "sed"));
    }

    #[test]
    fn semantic_errors_are_named() {
        let e = ExperimentConfig::from_json(r#"{"data": {"base": {"kind": {"name": "two_moons"}, "n": 10, "noise": 0.1}, "fraction": 1.5}}"#)
            .unwrap_err();
        assert!(matches!(e, Error::Config { key, .. } if key == "data.fraction"));
        let e =
            ExperimentConfig::from_json(r#"{"train": {"ladm": {"batch_size": 0}}}"#).unwrap_err();
        assert!(matches!(e, Error::Config { key, .. } if key == "train.ladm"));
        let e = ExperimentConfig::from_json(r#"{"train": {"source": {"seed": 3}}}"#).unwrap_err();
        assert!(matches!(e, Error::Config { key, .. } if key == "train.source.seed"));
        let e = ExperimentConfig::from_json(r#"{"bench": {"interp": {}}}"#).unwrap_err();
        assert!(matches!(e, Error::Config { key, .. } if key == "bench.interp"));
    }

    #[test]
    fn stage_seeds_differ_and_are_stable() {
        let c = ExperimentConfig::default();
        let a = c.stage_train("source", 5).unwrap().seed;
        assert_eq!(a, c.stage_train("source", 5).unwrap().seed);
        assert_ne!(a, c.stage_train("ladm", 5).unwrap().seed);
        assert_ne!(a, c.stage_train("source", 6).unwrap().seed);
    }
}
