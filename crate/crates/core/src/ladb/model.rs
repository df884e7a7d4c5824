use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diffusion::{NoisePredictor, ScoreModel};
use crate::error::{Error, Result};
use crate::io::{read_json, write_json};
use crate::ladb::Autoencoder;
use crate::nd::{Activation, MlpSpec};
use crate::schedule::NoiseSchedule;

/// Network shape shared by every stage; input and output widths follow the data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfig {
    pub hidden_dims: Vec<usize>,
    pub activation: Activation,
    pub time_embedding_dim: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        let s = MlpSpec::for_dim(1);
        Self {
            hidden_dims: s.hidden_dims,
            activation: s.activation,
            time_embedding_dim: s.time_embedding_dim,
        }
    }
}

impl NetConfig {
    pub fn spec(&self, dim: usize, condition_dim: usize) -> MlpSpec {
        MlpSpec {
            input_dim: dim,
            hidden_dims: self.hidden_dims.clone(),
            output_dim: dim,
            activation: self.activation,
            time_embedding_dim: self.time_embedding_dim,
            condition_dim,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelRole {
    /// Unconditional model of a source domain.
    Source,
    /// Target model trained on the semi-supervised coupling.
    Ladm,
    /// Target model trained on the independent coupling only.
    DdibTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingMeta {
    pub seed: u64,
    pub steps: usize,
    pub batch_size: usize,
    pub final_loss: Option<f64>,
    pub paired_count: usize,
    pub unpaired_count: usize,
}

/// A diffusion model over one domain: autoencoder, noise predictor, schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadmModel {
    pub role: ModelRole,
    pub domain_tag: String,
    pub autoencoder: Autoencoder,
    pub schedule: NoiseSchedule,
    pub score: ScoreModel,
    pub training: Option<TrainingMeta>,
}

impl LadmModel {
    pub fn new(
        role: ModelRole,
        domain_tag: impl Into<String>,
        autoencoder: Autoencoder,
        schedule: NoiseSchedule,
        score: ScoreModel,
    ) -> Result<Self> {
        let m = Self {
            role,
            domain_tag: domain_tag.into(),
            autoencoder,
            schedule,
            score,
            training: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if self.autoencoder.latent_dim() != self.score.dim() {
            return Err(Error::Shape {
                what: "score model width vs autoencoder latent dimension",
                expected: self.autoencoder.latent_dim(),
                got: self.score.dim(),
            });
        }
        Ok(())
    }

    pub fn latent_dim(&self) -> usize {
        self.autoencoder.latent_dim()
    }

    pub fn data_dim(&self) -> usize {
        self.autoencoder.data_dim()
    }

    /// Number of classes of a conditional model, zero otherwise.
    pub fn num_classes(&self) -> usize {
        self.score.condition_dim()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingPrerequisite(path.to_path_buf()));
        }
        let m: LadmModel = read_json(path)?;
        m.validate()?;
        Ok(m)
    }
}
