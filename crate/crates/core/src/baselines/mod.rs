//! Comparison points: DDIB (independent couplings on both sides) and a toy
//! fully paired diffusion bridge.

mod ddbm;

pub use ddbm::{
    bridge_mean, bridge_score, bridge_target_bound, bridge_variance, ddbm_sample,
    ddbm_sample_batch, ddbm_sample_path, ddbm_train, forward_kernel_score, h_transform,
    BridgeConfig, BridgeKind, BridgeNet, BridgeScore, PointBridgeScore,
};

use crate::datasets::Batch;
use crate::diffusion::{OdeConfig, TrainConfig, TrainReport};
use crate::error::Result;
use crate::ladb::{ladb_sample, train_source_ldm, Autoencoder, LadmModel, ModelRole, NetConfig};
use crate::schedule::NoiseSchedule;

/// Target model for DDIB: trained on target data with the independent coupling only.
pub fn train_ddib_target(
    data: &Batch,
    autoencoder: Autoencoder,
    schedule: NoiseSchedule,
    net: &NetConfig,
    cfg: &TrainConfig,
) -> Result<(LadmModel, TrainReport)> {
    let (mut m, report) = train_source_ldm(data, autoencoder, schedule, net, cfg)?;
    m.role = ModelRole::DdibTarget;
    Ok((m, report))
}

/// DDIB translation. Mechanically identical to [`ladb_sample`]; only the coupling
/// that trained `target` differs.
pub fn ddib_translate(
    source: &LadmModel,
    target: &LadmModel,
    xs: &[f64],
    ode: &OdeConfig,
) -> Result<Vec<f64>> {
    ladb_sample(source, target, xs, ode, None)
}
