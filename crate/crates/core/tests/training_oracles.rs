mod common;

use ladb_core::coupling::{CouplingMixture, IndependentCoupling, LatentPairs};
use ladb_core::datasets::Batch;
use ladb_core::diffusion::{dsm_train, NoisePredictor, OdeConfig, ScoreModel, TrainConfig};
use ladb_core::ladb::{decode_from_prior, train_ladm, train_source_ldm, Autoencoder, NetConfig};
use ladb_core::nd::{AdamConfig, MlpSpec, Rng, ScoreNet};
use ladb_core::schedule::NoiseSchedule;

fn net_cfg(hidden: usize) -> NetConfig {
    NetConfig {
        hidden_dims: vec![hidden, hidden],
        ..NetConfig::default()
    }
}

fn train_cfg(steps: usize, lr: f64, seed: u64) -> TrainConfig {
    TrainConfig {
        steps,
        batch_size: 128,
        adam: AdamConfig {
            lr,
            ..AdamConfig::default()
        },
        seed,
        ..TrainConfig::default()
    }
}

fn fresh_net(cfg: &NetConfig, seed: u64) -> ScoreNet {
    let spec: MlpSpec = cfg.spec(2, 0);
    ScoreNet::new(spec, &mut Rng::new(seed).fork("init")).unwrap()
}

#[test]
fn degenerate_data_learns_rescaled_input() {
    let s = NoiseSchedule::default();
    let zeros = Batch::new(2, vec![0.0; 2], "zero").unwrap();
    let nc = net_cfg(32);
    let mut net = fresh_net(&nc, 1);
    dsm_train(
        &mut net,
        &s,
        &IndependentCoupling { data: &zeros },
        &train_cfg(3000, 3e-3, 1),
    )
    .unwrap();
    let mut rng = Rng::new(2);
    let (mut se, mut n) = (0.0, 0);
    for k in 1..=10 {
        let t = k as f64 / 10.0;
        let sigma = s.sigma(t).unwrap();
        for _ in 0..50 {
            let z = rng.normal_vec(2);
            let x: Vec<f64> = z.iter().map(|v| sigma * v).collect();
            let eps = net.forward(&x, t, None).unwrap();
            se += eps
                .iter()
                .zip(&z)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / 2.0;
            n += 1;
        }
    }
    let mse = se / n as f64;
    assert!(mse <= 1e-2, "mse to x_t / sigma_t: {mse}");
}

#[test]
fn gaussian_data_recovers_analytic_score() {
    let s = NoiseSchedule::default();
    let std = 0.5;
    let data = common::gaussian_batch(20_000, &[0.0, 0.0], std, &mut Rng::new(3));
    let nc = net_cfg(64);
    let mut net = fresh_net(&nc, 4);
    dsm_train(
        &mut net,
        &s,
        &IndependentCoupling { data: &data },
        &train_cfg(6000, 3e-3, 4),
    )
    .unwrap();
    for t in [0.1, 0.5, 0.9] {
        let e = s.eval(t).unwrap();
        let var_t = e.alpha * e.alpha * std * std + e.sigma * e.sigma;
        let half = 3.0 * var_t.sqrt();
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..=10 {
            for j in 0..=10 {
                let x = [
                    -half + 2.0 * half * i as f64 / 10.0,
                    -half + 2.0 * half * j as f64 / 10.0,
                ];
                let eps = net.forward(&x, t, None).unwrap();
                for k in 0..2 {
                    let implied = -eps[k] / e.sigma;
                    let exact = -x[k] / var_t;
                    num += (implied - exact).powi(2);
                    den += exact * exact;
                }
            }
        }
        let rel = (num / den).sqrt();
        assert!(rel <= 5e-2, "t = {t}: relative score error {rel}");
    }
}

#[test]
fn paired_singleton_memorizes_its_line() {
    let s = NoiseSchedule::default();
    let x0 = [0.8, -0.4];
    let z = [-1.1, 0.6];
    let pairs = LatentPairs::new(
        Batch::new(2, x0.to_vec(), "t").unwrap(),
        Batch::new(2, z.to_vec(), "latent").unwrap(),
    )
    .unwrap();
    let mix = CouplingMixture::single(&pairs, &Batch::empty(2, "t")).unwrap();
    let nc = net_cfg(32);
    let mut net = fresh_net(&nc, 5);
    dsm_train(&mut net, &s, &mix, &train_cfg(3000, 3e-3, 5)).unwrap();
    let mut se = 0.0;
    for k in 0..=20 {
        let t = 0.01 + 0.99 * k as f64 / 20.0;
        let x = s.perturb(&x0, &z, t).unwrap();
        let eps = net.forward(&x, t, None).unwrap();
        se += eps
            .iter()
            .zip(&z)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / 2.0;
    }
    let mse = se / 21.0;
    assert!(mse <= 1e-3, "line mse {mse}");
}

#[test]
fn empty_paired_set_reproduces_independent_training() {
    let s = NoiseSchedule::default();
    let data = common::gaussian_batch(500, &[1.0, -1.0], 0.3, &mut Rng::new(6));
    let nc = net_cfg(16);
    let cfg = train_cfg(200, 1e-3, 7);
    let mut a = fresh_net(&nc, 8);
    let mut b = fresh_net(&nc, 8);
    let ra = dsm_train(&mut a, &s, &IndependentCoupling { data: &data }, &cfg).unwrap();
    let mix = CouplingMixture::single(&LatentPairs::empty(2), &data).unwrap();
    let rb = dsm_train(&mut b, &s, &mix, &cfg).unwrap();
    assert_eq!(ra.losses, rb.losses);
    assert_eq!(a, b);
}

#[test]
fn ladm_without_pairs_equals_source_model() {
    let s = NoiseSchedule::default();
    let data = common::gaussian_batch(300, &[0.0, 2.0], 0.5, &mut Rng::new(9)).retag("target");
    let nc = net_cfg(16);
    let cfg = train_cfg(100, 1e-3, 10);
    let ae = Autoencoder::Identity { dim: 2 };
    let (src, rs) = train_source_ldm(&data, ae.clone(), s, &nc, &cfg).unwrap();
    let (ladm, rl) = train_ladm(&[LatentPairs::empty(2)], &[data], ae, s, &nc, &cfg).unwrap();
    assert_eq!(rs.losses, rl.losses);
    assert_eq!(src.score, ladm.score);
}

#[test]
fn singleton_bridge_line_is_followed_by_the_reverse_flow() {
    let s = NoiseSchedule::default();
    let y = [1.5, 0.5];
    let z = [0.3, -0.9];
    let pairs = LatentPairs::new(
        Batch::new(2, y.to_vec(), "target").unwrap(),
        Batch::new(2, z.to_vec(), "latent").unwrap(),
    )
    .unwrap();
    let nc = net_cfg(32);
    let (model, _) = train_ladm(
        &[pairs],
        &[],
        Autoencoder::Identity { dim: 2 },
        s,
        &nc,
        &train_cfg(4000, 3e-3, 11),
    )
    .unwrap();
    // The net only ever sees the line, so start on it: at t = 1 the line point is
    // alpha_1 y + sigma_1 z rather than z itself, and an off-line offset is amplified
    // by 1 / alpha_1 on the way back.
    let start = s.perturb(&y, &z, 1.0).unwrap();
    // sigma_t ~ sqrt(t) near 0, so the last step needs a fine grid.
    let ode = OdeConfig {
        n_steps: 1000,
        ..OdeConfig::default()
    };
    let out = decode_from_prior(&model, &start, &ode, None).unwrap();
    let err = ((out[0] - y[0]).powi(2) + (out[1] - y[1]).powi(2)).sqrt();
    assert!(err <= 1e-2, "landed at {out:?}, error {err}");
}

#[test]
fn untrained_model_still_runs_end_to_end() {
    let s = NoiseSchedule::default();
    let data = common::gaussian_batch(50, &[0.0, 0.0], 1.0, &mut Rng::new(12));
    let (m, report) = train_source_ldm(
        &data,
        Autoencoder::Identity { dim: 2 },
        s,
        &net_cfg(8),
        &train_cfg(0, 1e-3, 0),
    )
    .unwrap();
    assert!(report.losses.is_empty());
    let out =
        decode_from_prior(&m, &Rng::new(1).normal_vec(20), &OdeConfig::default(), None).unwrap();
    assert!(out.iter().all(|v| v.is_finite()));
    assert!(matches!(m.score, ScoreModel::Net(_)));
    assert_eq!(m.score.dim(), 2);
}
