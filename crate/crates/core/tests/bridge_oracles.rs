mod common;

use ladb_core::baselines::{
    bridge_mean, bridge_score, bridge_target_bound, bridge_variance, ddbm_sample_batch, ddbm_train,
    BridgeConfig, BridgeScore, PointBridgeScore,
};
use ladb_core::datasets::{Batch, Pairs};
use ladb_core::diffusion::TrainConfig;
use ladb_core::ladb::NetConfig;
use ladb_core::nd::AdamConfig;
use proptest::prelude::*;

#[test]
fn trained_singleton_score_vanishes_at_the_bridge_mean() {
    let (x0, y) = ([1.0, -0.5], [-0.5, 1.5]);
    let pairs = Pairs::new(
        Batch::new(2, y.to_vec(), "source").unwrap(),
        Batch::new(2, x0.to_vec(), "target").unwrap(),
    )
    .unwrap();
    // Keeping training away from the endpoints, where the noise target is steepest,
    // leaves capacity for the interior.
    let bridge = BridgeConfig {
        t_min: 0.05,
        ..BridgeConfig::default()
    };
    let net_cfg = NetConfig {
        hidden_dims: vec![32, 32],
        ..NetConfig::default()
    };
    let cfg = TrainConfig {
        steps: 3000,
        batch_size: 128,
        adam: AdamConfig {
            lr: 1e-2,
            ..AdamConfig::default()
        },
        seed: 2,
        ..TrainConfig::default()
    };
    let (net, _) = ddbm_train(&pairs, &bridge, &net_cfg, &cfg).unwrap();
    assert!((bridge_variance(1.0, 0.5) - 0.25).abs() < 1e-15);
    let mean = bridge_mean(&x0, &y, 0.5);
    let s = net.score_batch(&mean, 0.5, &y).unwrap();
    let norm = (s[0] * s[0] + s[1] * s[1]).sqrt();
    assert!(norm <= 1e-2, "score at the mean {s:?}");
}

#[test]
fn exact_pinned_score_concentrates_on_the_target() {
    let x0 = vec![2.0, -1.0];
    let score = PointBridgeScore {
        x0: x0.clone(),
        sigma_c: 1.0,
    };
    let cfg = BridgeConfig::default();
    let runs = 100;
    let ys: Vec<f64> = (0..runs).flat_map(|_| [0.0, 0.0]).collect();
    let out = ddbm_sample_batch(&score, &ys, &cfg, 3).unwrap();
    // Terminal spread is the bridge standard deviation at t_min.
    let tol = 3.0 * bridge_variance(cfg.sigma_c, cfg.t_min).sqrt() / (runs as f64).sqrt();
    for k in 0..2 {
        let (m, _) = common::mean_and_var(&common::column(&out, 2, k));
        assert!(
            (m - x0[k]).abs() <= tol,
            "coordinate {k}: mean {m}, tol {tol}"
        );
    }
}

#[test]
fn two_seeds_differ_but_agree_in_distribution() {
    let score = PointBridgeScore {
        x0: vec![0.5, 0.5],
        sigma_c: 1.0,
    };
    let cfg = BridgeConfig {
        t_min: 0.1,
        ..BridgeConfig::default()
    };
    let n = 1000;
    let ys: Vec<f64> = (0..n).flat_map(|_| [-1.0, 1.0]).collect();
    let a = ddbm_sample_batch(&score, &ys, &cfg, 1).unwrap();
    let b = ddbm_sample_batch(&score, &ys, &cfg, 2).unwrap();
    assert_ne!(a, b);
    for k in 0..2 {
        let (ma, va) = common::mean_and_var(&common::column(&a, 2, k));
        let (mb, vb) = common::mean_and_var(&common::column(&b, 2, k));
        let se = ((va + vb) / n as f64).sqrt();
        assert!((ma - mb).abs() <= 4.0 * se, "means {ma} vs {mb}");
        // Variance ratio of two normal samples: log-ratio std is about sqrt(4 / n).
        assert!(
            (va / vb).ln().abs() <= 4.0 * (4.0 / n as f64).sqrt(),
            "variances {va} vs {vb}"
        );
    }
}

proptest! {
    #[test]
    fn score_target_scales_with_inverse_std_and_stays_bounded(
        t in 1e-3f64..(1.0 - 1e-3),
        e0 in -4.0f64..4.0,
        e1 in -4.0f64..4.0,
        sigma_c in 0.2f64..2.0,
    ) {
        let (x0, x1) = ([0.3, -0.7], [1.1, 0.4]);
        let sd = bridge_variance(sigma_c, t).sqrt();
        let m = bridge_mean(&x0, &x1, t);
        let x = [m[0] + sd * e0, m[1] + sd * e1];
        let s = bridge_score(&x, &x0, &x1, t, sigma_c);
        let norm = (s[0] * s[0] + s[1] * s[1]).sqrt();
        let e_norm = (e0 * e0 + e1 * e1).sqrt();
        prop_assert!((norm - e_norm / sd).abs() <= 1e-9 * (1.0 + norm));
        prop_assert!(norm <= bridge_target_bound(sigma_c, 1e-3, e_norm) * (1.0 + 1e-12) + 1e-12);
    }
}
