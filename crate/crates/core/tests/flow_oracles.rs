mod common;

use ladb_core::diffusion::{
    cycle, drift, flow_solve_batch, ode_solve_batch, Direction, GaussianScore, OdeConfig,
    OdeMethod, VectorField, ZeroPredictor,
};
use ladb_core::nd::Rng;
use ladb_core::schedule::NoiseSchedule;
use proptest::prelude::*;

/// Composite Simpson rule with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn terminal_alpha_matches_quadrature() {
    let s = NoiseSchedule::default();
    for t in [0.05, 0.3, 0.77, 1.0] {
        let integral = simpson(|u| s.beta(u), 0.0, t, 64);
        let quad = (-0.5 * integral).exp();
        assert!((s.alpha(t).unwrap() - quad).abs() <= 1e-10, "t = {t}");
    }
    assert!((s.alpha(1.0).unwrap() - 6.56e-3).abs() < 2e-5);
}

#[test]
fn variance_preserving_on_a_dense_grid() {
    let s = NoiseSchedule::default();
    for k in 0..1000 {
        let t = k as f64 / 999.0;
        let e = s.eval(t).unwrap();
        assert!((e.alpha * e.alpha + e.sigma * e.sigma - 1.0).abs() <= 1e-12);
    }
}

proptest! {
    #[test]
    fn variance_preserving_for_any_schedule(lo in 0.0f64..5.0, span in 0.0f64..40.0, t in 0.0f64..=1.0) {
        let s = NoiseSchedule::vp(lo, lo + span).unwrap();
        let e = s.eval(t).unwrap();
        prop_assert!((e.alpha * e.alpha + e.sigma * e.sigma - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn schedule_is_monotone(t1 in 0.0f64..1.0, dt in 1e-6f64..1.0) {
        let s = NoiseSchedule::default();
        let t2 = (t1 + dt).min(1.0);
        prop_assume!(t2 > t1);
        prop_assert!(s.alpha(t1).unwrap() > s.alpha(t2).unwrap());
        prop_assert!(s.sigma(t1).unwrap() < s.sigma(t2).unwrap());
    }
}

/// Exact probability-flow map for data `N(mean, var I)` between times `ta` and `tb`.
fn gaussian_flow(
    s: &NoiseSchedule,
    mean: &[f64],
    var: f64,
    x: &[f64],
    ta: f64,
    tb: f64,
) -> Vec<f64> {
    let (a, b) = (s.eval(ta).unwrap(), s.eval(tb).unwrap());
    let sa = (a.alpha * a.alpha * var + a.sigma * a.sigma).sqrt();
    let sb = (b.alpha * b.alpha * var + b.sigma * b.sigma).sqrt();
    x.iter()
        .zip(mean)
        .map(|(xi, m)| b.alpha * m + sb / sa * (xi - a.alpha * m))
        .collect()
}

#[test]
fn gaussian_drift_matches_symbolic_expression() {
    let s = NoiseSchedule::default();
    let (mean, var) = (vec![0.7, -1.2], 0.5);
    let g = GaussianScore::new(mean.clone(), var, s).unwrap();
    for k in 0..10 {
        let t = 0.05 + 0.09 * k as f64;
        let x = [0.3 * k as f64 - 1.0, 1.0 - 0.2 * k as f64];
        let v = drift(&g, &s, &x, t, 1e-4).unwrap();
        let e = s.eval(t).unwrap();
        let denom = e.alpha * e.alpha * var + e.sigma * e.sigma;
        for i in 0..2 {
            let score = -(x[i] - e.alpha * mean[i]) / denom;
            let expect = e.f_scale * x[i] - 0.5 * e.g * e.g * score;
            assert!((v[i] - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
        }
    }
}

#[test]
fn zero_predictor_with_frozen_schedule_is_identity() {
    let s = NoiseSchedule::frozen();
    let xs = [1.0, -2.0, 0.5, 3.0];
    let out = flow_solve_batch(
        &ZeroPredictor { dim: 2 },
        &s,
        &xs,
        &OdeConfig::default(),
        None,
    )
    .unwrap();
    assert_eq!(out, xs.to_vec());
}

#[test]
fn gaussian_forward_solve_matches_closed_form() {
    let s = NoiseSchedule::default();
    let (mean, var) = (vec![2.0, -1.0], 0.3);
    let g = GaussianScore::new(mean.clone(), var, s).unwrap();
    let cfg = OdeConfig::default();
    let mut rng = Rng::new(11);
    let xs = rng.normal_vec(40);
    let out = flow_solve_batch(&g, &s, &xs, &cfg.forward(), None).unwrap();
    for (x, y) in xs.chunks(2).zip(out.chunks(2)) {
        let exact = gaussian_flow(&s, &mean, var, x, cfg.t_min, 1.0);
        for i in 0..2 {
            let rel = (y[i] - exact[i]).abs() / exact[i].abs().max(1.0);
            assert!(rel <= 1e-3, "{} vs {}", y[i], exact[i]);
        }
    }
}

#[test]
fn gaussian_cycle_is_reversible() {
    let s = NoiseSchedule::default();
    let g = GaussianScore::new(vec![1.0, 0.5], 0.8, s).unwrap();
    let cfg = OdeConfig {
        n_steps: 200,
        ..OdeConfig::default()
    };
    let xs = Rng::new(5).normal_vec(200);
    let back = cycle(&g, &s, &xs, &cfg).unwrap();
    for (a, b) in xs.iter().zip(&back) {
        assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
    }
}

struct Decay;

impl VectorField for Decay {
    fn dim(&self) -> usize {
        1
    }
    fn eval_batch(&self, xs: &[f64], _t: f64, out: &mut [f64]) -> ladb_core::Result<()> {
        for (o, x) in out.iter_mut().zip(xs) {
            *o = -x;
        }
        Ok(())
    }
}

fn decay_error(method: OdeMethod, n_steps: usize) -> f64 {
    let cfg = OdeConfig {
        n_steps,
        method,
        direction: Direction::Forward,
        t_min: 0.0,
        denoise_final: false,
    };
    let x = ode_solve_batch(&Decay, &[1.0], &cfg).unwrap()[0];
    (x - (-1.0f64).exp()).abs() / (-1.0f64).exp()
}

#[test]
fn heun_on_exponential_decay() {
    assert!(decay_error(OdeMethod::Heun, 100) <= 1e-3);
    let ratio = decay_error(OdeMethod::Heun, 100) / decay_error(OdeMethod::Heun, 200);
    assert!((ratio - 4.0).abs() < 0.2, "halving ratio {ratio}");
}

#[test]
fn euler_and_heun_orders_on_gaussian_flow() {
    let s = NoiseSchedule::default();
    let (mean, var) = (vec![1.5], 0.25);
    let g = GaussianScore::new(mean.clone(), var, s).unwrap();
    let x0 = [1.2];
    let t_min = 1e-2;
    let exact = gaussian_flow(&s, &mean, var, &x0, t_min, 1.0)[0];
    let err = |method, n_steps| {
        let cfg = OdeConfig {
            n_steps,
            method,
            t_min,
            ..OdeConfig::default()
        };
        (flow_solve_batch(&g, &s, &x0, &cfg, None).unwrap()[0] - exact).abs()
    };
    for (method, want) in [(OdeMethod::Euler, 0.9), (OdeMethod::Heun, 1.8)] {
        let slope = (err(method, 400) / err(method, 800)).log2();
        assert!(slope >= want, "{method:?} slope {slope}");
    }
}
