//! Fixed-step explicit integrators over `[t_min, 1]`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, ensure_finite, Error, Result};

/// A time-dependent vector field evaluated on a batch of points sharing one time.
pub trait VectorField {
    fn dim(&self) -> usize;

    /// `xs` and `out` are `(n, dim)` row-major.
    fn eval_batch(&self, xs: &[f64], t: f64, out: &mut [f64]) -> Result<()>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OdeMethod {
    Euler,
    #[default]
    Heun,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `t_min -> 1` (data to prior).
    #[default]
    Forward,
    /// `1 -> t_min` (prior to data).
    Reverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OdeConfig {
    pub n_steps: usize,
    pub method: OdeMethod,
    pub direction: Direction,
    pub t_min: f64,
    /// After a reverse probability-flow solve, jump from `t_min` to the posterior mean
    /// `(x - sigma eps) / alpha`. Off by default so forward/reverse stay mutual inverses.
    pub denoise_final: bool,
}

impl Default for OdeConfig {
    fn default() -> Self {
        Self {
            n_steps: 100,
            method: OdeMethod::Heun,
            direction: Direction::Forward,
            t_min: 1e-4,
            denoise_final: false,
        }
    }
}

impl OdeConfig {
    pub fn forward(self) -> Self {
        Self {
            direction: Direction::Forward,
            ..self
        }
    }

    pub fn reverse(self) -> Self {
        Self {
            direction: Direction::Reverse,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.t_min) {
            return Err(Error::InvalidArgument(format!(
                "t_min must lie in [0, 1), got {}",
                self.t_min
            )));
        }
        Ok(())
    }

    /// Grid nodes in integration order. Forward and reverse use the same node values.
    pub fn time_grid(&self) -> Vec<f64> {
        let n = self.n_steps;
        let span = 1.0 - self.t_min;
        let ascending = (0..=n).map(|k| {
            if k == n {
                1.0
            } else {
                self.t_min + span * (k as f64 / n as f64)
            }
        });
        match self.direction {
            Direction::Forward => ascending.collect(),
            Direction::Reverse => {
                let mut v: Vec<f64> = ascending.collect();
                v.reverse();
                v
            }
        }
    }
}

/// Path of a single solve, stored in integration order (times descend for reverse solves).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
}

impl Trajectory {
    /// CSV with header `t,x0,...,x{d-1}`, one row per node.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let d = self.points.first().map_or(0, Vec::len);
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((0..d).map(|i| format!("x{i}")));
        w.write_record(&header)?;
        for (t, p) in self.times.iter().zip(&self.points) {
            let mut row = vec![t.to_string()];
            row.extend(p.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<trajectory>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        crate::io::write_atomic(path, &buf)
    }
}

#[allow(clippy::too_many_arguments)]
fn step<F: VectorField + ?Sized>(
    field: &F,
    method: OdeMethod,
    x: &mut [f64],
    t0: f64,
    t1: f64,
    k1: &mut [f64],
    k2: &mut [f64],
    tmp: &mut [f64],
) -> Result<()> {
    let h = t1 - t0;
    field.eval_batch(x, t0, k1)?;
    match method {
        OdeMethod::Euler => {
            for (xi, ki) in x.iter_mut().zip(k1.iter()) {
                *xi += h * ki;
            }
        }
        OdeMethod::Heun => {
            for ((ti, xi), ki) in tmp.iter_mut().zip(x.iter()).zip(k1.iter()) {
                *ti = xi + h * ki;
            }
            field.eval_batch(tmp, t1, k2)?;
            for ((xi, a), b) in x.iter_mut().zip(k1.iter()).zip(k2.iter()) {
                *xi += 0.5 * h * (a + b);
            }
        }
    }
    Ok(())
}

fn integrate<F: VectorField + ?Sized>(
    field: &F,
    xs: &[f64],
    cfg: &OdeConfig,
    mut record: Option<&mut Trajectory>,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let d = field.dim();
    if d == 0 || !xs.len().is_multiple_of(d) {
        return Err(Error::Shape {
            what: "ode state",
            expected: d,
            got: xs.len(),
        });
    }
    ensure_finite("ode initial state", xs)?;
    let grid = cfg.time_grid();
    let mut x = xs.to_vec();
    let mut k1 = vec![0.0; x.len()];
    let mut k2 = vec![0.0; x.len()];
    let mut tmp = vec![0.0; x.len()];
    for (i, w) in grid.windows(2).enumerate() {
        step(
            field, cfg.method, &mut x, w[0], w[1], &mut k1, &mut k2, &mut tmp,
        )?;
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Integration { step: i });
        }
        if let Some(traj) = record.as_deref_mut() {
            traj.times.push(w[1]);
            traj.points.push(x.clone());
        }
    }
    Ok(x)
}

/// Integrates one point and records every node.
pub fn ode_solve<F: VectorField + ?Sized>(
    field: &F,
    x_init: &[f64],
    cfg: &OdeConfig,
) -> Result<(Vec<f64>, Trajectory)> {
    ensure_dim("ode initial state", field.dim(), x_init.len())?;
    let grid = cfg.time_grid();
    let mut traj = Trajectory {
        times: vec![grid[0]],
        points: vec![x_init.to_vec()],
    };
    let end = integrate(field, x_init, cfg, Some(&mut traj))?;
    Ok((end, traj))
}

/// Integrates many points in lock-step; `xs` is `(n, dim)` row-major.
pub fn ode_solve_batch<F: VectorField + ?Sized>(
    field: &F,
    xs: &[f64],
    cfg: &OdeConfig,
) -> Result<Vec<f64>> {
    integrate(field, xs, cfg, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay;

    impl VectorField for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn eval_batch(&self, xs: &[f64], _t: f64, out: &mut [f64]) -> Result<()> {
            for (o, x) in out.iter_mut().zip(xs) {
                *o = -x;
            }
            Ok(())
        }
    }

    struct Blowup;

    impl VectorField for Blowup {
        fn dim(&self) -> usize {
            1
        }
        fn eval_batch(&self, xs: &[f64], _t: f64, out: &mut [f64]) -> Result<()> {
            for (o, x) in out.iter_mut().zip(xs) {
                *o = x * x * 1e200;
            }
            Ok(())
        }
    }

    #[test]
    fn grid_endpoints_and_symmetry() {
        let cfg = OdeConfig {
            n_steps: 7,
            ..OdeConfig::default()
        };
        let f = cfg.time_grid();
        let mut r = cfg.reverse().time_grid();
        assert_eq!(f[0], 1e-4);
        assert_eq!(*f.last().unwrap(), 1.0);
        r.reverse();
        assert_eq!(f, r);
    }

    #[test]
    fn heun_on_exponential_decay() {
        let cfg = OdeConfig {
            n_steps: 100,
            t_min: 0.0,
            ..OdeConfig::default()
        };
        let (end, traj) = ode_solve(&Decay, &[2.0], &cfg).unwrap();
        assert!((end[0] / (2.0 * (-1.0f64).exp()) - 1.0).abs() < 1e-3);
        assert_eq!(traj.times.len(), 101);
        assert_eq!(traj.points[0], vec![2.0]);
    }

    #[test]
    fn non_finite_state_reports_step() {
        let cfg = OdeConfig {
            n_steps: 50,
            method: OdeMethod::Euler,
            t_min: 0.0,
            ..OdeConfig::default()
        };
        assert!(matches!(
            ode_solve(&Blowup, &[10.0], &cfg),
            Err(Error::Integration { .. })
        ));
    }

    #[test]
    fn zero_steps_rejected() {
        let cfg = OdeConfig {
            n_steps: 0,
            ..OdeConfig::default()
        };
        assert!(ode_solve(&Decay, &[1.0], &cfg).is_err());
    }

    #[test]
    fn trajectory_csv_header() {
        let cfg = OdeConfig {
            n_steps: 2,
            t_min: 0.0,
            ..OdeConfig::default()
        };
        let (_, traj) = ode_solve(&Decay, &[1.0], &cfg).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,x0\n0,1\n0.5,"));
        assert_eq!(text.lines().count(), 4);
    }
}
