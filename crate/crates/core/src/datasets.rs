//! Synthetic point-cloud domains and analytic ground-truth pairings between them.
//!
//! Generative recipes (2-D; extra coordinates for `dim > 2` are `noise * N(0, 1)`):
//!
//! * `two_moons`: moon `m ~ Bernoulli(1/2)`, angle `a ~ U(0, pi)`; moon 0 is
//!   `(cos a, sin a)`, moon 1 is `(1 - cos a, 1/2 - sin a)`; everything is shifted by
//!   `(-1/2, -1/4)`, so both moons are unit semicircles centred at `(-1/2, -1/4)` and
//!   `(1/2, 1/4)`. Label = moon.
//! * `checkerboard`: uniform over the 8 dark cells `(i + j)` even of a 4x4 grid on
//!   `[-2, 2]^2`. Label = cell index.
//! * `gaussian_mixture`: component `k` uniform over `components`, centre at
//!   `radius * (cos 2 pi k/K, sin 2 pi k/K)`, std `noise`. Label = component.
//! * `spiral`: arm `m ~ Bernoulli(1/2)`, `s ~ U(0, 1)`, angle `a = 3 pi sqrt(s)`,
//!   point `(2a / 3 pi) (cos(a + m pi), sin(a + m pi))`. Label = arm.
//! * `isotropic_gaussian`: `noise * N(0, I_dim)`, unlabeled.
//!
//! Apart from `gaussian_mixture` (whose std is `noise`) and `isotropic_gaussian`,
//! `noise` is the std of isotropic Gaussian jitter added to every coordinate.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::io::{fmt_f64, Table};
use crate::nd::Rng;

pub const MAX_DIM: usize = 16;

/// Points in `R^dim` (row-major) with a domain tag and optional class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub dim: usize,
    pub points: Vec<f64>,
    pub domain_tag: String,
    pub labels: Option<Vec<usize>>,
}

impl Batch {
    pub fn new(dim: usize, points: Vec<f64>, domain_tag: impl Into<String>) -> Result<Self> {
        if dim == 0 || !points.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument(format!(
                "{} values do not form points of dimension {dim}",
                points.len()
            )));
        }
        Ok(Self {
            dim,
            points,
            domain_tag: domain_tag.into(),
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        ensure_dim("batch labels", self.len(), labels.len())?;
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn empty(dim: usize, domain_tag: impl Into<String>) -> Self {
        Self {
            dim,
            points: Vec::new(),
            domain_tag: domain_tag.into(),
            labels: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    pub fn label(&self, i: usize) -> Option<usize> {
        self.labels.as_ref().map(|l| l[i])
    }

    /// Rows at `indices`, labels carried along.
    pub fn select(&self, indices: &[usize]) -> Batch {
        let mut points = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            points.extend_from_slice(self.point(i));
        }
        Batch {
            dim: self.dim,
            points,
            domain_tag: self.domain_tag.clone(),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }

    pub fn retag(mut self, tag: impl Into<String>) -> Self {
        self.domain_tag = tag.into();
        self
    }

    /// Concatenates batches of equal dimension; labels survive only if every part has them.
    pub fn concat(parts: &[&Batch], tag: impl Into<String>) -> Result<Batch> {
        let dim = parts
            .first()
            .map(|b| b.dim)
            .ok_or_else(|| Error::InvalidArgument("nothing to concatenate".into()))?;
        let mut points = Vec::new();
        let mut labels = Some(Vec::new());
        for b in parts {
            ensure_dim("concatenated batch", dim, b.dim)?;
            points.extend_from_slice(&b.points);
            labels = match (labels, &b.labels) {
                (Some(mut acc), Some(l)) => {
                    acc.extend(l);
                    Some(acc)
                }
                _ => None,
            };
        }
        Ok(Batch {
            dim,
            points,
            domain_tag: tag.into(),
            labels,
        })
    }

    pub fn map_points(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Batch {
        let mut points = Vec::with_capacity(self.points.len());
        let mut dim = self.dim;
        for p in self.iter() {
            let q = f(p);
            dim = q.len();
            points.extend(q);
        }
        Batch {
            dim,
            points,
            domain_tag: self.domain_tag.clone(),
            labels: self.labels.clone(),
        }
    }

    /// Header `x0,...,x{d-1}[,label]`.
    pub fn to_table(&self) -> Table {
        let mut header: Vec<String> = (0..self.dim).map(|i| format!("x{i}")).collect();
        if self.labels.is_some() {
            header.push("label".into());
        }
        let mut t = Table::new(header);
        for i in 0..self.len() {
            let mut row: Vec<String> = self.point(i).iter().map(|&v| fmt_f64(v)).collect();
            if let Some(l) = self.label(i) {
                row.push(l.to_string());
            }
            t.push(row);
        }
        t
    }

    pub fn from_table(table: &Table, tag: impl Into<String>) -> Result<Batch> {
        let cols: Vec<usize> = (0..)
            .map_while(|i| table.column(&format!("x{i}")))
            .collect();
        if cols.is_empty() {
            return Err(Error::InvalidArgument("CSV has no x0 column".into()));
        }
        let mut b = Batch::new(cols.len(), table.numeric(&cols)?, tag)?;
        if b.points.is_empty() {
            b.points = Vec::new();
        }
        if let Some(lc) = table.column("label") {
            let labels = table
                .rows
                .iter()
                .map(|r| {
                    r[lc]
                        .trim()
                        .parse::<usize>()
                        .map_err(|_| Error::InvalidArgument(format!("bad label `{}`", r[lc])))
                })
                .collect::<Result<Vec<_>>>()?;
            b = b.with_labels(labels)?;
        }
        Ok(b)
    }

    /// Writes `<dir>/<domain_tag>.csv` and returns its path.
    pub fn save_csv(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("{}.csv", self.domain_tag));
        self.to_table().save(&path)?;
        Ok(path)
    }

    /// Reads a batch; the domain tag is the file stem.
    pub fn load_csv(path: &Path) -> Result<Batch> {
        let tag = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Batch::from_table(&Table::load(path)?, tag)
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for p in self.iter() {
            for (a, b) in m.iter_mut().zip(p) {
                *a += b;
            }
        }
        let n = self.len().max(1) as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetKind {
    TwoMoons,
    Checkerboard,
    GaussianMixture {
        #[serde(default = "default_components")]
        components: usize,
        #[serde(default = "default_radius")]
        radius: f64,
    },
    Spiral,
    IsotropicGaussian,
}

fn default_components() -> usize {
    8
}

fn default_radius() -> f64 {
    2.0
}

impl DatasetKind {
    pub fn name(&self) -> &'static str {
        match self {
            DatasetKind::TwoMoons => "two_moons",
            DatasetKind::Checkerboard => "checkerboard",
            DatasetKind::GaussianMixture { .. } => "gaussian_mixture",
            DatasetKind::Spiral => "spiral",
            DatasetKind::IsotropicGaussian => "isotropic_gaussian",
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "two_moons" => DatasetKind::TwoMoons,
            "checkerboard" => DatasetKind::Checkerboard,
            "gaussian_mixture" => DatasetKind::GaussianMixture {
                components: default_components(),
                radius: default_radius(),
            },
            "spiral" => DatasetKind::Spiral,
            "isotropic_gaussian" => DatasetKind::IsotropicGaussian,
            other => return Err(Error::InvalidArgument(format!("unknown dataset `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    pub n: usize,
    pub noise: f64,
    #[serde(default = "default_dim")]
    pub dim: usize,
}

fn default_dim() -> usize {
    2
}

/// Draws `spec.n` points from the named recipe (see module docs).
pub fn generate(spec: &DatasetSpec, rng: &mut Rng) -> Result<Batch> {
    let DatasetSpec {
        kind,
        n,
        noise,
        dim,
    } = *spec;
    if n == 0 {
        return Err(Error::InvalidArgument(
            "dataset size must be at least 1".into(),
        ));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise must be >= 0, got {noise}"
        )));
    }
    let min_dim = if kind == DatasetKind::IsotropicGaussian {
        1
    } else {
        2
    };
    if !(min_dim..=MAX_DIM).contains(&dim) {
        return Err(Error::InvalidArgument(format!(
            "{kind} supports dimensions {min_dim}..={MAX_DIM}, got {dim}"
        )));
    }
    if let DatasetKind::GaussianMixture { components, radius } = kind {
        if components == 0 || !radius.is_finite() {
            return Err(Error::InvalidArgument(
                "gaussian_mixture needs >= 1 component".into(),
            ));
        }
    }
    let mut points = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let (base, label) = match kind {
            DatasetKind::IsotropicGaussian => {
                for _ in 0..dim {
                    points.push(noise * rng.normal());
                }
                continue;
            }
            DatasetKind::TwoMoons => {
                let moon = rng.index(2);
                let a = rng.uniform_range(0.0, PI);
                let (x, y) = if moon == 0 {
                    (a.cos(), a.sin())
                } else {
                    (1.0 - a.cos(), 0.5 - a.sin())
                };
                ([x - 0.5, y - 0.25], moon)
            }
            DatasetKind::Checkerboard => {
                let cell = rng.index(8);
                let row = cell / 2;
                let col = 2 * (cell % 2) + row % 2;
                let x = -2.0 + col as f64 + rng.uniform();
                let y = -2.0 + row as f64 + rng.uniform();
                ([x, y], cell)
            }
            DatasetKind::GaussianMixture { components, radius } => {
                let k = rng.index(components);
                let a = 2.0 * PI * k as f64 / components as f64;
                ([radius * a.cos(), radius * a.sin()], k)
            }
            DatasetKind::Spiral => {
                let arm = rng.index(2);
                let a = 3.0 * PI * rng.uniform().sqrt();
                let r = 2.0 * a / (3.0 * PI);
                let phase = a + arm as f64 * PI;
                ([r * phase.cos(), r * phase.sin()], arm)
            }
        };
        for v in base {
            points.push(v + noise * rng.normal());
        }
        for _ in 2..dim {
            points.push(noise * rng.normal());
        }
        labels.push(label);
    }
    let batch = Batch::new(dim, points, kind.name())?;
    if kind == DatasetKind::IsotropicGaussian {
        Ok(batch)
    } else {
        batch.with_labels(labels)
    }
}

/// An analytic bijection on `R^d` standing in for annotator-produced correspondences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PairingMap {
    Identity,
    /// Rotation in the `(x0, x1)` plane by `degrees`, counter-clockwise.
    Rotation {
        degrees: f64,
    },
    /// `x -> matrix * x + offset`, `matrix` row-major `d x d` and invertible.
    Affine {
        matrix: Vec<Vec<f64>>,
        offset: Vec<f64>,
    },
    /// Exchanges coordinates `i` and `j`.
    ComponentSwap {
        i: usize,
        j: usize,
    },
}

impl Default for PairingMap {
    fn default() -> Self {
        PairingMap::Rotation { degrees: 90.0 }
    }
}

impl PairingMap {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            PairingMap::Identity => Ok(()),
            PairingMap::Rotation { degrees } => {
                if dim < 2 || !degrees.is_finite() {
                    return Err(Error::InvalidArgument("rotation needs dim >= 2".into()));
                }
                Ok(())
            }
            PairingMap::Affine { .. } => {
                let (m, _) = self.to_affine(dim)?;
                let det = m.clone().lu().determinant();
                if det.abs() < 1e-12 || !det.is_finite() {
                    return Err(Error::InvalidArgument(
                        "affine pairing map is singular".into(),
                    ));
                }
                Ok(())
            }
            PairingMap::ComponentSwap { i, j } => {
                if *i >= dim || *j >= dim {
                    return Err(Error::InvalidArgument(format!(
                        "component swap ({i}, {j}) out of range for dim {dim}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// The map as `(A, b)` with `x -> A x + b`.
    pub fn to_affine(&self, dim: usize) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let mut a = DMatrix::<f64>::identity(dim, dim);
        let mut b = DVector::<f64>::zeros(dim);
        match self {
            PairingMap::Identity => {}
            PairingMap::Rotation { degrees } => {
                if dim < 2 {
                    return Err(Error::InvalidArgument("rotation needs dim >= 2".into()));
                }
                let (s, c) = degrees.to_radians().sin_cos();
                a[(0, 0)] = c;
                a[(0, 1)] = -s;
                a[(1, 0)] = s;
                a[(1, 1)] = c;
            }
            PairingMap::Affine { matrix, offset } => {
                ensure_dim("affine matrix rows", dim, matrix.len())?;
                ensure_dim("affine offset", dim, offset.len())?;
                for (r, row) in matrix.iter().enumerate() {
                    ensure_dim("affine matrix columns", dim, row.len())?;
                    for (c, v) in row.iter().enumerate() {
                        a[(r, c)] = *v;
                    }
                }
                b = DVector::from_column_slice(offset);
            }
            PairingMap::ComponentSwap { i, j } => {
                if *i >= dim || *j >= dim {
                    return Err(Error::InvalidArgument("component swap out of range".into()));
                }
                a.swap_rows(*i, *j);
            }
        }
        Ok((a, b))
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            PairingMap::Identity => x.to_vec(),
            PairingMap::Rotation { degrees } => {
                let (s, c) = degrees.to_radians().sin_cos();
                let mut y = x.to_vec();
                y[0] = c * x[0] - s * x[1];
                y[1] = s * x[0] + c * x[1];
                y
            }
            PairingMap::Affine { matrix, offset } => matrix
                .iter()
                .zip(offset)
                .map(|(row, o)| o + row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>())
                .collect(),
            PairingMap::ComponentSwap { i, j } => {
                let mut y = x.to_vec();
                y.swap(*i, *j);
                y
            }
        }
    }

    pub fn inverse(&self, dim: usize) -> Result<PairingMap> {
        Ok(match self {
            PairingMap::Identity => PairingMap::Identity,
            PairingMap::Rotation { degrees } => PairingMap::Rotation { degrees: -degrees },
            PairingMap::ComponentSwap { i, j } => PairingMap::ComponentSwap { i: *i, j: *j },
            PairingMap::Affine { .. } => {
                let (a, b) = self.to_affine(dim)?;
                let inv = a.try_inverse().ok_or_else(|| {
                    Error::InvalidArgument("affine pairing map is singular".into())
                })?;
                let off = -(&inv * b);
                PairingMap::Affine {
                    matrix: (0..dim)
                        .map(|r| inv.row(r).iter().copied().collect())
                        .collect(),
                    offset: off.iter().copied().collect(),
                }
            }
        })
    }

    /// `other` after `self`, as one affine map.
    pub fn then(&self, other: &PairingMap, dim: usize) -> Result<PairingMap> {
        let (a1, b1) = self.to_affine(dim)?;
        let (a2, b2) = other.to_affine(dim)?;
        let a = &a2 * a1;
        let b = &a2 * b1 + b2;
        Ok(PairingMap::Affine {
            matrix: (0..dim)
                .map(|r| a.row(r).iter().copied().collect())
                .collect(),
            offset: b.iter().copied().collect(),
        })
    }

    pub fn apply_batch(&self, batch: &Batch, tag: impl Into<String>) -> Batch {
        batch.map_points(|p| self.apply(p)).retag(tag)
    }
}

/// Index-aligned source/target correspondences.
#[derive(Debug, Clone, PartialEq)]
pub struct Pairs {
    pub source: Batch,
    pub target: Batch,
}

impl Pairs {
    pub fn new(source: Batch, target: Batch) -> Result<Self> {
        ensure_dim("paired counts", source.len(), target.len())?;
        Ok(Self { source, target })
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    /// Header `src_x0..,tgt_x0..[,label]`; the label is the target's.
    pub fn to_table(&self) -> Table {
        let mut header: Vec<String> = (0..self.source.dim).map(|i| format!("src_x{i}")).collect();
        header.extend((0..self.target.dim).map(|i| format!("tgt_x{i}")));
        let labeled = self.target.labels.is_some();
        if labeled {
            header.push("label".into());
        }
        let mut t = Table::new(header);
        for i in 0..self.len() {
            let mut row: Vec<String> = self.source.point(i).iter().map(|&v| fmt_f64(v)).collect();
            row.extend(self.target.point(i).iter().map(|&v| fmt_f64(v)));
            if let Some(l) = self.target.label(i) {
                row.push(l.to_string());
            }
            t.push(row);
        }
        t
    }

    pub fn from_table(table: &Table, source_tag: &str, target_tag: &str) -> Result<Self> {
        let cols = |prefix: &str| -> Vec<usize> {
            (0..)
                .map_while(|i| table.column(&format!("{prefix}{i}")))
                .collect()
        };
        let (sc, tc) = (cols("src_x"), cols("tgt_x"));
        if sc.is_empty() || tc.is_empty() {
            return Err(Error::InvalidArgument(
                "pairs CSV needs src_x*/tgt_x* columns".into(),
            ));
        }
        let source = Batch::new(sc.len(), table.numeric(&sc)?, source_tag)?;
        let mut target = Batch::new(tc.len(), table.numeric(&tc)?, target_tag)?;
        if let Some(lc) = table.column("label") {
            let labels = table
                .rows
                .iter()
                .map(|r| r[lc].trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::InvalidArgument("bad label in pairs CSV".into()))?;
            target = target.with_labels(labels)?;
        }
        Pairs::new(source, target)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairSplit {
    pub paired: Pairs,
    /// Sorted source indices that were paired.
    pub paired_indices: Vec<usize>,
    /// Mapped targets of the remaining points; their source identity is dropped.
    pub unpaired_target: Batch,
}

/// Number of pairs for `fraction` of `n` points: `floor(fraction * n)`, tolerant of
/// representation error (0.29 * 100 gives 29).
pub fn paired_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64) + 1e-9).floor() as usize
}

/// Pairs a uniformly chosen `floor(fraction * n)` subset of `source` through `map`;
/// the rest contribute only their mapped targets.
pub fn make_pairs(
    source: &Batch,
    map: &PairingMap,
    fraction: f64,
    target_tag: &str,
    rng: &mut Rng,
) -> Result<PairSplit> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!(
            "fraction {fraction} outside [0, 1]"
        )));
    }
    map.validate(source.dim)?;
    let n = source.len();
    let k = paired_count(fraction, n).min(n);
    let paired_indices = rng.subset(n, k);
    let mut is_paired = vec![false; n];
    for &i in &paired_indices {
        is_paired[i] = true;
    }
    let rest: Vec<usize> = (0..n).filter(|&i| !is_paired[i]).collect();
    let targets = map.apply_batch(source, target_tag);
    Ok(PairSplit {
        paired: Pairs::new(
            source.select(&paired_indices),
            targets.select(&paired_indices),
        )?,
        unpaired_target: targets.select(&rest),
        paired_indices,
    })
}
