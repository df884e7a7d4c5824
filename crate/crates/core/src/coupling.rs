//! The semi-supervised coupling: a uniform mixture over stored paired
//! `(target, latent)` anchors and unpaired targets whose latent is a fresh
//! `N(0, I)` draw on every access.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datasets::Batch;
use crate::diffusion::{CoupledDraw, CouplingSampler, OdeConfig, Provenance};
use crate::error::{ensure_dim, Error, Result};
use crate::io::{fmt_f64, write_json, Table};
use crate::nd::Rng;

/// Index-aligned target points and their inferred prior-space latents.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPairs {
    pub targets: Batch,
    pub latents: Batch,
}

impl LatentPairs {
    pub fn new(targets: Batch, latents: Batch) -> Result<Self> {
        ensure_dim("latent pair counts", targets.len(), latents.len())?;
        ensure_dim("latent pair dimension", targets.dim, latents.dim)?;
        Ok(Self { targets, latents })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            targets: Batch::empty(dim, "target"),
            latents: Batch::empty(dim, "latent"),
        }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Header `lat_x0..,tgt_x0..[,label]`.
    pub fn to_table(&self) -> Table {
        let d = self.targets.dim;
        let mut header: Vec<String> = (0..d).map(|i| format!("lat_x{i}")).collect();
        header.extend((0..d).map(|i| format!("tgt_x{i}")));
        if self.targets.labels.is_some() {
            header.push("label".into());
        }
        let mut t = Table::new(header);
        for i in 0..self.len() {
            let mut row: Vec<String> = self.latents.point(i).iter().map(|&v| fmt_f64(v)).collect();
            row.extend(self.targets.point(i).iter().map(|&v| fmt_f64(v)));
            if let Some(l) = self.targets.label(i) {
                row.push(l.to_string());
            }
            t.push(row);
        }
        t
    }

    pub fn from_table(table: &Table) -> Result<Self> {
        let cols = |prefix: &str| -> Vec<usize> {
            (0..)
                .map_while(|i| table.column(&format!("{prefix}{i}")))
                .collect()
        };
        let (lc, tc) = (cols("lat_x"), cols("tgt_x"));
        if lc.is_empty() || lc.len() != tc.len() {
            return Err(Error::InvalidArgument(
                "latent pairs CSV needs lat_x*/tgt_x* columns".into(),
            ));
        }
        let latents = Batch::new(lc.len(), table.numeric(&lc)?, "latent")?;
        let mut targets = Batch::new(tc.len(), table.numeric(&tc)?, "target")?;
        if let Some(c) = table.column("label") {
            let labels = table
                .rows
                .iter()
                .map(|r| r[c].trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::InvalidArgument("bad label in latent pairs CSV".into()))?;
            targets = targets.with_labels(labels)?;
        }
        LatentPairs::new(targets, latents)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMixture {
    dim: usize,
    paired_x0: Vec<f64>,
    paired_x1: Vec<f64>,
    unpaired_x0: Vec<f64>,
    /// `paired` labels followed by `unpaired` labels, when every part is labeled.
    labels: Option<Vec<usize>>,
    /// `(|K_j|, |L_j|)` per source, for manifests.
    counts: Vec<(usize, usize)>,
}

fn labels_of(parts: &[&Batch]) -> Option<Vec<usize>> {
    let mut out = Vec::new();
    for b in parts {
        if b.is_empty() {
            continue;
        }
        out.extend(b.labels.as_ref()?);
    }
    Some(out)
}

impl CouplingMixture {
    /// Disjoint union of every source's paired anchors and unpaired targets, each entry
    /// carrying weight `1 / (sum |K_j| + sum |L_j|)`. The two lists are zipped per source;
    /// a missing entry counts as empty.
    pub fn build(paired_sets: &[LatentPairs], unpaired_targets: &[Batch]) -> Result<Self> {
        let dim = paired_sets
            .iter()
            .map(|p| p.targets.dim)
            .chain(unpaired_targets.iter().map(|b| b.dim))
            .next()
            .ok_or_else(|| Error::InvalidArgument("coupling needs at least one source".into()))?;
        let n_sources = paired_sets.len().max(unpaired_targets.len());
        let mut m = CouplingMixture {
            dim,
            paired_x0: Vec::new(),
            paired_x1: Vec::new(),
            unpaired_x0: Vec::new(),
            labels: None,
            counts: Vec::with_capacity(n_sources),
        };
        for j in 0..n_sources {
            let k = paired_sets.get(j).map_or(0, |p| {
                m.paired_x0.extend(&p.targets.points);
                m.paired_x1.extend(&p.latents.points);
                p.len()
            });
            let l = unpaired_targets.get(j).map_or(0, |u| {
                m.unpaired_x0.extend(&u.points);
                u.len()
            });
            m.counts.push((k, l));
        }
        for p in paired_sets {
            ensure_dim("paired target dimension", dim, p.targets.dim)?;
            ensure_dim("paired latent dimension", dim, p.latents.dim)?;
        }
        for u in unpaired_targets {
            ensure_dim("unpaired target dimension", dim, u.dim)?;
        }
        if m.len() == 0 {
            return Err(Error::InvalidArgument(
                "coupling has no paired or unpaired entries".into(),
            ));
        }
        let mut parts: Vec<&Batch> = paired_sets.iter().map(|p| &p.targets).collect();
        parts.extend(unpaired_targets);
        m.labels = labels_of(&parts);
        Ok(m)
    }

    /// Single-source form: `(|K| + |L|)^-1 (sum_K delta_(x0,x1) + sum_L delta_x0 (x) q1)`.
    pub fn single(paired: &LatentPairs, unpaired: &Batch) -> Result<Self> {
        let dim = if paired.is_empty() {
            unpaired.dim
        } else {
            paired.targets.dim
        };
        ensure_dim("unpaired target dimension", dim, unpaired.dim)?;
        let m = CouplingMixture {
            dim,
            paired_x0: paired.targets.points.clone(),
            paired_x1: paired.latents.points.clone(),
            unpaired_x0: unpaired.points.clone(),
            labels: labels_of(&[&paired.targets, unpaired]),
            counts: vec![(paired.len(), unpaired.len())],
        };
        if m.len() == 0 {
            return Err(Error::InvalidArgument(
                "coupling has no paired or unpaired entries".into(),
            ));
        }
        Ok(m)
    }

    /// `|K| = 0`: the independent coupling of `data` with the prior.
    pub fn independent(data: &Batch) -> Result<Self> {
        Self::single(&LatentPairs::empty(data.dim), data)
    }

    pub fn paired_len(&self) -> usize {
        self.paired_x0.len() / self.dim
    }

    pub fn unpaired_len(&self) -> usize {
        self.unpaired_x0.len() / self.dim
    }

    /// Probability that a draw is a paired anchor.
    pub fn paired_mass(&self) -> f64 {
        self.paired_len() as f64 / self.len() as f64
    }

    pub fn source_counts(&self) -> &[(usize, usize)] {
        &self.counts
    }

    pub fn is_labeled(&self) -> bool {
        self.labels.is_some()
    }

    /// Every stored `x0`, paired entries first.
    pub fn x0_points(&self) -> impl Iterator<Item = &[f64]> {
        self.paired_x0
            .chunks_exact(self.dim)
            .chain(self.unpaired_x0.chunks_exact(self.dim))
    }

    /// Draw together with the mixture index it came from.
    pub fn sample_indexed(&self, rng: &mut Rng) -> (usize, CoupledDraw) {
        let d = self.dim;
        let k = self.paired_len();
        let idx = rng.index(self.len());
        let label = self.labels.as_ref().map(|l| l[idx]);
        let draw = if idx < k {
            CoupledDraw {
                x0: self.paired_x0[idx * d..(idx + 1) * d].to_vec(),
                x1: self.paired_x1[idx * d..(idx + 1) * d].to_vec(),
                provenance: Provenance::Paired,
                label,
            }
        } else {
            let j = idx - k;
            CoupledDraw {
                x0: self.unpaired_x0[j * d..(j + 1) * d].to_vec(),
                x1: rng.normal_vec(d),
                provenance: Provenance::Unpaired,
                label,
            }
        };
        (idx, draw)
    }
}

impl CouplingSampler for CouplingMixture {
    fn dim(&self) -> usize {
        self.dim
    }

    fn len(&self) -> usize {
        self.paired_len() + self.unpaired_len()
    }

    fn sample(&self, rng: &mut Rng) -> CoupledDraw {
        self.sample_indexed(rng).1
    }
}

/// Plain denoising-score-matching coupling: a uniformly chosen data point and a fresh
/// prior draw.
#[derive(Debug, Clone)]
pub struct IndependentCoupling<'a> {
    pub data: &'a Batch,
}

impl CouplingSampler for IndependentCoupling<'_> {
    fn dim(&self) -> usize {
        self.data.dim
    }

    fn len(&self) -> usize {
        self.data.len()
    }

    fn sample(&self, rng: &mut Rng) -> CoupledDraw {
        let i = rng.index(self.data.len());
        CoupledDraw {
            x0: self.data.point(i).to_vec(),
            x1: rng.normal_vec(self.data.dim),
            provenance: Provenance::Unpaired,
            label: self.data.label(i),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSourceEntry {
    pub tag: String,
    pub paired_file: Option<String>,
    pub paired_count: usize,
    pub unpaired_file: Option<String>,
    pub unpaired_count: usize,
}

/// File-level description of a coupling, sufficient to rebuild it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureManifest {
    pub dim: usize,
    pub sources: Vec<MixtureSourceEntry>,
    pub total_paired: usize,
    pub total_unpaired: usize,
    /// Integrator used to infer the paired latents, once they exist.
    pub transfer_ode: Option<OdeConfig>,
}

impl MixtureManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingPrerequisite(path.to_path_buf()));
        }
        crate::io::read_json(path)
    }

    /// Loads every referenced CSV (relative to `dir`) and rebuilds the mixture.
    /// Paired files must hold latent pairs (`lat_x*`/`tgt_x*`).
    pub fn build(&self, dir: &Path) -> Result<CouplingMixture> {
        let resolve = |f: &str| -> PathBuf { dir.join(f) };
        let mut paired = Vec::new();
        let mut unpaired = Vec::new();
        for s in &self.sources {
            paired.push(match &s.paired_file {
                Some(f) => {
                    let lp = LatentPairs::from_table(&Table::load(&resolve(f))?)?;
                    ensure_dim("manifest paired count", s.paired_count, lp.len())?;
                    lp
                }
                None => LatentPairs::empty(self.dim),
            });
            unpaired.push(match &s.unpaired_file {
                Some(f) => {
                    let b = Batch::load_csv(&resolve(f))?;
                    ensure_dim("manifest unpaired count", s.unpaired_count, b.len())?;
                    b
                }
                None => Batch::empty(self.dim, "target"),
            });
        }
        CouplingMixture::build(&paired, &unpaired)
    }
}
