use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::datasets::Batch;
use crate::error::{ensure_dim, Error, Result};

/// Encoder/decoder pair between a data space and the diffusion space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Autoencoder {
    Identity {
        dim: usize,
    },
    /// `z = encoder (x - mean)`, `x = decoder z + mean`; `encoder` is
    /// `(latent_dim, data_dim)` and `decoder` `(data_dim, latent_dim)`, both row-major.
    Affine {
        mean: Vec<f64>,
        encoder: Vec<Vec<f64>>,
        decoder: Vec<Vec<f64>>,
    },
}

impl Autoencoder {
    pub fn identity(dim: usize) -> Self {
        Autoencoder::Identity { dim }
    }

    /// PCA whitening onto the top `latent_dim` principal directions. With
    /// `latent_dim == data dim` encode and decode are mutual inverses.
    pub fn fit_affine(data: &Batch, latent_dim: usize) -> Result<Self> {
        let d = data.dim;
        if latent_dim == 0 || latent_dim > d {
            return Err(Error::InvalidArgument(format!(
                "latent_dim must lie in 1..={d}, got {latent_dim}"
            )));
        }
        if data.len() < 2 {
            return Err(Error::InvalidArgument(
                "affine autoencoder needs >= 2 points".into(),
            ));
        }
        let mean = data.mean();
        let mut cov = DMatrix::<f64>::zeros(d, d);
        for p in data.iter() {
            let c = DVector::from_iterator(d, p.iter().zip(&mean).map(|(a, m)| a - m));
            cov += &c * c.transpose();
        }
        cov /= (data.len() - 1) as f64;
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut encoder = Vec::with_capacity(latent_dim);
        let mut decoder = vec![vec![0.0; latent_dim]; d];
        for (k, &i) in order.iter().take(latent_dim).enumerate() {
            let lambda = eig.eigenvalues[i];
            if lambda <= 1e-12 {
                return Err(Error::InvalidArgument(
                    "data are degenerate along a retained principal direction".into(),
                ));
            }
            let s = lambda.sqrt();
            let u = eig.eigenvectors.column(i);
            encoder.push(u.iter().map(|v| v / s).collect());
            for r in 0..d {
                decoder[r][k] = u[r] * s;
            }
        }
        Ok(Autoencoder::Affine {
            mean,
            encoder,
            decoder,
        })
    }

    pub fn data_dim(&self) -> usize {
        match self {
            Autoencoder::Identity { dim } => *dim,
            Autoencoder::Affine { mean, .. } => mean.len(),
        }
    }

    pub fn latent_dim(&self) -> usize {
        match self {
            Autoencoder::Identity { dim } => *dim,
            Autoencoder::Affine { encoder, .. } => encoder.len(),
        }
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        ensure_dim("encoder input", self.data_dim(), x.len())?;
        Ok(match self {
            Autoencoder::Identity { .. } => x.to_vec(),
            Autoencoder::Affine { mean, encoder, .. } => encoder
                .iter()
                .map(|row| {
                    row.iter()
                        .zip(x.iter().zip(mean))
                        .map(|(w, (a, m))| w * (a - m))
                        .sum()
                })
                .collect(),
        })
    }

    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        ensure_dim("decoder input", self.latent_dim(), z.len())?;
        Ok(match self {
            Autoencoder::Identity { .. } => z.to_vec(),
            Autoencoder::Affine { mean, decoder, .. } => decoder
                .iter()
                .zip(mean)
                .map(|(row, m)| m + row.iter().zip(z).map(|(w, v)| w * v).sum::<f64>())
                .collect(),
        })
    }

    /// Row-major `(n, data_dim) -> (n, latent_dim)`.
    pub fn encode_rows(&self, xs: &[f64]) -> Result<Vec<f64>> {
        if let Autoencoder::Identity { dim } = self {
            ensure_dim("encoder batch", 0, xs.len() % dim)?;
            return Ok(xs.to_vec());
        }
        let d = self.data_dim();
        ensure_dim("encoder batch", 0, xs.len() % d)?;
        let mut out = Vec::with_capacity(xs.len() / d * self.latent_dim());
        for x in xs.chunks_exact(d) {
            out.extend(self.encode(x)?);
        }
        Ok(out)
    }

    pub fn decode_rows(&self, zs: &[f64]) -> Result<Vec<f64>> {
        if let Autoencoder::Identity { dim } = self {
            ensure_dim("decoder batch", 0, zs.len() % dim)?;
            return Ok(zs.to_vec());
        }
        let k = self.latent_dim();
        ensure_dim("decoder batch", 0, zs.len() % k)?;
        let mut out = Vec::with_capacity(zs.len() / k * self.data_dim());
        for z in zs.chunks_exact(k) {
            out.extend(self.decode(z)?);
        }
        Ok(out)
    }

    pub fn encode_batch(&self, b: &Batch) -> Result<Batch> {
        let mut out = Batch::new(
            self.latent_dim(),
            self.encode_rows(&b.points)?,
            b.domain_tag.clone(),
        )?;
        out.labels = b.labels.clone();
        Ok(out)
    }

    /// Mean squared reconstruction error over `data`.
    pub fn reconstruction_mse(&self, data: &Batch) -> Result<f64> {
        let mut total = 0.0;
        for p in data.iter() {
            let r = self.decode(&self.encode(p)?)?;
            total += r.iter().zip(p).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
        Ok(total / data.len().max(1) as f64)
    }
}
