//! Seeded, splittable pseudo-random generator.
//!
//! Every consumer of randomness (training noise, data shuffling, sampler noise, ...)
//! gets its own named stream forked from a root seed, so adding draws to one stream
//! never perturbs another.

use rand::seq::index;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derives an independent stream keyed by `name`. Forking depends only on the
    /// seed of `self`, not on how many draws were already taken from it.
    pub fn fork(&self, name: &str) -> Rng {
        Rng::new(splitmix64(
            self.seed ^ splitmix64(fnv1a(name).wrapping_mul(GOLDEN)),
        ))
    }

    pub fn fork_indexed(&self, name: &str, index: u64) -> Rng {
        self.fork(name).fork(&index.to_string())
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.normal();
        }
    }

    pub fn normal_vec(&mut self, dim: usize) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        self.fill_normal(&mut v);
        v
    }

    /// Uniform index in `0..n`. Panics if `n == 0`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniformly chosen `k`-subset of `0..n`, returned sorted.
    pub fn subset(&mut self, n: usize, k: usize) -> Vec<usize> {
        let mut picked = index::sample(&mut self.inner, n, k).into_vec();
        picked.sort_unstable();
        picked
    }
}
