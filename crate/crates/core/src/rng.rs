//! Deterministic per-path random streams.
//!
//! Every path draws from its own ChaCha8 stream selected by the path index,
//! so results do not depend on how paths are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub struct PathRng {
    inner: ChaCha8Rng,
}

impl PathRng {
    pub fn new(seed: u64, path_index: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(path_index);
        Self { inner }
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// A `Normal(mean, var)` draw.
    #[inline]
    pub fn normal(&mut self, mean: f64, var: f64) -> f64 {
        mean + var.sqrt() * self.standard_normal()
    }
}
