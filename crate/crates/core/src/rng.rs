//! Random streams.
//!
//! Every Monte Carlo sample draws from its own [`Stream`], keyed by
//! `(master_seed, sample_index)`. ChaCha is a counter-based generator: the
//! seed fixes the key and the index selects a disjoint 2^64-block stream, so
//! sample `i` sees the same numbers no matter which worker runs it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Source of the two primitive draws the simulators need.
pub trait RandomSource {
    /// Uniform draw on `(0, 1]`.
    fn uniform(&mut self) -> f64;
    /// Standard normal draw.
    fn standard_normal(&mut self) -> f64;
}

impl<T: RandomSource + ?Sized> RandomSource for &mut T {
    fn uniform(&mut self) -> f64 {
        (**self).uniform()
    }
    fn standard_normal(&mut self) -> f64 {
        (**self).standard_normal()
    }
}

#[derive(Clone, Debug)]
pub struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Self::derive(seed, 0)
    }

    /// Stream number `index` under `master_seed`.
    pub fn derive(master_seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(index);
        Self { rng }
    }
}

impl RandomSource for Stream {
    fn uniform(&mut self) -> f64 {
        // gen::<f64>() is on [0, 1); flip it onto (0, 1] so ln(u) is finite.
        1.0 - self.rng.random::<f64>()
    }

    fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

/// Deterministic stand-in returning fixed values, for hand-checkable runs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantSource {
    pub uniform: f64,
    pub normal: f64,
}

impl ConstantSource {
    /// Zero Brownian noise with every uniform draw equal to `u`.
    pub fn noiseless(u: f64) -> Self {
        Self {
            uniform: u,
            normal: 0.0,
        }
    }
}

impl RandomSource for ConstantSource {
    fn uniform(&mut self) -> f64 {
        self.uniform
    }
    fn standard_normal(&mut self) -> f64 {
        self.normal
    }
}
