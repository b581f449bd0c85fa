//! Seeded random streams.
//!
//! Every stream is ChaCha8 keyed by a 64-bit seed and selected by a 64-bit
//! stream number, so `(seed, stream)` pairs give independent, portable
//! sequences. The full position can be captured and restored.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TensorError};
use crate::real::Real;
use crate::tensor::Tensor;

pub const RNG_ALGORITHM: &str = "chacha8";

/// Serializable position of an [`RngStream`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub algorithm: String,
    pub seed: u64,
    pub stream: u64,
    /// Word position inside the stream; a decimal string because JSON
    /// numbers cannot carry 128 bits.
    pub word_pos: String,
}

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    /// A new stream with the same seed and a different stream number.
    pub fn fork(&self, stream: u64) -> Self {
        Self::new(self.seed, stream)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn state(&self) -> RngState {
        RngState {
            algorithm: RNG_ALGORITHM.to_string(),
            seed: self.seed,
            stream: self.stream,
            word_pos: self.rng.get_word_pos().to_string(),
        }
    }

    pub fn from_state(state: &RngState) -> Result<Self> {
        if state.algorithm != RNG_ALGORITHM {
            return Err(TensorError::Rng(format!(
                "unknown algorithm {:?}",
                state.algorithm
            )));
        }
        let pos: u128 = state.word_pos.parse().map_err(|e| {
            TensorError::Rng(format!("bad word position {:?}: {e}", state.word_pos))
        })?;
        let mut s = Self::new(state.seed, state.stream);
        s.rng.set_word_pos(pos);
        Ok(s)
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform integer in `0..n`. Panics if `n == 0`.
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// Standard normal draw. Always consumes the stream at `f64` precision so
    /// the sequence does not depend on the tensor element type.
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn normal_vec<T: Real>(&mut self, n: usize, mean: f64, std: f64) -> Vec<T> {
        (0..n).map(|_| T::lit(mean + std * self.normal())).collect()
    }

    pub fn normal_tensor<T: Real>(&mut self, shape: &[usize], mean: f64, std: f64) -> Tensor<T> {
        let n = shape.iter().product();
        Tensor::from_vec(self.normal_vec(n, mean, std), shape).expect("length matches shape")
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<X>(&mut self, items: &mut [X]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
