//! Keyed random streams.
//!
//! Every (seed, replica, neuron) triple owns an independent ChaCha8 stream, so
//! the draws a neuron consumes never depend on how many draws other neurons
//! made. Output is identical across platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent stream for one neuron of one replica.
#[derive(Debug, Clone)]
pub struct Stream(ChaCha8Rng);

impl Stream {
    pub fn new(seed: u64, replica: usize, neuron: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(((replica as u64) << 32) | (neuron as u64 & 0xffff_ffff));
        Stream(rng)
    }

    /// Uniform on `(0, 1]`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        1.0 - self.0.gen::<f64>()
    }

    /// Exponential with the given rate; `inf` at rate 0.
    #[inline]
    pub fn exponential(&mut self, rate: f64) -> f64 {
        if rate > 0.0 {
            -self.uniform().ln() / rate
        } else {
            f64::INFINITY
        }
    }

    /// Uniform on `0..k`.
    #[inline]
    pub fn index(&mut self, k: usize) -> usize {
        self.0.gen_range(0..k)
    }
}
