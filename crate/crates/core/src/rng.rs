//! Seeded, platform-independent randomness.
//!
//! Backed by ChaCha8 with an explicit stream id, so `(seed, stream, word
//! position)` pins the generator exactly and can be written to snapshots.
//! Integer and float draws are derived from raw 64-bit words here rather
//! than through `rand`'s distributions, whose algorithms depend on the
//! pointer width.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::wire::{ByteReader, ByteWriter, WireError};

#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`. Panics if `n == 0`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "cannot draw from an empty range");
        let n = n as u64;
        // Lemire's multiply-and-reject.
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = (self.next_u64() as u128) * (n as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as usize;
            }
        }
    }

    /// Index drawn from unnormalized nonnegative `weights`.
    pub fn categorical(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let mut u = self.uniform() * total;
        for (i, &w) in weights.iter().enumerate() {
            if u < w {
                return i;
            }
            u -= w;
        }
        weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
    }

    pub fn write(&self, w: &mut ByteWriter) {
        w.put_u64(self.seed);
        w.put_u64(self.stream);
        w.put_u128(self.inner.get_word_pos());
    }

    pub fn read(r: &mut ByteReader<'_>) -> Result<Self, WireError> {
        let seed = r.get_u64()?;
        let stream = r.get_u64()?;
        let pos = r.get_u128()?;
        let mut rng = Self::with_stream(seed, stream);
        rng.inner.set_word_pos(pos);
        Ok(rng)
    }
}
