//! Counter-based random substreams.
//!
//! A draw is a pure function of `(master_seed, lane, replication_index, draw_counter)`:
//! the master seed and lane form the ChaCha key, the replication index selects
//! the ChaCha stream, and the draw counter is the word position inside it.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Purpose-separated families of substreams under one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u32)]
pub enum Lane {
    /// The sample path `X_1, X_2, ...`.
    Primary = 0,
    /// The independent copy `X'_1, X'_2, ...`.
    Copy = 1,
    /// Rademacher signs for fixed-vector experiments.
    Signs = 2,
    /// Fresh draws for Monte Carlo centering constants.
    Centering = 3,
    /// Randomized configuration generation.
    Configs = 4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub master_seed: u64,
    pub lane: Lane,
    pub replication_index: u64,
    pub draw_counter: u64,
}

impl StreamKey {
    pub fn new(master_seed: u64, lane: Lane, replication_index: u64) -> Self {
        StreamKey {
            master_seed,
            lane,
            replication_index,
            draw_counter: 0,
        }
    }

    pub fn with_lane(self, lane: Lane) -> Self {
        StreamKey { lane, ..self }
    }

    pub fn with_replication(self, replication_index: u64) -> Self {
        StreamKey {
            replication_index,
            draw_counter: 0,
            ..self
        }
    }

    pub fn rng(&self) -> StreamRng {
        let mut seed = [0u8; 32];
        seed[..8].copy_from_slice(&self.master_seed.to_le_bytes());
        seed[8..12].copy_from_slice(&(self.lane as u32).to_le_bytes());
        let mut inner = ChaCha8Rng::from_seed(seed);
        inner.set_stream(self.replication_index);
        inner.set_word_pos(u128::from(self.draw_counter));
        StreamRng { inner }
    }
}

/// Generator for one substream.
#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: ChaCha8Rng,
}

const TWO_POW_MINUS_53: f64 = 1.0 / (1u64 << 53) as f64;

impl StreamRng {
    /// Uniform on the open interval `(0, 1)`.
    #[inline]
    pub fn open01(&mut self) -> f64 {
        ((self.inner.next_u64() >> 11) as f64 + 0.5) * TWO_POW_MINUS_53
    }

    /// A uniform on `(0, 1]` and an independent fair sign from the same word.
    #[inline]
    pub fn unit_and_sign(&mut self) -> (f64, f64) {
        let w = self.inner.next_u64();
        let u = ((w >> 11) + 1) as f64 * TWO_POW_MINUS_53;
        let sign = if w & 1 == 0 { 1.0 } else { -1.0 };
        (u, sign)
    }

    #[inline]
    pub fn sign(&mut self) -> f64 {
        if self.inner.next_u32() & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Standard exponential.
    #[inline]
    pub fn exponential(&mut self) -> f64 {
        -self.open01().ln()
    }

    /// Number of 32-bit words consumed so far.
    pub fn word_pos(&self) -> u128 {
        self.inner.get_word_pos()
    }
}

impl RngCore for StreamRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}
