//! Seeded random streams and cheap exact move samplers.
//!
//! Every trial `i` of an experiment draws from `trial_rng(seed, i)`, an
//! independent ChaCha8 stream, so aggregates do not depend on how trials are
//! spread over worker threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn trial_rng(seed: u64, trial: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Draws uniform symbols from a buffered 64-bit word.
///
/// `lazy()` is uniform on `0..5` (3-bit rejection sampling), `direction()` is
/// uniform on `0..4` (2 bits). Both are exact.
pub struct MoveSource<R> {
    rng: R,
    buf: u64,
    left: u32,
}

impl<R: RngCore> MoveSource<R> {
    pub fn new(rng: R) -> Self {
        Self { rng, buf: 0, left: 0 }
    }

    #[inline(always)]
    pub fn lazy(&mut self) -> u8 {
        loop {
            if self.left < 3 {
                self.buf = self.rng.next_u64();
                self.left = 64;
            }
            let v = (self.buf & 7) as u8;
            self.buf >>= 3;
            self.left -= 3;
            if v < 5 {
                return v;
            }
        }
    }

    #[inline(always)]
    pub fn direction(&mut self) -> u8 {
        if self.left < 2 {
            self.buf = self.rng.next_u64();
            self.left = 64;
        }
        let v = (self.buf & 3) as u8;
        self.buf >>= 2;
        self.left -= 2;
        v
    }

    pub fn rng(&mut self) -> &mut R {
        &mut self.rng
    }
}
