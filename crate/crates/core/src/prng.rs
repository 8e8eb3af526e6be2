//! Seedable two-lag multiply-with-carry generator.
//!
//! Every source of randomness in a run draws from one of these. The
//! recurrence is Marsaglia's MWC pair:
//!
//! ```text
//! z' = 36969 * (z & 0xffff) + (z >> 16)
//! w' = 18000 * (w & 0xffff) + (w >> 16)
//! out = (z' << 16) + w'
//! ```
//!
//! all in wrapping 32-bit arithmetic, so the stream is identical on every
//! platform.

use thiserror::Error;

/// Default `z` lag used when a seed supplies zero for it.
pub const DEFAULT_Z: u32 = 362_436_069;
/// Default `w` lag used when a seed supplies zero for it.
pub const DEFAULT_W: u32 = 521_288_629;

/// Knuth's multiplicative hashing constant, used to spread per-DSP seeds.
const SUBSTREAM_STRIDE: u32 = 2_654_435_761;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SeedError {
    #[error("invalid seed (0, 0): both multiply-with-carry lags would be degenerate")]
    BothZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct McwState {
    z: u32,
    w: u32,
}

impl McwState {
    /// Builds a generator from two lags. A single zero lag is replaced by its
    /// default; `(0, 0)` is rejected.
    pub fn seed(z0: u32, w0: u32) -> Result<Self, SeedError> {
        match (z0, w0) {
            (0, 0) => Err(SeedError::BothZero),
            (0, w) => Ok(Self { z: DEFAULT_Z, w }),
            (z, 0) => Ok(Self { z, w: DEFAULT_W }),
            (z, w) => Ok(Self { z, w }),
        }
    }

    /// Generator for the DSP at `dsp_index`, derived from a base seed so
    /// that adding nodes never perturbs the streams of existing ones.
    pub fn substream(base_z: u32, base_w: u32, dsp_index: u32) -> Result<Self, SeedError> {
        let z = base_z.wrapping_add(dsp_index.wrapping_mul(SUBSTREAM_STRIDE));
        let w = base_w ^ dsp_index;
        Self::seed(z, w)
    }

    pub fn lags(&self) -> (u32, u32) {
        (self.z, self.w)
    }

    #[inline]
    pub fn next_u32(&mut self) -> u32 {
        self.z = 36969u32
            .wrapping_mul(self.z & 0xffff)
            .wrapping_add(self.z >> 16);
        self.w = 18000u32
            .wrapping_mul(self.w & 0xffff)
            .wrapping_add(self.w >> 16);
        (self.z << 16).wrapping_add(self.w)
    }

    /// Uniform real in `[0, 1)`.
    #[inline]
    pub fn next_unit(&mut self) -> f64 {
        unit_from_u32(self.next_u32())
    }
}

impl Default for McwState {
    fn default() -> Self {
        Self {
            z: DEFAULT_Z,
            w: DEFAULT_W,
        }
    }
}

/// Scales a raw draw by 2^-32. The largest input maps strictly below 1.
#[inline]
pub fn unit_from_u32(x: u32) -> f64 {
    f64::from(x) * (1.0 / 4_294_967_296.0)
}

/// SplitMix64 finalizer. Used to derive statistically independent seeds
/// from small integer coordinates.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}
