//! Seedable 64-bit generator used for row resampling.
//!
//! The generator is SplitMix64 (Steele, Lea & Flood 2014). It is chosen
//! because the full algorithm fits in a dozen lines, has no platform- or
//! version-dependent behaviour, and therefore makes bootstrap output
//! bit-reproducible anywhere. Uniform indices are drawn by modulo
//! reduction of the raw 64-bit output; the bias is below 2^-50 for any
//! realistic row count.

/// SplitMix64 state. Each call to [`SplitMix64::next_u64`] advances the
/// state by the golden-ratio increment and scrambles it.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// One SplitMix64 output step applied to an arbitrary word. Also used as
/// the seed-derivation hash for bootstrap replicates.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Uniform index in `0..n` by modulo reduction. `n` must be nonzero.
    #[inline]
    pub fn next_index(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    /// Uniform f64 in [0, 1) from the top 53 bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Seed for bootstrap replicate `index` derived from `base`. Hashing the
/// pair avoids the lane correlation that `base + index` would produce.
#[inline]
pub fn derive_seed(base: u64, index: u64) -> u64 {
    mix64(base ^ index.wrapping_add(1).wrapping_mul(GOLDEN))
}
