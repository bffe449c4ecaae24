//! Deterministic random stream used by trace generators and integral rounding.
//!
//! The generator is pinned so that traces and sampled allocations are
//! reproducible bit-for-bit across platforms and implementations:
//!
//! SplitMix64 (Steele, Lea, Flood 2014). State update and output:
//!
//! ```text
//! state += 0x9E3779B97F4A7C15
//! z = state
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! output = z ^ (z >> 31)
//! ```
//!
//! Uniform doubles in `[0, 1)` take the top 53 bits: `(output >> 11) * 2^-53`.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `{0, 1, ..., n-1}` via rejection on the top bits.
    pub fn next_below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        // Lemire-style rejection keeps the draw exactly uniform.
        let threshold = n.wrapping_neg() % n;
        loop {
            let r = self.next_u64();
            let (hi, lo) = {
                let wide = (r as u128) * (n as u128);
                ((wide >> 64) as u64, wide as u64)
            };
            if lo >= threshold {
                return hi;
            }
        }
    }

    /// Derive an independent stream for a sub-purpose without disturbing
    /// the parent sequence.
    pub fn fork(&self, tag: u64) -> SplitMix64 {
        let mut probe = SplitMix64::new(self.state ^ tag.wrapping_mul(0xA076_1D64_78BD_642F));
        SplitMix64::new(probe.next_u64())
    }
}
