//! SplitMix64, the fixed generator behind every random instance.
//!
//! State update and output, with all arithmetic wrapping modulo 2^64:
//!
//! ```text
//! state <- state + 0x9E3779B97F4A7C15
//! z     <- state
//! z     <- (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z     <- (z ^ (z >> 27)) * 0x94D049BB133111EB
//! out   <- z ^ (z >> 31)
//! ```
//!
//! Uniform reals use the top 53 bits: `(out >> 11) * 2^-53`, in `[0, 1)`.
//! Uniform integers in `[lo, hi]` use `lo + out % (hi - lo + 1)`.

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn int_in(&mut self, lo: u64, hi: u64) -> u64 {
        lo + self.next_u64() % (hi - lo + 1)
    }
}
