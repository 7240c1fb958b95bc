//! Self-contained pseudorandom generator so instances and heuristic runs are
//! reproducible across platforms and toolchains.
//!
//! The generator is SplitMix64 (Steele, Lea & Flood): the state advances by
//! the golden-ratio increment `0x9E3779B97F4A7C15` and each output is the
//! state scrambled by two xor-shift/multiply rounds. Integer ranges are drawn
//! by rejection sampling, floats by taking the top 53 bits, so every value is
//! a pure function of the seed.

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

    /// Uniform value in `0..bound` (rejection sampling, no modulo bias).
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "next_below requires a positive bound");
        let zone = bound.wrapping_mul(u64::MAX / bound);
        loop {
            let v = self.next_u64();
            if zone == 0 || v < zone {
                return v % bound;
            }
        }
    }

    /// Uniform integer in the inclusive range `lo..=hi`.
    pub fn int_in(&mut self, lo: i64, hi: i64) -> i64 {
        assert!(lo <= hi);
        let span = (hi - lo) as u64 + 1;
        lo + self.next_below(span) as i64
    }

    /// Uniform float in `[0, 1)` from the top 53 bits.
    pub fn unit_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
