//! Deterministic pseudo-random numbers with a pinned, portable algorithm.
//!
//! Everything stochastic in this crate (the RND technique, synthetic workload
//! sampling, derived per-repetition seeds) goes through SplitMix64 so that a
//! seed reproduces the same sequence on any platform and any future version
//! of this crate. The algorithm is Steele, Lea and Vigna's SplitMix64: the
//! state advances by the 64-bit golden-ratio constant and each output is the
//! variant-13 mix of the new state. Constants:
//!
//! - gamma: `0x9E3779B97F4A7C15`
//! - mix multipliers: `0xBF58476D1CE4E5B9`, `0x94D049BB133111EB`
//! - mix shifts: 30, 27, 31
//!
//! A general-purpose RNG crate is deliberately not used here: the stock
//! generators document that their streams may change between versions, and a
//! reproducible chunk sequence is part of this crate's contract.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer: bijective 64-bit mix, also usable standalone as a
/// hash for deriving independent seeds.
pub fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the `index`-th derived stream of `seed`. Equals the state the
/// base generator would have after `index + 1` advances, so derived streams
/// never collide with each other or with the base stream's outputs.
pub fn derive(seed: u64, index: u64) -> u64 {
    seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GAMMA))
}

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Generator for the `index`-th derived stream of `seed`.
    pub fn from_stream(seed: u64, index: u64) -> Self {
        SplitMix64::new(derive(seed, index))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix(self.state)
    }

    /// Uniform draw from `[0, bound)` by rejection sampling, so every value
    /// is exactly equally likely. `bound` must be nonzero.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        // Largest multiple of `bound` that fits in 64 bits; draws at or
        // above it would bias the modulus and are rejected.
        let zone = u64::MAX - u64::MAX % bound;
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % bound;
            }
        }
    }

    /// Uniform draw from `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw (Box-Muller). Consumes two uniform draws.
    pub fn next_normal(&mut self) -> f64 {
        // 1 - u in (0, 1] keeps the logarithm finite.
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
