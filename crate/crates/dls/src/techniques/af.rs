//! Adaptive factoring: chunk sizes driven by measured per-PE iteration times.
//!
//! Each PE accumulates the mean and variance of its own iteration times.
//! When a PE requests work, two aggregates over all sampled PEs are formed:
//!
//! - `D = sum_p sigma_p^2 / mu_p`, the variability load, and
//! - `E = 1 / sum_p (1 / mu_p)`, the harmonic aggregate mean,
//!
//! and the requester with mean `mu_p` receives
//!
//! `k = ceil( (D + 2*E*R - sqrt(D^2 + 4*D*E*R)) / (2 * mu_p) )`
//!
//! where `R` is the remaining iteration count at the moment of the request.
//! With zero measured variance this reduces to `E*R/mu_p`: the remaining
//! work split proportionally to measured speed.
//!
//! The formula is meaningful only once every PE contributes to `D` and `E`.
//! Until then the session is in its bootstrap phase and every grant is the
//! minimum chunk: small grants produce timing data cheaply, and aggregating
//! over a partial subset would let the first PE to report monopolize the
//! loop (its own mean is then the harmonic aggregate, making `k = R`).
//!
//! The aggregates deliberately take a snapshot of the statistics separate
//! from consuming `R`, so an assignment path can read the timing store and
//! the loop state under different locks.

use super::MU_FLOOR;

/// Running mean and variance of one PE's iteration times, accumulated with
/// Welford's recurrence so long runs lose no precision to catastrophic
/// cancellation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AfStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl AfStats {
    pub fn new() -> Self {
        AfStats::default()
    }

    /// Records one measured iteration time in seconds.
    pub fn record(&mut self, seconds: f64) {
        self.count += 1;
        let delta = seconds - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (seconds - self.mean);
    }

    /// Records `count` iterations that together took `total_seconds`,
    /// entering each iteration at the chunk's mean time. Useful when only
    /// whole-chunk timings are available; per-iteration recording preserves
    /// more variance information when it is.
    pub fn record_chunk(&mut self, total_seconds: f64, count: u64) {
        if count == 0 {
            return;
        }
        let per_iter = total_seconds / count as f64;
        for _ in 0..count {
            self.record(per_iter);
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Mean iteration time; 0 until the first sample.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; 0 until the second sample.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }
}

/// Snapshot of the cross-PE aggregates entering the chunk formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AfCoefficients {
    /// Total variability load `sum sigma_p^2 / mu_p`.
    pub d: f64,
    /// Harmonic aggregate `1 / sum (1/mu_p)`.
    pub e: f64,
}

/// Aggregates the statistics of all PEs. Returns `None` while any PE still
/// lacks a timing sample (the bootstrap phase).
pub fn af_coefficients(stats: &[AfStats]) -> Option<AfCoefficients> {
    if stats.is_empty() || stats.iter().any(|s| s.count == 0) {
        return None;
    }
    let mut d = 0.0;
    let mut inv_sum = 0.0;
    for s in stats {
        let mu = s.mean.max(MU_FLOOR);
        d += s.variance() / mu;
        inv_sum += 1.0 / mu;
    }
    Some(AfCoefficients { d, e: 1.0 / inv_sum })
}

impl AfCoefficients {
    /// Raw (unclamped) chunk for a requester with mean iteration time
    /// `mu_p`, with `remaining` iterations left.
    pub fn raw_chunk(&self, mu_p: f64, remaining: u64) -> u64 {
        let r = remaining as f64;
        let mu = mu_p.max(MU_FLOOR);
        let disc = (self.d * self.d + 4.0 * self.d * self.e * r).sqrt();
        let k = (self.d + 2.0 * self.e * r - disc) / (2.0 * mu);
        super::ceil_chunk(k)
    }
}

/// Full adaptive chunk decision for PE `pe`: bootstrap grant of `min_chunk`
/// until the requester has timing samples, then the formula value, always
/// clamped to `min(remaining, max(min_chunk, raw))`.
pub fn af_chunk(stats: &[AfStats], pe: usize, remaining: u64, min_chunk: u64) -> u64 {
    if remaining == 0 {
        return 0;
    }
    let raw = match af_coefficients(stats) {
        Some(coeffs) => coeffs.raw_chunk(stats[pe].mean, remaining),
        None => min_chunk,
    };
    remaining.min(raw.max(min_chunk))
}
