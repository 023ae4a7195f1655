//! Chunk-size calculators for the dynamic loop self-scheduling techniques.
//!
//! A technique decides how many of the remaining loop iterations the next
//! requesting processing element (PE) receives. Thirteen techniques are
//! implemented: STATIC, SS, FSC, GSS, TAP, TSS, FAC2, TFSS, FISS, VISS, AF,
//! RND and PLS. Each comes in two equivalent formulations:
//!
//! - **Closed form** ([`ChunkCalculator`], [`compute_chunk_closed`]): the
//!   chunk for scheduling step `i` is a function of the loop constants and
//!   `i` alone. This is what decentralized self-assignment needs, because a
//!   worker can evaluate it without any history of other workers' grants.
//!   The closed forms define the *canonical* chunk sequence everywhere in
//!   this crate.
//! - **Recursive form** ([`recursive`]): the literal step-by-step recurrences
//!   the techniques were originally defined with, where step `i` depends on
//!   the remaining count `R_i` or the previous chunk. Kept as an independent
//!   oracle; closed and recursive sequences agree exactly for STATIC, SS,
//!   TSS and FISS and to within one iteration per step for GSS and FAC2.
//!
//! AF is adaptive: its chunk depends on measured per-PE execution times, so
//! it has no closed form. Its calculator lives in [`af`].
//!
//! Every raw formula result `f` is granted as `k = min(R, max(min_chunk, f))`
//! where `R` is the remaining iteration count, so a grant never overshoots
//! the loop end, never falls below the configured minimum while enough work
//! remains, and the final grant absorbs any remainder. Consequently chunk
//! sequences always sum to exactly the total iteration count.
//!
//! Rounding of real-valued formulas: GSS, TAP, FAC2, TFSS, FISS, PLS, FSC,
//! STATIC and AF round up; VISS rounds down. Chunk arithmetic is 64-bit
//! integer; real-valued intermediates use `f64`.

pub mod af;
pub mod recursive;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Floor for measured or configured mean iteration times wherever they end
/// up in a denominator.
pub const MU_FLOOR: f64 = 1e-9;

/// The self-scheduling techniques.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Technique {
    /// Equal static chunks of ceil(N/P), one per PE.
    Static,
    /// Pure self-scheduling, one iteration per grant.
    Ss,
    /// Fixed size chunking: a single precomputed size balancing scheduling
    /// overhead `h` against iteration-time variability `sigma`.
    Fsc,
    /// Guided self-scheduling: ceil of remaining/P, closed form
    /// ceil(((P-1)/P)^i * N/P).
    Gss,
    /// Trapezoid adaptive variant of GSS using the iteration-time
    /// coefficient of variation.
    Tap,
    /// Trapezoid self-scheduling: linear decrease from ceil(N/2P) to 1.
    Tss,
    /// Factoring with the fixed ratio 1/2: batches of P equal chunks, each
    /// batch half the per-PE share of what remained.
    Fac2,
    /// Trapezoid factoring: batches of P equal chunks averaging the next P
    /// TSS sizes.
    Tfss,
    /// Fixed increase self-scheduling: batches grow linearly from a start
    /// size determined by the batch count B.
    Fiss,
    /// Variable increase self-scheduling: batch growth halves each batch
    /// (geometric approach toward twice the start size).
    Viss,
    /// Adaptive factoring: per-PE mean/variance of measured iteration times
    /// drive the chunk size. No closed form; see [`af`].
    Af,
    /// Uniform random chunk in [1, N/P] from a pinned PRNG.
    Rnd,
    /// Performance loop scheduling: a static phase sized by the sequential
    /// workload ratio SWR, then GSS over the rest.
    Pls,
}

impl Technique {
    /// All techniques, in the conventional presentation order.
    pub const ALL: [Technique; 13] = [
        Technique::Static,
        Technique::Ss,
        Technique::Fsc,
        Technique::Gss,
        Technique::Tap,
        Technique::Tss,
        Technique::Fac2,
        Technique::Tfss,
        Technique::Fiss,
        Technique::Viss,
        Technique::Af,
        Technique::Rnd,
        Technique::Pls,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Technique::Static => "static",
            Technique::Ss => "ss",
            Technique::Fsc => "fsc",
            Technique::Gss => "gss",
            Technique::Tap => "tap",
            Technique::Tss => "tss",
            Technique::Fac2 => "fac2",
            Technique::Tfss => "tfss",
            Technique::Fiss => "fiss",
            Technique::Viss => "viss",
            Technique::Af => "af",
            Technique::Rnd => "rnd",
            Technique::Pls => "pls",
        }
    }
}

impl std::fmt::Display for Technique {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Technique {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        Technique::ALL
            .iter()
            .copied()
            .find(|t| t.name() == lower)
            .ok_or_else(|| Error::config(format!("unknown technique `{s}`")))
    }
}

/// The loop being scheduled: `total_iterations` independent iterations over
/// `num_pes` processing elements, granted in chunks of at least `min_chunk`
/// (except the final grant, which may be smaller when less remains).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoopDescriptor {
    pub total_iterations: u64,
    pub num_pes: u32,
    pub min_chunk: u64,
}

impl LoopDescriptor {
    pub fn new(total_iterations: u64, num_pes: u32) -> Result<Self> {
        LoopDescriptor {
            total_iterations,
            num_pes,
            min_chunk: 1,
        }
        .validated()
    }

    pub fn with_min_chunk(mut self, min_chunk: u64) -> Result<Self> {
        self.min_chunk = min_chunk;
        self.validated()
    }

    fn validated(self) -> Result<Self> {
        if self.total_iterations == 0 {
            return Err(Error::config("total_iterations must be at least 1"));
        }
        if self.num_pes == 0 {
            return Err(Error::config("num_pes must be at least 1"));
        }
        if self.min_chunk == 0 || self.min_chunk > self.total_iterations {
            return Err(Error::config(format!(
                "min_chunk must be in 1..={}, got {}",
                self.total_iterations, self.min_chunk
            )));
        }
        Ok(self)
    }

    fn n(&self) -> f64 {
        self.total_iterations as f64
    }

    fn p(&self) -> f64 {
        f64::from(self.num_pes)
    }

    fn p64(&self) -> u64 {
        u64::from(self.num_pes)
    }
}

/// A technique plus the constants it needs. Only the parameters the chosen
/// technique uses are validated; the rest may stay unset.
#[derive(Debug, Clone, PartialEq)]
pub struct TechniqueSpec {
    pub technique: Technique,
    /// FSC: scheduling overhead per chunk, seconds.
    pub h: Option<f64>,
    /// FSC, TAP: standard deviation of iteration times, seconds.
    pub sigma: Option<f64>,
    /// TAP: mean iteration time, seconds.
    pub mu: Option<f64>,
    /// TAP: confidence scaling factor for the variability term.
    pub alpha: Option<f64>,
    /// FISS, VISS: number of scheduling batches B (at least 2).
    pub batches: Option<u32>,
    /// PLS: sequential workload ratio in (0, 1].
    pub swr: Option<f64>,
    /// RND: seed of the pinned chunk-size stream.
    pub rng_seed: Option<u64>,
    /// VISS: explicit start size overriding the FISS-derived default.
    pub viss_k0: Option<u64>,
}

impl TechniqueSpec {
    pub fn new(technique: Technique) -> Self {
        TechniqueSpec {
            technique,
            h: None,
            sigma: None,
            mu: None,
            alpha: None,
            batches: None,
            swr: None,
            rng_seed: None,
            viss_k0: None,
        }
    }

    pub fn static_() -> Self {
        Self::new(Technique::Static)
    }

    pub fn ss() -> Self {
        Self::new(Technique::Ss)
    }

    pub fn fsc(h: f64, sigma: f64) -> Self {
        let mut s = Self::new(Technique::Fsc);
        s.h = Some(h);
        s.sigma = Some(sigma);
        s
    }

    pub fn gss() -> Self {
        Self::new(Technique::Gss)
    }

    pub fn tap(mu: f64, sigma: f64, alpha: f64) -> Self {
        let mut s = Self::new(Technique::Tap);
        s.mu = Some(mu);
        s.sigma = Some(sigma);
        s.alpha = Some(alpha);
        s
    }

    pub fn tss() -> Self {
        Self::new(Technique::Tss)
    }

    pub fn fac2() -> Self {
        Self::new(Technique::Fac2)
    }

    pub fn tfss() -> Self {
        Self::new(Technique::Tfss)
    }

    pub fn fiss(batches: u32) -> Self {
        let mut s = Self::new(Technique::Fiss);
        s.batches = Some(batches);
        s
    }

    pub fn viss(batches: u32) -> Self {
        let mut s = Self::new(Technique::Viss);
        s.batches = Some(batches);
        s
    }

    pub fn viss_with_k0(k0: u64) -> Self {
        let mut s = Self::new(Technique::Viss);
        s.viss_k0 = Some(k0);
        s
    }

    pub fn af() -> Self {
        Self::new(Technique::Af)
    }

    pub fn rnd(seed: u64) -> Self {
        let mut s = Self::new(Technique::Rnd);
        s.rng_seed = Some(seed);
        s
    }

    pub fn pls(swr: f64) -> Self {
        let mut s = Self::new(Technique::Pls);
        s.swr = Some(swr);
        s
    }

    /// Checks that every parameter the technique needs is present, finite
    /// and positive (B at least 2, SWR in (0, 1]).
    pub fn validate(&self) -> Result<()> {
        let need = |value: Option<f64>, name: &str| -> Result<f64> {
            let v = value.ok_or_else(|| {
                Error::config(format!("{} requires parameter `{name}`", self.technique))
            })?;
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::config(format!(
                    "{} parameter `{name}` must be finite and positive, got {v}",
                    self.technique
                )));
            }
            Ok(v)
        };
        match self.technique {
            Technique::Fsc => {
                need(self.h, "h")?;
                need(self.sigma, "sigma")?;
            }
            Technique::Tap => {
                need(self.mu, "mu")?;
                need(self.sigma, "sigma")?;
                need(self.alpha, "alpha")?;
            }
            Technique::Fiss => {
                self.batches_checked()?;
            }
            Technique::Viss => {
                if self.viss_k0.is_none() {
                    self.batches_checked()?;
                } else if self.viss_k0 == Some(0) {
                    return Err(Error::config("viss requires viss_k0 >= 1"));
                }
            }
            Technique::Rnd => {
                if self.rng_seed.is_none() {
                    return Err(Error::config("rnd requires parameter `rng_seed`"));
                }
            }
            Technique::Pls => {
                let swr = need(self.swr, "swr")?;
                if swr > 1.0 {
                    return Err(Error::config(format!("pls swr must be in (0, 1], got {swr}")));
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn batches_checked(&self) -> Result<u32> {
        match self.batches {
            Some(b) if b >= 2 => Ok(b),
            Some(b) => Err(Error::config(format!(
                "{} requires batches >= 2, got {b}",
                self.technique
            ))),
            None => Err(Error::config(format!(
                "{} requires parameter `batches`",
                self.technique
            ))),
        }
    }
}

/// TSS shape constants: chunks decrease linearly from `first` to `last`
/// over `steps` grants, shrinking by `decrement` each step.
///
/// `first = ceil(N/2P)`, `last = 1`, `steps = ceil(2N/(first+last))`,
/// `decrement = floor((first-last)/(steps-1))` (0 when there is only one
/// step).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TssParams {
    pub first: u64,
    pub last: u64,
    pub steps: u64,
    pub decrement: u64,
}

/// Derives the TSS constants from the loop bounds.
pub fn tss_params(loop_desc: &LoopDescriptor) -> TssParams {
    let n = loop_desc.total_iterations;
    let first = n.div_ceil(2 * loop_desc.p64());
    let last = 1u64;
    let steps = (2 * n).div_ceil(first + last);
    let decrement = if steps > 1 { (first - last) / (steps - 1) } else { 0 };
    TssParams {
        first,
        last,
        steps,
        decrement,
    }
}

/// Precomputed closed-form evaluator for one (technique, loop) pair.
///
/// Construction validates the spec and computes every constant that does not
/// depend on the step index, so `chunk_at` is cheap enough to sit inside an
/// assignment critical section.
#[derive(Debug, Clone)]
pub struct ChunkCalculator {
    loop_desc: LoopDescriptor,
    kernel: Kernel,
}

#[derive(Debug, Clone)]
enum Kernel {
    Fixed { chunk: u64 },
    Ss,
    Gss { ratio: f64, first: f64 },
    Tap { ratio: f64, first: f64, v: f64 },
    Tss { first: i128, dec: i128 },
    Fac2 { first: f64 },
    Tfss { first: i128, dec: i128 },
    Fiss { k0: u64, inc: u64 },
    Viss { k0: f64 },
    Rnd { seed: u64, hi: u64 },
    Pls { stat: u64, switch_step: u64, ratio: f64, dyn_first: f64 },
}

/// Rounds a positive real chunk up to an integer; non-finite values (possible
/// only through division by zero in degenerate configurations) saturate so
/// the remaining-count clamp decides. Values within ~1e-9 of a whole number
/// are taken as that number, absorbing one-ulp error in products like
/// `n * swr` so they do not round up twice.
fn ceil_chunk(x: f64) -> u64 {
    if !x.is_finite() {
        return u64::MAX;
    }
    if x <= 0.0 {
        return 0;
    }
    let eps = 1e-9_f64.max(x * 1e-12);
    (x - eps).ceil() as u64 // saturates at u64::MAX
}

/// Floor with the same near-integer tolerance as `ceil_chunk`.
fn floor_chunk(x: f64) -> u64 {
    if !x.is_finite() {
        return u64::MAX;
    }
    if x <= 0.0 {
        return 0;
    }
    let eps = 1e-9_f64.max(x * 1e-12);
    (x + eps).floor() as u64
}

impl ChunkCalculator {
    pub fn new(spec: &TechniqueSpec, loop_desc: &LoopDescriptor) -> Result<Self> {
        spec.validate()?;
        let n = loop_desc.n();
        let p = loop_desc.p();
        let n_int = loop_desc.total_iterations;
        let p_int = loop_desc.p64();
        let kernel = match spec.technique {
            Technique::Af => {
                return Err(Error::config(
                    "af has no closed form; use the adaptive calculator in techniques::af",
                ))
            }
            Technique::Static => Kernel::Fixed { chunk: n_int.div_ceil(p_int) },
            Technique::Ss => Kernel::Ss,
            Technique::Fsc => {
                // sqrt(2)*N*h / (sigma*P*sqrt(ln P)); P = 1 zeroes the
                // denominator and the clamp turns the result into "all of it".
                let num = std::f64::consts::SQRT_2 * n * spec.h.unwrap();
                let den = spec.sigma.unwrap() * p * p.ln().sqrt();
                Kernel::Fixed { chunk: ceil_chunk(num / den) }
            }
            Technique::Gss => Kernel::Gss { ratio: (p - 1.0) / p, first: n / p },
            Technique::Tap => {
                let v = spec.alpha.unwrap() * spec.sigma.unwrap() / spec.mu.unwrap();
                Kernel::Tap { ratio: (p - 1.0) / p, first: n / p, v }
            }
            Technique::Tss => {
                let t = tss_params(loop_desc);
                Kernel::Tss { first: i128::from(t.first), dec: i128::from(t.decrement) }
            }
            Technique::Fac2 => Kernel::Fac2 { first: n / p },
            Technique::Tfss => {
                let t = tss_params(loop_desc);
                Kernel::Tfss { first: i128::from(t.first), dec: i128::from(t.decrement) }
            }
            Technique::Fiss => {
                let (k0, inc) = fiss_params(spec.batches.unwrap(), loop_desc);
                Kernel::Fiss { k0, inc }
            }
            Technique::Viss => {
                let k0 = match spec.viss_k0 {
                    Some(k0) => k0,
                    None => fiss_params(spec.batches.unwrap(), loop_desc).0,
                };
                Kernel::Viss { k0: k0 as f64 }
            }
            Technique::Rnd => Kernel::Rnd {
                seed: spec.rng_seed.unwrap(),
                hi: (n_int / p_int).max(1),
            },
            Technique::Pls => {
                // Static phase hands out chunks of ceil(N*SWR/P) until the
                // sequential share is consumed, then GSS over the rest. With
                // deterministic grants the remaining-count condition reduces
                // to a fixed switch step.
                let swr_total = n * spec.swr.unwrap();
                let stat = ceil_chunk(swr_total / p).max(1);
                let switch_step = ceil_chunk(swr_total / stat as f64);
                let dyn_n = n_int.saturating_sub(switch_step.saturating_mul(stat));
                Kernel::Pls {
                    stat,
                    switch_step,
                    ratio: (p - 1.0) / p,
                    dyn_first: dyn_n as f64 / p,
                }
            }
        };
        Ok(ChunkCalculator { loop_desc: *loop_desc, kernel })
    }

    pub fn loop_desc(&self) -> &LoopDescriptor {
        &self.loop_desc
    }

    /// Raw formula value for scheduling step `step`, before the minimum and
    /// remaining-count clamps. Exposed so the batch structure of the
    /// formulas can be observed directly.
    pub fn raw_chunk_at(&self, step: u64) -> u64 {
        let p = self.loop_desc.p64();
        // powi is exact multiplication chains; exponents beyond i32 only
        // occur past the point where the formula has decayed to zero anyway.
        let powi = |base: f64, e: u64| base.powi(e.min(i32::MAX as u64) as i32);
        match &self.kernel {
            Kernel::Fixed { chunk } => *chunk,
            Kernel::Ss => 1,
            Kernel::Gss { ratio, first } => ceil_chunk(powi(*ratio, step) * first),
            Kernel::Tap { ratio, first, v } => {
                // g is the integer GSS chunk; the variability correction
                // subtracts v*sqrt(2g) (to first order) before rounding up.
                let g = ceil_chunk(powi(*ratio, step) * first) as f64;
                ceil_chunk(g + v * v / 2.0 - v * (2.0 * g + v * v / 4.0).sqrt())
            }
            Kernel::Tss { first, dec } => {
                let k = first - i128::from(step) * dec;
                k.max(0).min(i128::from(u64::MAX)) as u64
            }
            Kernel::Fac2 { first } => {
                let batch = step / p + 1;
                ceil_chunk(powi(0.5, batch) * first)
            }
            Kernel::Tfss { first, dec } => {
                // Mean of the P consecutive TSS sizes starting at this
                // batch's first step, rounded up.
                let base = i128::from((step / p) * p);
                let pp = i128::from(p);
                let sum: i128 = pp * first - dec * (pp * base + pp * (pp - 1) / 2);
                if sum <= 0 {
                    0
                } else {
                    (sum + pp - 1) / pp
                }
                .min(i128::from(u64::MAX)) as u64
            }
            Kernel::Fiss { k0, inc } => k0.saturating_add((step / p).saturating_mul(*inc)),
            Kernel::Viss { k0 } => {
                // Geometric batch growth toward 2*k0: k0 * (2 - 0.5^batch).
                let batch = step / p;
                floor_chunk(k0 * (2.0 - powi(0.5, batch)))
            }
            Kernel::Rnd { seed, hi } => {
                // One derived stream per step keeps the draw a pure function
                // of (seed, step); rejection keeps it unbiased in [1, hi].
                1 + SplitMix64::from_stream(*seed, step).next_below(*hi)
            }
            Kernel::Pls { stat, switch_step, ratio, dyn_first } => {
                if step < *switch_step {
                    *stat
                } else {
                    ceil_chunk(powi(*ratio, step - switch_step) * dyn_first)
                }
            }
        }
    }

    /// Chunk granted at scheduling step `step` with `remaining` iterations
    /// left: 0 iff `remaining` is 0, otherwise the clamped formula value
    /// `min(remaining, max(min_chunk, raw))`.
    pub fn chunk_at(&self, step: u64, remaining: u64) -> u64 {
        if remaining == 0 {
            return 0;
        }
        remaining.min(self.raw_chunk_at(step).max(self.loop_desc.min_chunk))
    }
}

/// FISS start size and per-batch increment for batch count `b`:
/// `k0 = ceil(N/((2+B)P))`, `inc = ceil(4N/((2+B)*P*B*(B-1)))`.
pub(crate) fn fiss_params(b: u32, loop_desc: &LoopDescriptor) -> (u64, u64) {
    let n = loop_desc.n();
    let p = loop_desc.p();
    let b = f64::from(b);
    let k0 = ceil_chunk(n / ((2.0 + b) * p));
    // 2N(1 - B/(2+B)) simplifies to 4N/(2+B).
    let inc = ceil_chunk(4.0 * n / ((2.0 + b) * p * b * (b - 1.0)));
    (k0, inc)
}

/// Closed-form chunk for scheduling step `step` with `remaining` iterations
/// left. `pe_id` is accepted for signature symmetry with the assignment
/// paths; no closed form depends on the requester's identity. Not defined
/// for AF (configuration error).
pub fn compute_chunk_closed(
    spec: &TechniqueSpec,
    loop_desc: &LoopDescriptor,
    step: u64,
    remaining: u64,
    _pe_id: u32,
) -> Result<u64> {
    Ok(ChunkCalculator::new(spec, loop_desc)?.chunk_at(step, remaining))
}

/// The full canonical chunk sequence: closed-form chunks granted until no
/// iterations remain. Every sequence sums to `total_iterations`.
pub fn canonical_sequence(spec: &TechniqueSpec, loop_desc: &LoopDescriptor) -> Result<Vec<u64>> {
    let calc = ChunkCalculator::new(spec, loop_desc)?;
    let mut remaining = loop_desc.total_iterations;
    let mut seq = Vec::new();
    let mut step = 0u64;
    while remaining > 0 {
        let k = calc.chunk_at(step, remaining);
        debug_assert!(k >= 1);
        seq.push(k);
        remaining -= k;
        step += 1;
    }
    Ok(seq)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(n: u64, p: u32) -> LoopDescriptor {
        LoopDescriptor::new(n, p).unwrap()
    }

    fn chunk(spec: &TechniqueSpec, n: u64, p: u32, step: u64, remaining: u64) -> u64 {
        compute_chunk_closed(spec, &lp(n, p), step, remaining, 0).unwrap()
    }

    #[test]
    fn static_equal_shares() {
        for i in 0..4 {
            assert_eq!(chunk(&TechniqueSpec::static_(), 1000, 4, i, 1000 - 250 * i), 250);
        }
        // Uneven division: ceil shares, the tail absorbs the shortfall.
        assert_eq!(chunk(&TechniqueSpec::static_(), 1001, 4, 0, 1001), 251);
        assert_eq!(canonical_sequence(&TechniqueSpec::static_(), &lp(1001, 4)).unwrap(), vec![251, 251, 251, 248]);
    }

    #[test]
    fn ss_single_iterations() {
        assert_eq!(chunk(&TechniqueSpec::ss(), 1000, 4, 0, 1000), 1);
        assert_eq!(chunk(&TechniqueSpec::ss(), 1000, 4, 999, 1), 1);
        assert_eq!(canonical_sequence(&TechniqueSpec::ss(), &lp(7, 3)).unwrap(), vec![1; 7]);
    }

    #[test]
    fn gss_closed_form() {
        let spec = TechniqueSpec::gss();
        assert_eq!(chunk(&spec, 1000, 4, 0, 1000), 250);
        // ceil(0.75^4 * 250) = ceil(79.10) = 80.
        assert_eq!(chunk(&spec, 1000, 4, 4, 315), 80);
        // Single PE takes everything at once.
        assert_eq!(chunk(&spec, 1000, 1, 0, 1000), 1000);
    }

    #[test]
    fn tap_reduces_to_gss_for_small_variability() {
        let spec = TechniqueSpec::tap(0.1, 0.0005, 0.0605);
        assert_eq!(chunk(&spec, 1000, 4, 0, 1000), 250);
        let gss = canonical_sequence(&TechniqueSpec::gss(), &lp(1000, 4)).unwrap();
        let tap = canonical_sequence(&spec, &lp(1000, 4)).unwrap();
        assert_eq!(gss, tap);
    }

    #[test]
    fn tss_constants() {
        let t = tss_params(&lp(1000, 4));
        assert_eq!(
            t,
            TssParams { first: 125, last: 1, steps: 16, decrement: 8 }
        );
        // Tiny loop: first = 1 and the decrement degenerates to 0.
        let t = tss_params(&lp(8, 4));
        assert_eq!(t.first, 1);
        assert_eq!(t.decrement, 0);
    }

    #[test]
    fn fac2_halving_batches() {
        let spec = TechniqueSpec::fac2();
        // Batch 3 (steps 8..12): ceil(0.5^3 * 250) = 32.
        assert_eq!(chunk(&spec, 1000, 4, 8, 500), 32);
        let seq = canonical_sequence(&spec, &lp(1000, 4)).unwrap();
        assert_eq!(seq[0..4], [125, 125, 125, 125]);
        assert_eq!(seq.len(), 28);
    }

    #[test]
    fn tfss_averages_next_tss_chunks() {
        // (125 + 117 + 109 + 101) / 4 = 113.
        assert_eq!(chunk(&TechniqueSpec::tfss(), 1000, 4, 0, 1000), 113);
    }

    #[test]
    fn fiss_start_and_increment() {
        assert_eq!(chunk(&TechniqueSpec::fiss(3), 1000, 4, 0, 1000), 50);
        let seq = canonical_sequence(&TechniqueSpec::fiss(3), &lp(1000, 4)).unwrap();
        assert_eq!(seq, vec![50, 50, 50, 50, 84, 84, 84, 84, 118, 118, 118, 110]);
    }

    #[test]
    fn viss_geometric_batches() {
        let seq = canonical_sequence(&TechniqueSpec::viss_with_k0(62), &lp(1000, 4)).unwrap();
        assert_eq!(seq, vec![62, 62, 62, 62, 93, 93, 93, 93, 108, 108, 108, 56]);
        // Default start size comes from the FISS formula.
        assert_eq!(chunk(&TechniqueSpec::viss(3), 1000, 4, 0, 1000), 50);
    }

    #[test]
    fn pls_static_then_gss() {
        let spec = TechniqueSpec::pls(0.7);
        assert_eq!(chunk(&spec, 1000, 4, 0, 1000), 175);
        // Third chunk of the 300-iteration dynamic phase.
        assert_eq!(chunk(&spec, 1000, 4, 6, 168), 43);
        let seq = canonical_sequence(&spec, &lp(1000, 4)).unwrap();
        assert_eq!(seq[0..4], [175, 175, 175, 175]);
        assert_eq!(seq[4], 75);
    }

    #[test]
    fn fsc_fixed_chunk() {
        // P = 1 zeroes the denominator; the clamp grants all of it.
        assert_eq!(chunk(&TechniqueSpec::fsc(0.013716, 0.2), 1000, 1, 0, 1000), 1000);
        let seq = canonical_sequence(&TechniqueSpec::fsc(0.2, 0.2), &lp(1000, 4)).unwrap();
        // All chunks equal except a possibly smaller final one.
        let first = seq[0];
        assert!(seq[..seq.len() - 1].iter().all(|&k| k == first));
        assert_eq!(seq.iter().sum::<u64>(), 1000);
    }

    #[test]
    fn rnd_bounds_and_determinism() {
        let spec = TechniqueSpec::rnd(99);
        let seq1 = canonical_sequence(&spec, &lp(1000, 4)).unwrap();
        let seq2 = canonical_sequence(&spec, &lp(1000, 4)).unwrap();
        assert_eq!(seq1, seq2);
        // All but the final clamped grant lie in [1, N/P].
        assert!(seq1[..seq1.len() - 1].iter().all(|&k| (1..=250).contains(&k)));
        assert_eq!(seq1.iter().sum::<u64>(), 1000);
    }

    #[test]
    fn min_chunk_floors_grants() {
        let loop_desc = lp(1000, 4).with_min_chunk(10).unwrap();
        let seq = canonical_sequence(&TechniqueSpec::ss(), &loop_desc).unwrap();
        assert_eq!(seq, vec![10; 100]);
    }

    #[test]
    fn final_grant_truncates_below_min_chunk() {
        // min_chunk 7 does not divide 10: the tail grant is the remainder.
        let loop_desc = lp(10, 2).with_min_chunk(7).unwrap();
        let seq = canonical_sequence(&TechniqueSpec::ss(), &loop_desc).unwrap();
        assert_eq!(seq, vec![7, 3]);
    }

    #[test]
    fn zero_remaining_terminates() {
        assert_eq!(chunk(&TechniqueSpec::gss(), 1000, 4, 17, 0), 0);
    }

    #[test]
    fn more_pes_than_iterations() {
        let seq = canonical_sequence(&TechniqueSpec::static_(), &lp(1, 8)).unwrap();
        assert_eq!(seq, vec![1]);
    }

    #[test]
    fn invalid_descriptors_rejected() {
        assert!(LoopDescriptor::new(0, 4).is_err());
        assert!(LoopDescriptor::new(100, 0).is_err());
        assert!(lp(10, 2).with_min_chunk(0).is_err());
        assert!(lp(10, 2).with_min_chunk(11).is_err());
    }

    #[test]
    fn missing_parameters_rejected() {
        assert!(TechniqueSpec::new(Technique::Fsc).validate().is_err());
        assert!(TechniqueSpec::new(Technique::Tap).validate().is_err());
        assert!(TechniqueSpec::new(Technique::Fiss).validate().is_err());
        assert!(TechniqueSpec::fiss(1).validate().is_err());
        assert!(TechniqueSpec::new(Technique::Rnd).validate().is_err());
        assert!(TechniqueSpec::pls(1.5).validate().is_err());
        assert!(TechniqueSpec::pls(0.7).validate().is_ok());
        // VISS accepts either an explicit start size or a batch count.
        assert!(TechniqueSpec::viss_with_k0(62).validate().is_ok());
        assert!(TechniqueSpec::new(Technique::Viss).validate().is_err());
    }

    #[test]
    fn af_has_no_closed_form() {
        assert!(compute_chunk_closed(&TechniqueSpec::af(), &lp(100, 4), 0, 100, 0).is_err());
    }

    #[test]
    fn technique_names_round_trip() {
        for t in Technique::ALL {
            assert_eq!(t.name().parse::<Technique>().unwrap(), t);
        }
        assert!("nope".parse::<Technique>().is_err());
    }
}
