//! Step-by-step recurrences for the self-scheduling techniques.
//!
//! The techniques were originally stated as recurrences: the chunk at step
//! `i` is written in terms of the iterations still remaining `R_i` or the
//! previous chunk, not of `i` alone. This module implements those literal
//! recurrences as an in-crate cross-check of the closed forms in the parent
//! module.
//!
//! Correspondence between the two formulations:
//!
//! - STATIC, SS, FSC, RND: the recurrence never reads the mutable state, so
//!   both forms are identical by construction.
//! - TSS, FISS: the recurrences are linear in the step or batch index and
//!   the closed forms are their exact solutions; sequences match exactly.
//! - GSS, TAP, FAC2: the closed forms solve the recurrence over the reals,
//!   but the recurrence re-rounds at every step. The accumulated rounding
//!   keeps each closed chunk within one iteration of the recursive one.
//! - TFSS: same averaging of the underlying TSS chain, expressed by
//!   consuming the chain incrementally.
//! - PLS: the phase switch tests consumed work against the sequential share
//!   instead of precomputing the switch step; the dynamic phase is the GSS
//!   recurrence.
//! - VISS: the literal recurrence grows each batch by half the *previous
//!   batch* (`k_{b+1} = k_b + k_b/2`), while the closed form halves the
//!   increment of the *first* batch (`k_b = k0*(2 - 0.5^b)`). They agree for
//!   the first two batches and then diverge, so VISS is compared on totals
//!   only.
//! - AF has no recurrence over (step, remaining) at all; constructing an
//!   evaluator for it is a configuration error.

use super::{fiss_params, tss_params, LoopDescriptor, Technique, TechniqueSpec};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone)]
enum Rule {
    Fixed { chunk: u64 },
    Ss,
    Gss,
    Tap { v: f64 },
    Tss { dec: u64 },
    Fac2,
    Tfss { dec: u64 },
    Fiss { k0: u64, inc: u64 },
    Viss { k0: u64 },
    Rnd { seed: u64, hi: u64 },
    Pls { stat: u64, static_share: f64 },
}

/// Incremental evaluator of a technique's recurrence. Feed it grants with
/// [`advance`](RecursiveEvaluator::advance) or let it walk the canonical
/// path with [`next_chunk`](RecursiveEvaluator::next_chunk).
#[derive(Debug, Clone)]
pub struct RecursiveEvaluator {
    loop_desc: LoopDescriptor,
    rule: Rule,
    step: u64,
    remaining: u64,
    /// Batch index the cached values below belong to.
    batch: Option<u64>,
    /// Chunk repeated within the current batch (batched rules only).
    batch_chunk: u64,
    /// Head of the underlying linear chain: current TSS value, or the next
    /// unconsumed one for TFSS.
    chain: i128,
}

impl RecursiveEvaluator {
    pub fn new(spec: &TechniqueSpec, loop_desc: &LoopDescriptor) -> Result<Self> {
        spec.validate()?;
        let n = loop_desc.total_iterations;
        let p = loop_desc.p64();
        let mut chain = 0i128;
        let rule = match spec.technique {
            Technique::Af => {
                return Err(Error::config(
                    "af is adaptive and has no step recurrence; use techniques::af",
                ))
            }
            Technique::Static => Rule::Fixed { chunk: n.div_ceil(p) },
            Technique::Ss => Rule::Ss,
            Technique::Fsc => {
                let num = std::f64::consts::SQRT_2 * loop_desc.n() * spec.h.unwrap();
                let den = spec.sigma.unwrap() * loop_desc.p() * loop_desc.p().ln().sqrt();
                let chunk = num / den;
                Rule::Fixed {
                    chunk: if chunk.is_finite() { chunk.ceil().max(0.0) as u64 } else { u64::MAX },
                }
            }
            Technique::Gss => Rule::Gss,
            Technique::Tap => {
                Rule::Tap { v: spec.alpha.unwrap() * spec.sigma.unwrap() / spec.mu.unwrap() }
            }
            Technique::Tss => {
                let t = tss_params(loop_desc);
                chain = i128::from(t.first);
                Rule::Tss { dec: t.decrement }
            }
            Technique::Fac2 => Rule::Fac2,
            Technique::Tfss => {
                let t = tss_params(loop_desc);
                chain = i128::from(t.first);
                Rule::Tfss { dec: t.decrement }
            }
            Technique::Fiss => {
                let (k0, inc) = fiss_params(spec.batches.unwrap(), loop_desc);
                Rule::Fiss { k0, inc }
            }
            Technique::Viss => {
                let k0 = match spec.viss_k0 {
                    Some(k0) => k0,
                    None => fiss_params(spec.batches.unwrap(), loop_desc).0,
                };
                Rule::Viss { k0 }
            }
            Technique::Rnd => Rule::Rnd {
                seed: spec.rng_seed.unwrap(),
                hi: (n / p).max(1),
            },
            Technique::Pls => {
                let share = loop_desc.n() * spec.swr.unwrap();
                let stat = (share / loop_desc.p()).ceil().max(1.0) as u64;
                Rule::Pls { stat, static_share: share }
            }
        };
        Ok(RecursiveEvaluator {
            loop_desc: *loop_desc,
            rule,
            step: 0,
            remaining: n,
            batch: None,
            batch_chunk: 0,
            chain,
        })
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn remaining(&self) -> u64 {
        self.remaining
    }

    /// Raw recurrence value for the current step. Batched rules compute
    /// their batch chunk on first entry into the batch, when `remaining`
    /// still holds the batch-start value, and cache it for the rest of the
    /// batch; repeated calls without an intervening `advance` are harmless.
    fn raw_current(&mut self) -> u64 {
        let p = self.loop_desc.p64();
        let r = self.remaining;
        match &self.rule {
            Rule::Fixed { chunk } => *chunk,
            Rule::Ss => 1,
            Rule::Gss => r.div_ceil(p),
            Rule::Tap { v } => {
                let g = r.div_ceil(p) as f64;
                let k = g + v * v / 2.0 - v * (2.0 * g + v * v / 4.0).sqrt();
                if k <= 0.0 {
                    0
                } else {
                    k.ceil() as u64
                }
            }
            Rule::Tss { .. } => self.chain.clamp(0, i128::from(u64::MAX)) as u64,
            Rule::Fac2 => {
                self.refresh_batch(|ev| ev.remaining.div_ceil(2 * p));
                self.batch_chunk
            }
            Rule::Tfss { dec } => {
                let dec = i128::from(*dec);
                self.refresh_batch(|ev| {
                    // Mean of the next P chain values, rounded up, then the
                    // chain head skips past them.
                    let pp = i128::from(p);
                    let sum = pp * ev.chain - dec * pp * (pp - 1) / 2;
                    ev.chain -= pp * dec;
                    if sum <= 0 {
                        0
                    } else {
                        ((sum + pp - 1) / pp).min(i128::from(u64::MAX)) as u64
                    }
                });
                self.batch_chunk
            }
            Rule::Fiss { k0, inc } => {
                let (k0, inc) = (*k0, *inc);
                self.refresh_batch(|ev| {
                    if ev.batch.is_none() {
                        k0
                    } else {
                        ev.batch_chunk.saturating_add(inc)
                    }
                });
                self.batch_chunk
            }
            Rule::Viss { k0 } => {
                let k0 = *k0;
                self.refresh_batch(|ev| {
                    if ev.batch.is_none() {
                        k0
                    } else {
                        ev.batch_chunk.saturating_add(ev.batch_chunk / 2)
                    }
                });
                self.batch_chunk
            }
            Rule::Rnd { seed, hi } => 1 + SplitMix64::from_stream(*seed, self.step).next_below(*hi),
            Rule::Pls { stat, static_share } => {
                let consumed = (self.loop_desc.total_iterations - r) as f64;
                if consumed < *static_share {
                    *stat
                } else {
                    r.div_ceil(p)
                }
            }
        }
    }

    fn refresh_batch(&mut self, compute: impl FnOnce(&mut Self) -> u64) {
        let b = self.step / self.loop_desc.p64();
        if self.batch != Some(b) {
            self.batch_chunk = compute(self);
            self.batch = Some(b);
        }
    }

    /// Clamped chunk the recurrence prescribes for the current step; 0 when
    /// nothing remains.
    pub fn current_chunk(&mut self) -> u64 {
        if self.remaining == 0 {
            return 0;
        }
        self.remaining
            .min(self.raw_current().max(self.loop_desc.min_chunk))
    }

    /// Consumes an externally decided grant of `granted` iterations and
    /// moves to the next step. The grant may differ from this evaluator's
    /// own prescription; batch bookkeeping for the current step is still
    /// performed so the chain state stays consistent.
    pub fn advance(&mut self, granted: u64) -> Result<()> {
        if granted > self.remaining {
            return Err(Error::Invariant(format!(
                "grant of {granted} exceeds remaining {}",
                self.remaining
            )));
        }
        let _ = self.raw_current();
        if let Rule::Tss { dec } = &self.rule {
            self.chain -= i128::from(*dec);
        }
        self.remaining -= granted;
        self.step += 1;
        Ok(())
    }

    /// Takes the recurrence's own chunk and advances past it. `None` once
    /// the loop is exhausted.
    pub fn next_chunk(&mut self) -> Option<u64> {
        let k = self.current_chunk();
        if k == 0 {
            return None;
        }
        self.advance(k).expect("own chunk is clamped to remaining");
        Some(k)
    }
}

impl Iterator for RecursiveEvaluator {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        self.next_chunk()
    }
}

/// Chunk the recurrence prescribes after an arbitrary grant history.
/// `history` holds the sizes already granted, in step order; they need not
/// equal the recurrence's own prescriptions. Errors if the history grants
/// more than the loop holds.
pub fn compute_chunk_recursive(
    spec: &TechniqueSpec,
    loop_desc: &LoopDescriptor,
    history: &[u64],
) -> Result<u64> {
    let mut ev = RecursiveEvaluator::new(spec, loop_desc)?;
    for &granted in history {
        ev.advance(granted)?;
    }
    Ok(ev.current_chunk())
}

/// The full chunk sequence produced by following the recurrence itself.
pub fn recursive_sequence(spec: &TechniqueSpec, loop_desc: &LoopDescriptor) -> Result<Vec<u64>> {
    Ok(RecursiveEvaluator::new(spec, loop_desc)?.collect())
}
