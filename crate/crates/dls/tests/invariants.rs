//! Property suites for the chunk calculators: every loop is tiled exactly,
//! sequences have the shape their formulas promise, batch techniques hold
//! their size for a full round of grants, and everything is deterministic
//! for a fixed seed.

use dls::techniques::af::{af_chunk, AfStats};
use dls::techniques::recursive::recursive_sequence;
use dls::techniques::{canonical_sequence, ChunkCalculator, LoopDescriptor, Technique, TechniqueSpec};
use proptest::prelude::*;

/// One spec per closed-form technique (AF is excluded: its sizes depend on
/// runtime timing state, not on (spec, loop, i, R) alone).
fn closed_specs(seed: u64) -> Vec<TechniqueSpec> {
    vec![
        TechniqueSpec::static_(),
        TechniqueSpec::ss(),
        TechniqueSpec::fsc(2e-4, 0.05),
        TechniqueSpec::gss(),
        TechniqueSpec::tap(0.1, 0.0005, 0.0605),
        TechniqueSpec::tss(),
        TechniqueSpec::fac2(),
        TechniqueSpec::tfss(),
        TechniqueSpec::fiss(3),
        TechniqueSpec::viss(3),
        TechniqueSpec::rnd(seed),
        TechniqueSpec::pls(0.7),
    ]
}

fn lp(n: u64, p: u32, min_chunk: u64) -> LoopDescriptor {
    LoopDescriptor::new(n, p)
        .unwrap()
        .with_min_chunk(min_chunk.clamp(1, n))
        .unwrap()
}

proptest! {
    // Granting until R = 0 tiles the loop: every chunk is at least 1, the
    // sizes sum to N, and the grant count is finite (bounded by N).
    #[test]
    fn coverage(
        idx in 0usize..12,
        n in 1u64..=100_000,
        p in 1u32..=512,
        min_chunk in 1u64..=64,
        seed in any::<u64>(),
    ) {
        let spec = closed_specs(seed).swap_remove(idx);
        let seq = canonical_sequence(&spec, &lp(n, p, min_chunk)).unwrap();
        prop_assert!(seq.iter().all(|&k| k >= 1));
        prop_assert!(seq.len() as u64 <= n);
        prop_assert_eq!(seq.iter().sum::<u64>(), n);
    }

    // The decreasing family never grows before the final remainder grant.
    #[test]
    fn decreasing_techniques_are_non_increasing(
        n in 1u64..=100_000,
        p in 1u32..=512,
        min_chunk in 1u64..=64,
    ) {
        let desc = lp(n, p, min_chunk);
        for spec in [
            TechniqueSpec::gss(),
            TechniqueSpec::tap(0.1, 0.0005, 0.0605),
            TechniqueSpec::tap(1.0, 2.0, 1.5),
            TechniqueSpec::tss(),
            TechniqueSpec::fac2(),
            TechniqueSpec::tfss(),
        ] {
            let seq = canonical_sequence(&spec, &desc).unwrap();
            let body = &seq[..seq.len() - 1];
            prop_assert!(
                body.windows(2).all(|w| w[0] >= w[1]),
                "{} grew mid-sequence: {:?}", spec.technique, seq
            );
        }
    }

    // The increasing family never shrinks before the final remainder grant.
    #[test]
    fn increasing_techniques_are_non_decreasing(
        n in 1u64..=100_000,
        p in 1u32..=512,
        min_chunk in 1u64..=64,
        batches in 2u32..=8,
    ) {
        let desc = lp(n, p, min_chunk);
        for spec in [TechniqueSpec::fiss(batches), TechniqueSpec::viss(batches)] {
            let seq = canonical_sequence(&spec, &desc).unwrap();
            let body = &seq[..seq.len() - 1];
            prop_assert!(
                body.windows(2).all(|w| w[0] <= w[1]),
                "{} shrank mid-sequence: {:?}", spec.technique, seq
            );
        }
    }

    // A fixed-size technique grants one constant size until the remainder.
    #[test]
    fn fsc_grants_a_fixed_size(
        n in 1u64..=100_000,
        p in 1u32..=512,
        h in 1e-6f64..1e-2,
        sigma in 1e-6f64..1.0,
    ) {
        let seq = canonical_sequence(&TechniqueSpec::fsc(h, sigma), &lp(n, p, 1)).unwrap();
        let body = &seq[..seq.len() - 1];
        prop_assert!(body.windows(2).all(|w| w[0] == w[1]), "{:?}", seq);
    }

    // Random sizing stays inside [1, N/P] regardless of seed.
    #[test]
    fn rnd_chunks_stay_in_bounds(
        n in 1u64..=100_000,
        p in 1u32..=512,
        seed in any::<u64>(),
    ) {
        let seq = canonical_sequence(&TechniqueSpec::rnd(seed), &lp(n, p, 1)).unwrap();
        let hi = (n / u64::from(p)).max(1);
        prop_assert!(seq.iter().all(|&k| (1..=hi).contains(&k)), "{:?}", seq);
    }

    // Batch techniques hold one size for a full round of P grants. The raw
    // (unclamped) size is a function of the batch index alone.
    #[test]
    fn batch_sizes_are_constant_within_a_batch(
        n in 1u64..=100_000,
        p in 1u32..=64,
        batches in 2u32..=6,
    ) {
        let desc = lp(n, p, 1);
        for spec in [
            TechniqueSpec::fac2(),
            TechniqueSpec::tfss(),
            TechniqueSpec::fiss(batches),
            TechniqueSpec::viss(batches),
        ] {
            let calc = ChunkCalculator::new(&spec, &desc).unwrap();
            for b in 0..6u64 {
                let first = calc.raw_chunk_at(b * u64::from(p));
                for j in 1..u64::from(p) {
                    prop_assert_eq!(calc.raw_chunk_at(b * u64::from(p) + j), first);
                }
            }
        }
    }

    // With identical means and zero variance on every PE, the adaptive
    // formula collapses to an even split of what remains.
    #[test]
    fn af_zero_variance_reduces_to_even_split(
        mu in 1e-6f64..1e3,
        r in 1u64..=1_000_000,
        p in 1u32..=512,
    ) {
        let mut s = AfStats::new();
        s.record(mu);
        s.record(mu);
        let stats = vec![s; p as usize];
        let expect = r.div_ceil(u64::from(p));
        prop_assert_eq!(af_chunk(&stats, 0, r, 1), expect);
    }

    // AF still tiles the loop exactly, bootstrap grants included.
    #[test]
    fn af_coverage_with_bootstrap(
        n in 1u64..=50_000,
        p in 1u32..=64,
        min_chunk in 1u64..=16,
        seed in any::<u64>(),
    ) {
        let min_chunk = min_chunk.min(n);
        let mut rng = dls::rng::SplitMix64::new(seed);
        let mut stats = vec![AfStats::new(); p as usize];
        // While any PE is unsampled, every grant is the bootstrap minimum.
        let k = af_chunk(&stats, 0, n, min_chunk);
        prop_assert_eq!(k, min_chunk.min(n));
        for s in stats.iter_mut() {
            for _ in 0..=rng.next_below(3) {
                s.record(1e-3 + rng.next_f64() * 10.0);
            }
        }
        let mut remaining = n;
        let mut total = 0u64;
        let mut grants = 0u64;
        while remaining > 0 {
            let pe = rng.next_below(u64::from(p)) as usize;
            let k = af_chunk(&stats, pe, remaining, min_chunk);
            prop_assert!(k >= 1 && k <= remaining);
            total += k;
            remaining -= k;
            grants += 1;
            prop_assert!(grants <= n);
        }
        prop_assert_eq!(total, n);
    }

    // Chunk sizes are pure functions of (spec, loop, i, R); RND adds only
    // the seed. Equal inputs give equal sequences.
    #[test]
    fn determinism_per_seed(
        idx in 0usize..12,
        n in 1u64..=100_000,
        p in 1u32..=512,
        seed in any::<u64>(),
    ) {
        let spec = closed_specs(seed).swap_remove(idx);
        let desc = lp(n, p, 1);
        let a = canonical_sequence(&spec, &desc).unwrap();
        let b = canonical_sequence(&spec, &desc).unwrap();
        prop_assert_eq!(a, b);
        let r1 = canonical_sequence(&TechniqueSpec::rnd(seed), &desc).unwrap();
        let r2 = canonical_sequence(&TechniqueSpec::rnd(seed), &desc).unwrap();
        prop_assert_eq!(r1, r2);
    }

    // The remaining-count recursions agree with the closed forms: exactly
    // for the chain-defined techniques, within one iteration per step for
    // the ratio-defined ones. Final grants absorb each variant's remainder
    // and are compared only through the totals.
    #[test]
    fn closed_and_recursive_forms_agree(
        n in 1u64..=100_000,
        p in 1u32..=512,
    ) {
        let desc = lp(n, p, 1);
        for spec in [
            TechniqueSpec::static_(),
            TechniqueSpec::ss(),
            TechniqueSpec::tss(),
            TechniqueSpec::fiss(3),
        ] {
            let closed = canonical_sequence(&spec, &desc).unwrap();
            let rec = recursive_sequence(&spec, &desc).unwrap();
            prop_assert_eq!(closed, rec, "{} diverged", spec.technique);
        }
        for spec in [TechniqueSpec::gss(), TechniqueSpec::fac2()] {
            let closed = canonical_sequence(&spec, &desc).unwrap();
            let rec = recursive_sequence(&spec, &desc).unwrap();
            prop_assert_eq!(closed.iter().sum::<u64>(), n);
            prop_assert_eq!(rec.iter().sum::<u64>(), n);
            let common = (closed.len() - 1).min(rec.len() - 1);
            for i in 0..common {
                prop_assert!(
                    closed[i].abs_diff(rec[i]) <= 1,
                    "{} step {}: closed {} vs recursive {}",
                    spec.technique, i, closed[i], rec[i]
                );
            }
        }
    }
}

#[test]
fn all_techniques_are_listed_once() {
    let mut names: Vec<&str> = Technique::ALL.iter().map(|t| t.name()).collect();
    names.sort_unstable();
    names.dedup();
    assert_eq!(names.len(), 13);
}
