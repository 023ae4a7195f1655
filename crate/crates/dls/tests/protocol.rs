//! Concurrency checks on the assignment protocols: grants issued to real
//! threads tile the loop exactly, step indices count up with no gaps, and
//! the decentralized size sequence matches the centralized one no matter
//! how the threads interleave.

use std::thread;

use dls::assignment::{start_loop, ChunkGrant, Mode, Session};
use dls::rng::SplitMix64;
use dls::techniques::{
    canonical_sequence, compute_chunk_closed, LoopDescriptor, TechniqueSpec,
};

/// Runs `threads` workers against one session until termination, returning
/// every grant issued. Workers acquire, complete, and re-request in a loop,
/// which is the skeleton real callers use.
fn drive(session: &Session, threads: u32) -> Vec<ChunkGrant> {
    let mut grants = Vec::new();
    thread::scope(|scope| {
        let mut handles = Vec::new();
        for pe in 0..threads {
            handles.push(scope.spawn(move || {
                let mut mine = Vec::new();
                while let Some(g) = session.start_chunk(pe).unwrap() {
                    session.end_chunk(&g).unwrap();
                    mine.push(g);
                }
                mine
            }));
        }
        for h in handles {
            grants.extend(h.join().unwrap());
        }
    });
    assert!(session.terminated());
    grants
}

/// Asserts the grants are pairwise disjoint, tile [0, n) with no holes, and
/// carry step indices exactly 0..G.
fn assert_tiling(n: u64, grants: &[ChunkGrant]) {
    let mut by_start = grants.to_vec();
    by_start.sort_by_key(|g| g.start);
    let mut next = 0u64;
    for g in &by_start {
        assert_eq!(g.start, next, "hole or overlap at {}", g.start);
        assert!(g.size >= 1);
        next += g.size;
    }
    assert_eq!(next, n);
    let mut steps: Vec<u64> = grants.iter().map(|g| g.step).collect();
    steps.sort_unstable();
    for (want, got) in steps.iter().enumerate() {
        assert_eq!(*got, want as u64, "step sequence has a gap");
    }
}

/// Sizes ordered by scheduling step.
fn sizes_by_step(grants: &[ChunkGrant]) -> Vec<u64> {
    let mut by_step = grants.to_vec();
    by_step.sort_by_key(|g| g.step);
    by_step.iter().map(|g| g.size).collect()
}

#[test]
fn two_workers_split_the_first_batch() {
    let desc = LoopDescriptor::new(1000, 4).unwrap();
    let s = start_loop(desc, TechniqueSpec::fac2(), Mode::Decentralized).unwrap();
    let (a, b) = thread::scope(|scope| {
        let ha = scope.spawn(|| s.start_chunk(0).unwrap().unwrap());
        let hb = scope.spawn(|| s.start_chunk(1).unwrap().unwrap());
        (ha.join().unwrap(), hb.join().unwrap())
    });
    // In either service order the first two grants are 125 iterations each,
    // covering [0, 250) between them.
    let mut firsts = [a, b];
    firsts.sort_by_key(|g| g.start);
    assert_eq!((firsts[0].start, firsts[0].size), (0, 125));
    assert_eq!((firsts[1].start, firsts[1].size), (125, 125));
    assert_eq!(firsts.iter().map(|g| g.step).collect::<Vec<_>>(), [0, 1]);
}

#[test]
fn randomized_concurrent_dca_matches_canonical() {
    // A trimmed version of the acceptance sweep: random loop shapes and
    // thread counts, every closed-form technique, real contention.
    let mut rng = SplitMix64::new(0x5eed_0001);
    for round in 0..60 {
        let n = 1 + rng.next_below(10_000);
        let p = 2 + rng.next_below(15) as u32;
        let desc = LoopDescriptor::new(n, p).unwrap();
        let specs = [
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
            TechniqueSpec::rnd(rng.next_u64()),
            TechniqueSpec::pls(0.7),
        ];
        let spec = specs[(round % specs.len() as u64) as usize].clone();
        let s = start_loop(desc, spec.clone(), Mode::Decentralized).unwrap();
        let grants = drive(&s, p);
        assert_tiling(n, &grants);
        let canonical = canonical_sequence(&spec, &desc).unwrap();
        assert_eq!(sizes_by_step(&grants), canonical, "{} n={} p={}", spec.technique, n, p);
        let summary = s.end_loop().unwrap();
        assert_eq!(summary.per_pe_iterations.iter().sum::<u64>(), n);
    }
}

#[test]
fn concurrent_cca_matches_canonical() {
    let desc = LoopDescriptor::new(7777, 6).unwrap();
    let spec = TechniqueSpec::gss();
    let s = start_loop(desc, spec.clone(), Mode::Centralized).unwrap();
    let grants = drive(&s, 6);
    assert_tiling(7777, &grants);
    assert_eq!(sizes_by_step(&grants), canonical_sequence(&spec, &desc).unwrap());
}

#[test]
fn every_dca_grant_is_recomputable_from_its_own_step_and_remaining() {
    // Each grant's size must be a function of (spec, loop, i, R) alone,
    // where R is implied by the grant's own start. Recomputing from those
    // two numbers, with no knowledge of which PE got which prior chunk,
    // must reproduce the concurrent run exactly.
    let desc = LoopDescriptor::new(9091, 8).unwrap();
    for spec in [TechniqueSpec::gss(), TechniqueSpec::tss(), TechniqueSpec::rnd(42)] {
        let s = start_loop(desc, spec.clone(), Mode::Decentralized).unwrap();
        let grants = drive(&s, 8);
        assert_tiling(9091, &grants);
        for g in &grants {
            let remaining = 9091 - g.start;
            let recomputed =
                compute_chunk_closed(&spec, &desc, g.step, remaining, g.pe_id).unwrap();
            assert_eq!(recomputed, g.size, "{} step {}", spec.technique, g.step);
        }
    }
}

#[test]
fn gss_interleavings_always_produce_the_same_multiset() {
    let desc = LoopDescriptor::new(1000, 4).unwrap();
    let spec = TechniqueSpec::gss();
    let mut canonical = canonical_sequence(&spec, &desc).unwrap();
    canonical.sort_unstable();
    for _ in 0..50 {
        let s = start_loop(desc, spec.clone(), Mode::Decentralized).unwrap();
        let mut sizes: Vec<u64> = drive(&s, 4).iter().map(|g| g.size).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, canonical);
    }
}

#[test]
fn concurrent_af_covers_the_loop() {
    // AF sizes depend on the timing history, so only coverage and the
    // bootstrap floor are interleaving-invariant.
    let desc = LoopDescriptor::new(50_000, 8).unwrap();
    let s = start_loop(desc, TechniqueSpec::af(), Mode::Decentralized).unwrap();
    let mut grants = Vec::new();
    thread::scope(|scope| {
        let mut handles = Vec::new();
        for pe in 0..8u32 {
            let session = &s;
            handles.push(scope.spawn(move || {
                let mut mine = Vec::new();
                let mut rng = SplitMix64::from_stream(99, u64::from(pe));
                let mut last = None;
                while let Some(g) = session.self_assign_af(pe, last).unwrap() {
                    session.end_chunk(&g).unwrap();
                    // Synthetic per-iteration time, as a real caller would
                    // measure after finishing the chunk.
                    last = Some(1e-5 * (1.0 + rng.next_f64()));
                    mine.push(g);
                }
                mine
            }));
        }
        for h in handles {
            grants.extend(h.join().unwrap());
        }
    });
    assert!(s.terminated());
    assert_tiling(50_000, &grants);
    let summary = s.end_loop().unwrap();
    assert_eq!(summary.per_pe_iterations.iter().sum::<u64>(), 50_000);
    assert_eq!(summary.total_grants as usize, grants.len());
}

#[test]
fn single_iteration_loop_with_many_workers() {
    let desc = LoopDescriptor::new(1, 8).unwrap();
    let s = start_loop(desc, TechniqueSpec::ss(), Mode::Decentralized).unwrap();
    let grants = drive(&s, 8);
    assert_eq!(grants.len(), 1);
    assert_eq!((grants[0].start, grants[0].size), (0, 1));
    let summary = s.end_loop().unwrap();
    assert_eq!(summary.per_pe_iterations.iter().sum::<u64>(), 1);
    assert_eq!(summary.per_pe_iterations.iter().filter(|&&c| c == 0).count(), 7);
}
