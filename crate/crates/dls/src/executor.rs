//! Real threaded execution of a scheduled loop.
//!
//! One OS thread per PE drives the Listing-1 style cycle against a shared
//! assignment session: start a chunk, execute its iterations, end the
//! chunk, until terminated. This is where the decentralized protocol's
//! synchronization contract meets genuine concurrency, so the run also
//! maintains an iteration bitmap proving every index was executed exactly
//! once.
//!
//! Per-iteration timing is collected only when something consumes it (AF
//! feeding, explicit sampling), because reading the clock twice per
//! iteration is measurable overhead on fine-grained workloads.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use crate::assignment::{ChunkGrant, Mode, Session, SessionOptions};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::techniques::{LoopDescriptor, Technique, TechniqueSpec};
use crate::workloads::Workload;

/// Knobs for a native run.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExecOptions {
    /// Time five random iterations up front and use their min/max ratio as
    /// the PLS static workload ratio, overriding any configured value.
    pub probe_swr: bool,
    /// Seed for the probe's iteration choice.
    pub probe_seed: u64,
    /// Collect per-iteration timings into the report even when no
    /// technique needs them.
    pub collect_samples: bool,
    /// Busy-wait added to every chunk-size calculation, forwarded to the
    /// session so it lands inside the coordinator's critical section under
    /// CCA and on the requesting worker under DCA.
    pub injected_calc_delay: Duration,
}

/// What a native run produced.
#[derive(Debug, Clone)]
pub struct ExecReport {
    /// Wall-clock seconds from first request to last completion.
    pub makespan: f64,
    /// Iterations executed per PE; sums to the loop total.
    pub per_pe_iterations: Vec<u64>,
    /// Wall-clock seconds each PE spent inside chunk execution.
    pub busy: Vec<f64>,
    pub trace: Vec<ChunkGrant>,
    /// Static workload ratio actually used (PLS only).
    pub swr_used: Option<f64>,
    /// Per-PE iteration timings, when collected.
    pub iteration_samples: Option<Vec<Vec<f64>>>,
}

/// Times five distinct random iterations once each and returns the ratio of
/// the fastest to the slowest, clamped into (0, 1]. A degenerate all-zero
/// timing reads as perfectly regular work, ratio 1.
pub fn probe_swr(workload: &dyn Workload, loop_desc: &LoopDescriptor, seed: u64) -> Result<f64> {
    let n = loop_desc.total_iterations;
    if n < 5 {
        return Err(Error::config("probing needs at least 5 iterations"));
    }
    let mut rng = SplitMix64::new(seed);
    let mut picked = Vec::with_capacity(5);
    while picked.len() < 5 {
        let idx = rng.next_below(n);
        if !picked.contains(&idx) {
            picked.push(idx);
        }
    }
    let mut min = f64::INFINITY;
    let mut max = 0.0f64;
    for idx in picked {
        let t0 = Instant::now();
        std::hint::black_box(workload.execute(idx));
        let dt = t0.elapsed().as_secs_f64();
        min = min.min(dt);
        max = max.max(dt);
    }
    if max <= 0.0 {
        return Ok(1.0);
    }
    Ok((min / max).clamp(1e-6, 1.0))
}

/// Runs the loop on real threads, one per PE.
pub fn run_native(
    loop_desc: LoopDescriptor,
    spec: TechniqueSpec,
    mode: Mode,
    workload: &dyn Workload,
    num_threads: u32,
) -> Result<ExecReport> {
    run_native_with(loop_desc, spec, mode, workload, num_threads, ExecOptions::default())
}

pub fn run_native_with(
    loop_desc: LoopDescriptor,
    mut spec: TechniqueSpec,
    mode: Mode,
    workload: &dyn Workload,
    num_threads: u32,
    options: ExecOptions,
) -> Result<ExecReport> {
    if workload.len() != loop_desc.total_iterations {
        return Err(Error::config(format!(
            "workload has {} iterations, loop {}",
            workload.len(),
            loop_desc.total_iterations
        )));
    }
    // Chunk formulas are parameterized on P; running them over a different
    // worker count would break every per-PE claim, so the two must agree.
    if num_threads != loop_desc.num_pes {
        return Err(Error::config(format!(
            "num_threads {} must equal num_pes {}",
            num_threads, loop_desc.num_pes
        )));
    }
    if options.probe_swr && spec.technique == Technique::Pls {
        spec.swr = Some(probe_swr(workload, &loop_desc, options.probe_seed)?);
    }
    let swr_used = (spec.technique == Technique::Pls)
        .then_some(spec.swr)
        .flatten();
    let sample = options.collect_samples || spec.technique == Technique::Af;

    let session = Session::start_loop_with(
        loop_desc,
        spec,
        mode,
        SessionOptions {
            injected_calc_delay: options.injected_calc_delay,
        },
    )?;
    let n = loop_desc.total_iterations;
    let p = loop_desc.num_pes as usize;
    // Exactly-once bitmap: one bit per iteration, set with a fetch_or so
    // double execution is detected, not masked.
    let bitmap: Vec<AtomicU64> = (0..n.div_ceil(64)).map(|_| AtomicU64::new(0)).collect();
    let busy: Vec<Mutex<f64>> = (0..p).map(|_| Mutex::new(0.0)).collect();
    let samples: Vec<Mutex<Vec<f64>>> = (0..p).map(|_| Mutex::new(Vec::new())).collect();

    let run = |pe: u32| -> Result<()> {
        let mut my_busy = 0.0f64;
        let mut my_samples = Vec::new();
        while let Some(grant) = session.start_chunk(pe)? {
            let chunk_t0 = Instant::now();
            for idx in grant.start..grant.start + grant.size {
                let iter_t0 = sample.then(Instant::now);
                let out = catch_unwind(AssertUnwindSafe(|| workload.execute(idx)));
                if out.is_err() {
                    return Err(Error::Invariant(format!(
                        "workload panicked at iteration {idx}"
                    )));
                }
                std::hint::black_box(out.ok());
                if let Some(t0) = iter_t0 {
                    let dt = t0.elapsed().as_secs_f64();
                    my_samples.push(dt);
                    if session.spec().technique == Technique::Af {
                        session.record_af_sample(pe, dt)?;
                    }
                }
                let word = &bitmap[(idx / 64) as usize];
                let bit = 1u64 << (idx % 64);
                if word.fetch_or(bit, Ordering::Relaxed) & bit != 0 {
                    return Err(Error::Invariant(format!(
                        "iteration {idx} executed twice"
                    )));
                }
            }
            my_busy += chunk_t0.elapsed().as_secs_f64();
            session.end_chunk(&grant)?;
        }
        *busy[pe as usize].lock().unwrap() += my_busy;
        if sample {
            samples[pe as usize].lock().unwrap().append(&mut my_samples);
        }
        Ok(())
    };

    let t0 = Instant::now();
    std::thread::scope(|scope| -> Result<()> {
        let run = &run;
        let handles: Vec<_> = (0..loop_desc.num_pes)
            .map(|pe| scope.spawn(move || run(pe)))
            .collect();
        let mut first_err = None;
        for h in handles {
            match h.join() {
                Ok(Ok(())) => {}
                Ok(Err(e)) => first_err = first_err.or(Some(e)),
                Err(_) => {
                    first_err =
                        first_err.or_else(|| Some(Error::Invariant("worker thread panicked".into())))
                }
            }
        }
        match first_err {
            Some(e) => Err(e),
            None => Ok(()),
        }
    })?;
    let makespan = t0.elapsed().as_secs_f64();

    // Post-run audit: every bit set means every iteration ran exactly once
    // (doubles were already caught inline).
    for (w, word) in bitmap.iter().enumerate() {
        let have = word.load(Ordering::Relaxed);
        let want = if (w as u64 + 1) * 64 <= n {
            u64::MAX
        } else {
            (1u64 << (n - w as u64 * 64)) - 1
        };
        if have != want {
            return Err(Error::Invariant(format!(
                "iterations missing in bitmap word {w}: got {have:#x}, want {want:#x}"
            )));
        }
    }

    let summary = session.end_loop()?;
    Ok(ExecReport {
        makespan,
        per_pe_iterations: summary.per_pe_iterations,
        busy: busy.iter().map(|b| *b.lock().unwrap()).collect(),
        trace: session.trace(),
        swr_used,
        iteration_samples: sample.then(|| {
            samples
                .iter()
                .map(|s| std::mem::take(&mut *s.lock().unwrap()))
                .collect()
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::techniques::canonical_sequence;
    use crate::workloads::{MandelbrotConfig, MandelbrotWorkload, SpinWorkload};

    fn lp(n: u64, p: u32) -> LoopDescriptor {
        LoopDescriptor::new(n, p).unwrap()
    }

    /// Cheap workload with a non-trivial cost model; execute does a token
    /// amount of arithmetic.
    struct Toy {
        n: u64,
    }

    impl Workload for Toy {
        fn len(&self) -> u64 {
            self.n
        }

        fn cost(&self, index: u64) -> f64 {
            (index % 5) as f64 * 1e-7
        }

        fn execute(&self, index: u64) -> u64 {
            std::hint::black_box(index.wrapping_mul(0x9E3779B97F4A7C15).count_ones() as u64)
        }
    }

    #[test]
    fn covers_all_iterations_concurrently() {
        let w = Toy { n: 4096 };
        let r = run_native(lp(4096, 4), TechniqueSpec::gss(), Mode::Decentralized, &w, 4).unwrap();
        assert_eq!(r.per_pe_iterations.iter().sum::<u64>(), 4096);
        let granted: u64 = r.trace.iter().map(|g| g.size).sum();
        assert_eq!(granted, 4096);
    }

    #[test]
    fn dca_trace_equals_canonical_sequence() {
        let w = Toy { n: 2000 };
        let spec = TechniqueSpec::tss();
        let r = run_native(lp(2000, 8), spec.clone(), Mode::Decentralized, &w, 8).unwrap();
        let mut sizes: Vec<(u64, u64)> = r.trace.iter().map(|g| (g.step, g.size)).collect();
        sizes.sort_unstable();
        let canon = canonical_sequence(&spec, &lp(2000, 8)).unwrap();
        assert_eq!(sizes.len(), canon.len());
        for (i, (step, size)) in sizes.iter().enumerate() {
            assert_eq!(*step, i as u64);
            assert_eq!(*size, canon[i]);
        }
    }

    #[test]
    fn single_thread_runs_sequentially() {
        let w = Toy { n: 100 };
        let r = run_native(lp(100, 1), TechniqueSpec::ss(), Mode::Centralized, &w, 1).unwrap();
        assert_eq!(r.per_pe_iterations, vec![100]);
        assert_eq!(r.trace.len(), 100);
    }

    #[test]
    fn mandelbrot_smoke() {
        let w = MandelbrotWorkload::new(MandelbrotConfig::new(64, 200).unwrap(), 1e-9).unwrap();
        let r = run_native(lp(4096, 4), TechniqueSpec::fac2(), Mode::Decentralized, &w, 4).unwrap();
        assert_eq!(r.per_pe_iterations.iter().sum::<u64>(), 4096);
    }

    #[test]
    fn af_runs_and_feeds_samples() {
        let costs = vec![2e-6; 512];
        let w = SpinWorkload::new(costs).unwrap();
        let r = run_native(lp(512, 4), TechniqueSpec::af(), Mode::Decentralized, &w, 4).unwrap();
        assert_eq!(r.per_pe_iterations.iter().sum::<u64>(), 512);
        let samples = r.iteration_samples.unwrap();
        assert_eq!(samples.iter().map(|s| s.len() as u64).sum::<u64>(), 512);
        assert!(samples.iter().flatten().all(|&dt| dt > 0.0));
    }

    #[test]
    fn thread_count_must_match_pes() {
        let w = Toy { n: 100 };
        assert!(run_native(lp(100, 4), TechniqueSpec::gss(), Mode::Decentralized, &w, 3).is_err());
    }

    #[test]
    fn workload_length_must_match_loop() {
        let w = Toy { n: 99 };
        assert!(run_native(lp(100, 2), TechniqueSpec::gss(), Mode::Decentralized, &w, 2).is_err());
    }

    #[test]
    fn workload_panic_names_the_iteration() {
        struct Bomb;
        impl Workload for Bomb {
            fn len(&self) -> u64 {
                10
            }
            fn cost(&self, _: u64) -> f64 {
                0.0
            }
            fn execute(&self, index: u64) -> u64 {
                if index == 7 {
                    panic!("boom");
                }
                index
            }
        }
        let err = run_native(lp(10, 2), TechniqueSpec::ss(), Mode::Decentralized, &Bomb, 2)
            .unwrap_err();
        assert!(err.to_string().contains("iteration 7"), "{err}");
    }

    #[test]
    fn probe_swr_constant_work_is_near_one() {
        let w = SpinWorkload::new(vec![50e-6; 64]).unwrap();
        let swr = probe_swr(&w, &lp(64, 4), 3).unwrap();
        assert!(swr > 0.5, "swr {swr}");
        assert!(swr <= 1.0);
    }

    #[test]
    fn probe_swr_two_speed_work() {
        // Costs alternate 20 us / 200 us; this seed's five samples cover
        // both classes, giving a ratio near 0.1.
        let costs: Vec<f64> = (0..64)
            .map(|i| if i % 2 == 0 { 20e-6 } else { 200e-6 })
            .collect();
        let w = SpinWorkload::new(costs).unwrap();
        let swr = probe_swr(&w, &lp(64, 4), 5).unwrap();
        assert!(swr < 0.4, "swr {swr}");
    }

    #[test]
    fn pls_probe_overrides_configured_ratio() {
        let w = SpinWorkload::new(vec![30e-6; 256]).unwrap();
        let r = run_native_with(
            lp(256, 2),
            TechniqueSpec::pls(0.5),
            Mode::Decentralized,
            &w,
            2,
            ExecOptions {
                probe_swr: true,
                probe_seed: 1,
                ..ExecOptions::default()
            },
        )
        .unwrap();
        let swr = r.swr_used.unwrap();
        assert!(swr > 0.5, "probed swr {swr} should beat the configured 0.5");
    }

    #[test]
    fn probe_needs_five_iterations() {
        let w = Toy { n: 4 };
        assert!(probe_swr(&w, &lp(4, 2), 0).is_err());
    }

    #[test]
    fn injected_delay_serializes_under_cca() {
        // 100 one-iteration grants, each burning 100 us inside the
        // coordinator's lock: the wall clock cannot beat 10 ms.
        let w = Toy { n: 100 };
        let r = run_native_with(
            lp(100, 2),
            TechniqueSpec::ss(),
            Mode::Centralized,
            &w,
            2,
            ExecOptions {
                injected_calc_delay: Duration::from_micros(100),
                ..ExecOptions::default()
            },
        )
        .unwrap();
        assert!(r.makespan >= 0.010, "makespan {}", r.makespan);
    }
}
