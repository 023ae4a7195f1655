//! Chunk assignment over a central work queue, in two protocols.
//!
//! Both protocols share one piece of state: the scheduling step counter `i`,
//! the index of the first unscheduled iteration `lp_start`, and the
//! remaining count `R` (so `lp_start + R = N` at all times). They differ in
//! *where* the chunk size is computed:
//!
//! - **Centralized (CCA)**: a coordinator owns the state, computes every
//!   chunk size itself and hands out grants in request order. Chunk
//!   calculation and chunk assignment both serialize at the coordinator.
//! - **Decentralized (DCA)**: every worker knows the closed-form chunk
//!   function, so a grant is one indivisible read-modify-write of
//!   `(i, lp_start, R)`. Only the assignment serializes; the technique's
//!   arithmetic runs on the requesting worker.
//!
//! AF is the exception: its chunk depends on the live remaining count and
//! on measured timings, so even under DCA the size must be computed from
//! the `R` read inside the critical update. The cross-PE aggregates D and E
//! are still computed outside it, from a separate timing store. Sessions in
//! that configuration report themselves as partially synchronized.
//!
//! A [`Session`] is driven in Listing-1 style: `start_loop`, then each
//! worker loops `start_chunk` / `end_chunk` until `terminated`, then
//! `end_loop`. Grants are never empty; a worker observing `R = 0` receives
//! `None` and stops.

use std::io::Write;
use std::sync::{Mutex, RwLock};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::techniques::af::{af_coefficients, AfStats};
use crate::techniques::{ChunkCalculator, LoopDescriptor, Technique, TechniqueSpec};

/// Where the chunk size is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Coordinator computes sizes and assigns: requests serialize fully.
    Centralized,
    /// Workers compute sizes; only the state update serializes.
    Decentralized,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Centralized => "cca",
            Mode::Decentralized => "dca",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cca" | "centralized" => Ok(Mode::Centralized),
            "dca" | "decentralized" => Ok(Mode::Decentralized),
            other => Err(Error::config(format!("unknown mode `{other}`"))),
        }
    }
}

/// One assignment: `size` iterations starting at `start`, granted to
/// `pe_id` as scheduling step `step`, `grant_time` seconds into the
/// session. Grants of one session are pairwise disjoint and tile `[0, N)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChunkGrant {
    pub step: u64,
    pub pe_id: u32,
    pub start: u64,
    pub size: u64,
    pub grant_time: f64,
}

/// Knobs that alter the protocol's timing, not its decisions.
#[derive(Debug, Clone, Copy, Default)]
pub struct SessionOptions {
    /// Busy-wait inserted into every chunk-size calculation. Under CCA it
    /// burns inside the critical section (the coordinator computes), under
    /// DCA outside it (the worker computes). Lets the protocol-level cost
    /// asymmetry be demonstrated on real threads.
    pub injected_calc_delay: Duration,
}

struct SchedState {
    next_step: u64,
    next_start: u64,
    remaining: u64,
    /// Grants issued but not yet completed via `end_chunk`.
    outstanding: u64,
    per_pe: Vec<u64>,
    trace: Vec<ChunkGrant>,
}

/// Totals returned by `end_loop`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopSummary {
    /// Iterations executed per PE; sums to the loop's total.
    pub per_pe_iterations: Vec<u64>,
    /// Wall-clock seconds from `start_loop` to `end_loop`.
    pub elapsed: f64,
    pub total_grants: u64,
}

/// A scheduling session over one loop. Shared by reference among worker
/// threads; every public method takes `&self`.
pub struct Session {
    loop_desc: LoopDescriptor,
    spec: TechniqueSpec,
    mode: Mode,
    /// Closed-form evaluator; absent exactly for AF.
    calc: Option<ChunkCalculator>,
    /// Per-PE timing statistics; present exactly for AF.
    af_stats: Option<RwLock<Vec<AfStats>>>,
    state: Mutex<SchedState>,
    options: SessionOptions,
    started: Instant,
}

/// Opens a session with `i = 0`, `lp_start = 0`, `R = N`.
pub fn start_loop(loop_desc: LoopDescriptor, spec: TechniqueSpec, mode: Mode) -> Result<Session> {
    Session::start_loop_with(loop_desc, spec, mode, SessionOptions::default())
}

impl Session {
    pub fn start_loop_with(
        loop_desc: LoopDescriptor,
        spec: TechniqueSpec,
        mode: Mode,
        options: SessionOptions,
    ) -> Result<Session> {
        spec.validate()?;
        let (calc, af_stats) = if spec.technique == Technique::Af {
            let stats = vec![AfStats::new(); loop_desc.num_pes as usize];
            (None, Some(RwLock::new(stats)))
        } else {
            (Some(ChunkCalculator::new(&spec, &loop_desc)?), None)
        };
        Ok(Session {
            loop_desc,
            spec,
            mode,
            calc,
            af_stats,
            state: Mutex::new(SchedState {
                next_step: 0,
                next_start: 0,
                remaining: loop_desc.total_iterations,
                outstanding: 0,
                per_pe: vec![0; loop_desc.num_pes as usize],
                trace: Vec::new(),
            }),
            options,
            started: Instant::now(),
        })
    }

    pub fn loop_desc(&self) -> &LoopDescriptor {
        &self.loop_desc
    }

    pub fn spec(&self) -> &TechniqueSpec {
        &self.spec
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// True when grant sizes depend on state beyond each worker's own
    /// critical update: AF under DCA shares the live remaining count.
    pub fn partially_synchronized(&self) -> bool {
        self.mode == Mode::Decentralized && self.spec.technique == Technique::Af
    }

    fn check_pe(&self, pe_id: u32) -> Result<()> {
        if pe_id >= self.loop_desc.num_pes {
            return Err(Error::usage(format!(
                "pe_id {pe_id} out of range for {} PEs",
                self.loop_desc.num_pes
            )));
        }
        Ok(())
    }

    /// Worker entry point: routes to the protocol the session was opened
    /// with. AF sessions feed timing through `record_af_sample`.
    pub fn start_chunk(&self, pe_id: u32) -> Result<Option<ChunkGrant>> {
        match (self.mode, self.spec.technique) {
            (Mode::Centralized, _) => self.request_chunk_cca(pe_id),
            (Mode::Decentralized, Technique::Af) => self.self_assign_af(pe_id, None),
            (Mode::Decentralized, _) => self.self_assign_dca(pe_id),
        }
    }

    /// Centralized protocol: the coordinator computes the size and assigns
    /// under one lock, so concurrent requests serialize in arrival order.
    pub fn request_chunk_cca(&self, pe_id: u32) -> Result<Option<ChunkGrant>> {
        if self.mode != Mode::Centralized {
            return Err(Error::usage("request_chunk_cca requires centralized mode"));
        }
        self.check_pe(pe_id)?;
        let mut st = self.state.lock().unwrap();
        if st.remaining == 0 {
            return Ok(None);
        }
        // The coordinator does the calculation, so the injected delay burns
        // while the queue is held.
        spin_for(self.options.injected_calc_delay);
        let k = match &self.calc {
            Some(calc) => calc.chunk_at(st.next_step, st.remaining),
            None => {
                let stats = self.af_stats.as_ref().unwrap().read().unwrap();
                crate::techniques::af::af_chunk(
                    &stats,
                    pe_id as usize,
                    st.remaining,
                    self.loop_desc.min_chunk,
                )
            }
        };
        Ok(Some(self.grant(&mut st, pe_id, k)))
    }

    /// Decentralized protocol: one indivisible read-modify-write of
    /// `(i, lp_start, R)`. The closed form is a pure function of the `(i, R)`
    /// pair read here plus constants fixed at `start_loop`, which is what
    /// makes the calculation self-contained on the worker.
    pub fn self_assign_dca(&self, pe_id: u32) -> Result<Option<ChunkGrant>> {
        if self.mode != Mode::Decentralized {
            return Err(Error::usage("self_assign_dca requires decentralized mode"));
        }
        let calc = self.calc.as_ref().ok_or_else(|| {
            Error::usage("af has no self-contained form; use self_assign_af")
        })?;
        self.check_pe(pe_id)?;
        // The worker's own calculation time burns before the update.
        spin_for(self.options.injected_calc_delay);
        let mut st = self.state.lock().unwrap();
        if st.remaining == 0 {
            return Ok(None);
        }
        let k = calc.chunk_at(st.next_step, st.remaining);
        Ok(Some(self.grant(&mut st, pe_id, k)))
    }

    /// Decentralized AF: records an optional new timing sample, aggregates
    /// D and E outside the state update, then sizes the chunk from the
    /// remaining count read inside it.
    pub fn self_assign_af(
        &self,
        pe_id: u32,
        last_sample_time: Option<f64>,
    ) -> Result<Option<ChunkGrant>> {
        if self.mode != Mode::Decentralized {
            return Err(Error::usage("self_assign_af requires decentralized mode"));
        }
        let stats_lock = self
            .af_stats
            .as_ref()
            .ok_or_else(|| Error::usage("self_assign_af requires the af technique"))?;
        self.check_pe(pe_id)?;
        if let Some(seconds) = last_sample_time {
            self.record_af_sample(pe_id, seconds)?;
        }
        spin_for(self.options.injected_calc_delay);
        // Coefficients come back only once every PE has samples, so when they
        // are present our own mean is valid too.
        let (coeffs, my_mean) = {
            let stats = stats_lock.read().unwrap();
            (af_coefficients(&stats), stats[pe_id as usize].mean())
        };
        let mut st = self.state.lock().unwrap();
        if st.remaining == 0 {
            return Ok(None);
        }
        let raw = match coeffs {
            Some(c) => c.raw_chunk(my_mean, st.remaining),
            None => self.loop_desc.min_chunk,
        };
        let k = st.remaining.min(raw.max(self.loop_desc.min_chunk));
        Ok(Some(self.grant(&mut st, pe_id, k)))
    }

    /// Adds one measured iteration time to a PE's statistics (AF only).
    pub fn record_af_sample(&self, pe_id: u32, seconds: f64) -> Result<()> {
        self.check_pe(pe_id)?;
        let stats_lock = self
            .af_stats
            .as_ref()
            .ok_or_else(|| Error::usage("timing samples only apply to af sessions"))?;
        stats_lock.write().unwrap()[pe_id as usize].record(seconds);
        Ok(())
    }

    fn grant(&self, st: &mut SchedState, pe_id: u32, k: u64) -> ChunkGrant {
        debug_assert!(k >= 1 && k <= st.remaining);
        let grant = ChunkGrant {
            step: st.next_step,
            pe_id,
            start: st.next_start,
            size: k,
            grant_time: self.started.elapsed().as_secs_f64(),
        };
        st.next_step += 1;
        st.next_start += k;
        st.remaining -= k;
        st.outstanding += 1;
        st.per_pe[pe_id as usize] += k;
        st.trace.push(grant);
        grant
    }

    /// Marks a granted chunk as fully executed.
    pub fn end_chunk(&self, grant: &ChunkGrant) -> Result<()> {
        self.check_pe(grant.pe_id)?;
        let mut st = self.state.lock().unwrap();
        if st.outstanding == 0 {
            return Err(Error::usage("end_chunk without a matching start_chunk"));
        }
        st.outstanding -= 1;
        Ok(())
    }

    /// True once every iteration is granted and every grant completed.
    pub fn terminated(&self) -> bool {
        let st = self.state.lock().unwrap();
        st.remaining == 0 && st.outstanding == 0
    }

    /// Closes the session, returning per-PE totals and the elapsed time.
    pub fn end_loop(&self) -> Result<LoopSummary> {
        let st = self.state.lock().unwrap();
        if st.remaining != 0 || st.outstanding != 0 {
            return Err(Error::usage(format!(
                "end_loop before termination: {} iterations remaining, {} chunks outstanding",
                st.remaining, st.outstanding
            )));
        }
        Ok(LoopSummary {
            per_pe_iterations: st.per_pe.clone(),
            elapsed: self.started.elapsed().as_secs_f64(),
            total_grants: st.next_step,
        })
    }

    /// Snapshot of all grants issued so far, in step order.
    pub fn trace(&self) -> Vec<ChunkGrant> {
        self.state.lock().unwrap().trace.clone()
    }

    /// Current AF statistics snapshot; `None` for non-AF sessions.
    pub fn af_stats_snapshot(&self) -> Option<Vec<AfStats>> {
        self.af_stats.as_ref().map(|l| l.read().unwrap().clone())
    }
}

/// Busy-waits for `d`; timer-based sleeping is far too coarse for the
/// microsecond delays the protocols are exercised with.
pub(crate) fn spin_for(d: Duration) {
    if d.is_zero() {
        return;
    }
    let t0 = Instant::now();
    while t0.elapsed() < d {
        std::hint::spin_loop();
    }
}

/// Writes a grant trace as `step,pe_id,start,size,grant_time` CSV.
pub fn write_trace_csv<W: Write>(mut w: W, trace: &[ChunkGrant]) -> Result<()> {
    writeln!(w, "step,pe_id,start,size,grant_time")?;
    for g in trace {
        writeln!(
            w,
            "{},{},{},{},{:.9}",
            g.step, g.pe_id, g.start, g.size, g.grant_time
        )?;
    }
    Ok(())
}
