//! Deterministic discrete-event simulation of P workers executing a
//! scheduled loop under either assignment protocol.
//!
//! The modeled round trip of one grant:
//!
//! ```text
//! worker ready --L--> request --queue+service--> grant --L--> worker
//! ```
//!
//! `L` is the per-direction message latency. The service time at the shared
//! point is where the protocols differ:
//!
//! - **Centralized**: the coordinator both calculates and assigns, so its
//!   FIFO single server charges `calc_delay + assign_cost` per grant.
//!   Injected calculation delays therefore serialize.
//! - **Decentralized**: the shared state only assigns (service time
//!   `assign_cost`); the requesting worker performs the calculation itself,
//!   burning `calc_delay` on its own clock after the grant reply arrives.
//!   Injected delays run in parallel across workers.
//!
//! Grant decisions are made in service order, so the chunk sequence equals
//! the canonical closed-form sequence; AF sizes instead react to the
//! per-iteration timings accumulated so far in virtual time. PE 0 computes
//! like any worker under the default non-dedicated coordinator; a flag
//! removes it from the worker pool for sensitivity studies.
//!
//! The engine is single-threaded and fully deterministic: events are
//! ordered by (time, pe, insertion sequence), and identical configurations
//! produce bit-identical reports.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use crate::assignment::{ChunkGrant, Mode};
use crate::error::{Error, Result};
use crate::techniques::af::{af_chunk, AfStats};
use crate::techniques::{ChunkCalculator, LoopDescriptor, Technique, TechniqueSpec};

/// One simulated scenario.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub loop_desc: LoopDescriptor,
    pub spec: TechniqueSpec,
    pub mode: Mode,
    /// Per-iteration base costs in seconds; length must equal the loop's
    /// total iterations.
    pub costs: Arc<Vec<f64>>,
    /// One-way message latency, charged on request and on reply.
    pub msg_latency: f64,
    /// Injected chunk-calculation delay per grant.
    pub calc_delay: f64,
    /// Critical-section service time per grant.
    pub assign_cost: f64,
    /// Compute-time multiplier per PE (> 1 is slower).
    pub pe_speed_factors: Vec<f64>,
    /// Remove PE 0 from the worker pool (centralized mode only).
    pub dedicated_master: bool,
    /// Seeds the RND chunk stream when the spec leaves `rng_seed` unset;
    /// everything else is deterministic without it.
    pub seed: u64,
}

impl SimConfig {
    pub fn new(
        loop_desc: LoopDescriptor,
        spec: TechniqueSpec,
        mode: Mode,
        costs: Arc<Vec<f64>>,
    ) -> Self {
        let p = loop_desc.num_pes as usize;
        SimConfig {
            loop_desc,
            spec,
            mode,
            costs,
            msg_latency: 1e-6,
            calc_delay: 0.0,
            assign_cost: 1e-6,
            pe_speed_factors: vec![1.0; p],
            dedicated_master: false,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.costs.len() as u64 != self.loop_desc.total_iterations {
            return Err(Error::config(format!(
                "cost vector has {} entries for {} iterations",
                self.costs.len(),
                self.loop_desc.total_iterations
            )));
        }
        for (name, v) in [
            ("msg_latency", self.msg_latency),
            ("calc_delay", self.calc_delay),
            ("assign_cost", self.assign_cost),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if self.pe_speed_factors.len() != self.loop_desc.num_pes as usize {
            return Err(Error::config(format!(
                "{} speed factors for {} PEs",
                self.pe_speed_factors.len(),
                self.loop_desc.num_pes
            )));
        }
        if let Some(bad) = self
            .pe_speed_factors
            .iter()
            .find(|f| !(f.is_finite() && **f > 0.0))
        {
            return Err(Error::config(format!(
                "speed factors must be finite and positive, got {bad}"
            )));
        }
        if self.costs.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::config("iteration costs must be finite and non-negative"));
        }
        if self.dedicated_master {
            if self.mode != Mode::Centralized {
                return Err(Error::config(
                    "dedicated_master applies to centralized mode only",
                ));
            }
            if self.loop_desc.num_pes < 2 {
                return Err(Error::config("a dedicated master leaves no workers"));
            }
        }
        Ok(())
    }
}

/// Load-balance summary of a finished run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// Coefficient of variation of worker finish times.
    pub cov: f64,
    /// max/mean - 1 of worker finish times.
    pub imbalance: f64,
}

/// c.o.v. and imbalance of a set of finish times.
pub fn compute_metrics(finish_times: &[f64]) -> Metrics {
    if finish_times.is_empty() {
        return Metrics {
            cov: 0.0,
            imbalance: 0.0,
        };
    }
    let n = finish_times.len() as f64;
    let mean = finish_times.iter().sum::<f64>() / n;
    if mean <= 0.0 {
        return Metrics {
            cov: 0.0,
            imbalance: 0.0,
        };
    }
    let var = finish_times
        .iter()
        .map(|t| (t - mean) * (t - mean))
        .sum::<f64>()
        / n;
    let max = finish_times.iter().fold(f64::MIN, |a, &b| a.max(b));
    Metrics {
        cov: var.sqrt() / mean,
        imbalance: max / mean - 1.0,
    }
}

/// Everything a simulated run produced. Two runs of the same config compare
/// equal bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    /// Virtual time at which the last chunk finished computing.
    pub makespan: f64,
    /// Last compute completion per worker-pool PE (0 if it never computed).
    pub finish_times: Vec<f64>,
    /// Pure compute seconds per PE.
    pub busy: Vec<f64>,
    /// Seconds each PE spent between becoming ready and starting to
    /// compute: latency, queueing, service, own calculation.
    pub sched_wait: Vec<f64>,
    /// makespan - finish time per PE.
    pub idle: Vec<f64>,
    pub trace: Vec<ChunkGrant>,
    pub num_chunks: u64,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    /// Request reached the shared point.
    Arrive,
    /// Grant reply reached the worker.
    GrantArrive(ChunkGrant),
    /// Worker finished computing a chunk.
    ComputeDone(ChunkGrant),
}

#[derive(Debug, Clone, Copy)]
struct Ev {
    time: f64,
    pe: u32,
    seq: u64,
    kind: Kind,
}

impl PartialEq for Ev {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.pe == other.pe && self.seq == other.seq
    }
}

impl Eq for Ev {}

impl PartialOrd for Ev {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ev {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max-heap; reversed comparison yields earliest-first ordering.
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.pe.cmp(&self.pe))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Engine {
    heap: BinaryHeap<Ev>,
    seq: u64,
}

impl Engine {
    fn push(&mut self, time: f64, pe: u32, kind: Kind) {
        self.heap.push(Ev {
            time,
            pe,
            seq: self.seq,
            kind,
        });
        self.seq += 1;
    }
}

/// Runs one scenario to completion.
pub fn run_sim(cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    let mut spec = cfg.spec.clone();
    if spec.technique == Technique::Rnd && spec.rng_seed.is_none() {
        spec.rng_seed = Some(cfg.seed);
    }
    spec.validate()?;
    let loop_desc = cfg.loop_desc;
    let p = loop_desc.num_pes as usize;
    let n = loop_desc.total_iterations;

    let calc = if spec.technique == Technique::Af {
        None
    } else {
        Some(ChunkCalculator::new(&spec, &loop_desc)?)
    };
    let mut af_stats = vec![AfStats::new(); p];

    // Prefix sums make chunk cost lookups O(1).
    let mut prefix = Vec::with_capacity(cfg.costs.len() + 1);
    let mut acc = 0.0f64;
    prefix.push(0.0);
    for c in cfg.costs.iter() {
        acc += c;
        prefix.push(acc);
    }

    let workers: Vec<u32> = if cfg.dedicated_master {
        (1..loop_desc.num_pes).collect()
    } else {
        (0..loop_desc.num_pes).collect()
    };

    let l = cfg.msg_latency;
    let service_time = match cfg.mode {
        Mode::Centralized => cfg.calc_delay + cfg.assign_cost,
        Mode::Decentralized => cfg.assign_cost,
    };
    let worker_calc = match cfg.mode {
        Mode::Centralized => 0.0,
        Mode::Decentralized => cfg.calc_delay,
    };

    let mut engine = Engine {
        heap: BinaryHeap::new(),
        seq: 0,
    };
    for &pe in &workers {
        engine.push(l, pe, Kind::Arrive);
    }

    // Scheduler state shared by all requests.
    let mut next_step = 0u64;
    let mut next_start = 0u64;
    let mut remaining = n;
    let mut server_free_at = 0.0f64;

    let mut trace: Vec<ChunkGrant> = Vec::new();
    let mut finish = vec![0.0f64; p];
    let mut busy = vec![0.0f64; p];
    let mut sched_wait = vec![0.0f64; p];
    let mut ready_at = vec![0.0f64; p];
    let mut per_pe_iters = vec![0u64; p];

    while let Some(ev) = engine.heap.pop() {
        let pe = ev.pe as usize;
        match ev.kind {
            Kind::Arrive => {
                if remaining == 0 {
                    // Terminated reply; the worker stops requesting.
                    continue;
                }
                // Grants are decided in service order, which the FIFO
                // server makes identical to arrival processing order.
                let k = match &calc {
                    Some(calc) => calc.chunk_at(next_step, remaining),
                    None => af_chunk(&af_stats, pe, remaining, loop_desc.min_chunk),
                };
                let start_service = server_free_at.max(ev.time);
                let done = start_service + service_time;
                server_free_at = done;
                let grant = ChunkGrant {
                    step: next_step,
                    pe_id: ev.pe,
                    start: next_start,
                    size: k,
                    grant_time: done,
                };
                next_step += 1;
                next_start += k;
                remaining -= k;
                trace.push(grant);
                engine.push(done + l, ev.pe, Kind::GrantArrive(grant));
            }
            Kind::GrantArrive(grant) => {
                let compute_start = ev.time + worker_calc;
                let span = prefix[(grant.start + grant.size) as usize]
                    - prefix[grant.start as usize];
                let compute = span * cfg.pe_speed_factors[pe];
                engine.push(compute_start + compute, ev.pe, Kind::ComputeDone(grant));
                busy[pe] += compute;
                sched_wait[pe] += compute_start - ready_at[pe];
            }
            Kind::ComputeDone(grant) => {
                finish[pe] = ev.time;
                per_pe_iters[pe] += grant.size;
                if spec.technique == Technique::Af {
                    // AF learns from per-iteration times, preserving the
                    // workload's variance; chunk means would hide it.
                    for idx in grant.start..grant.start + grant.size {
                        af_stats[pe].record(cfg.costs[idx as usize] * cfg.pe_speed_factors[pe]);
                    }
                }
                ready_at[pe] = ev.time;
                engine.push(ev.time + l, ev.pe, Kind::Arrive);
            }
        }
    }

    debug_assert_eq!(remaining, 0);
    debug_assert_eq!(per_pe_iters.iter().sum::<u64>(), n);

    let makespan = finish.iter().fold(0.0f64, |a, &b| a.max(b));
    let idle: Vec<f64> = finish.iter().map(|f| makespan - f).collect();
    let pool_finish: Vec<f64> = workers.iter().map(|&w| finish[w as usize]).collect();
    let metrics = compute_metrics(&pool_finish);
    Ok(SimReport {
        makespan,
        finish_times: finish,
        busy,
        sched_wait,
        idle,
        num_chunks: trace.len() as u64,
        trace,
        metrics,
    })
}
