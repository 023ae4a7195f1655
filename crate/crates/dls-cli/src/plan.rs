//! Factorial experiment execution. The plan's factor lists expand to cells
//! (technique x mode x backend x delay); each cell runs `repetitions`
//! times with a seed derived from the global seed, producing one CSV row
//! per repetition. Rows are sorted before writing and all numeric columns
//! use fixed formatting, so a rerun with the same inputs is byte-identical
//! regardless of how many worker threads executed it.
//!
//! Simulated rows report the coefficient of variation and imbalance of PE
//! finish times; native rows report them over per-thread busy times, the
//! natural load-balance reading when threads start together.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use dls::assignment::{ChunkGrant, Mode};
use dls::executor::{run_native_with, ExecOptions};
use dls::rng;
use dls::simulator::{compute_metrics, run_sim, SimConfig};
use dls::techniques::{LoopDescriptor, Technique, TechniqueSpec};
use dls::{Error, Result};

use crate::config::{default_spec, ConfigFile};

pub const CSV_HEADER: &str =
    "app,technique,mode,backend,delay_us,rep,seed,makespan_s,cov,imbalance,num_chunks";

/// Where a cell runs: virtual time or real threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Sim,
    Native,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Sim => "sim",
            Backend::Native => "native",
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sim" => Ok(Backend::Sim),
            "native" => Ok(Backend::Native),
            other => Err(Error::config(format!("unknown backend `{other}`"))),
        }
    }
}

/// One result row.
#[derive(Debug, Clone)]
pub struct Row {
    pub app: String,
    pub technique: Technique,
    pub mode: Mode,
    pub backend: Backend,
    pub delay_us: f64,
    pub rep: u32,
    pub seed: u64,
    pub makespan_s: f64,
    pub cov: f64,
    pub imbalance: f64,
    pub num_chunks: u64,
}

impl Row {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{:.9},{:.6},{:.6},{}",
            self.app,
            self.technique,
            self.mode.name(),
            self.backend.name(),
            self.delay_us,
            self.rep,
            self.seed,
            self.makespan_s,
            self.cov,
            self.imbalance,
            self.num_chunks
        )
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    technique: Technique,
    mode: Mode,
    backend: Backend,
    delay_us: f64,
}

/// Expands and runs the whole plan. `parallel` caps the worker threads used
/// for independent cells; native cells always run alone because they own
/// the machine's timing.
pub fn run_plan(cfg: &ConfigFile, seed_override: Option<u64>, parallel: usize) -> Result<Vec<Row>> {
    let plan = cfg
        .plan
        .as_ref()
        .ok_or_else(|| Error::config("the run command needs a `plan` section"))?;
    if plan.repetitions == 0 {
        return Err(Error::config("plan.repetitions must be at least 1"));
    }
    let loop_desc = cfg.loop_shape.loop_desc()?;
    let global_seed = seed_override.unwrap_or(plan.seed);
    let app = cfg.workload.label();

    let mut cells = Vec::new();
    for technique in &plan.techniques {
        let technique: Technique = technique.parse().map_err(prefix("plan.techniques"))?;
        for mode in &plan.modes {
            let mode: Mode = mode.parse().map_err(prefix("plan.modes"))?;
            for backend in &plan.backends {
                let backend: Backend = backend.parse().map_err(prefix("plan.backends"))?;
                for &delay_us in &plan.delays_us {
                    if !(delay_us.is_finite() && delay_us >= 0.0) {
                        return Err(Error::config(format!(
                            "plan.delays_us: delay {delay_us} must be a non-negative number"
                        )));
                    }
                    cells.push(Cell {
                        technique,
                        mode,
                        backend,
                        delay_us,
                    });
                }
            }
        }
    }

    // One job per repetition, seeded by position so the expansion order is
    // the only thing that defines which draw a repetition sees.
    let mut jobs = Vec::with_capacity(cells.len() * plan.repetitions as usize);
    for (cell_idx, cell) in cells.iter().enumerate() {
        for rep in 0..plan.repetitions {
            let seed = rng::derive(global_seed, (cell_idx as u64) * 1_000_003 + u64::from(rep));
            jobs.push((*cell, rep, seed));
        }
    }

    // Seed-independent cost populations are shared across every job.
    let fixed_costs: Option<Arc<Vec<f64>>> = if cfg.workload.is_seeded() {
        None
    } else {
        Some(Arc::new(cfg.workload.costs(loop_desc.total_iterations, global_seed)?))
    };

    let run_job = |&(cell, rep, seed): &(Cell, u32, u64)| -> Result<Row> {
        let costs = match &fixed_costs {
            Some(c) => Arc::clone(c),
            None => Arc::new(cfg.workload.costs(loop_desc.total_iterations, seed)?),
        };
        let spec = default_spec(cell.technique, seed);
        let (row, _) = run_cell(
            cfg,
            loop_desc,
            spec,
            cell.mode,
            cell.backend,
            cell.delay_us,
            rep,
            seed,
            &app,
            costs,
        )?;
        Ok(row)
    };

    let workers = parallel.max(1).min(jobs.len().max(1));
    let mut rows = if workers <= 1 {
        jobs.iter().map(run_job).collect::<Result<Vec<_>>>()?
    } else {
        let next = AtomicUsize::new(0);
        let out = Mutex::new(Vec::with_capacity(jobs.len()));
        let first_err: Mutex<Option<Error>> = Mutex::new(None);
        thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= jobs.len() || first_err.lock().unwrap().is_some() {
                        break;
                    }
                    match run_job(&jobs[i]) {
                        Ok(row) => out.lock().unwrap().push(row),
                        Err(e) => {
                            first_err.lock().unwrap().get_or_insert(e);
                            break;
                        }
                    }
                });
            }
        });
        if let Some(e) = first_err.into_inner().unwrap() {
            return Err(e);
        }
        out.into_inner().unwrap()
    };

    sort_rows(&mut rows);
    Ok(rows)
}

fn prefix(field: &'static str) -> impl Fn(Error) -> Error {
    move |e| Error::config(format!("{field}: {e}"))
}

fn sort_rows(rows: &mut [Row]) {
    rows.sort_by(|a, b| {
        a.app
            .cmp(&b.app)
            .then(a.technique.name().cmp(b.technique.name()))
            .then(a.mode.name().cmp(b.mode.name()))
            .then(a.backend.name().cmp(b.backend.name()))
            .then(a.delay_us.total_cmp(&b.delay_us))
            .then(a.rep.cmp(&b.rep))
    });
}

pub fn write_csv(path: &Path, rows: &[Row]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(w, "{}", row.csv())?;
    }
    w.flush()?;
    Ok(())
}

/// Runs one (technique, mode, backend, delay) cell and returns its row plus
/// the chunk trace.
#[allow(clippy::too_many_arguments)]
pub fn run_cell(
    cfg: &ConfigFile,
    loop_desc: LoopDescriptor,
    spec: TechniqueSpec,
    mode: Mode,
    backend: Backend,
    delay_us: f64,
    rep: u32,
    seed: u64,
    app: &str,
    costs: Arc<Vec<f64>>,
) -> Result<(Row, Vec<ChunkGrant>)> {
    let template = Row {
        app: app.to_string(),
        technique: spec.technique,
        mode,
        backend,
        delay_us,
        rep,
        seed,
        makespan_s: 0.0,
        cov: 0.0,
        imbalance: 0.0,
        num_chunks: 0,
    };
    match backend {
        Backend::Sim => {
            let mut sim = SimConfig::new(loop_desc, spec, mode, costs);
            sim.msg_latency = cfg.sim.msg_latency_us * 1e-6;
            sim.calc_delay = delay_us * 1e-6;
            sim.assign_cost = cfg.sim.assign_cost_us * 1e-6;
            if let Some(factors) = &cfg.sim.pe_speed_factors {
                sim.pe_speed_factors = factors.clone();
            }
            sim.dedicated_master = cfg.sim.dedicated_master;
            sim.seed = seed;
            let report = run_sim(&sim)?;
            let row = Row {
                makespan_s: report.makespan,
                cov: report.metrics.cov,
                imbalance: report.metrics.imbalance,
                num_chunks: report.num_chunks,
                ..template
            };
            Ok((row, report.trace))
        }
        Backend::Native => {
            let workload = cfg.workload.native(loop_desc.total_iterations, seed)?;
            let probe = cfg
                .technique
                .as_ref()
                .map(|t| t.probe_swr)
                .unwrap_or(false);
            let report = run_native_with(
                loop_desc,
                spec,
                mode,
                &*workload,
                loop_desc.num_pes,
                ExecOptions {
                    probe_swr: probe,
                    probe_seed: seed,
                    collect_samples: false,
                    injected_calc_delay: Duration::from_secs_f64(delay_us * 1e-6),
                },
            )?;
            let metrics = compute_metrics(&report.busy);
            let row = Row {
                makespan_s: report.makespan,
                cov: metrics.cov,
                imbalance: metrics.imbalance,
                num_chunks: report.trace.len() as u64,
                ..template
            };
            Ok((row, report.trace))
        }
    }
}

/// Runs the single cell described by the config's `technique`/`mode`
/// sections on the given backend.
pub fn run_single(
    cfg: &ConfigFile,
    backend: Backend,
    seed_override: Option<u64>,
) -> Result<(Row, Vec<ChunkGrant>)> {
    let technique = cfg
        .technique
        .as_ref()
        .ok_or_else(|| Error::config("this command needs a `technique` section"))?;
    let mode: Mode = cfg
        .mode
        .as_deref()
        .ok_or_else(|| Error::config("this command needs a `mode` section"))?
        .parse()?;
    let loop_desc = cfg.loop_shape.loop_desc()?;
    let seed = seed_override.unwrap_or(cfg.sim.seed);
    let spec = technique.spec(seed)?;
    let costs = Arc::new(cfg.workload.costs(loop_desc.total_iterations, seed)?);
    run_cell(
        cfg,
        loop_desc,
        spec,
        mode,
        backend,
        cfg.sim.calc_delay_us,
        0,
        seed,
        &cfg.workload.label(),
        costs,
    )
}
