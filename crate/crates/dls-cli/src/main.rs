//! `dls` command-line harness.
//!
//! Subcommands: `run` executes a factorial plan and writes one CSV row per
//! repetition; `sim` and `exec` run a single configured cell in virtual time
//! or on real threads; `verify` checks the chunk formulas against published
//! reference sequences; `plotdata` aggregates a results CSV into per-delay
//! tables. Exit codes: 0 on success, 1 on runtime or verification failure,
//! 2 on bad configuration or usage.

mod config;
mod plan;
mod plotdata;
mod verify;

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dls::assignment::write_trace_csv;
use dls::Error;

#[derive(Parser)]
#[command(name = "dls", version, about = "Dynamic loop self-scheduling harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the config's factorial plan and write a results CSV.
    Run(RunArgs),
    /// Run the configured cell once in the virtual-time simulator.
    Sim(CellArgs),
    /// Run the configured cell once on real threads.
    Exec(CellArgs),
    /// Check every technique against its published reference sequence.
    Verify,
    /// Aggregate a results CSV into per-delay plot tables.
    Plotdata(PlotdataArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file; must contain a `plan` section.
    #[arg(long)]
    config: PathBuf,
    /// Results CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the plan's global seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for independent cells.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
}

#[derive(Args)]
struct CellArgs {
    /// JSON config file; must contain `technique` and `mode` sections.
    #[arg(long)]
    config: PathBuf,
    /// Also write the row as a one-line results CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the sim section's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the chunk trace to this CSV.
    #[arg(long)]
    dump_trace: Option<PathBuf>,
}

#[derive(Args)]
struct PlotdataArgs {
    /// Results CSV produced by `run`.
    csv: PathBuf,
    /// Directory for the per-delay tables.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Usage(_) | Error::Parse { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn dispatch(cli: Cli) -> dls::Result<ExitCode> {
    match cli.command {
        Command::Run(args) => {
            let cfg = config::load(&args.config)?;
            let rows = plan::run_plan(&cfg, args.seed, args.parallel)?;
            plan::write_csv(&args.out, &rows)?;
            println!("wrote {} rows to {}", rows.len(), args.out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Sim(args) => run_cell_cmd(args, plan::Backend::Sim),
        Command::Exec(args) => run_cell_cmd(args, plan::Backend::Native),
        Command::Verify => {
            let outcome = verify::run_verify()?;
            for line in &outcome.lines {
                println!("{line}");
            }
            if outcome.passed {
                println!("verification passed");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("verification FAILED");
                Ok(ExitCode::from(1))
            }
        }
        Command::Plotdata(args) => {
            let files = plotdata::write_plot_data(&args.csv, &args.out)?;
            for f in &files {
                println!("wrote {}", f.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn run_cell_cmd(args: CellArgs, backend: plan::Backend) -> dls::Result<ExitCode> {
    let cfg = config::load(&args.config)?;
    let (row, trace) = plan::run_single(&cfg, backend, args.seed)?;
    println!(
        "app={} technique={} mode={} backend={} delay_us={} seed={} \
         makespan_s={:.9} cov={:.6} imbalance={:.6} num_chunks={}",
        row.app,
        row.technique,
        row.mode.name(),
        row.backend.name(),
        row.delay_us,
        row.seed,
        row.makespan_s,
        row.cov,
        row.imbalance,
        row.num_chunks
    );
    if let Some(out) = &args.out {
        plan::write_csv(out, std::slice::from_ref(&row))?;
    }
    if let Some(path) = &args.dump_trace {
        let w = BufWriter::new(File::create(path)?);
        write_trace_csv(w, &trace)?;
    }
    Ok(ExitCode::SUCCESS)
}
