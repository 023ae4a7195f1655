//! Turns a results CSV into per-delay aggregate tables ready for plotting:
//! one file per distinct delay, one row per (technique, mode, backend) with
//! makespan mean and sample standard deviation across repetitions.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use dls::{Error, Result};

pub const PLOT_HEADER: &str =
    "technique,mode,backend,runs,makespan_mean_s,makespan_std_s,cov_mean,imbalance_mean";

struct Sample {
    makespan: f64,
    cov: f64,
    imbalance: f64,
}

type GroupKey = (String, String, String);

/// Reads `csv` and writes `plot_delay_{delay}us.csv` files into `out_dir`,
/// returning the paths written. Delay keys group by their literal column
/// text, so rows written by the same run always land together.
pub fn write_plot_data(csv: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let reader = BufReader::new(File::open(csv)?);
    let mut by_delay: BTreeMap<String, BTreeMap<GroupKey, Vec<Sample>>> = BTreeMap::new();
    let mut saw_header = false;

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        if !saw_header {
            if !line.starts_with("app,") {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected a results header starting with `app,`, got `{line}`"),
                });
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 11 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 11 fields, got {}", fields.len()),
            });
        }
        let num = |pos: usize, name: &str| -> Result<f64> {
            fields[pos].parse::<f64>().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("{name} `{}` is not a number", fields[pos]),
            })
        };
        num(4, "delay_us")?;
        let sample = Sample {
            makespan: num(7, "makespan_s")?,
            cov: num(8, "cov")?,
            imbalance: num(9, "imbalance")?,
        };
        let key = (
            fields[1].to_string(),
            fields[2].to_string(),
            fields[3].to_string(),
        );
        by_delay
            .entry(fields[4].to_string())
            .or_default()
            .entry(key)
            .or_default()
            .push(sample);
    }

    if by_delay.is_empty() {
        eprintln!("warning: {} has no data rows", csv.display());
        return Ok(Vec::new());
    }

    // Emit in numeric delay order; the literal text still names the file.
    let mut delays: Vec<&String> = by_delay.keys().collect();
    delays.sort_by(|a, b| {
        let (fa, fb) = (a.parse::<f64>(), b.parse::<f64>());
        match (fa, fb) {
            (Ok(x), Ok(y)) => x.total_cmp(&y),
            _ => a.cmp(b),
        }
    });

    let mut written = Vec::new();
    for delay in delays {
        let path = out_dir.join(format!("plot_delay_{delay}us.csv"));
        let mut w = BufWriter::new(File::create(&path)?);
        writeln!(w, "{PLOT_HEADER}")?;
        for ((technique, mode, backend), samples) in &by_delay[delay] {
            let n = samples.len();
            let mean = |f: fn(&Sample) -> f64| samples.iter().map(f).sum::<f64>() / n as f64;
            let mk_mean = mean(|s| s.makespan);
            let mk_std = if n > 1 {
                let ss: f64 = samples
                    .iter()
                    .map(|s| (s.makespan - mk_mean).powi(2))
                    .sum();
                (ss / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            writeln!(
                w,
                "{technique},{mode},{backend},{n},{mk_mean:.9},{mk_std:.9},{:.6},{:.6}",
                mean(|s| s.cov),
                mean(|s| s.imbalance)
            )?;
        }
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}
