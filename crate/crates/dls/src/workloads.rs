//! Per-iteration cost models: a real Mandelbrot kernel with strongly
//! irregular pixel costs, synthetic statistical workloads, and trace-file
//! workloads.
//!
//! A [`Workload`] exposes the loop length, a modeled per-iteration cost in
//! seconds (what the simulator charges), and a real `execute` that performs
//! the work (what the native executor runs). Cost models are pure functions
//! of the iteration index and safe to evaluate from any thread.

use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::assignment::spin_for;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// A schedulable loop body.
pub trait Workload: Sync + Send {
    /// Total number of iterations N.
    fn len(&self) -> u64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Modeled execution time of iteration `index`, in seconds.
    fn cost(&self, index: u64) -> f64;

    /// Actually performs iteration `index`, returning an opaque result so
    /// the work cannot be optimized away.
    fn execute(&self, index: u64) -> u64;
}

/// Materializes the full cost map of a workload.
pub fn cost_vector(w: &dyn Workload) -> Vec<f64> {
    (0..w.len()).map(|i| w.cost(i)).collect()
}

/// Mean and coefficient of variation (population std / mean) of a cost map.
pub fn cost_stats(costs: &[f64]) -> (f64, f64) {
    if costs.is_empty() {
        return (0.0, 0.0);
    }
    let n = costs.len() as f64;
    let mean = costs.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return (0.0, 0.0);
    }
    let var = costs.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / n;
    (mean, var.sqrt() / mean)
}

/// Rescales a cost map so its mean equals `target_mean`.
pub fn scale_to_mean(costs: &mut [f64], target_mean: f64) {
    let (mean, _) = cost_stats(costs);
    if mean > 0.0 {
        let f = target_mean / mean;
        for c in costs {
            *c *= f;
        }
    }
}

/// Quartic Mandelbrot image: W x W pixels over a rectangular region, pixel
/// `counter` at row `counter / W`, column `counter mod W`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MandelbrotConfig {
    pub width: u32,
    /// Inner-iteration cap CT; a pixel whose orbit never escapes costs CT
    /// iterations and is classified interior (black).
    pub conversion_threshold: u32,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl MandelbrotConfig {
    /// The quartic map spreads escape regions differently from the
    /// classical quadratic set; this region brackets it with margin.
    pub const DEFAULT_REGION: (f64, f64, f64, f64) = (-1.5, 1.5, -1.5, 1.5);

    pub fn new(width: u32, conversion_threshold: u32) -> Result<Self> {
        let (x_min, x_max, y_min, y_max) = Self::DEFAULT_REGION;
        MandelbrotConfig {
            width,
            conversion_threshold,
            x_min,
            x_max,
            y_min,
            y_max,
        }
        .validated()
    }

    pub fn with_region(mut self, x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        self.x_min = x_min;
        self.x_max = x_max;
        self.y_min = y_min;
        self.y_max = y_max;
        self.validated()
    }

    fn validated(self) -> Result<Self> {
        if self.width == 0 {
            return Err(Error::config("mandelbrot width must be at least 1"));
        }
        if self.conversion_threshold == 0 {
            return Err(Error::config("conversion_threshold must be at least 1"));
        }
        if !(self.x_min < self.x_max && self.y_min < self.y_max) {
            return Err(Error::config("mandelbrot region must have positive extent"));
        }
        Ok(self)
    }

    /// N = W^2.
    pub fn len(&self) -> u64 {
        u64::from(self.width) * u64::from(self.width)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Inner iterations spent on pixel `index`: the first `k` at which the
    /// orbit of `z_{n+1} = z_n^4 + c` leaves `|z| < 2`, or CT if it never
    /// does (interior pixel).
    pub fn escape_count(&self, index: u64) -> u32 {
        debug_assert!(index < self.len());
        let w = f64::from(self.width);
        let x = (index / u64::from(self.width)) as f64;
        let y = (index % u64::from(self.width)) as f64;
        let cr = self.x_min + x / w * (self.x_max - self.x_min);
        let ci = self.y_min + y / w * (self.y_max - self.y_min);
        let mut zr = 0.0f64;
        let mut zi = 0.0f64;
        let mut k = 0u32;
        while k < self.conversion_threshold && zr * zr + zi * zi < 4.0 {
            // z^4 as two complex squarings.
            let (sr, si) = (zr * zr - zi * zi, 2.0 * zr * zi);
            zr = sr * sr - si * si + cr;
            zi = 2.0 * sr * si + ci;
            k += 1;
        }
        k
    }

    /// True iff the orbit never escaped within CT iterations.
    pub fn is_interior(&self, index: u64) -> bool {
        self.escape_count(index) == self.conversion_threshold
    }
}

/// Default seconds charged per inner quartic-map iteration when escape
/// counts stand in for simulated costs. Calibrated so the 512x512 map at
/// threshold 10^4 (mean escape count ~2210) averages about 10.25 ms per
/// loop iteration.
pub const DEFAULT_SECS_PER_INNER_ITER: f64 = 4.64e-6;

/// Mandelbrot as a schedulable workload: `execute` runs the kernel for
/// real, `cost` charges `escape_count * secs_per_inner_iter`.
#[derive(Debug, Clone, Copy)]
pub struct MandelbrotWorkload {
    pub config: MandelbrotConfig,
    pub secs_per_inner_iter: f64,
}

impl MandelbrotWorkload {
    pub fn new(config: MandelbrotConfig, secs_per_inner_iter: f64) -> Result<Self> {
        if !(secs_per_inner_iter.is_finite() && secs_per_inner_iter > 0.0) {
            return Err(Error::config("secs_per_inner_iter must be positive"));
        }
        Ok(MandelbrotWorkload {
            config,
            secs_per_inner_iter,
        })
    }
}

impl Workload for MandelbrotWorkload {
    fn len(&self) -> u64 {
        self.config.len()
    }

    fn cost(&self, index: u64) -> f64 {
        f64::from(self.config.escape_count(index)) * self.secs_per_inner_iter
    }

    fn execute(&self, index: u64) -> u64 {
        u64::from(self.config.escape_count(index))
    }
}

/// Writes the image as a binary PGM: interior pixels black, escaped pixels
/// brighter the faster they escaped.
pub fn write_pgm<W: Write>(mut w: W, config: &MandelbrotConfig) -> Result<()> {
    let side = config.width;
    writeln!(w, "P5\n{side} {side}\n255")?;
    let ct = config.conversion_threshold;
    let mut row = Vec::with_capacity(side as usize);
    for index in 0..config.len() {
        let k = config.escape_count(index);
        let shade = if k == ct {
            0u8
        } else {
            255u8.saturating_sub(((u64::from(k) * 224) / u64::from(ct)) as u8)
        };
        row.push(shade);
        if row.len() == side as usize {
            w.write_all(&row)?;
            row.clear();
        }
    }
    Ok(())
}

/// Statistical shape of a synthetic cost population.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Distribution {
    Constant,
    Uniform,
    Lognormal,
    Exponential,
}

impl std::str::FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "constant" => Ok(Distribution::Constant),
            "uniform" => Ok(Distribution::Uniform),
            "lognormal" => Ok(Distribution::Lognormal),
            "exponential" => Ok(Distribution::Exponential),
            other => Err(Error::config(format!("unknown distribution `{other}`"))),
        }
    }
}

/// Target moments for a synthetic workload.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub distribution: Distribution,
    /// Target mean iteration time, seconds.
    pub mean: f64,
    /// Target coefficient of variation.
    pub cov: f64,
    pub seed: u64,
}

impl SyntheticConfig {
    pub fn new(distribution: Distribution, mean: f64, cov: f64, seed: u64) -> Self {
        SyntheticConfig {
            distribution,
            mean,
            cov,
            seed,
        }
    }
}

/// Draws `n` per-iteration costs with the configured mean and coefficient
/// of variation. Deterministic per seed; each index has its own derived
/// stream, so a prefix of a longer workload equals the shorter one.
pub fn synthetic_costs(config: &SyntheticConfig, n: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::config("synthetic workload needs n >= 1"));
    }
    if !(config.mean.is_finite() && config.mean > 0.0) {
        return Err(Error::config("synthetic mean must be positive"));
    }
    if !(config.cov.is_finite() && config.cov >= 0.0) {
        return Err(Error::config("synthetic c.o.v. must be non-negative"));
    }
    let m = config.mean;
    let c = config.cov;
    let mut draw: Box<dyn FnMut(&mut SplitMix64) -> f64> = match config.distribution {
        Distribution::Constant => {
            if c != 0.0 {
                return Err(Error::config(
                    "constant distribution cannot reach a non-zero c.o.v.",
                ));
            }
            Box::new(move |_| m)
        }
        Distribution::Uniform => {
            // Width from the variance of U(a, b): std = (b - a) / sqrt(12).
            let half_width = 12f64.sqrt() * m * c / 2.0;
            let a = m - half_width;
            if a < 0.0 {
                return Err(Error::config(format!(
                    "uniform c.o.v. {c} needs negative costs; maximum feasible is 1/sqrt(3) ~ 0.577"
                )));
            }
            Box::new(move |rng| a + 2.0 * half_width * rng.next_f64())
        }
        Distribution::Lognormal => {
            if c == 0.0 {
                return Err(Error::config("lognormal needs c.o.v. > 0; use constant"));
            }
            // Moment matching: exp(N(mu_ln, sigma_ln^2)) has the target
            // mean and c.o.v. with these parameters.
            let sigma_ln = (1.0 + c * c).ln().sqrt();
            let mu_ln = m.ln() - sigma_ln * sigma_ln / 2.0;
            Box::new(move |rng| (mu_ln + sigma_ln * rng.next_normal()).exp())
        }
        Distribution::Exponential => {
            if (c - 1.0).abs() > 1e-6 {
                return Err(Error::config(
                    "exponential distribution has c.o.v. 1 by definition",
                ));
            }
            // Inverse CDF; next_f64 < 1 keeps the log argument positive.
            Box::new(move |rng| -m * (1.0 - rng.next_f64()).ln())
        }
    };
    Ok((0..n)
        .map(|i| draw(&mut SplitMix64::from_stream(config.seed, i)))
        .collect())
}

/// A workload defined by an explicit cost vector; `execute` busy-waits the
/// modeled time, making real runs match the model up to clock granularity.
#[derive(Debug, Clone)]
pub struct SpinWorkload {
    costs: Arc<Vec<f64>>,
}

impl SpinWorkload {
    pub fn new(costs: Vec<f64>) -> Result<Self> {
        if costs.is_empty() {
            return Err(Error::config("workload must have at least one iteration"));
        }
        if let Some(bad) = costs.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return Err(Error::config(format!(
                "iteration costs must be finite and non-negative, got {bad}"
            )));
        }
        Ok(SpinWorkload {
            costs: Arc::new(costs),
        })
    }

    pub fn costs(&self) -> &Arc<Vec<f64>> {
        &self.costs
    }
}

impl Workload for SpinWorkload {
    fn len(&self) -> u64 {
        self.costs.len() as u64
    }

    fn cost(&self, index: u64) -> f64 {
        self.costs[index as usize]
    }

    fn execute(&self, index: u64) -> u64 {
        spin_for(std::time::Duration::from_secs_f64(self.costs[index as usize]));
        index
    }
}

/// Reads a cost trace: one non-negative decimal seconds value per line.
pub fn load_trace<R: BufRead>(r: R) -> Result<Vec<f64>> {
    let mut costs = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            line: idx + 1,
            msg,
        };
        let v: f64 = text
            .parse()
            .map_err(|e| parse_err(format!("`{text}`: {e}")))?;
        if !v.is_finite() || v < 0.0 {
            return Err(parse_err(format!(
                "cost must be finite and non-negative, got {v}"
            )));
        }
        costs.push(v);
    }
    if costs.is_empty() {
        return Err(Error::config("cost trace contains no values"));
    }
    Ok(costs)
}

/// Writes a cost trace in the format `load_trace` reads. Values are printed
/// in shortest round-trip form, so a load of a save is exact.
pub fn save_trace<W: Write>(mut w: W, costs: &[f64]) -> Result<()> {
    for c in costs {
        writeln!(w, "{c}")?;
    }
    Ok(())
}
