//! Configuration file schema: one JSON document with sections `loop`,
//! `technique`, `mode`, `workload`, `sim`, and `plan`. Single-cell commands
//! use the first five; `run` additionally needs `plan`. Unknown keys are
//! rejected everywhere so a factor typo fails loudly instead of silently
//! running the wrong experiment.

use std::fs;
use std::io::BufReader;
use std::path::Path;

use serde::Deserialize;

use dls::techniques::{LoopDescriptor, Technique, TechniqueSpec};
use dls::workloads::{
    load_trace, synthetic_costs, MandelbrotConfig, MandelbrotWorkload, SpinWorkload,
    SyntheticConfig, Workload, DEFAULT_SECS_PER_INNER_ITER,
};
use dls::{Error, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(rename = "loop")]
    pub loop_shape: LoopSection,
    pub technique: Option<TechniqueSection>,
    pub mode: Option<String>,
    pub workload: WorkloadSection,
    #[serde(default)]
    pub sim: SimSection,
    pub plan: Option<PlanSection>,
}

pub fn load(path: &Path) -> Result<ConfigFile> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::config(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSection {
    pub n: u64,
    pub pes: u32,
    #[serde(default = "one")]
    pub min_chunk: u64,
}

fn one() -> u64 {
    1
}

impl LoopSection {
    pub fn loop_desc(&self) -> Result<LoopDescriptor> {
        LoopDescriptor::new(self.n, self.pes)?.with_min_chunk(self.min_chunk)
    }
}

/// Technique selection plus optional parameter overrides. Parameters not
/// named here keep the defaults from `default_spec`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechniqueSection {
    pub name: String,
    pub h: Option<f64>,
    pub sigma: Option<f64>,
    pub mu: Option<f64>,
    pub alpha: Option<f64>,
    pub batches: Option<u32>,
    pub swr: Option<f64>,
    pub seed: Option<u64>,
    pub k0: Option<u64>,
    /// PLS under the native backend: time five random iterations up front
    /// and use their min/max ratio instead of the configured swr.
    #[serde(default)]
    pub probe_swr: bool,
}

impl TechniqueSection {
    /// Builds the spec, falling back to `fallback_seed` for the random
    /// technique's stream when no seed is pinned in the file.
    pub fn spec(&self, fallback_seed: u64) -> Result<TechniqueSpec> {
        let technique: Technique = self.name.parse()?;
        let mut spec = default_spec(technique, self.seed.unwrap_or(fallback_seed));
        if let Some(h) = self.h {
            spec.h = Some(h);
        }
        if let Some(sigma) = self.sigma {
            spec.sigma = Some(sigma);
        }
        if let Some(mu) = self.mu {
            spec.mu = Some(mu);
        }
        if let Some(alpha) = self.alpha {
            spec.alpha = Some(alpha);
        }
        if let Some(batches) = self.batches {
            spec.batches = Some(batches);
        }
        if let Some(swr) = self.swr {
            spec.swr = Some(swr);
        }
        if let Some(k0) = self.k0 {
            spec.viss_k0 = Some(k0);
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// The fully parameterized spec a bare technique name stands for. These are
/// the reference-loop parameters, which also serve as sensible experiment
/// defaults: TAP and FSC take the published mean/deviation/overhead
/// constants, FISS and VISS run 3 batches, PLS schedules 70% statically.
pub fn default_spec(technique: Technique, seed: u64) -> TechniqueSpec {
    match technique {
        Technique::Static => TechniqueSpec::static_(),
        Technique::Ss => TechniqueSpec::ss(),
        Technique::Fsc => TechniqueSpec::fsc(0.013716, 0.0605),
        Technique::Gss => TechniqueSpec::gss(),
        Technique::Tap => TechniqueSpec::tap(0.1, 0.0005, 0.0605),
        Technique::Tss => TechniqueSpec::tss(),
        Technique::Fac2 => TechniqueSpec::fac2(),
        Technique::Tfss => TechniqueSpec::tfss(),
        Technique::Fiss => TechniqueSpec::fiss(3),
        Technique::Viss => TechniqueSpec::viss(3),
        Technique::Af => TechniqueSpec::af(),
        Technique::Rnd => TechniqueSpec::rnd(seed),
        Technique::Pls => TechniqueSpec::pls(0.7),
    }
}

/// What the loop iterations cost. Externally tagged:
/// `{"mandelbrot": {...}}`, `{"synthetic": {...}}`, or `{"trace": {...}}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkloadSection {
    Mandelbrot(MandelbrotSection),
    Synthetic(SyntheticSection),
    Trace(TraceSection),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MandelbrotSection {
    pub width: u32,
    pub ct: u32,
    /// x_min, x_max, y_min, y_max; defaults to the standard square.
    pub region: Option<[f64; 4]>,
    pub secs_per_inner_iter: Option<f64>,
}

impl MandelbrotSection {
    fn config(&self) -> Result<MandelbrotConfig> {
        let mut cfg = MandelbrotConfig::new(self.width, self.ct)?;
        if let Some([x_min, x_max, y_min, y_max]) = self.region {
            cfg = cfg.with_region(x_min, x_max, y_min, y_max)?;
        }
        Ok(cfg)
    }

    fn workload(&self) -> Result<MandelbrotWorkload> {
        MandelbrotWorkload::new(
            self.config()?,
            self.secs_per_inner_iter.unwrap_or(DEFAULT_SECS_PER_INNER_ITER),
        )
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    pub distribution: String,
    pub mean: f64,
    pub cov: f64,
    /// Pinned draw. When absent, each repetition draws its own population
    /// from the repetition seed.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSection {
    pub path: String,
}

impl WorkloadSection {
    /// Label written to the CSV `app` column.
    pub fn label(&self) -> String {
        match self {
            WorkloadSection::Mandelbrot(_) => "mandelbrot".into(),
            WorkloadSection::Synthetic(s) => format!("synthetic-{}", s.distribution),
            WorkloadSection::Trace(_) => "trace".into(),
        }
    }

    /// True when the per-iteration costs depend on the draw seed.
    pub fn is_seeded(&self) -> bool {
        matches!(self, WorkloadSection::Synthetic(s) if s.seed.is_none())
    }

    /// Per-iteration costs in seconds, `n` entries.
    pub fn costs(&self, n: u64, seed: u64) -> Result<Vec<f64>> {
        match self {
            WorkloadSection::Mandelbrot(m) => {
                let w = m.workload()?;
                if w.len() != n {
                    return Err(Error::config(format!(
                        "mandelbrot width {} gives {} iterations, loop has {}",
                        m.width,
                        w.len(),
                        n
                    )));
                }
                Ok((0..n).map(|i| w.cost(i)).collect())
            }
            WorkloadSection::Synthetic(s) => {
                let dist = s.distribution.parse()?;
                let cfg = SyntheticConfig::new(dist, s.mean, s.cov, s.seed.unwrap_or(seed));
                synthetic_costs(&cfg, n)
            }
            WorkloadSection::Trace(t) => {
                let file = fs::File::open(&t.path)?;
                let costs = load_trace(BufReader::new(file))?;
                if costs.len() as u64 != n {
                    return Err(Error::config(format!(
                        "trace {} has {} entries, loop has {}",
                        t.path,
                        costs.len(),
                        n
                    )));
                }
                Ok(costs)
            }
        }
    }

    /// An executable workload for the native backend. Mandelbrot runs its
    /// kernel for real; the others spin for their modeled cost.
    pub fn native(&self, n: u64, seed: u64) -> Result<Box<dyn Workload>> {
        match self {
            WorkloadSection::Mandelbrot(m) => {
                let w = m.workload()?;
                if w.len() != n {
                    return Err(Error::config(format!(
                        "mandelbrot width {} gives {} iterations, loop has {}",
                        m.width,
                        w.len(),
                        n
                    )));
                }
                Ok(Box::new(w))
            }
            _ => Ok(Box::new(SpinWorkload::new(self.costs(n, seed)?)?)),
        }
    }
}

/// Timing model shared by the simulator and (for the injected delay) the
/// native backend. All durations are microseconds in the file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub msg_latency_us: f64,
    pub calc_delay_us: f64,
    pub assign_cost_us: f64,
    pub pe_speed_factors: Option<Vec<f64>>,
    pub dedicated_master: bool,
    pub seed: u64,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            msg_latency_us: 1.0,
            calc_delay_us: 0.0,
            assign_cost_us: 1.0,
            pe_speed_factors: None,
            dedicated_master: false,
            seed: 1,
        }
    }
}

/// Factor levels for a factorial sweep. Every combination of technique,
/// mode, backend, and delay runs `repetitions` times.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSection {
    pub techniques: Vec<String>,
    pub modes: Vec<String>,
    #[serde(default = "default_delays")]
    pub delays_us: Vec<f64>,
    #[serde(default = "default_backends")]
    pub backends: Vec<String>,
    #[serde(default = "default_reps")]
    pub repetitions: u32,
    #[serde(default = "one")]
    pub seed: u64,
}

fn default_delays() -> Vec<f64> {
    vec![0.0]
}

fn default_backends() -> Vec<String> {
    vec!["sim".into()]
}

fn default_reps() -> u32 {
    20
}
