//! Dynamic loop self-scheduling (DLS) for parallel loops with independent
//! iterations.
//!
//! The crate separates *how big the next chunk is* from *who hands it out*:
//!
//! - [`techniques`] computes chunk sizes. Every technique has a closed-form
//!   calculator usable by any worker from nothing but the step index and the
//!   loop constants, plus a literal recursive evaluator kept as a test oracle.
//! - [`assignment`] turns chunk sizes into grants of `[start, start+size)`
//!   index ranges, either through a central coordinator (CCA) or through
//!   decentralized self-assignment (DCA) where each worker computes its own
//!   chunk size and claims it in one indivisible update of the shared triple
//!   (step, low point, remaining).
//! - [`simulator`] replays a schedule in virtual time with configurable
//!   message latency, chunk-calculation delay, and assignment cost, so the
//!   two protocols can be compared deterministically at any scale.
//! - [`executor`] runs a real workload on OS threads through the same
//!   assignment paths, with an exactly-once check over all iterations.
//! - [`workloads`] provides iteration cost models: a quartic Mandelbrot
//!   kernel, moment-matched synthetic distributions, and trace files.

#![forbid(unsafe_code)]

pub mod assignment;
pub mod error;
pub mod executor;
pub mod rng;
pub mod simulator;
pub mod techniques;
pub mod workloads;

pub use error::{Error, Result};
