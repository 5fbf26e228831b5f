//! Toolkit for stochastic exponentials of jump-diffusion local martingales.
//!
//! Simulates paths of `M = M^c + M^1 + M^2` (Brownian part plus compensated
//! small- and big-band jumps), evaluates the Doleans-Dade exponential by
//! several independent routes, and checks the algebraic identities and
//! divergence statistics that characterize the event `{E_T(M) = 0}`.

pub mod analysis;
pub mod expcore;
pub mod harness;
pub mod model;
pub mod pathsim;
pub mod quad;

pub use analysis::{Characteristics, Theorem1Verdict};
pub use expcore::ExpValue;
pub use harness::{AggregateSummary, ReportRow, RunOptions};
pub use model::{Band, BandSel, JumpLaw, ScenarioSpec, SizeDist, Stat, StoppingRule};
pub use pathsim::{JumpEvent, SamplePath};
