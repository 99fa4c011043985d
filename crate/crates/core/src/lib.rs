//! Optimal non-uniform piecewise-constant approximation of the arrival rate of
//! a nonhomogeneous Poisson process.
//!
//! Arrivals for one weekday over `m` weeks are loaded ([`ingest`]), summarised
//! on a fine grid ([`empirical`]), and a partition of the day is searched for
//! ([`solver`]) that minimises fit error plus a weighted smoothness penalty,
//! subject to every interval passing the conditional-uniform Kolmogorov-Smirnov
//! test and the dispersion test ([`stattests`], [`partition`]). [`synth`]
//! generates ground-truth data and [`report`] renders results.

pub mod empirical;
pub mod error;
pub mod ingest;
pub mod partition;
pub mod report;
pub mod solver;
pub mod stattests;
pub mod synth;

pub use empirical::{build_empirical, EmpiricalRate};
pub use error::{Error, Result};
pub use ingest::{load_arrivals, ArrivalDataset, IntervalCounts, Weekday};
pub use partition::{canonicalize, evaluate, starting_point, EvalResult, Partition, PartitionGrid};
pub use report::{render, ReportBundle, ReportMeta};
pub use solver::{brute_force, penalized_value, solve, SolverConfig, SolverRun};
pub use stattests::{DispersionResult, KsResult, Outcome, TestConfig};
pub use synth::{generate, OverdispersionSpec, TrueRate};
