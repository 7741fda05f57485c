//! Probabilistic bounds on the accumulated round-off error of long-running
//! numerical processes.
//!
//! The error of an accumulation, dot product or recursive filter is modeled
//! as a sum of independent symmetric variables. [`moment`] bounds its even
//! moments exactly, [`tail`] turns them into thresholds that the running
//! maximum of the error exceeds with probability at most `P`, [`scenario`]
//! and [`filter`] build the variable families from concrete programs, and
//! [`sim`] checks the bounds by simulation.

pub mod error;
pub mod filter;
pub mod moment;
pub mod rational;
pub mod report;
pub mod scenario;
pub mod sim;
pub mod tail;

pub use error::{Error, Result};
pub use filter::{filter_error_scenario, weighted_scenario, FilterSpec};
pub use moment::{
    brute_force_moment, closed_form_moment, moment_bound, series_for_variable, series_power,
    series_product, ModelKind, MomentModel, MomentSeries,
};
pub use rational::Rational;
pub use scenario::{accumulation_scenario, sensor_scenario, ErrorVariableSpec, FpFormat, Scenario};
pub use sim::{simulate_paths, validate_bound, SimConfig, SimReport};
pub use tail::{epsilon_for_probability, optimize_k, TailBoundQuery, TailBoundResult};
