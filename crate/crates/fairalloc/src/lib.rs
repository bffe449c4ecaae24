//! Online fair resource allocation against adversarial demands.
//!
//! An online policy repeatedly commits an allocation from a convex feasible
//! set (cache configurations, job splits, or fractional matchings) before the
//! round's demands are revealed. The goal is the aggregate alpha-fair utility
//! of the agents' cumulative rewards, judged against the best fixed
//! allocation in hindsight.
//!
//! The core of the crate is an adaptive-step projected online gradient ascent
//! policy whose per-agent gradients shrink as an agent's cumulative reward
//! grows (`x_i / R_i^alpha`), plus the machinery needed to benchmark it:
//!
//! * [`feasible`] — projection, linear maximization and diameters for the
//!   three polytope families.
//! * [`policy`] — the online policy, fractional and randomized-integral.
//! * [`sampling`] — Madow systematic sampling and doubly-stochastic
//!   decomposition for the integral mode.
//! * [`offline`] — hindsight-optimal comparators, the scheduling closed form,
//!   grid oracles, and surrogate linear regret.
//! * [`adversary`] — trace generators (two-phase adversarial instances,
//!   Zipf workloads) and the trace file format.
//! * [`harness`] — experiment grids with deterministic CSV output.
//!
//! Start with the `examples/` directory: each example is a runnable walk
//! through one capability.

pub mod adversary;
mod assignment;
pub mod error;
pub mod fairness;
pub mod feasible;
pub mod harness;
pub mod model;
pub mod offline;
pub mod policy;
pub mod rng;
pub mod sampling;

pub use adversary::{load_trace, lower_bound_trace, save_trace, zipf_trace, TraceSpec};
pub use error::{Error, Result};
pub use fairness::{aggregate_fairness, approx_factor, lb_ratio, phi, phi_prime};
pub use feasible::{FamilyTag, FeasibleFamily};
pub use harness::{c_alpha_regret, run_experiment, slope_fit, ExperimentConfig, MetricsRow};
pub use model::{
    accrue, validate_trace, Allocation, DemandColumn, DemandMatrix, DemandTrace, FairnessParams,
    RewardState, Violation,
};
pub use offline::{
    brute_force_offline, nonconvexity_diagnostics, offline_optimal, scheduling_closed_form,
    surrogate_regret, OfflineSolution,
};
pub use policy::{run_policy, run_policy_prefix, PolicyState, RunMode, RunOptions, RunRecord};
pub use rng::SplitMix64;
pub use sampling::{bvn_decompose, madow_sample, sample_integral, IntegralAllocation};
