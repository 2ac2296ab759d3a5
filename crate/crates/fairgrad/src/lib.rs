//! Alpha-fair gradient aggregation for multi-task optimization.
//!
//! When several task losses share one set of parameters, summing their
//! gradients lets whichever task has the largest gradient dominate every
//! update. This crate treats the per-task loss decreases `gᵢᵀd` as goods
//! to allocate fairly: the update direction `d = G w` uses task weights
//! solving the nonlinear weight equation
//!
//! ```text
//! GᵀG w = w^(-1/α)        (elementwise power, α ≥ 0)
//! ```
//!
//! so that at the solution each task's gain satisfies `gᵢᵀd = wᵢ^(-1/α)`.
//! The knob `α` spans plain gradient summation (`α = 0`), proportional
//! fairness (`α = 1`), and an increasingly max-min allocation as `α` grows.
//!
//! What's here:
//!
//! * [`weights`] — solvers for the weight equation (damped Newton,
//!   a projected-gradient fallback, and the diagonal closed form);
//! * [`aggregate`] — the fair aggregator plus six baselines (sum,
//!   scale-invariant, random weighting, dynamic weight average, min-norm
//!   point, gradient surgery) behind one stateful driver;
//! * [`optimizer`] — the experiment loop with fixed, smoothness-based, and
//!   adaptive-moment step rules, logging a full trajectory;
//! * [`fairness`] — the alpha-fair utility family, monotone loss
//!   transforms, and an exact single-link allocation solver;
//! * [`pareto`] — dominance, a stationarity measure, and 2-D front
//!   sampling; [`metrics`] — result-table summaries (`Δm%`, mean rank);
//! * [`toybench`] — a two-task toy landscape and random quadratics with
//!   certified smoothness; [`gradcheck`] — finite-difference validation.
//!
//! # Example
//!
//! ```
//! use fairgrad::optimizer::{run, Termination};
//! use fairgrad::toybench::QuadraticProblem;
//! use fairgrad::types::{ExperimentConfig, StepRule};
//!
//! let problem = QuadraticProblem::shared_identity_pair(3);
//! let config = ExperimentConfig {
//!     alpha: 2.0,
//!     step_rule: StepRule::Theoretical,
//!     smoothness_l: problem.smoothness(),
//!     initial_point: Some(vec![2.0, -1.0, 0.5]),
//!     max_steps: 20_000,
//!     stationarity_tol: 1e-6,
//!     ..Default::default()
//! };
//! let result = run(&problem, &config).unwrap();
//! assert_eq!(result.termination, Termination::Stationary);
//! ```

pub mod aggregate;
pub mod error;
pub mod fairness;
pub mod gradcheck;
pub mod metrics;
pub mod optimizer;
pub mod pareto;
pub mod rng;
pub mod toybench;
pub mod types;
pub mod weights;

pub use error::{FairGradError, Result};
