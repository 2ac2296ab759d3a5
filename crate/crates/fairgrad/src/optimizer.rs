//! The experiment loop: aggregate, log, stop or step.

use std::time::Instant;

use nalgebra::DVector;

use crate::aggregate::Aggregator;
use crate::error::{FairGradError, Result};
use crate::fairness::{clamp_losses, transform_gradients, transform_losses, LossTransform};
use crate::pareto::{smallest_singular_value, stationarity_measure};
use crate::types::{
    ExperimentConfig, GradientMatrix, MultiObjectiveProblem, StepRule, TrajectoryRecord,
    WeightVector,
};

/// Adaptive moment estimation state (first/second moment accumulators).
///
/// Standard constants: decay 0.9 and 0.999, epsilon 1e-8, with bias
/// correction — so the very first update moves each coordinate by almost
/// exactly the learning rate in the direction's sign.
#[derive(Clone, Debug)]
pub struct AdamState {
    m: DVector<f64>,
    v: DVector<f64>,
    t: u64,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

impl AdamState {
    pub fn new(dim: usize) -> Self {
        Self {
            m: DVector::zeros(dim),
            v: DVector::zeros(dim),
            t: 0,
        }
    }

    /// Consumes one direction and returns the update to subtract from the
    /// parameters.
    pub fn step(&mut self, direction: &DVector<f64>, learning_rate: f64) -> DVector<f64> {
        self.t += 1;
        let t = self.t as i32;
        self.m = ADAM_BETA1 * &self.m + (1.0 - ADAM_BETA1) * direction;
        self.v = ADAM_BETA2 * &self.v
            + (1.0 - ADAM_BETA2) * direction.component_mul(direction);
        let m_hat = &self.m / (1.0 - ADAM_BETA1.powi(t));
        let v_hat = &self.v / (1.0 - ADAM_BETA2.powi(t));
        DVector::from_fn(direction.len(), |i, _| {
            learning_rate * m_hat[i] / (v_hat[i].sqrt() + ADAM_EPSILON)
        })
    }
}

/// Smoothness-based step size for the alpha-fair direction:
/// `η = Σ wᵢ^{-1/α} / (L · K · Σ wᵢ^{1-1/α})`.
///
/// Taking this step along `d = G w` decreases the average loss by at least
/// `(Σ wᵢ^{-1/α})² / (2 L K² Σ wᵢ^{1-1/α})` when every task is `L`-smooth,
/// which is what makes the monotone-descent guarantee checkable.
pub fn theoretical_step_size(
    weights: &WeightVector,
    alpha: f64,
    smoothness_l: f64,
    task_count: usize,
) -> Result<f64> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(FairGradError::InvalidInput(format!(
            "the theoretical step size requires alpha > 0, got {alpha}"
        )));
    }
    if !smoothness_l.is_finite() || smoothness_l <= 0.0 {
        return Err(FairGradError::InvalidInput(format!(
            "smoothness constant must be finite and > 0, got {smoothness_l}"
        )));
    }
    if weights.len() != task_count {
        return Err(FairGradError::InvalidInput(format!(
            "weight length {} does not match task count {}",
            weights.len(),
            task_count
        )));
    }
    let s1: f64 = weights.values().iter().map(|&w| w.powf(-1.0 / alpha)).sum();
    let s2: f64 = weights
        .values()
        .iter()
        .map(|&w| w.powf(1.0 - 1.0 / alpha))
        .sum();
    let eta = s1 / (smoothness_l * task_count as f64 * s2);
    if !eta.is_finite() || eta <= 0.0 {
        return Err(FairGradError::Domain(format!(
            "step size overflowed: sums {s1:e} / {s2:e} at alpha = {alpha}"
        )));
    }
    Ok(eta)
}

/// Why a run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    /// The stationarity measure fell to the configured tolerance.
    Stationary,
    /// The step budget ran out first.
    BudgetExhausted,
    /// A non-finite value or an aggregation error stopped the run early.
    SolverFailure,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::Stationary => "stationary",
            Termination::BudgetExhausted => "budget_exhausted",
            Termination::SolverFailure => "solver_failure",
        })
    }
}

/// Everything a finished run reports.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub final_point: DVector<f64>,
    /// Raw task losses at the final point.
    pub final_losses: DVector<f64>,
    pub trajectory: Vec<TrajectoryRecord>,
    pub termination: Termination,
    /// Number of parameter updates actually applied.
    pub steps: usize,
    /// Steps whose aggregation looked off (non-converged weight solver or
    /// an ascent direction for some task).
    pub solver_flags: usize,
    /// Mean over steps of the worst per-task gain `minᵢ gᵢᵀd`.
    pub mean_min_gain: f64,
    /// Mean over steps of `minᵢ gᵢᵀd / ‖d‖` (zero-direction steps skipped):
    /// the scale-free angle between the direction and the worst-served task.
    pub mean_min_gain_normalized: f64,
    pub wall_seconds: f64,
    /// Diagnostic message when `termination` is `SolverFailure`.
    pub failure: Option<String>,
}

fn min_gain(g: &GradientMatrix, d: &DVector<f64>) -> f64 {
    (0..g.task_count())
        .map(|i| g.matrix().column(i).dot(d))
        .fold(f64::INFINITY, f64::min)
}

/// Runs one experiment: repeatedly aggregate the task gradients at the
/// current point, log the state, stop when Pareto-stationary within
/// tolerance, otherwise apply the configured update rule.
///
/// The trajectory records the state *before* each update, so the final
/// record of a stationary run is the certificate that triggered the stop.
/// When a fair loss transform is configured the aggregator (and the
/// stationarity probe) see the transformed losses and gradients, while the
/// trajectory and the result always log raw losses. Mid-run failures
/// (non-finite values, aggregation errors) terminate with
/// [`Termination::SolverFailure`] and a diagnostic rather than an `Err`:
/// the partial trajectory is still data.
pub fn run(problem: &dyn MultiObjectiveProblem, config: &ExperimentConfig) -> Result<RunResult> {
    config.validate()?;
    let initial = config
        .initial_point
        .as_ref()
        .ok_or(FairGradError::Config {
            field: "initial_point",
            message: "a start point is required to run".into(),
        })?;
    if initial.len() != problem.parameter_dim() {
        return Err(FairGradError::Config {
            field: "initial_point",
            message: format!(
                "length {} does not match the problem's {} parameters",
                initial.len(),
                problem.parameter_dim()
            ),
        });
    }
    let transform = config.fair_loss_alpha.map(|a| {
        if a == 1.0 {
            LossTransform::Log
        } else {
            LossTransform::Power { alpha: a }
        }
    });

    let start_time = Instant::now();
    let k = problem.task_count();
    let mut theta = DVector::from_vec(initial.clone());
    let mut aggregator = Aggregator::new(config);
    let mut adam = AdamState::new(problem.parameter_dim());

    let mut trajectory = Vec::new();
    let mut termination = Termination::BudgetExhausted;
    let mut failure: Option<String> = None;
    let mut steps = 0usize;
    let mut solver_flags = 0usize;
    let mut gain_sum = 0.0;
    let mut gain_norm_sum = 0.0;
    let mut gain_norm_count = 0usize;

    let fail = |msg: String, termination: &mut Termination, failure: &mut Option<String>| {
        *termination = Termination::SolverFailure;
        *failure = Some(msg);
    };

    for step in 0..config.max_steps {
        let raw_losses = problem.losses(&theta);
        if !raw_losses.iter().all(|v| v.is_finite()) {
            fail(
                format!("non-finite loss at step {step}"),
                &mut termination,
                &mut failure,
            );
            break;
        }
        let raw_g = match problem.gradients(&theta) {
            Ok(g) => g,
            Err(e) => {
                fail(
                    format!("gradient evaluation failed at step {step}: {e}"),
                    &mut termination,
                    &mut failure,
                );
                break;
            }
        };

        // The method optimizes the transformed problem when a transform is on.
        let (agg_losses, agg_g) = match transform {
            None => (raw_losses.clone(), raw_g.clone()),
            Some(t) => {
                let base = match config.loss_floor {
                    Some(floor) => clamp_losses(&raw_losses, floor),
                    None => raw_losses.clone(),
                };
                let tl = match transform_losses(&base, t) {
                    Ok(v) => v,
                    Err(e) => {
                        fail(
                            format!("loss transform failed at step {step}: {e}"),
                            &mut termination,
                            &mut failure,
                        );
                        break;
                    }
                };
                let tg = match transform_gradients(&raw_g, &base, t) {
                    Ok(g) => g,
                    Err(e) => {
                        fail(
                            format!("gradient transform failed at step {step}: {e}"),
                            &mut termination,
                            &mut failure,
                        );
                        break;
                    }
                };
                (tl, tg)
            }
        };

        let agg = match aggregator.aggregate(&agg_losses, &agg_g) {
            Ok(a) => a,
            Err(e) => {
                fail(
                    format!("aggregation failed at step {step}: {e}"),
                    &mut termination,
                    &mut failure,
                );
                break;
            }
        };
        if agg.flagged {
            solver_flags += 1;
        }
        let d = agg.direction.vector().clone();
        let d_norm = d.norm();

        let gain = min_gain(&agg_g, &d);
        gain_sum += gain;
        if d_norm > 0.0 {
            gain_norm_sum += gain / d_norm;
            gain_norm_count += 1;
        }

        let stationarity = if step % config.check_every == 0 {
            stationarity_measure(&agg_g)
        } else {
            f64::NAN
        };
        let sigma_min = smallest_singular_value(&agg_g);

        let step_size = match config.step_rule {
            StepRule::Fixed | StepRule::AdaptiveMoment => config.learning_rate,
            StepRule::Theoretical => {
                match theoretical_step_size(&agg.weights, config.alpha, config.smoothness_l, k) {
                    Ok(eta) => eta,
                    Err(e) => {
                        fail(
                            format!("step-size rule failed at step {step}: {e}"),
                            &mut termination,
                            &mut failure,
                        );
                        break;
                    }
                }
            }
        };

        trajectory.push(TrajectoryRecord {
            step,
            point: theta.clone(),
            losses: raw_losses,
            weights: agg.weights.values().clone(),
            direction_norm: d_norm,
            stationarity,
            sigma_min,
            step_size,
        });

        if stationarity.is_finite() && stationarity <= config.stationarity_tol {
            termination = Termination::Stationary;
            break;
        }

        let update = match config.step_rule {
            StepRule::Fixed | StepRule::Theoretical => step_size * &d,
            StepRule::AdaptiveMoment => adam.step(&d, config.learning_rate),
        };
        theta -= update;
        steps += 1;
        if !theta.iter().all(|v| v.is_finite()) {
            fail(
                format!("parameters became non-finite after step {step}"),
                &mut termination,
                &mut failure,
            );
            break;
        }
    }

    let final_losses = problem.losses(&theta);
    let denom = trajectory.len().max(1) as f64;
    Ok(RunResult {
        final_point: theta,
        final_losses,
        trajectory,
        termination,
        steps,
        solver_flags,
        mean_min_gain: gain_sum / denom,
        mean_min_gain_normalized: if gain_norm_count > 0 {
            gain_norm_sum / gain_norm_count as f64
        } else {
            0.0
        },
        wall_seconds: start_time.elapsed().as_secs_f64(),
        failure,
    })
}
