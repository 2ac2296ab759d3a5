//! Solvers for the alpha-fair weight equation `GᵀG w = w^{-1/α}`.
//!
//! The equation couples the Gram matrix of task gradients with an
//! elementwise power of the weights; its positive solution scales each
//! task's influence so that easy tasks (large gradient energy) are damped
//! and hard tasks amplified, with `α` controlling how aggressively. Three
//! routes are provided:
//!
//! * [`solve_weights`] — a damped Newton iteration on the residual, the
//!   default and the only route with a convergence report callers should
//!   trust for feasibility claims;
//! * [`solve_weights_sgd`] — projected gradient descent on the squared
//!   residual norm, kept for comparison experiments;
//! * [`solve_diagonal`] — the exact closed form `wᵢ = Aᵢᵢ^{-α/(α+1)}` when
//!   the Gram matrix is diagonal, used as an oracle by the tests.
//!
//! `α = 0` short-circuits every route: the equation degenerates to
//! `w^{-1/0}`, read as the all-ones vector, recovering plain gradient
//! summation.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{FairGradError, Result};
use crate::types::{GramMatrix, SolverMode, WeightVector, DEFAULT_W_MIN};

/// Knobs for the iterative weight solvers.
#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    /// Elementwise floor keeping iterates strictly positive.
    pub w_min: f64,
    /// Residual tolerance per task: converged when `‖f(w)‖₂ ≤ factor · K`.
    pub tolerance_factor: f64,
    /// Outer iteration cap.
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            w_min: DEFAULT_W_MIN,
            tolerance_factor: 1e-8,
            max_iterations: 200,
        }
    }
}

impl From<&crate::types::ExperimentConfig> for SolverOptions {
    fn from(config: &crate::types::ExperimentConfig) -> Self {
        Self {
            w_min: config.w_min,
            tolerance_factor: config.solver_tol_factor,
            max_iterations: 200,
        }
    }
}

/// Outcome of a weight solve.
#[derive(Clone, Debug)]
pub struct SolverReport {
    pub weights: WeightVector,
    /// `‖GᵀG w - w^{-1/α}‖₂` at the returned weights.
    pub residual_norm: f64,
    pub iterations: usize,
    /// Whether the residual met the tolerance before the iteration cap.
    pub converged: bool,
    pub mode: SolverMode,
}

fn validate_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(FairGradError::InvalidInput(format!(
            "alpha must be finite and >= 0, got {alpha}"
        )));
    }
    Ok(())
}

/// Weight-equation residual `f(w) = GᵀG w - w^{-1/α}` for `α > 0`.
///
/// Errs on `α = 0` (no residual form exists; the solution is all ones),
/// on shape mismatch, and on nonpositive weights.
pub fn residual(gram: &GramMatrix, weights: &WeightVector, alpha: f64) -> Result<DVector<f64>> {
    validate_alpha(alpha)?;
    if alpha == 0.0 {
        return Err(FairGradError::Unsupported(
            "the residual form requires alpha > 0; alpha = 0 has the exact solution w = 1".into(),
        ));
    }
    if weights.len() != gram.task_count() {
        return Err(FairGradError::InvalidInput(format!(
            "weight length {} does not match task count {}",
            weights.len(),
            gram.task_count()
        )));
    }
    let w = weights.values();
    let mut f = gram.matrix() * w;
    for i in 0..w.len() {
        f[i] -= w[i].powf(-1.0 / alpha);
    }
    Ok(f)
}

/// Exact solution `wᵢ = Aᵢᵢ^{-α/(α+1)}` for a diagonal Gram matrix.
///
/// Accepts matrices whose off-diagonal magnitudes are at most
/// `1e-12 · trace` and requires strictly positive diagonal entries.
pub fn solve_diagonal(gram: &GramMatrix, alpha: f64) -> Result<WeightVector> {
    validate_alpha(alpha)?;
    let a = gram.matrix();
    let k = gram.task_count();
    let tol = 1e-12 * a.trace().abs().max(1e-300);
    for i in 0..k {
        for j in 0..k {
            if i != j && a[(i, j)].abs() > tol {
                return Err(FairGradError::InvalidInput(format!(
                    "gram matrix is not diagonal: entry ({i}, {j}) = {:e}",
                    a[(i, j)]
                )));
            }
        }
    }
    let mut w = DVector::zeros(k);
    for i in 0..k {
        let d = a[(i, i)];
        if d <= 0.0 {
            return Err(FairGradError::Domain(format!(
                "diagonal entry {i} = {d:e} must be positive"
            )));
        }
        w[i] = d.powf(-alpha / (alpha + 1.0));
    }
    WeightVector::new(w, 0.0)
}

fn ones_report(k: usize) -> SolverReport {
    SolverReport {
        weights: WeightVector::uniform(k),
        residual_norm: 0.0,
        iterations: 0,
        converged: true,
        mode: SolverMode::ClosedForm,
    }
}

fn clamp_floor(w: &mut DVector<f64>, floor: f64) {
    for v in w.iter_mut() {
        if *v < floor {
            *v = floor;
        }
    }
}

/// Per-coordinate closed-form estimate `wᵢ = Aᵢᵢ^{-α/(α+1)}`: exact when
/// the Gram matrix is diagonal and the right order of magnitude otherwise,
/// which is what matters when gradient scales span several decades.
fn diagonal_estimate(a: &DMatrix<f64>, alpha: f64, floor: f64) -> DVector<f64> {
    DVector::from_iterator(
        a.nrows(),
        (0..a.nrows()).map(|i| {
            let d = a[(i, i)];
            if d > 0.0 {
                d.powf(-alpha / (alpha + 1.0)).max(floor)
            } else {
                1.0
            }
        }),
    )
}

/// Core damped Newton loop driving `f(w)` toward zero from `start`,
/// spending at most `*budget` Jacobian evaluations; steps are accepted on
/// a decrease of `‖f‖²`. Returns the best iterate seen.
fn lm_from(
    a: &DMatrix<f64>,
    alpha: f64,
    start: DVector<f64>,
    options: &SolverOptions,
    budget: &mut usize,
) -> (DVector<f64>, f64) {
    let k = a.nrows();
    let tol = options.tolerance_factor * k as f64;
    let exponent = -1.0 / alpha;

    let eval = |w: &DVector<f64>| -> DVector<f64> {
        let mut f = a * w;
        for i in 0..k {
            f[i] -= w[i].powf(exponent);
        }
        f
    };

    let mut w = start;
    clamp_floor(&mut w, options.w_min);
    let mut f = eval(&w);
    let mut cost = f.norm_squared();
    let mut best_w = w.clone();
    let mut best_norm = cost.sqrt();
    let mut lambda = 1e-3;

    while best_norm > tol && *budget > 0 {
        *budget -= 1;

        // J = A + (1/alpha) diag(w^{-1/alpha - 1}) is symmetric positive
        // definite whenever the Gram is, so the damped step solves the
        // square system J delta = -f directly. Jacobi equilibration (unit
        // diagonal) keeps the factorization accurate when weight scales
        // span many decades; forming normal equations would square the
        // condition number and destroy the step.
        let mut jac = a.clone();
        for i in 0..k {
            jac[(i, i)] += (1.0 / alpha) * w[i].powf(exponent - 1.0);
        }
        let scale =
            DVector::from_iterator(k, (0..k).map(|i| 1.0 / jac[(i, i)].max(1e-300).sqrt()));
        let mut equilibrated = jac.clone();
        for i in 0..k {
            for j in 0..k {
                equilibrated[(i, j)] *= scale[i] * scale[j];
            }
        }
        let rhs = DVector::from_iterator(k, (0..k).map(|i| -f[i] * scale[i]));

        // Escalate the damping until some step decreases the cost. In
        // equilibrated coordinates adding lambda to the unit diagonal is
        // multiplicative damping lambda*diag(J) on the original system.
        let mut accepted = false;
        loop {
            let mut system = equilibrated.clone();
            for i in 0..k {
                system[(i, i)] += lambda;
            }
            if let Some(chol) = Cholesky::new(system) {
                let y = chol.solve(&rhs);
                let delta = DVector::from_iterator(k, (0..k).map(|i| y[i] * scale[i]));
                let mut candidate = &w + &delta;
                clamp_floor(&mut candidate, options.w_min);
                let f_candidate = eval(&candidate);
                let cost_candidate = f_candidate.norm_squared();
                if cost_candidate.is_finite() && cost_candidate < cost {
                    w = candidate;
                    f = f_candidate;
                    cost = cost_candidate;
                    lambda = (lambda / 10.0).max(1e-12);
                    let norm = cost.sqrt();
                    if norm < best_norm {
                        best_norm = norm;
                        best_w = w.clone();
                    }
                    accepted = true;
                    break;
                }
            }
            if lambda >= 1e12 {
                break;
            }
            lambda = (lambda * 10.0).min(1e12);
        }
        if !accepted {
            // Damping alone stalled. For a positive-definite Gram the
            // Jacobian is symmetric positive definite, so the plain Newton
            // direction -J⁻¹f strictly decreases the cost; backtrack along
            // it before giving up. Only iterates pinned at the floor or at
            // float granularity survive this.
            if let Some(chol) = Cholesky::new(equilibrated.clone()) {
                let y = chol.solve(&rhs);
                let delta = DVector::from_iterator(k, (0..k).map(|i| y[i] * scale[i]));
                let mut t = 1.0f64;
                for _ in 0..80 {
                    let mut candidate = &w + &(&delta * t);
                    clamp_floor(&mut candidate, options.w_min);
                    let f_candidate = eval(&candidate);
                    let cost_candidate = f_candidate.norm_squared();
                    if cost_candidate.is_finite() && cost_candidate < cost {
                        w = candidate;
                        f = f_candidate;
                        cost = cost_candidate;
                        let norm = cost.sqrt();
                        if norm < best_norm {
                            best_norm = norm;
                            best_w = w.clone();
                        }
                        accepted = true;
                        break;
                    }
                    t *= 0.5;
                }
            }
        }
        if !accepted {
            break;
        }
    }

    (best_w, best_norm)
}

/// Solves the weight equation by damped Newton, starting from the
/// diagonal closed-form estimate.
pub fn solve_weights(gram: &GramMatrix, alpha: f64, options: &SolverOptions) -> Result<SolverReport> {
    validate_alpha(alpha)?;
    let k = gram.task_count();
    if alpha == 0.0 {
        return Ok(ones_report(k));
    }
    let start = WeightVector::new(
        diagonal_estimate(gram.matrix(), alpha, options.w_min),
        0.0,
    )?;
    solve_weights_warm(gram, alpha, &start, options)
}

/// Solves the weight equation by damped Newton iteration from `warm_start`.
///
/// Minimizes `‖f(w)‖²` with steps from `(J + λ diag(J)) δ = -f`, where
/// `J = GᵀG + (1/α) diag(w^{-1/α-1})` is the residual Jacobian — symmetric
/// positive definite for positive-definite Grams, so the square system is
/// factored directly after Jacobi equilibration rather than through normal
/// equations (which would square the condition number). The damping `λ`
/// starts at `1e-3`, divides by 10 after an accepted step and escalates by
/// 10 within a step until one is accepted (bounds `[1e-12, 1e12]`), with a
/// backtracked undamped Newton step as a last resort; iterates stay clamped
/// at `w_min`. If the warm start stalls, the solve restarts once from the
/// diagonal closed-form estimate on the remaining iteration budget. The
/// report carries the best iterate seen either way.
pub fn solve_weights_warm(
    gram: &GramMatrix,
    alpha: f64,
    warm_start: &WeightVector,
    options: &SolverOptions,
) -> Result<SolverReport> {
    validate_alpha(alpha)?;
    let k = gram.task_count();
    if alpha == 0.0 {
        return Ok(ones_report(k));
    }
    if warm_start.len() != k {
        return Err(FairGradError::InvalidInput(format!(
            "warm start length {} does not match task count {}",
            warm_start.len(),
            k
        )));
    }

    let a = gram.matrix();
    let tol = options.tolerance_factor * k as f64;
    let mut budget = options.max_iterations;

    let (mut best_w, mut best_norm) =
        lm_from(a, alpha, warm_start.values().clone(), options, &mut budget);

    if best_norm > tol && budget > 0 {
        let fallback = diagonal_estimate(a, alpha, options.w_min);
        if fallback != *warm_start.values() {
            let (w2, n2) = lm_from(a, alpha, fallback, options, &mut budget);
            if n2 < best_norm {
                best_w = w2;
                best_norm = n2;
            }
        }
    }

    Ok(SolverReport {
        weights: WeightVector::new(best_w, 0.0)?,
        residual_norm: best_norm,
        iterations: options.max_iterations - budget,
        converged: best_norm <= tol,
        mode: SolverMode::LeastSquares,
    })
}

/// Solves the weight equation by projected gradient descent on `‖f(w)‖²`.
///
/// Each epoch takes one descent step along `-2 Jᵀ f`, halving the step size
/// from `inner_lr` until the squared residual decreases (the objective is
/// stiff: its curvature near the floor is `~w^{-2/α-2}`, so a fixed step
/// diverges even on 1-by-1 problems). Projection clamps at `w_min`.
pub fn solve_weights_sgd(
    gram: &GramMatrix,
    alpha: f64,
    warm_start: &WeightVector,
    options: &SolverOptions,
    inner_lr: f64,
    epochs: usize,
) -> Result<SolverReport> {
    validate_alpha(alpha)?;
    let k = gram.task_count();
    if alpha == 0.0 {
        return Ok(ones_report(k));
    }
    if warm_start.len() != k {
        return Err(FairGradError::InvalidInput(format!(
            "warm start length {} does not match task count {}",
            warm_start.len(),
            k
        )));
    }
    if !inner_lr.is_finite() || inner_lr <= 0.0 {
        return Err(FairGradError::InvalidInput(format!(
            "inner_lr must be finite and > 0, got {inner_lr}"
        )));
    }

    let a = gram.matrix();
    let tol = options.tolerance_factor * k as f64;
    let exponent = -1.0 / alpha;

    let mut w = warm_start.values().clone();
    clamp_floor(&mut w, options.w_min);

    let eval = |w: &DVector<f64>| -> DVector<f64> {
        let mut f = a * w;
        for i in 0..k {
            f[i] -= w[i].powf(exponent);
        }
        f
    };

    let mut f = eval(&w);
    let mut cost = f.norm_squared();
    let mut epochs_run = 0;

    for _ in 0..epochs {
        if cost.sqrt() <= tol {
            break;
        }
        epochs_run += 1;

        // grad of ||f||^2 is 2 J^T f with J = A + (1/alpha) diag(w^{-1/alpha-1}).
        let mut jac = a.clone();
        for i in 0..k {
            jac[(i, i)] += (1.0 / alpha) * w[i].powf(exponent - 1.0);
        }
        let grad = 2.0 * jac.transpose() * &f;

        let mut lr = inner_lr;
        let mut accepted = false;
        for _ in 0..60 {
            let mut candidate = &w - lr * &grad;
            clamp_floor(&mut candidate, options.w_min);
            let f_candidate = eval(&candidate);
            let cost_candidate = f_candidate.norm_squared();
            if cost_candidate.is_finite() && cost_candidate < cost {
                w = candidate;
                f = f_candidate;
                cost = cost_candidate;
                accepted = true;
                break;
            }
            lr *= 0.5;
        }
        if !accepted {
            break; // no decrease at any step length: stationary for this route
        }
    }

    let norm = cost.sqrt();
    Ok(SolverReport {
        weights: WeightVector::new(w, 0.0)?,
        residual_norm: norm,
        iterations: epochs_run,
        converged: norm <= tol,
        mode: SolverMode::SgdInner,
    })
}
