//! Gradient aggregation: turning `K` task gradients into one update direction.
//!
//! Every aggregator consumes the gradient matrix `G` (columns = tasks) and
//! produces a direction `d` in parameter space together with the task
//! weights it implicitly applied, so `d = G w` for the weighting methods.
//! The surgery baseline is the exception: it edits gradients pairwise and
//! reduces them, so its logged weights are the reduction coefficients.

use nalgebra::DVector;

use crate::error::{FairGradError, Result};
use crate::rng::RunRng;
use crate::types::{
    build_gram, Direction, GradientMatrix, Method, PcgradReduce, SolverMode, WeightVector,
};
use crate::weights::{solve_weights_sgd, solve_weights_warm, SolverOptions, SolverReport};

/// Result of the simplex-constrained min-norm problem
/// `min_w ‖G w‖²  s.t.  w ≥ 0, Σ w = 1`.
#[derive(Clone, Debug)]
pub struct MinNormPoint {
    /// Simplex weights at the returned point.
    pub weights: DVector<f64>,
    /// `d = G w` at those weights.
    pub direction: DVector<f64>,
    /// `‖d‖₂`.
    pub norm: f64,
    /// Final Frank-Wolfe duality gap `2 (‖d‖² - minᵢ gᵢᵀd)`.
    pub gap: f64,
    pub iterations: usize,
    /// Whether the gap criterion was met (as opposed to stalling).
    pub converged: bool,
}

/// Frank-Wolfe solver for the min-norm point of the gradient convex hull.
///
/// Starts from uniform weights. Each iteration picks the task whose
/// gradient has the smallest inner product with the current direction
/// (lowest index on ties), then takes the exact line-search step toward it:
/// `γ* = clip(-(d·v)/‖v‖², 0, 1)` with `v = gᵢ* - d`. Stops when the
/// duality gap falls below `1e-10` absolute or below `1e-12 · ‖d‖²`
/// relative (the float-noise floor at large gradient scales), or when the
/// line search makes no progress; 1000 iterations cap the loop. Two-task
/// inputs are solved exactly by the first line search, so the loop ends in
/// at most two iterations there.
pub fn min_norm_point(g: &GradientMatrix) -> MinNormPoint {
    let k = g.task_count();
    let gm = g.matrix();

    let mut w = DVector::from_element(k, 1.0 / k as f64);
    let mut d: DVector<f64> = gm * &w;

    let gap_of = |d: &DVector<f64>| -> (usize, f64) {
        let mut best_i = 0;
        let mut best_v = f64::INFINITY;
        for i in 0..k {
            let v = gm.column(i).dot(d);
            if v < best_v {
                best_v = v;
                best_i = i;
            }
        }
        (best_i, 2.0 * (d.norm_squared() - best_v))
    };

    let mut iterations = 0;
    let mut converged = false;
    let mut gap = f64::INFINITY;

    for _ in 0..1000 {
        let (i_star, current_gap) = gap_of(&d);
        gap = current_gap;
        let phi = d.norm_squared();
        if gap <= 1e-10 || gap <= 1e-12 * phi {
            converged = true;
            break;
        }
        iterations += 1;

        let v = gm.column(i_star).into_owned() - &d;
        let denom = v.norm_squared();
        if denom == 0.0 {
            converged = true; // vertex equals current point: gap is numerical noise
            break;
        }
        let gamma = (-d.dot(&v) / denom).clamp(0.0, 1.0);
        if gamma == 0.0 {
            break; // no progress possible along this vertex
        }

        w *= 1.0 - gamma;
        w[i_star] += gamma;
        d = gm * &w; // recompute fresh to avoid drift
    }

    let norm = d.norm();
    MinNormPoint {
        weights: w,
        direction: d,
        norm,
        gap,
        iterations,
        converged,
    }
}

/// Linear scalarization: `d = G · 1` (sum of task gradients).
pub fn aggregate_ls(g: &GradientMatrix) -> (Direction, WeightVector) {
    let w = WeightVector::uniform(g.task_count());
    let d = g.matrix() * w.values();
    (Direction::new(d).expect("finite by construction"), w)
}

/// Scale-invariant baseline: `d = G · (1/l)`, the gradient of `Σ ln lᵢ`.
///
/// Errs when any loss is nonpositive (log-gradient undefined).
pub fn aggregate_si(g: &GradientMatrix, losses: &DVector<f64>) -> Result<(Direction, WeightVector)> {
    let k = g.task_count();
    if losses.len() != k {
        return Err(FairGradError::InvalidInput(format!(
            "loss length {} does not match task count {}",
            losses.len(),
            k
        )));
    }
    let mut w = DVector::zeros(k);
    for i in 0..k {
        if losses[i] <= 0.0 || !losses[i].is_finite() {
            return Err(FairGradError::Domain(format!(
                "scale-invariant weighting requires positive losses, got l[{i}] = {}",
                losses[i]
            )));
        }
        w[i] = 1.0 / losses[i];
    }
    let d = g.matrix() * &w;
    Ok((
        Direction::new(d)?,
        WeightVector::new(w, 0.0)?,
    ))
}

/// Random loss weighting: softmax of `K` standard normal draws.
pub fn aggregate_rlw(g: &GradientMatrix, rng: &mut RunRng) -> (Direction, WeightVector) {
    let k = g.task_count();
    let draws: Vec<f64> = (0..k).map(|_| crate::rng::standard_normal(rng)).collect();
    let max = draws.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = draws.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let w = DVector::from_iterator(k, exps.iter().map(|e| e / sum));
    let d = g.matrix() * &w;
    (
        Direction::new(d).expect("finite by construction"),
        WeightVector::new(w, 0.0).expect("softmax outputs are positive"),
    )
}

/// Rolling state for dynamic weight averaging: the last two loss vectors.
#[derive(Clone, Debug, Default)]
pub struct DwaState {
    history: Vec<DVector<f64>>,
}

impl DwaState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of loss vectors currently remembered (at most 2).
    pub fn depth(&self) -> usize {
        self.history.len()
    }

    fn push(&mut self, losses: DVector<f64>) {
        self.history.push(losses);
        if self.history.len() > 2 {
            self.history.remove(0);
        }
    }
}

/// Dynamic weight average: weights `K · softmax(r / T)` with descent-rate
/// ratios `rᵢ = lᵢ(t-1) / lᵢ(t-2)`; uniform weights (all ones) until two
/// past loss vectors exist. Pushes `losses` into the history after
/// computing, so the current step never sees itself.
pub fn aggregate_dwa(
    g: &GradientMatrix,
    losses: &DVector<f64>,
    state: &mut DwaState,
    temperature: f64,
) -> Result<(Direction, WeightVector)> {
    let k = g.task_count();
    if losses.len() != k {
        return Err(FairGradError::InvalidInput(format!(
            "loss length {} does not match task count {}",
            losses.len(),
            k
        )));
    }
    if !temperature.is_finite() || temperature <= 0.0 {
        return Err(FairGradError::InvalidInput(format!(
            "temperature must be finite and > 0, got {temperature}"
        )));
    }

    let w = if state.history.len() < 2 {
        DVector::from_element(k, 1.0)
    } else {
        let prev = &state.history[1];
        let prev2 = &state.history[0];
        let mut r = DVector::zeros(k);
        for i in 0..k {
            if prev2[i] <= 0.0 || !prev2[i].is_finite() || !prev[i].is_finite() {
                return Err(FairGradError::Domain(format!(
                    "descent-rate ratio needs positive past losses, got l[{i}](t-2) = {}",
                    prev2[i]
                )));
            }
            r[i] = prev[i] / prev2[i];
        }
        let scaled: Vec<f64> = r.iter().map(|v| v / temperature).collect();
        let max = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scaled.iter().map(|z| (z - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        DVector::from_iterator(k, exps.iter().map(|e| k as f64 * e / sum))
    };

    state.push(losses.clone());
    let d = g.matrix() * &w;
    Ok((Direction::new(d)?, WeightVector::new(w, 0.0)?))
}

/// Min-norm direction over the gradient convex hull (used as the steepest
/// common-descent baseline). Returns the simplex weights and `d = G w`.
pub fn aggregate_mgda(g: &GradientMatrix) -> (Direction, WeightVector, MinNormPoint) {
    let point = min_norm_point(g);
    let d = Direction::new(point.direction.clone()).expect("finite by construction");
    // Simplex weights may touch zero; report them unfloored.
    let w = WeightVector::new(point.weights.map(|v| v.max(0.0).max(f64::MIN_POSITIVE)), 0.0)
        .expect("clamped positive");
    (d, w, point)
}

/// Gradient surgery: for each task `i`, project its gradient away from
/// every conflicting task `j` (visited in a shuffled order), then reduce.
///
/// A conflict is a negative inner product `g̃ᵢᵀgⱼ < 0`; the projection
/// subtracts `(g̃ᵢᵀgⱼ / ‖gⱼ‖²) gⱼ`, using the *original* gradients on the
/// right. Zero-norm `gⱼ` are skipped. The reduction is the mean (weights
/// `1/K`) or the sum (weights `1`).
pub fn aggregate_pcgrad(
    g: &GradientMatrix,
    rng: &mut RunRng,
    reduce: PcgradReduce,
) -> (Direction, WeightVector) {
    use rand::seq::SliceRandom;

    let k = g.task_count();
    let m = g.parameter_dim();
    let gm = g.matrix();

    let norms_sq: Vec<f64> = (0..k).map(|j| gm.column(j).norm_squared()).collect();
    let mut total = DVector::zeros(m);

    for i in 0..k {
        let mut gi = gm.column(i).into_owned();
        let mut order: Vec<usize> = (0..k).filter(|&j| j != i).collect();
        order.shuffle(rng);
        for j in order {
            if norms_sq[j] == 0.0 {
                continue;
            }
            let dot = gi.dot(&gm.column(j).into_owned());
            if dot < 0.0 {
                gi -= (dot / norms_sq[j]) * gm.column(j).into_owned();
            }
        }
        total += gi;
    }

    let (d, coeff) = match reduce {
        PcgradReduce::Mean => (total / k as f64, 1.0 / k as f64),
        PcgradReduce::Sum => (total, 1.0),
    };
    (
        Direction::new(d).expect("finite by construction"),
        WeightVector::new(DVector::from_element(k, coeff), 0.0).expect("positive"),
    )
}

/// Output of the alpha-fair aggregation step.
#[derive(Clone, Debug)]
pub struct FairGradAggregation {
    pub direction: Direction,
    pub weights: WeightVector,
    pub report: SolverReport,
    /// True when the solver converged and every per-task gain `gᵢᵀd` is
    /// nonnegative up to float noise (`≥ -1e-8` after scaling), i.e. the
    /// direction is a common-descent direction as the theory promises.
    pub feasible: bool,
}

/// Alpha-fair aggregation: solve `GᵀG w = w^{-1/α}` and set `d = G w`.
pub fn aggregate_fairgrad(
    g: &GradientMatrix,
    alpha: f64,
    warm_start: Option<&WeightVector>,
    options: &SolverOptions,
    mode: SolverMode,
) -> Result<FairGradAggregation> {
    let gram = build_gram(g);
    let uniform = WeightVector::uniform(g.task_count());
    let start = warm_start.unwrap_or(&uniform);
    let report = match mode {
        SolverMode::LeastSquares | SolverMode::ClosedForm => {
            solve_weights_warm(&gram, alpha, start, options)?
        }
        SolverMode::SgdInner => solve_weights_sgd(&gram, alpha, start, options, 0.1, 20)?,
    };
    let d = g.matrix() * report.weights.values();

    // At an exact solution g_i.d = w_i^{-1/alpha} > 0; allow float slack
    // relative to the direction scale.
    let scale = d.norm().max(1.0);
    let feasible = report.converged
        && (0..g.task_count()).all(|i| g.matrix().column(i).dot(&d) >= -1e-8 * scale);

    Ok(FairGradAggregation {
        direction: Direction::new(d)?,
        weights: report.weights.clone(),
        report,
        feasible,
    })
}

/// One aggregated step: the direction, the weights that produced it, the
/// weight-solver report when one ran, and whether anything looked off
/// (non-converged solver or an ascent direction for some task).
#[derive(Clone, Debug)]
pub struct StepAggregation {
    pub direction: Direction,
    pub weights: WeightVector,
    pub solver: Option<SolverReport>,
    pub flagged: bool,
}

/// Stateful driver that applies one configured method step after step,
/// owning the method's evolving state: the RNG stream for the randomized
/// methods, the loss history for dynamic weight averaging, and the warm
/// start for the fair weight solver.
pub struct Aggregator {
    method: Method,
    alpha: f64,
    solver_mode: SolverMode,
    options: SolverOptions,
    pcgrad_reduce: PcgradReduce,
    dwa: DwaState,
    dwa_temperature: f64,
    rng: RunRng,
    warm: Option<WeightVector>,
}

impl Aggregator {
    pub fn new(config: &crate::types::ExperimentConfig) -> Self {
        Self {
            method: config.method,
            alpha: config.alpha,
            solver_mode: config.solver_mode,
            options: SolverOptions::from(config),
            pcgrad_reduce: config.pcgrad_reduce,
            dwa: DwaState::new(),
            dwa_temperature: config.dwa_temperature,
            rng: crate::rng::seeded(config.seed),
            warm: None,
        }
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// Aggregates one step. `losses` are the (possibly transformed) task
    /// losses at the current point; `g` their gradients.
    pub fn aggregate(
        &mut self,
        losses: &DVector<f64>,
        g: &GradientMatrix,
    ) -> Result<StepAggregation> {
        match self.method {
            Method::FairGrad => {
                let out = aggregate_fairgrad(
                    g,
                    self.alpha,
                    self.warm.as_ref(),
                    &self.options,
                    self.solver_mode,
                )?;
                self.warm = Some(out.weights.clone());
                Ok(StepAggregation {
                    direction: out.direction,
                    weights: out.weights,
                    flagged: !out.feasible,
                    solver: Some(out.report),
                })
            }
            Method::Ls => {
                let (d, w) = aggregate_ls(g);
                Ok(StepAggregation {
                    direction: d,
                    weights: w,
                    solver: None,
                    flagged: false,
                })
            }
            Method::Si => {
                let (d, w) = aggregate_si(g, losses)?;
                Ok(StepAggregation {
                    direction: d,
                    weights: w,
                    solver: None,
                    flagged: false,
                })
            }
            Method::Rlw => {
                let (d, w) = aggregate_rlw(g, &mut self.rng);
                Ok(StepAggregation {
                    direction: d,
                    weights: w,
                    solver: None,
                    flagged: false,
                })
            }
            Method::Dwa => {
                let (d, w) = aggregate_dwa(g, losses, &mut self.dwa, self.dwa_temperature)?;
                Ok(StepAggregation {
                    direction: d,
                    weights: w,
                    solver: None,
                    flagged: false,
                })
            }
            Method::Mgda => {
                let (d, w, point) = aggregate_mgda(g);
                Ok(StepAggregation {
                    direction: d,
                    weights: w,
                    solver: None,
                    flagged: !point.converged,
                })
            }
            Method::PcGrad => {
                let (d, w) = aggregate_pcgrad(g, &mut self.rng, self.pcgrad_reduce);
                Ok(StepAggregation {
                    direction: d,
                    weights: w,
                    solver: None,
                    flagged: false,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, DMatrix};

    fn grads(m: DMatrix<f64>) -> GradientMatrix {
        GradientMatrix::new(m).unwrap()
    }

    #[test]
    fn ls_sums_gradients() {
        let g = grads(dmatrix![1.0, -1.0; 0.0, 1.0]);
        let (d, w) = aggregate_ls(&g);
        assert_eq!(d.vector(), &nalgebra::dvector![0.0, 1.0]);
        assert_eq!(w.values(), &nalgebra::dvector![1.0, 1.0]);
    }

    #[test]
    fn si_weights_are_reciprocal_losses() {
        let g = grads(dmatrix![2.0, 4.0]);
        let losses = nalgebra::dvector![2.0, 4.0];
        let (d, w) = aggregate_si(&g, &losses).unwrap();
        assert_relative_eq!(w.values()[0], 0.5);
        assert_relative_eq!(w.values()[1], 0.25);
        assert_relative_eq!(d.vector()[0], 2.0);
        let bad = aggregate_si(&g, &nalgebra::dvector![2.0, 0.0]);
        assert!(matches!(bad, Err(FairGradError::Domain(_))));
    }

    #[test]
    fn rlw_weights_form_a_simplex_point_deterministically() {
        let g = grads(dmatrix![1.0, 0.0, 2.0; 0.0, 1.0, -1.0]);
        let mut r1 = seeded(7);
        let mut r2 = seeded(7);
        let (d1, w1) = aggregate_rlw(&g, &mut r1);
        let (d2, w2) = aggregate_rlw(&g, &mut r2);
        assert_eq!(d1.vector(), d2.vector());
        assert_eq!(w1.values(), w2.values());
        let sum: f64 = w1.values().iter().sum();
        assert_relative_eq!(sum, 1.0, max_relative = 1e-12);
        assert!(w1.values().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn dwa_is_uniform_until_two_steps_of_history() {
        let g = grads(dmatrix![1.0, 0.0; 0.0, 1.0]);
        let mut state = DwaState::new();
        let (_, w0) =
            aggregate_dwa(&g, &nalgebra::dvector![4.0, 2.0], &mut state, 2.0).unwrap();
        assert_eq!(w0.values(), &nalgebra::dvector![1.0, 1.0]);
        let (_, w1) =
            aggregate_dwa(&g, &nalgebra::dvector![2.0, 2.0], &mut state, 2.0).unwrap();
        assert_eq!(w1.values(), &nalgebra::dvector![1.0, 1.0]);
        assert_eq!(state.depth(), 2);
    }

    #[test]
    fn dwa_matches_frozen_softmax_example() {
        // Histories l(t-2) = (1, 2), l(t-1) = (2, 2) give r = (2, 1); with
        // T = 2 and K = 2 the weights are 2·softmax(1, 0.5):
        // w1 = 2e/(e + e^0.5) = 1.2449186624037092, w2 = 2 - w1.
        let g = grads(dmatrix![1.0, 0.0; 0.0, 1.0]);
        let mut state = DwaState::new();
        aggregate_dwa(&g, &nalgebra::dvector![1.0, 2.0], &mut state, 2.0).unwrap();
        aggregate_dwa(&g, &nalgebra::dvector![2.0, 2.0], &mut state, 2.0).unwrap();
        let (_, w) =
            aggregate_dwa(&g, &nalgebra::dvector![9.0, 9.0], &mut state, 2.0).unwrap();
        assert_relative_eq!(w.values()[0], 1.244_918_662_403_709, max_relative = 1e-12);
        assert_relative_eq!(w.values()[1], 2.0 - 1.244_918_662_403_709, max_relative = 1e-12);
        let sum: f64 = w.values().iter().sum();
        assert_relative_eq!(sum, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn dwa_rejects_zero_past_loss() {
        let g = grads(dmatrix![1.0, 0.0; 0.0, 1.0]);
        let mut state = DwaState::new();
        aggregate_dwa(&g, &nalgebra::dvector![0.0, 2.0], &mut state, 2.0).unwrap();
        aggregate_dwa(&g, &nalgebra::dvector![1.0, 2.0], &mut state, 2.0).unwrap();
        let bad = aggregate_dwa(&g, &nalgebra::dvector![1.0, 2.0], &mut state, 2.0);
        assert!(matches!(bad, Err(FairGradError::Domain(_))));
    }

    #[test]
    fn min_norm_two_tasks_matches_closed_form() {
        // g1 = (1, 0), g2 = (-1, 1): gamma* = clip((g2-g1)·g2/|g1-g2|^2, 0, 1)
        // = clip(3/5, 0, 1) = 0.6 on g1's coefficient; d = (0.2, 0.4).
        let g = grads(dmatrix![1.0, -1.0; 0.0, 1.0]);
        let point = min_norm_point(&g);
        assert!(point.converged);
        assert!(point.iterations <= 2);
        assert_relative_eq!(point.weights[0], 0.6, max_relative = 1e-9);
        assert_relative_eq!(point.weights[1], 0.4, max_relative = 1e-9);
        assert_relative_eq!(point.direction[0], 0.2, max_relative = 1e-9);
        assert_relative_eq!(point.direction[1], 0.4, max_relative = 1e-9);
    }

    #[test]
    fn min_norm_reaches_zero_inside_hull() {
        // Opposite gradients: the hull contains the origin.
        let g = grads(dmatrix![1.0, -1.0]);
        let point = min_norm_point(&g);
        assert!(point.converged);
        assert!(point.norm < 1e-6, "norm {}", point.norm);
    }

    #[test]
    fn min_norm_single_task_is_the_gradient() {
        let g = grads(dmatrix![3.0; 4.0]);
        let point = min_norm_point(&g);
        assert!(point.converged);
        assert_relative_eq!(point.norm, 5.0, max_relative = 1e-12);
        assert_eq!(point.weights.len(), 1);
        assert_relative_eq!(point.weights[0], 1.0);
    }

    #[test]
    fn pcgrad_projects_conflicts_to_frozen_value() {
        // g1 = (1, 0), g2 = (-1, 1): g1 conflicts with g2 (dot -1) and is
        // projected to (0.5, 0.5); g2 conflicts with g1 (dot -1) and is
        // projected to (0, 1). Mean reduction: (0.25, 0.75) exactly.
        let g = grads(dmatrix![1.0, -1.0; 0.0, 1.0]);
        let mut rng = seeded(0);
        let (d, w) = aggregate_pcgrad(&g, &mut rng, PcgradReduce::Mean);
        assert_eq!(d.vector(), &nalgebra::dvector![0.25, 0.75]);
        assert_eq!(w.values(), &nalgebra::dvector![0.5, 0.5]);
        let mut rng = seeded(0);
        let (d_sum, w_sum) = aggregate_pcgrad(&g, &mut rng, PcgradReduce::Sum);
        assert_eq!(d_sum.vector(), &nalgebra::dvector![0.5, 1.5]);
        assert_eq!(w_sum.values(), &nalgebra::dvector![1.0, 1.0]);
    }

    #[test]
    fn pcgrad_leaves_agreeing_gradients_alone() {
        let g = grads(dmatrix![1.0, 2.0; 1.0, 0.5]);
        let mut rng = seeded(3);
        let (d, _) = aggregate_pcgrad(&g, &mut rng, PcgradReduce::Sum);
        assert_eq!(d.vector(), &nalgebra::dvector![3.0, 1.5]);
    }

    #[test]
    fn pcgrad_output_never_conflicts_pairwise() {
        // Postcondition: each projected gradient has nonnegative inner
        // product with every original gradient, so as K = 2 the reduced
        // direction cannot ascend either task.
        let g = grads(dmatrix![1.0, -1.0; 0.0, 1.0]);
        let mut rng = seeded(11);
        let (d, _) = aggregate_pcgrad(&g, &mut rng, PcgradReduce::Mean);
        for i in 0..2 {
            assert!(g.matrix().column(i).dot(d.vector()) >= -1e-10);
        }
    }

    #[test]
    fn fairgrad_direction_satisfies_weight_equation() {
        let g = grads(dmatrix![1.0, 0.5; -0.5, 1.5; 0.25, 0.0]);
        let out = aggregate_fairgrad(&g, 2.0, None, &SolverOptions::default(),
            SolverMode::LeastSquares).unwrap();
        assert!(out.report.converged);
        assert!(out.feasible);
        // Defining relation: (g_i . d)^{-alpha} = w_i at the solution.
        for i in 0..2 {
            let gain = g.matrix().column(i).dot(out.direction.vector());
            assert_relative_eq!(
                gain.powf(-2.0),
                out.weights.values()[i],
                max_relative = 1e-5
            );
        }
    }

    #[test]
    fn fairgrad_alpha_zero_equals_ls() {
        let g = grads(dmatrix![1.0, -1.0; 0.0, 1.0]);
        let out = aggregate_fairgrad(&g, 0.0, None, &SolverOptions::default(),
            SolverMode::LeastSquares).unwrap();
        let (d_ls, _) = aggregate_ls(&g);
        assert_eq!(out.direction.vector(), d_ls.vector());
        assert_eq!(out.report.mode, SolverMode::ClosedForm);
    }

    #[test]
    fn driver_reuses_warm_start_and_stays_deterministic() {
        let config = crate::types::ExperimentConfig {
            method: Method::FairGrad,
            alpha: 1.0,
            ..Default::default()
        };
        let g = grads(dmatrix![1.0, 0.2; 0.1, 2.0]);
        let losses = nalgebra::dvector![1.0, 1.0];
        let mut agg1 = Aggregator::new(&config);
        let first = agg1.aggregate(&losses, &g).unwrap();
        let second = agg1.aggregate(&losses, &g).unwrap();
        // Warm start at the solution: the second call converges instantly.
        assert_eq!(second.solver.as_ref().unwrap().iterations, 0);
        assert_eq!(first.weights.values(), second.weights.values());
    }
}
