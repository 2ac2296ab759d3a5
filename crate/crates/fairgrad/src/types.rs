//! Core types shared across the crate.
//!
//! Conventions: a problem with `m` parameters and `K` tasks produces loss
//! vectors of length `K` and a gradient matrix with `m` rows and `K` columns,
//! column `i` being the gradient of task `i`. The Gram matrix `GᵀG` is the
//! `K`-by-`K` summary the weight solvers consume. All update directions `d`
//! live in parameter space and are applied as `θ ← θ − η d`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{FairGradError, Result};

/// Default elementwise floor applied to task weights by the solvers.
pub const DEFAULT_W_MIN: f64 = 1e-8;

/// Per-task gradients stacked as columns: `m` rows, `K` columns.
///
/// Construction validates that every entry is finite and both dimensions are
/// nonzero, so downstream code can rely on a well-formed matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientMatrix(DMatrix<f64>);

impl GradientMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(FairGradError::InvalidInput(format!(
                "gradient matrix must be nonempty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if !matrix.iter().all(|v| v.is_finite()) {
            return Err(FairGradError::InvalidInput(
                "gradient matrix contains a non-finite entry".into(),
            ));
        }
        Ok(Self(matrix))
    }

    /// Columns-as-tasks view of the underlying matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Number of parameters `m` (rows).
    pub fn parameter_dim(&self) -> usize {
        self.0.nrows()
    }

    /// Number of tasks `K` (columns).
    pub fn task_count(&self) -> usize {
        self.0.ncols()
    }

    /// Gradient of task `i` as an owned vector.
    pub fn task_gradient(&self, i: usize) -> DVector<f64> {
        self.0.column(i).into_owned()
    }
}

/// Symmetric positive semidefinite `K`-by-`K` matrix `GᵀG`.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix(DMatrix<f64>);

impl GramMatrix {
    /// Validates symmetry (relative to the largest magnitude entry) and
    /// positive semidefiniteness (smallest eigenvalue above `-1e-10 · trace`).
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(FairGradError::InvalidInput(format!(
                "gram matrix must be square and nonempty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if !matrix.iter().all(|v| v.is_finite()) {
            return Err(FairGradError::InvalidInput(
                "gram matrix contains a non-finite entry".into(),
            ));
        }
        let scale = matrix.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for i in 0..matrix.nrows() {
            for j in (i + 1)..matrix.ncols() {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-12 * scale.max(1e-300) {
                    return Err(FairGradError::InvalidInput(format!(
                        "gram matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let min_eig = matrix
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &v| a.min(v));
        let trace = matrix.trace();
        if min_eig < -1e-10 * trace.abs().max(1e-300) {
            return Err(FairGradError::InvalidInput(format!(
                "gram matrix is not positive semidefinite: min eigenvalue {min_eig:e}"
            )));
        }
        Ok(Self(matrix))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Number of tasks `K`.
    pub fn task_count(&self) -> usize {
        self.0.nrows()
    }
}

/// Builds `GᵀG` from a gradient matrix.
///
/// Entries are computed once per unordered pair and mirrored, so the result
/// is exactly symmetric; positive semidefiniteness holds by construction.
pub fn build_gram(g: &GradientMatrix) -> GramMatrix {
    let k = g.task_count();
    let m = g.matrix();
    let mut a = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v = m.column(i).dot(&m.column(j));
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    GramMatrix(a)
}

/// Strictly positive task weights produced by the weight solvers.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector(DVector<f64>);

impl WeightVector {
    /// Validates that every entry is finite and at least `floor`
    /// (pass `0.0` for solutions known positive in exact arithmetic).
    pub fn new(values: DVector<f64>, floor: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(FairGradError::InvalidInput("weight vector is empty".into()));
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(FairGradError::InvalidInput(format!(
                    "weight {i} is not finite"
                )));
            }
            if v < floor || v <= 0.0 {
                return Err(FairGradError::Domain(format!(
                    "weight {i} = {v:e} is below the floor {floor:e}"
                )));
            }
        }
        Ok(Self(values))
    }

    /// All-ones weights for `k` tasks.
    pub fn uniform(k: usize) -> Self {
        Self(DVector::from_element(k, 1.0))
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A parameter-space update direction with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct Direction(DVector<f64>);

impl Direction {
    pub fn new(vector: DVector<f64>) -> Result<Self> {
        if !vector.iter().all(|v| v.is_finite()) {
            return Err(FairGradError::InvalidInput(
                "direction contains a non-finite entry".into(),
            ));
        }
        Ok(Self(vector))
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

/// Callback contract for a differentiable multi-task problem.
///
/// Implementations must be pure functions of the query point: the optimizer
/// and the sweep driver call them concurrently from several threads.
pub trait MultiObjectiveProblem: Sync {
    /// Number of parameters `m`.
    fn parameter_dim(&self) -> usize;

    /// Number of tasks `K`.
    fn task_count(&self) -> usize;

    /// The `K` task losses at `point`.
    fn losses(&self, point: &DVector<f64>) -> DVector<f64>;

    /// Per-task gradients at `point`; errs when an entry overflows to
    /// a non-finite value.
    fn gradients(&self, point: &DVector<f64>) -> Result<GradientMatrix>;
}

/// Aggregation method selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Alpha-fair weights from the weight equation `GᵀG w = w^{-1/α}`.
    FairGrad,
    /// Linear scalarization: sum of task gradients.
    Ls,
    /// Scale-invariant baseline: gradients of log losses.
    Si,
    /// Random loss weighting: softmax of standard normal draws each step.
    Rlw,
    /// Dynamic weight average over loss-ratio history.
    Dwa,
    /// Min-norm point of the gradient convex hull.
    Mgda,
    /// Gradient surgery: project out conflicting components pairwise.
    PcGrad,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Method::FairGrad => "fairgrad",
            Method::Ls => "ls",
            Method::Si => "si",
            Method::Rlw => "rlw",
            Method::Dwa => "dwa",
            Method::Mgda => "mgda",
            Method::PcGrad => "pcgrad",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for Method {
    type Err = FairGradError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fairgrad" => Ok(Method::FairGrad),
            "ls" => Ok(Method::Ls),
            "si" => Ok(Method::Si),
            "rlw" => Ok(Method::Rlw),
            "dwa" => Ok(Method::Dwa),
            "mgda" => Ok(Method::Mgda),
            "pcgrad" => Ok(Method::PcGrad),
            other => Err(FairGradError::InvalidInput(format!(
                "unknown method `{other}` (expected one of fairgrad, ls, si, rlw, dwa, mgda, pcgrad)"
            ))),
        }
    }
}

/// Step-size rule used by the optimizer loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Constant `learning_rate`.
    Fixed,
    /// Smoothness-based rule `η = Σ wᵢ^{-1/α} / (L K Σ wᵢ^{1-1/α})`, which
    /// guarantees monotone decrease of the average loss; fairgrad only.
    Theoretical,
    /// Adaptive moment estimation driven by the aggregated direction.
    AdaptiveMoment,
}

impl std::fmt::Display for StepRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            StepRule::Fixed => "fixed",
            StepRule::Theoretical => "theoretical",
            StepRule::AdaptiveMoment => "adaptive_moment",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for StepRule {
    type Err = FairGradError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(StepRule::Fixed),
            "theoretical" => Ok(StepRule::Theoretical),
            "adaptive_moment" => Ok(StepRule::AdaptiveMoment),
            other => Err(FairGradError::InvalidInput(format!(
                "unknown step rule `{other}` (expected fixed, theoretical, adaptive_moment)"
            ))),
        }
    }
}

/// How the weight equation is solved.
///
/// `ClosedForm` is reported by the solver when `α = 0` collapses the
/// equation to all-ones weights; it is not selectable in configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    /// Damped Newton iteration on the weight-equation residual.
    LeastSquares,
    /// Projected gradient descent on the squared residual norm.
    SgdInner,
    /// Exact closed form (solver-reported only).
    ClosedForm,
}

impl std::fmt::Display for SolverMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            SolverMode::LeastSquares => "least_squares",
            SolverMode::SgdInner => "sgd_inner",
            SolverMode::ClosedForm => "closed_form",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for SolverMode {
    type Err = FairGradError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "least_squares" => Ok(SolverMode::LeastSquares),
            "sgd_inner" => Ok(SolverMode::SgdInner),
            "closed_form" => Ok(SolverMode::ClosedForm),
            other => Err(FairGradError::InvalidInput(format!(
                "unknown solver mode `{other}` (expected least_squares or sgd_inner)"
            ))),
        }
    }
}

/// Reduction applied to the projected gradients in the surgery baseline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PcgradReduce {
    Mean,
    Sum,
}

impl std::fmt::Display for PcgradReduce {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PcgradReduce::Mean => "mean",
            PcgradReduce::Sum => "sum",
        })
    }
}

impl std::str::FromStr for PcgradReduce {
    type Err = FairGradError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(PcgradReduce::Mean),
            "sum" => Ok(PcgradReduce::Sum),
            other => Err(FairGradError::InvalidInput(format!(
                "unknown reduction `{other}` (expected mean or sum)"
            ))),
        }
    }
}

/// Full description of one experiment run.
///
/// The struct maps one-to-one onto the flat JSON config files the CLI reads;
/// every field has a default so partial files stay valid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Fairness level of the weight equation; `0` recovers plain gradient
    /// summation and larger values approach max-min behaviour.
    pub alpha: f64,
    pub method: Method,
    pub step_rule: StepRule,
    pub learning_rate: f64,
    /// Certified smoothness constant `L` consumed by the theoretical rule.
    pub smoothness_l: f64,
    pub max_steps: usize,
    /// Early-stop threshold on the simplex min-norm stationarity measure.
    pub stationarity_tol: f64,
    /// Evaluate the stationarity measure every `n` steps (1 = every step);
    /// unmeasured steps log NaN.
    pub check_every: usize,
    pub seed: u64,
    /// Elementwise floor for solved task weights.
    pub w_min: f64,
    pub solver_mode: SolverMode,
    /// Weight-solver residual tolerance per task: `tol = factor · K`.
    pub solver_tol_factor: f64,
    /// When set, losses are rescaled before aggregation through the power
    /// transform `l ↦ l^{1-a} / (1-a)` (gradients through `l^{-a}`) for
    /// `a < 1`, or the log transform `l ↦ ln l` at exactly `a = 1`.
    pub fair_loss_alpha: Option<f64>,
    /// Optional positive floor clamped onto losses before the power
    /// transform; without it a nonpositive loss aborts the run.
    pub loss_floor: Option<f64>,
    pub pcgrad_reduce: PcgradReduce,
    pub dwa_temperature: f64,
    /// Start point; runs fail validation when it is absent and the caller
    /// provides no problem-specific default.
    pub initial_point: Option<Vec<f64>>,
}

impl ExperimentConfig {
    /// Radius of the direction-space ball in the underlying constrained
    /// formulation of the fair direction. Recorded for documentation; no
    /// code path enforces it, because the weight equation fixes the
    /// direction's scale on its own.
    pub const DIRECTION_BALL_RADIUS: f64 = 1.0;

    /// Checks every field range and cross-field requirement, naming the
    /// offending field in the error.
    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(FairGradError::Config {
                field: "alpha",
                message: format!("must be finite and >= 0, got {}", self.alpha),
            });
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(FairGradError::Config {
                field: "learning_rate",
                message: format!("must be finite and > 0, got {}", self.learning_rate),
            });
        }
        if !self.smoothness_l.is_finite() || self.smoothness_l <= 0.0 {
            return Err(FairGradError::Config {
                field: "smoothness_l",
                message: format!("must be finite and > 0, got {}", self.smoothness_l),
            });
        }
        if self.max_steps == 0 {
            return Err(FairGradError::Config {
                field: "max_steps",
                message: "must be at least 1".into(),
            });
        }
        if !self.stationarity_tol.is_finite() || self.stationarity_tol <= 0.0 {
            return Err(FairGradError::Config {
                field: "stationarity_tol",
                message: format!("must be finite and > 0, got {}", self.stationarity_tol),
            });
        }
        if self.check_every == 0 {
            return Err(FairGradError::Config {
                field: "check_every",
                message: "must be at least 1".into(),
            });
        }
        if !self.w_min.is_finite() || self.w_min <= 0.0 {
            return Err(FairGradError::Config {
                field: "w_min",
                message: format!("must be finite and > 0, got {}", self.w_min),
            });
        }
        if self.solver_mode == SolverMode::ClosedForm {
            return Err(FairGradError::Config {
                field: "solver_mode",
                message: "closed_form is reported by the solver for alpha = 0, not selectable"
                    .into(),
            });
        }
        if !self.solver_tol_factor.is_finite() || self.solver_tol_factor <= 0.0 {
            return Err(FairGradError::Config {
                field: "solver_tol_factor",
                message: format!("must be finite and > 0, got {}", self.solver_tol_factor),
            });
        }
        if let Some(a) = self.fair_loss_alpha {
            if !a.is_finite() || a > 1.0 {
                return Err(FairGradError::Config {
                    field: "fair_loss_alpha",
                    message: format!("must be finite and <= 1, got {a}"),
                });
            }
        }
        if let Some(floor) = self.loss_floor {
            if !floor.is_finite() || floor <= 0.0 {
                return Err(FairGradError::Config {
                    field: "loss_floor",
                    message: format!("must be finite and > 0, got {floor}"),
                });
            }
        }
        if !self.dwa_temperature.is_finite() || self.dwa_temperature <= 0.0 {
            return Err(FairGradError::Config {
                field: "dwa_temperature",
                message: format!("must be finite and > 0, got {}", self.dwa_temperature),
            });
        }
        if self.step_rule == StepRule::Theoretical {
            if self.method != Method::FairGrad {
                return Err(FairGradError::Config {
                    field: "step_rule",
                    message: "theoretical step sizes are defined only for method = fairgrad"
                        .into(),
                });
            }
            if self.alpha == 0.0 {
                return Err(FairGradError::Config {
                    field: "step_rule",
                    message: "theoretical step sizes require alpha > 0".into(),
                });
            }
        }
        if let Some(p) = &self.initial_point {
            if p.is_empty() || !p.iter().all(|v| v.is_finite()) {
                return Err(FairGradError::Config {
                    field: "initial_point",
                    message: "must be nonempty with finite entries".into(),
                });
            }
        }
        Ok(())
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            method: Method::FairGrad,
            step_rule: StepRule::Fixed,
            learning_rate: 1e-3,
            smoothness_l: 1.0,
            max_steps: 1000,
            stationarity_tol: 1e-3,
            check_every: 1,
            seed: 0,
            w_min: DEFAULT_W_MIN,
            solver_mode: SolverMode::LeastSquares,
            solver_tol_factor: 1e-8,
            fair_loss_alpha: None,
            loss_floor: None,
            pcgrad_reduce: PcgradReduce::Mean,
            dwa_temperature: 2.0,
            initial_point: None,
        }
    }
}

/// One logged optimizer iteration.
#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub step: usize,
    /// Parameters before the step was applied.
    pub point: DVector<f64>,
    /// Raw task losses at `point` (pre-transform when a loss rescale is on).
    pub losses: DVector<f64>,
    /// Scalarization weights the aggregator applied this step.
    pub weights: DVector<f64>,
    pub direction_norm: f64,
    /// Simplex min-norm measure, NaN on steps thinned out by `check_every`.
    pub stationarity: f64,
    /// Smallest eigenvalue of the Gram matrix, clamped at zero.
    pub sigma_min: f64,
    pub step_size: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn gradient_matrix_rejects_non_finite() {
        let err = GradientMatrix::new(dmatrix![1.0, 2.0; f64::NAN, 3.0]);
        assert!(matches!(err, Err(FairGradError::InvalidInput(_))));
    }

    #[test]
    fn build_gram_is_exactly_symmetric_and_psd() {
        let g = GradientMatrix::new(dmatrix![
            0.3, -1.2, 0.7;
            1.9, 0.4, -0.6;
            -0.8, 2.2, 0.1;
        ])
        .unwrap();
        let a = build_gram(&g);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(a.matrix()[(i, j)], a.matrix()[(j, i)]);
            }
        }
        // Validation re-checks symmetry and PSD on the same data.
        GramMatrix::new(a.matrix().clone()).unwrap();
    }

    #[test]
    fn gram_validation_rejects_asymmetry_and_indefiniteness() {
        let asym = GramMatrix::new(dmatrix![1.0, 0.5; 0.4, 1.0]);
        assert!(matches!(asym, Err(FairGradError::InvalidInput(_))));
        let indef = GramMatrix::new(dmatrix![1.0, 2.0; 2.0, 1.0]);
        assert!(matches!(indef, Err(FairGradError::InvalidInput(_))));
    }

    #[test]
    fn weight_vector_enforces_floor() {
        let ok = WeightVector::new(dvector![1.0, 1e-8], 1e-8);
        assert!(ok.is_ok());
        let low = WeightVector::new(dvector![1.0, 1e-9], 1e-8);
        assert!(matches!(low, Err(FairGradError::Domain(_))));
    }

    #[test]
    fn config_default_validates() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn config_rejects_theoretical_rule_off_fairgrad() {
        let config = ExperimentConfig {
            method: Method::Ls,
            step_rule: StepRule::Theoretical,
            ..ExperimentConfig::default()
        };
        let err = config.validate().unwrap_err();
        assert!(matches!(err, FairGradError::Config { field: "step_rule", .. }));
    }

    #[test]
    fn config_rejects_alpha_zero_theoretical() {
        let config = ExperimentConfig {
            alpha: 0.0,
            step_rule: StepRule::Theoretical,
            ..ExperimentConfig::default()
        };
        assert!(config.validate().is_err());
    }

    #[test]
    fn config_rejects_reported_only_solver_mode() {
        let config = ExperimentConfig {
            solver_mode: SolverMode::ClosedForm,
            ..ExperimentConfig::default()
        };
        let err = config.validate().unwrap_err();
        assert!(matches!(err, FairGradError::Config { field: "solver_mode", .. }));
    }

    #[test]
    fn config_round_trips_through_flat_json() {
        let config = ExperimentConfig {
            alpha: 2.0,
            method: Method::Mgda,
            step_rule: StepRule::AdaptiveMoment,
            fair_loss_alpha: Some(0.5),
            initial_point: Some(vec![-8.5, 7.5]),
            ..ExperimentConfig::default()
        };
        let text = serde_json::to_string(&config).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn config_json_rejects_unknown_fields() {
        let err = serde_json::from_str::<ExperimentConfig>("{\"alphaa\": 2.0}");
        assert!(err.is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in [
            Method::FairGrad,
            Method::Ls,
            Method::Si,
            Method::Rlw,
            Method::Dwa,
            Method::Mgda,
            Method::PcGrad,
        ] {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
    }
}
