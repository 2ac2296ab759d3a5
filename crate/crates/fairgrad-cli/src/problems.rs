//! Construction of the bundled benchmark problems for the CLI.

use fairgrad::rng::{child_seed, seeded, standard_normal};
use fairgrad::toybench::{quadratic_problem, toy_start, ToyProblem};
use fairgrad::types::{GradientMatrix, MultiObjectiveProblem};
use fairgrad::Result;
use nalgebra::DVector;

/// Stream index reserved for drawing the problem instance itself, so the
/// optimizer's own randomness never shifts the landscape.
const PROBLEM_STREAM: u64 = 1;

/// A constructed benchmark problem plus the metadata the commands need.
pub struct ProblemSpec {
    pub problem: Box<dyn MultiObjectiveProblem>,
    /// Start used when neither the config file nor a flag provides one.
    pub default_start: Vec<f64>,
    /// Name of the toy start backing `default_start`, when one was used.
    pub start_name: Option<String>,
    /// Exact gradient-smoothness constant when the problem knows it.
    pub smoothness: Option<f64>,
}

/// Builds a bundled problem. `seed` only affects the quadratics instance
/// (drawn from a dedicated child stream); the toy landscape is fixed.
pub fn build_problem(
    kind: &str,
    start: Option<&str>,
    tasks: usize,
    dim: usize,
    cond: f64,
    seed: u64,
) -> std::result::Result<ProblemSpec, String> {
    match kind {
        "toy" => {
            let name = start.unwrap_or("p1");
            let point = toy_start(name).ok_or_else(|| {
                format!("unknown toy start `{name}` (expected one of p1..p5)")
            })?;
            Ok(ProblemSpec {
                problem: Box::new(ToyProblem),
                default_start: point.iter().cloned().collect(),
                start_name: Some(name.to_string()),
                smoothness: None,
            })
        }
        "quadratics" => {
            if let Some(name) = start {
                return Err(format!(
                    "--start {name} only applies to the toy problem; use --x0 for quadratics"
                ));
            }
            if tasks < 1 || dim < 1 {
                return Err("--tasks and --dim must be at least 1".into());
            }
            if !(cond.is_finite() && cond >= 0.1) {
                return Err(format!("--cond must be a finite value >= 0.1, got {cond}"));
            }
            let mut rng = seeded(child_seed(seed, PROBLEM_STREAM));
            let problem = quadratic_problem(tasks, dim, cond, &mut rng);
            let smoothness = problem.smoothness();
            Ok(ProblemSpec {
                problem: Box::new(problem),
                default_start: vec![0.0; dim],
                start_name: None,
                smoothness: Some(smoothness),
            })
        }
        other => Err(format!(
            "unknown problem `{other}` (expected toy or quadratics)"
        )),
    }
}

/// Sample points at which to finite-difference-check a problem's gradients.
pub fn sample_check_points(
    kind: &str,
    dim: usize,
    count: usize,
    seed: u64,
) -> std::result::Result<Vec<DVector<f64>>, String> {
    let mut rng = seeded(seed);
    match kind {
        "toy" => Ok(fairgrad::gradcheck::sample_toy_check_points(
            count, 1e-3, &mut rng,
        )),
        "quadratics" => Ok((0..count)
            .map(|_| DVector::from_fn(dim, |_, _| 2.0 * standard_normal(&mut rng)))
            .collect()),
        other => Err(format!(
            "unknown problem `{other}` (expected toy or quadratics)"
        )),
    }
}

/// Test hook: perturbs one gradient entry so the finite-difference check
/// must fail. Exercises the negative-control path of `checkgrad`.
pub struct CorruptGradients(pub Box<dyn MultiObjectiveProblem>);

impl MultiObjectiveProblem for CorruptGradients {
    fn parameter_dim(&self) -> usize {
        self.0.parameter_dim()
    }

    fn task_count(&self) -> usize {
        self.0.task_count()
    }

    fn losses(&self, point: &DVector<f64>) -> DVector<f64> {
        self.0.losses(point)
    }

    fn gradients(&self, point: &DVector<f64>) -> Result<GradientMatrix> {
        let clean = self.0.gradients(point)?;
        let mut matrix = clean.matrix().clone();
        matrix[(0, 0)] += 1e-3;
        GradientMatrix::new(matrix)
    }
}
