//! Finite-difference validation of gradient oracles.

use nalgebra::{DMatrix, DVector};

use crate::error::{FairGradError, Result};
use crate::rng::RunRng;
use crate::types::MultiObjectiveProblem;

/// Default central-difference stencil width.
pub const DEFAULT_FD_STEP: f64 = 1e-6;

/// Central-difference gradient matrix `(m × K)` at `point`:
/// entry `(r, i)` is `(lᵢ(point + h eᵣ) - lᵢ(point - h eᵣ)) / 2h`.
pub fn central_difference(
    problem: &dyn MultiObjectiveProblem,
    point: &DVector<f64>,
    h: f64,
) -> Result<DMatrix<f64>> {
    if !h.is_finite() || h <= 0.0 {
        return Err(FairGradError::InvalidInput(format!(
            "stencil width must be finite and > 0, got {h}"
        )));
    }
    if point.len() != problem.parameter_dim() {
        return Err(FairGradError::InvalidInput(format!(
            "point length {} does not match parameter dim {}",
            point.len(),
            problem.parameter_dim()
        )));
    }
    let m = problem.parameter_dim();
    let k = problem.task_count();
    let mut g = DMatrix::zeros(m, k);
    for r in 0..m {
        let mut plus = point.clone();
        let mut minus = point.clone();
        plus[r] += h;
        minus[r] -= h;
        let lp = problem.losses(&plus);
        let lm = problem.losses(&minus);
        for i in 0..k {
            g[(r, i)] = (lp[i] - lm[i]) / (2.0 * h);
        }
    }
    Ok(g)
}

/// Outcome of a finite-difference sweep over a set of points.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// Largest relative error `|a - fd| / max(1, |a|, |fd|)` over all
    /// points and matrix entries.
    pub max_rel_error: f64,
    /// Where the maximum occurred.
    pub worst_point: DVector<f64>,
    /// `(parameter row, task column)` of the worst entry.
    pub worst_entry: (usize, usize),
    pub points_checked: usize,
}

/// Compares the analytic gradient oracle against central differences at
/// each point, tracking the worst relative error. The error metric
/// normalizes by `max(1, |a|, |fd|)` so tiny entries are judged absolutely
/// and large ones relatively.
pub fn check_gradients(
    problem: &dyn MultiObjectiveProblem,
    points: &[DVector<f64>],
    h: f64,
) -> Result<GradCheckReport> {
    if points.is_empty() {
        return Err(FairGradError::InvalidInput(
            "gradient check needs at least one point".into(),
        ));
    }
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_point: points[0].clone(),
        worst_entry: (0, 0),
        points_checked: 0,
    };
    for point in points {
        let analytic = problem.gradients(point)?;
        let fd = central_difference(problem, point, h)?;
        for r in 0..problem.parameter_dim() {
            for i in 0..problem.task_count() {
                let a = analytic.matrix()[(r, i)];
                let b = fd[(r, i)];
                let err = (a - b).abs() / a.abs().max(b.abs()).max(1.0);
                if err > report.max_rel_error {
                    report.max_rel_error = err;
                    report.worst_point = point.clone();
                    report.worst_entry = (r, i);
                }
            }
        }
        report.points_checked += 1;
    }
    Ok(report)
}

/// Samples points in `[-10, 10]²` for checking the toy landscape, rejecting
/// draws within `margin` of its kink lines (`x₂ = 0` where the gates
/// switch, and `|uᵢ| = 5·10⁻⁶` where the log walls clamp) so the
/// two-sided stencil stays on one smooth piece.
pub fn sample_toy_check_points(
    count: usize,
    margin: f64,
    rng: &mut RunRng,
) -> Vec<DVector<f64>> {
    use rand::Rng;
    let mut points = Vec::with_capacity(count);
    while points.len() < count {
        let x1 = -10.0 + 20.0 * rng.random::<f64>();
        let x2 = -10.0 + 20.0 * rng.random::<f64>();
        if x2.abs() <= margin {
            continue;
        }
        let th = x2.tanh();
        let u1: f64 = -0.5 * x1 - 3.5 + th;
        let u2: f64 = -0.5 * x1 + 3.5 + th;
        if u1.abs() <= margin + 5e-6 || u2.abs() <= margin + 5e-6 {
            continue;
        }
        points.push(DVector::from_vec(vec![x1, x2]));
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::toybench::{quadratic_problem, ToyProblem};
    use nalgebra::dvector;

    #[test]
    fn quadratic_oracle_passes_at_tight_tolerance() {
        let mut rng = seeded(1);
        let problem = quadratic_problem(3, 5, 10.0, &mut rng);
        let points: Vec<DVector<f64>> = (0..20)
            .map(|_| DVector::from_fn(5, |_, _| 4.0 * crate::rng::standard_normal(&mut rng)))
            .collect();
        let report = check_gradients(&problem, &points, DEFAULT_FD_STEP).unwrap();
        assert!(report.points_checked == 20);
        assert!(
            report.max_rel_error < 1e-5,
            "max error {}",
            report.max_rel_error
        );
    }

    #[test]
    fn toy_oracle_passes_away_from_kinks() {
        let mut rng = seeded(2);
        let points = sample_toy_check_points(100, 1e-3, &mut rng);
        let report = check_gradients(&ToyProblem, &points, DEFAULT_FD_STEP).unwrap();
        assert!(
            report.max_rel_error < 1e-5,
            "max error {} at {:?} entry {:?}",
            report.max_rel_error,
            report.worst_point,
            report.worst_entry
        );
    }

    #[test]
    fn a_corrupted_oracle_is_caught() {
        struct Corrupt;
        impl MultiObjectiveProblem for Corrupt {
            fn parameter_dim(&self) -> usize {
                2
            }
            fn task_count(&self) -> usize {
                1
            }
            fn losses(&self, p: &DVector<f64>) -> DVector<f64> {
                dvector![p[0] * p[0] + p[1]]
            }
            fn gradients(&self, p: &DVector<f64>) -> Result<crate::types::GradientMatrix> {
                // Wrong by a factor of 2 in the first coordinate.
                crate::types::GradientMatrix::new(nalgebra::dmatrix![4.0 * p[0]; 1.0])
            }
        }
        let report =
            check_gradients(&Corrupt, &[dvector![1.0, 1.0]], DEFAULT_FD_STEP).unwrap();
        assert!(report.max_rel_error > 0.4);
        assert_eq!(report.worst_entry, (0, 0));
    }

    #[test]
    fn stencil_width_is_validated() {
        assert!(central_difference(&ToyProblem, &dvector![1.0, 1.0], 0.0).is_err());
        assert!(central_difference(&ToyProblem, &dvector![1.0], 1e-6).is_err());
    }

    #[test]
    fn sampled_points_respect_the_margins() {
        let mut rng = seeded(3);
        let points = sample_toy_check_points(200, 1e-3, &mut rng);
        assert_eq!(points.len(), 200);
        for p in &points {
            assert!(p[1].abs() > 1e-3);
            let th = p[1].tanh();
            assert!((-0.5 * p[0] - 3.5 + th).abs() > 1e-3);
            assert!((-0.5 * p[0] + 3.5 + th).abs() > 1e-3);
        }
    }
}
