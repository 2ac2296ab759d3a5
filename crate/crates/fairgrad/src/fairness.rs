//! Alpha-fair utilities, fair loss rescaling, and resource allocation.
//!
//! The scalar utility family `u_α` trades total throughput against equality:
//! `α = 0` is utilitarian, `α = 1` proportional fairness, `α → ∞` max-min.
//! The same family drives the loss transform (applied to task losses before
//! aggregation) and the single-link allocation benchmark used to sanity-check
//! the fairness semantics end to end.

use nalgebra::DVector;

use crate::error::{FairGradError, Result};
use crate::rng::RunRng;
use crate::types::GradientMatrix;

/// Smallest allocation any user may receive; capacities and caps below
/// this floor make the problem numerically meaningless.
pub const ALLOCATION_FLOOR: f64 = 1e-9;

/// Alpha-fair utility of a positive scalar:
/// `u_α(x) = x^{1-α}/(1-α)` for `α ≠ 1` and `ln x` at `α = 1`.
///
/// The family is continuous in `α` up to the constant `1/(1-α)`: anchored
/// differences `u_α(x) - u_α(1)` converge to `ln x` as `α → 1`.
pub fn alpha_utility(x: f64, alpha: f64) -> Result<f64> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(FairGradError::InvalidInput(format!(
            "alpha must be finite and >= 0, got {alpha}"
        )));
    }
    if !x.is_finite() || x <= 0.0 {
        return Err(FairGradError::Domain(format!(
            "utility requires x > 0, got {x}"
        )));
    }
    if alpha == 1.0 {
        Ok(x.ln())
    } else {
        Ok(x.powf(1.0 - alpha) / (1.0 - alpha))
    }
}

/// Monotone rescaling applied to task losses before aggregation.
///
/// Both variants are strictly increasing on `(0, ∞)`, so they preserve
/// Pareto dominance between loss vectors in either direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LossTransform {
    /// `l ↦ l^{1-a} / (1-a)` with `a < 1` (gradients scale by `l^{-a}`).
    Power { alpha: f64 },
    /// `l ↦ ln l` (gradients scale by `1/l`), the `a = 1` member.
    Log,
}

impl LossTransform {
    fn validate(&self) -> Result<()> {
        if let LossTransform::Power { alpha } = self {
            if !alpha.is_finite() || *alpha >= 1.0 {
                return Err(FairGradError::InvalidInput(format!(
                    "power transform requires alpha < 1, got {alpha}"
                )));
            }
        }
        Ok(())
    }

    /// The transformed scalar loss; errs on nonpositive input.
    pub fn apply(&self, loss: f64) -> Result<f64> {
        self.validate()?;
        if !loss.is_finite() || loss <= 0.0 {
            return Err(FairGradError::Domain(format!(
                "loss transform requires positive losses, got {loss} \
                 (set a loss floor to clamp)"
            )));
        }
        Ok(match self {
            LossTransform::Power { alpha } => loss.powf(1.0 - alpha) / (1.0 - alpha),
            LossTransform::Log => loss.ln(),
        })
    }

    /// The derivative factor `dl̃/dl` at `loss`, used for gradient rescaling.
    pub fn derivative(&self, loss: f64) -> Result<f64> {
        self.validate()?;
        if !loss.is_finite() || loss <= 0.0 {
            return Err(FairGradError::Domain(format!(
                "loss transform requires positive losses, got {loss}"
            )));
        }
        Ok(match self {
            LossTransform::Power { alpha } => loss.powf(-alpha),
            LossTransform::Log => 1.0 / loss,
        })
    }
}

/// Applies the transform elementwise to a loss vector.
pub fn transform_losses(losses: &DVector<f64>, transform: LossTransform) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(losses.len());
    for i in 0..losses.len() {
        out[i] = transform.apply(losses[i])?;
    }
    Ok(out)
}

/// Rescales gradient columns by the chain-rule factor of the transform:
/// column `i` multiplies by `lᵢ^{-a}` (power) or `1/lᵢ` (log).
pub fn transform_gradients(
    g: &GradientMatrix,
    losses: &DVector<f64>,
    transform: LossTransform,
) -> Result<GradientMatrix> {
    if losses.len() != g.task_count() {
        return Err(FairGradError::InvalidInput(format!(
            "loss length {} does not match task count {}",
            losses.len(),
            g.task_count()
        )));
    }
    let mut m = g.matrix().clone();
    for i in 0..g.task_count() {
        let factor = transform.derivative(losses[i])?;
        for r in 0..m.nrows() {
            m[(r, i)] *= factor;
        }
    }
    GradientMatrix::new(m)
}

/// Elementwise `max(loss, floor)`, the escape hatch for losses that dip
/// nonpositive where the transform is undefined.
pub fn clamp_losses(losses: &DVector<f64>, floor: f64) -> DVector<f64> {
    losses.map(|v| v.max(floor))
}

/// Single shared link: split `capacity` across `users`, each receiving a
/// positive amount up to its optional per-user cap, maximizing the
/// (optionally weighted) sum of alpha-fair utilities.
#[derive(Clone, Debug)]
pub struct AllocationProblem {
    pub users: usize,
    pub capacity: f64,
    /// Per-user upper bounds; `None` leaves every user unbounded.
    pub caps: Option<Vec<f64>>,
    /// Per-user positive utility weights; `None` means all ones.
    pub weights: Option<Vec<f64>>,
}

impl AllocationProblem {
    pub fn new(users: usize, capacity: f64) -> Self {
        Self {
            users,
            capacity,
            caps: None,
            weights: None,
        }
    }

    pub fn with_caps(mut self, caps: Vec<f64>) -> Self {
        self.caps = Some(caps);
        self
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = Some(weights);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.users == 0 {
            return Err(FairGradError::InvalidInput("users must be >= 1".into()));
        }
        if !self.capacity.is_finite() || self.capacity < self.users as f64 * ALLOCATION_FLOOR {
            return Err(FairGradError::InvalidInput(format!(
                "capacity {} cannot give every user the floor {ALLOCATION_FLOOR:e}",
                self.capacity
            )));
        }
        if let Some(caps) = &self.caps {
            if caps.len() != self.users {
                return Err(FairGradError::InvalidInput(format!(
                    "got {} caps for {} users",
                    caps.len(),
                    self.users
                )));
            }
            for (i, &c) in caps.iter().enumerate() {
                if c.is_nan() || c < ALLOCATION_FLOOR {
                    return Err(FairGradError::InvalidInput(format!(
                        "cap {i} = {c} is below the floor"
                    )));
                }
            }
        }
        if let Some(weights) = &self.weights {
            if weights.len() != self.users {
                return Err(FairGradError::InvalidInput(format!(
                    "got {} weights for {} users",
                    weights.len(),
                    self.users
                )));
            }
            for (i, &w) in weights.iter().enumerate() {
                if !w.is_finite() || w <= 0.0 {
                    return Err(FairGradError::InvalidInput(format!(
                        "weight {i} = {w} must be finite and positive"
                    )));
                }
            }
        }
        Ok(())
    }

    fn cap(&self, i: usize) -> f64 {
        self.caps.as_ref().map_or(f64::INFINITY, |c| c[i])
    }

    fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }
}

/// Exact alpha-fair allocation on a single link by waterfilling.
///
/// For `α > 0` the optimum satisfies `xᵢ = min(capᵢ, t · aᵢ^{1/α})` for a
/// level `t` chosen so the capacity is exhausted (or every cap binds). The
/// level is bracketed by doubling, narrowed by bisection, and finished
/// algebraically — `t = (c - Σ_capped caps) / Σ_free aᵢ^{1/α}` once the
/// capped set stabilizes — so the result is correct to machine precision,
/// which the proportional-fairness check requires. `α = 0` without weights
/// returns the `α → 0⁺` limit (equal shares, waterfilled against caps);
/// with weights the utilitarian problem is winner-take-all and unsupported.
pub fn solve_allocation(problem: &AllocationProblem, alpha: f64) -> Result<DVector<f64>> {
    problem.validate()?;
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(FairGradError::InvalidInput(format!(
            "alpha must be finite and >= 0, got {alpha}"
        )));
    }
    if alpha == 0.0 && problem.weights.is_some() {
        return Err(FairGradError::Unsupported(
            "weighted allocation at alpha = 0 is winner-take-all with no fair optimum".into(),
        ));
    }

    let k = problem.users;
    let c = problem.capacity;

    // Per-user slope of the waterfilling line: x_i = t * s_i until the cap.
    let s: Vec<f64> = (0..k)
        .map(|i| {
            if alpha == 0.0 {
                1.0
            } else {
                problem.weight(i).powf(1.0 / alpha)
            }
        })
        .collect();

    // Degenerate case: the caps already fit under the capacity.
    if let Some(caps) = &problem.caps {
        let total: f64 = caps.iter().sum();
        if caps.iter().all(|v| v.is_finite()) && total <= c {
            return Ok(DVector::from_vec(caps.clone()));
        }
    }

    let fill = |t: f64| -> f64 { (0..k).map(|i| (t * s[i]).min(problem.cap(i))).sum() };

    // Bracket the level, then bisect.
    let mut lo = 0.0f64;
    let mut hi = c / s.iter().sum::<f64>();
    while fill(hi) < c {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(FairGradError::InvalidInput(
                "capacity cannot be reached under the given caps".into(),
            ));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if fill(mid) < c {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    // Algebraic finish: freeze the capped set and solve for t exactly,
    // iterating in case the refined level moves a user across its cap.
    let mut t = hi;
    for _ in 0..=k {
        let capped: Vec<bool> = (0..k).map(|i| t * s[i] >= problem.cap(i)).collect();
        let capped_total: f64 = (0..k)
            .filter(|&i| capped[i])
            .map(|i| problem.cap(i))
            .sum();
        let free_slope: f64 = (0..k).filter(|&i| !capped[i]).map(|i| s[i]).sum();
        if free_slope == 0.0 {
            break; // every user capped: handled by the degenerate case above
        }
        let refined = (c - capped_total) / free_slope;
        let stable = (0..k).all(|i| (refined * s[i] >= problem.cap(i)) == capped[i]);
        t = refined;
        if stable {
            break;
        }
    }

    let x = DVector::from_iterator(k, (0..k).map(|i| (t * s[i]).min(problem.cap(i))));
    for (i, &v) in x.iter().enumerate() {
        if !v.is_finite() || v <= 0.0 {
            return Err(FairGradError::Domain(format!(
                "allocation {i} = {v} is not positive; problem is degenerate"
            )));
        }
    }
    Ok(x)
}

/// First-order optimality probe for a proportionally fair allocation.
///
/// Draws `samples` random feasible allocations (capacity split by
/// normalized Exp(1) draws, clamped to the caps) and returns the largest
/// weighted relative gain `Σ aᵢ (xᵢ - x*ᵢ) / x*ᵢ` observed. For the true
/// `α = 1` optimum this is nonpositive over the whole feasible set, so a
/// value within float noise of zero certifies optimality.
pub fn check_proportional_fairness(
    problem: &AllocationProblem,
    x_star: &DVector<f64>,
    samples: usize,
    rng: &mut RunRng,
) -> Result<f64> {
    problem.validate()?;
    let k = problem.users;
    if x_star.len() != k {
        return Err(FairGradError::InvalidInput(format!(
            "allocation length {} does not match {} users",
            x_star.len(),
            k
        )));
    }
    for (i, &v) in x_star.iter().enumerate() {
        if !v.is_finite() || v <= 0.0 {
            return Err(FairGradError::Domain(format!(
                "reference allocation {i} = {v} must be positive"
            )));
        }
    }

    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let draws: Vec<f64> = (0..k)
            .map(|_| crate::rng::standard_exponential(rng))
            .collect();
        let total: f64 = draws.iter().sum();
        let mut gain = 0.0;
        for i in 0..k {
            let xi = (problem.capacity * draws[i] / total).min(problem.cap(i));
            gain += problem.weight(i) * (xi - x_star[i]) / x_star[i];
        }
        worst = worst.max(gain);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    #[test]
    fn utility_matches_pinned_values() {
        // u(4, 2) = 4^{-1} / (-1) = -0.25.
        assert_eq!(alpha_utility(4.0, 2.0).unwrap(), -0.25);
        // alpha = 0 is the identity.
        assert_eq!(alpha_utility(3.5, 0.0).unwrap(), 3.5);
        // alpha = 1 is the log.
        assert_relative_eq!(alpha_utility(2.0, 1.0).unwrap(), 2.0f64.ln());
        assert!(alpha_utility(0.0, 1.0).is_err());
        assert!(alpha_utility(1.0, -0.5).is_err());
    }

    #[test]
    fn anchored_utility_differences_approach_the_log() {
        // u_alpha(x) - u_alpha(1) = (x^{1-alpha} - 1)/(1-alpha) -> ln x.
        for x in [0.5, 2.0, 7.3] {
            for da in [1e-9, -1e-9] {
                let alpha = 1.0 + da;
                let diff =
                    alpha_utility(x, alpha).unwrap() - alpha_utility(1.0, alpha).unwrap();
                assert!(
                    (diff - x.ln()).abs() <= 1e-6,
                    "x = {x}, alpha = {alpha}: {diff} vs {}",
                    x.ln()
                );
            }
        }
    }

    #[test]
    fn power_transform_matches_hand_values_and_rejects_bad_input() {
        let t = LossTransform::Power { alpha: 0.5 };
        // l = 4: 4^{0.5} / 0.5 = 4.
        assert_relative_eq!(t.apply(4.0).unwrap(), 4.0);
        assert_relative_eq!(t.derivative(4.0).unwrap(), 0.5);
        assert!(t.apply(0.0).is_err());
        assert!(t.apply(-1.0).is_err());
        assert!(LossTransform::Power { alpha: 1.0 }.apply(2.0).is_err());
        assert_relative_eq!(LossTransform::Log.apply(std::f64::consts::E).unwrap(), 1.0);
    }

    #[test]
    fn transforms_are_strictly_increasing() {
        let grid: Vec<f64> = (1..200).map(|i| 0.05 * i as f64).collect();
        for t in [
            LossTransform::Power { alpha: -1.0 },
            LossTransform::Power { alpha: 0.0 },
            LossTransform::Power { alpha: 0.5 },
            LossTransform::Log,
        ] {
            for w in grid.windows(2) {
                assert!(t.apply(w[0]).unwrap() < t.apply(w[1]).unwrap());
            }
        }
    }

    #[test]
    fn gradient_rescale_applies_chain_rule_per_column() {
        let g = GradientMatrix::new(nalgebra::dmatrix![2.0, 3.0; 4.0, 5.0]).unwrap();
        let losses = dvector![2.0, 4.0];
        let out = transform_gradients(&g, &losses, LossTransform::Log).unwrap();
        assert_relative_eq!(out.matrix()[(0, 0)], 1.0);
        assert_relative_eq!(out.matrix()[(1, 0)], 2.0);
        assert_relative_eq!(out.matrix()[(0, 1)], 0.75);
        assert_relative_eq!(out.matrix()[(1, 1)], 1.25);
    }

    #[test]
    fn clamp_floors_only_low_entries() {
        let clamped = clamp_losses(&dvector![-1.0, 0.5, 2.0], 1e-3);
        assert_eq!(clamped, dvector![1e-3, 0.5, 2.0]);
    }

    #[test]
    fn uncapped_equal_weights_split_evenly_for_every_alpha() {
        let problem = AllocationProblem::new(4, 8.0);
        for alpha in [0.0, 0.5, 1.0, 2.0, 10.0] {
            let x = solve_allocation(&problem, alpha).unwrap();
            for &v in x.iter() {
                assert_relative_eq!(v, 2.0, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn weighted_square_root_rule_matches_hand_solution() {
        // a = (1, 4), c = 3, alpha = 2: slopes are (1, 2), so x = (1, 2).
        let problem = AllocationProblem::new(2, 3.0).with_weights(vec![1.0, 4.0]);
        let x = solve_allocation(&problem, 2.0).unwrap();
        assert_relative_eq!(x[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(x[1], 2.0, max_relative = 1e-12);
    }

    #[test]
    fn caps_bind_and_spill_to_free_users() {
        // c = 10, caps (1, inf, inf), alpha = 1: x = (1, 4.5, 4.5).
        let problem =
            AllocationProblem::new(3, 10.0).with_caps(vec![1.0, f64::INFINITY, f64::INFINITY]);
        let x = solve_allocation(&problem, 1.0).unwrap();
        assert_relative_eq!(x[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(x[1], 4.5, max_relative = 1e-12);
        assert_relative_eq!(x[2], 4.5, max_relative = 1e-12);
    }

    #[test]
    fn slack_caps_return_the_caps() {
        let problem = AllocationProblem::new(2, 10.0).with_caps(vec![1.0, 2.0]);
        let x = solve_allocation(&problem, 1.0).unwrap();
        assert_eq!(x, dvector![1.0, 2.0]);
    }

    #[test]
    fn kkt_residual_vanishes_on_a_capped_weighted_problem() {
        let problem = AllocationProblem::new(4, 6.0)
            .with_caps(vec![0.5, 10.0, 10.0, 0.75])
            .with_weights(vec![1.0, 2.0, 3.0, 4.0]);
        let alpha = 2.0;
        let x = solve_allocation(&problem, alpha).unwrap();
        // Capacity exhausted.
        assert_relative_eq!(x.iter().sum::<f64>(), 6.0, max_relative = 1e-12);
        // Free users share one marginal-utility level a_i x_i^{-alpha};
        // capped users sit at a level at least as high.
        let levels: Vec<f64> = (0..4)
            .map(|i| problem.weight(i) * x[i].powf(-alpha))
            .collect();
        let free: Vec<f64> = (0..4)
            .filter(|&i| x[i] < problem.cap(i) - 1e-12)
            .map(|i| levels[i])
            .collect();
        assert!(free.len() >= 2);
        for w in free.windows(2) {
            assert_relative_eq!(w[0], w[1], max_relative = 1e-10);
        }
        let reference = free[0];
        for i in 0..4 {
            if x[i] >= problem.cap(i) - 1e-12 {
                assert!(levels[i] >= reference - 1e-10 * reference.abs());
            }
        }
    }

    #[test]
    fn weighted_alpha_zero_is_unsupported() {
        let problem = AllocationProblem::new(2, 3.0).with_weights(vec![1.0, 4.0]);
        assert!(matches!(
            solve_allocation(&problem, 0.0),
            Err(FairGradError::Unsupported(_))
        ));
    }

    #[test]
    fn vanishing_capacity_is_rejected() {
        let problem = AllocationProblem::new(3, 1e-12);
        assert!(matches!(
            solve_allocation(&problem, 1.0),
            Err(FairGradError::InvalidInput(_))
        ));
    }

    #[test]
    fn proportional_fairness_certificate_holds_at_the_optimum() {
        let problem = AllocationProblem::new(3, 9.0).with_caps(vec![1.5, 10.0, 10.0]);
        let x = solve_allocation(&problem, 1.0).unwrap();
        let mut rng = seeded(5);
        let worst = check_proportional_fairness(&problem, &x, 500, &mut rng).unwrap();
        assert!(worst <= 1e-9, "worst relative gain {worst}");
        // A visibly suboptimal allocation fails the probe.
        let bad = dvector![0.1, 0.1, 8.8];
        let mut rng = seeded(5);
        let worst_bad = check_proportional_fairness(&problem, &bad, 500, &mut rng).unwrap();
        assert!(worst_bad > 1.0);
    }

    #[test]
    fn min_share_grows_with_alpha_on_weighted_problems() {
        let problem = AllocationProblem::new(4, 4.0).with_weights(vec![1.0, 2.0, 4.0, 8.0]);
        let mut last_min = 0.0;
        for alpha in [1.0, 2.0, 5.0, 10.0, 50.0] {
            let x = solve_allocation(&problem, alpha).unwrap();
            let min = x.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(
                min >= last_min - 1e-9,
                "alpha {alpha}: min {min} < previous {last_min}"
            );
            last_min = min;
        }
    }
}
