//! Pareto-front diagnostics: dominance, stationarity, and front sampling.

use nalgebra::DVector;

use crate::aggregate::min_norm_point;
use crate::error::{FairGradError, Result};
use crate::types::{build_gram, GradientMatrix, MultiObjectiveProblem};

/// Pareto dominance for minimization: `a` dominates `b` when `a ≤ b`
/// elementwise and the vectors differ.
pub fn dominates(a: &DVector<f64>, b: &DVector<f64>) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut strictly = false;
    for i in 0..a.len() {
        if a[i] > b[i] {
            return false;
        }
        if a[i] < b[i] {
            strictly = true;
        }
    }
    strictly
}

/// Pareto-stationarity measure: the norm of the min-norm point of the
/// gradient convex hull. Zero iff some convex combination of task
/// gradients vanishes, i.e. the point is Pareto stationary.
///
/// The Frank-Wolfe solve is an outer minimization over a subset of the
/// hull it has visited, so the returned value is an upper bound on the
/// true measure: observing `measure ≤ tol` certifies stationarity at
/// tolerance `tol` even if the solve stopped early.
pub fn stationarity_measure(g: &GradientMatrix) -> f64 {
    min_norm_point(g).norm
}

/// Smallest eigenvalue of the Gram matrix `GᵀG`, clamped at zero.
///
/// This is the squared smallest singular value of `G` when `m ≥ K`; it
/// drops to zero exactly when the task gradients become linearly
/// dependent, which is the degeneracy the trajectory logs track.
pub fn smallest_singular_value(g: &GradientMatrix) -> f64 {
    let gram = build_gram(g);
    gram.matrix()
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &v| a.min(v))
        .max(0.0)
}

/// A sampled Pareto-front point: the parameters and their loss vector.
#[derive(Clone, Debug)]
pub struct FrontPoint {
    pub point: DVector<f64>,
    pub losses: DVector<f64>,
}

/// Samples an approximate Pareto front of a two-parameter, two-task
/// problem by evaluating losses on a `resolution × resolution` grid over
/// `[lo, hi]²` and keeping the nondominated loss vectors.
///
/// The filter sorts by the first loss and keeps a grid point iff its
/// second loss both equals the minimum among points sharing its first
/// loss and strictly improves on every smaller first loss seen so far;
/// exact duplicates are dropped. Results come back sorted by first loss.
pub fn sample_front_2d(
    problem: &dyn MultiObjectiveProblem,
    lo: f64,
    hi: f64,
    resolution: usize,
) -> Result<Vec<FrontPoint>> {
    if problem.parameter_dim() != 2 || problem.task_count() != 2 {
        return Err(FairGradError::Unsupported(format!(
            "front sampling is defined for 2 parameters and 2 tasks, got m = {}, K = {}",
            problem.parameter_dim(),
            problem.task_count()
        )));
    }
    if resolution < 2 {
        return Err(FairGradError::InvalidInput(format!(
            "resolution must be at least 2, got {resolution}"
        )));
    }
    if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
        return Err(FairGradError::InvalidInput(format!(
            "invalid grid range [{lo}, {hi}]"
        )));
    }

    let step = (hi - lo) / (resolution - 1) as f64;
    let mut samples: Vec<FrontPoint> = Vec::with_capacity(resolution * resolution);
    for i in 0..resolution {
        for j in 0..resolution {
            let point = DVector::from_vec(vec![lo + step * i as f64, lo + step * j as f64]);
            let losses = problem.losses(&point);
            if losses.iter().all(|v| v.is_finite()) {
                samples.push(FrontPoint { point, losses });
            }
        }
    }

    // Sort by (l1, l2); a point survives iff it has the smallest l2 within
    // its l1 group and that l2 beats every l2 at smaller l1.
    samples.sort_by(|a, b| {
        (a.losses[0], a.losses[1])
            .partial_cmp(&(b.losses[0], b.losses[1]))
            .expect("finite by construction")
    });

    let mut front: Vec<FrontPoint> = Vec::new();
    let mut best_l2 = f64::INFINITY;
    let mut idx = 0;
    while idx < samples.len() {
        let l1 = samples[idx].losses[0];
        // Group is contiguous after the sort; its first element has the
        // group-minimal l2.
        let group_start = idx;
        while idx < samples.len() && samples[idx].losses[0] == l1 {
            idx += 1;
        }
        let candidate = &samples[group_start];
        if candidate.losses[1] < best_l2 {
            best_l2 = candidate.losses[1];
            front.push(candidate.clone());
        }
    }

    Ok(front)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector};

    struct SumDiff;

    impl MultiObjectiveProblem for SumDiff {
        fn parameter_dim(&self) -> usize {
            2
        }
        fn task_count(&self) -> usize {
            2
        }
        fn losses(&self, p: &DVector<f64>) -> DVector<f64> {
            // Two quadratic bowls with centers (1, 0) and (-1, 0): the front
            // is the segment between them.
            dvector![
                (p[0] - 1.0).powi(2) + p[1].powi(2),
                (p[0] + 1.0).powi(2) + p[1].powi(2)
            ]
        }
        fn gradients(&self, p: &DVector<f64>) -> crate::error::Result<GradientMatrix> {
            GradientMatrix::new(dmatrix![
                2.0 * (p[0] - 1.0), 2.0 * (p[0] + 1.0);
                2.0 * p[1], 2.0 * p[1];
            ])
        }
    }

    #[test]
    fn dominance_is_strict_and_directional() {
        let a = dvector![1.0, 2.0];
        let b = dvector![1.0, 3.0];
        assert!(dominates(&a, &b));
        assert!(!dominates(&b, &a));
        assert!(!dominates(&a, &a));
        let c = dvector![0.5, 4.0];
        assert!(!dominates(&a, &c));
        assert!(!dominates(&c, &a));
    }

    #[test]
    fn stationarity_vanishes_between_bowls_and_not_outside() {
        let problem = SumDiff;
        // Midpoint (0, 0): gradients are (-2, 0) and (2, 0), hull contains 0.
        let g_mid = problem.gradients(&dvector![0.0, 0.0]).unwrap();
        assert!(stationarity_measure(&g_mid) < 1e-8);
        // Off-front point: both gradients share a positive y component.
        let g_off = problem.gradients(&dvector![0.0, 1.0]).unwrap();
        assert!(stationarity_measure(&g_off) > 1.0);
    }

    #[test]
    fn sigma_min_detects_dependent_gradients() {
        let parallel = GradientMatrix::new(dmatrix![1.0, 2.0; 1.0, 2.0]).unwrap();
        assert!(smallest_singular_value(&parallel) < 1e-12);
        let independent = GradientMatrix::new(dmatrix![1.0, 0.0; 0.0, 1.0]).unwrap();
        assert_relative_eq!(smallest_singular_value(&independent), 1.0);
    }

    #[test]
    fn sampled_front_lies_between_the_bowls() {
        let problem = SumDiff;
        let front = sample_front_2d(&problem, -2.0, 2.0, 81).unwrap();
        assert!(!front.is_empty());
        for fp in &front {
            // Front points have y = 0 and x in [-1, 1].
            assert_relative_eq!(fp.point[1], 0.0, epsilon = 1e-12);
            assert!(fp.point[0] >= -1.0 - 1e-12 && fp.point[0] <= 1.0 + 1e-12);
        }
        // Pairwise nondominated.
        for i in 0..front.len() {
            for j in 0..front.len() {
                if i != j {
                    assert!(!dominates(&front[i].losses, &front[j].losses));
                }
            }
        }
        // Sorted by first loss.
        for w in front.windows(2) {
            assert!(w[0].losses[0] <= w[1].losses[0]);
        }
    }

    #[test]
    fn front_sampler_rejects_wrong_shapes() {
        struct ThreeTask;
        impl MultiObjectiveProblem for ThreeTask {
            fn parameter_dim(&self) -> usize {
                2
            }
            fn task_count(&self) -> usize {
                3
            }
            fn losses(&self, _p: &DVector<f64>) -> DVector<f64> {
                dvector![0.0, 0.0, 0.0]
            }
            fn gradients(&self, _p: &DVector<f64>) -> crate::error::Result<GradientMatrix> {
                GradientMatrix::new(dmatrix![1.0, 0.0, 0.0; 0.0, 1.0, 0.0])
            }
        }
        assert!(matches!(
            sample_front_2d(&ThreeTask, -1.0, 1.0, 8),
            Err(FairGradError::Unsupported(_))
        ));
        assert!(sample_front_2d(&SumDiff, -1.0, 1.0, 1).is_err());
        assert!(sample_front_2d(&SumDiff, 1.0, -1.0, 8).is_err());
    }

    // Dominance must be a strict partial order on loss vectors. Random
    // triples check irreflexivity and asymmetry directly; transitivity is
    // checked on constructed chains `a ≤ b ≤ c` because independently drawn
    // triples are almost never comparable.
    mod partial_order {
        use super::*;
        use proptest::prelude::*;

        /// Three same-length loss vectors with finite entries.
        fn triple() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
            (1usize..=6).prop_flat_map(|k| {
                let coord = -1e6..1e6f64;
                (
                    proptest::collection::vec(coord.clone(), k),
                    proptest::collection::vec(coord.clone(), k),
                    proptest::collection::vec(coord, k),
                )
            })
        }

        /// A base vector and two nonnegative perturbations of it, each with
        /// at least one strictly positive coordinate, so that
        /// `a` dominates `a + d1` dominates `a + d1 + d2`.
        fn chain() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
            (1usize..=6).prop_flat_map(|k| {
                (
                    proptest::collection::vec(-1e6..1e6f64, k),
                    proptest::collection::vec(0.0..1e3f64, k),
                    proptest::collection::vec(0.0..1e3f64, k),
                    0..k,
                    0..k,
                )
                    .prop_map(|(base, mut d1, mut d2, i, j)| {
                        d1[i] += 1.0;
                        d2[j] += 1.0;
                        (base, d1, d2)
                    })
            })
        }

        proptest! {
            #[test]
            fn irreflexive_and_asymmetric((a, b, _c) in triple()) {
                let av = DVector::from_vec(a);
                let bv = DVector::from_vec(b);
                prop_assert!(!dominates(&av, &av));
                prop_assert!(!dominates(&bv, &bv));
                prop_assert!(!(dominates(&av, &bv) && dominates(&bv, &av)));
            }

            #[test]
            fn transitive_along_chains((base, d1, d2) in chain()) {
                let a = DVector::from_vec(base);
                let b = &a + DVector::from_vec(d1);
                let c = &b + DVector::from_vec(d2);
                prop_assert!(dominates(&a, &b));
                prop_assert!(dominates(&b, &c));
                prop_assert!(dominates(&a, &c));
            }

            #[test]
            fn equal_vectors_never_dominate(values in proptest::collection::vec(-1e6..1e6f64, 1..=6)) {
                let a = DVector::from_vec(values.clone());
                let b = DVector::from_vec(values);
                prop_assert!(!dominates(&a, &b));
                prop_assert!(!dominates(&b, &a));
            }
        }
    }
}
