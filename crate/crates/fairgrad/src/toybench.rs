//! Desk-scale benchmark problems.
//!
//! [`ToyProblem`] is a two-parameter, two-task landscape whose tasks trade
//! off against each other along `x₁` while `x₂` gates which regime is
//! active; it is small enough to visualize yet hard enough (kinks, plateaus,
//! huge gradient-scale gaps) to separate aggregation methods.
//! [`QuadraticProblem`] gives random strongly convex bowls with a certified
//! smoothness constant, the clean setting for step-size guarantees.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::rng::RunRng;
use crate::types::{GradientMatrix, MultiObjectiveProblem};

/// Named start points used by the toy experiments: corners of the two
/// basins, the central saddle plateau, and two mixed-regime points.
pub const TOY_STARTS: [(&str, [f64; 2]); 5] = [
    ("p1", [-8.5, 7.5]),
    ("p2", [0.0, 0.0]),
    ("p3", [9.0, 9.0]),
    ("p4", [-7.5, -0.5]),
    ("p5", [9.0, -1.0]),
];

/// Looks up a named toy start point.
pub fn toy_start(name: &str) -> Option<DVector<f64>> {
    TOY_STARTS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, p)| DVector::from_vec(p.to_vec()))
}

/// Two-task toy landscape on `(x₁, x₂) ∈ ℝ²`.
///
/// With `t = tanh(0.5 x₂)` the gates are `f₁ = max(t, 0)` and
/// `f₂ = max(-t, 0)`; the gated objectives are log-scale walls
/// `gᵢ = ln(max(|uᵢ|, 5·10⁻⁶)) + 6` with `u₁ = -0.5 x₁ - 3.5 + tanh x₂`,
/// `u₂ = -0.5 x₁ + 3.5 + tanh x₂`, and quadratic basins
/// `h₁ = ((x₁-7)² + 0.1 (x₁+8)²)/10 - 20`,
/// `h₂ = ((x₁+7)² + 0.1 (x₁+8)²)/10 - 20`. The tasks are
/// `L₁ = 0.1 (f₁ g₁ + f₂ h₁)` and `L₂ = f₁ g₂ + f₂ h₂`.
///
/// The landscape is only piecewise smooth; the gradient oracle resolves
/// each kink with a fixed one-sided convention so that it is a
/// deterministic function: `max(z, 0)` has slope 0 at `z = 0`, `|z|` has
/// slope 0 at `z = 0`, and the clamp `max(|u|, 5·10⁻⁶)` passes the slope
/// `sign(u)` through exactly when `|u| ≥ 5·10⁻⁶`. A consequence worth
/// knowing: both gates and both gate slopes vanish at `x₂ = 0` with
/// `u₁, u₂ ≠ 0`, so the origin has an exactly zero gradient matrix and
/// every method terminates there immediately.
#[derive(Clone, Copy, Debug, Default)]
pub struct ToyProblem;

const U_CLAMP: f64 = 5e-6;

impl ToyProblem {
    fn parts(point: &DVector<f64>) -> ToyParts {
        let (x1, x2) = (point[0], point[1]);
        let t = (0.5 * x2).tanh();
        let th = x2.tanh();
        let u1 = -0.5 * x1 - 3.5 + th;
        let u2 = -0.5 * x1 + 3.5 + th;
        let v1 = u1.abs().max(U_CLAMP);
        let v2 = u2.abs().max(U_CLAMP);
        ToyParts {
            t,
            th,
            u1,
            u2,
            v1,
            v2,
            f1: if t > 0.0 { t } else { 0.0 },
            f2: if t < 0.0 { -t } else { 0.0 },
            g1: v1.ln() + 6.0,
            g2: v2.ln() + 6.0,
            h1: ((x1 - 7.0).powi(2) + 0.1 * (x1 + 8.0).powi(2)) / 10.0 - 20.0,
            h2: ((x1 + 7.0).powi(2) + 0.1 * (x1 + 8.0).powi(2)) / 10.0 - 20.0,
        }
    }
}

struct ToyParts {
    t: f64,
    th: f64,
    u1: f64,
    u2: f64,
    v1: f64,
    v2: f64,
    f1: f64,
    f2: f64,
    g1: f64,
    g2: f64,
    h1: f64,
    h2: f64,
}

/// Slope passed through `ln(max(|u|, clamp))`: `sign(u)/v` while the
/// absolute value is active (ties included), zero on the clamped plateau.
fn log_wall_slope(u: f64, v: f64) -> f64 {
    if u.abs() >= U_CLAMP {
        u.signum() / v
    } else {
        0.0
    }
}

impl MultiObjectiveProblem for ToyProblem {
    fn parameter_dim(&self) -> usize {
        2
    }

    fn task_count(&self) -> usize {
        2
    }

    fn losses(&self, point: &DVector<f64>) -> DVector<f64> {
        let p = Self::parts(point);
        DVector::from_vec(vec![
            0.1 * (p.f1 * p.g1 + p.f2 * p.h1),
            p.f1 * p.g2 + p.f2 * p.h2,
        ])
    }

    fn gradients(&self, point: &DVector<f64>) -> Result<GradientMatrix> {
        let (x1, _x2) = (point[0], point[1]);
        let p = Self::parts(point);

        // Gate slopes in x2; both vanish at x2 = 0 by the max convention.
        let df1_dx2 = if p.t > 0.0 { 0.5 * (1.0 - p.t * p.t) } else { 0.0 };
        let df2_dx2 = if p.t < 0.0 { -0.5 * (1.0 - p.t * p.t) } else { 0.0 };

        // Log-wall slopes via u_i; du/dx1 = -0.5, du/dx2 = sech^2(x2).
        let sech2 = 1.0 - p.th * p.th;
        let s1 = log_wall_slope(p.u1, p.v1);
        let s2 = log_wall_slope(p.u2, p.v2);
        let dg1_dx1 = s1 * -0.5;
        let dg1_dx2 = s1 * sech2;
        let dg2_dx1 = s2 * -0.5;
        let dg2_dx2 = s2 * sech2;

        // Basin slopes live purely in x1.
        let dh1_dx1 = (2.0 * (x1 - 7.0) + 0.2 * (x1 + 8.0)) / 10.0;
        let dh2_dx1 = (2.0 * (x1 + 7.0) + 0.2 * (x1 + 8.0)) / 10.0;

        let dl1_dx1 = 0.1 * (p.f1 * dg1_dx1 + p.f2 * dh1_dx1);
        let dl1_dx2 = 0.1 * (df1_dx2 * p.g1 + p.f1 * dg1_dx2 + df2_dx2 * p.h1);
        let dl2_dx1 = p.f1 * dg2_dx1 + p.f2 * dh2_dx1;
        let dl2_dx2 = df1_dx2 * p.g2 + p.f1 * dg2_dx2 + df2_dx2 * p.h2;

        GradientMatrix::new(DMatrix::from_row_slice(
            2,
            2,
            &[dl1_dx1, dl2_dx1, dl1_dx2, dl2_dx2],
        ))
    }
}

/// `K` strongly convex quadratic tasks
/// `lᵢ(θ) = ½ (θ - cᵢ)ᵀ Aᵢ (θ - cᵢ) + bᵢ` with SPD `Aᵢ` and `bᵢ > 0`.
#[derive(Clone, Debug)]
pub struct QuadraticProblem {
    matrices: Vec<DMatrix<f64>>,
    centers: Vec<DVector<f64>>,
    offsets: Vec<f64>,
    /// Largest eigenvalue across the `Aᵢ`, certified at construction.
    smoothness: f64,
}

impl QuadraticProblem {
    /// Builds the problem from explicit pieces; `smoothness` must upper
    /// bound every eigenvalue of every `Aᵢ`.
    pub fn from_parts(
        matrices: Vec<DMatrix<f64>>,
        centers: Vec<DVector<f64>>,
        offsets: Vec<f64>,
        smoothness: f64,
    ) -> Self {
        assert_eq!(matrices.len(), centers.len());
        assert_eq!(matrices.len(), offsets.len());
        assert!(!matrices.is_empty());
        Self {
            matrices,
            centers,
            offsets,
            smoothness,
        }
    }

    /// Two identity bowls at mirrored centers `±e₁`; its Pareto set is the
    /// straight segment between the centers.
    pub fn shared_identity_pair(dim: usize) -> Self {
        let mut c1 = DVector::zeros(dim);
        c1[0] = 1.0;
        let c2 = -c1.clone();
        Self {
            matrices: vec![DMatrix::identity(dim, dim), DMatrix::identity(dim, dim)],
            centers: vec![c1, c2],
            offsets: vec![1.0, 1.0],
            smoothness: 1.0,
        }
    }

    /// Certified smoothness constant: an upper bound on the largest
    /// gradient Lipschitz constant of any single task.
    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    pub fn center(&self, i: usize) -> &DVector<f64> {
        &self.centers[i]
    }
}

impl MultiObjectiveProblem for QuadraticProblem {
    fn parameter_dim(&self) -> usize {
        self.centers[0].len()
    }

    fn task_count(&self) -> usize {
        self.matrices.len()
    }

    fn losses(&self, point: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.matrices.len(),
            self.matrices.iter().zip(&self.centers).zip(&self.offsets).map(
                |((a, c), b)| {
                    let d = point - c;
                    0.5 * d.dot(&(a * &d)) + b
                },
            ),
        )
    }

    fn gradients(&self, point: &DVector<f64>) -> Result<GradientMatrix> {
        let m = self.parameter_dim();
        let k = self.task_count();
        let mut g = DMatrix::zeros(m, k);
        for i in 0..k {
            let d = point - &self.centers[i];
            g.set_column(i, &(&self.matrices[i] * d));
        }
        GradientMatrix::new(g)
    }
}

/// Samples a random quadratic problem: each task draws an orthogonal basis
/// from the QR factorization of a Gaussian matrix, eigenvalues uniform on
/// `[0.1, condition_bound]`, a center `2·N(0, I)`, and an offset uniform
/// on `[1, 2]` (so losses stay positive near the optima). The certified
/// smoothness constant is the largest eigenvalue actually sampled.
pub fn quadratic_problem(
    task_count: usize,
    dim: usize,
    condition_bound: f64,
    rng: &mut RunRng,
) -> QuadraticProblem {
    use rand::Rng;
    assert!(task_count >= 1 && dim >= 1);
    assert!(
        condition_bound.is_finite() && condition_bound >= 0.1,
        "condition bound must be at least the eigenvalue floor 0.1"
    );

    let mut matrices = Vec::with_capacity(task_count);
    let mut centers = Vec::with_capacity(task_count);
    let mut offsets = Vec::with_capacity(task_count);
    let mut l_max: f64 = 0.0;

    for _ in 0..task_count {
        let gauss = DMatrix::from_fn(dim, dim, |_, _| crate::rng::standard_normal(rng));
        let q = gauss.qr().q();
        let eigs: Vec<f64> = (0..dim)
            .map(|_| 0.1 + (condition_bound - 0.1) * rng.random::<f64>())
            .collect();
        l_max = eigs.iter().fold(l_max, |a, &v| a.max(v));
        let lambda = DMatrix::from_diagonal(&DVector::from_vec(eigs));
        let a = q.transpose() * lambda * &q;
        // Orthogonal conjugation is symmetric in exact arithmetic; enforce
        // it bitwise so downstream symmetry checks see no float drift.
        let a = 0.5 * (&a + a.transpose());
        matrices.push(a);
        centers.push(DVector::from_fn(dim, |_, _| {
            2.0 * crate::rng::standard_normal(rng)
        }));
        offsets.push(1.0 + rng.random::<f64>());
    }

    QuadraticProblem::from_parts(matrices, centers, offsets, l_max)
}
