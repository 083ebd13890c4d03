//! Projections onto closed convex sets and the sequential and parallel
//! projection iterations built on them.
//!
//! Every function here is pure; nothing holds interior state.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::point::{check_dim, dist, dot, sq_dist, Point};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 1000;

/// Tolerance used when deciding whether a point solves x = λ·x1 + (1−λ)·x2.
const COMBINATION_TOL: f64 = 1e-9;
/// Weights must sum to one within this bound.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A closed convex set with a closed-form Euclidean projection.
#[derive(Debug, Clone, PartialEq)]
pub enum ConvexSet {
    Singleton(Point),
    Ball { center: Point, radius: f64 },
    /// The set `{p : <normal, p> <= offset}`.
    Halfspace { normal: Point, offset: f64 },
}

impl ConvexSet {
    pub fn singleton(p: Point) -> Self {
        ConvexSet::Singleton(p)
    }

    pub fn ball(center: Point, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(ConvexSet::Ball { center, radius })
    }

    pub fn halfspace(normal: Point, offset: f64) -> Result<Self> {
        if !offset.is_finite() {
            return Err(Error::NonFinite(format!("halfspace offset {offset}")));
        }
        if dot(&normal, &normal) <= 0.0 {
            return Err(Error::invalid("halfspace normal must be nonzero"));
        }
        Ok(ConvexSet::Halfspace { normal, offset })
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::Singleton(p) => p.dim(),
            ConvexSet::Ball { center, .. } => center.dim(),
            ConvexSet::Halfspace { normal, .. } => normal.dim(),
        }
    }

    /// Membership with an absolute slack `tol` on the Euclidean distance.
    pub fn contains(&self, x: &[f64], tol: f64) -> Result<bool> {
        check_dim(self.dim(), x.len())?;
        Ok(self.distance_to(x) <= tol)
    }

    /// Euclidean distance from `x` to the set (zero inside).
    fn distance_to(&self, x: &[f64]) -> f64 {
        match self {
            ConvexSet::Singleton(p) => dist(p, x),
            ConvexSet::Ball { center, radius } => (dist(center, x) - radius).max(0.0),
            ConvexSet::Halfspace { normal, offset } => {
                let excess = dot(normal, x) - offset;
                (excess / dot(normal, normal).sqrt()).max(0.0)
            }
        }
    }

    /// Nearest point of the set to `x`. Points already inside, including
    /// points on the boundary, are returned unchanged.
    pub fn project(&self, x: &[f64]) -> Result<Point> {
        check_dim(self.dim(), x.len())?;
        Ok(self.project_unchecked(x))
    }

    pub(crate) fn project_unchecked(&self, x: &[f64]) -> Point {
        match self {
            ConvexSet::Singleton(p) => p.clone(),
            ConvexSet::Ball { center, radius } => {
                let r = dist(center, x);
                if r <= *radius {
                    return Point::from(x);
                }
                let scale = radius / r;
                Point::from_vec_unchecked(
                    center
                        .iter()
                        .zip(x)
                        .map(|(c, xi)| c + scale * (xi - c))
                        .collect(),
                )
            }
            ConvexSet::Halfspace { normal, offset } => {
                let excess = dot(normal, x) - offset;
                if excess <= 0.0 {
                    return Point::from(x);
                }
                let step = excess / dot(normal, normal);
                Point::from_vec_unchecked(
                    x.iter().zip(normal.iter()).map(|(xi, n)| xi - step * n).collect(),
                )
            }
        }
    }
}

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("weight vector is empty"));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::invalid(format!("weight {w} is negative or not finite")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::invalid(format!("weights sum to {sum}, not 1")));
        }
        Ok(WeightVector(weights))
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("weight vector is empty"));
        }
        Ok(WeightVector(vec![1.0 / n as f64; n]))
    }

    /// Wraps weights already normalized by the caller. Rounding may leave
    /// the sum a few ulps from one, which `new` would also accept.
    pub(crate) fn from_normalized(weights: Vec<f64>) -> Self {
        debug_assert!(weights.iter().all(|w| *w >= 0.0));
        WeightVector(weights)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Iterates of a projection run.
#[derive(Debug, Clone, PartialEq)]
pub struct PocsTrace {
    /// Starting point followed by one iterate per cycle (sequential) or
    /// per step (parallel).
    pub iterates: Vec<Point>,
    pub converged: bool,
    /// Displacement between the last two iterates.
    pub final_residual: f64,
    /// Intermediate projections of the last full sequential cycle, in set
    /// order. Empty for parallel runs.
    pub last_cycle: Vec<Point>,
}

impl PocsTrace {
    pub fn last(&self) -> &Point {
        self.iterates.last().expect("trace is never empty")
    }

    /// One iterate per line, comma-separated coordinates.
    pub fn to_report(&self) -> String {
        let mut out = String::new();
        for p in &self.iterates {
            let _ = writeln!(out, "{p}");
        }
        out
    }
}

/// Returns `Some(λ)` when `x = λ·x1 + (1−λ)·x2` for some λ in [0, 1].
pub fn is_convex_combination(x: &[f64], x1: &[f64], x2: &[f64]) -> Result<Option<f64>> {
    check_dim(x.len(), x1.len())?;
    check_dim(x.len(), x2.len())?;
    let span = sq_dist(x1, x2);
    if span <= COMBINATION_TOL * COMBINATION_TOL {
        // Degenerate segment: every λ works when x sits on the point.
        return Ok((dist(x, x1) <= COMBINATION_TOL).then_some(1.0));
    }
    let along: f64 = x
        .iter()
        .zip(x1.iter().zip(x2))
        .map(|(xi, (a, b))| (xi - b) * (a - b))
        .sum();
    let lambda = along / span;
    let scale = span.sqrt();
    if lambda < -COMBINATION_TOL / scale || lambda > 1.0 + COMBINATION_TOL / scale {
        return Ok(None);
    }
    let lambda = lambda.clamp(0.0, 1.0);
    let off_segment = x
        .iter()
        .zip(x1.iter().zip(x2))
        .map(|(xi, (a, b))| {
            let r = xi - (lambda * a + (1.0 - lambda) * b);
            r * r
        })
        .sum::<f64>()
        .sqrt();
    Ok((off_segment <= COMBINATION_TOL).then_some(lambda))
}

fn check_sets(x0: &[f64], sets: &[ConvexSet]) -> Result<()> {
    if sets.is_empty() {
        return Err(Error::invalid("at least one convex set is required"));
    }
    for s in sets {
        check_dim(x0.len(), s.dim())?;
    }
    Ok(())
}

fn check_run_params(max_iter: usize, tol: f64) -> Result<()> {
    if max_iter == 0 {
        return Err(Error::invalid("max_iter must be positive"));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::invalid("tol must be positive"));
    }
    Ok(())
}

/// Cyclic projection through `sets`.
///
/// The run stops once a full cycle moves the iterate less than `tol`, or
/// after `max_iter` cycles. `converged` is true only when every projection of
/// that final cycle also moved by less than `tol`; a stationary orbit with
/// large intra-cycle jumps is a limit cycle and is reported as unconverged,
/// with its projections left in `last_cycle`.
pub fn sequential_pocs(
    x0: &Point,
    sets: &[ConvexSet],
    max_iter: usize,
    tol: f64,
) -> Result<PocsTrace> {
    check_sets(x0, sets)?;
    check_run_params(max_iter, tol)?;

    let mut iterates = vec![x0.clone()];
    let mut last_cycle = Vec::with_capacity(sets.len());
    let mut residual = 0.0;
    let mut converged = false;

    for _ in 0..max_iter {
        let start = iterates.last().expect("nonempty").clone();
        last_cycle.clear();
        let mut current = start.clone();
        let mut max_step: f64 = 0.0;
        for s in sets {
            let next = s.project_unchecked(&current);
            max_step = max_step.max(dist(&current, &next));
            last_cycle.push(next.clone());
            current = next;
        }
        residual = dist(&start, &current);
        iterates.push(current);
        if residual < tol {
            converged = max_step < tol;
            break;
        }
    }

    Ok(PocsTrace {
        iterates,
        converged,
        final_residual: residual,
        last_cycle,
    })
}

fn check_weights(sets: &[ConvexSet], weights: &WeightVector) -> Result<()> {
    if weights.len() != sets.len() {
        return Err(Error::LengthMismatch {
            what: "weights",
            expected: sets.len(),
            actual: weights.len(),
        });
    }
    Ok(())
}

/// One simultaneous step `x + Σ wᵢ (Pᵢ(x) − x)`.
pub(crate) fn parallel_step(x: &[f64], sets: &[ConvexSet], weights: &[f64]) -> Point {
    let mut delta = vec![0.0; x.len()];
    for (s, w) in sets.iter().zip(weights) {
        let p = s.project_unchecked(x);
        for ((d, pi), xi) in delta.iter_mut().zip(p.iter()).zip(x) {
            *d += w * (pi - xi);
        }
    }
    Point::from_vec_unchecked(x.iter().zip(&delta).map(|(xi, d)| xi + d).collect())
}

/// Weighted simultaneous projection with fixed weights, run until the step
/// displacement drops below `tol` or `max_iter` steps have been taken.
pub fn parallel_pocs(
    x0: &Point,
    sets: &[ConvexSet],
    weights: &WeightVector,
    max_iter: usize,
    tol: f64,
) -> Result<PocsTrace> {
    check_sets(x0, sets)?;
    check_weights(sets, weights)?;
    check_run_params(max_iter, tol)?;

    let mut iterates = vec![x0.clone()];
    let mut residual = 0.0;
    let mut converged = false;
    for _ in 0..max_iter {
        let current = iterates.last().expect("nonempty");
        let next = parallel_step(current, sets, weights.as_slice());
        residual = dist(current, &next);
        iterates.push(next);
        if residual < tol {
            converged = true;
            break;
        }
    }
    Ok(PocsTrace {
        iterates,
        converged,
        final_residual: residual,
        last_cycle: Vec::new(),
    })
}

/// `Σᵢ wᵢ ‖x − Pᵢ(x)‖²`, the quantity the parallel iteration minimizes.
pub fn weighted_sq_distance(x: &[f64], sets: &[ConvexSet], weights: &WeightVector) -> Result<f64> {
    check_sets(x, sets)?;
    check_weights(sets, weights)?;
    Ok(sets
        .iter()
        .zip(weights.as_slice())
        .map(|(s, w)| w * sq_dist(x, &s.project_unchecked(x)))
        .sum())
}
