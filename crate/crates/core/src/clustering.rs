//! Prototype clustering: the POCS-based algorithm plus K-Means, K-Means++
//! seeding and Fuzzy C-Means.
//!
//! All distances are Euclidean in double precision, and every sum runs in
//! datum-index order so results are bit-reproducible. Ties are always broken
//! toward the lowest index.

use ndarray::Array2;

use crate::data::{EmbeddingDataset, SeededRng};
use crate::error::{Error, Result};
use crate::point::{check_dim, dist, sq_dist, Point};
use crate::pocs::WeightVector;

pub const DEFAULT_MAX_ITER: usize = 300;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_FUZZIFIER: f64 = 2.0;

/// Total member distance below which a cluster's projection weights fall
/// back to uniform.
const DEGENERATE_DISTANCE_SUM: f64 = 1e-15;

/// How the initial prototypes are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// D² sampling.
    KMeansPlusPlus,
    /// `k` distinct data points uniformly at random.
    RandomPick,
    Provided(Vec<Point>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterConfig {
    pub k: usize,
    pub max_iter: usize,
    /// Prototype displacement (or membership change for FCM) threshold.
    pub tol: f64,
    pub rng_seed: u64,
    pub init: Init,
}

impl ClusterConfig {
    pub fn new(k: usize) -> Self {
        ClusterConfig {
            k,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            rng_seed: 0,
            init: Init::KMeansPlusPlus,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self, data: &EmbeddingDataset) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if self.k > data.len() {
            return Err(Error::TooManyClusters {
                k: self.k,
                n: data.len(),
            });
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::invalid(format!("tol must be positive, got {}", self.tol)));
        }
        if let Init::Provided(protos) = &self.init {
            if protos.len() != self.k {
                return Err(Error::LengthMismatch {
                    what: "provided prototypes",
                    expected: self.k,
                    actual: protos.len(),
                });
            }
            for p in protos {
                check_dim(data.dim(), p.dim())?;
            }
        }
        Ok(())
    }
}

/// Result of a hard-assignment fit.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub prototypes: Vec<Point>,
    pub assignments: Vec<usize>,
    /// Σ ‖x − prototype(x)‖² at termination.
    pub sse: f64,
    /// The algorithm's own objective (SSE for K-Means, the weighted
    /// projection objective for POCS).
    pub own_objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Own objective after each prototype update.
    pub objective_trace: Vec<f64>,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.prototypes.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyModel {
    pub prototypes: Vec<Point>,
    /// n×k matrix; each row sums to one.
    pub memberships: Array2<f64>,
    pub fuzzifier: f64,
    /// Σᵢⱼ uᵢⱼ^m ‖xⱼ − vᵢ‖² for the returned prototypes and memberships.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each prototype update.
    pub objective_trace: Vec<f64>,
}

/// Projection weights of one cluster together with the indices of the
/// member data they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct MemberWeights {
    pub weights: WeightVector,
    pub member_indices: Vec<usize>,
}

fn uniform_pick(data: &EmbeddingDataset, k: usize, seed: u64) -> Vec<Point> {
    let mut rng = SeededRng::new(seed);
    let mut idx: Vec<usize> = (0..data.len()).collect();
    for i in 0..k {
        let j = i + rng.index(idx.len() - i);
        idx.swap(i, j);
    }
    idx[..k].iter().map(|&i| Point::from(data.row(i))).collect()
}

/// `k` distinct data points drawn uniformly without replacement.
pub fn random_pick_seed(data: &EmbeddingDataset, k: usize, rng_seed: u64) -> Result<Vec<Point>> {
    check_k(data, k)?;
    Ok(uniform_pick(data, k, rng_seed))
}

fn check_k(data: &EmbeddingDataset, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if k > data.len() {
        return Err(Error::TooManyClusters { k, n: data.len() });
    }
    Ok(())
}

/// K-Means++ seeding: the first center is a uniform datum, each further
/// center is drawn with probability proportional to its squared distance to
/// the nearest center chosen so far.
pub fn kmeanspp_seed(data: &EmbeddingDataset, k: usize, rng_seed: u64) -> Result<Vec<Point>> {
    check_k(data, k)?;
    let mut rng = SeededRng::new(rng_seed);
    let n = data.len();
    let first = rng.index(n);
    let mut centers = vec![Point::from(data.row(first))];
    let mut nearest: Vec<f64> = data.rows().map(|r| sq_dist(r, data.row(first))).collect();

    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.uniform() * total;
            let mut cum = 0.0;
            let mut chosen = None;
            for (i, w) in nearest.iter().enumerate() {
                cum += w;
                if cum > target {
                    chosen = Some(i);
                    break;
                }
            }
            // Rounding can leave target == total; take the last positive mass.
            chosen.unwrap_or_else(|| {
                nearest
                    .iter()
                    .rposition(|w| *w > 0.0)
                    .expect("positive total has a positive entry")
            })
        } else {
            // Every datum coincides with a chosen center.
            rng.index(n)
        };
        let c = data.row(pick);
        for (d, r) in nearest.iter_mut().zip(data.rows()) {
            *d = d.min(sq_dist(r, c));
        }
        centers.push(Point::from(c));
    }
    Ok(centers)
}

/// Resolves `config.init` into concrete starting prototypes.
pub fn initial_prototypes(data: &EmbeddingDataset, config: &ClusterConfig) -> Result<Vec<Point>> {
    config.validate(data)?;
    match &config.init {
        Init::KMeansPlusPlus => kmeanspp_seed(data, config.k, config.rng_seed),
        Init::RandomPick => random_pick_seed(data, config.k, config.rng_seed),
        Init::Provided(p) => Ok(p.clone()),
    }
}

fn nearest(row: &[f64], prototypes: &[Point]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, p) in prototypes.iter().enumerate() {
        let d = sq_dist(row, p);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

/// Index of the nearest prototype for every datum, lowest index on ties.
pub fn assign_step(data: &EmbeddingDataset, prototypes: &[Point]) -> Vec<usize> {
    assert!(!prototypes.is_empty(), "assign_step needs at least one prototype");
    data.rows().map(|r| nearest(r, prototypes)).collect()
}

/// Projection weights `wᵢ = ‖x − dᵢ‖ / Σₚ ‖x − dₚ‖` of a prototype onto its
/// members. A cluster whose members all sit on the prototype gets uniform
/// weights.
pub fn projection_weights(prototype: &[f64], members: &[&[f64]]) -> Result<WeightVector> {
    if members.is_empty() {
        return Err(Error::invalid("cluster has no members"));
    }
    let distances: Vec<f64> = members.iter().map(|m| dist(prototype, m)).collect();
    let total: f64 = distances.iter().sum();
    if total < DEGENERATE_DISTANCE_SUM {
        return WeightVector::uniform(members.len());
    }
    Ok(WeightVector::from_normalized(
        distances.into_iter().map(|d| d / total).collect(),
    ))
}

/// Projection weights for the members of `cluster` under `assignments`.
pub fn member_weights(
    data: &EmbeddingDataset,
    prototype: &[f64],
    assignments: &[usize],
    cluster: usize,
) -> Result<MemberWeights> {
    let member_indices: Vec<usize> = assignments
        .iter()
        .enumerate()
        .filter(|(_, &a)| a == cluster)
        .map(|(i, _)| i)
        .collect();
    let members: Vec<&[f64]> = member_indices.iter().map(|&i| data.row(i)).collect();
    let weights = projection_weights(prototype, &members)?;
    Ok(MemberWeights {
        weights,
        member_indices,
    })
}

fn weighted_member_sum(dim: usize, members: &[&[f64]], weights: &[f64]) -> Point {
    let mut next = vec![0.0; dim];
    for (m, w) in members.iter().zip(weights) {
        for (n, v) in next.iter_mut().zip(m.iter()) {
            *n += w * v;
        }
    }
    Point::from_vec_unchecked(next)
}

/// One parallel-projection step of a prototype onto its members, each
/// member being a singleton set. With the weights summing to one the step
/// reduces to the weighted member sum `Σᵢ wᵢ dᵢ`.
pub fn pocs_update_step(prototype: &[f64], members: &[&[f64]]) -> Result<Point> {
    let weights = projection_weights(prototype, members)?;
    if let Some(m) = members.iter().find(|m| m.len() != prototype.len()) {
        return Err(Error::DimensionMismatch {
            expected: prototype.len(),
            actual: m.len(),
        });
    }
    Ok(weighted_member_sum(prototype.len(), members, weights.as_slice()))
}

fn cluster_members(assignments: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); k];
    for (i, &a) in assignments.iter().enumerate() {
        members[a].push(i);
    }
    members
}

/// Moves, for each empty cluster, the datum farthest from its own prototype
/// into that cluster and puts the prototype on it. Only data whose cluster
/// keeps at least one other member are eligible.
fn reseed_empty(data: &EmbeddingDataset, prototypes: &mut [Point], assignments: &mut [usize]) {
    let k = prototypes.len();
    let mut counts = vec![0usize; k];
    for &a in assignments.iter() {
        counts[a] += 1;
    }
    for j in 0..k {
        if counts[j] > 0 {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, &a) in assignments.iter().enumerate() {
            if counts[a] < 2 {
                continue;
            }
            let d = sq_dist(data.row(i), &prototypes[a]);
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        if let Some((i, _)) = best {
            counts[assignments[i]] -= 1;
            assignments[i] = j;
            counts[j] = 1;
            prototypes[j] = Point::from(data.row(i));
        }
    }
}

fn sse_of(data: &EmbeddingDataset, prototypes: &[Point], assignments: &[usize]) -> f64 {
    data.rows()
        .zip(assignments)
        .map(|(r, &a)| sq_dist(r, &prototypes[a]))
        .sum()
}

fn max_displacement(old: &[Point], new: &[Point]) -> f64 {
    old.iter()
        .zip(new)
        .map(|(a, b)| dist(a, b))
        .fold(0.0, f64::max)
}

/// `Σ_clusters Σᵢ wᵢ ‖x − dᵢ‖²` with per-cluster projection weights.
/// Empty clusters contribute nothing.
pub fn pocs_objective(data: &EmbeddingDataset, prototypes: &[Point], assignments: &[usize]) -> f64 {
    let members = cluster_members(assignments, prototypes.len());
    let mut total = 0.0;
    for (p, idx) in prototypes.iter().zip(&members) {
        if idx.is_empty() {
            continue;
        }
        let rows: Vec<&[f64]> = idx.iter().map(|&i| data.row(i)).collect();
        let w = projection_weights(p, &rows).expect("nonempty cluster");
        total += rows
            .iter()
            .zip(w.as_slice())
            .map(|(r, w)| w * sq_dist(p, r))
            .sum::<f64>();
    }
    total
}

/// POCS-based clustering.
///
/// Each outer iteration assigns every datum to its nearest prototype and
/// then applies one parallel-projection step per cluster. The fit stops when
/// an assignment pass reproduces the previous one, when no prototype moves
/// by `tol` or more, or after `max_iter` iterations. The reported
/// assignments are always nearest-prototype for the returned prototypes.
pub fn pocs_fit(data: &EmbeddingDataset, config: &ClusterConfig) -> Result<ClusterModel> {
    let mut prototypes = initial_prototypes(data, config)?;
    let k = config.k;
    let mut previous: Option<Vec<usize>> = None;
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    for iter in 1..=config.max_iter {
        iterations = iter;
        let mut assignments = assign_step(data, &prototypes);
        if previous.as_ref() == Some(&assignments) {
            converged = true;
            break;
        }
        reseed_empty(data, &mut prototypes, &mut assignments);

        let members = cluster_members(&assignments, k);
        let updated: Vec<Point> = prototypes
            .iter()
            .zip(&members)
            .map(|(p, idx)| {
                if idx.is_empty() {
                    return p.clone();
                }
                let rows: Vec<&[f64]> = idx.iter().map(|&i| data.row(i)).collect();
                pocs_update_step(p, &rows).expect("nonempty cluster of matching dimension")
            })
            .collect();
        let moved = max_displacement(&prototypes, &updated);
        prototypes = updated;
        trace.push(pocs_objective(data, &prototypes, &assignments));
        if moved < config.tol {
            converged = true;
            break;
        }
        previous = Some(assignments);
    }

    let assignments = assign_step(data, &prototypes);
    let sse = sse_of(data, &prototypes, &assignments);
    let own_objective = pocs_objective(data, &prototypes, &assignments);
    Ok(ClusterModel {
        prototypes,
        assignments,
        sse,
        own_objective,
        iterations,
        converged,
        objective_trace: trace,
    })
}

/// Lloyd's K-Means. Plain K-Means uses `Init::RandomPick`, K-Means++ uses
/// `Init::KMeansPlusPlus`. Terminates when the assignment no longer changes
/// or after `max_iter` iterations.
pub fn kmeans_fit(data: &EmbeddingDataset, config: &ClusterConfig) -> Result<ClusterModel> {
    let mut prototypes = initial_prototypes(data, config)?;
    let k = config.k;
    let dim = data.dim();
    let mut previous: Option<Vec<usize>> = None;
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    for iter in 1..=config.max_iter {
        iterations = iter;
        let mut assignments = assign_step(data, &prototypes);
        if previous.as_ref() == Some(&assignments) {
            converged = true;
            break;
        }
        reseed_empty(data, &mut prototypes, &mut assignments);

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (r, &a) in data.rows().zip(&assignments) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(r) {
                *s += v;
            }
        }
        for ((p, s), &c) in prototypes.iter_mut().zip(sums).zip(&counts) {
            if c > 0 {
                let inv = c as f64;
                *p = Point::from_vec_unchecked(s.into_iter().map(|v| v / inv).collect());
            }
        }
        trace.push(sse_of(data, &prototypes, &assignments));
        previous = Some(assignments);
    }

    let assignments = assign_step(data, &prototypes);
    let sse = sse_of(data, &prototypes, &assignments);
    Ok(ClusterModel {
        prototypes,
        assignments,
        sse,
        own_objective: sse,
        iterations,
        converged,
        objective_trace: trace,
    })
}

/// FCM memberships of one datum given squared distances to each prototype.
fn membership_row(sq_dists: &[f64], fuzzifier: f64, out: &mut [f64]) {
    let coincident = sq_dists.iter().filter(|d| **d == 0.0).count();
    if coincident > 0 {
        let share = 1.0 / coincident as f64;
        for (u, d) in out.iter_mut().zip(sq_dists) {
            *u = if *d == 0.0 { share } else { 0.0 };
        }
        return;
    }
    // u_i = 1 / Σ_p (d_i / d_p)^(2/(m-1)); scaled by the nearest distance
    // so every ratio stays in (0, 1].
    let exponent = 1.0 / (fuzzifier - 1.0);
    let closest = sq_dists.iter().copied().fold(f64::INFINITY, f64::min);
    let mut total = 0.0;
    for (u, d) in out.iter_mut().zip(sq_dists) {
        *u = (closest / d).powf(exponent);
        total += *u;
    }
    out.iter_mut().for_each(|u| *u /= total);
}

/// Membership matrix for fixed prototypes.
pub fn fcm_memberships(data: &EmbeddingDataset, prototypes: &[Point], fuzzifier: f64) -> Array2<f64> {
    let k = prototypes.len();
    let mut u = Array2::zeros((data.len(), k));
    let mut sq = vec![0.0; k];
    for (i, r) in data.rows().enumerate() {
        for (s, p) in sq.iter_mut().zip(prototypes) {
            *s = sq_dist(r, p);
        }
        let row = u.row_mut(i).into_slice().expect("standard layout");
        membership_row(&sq, fuzzifier, row);
    }
    u
}

fn fcm_objective(data: &EmbeddingDataset, prototypes: &[Point], u: &Array2<f64>, fuzzifier: f64) -> f64 {
    let mut total = 0.0;
    for (i, r) in data.rows().enumerate() {
        for (j, p) in prototypes.iter().enumerate() {
            total += u[[i, j]].powf(fuzzifier) * sq_dist(r, p);
        }
    }
    total
}

fn fcm_prototypes(data: &EmbeddingDataset, u: &Array2<f64>, fuzzifier: f64, previous: &[Point]) -> Vec<Point> {
    previous
        .iter()
        .enumerate()
        .map(|(j, prev)| {
            let mut acc = vec![0.0; data.dim()];
            let mut mass = 0.0;
            for (i, r) in data.rows().enumerate() {
                let w = u[[i, j]].powf(fuzzifier);
                mass += w;
                for (a, v) in acc.iter_mut().zip(r) {
                    *a += w * v;
                }
            }
            if mass > 0.0 {
                Point::from_vec_unchecked(acc.into_iter().map(|a| a / mass).collect())
            } else {
                prev.clone()
            }
        })
        .collect()
}

/// Fuzzy C-Means with fuzzifier `m > 1`. Alternates membership and
/// prototype updates until the largest membership change is below `tol`
/// or `max_iter` is reached.
pub fn fcm_fit(data: &EmbeddingDataset, config: &ClusterConfig, fuzzifier: f64) -> Result<FuzzyModel> {
    if !(fuzzifier.is_finite() && fuzzifier > 1.0) {
        return Err(Error::invalid(format!("fuzzifier must exceed 1, got {fuzzifier}")));
    }
    let mut prototypes = initial_prototypes(data, config)?;
    let mut memberships: Option<Array2<f64>> = None;
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    for iter in 1..=config.max_iter {
        iterations = iter;
        let u = fcm_memberships(data, &prototypes, fuzzifier);
        let change = memberships.as_ref().map(|prev| {
            prev.iter()
                .zip(u.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        });
        memberships = Some(u);
        if change.is_some_and(|c| c < config.tol) {
            converged = true;
            break;
        }
        let u = memberships.as_ref().expect("just set");
        prototypes = fcm_prototypes(data, u, fuzzifier, &prototypes);
        trace.push(fcm_objective(data, &prototypes, u, fuzzifier));
    }

    let memberships = memberships.expect("max_iter >= 1");
    let objective = fcm_objective(data, &prototypes, &memberships, fuzzifier);
    if !objective.is_finite() {
        return Err(Error::NonFinite("FCM objective diverged".into()));
    }
    Ok(FuzzyModel {
        prototypes,
        memberships,
        fuzzifier,
        objective,
        iterations,
        converged,
        objective_trace: trace,
    })
}

/// Row-wise argmax of the membership matrix, lowest index on ties.
pub fn hard_assign(model: &FuzzyModel) -> Vec<usize> {
    model
        .memberships
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &u) in row.iter().enumerate() {
                if u > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}
