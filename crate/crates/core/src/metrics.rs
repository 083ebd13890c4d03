//! Scores for a fitted partition.

use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;

use crate::data::EmbeddingDataset;
use crate::error::{Error, Result};
use crate::point::{dist, sq_dist, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Σ ‖x − c(x)‖²
    Sse,
    /// Σ ‖x − c(x)‖
    SumDist,
}

pub fn clustering_error(
    data: &EmbeddingDataset,
    prototypes: &[Point],
    assignments: &[usize],
    kind: ErrorKind,
) -> f64 {
    let per_datum = data.rows().zip(assignments).map(|(r, &a)| match kind {
        ErrorKind::Sse => sq_dist(r, &prototypes[a]),
        ErrorKind::SumDist => dist(r, &prototypes[a]),
    });
    per_datum.sum()
}

/// Best one-to-one matching of clusters to classes, as a percentage of
/// correctly matched data. Clusters left without a class (or classes
/// without a cluster) contribute nothing.
pub fn accuracy(assignments: &[usize], labels: &[usize], k: usize, n_classes: usize) -> Result<f64> {
    if assignments.len() != labels.len() {
        return Err(Error::LengthMismatch {
            what: "labels",
            expected: assignments.len(),
            actual: labels.len(),
        });
    }
    if k == 0 || n_classes == 0 {
        return Err(Error::invalid("accuracy needs k >= 1 and at least one class"));
    }
    if assignments.is_empty() {
        return Err(Error::invalid("accuracy of an empty partition"));
    }
    if let Some(a) = assignments.iter().find(|&&a| a >= k) {
        return Err(Error::invalid(format!("cluster index {a} out of range for k = {k}")));
    }
    if let Some(l) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::invalid(format!("label {l} out of range for {n_classes} classes")));
    }

    let mut counts = vec![0i64; k * n_classes];
    for (&a, &l) in assignments.iter().zip(labels) {
        counts[a * n_classes + l] += 1;
    }
    // The solver wants rows <= columns.
    let matrix = if k <= n_classes {
        Matrix::from_vec(k, n_classes, counts).expect("shape matches")
    } else {
        let mut t = vec![0i64; k * n_classes];
        for a in 0..k {
            for l in 0..n_classes {
                t[l * k + a] = counts[a * n_classes + l];
            }
        }
        Matrix::from_vec(n_classes, k, t).expect("shape matches")
    };
    let (matched, _) = kuhn_munkres(&matrix);
    Ok(matched as f64 / assignments.len() as f64 * 100.0)
}
