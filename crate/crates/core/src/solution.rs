//! Canonical encodings of elements of the parameter space.

use serde::{Deserialize, Serialize};

/// Family-specific canonical form of a solution. Two equal solutions have
/// identical encodings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Encoding {
    /// Sorted edge list, each edge stored as `(i, j)` with `i < j`.
    Edges(Vec<(u32, u32)>),
    /// `pi[i]` is the column assigned to row `i`.
    Permutation(Vec<u32>),
    /// ±1 spins with the gauge entry fixed to +1.
    Spins(Vec<i8>),
    /// Vertex ids along the root-to-leaf path, generation 1 first.
    Leaf(Vec<u32>),
    /// Gauged unit vector, or an arbitrary point for fixture clouds.
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionPoint {
    pub encoding: Encoding,
    pub objective: f64,
}

impl SolutionPoint {
    pub fn new(encoding: Encoding, objective: f64) -> Self {
        Self {
            encoding,
            objective,
        }
    }
}

/// Euclidean distance between two equal-length slices.
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
