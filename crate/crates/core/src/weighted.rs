//! Optimization on weighted complete graphs and the random assignment problem.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{self, edge_at, GraphKind, GraphSolution, WeightTable};
use crate::law::InputLaw;
use crate::seed;
use crate::solution::Encoding;

/// Largest assignment size handled by exhaustive enumeration.
pub const ASSIGNMENT_ENUM_CAP: usize = 8;

/// Nonnegative weights on the `p(p−1)/2` edges of the complete graph.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeWeights {
    table: WeightTable,
}

impl EdgeWeights {
    /// Weights listed in [`graph::edge_index`] order.
    pub fn new(p: usize, weights: &[f64]) -> Result<Self> {
        if weights.len() != p * p.saturating_sub(1) / 2 {
            return Err(Error::InvalidArgument(format!(
                "{} weights for {p} vertices",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument("edge weights must be finite and >= 0".into()));
        }
        Ok(Self { table: WeightTable::from_edge_list(p, weights) })
    }

    pub fn sample<R: Rng + ?Sized>(p: usize, law: InputLaw, rng: &mut R) -> Result<Self> {
        Self::new(p, &law.sample_n(p * p.saturating_sub(1) / 2, rng))
    }

    pub fn p(&self) -> usize {
        self.table.n()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.table.get(i, j)
    }

    pub fn table(&self) -> &WeightTable {
        &self.table
    }
}

pub fn complete_graph_solve(ew: &EdgeWeights, kind: GraphKind) -> Result<GraphSolution> {
    graph::solve(ew.table(), kind).map(|(g, _)| g)
}

/// Square cost matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    c: Vec<f64>,
}

impl CostMatrix {
    pub fn new(n: usize, c: Vec<f64>) -> Result<Self> {
        if n == 0 || c.len() != n * n {
            return Err(Error::InvalidArgument(format!("{} entries for an {n}x{n} matrix", c.len())));
        }
        if c.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("costs must be finite".into()));
        }
        Ok(Self { n, c })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("cost matrix must be square".into()));
        }
        Self::new(n, rows.concat())
    }

    pub fn sample<R: Rng + ?Sized>(n: usize, law: InputLaw, rng: &mut R) -> Result<Self> {
        Self::new(n, law.sample_n(n * n, rng))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.c[i * self.n + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.c
    }

    pub fn cost(&self, pi: &PermutationSolution) -> f64 {
        pi.pi.iter().enumerate().map(|(i, &j)| self.get(i, j as usize)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PermutationSolution {
    pub pi: Vec<u32>,
}

impl PermutationSolution {
    pub fn new(pi: Vec<u32>) -> Result<Self> {
        let n = pi.len();
        let mut seen = vec![false; n];
        for &j in &pi {
            let j = j as usize;
            if j >= n || std::mem::replace(&mut seen[j], true) {
                return Err(Error::InvalidArgument(format!("{pi:?} is not a permutation")));
            }
        }
        Ok(Self { pi })
    }

    pub fn identity(n: usize) -> Self {
        Self { pi: (0..n as u32).collect() }
    }

    pub fn encoding(&self) -> Encoding {
        Encoding::Permutation(self.pi.clone())
    }
}

/// Normalized Hamming distance `(1/n) #{i : p1(i) ≠ p2(i)}`.
pub fn perm_metric(p1: &PermutationSolution, p2: &PermutationSolution) -> f64 {
    assert_eq!(p1.pi.len(), p2.pi.len(), "permutations of different size");
    let diff = p1.pi.iter().zip(&p2.pi).filter(|(a, b)| a != b).count();
    diff as f64 / p1.pi.len() as f64
}

/// Minimum-cost assignment by the Hungarian method with row potentials,
/// `O(n³)`.
pub fn assignment_solve(c: &CostMatrix) -> PermutationSolution {
    let n = c.n();
    // 1-based arrays; column 0 is a sentinel.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = c.get(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut pi = vec![0u32; n];
    for j in 1..=n {
        pi[row_of[j] - 1] = (j - 1) as u32;
    }
    PermutationSolution { pi }
}

/// Visits every permutation of `0..n` in lexicographic order.
pub fn for_each_permutation(n: usize, mut visit: impl FnMut(&[u32])) {
    let mut p: Vec<u32> = (0..n as u32).collect();
    loop {
        visit(&p);
        // Next lexicographic permutation.
        let Some(i) = (1..n).rev().find(|&i| p[i - 1] < p[i]) else {
            return;
        };
        let j = (i..n).rev().find(|&j| p[j] > p[i - 1]).unwrap();
        p.swap(i - 1, j);
        p[i..].reverse();
    }
}

/// All `n!` permutations with their costs.
pub fn enumerate_assignments(c: &CostMatrix) -> Result<Vec<(PermutationSolution, f64)>> {
    if c.n() > ASSIGNMENT_ENUM_CAP {
        return Err(Error::SizeExceeded {
            what: "assignment enumeration",
            size: c.n(),
            cap: ASSIGNMENT_ENUM_CAP,
        });
    }
    let mut out = Vec::new();
    for_each_permutation(c.n(), |p| {
        let sol = PermutationSolution { pi: p.to_vec() };
        let cost = c.cost(&sol);
        out.push((sol, cost));
    });
    Ok(out)
}

/// Exhaustive minimum; the lexicographically first permutation wins ties.
pub fn assignment_brute_force(c: &CostMatrix) -> Result<PermutationSolution> {
    let mut best: Option<(PermutationSolution, f64)> = None;
    for (p, cost) in enumerate_assignments(c)? {
        if best.as_ref().is_none_or(|(_, b)| cost < *b) {
            best = Some((p, cost));
        }
    }
    Ok(best.expect("n >= 1").0)
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeMembership {
    pub p: usize,
    pub kind: GraphKind,
    pub reps: usize,
    /// Empirical `P(e ∈ E(Ĝ))` per edge in [`graph::edge_index`] order.
    pub frequency: Vec<f64>,
    pub std_err: Vec<f64>,
    /// `2 e_max / (p − 1)`.
    pub bound: f64,
}

impl EdgeMembership {
    /// Edges whose frequency exceeds `bound + k·SE`.
    pub fn violations(&self, k: f64) -> Vec<(usize, usize)> {
        (0..self.frequency.len())
            .filter(|&e| self.frequency[e] > self.bound + k * self.std_err[e])
            .map(|e| edge_at(self.p, e))
            .collect()
    }
}

/// Monte Carlo frequency with which each edge belongs to the optimal graph
/// under i.i.d. edge weights.
pub fn edge_membership_rate(
    p: usize,
    kind: GraphKind,
    law: InputLaw,
    reps: usize,
    seed: u64,
) -> Result<EdgeMembership> {
    if reps == 0 || p < 2 {
        return Err(Error::InvalidArgument("need reps >= 1 and p >= 2".into()));
    }
    let m = p * (p - 1) / 2;
    let counts = (0..reps)
        .into_par_iter()
        .map(|r| -> Result<Vec<u32>> {
            let mut rng = seed::substream(seed, &[r as u64, seed::purpose::INPUTS]);
            let ew = EdgeWeights::sample(p, law, &mut rng)?;
            let g = complete_graph_solve(&ew, kind)?;
            let mut hit = vec![0u32; m];
            for &(a, b) in &g.edges {
                hit[graph::edge_index(p, a as usize, b as usize)] = 1;
            }
            Ok(hit)
        })
        .try_reduce(
            || vec![0u32; m],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    let frequency: Vec<f64> = counts.iter().map(|&c| c as f64 / reps as f64).collect();
    let std_err = frequency
        .iter()
        .map(|&f| (f * (1.0 - f) / reps as f64).sqrt())
        .collect();
    Ok(EdgeMembership {
        p,
        kind,
        reps,
        frequency,
        std_err,
        bound: 2.0 * graph::e_max(kind) / (p - 1) as f64,
    })
}
