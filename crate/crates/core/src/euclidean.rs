//! Euclidean TSP and MST with `q`-power edge weights, the sister
//! constructions that move a perturbed optimizer back onto the original
//! points, and nearest-neighbor statistics.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{self, GraphKind, GraphSolution, WeightTable};

pub use crate::graph::graph_metric;

/// Largest dimension for which a kissing number is tabulated.
const KISSING: [(usize, usize); 3] = [(2, 6), (3, 12), (4, 24)];

/// Kissing number κ(d) for d ∈ {2, 3, 4}.
pub fn kissing_number(d: usize) -> Option<usize> {
    KISSING.iter().find(|(k, _)| *k == d).map(|&(_, v)| v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointLaw {
    /// i.i.d. uniform on `[0, 1]^d`.
    UniformBox,
    /// i.i.d. standard isotropic Gaussian.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointConfiguration {
    points: Vec<Vec<f64>>,
    d: usize,
    q: f64,
}

impl PointConfiguration {
    pub fn new(points: Vec<Vec<f64>>, q: f64) -> Result<Self> {
        let d = points.first().map_or(0, Vec::len);
        if d < 2 {
            return Err(Error::InvalidArgument(format!("dimension must be >= 2, got {d}")));
        }
        if points.iter().any(|p| p.len() != d || p.iter().any(|x| !x.is_finite())) {
            return Err(Error::InvalidArgument("points must be finite and of equal dimension".into()));
        }
        if !(1.0..d as f64).contains(&q) {
            return Err(Error::InvalidArgument(format!("q must lie in [1, {d}), got {q}")));
        }
        Ok(Self { points, d, q })
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        crate::solution::euclidean(&self.points[i], &self.points[j])
    }

    /// `||x_i - x_j||^q`.
    pub fn edge_weight(&self, i: usize, j: usize) -> f64 {
        power(self.distance(i, j), self.q)
    }

    pub fn weight_table(&self) -> WeightTable {
        WeightTable::from_fn(self.n(), |i, j| self.edge_weight(i, j))
    }

    /// Copy with point `l` moved to `to`.
    pub fn with_point(&self, l: usize, to: Vec<f64>) -> Self {
        let mut c = self.clone();
        c.points[l] = to;
        c
    }

    /// Objective value `Σ_{e ∈ E(g)} ||x_i − x_j||^q`.
    pub fn length(&self, g: &GraphSolution) -> f64 {
        g.edges
            .iter()
            .map(|&(a, b)| self.edge_weight(a as usize, b as usize))
            .sum()
    }
}

#[inline]
fn power(x: f64, q: f64) -> f64 {
    if q == 1.0 {
        x
    } else if q == 2.0 {
        x * x
    } else {
        x.powf(q)
    }
}

/// Draws one point of dimension `d`.
pub fn sample_point<R: Rng + ?Sized>(d: usize, law: PointLaw, rng: &mut R) -> Vec<f64> {
    (0..d)
        .map(|_| match law {
            PointLaw::UniformBox => rng.random::<f64>(),
            PointLaw::Gaussian => StandardNormal.sample(rng),
        })
        .collect()
}

pub fn sample_points<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    q: f64,
    law: PointLaw,
    rng: &mut R,
) -> Result<PointConfiguration> {
    PointConfiguration::new((0..n).map(|_| sample_point(d, law, rng)).collect(), q)
}

pub fn tsp_solve(cfg: &PointConfiguration) -> Result<GraphSolution> {
    graph::held_karp(&cfg.weight_table()).map(|(g, _)| g)
}

pub fn mst_solve(cfg: &PointConfiguration) -> Result<GraphSolution> {
    if cfg.n() < 2 {
        return Err(Error::InvalidArgument("MST needs at least 2 points".into()));
    }
    Ok(graph::kruskal(&cfg.weight_table()).0)
}

/// Every Hamiltonian cycle (`n ≤ 10`) or spanning tree (`n ≤ 8`).
pub fn enumerate_solutions(cfg: &PointConfiguration, kind: GraphKind) -> Result<Vec<GraphSolution>> {
    if kind == GraphKind::Matching {
        return Err(Error::InvalidArgument("Euclidean matchings are not supported".into()));
    }
    Ok(graph::enumerate(&cfg.weight_table(), kind)?
        .into_iter()
        .map(|(g, _)| g)
        .collect())
}

/// Index of the nearest other point to `i` (smallest index on ties).
pub fn nearest_neighbor(cfg: &PointConfiguration, i: usize) -> usize {
    let mut best = (f64::INFINITY, usize::MAX);
    for j in 0..cfg.n() {
        if j != i {
            let dj = cfg.distance(i, j);
            if dj < best.0 {
                best = (dj, j);
            }
        }
    }
    best.1
}

/// `min_{j ≠ i} ||x_j − x_i||`.
pub fn nn_min_distance(cfg: &PointConfiguration, i: usize) -> f64 {
    cfg.distance(i, nearest_neighbor(cfg, i))
}

fn check_sister_args(cfg: &PointConfiguration, perturbed: &PointConfiguration, l: usize) -> Result<()> {
    if cfg.n() != perturbed.n() || l >= cfg.n() {
        return Err(Error::InvalidArgument(format!(
            "vertex {l} / sizes {} vs {} do not match",
            cfg.n(),
            perturbed.n()
        )));
    }
    Ok(())
}

/// Sister tour of the perturbed optimum: cut `l` out of the perturbed optimal
/// tour, close the gap, then splice `l` next to its nearest neighbor `k` in
/// the original points. Differs from `optimal_perturbed` in at most six edges.
pub fn tsp_sister_tour(
    cfg: &PointConfiguration,
    perturbed: &PointConfiguration,
    l: usize,
    optimal_perturbed: &GraphSolution,
) -> Result<GraphSolution> {
    check_sister_args(cfg, perturbed, l)?;
    let n = cfg.n();
    if n < 3 {
        return Err(Error::DegenerateNeighborhood(n));
    }
    if cfg.q() != 1.0 {
        return Err(Error::InvalidArgument("the sister tour is defined for q = 1".into()));
    }
    if n == 3 {
        return Ok(GraphSolution::from_cycle(&[0, 1, 2]));
    }
    let mut adj: Vec<Vec<usize>> = (0..n).map(|v| optimal_perturbed.neighbors(v)).collect();
    let original = adj.clone();
    let remove = |adj: &mut Vec<Vec<usize>>, a: usize, b: usize| {
        adj[a].retain(|&x| x != b);
        adj[b].retain(|&x| x != a);
    };
    let add = |adj: &mut Vec<Vec<usize>>, a: usize, b: usize| {
        adj[a].push(b);
        adj[b].push(a);
    };
    let (l1, l2) = (original[l][0], original[l][1]);
    remove(&mut adj, l, l1);
    remove(&mut adj, l, l2);
    add(&mut adj, l1, l2);
    let k = nearest_neighbor(cfg, l);
    // Neighbor of k in the shortened cycle that was also its neighbor before.
    let k1 = adj[k]
        .iter()
        .copied()
        .filter(|v| original[k].contains(v))
        .min()
        .expect("k keeps one of its original neighbors");
    remove(&mut adj, k, k1);
    add(&mut adj, k, l);
    add(&mut adj, k1, l);
    let edges = (0..n).flat_map(|a| adj[a].iter().filter(move |&&b| a < b).map(move |&b| (a, b)));
    Ok(GraphSolution::from_edges(edges.collect::<Vec<_>>(), GraphKind::Tour))
}

/// Sister tree of the perturbed optimum: delete the edges at `l`, chain its
/// former neighbors in index order, and attach `l` to its nearest neighbor in
/// the original points.
pub fn mst_sister_tree(
    cfg: &PointConfiguration,
    perturbed: &PointConfiguration,
    l: usize,
    optimal_perturbed: &GraphSolution,
) -> Result<GraphSolution> {
    check_sister_args(cfg, perturbed, l)?;
    if cfg.n() < 2 {
        return Err(Error::DegenerateNeighborhood(cfg.n()));
    }
    let nbrs = optimal_perturbed.neighbors(l);
    let mut edges: Vec<(usize, usize)> = optimal_perturbed
        .edges
        .iter()
        .map(|&(a, b)| (a as usize, b as usize))
        .filter(|&(a, b)| a != l && b != l)
        .collect();
    edges.extend(nbrs.windows(2).map(|w| (w[0], w[1])));
    edges.push((nearest_neighbor(cfg, l), l));
    Ok(GraphSolution::from_edges(edges, GraphKind::Tree))
}

/// Excess allowance for the sister tour: `2 min_{j≠l} ||x_j − x_l||`.
pub fn tsp_sister_excess_bound(cfg: &PointConfiguration, l: usize) -> f64 {
    2.0 * nn_min_distance(cfg, l)
}

/// Excess allowance for the sister tree:
/// `(2^q − 1) Σ_i ||x_{l_i} − x'_l||^q + min_{j≠l} ||x_j − x_l||^q`.
pub fn mst_sister_excess_bound(
    cfg: &PointConfiguration,
    perturbed: &PointConfiguration,
    l: usize,
    optimal_perturbed: &GraphSolution,
) -> f64 {
    let q = cfg.q();
    let around: f64 = optimal_perturbed
        .neighbors(l)
        .into_iter()
        .map(|v| perturbed.edge_weight(v, l))
        .sum();
    (2f64.powf(q) - 1.0) * around + power(nn_min_distance(cfg, l), q)
}
