//! Finite metric geometry on solution clouds: packing numbers, internal
//! covering numbers and the partial cover that backs the stability statistic.
//!
//! A pair of points at distance `d` is "within" `delta` when
//! `d <= delta + DIST_TOL`. Packings need every pairwise distance to exceed
//! `delta`, so a pair at exactly `delta` conflicts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solution::{Encoding, SolutionPoint};

/// Absolute tolerance used to classify `distance <= delta`.
pub const DIST_TOL: f64 = 1e-12;

/// Default cap on the number of distinct points for exact packing and covering.
pub const DEFAULT_EXACT_CAP: usize = 64;

/// Caps for the enumeration branch of [`partial_cover_count`].
pub const PARTIAL_EXACT_MAX_POINTS: usize = 12;
pub const PARTIAL_EXACT_MAX_SUBSETS: u64 = 50_000;

#[inline]
pub fn within(d: f64, delta: f64) -> bool {
    d <= delta + DIST_TOL
}

/// A deduplicated set of solutions with pairwise distances. Each point keeps
/// the number of times it was inserted (`weights`), so fractions of
/// perturbation blocks can be discarded even after duplicates collapse.
#[derive(Debug, Clone)]
pub struct SolutionCloud {
    points: Vec<SolutionPoint>,
    weights: Vec<usize>,
    dist: Vec<f64>,
}

impl SolutionCloud {
    /// Builds a cloud from solutions, merging those with identical encodings.
    pub fn from_points<F>(points: impl IntoIterator<Item = SolutionPoint>, metric: F) -> Self
    where
        F: Fn(&SolutionPoint, &SolutionPoint) -> f64,
    {
        let mut uniq: Vec<SolutionPoint> = Vec::new();
        let mut weights: Vec<usize> = Vec::new();
        for p in points {
            match uniq.iter().position(|q| q.encoding == p.encoding) {
                Some(i) => weights[i] += 1,
                None => {
                    uniq.push(p);
                    weights.push(1);
                }
            }
        }
        let n = uniq.len();
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = metric(&uniq[i], &uniq[j]).abs();
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        Self {
            points: uniq,
            weights,
            dist,
        }
    }

    /// Points on the real line (a common fixture).
    pub fn line(xs: &[f64]) -> Self {
        Self::euclidean(&xs.iter().map(|&x| vec![x]).collect::<Vec<_>>())
    }

    /// Points in R^d under the Euclidean distance.
    pub fn euclidean(coords: &[Vec<f64>]) -> Self {
        Self::from_points(
            coords
                .iter()
                .map(|c| SolutionPoint::new(Encoding::Vector(c.clone()), 0.0)),
            |a, b| match (&a.encoding, &b.encoding) {
                (Encoding::Vector(x), Encoding::Vector(y)) => crate::solution::euclidean(x, y),
                _ => unreachable!("euclidean clouds hold vectors"),
            },
        )
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[SolutionPoint] {
        &self.points
    }

    pub fn weights(&self) -> &[usize] {
        &self.weights
    }

    /// Total multiplicity (number of inserted solutions before deduplication).
    pub fn total_weight(&self) -> usize {
        self.weights.iter().sum()
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.points.len() + j]
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// Smallest positive pairwise distance, if any.
    pub fn min_positive_distance(&self) -> Option<f64> {
        self.dist
            .iter()
            .copied()
            .filter(|&d| d > 0.0)
            .min_by(f64::total_cmp)
    }

    /// Checks the triangle inequality on every triple.
    pub fn satisfies_triangle_inequality(&self, tol: f64) -> bool {
        let n = self.len();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if self.dist(i, k) > self.dist(i, j) + self.dist(j, k) + tol {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Sub-cloud restricted to `keep` (indices into this cloud).
    pub fn subset(&self, keep: &[usize]) -> Self {
        let n = keep.len();
        let mut dist = vec![0.0; n * n];
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                dist[a * n + b] = self.dist(i, j);
            }
        }
        Self {
            points: keep.iter().map(|&i| self.points[i].clone()).collect(),
            weights: keep.iter().map(|&i| self.weights[i]).collect(),
            dist,
        }
    }
}

/// Minimal fixed-width bitset over `0..len`.
#[derive(Debug, Clone, PartialEq, Eq)]
struct BitSet {
    words: Vec<u64>,
}

impl BitSet {
    fn new(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
        }
    }

    fn full(len: usize) -> Self {
        let mut s = Self::new(len);
        for i in 0..len {
            s.insert(i);
        }
        s
    }

    #[inline]
    fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    #[inline]
    fn contains(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    fn intersection_count(&self, other: &Self) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    fn difference(&self, other: &Self) -> Self {
        Self {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & !b)
                .collect(),
        }
    }

    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &bits)| {
            let mut b = bits;
            std::iter::from_fn(move || {
                if b == 0 {
                    None
                } else {
                    let t = b.trailing_zeros() as usize;
                    b &= b - 1;
                    Some(w * 64 + t)
                }
            })
        })
    }
}

/// Size of a maximal δ-packing built greedily in point order. A lower bound
/// on the packing number.
pub fn packing_number_greedy(cloud: &SolutionCloud, delta: f64) -> usize {
    let mut chosen: Vec<usize> = Vec::new();
    for i in 0..cloud.len() {
        if chosen.iter().all(|&c| !within(cloud.dist(i, c), delta)) {
            chosen.push(i);
        }
    }
    chosen.len()
}

/// Exact δ-packing number with the default cap.
pub fn packing_number_exact(cloud: &SolutionCloud, delta: f64) -> Result<usize> {
    packing_number_exact_capped(cloud, delta, DEFAULT_EXACT_CAP)
}

/// Exact δ-packing number: the maximum set of points with all pairwise
/// distances above `delta`. Solved as a maximum clique in the "far apart"
/// graph by branch and bound with greedy-coloring bounds.
pub fn packing_number_exact_capped(cloud: &SolutionCloud, delta: f64, cap: usize) -> Result<usize> {
    let n = cloud.len();
    if n > cap {
        return Err(Error::SizeExceeded {
            what: "exact packing",
            size: n,
            cap,
        });
    }
    if n == 0 {
        return Ok(0);
    }
    let adj: Vec<BitSet> = (0..n)
        .map(|i| {
            let mut s = BitSet::new(n);
            for j in 0..n {
                if i != j && !within(cloud.dist(i, j), delta) {
                    s.insert(j);
                }
            }
            s
        })
        .collect();
    let mut best = packing_number_greedy(cloud, delta);
    // Candidates ordered by decreasing degree, which keeps the colorings tight.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| std::cmp::Reverse(adj[v].count()));
    max_clique_expand(&adj, order, 0, &mut best);
    Ok(best)
}

fn max_clique_expand(adj: &[BitSet], cand: Vec<usize>, size: usize, best: &mut usize) {
    let (order, colors) = color_sort(adj, &cand);
    let mut remaining = cand.len();
    let mut alive: Vec<bool> = vec![true; adj.len()];
    for idx in (0..order.len()).rev() {
        if size + colors[idx] <= *best {
            return;
        }
        let v = order[idx];
        let next: Vec<usize> = order
            .iter()
            .copied()
            .filter(|&u| alive[u] && u != v && adj[v].contains(u))
            .collect();
        if next.is_empty() {
            *best = (*best).max(size + 1);
        } else {
            max_clique_expand(adj, next, size + 1, best);
        }
        alive[v] = false;
        remaining -= 1;
        if remaining == 0 {
            return;
        }
    }
}

/// Greedy sequential coloring; returns vertices sorted by color with the
/// running color number (an upper bound on the clique within the prefix).
fn color_sort(adj: &[BitSet], cand: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for &v in cand {
        match classes
            .iter_mut()
            .find(|c| c.iter().all(|&u| !adj[v].contains(u)))
        {
            Some(c) => c.push(v),
            None => classes.push(vec![v]),
        }
    }
    let mut order = Vec::with_capacity(cand.len());
    let mut colors = Vec::with_capacity(cand.len());
    for (k, class) in classes.into_iter().enumerate() {
        for v in class {
            order.push(v);
            colors.push(k + 1);
        }
    }
    (order, colors)
}

/// Internal covering number: balls are centered at cloud points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverCount {
    pub count: usize,
    /// `false` when the cloud exceeded the exact cap and `count` is a greedy
    /// upper bound.
    pub exact: bool,
}

fn balls(cloud: &SolutionCloud, radius: f64) -> Vec<BitSet> {
    let n = cloud.len();
    (0..n)
        .map(|c| {
            let mut s = BitSet::new(n);
            for j in 0..n {
                if within(cloud.dist(c, j), radius) {
                    s.insert(j);
                }
            }
            s
        })
        .collect()
}

/// Greedy internal cover of every point: repeatedly takes the center that
/// covers the most uncovered points (smallest index on ties).
pub fn covering_number_greedy(cloud: &SolutionCloud, delta: f64) -> usize {
    let w = vec![1usize; cloud.len()];
    greedy_partial_cover(&balls(cloud, delta), &w, cloud.len()).0.len()
}

pub fn covering_number_internal(cloud: &SolutionCloud, delta: f64) -> CoverCount {
    covering_number_internal_capped(cloud, delta, DEFAULT_EXACT_CAP)
}

/// Minimum number of radius-`delta` balls centered at cloud points whose union
/// is the whole cloud. Exact set cover by branch and bound up to `cap`
/// points, greedy above it.
pub fn covering_number_internal_capped(cloud: &SolutionCloud, delta: f64, cap: usize) -> CoverCount {
    let n = cloud.len();
    if n == 0 {
        return CoverCount {
            count: 0,
            exact: true,
        };
    }
    let greedy = covering_number_greedy(cloud, delta);
    if n > cap {
        return CoverCount {
            count: greedy,
            exact: false,
        };
    }
    let balls = balls(cloud, delta);
    let mut best = greedy;
    set_cover_search(&balls, BitSet::full(n), 0, &mut best);
    CoverCount {
        count: best,
        exact: true,
    }
}

fn set_cover_search(balls: &[BitSet], uncovered: BitSet, chosen: usize, best: &mut usize) {
    if uncovered.is_empty() {
        *best = (*best).min(chosen);
        return;
    }
    if chosen + 1 >= *best {
        return;
    }
    let left = uncovered.count();
    let max_gain = balls
        .iter()
        .map(|b| b.intersection_count(&uncovered))
        .max()
        .unwrap_or(0);
    if max_gain == 0 || chosen + left.div_ceil(max_gain) >= *best {
        return;
    }
    // Branch on the uncovered point with the fewest covering balls.
    let pivot = uncovered
        .iter()
        .min_by_key(|&e| balls.iter().filter(|b| b.contains(e)).count())
        .expect("nonempty");
    let mut options: Vec<(usize, usize)> = balls
        .iter()
        .enumerate()
        .filter(|(_, b)| b.contains(pivot))
        .map(|(c, b)| (c, b.intersection_count(&uncovered)))
        .collect();
    options.sort_by_key(|&(c, gain)| (std::cmp::Reverse(gain), c));
    for (c, _) in options {
        set_cover_search(balls, uncovered.difference(&balls[c]), chosen + 1, best);
    }
}

/// Greedy weighted partial cover. Returns the chosen centers and the covered
/// set once at least `required` weight is covered.
fn greedy_partial_cover(balls: &[BitSet], weights: &[usize], required: usize) -> (Vec<usize>, BitSet) {
    let n = weights.len();
    let mut covered = BitSet::new(n);
    let mut covered_weight = 0usize;
    let mut centers = Vec::new();
    while covered_weight < required {
        let mut best: Option<(usize, usize)> = None;
        for (c, ball) in balls.iter().enumerate() {
            let gain: usize = ball
                .iter()
                .filter(|&j| !covered.contains(j))
                .map(|j| weights[j])
                .sum();
            if gain > 0 && best.is_none_or(|(_, g)| gain > g) {
                best = Some((c, gain));
            }
        }
        let Some((c, gain)) = best else { break };
        for j in balls[c].iter() {
            covered.insert(j);
        }
        covered_weight += gain;
        centers.push(c);
    }
    (centers, covered)
}

/// Outcome of a partial cover: the balls used after discarding at most
/// `discard_budget` units of weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverReport {
    pub ball_count: usize,
    pub centers: Vec<usize>,
    pub discarded: Vec<usize>,
    pub radius: f64,
    /// Maximum total weight that may be discarded.
    pub discard_budget: usize,
    /// Exact `min_A P(O_A, d, radius)` over admissible discard sets, when the
    /// cloud is small enough to enumerate them.
    pub exact_min_packing: Option<usize>,
}

impl CoverReport {
    /// Weight actually discarded.
    pub fn discarded_weight(&self, cloud: &SolutionCloud) -> usize {
        self.discarded.iter().map(|&i| cloud.weights()[i]).sum()
    }
}

/// Number of units that must stay covered when discarding a fraction of `total`.
pub fn required_weight(total: usize, discard_fraction: f64) -> usize {
    ((1.0 - discard_fraction) * total as f64 - 1e-9).ceil().max(0.0) as usize
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1u64, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Greedy partial cover of a weighted cloud: centers are added (largest newly
/// covered weight first) until at least `ceil((1 - discard_fraction) * W)` of
/// the total weight `W` is covered. `ball_count` upper-bounds the minimum
/// internal covering number over admissible discard sets, and therefore the
/// minimum packing number at twice the radius.
pub fn partial_cover_count(
    cloud: &SolutionCloud,
    radius: f64,
    discard_fraction: f64,
) -> Result<CoverReport> {
    if !(0.0..1.0).contains(&discard_fraction) || radius < 0.0 || radius.is_nan() {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= discard_fraction < 1 and radius >= 0, got {discard_fraction}, {radius}"
        )));
    }
    let total = cloud.total_weight();
    let required = required_weight(total, discard_fraction);
    let budget = total - required;
    let b = balls(cloud, radius);
    let (centers, covered) = greedy_partial_cover(&b, cloud.weights(), required);
    let discarded: Vec<usize> = (0..cloud.len()).filter(|&i| !covered.contains(i)).collect();

    let n = cloud.len();
    let exact_min_packing = if n <= PARTIAL_EXACT_MAX_POINTS
        && binomial(n as u64, budget.min(n) as u64) <= PARTIAL_EXACT_MAX_SUBSETS
    {
        let mut best = usize::MAX;
        for mask in 0u32..(1u32 << n) {
            let dropped: usize = (0..n)
                .filter(|&i| mask >> i & 1 == 1)
                .map(|i| cloud.weights()[i])
                .sum();
            if dropped > budget {
                continue;
            }
            let keep: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 0).collect();
            let p = packing_number_exact(&cloud.subset(&keep), radius)?;
            best = best.min(p);
        }
        Some(best)
    } else {
        None
    };

    Ok(CoverReport {
        ball_count: centers.len(),
        centers,
        discarded,
        radius,
        discard_budget: budget,
        exact_min_packing,
    })
}
