//! Exact graph optimizers shared by the Euclidean and complete-graph
//! families: Held-Karp tours, Kruskal trees, bitmask matchings, and the
//! exhaustive enumerators used as oracles and for near-optimal sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solution::Encoding;

pub const HELD_KARP_CAP: usize = 15;
pub const MATCHING_DP_CAP: usize = 16;
pub const TOUR_ENUM_CAP: usize = 10;
pub const TREE_ENUM_CAP: usize = 8;
pub const MATCHING_ENUM_CAP: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Tour,
    Tree,
    Matching,
}

impl GraphKind {
    pub fn name(self) -> &'static str {
        match self {
            GraphKind::Tour => "tour",
            GraphKind::Tree => "mst",
            GraphKind::Matching => "matching",
        }
    }
}

/// A graph on vertices `0..n` stored as its sorted edge list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GraphSolution {
    pub edges: Vec<(u32, u32)>,
    pub kind: GraphKind,
}

impl GraphSolution {
    pub fn from_edges(edges: impl IntoIterator<Item = (usize, usize)>, kind: GraphKind) -> Self {
        let mut e: Vec<(u32, u32)> = edges
            .into_iter()
            .map(|(a, b)| (a.min(b) as u32, a.max(b) as u32))
            .collect();
        e.sort_unstable();
        Self { edges: e, kind }
    }

    /// The tour visiting `order` cyclically.
    pub fn from_cycle(order: &[usize]) -> Self {
        let n = order.len();
        Self::from_edges((0..n).map(|i| (order[i], order[(i + 1) % n])), GraphKind::Tour)
    }

    pub fn encoding(&self) -> Encoding {
        Encoding::Edges(self.edges.clone())
    }

    pub fn from_encoding(enc: &Encoding, kind: GraphKind) -> Option<Self> {
        match enc {
            Encoding::Edges(e) => Some(Self {
                edges: e.clone(),
                kind,
            }),
            _ => None,
        }
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        let e = (a.min(b) as u32, a.max(b) as u32);
        self.edges.binary_search(&e).is_ok()
    }

    pub fn degrees(&self, n: usize) -> Vec<usize> {
        let mut deg = vec![0; n];
        for &(a, b) in &self.edges {
            deg[a as usize] += 1;
            deg[b as usize] += 1;
        }
        deg
    }

    pub fn max_degree(&self, n: usize) -> usize {
        self.degrees(n).into_iter().max().unwrap_or(0)
    }

    /// Neighbors of `v`, sorted by index.
    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|&(a, b)| {
                if a as usize == v {
                    Some(b as usize)
                } else if b as usize == v {
                    Some(a as usize)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn weight(&self, w: &WeightTable) -> f64 {
        self.edges
            .iter()
            .map(|&(a, b)| w.get(a as usize, b as usize))
            .sum()
    }

    /// Structural validity for its kind on `n` vertices.
    pub fn is_valid(&self, n: usize) -> bool {
        let deg = self.degrees(n);
        match self.kind {
            GraphKind::Tour => {
                if n < 3 || self.edges.len() != n || deg.iter().any(|&d| d != 2) {
                    return false;
                }
                self.is_connected(n)
            }
            GraphKind::Tree => self.edges.len() + 1 == n && self.is_connected(n),
            GraphKind::Matching => n % 2 == 0 && self.edges.len() * 2 == n && deg.iter().all(|&d| d == 1),
        }
    }

    fn is_connected(&self, n: usize) -> bool {
        let mut uf = UnionFind::new(n);
        for &(a, b) in &self.edges {
            uf.union(a as usize, b as usize);
        }
        (1..n).all(|v| uf.find(v) == uf.find(0))
    }
}

/// `|E(g1) Δ E(g2)| / n`.
pub fn graph_metric(g1: &GraphSolution, g2: &GraphSolution, n: usize) -> f64 {
    symmetric_difference(&g1.edges, &g2.edges) as f64 / n as f64
}

/// Size of the symmetric difference of two sorted edge lists.
pub fn symmetric_difference(a: &[(u32, u32)], b: &[(u32, u32)]) -> usize {
    let (mut i, mut j, mut common) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    a.len() + b.len() - 2 * common
}

/// Symmetric edge weights of a complete graph on `n` vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable {
    n: usize,
    w: Vec<f64>,
}

impl WeightTable {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = f(i, j);
                w[i * n + j] = v;
                w[j * n + i] = v;
            }
        }
        Self { n, w }
    }

    /// Builds the table from weights listed in edge order
    /// `(0,1), (0,2), …, (0,n-1), (1,2), …`.
    pub fn from_edge_list(n: usize, weights: &[f64]) -> Self {
        assert_eq!(weights.len(), n * (n.saturating_sub(1)) / 2);
        let idx = |i: usize, j: usize| edge_index(n, i, j);
        Self::from_fn(n, |i, j| weights[idx(i, j)])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }
}

/// Position of edge `{i, j}` (`i < j`) in lexicographic edge order.
pub fn edge_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = (i.min(j), i.max(j));
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// Inverse of [`edge_index`].
pub fn edge_at(n: usize, mut k: usize) -> (usize, usize) {
    for i in 0..n {
        let row = n - i - 1;
        if k < row {
            return (i, i + 1 + k);
        }
        k -= row;
    }
    panic!("edge index out of range")
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the sets of `a` and `b`; false if already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// Minimum spanning tree by Kruskal. Equal weights are resolved by edge
/// index order.
pub fn kruskal(w: &WeightTable) -> (GraphSolution, f64) {
    let n = w.n();
    let mut edges: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            edges.push((w.get(i, j), i, j));
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut uf = UnionFind::new(n);
    let mut chosen = Vec::with_capacity(n.saturating_sub(1));
    let mut total = 0.0;
    for (c, i, j) in edges {
        if uf.union(i, j) {
            chosen.push((i, j));
            total += c;
            if chosen.len() + 1 == n {
                break;
            }
        }
    }
    (GraphSolution::from_edges(chosen, GraphKind::Tree), total)
}

/// Shortest Hamiltonian cycle by the Held-Karp subset dynamic program.
pub fn held_karp(w: &WeightTable) -> Result<(GraphSolution, f64)> {
    let n = w.n();
    if n > HELD_KARP_CAP {
        return Err(Error::SizeExceeded {
            what: "Held-Karp tour",
            size: n,
            cap: HELD_KARP_CAP,
        });
    }
    if n < 3 {
        return Err(Error::InvalidArgument(format!("a tour needs at least 3 vertices, got {n}")));
    }
    // Vertex 0 is the start; bit k of a mask stands for vertex k + 1.
    let m = n - 1;
    let full = (1usize << m) - 1;
    let mut dp = vec![f64::INFINITY; (1 << m) * m];
    let mut parent = vec![u8::MAX; (1 << m) * m];
    for k in 0..m {
        dp[(1 << k) * m + k] = w.get(0, k + 1);
    }
    for mask in 1..=full {
        for last in 0..m {
            if mask >> last & 1 == 0 {
                continue;
            }
            let cur = dp[mask * m + last];
            if !cur.is_finite() {
                continue;
            }
            let mut rest = full & !mask;
            while rest != 0 {
                let nxt = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                let nm = mask | 1 << nxt;
                let cand = cur + w.get(last + 1, nxt + 1);
                if cand < dp[nm * m + nxt] {
                    dp[nm * m + nxt] = cand;
                    parent[nm * m + nxt] = last as u8;
                }
            }
        }
    }
    let (mut best, mut last) = (f64::INFINITY, 0);
    for k in 0..m {
        let c = dp[full * m + k] + w.get(k + 1, 0);
        if c < best {
            best = c;
            last = k;
        }
    }
    let mut order = Vec::with_capacity(n);
    let mut mask = full;
    let mut cur = last;
    loop {
        order.push(cur + 1);
        let p = parent[mask * m + cur];
        mask &= !(1 << cur);
        if p == u8::MAX {
            break;
        }
        cur = p as usize;
    }
    order.push(0);
    order.reverse();
    Ok((GraphSolution::from_cycle(&order), best))
}

/// Minimum-weight perfect matching by dynamic programming over vertex subsets.
pub fn matching_dp(w: &WeightTable) -> Result<(GraphSolution, f64)> {
    let p = w.n();
    if p % 2 == 1 {
        return Err(Error::OddVertexCount(p));
    }
    if p > MATCHING_DP_CAP {
        return Err(Error::SizeExceeded {
            what: "matching DP",
            size: p,
            cap: MATCHING_DP_CAP,
        });
    }
    let full = (1usize << p) - 1;
    let mut dp = vec![f64::INFINITY; 1 << p];
    let mut choice = vec![(0u8, 0u8); 1 << p];
    dp[0] = 0.0;
    // dp[mask]: cheapest matching of the vertices in `mask`, always pairing the
    // lowest vertex first so each matching is generated once.
    for mask in 1..=full {
        if mask.count_ones() % 2 == 1 {
            continue;
        }
        let i = mask.trailing_zeros() as usize;
        let mut rest = mask & !(1 << i);
        while rest != 0 {
            let j = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let sub = mask & !(1 << i) & !(1 << j);
            let c = dp[sub] + w.get(i, j);
            if c < dp[mask] {
                dp[mask] = c;
                choice[mask] = (i as u8, j as u8);
            }
        }
    }
    let mut edges = Vec::with_capacity(p / 2);
    let mut mask = full;
    while mask != 0 {
        let (i, j) = choice[mask];
        edges.push((i as usize, j as usize));
        mask &= !(1 << i) & !(1 << j);
    }
    Ok((GraphSolution::from_edges(edges, GraphKind::Matching), dp[full]))
}

fn check_cap(what: &'static str, size: usize, cap: usize) -> Result<()> {
    if size > cap {
        Err(Error::SizeExceeded { what, size, cap })
    } else {
        Ok(())
    }
}

/// Visits every Hamiltonian cycle on `n` vertices once, as a vertex order
/// starting at 0 with `order[1] < order[n-1]`, together with its weight.
pub fn for_each_tour(w: &WeightTable, mut visit: impl FnMut(&[usize], f64)) -> Result<()> {
    let n = w.n();
    check_cap("tour enumeration", n, TOUR_ENUM_CAP)?;
    if n < 3 {
        return Err(Error::InvalidArgument(format!("a tour needs at least 3 vertices, got {n}")));
    }
    let mut path = vec![0usize];
    let mut used = vec![false; n];
    used[0] = true;
    fn rec(
        w: &WeightTable,
        path: &mut Vec<usize>,
        used: &mut [bool],
        cost: f64,
        visit: &mut dyn FnMut(&[usize], f64),
    ) {
        let n = used.len();
        if path.len() == n {
            if path[1] < path[n - 1] {
                visit(path, cost + w.get(path[n - 1], 0));
            }
            return;
        }
        let last = *path.last().unwrap();
        for v in 1..n {
            if !used[v] {
                used[v] = true;
                path.push(v);
                rec(w, path, used, cost + w.get(last, v), visit);
                path.pop();
                used[v] = false;
            }
        }
    }
    rec(w, &mut path, &mut used, 0.0, &mut visit);
    Ok(())
}

/// Decodes a Prüfer sequence into the edges of a labeled tree on `seq.len() + 2` vertices.
pub fn prufer_decode(seq: &[usize]) -> Vec<(usize, usize)> {
    let n = seq.len() + 2;
    let mut degree = vec![1usize; n];
    for &s in seq {
        degree[s] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &s in seq {
        let leaf = (0..n).find(|&v| degree[v] == 1).expect("a leaf exists");
        edges.push((leaf, s));
        degree[leaf] -= 1;
        degree[s] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges
}

/// Visits every labeled spanning tree of the complete graph (Cayley: `n^(n-2)`).
pub fn for_each_tree(w: &WeightTable, mut visit: impl FnMut(&[(usize, usize)], f64)) -> Result<()> {
    let n = w.n();
    check_cap("spanning tree enumeration", n, TREE_ENUM_CAP)?;
    if n < 2 {
        return Err(Error::InvalidArgument("a tree needs at least 2 vertices".into()));
    }
    let len = n - 2;
    let mut seq = vec![0usize; len];
    loop {
        let edges = prufer_decode(&seq);
        let c = edges.iter().map(|&(a, b)| w.get(a, b)).sum();
        visit(&edges, c);
        // Odometer increment over [0, n)^len.
        let mut k = 0;
        loop {
            if k == len {
                return Ok(());
            }
            seq[k] += 1;
            if seq[k] < n {
                break;
            }
            seq[k] = 0;
            k += 1;
        }
    }
}

/// Visits every perfect matching of the complete graph on `p` vertices.
pub fn for_each_matching(w: &WeightTable, mut visit: impl FnMut(&[(usize, usize)], f64)) -> Result<()> {
    let p = w.n();
    if p % 2 == 1 {
        return Err(Error::OddVertexCount(p));
    }
    check_cap("matching enumeration", p, MATCHING_ENUM_CAP)?;
    fn rec(
        w: &WeightTable,
        used: &mut [bool],
        pairs: &mut Vec<(usize, usize)>,
        cost: f64,
        visit: &mut dyn FnMut(&[(usize, usize)], f64),
    ) {
        let Some(i) = used.iter().position(|&u| !u) else {
            visit(pairs, cost);
            return;
        };
        used[i] = true;
        for j in (i + 1)..used.len() {
            if !used[j] {
                used[j] = true;
                pairs.push((i, j));
                rec(w, used, pairs, cost + w.get(i, j), visit);
                pairs.pop();
                used[j] = false;
            }
        }
        used[i] = false;
    }
    let mut used = vec![false; p];
    rec(w, &mut used, &mut Vec::new(), 0.0, &mut visit);
    Ok(())
}

/// All solutions of `kind` on the complete graph with their weights.
pub fn enumerate(w: &WeightTable, kind: GraphKind) -> Result<Vec<(GraphSolution, f64)>> {
    let mut out = Vec::new();
    match kind {
        GraphKind::Tour => for_each_tour(w, |o, c| out.push((GraphSolution::from_cycle(o), c)))?,
        GraphKind::Tree => for_each_tree(w, |e, c| {
            out.push((GraphSolution::from_edges(e.iter().copied(), GraphKind::Tree), c))
        })?,
        GraphKind::Matching => for_each_matching(w, |e, c| {
            out.push((GraphSolution::from_edges(e.iter().copied(), GraphKind::Matching), c))
        })?,
    }
    Ok(out)
}

/// Exact optimizer of `kind` on the complete graph.
pub fn solve(w: &WeightTable, kind: GraphKind) -> Result<(GraphSolution, f64)> {
    match kind {
        GraphKind::Tour => held_karp(w),
        GraphKind::Tree => Ok(kruskal(w)),
        GraphKind::Matching => matching_dp(w),
    }
}

/// Largest number of edges per vertex over the family (`|E(G)| / p`, rounded
/// up to 1 for trees).
pub fn e_max(kind: GraphKind) -> f64 {
    match kind {
        GraphKind::Tour | GraphKind::Tree => 1.0,
        GraphKind::Matching => 0.5,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;
    use rand::Rng;
    use std::collections::HashSet;

    fn random_table(n: usize, seed: u64) -> WeightTable {
        let mut rng = rng_from(seed);
        let vals: Vec<f64> = (0..n * (n - 1) / 2).map(|_| rng.random()).collect();
        WeightTable::from_edge_list(n, &vals)
    }

    #[test]
    fn edge_index_roundtrip() {
        for n in 2..9 {
            let mut k = 0;
            for i in 0..n {
                for j in (i + 1)..n {
                    assert_eq!(edge_index(n, i, j), k);
                    assert_eq!(edge_at(n, k), (i, j));
                    k += 1;
                }
            }
        }
    }

    #[test]
    fn enumeration_counts() {
        let w3 = random_table(3, 1);
        let w4 = random_table(4, 1);
        let w6 = random_table(6, 1);
        assert_eq!(enumerate(&w3, GraphKind::Tour).unwrap().len(), 1);
        assert_eq!(enumerate(&w4, GraphKind::Tour).unwrap().len(), 3);
        assert_eq!(enumerate(&w6, GraphKind::Tour).unwrap().len(), 60);
        assert_eq!(enumerate(&w4, GraphKind::Tree).unwrap().len(), 16);
        assert_eq!(enumerate(&w6, GraphKind::Tree).unwrap().len(), 1296);
        assert_eq!(enumerate(&w4, GraphKind::Matching).unwrap().len(), 3);
        assert_eq!(enumerate(&w6, GraphKind::Matching).unwrap().len(), 15);
    }

    #[test]
    fn enumerations_are_valid_and_distinct() {
        let w = random_table(6, 2);
        for kind in [GraphKind::Tour, GraphKind::Tree, GraphKind::Matching] {
            let all = enumerate(&w, kind).unwrap();
            let set: HashSet<_> = all.iter().map(|(g, _)| g.edges.clone()).collect();
            assert_eq!(set.len(), all.len());
            for (g, c) in &all {
                assert!(g.is_valid(6), "{kind:?} {g:?}");
                assert!((g.weight(&w) - c).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn enumeration_caps() {
        assert!(for_each_tour(&random_table(11, 1), |_, _| {}).is_err());
        assert!(for_each_tree(&random_table(9, 1), |_, _| {}).is_err());
        assert!(matches!(matching_dp(&random_table(5, 1)), Err(Error::OddVertexCount(5))));
        assert!(matches!(held_karp(&random_table(16, 1)), Err(Error::SizeExceeded { .. })));
    }

    #[test]
    fn matching_example() {
        let w = WeightTable::from_fn(4, |i, j| if (i, j) == (0, 1) || (i, j) == (2, 3) { 1.0 } else { 10.0 });
        let (g, c) = matching_dp(&w).unwrap();
        assert_eq!(g.edges, vec![(0, 1), (2, 3)]);
        assert_eq!(c, 2.0);
    }

    #[test]
    fn exact_solvers_match_enumeration() {
        for seed in 0..30 {
            for n in [4, 5, 6, 7] {
                let w = random_table(n, seed * 31 + n as u64);
                for kind in [GraphKind::Tour, GraphKind::Tree, GraphKind::Matching] {
                    if kind == GraphKind::Matching && n % 2 == 1 {
                        continue;
                    }
                    let (g, c) = solve(&w, kind).unwrap();
                    let (bg, bc) = enumerate(&w, kind)
                        .unwrap()
                        .into_iter()
                        .min_by(|a, b| a.1.total_cmp(&b.1))
                        .unwrap();
                    assert!((c - bc).abs() < 1e-12, "{kind:?} n={n}");
                    assert_eq!(g, bg);
                    assert!(g.is_valid(n));
                }
            }
        }
    }

    #[test]
    fn metric_examples() {
        let a = GraphSolution::from_cycle(&[0, 1, 2, 3]);
        let b = GraphSolution::from_cycle(&[0, 2, 1, 3]);
        assert_eq!(graph_metric(&a, &a, 4), 0.0);
        assert_eq!(graph_metric(&a, &b, 4), 1.0);
        let star = GraphSolution::from_edges([(0, 1), (0, 2), (0, 3)], GraphKind::Tree);
        let path = GraphSolution::from_edges([(0, 1), (1, 2), (2, 3)], GraphKind::Tree);
        assert_eq!(graph_metric(&star, &path, 4), 1.0);
    }

    #[test]
    fn prufer_gives_trees() {
        let e = prufer_decode(&[3, 3, 3, 4]);
        let g = GraphSolution::from_edges(e, GraphKind::Tree);
        assert!(g.is_valid(6));
        assert_eq!(g.degrees(6)[3], 4);
    }
}
