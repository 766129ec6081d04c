//! Branching random walk: Galton-Watson trees with i.i.d. edge displacements,
//! the minimal displacement at generation `n`, the tree metric on leaves and
//! the velocity constant ψ*.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::law::InputLaw;
use crate::solution::Encoding;

/// Default cap on `|D_n|`.
pub const POPULATION_CAP: usize = 1_000_000;
/// Rejection attempts before conditioning on survival gives up.
pub const SURVIVAL_ATTEMPTS: usize = 10_000;

/// Offspring distribution on `{0, …, k_max}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgenyLaw {
    pmf: Vec<f64>,
}

impl ProgenyLaw {
    pub fn new(pmf: Vec<f64>) -> Result<Self> {
        let total: f64 = pmf.iter().sum();
        if pmf.is_empty() || pmf.iter().any(|p| !p.is_finite() || *p < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("{pmf:?} is not a probability vector")));
        }
        Ok(Self { pmf })
    }

    /// Every vertex has exactly `k` children.
    pub fn deterministic(k: usize) -> Self {
        let mut pmf = vec![0.0; k + 1];
        pmf[k] = 1.0;
        Self { pmf }
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }
}

/// Galton-Watson tree to generation `n`. Vertices are numbered breadth
/// first, so each generation is a contiguous range and the edge into vertex
/// `v ≥ 1` has index `v − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GwTree {
    n: usize,
    parent: Vec<u32>,
    gen_start: Vec<usize>,
}

impl GwTree {
    pub fn sample<R: Rng + ?Sized>(law: &ProgenyLaw, n: usize, cap: usize, rng: &mut R) -> Result<Self> {
        let kids = WeightedIndex::new(law.pmf()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut parent = vec![u32::MAX];
        let mut gen_start = vec![0, 1];
        for g in 1..=n {
            let (lo, hi) = (gen_start[g - 1], gen_start[g]);
            for v in lo..hi {
                let k = kids.sample(rng);
                parent.extend(std::iter::repeat_n(v as u32, k));
            }
            let size = parent.len() - hi;
            if size > cap {
                return Err(Error::PopulationCap { generation: g, size, cap });
            }
            gen_start.push(parent.len());
        }
        Ok(Self { n, parent, gen_start })
    }

    /// Builds a tree from per-vertex child counts in breadth-first order.
    pub fn from_child_counts(n: usize, counts: &[usize]) -> Result<Self> {
        let mut parent = vec![u32::MAX];
        let mut gen_start = vec![0, 1];
        let mut next = 0;
        for g in 1..=n {
            for v in gen_start[g - 1]..gen_start[g] {
                let k = *counts
                    .get(next)
                    .ok_or_else(|| Error::InvalidArgument("too few child counts".into()))?;
                next += 1;
                parent.extend(std::iter::repeat_n(v as u32, k));
            }
            gen_start.push(parent.len());
        }
        Ok(Self { n, parent, gen_start })
    }

    pub fn generations(&self) -> usize {
        self.n
    }

    pub fn vertex_count(&self) -> usize {
        self.parent.len()
    }

    pub fn edge_count(&self) -> usize {
        self.parent.len() - 1
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        (v > 0).then(|| self.parent[v] as usize)
    }

    /// Vertices of generation `k`.
    pub fn generation(&self, k: usize) -> std::ops::Range<usize> {
        self.gen_start[k]..self.gen_start[k + 1]
    }

    pub fn leaves(&self) -> std::ops::Range<usize> {
        self.generation(self.n)
    }

    pub fn survived(&self) -> bool {
        !self.leaves().is_empty()
    }

    /// Vertices on the path root → `v`, excluding the root.
    pub fn path(&self, mut v: usize) -> Vec<u32> {
        let mut p = Vec::new();
        while v > 0 {
            p.push(v as u32);
            v = self.parent[v] as usize;
        }
        p.reverse();
        p
    }

    /// Edge indices on the path root → `v`.
    pub fn ancestral_edges(&self, v: usize) -> Vec<usize> {
        self.path(v).into_iter().map(|u| u as usize - 1).collect()
    }
}

/// Samples a tree, rejecting extinct ones when `condition_on_survival`.
pub fn sample_tree<R: Rng + ?Sized>(
    law: &ProgenyLaw,
    n: usize,
    condition_on_survival: bool,
    cap: usize,
    rng: &mut R,
) -> Result<GwTree> {
    if !condition_on_survival {
        return GwTree::sample(law, n, cap, rng);
    }
    if law.mean() <= 1.0 {
        return Err(Error::Subcritical(law.mean()));
    }
    for _ in 0..SURVIVAL_ATTEMPTS {
        let t = GwTree::sample(law, n, cap, rng)?;
        if t.survived() {
            return Ok(t);
        }
    }
    Err(Error::ExtinctTree)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisplacedTree {
    pub tree: GwTree,
    /// Displacement of edge `e`, i.e. of the edge into vertex `e + 1`.
    pub disp: Vec<f64>,
}

impl DisplacedTree {
    pub fn new(tree: GwTree, disp: Vec<f64>) -> Result<Self> {
        if disp.len() != tree.edge_count() {
            return Err(Error::InvalidArgument(format!(
                "{} displacements for {} edges",
                disp.len(),
                tree.edge_count()
            )));
        }
        Ok(Self { tree, disp })
    }

    /// Positions `S_v` of the leaves, in leaf order.
    pub fn leaf_positions(&self) -> Vec<f64> {
        positions(&self.tree, &self.disp, None)
    }

    /// Copy with edge `e` redrawn to `value`.
    pub fn with_edge(&self, e: usize, value: f64) -> Self {
        let mut d = self.clone();
        d.disp[e] = value;
        d
    }
}

/// Leaf positions with an optional single-edge override, by a top-down pass.
fn positions(tree: &GwTree, disp: &[f64], replace: Option<(usize, f64)>) -> Vec<f64> {
    let mut s = vec![0.0; tree.vertex_count()];
    for v in 1..tree.vertex_count() {
        let x = match replace {
            Some((e, val)) if e == v - 1 => val,
            _ => disp[v - 1],
        };
        s[v] = s[tree.parent[v] as usize] + x;
    }
    s.drain(..tree.leaves().start);
    s
}

pub fn sample_brw<R: Rng + ?Sized>(
    law: &ProgenyLaw,
    displacement: InputLaw,
    n: usize,
    condition_on_survival: bool,
    rng: &mut R,
) -> Result<DisplacedTree> {
    let tree = sample_tree(law, n, condition_on_survival, POPULATION_CAP, rng)?;
    let disp = displacement.sample_n(tree.edge_count(), rng);
    DisplacedTree::new(tree, disp)
}

/// A leaf of generation `n` with its position.
#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    pub vertex: usize,
    pub position: f64,
}

fn argmin(tree: &GwTree, pos: &[f64]) -> Result<Leaf> {
    let start = tree.leaves().start;
    let mut best: Option<Leaf> = None;
    for (k, &p) in pos.iter().enumerate() {
        if best.as_ref().is_none_or(|b| p < b.position) {
            best = Some(Leaf { vertex: start + k, position: p });
        }
    }
    best.ok_or(Error::ExtinctTree)
}

/// `M_n = min_{v ∈ D_n} S_v` and the leaf attaining it (smallest index on ties).
pub fn min_displacement(dt: &DisplacedTree) -> Result<Leaf> {
    argmin(&dt.tree, &dt.leaf_positions())
}

/// `M_n` after replacing the displacement of edge `e`.
pub fn min_displacement_with(dt: &DisplacedTree, e: usize, value: f64) -> Result<Leaf> {
    argmin(&dt.tree, &positions(&dt.tree, &dt.disp, Some((e, value))))
}

/// Oracle: sums each leaf's path independently.
pub fn min_displacement_scan(dt: &DisplacedTree) -> Result<Leaf> {
    let pos: Vec<f64> = dt
        .tree
        .leaves()
        .map(|v| dt.tree.ancestral_edges(v).iter().map(|&e| dt.disp[e]).sum())
        .collect();
    argmin(&dt.tree, &pos)
}

/// Leaves with `S_v ≤ M_n + θ + 1e-12(1 + |M_n|)`, sorted by position.
pub fn near_optimal_leaves(dt: &DisplacedTree, theta: f64) -> Result<Vec<Leaf>> {
    let pos = dt.leaf_positions();
    let m = argmin(&dt.tree, &pos)?.position;
    let cut = m + theta + 1e-12 * (1.0 + m.abs());
    let start = dt.tree.leaves().start;
    let mut out: Vec<Leaf> = pos
        .iter()
        .enumerate()
        .filter(|(_, &p)| p <= cut)
        .map(|(k, &p)| Leaf { vertex: start + k, position: p })
        .collect();
    out.sort_by(|a, b| a.position.total_cmp(&b.position).then(a.vertex.cmp(&b.vertex)));
    Ok(out)
}

pub fn leaf_encoding(tree: &GwTree, v: usize) -> Encoding {
    Encoding::Leaf(tree.path(v))
}

/// `|I(v1 ↔ v2)| / n` for two generation-`n` leaves.
pub fn brw_metric(tree: &GwTree, v1: usize, v2: usize) -> f64 {
    path_metric(&tree.path(v1), &tree.path(v2), tree.generations())
}

/// Same metric on root-to-leaf paths: `2 (n − depth of the common ancestor) / n`.
pub fn path_metric(p1: &[u32], p2: &[u32], n: usize) -> f64 {
    let common = p1.iter().zip(p2).take_while(|(a, b)| a == b).count();
    (p1.len() + p2.len() - 2 * common) as f64 / n as f64
}

/// Block subsample of `size` distinct edges, at least `min_ancestral` of them
/// drawn from the path of `leaf`.
pub fn stratified_edges<R: Rng + ?Sized>(
    tree: &GwTree,
    leaf: usize,
    size: usize,
    min_ancestral: usize,
    rng: &mut R,
) -> Vec<usize> {
    let m = tree.edge_count();
    let size = size.min(m);
    let anc = tree.ancestral_edges(leaf);
    let k = min_ancestral.min(anc.len()).min(size);
    let mut chosen: Vec<usize> = index::sample(rng, anc.len(), k).into_iter().map(|i| anc[i]).collect();
    let mut taken: std::collections::HashSet<usize> = chosen.iter().copied().collect();
    while chosen.len() < size {
        let e = rng.random_range(0..m);
        if taken.insert(e) {
            chosen.push(e);
        }
    }
    chosen.sort_unstable();
    chosen
}

/// Result of the velocity computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiStar {
    pub psi: f64,
    pub s: f64,
    /// `|s Ψ'(s) − Ψ(s)|` at the returned `s`.
    pub residual: f64,
}

/// `Λ(s) = log E e^{−sX}` and `Λ'(s)`.
fn log_mgf(law: InputLaw, s: f64) -> Result<(f64, f64)> {
    match law {
        InputLaw::Gaussian { mean, sd } => Ok((-s * mean + 0.5 * s * s * sd * sd, -mean + s * sd * sd)),
        InputLaw::Uniform { low, high } => {
            // Integrate against e^{−s(x − low)} to keep the integrand ≤ 1.
            let w = high - low;
            let z = adaptive_simpson(|x| (-s * (x - low)).exp(), low, high, 1e-13)?;
            let zx = adaptive_simpson(|x| x * (-s * (x - low)).exp(), low, high, 1e-13)?;
            Ok(((z / w).ln() - s * low, -zx / z))
        }
        other => Err(Error::UnsupportedLaw(format!("ψ* is implemented for gaussian and uniform displacements, got {other}"))),
    }
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol.max(4.0 * f64::EPSILON * whole.abs()) {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let v = rec(&f, a, b, fa, fm, fb, whole, tol, 30);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NoFiniteMgf)
    }
}

/// `ψ* = inf_{s>0} Ψ(s)/s` with `Ψ(s) = log m + log E e^{−sX}`, located as the
/// root of `sΨ'(s) = Ψ(s)`.
pub fn psi_star(m: f64, law: InputLaw) -> Result<PsiStar> {
    if !(m > 1.0) {
        return Err(Error::Subcritical(m));
    }
    let law = law.validate()?;
    let g = |s: f64| -> Result<f64> {
        let (l, dl) = log_mgf(law, s)?;
        Ok(s * dl - (m.ln() + l))
    };
    // g(0) = −log m < 0 and g is increasing while Λ is finite.
    let (mut lo, mut hi) = (0.0, 1.0);
    while g(hi)? <= 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e8 {
            return Err(Error::NoFiniteMgf);
        }
    }
    let mut s = 0.5 * (lo + hi);
    for _ in 0..200 {
        s = 0.5 * (lo + hi);
        let v = g(s)?;
        if v.abs() < 1e-12 || hi - lo < 1e-15 * hi {
            break;
        }
        if v < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
    }
    let (l, _) = log_mgf(law, s)?;
    let psi = (m.ln() + l) / s;
    Ok(PsiStar { psi, s, residual: g(s)?.abs() })
}
