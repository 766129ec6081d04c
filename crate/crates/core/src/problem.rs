//! The common contract of all problem families: i.i.d. inputs indexed by a
//! finite set, block perturbations, exact optimizers, near-optimal sets,
//! window lengths, and the stability statistic.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brw::{self, DisplacedTree, GwTree, ProgenyLaw};
use crate::error::{Error, Result};
use crate::euclidean::{self, PointConfiguration};
use crate::graph::{self, GraphKind, GraphSolution, WeightTable};
use crate::matrix::{self, RectMatrix, SymmetricMatrix};
use crate::metric::{self, CoverReport, SolutionCloud};
use crate::seed::{self, purpose};
use crate::solution::{Encoding, SolutionPoint};
use crate::spin::{self, CouplingGraph, LatticeBox, SpinConfig};
use crate::weighted::{self, CostMatrix, PermutationSolution};

pub use crate::law::InputLaw;

/// Default number of blocks drawn when a scheme is subsampled.
pub const DEFAULT_BLOCK_SUBSAMPLE: usize = 64;
/// Ancestral edges of the current optimum forced into a BRW block subsample.
pub const BRW_MIN_ANCESTRAL: usize = 8;

/// Desk-scale caps enforced when an instance is built.
pub mod caps {
    pub const TSP: usize = crate::graph::HELD_KARP_CAP;
    pub const MST: usize = 4096;
    pub const GRAPH_TREE: usize = 2048;
    pub const GRAPH_MATCHING: usize = crate::graph::MATCHING_DP_CAP;
    pub const GRAPH_TOUR: usize = crate::graph::HELD_KARP_CAP;
    pub const ASSIGNMENT: usize = 512;
    pub const SPINS: usize = crate::spin::SPIN_CAP;
    pub const BRW_GENERATIONS: usize = 64;
    pub const MATRIX: usize = crate::matrix::EIGEN_CAP;
    pub const WISHART_ROWS: usize = 8192;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Tsp,
    Mst,
    WeightedGraph,
    Assignment,
    Sk,
    Ea,
    Brw,
    Wigner,
    Wishart,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 9] = [
        FamilyKind::Tsp,
        FamilyKind::Mst,
        FamilyKind::WeightedGraph,
        FamilyKind::Assignment,
        FamilyKind::Sk,
        FamilyKind::Ea,
        FamilyKind::Brw,
        FamilyKind::Wigner,
        FamilyKind::Wishart,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Tsp => "tsp",
            FamilyKind::Mst => "mst",
            FamilyKind::WeightedGraph => "weighted_graph",
            FamilyKind::Assignment => "assignment",
            FamilyKind::Sk => "sk",
            FamilyKind::Ea => "ea",
            FamilyKind::Brw => "brw",
            FamilyKind::Wigner => "wigner",
            FamilyKind::Wishart => "wishart",
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FamilyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Validation(format!("unknown family '{s}'")))
    }
}

/// A problem family with its size parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Tsp { n: usize, d: usize, q: f64 },
    Mst { n: usize, d: usize, q: f64 },
    WeightedGraph { p: usize, kind: GraphKind },
    Assignment { n: usize },
    Sk { n: usize },
    Ea { shape: Vec<usize>, lattice: LatticeBox },
    /// `tree_seed = Some(s)` keeps one tree across instances; `None` draws the
    /// tree from each instance's own seed.
    Brw { n: usize, progeny: ProgenyLaw, condition_on_survival: bool, tree_seed: Option<u64> },
    Wigner { n: usize },
    Wishart { m: usize, n: usize },
}

impl Family {
    pub fn ea(shape: &[usize]) -> Result<Self> {
        Ok(Family::Ea { shape: shape.to_vec(), lattice: LatticeBox::new(shape)? })
    }

    pub fn kind(&self) -> FamilyKind {
        match self {
            Family::Tsp { .. } => FamilyKind::Tsp,
            Family::Mst { .. } => FamilyKind::Mst,
            Family::WeightedGraph { .. } => FamilyKind::WeightedGraph,
            Family::Assignment { .. } => FamilyKind::Assignment,
            Family::Sk { .. } => FamilyKind::Sk,
            Family::Ea { .. } => FamilyKind::Ea,
            Family::Brw { .. } => FamilyKind::Brw,
            Family::Wigner { .. } => FamilyKind::Wigner,
            Family::Wishart { .. } => FamilyKind::Wishart,
        }
    }

    /// The size parameter that window rules and reports refer to (`|Λ|` for EA).
    pub fn size(&self) -> usize {
        match self {
            Family::Tsp { n, .. } | Family::Mst { n, .. } => *n,
            Family::WeightedGraph { p, .. } => *p,
            Family::Assignment { n } | Family::Sk { n } | Family::Wigner { n } => *n,
            Family::Ea { lattice, .. } => lattice.len(),
            Family::Brw { n, .. } => *n,
            Family::Wishart { n, .. } => *n,
        }
    }

    /// Ambient dimension (Euclidean families) or lattice dimension.
    pub fn dim(&self) -> usize {
        match self {
            Family::Tsp { d, .. } | Family::Mst { d, .. } => *d,
            Family::Ea { lattice, .. } => lattice.d(),
            _ => 1,
        }
    }

    pub fn q(&self) -> f64 {
        match self {
            Family::Tsp { q, .. } | Family::Mst { q, .. } => *q,
            _ => 1.0,
        }
    }

    fn check_cap(&self) -> Result<()> {
        let over = |what: &str, size: usize, cap: usize| {
            Err(Error::Validation(format!("{what} = {size} exceeds the cap {cap}")))
        };
        match self {
            Family::Tsp { n, .. } if *n > caps::TSP => over("tsp n", *n, caps::TSP),
            Family::Tsp { n, .. } if *n < 3 => Err(Error::Validation(format!("tsp needs n >= 3, got {n}"))),
            Family::Mst { n, .. } if *n > caps::MST => over("mst n", *n, caps::MST),
            Family::Mst { n, .. } if *n < 2 => Err(Error::Validation(format!("mst needs n >= 2, got {n}"))),
            Family::Tsp { d, q, .. } | Family::Mst { d, q, .. } if *d < 2 || !(1.0..*d as f64).contains(q) => {
                Err(Error::Validation(format!("need d >= 2 and q in [1, d), got d = {d}, q = {q}")))
            }
            Family::WeightedGraph { p, kind } => {
                let cap = match kind {
                    GraphKind::Tour => caps::GRAPH_TOUR,
                    GraphKind::Tree => caps::GRAPH_TREE,
                    GraphKind::Matching => caps::GRAPH_MATCHING,
                };
                let min = if *kind == GraphKind::Tour { 3 } else { 2 };
                if *p > cap {
                    over("weighted graph p", *p, cap)
                } else if *p < min {
                    Err(Error::Validation(format!("weighted graph needs p >= {min}, got {p}")))
                } else if *kind == GraphKind::Matching && p % 2 == 1 {
                    Err(Error::Validation(format!("matching needs an even p, got {p}")))
                } else {
                    Ok(())
                }
            }
            Family::Assignment { n } if *n > caps::ASSIGNMENT => over("assignment n", *n, caps::ASSIGNMENT),
            Family::Assignment { n } if *n == 0 => Err(Error::Validation("assignment needs n >= 1".into())),
            Family::Sk { n } if *n > caps::SPINS => over("sk n", *n, caps::SPINS),
            Family::Sk { n } if *n < 2 => Err(Error::Validation(format!("sk needs n >= 2, got {n}"))),
            Family::Ea { lattice, .. } if lattice.len() > caps::SPINS => over("ea sites", lattice.len(), caps::SPINS),
            Family::Ea { lattice, .. } if lattice.len() < 2 => Err(Error::Validation("ea needs at least 2 sites".into())),
            Family::Brw { n, .. } if *n > caps::BRW_GENERATIONS => over("brw generations", *n, caps::BRW_GENERATIONS),
            Family::Brw { n, .. } if *n == 0 => Err(Error::Validation("brw needs n >= 1".into())),
            Family::Brw { progeny, condition_on_survival: true, .. } if progeny.mean() <= 1.0 => {
                Err(Error::Validation(format!("progeny mean {} is not > 1", progeny.mean())))
            }
            Family::Wigner { n } if *n > caps::MATRIX => over("wigner n", *n, caps::MATRIX),
            Family::Wigner { n } if *n == 0 => Err(Error::Validation("wigner needs n >= 1".into())),
            Family::Wishart { n, .. } if *n > caps::MATRIX => over("wishart n", *n, caps::MATRIX),
            Family::Wishart { m, .. } if *m > caps::WISHART_ROWS => over("wishart m", *m, caps::WISHART_ROWS),
            Family::Wishart { m, n } if *n == 0 || m < n => {
                Err(Error::Validation(format!("wishart needs m >= n >= 1, got m = {m}, n = {n}")))
            }
            _ => Ok(()),
        }
    }
}

/// One random instance: a family, its input law and the seed of its inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub family: Family,
    pub law: InputLaw,
    pub seed: u64,
}

impl ProblemInstance {
    pub fn new(family: Family, law: InputLaw, seed: u64) -> Result<Self> {
        family.check_cap()?;
        let law = law.validate()?;
        let nonneg = match law {
            InputLaw::Uniform { low, .. } => low >= 0.0,
            InputLaw::Exponential { .. } | InputLaw::Gamma { .. } => true,
            InputLaw::Gaussian { .. } => false,
        };
        match family.kind() {
            FamilyKind::Tsp | FamilyKind::Mst if !matches!(law, InputLaw::Uniform { .. } | InputLaw::Gaussian { .. }) => {
                return Err(Error::UnsupportedLaw(format!("{law}: points need a uniform box or a Gaussian law")));
            }
            FamilyKind::WeightedGraph | FamilyKind::Assignment if !nonneg => {
                return Err(Error::UnsupportedLaw(format!("{law}: weights must be nonnegative")));
            }
            FamilyKind::Wigner | FamilyKind::Wishart if law.mean() != 0.0 => {
                return Err(Error::UnsupportedLaw(format!("{law}: matrix entries need zero mean")));
            }
            _ => {}
        }
        Ok(Self { family, law, seed })
    }

    pub fn kind(&self) -> FamilyKind {
        self.family.kind()
    }

    /// Same family and law with another seed.
    pub fn reseeded(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    /// Number of coordinates `k_n` of the index set for a given tree (BRW) or
    /// of the family.
    fn index_count(&self, tree: Option<&GwTree>) -> usize {
        match &self.family {
            Family::Tsp { n, .. } | Family::Mst { n, .. } => *n,
            Family::WeightedGraph { p, .. } => p * (p - 1) / 2,
            Family::Assignment { n } => n * n,
            Family::Sk { n } => n * (n - 1) / 2,
            Family::Ea { lattice, .. } => lattice.bonds().len(),
            Family::Brw { .. } => tree.map_or(0, GwTree::edge_count),
            Family::Wigner { n } => n * (n + 1) / 2,
            Family::Wishart { m, n } => m * n,
        }
    }
}

/// Inputs `X^n`: `values[i·dim .. (i+1)·dim]` is coordinate `i`. BRW inputs
/// carry the tree their edge displacements live on.
#[derive(Debug, Clone, PartialEq)]
pub struct InputVector {
    pub dim: usize,
    pub values: Vec<f64>,
    pub tree: Option<Arc<GwTree>>,
}

impl InputVector {
    /// `k_n`.
    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }
}

fn draw_values(instance: &ProblemInstance, tree: Option<Arc<GwTree>>, rng: &mut seed::Rng) -> InputVector {
    let dim = instance.family.dim();
    let dim = if matches!(instance.kind(), FamilyKind::Tsp | FamilyKind::Mst) { dim } else { 1 };
    let k = instance.index_count(tree.as_deref());
    InputVector { dim, values: instance.law.sample_n(k * dim, rng), tree }
}

/// i.i.d. inputs, deterministic in `instance.seed`.
pub fn sample_inputs(instance: &ProblemInstance) -> Result<InputVector> {
    let tree = match &instance.family {
        Family::Brw { n, progeny, condition_on_survival, tree_seed } => {
            let mut rng = seed::substream(tree_seed.unwrap_or(instance.seed), &[purpose::TREE]);
            Some(Arc::new(brw::sample_tree(progeny, *n, *condition_on_survival, brw::POPULATION_CAP, &mut rng)?))
        }
        _ => None,
    };
    Ok(draw_values(instance, tree, &mut seed::substream(instance.seed, &[purpose::INPUTS])))
}

/// An independent copy of `x` (same tree for BRW).
pub fn sample_fresh(instance: &ProblemInstance, x: &InputVector, rng: &mut seed::Rng) -> InputVector {
    draw_values(instance, x.tree.clone(), rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeVariant {
    /// One input coordinate per block.
    SingleBlock,
    /// All coordinates attached to one row / spin / column.
    RowBlock,
}

impl SchemeVariant {
    pub fn name(self) -> &'static str {
        match self {
            SchemeVariant::SingleBlock => "single_block",
            SchemeVariant::RowBlock => "row_block",
        }
    }
}

impl FromStr for SchemeVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single_block" | "single" => Ok(SchemeVariant::SingleBlock),
            "row_block" | "row" => Ok(SchemeVariant::RowBlock),
            _ => Err(Error::Validation(format!("unknown scheme variant '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Layout {
    Singletons(usize),
    Explicit(Vec<Vec<usize>>),
}

/// Block family `J_n = {J_{n,l}}`; blocks index coordinates of an [`InputVector`].
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationScheme {
    pub variant: SchemeVariant,
    layout: Layout,
}

impl PerturbationScheme {
    pub fn singletons(k: usize) -> Self {
        Self { variant: SchemeVariant::SingleBlock, layout: Layout::Singletons(k) }
    }

    /// Blocks given explicitly; they must be nonempty and cover `0..k`.
    pub fn explicit(variant: SchemeVariant, k: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut covered = vec![false; k];
        for b in &blocks {
            if b.is_empty() {
                return Err(Error::InvalidArgument("empty perturbation block".into()));
            }
            for &i in b {
                *covered
                    .get_mut(i)
                    .ok_or_else(|| Error::InvalidArgument(format!("block index {i} outside 0..{k}")))? = true;
            }
        }
        if covered.iter().any(|c| !c) {
            return Err(Error::InvalidArgument("blocks do not cover the index set".into()));
        }
        Ok(Self { variant, layout: Layout::Explicit(blocks) })
    }

    /// The family's scheme for `variant` on inputs `x`.
    pub fn for_instance(instance: &ProblemInstance, x: &InputVector, variant: SchemeVariant) -> Result<Self> {
        let k = x.len();
        if variant == SchemeVariant::SingleBlock {
            return Ok(Self::singletons(k));
        }
        let blocks: Vec<Vec<usize>> = match &instance.family {
            Family::Sk { n } => (0..*n).map(|i| spin::sk_row_block(*n, i)).collect(),
            Family::Assignment { n } => (0..*n).map(|i| (i * n..(i + 1) * n).collect()).collect(),
            Family::Wigner { n } => (0..*n)
                .map(|i| {
                    let mut b: Vec<usize> = (0..*n).map(|j| matrix::upper_index(*n, i, j)).collect();
                    b.sort_unstable();
                    b
                })
                .collect(),
            // Column i of M: the entries (k, i), k ∈ [m].
            Family::Wishart { m, n } => (0..*n).map(|i| (0..*m).map(|r| r * n + i).collect()).collect(),
            other => {
                return Err(Error::UnsupportedScheme { scheme: variant.name(), family: other.kind().name() });
            }
        };
        Self::explicit(variant, k, blocks)
    }

    /// `m_n`.
    pub fn block_count(&self) -> usize {
        match &self.layout {
            Layout::Singletons(k) => *k,
            Layout::Explicit(b) => b.len(),
        }
    }

    pub fn block(&self, l: usize) -> Result<Cow<'_, [usize]>> {
        let count = self.block_count();
        if l >= count {
            return Err(Error::BlockOutOfRange { block: l, count });
        }
        Ok(match &self.layout {
            Layout::Singletons(_) => Cow::Owned(vec![l]),
            Layout::Explicit(b) => Cow::Borrowed(&b[l]),
        })
    }
}

/// `X^n_l`: `x` with the coordinates of block `l` taken from `fresh`.
pub fn perturb_inputs(
    x: &InputVector,
    scheme: &PerturbationScheme,
    l: usize,
    fresh: &InputVector,
) -> Result<InputVector> {
    if fresh.values.len() != x.values.len() || fresh.dim != x.dim {
        return Err(Error::InvalidArgument("fresh copy has a different shape".into()));
    }
    let block = scheme.block(l)?;
    let mut out = x.clone();
    let d = x.dim;
    for &i in block.iter() {
        if i >= x.len() {
            return Err(Error::BlockOutOfRange { block: l, count: scheme.block_count() });
        }
        out.values[i * d..(i + 1) * d].copy_from_slice(fresh.get(i));
    }
    Ok(out)
}

fn points(x: &InputVector, q: f64) -> Result<PointConfiguration> {
    PointConfiguration::new(x.values.chunks(x.dim).map(<[f64]>::to_vec).collect(), q)
}

fn edge_weights(p: usize, x: &InputVector) -> WeightTable {
    WeightTable::from_edge_list(p, &x.values)
}

fn displaced(x: &InputVector) -> Result<DisplacedTree> {
    let tree = x.tree.as_ref().ok_or_else(|| Error::InvalidArgument("BRW inputs carry no tree".into()))?;
    DisplacedTree::new((**tree).clone(), x.values.clone())
}

fn tree_of(x: &InputVector) -> Result<&GwTree> {
    x.tree.as_deref().ok_or_else(|| Error::InvalidArgument("BRW inputs carry no tree".into()))
}

fn graph_point(g: GraphSolution, value: f64) -> SolutionPoint {
    SolutionPoint::new(g.encoding(), value)
}

/// Exact global minimizer of `ψ_n(x; ·)` with its canonical encoding.
pub fn solve(instance: &ProblemInstance, x: &InputVector) -> Result<SolutionPoint> {
    match &instance.family {
        Family::Tsp { q, .. } => {
            let cfg = points(x, *q)?;
            let g = euclidean::tsp_solve(&cfg)?;
            let v = cfg.length(&g);
            Ok(graph_point(g, v))
        }
        Family::Mst { q, .. } => {
            let cfg = points(x, *q)?;
            let g = euclidean::mst_solve(&cfg)?;
            let v = cfg.length(&g);
            Ok(graph_point(g, v))
        }
        Family::WeightedGraph { p, kind } => {
            let (g, v) = graph::solve(&edge_weights(*p, x), *kind)?;
            Ok(graph_point(g, v))
        }
        Family::Assignment { n } => {
            let c = CostMatrix::new(*n, x.values.clone())?;
            let pi = weighted::assignment_solve(&c);
            let v = c.cost(&pi);
            Ok(SolutionPoint::new(pi.encoding(), v))
        }
        Family::Sk { .. } => {
            let (s, e) = spin::sk_ground_state(&x.values)?;
            Ok(SolutionPoint::new(s.encoding(), e))
        }
        Family::Ea { lattice, .. } => {
            let (s, e) = spin::ea_ground_state(lattice, &x.values)?;
            Ok(SolutionPoint::new(s.encoding(), e))
        }
        Family::Brw { .. } => {
            let dt = displaced(x)?;
            let leaf = brw::min_displacement(&dt)?;
            Ok(SolutionPoint::new(brw::leaf_encoding(&dt.tree, leaf.vertex), leaf.position))
        }
        Family::Wigner { n } => {
            let a = SymmetricMatrix::from_upper(*n, x.values.clone())?;
            let p = matrix::wigner_min(&a)?;
            Ok(SolutionPoint::new(p.vector.encoding(), p.lambda))
        }
        Family::Wishart { m, n } => {
            let mm = RectMatrix::new(*m, *n, x.values.clone())?;
            let p = matrix::wishart_max(&mm)?;
            Ok(SolutionPoint::new(p.vector.encoding(), -p.lambda))
        }
    }
}

fn mismatch(enc: &Encoding, family: FamilyKind) -> Error {
    Error::InvalidArgument(format!("encoding {enc:?} does not belong to {family}"))
}

/// `ψ_n(x; ω)` for an encoded solution `ω`.
pub fn objective(instance: &ProblemInstance, x: &InputVector, enc: &Encoding) -> Result<f64> {
    let kind = instance.kind();
    match (&instance.family, enc) {
        (Family::Tsp { q, .. } | Family::Mst { q, .. }, Encoding::Edges(e)) => {
            let cfg = points(x, *q)?;
            Ok(e.iter().map(|&(a, b)| cfg.edge_weight(a as usize, b as usize)).sum())
        }
        (Family::WeightedGraph { p, .. }, Encoding::Edges(e)) => {
            let w = edge_weights(*p, x);
            Ok(e.iter().map(|&(a, b)| w.get(a as usize, b as usize)).sum())
        }
        (Family::Assignment { n }, Encoding::Permutation(pi)) => {
            Ok(pi.iter().enumerate().map(|(i, &j)| x.values[i * n + j as usize]).sum())
        }
        (Family::Sk { .. }, Encoding::Spins(s)) => {
            Ok(CouplingGraph::complete(s.len()).energy(&x.values, s))
        }
        (Family::Ea { lattice, .. }, Encoding::Spins(s)) => {
            Ok(spin::ea_energy(lattice, &x.values, &SpinConfig { sigma: s.clone() }))
        }
        (Family::Brw { .. }, Encoding::Leaf(path)) => Ok(path.iter().map(|&v| x.values[v as usize - 1]).sum()),
        (Family::Wigner { n }, Encoding::Vector(v)) => {
            let a = SymmetricMatrix::from_upper(*n, x.values.clone())?;
            let mut s = 0.0;
            for i in 0..*n {
                for j in 0..*n {
                    s += a.get(i, j) * v[i] * v[j];
                }
            }
            Ok(s)
        }
        (Family::Wishart { m, n }, Encoding::Vector(v)) => {
            let mut s = 0.0;
            for r in 0..*m {
                let row: f64 = (0..*n).map(|c| x.values[r * n + c] * v[c]).sum();
                s += row * row;
            }
            Ok(-s)
        }
        _ => Err(mismatch(enc, kind)),
    }
}

/// `d_n` between two encoded solutions of this family.
pub fn distance(instance: &ProblemInstance, a: &Encoding, b: &Encoding) -> Result<f64> {
    let kind = instance.kind();
    match (&instance.family, a, b) {
        (Family::Tsp { n, .. } | Family::Mst { n, .. } | Family::WeightedGraph { p: n, .. }, Encoding::Edges(x), Encoding::Edges(y)) => {
            Ok(graph::symmetric_difference(x, y) as f64 / *n as f64)
        }
        (Family::Assignment { .. }, Encoding::Permutation(x), Encoding::Permutation(y)) => Ok(weighted::perm_metric(
            &PermutationSolution { pi: x.clone() },
            &PermutationSolution { pi: y.clone() },
        )),
        (Family::Sk { .. }, Encoding::Spins(x), Encoding::Spins(y)) => {
            Ok(spin::hamming(&SpinConfig { sigma: x.clone() }, &SpinConfig { sigma: y.clone() }))
        }
        (Family::Ea { lattice, .. }, Encoding::Spins(x), Encoding::Spins(y)) => Ok(spin::ea_metric(
            lattice,
            &SpinConfig { sigma: x.clone() },
            &SpinConfig { sigma: y.clone() },
        )),
        (Family::Brw { n, .. }, Encoding::Leaf(x), Encoding::Leaf(y)) => Ok(brw::path_metric(x, y, *n)),
        (Family::Wigner { .. } | Family::Wishart { .. }, Encoding::Vector(x), Encoding::Vector(y)) => {
            Ok(crate::solution::euclidean(x, y))
        }
        _ => Err(mismatch(a, kind)),
    }
}

/// Builds a cloud under the family metric.
pub fn cloud(instance: &ProblemInstance, points: Vec<SolutionPoint>) -> SolutionCloud {
    SolutionCloud::from_points(points, |a, b| {
        distance(instance, &a.encoding, &b.encoding).expect("cloud points share the family encoding")
    })
}

/// `N_{n,θ}`: every solution within `θ` of the optimum.
#[derive(Debug, Clone)]
pub struct NearOptimalSet {
    pub theta: f64,
    pub optimum: f64,
    pub members: Vec<SolutionPoint>,
    pub exhaustive: bool,
}

/// Membership cut-off `ψ_opt + θ + 1e-12 (1 + |ψ_opt|)`.
pub fn window_cutoff(optimum: f64, theta: f64) -> f64 {
    optimum + theta + 1e-12 * (1.0 + optimum.abs())
}

fn from_enumeration(theta: f64, all: Vec<(Encoding, f64)>) -> NearOptimalSet {
    let optimum = all.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
    let cut = window_cutoff(optimum, theta);
    let mut members: Vec<SolutionPoint> = all
        .into_iter()
        .filter(|(_, v)| *v <= cut)
        .map(|(e, v)| SolutionPoint::new(e, v))
        .collect();
    members.sort_by(|a, b| a.objective.total_cmp(&b.objective));
    NearOptimalSet { theta, optimum, members, exhaustive: true }
}

pub fn near_optimal_set(instance: &ProblemInstance, x: &InputVector, theta: f64) -> Result<NearOptimalSet> {
    if !(theta >= 0.0) {
        return Err(Error::InvalidArgument(format!("theta must be >= 0, got {theta}")));
    }
    let graph_set = |w: &WeightTable, kind: GraphKind| -> Result<NearOptimalSet> {
        let mut all = Vec::new();
        match kind {
            GraphKind::Tour => graph::for_each_tour(w, |o, c| all.push((GraphSolution::from_cycle(o).encoding(), c)))?,
            GraphKind::Tree => graph::for_each_tree(w, |e, c| {
                all.push((GraphSolution::from_edges(e.iter().copied(), GraphKind::Tree).encoding(), c))
            })?,
            GraphKind::Matching => graph::for_each_matching(w, |e, c| {
                all.push((GraphSolution::from_edges(e.iter().copied(), GraphKind::Matching).encoding(), c))
            })?,
        }
        Ok(from_enumeration(theta, all))
    };
    match &instance.family {
        Family::Tsp { q, .. } => graph_set(&points(x, *q)?.weight_table(), GraphKind::Tour),
        Family::Mst { q, .. } => graph_set(&points(x, *q)?.weight_table(), GraphKind::Tree),
        Family::WeightedGraph { p, kind } => graph_set(&edge_weights(*p, x), *kind),
        Family::Assignment { n } => {
            let c = CostMatrix::new(*n, x.values.clone())?;
            let all = weighted::enumerate_assignments(&c)?
                .into_iter()
                .map(|(p, v)| (p.encoding(), v))
                .collect();
            Ok(from_enumeration(theta, all))
        }
        Family::Sk { .. } | Family::Ea { .. } => {
            let states = match &instance.family {
                Family::Sk { .. } => spin::sk_near_optimal(&x.values, theta)?,
                Family::Ea { lattice, .. } => spin::ea_near_optimal(lattice, &x.values, theta)?,
                _ => unreachable!(),
            };
            let optimum = states[0].1;
            let members = states.into_iter().map(|(s, e)| SolutionPoint::new(s.encoding(), e)).collect();
            Ok(NearOptimalSet { theta, optimum, members, exhaustive: true })
        }
        Family::Brw { .. } => {
            let dt = displaced(x)?;
            let leaves = brw::near_optimal_leaves(&dt, theta)?;
            let optimum = leaves[0].position;
            let members = leaves
                .into_iter()
                .map(|l| SolutionPoint::new(brw::leaf_encoding(&dt.tree, l.vertex), l.position))
                .collect();
            Ok(NearOptimalSet { theta, optimum, members, exhaustive: true })
        }
        Family::Wigner { .. } | Family::Wishart { .. } => Err(Error::ContinuousSpace),
    }
}

/// Window rule `θ_n = c · rate(n)` with the family/variant rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowRule {
    pub family: FamilyKind,
    pub variant: SchemeVariant,
    pub c: f64,
    /// Ambient dimension and power (Euclidean families only).
    pub d: usize,
    pub q: f64,
}

impl WindowRule {
    pub fn new(family: FamilyKind, variant: SchemeVariant, c: f64) -> Self {
        Self { family, variant, c, d: 2, q: 1.0 }
    }

    pub fn for_family(family: &Family, variant: SchemeVariant, c: f64) -> Self {
        Self { family: family.kind(), variant, c, d: family.dim().max(2), q: family.q() }
    }

    pub fn rate(&self, n: usize) -> f64 {
        let n = n as f64;
        match (self.family, self.variant) {
            (FamilyKind::Tsp | FamilyKind::Mst, _) => n.powf(-self.q / self.d as f64),
            (FamilyKind::WeightedGraph | FamilyKind::Assignment, _) => 1.0 / n,
            (FamilyKind::Sk, SchemeVariant::RowBlock) => n.sqrt(),
            (FamilyKind::Sk | FamilyKind::Ea | FamilyKind::Brw | FamilyKind::Wishart, _) => 1.0,
            (FamilyKind::Wigner, _) => 1.0 / n.sqrt(),
        }
    }
}

pub fn window_length(rule: &WindowRule, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("window length needs n >= 2, got {n}")));
    }
    if !(rule.c > 0.0) {
        return Err(Error::InvalidArgument(format!("window constant must be positive, got {}", rule.c)));
    }
    Ok(rule.c * rule.rate(n))
}

/// Perturbed optimizers `ω̂(X^n_l)` for the selected blocks, and their cloud.
#[derive(Debug, Clone)]
pub struct PerturbedOptimizers {
    pub blocks: Vec<usize>,
    /// One solution per selected block, in block order.
    pub solutions: Vec<SolutionPoint>,
    pub cloud: SolutionCloud,
}

/// Blocks to perturb: all of them, or `size` drawn without replacement. For
/// BRW the draw is stratified to include ancestral edges of the optimum.
pub fn select_blocks(
    instance: &ProblemInstance,
    x: &InputVector,
    scheme: &PerturbationScheme,
    block_subsample: Option<usize>,
    rep_seed: u64,
) -> Result<Vec<usize>> {
    let m = scheme.block_count();
    let Some(size) = block_subsample else {
        return Ok((0..m).collect());
    };
    if size == 0 || size > m {
        return Err(Error::InvalidArgument(format!("block subsample {size} not in 1..={m}")));
    }
    let mut rng = seed::substream(rep_seed, &[purpose::SUBSAMPLE]);
    if instance.kind() == FamilyKind::Brw && scheme.variant == SchemeVariant::SingleBlock {
        let dt = displaced(x)?;
        let leaf = brw::min_displacement(&dt)?;
        return Ok(brw::stratified_edges(tree_of(x)?, leaf.vertex, size, BRW_MIN_ANCESTRAL, &mut rng));
    }
    let mut b = index::sample(&mut rng, m, size).into_vec();
    b.sort_unstable();
    Ok(b)
}

/// Solves every selected perturbed input. The fresh copy for block `l` comes
/// from the substream `(rep_seed, FRESH, l)`, so results do not depend on the
/// order in which blocks run.
pub fn perturbed_optimizers(
    instance: &ProblemInstance,
    x: &InputVector,
    scheme: &PerturbationScheme,
    block_subsample: Option<usize>,
    rep_seed: u64,
) -> Result<PerturbedOptimizers> {
    let blocks = select_blocks(instance, x, scheme, block_subsample, rep_seed)?;
    let solutions = blocks
        .par_iter()
        .map(|&l| {
            let mut rng = seed::substream(rep_seed, &[purpose::FRESH, l as u64]);
            let fresh = sample_fresh(instance, x, &mut rng);
            solve(instance, &perturb_inputs(x, scheme, l, &fresh)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let cloud = cloud(instance, solutions.clone());
    Ok(PerturbedOptimizers { blocks, solutions, cloud })
}

/// Partial cover of the perturbed-optimizer cloud at radius `ε` after
/// discarding an `ε` fraction of the blocks.
pub fn stability_statistic(
    instance: &ProblemInstance,
    x: &InputVector,
    scheme: &PerturbationScheme,
    epsilon: f64,
    block_subsample: Option<usize>,
    rep_seed: u64,
) -> Result<CoverReport> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let po = perturbed_optimizers(instance, x, scheme, block_subsample, rep_seed)?;
    metric::partial_cover_count(&po.cloud, epsilon, epsilon)
}

/// Mean over the selected blocks of `ψ(x; ω̂(X^n_l)) − ψ_opt(x)`.
pub fn mean_perturbed_excess(
    instance: &ProblemInstance,
    x: &InputVector,
    po: &PerturbedOptimizers,
) -> Result<f64> {
    let opt = solve(instance, x)?.objective;
    let mut total = 0.0;
    for s in &po.solutions {
        total += objective(instance, x, &s.encoding)? - opt;
    }
    Ok(total / po.solutions.len().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(family: Family, law: InputLaw) -> ProblemInstance {
        ProblemInstance::new(family, law, 42).unwrap()
    }

    fn sk(n: usize) -> ProblemInstance {
        inst(Family::Sk { n }, InputLaw::STANDARD_GAUSSIAN)
    }

    #[test]
    fn sampling_is_deterministic_and_sized() {
        let i = sk(3);
        let a = sample_inputs(&i).unwrap();
        assert_eq!(a, sample_inputs(&i).unwrap());
        assert_eq!(a.len(), 3);
        assert_ne!(a, sample_inputs(&i.reseeded(43)).unwrap());
        let t = inst(Family::Tsp { n: 5, d: 2, q: 1.0 }, InputLaw::UNIT_UNIFORM);
        let x = sample_inputs(&t).unwrap();
        assert_eq!((x.len(), x.dim), (5, 2));
    }

    #[test]
    fn rejects_out_of_cap_and_bad_laws() {
        let e = ProblemInstance::new(Family::Sk { n: 30 }, InputLaw::STANDARD_GAUSSIAN, 0).unwrap_err();
        assert!(matches!(&e, Error::Validation(m) if m.contains("22")), "{e}");
        assert!(matches!(
            ProblemInstance::new(Family::Assignment { n: 4 }, InputLaw::STANDARD_GAUSSIAN, 0),
            Err(Error::UnsupportedLaw(_))
        ));
        assert!(matches!(
            ProblemInstance::new(Family::Wigner { n: 4 }, InputLaw::UNIT_EXPONENTIAL, 0),
            Err(Error::UnsupportedLaw(_))
        ));
        assert!(ProblemInstance::new(Family::Tsp { n: 5, d: 2, q: 2.0 }, InputLaw::UNIT_UNIFORM, 0).is_err());
    }

    #[test]
    fn perturbation_replaces_exactly_the_block() {
        let i = sk(5);
        let x = sample_inputs(&i).unwrap();
        let fresh = sample_fresh(&i, &x, &mut seed::rng_from(1));
        let s = PerturbationScheme::singletons(x.len());
        let y = perturb_inputs(&x, &s, 3, &fresh).unwrap();
        for k in 0..x.len() {
            assert_eq!(y.values[k], if k == 3 { fresh.values[k] } else { x.values[k] });
        }
        let all = PerturbationScheme::explicit(SchemeVariant::RowBlock, x.len(), vec![(0..x.len()).collect()]).unwrap();
        assert_eq!(perturb_inputs(&x, &all, 0, &fresh).unwrap(), fresh);
        assert!(matches!(perturb_inputs(&x, &s, 99, &fresh), Err(Error::BlockOutOfRange { .. })));
    }

    #[test]
    fn schemes_by_family() {
        let i = sk(6);
        let x = sample_inputs(&i).unwrap();
        let rows = PerturbationScheme::for_instance(&i, &x, SchemeVariant::RowBlock).unwrap();
        assert_eq!(rows.block_count(), 6);
        assert_eq!(rows.block(0).unwrap().len(), 5);
        let w = inst(Family::Wigner { n: 4 }, InputLaw::STANDARD_GAUSSIAN);
        let xw = sample_inputs(&w).unwrap();
        let rw = PerturbationScheme::for_instance(&w, &xw, SchemeVariant::RowBlock).unwrap();
        // Row i touches 2n − 1 matrix positions, i.e. n packed entries.
        assert!((0..4).all(|i| rw.block(i).unwrap().len() == 4));
        let t = inst(Family::Tsp { n: 5, d: 2, q: 1.0 }, InputLaw::UNIT_UNIFORM);
        let xt = sample_inputs(&t).unwrap();
        assert!(matches!(
            PerturbationScheme::for_instance(&t, &xt, SchemeVariant::RowBlock),
            Err(Error::UnsupportedScheme { .. })
        ));
    }

    #[test]
    fn solve_examples() {
        let i = sk(2);
        let x = InputVector { dim: 1, values: vec![0.5], tree: None };
        let s = solve(&i, &x).unwrap();
        assert_eq!(s.encoding, Encoding::Spins(vec![1, 1]));
        assert_eq!(s.objective, -0.5);
        let a = inst(Family::Assignment { n: 2 }, InputLaw::UNIT_UNIFORM);
        let xa = InputVector { dim: 1, values: vec![1.0, 2.0, 2.0, 1.0], tree: None };
        let s = solve(&a, &xa).unwrap();
        assert_eq!(s.encoding, Encoding::Permutation(vec![0, 1]));
        assert_eq!(s.objective, 2.0);
        let t = inst(Family::Tsp { n: 3, d: 2, q: 1.0 }, InputLaw::UNIT_UNIFORM);
        let xt = InputVector { dim: 2, values: vec![0.0, 0.0, 3.0, 0.0, 0.0, 4.0], tree: None };
        let s = solve(&t, &xt).unwrap();
        assert!((s.objective - 12.0).abs() < 1e-12);
    }

    #[test]
    fn near_optimal_examples() {
        let i = sk(2);
        let x = InputVector { dim: 1, values: vec![0.5], tree: None };
        assert_eq!(near_optimal_set(&i, &x, 0.7).unwrap().members.len(), 1);
        assert_eq!(near_optimal_set(&i, &x, 1.0).unwrap().members.len(), 2);
        let w = inst(Family::Wigner { n: 3 }, InputLaw::STANDARD_GAUSSIAN);
        let xw = sample_inputs(&w).unwrap();
        assert!(matches!(near_optimal_set(&w, &xw, 0.1), Err(Error::ContinuousSpace)));
    }

    #[test]
    fn objective_recomputes_solver_value() {
        let families = [
            (Family::Tsp { n: 7, d: 2, q: 1.0 }, InputLaw::UNIT_UNIFORM),
            (Family::Mst { n: 9, d: 3, q: 2.0 }, InputLaw::STANDARD_GAUSSIAN),
            (Family::WeightedGraph { p: 6, kind: GraphKind::Matching }, InputLaw::UNIT_UNIFORM),
            (Family::Assignment { n: 6 }, InputLaw::UNIT_EXPONENTIAL),
            (Family::Sk { n: 8 }, InputLaw::STANDARD_GAUSSIAN),
            (Family::ea(&[3, 3]).unwrap(), InputLaw::STANDARD_GAUSSIAN),
            (
                Family::Brw { n: 6, progeny: ProgenyLaw::deterministic(2), condition_on_survival: true, tree_seed: None },
                InputLaw::STANDARD_GAUSSIAN,
            ),
            (Family::Wigner { n: 7 }, InputLaw::STANDARD_GAUSSIAN),
            (Family::Wishart { m: 9, n: 6 }, InputLaw::Uniform { low: -1.0, high: 1.0 }),
        ];
        for (f, law) in families {
            let i = inst(f, law);
            let x = sample_inputs(&i).unwrap();
            let s = solve(&i, &x).unwrap();
            let v = objective(&i, &x, &s.encoding).unwrap();
            assert!((v - s.objective).abs() <= 1e-9 * (1.0 + v.abs()), "{}: {v} vs {}", i.kind(), s.objective);
        }
    }

    #[test]
    fn window_examples() {
        let tsp = WindowRule::new(FamilyKind::Tsp, SchemeVariant::SingleBlock, 1.0);
        assert!((window_length(&tsp, 100).unwrap() - 0.1).abs() < 1e-15);
        let ram = WindowRule::new(FamilyKind::Assignment, SchemeVariant::SingleBlock, 1.0);
        assert!((window_length(&ram, 50).unwrap() - 0.02).abs() < 1e-15);
        let row = WindowRule::new(FamilyKind::Sk, SchemeVariant::RowBlock, 1.0);
        assert_eq!(window_length(&row, 49).unwrap(), 7.0);
        assert!(window_length(&row, 1).is_err());
    }

    #[test]
    fn three_point_tour_cloud_is_a_point() {
        let t = inst(Family::Tsp { n: 3, d: 2, q: 1.0 }, InputLaw::UNIT_UNIFORM);
        let x = sample_inputs(&t).unwrap();
        let s = PerturbationScheme::singletons(3);
        let po = perturbed_optimizers(&t, &x, &s, None, 7).unwrap();
        assert_eq!(po.cloud.len(), 1);
        assert_eq!(po.solutions.len(), 3);
        let r = stability_statistic(&t, &x, &s, 0.25, None, 7).unwrap();
        assert_eq!(r.ball_count, 1);
    }

    #[test]
    fn subsample_uses_exact_block_count() {
        let i = sk(10);
        let x = sample_inputs(&i).unwrap();
        let s = PerturbationScheme::singletons(x.len());
        let po = perturbed_optimizers(&i, &x, &s, Some(12), 3).unwrap();
        assert_eq!(po.solutions.len(), 12);
        assert_eq!(po.cloud.total_weight(), 12);
        assert!(perturbed_optimizers(&i, &x, &s, Some(100), 3).is_err());
    }

    #[test]
    fn degenerate_fresh_copy_gives_single_point() {
        let i = sk(6);
        let x = sample_inputs(&i).unwrap();
        let s = PerturbationScheme::singletons(x.len());
        let pts: Vec<SolutionPoint> = (0..s.block_count())
            .map(|l| solve(&i, &perturb_inputs(&x, &s, l, &x).unwrap()).unwrap())
            .collect();
        assert_eq!(cloud(&i, pts).len(), 1);
    }

    #[test]
    fn perturbed_optimum_is_self_consistent() {
        let i = inst(Family::Assignment { n: 5 }, InputLaw::UNIT_EXPONENTIAL);
        let x = sample_inputs(&i).unwrap();
        let s = PerturbationScheme::singletons(x.len());
        let fresh = sample_fresh(&i, &x, &mut seed::rng_from(5));
        let y = perturb_inputs(&x, &s, 4, &fresh).unwrap();
        let opt = solve(&i, &y).unwrap();
        let n0 = near_optimal_set(&i, &y, 0.0).unwrap();
        assert_eq!(n0.members.len(), 1);
        assert_eq!(n0.members[0].encoding, opt.encoding);
    }

    #[test]
    fn brw_fixed_tree_mode_shares_the_tree() {
        let f = Family::Brw {
            n: 5,
            progeny: ProgenyLaw::new(vec![0.2, 0.3, 0.5]).unwrap(),
            condition_on_survival: true,
            tree_seed: Some(11),
        };
        let i = inst(f, InputLaw::STANDARD_GAUSSIAN);
        let a = sample_inputs(&i).unwrap();
        let b = sample_inputs(&i.reseeded(99)).unwrap();
        assert_eq!(a.tree, b.tree);
        assert_ne!(a.values, b.values);
        let s = PerturbationScheme::singletons(a.len());
        let blocks = select_blocks(&i, &a, &s, Some(a.len().min(16)), 1).unwrap();
        assert_eq!(blocks.len(), a.len().min(16));
    }
}
