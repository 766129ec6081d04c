//! Sherrington-Kirkpatrick and Edwards-Anderson ground states by Gray-code
//! enumeration of gauged spin states.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::edge_index;
use crate::solution::Encoding;

/// Largest number of spins handled by the exhaustive scan.
pub const SPIN_CAP: usize = 22;

/// A ±1 spin vector with its first entry fixed to +1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpinConfig {
    pub sigma: Vec<i8>,
}

impl SpinConfig {
    /// Validates entries and applies the global-flip gauge.
    pub fn gauged(mut sigma: Vec<i8>) -> Result<Self> {
        if sigma.is_empty() || sigma.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidArgument(format!("{sigma:?} is not a nonempty ±1 vector")));
        }
        if sigma[0] == -1 {
            sigma.iter_mut().for_each(|s| *s = -*s);
        }
        Ok(Self { sigma })
    }

    pub fn all_up(n: usize) -> Self {
        Self { sigma: vec![1; n] }
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn encoding(&self) -> Encoding {
        Encoding::Spins(self.sigma.clone())
    }
}

/// Finite connected set of `Z^d` sites containing the origin, with
/// nearest-neighbor bonds.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeBox {
    d: usize,
    sites: Vec<Vec<i64>>,
    bonds: Vec<(usize, usize)>,
}

impl LatticeBox {
    /// Box with `shape[k]` sites along axis `k`, i.e. `{0..shape[k]−1}`.
    pub fn new(shape: &[usize]) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::InvalidArgument(format!("bad lattice shape {shape:?}")));
        }
        let total: usize = shape.iter().product();
        let sites = (0..total)
            .map(|mut k| {
                shape
                    .iter()
                    .map(|&l| {
                        let c = (k % l) as i64;
                        k /= l;
                        c
                    })
                    .collect()
            })
            .collect();
        Self::from_sites(sites)
    }

    pub fn from_sites(sites: Vec<Vec<i64>>) -> Result<Self> {
        let d = sites.first().map_or(0, Vec::len);
        if d == 0 || sites.iter().any(|s| s.len() != d) {
            return Err(Error::InvalidArgument("sites must share a positive dimension".into()));
        }
        if !sites.iter().any(|s| s.iter().all(|&c| c == 0)) {
            return Err(Error::InvalidArgument("lattice must contain the origin".into()));
        }
        let mut bonds = Vec::new();
        for i in 0..sites.len() {
            for j in (i + 1)..sites.len() {
                let l1: i64 = sites[i].iter().zip(&sites[j]).map(|(a, b)| (a - b).abs()).sum();
                if l1 == 0 {
                    return Err(Error::InvalidArgument("duplicate site".into()));
                }
                if l1 == 1 {
                    bonds.push((i, j));
                }
            }
        }
        let lattice = Self { d, sites, bonds };
        if !lattice.is_connected() {
            return Err(Error::InvalidArgument("lattice must be connected".into()));
        }
        Ok(lattice)
    }

    fn is_connected(&self) -> bool {
        let mut uf = crate::graph::UnionFind::new(self.sites.len());
        let merged = self.bonds.iter().filter(|&&(a, b)| uf.union(a, b)).count();
        merged + 1 == self.sites.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Vec<i64>] {
        &self.sites
    }

    pub fn bonds(&self) -> &[(usize, usize)] {
        &self.bonds
    }

    /// Index of the origin, the gauged site.
    pub fn origin(&self) -> usize {
        self.sites.iter().position(|s| s.iter().all(|&c| c == 0)).unwrap()
    }
}

/// Coupling graph of a spin system; bond `b` couples `pairs[b]`.
#[derive(Debug, Clone)]
pub struct CouplingGraph {
    n: usize,
    pairs: Vec<(usize, usize)>,
    incident: Vec<Vec<(usize, usize)>>,
}

impl CouplingGraph {
    pub fn new(n: usize, pairs: Vec<(usize, usize)>) -> Self {
        let mut incident = vec![Vec::new(); n];
        for (b, &(i, j)) in pairs.iter().enumerate() {
            incident[i].push((j, b));
            incident[j].push((i, b));
        }
        Self { n, pairs, incident }
    }

    /// Complete graph with bonds in [`edge_index`] order.
    pub fn complete(n: usize) -> Self {
        let pairs = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
        Self::new(n, pairs)
    }

    /// Lattice bonds, relabeled so the origin is spin 0.
    pub fn lattice(lattice: &LatticeBox) -> Self {
        let o = lattice.origin();
        let relabel = |v: usize| if v == o { 0 } else if v == 0 { o } else { v };
        let pairs = lattice.bonds().iter().map(|&(a, b)| (relabel(a), relabel(b))).collect();
        Self::new(lattice.len(), pairs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bond_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// `H(σ) = −Σ_b J_b σ_i σ_j`.
    pub fn energy(&self, couplings: &[f64], sigma: &[i8]) -> f64 {
        assert_eq!(couplings.len(), self.pairs.len(), "coupling count mismatch");
        -self
            .pairs
            .iter()
            .zip(couplings)
            .map(|(&(i, j), &x)| x * f64::from(sigma[i] * sigma[j]))
            .sum::<f64>()
    }

    fn check(&self, couplings: &[f64]) -> Result<()> {
        if self.n > SPIN_CAP {
            return Err(Error::SizeExceeded { what: "spin enumeration", size: self.n, cap: SPIN_CAP });
        }
        if self.n == 0 || couplings.len() != self.pairs.len() {
            return Err(Error::InvalidArgument(format!(
                "{} couplings for {} bonds",
                couplings.len(),
                self.pairs.len()
            )));
        }
        Ok(())
    }

    /// Visits all `2^{n−1}` states with `σ_0 = +1` in Gray-code order; each
    /// step flips one spin and updates the energy in `O(deg)`.
    pub fn gray_scan(&self, couplings: &[f64], mut visit: impl FnMut(&[i8], f64)) -> Result<()> {
        self.check(couplings)?;
        let n = self.n;
        let mut sigma = vec![1i8; n];
        // Local fields h_k = Σ_j J_kj σ_j.
        let mut h = vec![0.0; n];
        for (&(i, j), &x) in self.pairs.iter().zip(couplings) {
            h[i] += x;
            h[j] += x;
        }
        let mut e = -couplings.iter().sum::<f64>();
        visit(&sigma, e);
        for t in 1u64..(1u64 << (n - 1)) {
            let k = t.trailing_zeros() as usize + 1;
            let s = f64::from(sigma[k]);
            e += 2.0 * s * h[k];
            for &(j, b) in &self.incident[k] {
                h[j] -= 2.0 * couplings[b] * s;
            }
            sigma[k] = -sigma[k];
            visit(&sigma, e);
        }
        Ok(())
    }

    /// Exact ground state; exact energy ties go to the smaller spin vector.
    pub fn ground_state(&self, couplings: &[f64]) -> Result<(SpinConfig, f64)> {
        let mut best: (Vec<i8>, f64) = (Vec::new(), f64::INFINITY);
        self.gray_scan(couplings, |s, e| {
            if e < best.1 || (e == best.1 && s < best.0.as_slice()) {
                best = (s.to_vec(), e);
            }
        })?;
        // Recompute to shed the drift of incremental updates.
        let e = self.energy(couplings, &best.0);
        Ok((SpinConfig { sigma: best.0 }, e))
    }

    /// All gauged states with energy `≤ E_min + θ + 1e-12(1 + |E_min|)`,
    /// sorted by energy.
    pub fn near_optimal(&self, couplings: &[f64], theta: f64) -> Result<Vec<(SpinConfig, f64)>> {
        let (_, emin) = self.ground_state(couplings)?;
        let scale = 1e-12 * (1.0 + emin.abs());
        // Incremental energies carry rounding error, so screen loosely and
        // confirm each candidate with a direct evaluation.
        let screen = emin + theta + scale + 1e-9 * (1.0 + emin.abs());
        let mut out = Vec::new();
        self.gray_scan(couplings, |s, e| {
            if e <= screen {
                out.push(s.to_vec());
            }
        })?;
        let mut members: Vec<(SpinConfig, f64)> = out
            .into_iter()
            .map(|s| {
                let e = self.energy(couplings, &s);
                (SpinConfig { sigma: s }, e)
            })
            .filter(|(_, e)| *e <= emin + theta + scale)
            .collect();
        members.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        Ok(members)
    }

    /// Ground state by direct evaluation of every gauged state.
    pub fn ground_state_naive(&self, couplings: &[f64]) -> Result<(SpinConfig, f64)> {
        self.check(couplings)?;
        let n = self.n;
        let mut best: (Vec<i8>, f64) = (Vec::new(), f64::INFINITY);
        for mask in 0u64..(1u64 << (n - 1)) {
            let sigma: Vec<i8> = (0..n)
                .map(|k| if k > 0 && (mask >> (k - 1)) & 1 == 1 { -1 } else { 1 })
                .collect();
            let e = self.energy(couplings, &sigma);
            if e < best.1 || (e == best.1 && sigma < best.0) {
                best = (sigma, e);
            }
        }
        Ok((SpinConfig { sigma: best.0 }, best.1))
    }
}

pub fn sk_bond_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// SK Hamiltonian `−Σ_{i<j} X_ij σ_i σ_j` with bonds in [`edge_index`] order.
pub fn sk_energy(bonds: &[f64], sigma: &SpinConfig) -> f64 {
    let n = sigma.len();
    assert_eq!(bonds.len(), sk_bond_count(n), "bond count must be n(n-1)/2");
    let mut h = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            h -= bonds[edge_index(n, i, j)] * f64::from(sigma.sigma[i] * sigma.sigma[j]);
        }
    }
    h
}

fn sk_size(bonds: &[f64]) -> Result<usize> {
    let n = ((1.0 + (1.0 + 8.0 * bonds.len() as f64).sqrt()) / 2.0).round() as usize;
    if n < 2 || sk_bond_count(n) != bonds.len() {
        return Err(Error::InvalidArgument(format!("{} is not n(n-1)/2 for n >= 2", bonds.len())));
    }
    Ok(n)
}

pub fn sk_ground_state(bonds: &[f64]) -> Result<(SpinConfig, f64)> {
    CouplingGraph::complete(sk_size(bonds)?).ground_state(bonds)
}

pub fn sk_near_optimal(bonds: &[f64], theta: f64) -> Result<Vec<(SpinConfig, f64)>> {
    CouplingGraph::complete(sk_size(bonds)?).near_optimal(bonds, theta)
}

/// EA ground state; spins are indexed by lattice site with the origin gauged.
pub fn ea_ground_state(lattice: &LatticeBox, bonds: &[f64]) -> Result<(SpinConfig, f64)> {
    let g = CouplingGraph::lattice(lattice);
    let (s, e) = g.ground_state(bonds)?;
    Ok((from_relabeled(lattice, s), e))
}

pub fn ea_near_optimal(lattice: &LatticeBox, bonds: &[f64], theta: f64) -> Result<Vec<(SpinConfig, f64)>> {
    let g = CouplingGraph::lattice(lattice);
    Ok(g.near_optimal(bonds, theta)?
        .into_iter()
        .map(|(s, e)| (from_relabeled(lattice, s), e))
        .collect())
}

pub fn ea_energy(lattice: &LatticeBox, bonds: &[f64], sigma: &SpinConfig) -> f64 {
    -lattice
        .bonds()
        .iter()
        .zip(bonds)
        .map(|(&(i, j), &x)| x * f64::from(sigma.sigma[i] * sigma.sigma[j]))
        .sum::<f64>()
}

fn from_relabeled(lattice: &LatticeBox, s: SpinConfig) -> SpinConfig {
    let o = lattice.origin();
    let mut sigma = s.sigma;
    sigma.swap(0, o);
    SpinConfig { sigma }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinFamily {
    Sk,
    Ea,
}

/// SK: normalized Hamming distance. EA: `sqrt((1/|Λ|) Σ_bonds (σ_iσ_j − σ'_iσ'_j)²)`.
pub fn spin_metric(
    s1: &SpinConfig,
    s2: &SpinConfig,
    family: SpinFamily,
    lattice: Option<&LatticeBox>,
) -> Result<f64> {
    if s1.len() != s2.len() {
        return Err(Error::InvalidArgument("spin vectors of different length".into()));
    }
    match family {
        SpinFamily::Sk => Ok(hamming(s1, s2)),
        SpinFamily::Ea => {
            let lattice = lattice.ok_or_else(|| Error::InvalidArgument("EA metric needs a lattice".into()))?;
            Ok(ea_metric(lattice, s1, s2))
        }
    }
}

pub fn hamming(s1: &SpinConfig, s2: &SpinConfig) -> f64 {
    let diff = s1.sigma.iter().zip(&s2.sigma).filter(|(a, b)| a != b).count();
    diff as f64 / s1.len() as f64
}

pub fn ea_metric(lattice: &LatticeBox, s1: &SpinConfig, s2: &SpinConfig) -> f64 {
    let sum: f64 = lattice
        .bonds()
        .iter()
        .map(|&(i, j)| {
            let d = f64::from(s1.sigma[i] * s1.sigma[j] - s2.sigma[i] * s2.sigma[j]);
            d * d
        })
        .sum();
    (sum / lattice.len() as f64).sqrt()
}

/// Lower bound on the SK ground energy with standard Gaussian bonds:
/// `−(√(2ζ² log|S_n|) + log|S_n|)`, `ζ² = n(n−1)/2`, `|S_n| = 2^{n−1}`.
pub fn sk_energy_lower_bound(n: usize) -> f64 {
    let log_s = (n as f64 - 1.0) * std::f64::consts::LN_2;
    let zeta2 = sk_bond_count(n) as f64;
    -((2.0 * zeta2 * log_s).sqrt() + log_s)
}

/// Bond indices of SK row block `i`: every bond touching spin `i`.
pub fn sk_row_block(n: usize, i: usize) -> Vec<usize> {
    let mut b: Vec<usize> = (0..n).filter(|&j| j != i).map(|j| edge_index(n, i, j)).collect();
    b.sort_unstable();
    b
}
