//! Wigner smallest eigenpairs and Wishart largest singular pairs, with the
//! interlacing and gap inequalities for leading principal minors.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::error::{Error, Result};
use crate::law::InputLaw;
use crate::solution::Encoding;

/// Largest matrix order accepted by the eigen solver.
pub const EIGEN_CAP: usize = 512;
/// Largest order for the principal-minor checks.
pub const INTERLACING_CAP: usize = 64;
/// Eigenvalue gap below which the extreme eigenvector is flagged as unstable.
pub const DEGENERATE_GAP: f64 = 1e-10;
const GAUGE_TOL: f64 = 1e-12;
const MAX_ITER: usize = 10_000;

/// Symmetric matrix storing the upper triangle row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    n: usize,
    upper: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn from_upper(n: usize, upper: Vec<f64>) -> Result<Self> {
        if upper.len() != n * (n + 1) / 2 {
            return Err(Error::InvalidArgument(format!("{} entries for order {n}", upper.len())));
        }
        Ok(Self { n, upper })
    }

    /// Reads the upper triangle of a square row list; the lower one is ignored.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("matrix must be square".into()));
        }
        Self::from_upper(n, (0..n).flat_map(|i| rows[i][i..].iter().copied()).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[upper_index(self.n, i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = upper_index(self.n, i, j);
        self.upper[k] = v;
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    pub fn frobenius(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in i..self.n {
                let x = self.get(i, j);
                s += if i == j { x * x } else { 2.0 * x * x };
            }
        }
        s.sqrt()
    }

    /// Leading `k × k` principal submatrix.
    pub fn leading(&self, k: usize) -> Self {
        let upper = (0..k).flat_map(|i| (i..k).map(move |j| (i, j))).map(|(i, j)| self.get(i, j)).collect();
        Self { n: k, upper }
    }
}

/// Index of `(min(i,j), max(i,j))` in the row-wise packed upper triangle.
#[inline]
pub fn upper_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

/// Entry `(i, j)`, `i ≤ j`, at packed position `k`.
pub fn upper_entry(n: usize, mut k: usize) -> (usize, usize) {
    for i in 0..n {
        let row = n - i;
        if k < row {
            return (i, i + k);
        }
        k -= row;
    }
    panic!("packed index out of range");
}

/// Row-major `m × n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RectMatrix {
    m: usize,
    n: usize,
    data: Vec<f64>,
}

impl RectMatrix {
    pub fn new(m: usize, n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != m * n || m == 0 || n == 0 {
            return Err(Error::InvalidArgument(format!("{} entries for {m}x{n}", data.len())));
        }
        Ok(Self { m, n, data })
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.m, self.n, &self.data)
    }

    /// `MᵀM`.
    pub fn gram(&self) -> SymmetricMatrix {
        let d = self.to_dense();
        let g = d.transpose() * &d;
        let n = self.n;
        SymmetricMatrix { n, upper: (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).map(|(i, j)| g[(i, j)]).collect() }
    }
}

pub fn sample_wigner<R: Rng + ?Sized>(n: usize, law: InputLaw, rng: &mut R) -> SymmetricMatrix {
    SymmetricMatrix { n, upper: law.sample_n(n * (n + 1) / 2, rng) }
}

pub fn sample_wishart<R: Rng + ?Sized>(m: usize, n: usize, law: InputLaw, rng: &mut R) -> Result<RectMatrix> {
    RectMatrix::new(m, n, law.sample_n(m * n, rng))
}

/// Ascending eigenvalues with orthonormal eigenvectors (`vectors[k]` pairs
/// with `values[k]`).
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Full symmetric eigendecomposition, certified by per-pair residuals
/// `||Av − λv|| ≤ 1e-8 ||A||_F` and orthonormality within 1e-10.
pub fn symmetric_eigen(a: &SymmetricMatrix) -> Result<Eigen> {
    let n = a.n();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if n > EIGEN_CAP {
        return Err(Error::SizeExceeded { what: "symmetric eigen", size: n, cap: EIGEN_CAP });
    }
    let dense = a.to_dense();
    let se = SymmetricEigen::try_new(dense.clone(), f64::EPSILON, MAX_ITER).ok_or(Error::NoConvergence(MAX_ITER))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
    let values: Vec<f64> = order.iter().map(|&k| se.eigenvalues[k]).collect();
    let vectors: Vec<Vec<f64>> = order.iter().map(|&k| se.eigenvectors.column(k).iter().copied().collect()).collect();
    let fro = a.frobenius().max(f64::MIN_POSITIVE);
    for (lambda, v) in values.iter().zip(&vectors) {
        let v = DVector::from_column_slice(v);
        let r = (&dense * &v - *lambda * &v).norm();
        if r > 1e-8 * fro || ((v.norm() - 1.0).abs() > 1e-10) {
            return Err(Error::NoConvergence(MAX_ITER));
        }
    }
    Ok(Eigen { values, vectors })
}

/// Unit vector with the sign gauge applied: the first coordinate exceeding
/// 1e-12 in absolute value is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugedVector(Vec<f64>);

impl GaugedVector {
    /// Normalizes and gauges `v`.
    pub fn new(v: Vec<f64>) -> Result<Self> {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::InvalidArgument("cannot gauge a zero or non-finite vector".into()));
        }
        Ok(Self(gauge(v.into_iter().map(|x| x / norm).collect())))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn encoding(&self) -> Encoding {
        Encoding::Vector(self.0.clone())
    }
}

/// Sign gauge without normalization.
pub fn gauge(mut v: Vec<f64>) -> Vec<f64> {
    if let Some(&pivot) = v.iter().find(|x| x.abs() > GAUGE_TOL) {
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    v
}

/// `||v1 − v2||₂` of gauged representatives.
pub fn vector_metric(v1: &GaugedVector, v2: &GaugedVector) -> f64 {
    crate::solution::euclidean(v1.as_slice(), v2.as_slice())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extreme {
    WignerMin,
    WishartMax,
}

#[derive(Debug, Clone)]
pub struct ExtremePair {
    pub lambda: f64,
    pub vector: GaugedVector,
    /// Distance to the neighboring eigenvalue.
    pub gap: f64,
    /// Set when `gap < 1e-10`; the eigenvector is then not well defined.
    pub degenerate: bool,
}

/// Smallest eigenpair of a symmetric matrix.
pub fn wigner_min(a: &SymmetricMatrix) -> Result<ExtremePair> {
    let e = symmetric_eigen(a)?;
    let gap = e.values.get(1).map_or(f64::INFINITY, |v| v - e.values[0]);
    let vector = GaugedVector::new(e.vectors[0].clone())?;
    Ok(ExtremePair { lambda: e.values[0], vector, gap, degenerate: gap < DEGENERATE_GAP })
}

/// Largest eigenpair of `MᵀM`, i.e. the squared top singular value with its
/// right singular vector. The residual is certified against `M`.
pub fn wishart_max(m: &RectMatrix) -> Result<ExtremePair> {
    let e = symmetric_eigen(&m.gram())?;
    let n = e.values.len();
    let lambda = e.values[n - 1];
    let gap = if n > 1 { lambda - e.values[n - 2] } else { f64::INFINITY };
    let v = DVector::from_column_slice(&e.vectors[n - 1]);
    let dense = m.to_dense();
    let r = (dense.transpose() * (&dense * &v) - lambda * &v).norm();
    if r > 1e-8 * dense.norm().powi(2).max(f64::MIN_POSITIVE) {
        return Err(Error::NoConvergence(MAX_ITER));
    }
    let vector = GaugedVector::new(e.vectors[n - 1].clone())?;
    Ok(ExtremePair { lambda, vector, gap, degenerate: gap < DEGENERATE_GAP })
}

#[derive(Debug, Clone)]
pub struct InterlacingReport {
    pub n: usize,
    /// `min_k min(λ_k − μ⁻_{n−k+1}, μ⁺_k − λ_k)`; nonnegative when interlacing holds.
    pub interlace_margin: f64,
    /// Per `ε`, the smallest slack of the gap estimate over all nested pairs `(B_{k−1}, B_k)`.
    pub gap_margins: Vec<(f64, f64)>,
    /// Absolute tolerance applied to both margins.
    pub tol: f64,
}

impl InterlacingReport {
    pub fn passed(&self) -> bool {
        self.interlace_margin >= -self.tol && self.gap_margins.iter().all(|&(_, m)| m >= -self.tol)
    }
}

/// Gap-estimate parameters checked by [`interlacing_check`].
pub const GAP_EPSILONS: [f64; 2] = [0.1, 0.5];

/// Checks `μ⁻_{n−k+1} ≤ λ_k ≤ μ⁺_k` for every `k`, and
/// `λ_max(B_k) − μ⁺_{k−1} ≥ 2√(ε(1−ε))|aᵀx| − εμ⁺_{k−1} + ε a_kk` for every
/// nested pair of leading minors, where `x` is the top eigenvector of
/// `B_{k−1}` and `a` the first `k−1` entries of row `k`.
pub fn interlacing_check(a: &SymmetricMatrix, epsilons: &[f64]) -> Result<InterlacingReport> {
    let n = a.n();
    if n > INTERLACING_CAP {
        return Err(Error::SizeExceeded { what: "interlacing check", size: n, cap: INTERLACING_CAP });
    }
    let minors: Vec<Eigen> = (1..=n).map(|k| symmetric_eigen(&a.leading(k))).collect::<Result<_>>()?;
    let lo = |k: usize| minors[k - 1].values[0];
    let hi = |k: usize| *minors[k - 1].values.last().unwrap();
    let lambda = &minors[n - 1].values;
    let mut interlace_margin = f64::INFINITY;
    for k in 1..=n {
        let l = lambda[k - 1];
        interlace_margin = interlace_margin.min(l - lo(n - k + 1)).min(hi(k) - l);
    }
    let mut gap_margins = Vec::new();
    for &eps in epsilons {
        let mut margin = f64::INFINITY;
        for k in 2..=n {
            let x = minors[k - 2].vectors.last().unwrap();
            let ax: f64 = (0..k - 1).map(|i| a.get(k - 1, i) * x[i]).sum();
            let mu = hi(k - 1);
            let rhs = 2.0 * (eps * (1.0 - eps)).sqrt() * ax.abs() - eps * mu + eps * a.get(k - 1, k - 1);
            margin = margin.min(hi(k) - mu - rhs);
        }
        gap_margins.push((eps, margin));
    }
    Ok(InterlacingReport { n, interlace_margin, gap_margins, tol: 1e-9 * a.frobenius().max(1.0) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;

    fn sym(rows: &[&[f64]]) -> SymmetricMatrix {
        SymmetricMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn packed_indexing() {
        let n = 5;
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                assert_eq!(upper_index(n, i, j), k);
                assert_eq!(upper_index(n, j, i), k);
                assert_eq!(upper_entry(n, k), (i, j));
                k += 1;
            }
        }
    }

    #[test]
    fn diagonal_eigenvalues() {
        let e = symmetric_eigen(&sym(&[&[3.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 2.0]])).unwrap();
        for (got, want) in e.values.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn swap_matrix_pair() {
        let a = sym(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let p = wigner_min(&a).unwrap();
        assert!((p.lambda + 1.0).abs() < 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((p.vector.as_slice()[0] - h).abs() < 1e-12);
        assert!((p.vector.as_slice()[1] + h).abs() < 1e-12);
        assert!((p.gap - 2.0).abs() < 1e-12);
    }

    #[test]
    fn random_residuals_and_orthogonality() {
        let mut rng = rng_from(1);
        for n in [1, 2, 6, 30] {
            let a = sample_wigner(n, InputLaw::STANDARD_GAUSSIAN, &mut rng);
            let e = symmetric_eigen(&a).unwrap();
            let d = a.to_dense();
            for (l, v) in e.values.iter().zip(&e.vectors) {
                let v = DVector::from_column_slice(v);
                assert!((&d * &v - *l * &v).norm() <= 1e-8 * a.frobenius());
            }
            for i in 0..n {
                for j in 0..n {
                    let dot: f64 = e.vectors[i].iter().zip(&e.vectors[j]).map(|(x, y)| x * y).sum();
                    assert!((dot - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
                }
            }
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn wishart_diagonal() {
        let m = RectMatrix::new(2, 2, vec![1.0, 0.0, 0.0, 2.0]).unwrap();
        let p = wishart_max(&m).unwrap();
        assert!((p.lambda - 4.0).abs() < 1e-12);
        assert!(p.vector.as_slice()[0].abs() < 1e-12);
        assert!((p.vector.as_slice()[1] - 1.0).abs() < 1e-12);
        assert_eq!(vector_metric(&p.vector, &p.vector), 0.0);
    }

    #[test]
    fn gauge_rules() {
        let v = GaugedVector::new(vec![-3.0, 4.0]).unwrap();
        assert_eq!(v.as_slice(), &[0.6, -0.8]);
        let w = GaugedVector::new(vec![0.0, -1.0, 1.0]).unwrap();
        assert!(w.as_slice()[1] > 0.0);
        // Idempotent, and it collapses v and −v.
        assert_eq!(GaugedVector::new(v.clone().into_vec()).unwrap(), v);
        assert_eq!(GaugedVector::new(vec![3.0, -4.0]).unwrap(), v);
        let e1 = GaugedVector::new(vec![1.0, 0.0]).unwrap();
        let e2 = GaugedVector::new(vec![0.0, 1.0]).unwrap();
        assert!((vector_metric(&e1, &e2) - 2f64.sqrt()).abs() < 1e-15);
        assert!(GaugedVector::new(vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn degenerate_gap_is_flagged() {
        let p = wigner_min(&sym(&[&[1.0, 0.0], &[0.0, 1.0]])).unwrap();
        assert!(p.degenerate);
    }

    #[test]
    fn interlacing_two_by_two() {
        let a = sym(&[&[0.3, 1.2], &[1.2, -0.7]]);
        let e = symmetric_eigen(&a).unwrap();
        assert!(e.values[0] <= 0.3 && 0.3 <= e.values[1]);
        assert!(interlacing_check(&a, &GAP_EPSILONS).unwrap().passed());
    }

    #[test]
    fn interlacing_random() {
        let mut rng = rng_from(2);
        for n in [1, 2, 6, 20] {
            let a = sample_wigner(n, InputLaw::STANDARD_GAUSSIAN, &mut rng);
            let r = interlacing_check(&a, &GAP_EPSILONS).unwrap();
            assert!(r.passed(), "{r:?}");
        }
    }

    #[test]
    fn gap_estimate_at_zero_is_interlacing() {
        // With ε = 0 the estimate reads λ_max(B_k) ≥ λ_max(B_{k−1}).
        let a = sample_wigner(8, InputLaw::STANDARD_GAUSSIAN, &mut rng_from(3));
        let r = interlacing_check(&a, &[0.0]).unwrap();
        assert!(r.gap_margins[0].1 >= -r.tol);
    }

    #[test]
    fn wigner_is_symmetric_and_seeded() {
        let a = sample_wigner(5, InputLaw::STANDARD_GAUSSIAN, &mut rng_from(4));
        let b = sample_wigner(5, InputLaw::STANDARD_GAUSSIAN, &mut rng_from(4));
        assert_eq!(a, b);
        let d = a.to_dense();
        assert_eq!(d, d.transpose());
    }
}
