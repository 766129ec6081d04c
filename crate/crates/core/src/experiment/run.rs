//! Replication loop and the per-kind pipelines.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::brw;
use crate::error::{Error, Result};
use crate::matrix::{RectMatrix, SymmetricMatrix};
use crate::metric;
use crate::problem::{
    self, Family, FamilyKind, InputLaw, PerturbationScheme, ProblemInstance, WindowRule,
};
use crate::seed;
use crate::spin::{self, CouplingGraph};
use crate::stats::{self, Summary};
use crate::weighted::{self, CostMatrix};

use super::config::{ExperimentKind, ExperimentSpec};

/// One output line: a single statistic of one replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub family: FamilyKind,
    pub n: usize,
    pub d: usize,
    pub q: f64,
    pub epsilon: Option<f64>,
    pub theta: Option<f64>,
    pub replication: usize,
    pub seed: u64,
    pub statistic: String,
    pub value: f64,
    pub runtime_ms: u64,
}

impl Row {
    pub fn is_failure(&self) -> bool {
        self.statistic.starts_with("failed:")
    }
}

/// Summary of one statistic over the replications of a cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub family: FamilyKind,
    pub n: usize,
    pub epsilon: Option<f64>,
    pub theta: Option<f64>,
    pub statistic: String,
    pub summary: Option<Summary>,
    /// Replications whose value was NaN.
    pub missing: usize,
}

/// A derived pass/fail diagnostic (calibration anchors, tightness growth,
/// oracle mismatches).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: String,
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentRecord {
    pub spec: ExperimentSpec,
    pub rows: Vec<Row>,
    pub summaries: Vec<CellSummary>,
    pub checks: Vec<Check>,
}

impl ExperimentRecord {
    /// Rows of one statistic, in output order.
    pub fn values(&self, statistic: &str) -> Vec<f64> {
        self.rows.iter().filter(|r| r.statistic == statistic).map(|r| r.value).collect()
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.is_failure()).count()
    }
}

/// Values of one replication: `(epsilon, theta, statistic, value)`.
type Stats = Vec<(Option<f64>, Option<f64>, String, f64)>;

struct Unit<'a> {
    spec: &'a ExperimentSpec,
    family: FamilyKind,
    size: usize,
    replication: usize,
}

impl Unit<'_> {
    fn instance(&self, seed: u64) -> Result<ProblemInstance> {
        self.spec.instance(self.family, self.size, seed)
    }
}

/// Runs every replication of every cell. Replication `r` uses the seed
/// `hash64(master_seed, r)`; results do not depend on the thread count.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentRecord> {
    spec.validate()?;
    let mut units = Vec::new();
    for family in spec.families() {
        for size in spec.sizes_for(family) {
            for replication in 0..spec.replications {
                units.push(Unit { spec, family, size, replication });
            }
        }
    }
    let rows: Vec<Row> = units.par_iter().flat_map_iter(run_unit).collect();
    let summaries = summarize_rows(&rows);
    let checks = match spec.kind {
        ExperimentKind::Calibrate => calibrate_checks(spec, &summaries),
        ExperimentKind::Tightness => tightness_checks(spec, &summaries),
        ExperimentKind::OracleCheck => vec![oracle_check_total(&rows)],
        ExperimentKind::Stability => Vec::new(),
    };
    Ok(ExperimentRecord { spec: spec.clone(), rows, summaries, checks })
}

/// [`run_experiment`] on a pool of `jobs` threads.
pub fn run_experiment_with_jobs(spec: &ExperimentSpec, jobs: usize) -> Result<ExperimentRecord> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    pool.install(|| run_experiment(spec))
}

fn run_unit(u: &Unit<'_>) -> Vec<Row> {
    let seed = seed::replication_seed(u.spec.seed, u.replication as u64);
    let start = Instant::now();
    let outcome = match u.spec.kind {
        ExperimentKind::Calibrate => calibrate(u, seed),
        ExperimentKind::Stability => stability(u, seed),
        ExperimentKind::Tightness => tightness(u, seed),
        ExperimentKind::OracleCheck => oracle(u, seed),
    };
    let runtime_ms = if u.spec.timing { start.elapsed().as_millis() as u64 } else { 0 };
    let row = |epsilon, theta, statistic: String, value| Row {
        family: u.family,
        n: u.size,
        d: u.spec.family_at(u.family, u.size).map_or(1, |f| f.dim()),
        q: u.spec.q,
        epsilon,
        theta,
        replication: u.replication,
        seed,
        statistic,
        value,
        runtime_ms,
    };
    match outcome {
        Ok(stats) => stats.into_iter().map(|(e, t, s, v)| row(e, t, s, v)).collect(),
        Err(err) => vec![row(None, None, format!("failed:{}", err.tag()), f64::NAN)],
    }
}

fn theta_for(spec: &ExperimentSpec, inst: &ProblemInstance, c: f64) -> Result<f64> {
    let rule = WindowRule::for_family(&inst.family, spec.variant, c);
    problem::window_length(&rule, inst.family.size())
}

/// Scaled optimum whose limit the calibration anchors refer to.
fn scaled_optimum(inst: &ProblemInstance, optimum: f64) -> f64 {
    match &inst.family {
        Family::Tsp { n, d, q } | Family::Mst { n, d, q } => {
            optimum / (*n as f64).powf((*d as f64 - q) / *d as f64)
        }
        Family::Sk { n } => optimum / (*n as f64).powf(1.5),
        Family::Ea { lattice, .. } => optimum / lattice.len() as f64,
        Family::Brw { n, .. } => optimum / *n as f64,
        Family::Wigner { n } => optimum / (*n as f64).sqrt(),
        // The objective is −λ_max(MᵀM); report λ_max / m.
        Family::Wishart { m, .. } => -optimum / *m as f64,
        Family::WeightedGraph { .. } | Family::Assignment { .. } => optimum,
    }
}

fn calibrate(u: &Unit<'_>, seed: u64) -> Result<Stats> {
    let inst = u.instance(seed)?;
    let x = problem::sample_inputs(&inst)?;
    let opt = problem::solve(&inst, &x)?.objective;
    Ok(vec![
        (None, None, "optimum".into(), opt),
        (None, None, "scaled_optimum".into(), scaled_optimum(&inst, opt)),
    ])
}

fn effective_subsample(spec: &ExperimentSpec, blocks: usize) -> Option<usize> {
    spec.block_subsample.filter(|&k| k < blocks)
}

fn stability(u: &Unit<'_>, seed: u64) -> Result<Stats> {
    let spec = u.spec;
    let inst = u.instance(seed)?;
    let x = problem::sample_inputs(&inst)?;
    let scheme = PerturbationScheme::for_instance(&inst, &x, spec.variant)?;
    let sub = effective_subsample(spec, scheme.block_count());
    let po = problem::perturbed_optimizers(&inst, &x, &scheme, sub, seed)?;
    let excess = problem::mean_perturbed_excess(&inst, &x, &po)?;
    let theta = theta_for(spec, &inst, spec.theta_c[0])?;
    let mut out = Vec::new();
    for &eps in &spec.epsilons {
        let r = metric::partial_cover_count(&po.cloud, eps, eps)?;
        let e = Some(eps);
        let t = Some(theta);
        out.push((e, t, "ball_count".into(), r.ball_count as f64));
        out.push((e, t, "exact_min_packing".into(), r.exact_min_packing.map_or(f64::NAN, |p| p as f64)));
        out.push((e, t, "cloud_size".into(), po.cloud.len() as f64));
        out.push((e, t, "blocks_solved".into(), po.solutions.len() as f64));
        out.push((e, t, "mean_excess".into(), excess));
    }
    Ok(out)
}

fn tightness(u: &Unit<'_>, seed: u64) -> Result<Stats> {
    let spec = u.spec;
    let inst = u.instance(seed)?;
    let x = problem::sample_inputs(&inst)?;
    let mut out = Vec::new();
    for &c in &spec.theta_c {
        let theta = theta_for(spec, &inst, c)?;
        let set = problem::near_optimal_set(&inst, &x, theta)?;
        let size = set.members.len();
        if size > spec.exact_cap {
            return Err(Error::SizeExceeded { what: "near-optimal set", size, cap: spec.exact_cap });
        }
        let cloud = problem::cloud(&inst, set.members);
        for &eps in &spec.epsilons {
            let (e, t) = (Some(eps), Some(theta));
            let packing = metric::packing_number_exact_capped(&cloud, eps, spec.exact_cap)?;
            let cover = metric::covering_number_internal_capped(&cloud, eps, spec.exact_cap);
            out.push((e, t, "near_optimal_size".into(), size as f64));
            out.push((e, t, "packing_number".into(), packing as f64));
            out.push((e, t, "internal_cover".into(), cover.count as f64));
        }
    }
    Ok(out)
}

/// Relative agreement used by the oracle comparisons.
fn agree(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

/// Compares the production solver with an independent brute-force or
/// certificate oracle. Emits `mismatch` = 0 or 1.
fn oracle(u: &Unit<'_>, seed: u64) -> Result<Stats> {
    let inst = u.instance(seed)?;
    let x = problem::sample_inputs(&inst)?;
    let fast = problem::solve(&inst, &x)?;
    let ok = match &inst.family {
        Family::Tsp { .. } | Family::Mst { .. } | Family::WeightedGraph { .. } => {
            let set = problem::near_optimal_set(&inst, &x, 0.0)?;
            agree(set.optimum, fast.objective) && set.members.iter().any(|m| m.encoding == fast.encoding)
        }
        Family::Assignment { n } => {
            let c = CostMatrix::new(*n, x.values.clone())?;
            let slow = weighted::assignment_brute_force(&c)?;
            agree(c.cost(&slow), fast.objective) && slow.encoding() == fast.encoding
        }
        Family::Sk { n } => {
            let (s, e) = CouplingGraph::complete(*n).ground_state_naive(&x.values)?;
            agree(e, fast.objective) && s.encoding() == fast.encoding
        }
        Family::Ea { lattice, .. } => {
            let g = CouplingGraph::new(lattice.len(), lattice.bonds().to_vec());
            let (s, e) = g.ground_state_naive(&x.values)?;
            let s = spin::SpinConfig::gauged(s.sigma)?;
            agree(e, fast.objective) && s.encoding() == fast.encoding
        }
        Family::Brw { .. } => {
            let tree = x.tree.as_ref().expect("BRW inputs carry a tree");
            let dt = brw::DisplacedTree::new((**tree).clone(), x.values.clone())?;
            let slow = brw::min_displacement_scan(&dt)?;
            agree(slow.position, fast.objective) && brw::leaf_encoding(&dt.tree, slow.vertex) == fast.encoding
        }
        Family::Wigner { n } => {
            let a = SymmetricMatrix::from_upper(*n, x.values.clone())?;
            rayleigh_certificate(&a.to_dense(), fast.objective, &fast.encoding, seed)
        }
        Family::Wishart { m, n } => {
            let g = RectMatrix::new(*m, *n, x.values.clone())?.gram();
            // Minimizing −vᵀ(MᵀM)v.
            rayleigh_certificate(&-g.to_dense(), fast.objective, &fast.encoding, seed)
        }
    };
    Ok(vec![(None, None, "mismatch".into(), if ok { 0.0 } else { 1.0 })])
}

/// Certifies `λ = min_v vᵀAv` for a symmetric `A`: the eigen-residual is
/// small and no coordinate vector or random unit vector has a smaller
/// Rayleigh quotient.
fn rayleigh_certificate(a: &DMatrix<f64>, lambda: f64, enc: &crate::Encoding, seed: u64) -> bool {
    let crate::Encoding::Vector(v) = enc else { return false };
    let n = a.nrows();
    let v = DVector::from_column_slice(v);
    let frob = a.norm().max(1.0);
    if (a * &v - &v * lambda).norm() > 1e-8 * frob {
        return false;
    }
    let tol = 1e-9 * frob;
    if (0..n).any(|i| a[(i, i)] < lambda - tol) {
        return false;
    }
    let mut rng = seed::substream(seed, &[seed::purpose::FRESH]);
    (0..32).all(|_| {
        let w = DVector::from_vec(InputLaw::STANDARD_GAUSSIAN.sample_n(n, &mut rng));
        w.dot(&(a * &w)) / w.norm_squared() >= lambda - tol
    })
}

fn cell_key(r: &Row) -> (FamilyKind, usize, Option<u64>, Option<u64>, &str) {
    (r.family, r.n, r.epsilon.map(f64::to_bits), r.theta.map(f64::to_bits), r.statistic.as_str())
}

/// Groups rows by cell in first-appearance order and summarizes each.
pub fn summarize_rows(rows: &[Row]) -> Vec<CellSummary> {
    let mut keys: Vec<(FamilyKind, usize, Option<u64>, Option<u64>, &str)> = Vec::new();
    let mut groups: Vec<Vec<&Row>> = Vec::new();
    for r in rows {
        let k = cell_key(r);
        match keys.iter().position(|x| *x == k) {
            Some(i) => groups[i].push(r),
            None => {
                keys.push(k);
                groups.push(vec![r]);
            }
        }
    }
    groups
        .into_iter()
        .map(|g| {
            let values: Vec<f64> = g.iter().map(|r| r.value).filter(|v| !v.is_nan()).collect();
            CellSummary {
                family: g[0].family,
                n: g[0].n,
                epsilon: g[0].epsilon,
                theta: g[0].theta,
                statistic: g[0].statistic.clone(),
                summary: stats::summarize(&values).ok(),
                missing: g.len() - values.len(),
            }
        })
        .collect()
}

/// Exact mean of the minimal assignment cost with Exp(1) costs.
pub fn parisi_sum(n: usize) -> f64 {
    (1..=n).map(|i| 1.0 / (i * i) as f64).sum()
}

fn calibrate_checks(spec: &ExperimentSpec, summaries: &[CellSummary]) -> Vec<Check> {
    let family = spec.family.expect("calibrate has a family");
    let law = spec.law_for(family);
    let mut out = Vec::new();
    for s in summaries {
        let Some(sum) = &s.summary else { continue };
        let check = match (family, s.statistic.as_str()) {
            (FamilyKind::Assignment, "optimum") if law == InputLaw::UNIT_EXPONENTIAL => {
                let target = parisi_sum(s.n);
                Check {
                    name: format!("assignment n={} mean optimum", s.n),
                    value: sum.mean,
                    target: format!("{target:.6} ± 3 SE ({:.6})", 3.0 * sum.std_err),
                    pass: Some((sum.mean - target).abs() <= 3.0 * sum.std_err),
                }
            }
            (FamilyKind::Wigner, "scaled_optimum") => {
                let sd = law_sd(law);
                Check {
                    name: format!("wigner n={} median lambda_min/sqrt(n)", s.n),
                    value: sum.q50,
                    target: format!("[{:.4}, {:.4}]", -2.24 * sd, -1.76 * sd),
                    pass: Some((-2.24 * sd..=-1.76 * sd).contains(&sum.q50)),
                }
            }
            (FamilyKind::Wishart, "scaled_optimum") => {
                let edge = law_sd(law).powi(2) * (1.0 + spec.alpha.sqrt()).powi(2);
                Check {
                    name: format!("wishart n={} median lambda_max/m", s.n),
                    value: sum.q50,
                    target: format!("[{:.4}, {:.4}]", 0.875 * edge, 1.125 * edge),
                    pass: Some((0.875 * edge..=1.125 * edge).contains(&sum.q50)),
                }
            }
            (FamilyKind::Brw, "scaled_optimum") => match brw_velocity(spec, law) {
                Some(psi) => Check {
                    name: format!("brw n={} median M_n/n", s.n),
                    value: sum.q50,
                    target: format!("(-psi* - 0.0025 psi*, -0.72 psi*) with psi* = {psi:.6}"),
                    pass: Some(sum.q50 > -1.0025 * psi && sum.q50 < -0.72 * psi),
                },
                None => continue,
            },
            _ => continue,
        };
        out.push(check);
    }
    if matches!(family, FamilyKind::Tsp | FamilyKind::Mst) {
        let means: Vec<f64> = summaries
            .iter()
            .filter(|s| s.statistic == "scaled_optimum")
            .filter_map(|s| s.summary.as_ref().map(|x| x.mean))
            .collect();
        if means.len() > 1 {
            let hi = means.iter().cloned().fold(f64::MIN, f64::max);
            let lo = means.iter().cloned().fold(f64::MAX, f64::min);
            out.push(Check {
                name: format!("{family} scaled length spread across the grid"),
                value: hi / lo,
                target: "ratio of largest to smallest mean".into(),
                pass: None,
            });
        }
    }
    out
}

fn law_sd(law: InputLaw) -> f64 {
    match law {
        InputLaw::Gaussian { sd, .. } => sd,
        InputLaw::Uniform { low, high } => (high - low) / 12f64.sqrt(),
        InputLaw::Exponential { rate } => 1.0 / rate,
        InputLaw::Gamma { shape, scale } => shape.sqrt() * scale,
    }
}

fn brw_velocity(spec: &ExperimentSpec, law: InputLaw) -> Option<f64> {
    let progeny = brw::ProgenyLaw::new(spec.progeny.clone()).ok()?;
    brw::psi_star(progeny.mean(), law).ok().map(|p| p.psi)
}

/// For every `(ε, c)` the 0.9-quantile of the packing number across the
/// size grid, and its growth relative to the smallest size.
fn tightness_checks(spec: &ExperimentSpec, summaries: &[CellSummary]) -> Vec<Check> {
    let family = spec.family.expect("tightness has a family");
    let mut out = Vec::new();
    for &eps in &spec.epsilons {
        for &c in &spec.theta_c {
            let mut q90 = Vec::new();
            for &size in &spec.sizes {
                let Ok(inst) = spec.instance(family, size, spec.seed) else { continue };
                let Ok(theta) = theta_for(spec, &inst, c) else { continue };
                let cell = summaries.iter().find(|s| {
                    s.n == size
                        && s.statistic == "packing_number"
                        && s.epsilon == Some(eps)
                        && s.theta.map(f64::to_bits) == Some(theta.to_bits())
                });
                q90.push(cell.and_then(|s| s.summary.as_ref()).map_or(f64::NAN, |s| s.q90));
            }
            let (growth, pass) = growth_factor(&q90);
            out.push(Check {
                name: format!("{family} tightness eps={eps} c={c} q90 packing {q90:?}"),
                value: growth,
                target: "max q90 / q90 at the smallest size <= 2".into(),
                pass: Some(pass),
            });
        }
    }
    out
}

/// `max_k q_k / q_0` and whether it is at most 2. Missing cells fail.
pub fn growth_factor(q90: &[f64]) -> (f64, bool) {
    if q90.is_empty() || q90.iter().any(|v| v.is_nan()) {
        return (f64::NAN, false);
    }
    let g = q90.iter().cloned().fold(f64::MIN, f64::max) / q90[0];
    (g, g <= 2.0)
}

fn oracle_check_total(rows: &[Row]) -> Check {
    let mismatches = rows.iter().filter(|r| r.statistic == "mismatch" && r.value != 0.0).count();
    let failures = rows.iter().filter(|r| r.is_failure()).count();
    Check {
        name: "oracle mismatches".into(),
        value: (mismatches + failures) as f64,
        target: "0".into(),
        pass: Some(mismatches + failures == 0),
    }
}
