//! Acceptance suite. Every criterion prints one `PASS`/`FAIL` line and then
//! asserts, so `cargo test --test acceptance -- --nocapture` gives a report.

use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use stabilitylab_core::euclidean::{self, PointConfiguration, PointLaw};
use stabilitylab_core::experiment::{parse_config, run_experiment, ExperimentKind, ExperimentRecord};
use stabilitylab_core::graph::{self, GraphKind, GraphSolution, WeightTable};
use stabilitylab_core::markov::{self, DensityModel};
use stabilitylab_core::matrix::{self, GAP_EPSILONS};
use stabilitylab_core::metric::{self, SolutionCloud};
use stabilitylab_core::problem;
use stabilitylab_core::seed::{rng_from, substream};
use stabilitylab_core::spin::{self, CouplingGraph, LatticeBox};
use stabilitylab_core::stats::{self, ks_one_sample};
use stabilitylab_core::weighted::{self, CostMatrix};
use stabilitylab_core::InputLaw;

fn report(id: u32, title: &str, pass: bool, detail: String) {
    println!("criterion {id:>2} {} {title}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} ({title}) failed: {detail}");
}

fn experiment(kind: ExperimentKind, body: &str) -> ExperimentRecord {
    let spec = parse_config(&format!("[{kind}]\n{body}\n"), kind).unwrap();
    run_experiment(&spec).unwrap()
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

#[test]
fn c01_assignment_mean_cost_matches_exact_sum() {
    let (rec, dt) = timed(|| {
        experiment(ExperimentKind::Calibrate, "family = assignment\nn = 10\nlaw = exp(1)\nreplications = 5000\nseed = 1")
    });
    let s = stats::summarize(&rec.values("optimum")).unwrap();
    let target: f64 = (1..=10).map(|i| 1.0 / (i * i) as f64).sum();
    let pass = rec.failures() == 0 && (s.mean - target).abs() <= 3.0 * s.std_err && dt < Duration::from_secs(30);
    report(
        1,
        "assignment mean optimum",
        pass,
        format!("mean {:.6} vs {target:.6} (3 SE = {:.6}), {:.2?}", s.mean, 3.0 * s.std_err, dt),
    );
}

#[test]
fn c02_wigner_smallest_eigenvalue_edge() {
    let (rec, dt) =
        timed(|| experiment(ExperimentKind::Calibrate, "family = wigner\nn = 300\nlaw = gaussian(0,1)\nreplications = 20\nseed = 2"));
    let med = stats::median(&rec.values("scaled_optimum")).unwrap();
    let pass = rec.failures() == 0 && (-2.24..=-1.76).contains(&med) && dt < Duration::from_secs(120);
    report(2, "wigner lambda_min / sqrt(n)", pass, format!("median {med:.4} in [-2.24, -1.76], {dt:.2?}"));
}

#[test]
fn c03_wishart_largest_eigenvalue_edge() {
    let (rec, dt) = timed(|| {
        experiment(ExperimentKind::Calibrate, "family = wishart\nn = 200\nalpha = 1\nlaw = gaussian(0,1)\nreplications = 20\nseed = 3")
    });
    // With alpha = 1 the matrix is square, so lambda_max / m = lambda_max / n.
    let med = stats::median(&rec.values("scaled_optimum")).unwrap();
    let pass = rec.failures() == 0 && (3.5..=4.5).contains(&med) && dt < Duration::from_secs(120);
    report(3, "wishart lambda_max / n", pass, format!("median {med:.4} in [3.5, 4.5], {dt:.2?}"));
}

#[test]
fn c04_brw_minimum_velocity() {
    let (rec, dt) = timed(|| {
        experiment(
            ExperimentKind::Calibrate,
            "family = brw\nn = 18\nprogeny = binary\ncondition = true\nlaw = gaussian(0,1)\nreplications = 30\nseed = 4",
        )
    });
    let psi = stabilitylab_core::brw::psi_star(2.0, InputLaw::STANDARD_GAUSSIAN).unwrap().psi;
    let med = stats::median(&rec.values("scaled_optimum")).unwrap();
    let pass = rec.failures() == 0
        && (psi - (2.0 * 2f64.ln()).sqrt()).abs() < 1e-9
        && med > -1.18
        && med < -0.85
        && dt < Duration::from_secs(120);
    report(4, "brw M_n / n", pass, format!("median {med:.4} in (-1.18, -0.85), psi* = {psi:.6}, {dt:.2?}"));
}

#[test]
fn c05_packing_covering_sandwich() {
    let mut rng = rng_from(5);
    let deltas = [0.05, 0.1, 0.2, 0.35, 0.5];
    let mut violations = 0;
    let mut inexact = 0;
    for _ in 0..1000 {
        let k = rng.random_range(1..=20);
        let d = rng.random_range(1..=3);
        let pts: Vec<Vec<f64>> = (0..k).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
        let cloud = SolutionCloud::euclidean(&pts);
        for &delta in &deltas {
            let p1 = metric::packing_number_exact(&cloud, delta).unwrap();
            let p2 = metric::packing_number_exact(&cloud, 2.0 * delta).unwrap();
            let n = metric::covering_number_internal(&cloud, delta);
            inexact += usize::from(!n.exact);
            if !(p2 <= n.count && n.count <= p1) {
                violations += 1;
            }
        }
    }
    report(
        5,
        "P(2d) <= N_int(d) <= P(d)",
        violations == 0 && inexact == 0,
        format!("{violations} violations, {inexact} inexact covers over 1000 clouds x 5 radii"),
    );
}

fn uniform_table(n: usize, rng: &mut impl Rng) -> WeightTable {
    let w: Vec<f64> = (0..n * (n - 1) / 2).map(|_| rng.random::<f64>()).collect();
    WeightTable::from_edge_list(n, &w)
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs())
}

#[test]
fn c06_solvers_match_brute_force() {
    let mut rng = rng_from(6);
    let mut mismatches = Vec::new();

    for i in 0..200 {
        let n = 3 + i % 7;
        let w = uniform_table(n, &mut rng);
        let (g, c) = graph::held_karp(&w).unwrap();
        let mut best = (f64::INFINITY, None);
        graph::for_each_tour(&w, |o, c| {
            if c < best.0 {
                best = (c, Some(GraphSolution::from_cycle(o)));
            }
        })
        .unwrap();
        if !same(c, best.0) || Some(g) != best.1 {
            mismatches.push(format!("held-karp n={n}"));
        }
    }
    for i in 0..500 {
        let n = 1 + i % 7;
        let c = CostMatrix::sample(n, InputLaw::UNIT_EXPONENTIAL, &mut rng).unwrap();
        let fast = weighted::assignment_solve(&c);
        let slow = weighted::assignment_brute_force(&c).unwrap();
        if fast != slow || !same(c.cost(&fast), c.cost(&slow)) {
            mismatches.push(format!("hungarian n={n}"));
        }
    }
    for i in 0..200 {
        let n = 2 + i % 6;
        let w = uniform_table(n, &mut rng);
        let (g, c) = graph::kruskal(&w);
        let mut best = (f64::INFINITY, None);
        graph::for_each_tree(&w, |e, c| {
            if c < best.0 {
                best = (c, Some(GraphSolution::from_edges(e.iter().copied(), GraphKind::Tree)));
            }
        })
        .unwrap();
        if !same(c, best.0) || Some(g) != best.1 {
            mismatches.push(format!("kruskal n={n}"));
        }
    }
    for i in 0..200 {
        let n = 2 + i % 9;
        let bonds = InputLaw::STANDARD_GAUSSIAN.sample_n(spin::sk_bond_count(n), &mut rng);
        let g = CouplingGraph::complete(n);
        let (a, ea) = g.ground_state(&bonds).unwrap();
        let (b, eb) = g.ground_state_naive(&bonds).unwrap();
        if a != b || !same(ea, eb) {
            mismatches.push(format!("sk gray code n={n}"));
        }
    }
    let shapes: [&[usize]; 6] = [&[2, 2], &[2, 3], &[2, 4], &[2, 5], &[3, 3], &[10]];
    for i in 0..200 {
        let lat = LatticeBox::new(shapes[i % shapes.len()]).unwrap();
        let bonds = InputLaw::STANDARD_GAUSSIAN.sample_n(lat.bonds().len(), &mut rng);
        let (a, ea) = spin::ea_ground_state(&lat, &bonds).unwrap();
        let (b, eb) = CouplingGraph::new(lat.len(), lat.bonds().to_vec()).ground_state_naive(&bonds).unwrap();
        if a != b || !same(ea, eb) {
            mismatches.push(format!("ea gray code |L|={}", lat.len()));
        }
    }
    for i in 0..200 {
        let p = 2 * (1 + i % 5);
        let w = uniform_table(p, &mut rng);
        let (g, c) = graph::matching_dp(&w).unwrap();
        let mut best = (f64::INFINITY, None);
        graph::for_each_matching(&w, |e, c| {
            if c < best.0 {
                best = (c, Some(GraphSolution::from_edges(e.iter().copied(), GraphKind::Matching)));
            }
        })
        .unwrap();
        if !same(c, best.0) || Some(g) != best.1 {
            mismatches.push(format!("matching p={p}"));
        }
    }
    report(6, "exact solvers equal brute force", mismatches.is_empty(), format!("{} mismatches {:?}", mismatches.len(), mismatches));
}

#[test]
fn c07_sister_constructions() {
    let mut rng = rng_from(7);
    let mut bad = Vec::new();
    let kappa = euclidean::kissing_number(2).unwrap() as f64;

    for inst in 0..500 {
        let n = 10;
        let cfg = euclidean::sample_points(n, 2, 1.0, PointLaw::UniformBox, &mut rng).unwrap();
        let l = rng.random_range(0..n);
        let perturbed = cfg.with_point(l, euclidean::sample_point(2, PointLaw::UniformBox, &mut rng));
        let opt = euclidean::tsp_solve(&perturbed).unwrap();
        let sister = euclidean::tsp_sister_tour(&cfg, &perturbed, l, &opt).unwrap();
        let dist = graph::graph_metric(&sister, &opt, n);
        let lhs = cfg.length(&sister);
        let rhs = perturbed.length(&opt) + euclidean::tsp_sister_excess_bound(&cfg, l);
        if !sister.is_valid(n) || dist > 6.0 / n as f64 + 1e-12 || lhs > rhs + 1e-9 {
            bad.push(format!("tsp #{inst}: d = {dist}, excess {lhs} vs {rhs}"));
        }
    }
    for inst in 0..500 {
        let n = 12;
        let cfg = euclidean::sample_points(n, 2, 1.0, PointLaw::UniformBox, &mut rng).unwrap();
        let l = rng.random_range(0..n);
        let perturbed = cfg.with_point(l, euclidean::sample_point(2, PointLaw::UniformBox, &mut rng));
        let opt = euclidean::mst_solve(&perturbed).unwrap();
        let sister = euclidean::mst_sister_tree(&cfg, &perturbed, l, &opt).unwrap();
        let dist = graph::graph_metric(&sister, &opt, n);
        let lhs = cfg.length(&sister);
        let rhs = perturbed.length(&opt) + euclidean::mst_sister_excess_bound(&cfg, &perturbed, l, &opt);
        if !sister.is_valid(n) || dist > 2.0 * kappa / n as f64 + 1e-12 || lhs > rhs + 1e-9 {
            bad.push(format!("mst #{inst}: d = {dist}, excess {lhs} vs {rhs}"));
        }
    }
    report(7, "sister tours and trees", bad.is_empty(), format!("{} violations over 1000 instances {:?}", bad.len(), bad));
}

#[test]
fn c08_tsp_stability_statistic_desk_scale() {
    let rec = experiment(
        ExperimentKind::Stability,
        "family = tsp\nn = 8, 10, 12\nd = 2\nq = 1\nepsilon = 0.5\nreplications = 30\nblock_subsample = all\nseed = 8",
    );
    let q90: Vec<f64> = [8, 10, 12]
        .iter()
        .map(|&n| {
            let v: Vec<f64> = rec.rows.iter().filter(|r| r.n == n && r.statistic == "ball_count").map(|r| r.value).collect();
            assert_eq!(v.len(), 30);
            stats::quantile(&v, 0.9).unwrap()
        })
        .collect();
    let bounded = q90.iter().all(|&q| q <= 4.0);
    let monotone = q90.windows(2).all(|w| w[1] <= w[0] + 1.0);
    report(
        8,
        "tsp ball_count q90 bounded and non-increasing",
        rec.failures() == 0 && bounded && monotone,
        format!("q90 by n = 8, 10, 12: {q90:?}"),
    );
}

/// q90 of the exact packing number of the near-optimal set over the grid.
fn tightness_q90(family: &str, grid: &str) -> Vec<f64> {
    let rec = experiment(
        ExperimentKind::Tightness,
        &format!("family = {family}\n{grid}\nepsilon = 0.25\ntheta_c = 1\nreplications = 30\nseed = 9"),
    );
    assert_eq!(rec.failures(), 0, "{family}: failed replications");
    let mut sizes: Vec<usize> = rec.rows.iter().map(|r| r.n).collect();
    sizes.dedup();
    sizes
        .iter()
        .map(|&n| {
            let v: Vec<f64> = rec.rows.iter().filter(|r| r.n == n && r.statistic == "packing_number").map(|r| r.value).collect();
            stats::quantile(&v, 0.9).unwrap()
        })
        .collect()
}

#[test]
fn c09_near_optimal_packing_growth() {
    let grids = [
        ("sk", "n = 12, 16, 20"),
        ("assignment", "n = 5, 6, 7, 8"),
        ("tsp", "n = 7, 8, 9, 10"),
        ("ea", "shape = 2x4, 3x4, 4x4, 4x5"),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (family, grid) in grids {
        let q90 = tightness_q90(family, grid);
        let max = q90.iter().cloned().fold(f64::MIN, f64::max);
        let growth = max / q90[0];
        pass &= growth <= 2.0;
        parts.push(format!("{family} q90 {q90:?} growth {growth:.3}"));
    }
    report(9, "near-optimal packing grows by at most 2x", pass, parts.join("; "));
}

#[test]
fn c10_assignment_first_row_uniform() {
    let n = 6;
    let inst = problem::ProblemInstance::new(
        problem::Family::Assignment { n },
        InputLaw::UNIT_EXPONENTIAL,
        0,
    )
    .unwrap();
    let mut counts = vec![0u64; n];
    for r in 0..10_000u64 {
        let x = problem::sample_inputs(&inst.reseeded(stabilitylab_core::seed::replication_seed(10, r))).unwrap();
        match problem::solve(&inst, &x).unwrap().encoding {
            stabilitylab_core::Encoding::Permutation(pi) => counts[pi[0] as usize] += 1,
            other => panic!("{other:?}"),
        }
    }
    let t = stats::chi_square_uniform(&counts).unwrap();
    report(10, "optimal column of row 1 is uniform", t.p_value > 0.01, format!("counts {counts:?}, p = {:.4}", t.p_value));
}

#[test]
fn c11_tour_edge_membership() {
    let m = weighted::edge_membership_rate(8, GraphKind::Tour, InputLaw::UNIT_UNIFORM, 10_000, 11).unwrap();
    let target = 2.0 / 7.0;
    let off: Vec<usize> = (0..m.frequency.len())
        .filter(|&e| (m.frequency[e] - target).abs() > 4.0 * m.std_err[e])
        .collect();
    let over = m.violations(4.0);
    let (lo, hi) = m.frequency.iter().fold((1.0f64, 0.0f64), |(a, b), &f| (a.min(f), b.max(f)));
    report(
        11,
        "tour edge frequency 2/7",
        off.is_empty() && over.is_empty(),
        format!("frequencies in [{lo:.4}, {hi:.4}], bound {:.4}, {} off target, {} over bound", m.bound, off.len(), over.len()),
    );
}

#[test]
fn c12_nearest_neighbor_scaling() {
    let mut rng = rng_from(12);
    let scaled: Vec<f64> = [100usize, 400, 1600]
        .iter()
        .map(|&n| {
            let reps = 20;
            let mut total = 0.0;
            for _ in 0..reps {
                let cfg: PointConfiguration = euclidean::sample_points(n, 2, 1.0, PointLaw::UniformBox, &mut rng).unwrap();
                total += (0..n).map(|i| euclidean::nn_min_distance(&cfg, i)).sum::<f64>() / n as f64;
            }
            (n as f64).sqrt() * total / reps as f64
        })
        .collect();
    let ratio = scaled.iter().cloned().fold(f64::MIN, f64::max) / scaled.iter().cloned().fold(f64::MAX, f64::min);
    report(12, "sqrt(n) * mean nn distance", ratio < 1.5, format!("{scaled:?}, spread {ratio:.4}"));
}

#[test]
fn c13_metropolis_stationarity_and_defect() {
    let mut rng = rng_from(13);
    let mut parts = Vec::new();
    let mut pass = true;
    for name in ["gaussian", "uniform"] {
        let f = DensityModel::by_name(name, 1).unwrap();
        let out: Vec<f64> = (0..10_000)
            .map(|_| {
                let x = f.sample(&mut rng);
                markov::mh_step(&x, 0.5, &f, &mut rng).unwrap()[0]
            })
            .collect();
        let ks = ks_one_sample(&out, |x| f.marginal_cdf(x)).unwrap();
        pass &= ks.p_value > 0.001;
        parts.push(format!("{name} KS p = {:.4}", ks.p_value));

        let ratios: Vec<f64> = [0.01, 0.02, 0.04]
            .iter()
            .map(|&s| markov::acceptance_defect(&f, s, 0.0, 200_000, &mut rng).unwrap() / s)
            .collect();
        let spread = ratios.iter().cloned().fold(f64::MIN, f64::max) / ratios.iter().cloned().fold(f64::MAX, f64::min);
        pass &= spread < 2.0;
        parts.push(format!("{name} defect/s {ratios:.4?} spread {spread:.3}"));
    }
    report(13, "MH stationarity and defect slope", pass, parts.join("; "));
}

#[test]
fn c14_exact_inequalities() {
    let mut rng = rng_from(14);
    // The bound is on the expected ground energy, so it is checked against
    // the mean over the instances of each size.
    let mut sk_bad = Vec::new();
    for n in 2..=16usize {
        let per_size = if n <= 6 { 14 } else { 13 };
        let mean = (0..per_size)
            .map(|_| {
                let bonds = InputLaw::STANDARD_GAUSSIAN.sample_n(spin::sk_bond_count(n), &mut rng);
                spin::sk_ground_state(&bonds).unwrap().1
            })
            .sum::<f64>()
            / per_size as f64;
        if mean < spin::sk_energy_lower_bound(n) {
            sk_bad.push(n);
        }
    }
    let mut eig_bad = 0;
    for i in 0..200 {
        let n = 1 + i % 32;
        let law = if i % 2 == 0 { InputLaw::STANDARD_GAUSSIAN } else { InputLaw::Uniform { low: -1.0, high: 1.0 } };
        let a = matrix::sample_wigner(n, law, &mut rng);
        if !matrix::interlacing_check(&a, &GAP_EPSILONS).unwrap().passed() {
            eig_bad += 1;
        }
    }
    let normal = |r: &mut stabilitylab_core::seed::Rng| -> f64 { StandardNormal.sample(r) };
    let exp = Exp::new(1.0).unwrap();
    let centered_exp = |r: &mut stabilitylab_core::seed::Rng| exp.sample(r) - 1.0;
    let uniform = |r: &mut stabilitylab_core::seed::Rng| r.random::<f64>() * 2.0 - 1.0;
    let mut sub_bad = Vec::new();
    let mut s = substream(14, &[1]);
    for (name, m) in [("gaussian", 1), ("gaussian", 100), ("gaussian", 1000)] {
        let r = stats::subgamma_max_check(normal, 1.0, 0.0, m, 2000, &mut s).unwrap();
        if !r.pass {
            sub_bad.push(format!("{name} m={m}"));
        }
    }
    for m in [10, 50, 500] {
        let r = stats::subgamma_max_check(centered_exp, 1.0, 1.0, m, 2000, &mut s).unwrap();
        if !r.pass {
            sub_bad.push(format!("exp m={m}"));
        }
    }
    // U(−1, 1) is sub-Gaussian with variance proxy 1.
    let r = stats::subgamma_max_check(uniform, 1.0, 0.0, 100, 2000, &mut s).unwrap();
    if !r.pass {
        sub_bad.push("uniform m=100".into());
    }
    report(
        14,
        "SK energy bound, interlacing, sub-Gamma max",
        sk_bad.is_empty() && eig_bad == 0 && sub_bad.is_empty(),
        format!("sk sizes below bound {sk_bad:?} (200 instances), eigen {eig_bad}/200, sub-Gamma {sub_bad:?}"),
    );
}
