//! Oracle tests for the path engines: scalar instances solved by hand, a
//! slow independent solver for the LASSO objective, and cross-checks
//! between the engines.

use nalgebra::DVector;
use posbias::{
    iss_path_exact, lasso_path, lbi_path, ComparisonDataset, ComparisonRecord, DesignOperators,
    ParamKind, PathConfig, PathDesign,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn rec(a: &str, l: &str, r: &str, y: f64) -> ComparisonRecord {
    ComparisonRecord {
        annotator: a.into(),
        left: l.into(),
        right: r.into(),
        response: y,
    }
}

/// One annotator judging the same two items with both presentation orders,
/// responses equal to a constant left offset c. The profiled problem is
/// scalar: correlation m*c, Gram m.
fn offset_instance(m_half: usize, c: f64) -> (DesignOperators, DVector<f64>) {
    let mut recs = Vec::new();
    for _ in 0..m_half {
        recs.push(rec("u", "x", "y", c));
        recs.push(rec("u", "y", "x", c));
    }
    let ds = ComparisonDataset::from_records(recs).unwrap();
    let y = ds.responses();
    (DesignOperators::from_dataset(&ds).unwrap(), y)
}

/// A planted instance with real-valued responses y = grad theta + annot gamma
/// + noise, every annotator labeling every pair once in a random
/// orientation.
fn planted_instance(
    n_items: usize,
    n_ann: usize,
    planted: &[(usize, f64)],
    noise: f64,
    seed: u64,
) -> (DesignOperators, DVector<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta: Vec<f64> = (0..n_items).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let mut gamma = vec![0.0; n_ann];
    for &(j, g) in planted {
        gamma[j] = g;
    }
    let mut recs = Vec::new();
    for a in 0..n_ann {
        for i in 0..n_items {
            for j in (i + 1)..n_items {
                let (l, r) = if rng.random_bool(0.5) { (i, j) } else { (j, i) };
                let response = theta[l] - theta[r]
                    + gamma[a]
                    + noise * rng.sample::<f64, _>(StandardNormal);
                let response = if response == 0.0 { 1e-9 } else { response };
                recs.push(rec(&format!("a{a}"), &format!("i{l}"), &format!("i{r}"), response));
            }
        }
    }
    let ds = ComparisonDataset::from_records(recs).unwrap();
    let y = ds.responses();
    (DesignOperators::from_dataset(&ds).unwrap(), y, gamma)
}

#[test]
fn iss_scalar_offset_oracle() {
    // Scalar dynamics: dp/dt = m*c until p = 1, so the entry knot sits at
    // t1 = 1/(m*c); the active solve then lands exactly on gamma = c.
    let (m_half, c) = (3, 0.5);
    let m = 2.0 * m_half as f64;
    let (ops, y) = offset_instance(m_half, c);
    let design = PathDesign::from_operators(&ops, &y).unwrap();
    let path = iss_path_exact(&design, &PathConfig::default()).unwrap();
    let t1 = 1.0 / (m * c);
    let entry = path.entering[0].expect("coordinate enters");
    assert!((entry - t1).abs() < 1e-12 * t1, "entry {entry} vs {t1}");
    let last = path.knots.last().unwrap();
    assert!((last.gamma[0] - c).abs() < 1e-10);
    // theta stays centered at zero for the balanced instance.
    assert!(last.theta.amax() < 1e-10);
}

#[test]
fn iss_null_case_single_knot() {
    // Pure gradient field: nothing to select, the path is a single knot.
    let recs = vec![
        rec("u", "x", "y", 1.0),
        rec("u", "y", "z", 1.0),
        rec("u", "x", "z", 2.0),
        rec("v", "x", "y", 1.0),
    ];
    let ds = ComparisonDataset::from_records(recs).unwrap();
    let y = ds.responses();
    let ops = DesignOperators::from_dataset(&ds).unwrap();
    let design = PathDesign::from_operators(&ops, &y).unwrap();
    let path = iss_path_exact(&design, &PathConfig::default()).unwrap();
    assert_eq!(path.knots.len(), 1);
    assert!(path.entering.iter().all(Option::is_none));
    assert!(path.knots[0].gamma.amax() == 0.0);
}

#[test]
fn lbi_null_case_keeps_initial_score() {
    let recs = vec![
        rec("u", "x", "y", 1.0),
        rec("u", "y", "z", 1.0),
        rec("u", "x", "z", 2.0),
        rec("v", "z", "x", -2.0),
    ];
    let ds = ComparisonDataset::from_records(recs).unwrap();
    let y = ds.responses();
    let ops = DesignOperators::from_dataset(&ds).unwrap();
    let design = PathDesign::from_operators(&ops, &y).unwrap();
    let theta0 = design.initial_theta();
    let path = lbi_path(&design, &PathConfig::default()).unwrap();
    assert!(path.entering.iter().all(Option::is_none));
    for knot in &path.knots {
        assert!(knot.gamma.amax() == 0.0);
        assert!((&knot.theta - &theta0).amax() < 1e-12);
    }
}

#[test]
fn lbi_scalar_offset_recursion_oracle() {
    // Independent scalar recursion of the same iteration.
    let (m_half, c) = (3, 0.5);
    let m = 2.0 * m_half as f64;
    let (ops, y) = offset_instance(m_half, c);
    let design = PathDesign::from_operators(&ops, &y).unwrap();

    let kappa = 128.0;
    let dt = 0.5 / (kappa * 2.0 * m); // well inside the stability bound
    let t_max = 1.5;
    let cfg = PathConfig {
        kappa,
        dt: Some(dt),
        t_max: Some(t_max),
        record_stride: 0,
        ..PathConfig::default()
    };
    let path = lbi_path(&design, &cfg).unwrap();

    let mut w = 0.0f64;
    let mut g = 0.0f64;
    let mut entry_oracle = None;
    let steps = (t_max / dt).ceil() as usize;
    for k in 1..=steps {
        w += dt * (m * (c - g));
        g = kappa * (w.abs() - 1.0).max(0.0) * w.signum();
        if g != 0.0 && entry_oracle.is_none() {
            entry_oracle = Some(k as f64 * dt - dt / 2.0);
        }
    }
    let entry_engine = path.entering[0].expect("enters");
    let entry_oracle = entry_oracle.expect("oracle enters");
    assert!(
        (entry_engine - entry_oracle).abs() <= dt,
        "engine {entry_engine} oracle {entry_oracle}"
    );
    // Entering happens at the first step with |w| strictly above 1:
    // analytically w_k = k*dt*m*c before entry.
    let k_star = (1.0 / (dt * m * c)).floor() as usize + 1;
    assert!((entry_oracle - (k_star as f64 * dt - dt / 2.0)).abs() < 1e-12);
    // The iterate approaches the offset.
    let last = path.knots.last().unwrap();
    assert!((last.gamma[0] - c).abs() < 1e-8, "gamma {}", last.gamma[0]);
    assert!((last.gamma[0] - g).abs() < 1e-9, "engine vs oracle tail");
}

#[test]
fn lbi_rejects_unstable_step() {
    let (ops, y) = offset_instance(3, 0.5);
    let design = PathDesign::from_operators(&ops, &y).unwrap();
    let cfg = PathConfig {
        kappa: 128.0,
        dt: Some(1.0),
        ..PathConfig::default()
    };
    let err = lbi_path(&design, &cfg).unwrap_err();
    assert!(err.to_string().contains("unstable"), "{err}");
}

#[test]
fn lasso_scalar_offset_closed_form() {
    let (m_half, c) = (3, 0.5);
    let m = 2.0 * m_half as f64;
    let (ops, y) = offset_instance(m_half, c);
    let design = PathDesign::from_operators(&ops, &y).unwrap();
    let path = lasso_path(&design, &PathConfig::default()).unwrap();
    assert_eq!(path.param_kind, ParamKind::Lambda);
    // Soft-threshold closed form at every grid point.
    for knot in &path.knots {
        let expected = (m * c - knot.param).max(0.0) / m;
        assert!(
            (knot.gamma[0] - expected).abs() < 1e-9,
            "lambda {} gamma {} expected {expected}",
            knot.param,
            knot.gamma[0]
        );
    }
    // Entry at the scalar correlation |X'y| = m*c.
    let z = path.entering_times();
    assert!((z[0] - m * c).abs() < 1e-4 * m * c, "z {}", z[0]);
    // At lambda >= lambda_max the solution is zero.
    assert_eq!(path.knots[0].param, m * c);
    assert_eq!(path.knots[0].gamma[0], 0.0);
}

#[test]
fn lasso_objective_matches_slow_proximal_oracle() {
    let (ops, y, _) = planted_instance(5, 8, &[(1, 1.5), (4, -2.0)], 0.4, 71);
    let design = PathDesign::from_operators(&ops, &y).unwrap();
    let path = lasso_path(&design, &PathConfig::default()).unwrap();
    let sigma = design.sigma();
    let b = design.profiled_cross();
    let objective = |g: &DVector<f64>, lambda: f64| {
        0.5 * (sigma * g).dot(g) - b.dot(g) + lambda * g.iter().map(|v| v.abs()).sum::<f64>()
    };
    // Slow independent solver: proximal gradient with a conservative step.
    let lip = sigma.norm(); // Frobenius bound on the spectral norm
    let step = 1.0 / lip;
    for knot in path.knots.iter().step_by(17) {
        let lambda = knot.param;
        let mut g: DVector<f64> = DVector::zeros(design.n_gamma());
        for _ in 0..20_000 {
            let grad = sigma * &g - b;
            for j in 0..g.len() {
                let v = g[j] - step * grad[j];
                let t = step * lambda;
                g[j] = if v > t {
                    v - t
                } else if v < -t {
                    v + t
                } else {
                    0.0
                };
            }
        }
        let fast = objective(&knot.gamma, lambda);
        let slow = objective(&g, lambda);
        let scale = slow.abs().max(1.0);
        assert!(
            fast <= slow + 1e-8 * scale,
            "lambda {lambda}: fast {fast} slow {slow}"
        );
    }
}

#[test]
fn lasso_entry_matches_independent_bisection() {
    // Locate each entry by bisecting cold-started solves between the
    // bracketing grid points, then compare values and order.
    let (ops, y, _) = planted_instance(5, 8, &[(0, 2.0), (3, 1.2)], 0.3, 5);
    let design = PathDesign::from_operators(&ops, &y).unwrap();
    let cfg = PathConfig::default();
    let path = lasso_path(&design, &cfg).unwrap();
    let z = path.entering_times();

    let sigma = design.sigma();
    let b = design.profiled_cross();
    let solve_cold = |lambda: f64| -> DVector<f64> {
        let mut g: DVector<f64> = DVector::zeros(design.n_gamma());
        for _ in 0..8000 {
            let mut moved = 0.0f64;
            for j in 0..g.len() {
                let rho = b[j] - (sigma.row(j) * &g)[0] + sigma[(j, j)] * g[j];
                let new = {
                    let t = lambda;
                    if rho > t {
                        (rho - t) / sigma[(j, j)]
                    } else if rho < -t {
                        (rho + t) / sigma[(j, j)]
                    } else {
                        0.0
                    }
                };
                moved = moved.max((new - g[j]).abs());
                g[j] = new;
            }
            if moved < 1e-13 {
                break;
            }
        }
        g
    };

    let grid: Vec<f64> = path.knots.iter().map(|k| k.param).collect();
    for j in 0..design.n_gamma() {
        if z[j] == 0.0 {
            continue;
        }
        // Find the bracketing grid interval from cold solves.
        let mut bracket = None;
        for w in grid.windows(2) {
            let hi_zero = solve_cold(w[0])[j] == 0.0;
            let lo_nonzero = solve_cold(w[1])[j] != 0.0;
            if hi_zero && lo_nonzero {
                bracket = Some((w[1], w[0]));
                break;
            }
        }
        let Some((mut lo, mut hi)) = bracket else { continue };
        for _ in 0..30 {
            let mid = (lo * hi).sqrt();
            if solve_cold(mid)[j] != 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = (lo * hi).sqrt();
        assert!(
            (z[j] - oracle).abs() < 1e-3 * oracle.max(1e-12),
            "coordinate {j}: z {} oracle {oracle}",
            z[j]
        );
    }
}

#[test]
fn lbi_matches_exact_iss_entering_times() {
    // Fine discretization reproduces the exact entry times within 2%.
    let planted = [(1usize, 3.0), (4usize, 2.2), (7usize, 1.6)];
    let (ops, y, _) = planted_instance(6, 10, &planted, 0.2, 23);
    let design = PathDesign::from_operators(&ops, &y).unwrap();
    let shared_t_max = 2.0;
    let iss_cfg = PathConfig {
        t_max: Some(shared_t_max),
        ..PathConfig::default()
    };
    let iss = iss_path_exact(&design, &iss_cfg).unwrap();
    let lbi_cfg = PathConfig {
        kappa: 1024.0,
        t_max: Some(shared_t_max),
        ..PathConfig::default()
    };
    let lbi = lbi_path(&design, &lbi_cfg).unwrap();
    let mut compared = 0;
    for j in 0..design.n_gamma() {
        if let (Some(a), Some(b)) = (iss.entering[j], lbi.entering[j]) {
            if a < 0.8 * shared_t_max {
                assert!(
                    (a - b).abs() <= 0.02 * a,
                    "coordinate {j}: iss {a} lbi {b}"
                );
                compared += 1;
            }
        }
    }
    assert!(compared >= 3, "only {compared} coordinates compared");
}

#[test]
fn entering_time_conventions() {
    use posbias::SolutionPath;
    let path = SolutionPath {
        param_kind: ParamKind::Time,
        knots: Vec::new(),
        entering: vec![None, Some(4.0)],
    };
    let z = path.entering_times();
    assert_eq!(z[0], 0.0);
    assert_eq!(z[1], 0.25);
    let path = SolutionPath {
        param_kind: ParamKind::Lambda,
        knots: Vec::new(),
        entering: vec![Some(2.5), None],
    };
    let z = path.entering_times();
    assert_eq!(z[0], 2.5);
    assert_eq!(z[1], 0.0);
}

#[test]
fn scaling_equivariance_power_of_two() {
    // Scaling Y by 4 scales the gamma path and the entry parameters by 4
    // (exactly representable scale) and leaves the entering order alone.
    let (ops, y, _) = planted_instance(5, 6, &[(0, 1.8), (2, 1.1)], 0.3, 9);
    let design = PathDesign::from_operators(&ops, &y).unwrap();
    let scaled = PathDesign::from_operators(&ops, &(&y * 4.0)).unwrap();

    let z1 = lasso_path(&design, &PathConfig::default()).unwrap().entering_times();
    let z4 = lasso_path(&scaled, &PathConfig::default()).unwrap().entering_times();
    for j in 0..z1.len() {
        assert!(
            (z4[j] - 4.0 * z1[j]).abs() <= 1e-9 * (1.0 + z4[j].abs()),
            "lasso coordinate {j}: {} vs {}",
            z4[j],
            z1[j]
        );
    }

    let cfg = PathConfig::default();
    let t1 = iss_path_exact(&design, &cfg).unwrap().entering_times();
    let t4 = iss_path_exact(&scaled, &cfg).unwrap().entering_times();
    let mut order1: Vec<usize> = (0..t1.len()).collect();
    let mut order4 = order1.clone();
    order1.sort_by(|&a, &b| t1[b].partial_cmp(&t1[a]).unwrap().then(a.cmp(&b)));
    order4.sort_by(|&a, &b| t4[b].partial_cmp(&t4[a]).unwrap().then(a.cmp(&b)));
    assert_eq!(order1, order4);
    for j in 0..t1.len() {
        assert!((t4[j] - 4.0 * t1[j]).abs() <= 1e-9 * (1.0 + t4[j].abs()));
    }
}

#[test]
fn path_depends_only_on_gram_and_cross() {
    // Permuting the records permutes design rows, leaving the Gram and
    // cross products unchanged: the paths must agree exactly.
    let (_, _, _) = planted_instance(4, 5, &[], 0.0, 0); // keep the helper used uniformly
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut recs = Vec::new();
    for a in 0..6 {
        for i in 0..5 {
            for j in (i + 1)..5 {
                let (l, r) = if rng.random_bool(0.5) { (i, j) } else { (j, i) };
                let y: f64 = rng.sample::<f64, _>(StandardNormal);
                let y = if y == 0.0 { 0.1 } else { y } + if a == 2 { 1.5 } else { 0.0 };
                recs.push(rec(&format!("a{a}"), &format!("i{l}"), &format!("i{r}"), y));
            }
        }
    }
    let ds1 = ComparisonDataset::from_records(recs.clone()).unwrap();
    // Rotate the record order; registries are rebuilt in first-appearance
    // order, so rotate within one annotator block to keep indices aligned.
    let mut shuffled = recs.clone();
    shuffled[0..10].rotate_left(3);
    shuffled[10..20].rotate_left(7);
    let ds2 = ComparisonDataset::from_records(shuffled).unwrap();

    let ops1 = DesignOperators::from_dataset(&ds1).unwrap();
    let ops2 = DesignOperators::from_dataset(&ds2).unwrap();
    let d1 = PathDesign::from_operators(&ops1, &ds1.responses()).unwrap();
    let d2 = PathDesign::from_operators(&ops2, &ds2.responses()).unwrap();

    for engine in [posbias::Engine::IssExact, posbias::Engine::Lasso] {
        let p1 = posbias::run_path(&d1, engine, &PathConfig::default()).unwrap();
        let p2 = posbias::run_path(&d2, engine, &PathConfig::default()).unwrap();
        let (z1, z2) = (p1.entering_times(), p2.entering_times());
        assert!((z1 - z2).amax() < 1e-10);
    }
}

#[test]
fn lbi_theta_stays_component_centered() {
    // Two disconnected comparison subgraphs; theta keeps zero mean on each.
    let mut recs = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for a in 0..4 {
        for (base, items) in [(0usize, 3usize), (3, 3)] {
            for i in 0..items {
                for j in (i + 1)..items {
                    let (l, r) = if rng.random_bool(0.5) {
                        (base + i, base + j)
                    } else {
                        (base + j, base + i)
                    };
                    let bias = if a == 3 { 2.0 } else { 0.0 };
                    let y = rng.sample::<f64, _>(StandardNormal) + bias;
                    let y = if y == 0.0 { 0.3 } else { y };
                    recs.push(rec(&format!("a{a}"), &format!("i{l}"), &format!("i{r}"), y));
                }
            }
        }
    }
    let ds = ComparisonDataset::from_records(recs).unwrap();
    let ops = DesignOperators::from_dataset(&ds).unwrap();
    assert_eq!(ops.n_components(), 2);
    let design = PathDesign::from_operators(&ops, &ds.responses()).unwrap();
    let cfg = PathConfig {
        record_stride: 50,
        ..PathConfig::default()
    };
    let path = lbi_path(&design, &cfg).unwrap();
    let labels = ops.component_labels();
    for knot in &path.knots {
        for comp in 0..ops.n_components() {
            let sum: f64 = (0..ops.n_items())
                .filter(|&i| labels[i] == comp)
                .map(|i| knot.theta[i])
                .sum();
            assert!(sum.abs() < 1e-9, "component {comp} mean {sum}");
        }
    }
}
