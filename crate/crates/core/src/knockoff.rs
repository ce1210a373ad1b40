//! Knockoff construction and filtering for the position-bias design.
//!
//! Knockoff copies of the annotator columns satisfy three Gram conditions:
//! same Gram matrix as the originals, cross-Gram reduced by diag(s), and the
//! same correlation with the gradient operator. Entering times of originals
//! and knockoffs along a solution path race each other; the signed-maximum
//! statistics with a data-dependent cut select annotators at a target FDR.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use crate::data::DesignOperators;
use crate::error::{Error, Result};
use crate::path::{run_path, Engine, PathConfig, PathDesign};
use crate::solvers::{complement_basis, psd_square_root, symmetric_eigen, LaplacianSystem};

/// How the decorrelation vector s is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SMode {
    /// s_j = min(1, 2 lambda_min(sigma)) for every coordinate.
    Equicorrelated,
    /// Coordinatewise ascent on sum(s) under the box and eigenvalue
    /// feasibility constraints; never worse than equicorrelated.
    Sdp,
}

impl std::str::FromStr for SMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equi" | "equicorrelated" => Ok(SMode::Equicorrelated),
            "sdp" => Ok(SMode::Sdp),
            other => Err(Error::InvalidConfig(format!(
                "unknown s mode {other:?} (expected equi or sdp)"
            ))),
        }
    }
}

impl std::fmt::Display for SMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SMode::Equicorrelated => "equi",
            SMode::Sdp => "sdp",
        })
    }
}

const LAMBDA_MIN_FLOOR: f64 = 1e-12;
const GRAM_CONDITION_TOL: f64 = 1e-6;

/// Solves for the decorrelation vector on a given projected Gram matrix,
/// subject to 0 <= s_j <= 1 and diag(s) <= 2 sigma in the semidefinite
/// order.
pub fn compute_s(sigma: &DMatrix<f64>, mode: SMode) -> Result<DVector<f64>> {
    let p = sigma.nrows();
    let sym = (sigma + sigma.transpose()) * 0.5;
    let (eigenvalues, _) = symmetric_eigen(&sym);
    let lambda_min = eigenvalues.min();
    if lambda_min <= LAMBDA_MIN_FLOOR {
        return Err(Error::DegenerateKnockoffs { lambda_min });
    }
    let base = (2.0 * lambda_min).min(1.0);
    let mut s = DVector::from_element(p, base);
    if mode == SMode::Equicorrelated {
        return Ok(s);
    }

    // Best-effort ascent: per sweep, raise each coordinate by a damped
    // fraction of its rank-one headroom 1/(M^-1)_jj in M = 2 sigma - diag(s),
    // then backtrack the whole sweep if feasibility is lost.
    let feasible = |s: &DVector<f64>| -> bool {
        let mut m = &sym * 2.0;
        for j in 0..p {
            m[(j, j)] -= s[j];
        }
        for j in 0..p {
            m[(j, j)] += 1e-12 * lambda_min;
        }
        m.cholesky().is_some()
    };
    for _ in 0..200 {
        let mut m = &sym * 2.0;
        for j in 0..p {
            m[(j, j)] -= s[j];
        }
        let Some(chol) = m.cholesky() else { break };
        let mut delta = DVector::zeros(p);
        for j in 0..p {
            let mut e = DVector::zeros(p);
            e[j] = 1.0;
            let col = chol.solve(&e);
            let headroom = if col[j] > 0.0 { 1.0 / col[j] } else { 0.0 };
            delta[j] = (0.5 * headroom).min(1.0 - s[j]).max(0.0);
        }
        let mut gain = delta.sum();
        if gain <= 1e-10 * p as f64 {
            break;
        }
        let mut trial = &s + &delta;
        let mut halvings = 0;
        while !feasible(&trial) {
            delta *= 0.5;
            trial = &s + &delta;
            gain *= 0.5;
            halvings += 1;
            if halvings > 40 {
                gain = 0.0;
                break;
            }
        }
        if gain <= 1e-10 * p as f64 {
            break;
        }
        s = trial;
    }
    for j in 0..p {
        s[j] = s[j].clamp(0.0, 1.0);
    }
    Ok(s)
}

/// Knockoff copies of the annotator columns together with the pieces that
/// built them.
#[derive(Debug, Clone)]
pub struct KnockoffFeatures {
    pub a_tilde: DMatrix<f64>,
    pub s: DVector<f64>,
    pub q_basis: DMatrix<f64>,
    pub c_factor: DMatrix<f64>,
    pub mode: SMode,
}

/// Builds knockoff features for the annotator block. The gradient-operator
/// projection is applied through the Laplacian solver; the projection matrix
/// is never materialized. With `normalize` set, the decorrelation vector is
/// computed on the correlation-scaled Gram (unit-norm projected columns) and
/// mapped back, which is the scale-free construction.
pub fn construct_knockoffs(
    ops: &DesignOperators,
    mode: SMode,
    normalize: bool,
) -> Result<KnockoffFeatures> {
    let (m, nu, nv) = (ops.n_edges(), ops.n_annotators(), ops.n_items());
    if m < 2 * nu + nv {
        return Err(Error::DimensionRequirement {
            edges: m,
            annotators: nu,
            items: nv,
        });
    }

    let sys = LaplacianSystem::with_tol(ops, 1e-13);

    // Projected annotator columns (I - H) A, one column per annotator.
    let mut projected = DMatrix::zeros(m, nu);
    for a in 0..nu {
        let mut col = DVector::zeros(m);
        for e in 0..m {
            if ops.annotator()[e] == a {
                col[e] = 1.0;
            }
        }
        projected.set_column(a, &sys.project_out_gradient(&col)?);
    }

    // sigma = A'(I-H)A via the annotator scatter.
    let mut sigma = DMatrix::zeros(nu, nu);
    for a in 0..nu {
        let col = projected.column(a).clone_owned();
        sigma.set_column(a, &ops.apply_annot_transpose(&col));
    }
    sigma = (&sigma + sigma.transpose()) * 0.5;

    let s = if normalize {
        let norms = DVector::from_fn(nu, |j, _| sigma[(j, j)].max(0.0).sqrt());
        if norms.min() <= LAMBDA_MIN_FLOOR {
            return Err(Error::DegenerateKnockoffs {
                lambda_min: norms.min() * norms.min(),
            });
        }
        let scaled = DMatrix::from_fn(nu, nu, |i, j| sigma[(i, j)] / (norms[i] * norms[j]));
        let s_unit = compute_s(&scaled, mode)?;
        DVector::from_fn(nu, |j, _| s_unit[j] * norms[j] * norms[j])
    } else {
        compute_s(&sigma, mode)?
    };

    let chol = sigma
        .clone()
        .cholesky()
        .ok_or(Error::DegenerateKnockoffs { lambda_min: 0.0 })?;

    // sigma^-1 diag(s) and the square-root factor of
    // 2 diag(s) - diag(s) sigma^-1 diag(s).
    let mut sigma_inv_s = DMatrix::zeros(nu, nu);
    for j in 0..nu {
        let mut e = DVector::zeros(nu);
        e[j] = s[j];
        sigma_inv_s.set_column(j, &chol.solve(&e));
    }
    let mut cc = -DMatrix::from_fn(nu, nu, |i, j| s[i] * sigma_inv_s[(i, j)]);
    for j in 0..nu {
        cc[(j, j)] += 2.0 * s[j];
    }
    let c_factor = psd_square_root(&cc, None)?;

    let q_basis = complement_basis(ops, nu)?;

    // a_tilde = A - (I-H) A sigma^-1 diag(s) + Q C
    let mut a_tilde = &q_basis * &c_factor - &projected * &sigma_inv_s;
    for e in 0..m {
        a_tilde[(e, ops.annotator()[e])] += 1.0;
    }

    verify_gram_conditions(ops, &a_tilde, &s)?;

    Ok(KnockoffFeatures {
        a_tilde,
        s,
        q_basis,
        c_factor,
        mode,
    })
}

/// Numerically verifies the three Gram conditions before the features are
/// released.
fn verify_gram_conditions(
    ops: &DesignOperators,
    a_tilde: &DMatrix<f64>,
    s: &DVector<f64>,
) -> Result<()> {
    let nu = ops.n_annotators();
    let counts = ops.annotator_edge_counts();

    // A'A is diagonal (annotator columns are disjoint).
    let att = a_tilde.tr_mul(a_tilde);
    let mut worst = 0.0f64;
    for i in 0..nu {
        for j in 0..nu {
            let target = if i == j { counts[i] as f64 } else { 0.0 };
            worst = worst.max((att[(i, j)] - target).abs());
        }
    }
    if worst > GRAM_CONDITION_TOL {
        return Err(Error::KnockoffConditions {
            condition: "A~'A~ = A'A",
            max_err: worst,
            tol: GRAM_CONDITION_TOL,
        });
    }

    let mut worst = 0.0f64;
    for j in 0..nu {
        let col = a_tilde.column(j).clone_owned();
        let a_t_col = ops.apply_annot_transpose(&col);
        for i in 0..nu {
            let target = if i == j {
                counts[i] as f64 - s[i]
            } else {
                0.0
            };
            worst = worst.max((a_t_col[i] - target).abs());
        }
    }
    if worst > GRAM_CONDITION_TOL {
        return Err(Error::KnockoffConditions {
            condition: "A'A~ = A'A - diag(s)",
            max_err: worst,
            tol: GRAM_CONDITION_TOL,
        });
    }

    let mut worst = 0.0f64;
    for j in 0..nu {
        let col = a_tilde.column(j).clone_owned();
        let g_tilde = ops.apply_grad_transpose(&col);
        let mut g_orig = DVector::zeros(ops.n_items());
        for e in 0..ops.n_edges() {
            if ops.annotator()[e] == j {
                g_orig[ops.left()[e]] += 1.0;
                g_orig[ops.right()[e]] -= 1.0;
            }
        }
        worst = worst.max((g_tilde - g_orig).amax());
    }
    if worst > GRAM_CONDITION_TOL {
        return Err(Error::KnockoffConditions {
            condition: "grad'A~ = grad'A",
            max_err: worst,
            tol: GRAM_CONDITION_TOL,
        });
    }
    Ok(())
}

/// Entering statistics for originals and knockoffs, and the signed-maximum
/// combination w_j = max(z_j, z~_j) * sign(z_j - z~_j).
#[derive(Debug, Clone)]
pub struct KnockoffStats {
    pub z: DVector<f64>,
    pub z_tilde: DVector<f64>,
    pub w: DVector<f64>,
}

pub fn knockoff_statistics(z: &DVector<f64>, z_tilde: &DVector<f64>) -> KnockoffStats {
    assert_eq!(z.len(), z_tilde.len());
    let w = DVector::from_fn(z.len(), |j, _| {
        let (a, b) = (z[j], z_tilde[j]);
        let sign = if a > b {
            1.0
        } else if a < b {
            -1.0
        } else {
            0.0
        };
        a.max(b) * sign
    });
    KnockoffStats {
        z: z.clone(),
        z_tilde: z_tilde.clone(),
        w,
    }
}

/// Data-dependent selection at a target FDR level.
#[derive(Debug, Clone)]
pub struct SelectionResult {
    /// The cut T, or +infinity when no cut qualifies.
    pub threshold: f64,
    pub selected: BTreeSet<usize>,
    pub q: f64,
    pub plus: bool,
}

/// Scans candidate cuts t over the nonzero |w_j| in increasing order and
/// returns the smallest t with (offset + #{w <= -t}) / #{w >= t} <= q,
/// offset 1 for the knockoff+ variant.
pub fn knockoff_threshold(w: &DVector<f64>, q: f64, plus: bool) -> SelectionResult {
    let mut candidates: Vec<f64> = w.iter().filter(|&&v| v != 0.0).map(|v| v.abs()).collect();
    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    candidates.dedup();
    let offset = if plus { 1.0 } else { 0.0 };

    for &t in &candidates {
        let neg = w.iter().filter(|&&v| v <= -t).count() as f64;
        let pos = w.iter().filter(|&&v| v >= t).count() as f64;
        if (offset + neg) / pos.max(1.0) <= q {
            let selected = w
                .iter()
                .enumerate()
                .filter(|(_, &v)| v >= t)
                .map(|(j, _)| j)
                .collect();
            return SelectionResult {
                threshold: t,
                selected,
                q,
                plus,
            };
        }
    }
    SelectionResult {
        threshold: f64::INFINITY,
        selected: BTreeSet::new(),
        q,
        plus,
    }
}

/// Per-annotator diagnostic dump: `annotator,z,z_tilde,w,selected`.
pub fn write_stats_csv<W: std::io::Write>(
    stats: &KnockoffStats,
    selection: &SelectionResult,
    keys: &crate::data::Registry,
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "annotator,z,z_tilde,w,selected")?;
    for j in 0..stats.w.len() {
        writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{}",
            keys.key(j),
            stats.z[j],
            stats.z_tilde[j],
            stats.w[j],
            selection.selected.contains(&j)
        )?;
    }
    Ok(())
}

/// The model with the score block eliminated: y = U2' Y, X = U2' A for an
/// orthonormal basis U2 of the null space of the gradient-operator
/// transpose.
#[derive(Debug, Clone)]
pub struct ReducedModel {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub u2: DMatrix<f64>,
}

/// Orthonormal basis of ker(grad'), built from a pivoted Householder QR of
/// the dense gradient operator: the trailing full-Q columns beyond the
/// numerical rank span the kernel. Materializes an |E| x (|E| - rank)
/// matrix, so this is for small instances.
pub fn kernel_basis(ops: &DesignOperators) -> DMatrix<f64> {
    let m = ops.n_edges();
    let n = ops.n_items();
    let mut d = ops.grad_dense();
    let mut reflectors: Vec<(DVector<f64>, f64)> = Vec::new();

    let initial_scale = (0..n)
        .map(|c| d.column(c).norm())
        .fold(0.0f64, f64::max)
        .max(1.0);
    for k in 0..n {
        // Column pivot by remaining norm.
        let mut best = k;
        let mut best_norm = d.view((k, best), (m - k, 1)).norm();
        for c in (k + 1)..n {
            let norm = d.view((k, c), (m - k, 1)).norm();
            if norm > best_norm {
                best = c;
                best_norm = norm;
            }
        }
        if best_norm <= 1e-10 * initial_scale {
            break;
        }
        d.swap_columns(k, best);

        let mut v = DVector::zeros(m);
        for i in k..m {
            v[i] = d[(i, k)];
        }
        let alpha = -v[k].signum() * best_norm;
        v[k] -= alpha;
        let beta = 2.0 / v.norm_squared();
        // Apply the reflector to the remaining columns.
        for c in k..n {
            let dot: f64 = (k..m).map(|i| v[i] * d[(i, c)]).sum();
            for i in k..m {
                d[(i, c)] -= beta * dot * v[i];
            }
        }
        reflectors.push((v, beta));
    }

    let rank = reflectors.len();
    let mut u2 = DMatrix::zeros(m, m - rank);
    for (c, i) in (rank..m).enumerate() {
        let mut col = DVector::zeros(m);
        col[i] = 1.0;
        for (v, beta) in reflectors.iter().rev() {
            let dot = v.dot(&col);
            col.axpy(-beta * dot, v, 1.0);
        }
        u2.set_column(c, &col);
    }
    u2
}

/// Projects the data onto the kernel basis, eliminating the score block.
pub fn reduced_model(ops: &DesignOperators, y: &DVector<f64>) -> ReducedModel {
    let u2 = kernel_basis(ops);
    let k = u2.ncols();
    let nu = ops.n_annotators();
    let mut x = DMatrix::zeros(k, nu);
    for e in 0..ops.n_edges() {
        let a = ops.annotator()[e];
        for q in 0..k {
            x[(q, a)] += u2[(e, q)];
        }
    }
    let y_red = u2.tr_mul(y);
    ReducedModel { x, y: y_red, u2 }
}

/// Outcome of running the full-model and reduced-model knockoff pipelines on
/// the same data with linked knockoffs.
#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    pub engine: Engine,
    pub max_w_diff: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub w_full: DVector<f64>,
    pub w_reduced: DVector<f64>,
}

/// Runs both pipelines with shared knockoffs (the reduced knockoffs are the
/// kernel projection of the full ones) and shared path parameters, and
/// compares the knockoff statistics. Materializes the kernel basis, so meant
/// for small instances.
pub fn equivalence_check(
    ops: &DesignOperators,
    y: &DVector<f64>,
    engine: Engine,
    mode: SMode,
) -> Result<EquivalenceReport> {
    if engine == Engine::Lbi {
        return Err(Error::InvalidConfig(
            "the equivalence oracle applies to the iss and lasso engines".into(),
        ));
    }
    let ko = construct_knockoffs(ops, mode, false)?;
    let nu = ops.n_annotators();

    let full_design = PathDesign::from_extended(ops, &ko, y)?;
    // Pin the path parameters from the full design so both runs share them.
    let lambda_max = full_design.profiled_cross().amax();
    let mut cfg = PathConfig::default();
    match engine {
        Engine::IssExact => {
            cfg.t_max = Some(cfg.t_max_factor / lambda_max);
        }
        Engine::Lasso => {
            let n = cfg.n_lambda;
            let ratio = cfg.lambda_min_ratio;
            cfg.lambda_grid = Some(
                (0..n)
                    .map(|i| lambda_max * ratio.powf(i as f64 / (n - 1) as f64))
                    .collect(),
            );
        }
        Engine::Lbi => unreachable!(),
    }

    let full_path = run_path(&full_design, engine, &cfg)?;
    let zf = full_path.entering_times();
    let w_full = knockoff_statistics(
        &zf.rows(0, nu).clone_owned(),
        &zf.rows(nu, nu).clone_owned(),
    )
    .w;

    let reduced = reduced_model(ops, y);
    let x_tilde = reduced.u2.tr_mul(&ko.a_tilde);
    let k = reduced.x.nrows();
    let mut x_ko = DMatrix::zeros(k, 2 * nu);
    x_ko.view_mut((0, 0), (k, nu)).copy_from(&reduced.x);
    x_ko.view_mut((0, nu), (k, nu)).copy_from(&x_tilde);
    let red_design = PathDesign::from_columns(&x_ko, &reduced.y);
    let red_path = run_path(&red_design, engine, &cfg)?;
    let zr = red_path.entering_times();
    let w_reduced = knockoff_statistics(
        &zr.rows(0, nu).clone_owned(),
        &zr.rows(nu, nu).clone_owned(),
    )
    .w;

    let max_w_diff = (&w_full - &w_reduced).amax();
    let tolerance = 1e-6;
    Ok(EquivalenceReport {
        engine,
        max_w_diff,
        tolerance,
        pass: max_w_diff <= tolerance,
        w_full,
        w_reduced,
    })
}
