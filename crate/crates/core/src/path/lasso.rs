//! LASSO path over a decreasing lambda grid, score block profiled out.
//!
//! Each grid point solves
//!
//! ```text
//! min over gamma  (1/2) gamma' sigma gamma - b' gamma + lambda |gamma|_1
//! ```
//!
//! by cyclic coordinate descent with warm starts; this is the original
//! objective with theta eliminated, since the unpenalized block keeps its
//! residual correlation at zero at any optimum. Entry lambdas are then
//! sharpened by bisection between the bracketing grid points.

use nalgebra::DVector;

use super::{trivial_path, ParamKind, PathConfig, PathDesign, PathKnot, SolutionPath};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 20_000;
const BISECTION_STEPS: usize = 25;

/// Coordinate-descent state: the coefficient vector and the cached product
/// sigma * gamma.
struct CdState {
    gamma: DVector<f64>,
    fitted: DVector<f64>,
}

impl CdState {
    fn new(p: usize) -> Self {
        CdState {
            gamma: DVector::zeros(p),
            fitted: DVector::zeros(p),
        }
    }
}

#[inline]
fn soft(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Runs coordinate descent at one lambda until the subgradient optimality
/// conditions hold within `tol`.
fn cd_solve(design: &PathDesign, lambda: f64, state: &mut CdState, tol: f64) -> Result<()> {
    let sigma = design.sigma();
    let b = design.profiled_cross();
    let p = design.n_gamma();
    let dead_cut = 1e-14 * (0..p).map(|j| sigma[(j, j)]).fold(1.0f64, f64::max);
    for _ in 0..MAX_SWEEPS {
        for j in 0..p {
            let sjj = sigma[(j, j)];
            if sjj <= dead_cut {
                continue;
            }
            let old = state.gamma[j];
            let rho = b[j] - state.fitted[j] + sjj * old;
            let new = soft(rho, lambda) / sjj;
            if new != old {
                state.gamma[j] = new;
                state.fitted.axpy(new - old, &sigma.column(j), 1.0);
            }
        }
        // Optimality: |corr| <= lambda on zeros, corr = lambda * sign on the
        // active set.
        let mut worst = 0.0f64;
        for j in 0..p {
            let corr = b[j] - state.fitted[j];
            let viol = if state.gamma[j] > 0.0 {
                (corr - lambda).abs()
            } else if state.gamma[j] < 0.0 {
                (corr + lambda).abs()
            } else {
                (corr.abs() - lambda).max(0.0)
            };
            worst = worst.max(viol);
        }
        if worst <= tol {
            return Ok(());
        }
    }
    Err(Error::NonConvergence {
        what: "lasso coordinate descent",
        iterations: MAX_SWEEPS,
        residual: lambda,
    })
}

/// Sharpens an entry event: gamma_j is nonzero at `lo` and zero at `hi`;
/// geometric bisection pins the largest lambda with a nonzero coefficient.
fn refine_entry(
    design: &PathDesign,
    j: usize,
    mut lo: f64,
    mut hi: f64,
    state_at_lo: &CdState,
    tol: f64,
) -> Result<f64> {
    let mut state = CdState {
        gamma: state_at_lo.gamma.clone(),
        fitted: state_at_lo.fitted.clone(),
    };
    for _ in 0..BISECTION_STEPS {
        let mid = (lo * hi).sqrt();
        cd_solve(design, mid, &mut state, tol)?;
        if state.gamma[j] != 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

pub fn lasso_path(design: &PathDesign, cfg: &PathConfig) -> Result<SolutionPath> {
    cfg.validate()?;
    let p = design.n_gamma();
    let b = design.profiled_cross();

    let lambda_max = b.amax();
    if lambda_max <= 1e-12 * design.y_norm().max(1.0) {
        return Ok(trivial_path(design, ParamKind::Lambda));
    }

    let grid: Vec<f64> = match &cfg.lambda_grid {
        Some(g) => g.clone(),
        None => {
            let n = cfg.n_lambda;
            let ratio = cfg.lambda_min_ratio;
            (0..n)
                .map(|i| lambda_max * ratio.powf(i as f64 / (n - 1) as f64))
                .collect()
        }
    };

    let tol = 1e-9 * lambda_max;
    let mut state = CdState::new(p);
    let mut entering: Vec<Option<f64>> = vec![None; p];
    let mut knots = Vec::with_capacity(grid.len());
    let mut prev_lambda: Option<f64> = None;

    for &lambda in &grid {
        cd_solve(design, lambda, &mut state, tol)?;
        for j in 0..p {
            if state.gamma[j] != 0.0 && entering[j].is_none() {
                entering[j] = Some(match prev_lambda {
                    // Entered between the previous grid point and this one.
                    Some(hi) => refine_entry(design, j, lambda, hi, &state, tol)?,
                    None => lambda,
                });
            }
        }
        knots.push(PathKnot {
            param: lambda,
            gamma: state.gamma.clone(),
            theta: design.theta_at(&state.gamma),
        });
        prev_lambda = Some(lambda);
    }

    Ok(SolutionPath {
        param_kind: ParamKind::Lambda,
        knots,
        entering,
    })
}
