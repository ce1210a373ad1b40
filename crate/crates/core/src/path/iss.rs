//! Exact inverse-scale-space path.
//!
//! With the score block profiled out (the optimality condition keeps the
//! gradient-operator residual at zero along the whole path), the dynamics
//! reduce to
//!
//! ```text
//! dp/dt = b - sigma * gamma,    p in the subgradient of |gamma|_1,
//! ```
//!
//! whose solution is piecewise constant in gamma with knots where some |p_j|
//! reaches 1. At each knot the active coefficients solve a sign-constrained
//! least squares, handled by the nonnegative least-squares kernel.

use nalgebra::{DMatrix, DVector};

use super::{trivial_path, ParamKind, PathConfig, PathDesign, PathKnot, SolutionPath};
use crate::error::{Error, Result};
use crate::solvers::nnls_gram;

const BOUNDARY_EPS: f64 = 1e-12;

pub fn iss_path_exact(design: &PathDesign, cfg: &PathConfig) -> Result<SolutionPath> {
    cfg.validate()?;
    let p = design.n_gamma();
    let sigma = design.sigma();
    let b = design.profiled_cross();

    let lambda_max = b.amax();
    if lambda_max <= 1e-12 * design.y_norm().max(1.0) {
        return Ok(trivial_path(design, ParamKind::Time));
    }
    let t_max = cfg.t_max.unwrap_or(cfg.t_max_factor / lambda_max);

    let mut subgrad: DVector<f64> = DVector::zeros(p);
    let mut gamma: DVector<f64> = DVector::zeros(p);
    let mut t = 0.0;
    let mut entering: Vec<Option<f64>> = vec![None; p];
    let mut knots = vec![PathKnot {
        param: 0.0,
        gamma: gamma.clone(),
        theta: design.initial_theta(),
    }];

    let max_events = 20 * p + 200;
    let mut zero_steps = 0usize;

    for _ in 0..max_events {
        let mut rate = b.clone();
        for j in 0..p {
            if gamma[j] != 0.0 {
                rate.axpy(-gamma[j], &sigma.column(j), 1.0);
            }
        }
        if rate.amax() <= 1e-12 * lambda_max {
            break; // stationary: residual correlation exhausted
        }

        // Earliest boundary hit among strictly interior coordinates;
        // ties resolve to the smallest index by the strict comparison.
        let mut hit: Option<(usize, f64)> = None;
        for j in 0..p {
            if subgrad[j].abs() >= 1.0 - BOUNDARY_EPS {
                continue;
            }
            let r = rate[j];
            if r.abs() <= 1e-14 * lambda_max {
                continue;
            }
            let target = if r > 0.0 { 1.0 } else { -1.0 };
            let dt = (target - subgrad[j]) / r;
            if dt >= 0.0 && hit.map_or(true, |(_, best)| dt < best) {
                hit = Some((j, dt));
            }
        }
        let Some((_, dt)) = hit else {
            break; // every coordinate sits on the boundary
        };

        if t + dt > t_max {
            break;
        }
        t += dt;
        subgrad.axpy(dt, &rate, 1.0);
        for j in 0..p {
            subgrad[j] = subgrad[j].clamp(-1.0, 1.0);
        }

        // Sign-constrained least squares on the boundary set.
        let boundary: Vec<usize> = (0..p)
            .filter(|&j| subgrad[j].abs() >= 1.0 - BOUNDARY_EPS)
            .collect();
        let nb = boundary.len();
        let mut m = DMatrix::zeros(nb, nb);
        let mut h = DVector::zeros(nb);
        for (a, &i) in boundary.iter().enumerate() {
            let si = if subgrad[i] > 0.0 { 1.0 } else { -1.0 };
            h[a] = si * b[i];
            for (c, &j) in boundary.iter().enumerate() {
                let sj = if subgrad[j] > 0.0 { 1.0 } else { -1.0 };
                m[(a, c)] = si * sj * sigma[(i, j)];
            }
        }
        let eta = nnls_gram(&m, &h)?;
        gamma.fill(0.0);
        for (a, &j) in boundary.iter().enumerate() {
            let sj = if subgrad[j] > 0.0 { 1.0 } else { -1.0 };
            gamma[j] = sj * eta[a];
            if gamma[j] != 0.0 && entering[j].is_none() {
                entering[j] = Some(t);
            }
        }

        knots.push(PathKnot {
            param: t,
            gamma: gamma.clone(),
            theta: design.theta_at(&gamma),
        });

        if dt <= 1e-15 * t.max(1.0) {
            zero_steps += 1;
            if zero_steps > p + 10 {
                return Err(Error::NonConvergence {
                    what: "exact ISS path (degenerate simultaneous crossings)",
                    iterations: zero_steps,
                    residual: dt,
                });
            }
        } else {
            zero_steps = 0;
        }
        if entering.iter().all(Option::is_some) {
            break;
        }
    }

    Ok(SolutionPath {
        param_kind: ParamKind::Time,
        knots,
        entering,
    })
}
