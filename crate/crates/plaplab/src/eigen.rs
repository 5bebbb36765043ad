//! First Dirichlet eigenvalue and eigenfunction of the discrete p-Laplacian.
//!
//! The pair (lambda, phi) solves `Lp phi + lambda |phi|^(p-2) phi = 0` with
//! phi > 0 in the interior. For p = 2 this is computed by inverse power
//! iteration (Thomas solve in 1d, conjugate gradient in 2d); for p > 2 the
//! Rayleigh quotient
//!
//! ```text
//!   R(u) = (integral of |grad u|^p) / (integral of |u|^p)
//! ```
//!
//! is minimized over the nonnegative cone by projected gradient descent
//! with Barzilai-Borwein steps and a backtracking safeguard. Convergence is
//! always judged by the scale-invariant equation residual
//! `sup |Lp phi + lambda phi^(p-1)| <= tol * lambda * (sup phi)^(p-1)`.

use std::sync::Arc;

use crate::grid::{Field, Grid};
use crate::linalg::{conjugate_gradient, solve_tridiag_const};
use crate::plap::{apply_plap, gradient_energy, PExponent};
use crate::{Error, Result};

pub const EIGEN_TOL_DEFAULT: f64 = 1e-8;
pub const EIGEN_MAX_ITER_DEFAULT: usize = 50_000;

/// How the returned eigenfunction is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// sup phi = 1.
    SupOne,
    /// integral of phi^p equals the domain measure.
    PMass,
}

#[derive(Debug, Clone)]
pub struct EigenResult {
    pub lambda: f64,
    pub phi: Field,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Closed-form first Dirichlet eigenvalue of the p-Laplacian on an interval
/// of length `l`.
pub fn lambda_first_interval(p: f64, l: f64) -> f64 {
    use std::f64::consts::PI;
    (p - 1.0) * (2.0 * PI / (p * l * (PI / p).sin())).powf(p)
}

/// Sign-preserving power |v|^(p-2) v; exactly v when p = 2.
#[inline]
fn powsgn(v: f64, p: f64) -> f64 {
    if p == 2.0 {
        v
    } else {
        v.abs().powf(p - 2.0) * v
    }
}

/// Discrete Rayleigh quotient of a nonzero field.
pub fn rayleigh_quotient(u: &Field, p: PExponent) -> f64 {
    let denom = u.integrate_power(p.get());
    assert!(denom > 0.0, "Rayleigh quotient of the zero field");
    gradient_energy(u, p) / denom
}

/// Sup norm of the eigen-equation residual Lp(phi) + lambda phi^(p-1).
pub fn eigen_residual(phi: &Field, lambda: f64, p: PExponent) -> f64 {
    let lp = apply_plap(phi, p);
    let pv = p.get();
    lp.values()
        .iter()
        .zip(phi.values())
        .map(|(l, v)| (l + lambda * powsgn(*v, pv)).abs())
        .fold(0.0f64, f64::max)
}

fn normalize_to(phi: &Field, p: PExponent, norm: Normalization) -> Field {
    match norm {
        Normalization::SupOne => phi.scaled(1.0 / phi.sup_norm()),
        Normalization::PMass => {
            let mass = phi.integrate_power(p.get());
            phi.scaled((phi.grid().measure() / mass).powf(1.0 / p.get()))
        }
    }
}

/// Smooth positive starting bump: a product of boundary parabolas.
fn bump(grid: &Arc<Grid>) -> Field {
    let (lx, ly) = (grid.len_x(), grid.len_y());
    if grid.dim() == 1 {
        Field::from_profile(grid, move |x, _| x * (lx - x))
    } else {
        Field::from_profile(grid, move |x, y| x * (lx - x) * y * (ly - y))
    }
}

fn converged_at(residual: f64, lambda: f64, sup: f64, p: f64, tol: f64) -> bool {
    residual <= tol * lambda * sup.powf(p - 1.0)
}

/// First eigenpair of the discrete p-Laplacian on `grid`.
pub fn first_eigenpair(
    grid: &Arc<Grid>,
    p: PExponent,
    normalization: Normalization,
    tol: f64,
    max_iter: usize,
) -> Result<EigenResult> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidParam(format!("eigen tolerance must be positive, got {tol}")));
    }
    let mut res = if p.is_linear() {
        inverse_power_p2(grid, tol, max_iter)?
    } else {
        descent_general_p(grid, p, tol, max_iter)?
    };
    res.phi = normalize_to(&res.phi, p, normalization);
    res.lambda = rayleigh_quotient(&res.phi, p);
    res.residual = eigen_residual(&res.phi, res.lambda, p);
    Ok(res)
}

/// Inverse power iteration for p = 2: repeatedly solve (-Lap) y = phi.
fn inverse_power_p2(grid: &Arc<Grid>, tol: f64, max_iter: usize) -> Result<EigenResult> {
    let p2 = PExponent::new(2.0).unwrap();
    let n = grid.n();
    let mut phi = bump(grid);
    phi = phi.scaled(1.0 / phi.sup_norm());
    let mut lambda = rayleigh_quotient(&phi, p2);
    let mut residual = eigen_residual(&phi, lambda, p2);
    // Warm start for the 2d inner solves: the previous solution rescaled.
    let mut warm: Vec<f64> = vec![0.0; grid.interior_count()];
    for it in 1..=max_iter {
        if converged_at(residual, lambda, phi.sup_norm(), 2.0, tol) {
            return Ok(EigenResult { lambda, phi, residual, iterations: it - 1, converged: true });
        }
        let y = if grid.dim() == 1 {
            let h2 = grid.hx() * grid.hx();
            solve_tridiag_const(2.0 / h2, -1.0 / h2, phi.values())?
        } else {
            let (hx2, hy2) = (grid.hx() * grid.hx(), grid.hy() * grid.hy());
            let stencil = |x: &[f64], out: &mut [f64]| {
                let at = |x: &[f64], i: usize, j: usize| -> f64 {
                    if i == 0 || i == n + 1 || j == 0 || j == n + 1 {
                        0.0
                    } else {
                        x[(j - 1) * n + (i - 1)]
                    }
                };
                for j in 1..=n {
                    for i in 1..=n {
                        let c = x[(j - 1) * n + (i - 1)];
                        out[(j - 1) * n + (i - 1)] = (2.0 * c
                            - at(x, i - 1, j)
                            - at(x, i + 1, j))
                            / hx2
                            + (2.0 * c - at(x, i, j - 1) - at(x, i, j + 1)) / hy2;
                    }
                }
            };
            let x0 = if it == 1 {
                phi.values().iter().map(|v| v / lambda).collect()
            } else {
                warm.clone()
            };
            let (sol, _) = conjugate_gradient(
                stencil,
                phi.values(),
                x0,
                1e-12,
                20 * grid.interior_count(),
            )?;
            warm = sol.clone();
            sol
        };
        let y = Field::from_values_unchecked(grid, y);
        let sup = y.sup_norm();
        if !(sup > 0.0) || !y.is_finite() {
            return Err(Error::LinearSolve("inverse iteration produced a degenerate field".into()));
        }
        phi = y.scaled(1.0 / sup);
        for w in warm.iter_mut() {
            *w /= sup;
        }
        lambda = rayleigh_quotient(&phi, p2);
        residual = eigen_residual(&phi, lambda, p2);
    }
    let converged = converged_at(residual, lambda, phi.sup_norm(), 2.0, tol);
    Ok(EigenResult { lambda, phi, residual, iterations: max_iter, converged })
}

/// Projected Barzilai-Borwein descent on the Rayleigh quotient for p > 2.
fn descent_general_p(
    grid: &Arc<Grid>,
    p: PExponent,
    tol: f64,
    max_iter: usize,
) -> Result<EigenResult> {
    let pv = p.get();
    let mut u = normalize_to(&bump(grid), p, Normalization::PMass);
    let mut lambda = rayleigh_quotient(&u, p);
    // Ascent direction of R up to a positive factor; also the equation
    // residual, so driving it to zero solves the eigenproblem.
    let grad = |u: &Field, lambda: f64| -> Vec<f64> {
        let lp = apply_plap(u, p);
        lp.values()
            .iter()
            .zip(u.values())
            .map(|(l, v)| -l - lambda * powsgn(*v, pv))
            .collect()
    };
    let project = |vals: Vec<f64>| -> Result<Field> {
        let clipped: Vec<f64> = vals.iter().map(|v| v.max(0.0)).collect();
        if !clipped.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("eigen iterate left finite range".into()));
        }
        if clipped.iter().all(|&v| v == 0.0) {
            return Err(Error::LinearSolve("eigen iterate collapsed to the zero field".into()));
        }
        Ok(normalize_to(&Field::from_values_unchecked(grid, clipped), p, Normalization::PMass))
    };

    let mut g = grad(&u, lambda);
    let mut residual = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut tau = 0.1 / lambda;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None; // (u values, gradient)
    for it in 1..=max_iter {
        if converged_at(residual, lambda, u.sup_norm(), pv, tol) {
            return Ok(EigenResult {
                lambda,
                phi: u,
                residual,
                iterations: it - 1,
                converged: true,
            });
        }
        if let Some((pu, pg)) = &prev {
            let mut ss = 0.0;
            let mut sy = 0.0;
            for i in 0..g.len() {
                let s = u.values()[i] - pu[i];
                let y = g[i] - pg[i];
                ss += s * s;
                sy += s * y;
            }
            if sy > 0.0 && ss > 0.0 {
                tau = ss / sy;
            } else {
                tau *= 2.0;
            }
        }
        tau = tau.clamp(1e-12 / lambda, 100.0 / lambda);

        // Backtrack until the Rayleigh quotient does not increase.
        let mut step = tau;
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<f64> =
                u.values().iter().zip(&g).map(|(v, gi)| v - step * gi).collect();
            let cand = project(cand)?;
            let rq = rayleigh_quotient(&cand, p);
            if rq <= lambda * (1.0 + 1e-13) {
                accepted = Some((cand, rq));
                break;
            }
            step *= 0.5;
        }
        let Some((next, rq)) = accepted else {
            // No descent even at a tiny step: the iterate is numerically
            // stationary, report what we have.
            let converged = converged_at(residual, lambda, u.sup_norm(), pv, tol);
            return Ok(EigenResult { lambda, phi: u, residual, iterations: it, converged });
        };
        prev = Some((u.values().to_vec(), g));
        u = next;
        lambda = rq;
        g = grad(&u, lambda);
        residual = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    }
    let converged = converged_at(residual, lambda, u.sup_norm(), pv, tol);
    Ok(EigenResult { lambda, phi: u, residual, iterations: max_iter, converged })
}
