//! Energy and concavity functionals along trajectories, and the concavity
//! blow-up-time bound.
//!
//! For the gradient flow u_t = Lp(u) + f(u) the potential
//! J(u) = -(1/p) grad_energy + integral of (F(u) - gamma) satisfies
//! dJ/dt = ||u_t||^2, so J is nondecreasing and J(t) - J(0) equals the
//! cumulative squared time derivative up to time-discretization error.
//! The concavity argument tracks I(t) = M + cumulative integral of ||u||^2;
//! when H = I'' I - (1 + sigma) I'^2 stays positive, I^{-sigma} is concave
//! and must hit zero in finite time, bounding the blow-up time by
//! M / (sigma ||u0||^2).

use crate::grid::Field;
use crate::plap::{gradient_energy, PExponent};
use crate::solver::Trajectory;
use crate::source::SourceTerm;
use crate::{Error, Result};

/// Potential value J(u) = -grad_energy/p + integral of F(u) - gamma |domain|.
pub fn eval_j(u: &Field, source: &SourceTerm, p: PExponent, gamma: f64) -> Result<f64> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParam(format!("gamma must be finite and >= 0, got {gamma}")));
    }
    let grad = gradient_energy(u, p);
    let f_int = u.integrate_composed(|v| source.eval_big_f(v))?;
    Ok(-grad / p.get() + f_int - gamma * u.grid().measure())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRecord {
    pub t: f64,
    /// Integral of |grad u|^p.
    pub grad_energy: f64,
    /// Integral of F(u).
    pub f_integral: f64,
    pub j: f64,
    /// Running integral of ||u_t||^2, accumulated step-wise by the solver.
    pub cumulative_ut2: f64,
}

/// J and its ingredients at every recorded snapshot.
pub fn energy_series(
    traj: &Trajectory,
    source: &SourceTerm,
    p: PExponent,
    gamma: f64,
) -> Result<Vec<EnergyRecord>> {
    require_increasing(traj)?;
    let mut out = Vec::with_capacity(traj.snapshots.len());
    for s in &traj.snapshots {
        let grad = gradient_energy(&s.field, p);
        let f_int = s.field.integrate_composed(|v| source.eval_big_f(v))?;
        out.push(EnergyRecord {
            t: s.t,
            grad_energy: grad,
            f_integral: f_int,
            j: -grad / p.get() + f_int - gamma * s.field.grid().measure(),
            cumulative_ut2: s.cum_ut2,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcavityRecord {
    pub t: f64,
    /// M + cumulative trapezoid of iprime over the recorded times.
    pub i: f64,
    /// Integral of u^2.
    pub iprime: f64,
    /// 2 (integral of u f(u) - grad_energy), the spatial form; never a
    /// time difference of iprime.
    pub idoubleprime: f64,
    /// idoubleprime * i - (1 + sigma) * iprime^2.
    pub h: f64,
    pub sigma: f64,
}

/// Concavity diagnostics along a trajectory for the exponent alpha and
/// offset m. Requires alpha > 2 so that sigma = sqrt(alpha/2) - 1 > 0.
pub fn concavity_series(
    traj: &Trajectory,
    source: &SourceTerm,
    p: PExponent,
    alpha: f64,
    m: f64,
) -> Result<Vec<ConcavityRecord>> {
    if !(alpha > 2.0 && alpha.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "concavity analysis needs alpha > 2, got {alpha}"
        )));
    }
    if !(m >= 0.0 && m.is_finite()) {
        return Err(Error::InvalidParam(format!("offset m must be finite and >= 0, got {m}")));
    }
    require_increasing(traj)?;
    let sigma = (alpha / 2.0).sqrt() - 1.0;
    let mut out: Vec<ConcavityRecord> = Vec::with_capacity(traj.snapshots.len());
    let mut i_acc = m;
    let mut prev: Option<(f64, f64)> = None;
    for s in &traj.snapshots {
        let iprime = s.field.integrate_power(2.0);
        if let Some((t0, ip0)) = prev {
            i_acc += 0.5 * (s.t - t0) * (iprime + ip0);
        }
        prev = Some((s.t, iprime));
        let grad = gradient_energy(&s.field, p);
        let uf = s.field.integrate_composed(|v| v * source.eval_f(v))?;
        let idoubleprime = 2.0 * (uf - grad);
        out.push(ConcavityRecord {
            t: s.t,
            i: i_acc,
            iprime,
            idoubleprime,
            h: idoubleprime * i_acc - (1.0 + sigma) * iprime * iprime,
            sigma,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupBound {
    /// Offset alpha/(alpha-2) * (1 + sqrt(alpha/2)) * ||u0||^4 / (2 alpha J(0)).
    pub m: f64,
    pub sigma: f64,
    /// m / (sigma ||u0||^2).
    pub tstar_upper: f64,
    /// Same offset with the leading factor alpha/(alpha-p); coincides with
    /// `m` at p = 2 and is infinite when alpha = p.
    pub m_alt: f64,
    pub tstar_upper_alt: f64,
    pub j0: f64,
    /// Integral of u0^2.
    pub u0_l2sq: f64,
}

/// Offset M and the resulting blow-up-time bound for initial data with
/// positive potential. Fails with `NoBound` when J(0) <= 0.
pub fn choose_m(
    u0: &Field,
    source: &SourceTerm,
    p: PExponent,
    gamma: f64,
    alpha: f64,
) -> Result<BlowupBound> {
    if !(alpha > 2.0 && alpha.is_finite()) {
        return Err(Error::InvalidParam(format!("bound needs alpha > 2, got {alpha}")));
    }
    let j0 = eval_j(u0, source, p, gamma)?;
    if !(j0 > 0.0) {
        return Err(Error::NoBound(j0));
    }
    let l2sq = u0.integrate_power(2.0);
    if !(l2sq > 0.0) {
        return Err(Error::InvalidParam("initial data is identically zero".into()));
    }
    let sigma = (alpha / 2.0).sqrt() - 1.0;
    let shared = (1.0 + (alpha / 2.0).sqrt()) * l2sq * l2sq / (2.0 * alpha * j0);
    let m = alpha / (alpha - 2.0) * shared;
    let m_alt = if alpha > p.get() { alpha / (alpha - p.get()) * shared } else { f64::INFINITY };
    Ok(BlowupBound {
        m,
        sigma,
        tstar_upper: m / (sigma * l2sq),
        m_alt,
        tstar_upper_alt: m_alt / (sigma * l2sq),
        j0,
        u0_l2sq: l2sq,
    })
}

/// Residual series (t, J(t) - J(0) - cumulative ||u_t||^2). Vanishes up to
/// discretization error for p = 2; for p > 2 the value is the slack of the
/// one-sided energy inequality and should stay above -tol. The gamma term
/// cancels between J(t) and J(0), so it does not matter here.
pub fn energy_identity_residual(
    traj: &Trajectory,
    source: &SourceTerm,
    p: PExponent,
    gamma: f64,
) -> Result<Vec<(f64, f64)>> {
    let series = energy_series(traj, source, p, gamma)?;
    let j0 = series.first().map(|r| r.j).unwrap_or(0.0);
    Ok(series.iter().map(|r| (r.t, r.j - j0 - r.cumulative_ut2)).collect())
}

fn require_increasing(traj: &Trajectory) -> Result<()> {
    if traj.snapshots.is_empty() {
        return Err(Error::InvalidParam("trajectory has no snapshots".into()));
    }
    for w in traj.snapshots.windows(2) {
        if !(w[1].t > w[0].t) {
            return Err(Error::InvalidParam(format!(
                "snapshot timestamps must increase strictly: {} then {}",
                w[0].t, w[1].t
            )));
        }
    }
    Ok(())
}
