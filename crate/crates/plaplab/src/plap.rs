//! Flux-form discretization of the p-Laplacian div(|grad u|^(p-2) grad u)
//! with homogeneous Dirichlet boundary.
//!
//! Face fluxes q = D * d pair a one-sided face difference d with the
//! diffusivity D = (|grad u|^2)^((p-2)/2) evaluated from the same face
//! differences; the node value is the discrete flux divergence. With the
//! uniform interior quadrature weights this operator satisfies an exact
//! summation-by-parts identity,
//!
//! ```text
//!   sum_i w * v_i * (Lp u)_i = -flux_pairing(u, v)
//! ```
//!
//! for any v vanishing on the boundary, with no quadrature error. No
//! regularization is applied at vanishing gradients: for p > 2 the
//! diffusivity simply degenerates to zero there.

use crate::grid::Field;
use crate::{Error, Result};

/// Diffusion exponent p >= 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PExponent(f64);

impl PExponent {
    pub fn new(p: f64) -> Result<Self> {
        if !p.is_finite() || p < 2.0 {
            return Err(Error::InvalidParam(format!("p must be finite and >= 2, got {p}")));
        }
        Ok(PExponent(p))
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn is_linear(self) -> bool {
        self.0 == 2.0
    }
}

impl std::fmt::Display for PExponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Face diffusivity from the squared gradient magnitude. For p = 2 this is
/// exactly 1.0 so the operator reduces bitwise to the standard Laplacian.
#[inline]
fn dcoef(mag2: f64, p: f64) -> f64 {
    if p == 2.0 {
        1.0
    } else {
        mag2.powf(0.5 * (p - 2.0))
    }
}

/// 1d face differences d_(i+1/2) = (u_(i+1) - u_i) / h for i = 0..=n.
fn face_diffs_1d(u: &Field) -> Vec<f64> {
    let n = u.grid().n();
    let h = u.grid().hx();
    (0..=n).map(|i| (u.value(i + 1, 0) - u.value(i, 0)) / h).collect()
}

/// Squared gradient magnitude at the x-face between (i, j) and (i+1, j):
/// the face-normal difference plus the averaged transverse difference.
#[inline]
fn xface_mag2(u: &Field, i: usize, j: usize) -> (f64, f64) {
    let g = u.grid();
    let dx = (u.value(i + 1, j) - u.value(i, j)) / g.hx();
    let dybar = (u.value(i, j + 1) - u.value(i, j - 1) + u.value(i + 1, j + 1)
        - u.value(i + 1, j - 1))
        / (4.0 * g.hy());
    (dx, dx * dx + dybar * dybar)
}

#[inline]
fn yface_mag2(u: &Field, i: usize, j: usize) -> (f64, f64) {
    let g = u.grid();
    let dy = (u.value(i, j + 1) - u.value(i, j)) / g.hy();
    let dxbar = (u.value(i + 1, j) - u.value(i - 1, j) + u.value(i + 1, j + 1)
        - u.value(i - 1, j + 1))
        / (4.0 * g.hx());
    (dy, dy * dy + dxbar * dxbar)
}

/// Applies the discrete p-Laplacian to a field. The output is not checked
/// for finiteness; the time stepper does that after adding the reaction.
pub fn apply_plap(u: &Field, p: PExponent) -> Field {
    let g = u.grid();
    let n = g.n();
    let pv = p.get();
    if g.dim() == 1 {
        let h = g.hx();
        let d = face_diffs_1d(u);
        let q: Vec<f64> = d.iter().map(|&d| dcoef(d * d, pv) * d).collect();
        let out: Vec<f64> = (1..=n).map(|i| (q[i] - q[i - 1]) / h).collect();
        Field::from_values_unchecked(g, out)
    } else {
        let (hx, hy) = (g.hx(), g.hy());
        // x faces: (n+1) per row, n rows; y faces transposed.
        let mut qx = vec![0.0; (n + 1) * n];
        for j in 1..=n {
            for i in 0..=n {
                let (dx, m2) = xface_mag2(u, i, j);
                qx[(j - 1) * (n + 1) + i] = dcoef(m2, pv) * dx;
            }
        }
        let mut qy = vec![0.0; (n + 1) * n];
        for j in 0..=n {
            for i in 1..=n {
                let (dy, m2) = yface_mag2(u, i, j);
                qy[j * n + (i - 1)] = dcoef(m2, pv) * dy;
            }
        }
        let mut out = vec![0.0; n * n];
        for j in 1..=n {
            for i in 1..=n {
                let divx = (qx[(j - 1) * (n + 1) + i] - qx[(j - 1) * (n + 1) + i - 1]) / hx;
                let divy = (qy[j * n + (i - 1)] - qy[(j - 1) * n + (i - 1)]) / hy;
                out[g.index(i, j)] = divx + divy;
            }
        }
        Field::from_values_unchecked(g, out)
    }
}

/// Discrete bilinear flux pairing sum_faces w * D(u) * d_u * d_v, the exact
/// negative adjoint of `apply_plap` under the interior quadrature weights.
pub fn flux_pairing(u: &Field, v: &Field, p: PExponent) -> f64 {
    let g = u.grid();
    assert_eq!(g.as_ref(), v.grid().as_ref(), "fields must share a grid");
    let n = g.n();
    let pv = p.get();
    if g.dim() == 1 {
        let h = g.hx();
        let du = face_diffs_1d(u);
        let dv = face_diffs_1d(v);
        let mut s = 0.0;
        for i in 0..=n {
            s += dcoef(du[i] * du[i], pv) * du[i] * dv[i];
        }
        h * s
    } else {
        let w = g.hx() * g.hy();
        let mut s = 0.0;
        for j in 1..=n {
            for i in 0..=n {
                let (dxu, m2) = xface_mag2(u, i, j);
                let dxv = (v.value(i + 1, j) - v.value(i, j)) / g.hx();
                s += dcoef(m2, pv) * dxu * dxv;
            }
        }
        for j in 0..=n {
            for i in 1..=n {
                let (dyu, m2) = yface_mag2(u, i, j);
                let dyv = (v.value(i, j + 1) - v.value(i, j)) / g.hy();
                s += dcoef(m2, pv) * dyu * dyv;
            }
        }
        w * s
    }
}

/// Discrete gradient energy, the flux pairing of a field with itself. For
/// p = 2 this is the quadratic form of the standard 5-point stiffness.
pub fn gradient_energy(u: &Field, p: PExponent) -> f64 {
    flux_pairing(u, u, p)
}

/// Largest face diffusivity D = (|grad u|^2)^((p-2)/2); the explicit-step
/// diffusion cap scales with this. For p = 2 it is exactly 1.
pub fn max_face_diffusivity(u: &Field, p: PExponent) -> f64 {
    if p.is_linear() {
        return 1.0;
    }
    let g = u.grid();
    let n = g.n();
    let pv = p.get();
    let mut m = 0.0f64;
    if g.dim() == 1 {
        for d in face_diffs_1d(u) {
            m = m.max(dcoef(d * d, pv));
        }
    } else {
        for j in 1..=n {
            for i in 0..=n {
                let (_, m2) = xface_mag2(u, i, j);
                m = m.max(dcoef(m2, pv));
            }
        }
        for j in 0..=n {
            for i in 1..=n {
                let (_, m2) = yface_mag2(u, i, j);
                m = m.max(dcoef(m2, pv));
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn p(v: f64) -> PExponent {
        PExponent::new(v).unwrap()
    }

    /// Pseudo-random but deterministic node values for adjointness checks.
    fn wiggle(seed: f64) -> impl Fn(f64, f64) -> f64 {
        move |x, y| (7.3 * x + seed).sin() * (3.1 * y + 1.0 + seed).cos() + 0.2 * x - 0.1 * y
    }

    #[test]
    fn exponent_validation() {
        assert!(PExponent::new(2.0).is_ok());
        assert!(PExponent::new(3.5).is_ok());
        assert!(PExponent::new(1.99).is_err());
        assert!(PExponent::new(f64::NAN).is_err());
        assert!(PExponent::new(f64::INFINITY).is_err());
    }

    #[test]
    fn p2_is_bitwise_the_standard_laplacian_1d() {
        let g = Grid::line(1.0, 31).unwrap();
        let u = Field::from_profile(&g, wiggle(0.4));
        let lap = apply_plap(&u, p(2.0));
        let h2 = g.hx() * g.hx();
        for i in 1..=g.n() {
            let expect = (u.value(i + 1, 0) - u.value(i, 0)) / g.hx() / g.hx()
                - (u.value(i, 0) - u.value(i - 1, 0)) / g.hx() / g.hx();
            assert_eq!(lap.values()[i - 1], expect, "node {i}");
            // Same thing written as the familiar 3-point stencil, up to
            // roundoff from the different association order.
            let stencil = (u.value(i + 1, 0) - 2.0 * u.value(i, 0) + u.value(i - 1, 0)) / h2;
            assert!((lap.values()[i - 1] - stencil).abs() <= 1e-9 * (stencil.abs() + 1.0));
        }
    }

    #[test]
    fn p2_matches_five_point_stencil_2d() {
        let g = Grid::rectangle(1.0, 0.7, 13).unwrap();
        let u = Field::from_profile(&g, wiggle(1.3));
        let lap = apply_plap(&u, p(2.0));
        let (hx2, hy2) = (g.hx() * g.hx(), g.hy() * g.hy());
        for j in 1..=g.n() {
            for i in 1..=g.n() {
                let s = (u.value(i + 1, j) - 2.0 * u.value(i, j) + u.value(i - 1, j)) / hx2
                    + (u.value(i, j + 1) - 2.0 * u.value(i, j) + u.value(i, j - 1)) / hy2;
                let got = lap.values()[g.index(i, j)];
                assert!((got - s).abs() <= 1e-9 * (s.abs() + 1.0), "node ({i},{j})");
            }
        }
    }

    #[test]
    fn p3_parabola_is_exact_away_from_the_kink() {
        // u = x(1-x) has face differences equal to u' at face midpoints, so
        // for p = 3 the discrete operator reproduces -4|1-2x| exactly at
        // nodes whose two faces lie on one side of x = 1/2.
        let g = Grid::line(1.0, 99).unwrap();
        let u = Field::from_profile(&g, |x, _| x * (1.0 - x));
        let out = apply_plap(&u, p(3.0));
        let h = g.hx();
        for i in 1..=g.n() {
            let (x, _) = g.pos(i, 0);
            if (1.0 - 2.0 * x).abs() <= 2.0 * h {
                continue;
            }
            let expect = -4.0 * (1.0 - 2.0 * x).abs();
            assert!(
                (out.values()[i - 1] - expect).abs() <= 1e-11,
                "x = {x}: got {}, expect {expect}",
                out.values()[i - 1]
            );
        }
    }

    #[test]
    fn summation_by_parts_is_exact() {
        // <v, Lp u>_w == -flux_pairing(u, v) to roundoff, 1d and 2d,
        // linear and degenerate p alike.
        let cases_1d = [2.0, 2.5, 3.0, 4.0];
        let g = Grid::line(1.3, 41).unwrap();
        let u = Field::from_profile(&g, wiggle(0.2));
        let v = Field::from_profile(&g, wiggle(2.9));
        for pv in cases_1d {
            let lp = apply_plap(&u, p(pv));
            let w = g.interior_weight();
            let lhs: f64 =
                w * v.values().iter().zip(lp.values()).map(|(a, b)| a * b).sum::<f64>();
            let rhs = -flux_pairing(&u, &v, p(pv));
            let scale = lhs.abs().max(rhs.abs()).max(1.0);
            assert!((lhs - rhs).abs() <= 1e-12 * scale, "p={pv}: {lhs} vs {rhs}");
        }

        let g = Grid::rectangle(1.0, 0.8, 15).unwrap();
        let u = Field::from_profile(&g, wiggle(0.7));
        let v = Field::from_profile(&g, wiggle(5.1));
        for pv in cases_1d {
            let lp = apply_plap(&u, p(pv));
            let w = g.interior_weight();
            let lhs: f64 =
                w * v.values().iter().zip(lp.values()).map(|(a, b)| a * b).sum::<f64>();
            let rhs = -flux_pairing(&u, &v, p(pv));
            let scale = lhs.abs().max(rhs.abs()).max(1.0);
            assert!((lhs - rhs).abs() <= 1e-12 * scale, "p={pv}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn gradient_energy_of_discrete_sine_is_closed_form() {
        // sin(pi x) is an exact eigenvector of the discrete p = 2 operator
        // and trapezoid integrates its square exactly, so the energy equals
        // lambda_h / 2 with lambda_h = 4 sin^2(pi h / 2) / h^2.
        let g = Grid::line(1.0, 199).unwrap();
        let u = Field::from_profile(&g, |x, _| (PI * x).sin());
        let h = g.hx();
        let lambda_h = 4.0 * (PI * h / 2.0).sin().powi(2) / (h * h);
        let e = gradient_energy(&u, p(2.0));
        assert!((e - lambda_h / 2.0).abs() <= 1e-10 * lambda_h);
        // And the discrete value converges to the continuum pi^2 / 2.
        assert!((e - PI * PI / 2.0).abs() <= 1e-3);
    }

    #[test]
    fn gradient_energy_p3_tent_profile() {
        // |u'| = 1 a.e. for the tent, and every face difference has
        // magnitude exactly 1 except the two straddling the apex, so the
        // p = 3 energy tends to |Omega| = 1.
        let g = Grid::line(1.0, 199).unwrap();
        let u = Field::from_profile(&g, |x, _| x.min(1.0 - x));
        let e = gradient_energy(&u, p(3.0));
        assert!((e - 1.0).abs() <= 2.0 * g.hx(), "energy {e}");
    }

    #[test]
    fn max_face_diffusivity_examples() {
        let g = Grid::line(1.0, 99).unwrap();
        let u = Field::from_profile(&g, |x, _| x * (1.0 - x));
        assert_eq!(max_face_diffusivity(&u, p(2.0)), 1.0);
        // Steepest face is the first one: d = 1 - h.
        let d = 1.0 - g.hx();
        let got = max_face_diffusivity(&u, p(3.0));
        assert!((got - d).abs() <= 1e-12, "got {got}");
        // Zero field has zero diffusivity for p > 2.
        assert_eq!(max_face_diffusivity(&Field::zeros(&g), p(3.0)), 0.0);
    }

    #[test]
    fn degenerate_gradient_needs_no_regularization() {
        // A field with a flat plateau produces zero-gradient faces; for
        // p > 2 the flux there is exactly 0, never NaN.
        let g = Grid::line(1.0, 9).unwrap();
        let u = Field::from_values(&g, vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        let out = apply_plap(&u, p(2.7));
        assert!(out.is_finite());
        assert!(out.values()[4].abs() <= 1e-15);
    }

    proptest! {
        #[test]
        fn flux_pairing_is_symmetric_in_the_linear_case(
            a in proptest::collection::vec(-5.0f64..5.0, 9),
            b in proptest::collection::vec(-5.0f64..5.0, 9),
        ) {
            let g = Grid::line(1.0, 9).unwrap();
            let u = Field::from_values(&g, a).unwrap();
            let v = Field::from_values(&g, b).unwrap();
            let uv = flux_pairing(&u, &v, p(2.0));
            let vu = flux_pairing(&v, &u, p(2.0));
            let scale = uv.abs().max(vu.abs()).max(1.0);
            prop_assert!((uv - vu).abs() <= 1e-12 * scale);
        }

        #[test]
        fn gradient_energy_scales_with_power_p(
            vals in proptest::collection::vec(-3.0f64..3.0, 9),
            c in 0.1f64..10.0,
            pv in 2.0f64..4.0,
        ) {
            let g = Grid::line(1.0, 9).unwrap();
            let u = Field::from_values(&g, vals).unwrap();
            let lhs = gradient_energy(&u.scaled(c), p(pv));
            let rhs = c.powf(pv) * gradient_energy(&u, p(pv));
            let scale = lhs.abs().max(rhs.abs()).max(1e-300);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * scale);
        }
    }
}
