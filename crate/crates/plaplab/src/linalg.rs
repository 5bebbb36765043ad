//! Small linear-algebra kernels for the implicit and eigen solvers: a
//! constant-coefficient tridiagonal (Thomas) solve and a matrix-free
//! conjugate gradient iteration.

use crate::{Error, Result};

/// Solves the tridiagonal system with constant main diagonal `diag` and
/// constant sub/super diagonal `off` by Thomas elimination.
pub(crate) fn solve_tridiag_const(diag: f64, off: f64, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = rhs.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut c = vec![0.0; n]; // modified super-diagonal
    let mut x = rhs.to_vec();
    let mut piv = diag;
    if piv == 0.0 {
        return Err(Error::LinearSolve("zero pivot in tridiagonal solve".into()));
    }
    c[0] = off / piv;
    x[0] /= piv;
    for i in 1..n {
        piv = diag - off * c[i - 1];
        if piv == 0.0 || !piv.is_finite() {
            return Err(Error::LinearSolve(format!("bad pivot {piv} at row {i}")));
        }
        c[i] = off / piv;
        x[i] = (x[i] - off * x[i - 1]) / piv;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

/// Matrix-free conjugate gradient for a symmetric positive definite
/// operator. `apply` writes A*x into its second argument. Iterates from
/// `x0` until ||r|| <= tol * ||b|| (with a small absolute floor) and
/// returns the solution with the iteration count.
pub(crate) fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x0: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = b.len();
    assert_eq!(x0.len(), n);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let bnorm = dot(b, b).sqrt();
    let target = tol * bnorm + 1e-300;

    let mut x = x0;
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut rho = dot(&r, &r);
    if rho.sqrt() <= target {
        return Ok((x, 0));
    }
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(Error::LinearSolve(format!(
                "operator lost positive definiteness (p.Ap = {pap:e})"
            )));
        }
        let alpha = rho / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rho_new = dot(&r, &r);
        if rho_new.sqrt() <= target {
            return Ok((x, it));
        }
        let beta = rho_new / rho;
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    Err(Error::LinearSolve(format!(
        "conjugate gradient did not converge in {max_iter} iterations"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_matches_dense_solve_3x3() {
        // [ 2 -1  0; -1 2 -1; 0 -1 2 ] x = [1, 0, 1] has solution [1, 1, 1].
        let x = solve_tridiag_const(2.0, -1.0, &[1.0, 0.0, 1.0]).unwrap();
        for v in &x {
            assert!((v - 1.0).abs() <= 1e-14);
        }
    }

    #[test]
    fn thomas_residual_is_tiny() {
        let n = 57;
        let rhs: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.7).sin()).collect();
        let (d, o) = (3.2, -0.9);
        let x = solve_tridiag_const(d, o, &rhs).unwrap();
        for i in 0..n {
            let mut ax = d * x[i];
            if i > 0 {
                ax += o * x[i - 1];
            }
            if i + 1 < n {
                ax += o * x[i + 1];
            }
            assert!((ax - rhs[i]).abs() <= 1e-12, "row {i}");
        }
    }

    #[test]
    fn thomas_rejects_singular() {
        assert!(solve_tridiag_const(0.0, 1.0, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn cg_reproduces_thomas_solution() {
        let n = 40;
        let rhs: Vec<f64> = (0..n).map(|i| ((i as f64) * 1.3).cos()).collect();
        let (d, o) = (2.5, -1.0);
        let direct = solve_tridiag_const(d, o, &rhs).unwrap();
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                y[i] = d * x[i];
                if i > 0 {
                    y[i] += o * x[i - 1];
                }
                if i + 1 < n {
                    y[i] += o * x[i + 1];
                }
            }
        };
        let (x, its) = conjugate_gradient(apply, &rhs, vec![0.0; n], 1e-12, 10 * n).unwrap();
        assert!(its > 0);
        for i in 0..n {
            assert!((x[i] - direct[i]).abs() <= 1e-9, "entry {i}");
        }
    }

    #[test]
    fn cg_converges_immediately_from_the_solution() {
        let apply = |x: &[f64], y: &mut [f64]| y.copy_from_slice(x);
        let b = vec![1.0, 2.0, 3.0];
        let (x, its) = conjugate_gradient(apply, &b, b.clone(), 1e-12, 10).unwrap();
        assert_eq!(its, 0);
        assert_eq!(x, b);
    }

    #[test]
    fn cg_rejects_indefinite_operator() {
        let apply = |x: &[f64], y: &mut [f64]| {
            y[0] = -x[0];
            y[1] = -x[1];
        };
        assert!(conjugate_gradient(apply, &[1.0, 1.0], vec![0.0, 0.0], 1e-10, 50).is_err());
    }
}
