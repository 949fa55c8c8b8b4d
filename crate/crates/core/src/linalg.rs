//! Small linear solvers: tridiagonal elimination, preconditioned conjugate
//! gradients and preconditioned MINRES for symmetric indefinite systems.

use crate::error::{Error, Result};

/// Solves a symmetric tridiagonal system with diagonal `diag` and
/// off-diagonal `off` (`off[i]` couples `i` and `i + 1`).
pub fn thomas_solve(diag: &[f64], off: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if rhs.len() != n || off.len() + 1 != n {
        return Err(Error::Usage("tridiagonal dimensions disagree".into()));
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    if denom == 0.0 {
        return Err(Error::Numeric("zero pivot in tridiagonal solve".into()));
    }
    if n > 1 {
        c[0] = off[0] / denom;
    }
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - off[i - 1] * c[i - 1];
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::Numeric(format!("zero pivot at row {i} in tridiagonal solve")));
        }
        if i + 1 < n {
            c[i] = off[i] / denom;
        }
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy)]
pub struct IterativeOutcome {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Conjugate gradients for SPD `apply`, preconditioned by `precond`.
/// Stops when `||r|| <= rel_tol ||b||`.
pub fn pcg<A, P>(apply: A, precond: P, b: &[f64], rel_tol: f64, max_iter: usize) -> (Vec<f64>, IterativeOutcome)
where
    A: Fn(&[f64], &mut [f64]),
    P: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let b_norm = dot(b, b).sqrt();
    let mut outcome = IterativeOutcome { iterations: 0, residual: b_norm, converged: b_norm == 0.0 };
    if outcome.converged {
        return (x, outcome);
    }
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        outcome.iterations = it;
        outcome.residual = dot(&r, &r).sqrt();
        if outcome.residual <= rel_tol * b_norm {
            outcome.converged = true;
            break;
        }
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    (x, outcome)
}

/// MINRES for symmetric (possibly indefinite) `apply` with an SPD
/// preconditioner. The stopping test is on the preconditioned residual,
/// `||r||_{M^{-1}} <= rel_tol ||b||_{M^{-1}}`.
pub fn minres<A, P>(apply: A, precond: P, b: &[f64], rel_tol: f64, max_iter: usize) -> (Vec<f64>, IterativeOutcome)
where
    A: Fn(&[f64], &mut [f64]),
    P: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r1 = b.to_vec();
    let mut y = vec![0.0; n];
    precond(&r1, &mut y);
    let beta1_sq = dot(&r1, &y);
    let mut outcome = IterativeOutcome { iterations: 0, residual: 0.0, converged: true };
    if !(beta1_sq > 0.0) {
        outcome.converged = beta1_sq == 0.0;
        return (x, outcome);
    }
    let beta1 = beta1_sq.sqrt();
    outcome.converged = false;
    outcome.residual = beta1;

    let mut r2 = r1.clone();
    let mut beta = beta1;
    let mut oldb = 0.0;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0;
    let mut sn = 0.0;
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut av = vec![0.0; n];

    for it in 1..=max_iter {
        for i in 0..n {
            v[i] = y[i] / beta;
        }
        apply(&v, &mut av);
        if it >= 2 {
            for i in 0..n {
                av[i] -= (beta / oldb) * r1[i];
            }
        }
        let alpha = dot(&v, &av);
        for i in 0..n {
            av[i] -= (alpha / beta) * r2[i];
        }
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&av);
        precond(&r2, &mut y);
        oldb = beta;
        let beta_sq = dot(&r2, &y);
        if beta_sq < 0.0 {
            break;
        }
        beta = beta_sq.sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alpha;
        let gbar = sn * dbar - cs * alpha;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = (gbar * gbar + beta * beta).sqrt().max(f64::MIN_POSITIVE);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let denom = 1.0 / gamma;
        for i in 0..n {
            let w1 = w2[i];
            w2[i] = w[i];
            w[i] = (v[i] - oldeps * w1 - delta * w2[i]) * denom;
            x[i] += phi * w[i];
        }
        outcome.iterations = it;
        outcome.residual = phibar;
        if phibar <= rel_tol * beta1 {
            outcome.converged = true;
            break;
        }
        if beta == 0.0 {
            outcome.converged = true;
            break;
        }
    }
    (x, outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize, shift: f64) -> (Vec<f64>, Vec<f64>) {
        (vec![2.0 + shift; n], vec![-1.0; n - 1])
    }

    fn tri_apply(diag: &[f64], off: &[f64], x: &[f64], out: &mut [f64]) {
        let n = diag.len();
        for i in 0..n {
            let mut s = diag[i] * x[i];
            if i > 0 {
                s += off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += off[i] * x[i + 1];
            }
            out[i] = s;
        }
    }

    #[test]
    fn thomas_recovers_known_solution() {
        let (d, o) = laplace_1d(50, 0.1);
        let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut b = vec![0.0; 50];
        tri_apply(&d, &o, &x, &mut b);
        let sol = thomas_solve(&d, &o, &b).unwrap();
        for (a, e) in sol.iter().zip(&x) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn pcg_and_minres_agree_with_thomas() {
        let (d, o) = laplace_1d(200, 0.01);
        let b: Vec<f64> = (0..200).map(|i| ((i * 7) % 13) as f64 - 6.0).collect();
        let exact = thomas_solve(&d, &o, &b).unwrap();
        let apply = |x: &[f64], out: &mut [f64]| tri_apply(&d, &o, x, out);
        let jacobi = |r: &[f64], z: &mut [f64]| {
            for i in 0..r.len() {
                z[i] = r[i] / d[i];
            }
        };
        let (x, out) = pcg(apply, jacobi, &b, 1e-12, 2000);
        assert!(out.converged);
        let (y, out2) = minres(apply, jacobi, &b, 1e-12, 2000);
        assert!(out2.converged);
        for i in 0..200 {
            assert!((x[i] - exact[i]).abs() < 1e-8 * exact[i].abs().max(1.0));
            assert!((y[i] - exact[i]).abs() < 1e-8 * exact[i].abs().max(1.0));
        }
    }

    #[test]
    fn minres_handles_indefinite_systems() {
        // Laplacian shifted to have both signs in its spectrum
        let (d, o) = laplace_1d(100, -0.5);
        let x: Vec<f64> = (0..100).map(|i| 1.0 + (i as f64 * 0.1).cos()).collect();
        let mut b = vec![0.0; 100];
        tri_apply(&d, &o, &x, &mut b);
        let (pd, po) = laplace_1d(100, 0.5);
        let precond = |r: &[f64], z: &mut [f64]| z.copy_from_slice(&thomas_solve(&pd, &po, r).unwrap());
        let (y, out) = minres(|v: &[f64], w: &mut [f64]| tri_apply(&d, &o, v, w), precond, &b, 1e-13, 500);
        assert!(out.converged, "{out:?}");
        for i in 0..100 {
            assert!((y[i] - x[i]).abs() < 1e-8, "{i}: {} vs {}", y[i], x[i]);
        }
    }
}
