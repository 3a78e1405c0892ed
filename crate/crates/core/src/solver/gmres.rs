//! Restarted GMRES for complex nonsymmetric systems.
//!
//! Arnoldi with modified Gram-Schmidt and complex Givens rotations. No
//! preconditioner: the coupled-dipole operator is the identity minus a dense
//! perturbation, so its diagonal is already the identity.

use num_complex::Complex64;

use super::operator::LinearOperator;
use crate::ZERO;

#[derive(Debug, Clone, Copy)]
pub(crate) struct GmresOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub restart: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct GmresOutcome {
    pub x: Vec<Complex64>,
    pub iterations: usize,
    /// True relative residual `‖b - A x‖/‖b‖` of the returned iterate.
    pub residual: f64,
    pub converged: bool,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn residual(op: &dyn LinearOperator, b: &[Complex64], x: &[Complex64], scratch: &mut [Complex64]) -> Vec<Complex64> {
    op.apply(x, scratch);
    b.iter().zip(scratch.iter()).map(|(bi, ai)| bi - ai).collect()
}

/// Rotation `[c s; -s̄ c]` that zeroes `b` in the pair `(a, b)`.
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    let (na, nb) = (a.norm(), b.norm());
    if nb == 0.0 {
        return (1.0, ZERO);
    }
    if na == 0.0 {
        return (0.0, b.conj() / nb);
    }
    let denom = na.hypot(nb);
    (na / denom, (a / na) * b.conj() / denom)
}

pub(crate) fn gmres(op: &dyn LinearOperator, b: &[Complex64], opts: GmresOptions) -> GmresOutcome {
    let n = op.dim();
    assert_eq!(b.len(), n);
    let b_norm = norm(b);
    let mut x = vec![ZERO; n];
    if b_norm == 0.0 {
        return GmresOutcome { x, iterations: 0, residual: 0.0, converged: true };
    }
    let mut scratch = vec![ZERO; n];
    let mut iterations = 0;
    let mut best = (f64::INFINITY, x.clone());
    let m = opts.restart.max(1).min(n);

    loop {
        let r = residual(op, b, &x, &mut scratch);
        let beta = norm(&r);
        let rel = beta / b_norm;
        if rel < best.0 {
            best = (rel, x.clone());
        }
        if rel <= opts.tolerance || iterations >= opts.max_iterations {
            break;
        }

        let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|c| c / beta).collect());
        // Column j of the Hessenberg matrix, already rotated.
        let mut hess: Vec<Vec<Complex64>> = Vec::with_capacity(m);
        let mut rotations: Vec<(f64, Complex64)> = Vec::with_capacity(m);
        let mut g = vec![ZERO; m + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut steps = 0;

        for j in 0..m {
            if iterations >= opts.max_iterations {
                break;
            }
            iterations += 1;
            let mut w = vec![ZERO; n];
            op.apply(&basis[j], &mut w);
            let mut h = vec![ZERO; j + 2];
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(v, &w);
                h[i] = hij;
                w.iter_mut().zip(v).for_each(|(wk, vk)| *wk -= hij * vk);
            }
            let h_next = norm(&w);
            h[j + 1] = Complex64::new(h_next, 0.0);

            for (i, &(c, s)) in rotations.iter().enumerate() {
                let (a, bb) = (h[i], h[i + 1]);
                h[i] = a * c + s * bb;
                h[i + 1] = -s.conj() * a + bb * c;
            }
            let (c, s) = givens(h[j], h[j + 1]);
            h[j] = h[j] * c + s * h[j + 1];
            h[j + 1] = ZERO;
            rotations.push((c, s));
            let gj = g[j];
            g[j] = gj * c;
            g[j + 1] = -s.conj() * gj;

            hess.push(h);
            steps = j + 1;
            let estimate = g[j + 1].norm() / b_norm;
            if estimate <= opts.tolerance || h_next <= 1e-14 * beta {
                break;
            }
            basis.push(w.iter().map(|c| c / h_next).collect());
        }

        // Back substitution for the least-squares coefficients.
        let mut y = vec![ZERO; steps];
        for i in (0..steps).rev() {
            let mut acc = g[i];
            for l in i + 1..steps {
                acc -= hess[l][i] * y[l];
            }
            y[i] = acc / hess[i][i];
        }
        for (yi, v) in y.iter().zip(&basis) {
            x.iter_mut().zip(v).for_each(|(xk, vk)| *xk += yi * vk);
        }
        if steps == 0 {
            break;
        }
    }

    let r = residual(op, b, &x, &mut scratch);
    let rel = norm(&r) / b_norm;
    if rel < best.0 {
        best = (rel, x);
    }
    GmresOutcome { converged: best.0 <= opts.tolerance, residual: best.0, x: best.1, iterations }
}
