//! Restarted, right-preconditioned GMRES on flat `f64` vectors.

use crate::grid::dot;

#[derive(Debug, Clone, Copy)]
pub struct GmresOptions {
    /// Stop when `||b - A x|| <= rel_tol * ||b||`.
    pub rel_tol: f64,
    pub max_iter: usize,
    pub restart: usize,
}

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final unpreconditioned residual relative to `||b||`.
    pub rel_residual: f64,
    pub converged: bool,
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Solves `A x = b` from `x = 0`, applying `A` as `apply(v, out)` and the
/// right preconditioner as `precond(v) -> P^{-1} v`.
pub fn gmres(
    b: &[f64],
    mut apply: impl FnMut(&[f64], &mut [f64]),
    mut precond: impl FnMut(&[f64]) -> Vec<f64>,
    opts: GmresOptions,
) -> GmresOutcome {
    let len = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; len];
    if bnorm == 0.0 {
        return GmresOutcome {
            x,
            iterations: 0,
            rel_residual: 0.0,
            converged: true,
        };
    }
    let restart = opts.restart.max(1);
    let mut total = 0;
    let mut r = b.to_vec();
    let mut av = vec![0.0; len];
    let mut rel = 1.0;

    while total < opts.max_iter {
        let beta = norm(&r);
        rel = beta / bnorm;
        if rel <= opts.rel_tol {
            return GmresOutcome {
                x,
                iterations: total,
                rel_residual: rel,
                converged: true,
            };
        }
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(restart + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        let mut hess: Vec<Vec<f64>> = Vec::with_capacity(restart);
        let (mut cs, mut sn): (Vec<f64>, Vec<f64>) =
            (Vec::with_capacity(restart), Vec::with_capacity(restart));
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(restart);
        let mut inner = 0;

        while inner < restart && total < opts.max_iter {
            let z = precond(&basis[inner]);
            apply(&z, &mut av);
            zs.push(z);
            let mut w = av.clone();
            let mut col = vec![0.0; inner + 2];
            for (k, v) in basis.iter().enumerate() {
                let hk = dot(&w, v);
                col[k] = hk;
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= hk * vi;
                }
            }
            let wn = norm(&w);
            col[inner + 1] = wn;
            for k in 0..inner {
                let t = cs[k] * col[k] + sn[k] * col[k + 1];
                col[k + 1] = -sn[k] * col[k] + cs[k] * col[k + 1];
                col[k] = t;
            }
            let denom = col[inner].hypot(col[inner + 1]);
            let (c, s) = if denom == 0.0 {
                (1.0, 0.0)
            } else {
                (col[inner] / denom, col[inner + 1] / denom)
            };
            col[inner] = denom;
            col[inner + 1] = 0.0;
            cs.push(c);
            sn.push(s);
            g[inner + 1] = -s * g[inner];
            g[inner] *= c;
            hess.push(col);
            inner += 1;
            total += 1;
            rel = g[inner].abs() / bnorm;
            if rel <= opts.rel_tol || wn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }

        // back substitution on the triangular factor
        let mut y = vec![0.0; inner];
        for i in (0..inner).rev() {
            let mut acc = g[i];
            for k in i + 1..inner {
                acc -= hess[k][i] * y[k];
            }
            y[i] = if hess[i][i] != 0.0 {
                acc / hess[i][i]
            } else {
                0.0
            };
        }
        for (yk, z) in y.iter().zip(&zs) {
            for (xi, zi) in x.iter_mut().zip(z) {
                *xi += yk * zi;
            }
        }
        apply(&x, &mut av);
        for ((ri, bi), ai) in r.iter_mut().zip(b).zip(&av) {
            *ri = bi - ai;
        }
        rel = norm(&r) / bnorm;
        if rel <= opts.rel_tol {
            return GmresOutcome {
                x,
                iterations: total,
                rel_residual: rel,
                converged: true,
            };
        }
    }
    GmresOutcome {
        x,
        iterations: total,
        rel_residual: rel,
        converged: rel <= opts.rel_tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(v: &[f64], out: &mut [f64]) {
        let n = v.len();
        for i in 0..n {
            let left = if i > 0 { v[i - 1] } else { 0.0 };
            let right = if i + 1 < n { v[i + 1] } else { 0.0 };
            // non-symmetric, diagonally dominant
            out[i] = 4.0 * v[i] - 1.5 * left - 0.5 * right;
        }
    }

    #[test]
    fn solves_nonsymmetric_system() {
        let n = 40;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut b = vec![0.0; n];
        tridiag(&xs, &mut b);
        let out = gmres(
            &b,
            tridiag,
            |v| v.to_vec(),
            GmresOptions {
                rel_tol: 1e-12,
                max_iter: 200,
                restart: 10,
            },
        );
        assert!(out.converged);
        for (a, e) in out.x.iter().zip(&xs) {
            assert!((a - e).abs() < 1e-10);
        }
    }

    #[test]
    fn exact_preconditioner_converges_in_one_iteration() {
        let b = vec![1.0, -2.0, 3.0];
        let out = gmres(
            &b,
            |v, o| o.iter_mut().zip(v).for_each(|(o, v)| *o = 2.0 * v),
            |v| v.iter().map(|x| 0.5 * x).collect(),
            GmresOptions {
                rel_tol: 1e-14,
                max_iter: 10,
                restart: 5,
            },
        );
        assert_eq!(out.iterations, 1);
        assert!((out.x[1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_rhs() {
        let out = gmres(
            &[0.0; 4],
            |v, o| o.copy_from_slice(v),
            |v| v.to_vec(),
            GmresOptions {
                rel_tol: 1e-8,
                max_iter: 5,
                restart: 5,
            },
        );
        assert!(out.converged && out.x.iter().all(|&v| v == 0.0));
    }
}
