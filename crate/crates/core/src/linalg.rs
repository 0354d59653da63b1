//! Dense eigensolvers, vector helpers and the Lanczos approximation of
//! `exp(-i dt A) v` for Hermitian operators given only through a matvec.

use faer::{Mat, MatRef, Side};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Eigenvalues in ascending order together with the matching eigenvectors
/// stored column-wise.
pub struct EigenSystem<T> {
    pub values: Vec<f64>,
    pub vectors: Mat<T>,
}

pub fn symmetric_eigen(m: MatRef<'_, f64>) -> Result<EigenSystem<f64>> {
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Domain(format!("symmetric eigensolver failed: {e:?}")))?;
    let values: Vec<f64> = (0..m.nrows()).map(|i| evd.S()[i]).collect();
    Ok(EigenSystem {
        values,
        vectors: evd.U().to_owned(),
    })
}

pub fn hermitian_eigen(m: MatRef<'_, C64>) -> Result<EigenSystem<C64>> {
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Domain(format!("hermitian eigensolver failed: {e:?}")))?;
    let values: Vec<f64> = (0..m.nrows()).map(|i| evd.S()[i].re).collect();
    Ok(EigenSystem {
        values,
        vectors: evd.U().to_owned(),
    })
}

pub fn norm_sqr(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

pub fn norm(x: &[C64]) -> f64 {
    norm_sqr(x).sqrt()
}

/// `<x|y>` with the conjugate on the left argument.
pub fn dot(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

/// `y += a * x`
pub fn axpy(a: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// `y = m x` for a dense complex matrix.
pub fn dense_apply(m: MatRef<'_, C64>, x: &[C64], y: &mut [C64]) {
    y.iter_mut().for_each(|v| *v = ZERO);
    for (j, &xj) in x.iter().enumerate() {
        if xj == ZERO {
            continue;
        }
        let col = m.col(j);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += col[i] * xj;
        }
    }
}

/// Mean and variance of an observable `A` in state `x`, from `<A>` and `<A^2> = |A x|^2`.
/// `apply` must compute `y = A x` for Hermitian `A`.
pub fn operator_moments(x: &[C64], apply: impl FnOnce(&[C64], &mut [C64])) -> (f64, f64) {
    let mut ax = vec![ZERO; x.len()];
    apply(x, &mut ax);
    let n2 = norm_sqr(x);
    let mean = dot(x, &ax).re / n2;
    let second = norm_sqr(&ax) / n2;
    (mean, (second - mean * mean).max(0.0))
}

#[derive(Clone, Copy, Debug)]
pub struct KrylovOptions {
    /// Bound on the a-posteriori error estimate of one exponential.
    pub tol: f64,
    pub max_dim: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_dim: 40,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct KrylovOutcome {
    pub dim: usize,
    pub error_estimate: f64,
}

/// Approximates `exp(-i dt A) v` in the Krylov space spanned by `v, Av, A^2 v, ...`.
///
/// Returns `None` when the estimate does not drop below `opts.tol` within
/// `opts.max_dim` vectors; the caller is expected to shorten `dt`.
pub fn expm_lanczos<F>(
    mut apply: F,
    v: &[C64],
    dt: f64,
    opts: KrylovOptions,
) -> Option<(Vec<C64>, KrylovOutcome)>
where
    F: FnMut(&[C64], &mut [C64]),
{
    let n = v.len();
    let beta0 = norm(v);
    if beta0 == 0.0 {
        return Some((
            vec![ZERO; n],
            KrylovOutcome {
                dim: 0,
                error_estimate: 0.0,
            },
        ));
    }
    let max_dim = opts.max_dim.min(n).max(1);
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(max_dim);
    basis.push(v.iter().map(|z| z / beta0).collect());
    let mut alpha: Vec<f64> = Vec::with_capacity(max_dim);
    let mut beta: Vec<f64> = Vec::with_capacity(max_dim);
    let mut w = vec![ZERO; n];

    for j in 0..max_dim {
        apply(&basis[j], &mut w);
        let a = dot(&basis[j], &w).re;
        axpy(C64::new(-a, 0.0), &basis[j], &mut w);
        if j > 0 {
            axpy(C64::new(-beta[j - 1], 0.0), &basis[j - 1], &mut w);
        }
        // full reorthogonalization, the basis never exceeds max_dim vectors
        for q in &basis {
            let c = dot(q, &w);
            axpy(-c, q, &mut w);
        }
        alpha.push(a);
        let b = norm(&w);
        let m = j + 1;

        let breakdown = b <= 1e-13 * (a.abs() + 1.0);
        let y = tridiagonal_expm_e1(&alpha, &beta, dt);
        let err = if breakdown { 0.0 } else { b * y[m - 1].norm() };
        if breakdown || err < opts.tol || m == n {
            let mut out = vec![ZERO; n];
            for (q, &yk) in basis.iter().zip(&y) {
                axpy(yk * beta0, q, &mut out);
            }
            return Some((
                out,
                KrylovOutcome {
                    dim: m,
                    error_estimate: err,
                },
            ));
        }
        if m == max_dim {
            return None;
        }
        beta.push(b);
        basis.push(w.iter().map(|z| z / b).collect());
    }
    None
}

/// `exp(-i dt T) e_1` for the symmetric tridiagonal `T` with diagonal `alpha`
/// and off-diagonal `beta` (`beta.len() >= alpha.len() - 1`).
fn tridiagonal_expm_e1(alpha: &[f64], beta: &[f64], dt: f64) -> Vec<C64> {
    let m = alpha.len();
    let t = Mat::<f64>::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let evd = t
        .self_adjoint_eigen(Side::Lower)
        .expect("small tridiagonal eigenproblem");
    let u = evd.U();
    let s = evd.S();
    let mut y = vec![ZERO; m];
    for k in 0..m {
        let phase = C64::from_polar(1.0, -dt * s[k]) * u[(0, k)];
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += phase * u[(i, k)];
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hermitian_test_matrix(n: usize) -> Mat<C64> {
        Mat::from_fn(n, n, |i, j| {
            let (a, b) = (i.min(j) as f64, i.max(j) as f64);
            let re = ((a * 1.3 + b * 0.7).sin()) + if i == j { i as f64 * 0.5 } else { 0.0 };
            let im = if i == j {
                0.0
            } else {
                let v = (a * 0.9 - b * 0.4).cos() * 0.3;
                if i < j {
                    v
                } else {
                    -v
                }
            };
            C64::new(re, im)
        })
    }

    #[test]
    fn lanczos_matches_spectral_exponential() {
        let n = 60;
        let h = hermitian_test_matrix(n);
        let eig = hermitian_eigen(h.as_ref()).unwrap();
        let v: Vec<C64> = (0..n)
            .map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let dt = 0.3;
        // exact route through the eigenbasis
        let u = &eig.vectors;
        let mut exact = vec![ZERO; n];
        for k in 0..n {
            let c: C64 = (0..n).map(|i| u[(i, k)].conj() * v[i]).sum();
            let c = c * C64::from_polar(1.0, -dt * eig.values[k]);
            for i in 0..n {
                exact[i] += u[(i, k)] * c;
            }
        }
        let (approx, outcome) = expm_lanczos(
            |x, y| dense_apply(h.as_ref(), x, y),
            &v,
            dt,
            KrylovOptions::default(),
        )
        .expect("converges");
        let diff: f64 = exact
            .iter()
            .zip(&approx)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(diff < 1e-10 * norm(&v), "diff {diff}, dim {}", outcome.dim);
        assert!((norm(&approx) - norm(&v)).abs() < 1e-12);
    }

    #[test]
    fn lanczos_reports_nonconvergence() {
        let n = 80;
        let h = hermitian_test_matrix(n);
        let v = vec![C64::new(1.0 / (n as f64).sqrt(), 0.0); n];
        let opts = KrylovOptions {
            tol: 1e-14,
            max_dim: 3,
        };
        assert!(expm_lanczos(|x, y| dense_apply(h.as_ref(), x, y), &v, 50.0, opts).is_none());
    }

    #[test]
    fn operator_moments_of_eigenvector_have_zero_variance() {
        let n = 20;
        let h = hermitian_test_matrix(n);
        let eig = hermitian_eigen(h.as_ref()).unwrap();
        let v: Vec<C64> = (0..n).map(|i| eig.vectors[(i, 7)]).collect();
        let (mean, var) = operator_moments(&v, |x, y| dense_apply(h.as_ref(), x, y));
        assert!((mean - eig.values[7]).abs() < 1e-10);
        assert!(var < 1e-10);
    }
}
