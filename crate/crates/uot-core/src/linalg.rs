//! Small dense linear-algebra kernels for the desk-scale solvers: a Cholesky
//! factorization for the regularized normal equations and a one-sided Jacobi
//! thin SVD for singular value thresholding.

use ndarray::Array2;

use crate::error::{CoreError, Result};
use crate::{cast, Scalar};

/// Cholesky factor (lower triangular) of a symmetric positive definite
/// matrix. Fails if a pivot drops below a tiny threshold.
pub fn cholesky<T: Scalar>(a: &Array2<T>) -> Result<Array2<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(CoreError::ShapeMismatch(format!(
            "cholesky needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let mut l = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if s <= T::epsilon() {
                    return Err(CoreError::NumericalFailure(format!(
                        "cholesky pivot {i} is not positive ({s})"
                    )));
                }
                l[(i, j)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Solves `L L^T x = b` given the lower Cholesky factor.
pub fn cholesky_solve<T: Scalar>(l: &Array2<T>, b: &[T]) -> Vec<T> {
    let n = l.nrows();
    debug_assert_eq!(b.len(), n);
    let mut x = b.to_vec();
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l[(i, k)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Thin singular value decomposition `X = U diag(sigma) V^T` with
/// `U: n x r`, `V^T: r x m`, `r = min(n, m)`, singular values descending.
pub struct ThinSvd<T> {
    pub u: Array2<T>,
    pub sigma: Vec<T>,
    pub vt: Array2<T>,
}

/// One-sided Jacobi SVD. Robust for the small, possibly rank-deficient
/// matrices this crate works with; columns of zero norm yield zero singular
/// values with zeroed singular vectors.
pub fn thin_svd<T: Scalar>(x: &Array2<T>) -> Result<ThinSvd<T>> {
    let (n, m) = x.dim();
    if n >= m {
        jacobi_svd(x)
    } else {
        let t = jacobi_svd(&x.t().to_owned())?;
        // X^T = U S V^T  =>  X = V S U^T
        Ok(ThinSvd {
            u: t.vt.t().to_owned(),
            sigma: t.sigma,
            vt: t.u.t().to_owned(),
        })
    }
}

fn jacobi_svd<T: Scalar>(x: &Array2<T>) -> Result<ThinSvd<T>> {
    let (n, m) = x.dim();
    debug_assert!(n >= m);
    let mut b = x.to_owned();
    let mut v: Array2<T> = Array2::eye(m);
    let tol = T::epsilon() * cast(64.0);
    let max_sweeps = 60;

    let mut converged = false;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..m {
            for q in p + 1..m {
                let mut alpha = T::zero();
                let mut beta = T::zero();
                let mut gamma = T::zero();
                for i in 0..n {
                    let bp = b[(i, p)];
                    let bq = b[(i, q)];
                    alpha += bp * bp;
                    beta += bq * bq;
                    gamma += bp * bq;
                }
                if gamma.abs() <= tol * (alpha * beta).sqrt() || gamma == T::zero() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (cast::<T>(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for i in 0..n {
                    let bp = b[(i, p)];
                    let bq = b[(i, q)];
                    b[(i, p)] = c * bp - s * bq;
                    b[(i, q)] = s * bp + c * bq;
                }
                for i in 0..m {
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(CoreError::NumericalFailure(
            "jacobi svd did not converge".into(),
        ));
    }

    let mut order: Vec<usize> = (0..m).collect();
    let norms: Vec<T> = (0..m)
        .map(|c| (0..n).map(|i| b[(i, c)] * b[(i, c)]).sum::<T>().sqrt())
        .collect();
    order.sort_by(|&a, &c| norms[c].partial_cmp(&norms[a]).unwrap());

    let mut u = Array2::zeros((n, m));
    let mut vt = Array2::zeros((m, m));
    let mut sigma = vec![T::zero(); m];
    let tiny = T::epsilon() * cast::<T>(n as f64);
    for (out_c, &c) in order.iter().enumerate() {
        sigma[out_c] = norms[c];
        if norms[c] > tiny {
            for i in 0..n {
                u[(i, out_c)] = b[(i, c)] / norms[c];
            }
        }
        for i in 0..m {
            vt[(out_c, i)] = v[(i, c)];
        }
    }
    Ok(ThinSvd { u, sigma, vt })
}
