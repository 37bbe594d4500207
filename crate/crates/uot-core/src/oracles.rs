//! Independent ground-truth calculators for small transport instances:
//! the closed-form 1-D balanced cost, the analytic two-delta unbalanced
//! cost, and an exhaustive LP vertex enumerator for tiny 1-D unbalanced
//! problems. These are test oracles, deliberately implemented without any
//! of the iterative solver machinery.

use crate::error::{CoreError, Result};
use crate::{cast, Scalar};

/// Exact balanced 1-D transport cost `sum_i |cumsum(q - p)_i|`.
///
/// On a 1-D grid the divergence constraint determines the flux uniquely,
/// so the cumulative-sum formula is exact.
pub fn w1_1d<T: Scalar>(p: &[T], q: &[T]) -> Result<T> {
    if p.len() != q.len() {
        return Err(CoreError::ShapeMismatch(format!(
            "w1_1d: lengths {} vs {}",
            p.len(),
            q.len()
        )));
    }
    if p.iter().chain(q.iter()).any(|&v| v < T::zero()) {
        return Err(CoreError::InvalidParam("w1_1d: negative entry".into()));
    }
    let sum_p: T = p.iter().copied().sum();
    let sum_q: T = q.iter().copied().sum();
    if (sum_p - sum_q).abs() > cast::<T>(1e-12) * (T::one() + sum_p) {
        return Err(CoreError::Unbalanced {
            sum_p: sum_p.to_f64().unwrap_or(f64::NAN),
            sum_q: sum_q.to_f64().unwrap_or(f64::NAN),
        });
    }
    let mut acc = T::zero();
    let mut cost = T::zero();
    for k in 0..p.len() {
        acc += q[k] - p[k];
        cost += acc.abs();
    }
    Ok(cost)
}

/// Two point masses on one grid row, an integer number of cells apart.
#[derive(Clone, Copy, Debug)]
pub struct TwoDeltaCase<T> {
    pub mass_p: T,
    pub mass_q: T,
    /// Axis-aligned separation in grid cells.
    pub distance: T,
    pub mu: T,
}

impl<T: Scalar> TwoDeltaCase<T> {
    pub fn new(mass_p: T, mass_q: T, distance: T, mu: T) -> Result<Self> {
        if mass_p < T::zero() || mass_q < T::zero() || distance < T::zero() || mu <= T::zero() {
            return Err(CoreError::InvalidParam(
                "two-delta case needs nonnegative masses/distance and mu > 0".into(),
            ));
        }
        Ok(Self {
            mass_p,
            mass_q,
            distance,
            mu,
        })
    }
}

/// Analytic unbalanced cost of a two-delta instance (`p_norm = 1`):
/// transport the common mass if the distance beats destroy-and-create,
/// and pay `mu` per unit of surplus either way.
pub fn uot_two_delta<T: Scalar>(case: &TwoDeltaCase<T>) -> T {
    let common = case.mass_p.min(case.mass_q);
    let surplus = (case.mass_p - case.mass_q).abs();
    common * case.distance.min(cast::<T>(2.0) * case.mu) + case.mu * surplus
}

/// Exact optimum of the 1-D unbalanced problem
/// `min |M|_1 + mu |r|_1  s.t.  M_i - M_{i-1} - r_i = q_i - p_i`
/// by enumerating all basic feasible solutions of the standard-form LP.
///
/// Signed variables are split into nonnegative pairs, giving `4n - 2`
/// columns and `n` rows; every choice of `n` basic columns is solved and
/// checked. Degenerate bases are skipped; with all-positive costs the
/// optimum is still attained at some enumerated feasible basis.
pub fn uot_1d_lp<T: Scalar>(p: &[T], q: &[T], mu: T) -> Result<T> {
    let n = p.len();
    if q.len() != n {
        return Err(CoreError::ShapeMismatch(format!(
            "uot_1d_lp: lengths {} vs {}",
            n,
            q.len()
        )));
    }
    if n == 0 || n > 6 {
        return Err(CoreError::InvalidParam(format!(
            "uot_1d_lp supports 1 <= n <= 6, got {n}"
        )));
    }
    if mu <= T::zero() {
        return Err(CoreError::InvalidParam("uot_1d_lp: mu must be > 0".into()));
    }
    if p.iter().chain(q.iter()).any(|&v| v < T::zero()) {
        return Err(CoreError::InvalidParam("uot_1d_lp: negative entry".into()));
    }

    // Columns: m+ (n-1), m- (n-1), r+ (n), r- (n). Row i carries
    // +m_i - m_{i-1} - r_i = q_i - p_i; edge e joins pixels e and e+1.
    let ne = n - 1;
    let ncols = 4 * n - 2;
    let mut cols = vec![vec![0.0f64; n]; ncols];
    let mut costs = vec![0.0f64; ncols];
    let mu_f = mu.to_f64().unwrap();
    for e in 0..ne {
        cols[e][e] = 1.0;
        cols[e][e + 1] = -1.0;
        costs[e] = 1.0;
        cols[ne + e][e] = -1.0;
        cols[ne + e][e + 1] = 1.0;
        costs[ne + e] = 1.0;
    }
    for i in 0..n {
        cols[2 * ne + i][i] = -1.0;
        costs[2 * ne + i] = mu_f;
        cols[2 * ne + n + i][i] = 1.0;
        costs[2 * ne + n + i] = mu_f;
    }
    let b: Vec<f64> = (0..n)
        .map(|i| (q[i] - p[i]).to_f64().unwrap())
        .collect();

    let mut best = f64::INFINITY;
    let mut basis: Vec<usize> = (0..n).collect();
    loop {
        if let Some(x) = solve_basis(&cols, &b, &basis) {
            if x.iter().all(|&v| v >= -1e-9) {
                let obj: f64 = basis
                    .iter()
                    .zip(&x)
                    .map(|(&c, &v)| costs[c] * v.max(0.0))
                    .sum();
                if obj < best {
                    best = obj;
                }
            }
        }
        // advance to the next n-combination of 0..ncols; stop when exhausted
        let mut i = n;
        let mut advanced = false;
        while i > 0 {
            i -= 1;
            if basis[i] < i + ncols - n {
                basis[i] += 1;
                for k in i + 1..n {
                    basis[k] = basis[k - 1] + 1;
                }
                advanced = true;
                break;
            }
        }
        if !advanced {
            break;
        }
    }
    if !best.is_finite() {
        return Err(CoreError::NumericalFailure(
            "uot_1d_lp: no feasible basis found".into(),
        ));
    }
    Ok(cast(best))
}

/// Solves the square system formed by the chosen basis columns; `None` if
/// the basis is singular (within pivot tolerance).
fn solve_basis(cols: &[Vec<f64>], b: &[f64], basis: &[usize]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut a = vec![vec![0.0f64; n + 1]; n];
    for (j, &c) in basis.iter().enumerate() {
        for i in 0..n {
            a[i][j] = cols[c][i];
        }
    }
    for i in 0..n {
        a[i][n] = b[i];
    }
    for col in 0..n {
        let mut piv = col;
        for row in col + 1..n {
            if a[row][col].abs() > a[piv][col].abs() {
                piv = row;
            }
        }
        if a[piv][col].abs() < 1e-9 {
            return None;
        }
        a.swap(col, piv);
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..=n {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
}
