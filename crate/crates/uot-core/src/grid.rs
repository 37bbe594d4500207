//! Grid geometry, the discrete divergence operator and its adjoint, and the
//! elementwise proximal primitives used by the transport solvers.
//!
//! Pixels of an `n_x x n_y` grid are stored column-major: the pixel at
//! 1-based coordinates `(i, j)` lives at linear index `(j-1)*n_x + (i-1)`.
//! Flux planes carry a zero-flux boundary: the x-plane is pinned to zero on
//! its last row (`i = n_x`) and the y-plane on its last column (`j = n_y`),
//! so no mass leaves the grid and divergence always sums to zero.

use crate::error::{CoreError, Result};
use crate::{cast, Scalar};

/// Gershgorin bound on the largest eigenvalue of the 5-point grid Laplacian
/// (`4 * D` with `D = 2` spatial dimensions).
pub const LAPLACIAN_LAMBDA_MAX_BOUND: f64 = 8.0;

/// A 2-D pixel grid with column-major linear indexing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Grid2 {
    n_x: usize,
    n_y: usize,
}

impl Grid2 {
    pub fn new(n_x: usize, n_y: usize) -> Result<Self> {
        if n_x == 0 || n_y == 0 {
            return Err(CoreError::InvalidParam(format!(
                "grid dimensions must be >= 1, got {n_x}x{n_y}"
            )));
        }
        Ok(Self { n_x, n_y })
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    /// Total pixel count `N = n_x * n_y`.
    pub fn len(&self) -> usize {
        self.n_x * self.n_y
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Linear index of 0-based pixel coordinates `(i, j)`.
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n_x && j < self.n_y);
        j * self.n_x + i
    }

    /// 0-based pixel coordinates of linear index `k`.
    #[inline]
    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.n_x, k / self.n_x)
    }
}

fn check_finite<T: Scalar>(values: &[T], what: &str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::InvalidParam(format!(
            "{what} contains a non-finite entry"
        )));
    }
    Ok(())
}

fn check_len<T: Scalar>(grid: Grid2, values: &[T], what: &str) -> Result<()> {
    if values.len() != grid.len() {
        return Err(CoreError::ShapeMismatch(format!(
            "{what}: expected {} values for a {}x{} grid, got {}",
            grid.len(),
            grid.n_x(),
            grid.n_y(),
            values.len()
        )));
    }
    Ok(())
}

/// A scalar intensity image stored as a length-`N` vector.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityField<T> {
    grid: Grid2,
    values: Vec<T>,
}

impl<T: Scalar> DensityField<T> {
    pub fn zeros(grid: Grid2) -> Self {
        Self {
            grid,
            values: vec![T::zero(); grid.len()],
        }
    }

    pub fn from_vec(grid: Grid2, values: Vec<T>) -> Result<Self> {
        check_len(grid, &values, "density field")?;
        check_finite(&values, "density field")?;
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> Grid2 {
        self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn sum(&self) -> T {
        self.values.iter().copied().sum()
    }

    pub fn min_value(&self) -> T {
        self.values
            .iter()
            .copied()
            .fold(T::infinity(), |acc, v| acc.min(v))
    }
}

/// The Beckmann transport variable: per-pixel x- and y-flux planes with a
/// zero-flux grid boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct FluxField<T> {
    grid: Grid2,
    mx: Vec<T>,
    my: Vec<T>,
}

impl<T: Scalar> FluxField<T> {
    pub fn zeros(grid: Grid2) -> Self {
        Self {
            grid,
            mx: vec![T::zero(); grid.len()],
            my: vec![T::zero(); grid.len()],
        }
    }

    pub fn from_planes(grid: Grid2, mx: Vec<T>, my: Vec<T>) -> Result<Self> {
        check_len(grid, &mx, "flux x-plane")?;
        check_len(grid, &my, "flux y-plane")?;
        check_finite(&mx, "flux x-plane")?;
        check_finite(&my, "flux y-plane")?;
        let field = Self { grid, mx, my };
        for j in 0..grid.n_y() {
            if field.mx[grid.idx(grid.n_x() - 1, j)] != T::zero() {
                return Err(CoreError::InvalidParam(
                    "flux x-plane must be zero on its last row".into(),
                ));
            }
        }
        for i in 0..grid.n_x() {
            if field.my[grid.idx(i, grid.n_y() - 1)] != T::zero() {
                return Err(CoreError::InvalidParam(
                    "flux y-plane must be zero on its last column".into(),
                ));
            }
        }
        Ok(field)
    }

    pub fn grid(&self) -> Grid2 {
        self.grid
    }

    pub fn mx(&self) -> &[T] {
        &self.mx
    }

    pub fn my(&self) -> &[T] {
        &self.my
    }

    pub fn planes_mut(&mut self) -> (&mut [T], &mut [T]) {
        (&mut self.mx, &mut self.my)
    }

    /// Re-pins the boundary entries. The adjoint never writes there, so this
    /// is a no-op in exact arithmetic; it is enforced after shrink updates.
    pub fn enforce_zero_flux_boundary(&mut self) {
        let g = self.grid;
        for j in 0..g.n_y() {
            self.mx[g.idx(g.n_x() - 1, j)] = T::zero();
        }
        for i in 0..g.n_x() {
            self.my[g.idx(i, g.n_y() - 1)] = T::zero();
        }
    }

    /// The `l_{2,1}` transport cost: sum over pixels of the Euclidean norm
    /// of the per-pixel flux pair.
    pub fn norm_21(&self) -> T {
        self.mx
            .iter()
            .zip(&self.my)
            .map(|(&x, &y)| (x * x + y * y).sqrt())
            .sum()
    }
}

/// Lagrange-multiplier field; unconstrained sign.
#[derive(Clone, Debug, PartialEq)]
pub struct DualField<T> {
    grid: Grid2,
    values: Vec<T>,
}

impl<T: Scalar> DualField<T> {
    pub fn zeros(grid: Grid2) -> Self {
        Self {
            grid,
            values: vec![T::zero(); grid.len()],
        }
    }

    pub fn from_vec(grid: Grid2, values: Vec<T>) -> Result<Self> {
        check_len(grid, &values, "dual field")?;
        check_finite(&values, "dual field")?;
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> Grid2 {
        self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }
}

/// Discrete divergence: `out[i,j] = (mx[i,j] - mx[i-1,j]) + (my[i,j] - my[i,j-1])`
/// with out-of-range flux read as zero.
pub fn divergence<T: Scalar>(m: &FluxField<T>) -> Vec<T> {
    let mut out = vec![T::zero(); m.grid().len()];
    divergence_into(m, &mut out);
    out
}

pub fn divergence_into<T: Scalar>(m: &FluxField<T>, out: &mut [T]) {
    let g = m.grid();
    let (nx, ny) = (g.n_x(), g.n_y());
    debug_assert_eq!(out.len(), g.len());
    let (mx, my) = (m.mx(), m.my());
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            let mut d = mx[k];
            if i > 0 {
                d -= mx[k - 1];
            }
            d += my[k];
            if j > 0 {
                d -= my[k - nx];
            }
            out[k] = d;
        }
    }
}

/// Adjoint of [`divergence`]: the x-plane holds `a[i,j] - a[i+1,j]` (zero on
/// the last row), the y-plane `a[i,j] - a[i,j+1]` (zero on the last column).
pub fn divergence_adjoint<T: Scalar>(a: &DualField<T>) -> FluxField<T> {
    let mut out = FluxField::zeros(a.grid());
    let grid = a.grid();
    let (mx, my) = out.planes_mut();
    divergence_adjoint_into(grid, a.values(), mx, my);
    out
}

pub fn divergence_adjoint_into<T: Scalar>(grid: Grid2, a: &[T], mx: &mut [T], my: &mut [T]) {
    let (nx, ny) = (grid.n_x(), grid.n_y());
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            mx[k] = if i + 1 < nx { a[k] - a[k + 1] } else { T::zero() };
            my[k] = if j + 1 < ny { a[k] - a[k + nx] } else { T::zero() };
        }
    }
}

/// Vector-soft shrinkage applied to each per-pixel flux pair:
/// `pair <- max(|pair| - sigma, 0) * pair / |pair|`, with zero pairs mapped
/// to zero.
pub fn shrink_l2_rows<T: Scalar>(m: &FluxField<T>, sigma: T) -> FluxField<T> {
    let mut out = m.clone();
    shrink_l2_rows_in_place(&mut out, sigma);
    out
}

pub fn shrink_l2_rows_in_place<T: Scalar>(m: &mut FluxField<T>, sigma: T) {
    {
        let (mx, my) = m.planes_mut();
        for k in 0..mx.len() {
            let n = (mx[k] * mx[k] + my[k] * my[k]).sqrt();
            if n > sigma {
                let f = (n - sigma) / n;
                mx[k] *= f;
                my[k] *= f;
            } else {
                mx[k] = T::zero();
                my[k] = T::zero();
            }
        }
    }
    m.enforce_zero_flux_boundary();
}

/// Elementwise soft threshold `sign(v) * max(|v| - sigma, 0)`.
pub fn shrink_l1<T: Scalar>(v: &[T], sigma: T) -> Vec<T> {
    let mut out = v.to_vec();
    shrink_l1_in_place(&mut out, sigma);
    out
}

pub fn shrink_l1_in_place<T: Scalar>(v: &mut [T], sigma: T) {
    for x in v.iter_mut() {
        *x = if *x > sigma {
            *x - sigma
        } else if *x < -sigma {
            *x + sigma
        } else {
            T::zero()
        };
    }
}

/// Projection onto the nonnegative orthant.
pub fn project_nonneg<T: Scalar>(v: &[T]) -> Vec<T> {
    v.iter().map(|&x| x.max(T::zero())).collect()
}

pub fn project_nonneg_in_place<T: Scalar>(v: &mut [T]) {
    for x in v.iter_mut() {
        *x = x.max(T::zero());
    }
}

/// How to obtain the largest eigenvalue of the discrete Laplacian
/// `div . div*` used in the step-size condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LambdaMaxMode {
    /// The analytic bound `4 * D = 8`; free and always safe.
    Bound,
    /// Power iteration on `div . div*` to relative tolerance `1e-6`.
    PowerIteration,
}

pub fn laplacian_lambda_max<T: Scalar>(grid: Grid2, mode: LambdaMaxMode) -> Result<T> {
    match mode {
        LambdaMaxMode::Bound => Ok(cast(LAPLACIAN_LAMBDA_MAX_BOUND)),
        LambdaMaxMode::PowerIteration => power_iteration(grid, cast(1e-6), 100_000),
    }
}

/// Power iteration with an explicit tolerance and iteration cap.
pub fn laplacian_lambda_max_power<T: Scalar>(
    grid: Grid2,
    rel_tol: T,
    max_iters: usize,
) -> Result<T> {
    power_iteration(grid, rel_tol, max_iters)
}

fn power_iteration<T: Scalar>(grid: Grid2, rel_tol: T, max_iters: usize) -> Result<T> {
    let n = grid.len();
    // Deterministic pseudo-random start vector (splitmix64).
    let mut seed = 0x9e3779b97f4a7c15u64;
    let mut v: Vec<T> = (0..n)
        .map(|_| {
            seed = seed.wrapping_add(0x9e3779b97f4a7c15);
            let mut z = seed;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
            z ^= z >> 31;
            cast::<T>((z >> 11) as f64 / (1u64 << 53) as f64 - 0.5)
        })
        .collect();
    normalize(&mut v);

    let mut flux = FluxField::zeros(grid);
    let mut w = vec![T::zero(); n];
    let mut lambda = T::zero();
    for _ in 0..max_iters {
        {
            let (mx, my) = flux.planes_mut();
            divergence_adjoint_into(grid, &v, mx, my);
        }
        divergence_into(&flux, &mut w);
        lambda = dot(&v, &w);
        // ||Lv - lambda v|| <= tol * lambda certifies the estimate.
        let mut resid = T::zero();
        for k in 0..n {
            let d = w[k] - lambda * v[k];
            resid += d * d;
        }
        let resid = resid.sqrt();
        if resid <= rel_tol * lambda.max(T::epsilon()) {
            return Ok(lambda.max(T::zero()));
        }
        let nw = norm(&w);
        if nw <= T::epsilon() {
            // Operator annihilates the iterate (1x1 grid): spectrum is {0}.
            return Ok(T::zero());
        }
        for k in 0..n {
            v[k] = w[k] / nw;
        }
    }
    Err(CoreError::NumericalFailure(format!(
        "power iteration did not converge within {max_iters} iterations (last estimate {lambda})"
    )))
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub(crate) fn norm<T: Scalar>(v: &[T]) -> T {
    dot(v, v).sqrt()
}

fn normalize<T: Scalar>(v: &mut [T]) {
    let n = norm(v);
    if n > T::zero() {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
}
