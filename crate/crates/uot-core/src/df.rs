//! Outer ADMM for single-frame and online dynamic filtering: least-squares
//! data fidelity, optional sparsity, and a dynamics regularizer on the
//! deviation from a propagated prior (unbalanced transport, balanced
//! transport, an l1-difference baseline, or none).

use std::time::{Duration, Instant};

use ndarray::Array2;

use crate::error::{CoreError, Result};
use crate::grid::DensityField;
use crate::linalg::{cholesky, cholesky_solve};
use crate::prox::{self, PNorm, ProxInputs, ProxState, ProxVariant, RunOpts, UotParams};
use crate::{cast, Scalar};

/// Linear measurement operator with an optional cached factorization of
/// `(Phi^T Phi + rho I)`, valid only for the `rho` it was built with.
#[derive(Clone, Debug)]
pub struct MeasurementOp<T> {
    rows: usize,
    cols: usize,
    repr: PhiRepr<T>,
    cache: Option<PhiFactor<T>>,
}

#[derive(Clone, Debug)]
enum PhiRepr<T> {
    Identity,
    Dense(Array2<T>),
}

/// Factorization of the regularized normal matrix for one `rho`.
#[derive(Clone, Debug)]
pub struct PhiFactor<T> {
    rho: T,
    kind: FactorKind<T>,
}

#[derive(Clone, Debug)]
enum FactorKind<T> {
    Identity,
    Chol(Array2<T>),
}

impl<T: Scalar> MeasurementOp<T> {
    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            repr: PhiRepr::Identity,
            cache: None,
        }
    }

    pub fn dense(mat: Array2<T>) -> Result<Self> {
        if mat.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::InvalidParam(
                "measurement matrix contains a non-finite entry".into(),
            ));
        }
        let (rows, cols) = mat.dim();
        Ok(Self {
            rows,
            cols,
            repr: PhiRepr::Dense(mat),
            cache: None,
        })
    }

    pub fn m_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.repr, PhiRepr::Identity)
    }

    pub fn apply(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.cols);
        match &self.repr {
            PhiRepr::Identity => v.to_vec(),
            PhiRepr::Dense(m) => (0..self.rows)
                .map(|i| (0..self.cols).map(|j| m[(i, j)] * v[j]).sum())
                .collect(),
        }
    }

    pub fn adjoint(&self, u: &[T]) -> Vec<T> {
        debug_assert_eq!(u.len(), self.rows);
        match &self.repr {
            PhiRepr::Identity => u.to_vec(),
            PhiRepr::Dense(m) => (0..self.cols)
                .map(|j| (0..self.rows).map(|i| m[(i, j)] * u[i]).sum())
                .collect(),
        }
    }

    /// Builds and caches the factorization for this `rho`, replacing any
    /// cache built for a different value.
    pub fn prepare(&mut self, rho: T) -> Result<()> {
        if let Some(f) = &self.cache {
            if f.rho == rho {
                return Ok(());
            }
        }
        self.cache = Some(self.build_factor(rho)?);
        Ok(())
    }

    /// Factorization for `rho`: the cached one when it matches, otherwise
    /// freshly computed.
    pub fn factor(&self, rho: T) -> Result<PhiFactor<T>> {
        if let Some(f) = &self.cache {
            if f.rho == rho {
                return Ok(f.clone());
            }
        }
        self.build_factor(rho)
    }

    fn build_factor(&self, rho: T) -> Result<PhiFactor<T>> {
        if rho <= T::zero() {
            return Err(CoreError::InvalidParam(format!(
                "rho must be positive, got {rho}"
            )));
        }
        let kind = match &self.repr {
            PhiRepr::Identity => FactorKind::Identity,
            PhiRepr::Dense(m) => {
                let mut gram = m.t().dot(m);
                for d in 0..self.cols {
                    gram[(d, d)] += rho;
                }
                FactorKind::Chol(cholesky(&gram)?)
            }
        };
        Ok(PhiFactor { rho, kind })
    }
}

impl<T: Scalar> PhiFactor<T> {
    /// Solves `(Phi^T Phi + rho I) x = rhs`.
    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        match &self.kind {
            FactorKind::Identity => {
                let d = T::one() + self.rho;
                rhs.iter().map(|&v| v / d).collect()
            }
            FactorKind::Chol(l) => cholesky_solve(l, rhs),
        }
    }
}

/// Dynamics regularizer used in the outer ADMM's transport split.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DfRegularizer {
    Uot,
    Bot,
    /// Soft-threshold prox on `s - s_prior` (the "L1" baseline).
    L1Diff,
    None,
}

#[derive(Clone, Debug)]
pub struct DfParams<T> {
    /// Dynamics weight; must be positive for the transport regularizers.
    pub kappa: T,
    /// Sparsity weight; zero disables the l1 term.
    pub lambda: T,
    pub mu: T,
    pub p_norm: PNorm,
    pub rho: T,
    /// ADMM stopping tolerance on both stacked residuals.
    pub eps: T,
    pub max_iters: usize,
    /// Inner prox iterations per outer step (early termination).
    pub inner_iters: usize,
    pub regularizer: DfRegularizer,
    /// Weight of the l1-difference baseline; exposed separately from
    /// `lambda` and `kappa`.
    pub l1_diff_weight: T,
}

impl<T: Scalar> DfParams<T> {
    pub fn new(regularizer: DfRegularizer) -> Self {
        Self {
            kappa: T::one(),
            lambda: T::zero(),
            mu: T::one(),
            p_norm: PNorm::One,
            rho: T::one(),
            eps: cast(1e-3),
            max_iters: 5000,
            inner_iters: 30,
            regularizer,
            l1_diff_weight: T::one(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let transport = matches!(self.regularizer, DfRegularizer::Uot | DfRegularizer::Bot);
        let ok = self.rho > T::zero()
            && self.eps > T::zero()
            && self.lambda >= T::zero()
            && self.mu >= T::zero()
            && self.l1_diff_weight >= T::zero()
            && self.max_iters > 0
            && self.inner_iters > 0
            && (!transport || self.kappa > T::zero());
        if !ok {
            return Err(CoreError::InvalidParam(
                "df params out of range (transport regularizers need kappa > 0)".into(),
            ));
        }
        Ok(())
    }
}

/// Result of one frame solve.
#[derive(Clone, Debug)]
pub struct DfResult<T> {
    pub estimate: DensityField<T>,
    pub iterations: usize,
    /// `(primal, dual)` stacked residual norms per outer iteration.
    pub residual_history: Vec<(T, T)>,
    pub wall_time: Duration,
    pub converged: bool,
    /// Warm cache of the transport prox, carried across frames.
    pub prox_state: Option<ProxState<T>>,
}

impl<T: Scalar> DfResult<T> {
    pub fn final_residuals(&self) -> Option<(T, T)> {
        self.residual_history.last().copied()
    }
}

/// Primal and dual stopping norms of the two-split ADMM:
/// `||[x - s; z - s]||_2` and `rho ||[dx; dz]||_2`.
pub fn admm_residuals<T: Scalar>(
    x: &[T],
    z: &[T],
    s: &[T],
    dx: &[T],
    dz: &[T],
    rho: T,
) -> (T, T) {
    let mut primal = T::zero();
    for k in 0..s.len() {
        primal += (x[k] - s[k]) * (x[k] - s[k]) + (z[k] - s[k]) * (z[k] - s[k]);
    }
    let mut dual = T::zero();
    for k in 0..s.len() {
        dual += dx[k] * dx[k] + dz[k] * dz[k];
    }
    (primal.sqrt(), rho * dual.sqrt())
}

/// Solves one frame: `min 0.5 ||y - Phi s||^2 + lambda ||s||_1 + dynamics`
/// over nonnegative `s`, with the dynamics term tying `s` to `s_prior`.
pub fn df_solve<T: Scalar>(
    y: &[T],
    phi: &MeasurementOp<T>,
    s_prior: &DensityField<T>,
    params: &DfParams<T>,
    warm: Option<ProxState<T>>,
) -> Result<DfResult<T>> {
    params.validate()?;
    let n = phi.n_cols();
    if y.len() != phi.m_rows() {
        return Err(CoreError::ShapeMismatch(format!(
            "y has length {}, operator produces {}",
            y.len(),
            phi.m_rows()
        )));
    }
    if s_prior.values().len() != n {
        return Err(CoreError::ShapeMismatch(format!(
            "prior has length {}, operator consumes {}",
            s_prior.values().len(),
            n
        )));
    }
    if s_prior.min_value() < T::zero() {
        return Err(CoreError::InvalidParam("prior must be nonnegative".into()));
    }

    let start = Instant::now();
    let grid = s_prior.grid();
    let rho = params.rho;
    let factor = phi.factor(rho)?;
    let phi_t_y = phi.adjoint(y);

    let mut s = vec![T::zero(); n];
    let mut x = vec![T::zero(); n];
    let mut z = vec![T::zero(); n];
    let mut a = vec![T::zero(); n];
    let mut b = vec![T::zero(); n];
    let mut prev_x = vec![T::zero(); n];
    let mut prev_z = vec![T::zero(); n];
    let mut v = vec![T::zero(); n];
    let mut rhs = vec![T::zero(); n];

    let transport = matches!(params.regularizer, DfRegularizer::Uot | DfRegularizer::Bot);
    let balanced = params.regularizer == DfRegularizer::Bot;
    let mut prox_state = if transport {
        Some(check_or_cold(warm, grid, balanced)?)
    } else {
        None
    };
    // The transport subproblem divides through by kappa, leaving a
    // proximity weight of rho/kappa for the inner solver.
    let inner_params = if transport {
        let (tau1, tau2) = prox::default_steps(grid, cast(0.9))?;
        Some(UotParams {
            mu: params.mu,
            p_norm: params.p_norm,
            rho: rho / params.kappa,
            tau1,
            tau2,
            max_iters: params.inner_iters,
            tol: cast(1e-12),
            balanced,
        })
    } else {
        None
    };
    let inner_opts = RunOpts {
        tol: cast(1e-12),
        max_iters: params.inner_iters,
        feas_tol: None,
    };

    let half = cast::<T>(0.5);
    let shift = params.lambda / (cast::<T>(2.0) * rho);
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=params.max_iters {
        iterations = iter;

        // s-update: prox of lambda||.||_1 + nonnegativity at the average of
        // the two split sites.
        for k in 0..n {
            let c = half * (x[k] + a[k] + z[k] + b[k]);
            s[k] = (c - shift).max(T::zero());
        }

        // x-update through the cached linear solve.
        prev_x.copy_from_slice(&x);
        for k in 0..n {
            rhs[k] = phi_t_y[k] + rho * (s[k] - a[k]);
        }
        x = factor.solve(&rhs);

        // z-update: dynamics prox at s - b.
        prev_z.copy_from_slice(&z);
        for k in 0..n {
            v[k] = s[k] - b[k];
        }
        match params.regularizer {
            DfRegularizer::Uot | DfRegularizer::Bot => {
                let state = prox_state.as_mut().unwrap();
                let inputs = ProxInputs::Fixed {
                    s: s_prior.values(),
                    p: &v,
                };
                prox::run_prox(state, &inputs, inner_params.as_ref().unwrap(), &inner_opts);
                z.copy_from_slice(state.x_first());
            }
            DfRegularizer::L1Diff => {
                let w = params.l1_diff_weight / rho;
                for k in 0..n {
                    let d = v[k] - s_prior.values()[k];
                    let t = if d > w {
                        d - w
                    } else if d < -w {
                        d + w
                    } else {
                        T::zero()
                    };
                    z[k] = s_prior.values()[k] + t;
                }
            }
            DfRegularizer::None => z.copy_from_slice(&v),
        }

        // Dual ascent.
        for k in 0..n {
            a[k] += x[k] - s[k];
            b[k] += z[k] - s[k];
        }

        for k in 0..n {
            prev_x[k] = x[k] - prev_x[k];
            prev_z[k] = z[k] - prev_z[k];
        }
        let (primal, dual) = admm_residuals(&x, &z, &s, &prev_x, &prev_z, rho);
        history.push((primal, dual));
        if !primal.is_finite() || !dual.is_finite() {
            return Err(CoreError::NumericalFailure(format!(
                "df solve diverged at iteration {iter} (primal {primal}, dual {dual})"
            )));
        }
        if primal < params.eps && dual < params.eps {
            converged = true;
            break;
        }
    }

    Ok(DfResult {
        estimate: DensityField::from_vec(grid, s)?,
        iterations,
        residual_history: history,
        wall_time: start.elapsed(),
        converged,
        prox_state,
    })
}

fn check_or_cold<T: Scalar>(
    warm: Option<ProxState<T>>,
    grid: crate::grid::Grid2,
    balanced: bool,
) -> Result<ProxState<T>> {
    match warm {
        None => Ok(ProxState::cold(grid, ProxVariant::Fixed, balanced)),
        Some(state) => {
            if state.grid() != grid
                || state.variant() != ProxVariant::Fixed
                || state.balanced() != balanced
            {
                return Err(CoreError::InvalidParam(
                    "warm prox state does not match this solve".into(),
                ));
            }
            Ok(state)
        }
    }
}

/// One observed frame for [`online_track`].
#[derive(Clone, Debug)]
pub struct FrameObservation<T> {
    pub y: Vec<T>,
    pub phi: MeasurementOp<T>,
}

/// Sequential tracking: each frame is solved with the previous estimate as
/// its prior (identity dynamics) and the transport prox warm-carried.
pub fn online_track<T: Scalar>(
    frames: &[FrameObservation<T>],
    s0: &DensityField<T>,
    params: &DfParams<T>,
) -> Result<Vec<DfResult<T>>> {
    if frames.is_empty() {
        return Err(CoreError::InvalidParam("no frames to track".into()));
    }
    if s0.min_value() < T::zero() {
        return Err(CoreError::InvalidParam("seed prior must be nonnegative".into()));
    }
    let mut results = Vec::with_capacity(frames.len());
    let mut prior = s0.clone();
    let mut warm: Option<ProxState<T>> = None;
    for frame in frames {
        let res = df_solve(&frame.y, &frame.phi, &prior, params, warm.take())?;
        warm = res.prox_state.clone();
        prior = res.estimate.clone();
        results.push(res);
    }
    Ok(results)
}
