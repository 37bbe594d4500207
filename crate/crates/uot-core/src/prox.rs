//! The proximal operator of the unbalanced Beckmann transport cost, computed
//! with a primal-dual (Chambolle-Pock) inner solver, plus standalone
//! transport-cost evaluation and the balanced variants.
//!
//! Three constraint forms share one iteration kernel:
//!
//! * `Pair` — both marginals are optimization variables coupled by
//!   `div(M) - x0 + x1 = r`; used as the adjacent-frame regularizer.
//! * `Fixed` — the first marginal is a constant `s`, giving
//!   `div(M) - s + x = r`; used as the dynamics prox in the filters.
//! * `Eval` — both marginals fixed, `div(M) + p - q = r`; evaluates the
//!   transport cost itself.
//!
//! The `rho` parameter weights the proximity term as `(rho/2) ||x - p||^2`,
//! matching the closed-form update the iteration applies: large `rho` pins
//! the output to the input, and the `Eval` form is the `rho -> inf` limit
//! with the marginal blocks deleted.

use crate::error::{CoreError, Result};
use crate::grid::{
    self, divergence_into, DensityField, FluxField, Grid2,
};
use crate::{cast, Scalar};

/// Exponent of the growth/decay penalty on the transport residual.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PNorm {
    One,
    Two,
}

/// Which constraint form a prox state was built for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProxVariant {
    Pair,
    Fixed,
    Eval,
}

/// Parameters of the inner primal-dual solver.
#[derive(Clone, Debug)]
pub struct UotParams<T> {
    /// Growth/decay weight; may be zero (residual becomes free).
    pub mu: T,
    pub p_norm: PNorm,
    /// Proximity weight: the solved objective carries `(rho/2) ||x - p||^2`.
    pub rho: T,
    pub tau1: T,
    pub tau2: T,
    pub max_iters: usize,
    /// Stop once the fixed-point residual (max per-variable relative update
    /// norm) drops below this.
    pub tol: T,
    pub balanced: bool,
}

impl<T: Scalar> UotParams<T> {
    /// Unbalanced parameters with step sizes from the grid-independent
    /// spectral bound at safety factor 0.9.
    pub fn new(grid: Grid2, mu: T, rho: T) -> Result<Self> {
        let (tau1, tau2) = default_steps(grid, cast(0.9))?;
        let params = Self {
            mu,
            p_norm: PNorm::One,
            rho,
            tau1,
            tau2,
            max_iters: 200_000,
            tol: cast(1e-9),
            balanced: false,
        };
        params.validate()?;
        Ok(params)
    }

    /// Balanced (residual-free) parameters.
    pub fn balanced(grid: Grid2, rho: T) -> Result<Self> {
        let mut params = Self::new(grid, T::one(), rho)?;
        params.balanced = true;
        Ok(params)
    }

    pub fn with_steps(mut self, tau1: T, tau2: T) -> Self {
        self.tau1 = tau1;
        self.tau2 = tau2;
        self
    }

    pub fn with_tol(mut self, tol: T) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_p_norm(mut self, p_norm: PNorm) -> Self {
        self.p_norm = p_norm;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.mu >= T::zero()
            && self.mu.is_finite()
            && self.rho > T::zero()
            && self.rho.is_finite()
            && self.tau1 > T::zero()
            && self.tau2 > T::zero()
            && self.tol >= T::zero()
            && self.max_iters > 0;
        if !ok {
            return Err(CoreError::InvalidParam(format!(
                "uot params out of range: mu={} rho={} tau1={} tau2={}",
                self.mu, self.rho, self.tau1, self.tau2
            )));
        }
        Ok(())
    }
}

/// Step sizes `tau1 = tau2 = sqrt(safety / (lambda_max_bound + 3))` using
/// the analytic Laplacian bound 8; the product strictly satisfies the
/// convergence condition for every `safety < 1`.
pub fn default_steps<T: Scalar>(_grid: Grid2, safety: T) -> Result<(T, T)> {
    steps_for_lambda_max(cast(grid::LAPLACIAN_LAMBDA_MAX_BOUND), safety)
}

/// Step sizes for an explicitly supplied Laplacian eigenvalue (for example
/// from power iteration).
pub fn steps_for_lambda_max<T: Scalar>(lambda_max: T, safety: T) -> Result<(T, T)> {
    if safety <= T::zero() || safety >= T::one() {
        return Err(CoreError::InvalidParam(format!(
            "safety must lie in (0,1), got {safety}"
        )));
    }
    if lambda_max < T::zero() || !lambda_max.is_finite() {
        return Err(CoreError::InvalidParam(format!(
            "lambda_max must be finite and nonnegative, got {lambda_max}"
        )));
    }
    let tau = (safety / (lambda_max + cast(3.0))).sqrt();
    Ok((tau, tau))
}

/// Warm-start cache of the inner solver: flux, marginal blocks, transport
/// residual, dual, plus the operator-image scratch used by the
/// extrapolation step.
#[derive(Clone, Debug)]
pub struct ProxState<T> {
    grid: Grid2,
    variant: ProxVariant,
    balanced: bool,
    m: FluxField<T>,
    x0: Vec<T>,
    x1: Vec<T>,
    r: Vec<T>,
    a: Vec<T>,
    k_prev: Vec<T>,
    k_new: Vec<T>,
}

impl<T: Scalar> ProxState<T> {
    /// All-zeros cold start.
    pub fn cold(grid: Grid2, variant: ProxVariant, balanced: bool) -> Self {
        let n = grid.len();
        let (x0_len, x1_len) = match variant {
            ProxVariant::Pair => (n, n),
            ProxVariant::Fixed => (n, 0),
            ProxVariant::Eval => (0, 0),
        };
        Self {
            grid,
            variant,
            balanced,
            m: FluxField::zeros(grid),
            x0: vec![T::zero(); x0_len],
            x1: vec![T::zero(); x1_len],
            r: vec![T::zero(); if balanced { 0 } else { n }],
            a: vec![T::zero(); n],
            k_prev: vec![T::zero(); n],
            k_new: vec![T::zero(); n],
        }
    }

    pub fn grid(&self) -> Grid2 {
        self.grid
    }

    pub fn variant(&self) -> ProxVariant {
        self.variant
    }

    pub fn balanced(&self) -> bool {
        self.balanced
    }

    pub fn flux(&self) -> &FluxField<T> {
        &self.m
    }

    /// First marginal block (`x0` for `Pair`, `x` for `Fixed`).
    pub fn x_first(&self) -> &[T] {
        &self.x0
    }

    /// Second marginal block (`Pair` only).
    pub fn x_second(&self) -> &[T] {
        &self.x1
    }

    pub fn residual_block(&self) -> &[T] {
        &self.r
    }

    pub fn dual(&self) -> &[T] {
        &self.a
    }

    /// Transport cost carried by the current state:
    /// `||M||_{2,1} + mu ||r||_p^p` (the residual term vanishes in balanced
    /// mode).
    pub fn transport_cost(&self, mu: T, p_norm: PNorm) -> T {
        let flux = self.m.norm_21();
        if self.balanced || self.r.is_empty() {
            return flux;
        }
        let res = match p_norm {
            PNorm::One => self.r.iter().map(|&v| v.abs()).sum(),
            PNorm::Two => self.r.iter().map(|&v| v * v).sum(),
        };
        flux + mu * res
    }
}

/// Outcome of a prox solve. `state` is the warm cache for the next call.
#[derive(Clone, Debug)]
pub struct ProxResult<T> {
    pub state: ProxState<T>,
    pub iterations: usize,
    /// Fixed-point residual at the last iteration: max over the variable
    /// blocks of `||v_new - v_old|| / (1 + ||v_new||)`.
    pub residual: T,
    pub converged: bool,
}

impl<T: Scalar> ProxResult<T> {
    /// First output marginal as a density field.
    pub fn density_first(&self) -> DensityField<T> {
        DensityField::from_vec(self.state.grid, self.state.x0.clone())
            .expect("solver output is finite")
    }

    /// Second output marginal (`Pair` solves).
    pub fn density_second(&self) -> DensityField<T> {
        DensityField::from_vec(self.state.grid, self.state.x1.clone())
            .expect("solver output is finite")
    }
}

pub(crate) enum ProxInputs<'a, T> {
    Pair { p0: &'a [T], p1: &'a [T] },
    Fixed { s: &'a [T], p: &'a [T] },
    /// `src = p - q`, precomputed.
    Eval { src: &'a [T] },
}

pub(crate) struct RunOpts<T> {
    pub tol: T,
    pub max_iters: usize,
    /// When set, convergence additionally requires the constraint image
    /// `||K||_2` to drop below this absolute threshold.
    pub feas_tol: Option<T>,
}

pub(crate) struct RunStats<T> {
    pub iterations: usize,
    pub residual: T,
    pub converged: bool,
}

/// One primal-dual iteration block, looped to the stopping rule. Lines 3-5
/// read the old dual and are elementwise; the divergence image is then
/// rebuilt and the dual takes an extrapolated ascent step.
pub(crate) fn run_prox<T: Scalar>(
    state: &mut ProxState<T>,
    inputs: &ProxInputs<'_, T>,
    params: &UotParams<T>,
    opts: &RunOpts<T>,
) -> RunStats<T> {
    let grid = state.grid;
    let n = grid.len();
    let (nx, ny) = (grid.n_x(), grid.n_y());
    let tau1 = params.tau1;
    let tau2 = params.tau2;
    let rho = params.rho;
    let balanced = params.balanced;
    let two = cast::<T>(2.0);

    // Proximity blend for the marginal update.
    let cx = rho * tau1 / (T::one() + rho * tau1);
    let dx = T::one() / (T::one() + rho * tau1);
    // Residual averaging factor for the quadratic penalty.
    let r_avg = T::one() / (T::one() + two * params.mu * tau1);

    compute_k(state, inputs);
    state.k_prev.copy_from_slice(&state.k_new);

    let mut residual = T::infinity();
    let mut iterations = 0;
    let mut converged = false;

    for iter in 1..=opts.max_iters {
        iterations = iter;
        let mut worst = T::zero();

        // Flux block: m <- shrink_l2(m - tau1 div*(a)) rowwise.
        {
            let a = &state.a;
            let (mx, my) = state.m.planes_mut();
            let mut dm = T::zero();
            let mut nm = T::zero();
            for j in 0..ny {
                for i in 0..nx {
                    let k = j * nx + i;
                    let ax = if i + 1 < nx { a[k] - a[k + 1] } else { T::zero() };
                    let ay = if j + 1 < ny { a[k] - a[k + nx] } else { T::zero() };
                    let ux = mx[k] - tau1 * ax;
                    let uy = my[k] - tau1 * ay;
                    let nrm = (ux * ux + uy * uy).sqrt();
                    let (vx, vy) = if nrm > tau1 {
                        let f = (nrm - tau1) / nrm;
                        (ux * f, uy * f)
                    } else {
                        (T::zero(), T::zero())
                    };
                    let ex = vx - mx[k];
                    let ey = vy - my[k];
                    dm += ex * ex + ey * ey;
                    nm += vx * vx + vy * vy;
                    mx[k] = vx;
                    my[k] = vy;
                }
            }
            worst = worst.max(rel_change(dm, nm));
        }
        state.m.enforce_zero_flux_boundary();

        // Marginal block(s): blend toward the inputs, project nonnegative.
        match inputs {
            ProxInputs::Pair { p0, p1 } => {
                let mut d = T::zero();
                let mut nn = T::zero();
                for k in 0..n {
                    let ak = state.a[k];
                    let v0 = (cx * p0[k] + dx * (state.x0[k] + tau1 * ak)).max(T::zero());
                    let v1 = (cx * p1[k] + dx * (state.x1[k] - tau1 * ak)).max(T::zero());
                    let e0 = v0 - state.x0[k];
                    let e1 = v1 - state.x1[k];
                    d += e0 * e0 + e1 * e1;
                    nn += v0 * v0 + v1 * v1;
                    state.x0[k] = v0;
                    state.x1[k] = v1;
                }
                worst = worst.max(rel_change(d, nn));
            }
            ProxInputs::Fixed { p, .. } => {
                let mut d = T::zero();
                let mut nn = T::zero();
                for k in 0..n {
                    let v = (cx * p[k] + dx * (state.x0[k] - tau1 * state.a[k])).max(T::zero());
                    let e = v - state.x0[k];
                    d += e * e;
                    nn += v * v;
                    state.x0[k] = v;
                }
                worst = worst.max(rel_change(d, nn));
            }
            ProxInputs::Eval { .. } => {}
        }

        // Residual block.
        if !balanced {
            let mut d = T::zero();
            let mut nn = T::zero();
            match params.p_norm {
                PNorm::One => {
                    let thresh = params.mu * tau1;
                    for k in 0..n {
                        let q = state.r[k] + tau1 * state.a[k];
                        let v = if q > thresh {
                            q - thresh
                        } else if q < -thresh {
                            q + thresh
                        } else {
                            T::zero()
                        };
                        let e = v - state.r[k];
                        d += e * e;
                        nn += v * v;
                        state.r[k] = v;
                    }
                }
                PNorm::Two => {
                    for k in 0..n {
                        let v = (state.r[k] + tau1 * state.a[k]) * r_avg;
                        let e = v - state.r[k];
                        d += e * e;
                        nn += v * v;
                        state.r[k] = v;
                    }
                }
            }
            worst = worst.max(rel_change(d, nn));
        }

        // Dual ascent on the extrapolated constraint image.
        compute_k(state, inputs);
        {
            let mut d = T::zero();
            let mut nn = T::zero();
            for k in 0..n {
                let b = two * state.k_new[k] - state.k_prev[k];
                let v = state.a[k] + tau2 * b;
                let e = v - state.a[k];
                d += e * e;
                nn += v * v;
                state.a[k] = v;
            }
            worst = worst.max(rel_change(d, nn));
        }
        std::mem::swap(&mut state.k_prev, &mut state.k_new);

        residual = worst;
        if residual < opts.tol {
            let feas_ok = match opts.feas_tol {
                None => true,
                Some(ft) => grid::norm(&state.k_prev) <= ft,
            };
            if feas_ok {
                converged = true;
                break;
            }
        }
    }

    RunStats {
        iterations,
        residual,
        converged,
    }
}

#[inline]
fn rel_change<T: Scalar>(delta_sq: T, new_sq: T) -> T {
    delta_sq.sqrt() / (T::one() + new_sq.sqrt())
}

/// Constraint image `K` at the current variables, written into `k_new`.
fn compute_k<T: Scalar>(state: &mut ProxState<T>, inputs: &ProxInputs<'_, T>) {
    divergence_into(&state.m, &mut state.k_new);
    let n = state.grid.len();
    match inputs {
        ProxInputs::Pair { .. } => {
            for k in 0..n {
                state.k_new[k] += state.x1[k] - state.x0[k];
            }
        }
        ProxInputs::Fixed { s, .. } => {
            for k in 0..n {
                state.k_new[k] += state.x0[k] - s[k];
            }
        }
        ProxInputs::Eval { src } => {
            for k in 0..n {
                state.k_new[k] += src[k];
            }
        }
    }
    if !state.balanced() {
        for k in 0..n {
            state.k_new[k] -= state.r[k];
        }
    }
}

fn check_same_grid<T: Scalar>(a: &DensityField<T>, b: &DensityField<T>) -> Result<Grid2> {
    if a.grid() != b.grid() {
        return Err(CoreError::ShapeMismatch(format!(
            "density fields live on different grids: {}x{} vs {}x{}",
            a.grid().n_x(),
            a.grid().n_y(),
            b.grid().n_x(),
            b.grid().n_y()
        )));
    }
    Ok(a.grid())
}

fn check_warm<T: Scalar>(
    warm: Option<ProxState<T>>,
    grid: Grid2,
    variant: ProxVariant,
    balanced: bool,
) -> Result<ProxState<T>> {
    match warm {
        None => Ok(ProxState::cold(grid, variant, balanced)),
        Some(state) => {
            if state.grid != grid || state.variant != variant || state.balanced != balanced {
                return Err(CoreError::InvalidParam(
                    "warm prox state does not match this solve (grid/variant/balance)".into(),
                ));
            }
            Ok(state)
        }
    }
}

/// Proximal map of the transport cost in both marginals: minimizes
/// `V_mu(x0, x1) + (rho/2)(||x0 - p0||^2 + ||x1 - p1||^2)` over
/// nonnegative `x0, x1`.
pub fn uot_prox_pair<T: Scalar>(
    p0: &DensityField<T>,
    p1: &DensityField<T>,
    params: &UotParams<T>,
    warm: Option<ProxState<T>>,
) -> Result<ProxResult<T>> {
    params.validate()?;
    let grid = check_same_grid(p0, p1)?;
    let mut state = check_warm(warm, grid, ProxVariant::Pair, params.balanced)?;
    let inputs = ProxInputs::Pair {
        p0: p0.values(),
        p1: p1.values(),
    };
    let opts = RunOpts {
        tol: params.tol,
        max_iters: params.max_iters,
        feas_tol: None,
    };
    let stats = run_prox(&mut state, &inputs, params, &opts);
    Ok(ProxResult {
        state,
        iterations: stats.iterations,
        residual: stats.residual,
        converged: stats.converged,
    })
}

/// Proximal map with the first marginal held at `s`: minimizes
/// `V_mu(s, x) + (rho/2) ||x - p||^2` over nonnegative `x`.
pub fn uot_prox_fixed<T: Scalar>(
    s: &DensityField<T>,
    p: &DensityField<T>,
    params: &UotParams<T>,
    warm: Option<ProxState<T>>,
) -> Result<ProxResult<T>> {
    params.validate()?;
    let grid = check_same_grid(s, p)?;
    if s.min_value() < T::zero() {
        return Err(CoreError::InvalidParam(
            "fixed marginal s must be nonnegative".into(),
        ));
    }
    let mut state = check_warm(warm, grid, ProxVariant::Fixed, params.balanced)?;
    let inputs = ProxInputs::Fixed {
        s: s.values(),
        p: p.values(),
    };
    let opts = RunOpts {
        tol: params.tol,
        max_iters: params.max_iters,
        feas_tol: None,
    };
    let stats = run_prox(&mut state, &inputs, params, &opts);
    Ok(ProxResult {
        state,
        iterations: stats.iterations,
        residual: stats.residual,
        converged: stats.converged,
    })
}

/// Balanced counterpart of [`uot_prox_pair`] (residual dropped).
pub fn bot_prox_pair<T: Scalar>(
    p0: &DensityField<T>,
    p1: &DensityField<T>,
    params: &UotParams<T>,
    warm: Option<ProxState<T>>,
) -> Result<ProxResult<T>> {
    let mut params = params.clone();
    params.balanced = true;
    uot_prox_pair(p0, p1, &params, warm)
}

/// Balanced counterpart of [`uot_prox_fixed`].
pub fn bot_prox_fixed<T: Scalar>(
    s: &DensityField<T>,
    p: &DensityField<T>,
    params: &UotParams<T>,
    warm: Option<ProxState<T>>,
) -> Result<ProxResult<T>> {
    let mut params = params.clone();
    params.balanced = true;
    uot_prox_fixed(s, p, &params, warm)
}

/// Accuracy controls for the standalone cost evaluators.
///
/// Evaluation stops on a certified duality gap: a feasible primal value is
/// obtained by absorbing the constraint violation into the residual (or an
/// exact-penalty term in balanced mode) and a feasible dual value by
/// projecting the multiplier into its constraint set. The returned value is
/// the midpoint of the bracket, so its error is at most `gap_tol / 2`.
#[derive(Clone, Debug)]
pub struct EvalOpts<T> {
    pub safety: T,
    /// Absolute duality-gap target.
    pub gap_tol: T,
    pub max_iters: usize,
    /// Gap check cadence in inner iterations.
    pub check_every: usize,
}

impl<T: Scalar> Default for EvalOpts<T> {
    fn default() -> Self {
        Self {
            safety: cast(0.9),
            gap_tol: cast(2e-4),
            max_iters: 4_000_000,
            check_every: 250,
        }
    }
}

/// Unbalanced transport cost between nonnegative fields, computed with the
/// marginal blocks removed (both held fixed).
pub fn uot_evaluate<T: Scalar>(
    p: &DensityField<T>,
    q: &DensityField<T>,
    mu: T,
    p_norm: PNorm,
) -> Result<T> {
    uot_evaluate_with(p, q, mu, p_norm, &EvalOpts::default())
}

pub fn uot_evaluate_with<T: Scalar>(
    p: &DensityField<T>,
    q: &DensityField<T>,
    mu: T,
    p_norm: PNorm,
    opts: &EvalOpts<T>,
) -> Result<T> {
    let grid = check_same_grid(p, q)?;
    if p.min_value() < T::zero() || q.min_value() < T::zero() {
        return Err(CoreError::InvalidParam(
            "transport arguments must be nonnegative".into(),
        ));
    }
    if mu <= T::zero() || !mu.is_finite() {
        return Err(CoreError::InvalidParam(format!(
            "mu must be positive and finite, got {mu}"
        )));
    }
    evaluate_inner(grid, p, q, mu, p_norm, false, opts)
}

/// Balanced transport cost; rejects inputs whose masses differ by more than
/// `1e-9 * sum(p)`. Runs at a tighter gap than the unbalanced default.
pub fn bot_evaluate<T: Scalar>(p: &DensityField<T>, q: &DensityField<T>) -> Result<T> {
    let opts = EvalOpts {
        gap_tol: cast(4e-5),
        ..EvalOpts::default()
    };
    bot_evaluate_with(p, q, &opts)
}

pub fn bot_evaluate_with<T: Scalar>(
    p: &DensityField<T>,
    q: &DensityField<T>,
    opts: &EvalOpts<T>,
) -> Result<T> {
    let grid = check_same_grid(p, q)?;
    if p.min_value() < T::zero() || q.min_value() < T::zero() {
        return Err(CoreError::InvalidParam(
            "transport arguments must be nonnegative".into(),
        ));
    }
    let sum_p = p.sum();
    let sum_q = q.sum();
    if (sum_p - sum_q).abs() > cast::<T>(1e-9) * sum_p {
        return Err(CoreError::Unbalanced {
            sum_p: sum_p.to_f64().unwrap_or(f64::NAN),
            sum_q: sum_q.to_f64().unwrap_or(f64::NAN),
        });
    }
    evaluate_inner(grid, p, q, T::one(), PNorm::One, true, opts)
}

fn evaluate_inner<T: Scalar>(
    grid: Grid2,
    p: &DensityField<T>,
    q: &DensityField<T>,
    mu: T,
    p_norm: PNorm,
    balanced: bool,
    opts: &EvalOpts<T>,
) -> Result<T> {
    let (tau1, tau2) = default_steps(grid, opts.safety)?;
    let params = UotParams {
        mu,
        p_norm,
        rho: T::one(), // unused: no marginal block
        tau1,
        tau2,
        max_iters: opts.max_iters,
        tol: T::zero(),
        balanced,
    };
    let src: Vec<T> = p
        .values()
        .iter()
        .zip(q.values())
        .map(|(&a, &b)| a - b)
        .collect();
    let mut state = ProxState::cold(grid, ProxVariant::Eval, balanced);
    let inputs = ProxInputs::Eval { src: &src };
    // Exact-penalty weight for the balanced primal bound: any feasible dual
    // potential varies by at most the grid graph diameter.
    let diameter = cast::<T>((grid.n_x() + grid.n_y()) as f64 - 2.0);
    let penalty = if balanced { diameter.max(T::one()) } else { mu };

    let chunk = opts.check_every.max(1);
    let mut done = 0usize;
    let mut gap_history: Vec<f64> = Vec::new();
    loop {
        let step = chunk.min(opts.max_iters - done);
        if step == 0 {
            return Err(CoreError::NonConvergence {
                iterations: done,
                residual: gap_history.last().copied().unwrap_or(f64::NAN),
                history: gap_history,
            });
        }
        let chunk_opts = RunOpts {
            tol: T::zero(), // chunks run their full length; the gap decides
            max_iters: step,
            feas_tol: None,
        };
        run_prox(&mut state, &inputs, &params, &chunk_opts);
        done += step;

        let upper = primal_bound(&state, &src, mu, p_norm, balanced, penalty);
        let lower = dual_bound(&state, &src, mu, p_norm, balanced);
        let gap = upper - lower;
        gap_history.push(gap.to_f64().unwrap_or(f64::NAN));
        if gap <= opts.gap_tol {
            let mid = (upper + lower) / cast(2.0);
            return Ok(mid.max(T::zero()));
        }
    }
}

/// Value of a feasible primal point: the constraint violation is absorbed
/// into the residual (unbalanced) or charged at the exact-penalty rate
/// (balanced), so this always upper-bounds the optimum.
fn primal_bound<T: Scalar>(
    state: &ProxState<T>,
    src: &[T],
    mu: T,
    p_norm: PNorm,
    balanced: bool,
    penalty: T,
) -> T {
    let div = crate::grid::divergence(&state.m);
    let flux = state.m.norm_21();
    let mut res_cost = T::zero();
    for k in 0..src.len() {
        let r = div[k] + src[k];
        if balanced {
            res_cost += penalty * r.abs();
        } else {
            match p_norm {
                PNorm::One => res_cost += mu * r.abs(),
                PNorm::Two => res_cost += mu * r * r,
            }
        }
    }
    flux + res_cost
}

/// Value of a feasible dual point: the multiplier is clamped to the
/// residual box (p = 1) and scaled into the unit ball of rowwise adjoint
/// norms, so this always lower-bounds the optimum.
fn dual_bound<T: Scalar>(
    state: &ProxState<T>,
    src: &[T],
    mu: T,
    p_norm: PNorm,
    balanced: bool,
) -> T {
    let grid = state.grid;
    let n = grid.len();
    let mut a: Vec<T> = state.a.clone();
    if !balanced && matches!(p_norm, PNorm::One) {
        for v in a.iter_mut() {
            *v = (*v).max(-mu).min(mu);
        }
    }
    let mut adj = FluxField::zeros(grid);
    {
        let (mx, my) = adj.planes_mut();
        crate::grid::divergence_adjoint_into(grid, &a, mx, my);
    }
    let mut worst = T::zero();
    for k in 0..n {
        let nk = (adj.mx()[k] * adj.mx()[k] + adj.my()[k] * adj.my()[k]).sqrt();
        worst = worst.max(nk);
    }
    if worst > T::one() {
        let s = T::one() / worst;
        for v in a.iter_mut() {
            *v *= s;
        }
    }
    let mut val = T::zero();
    for k in 0..n {
        val += a[k] * src[k];
    }
    if !balanced && matches!(p_norm, PNorm::Two) {
        let four_mu = cast::<T>(4.0) * mu;
        let a_sq: T = a.iter().map(|&v| v * v).sum();
        val -= a_sq / four_mu;
    }
    val
}

/// Objective of the pair prox at a state:
/// `||M||_{2,1} + mu ||r||_p^p + (rho/2)(||x0-p0||^2 + ||x1-p1||^2)`.
pub fn prox_objective_pair<T: Scalar>(
    state: &ProxState<T>,
    p0: &DensityField<T>,
    p1: &DensityField<T>,
    params: &UotParams<T>,
) -> T {
    let quad = sq_dist(&state.x0, p0.values()) + sq_dist(&state.x1, p1.values());
    state.transport_cost(params.mu, params.p_norm) + params.rho / cast(2.0) * quad
}

/// Objective of the fixed prox at a state:
/// `||M||_{2,1} + mu ||r||_p^p + (rho/2) ||x - p||^2`.
pub fn prox_objective_fixed<T: Scalar>(
    state: &ProxState<T>,
    p: &DensityField<T>,
    params: &UotParams<T>,
) -> T {
    state.transport_cost(params.mu, params.p_norm)
        + params.rho / cast(2.0) * sq_dist(&state.x0, p.values())
}

fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum()
}
