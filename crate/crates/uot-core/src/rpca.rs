//! Batch ADMM separating a frame stack into a sparse component and a
//! low-rank component under compressive measurements, with an optional
//! transport regularizer tying adjacent sparse frames together. Includes
//! the signed split for data whose foreground may be darker than the
//! background, and the blur-l1 baseline.

use ndarray::Array2;

use crate::df::MeasurementOp;
use crate::error::{CoreError, Result};
use crate::grid::{DensityField, Grid2};
use crate::linalg::thin_svd;
use crate::prox::{self, PNorm, ProxInputs, ProxState, ProxVariant, RunOpts, UotParams};
use crate::{cast, Scalar};

/// Measurement operators for a batch: one shared operator or one per frame.
#[derive(Clone, Debug)]
pub enum PhiSet<T> {
    Shared(MeasurementOp<T>),
    PerFrame(Vec<MeasurementOp<T>>),
}

/// Time-indexed observations `Y = [y_1 ... y_T]` with their operators.
#[derive(Clone, Debug)]
pub struct FrameBatch<T> {
    grid: Grid2,
    y: Array2<T>,
    phis: PhiSet<T>,
}

impl<T: Scalar> FrameBatch<T> {
    pub fn new(grid: Grid2, y: Array2<T>, phis: PhiSet<T>) -> Result<Self> {
        let (m, t) = y.dim();
        if t == 0 {
            return Err(CoreError::ShapeMismatch("batch has no frames".into()));
        }
        let check = |phi: &MeasurementOp<T>| -> Result<()> {
            if phi.n_cols() != grid.len() {
                return Err(CoreError::ShapeMismatch(format!(
                    "operator consumes {} values, grid has {}",
                    phi.n_cols(),
                    grid.len()
                )));
            }
            if phi.m_rows() != m {
                return Err(CoreError::ShapeMismatch(format!(
                    "operator produces {} rows, Y has {}",
                    phi.m_rows(),
                    m
                )));
            }
            Ok(())
        };
        match &phis {
            PhiSet::Shared(phi) => check(phi)?,
            PhiSet::PerFrame(list) => {
                if list.len() != t {
                    return Err(CoreError::ShapeMismatch(format!(
                        "{} operators for {} frames",
                        list.len(),
                        t
                    )));
                }
                for phi in list {
                    check(phi)?;
                }
            }
        }
        Ok(Self { grid, y, phis })
    }

    pub fn grid(&self) -> Grid2 {
        self.grid
    }

    pub fn frames(&self) -> usize {
        self.y.ncols()
    }

    pub fn m_rows(&self) -> usize {
        self.y.nrows()
    }

    pub fn y(&self) -> &Array2<T> {
        &self.y
    }

    pub fn phi(&self, t: usize) -> &MeasurementOp<T> {
        match &self.phis {
            PhiSet::Shared(phi) => phi,
            PhiSet::PerFrame(list) => &list[t],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RpcaVariant {
    Uot,
    UotSigned,
    Bot,
    /// l1 on blurred frame differences.
    L1Blur,
    None,
}

/// How the nuclear-norm weight is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GammaRule {
    Explicit,
    /// `gamma = lambda * sqrt(max(N, T))`.
    SqrtMaxNt,
}

#[derive(Clone, Debug)]
pub struct RpcaParams<T> {
    pub lambda: T,
    pub gamma: T,
    pub kappa: T,
    pub mu: T,
    pub rho: T,
    pub eps: T,
    pub max_iters: usize,
    pub inner_iters: usize,
    pub variant: RpcaVariant,
    pub gamma_rule: GammaRule,
    pub p_norm: PNorm,
}

impl<T: Scalar> RpcaParams<T> {
    pub fn new(variant: RpcaVariant) -> Self {
        Self {
            lambda: cast(0.1),
            gamma: T::one(),
            kappa: T::one(),
            mu: T::one(),
            rho: T::one(),
            eps: cast(1e-4),
            max_iters: 5000,
            inner_iters: 30,
            variant,
            gamma_rule: GammaRule::SqrtMaxNt,
            p_norm: PNorm::One,
        }
    }

    /// `kappa == 0` disables the dynamics splits entirely, matching the
    /// plain variant.
    pub fn validate(&self) -> Result<()> {
        let ok = self.lambda >= T::zero()
            && self.gamma >= T::zero()
            && self.kappa >= T::zero()
            && self.mu >= T::zero()
            && self.rho > T::zero()
            && self.eps > T::zero()
            && self.max_iters > 0
            && self.inner_iters > 0;
        if !ok {
            return Err(CoreError::InvalidParam("rpca params out of range".into()));
        }
        Ok(())
    }

    pub fn effective_gamma(&self, n: usize, t: usize) -> T {
        match self.gamma_rule {
            GammaRule::Explicit => self.gamma,
            GammaRule::SqrtMaxNt => self.lambda * cast::<T>(n.max(t) as f64).sqrt(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RpcaResult<T> {
    /// Sparse component (`s_pos - s_neg` for the signed variant).
    pub s: Array2<T>,
    pub s_pos: Option<Array2<T>>,
    pub s_neg: Option<Array2<T>>,
    pub l: Array2<T>,
    pub iterations: usize,
    pub residual_history: Vec<(T, T)>,
    pub converged: bool,
}

impl<T: Scalar> RpcaResult<T> {
    pub fn final_residuals(&self) -> Option<(T, T)> {
        self.residual_history.last().copied()
    }
}

/// Singular value thresholding: `U shrink_l1(Sigma, sigma) V^T` for any SVD
/// of the input.
pub fn svt<T: Scalar>(x: &Array2<T>, sigma: T) -> Result<Array2<T>> {
    let svd = thin_svd(x)?;
    let (n, m) = x.dim();
    let r = n.min(m);
    let mut out = Array2::zeros((n, m));
    for k in 0..r {
        let s = (svd.sigma[k] - sigma).max(T::zero());
        if s == T::zero() {
            continue;
        }
        for i in 0..n {
            let us = svd.u[(i, k)] * s;
            for j in 0..m {
                out[(i, j)] += us * svd.vt[(k, j)];
            }
        }
    }
    Ok(out)
}

/// Separable 3x3 Gaussian blur `(1/16)[1 2 1]^T [1 2 1]` with zero-padded
/// borders; mass is not conserved at the boundary.
pub fn gaussian_blur_3x3<T: Scalar>(s: &DensityField<T>) -> DensityField<T> {
    let grid = s.grid();
    let mut out = vec![T::zero(); grid.len()];
    blur_into(grid, s.values(), &mut out);
    DensityField::from_vec(grid, out).expect("blur of finite field is finite")
}

fn blur_into<T: Scalar>(grid: Grid2, v: &[T], out: &mut [T]) {
    let (nx, ny) = (grid.n_x(), grid.n_y());
    let w = [cast::<T>(0.25), cast::<T>(0.5), cast::<T>(0.25)];
    // horizontal (x) pass then vertical (y) pass, zero padding
    let mut tmp = vec![T::zero(); v.len()];
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            let mut acc = w[1] * v[k];
            if i > 0 {
                acc += w[0] * v[k - 1];
            }
            if i + 1 < nx {
                acc += w[2] * v[k + 1];
            }
            tmp[k] = acc;
        }
    }
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            let mut acc = w[1] * tmp[k];
            if j > 0 {
                acc += w[0] * tmp[k - nx];
            }
            if j + 1 < ny {
                acc += w[2] * tmp[k + nx];
            }
            out[k] = acc;
        }
    }
}

/// Warm state of the blur-difference prox for one adjacent frame pair.
#[derive(Clone, Debug)]
struct BlurProxState<T> {
    d: Vec<T>,
    dual: Vec<T>,
}

/// Prox of `kappa ||B z - B w||_1 + (rho/2)(||z - v1||^2 + ||w - v2||^2)`.
///
/// The sum coordinate is free (`z + w = v1 + v2`); the difference solves
/// `min kappa ||B d||_1 + (rho/4) ||d - (v1 - v2)||^2` with a small
/// primal-dual loop (the blur operator has norm <= 1).
fn blur_diff_prox<T: Scalar>(
    grid: Grid2,
    state: &mut BlurProxState<T>,
    v1: &[T],
    v2: &[T],
    kappa: T,
    rho: T,
    iters: usize,
    z: &mut [T],
    w: &mut [T],
) {
    let n = grid.len();
    let tau = cast::<T>(0.95);
    let sigma = cast::<T>(0.95);
    let half_rho = rho / cast(2.0);
    let scale = T::one() / (T::one() + tau * half_rho);
    let mut dv = vec![T::zero(); n];
    for k in 0..n {
        dv[k] = v1[k] - v2[k];
    }
    let mut bd = vec![T::zero(); n];
    let mut bt = vec![T::zero(); n];
    let mut d_bar = state.d.clone();
    for _ in 0..iters {
        // dual: project onto the kappa-ball after an ascent step on B d_bar
        blur_into(grid, &d_bar, &mut bd);
        for k in 0..n {
            let u = state.dual[k] + sigma * bd[k];
            state.dual[k] = u.max(-kappa).min(kappa);
        }
        // primal: proximal step on the quadratic tie to dv
        blur_into(grid, &state.dual, &mut bt); // B is symmetric
        for k in 0..n {
            let prev = state.d[k];
            let next = (prev - tau * bt[k] + tau * half_rho * dv[k]) * scale;
            d_bar[k] = cast::<T>(2.0) * next - prev;
            state.d[k] = next;
        }
    }
    for k in 0..n {
        let h = v1[k] + v2[k];
        z[k] = (h + state.d[k]) / cast(2.0);
        w[k] = (h - state.d[k]) / cast(2.0);
    }
}

struct Splits<T> {
    z: Array2<T>,
    w: Array2<T>,
    b: Array2<T>,
    c: Array2<T>,
    prox: Vec<PairProx<T>>,
}

enum PairProx<T> {
    Transport(ProxState<T>),
    Blur(BlurProxState<T>),
    Identity,
}

impl<T: Scalar> Splits<T> {
    fn new(grid: Grid2, pairs: usize, variant: RpcaVariant) -> Self {
        let n = grid.len();
        let prox = (0..pairs)
            .map(|_| match variant {
                RpcaVariant::Uot | RpcaVariant::UotSigned => {
                    PairProx::Transport(ProxState::cold(grid, ProxVariant::Pair, false))
                }
                RpcaVariant::Bot => {
                    PairProx::Transport(ProxState::cold(grid, ProxVariant::Pair, true))
                }
                RpcaVariant::L1Blur => PairProx::Blur(BlurProxState {
                    d: vec![T::zero(); n],
                    dual: vec![T::zero(); n],
                }),
                RpcaVariant::None => PairProx::Identity,
            })
            .collect();
        Splits {
            z: Array2::zeros((n, pairs)),
            w: Array2::zeros((n, pairs)),
            b: Array2::zeros((n, pairs)),
            c: Array2::zeros((n, pairs)),
            prox,
        }
    }
}

/// Sparse + low-rank separation with the chosen dynamics variant.
/// Dynamic variants need at least two frames.
pub fn rpca_solve<T: Scalar>(batch: &FrameBatch<T>, params: &RpcaParams<T>) -> Result<RpcaResult<T>> {
    params.validate()?;
    solve_impl(batch, params, false)
}

/// Signed split `S = S+ - S-`: each part gets its own sparsity weight and
/// its own adjacent-pair transport terms.
pub fn rpca_solve_signed<T: Scalar>(
    batch: &FrameBatch<T>,
    params: &RpcaParams<T>,
) -> Result<RpcaResult<T>> {
    params.validate()?;
    solve_impl(batch, params, true)
}

fn solve_impl<T: Scalar>(
    batch: &FrameBatch<T>,
    params: &RpcaParams<T>,
    signed: bool,
) -> Result<RpcaResult<T>> {
    let grid = batch.grid();
    let n = grid.len();
    let t_frames = batch.frames();
    let dynamic = params.kappa > T::zero()
        && !matches!(params.variant, RpcaVariant::None);
    if dynamic && t_frames < 2 {
        return Err(CoreError::ShapeMismatch(
            "dynamic variants need at least two frames".into(),
        ));
    }
    if signed && params.variant != RpcaVariant::UotSigned {
        return Err(CoreError::InvalidParam(
            "signed solve requires the uot_signed variant".into(),
        ));
    }
    if !signed && params.variant == RpcaVariant::UotSigned {
        return Err(CoreError::InvalidParam(
            "uot_signed variant requires rpca_solve_signed".into(),
        ));
    }

    let rho = params.rho;
    let gamma = params.effective_gamma(n, t_frames);
    let two = cast::<T>(2.0);
    let half = T::one() / two;

    // factorizations (shared operator factored once)
    let factors: Vec<crate::df::PhiFactor<T>> = match &batch.phis {
        PhiSet::Shared(phi) => vec![phi.factor(rho)?],
        PhiSet::PerFrame(list) => list
            .iter()
            .map(|phi| phi.factor(rho))
            .collect::<Result<_>>()?,
    };
    let factor_of = |t: usize| -> &crate::df::PhiFactor<T> {
        match &batch.phis {
            PhiSet::Shared(_) => &factors[0],
            PhiSet::PerFrame(_) => &factors[t],
        }
    };
    let phi_t_y: Vec<Vec<T>> = (0..t_frames)
        .map(|t| {
            let col: Vec<T> = batch.y.column(t).to_vec();
            batch.phi(t).adjoint(&col)
        })
        .collect();

    let shape = (n, t_frames);
    let mut s_pos: Array2<T> = Array2::zeros(shape);
    let mut s_neg: Array2<T> = Array2::zeros(shape); // unused unless signed
    let mut l: Array2<T> = Array2::zeros(shape);
    let mut x: Array2<T> = Array2::zeros(shape);
    let mut t_aux: Array2<T> = Array2::zeros(shape);
    let mut a_dual: Array2<T> = Array2::zeros(shape);
    let mut d_dual: Array2<T> = Array2::zeros(shape);

    let pairs = if dynamic { t_frames - 1 } else { 0 };
    let mut sp = Splits::new(grid, pairs, params.variant);
    let mut sn = if signed {
        Some(Splits::new(grid, pairs, params.variant))
    } else {
        None
    };

    let inner_steps = prox::default_steps(grid, cast(0.9))?;
    let inner_params = UotParams {
        mu: params.mu,
        p_norm: params.p_norm,
        rho: if params.kappa > T::zero() {
            rho / params.kappa
        } else {
            T::one()
        },
        tau1: inner_steps.0,
        tau2: inner_steps.1,
        max_iters: params.inner_iters,
        tol: cast(1e-12),
        balanced: params.variant == RpcaVariant::Bot,
    };
    let inner_opts = RunOpts {
        tol: cast(1e-12),
        max_iters: params.inner_iters,
        feas_tol: None,
    };

    let mut prev_x = x.clone();
    let mut prev_t = t_aux.clone();
    let mut prev_z = sp.z.clone();
    let mut prev_w = sp.w.clone();
    let mut prev_zn = sn.as_ref().map(|s| s.z.clone());
    let mut prev_wn = sn.as_ref().map(|s| s.w.clone());

    let mut history: Vec<(T, T)> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut rhs = vec![T::zero(); n];

    for iter in 1..=params.max_iters {
        iterations = iter;

        // s-update: soft threshold at the weighted average of the split
        // sites; omega_z[t] = 1 for t < T-1, omega_w[t] = 1 for t >= 1.
        update_s(
            &mut s_pos, &x, &l, &a_dual, &sp, &s_neg, signed, false, params.lambda, rho, pairs,
        );
        if let Some(sn_ref) = &sn {
            update_s(
                &mut s_neg, &x, &l, &a_dual, sn_ref, &s_pos, signed, true, params.lambda, rho,
                pairs,
            );
        }

        // L-update: projected average of its two constraint sites.
        for tt in 0..t_frames {
            for k in 0..n {
                let snv = if signed { s_neg[(k, tt)] } else { T::zero() };
                let v = half
                    * (t_aux[(k, tt)] - d_dual[(k, tt)] + x[(k, tt)] - s_pos[(k, tt)] + snv
                        + a_dual[(k, tt)]);
                l[(k, tt)] = v.max(T::zero());
            }
        }

        // x-update: regularized least squares per frame.
        prev_x.assign(&x);
        for tt in 0..t_frames {
            for k in 0..n {
                let snv = if signed { s_neg[(k, tt)] } else { T::zero() };
                rhs[k] = phi_t_y[tt][k]
                    + rho * (s_pos[(k, tt)] - snv + l[(k, tt)] - a_dual[(k, tt)]);
            }
            let sol = factor_of(tt).solve(&rhs);
            for k in 0..n {
                x[(k, tt)] = sol[k];
            }
        }

        // T-update: singular value thresholding.
        prev_t.assign(&t_aux);
        let mut ld = l.clone();
        ld += &d_dual;
        t_aux = svt(&ld, gamma / rho)?;

        // z/w-update: adjacent-pair transport prox, warm-started and capped.
        prev_z.assign(&sp.z);
        prev_w.assign(&sp.w);
        update_pairs(grid, &mut sp, &s_pos, params, &inner_params, &inner_opts, pairs)?;
        if let Some(sn_mut) = sn.as_mut() {
            prev_zn.as_mut().unwrap().assign(&sn_mut.z);
            prev_wn.as_mut().unwrap().assign(&sn_mut.w);
            update_pairs(grid, sn_mut, &s_neg, params, &inner_params, &inner_opts, pairs)?;
        }

        // dual ascents
        for tt in 0..t_frames {
            for k in 0..n {
                let snv = if signed { s_neg[(k, tt)] } else { T::zero() };
                a_dual[(k, tt)] += x[(k, tt)] - s_pos[(k, tt)] + snv - l[(k, tt)];
                d_dual[(k, tt)] += l[(k, tt)] - t_aux[(k, tt)];
            }
        }
        for p in 0..pairs {
            for k in 0..n {
                sp.b[(k, p)] += sp.z[(k, p)] - s_pos[(k, p)];
                sp.c[(k, p)] += sp.w[(k, p)] - s_pos[(k, p + 1)];
            }
        }
        if let Some(sn_mut) = sn.as_mut() {
            for p in 0..pairs {
                for k in 0..n {
                    sn_mut.b[(k, p)] += sn_mut.z[(k, p)] - s_neg[(k, p)];
                    sn_mut.c[(k, p)] += sn_mut.w[(k, p)] - s_neg[(k, p + 1)];
                }
            }
        }

        // stacked primal/dual residuals over every split constraint
        let mut primal = T::zero();
        let mut dual = T::zero();
        for tt in 0..t_frames {
            for k in 0..n {
                let snv = if signed { s_neg[(k, tt)] } else { T::zero() };
                let e1 = x[(k, tt)] - s_pos[(k, tt)] + snv - l[(k, tt)];
                let e2 = l[(k, tt)] - t_aux[(k, tt)];
                primal += e1 * e1 + e2 * e2;
                let dx = x[(k, tt)] - prev_x[(k, tt)];
                let dt = t_aux[(k, tt)] - prev_t[(k, tt)];
                dual += dx * dx + dt * dt;
            }
        }
        for p in 0..pairs {
            for k in 0..n {
                let e1 = sp.z[(k, p)] - s_pos[(k, p)];
                let e2 = sp.w[(k, p)] - s_pos[(k, p + 1)];
                primal += e1 * e1 + e2 * e2;
                let dz = sp.z[(k, p)] - prev_z[(k, p)];
                let dw = sp.w[(k, p)] - prev_w[(k, p)];
                dual += dz * dz + dw * dw;
            }
        }
        if let Some(sn_ref) = &sn {
            let (pzn, pwn) = (prev_zn.as_ref().unwrap(), prev_wn.as_ref().unwrap());
            for p in 0..pairs {
                for k in 0..n {
                    let e1 = sn_ref.z[(k, p)] - s_neg[(k, p)];
                    let e2 = sn_ref.w[(k, p)] - s_neg[(k, p + 1)];
                    primal += e1 * e1 + e2 * e2;
                    let dz = sn_ref.z[(k, p)] - pzn[(k, p)];
                    let dw = sn_ref.w[(k, p)] - pwn[(k, p)];
                    dual += dz * dz + dw * dw;
                }
            }
        }
        let primal = primal.sqrt();
        let dual = rho * dual.sqrt();
        history.push((primal, dual));
        if !primal.is_finite() || !dual.is_finite() {
            return Err(CoreError::NumericalFailure(format!(
                "rpca solve diverged at iteration {iter}"
            )));
        }
        if primal < params.eps && dual < params.eps {
            converged = true;
            break;
        }
    }

    let s = if signed {
        let mut s = s_pos.clone();
        s -= &s_neg;
        s
    } else {
        s_pos.clone()
    };
    Ok(RpcaResult {
        s,
        s_pos: if signed { Some(s_pos) } else { None },
        s_neg: if signed { Some(s_neg) } else { None },
        l,
        iterations,
        residual_history: history,
        converged,
    })
}

/// Soft-threshold s-update at the weighted average of the x-site and the
/// adjacent-pair sites. For the signed solve, `other` is the opposite sign
/// component and enters the x-site with the appropriate sign.
#[allow(clippy::too_many_arguments)]
fn update_s<T: Scalar>(
    s: &mut Array2<T>,
    x: &Array2<T>,
    l: &Array2<T>,
    a_dual: &Array2<T>,
    splits: &Splits<T>,
    other: &Array2<T>,
    signed: bool,
    negative_part: bool,
    lambda: T,
    rho: T,
    pairs: usize,
) {
    let (n, t_frames) = s.dim();
    for tt in 0..t_frames {
        let omega_z = if tt < pairs { T::one() } else { T::zero() };
        let omega_w = if tt >= 1 && pairs > 0 { T::one() } else { T::zero() };
        let sigma_t = T::one() + omega_z + omega_w;
        let thresh = lambda / (rho * sigma_t);
        for k in 0..n {
            // x-constraint site
            let mut kt = if !signed {
                x[(k, tt)] - l[(k, tt)] + a_dual[(k, tt)]
            } else if !negative_part {
                // X - S+ + S- - L + A = 0  =>  site for S+ is X + S- - L + A
                x[(k, tt)] + other[(k, tt)] - l[(k, tt)] + a_dual[(k, tt)]
            } else {
                // site for S- is S+ - X + L - A
                other[(k, tt)] - x[(k, tt)] + l[(k, tt)] - a_dual[(k, tt)]
            };
            if omega_z > T::zero() {
                kt += splits.z[(k, tt)] + splits.b[(k, tt)];
            }
            if omega_w > T::zero() {
                kt += splits.w[(k, tt - 1)] + splits.c[(k, tt - 1)];
            }
            s[(k, tt)] = (kt / sigma_t - thresh).max(T::zero());
        }
    }
}

fn update_pairs<T: Scalar>(
    grid: Grid2,
    splits: &mut Splits<T>,
    s: &Array2<T>,
    params: &RpcaParams<T>,
    inner_params: &UotParams<T>,
    inner_opts: &RunOpts<T>,
    pairs: usize,
) -> Result<()> {
    let n = grid.len();
    let mut v1 = vec![T::zero(); n];
    let mut v2 = vec![T::zero(); n];
    let mut zc = vec![T::zero(); n];
    let mut wc = vec![T::zero(); n];
    for p in 0..pairs {
        for k in 0..n {
            v1[k] = s[(k, p)] - splits.b[(k, p)];
            v2[k] = s[(k, p + 1)] - splits.c[(k, p)];
        }
        match &mut splits.prox[p] {
            PairProx::Transport(state) => {
                let inputs = ProxInputs::Pair { p0: &v1, p1: &v2 };
                prox::run_prox(state, &inputs, inner_params, inner_opts);
                zc.copy_from_slice(state.x_first());
                wc.copy_from_slice(state.x_second());
            }
            PairProx::Blur(state) => {
                blur_diff_prox(
                    grid,
                    state,
                    &v1,
                    &v2,
                    params.kappa / params.rho,
                    T::one(),
                    params.inner_iters,
                    &mut zc,
                    &mut wc,
                );
            }
            PairProx::Identity => {
                zc.copy_from_slice(&v1);
                wc.copy_from_slice(&v2);
            }
        }
        for k in 0..n {
            splits.z[(k, p)] = zc[k];
            splits.w[(k, p)] = wc[k];
        }
    }
    Ok(())
}
