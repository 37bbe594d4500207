//! End-to-end checks of the dynamic-filtering and RPCA solvers: objective
//! descent, constraint satisfaction, baseline equivalences, warm-start
//! budgets, and the signed split.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uot_core::df::{df_solve, DfParams, DfRegularizer, MeasurementOp};
use uot_core::grid::{DensityField, Grid2};
use uot_core::linalg::thin_svd;
use uot_core::prox::{uot_evaluate, PNorm};
use uot_core::rpca::{rpca_solve, rpca_solve_signed, FrameBatch, PhiSet, RpcaParams, RpcaVariant};

fn sparse_field(grid: Grid2, rng: &mut ChaCha8Rng, k: usize) -> DensityField<f64> {
    let mut v = vec![0.0; grid.len()];
    for _ in 0..k {
        let idx = rng.random_range(0..grid.len());
        v[idx] += rng.random_range(0.5..1.5);
    }
    DensityField::from_vec(grid, v).unwrap()
}

fn gaussian_phi(m: usize, n: usize, rng: &mut ChaCha8Rng) -> MeasurementOp<f64> {
    let scale = (1.0 / m as f64).sqrt();
    let mat = Array2::from_shape_fn((m, n), |_| {
        // Box-Muller keeps this test free of an extra dependency
        let u1: f64 = rng.random_range(1e-12..1.0);
        let u2: f64 = rng.random_range(0.0..1.0);
        scale * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    });
    MeasurementOp::dense(mat).unwrap()
}

fn df_objective(
    y: &[f64],
    phi: &MeasurementOp<f64>,
    prior: &DensityField<f64>,
    params: &DfParams<f64>,
    s: &DensityField<f64>,
) -> f64 {
    let fit: f64 = phi
        .apply(s.values())
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        * 0.5;
    let sparsity = params.lambda * s.values().iter().map(|v| v.abs()).sum::<f64>();
    let dynamics = match params.regularizer {
        DfRegularizer::Uot => {
            params.kappa * uot_evaluate(s, prior, params.mu, params.p_norm).unwrap()
        }
        DfRegularizer::L1Diff => {
            params.l1_diff_weight
                * s.values()
                    .iter()
                    .zip(prior.values())
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
        }
        _ => 0.0,
    };
    fit + sparsity + dynamics
}

#[test]
fn df_objective_descends_from_cold_start() {
    let grid = Grid2::new(6, 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..3 {
        let truth = sparse_field(grid, &mut rng, 4);
        let prior = sparse_field(grid, &mut rng, 4);
        let phi = gaussian_phi(24, grid.len(), &mut rng);
        let mut y = phi.apply(truth.values());
        for v in &mut y {
            *v += rng.random_range(-0.05..0.05);
        }
        let mut params = DfParams::new(DfRegularizer::Uot);
        params.kappa = 0.2;
        params.mu = 1.0;
        params.lambda = 0.01;
        params.eps = 1e-4;
        let res = df_solve(&y, &phi, &prior, &params, None).unwrap();
        let cold = df_objective(&y, &phi, &prior, &params, &DensityField::zeros(grid));
        let fin = df_objective(&y, &phi, &prior, &params, &res.estimate);
        assert!(fin <= cold + 1e-9, "trial {trial}: {fin} vs cold {cold}");
    }
}

#[test]
fn l1_diff_with_vanishing_weight_matches_bpdn() {
    let grid = Grid2::new(5, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let truth = sparse_field(grid, &mut rng, 3);
    let phi = gaussian_phi(15, grid.len(), &mut rng);
    let y = phi.apply(truth.values());

    let mut base = DfParams::new(DfRegularizer::None);
    base.lambda = 0.05;
    base.eps = 1e-7;
    base.max_iters = 50_000;
    let bpdn = df_solve(&y, &phi, &truth, &base, None).unwrap();

    let mut diff = base.clone();
    diff.regularizer = DfRegularizer::L1Diff;
    diff.l1_diff_weight = 1e-9;
    let with_diff = df_solve(&y, &phi, &truth, &diff, None).unwrap();

    let err = bpdn
        .estimate
        .values()
        .iter()
        .zip(with_diff.estimate.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-4, "bpdn vs l1_diff(w->0): {err}");
}

/// The early-termination budget study: with warm starts and a penalty
/// weight that keeps the outer run long enough to amortize the inner
/// iterations, a single prox iteration per outer step inflates the outer
/// count only marginally.
#[test]
fn rpca_inner_budget_with_warm_starts() {
    let grid = Grid2::new(10, 10).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (batch, _, _) = rpca_instance(grid, 6, 60, 1, 5, 0.001, &mut rng);
    let mut params = RpcaParams::new(RpcaVariant::Uot);
    params.lambda = 0.1;
    params.kappa = 0.2;
    params.mu = 1.0;
    params.rho = 0.1;
    params.eps = 1e-4;
    params.max_iters = 30_000;
    params.inner_iters = 30;
    let baseline = rpca_solve(&batch, &params).unwrap();
    params.inner_iters = 1;
    let lean = rpca_solve(&batch, &params).unwrap();
    assert!(baseline.converged && lean.converged);
    let inflation = lean.iterations as f64 / baseline.iterations as f64 - 1.0;
    assert!(
        inflation <= 0.10,
        "inner_iters=1 inflates outer count by {:.1}% ({} vs {})",
        inflation * 100.0,
        lean.iterations,
        baseline.iterations
    );
}

fn rpca_instance(
    grid: Grid2,
    t_frames: usize,
    m_rows: usize,
    rank: usize,
    k_sparse: usize,
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> (FrameBatch<f64>, Array2<f64>, Array2<f64>) {
    let n = grid.len();
    let u = Array2::from_shape_fn((n, rank), |_| rng.random_range(0.0..1.0));
    let v = Array2::from_shape_fn((t_frames, rank), |_| rng.random_range(0.0..1.0));
    let l_true = u.dot(&v.t()) / (4.0 * rank as f64);
    let mut s_true = Array2::zeros((n, t_frames));
    for t in 0..t_frames {
        for _ in 0..k_sparse {
            let idx = rng.random_range(0..n);
            s_true[(idx, t)] += rng.random_range(0.5..1.5);
        }
    }
    let mut phis = Vec::new();
    let mut y = Array2::zeros((m_rows, t_frames));
    for t in 0..t_frames {
        let phi = gaussian_phi(m_rows, n, rng);
        let col: Vec<f64> = (0..n).map(|k| s_true[(k, t)] + l_true[(k, t)]).collect();
        let mut obs = phi.apply(&col);
        for o in &mut obs {
            *o += sigma
                * {
                    let u1: f64 = rng.random_range(1e-12..1.0);
                    let u2: f64 = rng.random_range(0.0..1.0);
                    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
                };
        }
        for (i, o) in obs.iter().enumerate() {
            y[(i, t)] = *o;
        }
        phis.push(phi);
    }
    let batch = FrameBatch::new(grid, y, PhiSet::PerFrame(phis)).unwrap();
    (batch, s_true, l_true)
}

#[test]
fn rpca_pure_low_rank_keeps_sparse_component_empty() {
    let grid = Grid2::new(6, 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let n = grid.len();
    let t_frames = 5;
    let u = Array2::from_shape_fn((n, 1), |_| rng.random_range(0.0..1.0));
    let v = Array2::from_shape_fn((t_frames, 1), |_| rng.random_range(0.0..1.0));
    let l_true = u.dot(&v.t()) / 4.0;
    let mut y = Array2::<f64>::zeros((n, t_frames));
    for t in 0..t_frames {
        for k in 0..n {
            y[(k, t)] = l_true[(k, t)];
        }
    }
    let batch = FrameBatch::new(grid, y, PhiSet::Shared(MeasurementOp::identity(n))).unwrap();
    let mut params = RpcaParams::new(RpcaVariant::None);
    params.lambda = 0.3;
    params.eps = 1e-5;
    let res = rpca_solve(&batch, &params).unwrap();
    assert!(res.converged);
    let s_l1: f64 = res.s.iter().map(|v| v.abs()).sum();
    let l_l1: f64 = res.l.iter().map(|v| v.abs()).sum();
    assert!(s_l1 / l_l1 < 1e-2, "sparse leakage {}", s_l1 / l_l1);
}

#[test]
fn rpca_kappa_zero_equals_plain_variant() {
    let grid = Grid2::new(5, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let (batch, _, _) = rpca_instance(grid, 4, 20, 1, 3, 0.001, &mut rng);
    let mut plain = RpcaParams::new(RpcaVariant::None);
    plain.lambda = 0.1;
    plain.eps = 1e-4;
    plain.max_iters = 3000;
    let mut inert = plain.clone();
    inert.variant = RpcaVariant::Uot;
    inert.kappa = 0.0;
    let a = rpca_solve(&batch, &plain).unwrap();
    let b = rpca_solve(&batch, &inert).unwrap();
    let diff = a
        .s
        .iter()
        .zip(b.s.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(diff < 1e-12, "kappa=0 should be structurally inert: {diff}");
}

#[test]
fn rpca_split_constraints_feasible_at_termination() {
    let grid = Grid2::new(5, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let (batch, _, _) = rpca_instance(grid, 4, 20, 1, 3, 0.001, &mut rng);
    let mut params = RpcaParams::new(RpcaVariant::Uot);
    params.lambda = 0.1;
    params.kappa = 0.2;
    params.mu = 1.0;
    params.eps = 1e-4;
    params.inner_iters = 10;
    let res = rpca_solve(&batch, &params).unwrap();
    assert!(res.converged, "iterations {}", res.iterations);
    let (primal, dual) = res.final_residuals().unwrap();
    assert!(primal < params.eps && dual < params.eps);
}

#[test]
fn rpca_objective_descends_from_cold_start() {
    let grid = Grid2::new(5, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(27);
    let (batch, _, _) = rpca_instance(grid, 4, 20, 1, 3, 0.01, &mut rng);
    let mut params = RpcaParams::new(RpcaVariant::Uot);
    params.lambda = 0.1;
    params.kappa = 0.2;
    params.mu = 1.0;
    params.eps = 1e-4;
    params.inner_iters = 10;
    let res = rpca_solve(&batch, &params).unwrap();

    let objective = |s: &Array2<f64>, l: &Array2<f64>| -> f64 {
        let n = grid.len();
        let mut fit = 0.0;
        for t in 0..batch.frames() {
            let col: Vec<f64> = (0..n).map(|k| s[(k, t)] + l[(k, t)]).collect();
            let pred = batch.phi(t).apply(&col);
            fit += pred
                .iter()
                .zip(batch.y().column(t).iter())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>();
        }
        let gamma = params.effective_gamma(n, batch.frames());
        let s_l1: f64 = s.iter().map(|v| v.abs()).sum();
        let nuc: f64 = thin_svd(l).unwrap().sigma.iter().sum();
        let mut dyn_cost = 0.0;
        for t in 0..batch.frames() - 1 {
            let a = DensityField::from_vec(grid, (0..n).map(|k| s[(k, t)].max(0.0)).collect())
                .unwrap();
            let b = DensityField::from_vec(grid, (0..n).map(|k| s[(k, t + 1)].max(0.0)).collect())
                .unwrap();
            dyn_cost += uot_evaluate(&a, &b, params.mu, PNorm::One).unwrap();
        }
        0.5 * fit + params.lambda * s_l1 + gamma * nuc + params.kappa * dyn_cost
    };
    let zero = Array2::zeros((grid.len(), batch.frames()));
    let cold = objective(&zero, &zero);
    let fin = objective(&res.s, &res.l);
    assert!(fin <= cold + 1e-9, "{fin} vs cold {cold}");
}

#[test]
fn signed_split_stays_positive_on_nonneg_data() {
    let grid = Grid2::new(5, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(28);
    let (batch, _, _) = rpca_instance(grid, 4, 20, 1, 3, 0.001, &mut rng);
    let mut params = RpcaParams::new(RpcaVariant::UotSigned);
    params.lambda = 0.1;
    params.kappa = 0.2;
    params.mu = 1.0;
    params.eps = 1e-4;
    params.inner_iters = 10;
    let res = rpca_solve_signed(&batch, &params).unwrap();
    let s_pos_l1: f64 = res.s_pos.as_ref().unwrap().iter().map(|v| v.abs()).sum();
    let s_neg_l1: f64 = res.s_neg.as_ref().unwrap().iter().map(|v| v.abs()).sum();
    assert!(
        s_neg_l1 <= 1e-3 * s_pos_l1.max(1e-12),
        "negative part {s_neg_l1} vs positive {s_pos_l1}"
    );
}

#[test]
fn signed_split_swaps_under_sign_flip() {
    let grid = Grid2::new(4, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let n = grid.len();
    let t_frames = 3;
    // sparse-only data so the nonnegative low-rank component stays inert
    let mut s_true = Array2::<f64>::zeros((n, t_frames));
    for t in 0..t_frames {
        for _ in 0..2 {
            s_true[(rng.random_range(0..n), t)] += rng.random_range(0.5..1.5);
        }
    }
    let mut y = Array2::<f64>::zeros((n, t_frames));
    for t in 0..t_frames {
        for k in 0..n {
            y[(k, t)] = s_true[(k, t)];
        }
    }
    let phis = PhiSet::Shared(MeasurementOp::identity(n));
    let batch_pos = FrameBatch::new(grid, y.clone(), phis.clone()).unwrap();
    let batch_neg = FrameBatch::new(grid, -y, phis).unwrap();
    let mut params = RpcaParams::new(RpcaVariant::UotSigned);
    params.lambda = 0.05;
    params.gamma = 10.0;
    params.gamma_rule = uot_core::rpca::GammaRule::Explicit;
    params.kappa = 0.1;
    params.mu = 1.0;
    params.eps = 1e-5;
    params.inner_iters = 10;
    let a = rpca_solve_signed(&batch_pos, &params).unwrap();
    let b = rpca_solve_signed(&batch_neg, &params).unwrap();
    let pos_a = a.s_pos.as_ref().unwrap();
    let neg_b = b.s_neg.as_ref().unwrap();
    let diff = pos_a
        .iter()
        .zip(neg_b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(diff < 1e-3, "S+(Y) vs S-(-Y): {diff}");
}

#[test]
fn signed_split_matches_unsigned_objective_on_nonneg_data() {
    let grid = Grid2::new(4, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let (batch, _, _) = rpca_instance(grid, 3, 16, 1, 2, 0.001, &mut rng);
    let mut params = RpcaParams::new(RpcaVariant::Uot);
    params.lambda = 0.1;
    params.kappa = 0.1;
    params.mu = 1.0;
    params.eps = 1e-5;
    params.inner_iters = 10;
    let unsigned = rpca_solve(&batch, &params).unwrap();
    let mut signed_params = params.clone();
    signed_params.variant = RpcaVariant::UotSigned;
    let signed = rpca_solve_signed(&batch, &signed_params).unwrap();

    let objective = |s: &Array2<f64>, l: &Array2<f64>, lam_s: f64| -> f64 {
        let n = grid.len();
        let mut fit = 0.0;
        for t in 0..batch.frames() {
            let col: Vec<f64> = (0..n).map(|k| s[(k, t)] + l[(k, t)]).collect();
            let pred = batch.phi(t).apply(&col);
            fit += pred
                .iter()
                .zip(batch.y().column(t).iter())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>();
        }
        let gamma = params.effective_gamma(n, batch.frames());
        let nuc: f64 = thin_svd(l).unwrap().sigma.iter().sum();
        0.5 * fit + lam_s + gamma * nuc
    };
    // compare the static parts; dynamics at S- = 0 coincide
    let lam_u = params.lambda * unsigned.s.iter().map(|v| v.abs()).sum::<f64>();
    let lam_s = signed_params.lambda
        * (signed.s_pos.as_ref().unwrap().iter().map(|v| v.abs()).sum::<f64>()
            + signed.s_neg.as_ref().unwrap().iter().map(|v| v.abs()).sum::<f64>());
    let obj_u = objective(&unsigned.s, &unsigned.l, lam_u);
    let obj_s = objective(&signed.s, &signed.l, lam_s);
    assert!(
        (obj_u - obj_s).abs() <= 5e-3 * obj_u.max(1.0),
        "{obj_u} vs {obj_s}"
    );
}

#[test]
fn rpca_l1_blur_variant_runs_and_converges() {
    let grid = Grid2::new(5, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (batch, _, _) = rpca_instance(grid, 4, 20, 1, 3, 0.001, &mut rng);
    let mut params = RpcaParams::new(RpcaVariant::L1Blur);
    params.lambda = 0.1;
    params.kappa = 0.05;
    params.eps = 1e-4;
    params.inner_iters = 10;
    let res = rpca_solve(&batch, &params).unwrap();
    assert!(res.converged, "iterations {}", res.iterations);
    let (primal, dual) = res.final_residuals().unwrap();
    assert!(primal < params.eps && dual < params.eps);
}

#[test]
fn rpca_rejects_single_frame_dynamic_variants() {
    let grid = Grid2::new(3, 3).unwrap();
    let y = Array2::<f64>::zeros((9, 1));
    let batch = FrameBatch::new(grid, y, PhiSet::Shared(MeasurementOp::identity(9))).unwrap();
    let params = RpcaParams::new(RpcaVariant::Uot);
    assert!(rpca_solve(&batch, &params).is_err());
}
