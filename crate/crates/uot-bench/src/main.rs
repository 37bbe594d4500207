//! Benchmark and utility CLI for the transport solvers.
//!
//! Exit codes: 0 on success, 2 on invalid input, 3 on solver
//! non-convergence (partial outputs are still written).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;
use uot_bench::btf::{read_btf, write_btf, Tensor};
use uot_bench::config::{ExperimentConfig, ExperimentId};
use uot_bench::error::{BenchError, Result};
use uot_bench::experiments::{run_experiment, sweep_params, SweepObjective};
use uot_bench::synth::{gen_lowrank, gen_sparse_walk, MassRegime, SparseWalkSpec};
use uot_bench::tables::{write_csv, write_jsonl, MetricsRow};
use uot_core::df::{df_solve, DfParams, DfRegularizer, MeasurementOp};
use uot_core::oracles::uot_1d_lp;
use uot_core::prox::{bot_evaluate, uot_evaluate, PNorm};
use uot_core::rpca::{rpca_solve, rpca_solve_signed, FrameBatch, GammaRule, PhiSet, RpcaParams, RpcaVariant};
use uot_core::{DensityField, Grid2};

#[derive(Parser)]
#[command(name = "uot-bench", version, about = "transport-regularized solvers: data, benchmarks, experiments")]
struct Cli {
    /// Base seed for all randomness.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// ADMM stopping tolerance override.
    #[arg(long, global = true)]
    eps: Option<f64>,

    /// Outer iteration cap override.
    #[arg(long, global = true)]
    max_iters: Option<usize>,

    /// Inner prox iterations per outer step.
    #[arg(long, global = true)]
    inner_iters: Option<usize>,

    /// Worker threads for sweeps and trials.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,

    /// Output path (file or directory, subcommand-dependent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic data as BTF tensors.
    Gen(GenArgs),
    /// Transport cost between two BTF density fields.
    EvalUot(EvalArgs),
    /// Single-frame dynamic-filtering solve.
    SolveDf(SolveDfArgs),
    /// Batch sparse + low-rank separation.
    SolveRpca(SolveRpcaArgs),
    /// Per-iteration runtime scaling across problem sizes.
    BenchRuntime(BenchRuntimeArgs),
    /// Exhaustive parameter sweep for one method.
    Sweep(SweepArgs),
    /// Run a full experiment by figure id.
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
struct GenArgs {
    /// What to generate: walk | lowrank
    #[arg(long, default_value = "walk")]
    kind: String,
    #[arg(long, default_value_t = 10)]
    nx: usize,
    #[arg(long, default_value_t = 10)]
    ny: usize,
    #[arg(long, default_value_t = 6)]
    frames: usize,
    #[arg(long, default_value_t = 5)]
    targets: usize,
    #[arg(long, default_value_t = 1)]
    rank: usize,
    /// Mass regime: constant | growth | decay
    #[arg(long, default_value = "constant")]
    regime: String,
    #[arg(long, default_value_t = 0.0)]
    rate: f64,
    /// Intensity range lo:hi
    #[arg(long, default_value = "0.5:1.5")]
    intensity: String,
    /// Occluding column band j0:j1 (0-based, inclusive)
    #[arg(long)]
    occlusion: Option<String>,
}

#[derive(Args)]
struct EvalArgs {
    p: PathBuf,
    q: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    /// Residual penalty exponent: 1 | 2
    #[arg(long, default_value_t = 1)]
    p_norm: u8,
    /// Balanced cost (rejects unbalanced inputs).
    #[arg(long)]
    balanced: bool,
    /// Cross-check against the exhaustive 1-D oracle (rows of <= 6 pixels).
    #[arg(long)]
    oracle: bool,
}

#[derive(Args)]
struct SolveDfArgs {
    #[arg(long)]
    y: PathBuf,
    /// Dense operator tensor [M, N]; identity when omitted.
    #[arg(long)]
    phi: Option<PathBuf>,
    #[arg(long)]
    prior: PathBuf,
    /// uot | bot | l1 | none
    #[arg(long, default_value = "uot")]
    regularizer: String,
    #[arg(long, default_value_t = 0.5)]
    kappa: f64,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
}

#[derive(Args)]
struct SolveRpcaArgs {
    /// Observations [M, T].
    #[arg(long)]
    y: PathBuf,
    /// Operator tensor: [M, N] shared or [M, N, T] per-frame; identity
    /// when omitted (requires M = N).
    #[arg(long)]
    phi: Option<PathBuf>,
    #[arg(long)]
    nx: usize,
    #[arg(long)]
    ny: usize,
    /// uot | uot-signed | bot | l1 | none
    #[arg(long, default_value = "uot")]
    variant: String,
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 0.2)]
    kappa: f64,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
}

#[derive(Args)]
struct BenchRuntimeArgs {
    /// Comma-separated pixel counts (perfect squares).
    #[arg(long)]
    sizes: Option<String>,
    #[arg(long, default_value_t = 5)]
    runs: usize,
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment whose instances to sweep: regimes | rpca_sweep
    #[arg(long, default_value = "rpca_sweep")]
    experiment: String,
    /// Method to tune.
    #[arg(long, default_value = "uot")]
    method: String,
    /// rmse | f1
    #[arg(long, default_value = "rmse")]
    objective: String,
    /// Optional key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ReproduceArgs {
    /// fig1 | fig3 | fig4 | fig5 | fig6
    figure: String,
    /// Optional key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Gen(args) => cmd_gen(&cli, args),
        Command::EvalUot(args) => cmd_eval(&cli, args),
        Command::SolveDf(args) => cmd_solve_df(&cli, args),
        Command::SolveRpca(args) => cmd_solve_rpca(&cli, args),
        Command::BenchRuntime(args) => cmd_bench_runtime(&cli, args),
        Command::Sweep(args) => cmd_sweep(&cli, args),
        Command::Reproduce(args) => cmd_reproduce(&cli, args),
    }
}

fn parse_regime(s: &str) -> Result<MassRegime> {
    match s {
        "constant" => Ok(MassRegime::Constant),
        "growth" => Ok(MassRegime::Growth),
        "decay" => Ok(MassRegime::Decay),
        other => Err(BenchError::InvalidInput(format!(
            "unknown regime '{other}'"
        ))),
    }
}

fn parse_pair<T: std::str::FromStr>(s: &str, what: &str) -> Result<(T, T)> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| BenchError::InvalidInput(format!("{what}: expected a:b, got '{s}'")))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<T>()
            .map_err(|_| BenchError::InvalidInput(format!("{what}: cannot parse '{v}'")))
    };
    Ok((parse(a)?, parse(b)?))
}

fn cmd_gen(cli: &Cli, args: &GenArgs) -> Result<()> {
    let out = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.btf", args.kind)));
    match args.kind.as_str() {
        "walk" => {
            let grid = Grid2::new(args.nx, args.ny)?;
            let mut spec = SparseWalkSpec::new(grid, args.frames, args.targets, cli.seed);
            spec.regime = parse_regime(&args.regime)?;
            spec.mass_change_rate = args.rate;
            spec.intensity_range = parse_pair(&args.intensity, "intensity")?;
            if let Some(band) = &args.occlusion {
                spec.occlusion = Some(parse_pair(band, "occlusion")?);
            }
            let stack = gen_sparse_walk(&spec)?;
            write_btf(&out, &Tensor::from_frames(grid, &stack))?;
        }
        "lowrank" => {
            let n = args.nx * args.ny;
            let l = gen_lowrank(n, args.frames, args.rank, cli.seed)?;
            let grid = Grid2::new(args.nx, args.ny)?;
            write_btf(&out, &Tensor::from_frames(grid, &l))?;
        }
        other => {
            return Err(BenchError::InvalidInput(format!(
                "unknown kind '{other}' (walk, lowrank)"
            )))
        }
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn load_field(path: &Path) -> Result<DensityField<f64>> {
    let tensor = read_btf(path)?;
    let grid = tensor.implied_grid()?;
    tensor.to_field(grid)
}

fn cmd_eval(_cli: &Cli, args: &EvalArgs) -> Result<()> {
    let p = load_field(&args.p)?;
    let q_tensor = read_btf(&args.q)?;
    let q = q_tensor.to_field(p.grid()).map_err(|_| {
        BenchError::InvalidInput("the two fields live on different grids".into())
    })?;
    let p_norm = match args.p_norm {
        1 => PNorm::One,
        2 => PNorm::Two,
        other => {
            return Err(BenchError::InvalidInput(format!(
                "p-norm must be 1 or 2, got {other}"
            )))
        }
    };
    let value = if args.balanced {
        bot_evaluate(&p, &q)?
    } else {
        uot_evaluate(&p, &q, args.mu, p_norm)?
    };
    println!("cost = {value}");
    if args.oracle {
        let grid = p.grid();
        if grid.n_x() != 1 || grid.n_y() > 6 {
            return Err(BenchError::InvalidInput(
                "--oracle needs a 1-row field with at most 6 pixels".into(),
            ));
        }
        if args.balanced || matches!(p_norm, PNorm::Two) {
            return Err(BenchError::InvalidInput(
                "--oracle covers the unbalanced p=1 cost".into(),
            ));
        }
        let exact = uot_1d_lp(p.values(), q.values(), args.mu)?;
        println!("oracle = {exact}");
        println!("difference = {:e}", (value - exact).abs());
    }
    Ok(())
}

fn cmd_solve_df(cli: &Cli, args: &SolveDfArgs) -> Result<()> {
    let prior = load_field(&args.prior)?;
    let n = prior.grid().len();
    let y = read_btf(&args.y)?;
    if y.ndim() != 1 {
        return Err(BenchError::InvalidInput(
            "y must be a 1-dimensional tensor".into(),
        ));
    }
    let phi = match &args.phi {
        None => MeasurementOp::identity(n),
        Some(path) => {
            let t = read_btf(path)?;
            let m = t.to_matrix()?;
            if m.ncols() != n {
                return Err(BenchError::InvalidInput(format!(
                    "operator has {} columns, prior implies {}",
                    m.ncols(),
                    n
                )));
            }
            MeasurementOp::dense(m)?
        }
    };
    let regularizer = match args.regularizer.as_str() {
        "uot" => DfRegularizer::Uot,
        "bot" => DfRegularizer::Bot,
        "l1" => DfRegularizer::L1Diff,
        "none" => DfRegularizer::None,
        other => {
            return Err(BenchError::InvalidInput(format!(
                "unknown regularizer '{other}'"
            )))
        }
    };
    let mut params = DfParams::new(regularizer);
    params.kappa = args.kappa;
    params.mu = args.mu;
    params.lambda = args.lambda;
    params.l1_diff_weight = args.kappa;
    params.rho = args.rho;
    if let Some(eps) = cli.eps {
        params.eps = eps;
    }
    if let Some(m) = cli.max_iters {
        params.max_iters = m;
    }
    if let Some(i) = cli.inner_iters {
        params.inner_iters = i;
    }
    let res = df_solve(&y.data, &phi, &prior, &params, None)?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("estimate.btf"));
    write_btf(&out, &Tensor::from_field(&res.estimate))?;
    let (primal, dual) = res.final_residuals().unwrap_or((f64::NAN, f64::NAN));
    println!(
        "iterations = {}, converged = {}, primal = {primal:.3e}, dual = {dual:.3e}",
        res.iterations, res.converged
    );
    println!("wrote {}", out.display());
    if !res.converged {
        return Err(BenchError::Core(uot_core::CoreError::NonConvergence {
            iterations: res.iterations,
            residual: primal.max(dual),
            history: vec![],
        }));
    }
    Ok(())
}

fn cmd_solve_rpca(cli: &Cli, args: &SolveRpcaArgs) -> Result<()> {
    let grid = Grid2::new(args.nx, args.ny)?;
    let n = grid.len();
    let y = read_btf(&args.y)?.to_matrix()?;
    let t_frames = y.ncols();
    let phis = match &args.phi {
        None => {
            if y.nrows() != n {
                return Err(BenchError::InvalidInput(format!(
                    "identity operator needs M = N, got M = {}, N = {n}",
                    y.nrows()
                )));
            }
            PhiSet::Shared(MeasurementOp::identity(n))
        }
        Some(path) => {
            let t = read_btf(path)?;
            match t.ndim() {
                2 => PhiSet::Shared(MeasurementOp::dense(t.to_matrix()?)?),
                3 => {
                    let m_rows = t.dims[0] as usize;
                    let cols = t.dims[1] as usize;
                    let count = t.dims[2] as usize;
                    if count != t_frames {
                        return Err(BenchError::InvalidInput(format!(
                            "{count} operators for {t_frames} frames"
                        )));
                    }
                    let mut list = Vec::with_capacity(count);
                    for f in 0..count {
                        let mut m = Array2::zeros((m_rows, cols));
                        for c in 0..cols {
                            for r in 0..m_rows {
                                m[(r, c)] = t.data[f * m_rows * cols + c * m_rows + r];
                            }
                        }
                        list.push(MeasurementOp::dense(m)?);
                    }
                    PhiSet::PerFrame(list)
                }
                d => {
                    return Err(BenchError::InvalidInput(format!(
                        "operator tensor must be 2- or 3-dimensional, got {d}"
                    )))
                }
            }
        }
    };
    let batch = FrameBatch::new(grid, y, phis)?;
    let variant = match args.variant.as_str() {
        "uot" => RpcaVariant::Uot,
        "uot-signed" => RpcaVariant::UotSigned,
        "bot" => RpcaVariant::Bot,
        "l1" => RpcaVariant::L1Blur,
        "none" => RpcaVariant::None,
        other => {
            return Err(BenchError::InvalidInput(format!(
                "unknown variant '{other}'"
            )))
        }
    };
    let mut params = RpcaParams::new(variant);
    params.lambda = args.lambda;
    params.kappa = args.kappa;
    params.mu = args.mu;
    params.rho = args.rho;
    if let Some(g) = args.gamma {
        params.gamma = g;
        params.gamma_rule = GammaRule::Explicit;
    }
    if let Some(eps) = cli.eps {
        params.eps = eps;
    }
    if let Some(m) = cli.max_iters {
        params.max_iters = m;
    }
    if let Some(i) = cli.inner_iters {
        params.inner_iters = i;
    }
    let res = if variant == RpcaVariant::UotSigned {
        rpca_solve_signed(&batch, &params)?
    } else {
        rpca_solve(&batch, &params)?
    };
    let out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir).map_err(|source| BenchError::Io {
        path: out_dir.clone(),
        source,
    })?;
    write_btf(&out_dir.join("sparse.btf"), &Tensor::from_frames(grid, &res.s))?;
    write_btf(&out_dir.join("lowrank.btf"), &Tensor::from_frames(grid, &res.l))?;
    let (primal, dual) = res.final_residuals().unwrap_or((f64::NAN, f64::NAN));
    println!(
        "iterations = {}, converged = {}, primal = {primal:.3e}, dual = {dual:.3e}",
        res.iterations, res.converged
    );
    println!("wrote {}", out_dir.join("sparse.btf").display());
    println!("wrote {}", out_dir.join("lowrank.btf").display());
    if !res.converged {
        return Err(BenchError::Core(uot_core::CoreError::NonConvergence {
            iterations: res.iterations,
            residual: primal.max(dual),
            history: vec![],
        }));
    }
    Ok(())
}

fn apply_global_overrides(cfg: &mut ExperimentConfig, cli: &Cli) {
    cfg.seed = cli.seed;
    cfg.workers = cli.workers;
    if let Some(eps) = cli.eps {
        cfg.eps = eps;
    }
    if let Some(m) = cli.max_iters {
        cfg.max_iters = m;
    }
    if let Some(i) = cli.inner_iters {
        cfg.inner_iters = i;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
}

fn write_rows(cfg: &ExperimentConfig, rows: &[MetricsRow]) -> Result<()> {
    std::fs::create_dir_all(&cfg.out_dir).map_err(|source| BenchError::Io {
        path: cfg.out_dir.clone(),
        source,
    })?;
    let base = cfg.out_dir.join(cfg.id.name());
    let csv_path = base.with_extension("csv");
    let jsonl_path = base.with_extension("jsonl");
    write_csv(&csv_path, rows)?;
    write_jsonl(&jsonl_path, rows)?;
    println!("wrote {}", csv_path.display());
    println!("wrote {}", jsonl_path.display());
    Ok(())
}

fn cmd_bench_runtime(cli: &Cli, args: &BenchRuntimeArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::defaults(ExperimentId::Runtime);
    apply_global_overrides(&mut cfg, cli);
    cfg.runs = args.runs;
    if let Some(sizes) = &args.sizes {
        cfg.sizes = sizes
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| BenchError::InvalidInput(format!("bad size '{s}'")))
            })
            .collect::<Result<_>>()?;
    }
    let rows = run_experiment(&cfg)?;
    for row in &rows {
        println!(
            "n = {:6}  iterations = {:5}  per-iteration = {:.3e} s",
            row.n,
            row.iterations.unwrap_or(0),
            row.per_iteration_time_s.unwrap_or(f64::NAN)
        );
    }
    write_rows(&cfg, &rows)
}

fn cmd_sweep(cli: &Cli, args: &SweepArgs) -> Result<()> {
    let id = ExperimentId::parse(&args.experiment)?;
    let mut cfg = ExperimentConfig::defaults(id);
    apply_global_overrides(&mut cfg, cli);
    if let Some(path) = &args.config {
        cfg.apply_file(path)?;
        apply_global_overrides(&mut cfg, cli);
    }
    let objective = SweepObjective::parse(&args.objective)?;
    let outcome = sweep_params(&cfg, &args.method, objective)?;
    println!(
        "best: lambda = {:?}, kappa = {:?}, mu = {:?}, rmse = {:?}, f1 = {:?}",
        outcome.best.lambda, outcome.best.kappa, outcome.best.mu, outcome.best.rmse, outcome.best.f1
    );
    write_rows(&cfg, &outcome.table)
}

fn cmd_reproduce(cli: &Cli, args: &ReproduceArgs) -> Result<()> {
    let id = ExperimentId::from_figure(&args.figure)?;
    let mut cfg = ExperimentConfig::defaults(id);
    apply_global_overrides(&mut cfg, cli);
    if let Some(path) = &args.config {
        cfg.apply_file(path)?;
        apply_global_overrides(&mut cfg, cli);
    }
    let rows = run_experiment(&cfg)?;
    summarize(&cfg, &rows);
    write_rows(&cfg, &rows)
}

fn summarize(cfg: &ExperimentConfig, rows: &[MetricsRow]) {
    match cfg.id {
        ExperimentId::Runtime => {
            let times: Vec<f64> = rows
                .iter()
                .filter_map(|r| r.per_iteration_time_s)
                .collect();
            for pair in times.windows(2) {
                println!("adjacent-size time ratio: {:.2}", pair[1] / pair[0]);
            }
        }
        ExperimentId::Warmstart => {
            for row in rows {
                println!(
                    "inner = {:2}  outer = {:5}  extra = {:.2}%",
                    row.inner_iters.unwrap_or(0),
                    row.iterations.unwrap_or(0),
                    row.extra_pct.unwrap_or(f64::NAN)
                );
            }
        }
        _ => {
            for row in rows.iter().filter(|r| r.selected == Some(true)) {
                println!(
                    "{} {} best: rmse = {:?}, f1 = {:?} (lambda {:?}, kappa {:?}, mu {:?})",
                    row.regime.clone().unwrap_or_default(),
                    row.method,
                    row.rmse,
                    row.f1,
                    row.lambda,
                    row.kappa,
                    row.mu
                );
            }
        }
    }
}
