//! Experiment configuration: per-experiment defaults plus a small
//! `key = value` text format with `#` comments. Lists are comma-separated;
//! ranges are written out explicitly.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{BenchError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentId {
    /// Per-iteration wall time across problem sizes (identity operator).
    Runtime,
    /// Growth/decay reconstruction comparison of the transport priors.
    Regimes,
    /// Online tracking through an occluding band.
    Occlusion,
    /// Sparse+low-rank separation baselines at the reference setting.
    RpcaSweep,
    /// Inner-iteration budget study with warm starts.
    Warmstart,
}

impl ExperimentId {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "runtime" => Ok(Self::Runtime),
            "regimes" => Ok(Self::Regimes),
            "occlusion" => Ok(Self::Occlusion),
            "rpca_sweep" | "rpca-sweep" => Ok(Self::RpcaSweep),
            "warmstart" => Ok(Self::Warmstart),
            other => Err(BenchError::InvalidInput(format!(
                "unknown experiment '{other}' (runtime, regimes, occlusion, rpca_sweep, warmstart)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Runtime => "runtime",
            Self::Regimes => "regimes",
            Self::Occlusion => "occlusion",
            Self::RpcaSweep => "rpca_sweep",
            Self::Warmstart => "warmstart",
        }
    }

    /// Figure-style alias used by the `reproduce` subcommand.
    pub fn from_figure(s: &str) -> Result<Self> {
        match s {
            "fig1" => Ok(Self::Runtime),
            "fig3" => Ok(Self::Regimes),
            "fig4" => Ok(Self::Occlusion),
            "fig5" => Ok(Self::Warmstart),
            "fig6" => Ok(Self::RpcaSweep),
            other => Err(BenchError::InvalidInput(format!(
                "unknown figure id '{other}' (fig1, fig3, fig4, fig5, fig6)"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub id: ExperimentId,
    pub seed: u64,
    pub trials: usize,
    pub eps: f64,
    pub max_iters: usize,
    pub inner_iters: usize,
    pub workers: usize,
    pub out_dir: PathBuf,

    pub grid_side: usize,
    pub frames: usize,
    pub targets: usize,
    pub rank: usize,
    pub sigma: f64,
    pub m_over_n: f64,
    pub rate: f64,
    pub rho: f64,
    /// Mass regime for the generators of single-regime experiments.
    pub regime: String,
    /// Occluding column band, inclusive; defaults are figure-inferred, not
    /// protocol-specified.
    pub occlusion_band: (usize, usize),

    /// Problem sizes (total pixels) for the runtime experiment.
    pub sizes: Vec<usize>,
    /// Timing repetitions per size.
    pub runs: usize,

    pub lambda_grid: Vec<f64>,
    pub kappa_grid: Vec<f64>,
    pub mu_grid: Vec<f64>,
    /// Inner budgets for the warm-start study.
    pub inner_grid: Vec<usize>,
    pub gamma_override: Option<f64>,
}

impl ExperimentConfig {
    /// Desk-scale defaults per experiment.
    pub fn defaults(id: ExperimentId) -> Self {
        let mut cfg = Self {
            id,
            seed: 1,
            trials: 10,
            eps: 1e-3,
            max_iters: 5000,
            inner_iters: 1,
            workers: 1,
            out_dir: PathBuf::from("out"),
            grid_side: 10,
            frames: 2,
            targets: 5,
            rank: 1,
            sigma: 0.1,
            m_over_n: 0.35,
            rate: 0.5,
            rho: 1.0,
            regime: "decay".into(),
            occlusion_band: (4, 5),
            sizes: vec![64, 256, 1024, 4096, 16384],
            runs: 5,
            lambda_grid: vec![0.1],
            kappa_grid: log_grid(1e-2, 10.0, 4),
            mu_grid: log_grid(0.1, 3.0, 4),
            inner_grid: vec![1, 2, 3, 5, 10, 30],
            gamma_override: None,
        };
        match id {
            ExperimentId::Runtime => {
                cfg.trials = 1;
                cfg.sigma = 0.1;
                cfg.targets = 5;
            }
            ExperimentId::Regimes => {
                cfg.trials = 20;
                cfg.lambda_grid = vec![0.0];
                cfg.kappa_grid = log_grid(1e-2, 3.0, 6);
                cfg.mu_grid = log_grid(0.05, 3.0, 5);
            }
            ExperimentId::Occlusion => {
                cfg.frames = 10;
                cfg.trials = 10;
                cfg.sigma = 0.02;
                cfg.m_over_n = 1.0;
                cfg.rate = 0.0;
                cfg.regime = "constant".into();
                cfg.kappa_grid = vec![0.5];
                cfg.mu_grid = vec![1.0];
                cfg.lambda_grid = vec![0.02];
            }
            ExperimentId::RpcaSweep => {
                cfg.trials = 10;
                cfg.frames = 6;
                cfg.sigma = 0.001;
                cfg.m_over_n = 0.6;
                cfg.rate = 0.25;
                cfg.eps = 1e-4;
                cfg.lambda_grid = log_grid(0.03, 0.3, 3);
                cfg.kappa_grid = log_grid(0.03, 1.0, 3);
                cfg.mu_grid = log_grid(0.3, 3.0, 3);
                cfg.inner_iters = 10;
            }
            ExperimentId::Warmstart => {
                cfg.trials = 1;
                cfg.frames = 6;
                cfg.sigma = 0.001;
                cfg.m_over_n = 0.6;
                cfg.eps = 1e-4;
                cfg.rho = 0.1;
                cfg.max_iters = 30_000;
                cfg.rate = 0.25;
                cfg.lambda_grid = vec![0.1];
                cfg.kappa_grid = vec![0.5];
                cfg.mu_grid = vec![1.0];
                cfg.inner_iters = 10;
            }
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.trials >= 1
            && self.eps > 0.0
            && self.max_iters >= 1
            && self.inner_iters >= 1
            && self.workers >= 1
            && self.grid_side >= 1
            && !self.sizes.is_empty()
            && !self.lambda_grid.is_empty()
            && !self.kappa_grid.is_empty()
            && !self.mu_grid.is_empty()
            && !self.inner_grid.is_empty();
        if !ok {
            return Err(BenchError::InvalidInput(
                "experiment config has an empty grid or nonpositive control".into(),
            ));
        }
        Ok(())
    }

    /// Applies `key = value` overrides from a config file.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let kv = parse_kv(&text)?;
        self.apply_pairs(&kv)
    }

    pub fn apply_pairs(&mut self, kv: &BTreeMap<String, String>) -> Result<()> {
        for (key, value) in kv {
            self.apply_pair(key, value)?;
        }
        Ok(())
    }

    fn apply_pair(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| {
            BenchError::InvalidInput(format!("config key '{key}': cannot parse '{value}' as {what}"))
        };
        match key {
            "experiment" => self.id = ExperimentId::parse(value)?,
            "seed" => self.seed = value.parse().map_err(|_| bad("u64"))?,
            "trials" => self.trials = value.parse().map_err(|_| bad("usize"))?,
            "eps" => self.eps = value.parse().map_err(|_| bad("f64"))?,
            "max_iters" => self.max_iters = value.parse().map_err(|_| bad("usize"))?,
            "inner_iters" => self.inner_iters = value.parse().map_err(|_| bad("usize"))?,
            "workers" => self.workers = value.parse().map_err(|_| bad("usize"))?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "grid_side" => self.grid_side = value.parse().map_err(|_| bad("usize"))?,
            "frames" => self.frames = value.parse().map_err(|_| bad("usize"))?,
            "targets" => self.targets = value.parse().map_err(|_| bad("usize"))?,
            "rank" => self.rank = value.parse().map_err(|_| bad("usize"))?,
            "sigma" => self.sigma = value.parse().map_err(|_| bad("f64"))?,
            "m_over_n" => self.m_over_n = value.parse().map_err(|_| bad("f64"))?,
            "rate" => self.rate = value.parse().map_err(|_| bad("f64"))?,
            "rho" => self.rho = value.parse().map_err(|_| bad("f64"))?,
            "regime" => self.regime = value.to_string(),
            "runs" => self.runs = value.parse().map_err(|_| bad("usize"))?,
            "occlusion_band" => {
                let (a, b) = value
                    .split_once(':')
                    .ok_or_else(|| bad("j0:j1 band"))?;
                self.occlusion_band = (
                    a.trim().parse().map_err(|_| bad("usize band"))?,
                    b.trim().parse().map_err(|_| bad("usize band"))?,
                );
            }
            "sizes" => self.sizes = parse_list(value).map_err(|_| bad("usize list"))?,
            "inner_grid" => self.inner_grid = parse_list(value).map_err(|_| bad("usize list"))?,
            "lambda_grid" => self.lambda_grid = parse_list(value).map_err(|_| bad("f64 list"))?,
            "kappa_grid" => self.kappa_grid = parse_list(value).map_err(|_| bad("f64 list"))?,
            "mu_grid" => self.mu_grid = parse_list(value).map_err(|_| bad("f64 list"))?,
            "gamma" => self.gamma_override = Some(value.parse().map_err(|_| bad("f64"))?),
            other => {
                return Err(BenchError::InvalidInput(format!(
                    "unknown config key '{other}'"
                )))
            }
        }
        Ok(())
    }
}

/// Logarithmically spaced grid from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && points >= 1);
    if points == 1 {
        return vec![lo];
    }
    let step = (hi / lo).ln() / (points - 1) as f64;
    (0..points).map(|k| lo * (step * k as f64).exp()).collect()
}

fn parse_list<T: std::str::FromStr>(value: &str) -> std::result::Result<Vec<T>, T::Err> {
    value
        .split(',')
        .map(|part| part.trim().parse::<T>())
        .collect()
}

/// Parses the `key = value` grammar: one pair per line, `#` starts a
/// comment, blank lines ignored.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            BenchError::InvalidInput(format!(
                "config line {} has no '=': '{raw}'",
                lineno + 1
            ))
        })?;
        out.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(out)
}
