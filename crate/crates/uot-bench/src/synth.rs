//! Synthetic data: sparse random-walk target stacks, low-rank clutter, and
//! compressive Gaussian measurements.
//!
//! All generators are pure functions of their spec and seed, drawn from a
//! `ChaCha8` stream (64-bit seed; floats take the upper 53 bits of each
//! draw), so reruns are bit-identical.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use uot_core::{Grid2, MeasurementOp};

use crate::error::{BenchError, Result};

/// How total intensity evolves across frames.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MassRegime {
    Constant,
    Growth,
    Decay,
}

impl std::fmt::Display for MassRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            MassRegime::Constant => "constant",
            MassRegime::Growth => "growth",
            MassRegime::Decay => "decay",
        };
        f.write_str(s)
    }
}

/// Protocol for a stack of sparse moving targets.
///
/// Per frame, each target moves by a displacement drawn as a uniform angle
/// with a Normal(1, 0.5) radius, rounded to the nearest integer offset and
/// clamped in-bounds; colliding targets simply add. The regime rescales
/// intensities so that every consecutive frame pair satisfies
/// `|1'^T s_t - 1^T s_{t-1}| / 1^T s_t = rate` exactly.
#[derive(Clone, Debug)]
pub struct SparseWalkSpec {
    pub grid: Grid2,
    pub frames: usize,
    pub targets: usize,
    pub seed: u64,
    pub intensity_range: (f64, f64),
    pub regime: MassRegime,
    pub mass_change_rate: f64,
    /// Occluding column band `[j0, j1]` (0-based, inclusive). Applies to
    /// measurements, never to the generated truth.
    pub occlusion: Option<(usize, usize)>,
}

impl SparseWalkSpec {
    pub fn new(grid: Grid2, frames: usize, targets: usize, seed: u64) -> Self {
        Self {
            grid,
            frames,
            targets,
            seed,
            intensity_range: (0.5, 1.5),
            regime: MassRegime::Constant,
            mass_change_rate: 0.0,
            occlusion: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.intensity_range;
        let ok = self.frames >= 1
            && self.targets >= 1
            && self.targets <= self.grid.len()
            && lo > 0.0
            && hi >= lo
            && self.mass_change_rate >= 0.0
            && (self.regime != MassRegime::Growth || self.mass_change_rate < 1.0);
        if !ok {
            return Err(BenchError::InvalidInput(
                "bad sparse-walk spec (need 1 <= K <= N, hi >= lo > 0, growth rate < 1)".into(),
            ));
        }
        if let Some((j0, j1)) = self.occlusion {
            if j0 > j1 || j1 >= self.grid.n_y() {
                return Err(BenchError::InvalidInput(format!(
                    "occlusion band {j0}..={j1} outside grid columns"
                )));
            }
        }
        Ok(())
    }

    /// Pixel mask that zeroes the occluded band (all ones without one).
    pub fn occlusion_mask(&self) -> Vec<f64> {
        let grid = self.grid;
        let mut mask = vec![1.0; grid.len()];
        if let Some((j0, j1)) = self.occlusion {
            for j in j0..=j1 {
                for i in 0..grid.n_x() {
                    mask[grid.idx(i, j)] = 0.0;
                }
            }
        }
        mask
    }
}

/// Generates the `N x T` ground-truth stack.
pub fn gen_sparse_walk(spec: &SparseWalkSpec) -> Result<Array2<f64>> {
    spec.validate()?;
    let grid = spec.grid;
    let n = grid.len();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // distinct starting pixels via partial Fisher-Yates
    let mut pool: Vec<usize> = (0..n).collect();
    for k in 0..spec.targets {
        let pick = rng.random_range(k..n);
        pool.swap(k, pick);
    }
    let (lo, hi) = spec.intensity_range;
    struct Target {
        i: usize,
        j: usize,
        intensity: f64,
    }
    let mut targets: Vec<Target> = pool[..spec.targets]
        .iter()
        .map(|&k| {
            let (i, j) = grid.coords(k);
            Target {
                i,
                j,
                intensity: rng.random_range(lo..hi),
            }
        })
        .collect();

    let radius = Normal::new(1.0f64, 0.5).expect("valid normal");
    let mut out = Array2::zeros((n, spec.frames));
    let scale = match spec.regime {
        MassRegime::Constant => 1.0,
        MassRegime::Growth => 1.0 / (1.0 - spec.mass_change_rate),
        MassRegime::Decay => 1.0 / (1.0 + spec.mass_change_rate),
    };
    for t in 0..spec.frames {
        if t > 0 {
            for target in &mut targets {
                let angle = rng.random_range(0.0..std::f64::consts::TAU);
                let r = radius.sample(&mut rng);
                let di = (r * angle.cos()).round() as isize;
                let dj = (r * angle.sin()).round() as isize;
                target.i = (target.i as isize + di).clamp(0, grid.n_x() as isize - 1) as usize;
                target.j = (target.j as isize + dj).clamp(0, grid.n_y() as isize - 1) as usize;
                target.intensity *= scale;
            }
        }
        for target in &targets {
            out[(grid.idx(target.i, target.j), t)] += target.intensity;
        }
    }
    Ok(out)
}

/// Low-rank clutter `U V^T / (4R)` with `U, V ~ Uniform(0, 1)` entries;
/// every entry lies in `[0, 1/4]`.
pub fn gen_lowrank(n: usize, t: usize, rank: usize, seed: u64) -> Result<Array2<f64>> {
    if rank == 0 || rank > n.min(t) {
        return Err(BenchError::InvalidInput(format!(
            "rank {rank} out of range for {n}x{t}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = Array2::from_shape_fn((n, rank), |_| rng.random_range(0.0..1.0));
    let v = Array2::from_shape_fn((t, rank), |_| rng.random_range(0.0..1.0));
    Ok(u.dot(&v.t()) / (4.0 * rank as f64))
}

/// Observations of a frame stack plus their per-frame operators.
pub struct Measurements {
    pub y: Array2<f64>,
    pub phis: Vec<MeasurementOp<f64>>,
}

/// Per-frame Gaussian operators (`Normal(0, 1/M)` entries) applied to the
/// masked sum `mask .* (s_t + l_t)`, with `Normal(0, sigma^2)` noise added
/// after masking.
pub fn gen_measurements(
    s: &Array2<f64>,
    l: &Array2<f64>,
    m_rows: usize,
    sigma: f64,
    seed: u64,
    mask: Option<&[f64]>,
) -> Result<Measurements> {
    let (n, t_frames) = s.dim();
    if l.dim() != (n, t_frames) {
        return Err(BenchError::InvalidInput(format!(
            "component shapes differ: {:?} vs {:?}",
            s.dim(),
            l.dim()
        )));
    }
    if let Some(m) = mask {
        if m.len() != n {
            return Err(BenchError::InvalidInput(format!(
                "mask has {} entries for {} pixels",
                m.len(),
                n
            )));
        }
    }
    if m_rows == 0 || sigma < 0.0 {
        return Err(BenchError::InvalidInput(
            "need m_rows >= 1 and sigma >= 0".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entry = Normal::new(0.0f64, (1.0 / m_rows as f64).sqrt()).expect("valid normal");
    let noise = Normal::new(0.0f64, 1.0).expect("valid normal");
    let mut y = Array2::zeros((m_rows, t_frames));
    let mut phis = Vec::with_capacity(t_frames);
    for t in 0..t_frames {
        let mat = Array2::from_shape_fn((m_rows, n), |_| entry.sample(&mut rng));
        let masked: Vec<f64> = (0..n)
            .map(|k| {
                let v = s[(k, t)] + l[(k, t)];
                match mask {
                    Some(m) => m[k] * v,
                    None => v,
                }
            })
            .collect();
        for i in 0..m_rows {
            let mut acc = 0.0;
            for k in 0..n {
                acc += mat[(i, k)] * masked[k];
            }
            y[(i, t)] = acc;
        }
        if sigma > 0.0 {
            for i in 0..m_rows {
                y[(i, t)] += sigma * noise.sample(&mut rng);
            }
        }
        phis.push(MeasurementOp::dense(mat)?);
    }
    Ok(Measurements { y, phis })
}
