//! The BTF tensor file format used for densities, flux planes, frame
//! batches, and imported data.
//!
//! Layout, all little-endian:
//!
//! ```text
//! bytes 0..4   magic "UOTB"
//! u32          version (= 1)
//! u32          ndim
//! ndim x u64   dims
//! f64 payload  column-major (first dimension fastest)
//! ```
//!
//! A 2-D tensor with dims `[n_x, n_y]` stores pixel `(i, j)` at
//! `j * n_x + i`, matching the grid convention; a 3-D frame stack
//! `[n_x, n_y, T]` appends frames contiguously.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use uot_core::{DensityField, Grid2};

use crate::error::{BenchError, Result};

pub const MAGIC: [u8; 4] = *b"UOTB";
pub const VERSION: u32 = 1;

/// A dense column-major tensor of `f64` values.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub dims: Vec<u64>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(dims: Vec<u64>, data: Vec<f64>) -> Result<Self> {
        let expect: u64 = dims.iter().product();
        if expect as usize != data.len() {
            return Err(BenchError::Format(format!(
                "dims {:?} imply {} values, got {}",
                dims,
                expect,
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn from_vector(data: Vec<f64>) -> Self {
        Self {
            dims: vec![data.len() as u64],
            data,
        }
    }

    pub fn from_field(field: &DensityField<f64>) -> Self {
        Self {
            dims: vec![field.grid().n_x() as u64, field.grid().n_y() as u64],
            data: field.values().to_vec(),
        }
    }

    /// N x T matrix as a 2-D tensor (columns are frames).
    pub fn from_matrix(m: &Array2<f64>) -> Self {
        let (n, t) = m.dim();
        let mut data = Vec::with_capacity(n * t);
        for col in 0..t {
            data.extend(m.column(col).iter().copied());
        }
        Self {
            dims: vec![n as u64, t as u64],
            data,
        }
    }

    /// Frame stack `[n_x, n_y, T]` from an N x T matrix on a grid.
    pub fn from_frames(grid: Grid2, m: &Array2<f64>) -> Self {
        let (n, t) = m.dim();
        debug_assert_eq!(n, grid.len());
        let mut data = Vec::with_capacity(n * t);
        for col in 0..t {
            data.extend(m.column(col).iter().copied());
        }
        Self {
            dims: vec![grid.n_x() as u64, grid.n_y() as u64, t as u64],
            data,
        }
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    /// Interprets a 1-D or 2-D tensor as a density field on `grid`.
    pub fn to_field(&self, grid: Grid2) -> Result<DensityField<f64>> {
        if self.data.len() != grid.len() {
            return Err(BenchError::Format(format!(
                "tensor has {} values, grid {}x{} needs {}",
                self.data.len(),
                grid.n_x(),
                grid.n_y(),
                grid.len()
            )));
        }
        Ok(DensityField::from_vec(grid, self.data.clone())?)
    }

    /// Grid implied by the first two dims of a 2-D/3-D tensor.
    pub fn implied_grid(&self) -> Result<Grid2> {
        if self.ndim() < 2 {
            return Err(BenchError::Format(
                "tensor has no spatial dimensions".into(),
            ));
        }
        Ok(Grid2::new(self.dims[0] as usize, self.dims[1] as usize)?)
    }

    /// Collapses to an `rows x cols` matrix: 2-D tensors directly, 3-D
    /// frame stacks as `(n_x * n_y) x T`.
    pub fn to_matrix(&self) -> Result<Array2<f64>> {
        let (rows, cols) = match self.dims.len() {
            2 => (self.dims[0] as usize, self.dims[1] as usize),
            3 => (
                (self.dims[0] * self.dims[1]) as usize,
                self.dims[2] as usize,
            ),
            d => {
                return Err(BenchError::Format(format!(
                    "cannot view a {d}-dimensional tensor as a matrix"
                )))
            }
        };
        let mut m = Array2::zeros((rows, cols));
        for c in 0..cols {
            for r in 0..rows {
                m[(r, c)] = self.data[c * rows + r];
            }
        }
        Ok(m)
    }
}

pub fn write_btf(path: &Path, tensor: &Tensor) -> Result<()> {
    let io_err = |source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    let mut out = || -> std::io::Result<()> {
        w.write_all(&MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(tensor.dims.len() as u32).to_le_bytes())?;
        for d in &tensor.dims {
            w.write_all(&d.to_le_bytes())?;
        }
        for v in &tensor.data {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()
    };
    out().map_err(io_err)
}

pub fn read_btf(path: &Path) -> Result<Tensor> {
    let io_err = |source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io_err)?;
    if magic != MAGIC {
        return Err(BenchError::Format(format!(
            "bad magic {:?} in {}",
            magic,
            path.display()
        )));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf).map_err(io_err)?;
    let version = u32::from_le_bytes(u32buf);
    if version != VERSION {
        return Err(BenchError::Format(format!(
            "unsupported version {version} in {}",
            path.display()
        )));
    }
    r.read_exact(&mut u32buf).map_err(io_err)?;
    let ndim = u32::from_le_bytes(u32buf) as usize;
    if ndim == 0 || ndim > 8 {
        return Err(BenchError::Format(format!("implausible ndim {ndim}")));
    }
    let mut dims = Vec::with_capacity(ndim);
    let mut u64buf = [0u8; 8];
    for _ in 0..ndim {
        r.read_exact(&mut u64buf).map_err(io_err)?;
        dims.push(u64::from_le_bytes(u64buf));
    }
    let count: u64 = dims.iter().product();
    if count > (1 << 32) {
        return Err(BenchError::Format(format!(
            "tensor of {count} values is larger than this tool supports"
        )));
    }
    let mut data = Vec::with_capacity(count as usize);
    for _ in 0..count {
        r.read_exact(&mut u64buf).map_err(io_err)?;
        data.push(f64::from_le_bytes(u64buf));
    }
    // trailing bytes indicate a corrupt or mislabeled file
    let mut probe = [0u8; 1];
    match r.read(&mut probe) {
        Ok(0) => {}
        Ok(_) => {
            return Err(BenchError::Format(format!(
                "trailing bytes after payload in {}",
                path.display()
            )))
        }
        Err(source) => return Err(io_err(source)),
    }
    Tensor::new(dims, data)
}
