//! Synthetic data generation, metrics, experiment drivers, file formats,
//! and the benchmark CLI for the transport solvers.

pub mod btf;
pub mod config;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod synth;
pub mod tables;

pub use error::{BenchError, Result};

/// Splitmix64 step; used to derive independent per-trial seeds from a base
/// seed and a stream index so parallel scheduling cannot change results.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
