//! Unbalanced optimal transport (UOT) in Beckmann flux form, and the two
//! ADMM solvers that embed its proximal operator: online dynamic filtering
//! and robust-PCA batch separation.
//!
//! The crate is generic over the floating-point scalar through [`Scalar`];
//! `f64` aliases for the main types live at the crate root.

pub mod df;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod oracles;
pub mod prox;
pub mod rpca;

use std::fmt::{Debug, Display};

use ndarray::ScalarOperand;
use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

pub use error::{CoreError, Result};

/// Floating-point scalar the numerical kernels are generic over.
///
/// Implemented by `f32` and `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + ScalarOperand
    + std::iter::Sum<Self>
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + NumAssign
        + ScalarOperand
        + std::iter::Sum<Self>
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// Converts an `f64` constant into the working scalar type.
#[inline]
pub fn cast<T: Scalar>(v: f64) -> T {
    T::from_f64(v).expect("constant not representable in scalar type")
}

pub use df::{
    admm_residuals, df_solve, online_track, DfParams, DfRegularizer, DfResult, FrameObservation,
    MeasurementOp,
};
pub use grid::{DensityField, DualField, FluxField, Grid2, LambdaMaxMode};
pub use oracles::TwoDeltaCase;
pub use prox::{
    bot_evaluate, bot_prox_fixed, bot_prox_pair, default_steps, uot_evaluate, uot_prox_fixed,
    uot_prox_pair, EvalOpts, PNorm, ProxResult, ProxState, ProxVariant, UotParams,
};
pub use rpca::{
    gaussian_blur_3x3, rpca_solve, rpca_solve_signed, svt, FrameBatch, GammaRule, PhiSet,
    RpcaParams, RpcaResult, RpcaVariant,
};

/// `f64` aliases for the commonly used types.
pub type Density64 = grid::DensityField<f64>;
pub type Flux64 = grid::FluxField<f64>;
pub type Dual64 = grid::DualField<f64>;
pub type UotParams64 = prox::UotParams<f64>;
pub type ProxState64 = prox::ProxState<f64>;
pub type DfParams64 = df::DfParams<f64>;
pub type RpcaParams64 = rpca::RpcaParams<f64>;
