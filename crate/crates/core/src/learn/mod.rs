//! Learning stack for the map-conditioned soft actor-critic controller.
//!
//! Networks are generic over [`Scalar`] so training runs in `f32` while
//! gradient checks run the identical code in `f64`.

pub mod adam;
pub mod buffer;
pub mod checkpoint;
pub mod encode;
pub mod gaussian;
pub mod mlp;
pub mod sac;
pub mod train;

pub use adam::Adam;
pub use buffer::{ReplayBuffer, Transition};
pub use encode::{encode_observation, feature_dim};
pub use gaussian::{PolicySample, ACTION_DIM};
pub use mlp::{Mlp, MlpLayout};
pub use sac::{LossReport, SacAgent, SacConfig};
pub use train::{train, CurveRow, LearnedController, TrainOutcome, TrainSetup};

/// Floating-point types the networks can be instantiated with.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::NumAssign
    + ndarray::LinalgScalar
    + ndarray::ScalarOperand
    + std::iter::Sum
    + std::fmt::Debug
    + Default
    + Send
    + Sync
    + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}
