//! Tabular reinforcement learning for MDPs whose dynamics, rewards and
//! discount rates all depend on the time step, with discounts that may also
//! depend on the transition `(s, a, s')`.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix `f64`.
//!
//! ```
//! use nvmdp::envs::{build_tricky_gridworld, DiscountScheme, RewardScheme};
//! use nvmdp::dp::value_iteration;
//!
//! let env = build_tricky_gridworld::<f64>(RewardScheme::Deterministic, DiscountScheme::Dr0).unwrap();
//! let opt = value_iteration(&env);
//! assert!(opt.v.get(0, 0) < 0.0);
//! ```

#![allow(clippy::needless_range_loop)]

pub mod dp;
pub mod envs;
pub mod error;
pub mod matrixrep;
pub mod model;
pub mod qlearn;
pub mod scalar;
pub mod verify;

pub use error::{NvmdpError, Result};
pub use model::{
    advantage, discount_product, return_of_trajectory, rollout, ModelParts, QTable, RewardNoise, Rollout,
    TabularNvmdp, TimePolicy, TimeTable, Transition, ValueTable,
};
pub use scalar::Scalar;

pub type Nvmdp = TabularNvmdp<f64>;
pub type Policy = TimePolicy<f64>;
pub type Values = ValueTable<f64>;
pub type QValues = QTable<f64>;
pub type Table = TimeTable<f64>;
pub type Dp = dp::DpResult<f64>;
pub type Estimates = qlearn::EstimateTensor<f64>;
