//! Two-arm planar manipulation lab: a deterministic 2-D rigid-body simulator,
//! a tape-based autodiff core, and the learning stack built on both (diffusion
//! constraint policy, PPO grasping teacher, point-cloud student distillation).
//!
//! Everything is f64 and bit-reproducible for a fixed master seed: parallel
//! code paths (feature `parallel`) produce byte-identical artifacts to the
//! sequential fallback because all reductions happen in index order.

pub mod autodiff;
pub mod datagen;
pub mod diffusion;
pub mod distill;
pub mod env;
pub mod geom;
pub mod par;
pub mod ppo;
pub mod rng;
pub mod run;
pub mod shapes;
pub mod sim;

mod error;

pub use error::{Error, Result};
