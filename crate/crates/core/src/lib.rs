//! Dynamics and oscillation-damping control for a wire-suspended manipulation
//! platform carrying two moving masses and a serial manipulator.
//!
//! The math is generic over the scalar type (see [`Real`]); the `*F64`
//! aliases below are what the simulator, the CLI and the tests use.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod dynamics;
pub mod error;
pub mod model;
pub mod scalar;
pub mod sim;
pub mod spatial;
#[cfg(test)]
mod testutil;

pub use control::{ControlInput, Gains, Setpoint};
pub use dynamics::{ActuationMap, DynamicsTerms, TransformedTerms};
pub use error::{Error, Result};
pub use model::{Body, MoverParams, PlatformParams, SerialLink, State, SystemModel};
pub use scalar::Real;

pub type SystemModelF64 = SystemModel<f64>;
pub type StateF64 = State<f64>;
pub type GainsF64 = Gains<f64>;
pub type SetpointF64 = Setpoint<f64>;
pub type DynamicsTermsF64 = DynamicsTerms<f64>;
pub type TransformedTermsF64 = TransformedTerms<f64>;
pub type ControlInputF64 = ControlInput<f64>;

pub type SystemModelF32 = SystemModel<f32>;
pub type StateF32 = State<f32>;
