//! Hitting-time laws of Bessel processes: exact series evaluation, explicit
//! tail and moment bounds, exponential-mixture machinery, and Monte Carlo
//! samplers with a verification harness that checks every bound numerically.

pub mod bessel_hit;
mod dd;
pub mod error;
pub mod expmix;
pub mod mc;
pub mod specfun;
pub mod stats;
pub mod verify;

pub use bessel_hit::{BesselHitParams, TailMethod, TailValue};
pub use error::{Error, Result};
pub use expmix::{ExpMixModel, MomentEstimate};
pub use mc::{McConfig, SampleBatch};
pub use specfun::{Order, ZeroTable};
pub use verify::{Relation, VerificationReport, VerifyOptions};
