//! Local explanations of black-box predictions from an inner polytope
//! approximation of the region where the prediction stays close to the
//! target's.

pub mod baselines;
pub mod cli;
pub mod closeness;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod gradient;
pub mod par;
pub mod polytope;
pub mod predictor;
pub mod report;
pub mod search;
pub mod trust;

pub use closeness::ClosenessSpec;
pub use engine::{fit, Closeness, RbxConfig, RbxResult};
pub use error::{RbxError, Result};
pub use polytope::{EscapeReport, Polytope};
pub use predictor::{BuiltinModel, Model, Predictor};
