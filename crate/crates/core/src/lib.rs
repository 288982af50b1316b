//! Piecewise-stationary contextual bandits.
//!
//! PSLinUCB policies under the disjoint and hybrid payoff models, a variant
//! with forced exploration and global restarts, stationary baselines, synthetic
//! environments with change points, and replay evaluation on logged feedback.

pub mod detect;
pub mod env;
pub mod error;
pub mod hybrid;
mod linalg;
pub mod model;
pub mod policy;
pub mod replay;
pub mod ridge;
pub mod seed;

pub use error::{Error, Result};
pub use model::{cross_feature, ArmFeature, ArmId, Candidate, ContextEvent, CrossFeature, UserFeature};
pub use policy::{build_policy, Policy, PolicyConfig, PolicyKind};
