//! Transform-tree composition of velocity policies, with learnable
//! structured leaves trained end to end from demonstrations.

pub mod error;
pub mod fixtures;
pub mod gradients;
pub mod learning;
pub mod linalg;
pub mod maps;
pub mod params;
pub mod policies;
pub mod rollout;
pub mod spec;
pub mod tree;
pub mod verify;

pub use error::{Error, Result};
pub use params::{ParamVector, Weights};
pub use tree::{Edge, Evaluation, Leaf, NodeId, NodeState, TransformTree};
