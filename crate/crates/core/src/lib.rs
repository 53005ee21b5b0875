//! Anytime multi-agent pathfinding: an initial suboptimal plan improved by
//! repeatedly re-solving small agent subsets optimally while the rest stay fixed.

pub mod graph;
pub mod initial;
pub mod instance;
pub mod mdd;
pub mod plan;
pub mod refine;
pub mod search;

pub use graph::{parse_map, Grid, MapError, NodeId};
pub use instance::{parse_scen, random_instance, Instance, InstanceError};
pub use plan::{validate, Path, Solution};
