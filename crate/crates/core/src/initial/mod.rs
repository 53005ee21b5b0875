//! Fast suboptimal solvers that produce the first solution.

pub mod hca;
pub mod hybrid;
pub mod pibt;
pub mod push_swap;

pub use hca::{default_order, hca, hca_limited, whca, whca_with, PrioritizedError};
pub use hybrid::{pibt_complete, pibt_complete_seeded};
pub use pibt::{pibt, pibt_seeded};
pub use push_swap::{push_and_swap, push_and_swap_moves, PushSwapError};
