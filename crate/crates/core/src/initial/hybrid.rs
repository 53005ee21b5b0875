//! PIBT until the longest shortest-path length, then Push and Swap for
//! whoever has not arrived, with the Push and Swap part compressed.

use super::pibt::pibt_seeded;
use super::push_swap::{push_and_swap_moves, PushSwapError};
use crate::instance::Instance;
use crate::plan::Solution;

pub fn pibt_complete(instance: &Instance) -> Result<Solution, PushSwapError> {
    pibt_complete_seeded(instance, 0)
}

pub fn pibt_complete_seeded(instance: &Instance, seed: u64) -> Result<Solution, PushSwapError> {
    let horizon = (0..instance.num_agents()).map(|a| instance.dist(a)).max().unwrap_or(0);
    let head = pibt_seeded(instance, horizon as usize, seed);
    let reached = head.config_at(head.horizon());
    if reached.iter().zip(instance.goals()).all(|(v, g)| v == g) {
        return Ok(head);
    }
    let rest = instance
        .with_starts(reached.clone())
        .expect("a conflict-free configuration has distinct locations");
    let moves = push_and_swap_moves(&rest)?;
    let tail = moves.compress(&reached, instance.grid().node_count());
    Ok(head.concat(&tail))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Grid;
    use crate::initial::pibt;
    use crate::plan::validate;
    use std::sync::Arc;

    #[test]
    fn independent_corridors_need_no_second_stage() {
        let g = Arc::new(Grid::from_rows(&["....", "@@@@", "...."]).unwrap());
        let i = Instance::from_coords(g, &[((0, 0), (3, 0)), ((3, 2), (0, 2))]).unwrap();
        let s = pibt_complete(&i).unwrap();
        assert_eq!(s, pibt(&i, 3));
        assert_eq!(s.sum_of_costs(), 6);
    }

    #[test]
    fn random_grids_always_solved() {
        let g = Arc::new(Grid::open(8, 8));
        for seed in 0..40 {
            let i = crate::instance::random_instance(g.clone(), 20, seed).unwrap();
            let s = pibt_complete(&i).unwrap();
            validate(&i, &s).unwrap();
        }
    }
}
