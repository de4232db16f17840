use rand::RngExt;

use crate::rng::SimRng;
use crate::routing::Position;

/// Upper bound on placement attempts before giving up.
pub const MAX_PLACEMENT_ATTEMPTS: u32 = 1_000_000;

/// Neighbor lists of every node within `reach_m` of each other.
pub fn neighbors(positions: &[Position], reach_m: f64) -> Vec<Vec<usize>> {
    (0..positions.len())
        .map(|i| (0..positions.len()).filter(|&j| j != i && positions[i].distance(&positions[j]) <= reach_m).collect())
        .collect()
}

/// Whether every node reaches node 0 through the neighbor graph.
pub fn is_connected(adjacency: &[Vec<usize>]) -> bool {
    if adjacency.is_empty() {
        return true;
    }
    let mut seen = vec![false; adjacency.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for &j in &adjacency[i] {
            if !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Root at the center of the area, every other node uniform in the area;
/// placements whose reach graph is disconnected are drawn again.
pub fn random_connected(node_count: usize, area: [f64; 2], reach_m: f64, rng: &mut SimRng) -> Option<Vec<Position>> {
    let root = Position::new(area[0] / 2.0, area[1] / 2.0);
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let mut positions = Vec::with_capacity(node_count);
        positions.push(root);
        for _ in 1..node_count {
            positions.push(Position::new(rng.random_range(0.0..area[0]), rng.random_range(0.0..area[1])));
        }
        if is_connected(&neighbors(&positions, reach_m)) {
            return Some(positions);
        }
    }
    None
}
