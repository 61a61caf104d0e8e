//! Signed distance fields for the target and obstacle sets.

use super::{Grid3, ObstacleSet, ScalarField};

/// `ℓ(x, y, θ) = ‖(x, y)‖ − radius`, negative inside the target disk.
pub fn sdf_target(grid: &Grid3, radius: f64) -> ScalarField {
    sdf_target_at(grid, [0.0, 0.0], radius)
}

/// Target disk centred at `center`.
pub fn sdf_target_at(grid: &Grid3, center: [f64; 2], radius: f64) -> ScalarField {
    ScalarField::from_fn(*grid, |s| (s.x - center[0]).hypot(s.y - center[1]) - radius)
}

/// `g = max_i (r_i − ‖p − c_i‖)`, positive inside any obstacle. Without
/// obstacles every node holds minus the domain diagonal.
pub fn sdf_obstacles(grid: &Grid3, obs: &ObstacleSet) -> ScalarField {
    let empty = -grid.diagonal();
    ScalarField::from_fn(*grid, |s| obs.signed(s.x, s.y, empty))
}
