//! Certified reach-avoid planning.
//!
//! The crate is organised bottom-up:
//!
//! * [`dynamics`]: unicycle model, closed-form Hamiltonian and saddle-point controls.
//! * [`levelset`]: gridded fields, signed distance builders and the
//!   Lax–Friedrichs solver for the reach-avoid variational inequality.
//! * [`reachsets`]: sublevel masks, heading collapse, translation to global
//!   frames, overlap witnesses and the feasible region.
//! * [`surrogate`]: approximate value providers (spectral operator inference and
//!   perturbed oracles) and their certification.
//! * [`planner`] / [`router`]: per-goal incremental shortest-path trees and the
//!   exact open-tour router.
//! * [`contingency`]: augmented values, residual probes and the switching
//!   recovery controller.
//! * [`dataset`]: single-obstacle training and test sets on disk.
//! * [`sim`]: scenario files and the mission loop.
//! * [`eval`]: seeded Monte-Carlo suites shared by the CLI and the test-suite.

#[cfg(test)]
macro_rules! assert_close {
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b): (f64, f64) = ($a, $b);
        assert!((a - b).abs() <= $tol, "{a} vs {b} (tol {})", $tol);
    }};
}

pub mod contingency;
pub mod dataset;
pub mod dynamics;
pub mod error;
pub mod eval;
pub mod levelset;
pub mod planner;
pub mod reachsets;
pub mod router;
pub mod sim;
pub mod surrogate;

pub use dynamics::{Bounds, Control, Costate, Disturbance, State};
pub use error::{
    ContingencyError, DatasetError, DynamicsError, LevelSetError, ReachError, RouterError, SimError,
    SurrogateError,
};
pub use levelset::{Grid3, Obstacle, ObstacleSet, ScalarField, ValueField};
