//! Scenario files and the mission loop.

mod mission;
mod scenario;
mod world;

pub use mission::{
    pursuit, row_speed, run_mission, trace_distance, MissionMetrics, MissionResult, MissionState,
    ReplanReason, TourRecord,
};
pub use scenario::{
    anchor_fields, feasible_region, validate, validate_geometry, AdversaryConfig, FieldSettings,
    MapKnowledge, MissionConfig, NominalDisturbance, Scenario, ScenarioObstacle, Validation,
    Violation, SCENARIO_VERSION,
};
pub use world::World;
