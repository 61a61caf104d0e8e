//! Scenario files and their validation.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contingency::ContingencyConfig;
use crate::dynamics::{Bounds, State};
use crate::error::SimError;
use crate::levelset::{Grid3, Obstacle, SolverConfig, ValueField};
use crate::planner::PlannerConfig;
use crate::reachsets::{overlap_check, FeasibleRegion, SafeSetAnchor};
use crate::surrogate::{local_obstacles, BackendConfig, FieldProvider, SurrogateBackend};

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioObstacle {
    pub center: [f64; 2],
    pub radius: f64,
    /// Known before the mission starts.
    #[serde(default)]
    pub known: bool,
}

impl ScenarioObstacle {
    pub fn obstacle(&self) -> Obstacle {
        Obstacle::new(self.center, self.radius)
    }
}

/// Local grid and backend shared by every anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldSettings {
    pub dims: [usize; 3],
    pub solver: SolverConfig,
    pub backend: BackendConfig,
    /// Fields kept per provider cache.
    pub cache_len: usize,
}

impl Default for FieldSettings {
    fn default() -> Self {
        Self {
            dims: [50, 50, 25],
            solver: SolverConfig::default(),
            backend: BackendConfig::Perturbed {
                epsilon: 0.1,
                seed: 0,
            },
            cache_len: crate::surrogate::CACHE_LEN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NominalDisturbance {
    #[default]
    Zero,
    /// Uniform within the bounds, seeded.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MissionConfig {
    /// Confine the planner to the feasible region.
    pub constrained: bool,
    pub initial_nodes: usize,
    /// Nodes added to invalid trees while dwelling in a safe disk.
    pub dwell_nodes: usize,
    /// Nodes added to the active tree per control step.
    pub extend_per_step: usize,
    /// Robot-biased nodes a tree may add right after a detection to reconnect
    /// the robot before it is declared invalid.
    pub repair_nodes: usize,
    pub dt: f64,
    /// Heading gain of the pure-pursuit tracker.
    pub k_theta: f64,
    pub goal_tolerance: f64,
    /// Simulated time after which the mission is abandoned.
    pub max_time: f64,
    /// Value margin the constrained planner keeps below `−ε`, absorbing
    /// tracking error around the planned path.
    pub feasibility_margin: f64,
    pub nominal_disturbance: NominalDisturbance,
    /// Consecutive dwell phases without any valid goal before giving up.
    pub max_dwell_retries: usize,
    pub contingency: ContingencyConfig,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            constrained: true,
            initial_nodes: 2000,
            dwell_nodes: 500,
            extend_per_step: 1,
            repair_nodes: 300,
            dt: 0.05,
            k_theta: 2.0,
            goal_tolerance: 0.5,
            max_time: 1000.0,
            feasibility_margin: 0.25,
            nominal_disturbance: NominalDisturbance::Zero,
            max_dwell_retries: 3,
            contingency: ContingencyConfig::default(),
        }
    }
}

/// Contingency triggers: a Bernoulli draw per control step plus scripted times.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdversaryConfig {
    pub probability: f64,
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub scenario_version: u32,
    /// `[x_min, x_max, y_min, y_max]`.
    pub domain: [f64; 4],
    pub anchors: Vec<SafeSetAnchor>,
    /// Anchor pairs that must overlap; empty means consecutive anchors.
    #[serde(default)]
    pub links: Vec<[usize; 2]>,
    #[serde(default)]
    pub obstacles: Vec<ScenarioObstacle>,
    pub goals: Vec<[f64; 2]>,
    pub start: State,
    pub r_sense: f64,
    #[serde(default)]
    pub bounds: Bounds,
    #[serde(default)]
    pub field: FieldSettings,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub mission: MissionConfig,
    #[serde(default)]
    pub adversary: AdversaryConfig,
    #[serde(default)]
    pub seed: u64,
}

fn default_epsilon() -> f64 {
    0.1
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let s: Self = serde_json::from_str(text)?;
        if s.scenario_version != SCENARIO_VERSION {
            return Err(SimError::Version(s.scenario_version));
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises")
    }

    /// Local grid of the first anchor; validation checks the others agree.
    pub fn grid(&self) -> Result<Grid3, SimError> {
        let h = self.anchors.first().map_or(10.0, |a| a.half_width);
        Ok(Grid3::new((-h, h), (-h, h), self.field.dims)?)
    }

    pub fn provider(&self) -> Result<FieldProvider, SimError> {
        let backend = SurrogateBackend::from_config(&self.field.backend)?;
        let radius = self.anchors.first().map_or(1.0, |a| a.radius);
        Ok(FieldProvider::new(backend, self.grid()?, radius, self.bounds, self.field.solver)
            .with_cache_len(self.field.cache_len))
    }

    pub fn all_obstacles(&self) -> Vec<Obstacle> {
        self.obstacles.iter().map(ScenarioObstacle::obstacle).collect()
    }

    pub fn initially_known(&self) -> Vec<Obstacle> {
        self.obstacles
            .iter()
            .filter(|o| o.known)
            .map(ScenarioObstacle::obstacle)
            .collect()
    }

    /// Pairs checked for overlap.
    pub fn adjacent_pairs(&self) -> Vec<[usize; 2]> {
        if self.links.is_empty() {
            (1..self.anchors.len()).map(|i| [i - 1, i]).collect()
        } else {
            self.links.clone()
        }
    }

    fn in_domain(&self, p: [f64; 2]) -> bool {
        let [x0, x1, y0, y1] = self.domain;
        p[0] >= x0 && p[0] <= x1 && p[1] >= y0 && p[1] <= y1
    }
}

/// Which obstacle knowledge a field-based check ran under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKnowledge {
    Initial,
    Full,
}

impl fmt::Display for MapKnowledge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Initial => "initially known map",
            Self::Full => "full map",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    BadDomain,
    NoAnchors,
    NoGoals,
    /// Anchor geometry differs from the shared local grid.
    FrameMismatch { anchor: usize },
    /// Obstacle meets a safe disk.
    SafeSetOverlap { obstacle: usize, anchor: usize },
    GoalOutsideDomain { goal: usize },
    /// Goal within the planner clearance of an obstacle.
    GoalBlocked { goal: usize, obstacle: usize },
    StartOutsideDomain,
    BadLink { link: [usize; 2] },
    /// No `δ`-disk fits in both heading-agnostic reach sets.
    InsufficientOverlap { a: usize, b: usize, map: MapKnowledge },
    StartInfeasible,
    GoalInfeasible { goal: usize, map: MapKnowledge },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BadDomain => write!(f, "domain bounds are not increasing"),
            Self::NoAnchors => write!(f, "no safe sets"),
            Self::NoGoals => write!(f, "no goals"),
            Self::FrameMismatch { anchor } => {
                write!(f, "anchor {anchor}: radius or half-width differs from anchor 0")
            }
            Self::SafeSetOverlap { obstacle, anchor } => write!(
                f,
                "obstacle {obstacle} meets the safe disk of anchor {anchor} (safe sets must be obstacle-free)"
            ),
            Self::GoalOutsideDomain { goal } => write!(f, "goal {goal} lies outside the domain"),
            Self::GoalBlocked { goal, obstacle } => {
                write!(f, "goal {goal} lies within the clearance of obstacle {obstacle}")
            }
            Self::StartOutsideDomain => write!(f, "start lies outside the domain"),
            Self::BadLink { link } => write!(f, "link {link:?} names a missing anchor"),
            Self::InsufficientOverlap { a, b, map } => write!(
                f,
                "anchors {a} and {b}: reach sets do not share a delta-disk on the {map} (overlap chain broken)"
            ),
            Self::StartInfeasible => write!(f, "start lies outside the initial feasible region"),
            Self::GoalInfeasible { goal, map } => {
                write!(f, "goal {goal} lies outside the feasible region on the {map}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub violations: Vec<Violation>,
}

impl Validation {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    /// `Err(SimError::Invalid)` listing every violation.
    pub fn into_result(self) -> Result<(), SimError> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(SimError::Invalid(self.violations.iter().map(ToString::to_string).collect()))
        }
    }
}

/// Checks that need no value fields.
pub fn validate_geometry(s: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();
    let [x0, x1, y0, y1] = s.domain;
    if !(x0 < x1 && y0 < y1) {
        out.push(Violation::BadDomain);
    }
    if s.anchors.is_empty() {
        out.push(Violation::NoAnchors);
    }
    if s.goals.is_empty() {
        out.push(Violation::NoGoals);
    }
    if let Some(first) = s.anchors.first() {
        for (i, a) in s.anchors.iter().enumerate().skip(1) {
            if (a.radius - first.radius).abs() > 1e-12 || (a.half_width - first.half_width).abs() > 1e-12 {
                out.push(Violation::FrameMismatch { anchor: i });
            }
        }
    }
    for (j, o) in s.obstacles.iter().enumerate() {
        for (i, a) in s.anchors.iter().enumerate() {
            let d = (o.center[0] - a.center[0]).hypot(o.center[1] - a.center[1]);
            if d <= o.radius + a.radius {
                out.push(Violation::SafeSetOverlap { obstacle: j, anchor: i });
            }
        }
    }
    for (k, g) in s.goals.iter().enumerate() {
        if !s.in_domain(*g) {
            out.push(Violation::GoalOutsideDomain { goal: k });
        }
        for (j, o) in s.obstacles.iter().enumerate() {
            if o.obstacle().signed(g[0], g[1]) >= -s.planner.clearance {
                out.push(Violation::GoalBlocked { goal: k, obstacle: j });
            }
        }
    }
    if !s.in_domain(s.start.position()) {
        out.push(Violation::StartOutsideDomain);
    }
    for l in s.adjacent_pairs() {
        if l[0] >= s.anchors.len() || l[1] >= s.anchors.len() || l[0] == l[1] {
            out.push(Violation::BadLink { link: l });
        }
    }
    out
}

/// Backend fields for every anchor given the known obstacles (global frame).
pub fn anchor_fields(
    provider: &FieldProvider,
    anchors: &[SafeSetAnchor],
    known: &[Obstacle],
) -> Result<Vec<Arc<ValueField>>, SimError> {
    anchors
        .par_iter()
        .map(|a| Ok(provider.learned(&local_obstacles(a, known))?))
        .collect()
}

pub fn feasible_region(
    anchors: &[SafeSetAnchor],
    fields: &[Arc<ValueField>],
    epsilon: f64,
) -> Result<FeasibleRegion, SimError> {
    let pairs: Vec<(SafeSetAnchor, Arc<ValueField>)> =
        anchors.iter().copied().zip(fields.iter().cloned()).collect();
    Ok(FeasibleRegion::new(&pairs, epsilon)?)
}

/// Full validation: geometry, then the overlap chain and start/goal
/// feasibility on the initially known and on the full obstacle map.
pub fn validate(s: &Scenario, provider: &FieldProvider) -> Result<Validation, SimError> {
    let mut violations = validate_geometry(s);
    if !violations.is_empty() {
        return Ok(Validation { violations });
    }
    for (i, a) in s.anchors.iter().enumerate() {
        if !provider.compatible(a) {
            violations.push(Violation::FrameMismatch { anchor: i });
        }
    }
    if !violations.is_empty() {
        return Ok(Validation { violations });
    }
    let initial = s.initially_known();
    let full = s.all_obstacles();
    let mut maps = vec![(MapKnowledge::Initial, initial.clone())];
    if full.len() != initial.len() {
        maps.push((MapKnowledge::Full, full));
    }
    for (map, known) in maps {
        let fields = anchor_fields(provider, &s.anchors, &known)?;
        let region = feasible_region(&s.anchors, &fields, s.epsilon)?;
        for [a, b] in s.adjacent_pairs() {
            let (ma, mb) = (&region.members[a].mask, &region.members[b].mask);
            if overlap_check(ma, mb, s.planner.delta).is_none() {
                violations.push(Violation::InsufficientOverlap { a, b, map });
            }
        }
        if map == MapKnowledge::Initial && !region.contains(s.start.position()) {
            violations.push(Violation::StartInfeasible);
        }
        if s.mission.constrained {
            for (k, g) in s.goals.iter().enumerate() {
                if !region.contains(*g) {
                    violations.push(Violation::GoalInfeasible { goal: k, map });
                }
            }
        }
    }
    Ok(Validation { violations })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn small_scenario() -> Scenario {
        Scenario {
            scenario_version: 1,
            domain: [-8.0, 8.0, -6.0, 6.0],
            anchors: vec![
                SafeSetAnchor {
                    center: [-2.0, 0.0],
                    radius: 1.0,
                    half_width: 6.0,
                    provider: 0,
                },
                SafeSetAnchor {
                    center: [2.0, 0.0],
                    radius: 1.0,
                    half_width: 6.0,
                    provider: 0,
                },
            ],
            links: Vec::new(),
            obstacles: Vec::new(),
            goals: vec![[-2.0, 0.0], [2.0, 0.0]],
            start: State::new(-2.0, 0.0, 0.0),
            r_sense: 3.0,
            bounds: Bounds::default(),
            field: FieldSettings {
                dims: [31, 31, 16],
                solver: SolverConfig {
                    horizon: 6.0,
                    dt_out: 0.5,
                    ..Default::default()
                },
                backend: BackendConfig::Oracle,
                cache_len: 8,
            },
            epsilon: 0.1,
            planner: PlannerConfig::default(),
            mission: MissionConfig::default(),
            adversary: AdversaryConfig::default(),
            seed: 0,
        }
    }

    #[test]
    fn json_round_trip_and_version() {
        let s = small_scenario();
        let back = Scenario::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
        let mut v: serde_json::Value = serde_json::from_str(&s.to_json()).unwrap();
        v["scenario_version"] = 2.into();
        assert!(matches!(Scenario::from_json(&v.to_string()), Err(SimError::Version(2))));
    }

    #[test]
    fn obstacle_touching_safe_disk_is_named() {
        let mut s = small_scenario();
        s.obstacles.push(ScenarioObstacle {
            center: [2.0, 1.5],
            radius: 0.5,
            known: true,
        });
        let v = validate_geometry(&s);
        assert_eq!(v, vec![Violation::SafeSetOverlap { obstacle: 0, anchor: 1 }]);
        assert!(v[0].to_string().contains("safe disk of anchor 1"));
    }

    #[test]
    fn geometry_checks() {
        let mut s = small_scenario();
        s.goals.push([20.0, 0.0]);
        s.links = vec![[0, 5]];
        s.start = State::new(0.0, 9.0, 0.0);
        let v = validate_geometry(&s);
        assert!(v.contains(&Violation::GoalOutsideDomain { goal: 2 }));
        assert!(v.contains(&Violation::BadLink { link: [0, 5] }));
        assert!(v.contains(&Violation::StartOutsideDomain));
    }

    #[test]
    fn overlap_chain_and_start() {
        let s = small_scenario();
        let p = s.provider().unwrap();
        let v = validate(&s, &p).unwrap();
        assert!(v.is_ok(), "{:?}", v.violations);

        // reach radius on this grid is about 3.5, so anchors 12 apart cannot overlap
        let mut far = s.clone();
        far.domain = [-12.0, 12.0, -6.0, 6.0];
        far.anchors[0].center = [-6.0, 0.0];
        far.anchors[1].center = [6.0, 0.0];
        far.goals = vec![[-6.0, 0.0], [6.0, 0.0]];
        far.start = State::new(-6.0, 0.0, 0.0);
        let v = validate(&far, &p).unwrap();
        assert_eq!(
            v.violations,
            vec![Violation::InsufficientOverlap {
                a: 0,
                b: 1,
                map: MapKnowledge::Initial
            }]
        );
        assert!(v.clone().into_result().is_err());

        let mut off = s.clone();
        off.start = State::new(0.0, 5.5, 0.0);
        let v = validate(&off, &p).unwrap();
        assert_eq!(v.violations, vec![Violation::StartInfeasible]);
    }
}
