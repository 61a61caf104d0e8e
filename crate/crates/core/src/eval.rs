//! Seeded Monte-Carlo suites shared by the CLI and the test-suite: recovery
//! runs toward a single safe disk and multi-goal missions on a fixed map.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contingency::{
    augment, execute_contingency, ContingencyConfig, ContingencyOutcome, ValueSource,
};
use crate::dynamics::{Bounds, State};
use crate::error::{ContingencyError, SimError};
use crate::levelset::{Grid3, Obstacle, ObstacleSet, SolverConfig, ValueField};
use crate::reachsets::SafeSetAnchor;
use crate::sim::{run_mission, MissionMetrics, Scenario, World};
use crate::surrogate::{BackendConfig, FieldProvider, SurrogateBackend};

pub(crate) fn run_seed(seed: u64, i: u64) -> u64 {
    crate::surrogate::mix_seed(seed, i.wrapping_add(1))
}

/// Randomised recovery runs toward one safe disk at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContingencySuiteConfig {
    pub runs: usize,
    pub obstacles: usize,
    pub seed: u64,
    pub radius_range: [f64; 2],
    pub target_radius: f64,
    pub half_width: f64,
    pub dims: [usize; 3],
    pub r_sense: f64,
    pub backend: BackendConfig,
    pub bounds: Bounds,
    pub solver: SolverConfig,
    pub contingency: ContingencyConfig,
    /// Start rejection-sampling attempts before a run is skipped.
    pub max_start_attempts: usize,
}

impl Default for ContingencySuiteConfig {
    fn default() -> Self {
        Self {
            runs: 100,
            obstacles: 1,
            seed: 0,
            radius_range: [0.5, 2.0],
            target_radius: 1.0,
            half_width: 10.0,
            dims: [50, 50, 25],
            r_sense: 5.5,
            backend: BackendConfig::Perturbed {
                epsilon: 0.1,
                seed: 0,
            },
            bounds: Bounds::default(),
            solver: SolverConfig::default(),
            contingency: ContingencyConfig::default(),
            max_start_attempts: 10_000,
        }
    }
}

impl ContingencySuiteConfig {
    pub fn grid(&self) -> Result<Grid3, ContingencyError> {
        let h = self.half_width;
        Ok(Grid3::new((-h, h), (-h, h), self.dims)?)
    }

    pub fn anchor(&self) -> SafeSetAnchor {
        SafeSetAnchor {
            center: [0.0, 0.0],
            radius: self.target_radius,
            half_width: self.half_width,
            provider: 0,
        }
    }

    pub fn provider(&self) -> Result<FieldProvider, ContingencyError> {
        let backend = SurrogateBackend::from_config(&self.backend)?;
        Ok(FieldProvider::new(backend, self.grid()?, self.target_radius, self.bounds, self.solver))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContingencyRun {
    pub index: usize,
    pub obstacles: Vec<Obstacle>,
    pub start: State,
    pub outcome: ContingencyOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContingencySummary {
    pub obstacles: usize,
    pub runs: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Mean elapsed time over successful runs.
    pub mean_t_reach: f64,
    pub collisions: usize,
    pub mean_final_value_failure: Option<f64>,
    pub mean_distance_failure: Option<f64>,
    pub fallback_fraction: f64,
    pub longest_fallback: usize,
    /// Runs without an accepted start.
    pub skipped: usize,
}

/// Obstacles disjoint from the safe disk, centres uniform in the local square.
pub fn sample_obstacles(rng: &mut ChaCha8Rng, cfg: &ContingencySuiteConfig) -> Vec<Obstacle> {
    let h = cfg.half_width;
    let mut out = Vec::with_capacity(cfg.obstacles);
    while out.len() < cfg.obstacles {
        let c = [rng.random_range(-h..=h), rng.random_range(-h..=h)];
        let r = rng.random_range(cfg.radius_range[0]..=cfg.radius_range[1]);
        if c[0].hypot(c[1]) > r + cfg.target_radius {
            out.push(Obstacle::new(c, r));
        }
    }
    out
}

/// Uniform start outside every obstacle and the safe disk whose smallest
/// certifying horizon (`Ṽ(x, t) ≤ −ε` under the full-knowledge backend
/// field) lies in the configured window.
pub fn sample_start(
    rng: &mut ChaCha8Rng,
    field: &ValueField,
    obstacles: &[Obstacle],
    cfg: &ContingencySuiteConfig,
) -> Option<State> {
    let h = cfg.half_width;
    let g = ObstacleSet::new(obstacles.to_vec());
    let eps = cfg.contingency.epsilon;
    let [lo, hi] = cfg.contingency.t_range;
    for _ in 0..cfg.max_start_attempts {
        let s = State::new(
            rng.random_range(-h..=h),
            rng.random_range(-h..=h),
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        );
        let gs = g.signed(s.x, s.y, f64::NEG_INFINITY);
        if s.x.hypot(s.y) <= cfg.target_radius || gs >= 0.0 {
            continue;
        }
        let first = (0..field.slice_count())
            .map(|k| field.time(k))
            .find(|&t| field.interpolate(&s, t).is_ok_and(|v| v.max(gs) <= -eps));
        if first.is_some_and(|t| t >= lo - 1e-9 && t <= hi + 1e-9) {
            return Some(s);
        }
    }
    None
}

/// Runs the suite; `provider` may be shared between suites to reuse solves.
pub fn run_contingency_suite(
    cfg: &ContingencySuiteConfig,
    provider: &FieldProvider,
) -> Result<(Vec<ContingencyRun>, ContingencySummary), ContingencyError> {
    let anchor = cfg.anchor();
    let runs: Vec<Option<ContingencyRun>> = (0..cfg.runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(run_seed(cfg.seed, i as u64));
            let obstacles = sample_obstacles(&mut rng, cfg);
            let full = ValueSource::learned(provider, &anchor, &obstacles)?;
            let Some(start) = sample_start(&mut rng, &full, &obstacles, cfg) else {
                return Ok(None);
            };
            let mut world = World::unknown(obstacles.clone(), cfg.r_sense);
            let mut outcome =
                execute_contingency(&mut world, start, &anchor, provider, &cfg.bounds, &cfg.contingency)?;
            outcome.trajectory.shrink_to_fit();
            Ok(Some(ContingencyRun {
                index: i,
                obstacles,
                start,
                outcome,
            }))
        })
        .collect::<Result<_, ContingencyError>>()?;
    let skipped = runs.iter().filter(|r| r.is_none()).count();
    let runs: Vec<ContingencyRun> = runs.into_iter().flatten().collect();
    let summary = summarize(cfg.obstacles, &runs, &anchor, skipped);
    Ok((runs, summary))
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn summarize(
    obstacles: usize,
    runs: &[ContingencyRun],
    anchor: &SafeSetAnchor,
    skipped: usize,
) -> ContingencySummary {
    let ok: Vec<f64> = runs.iter().filter(|r| r.outcome.reached).map(|r| r.outcome.t_reach).collect();
    let failed: Vec<&ContingencyRun> = runs.iter().filter(|r| !r.outcome.reached).collect();
    let fail_v: Vec<f64> = failed.iter().map(|r| r.outcome.final_value).collect();
    let fail_d: Vec<f64> = failed
        .iter()
        .map(|r| {
            let p = r.outcome.trajectory.last().map_or(r.start, |t| t.state).position();
            let l = anchor.local(p);
            (l[0].hypot(l[1]) - anchor.radius).max(0.0)
        })
        .collect();
    let steps: usize = runs.iter().map(|r| r.outcome.steps).sum();
    let fb: usize = runs.iter().map(|r| r.outcome.fallback_steps).sum();
    ContingencySummary {
        obstacles,
        runs: runs.len(),
        successes: ok.len(),
        success_rate: if runs.is_empty() { 0.0 } else { ok.len() as f64 / runs.len() as f64 },
        mean_t_reach: mean(&ok).unwrap_or(f64::NAN),
        collisions: runs.iter().filter(|r| r.outcome.max_g > 0.0).count(),
        mean_final_value_failure: mean(&fail_v),
        mean_distance_failure: mean(&fail_d),
        fallback_fraction: if steps == 0 { 0.0 } else { fb as f64 / steps as f64 },
        longest_fallback: runs.iter().map(|r| r.outcome.longest_fallback).max().unwrap_or(0),
        skipped,
    }
}

pub const CONTINGENCY_CSV_HEADER: &str =
    "obstacles,runs,success_rate,mean_t_reach,mean_final_value_failure,mean_distance_failure,collisions,fallback_fraction";

pub fn contingency_csv_row(s: &ContingencySummary) -> String {
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    format!(
        "{},{},{},{},{},{},{},{}",
        s.obstacles,
        s.runs,
        s.success_rate,
        s.mean_t_reach,
        opt(s.mean_final_value_failure),
        opt(s.mean_distance_failure),
        s.collisions,
        s.fallback_fraction
    )
}

/// Rollouts of the pure gradient policy on a fully known map from every
/// `stride`-th grid node with `V(x, T) ≤ −ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub states: usize,
    pub reached: usize,
    pub collisions: usize,
    /// Largest over runs of the smallest `ℓ` met along the trajectory.
    pub worst_min_ell: f64,
}

struct Known(Arc<ValueField>);

impl ValueSource for Known {
    fn learned(&self, _: &SafeSetAnchor, _: &[Obstacle]) -> Result<Arc<ValueField>, ContingencyError> {
        Ok(self.0.clone())
    }
    fn fallback(&self, _: &SafeSetAnchor) -> Result<Arc<ValueField>, ContingencyError> {
        Ok(self.0.clone())
    }
}

pub fn policy_consistency(
    field: Arc<ValueField>,
    anchor: &SafeSetAnchor,
    obstacles: &[Obstacle],
    epsilon: f64,
    stride: usize,
    b: &Bounds,
    dt: f64,
) -> Result<ConsistencyReport, ContingencyError> {
    let grid = field.grid;
    let top = field.horizon();
    let av = augment(field.clone(), *anchor, ObstacleSet::new(obstacles.to_vec()))?;
    let starts: Vec<State> = (0..grid.len())
        .step_by(stride.max(1))
        .map(|n| {
            let l = grid.node_state(n);
            State::new(l.x + anchor.center[0], l.y + anchor.center[1], l.theta)
        })
        .filter(|s| !anchor.in_safe_disk(s.position()))
        .filter(|s| av.value(s, top).is_ok_and(|v| v <= -epsilon))
        .collect();
    let src = Known(field);
    let cfg = ContingencyConfig {
        dt,
        epsilon,
        t_range: [0.0, top],
    };
    let outcomes: Vec<ContingencyOutcome> = starts
        .par_iter()
        .map(|s| {
            let mut world = World::new(obstacles.to_vec(), vec![true; obstacles.len()], 0.0);
            execute_contingency(&mut world, *s, anchor, &src, b, &cfg)
        })
        .collect::<Result<_, _>>()?;
    let min_ell = |o: &ContingencyOutcome| {
        o.trajectory
            .iter()
            .map(|r| {
                let l = anchor.local(r.state.position());
                l[0].hypot(l[1]) - anchor.radius
            })
            .fold(f64::INFINITY, f64::min)
    };
    Ok(ConsistencyReport {
        states: outcomes.len(),
        reached: outcomes.iter().filter(|o| min_ell(o) <= 0.2).count(),
        collisions: outcomes.iter().filter(|o| o.max_g > 0.0).count(),
        worst_min_ell: outcomes.iter().map(min_ell).fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Map knowledge and planner constraint of one route-suite group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteVariant {
    pub known_map: bool,
    pub constrained: bool,
}

impl RouteVariant {
    /// Report order: constrained rows first, unknown map before known.
    pub const ALL: [RouteVariant; 4] = [
        RouteVariant { known_map: false, constrained: true },
        RouteVariant { known_map: true, constrained: true },
        RouteVariant { known_map: false, constrained: false },
        RouteVariant { known_map: true, constrained: false },
    ];

    pub fn constraint_label(&self) -> &'static str {
        if self.constrained {
            "feasible_region"
        } else {
            "domain"
        }
    }

    pub fn map_label(&self) -> &'static str {
        if self.known_map {
            "known"
        } else {
            "unknown"
        }
    }

    /// Copy of `base` with this variant's knowledge and constraint applied.
    pub fn apply(&self, base: &Scenario) -> Scenario {
        let mut s = base.clone();
        for o in &mut s.obstacles {
            o.known = self.known_map;
        }
        s.mission.constrained = self.constrained;
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RouteSuiteConfig {
    pub seeds: usize,
    pub seed: u64,
    pub variants: Vec<RouteVariant>,
}

impl Default for RouteSuiteConfig {
    fn default() -> Self {
        Self {
            seeds: 10,
            seed: 0,
            variants: RouteVariant::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteRun {
    pub variant: RouteVariant,
    pub index: usize,
    pub start_goal: usize,
    pub metrics: MissionMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteSummary {
    pub variant: RouteVariant,
    pub runs: usize,
    pub successes: usize,
    pub mean_distance: f64,
    /// Mean wall-clock seconds per mission.
    pub mean_time: f64,
    pub mean_sim_time: f64,
    pub feasibility_violations: usize,
    pub contingency_activations: usize,
    pub collisions: usize,
}

/// Scenario for run `i`: the robot starts on a seeded goal with a seeded heading.
pub fn route_scenario(base: &Scenario, seed: u64, i: usize) -> (Scenario, usize) {
    let rs = run_seed(seed, i as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(rs);
    let k = rng.random_range(0..base.goals.len());
    let theta = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let mut s = base.clone();
    let g = base.goals[k];
    s.start = State::new(g[0], g[1], theta);
    s.seed = rs;
    (s, k)
}

/// Runs every variant over the same seeded starts. Each variant gets a fresh
/// field provider so cached solves do not leak between timed groups.
pub fn run_route_suite(base: &Scenario, cfg: &RouteSuiteConfig) -> Result<Vec<RouteRun>, SimError> {
    let mut out = Vec::new();
    for v in &cfg.variants {
        let scn = v.apply(base);
        let provider = scn.provider()?;
        let runs: Vec<RouteRun> = (0..cfg.seeds)
            .into_par_iter()
            .map(|i| {
                let (s, start_goal) = route_scenario(&scn, cfg.seed, i);
                let r = run_mission(&s, &provider)?;
                Ok(RouteRun {
                    variant: *v,
                    index: i,
                    start_goal,
                    metrics: r.metrics,
                })
            })
            .collect::<Result<_, SimError>>()?;
        out.extend(runs);
    }
    Ok(out)
}

pub fn summarize_routes(runs: &[RouteRun]) -> Vec<RouteSummary> {
    let mut variants: Vec<RouteVariant> = Vec::new();
    for r in runs {
        if !variants.contains(&r.variant) {
            variants.push(r.variant);
        }
    }
    variants
        .into_iter()
        .map(|v| {
            let group: Vec<&RouteRun> = runs.iter().filter(|r| r.variant == v).collect();
            let n = group.len().max(1) as f64;
            let mean = |f: &dyn Fn(&MissionMetrics) -> f64| group.iter().map(|r| f(&r.metrics)).sum::<f64>() / n;
            RouteSummary {
                variant: v,
                runs: group.len(),
                successes: group.iter().filter(|r| r.metrics.success).count(),
                mean_distance: mean(&|m| m.distance),
                mean_time: mean(&|m| m.wall_time),
                mean_sim_time: mean(&|m| m.sim_time),
                feasibility_violations: group.iter().map(|r| r.metrics.feasibility_violations).sum(),
                contingency_activations: group.iter().map(|r| r.metrics.contingency_activations).sum(),
                collisions: group.iter().filter(|r| r.metrics.collision).count(),
            }
        })
        .collect()
}

pub const ROUTE_CSV_HEADER: &str = "constraint,map,runs,successes,dist,time_s,sim_time_s,feasibility_violations,contingency_activations,collisions";

pub fn route_csv_row(s: &RouteSummary) -> String {
    format!(
        "{},{},{},{},{:.3},{:.3},{:.3},{},{},{}",
        s.variant.constraint_label(),
        s.variant.map_label(),
        s.runs,
        s.successes,
        s.mean_distance,
        s.mean_time,
        s.mean_sim_time,
        s.feasibility_violations,
        s.contingency_activations,
        s.collisions
    )
}
