//! The contingency-aware multi-goal mission loop.
//!
//! Goal-rooted trees are grown over the feasible region, a Held–Karp tour
//! orders the goals, and a pure-pursuit tracker follows the active tree.
//! Sensing updates the affected anchors, repairs the trees and replans; an
//! adversary trigger or a state with no reachable goal hands control to the
//! recovery controller, after which the robot dwells while invalid trees
//! regrow.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scenario::{anchor_fields, feasible_region, NominalDisturbance, Scenario};
use super::World;
use crate::contingency::{execute_contingency, Branch, TraceRow};
use crate::dynamics::{flow, rk4_step, wrap_angle, Bounds, Control, Disturbance, State};
use crate::error::SimError;
use crate::levelset::{Obstacle, ObstacleSet, ValueField};
use crate::planner::{GoalPlanner, GrowContext};
use crate::reachsets::{FeasibleRegion, SafeSetAnchor};
use crate::router::{replan_tour, CostMatrix};
use crate::surrogate::{mix_seed, FieldProvider};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplanReason {
    Initial,
    Arrival,
    Detection,
    PathLost,
    Recovery,
}

/// Tour in effect from time `t` on, as goal indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TourRecord {
    pub t: f64,
    pub reason: ReplanReason,
    pub order: Vec<usize>,
    /// Remaining goals whose tree did not contain the robot.
    pub invalid: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionMetrics {
    pub success: bool,
    /// Trapezoidal integral of planar speed over the trace.
    pub distance: f64,
    pub sim_time: f64,
    /// Wall-clock seconds; not part of any hashed artefact.
    pub wall_time: f64,
    /// Arrival time per goal index.
    pub arrivals: Vec<Option<f64>>,
    pub visit_order: Vec<usize>,
    pub unreachable: Vec<usize>,
    pub contingency_activations: usize,
    /// Recoveries that ended inside the selected safe disk.
    pub contingency_reached: usize,
    pub replans: usize,
    pub detections: usize,
    /// Trace rows outside the feasible region active at that row.
    pub feasibility_violations: usize,
    pub max_g: f64,
    pub collision: bool,
}

#[derive(Debug, Clone)]
pub struct MissionResult {
    pub metrics: MissionMetrics,
    pub trace: Vec<TraceRow>,
    /// Per row: position inside the feasible region active at that row.
    pub feasible: Vec<bool>,
    /// Per row: goal being tracked.
    pub targets: Vec<Option<usize>>,
    pub tours: Vec<TourRecord>,
    /// Anchors selected for each recovery, with the row index it started at.
    pub recoveries: Vec<(usize, usize)>,
    pub final_known: Vec<Obstacle>,
}

/// Snapshot of the loop's bookkeeping.
#[derive(Debug, Clone)]
pub struct MissionState {
    pub world: World,
    pub trees: Vec<GoalPlanner>,
    /// Current tour over the remaining goals.
    pub tour: Vec<usize>,
    /// Unvisited goals still considered reachable.
    pub remaining: Vec<usize>,
    /// Remaining goals whose tree does not contain the robot.
    pub invalid: Vec<usize>,
    pub robot: State,
    pub clock: f64,
}

/// Everything the planner checks against; kept apart from the trees so both
/// can be borrowed at once.
struct Env {
    anchors: Vec<SafeSetAnchor>,
    fields: Vec<Arc<ValueField>>,
    region: FeasibleRegion,
    known: ObstacleSet,
    centers: Vec<[f64; 2]>,
    goals: Vec<[f64; 2]>,
    domain: [f64; 4],
    safe_radius: f64,
    constrained: bool,
    margin: f64,
}

impl Env {
    fn feasible(&self, p: [f64; 2]) -> bool {
        !self.constrained || self.region.contains_with_margin(p, self.margin)
    }

    fn with_ctx<R>(&self, robot: Option<[f64; 2]>, f: impl FnOnce(&GrowContext) -> R) -> R {
        let feasible = |p: [f64; 2]| self.feasible(p);
        let ctx = GrowContext {
            domain: self.domain,
            feasible: &feasible,
            obstacles: &self.known,
            centers: &self.centers,
            safe_radius: self.safe_radius,
            goals: &self.goals,
            robot,
        };
        f(&ctx)
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Pure pursuit: steer towards the point `lookahead` ahead of the robot's
/// projection onto `path`, slowing with the heading error.
pub fn pursuit(s: &State, path: &[[f64; 2]], lookahead: f64, k_theta: f64, b: &Bounds) -> Control {
    let p = s.position();
    let target = lookahead_point(p, path, lookahead);
    if dist(p, target) < 1e-12 {
        return Control { v: 0.0, omega: 0.0 };
    }
    let err = wrap_angle((target[1] - p[1]).atan2(target[0] - p[0]) - s.theta);
    b.clamp_control(Control {
        v: b.v_max * (1.0 - err.abs() / PI),
        omega: k_theta * err,
    })
}

fn lookahead_point(p: [f64; 2], path: &[[f64; 2]], lookahead: f64) -> [f64; 2] {
    match path {
        [] => p,
        [only] => *only,
        _ => {
            // closest point on the polyline
            let mut best = (f64::INFINITY, 0usize, 0.0);
            for i in 0..path.len() - 1 {
                let (a, b) = (path[i], path[i + 1]);
                let d = [b[0] - a[0], b[1] - a[1]];
                let len2 = d[0] * d[0] + d[1] * d[1];
                let f = if len2 > 0.0 {
                    (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let q = [a[0] + f * d[0], a[1] + f * d[1]];
                let dq = dist(p, q);
                if dq < best.0 {
                    best = (dq, i, f);
                }
            }
            let (_, i0, f0) = best;
            let a = path[i0];
            let mut cur = [
                a[0] + f0 * (path[i0 + 1][0] - a[0]),
                a[1] + f0 * (path[i0 + 1][1] - a[1]),
            ];
            let mut left = lookahead;
            for &q in &path[i0 + 1..] {
                let d = dist(cur, q);
                if d >= left {
                    let f = left / d;
                    return [cur[0] + f * (q[0] - cur[0]), cur[1] + f * (q[1] - cur[1])];
                }
                left -= d;
                cur = q;
            }
            *path.last().expect("non-empty")
        }
    }
}

/// Planar speed of a trace row.
pub fn row_speed(r: &TraceRow) -> f64 {
    let f = flow(&r.state, &r.control, &r.disturbance);
    f.x.hypot(f.y)
}

/// Trapezoidal integral of planar speed over consecutive rows.
pub fn trace_distance(rows: &[TraceRow]) -> f64 {
    rows.windows(2)
        .map(|w| 0.5 * (w[1].t - w[0].t) * (row_speed(&w[0]) + row_speed(&w[1])))
        .sum()
}

struct Mission<'a> {
    scn: &'a Scenario,
    provider: &'a FieldProvider,
    env: Env,
    state: MissionState,
    rng: ChaCha8Rng,
    scripted: Vec<f64>,
    out: MissionResult,
}

impl<'a> Mission<'a> {
    fn new(scn: &'a Scenario, provider: &'a FieldProvider) -> Result<Self, SimError> {
        let obstacles = scn.all_obstacles();
        let known: Vec<bool> = scn.obstacles.iter().map(|o| o.known).collect();
        let mut world = World::new(obstacles, known, scn.r_sense);
        world.sense(scn.start.position());
        let known = world.known_obstacles();
        let fields = anchor_fields(provider, &scn.anchors, &known)?;
        let region = feasible_region(&scn.anchors, &fields, scn.epsilon)?;
        let env = Env {
            centers: scn.anchors.iter().map(|a| a.center).collect(),
            anchors: scn.anchors.clone(),
            fields,
            region,
            known: ObstacleSet::new(known),
            goals: scn.goals.clone(),
            domain: scn.domain,
            safe_radius: scn.anchors.first().map_or(1.0, |a| a.radius),
            constrained: scn.mission.constrained,
            margin: scn.mission.feasibility_margin,
        };
        let trees = scn
            .goals
            .iter()
            .enumerate()
            .map(|(k, &g)| GoalPlanner::new(g, scn.planner, mix_seed(scn.seed, k as u64 + 1)))
            .collect();
        let mut scripted = scn.adversary.times.clone();
        scripted.sort_by(f64::total_cmp);
        let k = scn.goals.len();
        Ok(Self {
            scn,
            provider,
            env,
            state: MissionState {
                world,
                trees,
                tour: Vec::new(),
                remaining: (0..k).collect(),
                invalid: Vec::new(),
                robot: scn.start,
                clock: 0.0,
            },
            rng: ChaCha8Rng::seed_from_u64(mix_seed(scn.seed, 0xAD)),
            scripted,
            out: MissionResult {
                metrics: MissionMetrics {
                    success: false,
                    distance: 0.0,
                    sim_time: 0.0,
                    wall_time: 0.0,
                    arrivals: vec![None; k],
                    visit_order: Vec::new(),
                    unreachable: Vec::new(),
                    contingency_activations: 0,
                    contingency_reached: 0,
                    replans: 0,
                    detections: 0,
                    feasibility_violations: 0,
                    max_g: f64::NEG_INFINITY,
                    collision: false,
                },
                trace: Vec::new(),
                feasible: Vec::new(),
                targets: Vec::new(),
                tours: Vec::new(),
                recoveries: Vec::new(),
                final_known: Vec::new(),
            },
        })
    }

    fn robot(&self) -> [f64; 2] {
        self.state.robot.position()
    }

    fn grow_all(&mut self, count: usize, robot: Option<[f64; 2]>, only: &[usize]) {
        let Self { env, state, .. } = self;
        for &k in only {
            let tree = &mut state.trees[k];
            env.with_ctx(robot, |ctx| tree.grow(count, ctx));
        }
    }

    fn mark_arrivals(&mut self) {
        let p = self.robot();
        let tol = self.scn.mission.goal_tolerance;
        let goals = &self.scn.goals;
        let hit: Vec<usize> = self
            .state
            .remaining
            .iter()
            .copied()
            .filter(|&k| dist(goals[k], p) <= tol)
            .collect();
        for k in hit {
            self.state.remaining.retain(|&j| j != k);
            self.out.metrics.arrivals[k] = Some(self.state.clock);
            self.out.metrics.visit_order.push(k);
        }
    }

    /// Held–Karp over the robot and the remaining goals; goals whose tree
    /// lacks the robot are left out.
    fn replan(&mut self, reason: ReplanReason) {
        let p = self.robot();
        let rem = self.state.remaining.clone();
        let trees = &self.state.trees;
        let robot_cost: Vec<Option<f64>> = rem.iter().map(|&k| trees[k].cost_from(p)).collect();
        let invalid_local: Vec<usize> = (0..rem.len()).filter(|&j| robot_cost[j].is_none()).collect();
        self.state.invalid = invalid_local.iter().map(|&j| rem[j]).collect();
        let order = if rem.is_empty() || invalid_local.len() == rem.len() {
            Vec::new()
        } else {
            let mut c = CostMatrix::new(rem.len());
            for (i, &gi) in rem.iter().enumerate() {
                for (j, &gj) in rem.iter().enumerate() {
                    if i != j {
                        c.set(i, j, trees[gj].cost_from(self.scn.goals[gi]));
                    }
                }
            }
            match replan_tour(&robot_cost, &c, &invalid_local) {
                Ok(t) => t.order[1..].iter().map(|&a| rem[a - 1]).collect(),
                Err(_) => {
                    // no complete tour among the valid goals: head for the cheapest one first
                    let mut valid: Vec<(f64, usize)> = (0..rem.len())
                        .filter_map(|j| robot_cost[j].map(|c| (c, rem[j])))
                        .collect();
                    valid.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                    valid.into_iter().map(|(_, k)| k).collect()
                }
            }
        };
        for &k in &rem {
            let flag = self.state.invalid.contains(&k);
            self.state.trees[k].invalid = flag;
        }
        self.state.tour = order.clone();
        self.out.metrics.replans += 1;
        self.out.tours.push(TourRecord {
            t: self.state.clock,
            reason,
            order,
            invalid: self.state.invalid.clone(),
        });
    }

    /// Re-evaluates the anchors whose local domain meets a new obstacle and
    /// repairs every remaining tree.
    fn on_detection(&mut self, new: &[usize]) -> Result<(), SimError> {
        self.out.metrics.detections += new.len();
        let new_obs: Vec<Obstacle> = new.iter().map(|&i| self.state.world.obstacles[i]).collect();
        let known = self.state.world.known_obstacles();
        let affected: Vec<usize> = (0..self.env.anchors.len())
            .filter(|&l| {
                let a = &self.env.anchors[l];
                new_obs.iter().any(|o| o.intersects_square(a.center, a.half_width))
            })
            .collect();
        let subset: Vec<SafeSetAnchor> = affected.iter().map(|&l| self.env.anchors[l]).collect();
        let updated = anchor_fields(self.provider, &subset, &known)?;
        for (&l, f) in affected.iter().zip(updated) {
            self.env.fields[l] = f;
        }
        self.env.region = feasible_region(&self.env.anchors, &self.env.fields, self.scn.epsilon)?;
        self.env.known = ObstacleSet::new(known);

        let reach = self.scn.planner.delta;
        let frames: Vec<SafeSetAnchor> = subset;
        let scope = |p: [f64; 2]| {
            frames.iter().any(|a| {
                let l = a.local(p);
                l[0].abs() <= a.half_width + reach && l[1].abs() <= a.half_width + reach
            })
        };
        let Self { env, state, scn, .. } = self;
        for &k in &state.remaining {
            let tree = &mut state.trees[k];
            for o in &new_obs {
                tree.insert_obstacle(o);
            }
            if env.constrained {
                env.with_ctx(None, |ctx| tree.prune_infeasible_where(ctx, &scope));
            }
            // continued sampling near the robot, as the tree would see anyway
            let p = state.robot.position();
            let chunk = 50;
            let mut spent = 0;
            while tree.cost_from(p).is_none() && spent < scn.mission.repair_nodes {
                tree.invalid = true;
                let n = chunk.min(scn.mission.repair_nodes - spent);
                env.with_ctx(Some(p), |ctx| tree.grow(n, ctx));
                spent += n;
            }
        }
        self.replan(ReplanReason::Detection);
        Ok(())
    }

    fn push_row(&mut self, mut row: TraceRow, target: Option<usize>) {
        let p = row.state.position();
        let feasible = self.env.region.contains(p);
        if !feasible {
            self.out.metrics.feasibility_violations += 1;
        }
        row.g = self.state.world.margin(p);
        self.out.metrics.max_g = self.out.metrics.max_g.max(row.g);
        self.out.trace.push(row);
        self.out.feasible.push(feasible);
        self.out.targets.push(target);
    }

    fn nominal_disturbance(&mut self) -> Disturbance {
        let b = &self.scn.bounds;
        match self.scn.mission.nominal_disturbance {
            NominalDisturbance::Zero => Disturbance::ZERO,
            NominalDisturbance::Random => {
                let r = b.d_bar * self.rng.random::<f64>().sqrt();
                let a = self.rng.random_range(-PI..PI);
                Disturbance {
                    dx: r * a.cos(),
                    dy: r * a.sin(),
                    dtheta: self.rng.random_range(-1.0..=1.0) * b.d_theta_bar,
                }
            }
        }
    }

    fn adversary_fires(&mut self) -> bool {
        let mut fired = false;
        while self.scripted.first().is_some_and(|&t| t <= self.state.clock + 1e-9) {
            self.scripted.remove(0);
            fired = true;
        }
        let p = self.scn.adversary.probability;
        // always draw so the random stream does not depend on scripted events
        let draw = self.rng.random::<f64>();
        fired || (p > 0.0 && draw < p)
    }

    /// Anchor minimising the backend value at the robot's state over the full
    /// horizon; ties go to the lowest index.
    fn select_anchor(&self) -> Option<usize> {
        let s = self.state.robot;
        let mut best: Option<(f64, usize)> = None;
        for (l, a) in self.env.anchors.iter().enumerate() {
            if !a.in_frame(s.position()) {
                continue;
            }
            let f = &self.env.fields[l];
            let Ok(v) = f.interpolate(&s.relative_to(a.center), f.horizon()) else {
                continue;
            };
            if best.is_none_or(|(bv, _)| v < bv) {
                best = Some((v, l));
            }
        }
        best.map(|(_, l)| l)
    }

    /// Recovery, dwell and regrowth. Returns `false` when the mission has to
    /// stop.
    fn recover(&mut self) -> Result<bool, SimError> {
        self.out.metrics.contingency_activations += 1;
        let Some(l) = self.select_anchor() else {
            log::warn!("no anchor covers the robot at t = {}", self.state.clock);
            return Ok(false);
        };
        self.out.recoveries.push((l, self.out.trace.len()));
        let before: Vec<bool> = self.state.world.known.clone();
        let anchor = self.env.anchors[l];
        let outcome = execute_contingency(
            &mut self.state.world,
            self.state.robot,
            &anchor,
            self.provider,
            &self.scn.bounds,
            &self.scn.mission.contingency,
        )?;
        let t0 = self.state.clock;
        let rows = &outcome.trajectory;
        // the terminal row is replaced by the dwell row below
        for r in &rows[..rows.len().saturating_sub(1)] {
            let mut r = *r;
            r.t += t0;
            self.push_row(r, None);
        }
        if let Some(last) = rows.last() {
            self.state.robot = last.state;
        }
        self.state.clock = t0 + outcome.t_reach;
        if outcome.reached {
            self.out.metrics.contingency_reached += 1;
        }
        if self.state.world.margin(self.robot()) > 0.0 {
            self.out.metrics.collision = true;
            return Ok(false);
        }
        let new: Vec<usize> = (0..before.len())
            .filter(|&i| self.state.world.known[i] && !before[i])
            .collect();
        if !new.is_empty() {
            self.on_detection(&new)?;
        }
        let dwell = TraceRow {
            t: self.state.clock,
            state: self.state.robot,
            control: Control { v: 0.0, omega: 0.0 },
            disturbance: Disturbance::ZERO,
            value: outcome.final_value,
            branch: Branch::Dwell,
            g: 0.0,
        };
        self.push_row(dwell, None);
        self.state.clock += self.scn.mission.dt;
        self.mark_arrivals();
        self.replan(ReplanReason::Recovery);
        let regrow: Vec<usize> = self.state.invalid.clone();
        if !regrow.is_empty() {
            let p = self.robot();
            self.grow_all(self.scn.mission.dwell_nodes, Some(p), &regrow);
            self.replan(ReplanReason::Recovery);
        }
        Ok(true)
    }

    fn run(mut self, wall: Instant) -> Result<MissionResult, SimError> {
        let cfg = self.scn.mission.clone();
        let all: Vec<usize> = (0..self.scn.goals.len()).collect();
        self.grow_all(cfg.initial_nodes, None, &all);
        self.mark_arrivals();
        self.replan(ReplanReason::Initial);
        let mut idle_dwells = 0usize;
        loop {
            if self.state.remaining.is_empty() {
                self.out.metrics.success = true;
                break;
            }
            if self.state.clock >= cfg.max_time {
                break;
            }
            let new = self.state.world.sense(self.robot());
            if !new.is_empty() {
                self.on_detection(&new)?;
            }
            let adversary = self.adversary_fires();
            if adversary || self.state.tour.is_empty() {
                if !self.recover()? {
                    break;
                }
                if self.state.tour.is_empty() && !self.state.remaining.is_empty() {
                    idle_dwells += 1;
                    if idle_dwells > cfg.max_dwell_retries {
                        break;
                    }
                } else {
                    idle_dwells = 0;
                }
                continue;
            }
            let target = self.state.tour[0];
            let p = self.robot();
            if cfg.extend_per_step > 0 {
                self.grow_all(cfg.extend_per_step, Some(p), &[target]);
            }
            let Some(path) = self.state.trees[target].best_path(p) else {
                self.replan(ReplanReason::PathLost);
                continue;
            };
            let u = pursuit(
                &self.state.robot,
                &path.points,
                self.scn.planner.delta,
                cfg.k_theta,
                &self.scn.bounds,
            );
            let d = self.nominal_disturbance();
            let row = TraceRow {
                t: self.state.clock,
                state: self.state.robot,
                control: u,
                disturbance: d,
                value: self.env.region.value(p).unwrap_or(f64::NAN),
                branch: Branch::Nominal,
                g: 0.0,
            };
            self.push_row(row, Some(target));
            self.state.robot = rk4_step(&self.state.robot, &u, &d, cfg.dt);
            self.state.clock += cfg.dt;
            if self.state.world.margin(self.robot()) > 0.0 {
                self.out.metrics.collision = true;
                break;
            }
            let visited = self.out.metrics.visit_order.len();
            self.mark_arrivals();
            if self.out.metrics.visit_order.len() != visited {
                self.replan(ReplanReason::Arrival);
            }
        }
        let last = TraceRow {
            t: self.state.clock,
            state: self.state.robot,
            control: Control { v: 0.0, omega: 0.0 },
            disturbance: Disturbance::ZERO,
            value: self.env.region.value(self.robot()).unwrap_or(f64::NAN),
            branch: Branch::Nominal,
            g: 0.0,
        };
        self.push_row(last, None);
        let m = &mut self.out.metrics;
        m.unreachable = self.state.remaining.clone();
        m.success = m.success && !m.collision;
        m.sim_time = self.state.clock;
        m.distance = trace_distance(&self.out.trace);
        m.wall_time = wall.elapsed().as_secs_f64();
        self.out.final_known = self.state.world.known_obstacles();
        Ok(self.out)
    }
}

/// Runs the mission loop on a validated scenario.
pub fn run_mission(scn: &Scenario, provider: &FieldProvider) -> Result<MissionResult, SimError> {
    let wall = Instant::now();
    Mission::new(scn, provider)?.run(wall)
}
