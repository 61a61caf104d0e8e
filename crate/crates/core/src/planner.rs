//! Goal-rooted incremental shortest-path planner.
//!
//! Each goal owns a graph whose vertices are grown by steering random samples
//! towards the nearest vertex, connected to every neighbour inside a shrinking
//! radius. The cost-to-goal tree is kept exactly shortest-path consistent: new
//! vertices and obstacle insertions trigger a priority-queue relaxation
//! cascade, so costs always agree with a from-scratch Dijkstra run.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::levelset::{Obstacle, ObstacleSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    /// Weight of the Gaussian mixture around safe-set centres.
    pub gaussian_weight: f64,
    pub uniform_weight: f64,
    /// Weight of samples jittered around other goals.
    pub goal_weight: f64,
    /// Gaussian standard deviation as a multiple of the safe-set radius.
    pub std_scale: f64,
    /// Share of samples drawn around the robot while the tree is marked invalid.
    pub robot_bias: f64,
    /// Standard deviation of robot- and goal-biased samples.
    pub bias_std: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            gaussian_weight: 0.7,
            uniform_weight: 0.2,
            goal_weight: 0.1,
            std_scale: 3.0,
            robot_bias: 0.3,
            bias_std: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Maximum edge length and best-path snap distance.
    pub delta: f64,
    /// Neighbour-radius constant; `None` uses `2·sqrt(3·area/(2π))`.
    pub gamma: Option<f64>,
    /// Extra distance kept between edges and obstacle disks.
    pub clearance: f64,
    /// Spacing of feasibility probes along an edge.
    pub edge_probe: f64,
    /// Rejected samples allowed per requested vertex before `grow` gives up.
    pub max_attempts_per_vertex: usize,
    pub sampler: SamplerConfig,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            delta: 1.0,
            gamma: None,
            clearance: 0.3,
            edge_probe: 0.25,
            max_attempts_per_vertex: 50,
            sampler: SamplerConfig::default(),
        }
    }
}

/// Environment a growth step works against.
pub struct GrowContext<'a> {
    /// `[x_min, x_max, y_min, y_max]` of the planning domain.
    pub domain: [f64; 4],
    /// Point feasibility predicate (feasible-region membership).
    pub feasible: &'a dyn Fn([f64; 2]) -> bool,
    pub obstacles: &'a ObstacleSet,
    /// Safe-set centres and radius for the Gaussian mixture.
    pub centers: &'a [[f64; 2]],
    pub safe_radius: f64,
    /// Points for goal-biased samples.
    pub goals: &'a [[f64; 2]],
    pub robot: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GrowStats {
    pub inserted: usize,
    pub rejected: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InvalidationReport {
    pub removed_vertices: usize,
    pub removed_edges: usize,
    pub orphaned: usize,
    pub disconnected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub points: Vec<[f64; 2]>,
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct QueueItem {
    cost: f64,
    vertex: usize,
}

impl Eq for QueueItem {}

impl Ord for QueueItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for QueueItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Graph and cost-to-goal tree for one goal. Vertex 0 is the goal.
#[derive(Debug, Clone)]
pub struct GoalPlanner {
    pub goal: [f64; 2],
    pub config: PlannerConfig,
    vertices: Vec<[f64; 2]>,
    alive: Vec<bool>,
    adj: Vec<Vec<(usize, f64)>>,
    parent: Vec<Option<usize>>,
    cost: Vec<f64>,
    alive_count: usize,
    rng: ChaCha8Rng,
    /// Set while the goal is unreachable; biases sampling towards the robot.
    pub invalid: bool,
    pub stats: GrowStats,
}

impl GoalPlanner {
    pub fn new(goal: [f64; 2], config: PlannerConfig, seed: u64) -> Self {
        Self {
            goal,
            config,
            vertices: vec![goal],
            alive: vec![true],
            adj: vec![Vec::new()],
            parent: vec![None],
            cost: vec![0.0],
            alive_count: 1,
            rng: ChaCha8Rng::seed_from_u64(seed),
            invalid: false,
            stats: GrowStats::default(),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.alive_count
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn is_alive(&self, v: usize) -> bool {
        self.alive[v]
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.adj[v]
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    /// Cost-to-goal, infinite when disconnected.
    pub fn cost(&self, v: usize) -> f64 {
        self.cost[v]
    }

    pub fn alive_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.vertices.len()).filter(|&v| self.alive[v])
    }

    /// Every stored edge once, as `(a, b, length)` with `a < b`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for a in self.alive_vertices() {
            for &(b, len) in &self.adj[a] {
                if a < b {
                    out.push((a, b, len));
                }
            }
        }
        out
    }

    pub fn gamma(&self, domain: [f64; 4]) -> f64 {
        self.config.gamma.unwrap_or_else(|| {
            let area = (domain[1] - domain[0]) * (domain[3] - domain[2]);
            2.0 * (3.0 * area / (2.0 * std::f64::consts::PI)).sqrt()
        })
    }

    /// Neighbour radius `min(δ, γ·sqrt(ln n / n))`.
    pub fn radius(&self, n: usize, domain: [f64; 4]) -> f64 {
        let n = n.max(2) as f64;
        self.config
            .delta
            .min(self.gamma(domain) * (n.ln() / n).sqrt())
    }

    fn nearest(&self, p: [f64; 2]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for v in self.alive_vertices() {
            let d = dist(self.vertices[v], p);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((v, d));
            }
        }
        best
    }

    fn point_ok(&self, p: [f64; 2], ctx: &GrowContext) -> bool {
        let [x0, x1, y0, y1] = ctx.domain;
        p[0] >= x0
            && p[0] <= x1
            && p[1] >= y0
            && p[1] <= y1
            && ctx
                .obstacles
                .obstacles
                .iter()
                .all(|o| o.signed(p[0], p[1]) < -self.config.clearance)
            && (ctx.feasible)(p)
    }

    /// Collision and feasibility test for a candidate edge. End points are
    /// assumed to have been checked already.
    pub fn edge_ok(&self, a: [f64; 2], b: [f64; 2], ctx: &GrowContext) -> bool {
        if ctx
            .obstacles
            .obstacles
            .iter()
            .any(|o| o.intersects_segment(a, b, self.config.clearance))
        {
            return false;
        }
        let len = dist(a, b);
        let probes = (len / self.config.edge_probe).ceil() as usize;
        (1..probes).all(|k| {
            let f = k as f64 / probes as f64;
            (ctx.feasible)([a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])])
        })
    }

    fn sample(&mut self, ctx: &GrowContext) -> [f64; 2] {
        let s = self.config.sampler;
        let [x0, x1, y0, y1] = ctx.domain;
        let jitter = |rng: &mut ChaCha8Rng, c: [f64; 2], std: f64| {
            let n = Normal::new(0.0, std.max(1e-9)).expect("positive std");
            [c[0] + n.sample(rng), c[1] + n.sample(rng)]
        };
        if self.invalid {
            if let Some(r) = ctx.robot {
                if self.rng.random::<f64>() < s.robot_bias {
                    return jitter(&mut self.rng, r, s.bias_std);
                }
            }
        }
        let total = s.gaussian_weight + s.uniform_weight + s.goal_weight;
        let u = self.rng.random::<f64>() * total;
        if u < s.gaussian_weight && !ctx.centers.is_empty() {
            let c = ctx.centers[self.rng.random_range(0..ctx.centers.len())];
            jitter(&mut self.rng, c, s.std_scale * ctx.safe_radius)
        } else if u >= s.gaussian_weight + s.uniform_weight && !(ctx.goals.is_empty() && ctx.robot.is_none()) {
            let n = ctx.goals.len() + usize::from(ctx.robot.is_some());
            let pick = self.rng.random_range(0..n);
            let c = if pick < ctx.goals.len() {
                ctx.goals[pick]
            } else {
                ctx.robot.expect("robot counted")
            };
            jitter(&mut self.rng, c, s.bias_std)
        } else {
            [
                self.rng.random_range(x0..=x1),
                self.rng.random_range(y0..=y1),
            ]
        }
    }

    /// Adds up to `count` vertices.
    pub fn grow(&mut self, count: usize, ctx: &GrowContext) -> GrowStats {
        let mut stats = GrowStats::default();
        let budget = count * self.config.max_attempts_per_vertex.max(1);
        let mut attempts = 0;
        while stats.inserted < count && attempts < budget {
            attempts += 1;
            let q = self.sample(ctx);
            if self.try_insert(q, ctx) {
                stats.inserted += 1;
            } else {
                stats.rejected += 1;
            }
        }
        self.stats.inserted += stats.inserted;
        self.stats.rejected += stats.rejected;
        stats
    }

    /// Steers `q` towards its nearest vertex and inserts it if admissible.
    pub fn try_insert(&mut self, q: [f64; 2], ctx: &GrowContext) -> bool {
        let Some((near, d)) = self.nearest(q) else {
            return false;
        };
        let delta = self.config.delta;
        let p = if d > delta {
            let a = self.vertices[near];
            let f = delta / d;
            [a[0] + f * (q[0] - a[0]), a[1] + f * (q[1] - a[1])]
        } else {
            q
        };
        if d < 1e-9 || !self.point_ok(p, ctx) {
            return false;
        }
        let r = self.radius(self.alive_count + 1, ctx.domain);
        let mut links: Vec<(usize, f64)> = Vec::new();
        for v in self.alive_vertices() {
            let len = dist(self.vertices[v], p);
            if (len <= r || v == near) && len <= delta + 1e-12 && len > 1e-9 {
                links.push((v, len));
            }
        }
        links.retain(|&(v, _)| self.edge_ok(self.vertices[v], p, ctx));
        if links.is_empty() {
            return false;
        }
        let id = self.vertices.len();
        self.vertices.push(p);
        self.alive.push(true);
        self.parent.push(None);
        self.cost.push(f64::INFINITY);
        self.adj.push(Vec::with_capacity(links.len()));
        self.alive_count += 1;
        for &(v, len) in &links {
            self.adj[id].push((v, len));
            self.adj[v].push((id, len));
        }
        let mut best = (f64::INFINITY, None);
        for &(v, len) in &links {
            let c = self.cost[v] + len;
            if c < best.0 {
                best = (c, Some(v));
            }
        }
        self.cost[id] = best.0;
        self.parent[id] = best.1;
        if best.0.is_finite() {
            let mut heap = BinaryHeap::new();
            heap.push(QueueItem {
                cost: best.0,
                vertex: id,
            });
            self.cascade(heap);
        }
        true
    }

    /// Relaxes costs outward from the queued vertices until consistent.
    fn cascade(&mut self, mut heap: BinaryHeap<QueueItem>) {
        while let Some(QueueItem { cost, vertex }) = heap.pop() {
            if cost > self.cost[vertex] {
                continue;
            }
            for i in 0..self.adj[vertex].len() {
                let (u, len) = self.adj[vertex][i];
                let c = cost + len;
                if c < self.cost[u] {
                    self.cost[u] = c;
                    self.parent[u] = Some(vertex);
                    heap.push(QueueItem { cost: c, vertex: u });
                }
            }
        }
    }

    fn remove_vertex(&mut self, v: usize) -> usize {
        let links = std::mem::take(&mut self.adj[v]);
        for &(u, _) in &links {
            self.adj[u].retain(|&(w, _)| w != v);
        }
        self.alive[v] = false;
        self.alive_count -= 1;
        self.parent[v] = None;
        self.cost[v] = f64::INFINITY;
        links.len()
    }

    /// Removes the listed vertices and edges, then repairs the tree.
    fn invalidate(&mut self, dead: &[usize], cut: &[(usize, usize)]) -> InvalidationReport {
        let mut report = InvalidationReport::default();
        let mut broken = vec![false; self.vertices.len()];
        for &v in dead {
            if self.alive[v] {
                report.removed_edges += self.remove_vertex(v);
                report.removed_vertices += 1;
                broken[v] = true;
            }
        }
        for &(a, b) in cut {
            let before = self.adj[a].len();
            self.adj[a].retain(|&(w, _)| w != b);
            self.adj[b].retain(|&(w, _)| w != a);
            if self.adj[a].len() != before {
                report.removed_edges += 1;
            }
            if self.parent[a] == Some(b) {
                broken[a] = true;
            }
            if self.parent[b] == Some(a) {
                broken[b] = true;
            }
        }
        if report.removed_vertices == 0 && report.removed_edges == 0 {
            return report;
        }
        // every vertex whose parent chain passes through a broken link is orphaned
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); self.vertices.len()];
        for v in self.alive_vertices() {
            if let Some(p) = self.parent[v] {
                children[p].push(v);
            }
        }
        let mut orphan = vec![false; self.vertices.len()];
        let mut stack: Vec<usize> = Vec::new();
        for v in 0..self.vertices.len() {
            if broken[v] {
                if self.alive[v] {
                    orphan[v] = true;
                }
                stack.extend(children[v].iter().copied());
                // children of removed vertices were not collected above
                if !self.alive[v] {
                    for u in self.alive_vertices() {
                        if self.parent[u] == Some(v) {
                            stack.push(u);
                        }
                    }
                }
            }
        }
        while let Some(v) = stack.pop() {
            if orphan[v] {
                continue;
            }
            orphan[v] = true;
            stack.extend(children[v].iter().copied());
        }
        let orphans: Vec<usize> = (0..self.vertices.len()).filter(|&v| orphan[v]).collect();
        report.orphaned = orphans.len();
        for &v in &orphans {
            self.cost[v] = f64::INFINITY;
            self.parent[v] = None;
        }
        if !self.alive[0] {
            report.disconnected = self.alive_count;
            return report;
        }
        let mut heap = BinaryHeap::new();
        for &v in &orphans {
            let mut best = (f64::INFINITY, None);
            for &(u, len) in &self.adj[v] {
                if !orphan[u] && self.cost[u] + len < best.0 {
                    best = (self.cost[u] + len, Some(u));
                }
            }
            if best.1.is_some() {
                self.cost[v] = best.0;
                self.parent[v] = best.1;
                heap.push(QueueItem {
                    cost: best.0,
                    vertex: v,
                });
            }
        }
        self.cascade(heap);
        report.disconnected = orphans.iter().filter(|&&v| !self.cost[v].is_finite()).count();
        report
    }

    /// Removes vertices inside `obstacle` (inflated by the clearance) and
    /// edges passing within the clearance of it, then rewires.
    pub fn insert_obstacle(&mut self, obstacle: &Obstacle) -> InvalidationReport {
        let c = self.config.clearance;
        let dead: Vec<usize> = self
            .alive_vertices()
            .filter(|&v| obstacle.signed(self.vertices[v][0], self.vertices[v][1]) >= -c)
            .collect();
        let mut cut = Vec::new();
        for (a, b, _) in self.edges() {
            if obstacle.intersects_segment(self.vertices[a], self.vertices[b], c) {
                cut.push((a, b));
            }
        }
        self.invalidate(&dead, &cut)
    }

    /// Removes vertices and edges that fail the current feasibility test.
    pub fn prune_infeasible(&mut self, ctx: &GrowContext) -> InvalidationReport {
        self.prune_infeasible_where(ctx, &|_| true)
    }

    /// As [`prune_infeasible`](Self::prune_infeasible), testing only
    /// vertices in `scope` and edges with an end point in `scope`.
    pub fn prune_infeasible_where(
        &mut self,
        ctx: &GrowContext,
        scope: &dyn Fn([f64; 2]) -> bool,
    ) -> InvalidationReport {
        let mut dead = vec![false; self.vertices.len()];
        let in_scope: Vec<bool> = self.vertices.iter().map(|&p| scope(p)).collect();
        for v in self.alive_vertices() {
            dead[v] = in_scope[v] && !(ctx.feasible)(self.vertices[v]);
        }
        let mut cut = Vec::new();
        for (a, b, _) in self.edges() {
            if dead[a] || dead[b] || !(in_scope[a] || in_scope[b]) {
                continue;
            }
            if !self.edge_ok(self.vertices[a], self.vertices[b], ctx) {
                cut.push((a, b));
            }
        }
        let dead: Vec<usize> = (0..dead.len()).filter(|&v| dead[v]).collect();
        self.invalidate(&dead, &cut)
    }

    /// Nearest alive vertex within `δ` of `from`.
    pub fn snap(&self, from: [f64; 2]) -> Option<usize> {
        self.nearest(from)
            .filter(|&(_, d)| d <= self.config.delta)
            .map(|(v, _)| v)
    }

    /// Path from the snapped vertex to the goal along parent pointers.
    pub fn best_path(&self, from: [f64; 2]) -> Option<Path> {
        let v = self.snap(from)?;
        if !self.cost[v].is_finite() {
            return None;
        }
        let mut points = vec![self.vertices[v]];
        let mut cur = v;
        while let Some(p) = self.parent[cur] {
            points.push(self.vertices[p]);
            cur = p;
        }
        Some(Path {
            points,
            cost: self.cost[v],
        })
    }

    /// Cost-to-goal of the vertex `from` snaps to, `None` if unreachable.
    pub fn cost_from(&self, from: [f64; 2]) -> Option<f64> {
        self.snap(from)
            .map(|v| self.cost[v])
            .filter(|c| c.is_finite())
    }

    /// Checks `c(v) = c(parent) + len` for every connected vertex.
    pub fn check_tree(&self) -> Result<(), String> {
        if self.alive[0] && self.cost[0] != 0.0 {
            return Err("root cost is not zero".into());
        }
        for v in self.alive_vertices() {
            if v == 0 {
                continue;
            }
            match self.parent[v] {
                Some(p) => {
                    let len = self.adj[v]
                        .iter()
                        .find(|&&(u, _)| u == p)
                        .map(|&(_, l)| l)
                        .ok_or_else(|| format!("vertex {v}: parent {p} is not a neighbour"))?;
                    if (self.cost[v] - (self.cost[p] + len)).abs() > 1e-9 {
                        return Err(format!("vertex {v}: cost {} != parent cost + edge", self.cost[v]));
                    }
                }
                None if self.cost[v].is_finite() => {
                    return Err(format!("vertex {v}: finite cost without parent"));
                }
                None => {}
            }
        }
        Ok(())
    }

    pub fn dump(&self) -> GraphDump {
        let index: Vec<Option<usize>> = {
            let mut next = 0;
            (0..self.vertices.len())
                .map(|v| {
                    self.alive[v].then(|| {
                        next += 1;
                        next - 1
                    })
                })
                .collect()
        };
        let alive: Vec<usize> = self.alive_vertices().collect();
        GraphDump {
            goal: self.goal,
            vertices: alive.iter().map(|&v| self.vertices[v]).collect(),
            edges: self
                .edges()
                .into_iter()
                .map(|(a, b, _)| [index[a].unwrap(), index[b].unwrap()])
                .collect(),
            parents: alive
                .iter()
                .map(|&v| self.parent[v].and_then(|p| index[p]))
                .collect(),
            costs: alive
                .iter()
                .map(|&v| self.cost[v].is_finite().then_some(self.cost[v]))
                .collect(),
        }
    }
}

/// JSON-friendly graph snapshot; unreachable costs are `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDump {
    pub goal: [f64; 2],
    pub vertices: Vec<[f64; 2]>,
    pub edges: Vec<[usize; 2]>,
    pub parents: Vec<Option<usize>>,
    pub costs: Vec<Option<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOMAIN: [f64; 4] = [-10.0, 10.0, -10.0, 10.0];

    fn ctx<'a>(feasible: &'a dyn Fn([f64; 2]) -> bool, obstacles: &'a ObstacleSet) -> GrowContext<'a> {
        GrowContext {
            domain: DOMAIN,
            feasible,
            obstacles,
            centers: &[[0.0, 0.0]],
            safe_radius: 1.0,
            goals: &[],
            robot: None,
        }
    }

    /// Dijkstra over the stored graph from the goal.
    fn dijkstra(p: &GoalPlanner) -> Vec<f64> {
        let n = p.vertices().len();
        let mut d = vec![f64::INFINITY; n];
        if !p.is_alive(0) {
            return d;
        }
        d[0] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(QueueItem { cost: 0.0, vertex: 0 });
        while let Some(QueueItem { cost, vertex }) = heap.pop() {
            if cost > d[vertex] {
                continue;
            }
            for &(u, len) in p.neighbors(vertex) {
                if cost + len < d[u] {
                    d[u] = cost + len;
                    heap.push(QueueItem { cost: d[u], vertex: u });
                }
            }
        }
        d
    }

    fn assert_dijkstra(p: &GoalPlanner) {
        let d = dijkstra(p);
        for v in p.alive_vertices() {
            let (a, b) = (p.cost(v), d[v]);
            assert!(
                (a.is_infinite() && b.is_infinite()) || (a - b).abs() <= 1e-9,
                "vertex {v}: {a} vs {b}"
            );
        }
        p.check_tree().unwrap();
    }

    #[test]
    fn open_space_growth() {
        let obs = ObstacleSet::default();
        let all = |_: [f64; 2]| true;
        let mut p = GoalPlanner::new([0.0, 0.0], PlannerConfig::default(), 1);
        let stats = p.grow(800, &ctx(&all, &obs));
        assert_eq!(stats.inserted, 800);
        assert_dijkstra(&p);
        assert!(p.edges().iter().all(|&(_, _, l)| l <= 1.0 + 1e-12));
        let path = p.best_path([3.0, 0.0]).unwrap();
        assert_close!(path.cost, p.cost_from([3.0, 0.0]).unwrap(), 1e-12);
        let sum: f64 = path.points.windows(2).map(|w| dist(w[0], w[1])).sum();
        assert_close!(sum, path.cost, 1e-9);
        let root = p.best_path([0.0, 0.0]).unwrap();
        assert_eq!(root.points.len(), 1);
        assert_eq!(root.cost, 0.0);
    }

    #[test]
    fn feasibility_is_a_hard_constraint() {
        let obs = ObstacleSet::default();
        let left = |p: [f64; 2]| p[0] <= 0.0;
        let mut p = GoalPlanner::new([-1.0, 0.0], PlannerConfig::default(), 2);
        p.grow(300, &ctx(&left, &obs));
        assert!(p.alive_vertices().all(|v| p.vertices()[v][0] <= 0.0));
    }

    #[test]
    fn short_steps() {
        let obs = ObstacleSet::default();
        let all = |_: [f64; 2]| true;
        let cfg = PlannerConfig {
            delta: 0.5,
            ..PlannerConfig::default()
        };
        let mut p = GoalPlanner::new([0.0, 0.0], cfg, 3);
        p.grow(300, &ctx(&all, &obs));
        assert!(p.edges().iter().all(|&(_, _, l)| l <= 0.5 + 1e-12));
    }

    #[test]
    fn obstacle_insertion_matches_dijkstra() {
        let obs = ObstacleSet::default();
        let all = |_: [f64; 2]| true;
        let mut p = GoalPlanner::new([0.0, 0.0], PlannerConfig::default(), 4);
        p.grow(1000, &ctx(&all, &obs));
        let before: Vec<f64> = p.alive_vertices().map(|v| p.cost(v)).collect();
        let far = Obstacle::new([40.0, 40.0], 1.0);
        let r = p.insert_obstacle(&far);
        assert_eq!(r, InvalidationReport::default());
        let after: Vec<f64> = p.alive_vertices().map(|v| p.cost(v)).collect();
        assert_eq!(before, after);

        for (i, c) in [[3.0, 0.0], [-2.0, 4.0], [1.0, -5.0]].iter().enumerate() {
            let o = Obstacle::new(*c, 0.8 + 0.3 * i as f64);
            p.insert_obstacle(&o);
            assert_dijkstra(&p);
            for (a, b, _) in p.edges() {
                assert!(!o.intersects_segment(p.vertices()[a], p.vertices()[b], 0.0));
            }
        }
    }

    #[test]
    fn severed_corridor_disconnects() {
        // corridor y ∈ [-1, 1] joining two rooms, cut by an obstacle
        let feasible = |p: [f64; 2]| p[0].abs() >= 4.0 || p[1].abs() <= 1.0;
        let obs = ObstacleSet::default();
        let cfg = PlannerConfig {
            clearance: 0.0,
            ..PlannerConfig::default()
        };
        let mut p = GoalPlanner::new([-7.0, 0.0], cfg, 5);
        let mut c = ctx(&feasible, &obs);
        c.centers = &[[-7.0, 0.0], [7.0, 0.0]];
        p.grow(1500, &c);
        assert!(p.cost_from([7.0, 0.0]).is_some());
        p.insert_obstacle(&Obstacle::new([0.0, 0.0], 1.5));
        assert_dijkstra(&p);
        for v in p.alive_vertices() {
            if p.vertices()[v][0] > 1.5 {
                assert!(p.cost(v).is_infinite());
            }
        }
        assert!(p.best_path([7.0, 0.0]).is_none());
    }

    #[test]
    fn determinism() {
        let obs = ObstacleSet::new(vec![Obstacle::new([2.0, 2.0], 1.0)]);
        let all = |_: [f64; 2]| true;
        let run = || {
            let mut p = GoalPlanner::new([0.0, 0.0], PlannerConfig::default(), 9);
            p.grow(200, &ctx(&all, &obs));
            p.dump()
        };
        assert_eq!(run(), run());
    }
}
