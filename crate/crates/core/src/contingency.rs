//! Recovery controller: augmented values, residual probes and the switching
//! policy that falls back to the obstacle-free oracle where the learned value
//! fails to certify descent.

use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    hamiltonian, optimal_control, rk4_step, worst_disturbance, Bounds, Control, Costate,
    Disturbance, State,
};
use crate::error::ContingencyError;
use crate::levelset::{Obstacle, ObstacleSet, ValueField};
use crate::reachsets::SafeSetAnchor;
use crate::sim::World;
use crate::surrogate::{local_obstacles, FieldProvider};

/// `Ṽ(x, τ) = max(V(x − c, τ), g(x))` for one anchor, in the global frame.
#[derive(Debug, Clone)]
pub struct AugmentedValue {
    pub field: Arc<ValueField>,
    pub anchor: SafeSetAnchor,
    /// Obstacles in the global frame defining `g`.
    pub obstacles: ObstacleSet,
}

/// Which value drives the control at a trace step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Nominal,
    Learned,
    Fallback,
    Dwell,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Nominal => "nominal",
            Self::Learned => "learned",
            Self::Fallback => "fallback",
            Self::Dwell => "dwell",
        }
    }
}

pub fn augment(
    field: Arc<ValueField>,
    anchor: SafeSetAnchor,
    obstacles: ObstacleSet,
) -> Result<AugmentedValue, ContingencyError> {
    let g = &field.grid;
    let h = anchor.half_width;
    let fits = (g.min[0] + h).abs() < 1e-9
        && (g.max[0] - h).abs() < 1e-9
        && (g.min[1] + h).abs() < 1e-9
        && (g.max[1] - h).abs() < 1e-9;
    if !fits {
        return Err(ContingencyError::DomainMismatch);
    }
    Ok(AugmentedValue {
        field,
        anchor,
        obstacles,
    })
}

impl AugmentedValue {
    /// Obstacle margin `g(p)`, `-∞` without obstacles.
    pub fn g(&self, p: [f64; 2]) -> f64 {
        self.obstacles.signed(p[0], p[1], f64::NEG_INFINITY)
    }

    pub fn horizon(&self) -> f64 {
        self.field.horizon()
    }

    pub fn covers(&self, s: &State) -> bool {
        let l = self.anchor.local(s.position());
        self.field.grid.contains_xy(l[0], l[1])
    }

    fn local_value(&self, l: &State, tau: f64) -> Result<f64, ContingencyError> {
        let c = self.anchor.center;
        let v = self.field.interpolate(l, tau)?;
        Ok(v.max(self.g([l.x + c[0], l.y + c[1]])))
    }

    pub fn value(&self, s: &State, tau: f64) -> Result<f64, ContingencyError> {
        self.local_value(&s.relative_to(self.anchor.center), tau)
    }

    /// Finite-difference gradient of the augmented value, one grid spacing
    /// per axis.
    pub fn gradient(&self, s: &State, tau: f64) -> Result<Costate, ContingencyError> {
        let l = s.relative_to(self.anchor.center);
        self.field.grid.check_xy(&l)?;
        let p = self.field.grid.fd_gradient(&l, |q| {
            let c = self.anchor.center;
            let v = self.field.interpolate(q, tau)?;
            Ok(v.max(self.g([q.x + c[0], q.y + c[1]])))
        })?;
        Ok(p)
    }

    /// `∂Ṽ/∂τ` with step `dt_out`, one-sided at the ends of the horizon.
    pub fn horizon_derivative(&self, s: &State, tau: f64) -> Result<f64, ContingencyError> {
        let h = self.field.dt_out;
        let top = self.horizon();
        if top == 0.0 {
            return Ok(0.0);
        }
        let tau = tau.clamp(0.0, top);
        let l = s.relative_to(self.anchor.center);
        let (a, b) = if tau - h < -1e-12 {
            (tau, (tau + h).min(top))
        } else if tau + h > top + 1e-12 {
            ((tau - h).max(0.0), tau)
        } else {
            (tau - h, tau + h)
        };
        Ok((self.local_value(&l, b)? - self.local_value(&l, a)?) / (b - a))
    }

    /// `D = ∂tṼ + H(x, ∇Ṽ)` with forward time `t = T − τ`, so
    /// `∂tṼ = −∂τṼ`. Positive values mean descent is not certified.
    pub fn residual(&self, s: &State, tau: f64, b: &Bounds) -> Result<f64, ContingencyError> {
        let p = self.gradient(s, tau)?;
        Ok(hamiltonian(s, &p, b) - self.horizon_derivative(s, tau)?)
    }
}

/// Smallest stored horizon in `range` with `Ṽ(s, t) ≤ −ε`.
pub fn select_t_min(av: &AugmentedValue, s: &State, range: [f64; 2], epsilon: f64) -> Option<f64> {
    let vf = &av.field;
    let slices = (0..vf.slice_count())
        .map(|k| vf.time(k))
        .filter(|&t| t >= range[0] - 1e-9 && t <= range[1] + 1e-9);
    if av.anchor.in_safe_disk(s.position()) {
        return slices.into_iter().next();
    }
    if !av.covers(s) {
        return None;
    }
    slices.into_iter().find(|&t| av.value(s, t).is_ok_and(|v| v <= -epsilon))
}

/// Learned control when its residual shows descent, obstacle-free fallback otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchDecision {
    pub control: Control,
    pub branch: Branch,
    pub residual: f64,
    /// Gradient of the branch in use.
    pub gradient: Costate,
}

pub fn switching_policy(
    learned: &AugmentedValue,
    fallback: &AugmentedValue,
    s: &State,
    tau: f64,
    b: &Bounds,
) -> Result<SwitchDecision, ContingencyError> {
    let residual = learned.residual(s, tau, b)?;
    let (branch, gradient) = if residual <= 0.0 {
        (Branch::Learned, learned.gradient(s, tau)?)
    } else {
        (Branch::Fallback, fallback.gradient(s, tau)?)
    };
    Ok(SwitchDecision {
        control: optimal_control(s, &gradient, b),
        branch,
        residual,
        gradient,
    })
}

/// Fraction of uniform probes over the local domain and `τ ∈ (0, T]` where
/// the residual is positive.
pub fn violation_fraction(
    av: &AugmentedValue,
    b: &Bounds,
    probes: usize,
    seed: u64,
) -> Result<f64, ContingencyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = &av.field.grid;
    let c = av.anchor.center;
    let top = av.horizon();
    let mut hits = 0usize;
    for _ in 0..probes {
        let s = State::new(
            c[0] + rng.random_range(g.min[0]..=g.max[0]),
            c[1] + rng.random_range(g.min[1]..=g.max[1]),
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        );
        let tau = top * (1.0 - rng.random::<f64>());
        if av.residual(&s, tau, b)? > 0.0 {
            hits += 1;
        }
    }
    Ok(hits as f64 / probes.max(1) as f64)
}

/// Fields served to the contingency controller.
pub trait ValueSource {
    /// Backend field for `anchor` given the known obstacles (global frame).
    fn learned(&self, anchor: &SafeSetAnchor, known: &[Obstacle]) -> Result<Arc<ValueField>, ContingencyError>;
    /// Obstacle-free oracle for `anchor`.
    fn fallback(&self, anchor: &SafeSetAnchor) -> Result<Arc<ValueField>, ContingencyError>;
}

impl ValueSource for FieldProvider {
    fn learned(&self, anchor: &SafeSetAnchor, known: &[Obstacle]) -> Result<Arc<ValueField>, ContingencyError> {
        Ok(FieldProvider::learned(self, &local_obstacles(anchor, known))?)
    }

    fn fallback(&self, _anchor: &SafeSetAnchor) -> Result<Arc<ValueField>, ContingencyError> {
        Ok(self.oracle(&ObstacleSet::default())?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContingencyConfig {
    /// Control step (zero-order hold).
    pub dt: f64,
    /// Certification margin used for horizon selection.
    pub epsilon: f64,
    /// Horizon window for the initial selection.
    pub t_range: [f64; 2],
}

impl Default for ContingencyConfig {
    fn default() -> Self {
        Self {
            dt: 0.05,
            epsilon: 0.1,
            t_range: [4.0, 8.0],
        }
    }
}

/// One row of the mission trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub state: State,
    pub control: Control,
    pub disturbance: Disturbance,
    /// Value of the driving field; `NaN` when none applies.
    pub value: f64,
    pub branch: Branch,
    /// True obstacle margin.
    pub g: f64,
}

pub const TRACE_HEADER: &str = "t,x,y,theta,v,omega,dx,dy,dtheta,V,branch,g";

pub fn write_trace<W: Write>(rows: &[TraceRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.t,
            r.state.x,
            r.state.y,
            r.state.theta,
            r.control.v,
            r.control.omega,
            r.disturbance.dx,
            r.disturbance.dy,
            r.disturbance.dtheta,
            r.value,
            r.branch.as_str(),
            r.g
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Reached,
    Collision,
    HorizonExhausted,
    LeftDomain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContingencyOutcome {
    pub reached: bool,
    pub termination: Termination,
    /// Elapsed time over all horizon re-selections.
    pub t_reach: f64,
    /// `max(ℓ, g)` at the final state.
    pub final_value: f64,
    /// Largest true obstacle margin along the trajectory.
    pub max_g: f64,
    /// Number of learned-to-fallback transitions.
    pub switch_count: usize,
    pub fallback_steps: usize,
    pub steps: usize,
    /// Longest run of consecutive fallback steps.
    pub longest_fallback: usize,
    /// Horizon chosen at the start; `None` when the start was not certified.
    pub t_min: Option<f64>,
    pub reselections: usize,
    pub trajectory: Vec<TraceRow>,
}

struct Fields {
    learned: AugmentedValue,
    fallback: AugmentedValue,
}

fn build_fields(
    anchor: &SafeSetAnchor,
    world: &World,
    source: &dyn ValueSource,
) -> Result<Fields, ContingencyError> {
    let known = world.known_obstacles();
    let obstacles = ObstacleSet::new(known.clone());
    Ok(Fields {
        learned: augment(source.learned(anchor, &known)?, *anchor, obstacles.clone())?,
        fallback: augment(source.fallback(anchor)?, *anchor, obstacles)?,
    })
}

/// Closed-loop recovery toward `anchor` under the worst-case disturbance.
///
/// Sensing happens at the start and after every step; each detection rebuilds
/// both fields and re-selects the horizon over `[0, T]`. When no stored
/// horizon certifies the state the full horizon is used.
pub fn execute_contingency(
    world: &mut World,
    s0: State,
    anchor: &SafeSetAnchor,
    source: &dyn ValueSource,
    b: &Bounds,
    cfg: &ContingencyConfig,
) -> Result<ContingencyOutcome, ContingencyError> {
    world.sense(s0.position());
    let mut fields = build_fields(anchor, world, source)?;
    let top = fields.learned.horizon();
    let t_min = select_t_min(&fields.learned, &s0, cfg.t_range, cfg.epsilon);
    let mut tau0 = t_min.unwrap_or(top);
    let mut k = 0usize;
    let mut s = s0;
    let mut elapsed = 0.0;
    let mut out = ContingencyOutcome {
        reached: false,
        termination: Termination::HorizonExhausted,
        t_reach: 0.0,
        final_value: 0.0,
        max_g: f64::NEG_INFINITY,
        switch_count: 0,
        fallback_steps: 0,
        steps: 0,
        longest_fallback: 0,
        t_min,
        reselections: 0,
        trajectory: Vec::new(),
    };
    let mut prev = Branch::Learned;
    let mut run = 0usize;
    loop {
        let tau = tau0 - k as f64 * cfg.dt;
        let g_true = world.margin(s.position());
        out.max_g = out.max_g.max(g_true);
        let mut row = TraceRow {
            t: elapsed,
            state: s,
            control: Control { v: 0.0, omega: 0.0 },
            disturbance: Disturbance::ZERO,
            value: fields.learned.value(&s, tau.max(0.0)).unwrap_or(f64::NAN),
            branch: Branch::Learned,
            g: g_true,
        };
        let stop = if g_true > 0.0 {
            Some(Termination::Collision)
        } else if anchor.in_safe_disk(s.position()) {
            Some(Termination::Reached)
        } else if !fields.learned.covers(&s) {
            Some(Termination::LeftDomain)
        } else if tau <= 1e-9 {
            Some(Termination::HorizonExhausted)
        } else {
            None
        };
        if let Some(term) = stop {
            out.trajectory.push(row);
            out.termination = term;
            break;
        }
        let dec = switching_policy(&fields.learned, &fields.fallback, &s, tau, b)?;
        let d = worst_disturbance(&s, &dec.gradient, b);
        row.control = dec.control;
        row.disturbance = d;
        row.branch = dec.branch;
        out.trajectory.push(row);
        out.steps += 1;
        if dec.branch == Branch::Fallback {
            out.fallback_steps += 1;
            run += 1;
            out.longest_fallback = out.longest_fallback.max(run);
            if prev != Branch::Fallback {
                out.switch_count += 1;
            }
        } else {
            run = 0;
        }
        prev = dec.branch;

        let h = cfg.dt.min(tau);
        s = rk4_step(&s, &dec.control, &d, h);
        elapsed += h;
        k += 1;
        if !world.sense(s.position()).is_empty() {
            fields = build_fields(anchor, world, source)?;
            tau0 = select_t_min(&fields.learned, &s, [0.0, top], cfg.epsilon).unwrap_or(top);
            k = 0;
            out.reselections += 1;
        }
    }
    let p = s.position();
    let l = anchor.local(p);
    let ell = l[0].hypot(l[1]) - anchor.radius;
    out.final_value = ell.max(world.margin(p));
    out.reached = out.termination == Termination::Reached;
    out.t_reach = elapsed;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levelset::{sdf_target, solve_hji_vi, Grid3, SolverConfig};
    use std::sync::OnceLock;

    fn anchor(half: f64) -> SafeSetAnchor {
        SafeSetAnchor {
            center: [0.0, 0.0],
            radius: 1.0,
            half_width: half,
            provider: 0,
        }
    }

    /// Obstacle-free solve on a small grid, shared across tests.
    fn free_field() -> Arc<ValueField> {
        static F: OnceLock<Arc<ValueField>> = OnceLock::new();
        F.get_or_init(|| {
            let grid = Grid3::square(8.0, 41, 24).unwrap();
            let ell = sdf_target(&grid, 1.0);
            let g = crate::levelset::sdf_obstacles(&grid, &ObstacleSet::default());
            let cfg = SolverConfig {
                horizon: 8.0,
                dt_out: 0.25,
                ..Default::default()
            };
            Arc::new(solve_hji_vi(&grid, &ell, &g, &Bounds::default(), &cfg).unwrap())
        })
        .clone()
    }

    struct Fixed {
        learned: Arc<ValueField>,
        fallback: Arc<ValueField>,
    }

    impl ValueSource for Fixed {
        fn learned(&self, _: &SafeSetAnchor, _: &[Obstacle]) -> Result<Arc<ValueField>, ContingencyError> {
            Ok(self.learned.clone())
        }
        fn fallback(&self, _: &SafeSetAnchor) -> Result<Arc<ValueField>, ContingencyError> {
            Ok(self.fallback.clone())
        }
    }

    fn constant_field(grid: Grid3, f: impl Fn(&State) -> f64) -> Arc<ValueField> {
        let plane: Vec<f64> = (0..grid.len()).map(|n| f(&grid.node_state(n))).collect();
        Arc::new(ValueField::new(grid, 0.5, [plane.clone(), plane.clone(), plane].concat()).unwrap())
    }

    #[test]
    fn augmentation_takes_max() {
        let grid = Grid3::square(4.0, 17, 8).unwrap();
        let low = constant_field(grid, |_| -10.0);
        let obs = ObstacleSet::new(vec![Obstacle::new([2.0, 0.0], 1.0)]);
        let av = augment(low, anchor(4.0), obs.clone()).unwrap();
        let s = State::new(0.5, 0.5, 0.3);
        assert_close!(av.value(&s, 0.5).unwrap(), obs.signed(0.5, 0.5, 0.0), 1e-12);
        // g = 1 − |x − (2,0)| so the gradient points towards the obstacle centre
        let p = av.gradient(&s, 0.5).unwrap();
        let d = (1.5f64).hypot(0.5);
        assert_close!(p.px, 1.5 / d, 2e-2);
        assert_close!(p.py, -0.5 / d, 2e-2);
        assert!(av.value(&State::new(2.2, 0.1, 0.0), 1.0).unwrap() >= 0.0);

        let high = constant_field(grid, |s| 5.0 + s.x);
        let av = augment(high.clone(), anchor(4.0), obs).unwrap();
        assert_close!(av.value(&s, 0.5).unwrap(), high.interpolate(&s, 0.5).unwrap(), 1e-12);
        assert!(augment(high, anchor(5.0), ObstacleSet::default()).is_err());
    }

    #[test]
    fn augmented_never_below_g() {
        let av = augment(
            free_field(),
            anchor(8.0),
            ObstacleSet::new(vec![Obstacle::new([3.0, 1.0], 1.5)]),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let s = State::new(rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0), rng.random_range(-3.0..3.0));
            let tau = rng.random_range(0.0..8.0);
            assert!(av.value(&s, tau).unwrap() >= av.g(s.position()));
        }
    }

    #[test]
    fn static_field_has_zero_residual() {
        let grid = Grid3::square(4.0, 17, 8).unwrap();
        let av = augment(constant_field(grid, |_| 0.7), anchor(4.0), ObstacleSet::default()).unwrap();
        let s = State::new(1.0, -1.0, 0.4);
        assert_eq!(av.residual(&s, 0.5, &Bounds::default()).unwrap(), 0.0);
        let dec = switching_policy(&av, &av, &s, 0.5, &Bounds::default()).unwrap();
        assert_eq!(dec.branch, Branch::Learned);
    }

    #[test]
    fn oracle_residual_is_small_inside_reach_set() {
        let vf = free_field();
        let av = augment(vf.clone(), anchor(8.0), ObstacleSet::default()).unwrap();
        let b = Bounds::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (mut n, mut ok) = (0, 0);
        while n < 400 {
            let s = State::new(rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0), rng.random_range(-3.1..3.1));
            let tau = rng.random_range(1.0..7.0);
            let r = s.x.hypot(s.y);
            // interior of the reach set, away from the target boundary
            if r < 1.5 || av.value(&s, tau).unwrap() > -0.2 {
                continue;
            }
            n += 1;
            if av.residual(&s, tau, &b).unwrap() <= 0.05 {
                ok += 1;
            }
        }
        assert!(ok as f64 >= 0.99 * n as f64, "{ok}/{n}");
    }

    #[test]
    fn corrupted_region_is_detected() {
        // inside a box the value falsely keeps dropping with remaining horizon
        let vf = free_field();
        let mut bad = (*vf).clone();
        let grid = bad.grid;
        for k in 0..bad.slice_count() {
            for n in 0..grid.len() {
                let s = grid.node_state(n);
                if (s.x - 4.0).abs() < 1.5 && s.y.abs() < 1.5 {
                    bad.data[k * grid.len() + n] -= 2.0 * vf.time(k);
                }
            }
        }
        let clean = augment(vf, anchor(8.0), ObstacleSet::default()).unwrap();
        let av = augment(Arc::new(bad), anchor(8.0), ObstacleSet::default()).unwrap();
        let b = Bounds::default();
        for i in 0..8 {
            let s = State::new(4.0, 0.0, -3.0 + 0.75 * i as f64);
            let r = av.residual(&s, 4.0, &b).unwrap();
            assert!(r > 0.0 && r > clean.residual(&s, 4.0, &b).unwrap() + 1.5, "{r}");
        }
    }

    #[test]
    fn always_violating_field_falls_back() {
        let grid = Grid3::square(4.0, 17, 8).unwrap();
        // drops with remaining horizon at zero gradient: ∂τV = −1, so D = 1
        let data: Vec<f64> = (0..3).flat_map(|k| vec![-(k as f64) * 0.5; grid.len()]).collect();
        let bad = augment(Arc::new(ValueField::new(grid, 0.5, data).unwrap()), anchor(4.0), ObstacleSet::default()).unwrap();
        let good = augment(constant_field(grid, |s| s.x.hypot(s.y)), anchor(4.0), ObstacleSet::default()).unwrap();
        let b = Bounds::default();
        for x in [-2.0, 0.5, 3.0] {
            let s = State::new(x, 1.0, 0.0);
            let d = switching_policy(&bad, &good, &s, 0.5, &b).unwrap();
            assert_eq!(d.branch, Branch::Fallback);
            assert_eq!(d.gradient, good.gradient(&s, 0.5).unwrap());
        }
    }

    #[test]
    fn t_min_selection() {
        let av = augment(free_field(), anchor(8.0), ObstacleSet::default()).unwrap();
        assert_eq!(select_t_min(&av, &State::new(0.3, 0.0, 1.0), [4.0, 8.0], 0.1), Some(4.0));
        assert_eq!(select_t_min(&av, &State::new(7.5, 7.5, 0.0), [4.0, 8.0], 0.1), None);
        // distance 3 from a unit target closes at most at speed 1.1
        let t = select_t_min(&av, &State::new(3.0, 0.0, std::f64::consts::PI), [0.0, 8.0], 0.0).unwrap();
        assert!(t >= 2.0 / 1.1, "{t}");
    }

    #[test]
    fn start_in_disk_is_immediate() {
        let vf = free_field();
        let src = Fixed {
            learned: vf.clone(),
            fallback: vf,
        };
        let mut w = World::unknown(vec![], 5.5);
        let o = execute_contingency(&mut w, State::new(0.2, 0.1, 0.0), &anchor(8.0), &src, &Bounds::default(), &ContingencyConfig::default()).unwrap();
        assert!(o.reached);
        assert_eq!(o.t_reach, 0.0);
        assert_eq!(o.trajectory.len(), 1);
    }

    #[test]
    fn obstacle_free_run_reaches_target() {
        let vf = free_field();
        let src = Fixed {
            learned: vf.clone(),
            fallback: vf,
        };
        let mut w = World::unknown(vec![], 5.5);
        let cfg = ContingencyConfig::default();
        let o = execute_contingency(&mut w, State::new(5.0, 0.0, std::f64::consts::PI), &anchor(8.0), &src, &Bounds::default(), &cfg).unwrap();
        assert!(o.reached, "{:?}", o.termination);
        let t_min = o.t_min.unwrap();
        assert!(o.t_reach <= t_min + cfg.dt, "{} vs {}", o.t_reach, t_min);
        assert!(o.final_value <= 0.0);
        assert!(o.trajectory.iter().all(|r| r.g <= 0.0));
        assert_eq!(o.reselections, 0);
        // remaining horizon bookkeeping: elapsed + remaining = t_min
        let steps = o.trajectory.len() - 1;
        assert_close!(o.t_reach, steps as f64 * cfg.dt, 1e-9);
    }

    #[test]
    fn trace_csv_layout() {
        let row = TraceRow {
            t: 0.0,
            state: State::new(1.0, 2.0, 0.5),
            control: Control { v: 1.0, omega: -1.0 },
            disturbance: Disturbance::ZERO,
            value: -0.3,
            branch: Branch::Fallback,
            g: -1.5,
        };
        let mut buf = Vec::new();
        write_trace(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], TRACE_HEADER);
        assert_eq!(lines[1], "0,1,2,0.5,1,-1,0,0,0,-0.3,fallback,-1.5");
    }
}
