//! Unicycle dynamics with bounded control and additive bounded disturbance.
//!
//! The Hamiltonian of the reach-avoid game is bilinear in the control and the
//! disturbance, so both the inner minimisation and the outer maximisation have
//! closed forms. [`hamiltonian`], [`optimal_control`] and
//! [`worst_disturbance`] are kept consistent with each other: evaluating
//! `⟨p, flow(s, u*, d*)⟩` reproduces the Hamiltonian exactly.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::DynamicsError;
use crate::levelset::ScalarField;

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut r = theta - two_pi * ((theta + PI) / two_pi).floor();
    if r >= PI {
        r -= two_pi;
    }
    if r < -PI {
        r += two_pi;
    }
    r
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Planar pose of the robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub x: f64,
    pub y: f64,
    /// Heading, kept in `[-π, π)`.
    pub theta: f64,
}

impl State {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    /// Returns the state shifted by `-origin` in the plane (heading unchanged).
    pub fn relative_to(&self, origin: [f64; 2]) -> Self {
        Self {
            x: self.x - origin[0],
            y: self.y - origin[1],
            theta: self.theta,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Control {
    /// Forward speed.
    pub v: f64,
    /// Turn rate.
    pub omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Disturbance {
    pub dx: f64,
    pub dy: f64,
    pub dtheta: f64,
}

impl Disturbance {
    pub const ZERO: Disturbance = Disturbance {
        dx: 0.0,
        dy: 0.0,
        dtheta: 0.0,
    };
}

/// Spatial gradient of a value function, `∇ₓV = (∂x, ∂y, ∂θ)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Costate {
    pub px: f64,
    pub py: f64,
    pub ptheta: f64,
}

impl Costate {
    pub fn new(px: f64, py: f64, ptheta: f64) -> Self {
        Self { px, py, ptheta }
    }

    pub fn planar_norm(&self) -> f64 {
        self.px.hypot(self.py)
    }

    pub fn dot(&self, f: &StateDerivative) -> f64 {
        self.px * f.x + self.py * f.y + self.ptheta * f.theta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateDerivative {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl StateDerivative {
    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.theta * self.theta).sqrt()
    }

    pub fn planar_speed(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Control and disturbance limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Bounds {
    pub v_min: f64,
    pub v_max: f64,
    pub omega_max: f64,
    pub d_bar: f64,
    pub d_theta_bar: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            v_min: 0.0,
            v_max: 1.0,
            omega_max: 1.0,
            d_bar: 0.1,
            d_theta_bar: 0.1,
        }
    }
}

impl Bounds {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let ok = self.v_min >= 0.0
            && self.v_min <= self.v_max
            && self.omega_max > 0.0
            && self.d_bar >= 0.0
            && self.d_theta_bar >= 0.0
            && [self.v_min, self.v_max, self.omega_max, self.d_bar, self.d_theta_bar]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(DynamicsError::InvalidBounds(*self))
        }
    }

    /// Speed bound of the undisturbed vector field, `sqrt(v_max² + ω_max²)`.
    pub fn speed_bound(&self) -> f64 {
        self.v_max.hypot(self.omega_max)
    }

    pub fn clamp_control(&self, u: Control) -> Control {
        Control {
            v: u.v.clamp(self.v_min, self.v_max),
            omega: u.omega.clamp(-self.omega_max, self.omega_max),
        }
    }
}

/// Unicycle vector field with additive disturbance.
pub fn flow(s: &State, u: &Control, d: &Disturbance) -> StateDerivative {
    let (sin, cos) = s.theta.sin_cos();
    StateDerivative {
        x: u.v * cos + d.dx,
        y: u.v * sin + d.dy,
        theta: u.omega + d.dtheta,
    }
}

/// Closed-form `sup_d inf_u ⟨p, f(s, u, d)⟩`.
pub fn hamiltonian(s: &State, p: &Costate, b: &Bounds) -> f64 {
    let (sin, cos) = s.theta.sin_cos();
    hamiltonian_cs(cos, sin, p.px, p.py, p.ptheta, b)
}

/// Hamiltonian with a precomputed heading cosine/sine. Hot path of the solver.
#[inline]
pub(crate) fn hamiltonian_cs(cos: f64, sin: f64, px: f64, py: f64, pt: f64, b: &Bounds) -> f64 {
    let a = px * cos + py * sin;
    let drive = (b.v_min * a).min(b.v_max * a);
    drive - b.omega_max * pt.abs() + b.d_bar * px.hypot(py) + b.d_theta_bar * pt.abs()
}

/// Control minimising the Hamiltonian. Ties resolve to `v_min` and zero turn rate.
pub fn optimal_control(s: &State, p: &Costate, b: &Bounds) -> Control {
    let (sin, cos) = s.theta.sin_cos();
    let a = p.px * cos + p.py * sin;
    let v = if a > 0.0 || a == 0.0 { b.v_min } else { b.v_max };
    Control {
        v,
        omega: -b.omega_max * sign(p.ptheta),
    }
}

/// Disturbance maximising the Hamiltonian against the given costate.
pub fn worst_disturbance(_s: &State, p: &Costate, b: &Bounds) -> Disturbance {
    let n = p.planar_norm();
    let (dx, dy) = if n > 0.0 {
        (b.d_bar * p.px / n, b.d_bar * p.py / n)
    } else {
        (0.0, 0.0)
    };
    Disturbance {
        dx,
        dy,
        dtheta: b.d_theta_bar * sign(p.ptheta),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub state: State,
    pub control: Control,
    pub disturbance: Disturbance,
}

/// Time-stamped rollout. Each sample carries the control and disturbance
/// applied from its time stamp until the next sample.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn last_state(&self) -> Option<State> {
        self.samples.last().map(|s| s.state)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// One classical RK4 step with control and disturbance held constant.
pub fn rk4_step(s: &State, u: &Control, d: &Disturbance, dt: f64) -> State {
    let k1 = flow(s, u, d);
    let s2 = State {
        x: s.x + 0.5 * dt * k1.x,
        y: s.y + 0.5 * dt * k1.y,
        theta: s.theta + 0.5 * dt * k1.theta,
    };
    let k2 = flow(&s2, u, d);
    let s3 = State {
        x: s.x + 0.5 * dt * k2.x,
        y: s.y + 0.5 * dt * k2.y,
        theta: s.theta + 0.5 * dt * k2.theta,
    };
    let k3 = flow(&s3, u, d);
    let s4 = State {
        x: s.x + dt * k3.x,
        y: s.y + dt * k3.y,
        theta: s.theta + dt * k3.theta,
    };
    let k4 = flow(&s4, u, d);
    State::new(
        s.x + dt / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x),
        s.y + dt / 6.0 * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y),
        s.theta + dt / 6.0 * (k1.theta + 2.0 * k2.theta + 2.0 * k3.theta + k4.theta),
    )
}

/// Fixed-step RK4 rollout under feedback policies (zero-order hold per step).
///
/// The horizon is split into `ceil(horizon / dt)` equal steps so the final
/// sample lands exactly on `horizon`.
pub fn integrate<C, D>(
    s0: State,
    mut control_policy: C,
    mut disturbance_policy: D,
    dt: f64,
    horizon: f64,
) -> Result<Trajectory, DynamicsError>
where
    C: FnMut(f64, &State) -> Control,
    D: FnMut(f64, &State) -> Disturbance,
{
    if !(dt > 0.0 && dt.is_finite()) || !(horizon > 0.0 && horizon.is_finite()) {
        return Err(DynamicsError::InvalidStep { dt, horizon });
    }
    let steps = (horizon / dt - 1e-9).ceil().max(1.0) as usize;
    let h = horizon / steps as f64;
    let mut samples = Vec::with_capacity(steps + 1);
    let mut s = State::new(s0.x, s0.y, s0.theta);
    for k in 0..=steps {
        let t = k as f64 * h;
        let u = control_policy(t, &s);
        let d = disturbance_policy(t, &s);
        if ![u.v, u.omega, d.dx, d.dy, d.dtheta].iter().all(|v| v.is_finite()) {
            return Err(DynamicsError::NonFinitePolicy { t });
        }
        samples.push(TrajectorySample {
            t,
            state: s,
            control: u,
            disturbance: d,
        });
        if k < steps {
            s = rk4_step(&s, &u, &d, h);
        }
    }
    Ok(Trajectory { samples })
}

/// Reach-avoid cost of a trajectory: `max(ℓ(final), max_k g(x_k))`.
pub fn trajectory_cost(
    traj: &Trajectory,
    ell: &ScalarField,
    g: &ScalarField,
) -> Result<f64, DynamicsError> {
    let last = traj.last_state().ok_or(DynamicsError::EmptyTrajectory)?;
    let mut worst = ell.interpolate(&last)?;
    for sample in &traj.samples {
        worst = worst.max(g.interpolate(&sample.state)?);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_bounds() -> Bounds {
        Bounds::default()
    }

    /// Sampled min over controls / max over disturbances. Independent of the
    /// closed forms.
    fn sampled_hamiltonian(s: &State, p: &Costate, b: &Bounds) -> f64 {
        let controls: Vec<Control> = (0..=100)
            .flat_map(|i| {
                (0..=100).map(move |j| Control {
                    v: b.v_min + (b.v_max - b.v_min) * i as f64 / 100.0,
                    omega: -b.omega_max + 2.0 * b.omega_max * j as f64 / 100.0,
                })
            })
            .collect();
        let mut best_d = f64::NEG_INFINITY;
        for k in 0..360 {
            let phi = k as f64 * 2.0 * PI / 360.0;
            for m in 0..=20 {
                let d = Disturbance {
                    dx: b.d_bar * phi.cos(),
                    dy: b.d_bar * phi.sin(),
                    dtheta: -b.d_theta_bar + 2.0 * b.d_theta_bar * m as f64 / 20.0,
                };
                let inner = controls
                    .iter()
                    .map(|u| p.dot(&flow(s, u, &d)))
                    .fold(f64::INFINITY, f64::min);
                best_d = best_d.max(inner);
            }
        }
        best_d
    }

    #[test]
    fn flow_examples() {
        let f = flow(&State::new(0.0, 0.0, 0.0), &Control { v: 1.0, omega: 0.0 }, &Disturbance::ZERO);
        assert_close!(f.x, 1.0, 1e-15);
        assert_close!(f.y, 0.0, 1e-15);
        assert_close!(f.theta, 0.0, 1e-15);

        let f = flow(
            &State::new(0.0, 0.0, PI / 2.0),
            &Control { v: 1.0, omega: 0.5 },
            &Disturbance { dx: 0.1, dy: 0.1, dtheta: 0.1 },
        );
        assert_close!(f.x, 0.1, 1e-12);
        assert_close!(f.y, 1.1, 1e-12);
        assert_close!(f.theta, 0.6, 1e-12);

        let f = flow(
            &State::new(0.0, 0.0, PI / 4.0),
            &Control { v: 2f64.sqrt(), omega: 0.0 },
            &Disturbance::ZERO,
        );
        assert_close!(f.x, 1.0, 1e-12);
        assert_close!(f.y, 1.0, 1e-12);
    }

    #[test]
    fn hamiltonian_matches_sampled_oracle() {
        let b = paper_bounds();
        assert_eq!(hamiltonian(&State::new(1.0, 2.0, 0.3), &Costate::default(), &b), 0.0);

        let s = State::new(0.0, 0.0, 0.0);
        let p = Costate::new(1.0, 0.0, 0.0);
        let closed = hamiltonian(&s, &p, &b);
        assert_close!(closed, 0.1, 1e-12);
        assert_close!(sampled_hamiltonian(&s, &p, &b), closed, 1e-3);

        let s = State::new(0.0, 0.0, PI);
        let p = Costate::new(1.0, 0.0, 1.0);
        let closed = hamiltonian(&s, &p, &b);
        assert_close!(closed, -1.8, 1e-12);
        assert_close!(sampled_hamiltonian(&s, &p, &b), closed, 1e-3);
    }

    #[test]
    fn optimal_control_examples() {
        let b = paper_bounds();
        let s = State::new(0.0, 0.0, 0.0);
        let u = optimal_control(&s, &Costate::new(-1.0, 0.0, 0.0), &b);
        assert_eq!(u, Control { v: b.v_max, omega: 0.0 });

        let p = Costate::new(1.0, 0.0, 0.5);
        let u = optimal_control(&s, &p, &b);
        assert_eq!(u, Control { v: b.v_min, omega: -b.omega_max });
        // argmin over the sampled control set, against the worst disturbance
        let d = worst_disturbance(&s, &p, &b);
        let mut best = (f64::INFINITY, Control::default());
        for i in 0..=100 {
            for j in 0..=100 {
                let c = Control {
                    v: i as f64 / 100.0,
                    omega: -1.0 + 2.0 * j as f64 / 100.0,
                };
                let val = p.dot(&flow(&s, &c, &d));
                if val < best.0 - 1e-12 {
                    best = (val, c);
                }
            }
        }
        assert_close!(best.1.v, u.v, 1e-12);
        assert_close!(best.1.omega, u.omega, 1e-12);

        let u = optimal_control(&s, &Costate::default(), &b);
        assert_eq!(u, Control { v: b.v_min, omega: 0.0 });
    }

    #[test]
    fn worst_disturbance_examples() {
        let b = paper_bounds();
        let s = State::new(0.0, 0.0, 0.0);
        let d = worst_disturbance(&s, &Costate::new(3.0, 4.0, 0.0), &b);
        assert_close!(d.dx, 0.06, 1e-12);
        assert_close!(d.dy, 0.08, 1e-12);
        assert_eq!(d.dtheta, 0.0);
        assert_eq!(worst_disturbance(&s, &Costate::default(), &b), Disturbance::ZERO);

        let p = Costate::new(1.0, 0.0, -2.0);
        let d = worst_disturbance(&s, &p, &b);
        assert_close!(d.dx, 0.1, 1e-12);
        assert_close!(d.dy, 0.0, 1e-12);
        assert_close!(d.dtheta, -0.1, 1e-12);
        // sampled argmax
        let mut best = (f64::NEG_INFINITY, Disturbance::ZERO);
        for k in 0..360 {
            let phi = k as f64 * 2.0 * PI / 360.0;
            for m in 0..=20 {
                let cand = Disturbance {
                    dx: 0.1 * phi.cos(),
                    dy: 0.1 * phi.sin(),
                    dtheta: -0.1 + 0.2 * m as f64 / 20.0,
                };
                let val = p.px * cand.dx + p.py * cand.dy + p.ptheta * cand.dtheta;
                if val > best.0 + 1e-12 {
                    best = (val, cand);
                }
            }
        }
        assert_close!(best.1.dx, d.dx, 1e-9);
        assert_close!(best.1.dtheta, d.dtheta, 1e-9);
    }

    #[test]
    fn integrate_straight_and_circle() {
        let b = paper_bounds();
        let traj = integrate(
            State::new(0.0, 0.0, 0.0),
            |_, _| Control { v: 1.0, omega: 0.0 },
            |_, _| Disturbance::ZERO,
            0.05,
            2.0,
        )
        .unwrap();
        let end = traj.last_state().unwrap();
        assert_close!(end.x, 2.0, 1e-9);
        assert_close!(end.y, 0.0, 1e-9);
        assert!(b.validate().is_ok());

        let arc = |dt: f64, horizon: f64| {
            integrate(
                State::new(0.0, 0.0, 0.0),
                |_, _| Control { v: 1.0, omega: 1.0 },
                |_, _| Disturbance::ZERO,
                dt,
                horizon,
            )
            .unwrap()
            .last_state()
            .unwrap()
        };
        let closed = arc(0.05, 2.0 * PI);
        assert!(closed.x.hypot(closed.y) < 1e-6);
        // a full turn integrates a periodic integrand, which hides the order;
        // measure it on an open arc against the exact endpoint instead
        let err = |s: State| (s.x - 1.5f64.sin()).hypot(s.y - (1.0 - 1.5f64.cos()));
        let ratio = err(arc(0.5, 1.5)) / err(arc(0.25, 1.5));
        assert!((12.0..20.0).contains(&ratio), "RK4 order ratio {ratio}");
    }

    #[test]
    fn integrate_rejects_non_finite_policy() {
        let err = integrate(
            State::new(0.0, 0.0, 0.0),
            |t, _| Control {
                v: if t > 0.5 { f64::NAN } else { 1.0 },
                omega: 0.0,
            },
            |_, _| Disturbance::ZERO,
            0.1,
            1.0,
        )
        .unwrap_err();
        assert!(matches!(err, DynamicsError::NonFinitePolicy { .. }));
    }

    #[test]
    fn wrap_angle_range() {
        for k in -20..20 {
            let a = wrap_angle(k as f64 * 0.7);
            assert!((-PI..PI).contains(&a));
        }
        assert_eq!(wrap_angle(PI), -PI);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn costate() -> impl Strategy<Value = Costate> {
            (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64).prop_map(|(a, b, c)| Costate::new(a, b, c))
        }

        proptest! {
            #[test]
            fn closed_forms_consistent(theta in -PI..PI, p in costate(), vmin in 0.0..0.5f64) {
                let b = Bounds { v_min: vmin, ..Bounds::default() };
                let s = State::new(0.0, 0.0, theta);
                let u = optimal_control(&s, &p, &b);
                let d = worst_disturbance(&s, &p, &b);
                let h = hamiltonian(&s, &p, &b);
                prop_assert!((h - p.dot(&flow(&s, &u, &d))).abs() < 1e-9);
            }

            #[test]
            fn saddle_point_inequalities(theta in -PI..PI, p in costate(),
                                         v in 0.0..1.0f64, w in -1.0..1.0f64,
                                         phi in 0.0..(2.0 * PI), r in 0.0..1.0f64, dt in -0.1..0.1f64) {
                let b = Bounds::default();
                let s = State::new(0.0, 0.0, theta);
                let h = hamiltonian(&s, &p, &b);
                let d_star = worst_disturbance(&s, &p, &b);
                let u_star = optimal_control(&s, &p, &b);
                let u = Control { v, omega: w };
                let d = Disturbance { dx: 0.1 * r * phi.cos(), dy: 0.1 * r * phi.sin(), dtheta: dt };
                prop_assert!(h <= p.dot(&flow(&s, &u, &d_star)) + 1e-6);
                prop_assert!(h >= p.dot(&flow(&s, &u_star, &d)) - 1e-6);
            }

            #[test]
            fn flow_is_bounded(theta in -PI..PI, v in 0.0..1.0f64, w in -1.0..1.0f64,
                               phi in 0.0..(2.0 * PI), r in 0.0..1.0f64, dt in -0.1..0.1f64) {
                let b = Bounds::default();
                let f = flow(&State::new(0.0, 0.0, theta), &Control { v, omega: w },
                             &Disturbance { dx: 0.1 * r * phi.cos(), dy: 0.1 * r * phi.sin(), dtheta: dt });
                let mf = b.speed_bound();
                let bound = (mf * mf + b.d_bar * b.d_bar + b.d_theta_bar * b.d_theta_bar
                    + 2.0 * mf * b.d_bar).sqrt();
                prop_assert!(f.norm() <= bound + 1e-12);
            }
        }
    }
}
