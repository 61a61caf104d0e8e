//! Gridded scalar and value fields over `(x, y, θ)` and the reach-avoid solver.
//!
//! Node storage is x-fastest, then y, then θ. A [`ValueField`] stores one slice
//! per remaining horizon `τ = k·dt_out`, slice 0 being the terminal condition.

mod io;
mod sdf;
mod solver;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::{wrap_angle, Costate, State};
use crate::error::LevelSetError;

pub use io::{read_value_field, write_value_field, HJVF_VERSION};
pub use sdf::{sdf_obstacles, sdf_target, sdf_target_at};
pub use solver::{cfl_step, solve_hji_vi, SolverConfig};

/// Slack used when deciding whether a query sits inside the grid.
const DOMAIN_TOL: f64 = 1e-9;

/// Axis-aligned grid over `(x, y, θ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid3 {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub dims: [usize; 3],
    pub periodic: [bool; 3],
}

impl Grid3 {
    /// Grid with periodic heading axis over `[-π, π)`.
    pub fn new(
        x: (f64, f64),
        y: (f64, f64),
        dims: [usize; 3],
    ) -> Result<Self, LevelSetError> {
        let g = Self {
            min: [x.0, y.0, -PI],
            max: [x.1, y.1, PI],
            dims,
            periodic: [false, false, true],
        };
        g.validate()?;
        Ok(g)
    }

    /// `[50, 50, 25]` nodes over `[-10, 10]² × [-π, π)`.
    pub fn standard() -> Self {
        Self::new((-10.0, 10.0), (-10.0, 10.0), [50, 50, 25]).expect("static grid")
    }

    /// Square grid of half-width `half` centred on the origin.
    pub fn square(half: f64, nxy: usize, ntheta: usize) -> Result<Self, LevelSetError> {
        Self::new((-half, half), (-half, half), [nxy, nxy, ntheta])
    }

    pub fn validate(&self) -> Result<(), LevelSetError> {
        for a in 0..3 {
            if self.dims[a] < 3 {
                return Err(LevelSetError::InvalidGrid(format!(
                    "axis {a} has {} nodes, need at least 3",
                    self.dims[a]
                )));
            }
            if !(self.min[a].is_finite() && self.max[a].is_finite() && self.min[a] < self.max[a]) {
                return Err(LevelSetError::InvalidGrid(format!("axis {a} bounds not increasing")));
            }
        }
        if self.periodic[0] || self.periodic[1] {
            return Err(LevelSetError::InvalidGrid("only the heading axis may be periodic".into()));
        }
        if self.periodic[2] && (self.min[2] != -PI || self.max[2] != PI) {
            return Err(LevelSetError::InvalidGrid("periodic heading must span [-π, π)".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Nodes in one heading slice.
    pub fn plane_len(&self) -> usize {
        self.dims[0] * self.dims[1]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        let span = self.max[axis] - self.min[axis];
        if self.periodic[axis] {
            span / self.dims[axis] as f64
        } else {
            span / (self.dims[axis] - 1) as f64
        }
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.min[axis] + i as f64 * self.spacing(axis)
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    /// Inverse of [`Grid3::index`].
    pub fn unravel(&self, n: usize) -> (usize, usize, usize) {
        let i = n % self.dims[0];
        let j = (n / self.dims[0]) % self.dims[1];
        let k = n / self.plane_len();
        (i, j, k)
    }

    pub fn node(&self, i: usize, j: usize, k: usize) -> State {
        State::new(self.coord(0, i), self.coord(1, j), self.coord(2, k))
    }

    pub fn node_state(&self, n: usize) -> State {
        let (i, j, k) = self.unravel(n);
        self.node(i, j, k)
    }

    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        x >= self.min[0] - DOMAIN_TOL
            && x <= self.max[0] + DOMAIN_TOL
            && y >= self.min[1] - DOMAIN_TOL
            && y <= self.max[1] + DOMAIN_TOL
    }

    pub fn area(&self) -> f64 {
        (self.max[0] - self.min[0]) * (self.max[1] - self.min[1])
    }

    pub fn diagonal(&self) -> f64 {
        (self.max[0] - self.min[0]).hypot(self.max[1] - self.min[1])
    }

    /// Measure of the state domain, `area × 2π`.
    pub fn state_measure(&self) -> f64 {
        self.area() * (self.max[2] - self.min[2])
    }

    /// Volume attributed to a single node in grid-weighted sums.
    pub fn cell_volume(&self) -> f64 {
        self.spacing(0) * self.spacing(1) * self.spacing(2)
    }

    /// Same grid translated in the plane by `(dx, dy)`.
    pub fn shifted(&self, dx: f64, dy: f64) -> Self {
        let mut g = *self;
        g.min[0] += dx;
        g.max[0] += dx;
        g.min[1] += dy;
        g.max[1] += dy;
        g
    }

    /// Cell location along one axis: lower node index and fractional offset.
    /// Non-periodic coordinates must already be inside the bounds.
    fn locate(&self, axis: usize, v: f64) -> (usize, usize, f64) {
        let h = self.spacing(axis);
        let n = self.dims[axis];
        if self.periodic[axis] {
            let u = (wrap_angle(v) - self.min[axis]) / h;
            let mut i0 = u.floor() as isize;
            let mut f = u - i0 as f64;
            if i0 < 0 {
                i0 = 0;
                f = 0.0;
            }
            let i0 = (i0 as usize) % n;
            (i0, (i0 + 1) % n, f.clamp(0.0, 1.0))
        } else {
            let u = ((v - self.min[axis]) / h).clamp(0.0, (n - 1) as f64);
            let i0 = (u.floor() as usize).min(n - 2);
            (i0, i0 + 1, u - i0 as f64)
        }
    }

    pub(crate) fn check_xy(&self, s: &State) -> Result<(), LevelSetError> {
        if s.is_finite() && self.contains_xy(s.x, s.y) {
            Ok(())
        } else {
            Err(LevelSetError::OutOfDomain { x: s.x, y: s.y })
        }
    }

    /// Trilinear interpolation of node data (x, y linear; θ periodic).
    fn trilinear(&self, data: &[f64], s: &State) -> f64 {
        let (i0, i1, fx) = self.locate(0, s.x);
        let (j0, j1, fy) = self.locate(1, s.y);
        let (k0, k1, ft) = self.locate(2, s.theta);
        let v = |i, j, k| data[self.index(i, j, k)];
        let lerp = |a: f64, b: f64, f: f64| if f == 0.0 { a } else { a + (b - a) * f };
        let c00 = lerp(v(i0, j0, k0), v(i1, j0, k0), fx);
        let c10 = lerp(v(i0, j1, k0), v(i1, j1, k0), fx);
        let c01 = lerp(v(i0, j0, k1), v(i1, j0, k1), fx);
        let c11 = lerp(v(i0, j1, k1), v(i1, j1, k1), fx);
        let c0 = lerp(c00, c10, fy);
        let c1 = lerp(c01, c11, fy);
        lerp(c0, c1, ft)
    }

    /// Central finite-difference gradient of `f` with one grid spacing per
    /// axis, one-sided at the x/y boundary and periodic in θ.
    pub(crate) fn fd_gradient<F>(&self, s: &State, mut f: F) -> Result<Costate, LevelSetError>
    where
        F: FnMut(&State) -> Result<f64, LevelSetError>,
    {
        let mut p = [0.0; 2];
        for axis in 0..2 {
            let h = self.spacing(axis);
            let c = if axis == 0 { s.x } else { s.y };
            let at = |v: f64| {
                if axis == 0 {
                    State { x: v, ..*s }
                } else {
                    State { y: v, ..*s }
                }
            };
            let lo_ok = c - h >= self.min[axis] - DOMAIN_TOL;
            let hi_ok = c + h <= self.max[axis] + DOMAIN_TOL;
            p[axis] = match (lo_ok, hi_ok) {
                (true, true) => (f(&at(c + h))? - f(&at(c - h))?) / (2.0 * h),
                (false, true) => (f(&at(c + h))? - f(&at(c))?) / h,
                (true, false) => (f(&at(c))? - f(&at(c - h))?) / h,
                (false, false) => 0.0,
            };
        }
        let h = self.spacing(2);
        let plus = State::new(s.x, s.y, s.theta + h);
        let minus = State::new(s.x, s.y, s.theta - h);
        let pt = (f(&plus)? - f(&minus)?) / (2.0 * h);
        Ok(Costate::new(p[0], p[1], pt))
    }
}

/// One scalar per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid3,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid3, data: Vec<f64>) -> Result<Self, LevelSetError> {
        if data.len() != grid.len() {
            return Err(LevelSetError::LengthMismatch {
                expected: grid.len(),
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(LevelSetError::NonFinite("scalar field"));
        }
        Ok(Self { grid, data })
    }

    /// Evaluates `f` at every node.
    pub fn from_fn<F: Fn(&State) -> f64>(grid: Grid3, f: F) -> Self {
        let data = (0..grid.len()).map(|n| f(&grid.node_state(n))).collect();
        Self { grid, data }
    }

    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.grid.index(i, j, k)]
    }

    pub fn interpolate(&self, s: &State) -> Result<f64, LevelSetError> {
        self.grid.check_xy(s)?;
        Ok(self.grid.trilinear(&self.data, s))
    }

    pub fn gradient(&self, s: &State) -> Result<Costate, LevelSetError> {
        self.grid.check_xy(s)?;
        self.grid.fd_gradient(s, |q| self.interpolate(q))
    }

    /// Pointwise maximum of two fields on the same grid.
    pub fn max_with(&self, other: &ScalarField) -> Result<ScalarField, LevelSetError> {
        if self.grid != other.grid {
            return Err(LevelSetError::GridMismatch);
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a.max(*b)).collect();
        Ok(ScalarField {
            grid: self.grid,
            data,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Value function sampled at remaining horizons `τ_k = k·dt_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueField {
    pub grid: Grid3,
    pub dt_out: f64,
    /// Slices back to back, slice `k` at `data[k·N .. (k+1)·N]`.
    pub data: Vec<f64>,
}

impl ValueField {
    pub fn new(grid: Grid3, dt_out: f64, data: Vec<f64>) -> Result<Self, LevelSetError> {
        let n = grid.len();
        if data.is_empty() || data.len() % n != 0 {
            return Err(LevelSetError::LengthMismatch {
                expected: n,
                got: data.len(),
            });
        }
        if !(dt_out > 0.0 && dt_out.is_finite()) {
            return Err(LevelSetError::InvalidParameters(format!("dt_out = {dt_out}")));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(LevelSetError::NonFinite("value field"));
        }
        Ok(Self { grid, dt_out, data })
    }

    pub fn slice_count(&self) -> usize {
        self.data.len() / self.grid.len()
    }

    /// Largest stored horizon.
    pub fn horizon(&self) -> f64 {
        (self.slice_count() - 1) as f64 * self.dt_out
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt_out
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        let n = self.grid.len();
        &self.data[k * n..(k + 1) * n]
    }

    pub fn slice_field(&self, k: usize) -> ScalarField {
        ScalarField {
            grid: self.grid,
            data: self.slice(k).to_vec(),
        }
    }

    /// Index of the stored slice closest to `t`.
    pub fn nearest_slice(&self, t: f64) -> Result<usize, LevelSetError> {
        self.check_time(t)?;
        let k = (t / self.dt_out).round() as usize;
        Ok(k.min(self.slice_count() - 1))
    }

    fn check_time(&self, t: f64) -> Result<(), LevelSetError> {
        let horizon = self.horizon();
        if t.is_finite() && t >= -DOMAIN_TOL && t <= horizon + DOMAIN_TOL {
            Ok(())
        } else {
            Err(LevelSetError::TimeOutOfRange { t, horizon })
        }
    }

    /// Trilinear in `(x, y, θ)`, linear in remaining horizon.
    pub fn interpolate(&self, s: &State, t: f64) -> Result<f64, LevelSetError> {
        self.grid.check_xy(s)?;
        self.check_time(t)?;
        let last = self.slice_count() - 1;
        if last == 0 {
            return Ok(self.grid.trilinear(self.slice(0), s));
        }
        let u = (t / self.dt_out).clamp(0.0, last as f64);
        let k0 = (u.floor() as usize).min(last - 1);
        let f = u - k0 as f64;
        let a = self.grid.trilinear(self.slice(k0), s);
        if f == 0.0 {
            return Ok(a);
        }
        let b = self.grid.trilinear(self.slice(k0 + 1), s);
        Ok(a + (b - a) * f)
    }

    pub fn gradient(&self, s: &State, t: f64) -> Result<Costate, LevelSetError> {
        self.grid.check_xy(s)?;
        self.check_time(t)?;
        self.grid.fd_gradient(s, |q| self.interpolate(q, t))
    }

    /// Derivative in remaining horizon, central with step `dt_out`.
    pub fn time_derivative(&self, s: &State, t: f64) -> Result<f64, LevelSetError> {
        self.check_time(t)?;
        let horizon = self.horizon();
        if self.slice_count() == 1 {
            self.grid.check_xy(s)?;
            return Ok(0.0);
        }
        let h = self.dt_out;
        let lo = t - h >= -DOMAIN_TOL;
        let hi = t + h <= horizon + DOMAIN_TOL;
        let d = match (lo, hi) {
            (true, true) => {
                (self.interpolate(s, (t + h).min(horizon))? - self.interpolate(s, (t - h).max(0.0))?)
                    / (2.0 * h)
            }
            (false, _) => (self.interpolate(s, (t + h).min(horizon))? - self.interpolate(s, t.max(0.0))?) / h,
            (true, false) => (self.interpolate(s, t.min(horizon))? - self.interpolate(s, t - h)?) / h,
        };
        Ok(d)
    }
}

/// Closed disk obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Obstacle {
    pub fn new(center: [f64; 2], radius: f64) -> Self {
        Self { center, radius }
    }

    /// Positive inside the disk.
    pub fn signed(&self, x: f64, y: f64) -> f64 {
        self.radius - (x - self.center[0]).hypot(y - self.center[1])
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self::new([self.center[0] + dx, self.center[1] + dy], self.radius)
    }

    /// Whether the disk meets the closed square of half-width `half` about `c`.
    pub fn intersects_square(&self, c: [f64; 2], half: f64) -> bool {
        let qx = (self.center[0] - c[0]).abs() - half;
        let qy = (self.center[1] - c[1]).abs() - half;
        qx.max(0.0).hypot(qy.max(0.0)) <= self.radius
    }

    /// Whether the segment `a–b` comes within `margin` of the disk.
    pub fn intersects_segment(&self, a: [f64; 2], b: [f64; 2], margin: f64) -> bool {
        segment_point_distance(a, b, self.center) <= self.radius + margin
    }
}

pub fn segment_point_distance(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    let (ux, uy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = ux * ux + uy * uy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * ux + (p[1] - a[1]) * uy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (a[0] + t * ux - p[0]).hypot(a[1] + t * uy - p[1])
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObstacleSet {
    pub obstacles: Vec<Obstacle>,
}

impl ObstacleSet {
    pub fn new(obstacles: Vec<Obstacle>) -> Self {
        Self { obstacles }
    }

    pub fn is_empty(&self) -> bool {
        self.obstacles.is_empty()
    }

    pub fn len(&self) -> usize {
        self.obstacles.len()
    }

    /// `max_i (r_i − ‖p − c_i‖)`, or `empty_value` without obstacles.
    pub fn signed(&self, x: f64, y: f64, empty_value: f64) -> f64 {
        self.obstacles
            .iter()
            .map(|o| o.signed(x, y))
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
            .unwrap_or(empty_value)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self::new(self.obstacles.iter().map(|o| o.translated(dx, dy)).collect())
    }

    pub fn validate(&self) -> Result<(), LevelSetError> {
        for o in &self.obstacles {
            if !(o.radius > 0.0 && o.radius.is_finite() && o.center.iter().all(|c| c.is_finite())) {
                return Err(LevelSetError::InvalidParameters(format!("bad obstacle {o:?}")));
            }
        }
        Ok(())
    }
}
