//! Explicit Lax–Friedrichs solver for the reach-avoid variational inequality.
//!
//! In remaining horizon `τ` the value obeys `∂τ V = H(x, ∇V)` with the
//! projection `V ≥ g`. Each internal step evaluates the global Lax–Friedrichs
//! flux with one-sided differences, advances with forward Euler, keeps the
//! smaller of the old and new values (a state that can reach the target by
//! horizon τ can also reach it by any longer horizon) and projects onto
//! `V ≥ g`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Grid3, ScalarField, ValueField};
use crate::dynamics::{hamiltonian_cs, Bounds};
use crate::error::LevelSetError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Largest remaining horizon `T`.
    pub horizon: f64,
    /// Spacing of the stored slices.
    pub dt_out: f64,
    /// Courant factor applied to the stability bound.
    pub cfl: f64,
    /// Requested internal step. Shrunk automatically when above the stable
    /// bound; must not exceed `dt_out`.
    pub internal_dt: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            horizon: 8.0,
            dt_out: 0.25,
            cfl: 0.5,
            internal_dt: None,
        }
    }
}

/// Stable explicit step for the grid and bounds at Courant factor `cfl`.
pub fn cfl_step(grid: &Grid3, b: &Bounds, cfl: f64) -> f64 {
    let (ax, ay, at) = dissipation(b);
    cfl / (ax / grid.spacing(0) + ay / grid.spacing(1) + at / grid.spacing(2))
}

fn dissipation(b: &Bounds) -> (f64, f64, f64) {
    (b.v_max + b.d_bar, b.v_max + b.d_bar, b.omega_max + b.d_theta_bar)
}

/// Solves for `V(·, τ)` on `τ ∈ {0, dt_out, …, T}` with `V(·, 0) = max(ℓ, g)`.
pub fn solve_hji_vi(
    grid: &Grid3,
    ell: &ScalarField,
    g: &ScalarField,
    b: &Bounds,
    cfg: &SolverConfig,
) -> Result<ValueField, LevelSetError> {
    grid.validate()?;
    if ell.grid != *grid || g.grid != *grid {
        return Err(LevelSetError::GridMismatch);
    }
    if ell.data.iter().any(|v| !v.is_finite()) {
        return Err(LevelSetError::NonFinite("target field"));
    }
    if g.data.iter().any(|v| !v.is_finite()) {
        return Err(LevelSetError::NonFinite("obstacle field"));
    }
    b.validate()
        .map_err(|e| LevelSetError::InvalidParameters(e.to_string()))?;
    let SolverConfig {
        horizon,
        dt_out,
        cfl,
        internal_dt,
    } = *cfg;
    if !(horizon > 0.0 && horizon.is_finite() && dt_out > 0.0 && dt_out.is_finite()) {
        return Err(LevelSetError::InvalidParameters(format!(
            "need T > 0 and dt_out > 0 (T={horizon}, dt_out={dt_out})"
        )));
    }
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(LevelSetError::InvalidParameters(format!("cfl factor {cfl} not in (0, 1]")));
    }

    let cfl_dt = cfl_step(grid, b, cfl);
    let mut step = cfl_dt;
    if let Some(req) = internal_dt {
        if !(req > 0.0 && req.is_finite()) {
            return Err(LevelSetError::InvalidParameters(format!("internal_dt = {req}")));
        }
        if dt_out < req {
            return Err(LevelSetError::Cfl {
                dt_out,
                internal_dt: req,
                cfl_dt,
            });
        }
        step = step.min(req);
    }

    let n = grid.len();
    let terminal: Vec<f64> = ell.data.iter().zip(&g.data).map(|(l, o)| l.max(*o)).collect();

    let ratio = horizon / dt_out;
    let intervals = if ratio < 1.0 {
        0
    } else {
        let r = ratio.round();
        if (ratio - r).abs() > 1e-9 * ratio.max(1.0) {
            return Err(LevelSetError::InvalidParameters(format!(
                "T = {horizon} is not a multiple of dt_out = {dt_out}"
            )));
        }
        r as usize
    };
    let substeps = (dt_out / step - 1e-12).ceil().max(1.0) as usize;
    let h = dt_out / substeps as f64;

    let mut data = Vec::with_capacity(n * (intervals + 1));
    data.extend_from_slice(&terminal);
    let mut cur = terminal;
    let mut next = vec![0.0; n];
    let trig: Vec<(f64, f64)> = (0..grid.dims[2])
        .map(|k| {
            let (s, c) = grid.coord(2, k).sin_cos();
            (c, s)
        })
        .collect();
    for _ in 0..intervals {
        for _ in 0..substeps {
            lf_step(grid, b, &trig, &g.data, &cur, &mut next, h);
            std::mem::swap(&mut cur, &mut next);
        }
        data.extend_from_slice(&cur);
    }
    log::debug!(
        "solved {} slices, {} substeps of {:.4} per slice (stable bound {:.4})",
        intervals + 1,
        substeps,
        h,
        cfl_dt
    );
    ValueField::new(*grid, dt_out, data)
}

fn lf_step(
    grid: &Grid3,
    b: &Bounds,
    trig: &[(f64, f64)],
    g: &[f64],
    cur: &[f64],
    next: &mut [f64],
    dt: f64,
) {
    let [nx, ny, nt] = grid.dims;
    let plane = nx * ny;
    let (inv_dx, inv_dy, inv_dt) = (
        1.0 / grid.spacing(0),
        1.0 / grid.spacing(1),
        1.0 / grid.spacing(2),
    );
    let (ax, ay, at) = dissipation(b);
    next.par_chunks_mut(plane).enumerate().for_each(|(k, out)| {
        let (cos, sin) = trig[k];
        let km = ((k + nt - 1) % nt) * plane;
        let kp = ((k + 1) % nt) * plane;
        let base = k * plane;
        for j in 0..ny {
            for i in 0..nx {
                let local = j * nx + i;
                let idx = base + local;
                let v = cur[idx];
                let mut xm = if i > 0 { (v - cur[idx - 1]) * inv_dx } else { 0.0 };
                let mut xp = if i + 1 < nx { (cur[idx + 1] - v) * inv_dx } else { 0.0 };
                if i == 0 {
                    xm = xp;
                } else if i + 1 == nx {
                    xp = xm;
                }
                let mut ym = if j > 0 { (v - cur[idx - nx]) * inv_dy } else { 0.0 };
                let mut yp = if j + 1 < ny { (cur[idx + nx] - v) * inv_dy } else { 0.0 };
                if j == 0 {
                    ym = yp;
                } else if j + 1 == ny {
                    yp = ym;
                }
                let tm = (v - cur[km + local]) * inv_dt;
                let tp = (cur[kp + local] - v) * inv_dt;
                let ham = hamiltonian_cs(
                    cos,
                    sin,
                    0.5 * (xp + xm),
                    0.5 * (yp + ym),
                    0.5 * (tp + tm),
                    b,
                ) + 0.5 * (ax * (xp - xm) + ay * (yp - ym) + at * (tp - tm));
                let updated = v + dt * ham;
                out[local] = updated.min(v).max(g[idx]);
            }
        }
    });
}
