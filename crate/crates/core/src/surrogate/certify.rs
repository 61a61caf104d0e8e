//! Error measurement of a backend against solved oracle fields.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SurrogateBackend;
use crate::dynamics::Bounds;
use crate::error::SurrogateError;
use crate::levelset::{Grid3, ScalarField, ValueField};
use crate::reachsets::{inclusion_volume, sublevel_all};

/// One held-out case: obstacle field and the oracle solved from it.
#[derive(Debug, Clone)]
pub struct TestScenario {
    pub name: String,
    pub g: ScalarField,
    pub oracle: Arc<ValueField>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CertifyConfig {
    /// Descent margin in the violation bound.
    pub alpha0: f64,
    /// Threshold of the learned sublevel set checked for inclusion.
    pub epsilon_for_eta: f64,
    pub bounds: Bounds,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            alpha0: 0.03,
            epsilon_for_eta: 0.0,
            bounds: Bounds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioErrors {
    pub name: String,
    pub epsilon: f64,
    pub epsilon0: f64,
    pub e_l2: f64,
    pub grad_l2: f64,
    pub dt_l2: f64,
    pub rho: f64,
    pub eta_epsilon: f64,
    pub eta_zero: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub backend: String,
    pub test_set_size: usize,
    /// Largest nodal error over all scenarios and slices.
    pub epsilon: f64,
    /// Largest per-scenario `sqrt(‖e‖² + ‖∇e‖²)`.
    pub epsilon0: f64,
    /// `‖∂t e‖ / (M_f ‖∇e‖)` pooled over the test set.
    pub rho: f64,
    pub m_f: f64,
    pub alpha0: f64,
    pub epsilon_for_eta: f64,
    pub eta_epsilon: f64,
    pub eta_zero: f64,
    /// Learned nodes at threshold `epsilon_for_eta`; zero means η is vacuous.
    pub learned_nodes: usize,
    /// `meas(X)` = domain area × 2π.
    pub state_measure: f64,
    pub violation_bound: f64,
    pub pass: bool,
    pub scenarios: Vec<ScenarioErrors>,
}

impl CertificationReport {
    pub fn write_csv(&self, path: &Path) -> Result<(), SurrogateError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "name,epsilon,epsilon0,e_l2,grad_l2,dt_l2,rho,eta_epsilon,eta_zero")?;
        for s in &self.scenarios {
            writeln!(
                f,
                "{},{},{},{},{},{},{},{},{}",
                s.name, s.epsilon, s.epsilon0, s.e_l2, s.grad_l2, s.dt_l2, s.rho, s.eta_epsilon, s.eta_zero
            )?;
        }
        f.flush()?;
        Ok(())
    }
}

/// `(1+ρ)² M_f² ε₀² / (α₀² meas)`.
pub fn violation_bound(rho: f64, m_f: f64, epsilon0: f64, alpha0: f64, measure: f64) -> f64 {
    let num = (1.0 + rho) * m_f * epsilon0;
    num * num / (alpha0 * alpha0 * measure)
}

/// Materialises `b` on every scenario and measures it.
pub fn certify(
    b: &SurrogateBackend,
    scenarios: &[TestScenario],
    cfg: &CertifyConfig,
) -> Result<CertificationReport, SurrogateError> {
    if scenarios.is_empty() {
        return Err(SurrogateError::NoScenarios);
    }
    let learned: Vec<ValueField> = scenarios
        .par_iter()
        .enumerate()
        .map(|(i, sc)| b.materialize(&sc.g, Some(&sc.oracle), i as u64))
        .collect::<Result<_, _>>()?;
    let pairs: Vec<(&str, &ValueField, &ValueField)> = scenarios
        .iter()
        .zip(&learned)
        .map(|(sc, l)| (sc.name.as_str(), l, &*sc.oracle))
        .collect();
    let mut report = certify_fields(&pairs, cfg)?;
    report.backend = b.name().to_string();
    Ok(report)
}

struct Norms {
    sup: f64,
    e2: f64,
    grad2: f64,
    dt2: f64,
}

/// Measures `(name, learned, oracle)` triples directly.
pub fn certify_fields(
    pairs: &[(&str, &ValueField, &ValueField)],
    cfg: &CertifyConfig,
) -> Result<CertificationReport, SurrogateError> {
    let Some(&(_, first, _)) = pairs.first() else {
        return Err(SurrogateError::NoScenarios);
    };
    let grid = first.grid;
    for (_, l, o) in pairs {
        if l.grid != grid || o.grid != grid || l.data.len() != o.data.len() || l.dt_out != o.dt_out {
            return Err(SurrogateError::Dimension("learned and oracle fields differ in shape".into()));
        }
    }
    let b = &cfg.bounds;
    let m_f = (b.v_max + b.d_bar).hypot(b.omega_max + b.d_theta_bar);
    let measure = grid.state_measure();

    let per: Vec<(ScenarioErrors, Norms, usize, usize, usize, usize)> = pairs
        .par_iter()
        .map(|&(name, l, o)| {
            let n = error_norms(l, o);
            let learned_eps = sublevel_all(l, cfg.epsilon_for_eta);
            let learned_zero = sublevel_all(l, 0.0);
            let truth = sublevel_all(o, 0.0);
            let at_eps = inclusion_volume(&learned_eps, &truth)?;
            let at_zero = inclusion_volume(&learned_zero, &truth)?;
            let rho = ratio(n.dt2, m_f, n.grad2);
            let errs = ScenarioErrors {
                name: name.to_string(),
                epsilon: n.sup,
                epsilon0: (n.e2 + n.grad2).sqrt(),
                e_l2: n.e2.sqrt(),
                grad_l2: n.grad2.sqrt(),
                dt_l2: n.dt2.sqrt(),
                rho,
                eta_epsilon: at_eps.eta,
                eta_zero: at_zero.eta,
            };
            Ok((errs, n, at_eps.learned, at_eps.included, at_zero.learned, at_zero.included))
        })
        .collect::<Result<_, SurrogateError>>()?;

    let epsilon = per.iter().map(|p| p.1.sup).fold(0.0, f64::max);
    let epsilon0 = per.iter().map(|p| p.0.epsilon0).fold(0.0, f64::max);
    let dt2: f64 = per.iter().map(|p| p.1.dt2).sum();
    let grad2: f64 = per.iter().map(|p| p.1.grad2).sum();
    let rho = ratio(dt2, m_f, grad2);
    let (le, ie, lz, iz) = per.iter().fold((0, 0, 0, 0), |a, p| (a.0 + p.2, a.1 + p.3, a.2 + p.4, a.3 + p.5));
    let eta = |learned: usize, included: usize| {
        if learned == 0 {
            1.0
        } else {
            included as f64 / learned as f64
        }
    };
    let eta_epsilon = eta(le, ie);
    Ok(CertificationReport {
        backend: "fields".into(),
        test_set_size: pairs.len(),
        epsilon,
        epsilon0,
        rho,
        m_f,
        alpha0: cfg.alpha0,
        epsilon_for_eta: cfg.epsilon_for_eta,
        eta_epsilon,
        eta_zero: eta(lz, iz),
        learned_nodes: le,
        state_measure: measure,
        violation_bound: violation_bound(rho, m_f, epsilon0, cfg.alpha0, measure),
        pass: eta_epsilon == 1.0,
        scenarios: per.into_iter().map(|p| p.0).collect(),
    })
}

fn ratio(dt2: f64, m_f: f64, grad2: f64) -> f64 {
    if grad2 > 0.0 {
        dt2.sqrt() / (m_f * grad2.sqrt())
    } else if dt2 > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Cell-weighted squared L² norms of the error, its state gradient and its
/// time derivative, plus the sup norm.
fn error_norms(l: &ValueField, o: &ValueField) -> Norms {
    let grid = l.grid;
    let e: Vec<f64> = l.data.iter().zip(&o.data).map(|(a, b)| a - b).collect();
    let slices = l.slice_count();
    let n = grid.len();
    let w = grid.cell_volume() * l.dt_out;
    let sup = e.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut e2 = 0.0;
    let mut grad2 = 0.0;
    let mut dt2 = 0.0;
    for k in 0..slices {
        let ek = &e[k * n..(k + 1) * n];
        for idx in 0..n {
            e2 += ek[idx] * ek[idx];
            let g = node_gradient(&grid, ek, idx);
            grad2 += g.iter().map(|c| c * c).sum::<f64>();
            if slices > 1 {
                let at = |kk: usize| e[kk * n + idx];
                let d = if k == 0 {
                    (at(1) - at(0)) / l.dt_out
                } else if k == slices - 1 {
                    (at(k) - at(k - 1)) / l.dt_out
                } else {
                    (at(k + 1) - at(k - 1)) / (2.0 * l.dt_out)
                };
                dt2 += d * d;
            }
        }
    }
    Norms {
        sup,
        e2: e2 * w,
        grad2: grad2 * w,
        dt2: dt2 * w,
    }
}

/// Nodal differences: central inside, one-sided on the planar boundary,
/// periodic in θ.
fn node_gradient(grid: &Grid3, f: &[f64], idx: usize) -> [f64; 3] {
    let (i, j, k) = grid.unravel(idx);
    let pos = [i, j, k];
    let mut out = [0.0; 3];
    for axis in 0..3 {
        let m = grid.dims[axis];
        if m < 2 {
            continue;
        }
        let h = grid.spacing(axis);
        let at = |c: usize| {
            let mut p = pos;
            p[axis] = c;
            f[grid.index(p[0], p[1], p[2])]
        };
        let c = pos[axis];
        out[axis] = if grid.periodic[axis] {
            (at((c + 1) % m) - at((c + m - 1) % m)) / (2.0 * h)
        } else if c == 0 {
            (at(1) - at(0)) / h
        } else if c == m - 1 {
            (at(c) - at(c - 1)) / h
        } else {
            (at(c + 1) - at(c - 1)) / (2.0 * h)
        };
    }
    out
}
