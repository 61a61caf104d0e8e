//! Approximate value providers and their certification.
//!
//! A [`SurrogateBackend`] turns an obstacle field into a full [`ValueField`]
//! on the local grid. The perturbed oracle meets its sup-norm error bound by
//! construction; the trained operator is measured by [`certify`].

mod certify;
mod fno;
mod perturbed;
mod provider;

use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::SurrogateError;
use crate::levelset::{ScalarField, ValueField};
use crate::State;

pub use certify::{
    certify, certify_fields, violation_bound, CertificationReport, CertifyConfig, ScenarioErrors,
    TestScenario,
};
pub use fno::{
    fno_forward, load_weights, save_weights, Slice2, SpectralLayer, SpectralWeights, FNOW_VERSION,
    INPUT_CHANNELS,
};
pub use perturbed::PerturbedOracle;
pub use provider::{local_obstacles, FieldProvider, CACHE_LEN};

/// Serialisable description of a backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    Oracle,
    Perturbed {
        epsilon: f64,
        #[serde(default)]
        seed: u64,
    },
    Trained {
        weights: PathBuf,
        #[serde(default = "default_horizon")]
        horizon: f64,
        #[serde(default = "default_dt_out")]
        dt_out: f64,
    },
}

fn default_horizon() -> f64 {
    8.0
}

fn default_dt_out() -> f64 {
    0.25
}

#[derive(Debug, Clone)]
pub enum SurrogateBackend {
    /// The solved field itself.
    Oracle,
    /// Oracle plus smooth noise of sup norm `epsilon`.
    Perturbed { epsilon: f64, seed: u64 },
    /// Spectral operator applied slice by slice.
    Trained {
        weights: Arc<SpectralWeights>,
        horizon: f64,
        dt_out: f64,
    },
}

impl SurrogateBackend {
    pub fn from_config(cfg: &BackendConfig) -> Result<Self, SurrogateError> {
        Ok(match cfg {
            BackendConfig::Oracle => Self::Oracle,
            BackendConfig::Perturbed { epsilon, seed } => {
                if !(*epsilon >= 0.0 && epsilon.is_finite()) {
                    return Err(SurrogateError::Dimension(format!("epsilon = {epsilon}")));
                }
                Self::Perturbed {
                    epsilon: *epsilon,
                    seed: *seed,
                }
            }
            BackendConfig::Trained {
                weights,
                horizon,
                dt_out,
            } => {
                let w = load_weights(weights)?;
                w.validate()?;
                Self::Trained {
                    weights: Arc::new(w),
                    horizon: *horizon,
                    dt_out: *dt_out,
                }
            }
        })
    }

    /// Whether [`materialize`](Self::materialize) needs the solved field.
    pub fn needs_oracle(&self) -> bool {
        !matches!(self, Self::Trained { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Oracle => "oracle",
            Self::Perturbed { .. } => "perturbed",
            Self::Trained { .. } => "trained",
        }
    }

    /// Full value field for obstacle field `g`. `salt` decorrelates the
    /// perturbation between scenarios sharing a seed.
    pub fn materialize(
        &self,
        g: &ScalarField,
        oracle: Option<&Arc<ValueField>>,
        salt: u64,
    ) -> Result<ValueField, SurrogateError> {
        let need = || {
            oracle.ok_or_else(|| SurrogateError::Dimension("backend needs the oracle field".into()))
        };
        match self {
            Self::Oracle => {
                let o = need()?;
                check_grid(g, o)?;
                Ok((**o).clone())
            }
            Self::Perturbed { epsilon, seed } => {
                let o = need()?;
                check_grid(g, o)?;
                Ok(PerturbedOracle::new(o.clone(), mix_seed(*seed, salt), *epsilon).field())
            }
            Self::Trained {
                weights,
                horizon,
                dt_out,
            } => infer_field(weights, g, *horizon, *dt_out),
        }
    }
}

fn check_grid(g: &ScalarField, o: &ValueField) -> Result<(), SurrogateError> {
    if g.grid != o.grid {
        return Err(SurrogateError::Dimension(
            "obstacle field and oracle live on different grids".into(),
        ));
    }
    Ok(())
}

pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17)
}

/// First θ-plane of `g` (obstacle fields do not depend on heading).
pub fn planar_slice(g: &ScalarField) -> Slice2 {
    let [nx, ny, _] = g.grid.dims;
    Slice2 {
        nx,
        ny,
        data: g.data[..nx * ny].to_vec(),
    }
}

fn infer_field(
    w: &SpectralWeights,
    g: &ScalarField,
    horizon: f64,
    dt_out: f64,
) -> Result<ValueField, SurrogateError> {
    let steps = horizon / dt_out;
    if !(steps.is_finite() && steps >= 0.0 && (steps - steps.round()).abs() < 1e-9) {
        return Err(SurrogateError::Dimension(format!(
            "horizon {horizon} is not a multiple of dt_out {dt_out}"
        )));
    }
    let slices = steps.round() as usize + 1;
    let grid = g.grid;
    let nt = grid.dims[2];
    let input = planar_slice(g);
    let planes: Vec<Vec<f64>> = (0..slices * nt)
        .into_par_iter()
        .map(|n| {
            let (k, kt) = (n / nt, n % nt);
            fno_forward(w, &input, grid.coord(2, kt), k as f64 * dt_out, horizon)
        })
        .collect::<Result<_, _>>()?;
    Ok(ValueField::new(grid, dt_out, planes.concat())?)
}

/// Planar value slice of backend `b` at heading `theta` and horizon `t`.
///
/// The trained operator runs one forward pass; the oracle-based backends
/// materialise the field and interpolate, which is exact on grid nodes.
pub fn evaluate_backend(
    b: &SurrogateBackend,
    g: &ScalarField,
    oracle: Option<&Arc<ValueField>>,
    theta: f64,
    t: f64,
) -> Result<Slice2, SurrogateError> {
    let [nx, ny, _] = g.grid.dims;
    if let SurrogateBackend::Trained {
        weights, horizon, ..
    } = b
    {
        let data = fno_forward(weights, &planar_slice(g), theta, t, *horizon)?;
        return Ok(Slice2 { nx, ny, data });
    }
    let vf = b.materialize(g, oracle, 0)?;
    let grid = vf.grid;
    let mut data = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let s = State {
                x: grid.coord(0, i),
                y: grid.coord(1, j),
                theta,
            };
            data.push(vf.interpolate(&s, t)?);
        }
    }
    Ok(Slice2 { nx, ny, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levelset::{sdf_obstacles, Grid3, Obstacle, ObstacleSet};

    fn setup() -> (ScalarField, Arc<ValueField>) {
        let grid = Grid3::square(4.0, 16, 8).unwrap();
        let obs = ObstacleSet::new(vec![Obstacle::new([2.0, 0.0], 0.8)]);
        let g = sdf_obstacles(&grid, &obs);
        let mut data = Vec::new();
        for k in 0..5 {
            data.extend((0..grid.len()).map(|n| {
                let s = grid.node_state(n);
                (s.x.hypot(s.y) - 1.0 - 0.5 * k as f64).max(g.data[n])
            }));
        }
        (g, Arc::new(ValueField::new(grid, 0.5, data).unwrap()))
    }

    #[test]
    fn perturbed_slice_deviation() {
        let (g, o) = setup();
        let zero = SurrogateBackend::Perturbed {
            epsilon: 0.0,
            seed: 9,
        };
        let theta = g.grid.coord(2, 3);
        let exact = evaluate_backend(&SurrogateBackend::Oracle, &g, Some(&o), theta, 1.0).unwrap();
        assert_eq!(evaluate_backend(&zero, &g, Some(&o), theta, 1.0).unwrap(), exact);

        let b = SurrogateBackend::Perturbed {
            epsilon: 0.3,
            seed: 9,
        };
        let a = evaluate_backend(&b, &g, Some(&o), theta, 1.0).unwrap();
        assert_eq!(a, evaluate_backend(&b, &g, Some(&o), theta, 1.0).unwrap());
        let dev = a.data.iter().zip(&exact.data).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
        assert!(dev <= 0.3 + 1e-9 && dev > 0.0);
        // the sup over the whole field is exact
        let full = b.materialize(&g, Some(&o), 0).unwrap();
        let sup = full.data.iter().zip(&o.data).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
        assert_close!(sup, 0.3, 1e-9);
    }

    #[test]
    fn trained_field_matches_forward() {
        let (g, _) = setup();
        let w = fno::tests::random_weights(4, 2, 4, 3, 3);
        let b = SurrogateBackend::Trained {
            weights: Arc::new(w.clone()),
            horizon: 2.0,
            dt_out: 0.5,
        };
        assert!(!b.needs_oracle());
        let vf = b.materialize(&g, None, 0).unwrap();
        assert_eq!(vf.slice_count(), 5);
        let theta = g.grid.coord(2, 5);
        let direct = fno_forward(&w, &planar_slice(&g), theta, 1.5, 2.0).unwrap();
        let n = g.grid.plane_len();
        let k = 3 * g.grid.len() + 5 * n;
        assert_eq!(&vf.data[k..k + n], &direct[..]);
        let sl = evaluate_backend(&b, &g, None, theta, 1.5).unwrap();
        assert_eq!(sl.data, direct);
    }

    #[test]
    fn oracle_backend_requires_field() {
        let (g, _) = setup();
        assert!(SurrogateBackend::Oracle.materialize(&g, None, 0).is_err());
    }

    #[test]
    fn config_round_trip() {
        let cfg: BackendConfig = serde_json::from_str(r#"{"kind":"perturbed","epsilon":0.3}"#).unwrap();
        assert_eq!(cfg, BackendConfig::Perturbed { epsilon: 0.3, seed: 0 });
        let missing = BackendConfig::Trained {
            weights: "/nonexistent/w.fnow".into(),
            horizon: 8.0,
            dt_out: 0.25,
        };
        assert!(matches!(SurrogateBackend::from_config(&missing), Err(SurrogateError::Io(_))));
    }
}
