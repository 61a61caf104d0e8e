//! Single-obstacle datasets for training and certifying the spectral
//! operator.
//!
//! Each sample places one disk obstacle uniformly in the local domain with a
//! uniform radius, rejecting draws that touch the central safe disk. A
//! dataset directory holds `index.json` plus, per sample, the obstacle field
//! and the solved value field as `HJVF` files (the obstacle field as a single
//! slice). See `docs/fnow_format.md` for the layout the trainer reads.

use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::Bounds;
use crate::error::DatasetError;
use crate::levelset::{
    read_value_field, sdf_obstacles, sdf_target, solve_hji_vi, write_value_field, Grid3, Obstacle,
    ObstacleSet, ScalarField, SolverConfig, ValueField,
};
use crate::surrogate::{mix_seed, TestScenario};

pub const DATASET_VERSION: u32 = 1;
pub const INDEX_FILE: &str = "index.json";

/// Rejection draws allowed per sample before giving up.
const MAX_DRAWS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub samples: usize,
    pub seed: u64,
    /// Local grid nodes `[nx, ny, nθ]`.
    pub dims: [usize; 3],
    /// Half-width of the square local domain.
    pub half_width: f64,
    pub safe_radius: f64,
    /// Obstacle radius range `[min, max)`.
    pub radius_range: [f64; 2],
    pub solver: SolverConfig,
    pub bounds: Bounds,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            samples: 100,
            seed: 0,
            dims: [50, 50, 25],
            half_width: 10.0,
            safe_radius: 1.0,
            radius_range: [0.5, 2.0],
            solver: SolverConfig::default(),
            bounds: Bounds::default(),
        }
    }
}

impl DatasetConfig {
    pub fn grid(&self) -> Result<Grid3, DatasetError> {
        let h = self.half_width;
        Ok(Grid3::new((-h, h), (-h, h), self.dims)?)
    }

    fn check(&self) -> Result<(), DatasetError> {
        let [lo, hi] = self.radius_range;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(DatasetError::Config(format!("radius_range {:?}", self.radius_range)));
        }
        if !(self.safe_radius > 0.0 && self.safe_radius + 2.0 * lo < self.half_width) {
            return Err(DatasetError::Config(format!(
                "safe_radius {} leaves no room for obstacles",
                self.safe_radius
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: usize,
    pub center: [f64; 2],
    pub radius: f64,
    /// Obstacle field file, relative to the dataset directory.
    pub sdf: String,
    /// Solved value field file, relative to the dataset directory.
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub dataset_version: u32,
    pub dims: [usize; 3],
    pub bounds_min: [f64; 3],
    pub bounds_max: [f64; 3],
    pub horizon: f64,
    pub dt_out: f64,
    pub safe_radius: f64,
    pub seed: u64,
    pub config: DatasetConfig,
    pub samples: Vec<SampleRecord>,
}

/// Obstacle of sample `i`: uniform centre, uniform radius, disjoint from the
/// safe disk. Depends only on the seed and `i`.
pub fn sample_obstacle(cfg: &DatasetConfig, i: usize) -> Result<Obstacle, DatasetError> {
    cfg.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, i as u64 + 1));
    let h = cfg.half_width;
    for _ in 0..MAX_DRAWS {
        let c = [rng.random_range(-h..h), rng.random_range(-h..h)];
        let r = rng.random_range(cfg.radius_range[0]..cfg.radius_range[1]);
        if c[0].hypot(c[1]) - r > cfg.safe_radius {
            return Ok(Obstacle::new(c, r));
        }
    }
    Err(DatasetError::Sample {
        index: i,
        reason: "no obstacle clear of the safe disk".into(),
    })
}

/// Obstacle field and solved value field for one obstacle.
pub fn solve_sample(
    cfg: &DatasetConfig,
    grid: &Grid3,
    obstacle: Obstacle,
) -> Result<(ScalarField, ValueField), DatasetError> {
    let ell = sdf_target(grid, cfg.safe_radius);
    let g = sdf_obstacles(grid, &ObstacleSet::new(vec![obstacle]));
    let vf = solve_hji_vi(grid, &ell, &g, &cfg.bounds, &cfg.solver)?;
    Ok((g, vf))
}

fn sample_name(i: usize) -> String {
    format!("sample_{i:04}")
}

/// In-memory test set, one solved scenario per sample.
pub fn test_scenarios(cfg: &DatasetConfig) -> Result<Vec<TestScenario>, DatasetError> {
    let grid = cfg.grid()?;
    (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let (g, vf) = solve_sample(cfg, &grid, sample_obstacle(cfg, i)?)?;
            Ok(TestScenario {
                name: sample_name(i),
                g,
                oracle: Arc::new(vf),
            })
        })
        .collect()
}

/// Writes every sample and the index into `dir`, which is created if needed.
pub fn generate_dataset(cfg: &DatasetConfig, dir: &Path) -> Result<DatasetIndex, DatasetError> {
    let grid = cfg.grid()?;
    std::fs::create_dir_all(dir)?;
    let samples = (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let o = sample_obstacle(cfg, i)?;
            let (g, vf) = solve_sample(cfg, &grid, o)?;
            let name = sample_name(i);
            let rec = SampleRecord {
                index: i,
                center: o.center,
                radius: o.radius,
                sdf: format!("{name}.sdf.hjvf"),
                value: format!("{name}.value.hjvf"),
            };
            let sdf = ValueField::new(grid, cfg.solver.dt_out, g.data)?;
            write_value_field(&sdf, &dir.join(&rec.sdf))?;
            write_value_field(&vf, &dir.join(&rec.value))?;
            Ok(rec)
        })
        .collect::<Result<Vec<_>, DatasetError>>()?;
    let index = DatasetIndex {
        dataset_version: DATASET_VERSION,
        dims: grid.dims,
        bounds_min: grid.min,
        bounds_max: grid.max,
        horizon: cfg.solver.horizon,
        dt_out: cfg.solver.dt_out,
        safe_radius: cfg.safe_radius,
        seed: cfg.seed,
        config: cfg.clone(),
        samples,
    };
    std::fs::write(dir.join(INDEX_FILE), serde_json::to_string_pretty(&index)?)?;
    Ok(index)
}

pub fn read_index(dir: &Path) -> Result<DatasetIndex, DatasetError> {
    let index: DatasetIndex = serde_json::from_str(&std::fs::read_to_string(dir.join(INDEX_FILE))?)?;
    if index.dataset_version != DATASET_VERSION {
        return Err(DatasetError::Version(index.dataset_version));
    }
    Ok(index)
}

/// Reads a dataset directory back as a test set. Values pass through `f32`
/// on disk.
pub fn load_dataset(dir: &Path) -> Result<(DatasetIndex, Vec<TestScenario>), DatasetError> {
    let index = read_index(dir)?;
    let scenarios = index
        .samples
        .iter()
        .map(|rec| {
            let sdf = read_value_field(&dir.join(&rec.sdf))?;
            let vf = read_value_field(&dir.join(&rec.value))?;
            if sdf.grid != vf.grid || sdf.slice_count() != 1 {
                return Err(DatasetError::Sample {
                    index: rec.index,
                    reason: "obstacle and value files disagree".into(),
                });
            }
            Ok(TestScenario {
                name: sample_name(rec.index),
                g: ScalarField::new(sdf.grid, sdf.data)?,
                oracle: Arc::new(vf),
            })
        })
        .collect::<Result<_, DatasetError>>()?;
    Ok((index, scenarios))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> DatasetConfig {
        DatasetConfig {
            samples: 2,
            seed: 5,
            dims: [21, 21, 8],
            half_width: 5.0,
            solver: SolverConfig {
                horizon: 1.0,
                dt_out: 0.5,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn obstacles_respect_ranges_and_safe_disk() {
        let cfg = DatasetConfig::default();
        for i in 0..500 {
            let o = sample_obstacle(&cfg, i).unwrap();
            assert!(o.radius >= 0.5 && o.radius < 2.0);
            assert!(o.center[0].abs() <= 10.0 && o.center[1].abs() <= 10.0);
            assert!(o.center[0].hypot(o.center[1]) - o.radius > cfg.safe_radius);
        }
        assert_eq!(sample_obstacle(&cfg, 7).unwrap(), sample_obstacle(&cfg, 7).unwrap());
        assert_ne!(sample_obstacle(&cfg, 7).unwrap(), sample_obstacle(&cfg, 8).unwrap());
    }

    #[test]
    fn bad_configs_are_rejected() {
        let mut cfg = small();
        cfg.radius_range = [1.0, 1.0];
        assert!(matches!(sample_obstacle(&cfg, 0), Err(DatasetError::Config(_))));
        let mut cfg = small();
        cfg.safe_radius = 4.5;
        assert!(matches!(sample_obstacle(&cfg, 0), Err(DatasetError::Config(_))));
    }

    #[test]
    fn smoke_run_writes_pairs_and_index() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small();
        let index = generate_dataset(&cfg, dir.path()).unwrap();
        assert_eq!(index.samples.len(), 2);
        for rec in &index.samples {
            assert!(dir.path().join(&rec.sdf).is_file());
            assert!(dir.path().join(&rec.value).is_file());
        }
        let (back, scenarios) = load_dataset(dir.path()).unwrap();
        assert_eq!(back, index);
        assert_eq!(scenarios.len(), 2);
        let mem = test_scenarios(&cfg).unwrap();
        for (a, b) in scenarios.iter().zip(&mem) {
            assert_eq!(a.name, b.name);
            let dev = a.oracle.data.iter().zip(&b.oracle.data).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
            assert!(dev < 1e-5, "f32 round trip deviates by {dev}");
            // slice 0 is max(ℓ, g)
            let ell = sdf_target(&a.g.grid, cfg.safe_radius);
            let n = a.g.grid.len();
            for j in 0..n {
                let want = ell.data[j].max(b.g.data[j]);
                assert_eq!(b.oracle.data[j], want);
            }
        }
        // same seed, same files
        let again = tempfile::tempdir().unwrap();
        generate_dataset(&cfg, again.path()).unwrap();
        for rec in &index.samples {
            let a = std::fs::read(dir.path().join(&rec.value)).unwrap();
            let b = std::fs::read(again.path().join(&rec.value)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn version_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let index = generate_dataset(&small(), dir.path()).unwrap();
        let mut v = serde_json::to_value(&index).unwrap();
        v["dataset_version"] = 9.into();
        std::fs::write(dir.path().join(INDEX_FILE), v.to_string()).unwrap();
        assert!(matches!(read_index(dir.path()), Err(DatasetError::Version(9))));
    }
}
