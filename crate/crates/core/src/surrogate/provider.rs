//! Per-anchor value fields built from the locally known obstacles.

use std::sync::{Arc, Mutex};

use super::SurrogateBackend;
use crate::dynamics::Bounds;
use crate::error::SurrogateError;
use crate::levelset::{
    sdf_obstacles, sdf_target, solve_hji_vi, Grid3, Obstacle, ObstacleSet, SolverConfig, ValueField,
};
use crate::reachsets::SafeSetAnchor;

/// Default number of fields kept per cache (oracle and learned each).
pub const CACHE_LEN: usize = 8;

type Key = Vec<u64>;

#[derive(Debug, Default)]
struct Lru {
    entries: Vec<(Key, Arc<ValueField>)>,
}

impl Lru {
    fn get(&mut self, k: &Key) -> Option<Arc<ValueField>> {
        let pos = self.entries.iter().position(|(key, _)| key == k)?;
        let e = self.entries.remove(pos);
        let v = e.1.clone();
        self.entries.push(e);
        Some(v)
    }

    fn put(&mut self, k: Key, v: Arc<ValueField>, cap: usize) {
        while !self.entries.is_empty() && self.entries.len() >= cap {
            self.entries.remove(0);
        }
        self.entries.push((k, v));
    }
}

/// Solves oracles and materialises a backend on the shared local grid.
///
/// Every anchor uses the same local grid centred on its safe disk, so fields
/// depend only on the obstacles expressed in the local frame and are cached
/// on that key.
#[derive(Debug)]
pub struct FieldProvider {
    pub backend: SurrogateBackend,
    pub grid: Grid3,
    pub target_radius: f64,
    pub bounds: Bounds,
    pub solver: SolverConfig,
    cache_len: usize,
    oracles: Mutex<Lru>,
    learned: Mutex<Lru>,
}

impl FieldProvider {
    pub fn new(
        backend: SurrogateBackend,
        grid: Grid3,
        target_radius: f64,
        bounds: Bounds,
        solver: SolverConfig,
    ) -> Self {
        Self {
            backend,
            grid,
            target_radius,
            bounds,
            solver,
            cache_len: CACHE_LEN,
            oracles: Mutex::default(),
            learned: Mutex::default(),
        }
    }

    /// Keeps up to `n` fields per cache.
    pub fn with_cache_len(mut self, n: usize) -> Self {
        self.cache_len = n.max(1);
        self
    }

    /// Obstacles meeting the anchor's local square, in the local frame.
    pub fn local_obstacles(&self, anchor: &SafeSetAnchor, global: &[Obstacle]) -> ObstacleSet {
        local_obstacles(anchor, global)
    }

    /// Whether the anchor's local domain matches the provider grid.
    pub fn compatible(&self, anchor: &SafeSetAnchor) -> bool {
        let h = anchor.half_width;
        let g = &self.grid;
        (g.min[0] + h).abs() < 1e-9
            && (g.max[0] - h).abs() < 1e-9
            && (g.min[1] + h).abs() < 1e-9
            && (g.max[1] - h).abs() < 1e-9
            && (anchor.radius - self.target_radius).abs() < 1e-12
    }

    /// Solved field for local obstacles `obs`.
    pub fn oracle(&self, obs: &ObstacleSet) -> Result<Arc<ValueField>, SurrogateError> {
        let key = key_of(obs);
        if let Some(v) = self.oracles.lock().expect("cache lock").get(&key) {
            return Ok(v);
        }
        let ell = sdf_target(&self.grid, self.target_radius);
        let g = sdf_obstacles(&self.grid, obs);
        let vf = Arc::new(solve_hji_vi(&self.grid, &ell, &g, &self.bounds, &self.solver)?);
        self.oracles
            .lock()
            .expect("cache lock")
            .put(key, vf.clone(), self.cache_len);
        Ok(vf)
    }

    /// Backend field for local obstacles `obs`.
    pub fn learned(&self, obs: &ObstacleSet) -> Result<Arc<ValueField>, SurrogateError> {
        if matches!(self.backend, SurrogateBackend::Oracle) {
            return self.oracle(obs);
        }
        let key = key_of(obs);
        if let Some(v) = self.learned.lock().expect("cache lock").get(&key) {
            return Ok(v);
        }
        let g = sdf_obstacles(&self.grid, obs);
        let oracle = if self.backend.needs_oracle() {
            Some(self.oracle(obs)?)
        } else {
            None
        };
        let salt = key.iter().fold(0xCBF2_9CE4_8422_2325u64, |h, &w| {
            (h ^ w).wrapping_mul(0x0000_0100_0000_01B3)
        });
        let vf = Arc::new(self.backend.materialize(&g, oracle.as_ref(), salt)?);
        self.learned
            .lock()
            .expect("cache lock")
            .put(key, vf.clone(), self.cache_len);
        Ok(vf)
    }
}

pub fn local_obstacles(anchor: &SafeSetAnchor, global: &[Obstacle]) -> ObstacleSet {
    ObstacleSet::new(
        global
            .iter()
            .filter(|o| o.intersects_square(anchor.center, anchor.half_width))
            .map(|o| o.translated(-anchor.center[0], -anchor.center[1]))
            .collect(),
    )
}

fn key_of(obs: &ObstacleSet) -> Key {
    let mut k: Vec<[u64; 3]> = obs
        .obstacles
        .iter()
        .map(|o| [o.center[0].to_bits(), o.center[1].to_bits(), o.radius.to_bits()])
        .collect();
    k.sort_unstable();
    k.concat()
}
