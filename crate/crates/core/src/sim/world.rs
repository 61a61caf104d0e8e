//! Ground-truth obstacles and disk sensing.

use serde::{Deserialize, Serialize};

use crate::levelset::Obstacle;

/// All obstacles with their discovery state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub obstacles: Vec<Obstacle>,
    pub known: Vec<bool>,
    pub r_sense: f64,
}

impl World {
    pub fn new(obstacles: Vec<Obstacle>, known: Vec<bool>, r_sense: f64) -> Self {
        debug_assert_eq!(obstacles.len(), known.len());
        Self {
            obstacles,
            known,
            r_sense,
        }
    }

    /// Everything unknown at the start.
    pub fn unknown(obstacles: Vec<Obstacle>, r_sense: f64) -> Self {
        let known = vec![false; obstacles.len()];
        Self::new(obstacles, known, r_sense)
    }

    /// Marks unknown obstacles whose centre lies within `r_sense` of `p` as
    /// known and returns their indices.
    pub fn sense(&mut self, p: [f64; 2]) -> Vec<usize> {
        let mut found = Vec::new();
        for (i, o) in self.obstacles.iter().enumerate() {
            if !self.known[i] && (o.center[0] - p[0]).hypot(o.center[1] - p[1]) <= self.r_sense {
                self.known[i] = true;
                found.push(i);
            }
        }
        found
    }

    pub fn known_obstacles(&self) -> Vec<Obstacle> {
        self.obstacles
            .iter()
            .zip(&self.known)
            .filter(|(_, &k)| k)
            .map(|(o, _)| *o)
            .collect()
    }

    /// True obstacle margin `g(p)`, positive inside; `-∞` with no obstacles.
    pub fn margin(&self, p: [f64; 2]) -> f64 {
        self.obstacles
            .iter()
            .map(|o| o.signed(p[0], p[1]))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Margin over known obstacles only.
    pub fn known_margin(&self, p: [f64; 2]) -> f64 {
        self.obstacles
            .iter()
            .zip(&self.known)
            .filter(|(_, &k)| k)
            .map(|(o, _)| o.signed(p[0], p[1]))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}
