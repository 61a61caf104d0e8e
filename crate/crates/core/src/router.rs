//! Exact open-tour routing over goals (Held–Karp subset DP).
//!
//! Costs are `Option<f64>`: `None` marks an infeasible transition and never
//! takes part in arithmetic.

use serde::{Deserialize, Serialize};

use crate::error::RouterError;
use crate::planner::GoalPlanner;

/// Largest instance the subset DP accepts.
pub const MAX_GOALS: usize = 20;

pub type Cost = Option<f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    pub k: usize,
    /// Row-major, `c[i][j]` at `i·k + j`.
    pub entries: Vec<Cost>,
}

impl CostMatrix {
    /// Zero diagonal, infeasible elsewhere.
    pub fn new(k: usize) -> Self {
        let mut entries = vec![None; k * k];
        for i in 0..k {
            entries[i * k + i] = Some(0.0);
        }
        Self { k, entries }
    }

    pub fn from_rows(rows: &[Vec<Cost>]) -> Result<Self, RouterError> {
        let k = rows.len();
        if k == 0 || rows.iter().any(|r| r.len() != k) {
            return Err(RouterError::BadMatrix);
        }
        Ok(Self {
            k,
            entries: rows.concat(),
        })
    }

    pub fn get(&self, i: usize, j: usize) -> Cost {
        self.entries[i * self.k + j]
    }

    pub fn set(&mut self, i: usize, j: usize, c: Cost) {
        self.entries[i * self.k + j] = c;
    }

    /// Sum of consecutive legs, `None` if any leg is infeasible.
    pub fn path_cost(&self, order: &[usize]) -> Cost {
        order
            .windows(2)
            .try_fold(0.0, |acc, w| self.get(w[0], w[1]).map(|c| acc + c))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tour {
    pub order: Vec<usize>,
    pub legs: Vec<f64>,
    pub total: f64,
}

/// `c[i][j]` = cost-to-goal of goal `i`'s position in goal `j`'s tree.
pub fn extract_costs(goals: &[[f64; 2]], trees: &[GoalPlanner]) -> CostMatrix {
    let k = goals.len();
    let mut c = CostMatrix::new(k);
    for (i, p) in goals.iter().enumerate() {
        for (j, tree) in trees.iter().enumerate().take(k) {
            if i != j {
                c.set(i, j, tree.cost_from(*p));
            }
        }
    }
    c
}

/// Minimum-cost open tour from `start` through every goal not in `invalid`.
///
/// Among optimal tours the lexicographically smallest order is returned.
pub fn held_karp(c: &CostMatrix, start: usize, invalid: &[usize]) -> Result<Tour, RouterError> {
    if c.k == 0 || c.entries.len() != c.k * c.k {
        return Err(RouterError::BadMatrix);
    }
    if c.k > MAX_GOALS {
        return Err(RouterError::TooManyGoals(c.k, MAX_GOALS));
    }
    if start >= c.k || invalid.contains(&start) {
        return Err(RouterError::BadStart(start));
    }
    let nodes: Vec<usize> = (0..c.k)
        .filter(|&i| i != start && !invalid.contains(&i))
        .collect();
    let m = nodes.len();
    if m == 0 {
        return Ok(Tour {
            order: vec![start],
            legs: Vec::new(),
            total: 0.0,
        });
    }
    // position m stands for the start node
    let cost = |a: usize, b: usize| -> Cost {
        let ia = if a == m { start } else { nodes[a] };
        c.get(ia, nodes[b])
    };
    // f[S·(m+1) + i]: cheapest path starting at i that visits all of S (i ∉ S)
    let width = m + 1;
    let full = (1usize << m) - 1;
    let mut f: Vec<Cost> = vec![None; (full + 1) * width];
    for i in 0..width {
        f[i] = Some(0.0);
    }
    for s in 1..=full {
        for i in 0..width {
            if i < m && s & (1 << i) != 0 {
                continue;
            }
            if i == m && s != full {
                continue;
            }
            let mut best: Cost = None;
            for j in 0..m {
                if s & (1 << j) == 0 {
                    continue;
                }
                if let (Some(cij), Some(rest)) = (cost(i, j), f[(s ^ (1 << j)) * width + j]) {
                    let v = cij + rest;
                    if best.is_none_or(|b| v < b) {
                        best = Some(v);
                    }
                }
            }
            f[s * width + i] = best;
        }
    }
    let optimum = f[full * width + m].ok_or(RouterError::NoFeasibleTour)?;

    let mut order = vec![start];
    let mut legs = Vec::with_capacity(m);
    let (mut s, mut i) = (full, m);
    while s != 0 {
        let target = f[s * width + i].expect("reachable state");
        let j = (0..m)
            .filter(|&j| s & (1 << j) != 0)
            .find(|&j| match (cost(i, j), f[(s ^ (1 << j)) * width + j]) {
                (Some(cij), Some(rest)) => cij + rest == target,
                _ => false,
            })
            .expect("optimal successor");
        legs.push(cost(i, j).expect("finite leg"));
        order.push(nodes[j]);
        s ^= 1 << j;
        i = j;
    }
    let total: f64 = legs.iter().sum();
    debug_assert!((total - optimum).abs() <= 1e-9 * optimum.abs().max(1.0));
    Ok(Tour { order, legs, total })
}

/// Tour from the robot (index 0) through the remaining goals (indices `1..`).
///
/// `robot_to_goal[j]` is the cost from the robot to remaining goal `j`,
/// `goals` the costs among remaining goals, `invalid` indexes remaining goals.
/// Returned order uses the augmented indexing with the robot at 0.
pub fn replan_tour(
    robot_to_goal: &[Cost],
    goals: &CostMatrix,
    invalid: &[usize],
) -> Result<Tour, RouterError> {
    let m = goals.k;
    if robot_to_goal.len() != m {
        return Err(RouterError::BadMatrix);
    }
    let mut c = CostMatrix::new(m + 1);
    for j in 0..m {
        let feasible = !invalid.contains(&j);
        c.set(0, j + 1, if feasible { robot_to_goal[j] } else { None });
        // no path leads back to the robot
        c.set(j + 1, 0, None);
        for i in 0..m {
            c.set(i + 1, j + 1, goals.get(i, j));
        }
    }
    let shifted: Vec<usize> = invalid.iter().map(|&j| j + 1).collect();
    held_karp(&c, 0, &shifted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(k: usize, rng: &mut ChaCha8Rng, integer: bool, p_inf: f64) -> CostMatrix {
        let mut c = CostMatrix::new(k);
        for i in 0..k {
            for j in 0..k {
                if i == j {
                    continue;
                }
                if rng.random::<f64>() < p_inf {
                    continue;
                }
                let v = if integer {
                    rng.random_range(1..5) as f64
                } else {
                    rng.random_range(0.5..20.0)
                };
                c.set(i, j, Some(v));
            }
        }
        c
    }

    /// Lexicographic enumeration; the first permutation attaining the
    /// minimum wins.
    fn brute_force(c: &CostMatrix, start: usize, invalid: &[usize]) -> Option<(Vec<usize>, f64)> {
        fn rec(
            c: &CostMatrix,
            path: &mut Vec<usize>,
            left: &mut Vec<usize>,
            best: &mut Option<(Vec<usize>, f64)>,
        ) {
            if left.is_empty() {
                if let Some(v) = c.path_cost(path) {
                    if best.as_ref().is_none_or(|b| v < b.1) {
                        *best = Some((path.clone(), v));
                    }
                }
                return;
            }
            for idx in 0..left.len() {
                let n = left.remove(idx);
                path.push(n);
                rec(c, path, left, best);
                path.pop();
                left.insert(idx, n);
            }
        }
        let mut left: Vec<usize> = (0..c.k).filter(|&i| i != start && !invalid.contains(&i)).collect();
        let mut best = None;
        rec(c, &mut vec![start], &mut left, &mut best);
        best
    }

    #[test]
    fn single_goal() {
        let t = held_karp(&CostMatrix::new(1), 0, &[]).unwrap();
        assert_eq!(t.order, vec![0]);
        assert_eq!(t.total, 0.0);
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for k in 3..=6 {
            for trial in 0..30 {
                let c = random_matrix(k, &mut rng, trial % 2 == 0, 0.1);
                let start = trial % k;
                let hk = held_karp(&c, start, &[]);
                match brute_force(&c, start, &[]) {
                    Some((order, cost)) => {
                        let t = hk.unwrap();
                        assert_eq!(t.order, order);
                        assert_close!(t.total, cost, 1e-9);
                        assert_eq!(c.path_cost(&t.order), Some(t.total));
                    }
                    None => assert_eq!(hk.unwrap_err(), RouterError::NoFeasibleTour),
                }
            }
        }
    }

    #[test]
    fn disconnected_start_fails() {
        let mut c = CostMatrix::new(4);
        for i in 1..4 {
            for j in 1..4 {
                if i != j {
                    c.set(i, j, Some(1.0));
                }
            }
        }
        assert_eq!(held_karp(&c, 0, &[]).unwrap_err(), RouterError::NoFeasibleTour);
        assert_eq!(held_karp(&c, 0, &[0]).unwrap_err(), RouterError::BadStart(0));
        assert!(matches!(
            held_karp(&CostMatrix::new(21), 0, &[]),
            Err(RouterError::TooManyGoals(21, 20))
        ));
    }

    #[test]
    fn invalid_goals_are_skipped() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = random_matrix(6, &mut rng, false, 0.0);
        let t = held_karp(&c, 0, &[2, 4]).unwrap();
        assert_eq!(t.order.len(), 4);
        assert!(!t.order.contains(&2) && !t.order.contains(&4));
        assert_eq!(brute_force(&c, 0, &[2, 4]).unwrap().0, t.order);
    }

    #[test]
    fn replan_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let goals = random_matrix(3, &mut rng, false, 0.0);
        let robot: Vec<Cost> = (0..3).map(|_| Some(rng.random_range(1.0..10.0))).collect();
        let t = replan_tour(&robot, &goals, &[]).unwrap();
        // oracle on the augmented matrix with the two infinity rules applied by hand
        let mut aug = CostMatrix::new(4);
        for j in 0..3 {
            aug.set(0, j + 1, robot[j]);
            for i in 0..3 {
                aug.set(i + 1, j + 1, goals.get(i, j));
            }
        }
        let (order, cost) = brute_force(&aug, 0, &[]).unwrap();
        assert_eq!(t.order, order);
        assert_close!(t.total, cost, 1e-9);

        let t = replan_tour(&robot, &goals, &[1]).unwrap();
        assert!(!t.order.contains(&2));

        // robot sitting at goal 0: same as routing from goal 0
        let robot_at_0: Vec<Cost> = (0..3).map(|j| goals.get(0, j)).collect();
        let from_robot = replan_tour(&robot_at_0, &goals, &[]).unwrap();
        let from_goal = held_karp(&goals, 0, &[]).unwrap();
        assert_close!(from_robot.total, from_goal.total, 1e-12);
    }

    #[test]
    fn infinite_edges_never_help() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let c = random_matrix(6, &mut rng, false, 0.0);
            let base = held_karp(&c, 0, &[]).unwrap().total;
            let mut cut = c.clone();
            let (i, j) = (rng.random_range(0..6), rng.random_range(0..6));
            if i != j {
                cut.set(i, j, None);
            }
            if let Ok(t) = held_karp(&cut, 0, &[]) {
                assert!(t.total >= base - 1e-12);
            }
            assert_eq!(held_karp(&c, 0, &[]).unwrap(), held_karp(&c, 0, &[]).unwrap());
        }
    }
}
