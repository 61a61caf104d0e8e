//! Oracle plus smooth noise whose sup norm is fixed by construction.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::levelset::ValueField;

const COMPONENTS: usize = 8;

/// `V† + η` where `η` is a sum of low-frequency sinusoids in `(x, y, θ, t)`
/// rescaled so that `max |η|` over all nodes equals `epsilon`.
#[derive(Debug, Clone)]
pub struct PerturbedOracle {
    pub oracle: Arc<ValueField>,
    pub seed: u64,
    pub epsilon: f64,
}

struct Wave {
    kx: f64,
    ky: f64,
    ktheta: f64,
    kt: f64,
    amp: f64,
    phase: f64,
}

impl PerturbedOracle {
    pub fn new(oracle: Arc<ValueField>, seed: u64, epsilon: f64) -> Self {
        Self {
            oracle,
            seed,
            epsilon,
        }
    }

    fn waves(&self) -> Vec<Wave> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..COMPONENTS)
            .map(|_| Wave {
                kx: rng.random_range(0..=2) as f64,
                ky: rng.random_range(0..=2) as f64,
                ktheta: rng.random_range(0..=2) as f64,
                kt: rng.random_range(0..=1) as f64,
                amp: rng.random_range(0.5..1.0),
                phase: rng.random_range(0.0..2.0 * PI),
            })
            .collect()
    }

    /// Noise at every node of every slice, before adding the oracle.
    pub fn noise(&self) -> Vec<f64> {
        let vf = &*self.oracle;
        let grid = &vf.grid;
        let [nx, ny, nt] = grid.dims;
        let slices = vf.slice_count();
        let mut out = vec![0.0; vf.data.len()];
        if self.epsilon == 0.0 {
            return out;
        }
        let horizon = vf.horizon().max(vf.dt_out);
        // sin(A + B) = sin A cos B + cos A sin B with A planar, B in (θ, t)
        for w in self.waves() {
            let planar: Vec<(f64, f64)> = (0..ny)
                .flat_map(|j| (0..nx).map(move |i| (i, j)))
                .map(|(i, j)| {
                    let xh = i as f64 / (nx - 1) as f64;
                    let yh = j as f64 / (ny - 1) as f64;
                    (PI * (w.kx * xh + w.ky * yh) + w.phase).sin_cos()
                })
                .collect();
            for k in 0..slices {
                let th = vf.time(k) / horizon;
                for kt in 0..nt {
                    let (sb, cb) = (w.ktheta * grid.coord(2, kt) + PI * w.kt * th).sin_cos();
                    let base = k * grid.len() + kt * grid.plane_len();
                    for (p, &(sa, ca)) in planar.iter().enumerate() {
                        out[base + p] += w.amp * (sa * cb + ca * sb);
                    }
                }
            }
        }
        let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak > 0.0 {
            let scale = self.epsilon / peak;
            out.iter_mut().for_each(|v| *v *= scale);
        }
        out
    }

    pub fn field(&self) -> ValueField {
        let noise = self.noise();
        let data = self
            .oracle
            .data
            .iter()
            .zip(&noise)
            .map(|(v, n)| v + n)
            .collect();
        ValueField {
            grid: self.oracle.grid,
            dt_out: self.oracle.dt_out,
            data,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levelset::Grid3;

    fn oracle() -> Arc<ValueField> {
        let g = Grid3::square(3.0, 12, 8).unwrap();
        let mut data = Vec::new();
        for k in 0..5 {
            data.extend((0..g.len()).map(|n| {
                let s = g.node_state(n);
                s.x.hypot(s.y) - 1.0 - 0.3 * k as f64
            }));
        }
        Arc::new(ValueField::new(g, 0.5, data).unwrap())
    }

    #[test]
    fn zero_amplitude_is_exact() {
        let o = oracle();
        assert_eq!(PerturbedOracle::new(o.clone(), 1, 0.0).field().data, o.data);
    }

    #[test]
    fn sup_norm_is_exact_and_deterministic() {
        let o = oracle();
        let p = PerturbedOracle::new(o.clone(), 42, 0.3);
        let f = p.field();
        let sup = f
            .data
            .iter()
            .zip(&o.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert_close!(sup, 0.3, 1e-9);
        assert_eq!(f.data, p.field().data);
        assert_ne!(f.data, PerturbedOracle::new(o, 43, 0.3).field().data);
    }
}
