//! Reach-avoid set certificates built from value fields.
//!
//! Masks are thresholded on stored slices only. Local fields are solved once
//! around a safe set at the origin and reused for every anchor by translation.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::State;
use crate::error::ReachError;
use crate::levelset::{Grid3, ValueField};

/// Node-wise `V ≤ −ε` on one stored slice.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachMask3 {
    pub grid: Grid3,
    /// Horizon of the slice the mask was taken from.
    pub t: f64,
    pub epsilon: f64,
    pub mask: Vec<bool>,
}

impl ReachMask3 {
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Writes one heading plane as a binary PGM (255 = inside).
    pub fn write_pgm(&self, path: &Path, theta_index: usize) -> Result<(), ReachError> {
        let plane = self.grid.plane_len();
        let start = theta_index * plane;
        let bits = self
            .mask
            .get(start..start + plane)
            .ok_or_else(|| ReachError::Raster(format!("no heading plane {theta_index}")))?;
        write_pgm(path, self.grid.dims[0], self.grid.dims[1], bits)
    }
}

pub fn epsilon_sublevel(vf: &ValueField, t: f64, epsilon: f64) -> Result<ReachMask3, ReachError> {
    let k = vf.nearest_slice(t)?;
    let mask = vf.slice(k).iter().map(|&v| v <= -epsilon).collect();
    Ok(ReachMask3 {
        grid: vf.grid,
        t: vf.time(k),
        epsilon,
        mask,
    })
}

/// Every stored slice thresholded at `epsilon`.
pub fn sublevel_all(vf: &ValueField, epsilon: f64) -> Vec<ReachMask3> {
    (0..vf.slice_count())
        .map(|k| ReachMask3 {
            grid: vf.grid,
            t: vf.time(k),
            epsilon,
            mask: vf.slice(k).iter().map(|&v| v <= -epsilon).collect(),
        })
        .collect()
}

/// Node-centred planar raster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Raster2 {
    pub min: [f64; 2],
    pub spacing: [f64; 2],
    pub dims: [usize; 2],
}

impl Raster2 {
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn max(&self) -> [f64; 2] {
        [
            self.min[0] + (self.dims[0] - 1) as f64 * self.spacing[0],
            self.min[1] + (self.dims[1] - 1) as f64 * self.spacing[1],
        ]
    }

    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.min[0] + i as f64 * self.spacing[0],
            self.min[1] + j as f64 * self.spacing[1],
        ]
    }

    /// Node whose cell contains `p`, if any.
    pub fn nearest(&self, p: [f64; 2]) -> Option<(usize, usize)> {
        let mut idx = [0usize; 2];
        for a in 0..2 {
            let u = ((p[a] - self.min[a]) / self.spacing[a]).round();
            if !(u >= 0.0 && u <= (self.dims[a] - 1) as f64) {
                return None;
            }
            idx[a] = u as usize;
        }
        Some((idx[0], idx[1]))
    }

    fn from_grid(grid: &Grid3) -> Self {
        Self {
            min: [grid.min[0], grid.min[1]],
            spacing: [grid.spacing(0), grid.spacing(1)],
            dims: [grid.dims[0], grid.dims[1]],
        }
    }
}

/// Planar mask, `true` where some heading is certified.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachMask2 {
    pub raster: Raster2,
    pub mask: Vec<bool>,
}

impl ReachMask2 {
    pub fn from_fn<F: Fn([f64; 2]) -> bool>(raster: Raster2, f: F) -> Self {
        let mut mask = Vec::with_capacity(raster.len());
        for j in 0..raster.dims[1] {
            for i in 0..raster.dims[0] {
                mask.push(f(raster.point(i, j)));
            }
        }
        Self { raster, mask }
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.mask[j * self.raster.dims[0] + i]
    }

    /// Nearest-node membership; points off the raster are outside.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.raster.nearest(p).is_some_and(|(i, j)| self.get(i, j))
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn translated(&self, offset: [f64; 2]) -> Self {
        let mut r = self.clone();
        r.raster.min[0] += offset[0];
        r.raster.min[1] += offset[1];
        r
    }

    pub fn to_rle(&self) -> RleMask {
        let mut runs = Vec::new();
        let mut current = false;
        let mut len = 0u32;
        for &m in &self.mask {
            if m == current {
                len += 1;
            } else {
                runs.push(len);
                current = m;
                len = 1;
            }
        }
        runs.push(len);
        RleMask {
            raster: self.raster,
            runs,
        }
    }

    pub fn write_pgm(&self, path: &Path) -> Result<(), ReachError> {
        write_pgm(path, self.raster.dims[0], self.raster.dims[1], &self.mask)
    }
}

/// Run-length encoded mask: alternating run lengths starting with `false`,
/// scanned row by row (x fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RleMask {
    pub raster: Raster2,
    pub runs: Vec<u32>,
}

impl RleMask {
    pub fn decode(&self) -> ReachMask2 {
        let mut mask = Vec::with_capacity(self.raster.len());
        let mut value = false;
        for &r in &self.runs {
            mask.extend(std::iter::repeat_n(value, r as usize));
            value = !value;
        }
        ReachMask2 {
            raster: self.raster,
            mask,
        }
    }
}

fn write_pgm(path: &Path, w: usize, h: usize, bits: &[bool]) -> Result<(), ReachError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(f, "P5\n{w} {h}\n255\n")?;
    // image rows run top to bottom, so emit the largest y first
    for j in (0..h).rev() {
        let row: Vec<u8> = (0..w).map(|i| if bits[j * w + i] { 255 } else { 0 }).collect();
        f.write_all(&row)?;
    }
    Ok(())
}

/// Minimum of `V` over a heading column, and its `−ε` sublevel.
///
/// `theta_range` restricts the minimum to a subset of heading indices.
pub fn heading_agnostic(
    vf: &ValueField,
    t: f64,
    epsilon: f64,
    theta_range: Option<std::ops::Range<usize>>,
) -> Result<ReachMask2, ReachError> {
    let k = vf.nearest_slice(t)?;
    let slice = vf.slice(k);
    let grid = &vf.grid;
    let plane = grid.plane_len();
    let range = theta_range.unwrap_or(0..grid.dims[2]);
    if range.is_empty() || range.end > grid.dims[2] {
        return Err(ReachError::Raster(format!("heading range {range:?} invalid")));
    }
    let mask = (0..plane)
        .map(|n| {
            range
                .clone()
                .map(|kt| slice[kt * plane + n])
                .fold(f64::INFINITY, f64::min)
                <= -epsilon
        })
        .collect();
    Ok(ReachMask2 {
        raster: Raster2::from_grid(grid),
        mask,
    })
}

/// Safe disk in the global frame with its square local domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafeSetAnchor {
    pub center: [f64; 2],
    pub radius: f64,
    /// Half-width of the local square domain.
    pub half_width: f64,
    /// Index of the value provider serving this anchor.
    #[serde(default)]
    pub provider: usize,
}

impl SafeSetAnchor {
    pub fn local(&self, p: [f64; 2]) -> [f64; 2] {
        [p[0] - self.center[0], p[1] - self.center[1]]
    }

    pub fn in_frame(&self, p: [f64; 2]) -> bool {
        let l = self.local(p);
        l[0].abs() <= self.half_width && l[1].abs() <= self.half_width
    }

    pub fn in_safe_disk(&self, p: [f64; 2]) -> bool {
        let l = self.local(p);
        l[0].hypot(l[1]) <= self.radius
    }
}

/// Local value of a global query, `V(p − c, θ, t)`.
pub fn translate_query(
    p_global: [f64; 2],
    theta: f64,
    t: f64,
    anchor: &SafeSetAnchor,
    vf: &ValueField,
) -> Result<f64, ReachError> {
    let l = anchor.local(p_global);
    if !anchor.in_frame(p_global) || !vf.grid.contains_xy(l[0], l[1]) {
        return Err(ReachError::OutOfLocalFrame {
            x: p_global[0],
            y: p_global[1],
        });
    }
    Ok(vf.interpolate(&State::new(l[0], l[1], theta), t)?)
}

/// First raster point `p₀` (row-major) whose closed `δ`-disk lies inside both
/// masks. Both masks are resampled conservatively onto the finer spacing over
/// the overlap of their extents.
pub fn overlap_check(a: &ReachMask2, b: &ReachMask2, delta: f64) -> Option<[f64; 2]> {
    let lo = [
        a.raster.min[0].max(b.raster.min[0]),
        a.raster.min[1].max(b.raster.min[1]),
    ];
    let (amax, bmax) = (a.raster.max(), b.raster.max());
    let hi = [amax[0].min(bmax[0]), amax[1].min(bmax[1])];
    if hi[0] < lo[0] || hi[1] < lo[1] {
        return None;
    }
    let h = [
        a.raster.spacing[0].min(b.raster.spacing[0]),
        a.raster.spacing[1].min(b.raster.spacing[1]),
    ];
    let dims = [
        ((hi[0] - lo[0]) / h[0] + 1e-9).floor() as usize + 1,
        ((hi[1] - lo[1]) / h[1] + 1e-9).floor() as usize + 1,
    ];
    let common = Raster2 { min: lo, spacing: h, dims };
    let both = ReachMask2::from_fn(common, |p| a.contains(p) && b.contains(p));
    let ri = (delta / h[0] + 1e-9).floor() as isize;
    let rj = (delta / h[1] + 1e-9).floor() as isize;
    let offsets: Vec<(isize, isize)> = (-rj..=rj)
        .flat_map(|dj| (-ri..=ri).map(move |di| (di, dj)))
        .filter(|&(di, dj)| (di as f64 * h[0]).hypot(dj as f64 * h[1]) <= delta + 1e-12)
        .collect();
    // the whole disk has to fit on the raster
    let margin_i = (delta / h[0] - 1e-9).ceil() as usize;
    let margin_j = (delta / h[1] - 1e-9).ceil() as usize;
    if dims[0] <= 2 * margin_i || dims[1] <= 2 * margin_j {
        return None;
    }
    for j in margin_j..dims[1] - margin_j {
        for i in margin_i..dims[0] - margin_i {
            if !both.get(i, j) {
                continue;
            }
            let ok = offsets.iter().all(|&(di, dj)| {
                both.get((i as isize + di) as usize, (j as isize + dj) as usize)
            });
            if ok {
                return Some(common.point(i, j));
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inclusion {
    pub eta: f64,
    pub learned: usize,
    pub included: usize,
    /// Set when the learned set is empty and `eta = 1` holds vacuously.
    pub vacuous: bool,
}

/// Fraction of learned nodes (over all slices) that the truth also contains.
pub fn inclusion_volume(
    learned: &[ReachMask3],
    truth: &[ReachMask3],
) -> Result<Inclusion, ReachError> {
    if learned.len() != truth.len() {
        return Err(ReachError::GridMismatch);
    }
    let mut total = 0usize;
    let mut inside = 0usize;
    for (l, t) in learned.iter().zip(truth) {
        if l.grid != t.grid || (l.t - t.t).abs() > 1e-9 || l.mask.len() != t.mask.len() {
            return Err(ReachError::GridMismatch);
        }
        for (&a, &b) in l.mask.iter().zip(&t.mask) {
            if a {
                total += 1;
                if b {
                    inside += 1;
                }
            }
        }
    }
    if total == 0 {
        log::warn!("learned reach set is empty; inclusion holds vacuously");
        return Ok(Inclusion {
            eta: 1.0,
            learned: 0,
            included: 0,
            vacuous: true,
        });
    }
    Ok(Inclusion {
        eta: inside as f64 / total as f64,
        learned: total,
        included: inside,
        vacuous: false,
    })
}

/// One anchor of the feasible region with the field certifying it.
#[derive(Debug, Clone)]
pub struct RegionMember {
    pub anchor: SafeSetAnchor,
    pub field: Arc<ValueField>,
    /// Heading-agnostic mask at the full horizon, in the global frame.
    pub mask: ReachMask2,
}

/// Union of heading-agnostic reach sets over all anchors.
#[derive(Debug, Clone)]
pub struct FeasibleRegion {
    pub members: Vec<RegionMember>,
    pub epsilon: f64,
}

impl FeasibleRegion {
    pub fn new(
        anchors: &[(SafeSetAnchor, Arc<ValueField>)],
        epsilon: f64,
    ) -> Result<Self, ReachError> {
        if anchors.is_empty() {
            return Err(ReachError::NoAnchors);
        }
        let members = anchors
            .iter()
            .map(|(anchor, field)| {
                let mask = heading_agnostic(field, field.horizon(), epsilon, None)?
                    .translated(anchor.center);
                Ok(RegionMember {
                    anchor: *anchor,
                    field: field.clone(),
                    mask,
                })
            })
            .collect::<Result<Vec<_>, ReachError>>()?;
        Ok(Self { members, epsilon })
    }

    /// Heading-minimised value of one member at `p`, or `None` off its frame.
    pub fn member_value(&self, m: usize, p: [f64; 2]) -> Option<f64> {
        let member = &self.members[m];
        let field = &member.field;
        let grid = &field.grid;
        let t = field.horizon();
        let mut best = f64::INFINITY;
        for k in 0..grid.dims[2] {
            match translate_query(p, grid.coord(2, k), t, &member.anchor, field) {
                Ok(v) => best = best.min(v),
                Err(_) => return None,
            }
        }
        Some(best)
    }

    /// Smallest heading-minimised value over all anchors covering `p`.
    pub fn value(&self, p: [f64; 2]) -> Option<f64> {
        (0..self.members.len())
            .filter_map(|m| self.member_value(m, p))
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))))
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.contains_with_margin(p, 0.0)
    }

    /// Membership with the threshold tightened to `−ε − margin`.
    pub fn contains_with_margin(&self, p: [f64; 2], margin: f64) -> bool {
        let thr = -self.epsilon - margin;
        self.members.iter().any(|m| {
            let field = &m.field;
            let t = field.horizon();
            // stop at the first heading that certifies
            m.anchor.in_frame(p)
                && (0..field.grid.dims[2]).any(|k| {
                translate_query(p, field.grid.coord(2, k), t, &m.anchor, field).is_ok_and(|v| v <= thr)
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levelset::sdf_target;

    fn fine_raster(half: f64, h: f64) -> Raster2 {
        let n = (2.0 * half / h).round() as usize + 1;
        Raster2 {
            min: [-half, -half],
            spacing: [h, h],
            dims: [n, n],
        }
    }

    fn field_from(grid: Grid3, slices: usize, f: impl Fn(&State, usize) -> f64) -> ValueField {
        let mut data = Vec::new();
        for k in 0..slices {
            data.extend((0..grid.len()).map(|n| f(&grid.node_state(n), k)));
        }
        ValueField::new(grid, 0.5, data).unwrap()
    }

    #[test]
    fn sublevel_edge_cases() {
        let grid = Grid3::square(3.0, 13, 8).unwrap();
        let vf = field_from(grid, 3, |s, k| s.x.hypot(s.y) - 1.0 - 0.2 * k as f64);
        let exact = epsilon_sublevel(&vf, 1.0, 0.0).unwrap();
        assert!(exact
            .mask
            .iter()
            .zip(vf.slice(2))
            .all(|(&m, &v)| m == (v <= 0.0)));
        let max = vf.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert_eq!(epsilon_sublevel(&vf, 1.0, max + 1.0).unwrap().count(), 0);
        assert!(epsilon_sublevel(&vf, 1.6, 0.0).is_err());
        // nearest stored slice
        assert_eq!(epsilon_sublevel(&vf, 0.6, 0.0).unwrap().t, 0.5);
    }

    #[test]
    fn heading_min_semantics() {
        let grid = Grid3::square(3.0, 13, 8).unwrap();
        let flat = field_from(grid, 1, |s, _| s.x - 0.5);
        let m2 = heading_agnostic(&flat, 0.0, 0.0, None).unwrap();
        let m3 = epsilon_sublevel(&flat, 0.0, 0.0).unwrap();
        assert_eq!(m2.mask, m3.mask[..grid.plane_len()]);

        let only_zero = field_from(grid, 1, |s, _| if s.theta == 0.0 { -1.0 } else { 1.0 });
        let m = heading_agnostic(&only_zero, 0.0, 0.5, None).unwrap();
        assert!(m.mask.iter().all(|&b| b));
        let zero_index = (0..8).find(|&k| grid.coord(2, k) == 0.0).unwrap();
        let m = heading_agnostic(&only_zero, 0.0, 0.5, Some(0..zero_index)).unwrap();
        assert!(m.mask.iter().all(|&b| !b));
    }

    #[test]
    fn translate_query_shifts() {
        let grid = Grid3::square(5.0, 21, 8).unwrap();
        let vf = field_from(grid, 2, |s, k| s.x * 0.3 - s.y + k as f64);
        let origin = SafeSetAnchor {
            center: [0.0, 0.0],
            radius: 1.0,
            half_width: 5.0,
            provider: 0,
        };
        let s = State::new(1.3, -0.7, 0.4);
        assert_eq!(
            translate_query([1.3, -0.7], 0.4, 0.25, &origin, &vf).unwrap(),
            vf.interpolate(&s, 0.25).unwrap()
        );
        let shifted = SafeSetAnchor {
            center: [7.0, -3.0],
            ..origin
        };
        assert_eq!(
            translate_query([7.0, -3.0], 0.1, 0.0, &shifted, &vf).unwrap(),
            vf.interpolate(&State::new(0.0, 0.0, 0.1), 0.0).unwrap()
        );
        let other = SafeSetAnchor {
            center: [-2.0, 4.0],
            ..origin
        };
        let a = translate_query([7.5, -2.0], 0.3, 0.5, &shifted, &vf).unwrap();
        let b = translate_query([-1.5, 5.0], 0.3, 0.5, &other, &vf).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            translate_query([13.0, -3.0], 0.0, 0.0, &shifted, &vf),
            Err(ReachError::OutOfLocalFrame { .. })
        ));
    }

    #[test]
    fn overlap_of_unit_disks() {
        let r = fine_raster(3.0, 0.01);
        let a = ReachMask2::from_fn(r, |p| (p[0] + 0.75).hypot(p[1]) <= 1.0);
        let b = ReachMask2::from_fn(r, |p| (p[0] - 0.75).hypot(p[1]) <= 1.0);
        // inscribed radius of the lens is 1 − 0.75 = 0.25
        let w = overlap_check(&a, &b, 0.2).expect("lens fits δ = 0.2");
        assert!(w[0].abs() < 0.06 && w[1].abs() < 0.7, "{w:?}");
        let h = r.spacing[0];
        let n = (0.2 / h).ceil() as isize + 1;
        for dj in -n..=n {
            for di in -n..=n {
                let p = [w[0] + di as f64 * h, w[1] + dj as f64 * h];
                if (di as f64 * h).hypot(dj as f64 * h) <= 0.2 {
                    assert!(a.contains(p) && b.contains(p));
                }
            }
        }
        assert!(overlap_check(&a, &b, 0.8).is_none());
        let c = ReachMask2::from_fn(r, |p| (p[0] - 2.5).hypot(p[1]) <= 0.4);
        assert!(overlap_check(&a, &c, 0.05).is_none());
        let full = ReachMask2::from_fn(fine_raster(3.0, 0.1), |_| true);
        assert!(overlap_check(&full, &full, 1.0).is_some());
    }

    #[test]
    fn overlap_across_resolutions() {
        let coarse = ReachMask2::from_fn(fine_raster(4.0, 0.4), |p| p[0].hypot(p[1]) <= 2.5);
        let fine = ReachMask2::from_fn(fine_raster(3.0, 0.05), |p| (p[0] - 1.0).hypot(p[1]) <= 1.5);
        let w = overlap_check(&coarse, &fine, 0.5).unwrap();
        assert!(coarse.contains(w) && fine.contains(w));
    }

    #[test]
    fn inclusion_counts() {
        let grid = Grid3::square(2.0, 5, 4).unwrap();
        let truth_field = field_from(grid, 2, |s, _| s.x - 0.1);
        let truth = sublevel_all(&truth_field, 0.0);
        assert_eq!(inclusion_volume(&truth, &truth).unwrap().eta, 1.0);

        let mut minus = truth.clone();
        let first = minus[0].mask.iter().position(|&m| m).unwrap();
        minus[0].mask[first] = false;
        assert_eq!(inclusion_volume(&minus, &truth).unwrap().eta, 1.0);

        let mut plus = truth.clone();
        let outside = plus[1].mask.iter().position(|&m| !m).unwrap();
        plus[1].mask[outside] = true;
        let n = (truth[0].count() + truth[1].count() + 1) as f64;
        assert_close!(inclusion_volume(&plus, &truth).unwrap().eta, (n - 1.0) / n, 1e-15);

        let empty: Vec<ReachMask3> = truth
            .iter()
            .map(|m| ReachMask3 {
                mask: vec![false; m.mask.len()],
                ..m.clone()
            })
            .collect();
        let inc = inclusion_volume(&empty, &truth).unwrap();
        assert!(inc.vacuous && inc.eta == 1.0);
        assert!(inclusion_volume(&truth[..1], &truth).is_err());
    }

    #[test]
    fn feasible_region_union() {
        let grid = Grid3::square(4.0, 17, 8).unwrap();
        let ell = sdf_target(&grid, 1.0);
        let vf = Arc::new(
            ValueField::new(grid, 1.0, [ell.data.clone(), ell.data.clone()].concat()).unwrap(),
        );
        let a = SafeSetAnchor {
            center: [0.0, 0.0],
            radius: 1.0,
            half_width: 4.0,
            provider: 0,
        };
        let b = SafeSetAnchor {
            center: [20.0, 0.0],
            ..a
        };
        let single = FeasibleRegion::new(&[(a, vf.clone())], 0.1).unwrap();
        // agreement is exact at raster nodes
        for p in [[0.0, 0.0], [0.5, 0.5], [1.0, 0.0], [0.5, 0.0], [-0.5, -0.5], [3.0, 3.0]] {
            let direct = single.members[0].mask.contains(p);
            assert_eq!(single.contains(p), direct, "{p:?}");
        }
        let both = FeasibleRegion::new(&[(a, vf.clone()), (b, vf.clone())], 0.1).unwrap();
        assert!(!single.contains([20.2, 0.1]));
        assert!(both.contains([20.2, 0.1]));
        assert!(!both.contains([10.0, 0.0]));
        assert!(FeasibleRegion::new(&[], 0.1).is_err());
    }

    #[test]
    fn rle_round_trip() {
        let m = ReachMask2::from_fn(fine_raster(1.0, 0.25), |p| p[0] > 0.1 || p[1] < -0.6);
        let rle = m.to_rle();
        assert_eq!(rle.decode(), m);
        let json = serde_json::to_string(&rle).unwrap();
        let back: RleMask = serde_json::from_str(&json).unwrap();
        assert_eq!(back.decode(), m);

        let dir = tempfile::tempdir().unwrap();
        m.write_pgm(&dir.path().join("m.pgm")).unwrap();
        let bytes = std::fs::read(dir.path().join("m.pgm")).unwrap();
        assert!(bytes.starts_with(b"P5\n9 9\n255\n"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn sublevel_is_monotone_in_epsilon(e1 in 0.0..1.0f64, de in 0.0..1.0f64, seed in 0u64..1000) {
                let grid = Grid3::square(2.0, 6, 4).unwrap();
                let vf = field_from(grid, 2, |s, k| (s.x * 1.7 + seed as f64).sin() + s.y * 0.3 - 0.1 * k as f64);
                let m1 = epsilon_sublevel(&vf, 0.5, e1).unwrap();
                let m2 = epsilon_sublevel(&vf, 0.5, e1 + de).unwrap();
                prop_assert!(m2.mask.iter().zip(&m1.mask).all(|(&b, &a)| !b || a));
                let flat = heading_agnostic(&vf, 0.5, e1, None).unwrap();
                let plane = grid.plane_len();
                for n in 0..plane {
                    let any = (0..grid.dims[2]).any(|k| m1.mask[k * plane + n]);
                    prop_assert_eq!(any, flat.mask[n]);
                }
            }
        }
    }
}
