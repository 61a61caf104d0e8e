//! Spectral neural operator weights (`FNOW` files) and forward inference.
//!
//! The byte layout and the exact forward definition are documented in
//! `docs/fnow_format.md`; a trainer has to reproduce both to get parity.

use std::io::{Read, Write};
use std::path::Path;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::SurrogateError;

pub const FNOW_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"FNOW";
/// Input channels: `g`, x, y, θ/π, t/T.
pub const INPUT_CHANNELS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralLayer {
    /// `d_v × d_v`, row-major (output row, input column).
    pub w: Vec<f32>,
    pub w_bias: Vec<f32>,
    /// `(k1, k2, d_in, d_out)`, last index fastest.
    pub r_re: Vec<f32>,
    pub r_im: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralWeights {
    pub d_v: usize,
    pub d_a: usize,
    pub d_y: usize,
    pub k1: usize,
    pub k2: usize,
    /// `d_v × d_a`, row-major.
    pub lift: Vec<f32>,
    pub lift_bias: Vec<f32>,
    pub layers: Vec<SpectralLayer>,
    /// `d_y × d_v`, row-major.
    pub proj: Vec<f32>,
    pub proj_bias: Vec<f32>,
}

impl SpectralWeights {
    /// All-zero weights with the given shape.
    pub fn zeros(blocks: usize, d_v: usize, k1: usize, k2: usize) -> Self {
        let spectral = k1 * k2 * d_v * d_v;
        Self {
            d_v,
            d_a: INPUT_CHANNELS,
            d_y: 1,
            k1,
            k2,
            lift: vec![0.0; d_v * INPUT_CHANNELS],
            lift_bias: vec![0.0; d_v],
            layers: (0..blocks)
                .map(|_| SpectralLayer {
                    w: vec![0.0; d_v * d_v],
                    w_bias: vec![0.0; d_v],
                    r_re: vec![0.0; spectral],
                    r_im: vec![0.0; spectral],
                })
                .collect(),
            proj: vec![0.0; d_v],
            proj_bias: vec![0.0],
        }
    }

    pub fn blocks(&self) -> usize {
        self.layers.len()
    }

    fn sections(&self) -> Vec<(String, &[f32])> {
        let mut out: Vec<(String, &[f32])> = vec![
            ("lift matrix".into(), &self.lift),
            ("lift bias".into(), &self.lift_bias),
        ];
        for (b, l) in self.layers.iter().enumerate() {
            out.push((format!("layer {b} pointwise matrix"), &l.w));
            out.push((format!("layer {b} pointwise bias"), &l.w_bias));
            out.push((format!("layer {b} spectral real part"), &l.r_re));
            out.push((format!("layer {b} spectral imaginary part"), &l.r_im));
        }
        out.push(("projection matrix".into(), &self.proj));
        out.push(("projection bias".into(), &self.proj_bias));
        out
    }

    pub fn validate(&self) -> Result<(), SurrogateError> {
        let (d_v, d_a, d_y) = (self.d_v, self.d_a, self.d_y);
        let spectral = self.k1 * self.k2 * d_v * d_v;
        let mut expected = vec![d_v * d_a, d_v];
        for _ in &self.layers {
            expected.extend([d_v * d_v, d_v, spectral, spectral]);
        }
        expected.extend([d_y * d_v, d_y]);
        for ((name, data), n) in self.sections().into_iter().zip(expected) {
            if data.len() != n {
                return Err(SurrogateError::Dimension(format!(
                    "{name} has {} entries, expected {n}",
                    data.len()
                )));
            }
            if data.iter().any(|v| !v.is_finite()) {
                return Err(SurrogateError::NonFinite(name));
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FNOW_VERSION.to_le_bytes());
        for v in [self.blocks(), self.d_v, self.d_a, self.d_y, self.k1, self.k2] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for (_, data) in self.sections() {
            for v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SurrogateError> {
        let mut pos = 0usize;
        let mut take = |n: usize, section: &str| -> Result<&[u8], SurrogateError> {
            if pos + n > bytes.len() {
                return Err(SurrogateError::Truncated(section.to_string()));
            }
            let s = &bytes[pos..pos + n];
            pos += n;
            Ok(s)
        };
        if take(4, "magic")? != MAGIC {
            return Err(SurrogateError::Format("bad magic".into()));
        }
        let mut header = [0usize; 7];
        for (i, h) in header.iter_mut().enumerate() {
            let name = if i == 0 { "version" } else { "header" };
            *h = u32::from_le_bytes(take(4, name)?.try_into().unwrap()) as usize;
        }
        let [version, blocks, d_v, d_a, d_y, k1, k2] = header;
        if version as u32 != FNOW_VERSION {
            return Err(SurrogateError::Format(format!("unsupported version {version}")));
        }
        if d_v == 0 || d_a == 0 || d_y == 0 || k1 == 0 || k2 == 0 || blocks == 0 {
            return Err(SurrogateError::Format("zero dimension in header".into()));
        }
        let mut read = |n: usize, section: String| -> Result<Vec<f32>, SurrogateError> {
            let raw = take(4 * n, &section)?;
            Ok(raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect())
        };
        let lift = read(d_v * d_a, "lift matrix".into())?;
        let lift_bias = read(d_v, "lift bias".into())?;
        let spectral = k1 * k2 * d_v * d_v;
        let mut layers = Vec::with_capacity(blocks);
        for b in 0..blocks {
            layers.push(SpectralLayer {
                w: read(d_v * d_v, format!("layer {b} pointwise matrix"))?,
                w_bias: read(d_v, format!("layer {b} pointwise bias"))?,
                r_re: read(spectral, format!("layer {b} spectral real part"))?,
                r_im: read(spectral, format!("layer {b} spectral imaginary part"))?,
            });
        }
        let proj = read(d_y * d_v, "projection matrix".into())?;
        let proj_bias = read(d_y, "projection bias".into())?;
        if pos != bytes.len() {
            return Err(SurrogateError::Format("trailing bytes".into()));
        }
        let w = Self {
            d_v,
            d_a,
            d_y,
            k1,
            k2,
            lift,
            lift_bias,
            layers,
            proj,
            proj_bias,
        };
        w.validate()?;
        Ok(w)
    }
}

pub fn save_weights(w: &SpectralWeights, path: &Path) -> Result<(), SurrogateError> {
    w.validate()?;
    std::fs::File::create(path)?.write_all(&w.to_bytes())?;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<SpectralWeights, SurrogateError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    SpectralWeights::from_bytes(&bytes)
}

/// Planar input slice on a uniform node grid spanning the local domain,
/// x fastest. Coordinate channels are derived from node indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice2 {
    pub nx: usize,
    pub ny: usize,
    pub data: Vec<f64>,
}

struct Fft2 {
    nx: usize,
    ny: usize,
    fwd_x: std::sync::Arc<dyn rustfft::Fft<f64>>,
    fwd_y: std::sync::Arc<dyn rustfft::Fft<f64>>,
    inv_x: std::sync::Arc<dyn rustfft::Fft<f64>>,
    inv_y: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl Fft2 {
    fn new(nx: usize, ny: usize) -> Self {
        let mut p = FftPlanner::new();
        Self {
            nx,
            ny,
            fwd_x: p.plan_fft_forward(nx),
            fwd_y: p.plan_fft_forward(ny),
            inv_x: p.plan_fft_inverse(nx),
            inv_y: p.plan_fft_inverse(ny),
        }
    }

    /// Unnormalised forward DFT, keeping modes `kx < k1`, `ky < k2` as
    /// `out[kx·k2 + ky]`.
    fn forward_low(&self, real: &[f64], k1: usize, k2: usize, out: &mut [Complex64]) {
        let (nx, ny) = (self.nx, self.ny);
        let mut rows: Vec<Complex64> = real.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        for row in rows.chunks_exact_mut(nx) {
            self.fwd_x.process(row);
        }
        let mut col = vec![Complex64::default(); ny];
        for kx in 0..k1 {
            for (j, c) in col.iter_mut().enumerate() {
                *c = rows[j * nx + kx];
            }
            self.fwd_y.process(&mut col);
            out[kx * k2..kx * k2 + k2].copy_from_slice(&col[..k2]);
        }
    }

    /// Real part of the inverse DFT of a spectrum supported on `kx < k1`,
    /// `ky < k2`, scaled by `1/(nx·ny)`.
    fn inverse_low(&self, spec: &[Complex64], k1: usize, k2: usize, out: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        let mut grid = vec![Complex64::default(); nx * ny];
        let mut col = vec![Complex64::default(); ny];
        for kx in 0..k1 {
            col.iter_mut().for_each(|c| *c = Complex64::default());
            col[..k2].copy_from_slice(&spec[kx * k2..kx * k2 + k2]);
            self.inv_y.process(&mut col);
            for (j, c) in col.iter().enumerate() {
                grid[j * nx + kx] = *c;
            }
        }
        for row in grid.chunks_exact_mut(nx) {
            self.inv_x.process(row);
        }
        let scale = 1.0 / (nx * ny) as f64;
        for (o, c) in out.iter_mut().zip(&grid) {
            *o = c.re * scale;
        }
    }
}

/// Forward pass on one planar slice at heading `theta` and horizon `t`
/// (normalised by `horizon`).
pub fn fno_forward(
    w: &SpectralWeights,
    g: &Slice2,
    theta: f64,
    t: f64,
    horizon: f64,
) -> Result<Vec<f64>, SurrogateError> {
    w.validate()?;
    if w.d_a != INPUT_CHANNELS || w.d_y != 1 {
        return Err(SurrogateError::Dimension(format!(
            "expected {INPUT_CHANNELS} input and 1 output channel, got {} and {}",
            w.d_a, w.d_y
        )));
    }
    let (nx, ny) = (g.nx, g.ny);
    if nx < 2 || ny < 2 || g.data.len() != nx * ny {
        return Err(SurrogateError::Dimension("slice shape does not match its data".into()));
    }
    if w.k1 > nx / 2 + 1 || w.k2 > ny / 2 + 1 {
        return Err(SurrogateError::Dimension(format!(
            "modes ({}, {}) exceed what a {nx}×{ny} slice resolves",
            w.k1, w.k2
        )));
    }
    if g.data.iter().any(|v| !v.is_finite()) {
        return Err(SurrogateError::NonFinite("input slice".into()));
    }
    let n = nx * ny;
    let d_v = w.d_v;
    let mut inputs = vec![vec![0.0; n]; INPUT_CHANNELS];
    for j in 0..ny {
        for i in 0..nx {
            let p = j * nx + i;
            inputs[0][p] = g.data[p];
            inputs[1][p] = 2.0 * (i as f64 / (nx - 1) as f64) - 1.0;
            inputs[2][p] = 2.0 * (j as f64 / (ny - 1) as f64) - 1.0;
            inputs[3][p] = theta / std::f64::consts::PI;
            inputs[4][p] = if horizon > 0.0 { t / horizon } else { 0.0 };
        }
    }
    let mut v = vec![vec![0.0; n]; d_v];
    for (c, vc) in v.iter_mut().enumerate() {
        let b = w.lift_bias[c] as f64;
        for p in 0..n {
            let mut acc = b;
            for (a, input) in inputs.iter().enumerate() {
                acc += w.lift[c * INPUT_CHANNELS + a] as f64 * input[p];
            }
            vc[p] = acc;
        }
    }
    let fft = Fft2::new(nx, ny);
    let (k1, k2) = (w.k1, w.k2);
    let modes = k1 * k2;
    let mut spectra = vec![Complex64::default(); d_v * modes];
    let mut mixed = vec![Complex64::default(); modes];
    let blocks = w.layers.len();
    for (b, layer) in w.layers.iter().enumerate() {
        for (i, vi) in v.iter().enumerate() {
            fft.forward_low(vi, k1, k2, &mut spectra[i * modes..(i + 1) * modes]);
        }
        let mut next = vec![vec![0.0; n]; d_v];
        for (o, out) in next.iter_mut().enumerate() {
            for (m, slot) in mixed.iter_mut().enumerate() {
                let mut acc = Complex64::default();
                for i in 0..d_v {
                    let r = (m * d_v + i) * d_v + o;
                    let coef = Complex64::new(layer.r_re[r] as f64, layer.r_im[r] as f64);
                    acc += spectra[i * modes + m] * coef;
                }
                *slot = acc;
            }
            fft.inverse_low(&mixed, k1, k2, out);
            let bias = layer.w_bias[o] as f64;
            let row = &layer.w[o * d_v..(o + 1) * d_v];
            for (p, value) in out.iter_mut().enumerate() {
                let mut acc = bias;
                for (i, vi) in v.iter().enumerate() {
                    acc += row[i] as f64 * vi[p];
                }
                *value += acc;
                if b + 1 < blocks && *value < 0.0 {
                    *value = 0.0;
                }
            }
        }
        v = next;
    }
    let mut y = vec![w.proj_bias[0] as f64; n];
    for (c, vc) in v.iter().enumerate() {
        let pw = w.proj[c] as f64;
        for (p, yp) in y.iter_mut().enumerate() {
            *yp += pw * vc[p];
        }
    }
    Ok(y)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_weights(seed: u64, blocks: usize, d_v: usize, k1: usize, k2: usize) -> SpectralWeights {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = SpectralWeights::zeros(blocks, d_v, k1, k2);
        let mut fill = |v: &mut Vec<f32>, s: f32| v.iter_mut().for_each(|x| *x = rng.random_range(-s..s));
        fill(&mut w.lift, 0.5);
        fill(&mut w.lift_bias, 0.1);
        for l in &mut w.layers {
            fill(&mut l.w, 0.3);
            fill(&mut l.w_bias, 0.1);
            fill(&mut l.r_re, 0.05);
            fill(&mut l.r_im, 0.05);
        }
        fill(&mut w.proj, 0.3);
        fill(&mut w.proj_bias, 0.1);
        w
    }

    fn smooth_slice(n: usize) -> Slice2 {
        let mut data = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                let x = -10.0 + 20.0 * i as f64 / (n - 1) as f64;
                let y = -10.0 + 20.0 * j as f64 / (n - 1) as f64;
                data.push(1.5 - (x - 2.0).hypot(y + 1.0) * 0.3 + 0.2 * (0.3 * x).sin());
            }
        }
        Slice2 { nx: n, ny: n, data }
    }

    /// Direct DFT, independent of rustfft.
    fn naive_low(real: &[f64], nx: usize, ny: usize, k1: usize, k2: usize) -> Vec<Complex64> {
        let mut out = Vec::new();
        for kx in 0..k1 {
            for ky in 0..k2 {
                let mut acc = Complex64::default();
                for j in 0..ny {
                    for i in 0..nx {
                        let ang = -2.0 * std::f64::consts::PI
                            * (kx as f64 * i as f64 / nx as f64 + ky as f64 * j as f64 / ny as f64);
                        acc += Complex64::from_polar(real[j * nx + i], ang);
                    }
                }
                out.push(acc);
            }
        }
        out
    }

    #[test]
    fn fft_helpers_match_naive_dft() {
        let (nx, ny, k1, k2) = (8, 6, 3, 2);
        let real: Vec<f64> = (0..nx * ny).map(|i| ((i * 7 % 11) as f64).sin()).collect();
        let fft = Fft2::new(nx, ny);
        let mut fast = vec![Complex64::default(); k1 * k2];
        fft.forward_low(&real, k1, k2, &mut fast);
        for (a, b) in fast.iter().zip(naive_low(&real, nx, ny, k1, k2)) {
            assert!((a - b).norm() < 1e-9);
        }
        // inverse of a single mode is a plane wave of amplitude 1/(nx·ny)
        let mut spec = vec![Complex64::default(); k1 * k2];
        spec[k2 + 1] = Complex64::new(48.0, 0.0);
        let mut out = vec![0.0; nx * ny];
        fft.inverse_low(&spec, k1, k2, &mut out);
        for j in 0..ny {
            for i in 0..nx {
                let ang = 2.0 * std::f64::consts::PI * (i as f64 / nx as f64 + j as f64 / ny as f64);
                assert_close!(out[j * nx + i], ang.cos(), 1e-12);
            }
        }
    }

    #[test]
    fn zero_weights_give_zero() {
        let w = SpectralWeights::zeros(2, 4, 3, 3);
        let y = fno_forward(&w, &smooth_slice(16), 0.3, 2.0, 8.0).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_passthrough() {
        let mut w = SpectralWeights::zeros(1, 3, 2, 2);
        w.lift[0] = 1.0; // channel 0 <- g
        for c in 0..3 {
            w.layers[0].w[c * 3 + c] = 1.0;
        }
        w.proj[0] = 1.0;
        let s = smooth_slice(12);
        let y = fno_forward(&w, &s, -1.0, 4.0, 8.0).unwrap();
        for (a, b) in y.iter().zip(&s.data) {
            assert_close!(*a, *b, 1e-12);
        }
        assert!(s.data.iter().any(|&v| v < 0.0), "passthrough must keep negatives");
    }

    #[test]
    fn resolution_transfer() {
        let w = random_weights(1, 2, 6, 4, 4);
        let coarse = fno_forward(&w, &smooth_slice(64), 0.5, 3.0, 8.0).unwrap();
        let fine = fno_forward(&w, &smooth_slice(127), 0.5, 3.0, 8.0).unwrap();
        // shared nodes: every other fine node coincides with a coarse one
        let mut num = 0.0;
        let mut den = 0.0;
        // 64 nodes span 63 intervals, 127 nodes span 126: node i ↔ fine 2i
        for j in 0..64 {
            for i in 0..64 {
                let c = coarse[j * 64 + i];
                let f = fine[(2 * j) * 127 + 2 * i];
                num += (c - f) * (c - f);
                den += c * c;
            }
        }
        let rel = (num / den).sqrt();
        assert!(rel < 0.05, "relative L2 difference {rel}");
    }

    #[test]
    fn weight_file_round_trip() {
        let w = random_weights(2, 3, 5, 3, 2);
        let bytes = w.to_bytes();
        let back = SpectralWeights::from_bytes(&bytes).unwrap();
        assert_eq!(back, w);
        assert_eq!(back.to_bytes(), bytes);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.fnow");
        save_weights(&w, &p).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), bytes);
        assert_eq!(load_weights(&p).unwrap(), w);
    }

    #[test]
    fn damaged_weight_files() {
        let w = random_weights(3, 2, 4, 2, 2);
        let bytes = w.to_bytes();
        let mut bad = bytes.clone();
        bad[1] = b'X';
        assert!(matches!(SpectralWeights::from_bytes(&bad), Err(SurrogateError::Format(_))));
        let cut = bytes.len() - 4 * 4 - 2;
        match SpectralWeights::from_bytes(&bytes[..cut]) {
            Err(SurrogateError::Truncated(s)) => assert_eq!(s, "projection matrix"),
            other => panic!("{other:?}"),
        }
        let header = 4 + 7 * 4;
        match SpectralWeights::from_bytes(&bytes[..header + 8]) {
            Err(SurrogateError::Truncated(s)) => assert_eq!(s, "lift matrix"),
            other => panic!("{other:?}"),
        }
        let mut nan = w.clone();
        nan.layers[1].r_im[0] = f32::NAN;
        assert!(matches!(
            SpectralWeights::from_bytes(&nan.to_bytes()),
            Err(SurrogateError::NonFinite(_))
        ));
    }
}
