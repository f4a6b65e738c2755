//! Periodic sampling grid on the unit torus, sampled fields, the unitary
//! two-dimensional FFT and interpolation of sampled fields at arbitrary points.
//!
//! Layout: a field on an `n x n` grid stores the value at the node
//! `(i / n, j / n)` at index `i * n + j`; `i` runs along `x`, `j` along `y`.
//! Frequencies are integers in `[-n/2, n/2)`. The transform is unitary:
//! `F(xi, eta) = n^{-1} sum f(i, j) e^{-2 pi i (xi i + eta j) / n}` and
//! `f(x, y) = n^{-1} sum F(xi, eta) e^{2 pi i (xi x + eta y)}`.
//!
//! The Nyquist coefficient is split evenly between `+n/2` and `-n/2`, so the
//! trigonometric interpolant of a real field is real. Symbols are sampled with
//! the same split (see [`Spectrum::apply_symbol`]).

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use once_cell::sync::Lazy;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusGrid {
    n: usize,
}

impl TorusGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::InvalidGridSize { n });
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `K` with `n = 2^K`.
    pub fn log2(&self) -> u32 {
        self.n.trailing_zeros()
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    pub fn point(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 / self.n as f64, j as f64 / self.n as f64)
    }

    /// Signed frequency of FFT bin `idx`, in `[-n/2, n/2)`.
    pub fn freq(&self, idx: usize) -> i64 {
        signed_freq(idx, self.n)
    }

    pub fn bin(&self, freq: i64) -> usize {
        freq.rem_euclid(self.n as i64) as usize
    }

    /// Admissible Littlewood-Paley scales `[0, K - 1]`.
    pub fn admissible_scales(&self) -> (i64, i64) {
        (0, self.log2() as i64 - 1)
    }

    /// Default experiment band `[2, K - 2]`.
    pub fn default_band(&self) -> (i64, i64) {
        (2, self.log2() as i64 - 2)
    }

    pub fn check_scale(&self, k: i64) -> Result<()> {
        let (lo, hi) = self.admissible_scales();
        if k < lo || k > hi {
            return Err(Error::ScaleOutOfRange { index: k, lo, hi });
        }
        Ok(())
    }

    pub fn ensure_same(&self, other: &TorusGrid) -> Result<()> {
        if self.n != other.n {
            return Err(Error::GridMismatch { expected: self.n, got: other.n });
        }
        Ok(())
    }
}

pub fn signed_freq(idx: usize, n: usize) -> i64 {
    if idx < n / 2 {
        idx as i64
    } else {
        idx as i64 - n as i64
    }
}

/// Representatives of bin `idx` with weights: the Nyquist bin is split into
/// `+n/2` and `-n/2` with weight one half each.
pub fn split_freqs(idx: usize, n: usize) -> ([(f64, f64); 2], usize) {
    if idx == n / 2 {
        let h = (n / 2) as f64;
        ([(h, 0.5), (-h, 0.5)], 2)
    } else {
        ([(signed_freq(idx, n) as f64, 1.0), (0.0, 0.0)], 1)
    }
}

/// Field sampled on the grid nodes (physical side).
#[derive(Clone, Debug, PartialEq)]
pub struct SampledField {
    grid: TorusGrid,
    data: Vec<C64>,
}

/// Unitary spectrum of a [`SampledField`].
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    grid: TorusGrid,
    data: Vec<C64>,
}

impl SampledField {
    pub fn new(grid: TorusGrid, data: Vec<C64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::Parse(format!(
                "field has {} samples, grid needs {}",
                data.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, data })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self { grid, data: vec![ZERO; grid.len()] }
    }

    pub fn from_fn(grid: TorusGrid, mut f: impl FnMut(f64, f64) -> C64) -> Self {
        let n = grid.n();
        let mut data = Vec::with_capacity(grid.len());
        for i in 0..n {
            for j in 0..n {
                let (x, y) = grid.point(i, j);
                data.push(f(x, y));
            }
        }
        Self { grid, data }
    }

    pub fn from_real_fn(grid: TorusGrid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        Self::from_fn(grid, |x, y| C64::new(f(x, y), 0.0))
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[self.grid.index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        let idx = self.grid.index(i, j);
        self.data[idx] = v;
    }

    /// `L^2` norm on the unit torus, `(n^{-2} sum |f|^2)^{1/2}`.
    pub fn norm(&self) -> f64 {
        (self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.grid.len() as f64).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `<self, other> = n^{-2} sum self * conj(other)`.
    pub fn inner(&self, other: &SampledField) -> C64 {
        let s: C64 = self.data.iter().zip(&other.data).map(|(a, b)| a * b.conj()).sum();
        s / self.grid.len() as f64
    }

    pub fn scale(&self, c: C64) -> SampledField {
        self.map(|z| z * c)
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> SampledField {
        SampledField { grid: self.grid, data: self.data.iter().map(|&z| f(z)).collect() }
    }

    pub fn add(&self, other: &SampledField) -> SampledField {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &SampledField) -> SampledField {
        self.zip(other, |a, b| a - b)
    }

    pub fn zip(&self, other: &SampledField, f: impl Fn(C64, C64) -> C64) -> SampledField {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        SampledField {
            grid: self.grid,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &SampledField) {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn conj(&self) -> SampledField {
        self.map(|z| z.conj())
    }

    /// Writes the flat binary layout: `n^2` records of two little-endian
    /// `f32` (re, im), record `(i, j)` at byte offset `8 (i n + j)`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let mut buf = Vec::with_capacity(8 * self.data.len());
        for z in &self.data {
            buf.extend_from_slice(&(z.re as f32).to_le_bytes());
            buf.extend_from_slice(&(z.im as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<SampledField> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        if buf.len() % 8 != 0 {
            return Err(Error::Parse("binary field length not a multiple of 8".into()));
        }
        let count = buf.len() / 8;
        let n = (count as f64).sqrt().round() as usize;
        if n * n != count {
            return Err(Error::Parse(format!("{count} samples is not a square grid")));
        }
        let grid = TorusGrid::new(n)?;
        let data = buf
            .chunks_exact(8)
            .map(|c| {
                let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
                let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
                C64::new(re as f64, im as f64)
            })
            .collect();
        SampledField::new(grid, data)
    }

    /// CSV with header `i,j,re,im`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.n();
        writeln!(w, "i,j,re,im")?;
        for i in 0..n {
            for j in 0..n {
                let z = self.get(i, j);
                writeln!(w, "{i},{j},{:.17e},{:.17e}", z.re, z.im)?;
            }
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<SampledField> {
        let mut rows = Vec::new();
        for (lineno, line) in BufReader::new(r).lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with('i')) {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 4 {
                return Err(Error::Parse(format!("line {}: expected 4 columns", lineno + 1)));
            }
            let p = |s: &str| -> Result<f64> {
                s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            rows.push((p(parts[0])? as usize, p(parts[1])? as usize, p(parts[2])?, p(parts[3])?));
        }
        let n = (rows.len() as f64).sqrt().round() as usize;
        if n * n != rows.len() {
            return Err(Error::Parse(format!("{} rows is not a square grid", rows.len())));
        }
        let grid = TorusGrid::new(n)?;
        let mut f = SampledField::zeros(grid);
        for (i, j, re, im) in rows {
            if i >= n || j >= n {
                return Err(Error::Parse(format!("index ({i}, {j}) out of range")));
            }
            f.set(i, j, C64::new(re, im));
        }
        Ok(f)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let w = std::io::BufWriter::new(file);
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => self.write_csv(w),
            _ => self.write_binary(w),
        }
    }

    pub fn load(path: &Path) -> Result<SampledField> {
        let file = std::fs::File::open(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => SampledField::read_csv(file),
            _ => SampledField::read_binary(file),
        }
    }
}

impl Spectrum {
    pub fn new(grid: TorusGrid, data: Vec<C64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::Parse("spectrum length does not match grid".into()));
        }
        Ok(Self { grid, data })
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    /// Coefficient at signed frequency `(xi, eta)`.
    pub fn at(&self, xi: i64, eta: i64) -> C64 {
        self.data[self.grid.index(self.grid.bin(xi), self.grid.bin(eta))]
    }

    pub fn inverse(&self) -> SampledField {
        let mut data = self.data.clone();
        fft2(&mut data, self.grid.n(), false);
        SampledField { grid: self.grid, data }
    }

    /// Multiplies by a symbol `m(xi, eta)`. Nyquist bins receive the average
    /// of `m` over their split representatives.
    pub fn apply_symbol(&self, m: impl Fn(f64, f64) -> C64) -> Spectrum {
        let mut out = self.clone();
        out.apply_symbol_in_place(m);
        out
    }

    pub fn apply_symbol_in_place(&mut self, m: impl Fn(f64, f64) -> C64) {
        let n = self.grid.n();
        for a in 0..n {
            let (xs, nx) = split_freqs(a, n);
            for b in 0..n {
                let (ys, ny) = split_freqs(b, n);
                let mut w = ZERO;
                for &(xi, wx) in &xs[..nx] {
                    for &(eta, wy) in &ys[..ny] {
                        w += m(xi, eta) * (wx * wy);
                    }
                }
                self.data[a * n + b] *= w;
            }
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Unitary forward transform.
pub fn spectral_transform(f: &SampledField) -> Spectrum {
    let mut data = f.data.clone();
    fft2(&mut data, f.n(), true);
    Spectrum { grid: f.grid, data }
}

/// Applies a symbol through the FFT.
pub fn apply_multiplier(f: &SampledField, m: impl Fn(f64, f64) -> C64) -> SampledField {
    let mut s = spectral_transform(f);
    s.apply_symbol_in_place(m);
    s.inverse()
}

static PLANS: Lazy<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

pub fn fft_plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    let mut cache = PLANS.lock().expect("fft plan cache poisoned");
    cache
        .entry((n, forward))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if forward {
                planner.plan_fft_forward(n)
            } else {
                planner.plan_fft_inverse(n)
            }
        })
        .clone()
}

/// Unnormalized 1-D transform in place.
pub fn fft1(data: &mut [C64], forward: bool) {
    fft_plan(data.len(), forward).process(data);
}

/// Unitary 2-D transform of a row-major `n x n` array.
pub fn fft2(data: &mut [C64], n: usize, forward: bool) {
    let plan = fft_plan(n, forward);
    // band-limited inputs often have many zero rows; skip them
    let mut scratch = vec![ZERO; plan.get_inplace_scratch_len()];
    for row in data.chunks_mut(n) {
        if row.iter().any(|z| *z != ZERO) {
            plan.process_with_scratch(row, &mut scratch);
        }
    }
    transpose_in_place(data, n);
    plan.process(data);
    transpose_in_place(data, n);
    let s = 1.0 / n as f64;
    for z in data.iter_mut() {
        *z *= s;
    }
}

fn transpose_in_place(data: &mut [C64], n: usize) {
    const B: usize = 16;
    for bi in (0..n).step_by(B) {
        for bj in (bi..n).step_by(B) {
            for i in bi..(bi + B).min(n) {
                let start = if bi == bj { i + 1 } else { bj };
                for j in start..(bj + B).min(n) {
                    data.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

/// Interpolation schemes for off-grid evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Exact evaluation of the trigonometric interpolant.
    #[default]
    Trigonometric,
    /// Periodic bilinear; fast, low accuracy.
    Bilinear,
}

impl Interpolation {
    pub fn is_low_accuracy(&self) -> bool {
        matches!(self, Interpolation::Bilinear)
    }
}

/// Evaluates a field at arbitrary points of the plane (periodically).
pub struct FieldEvaluator {
    grid: TorusGrid,
    mode: Interpolation,
    samples: Vec<C64>,
    // Nonzero modes (xi, eta, coefficient / n) of the trigonometric interpolant.
    modes: Vec<(f64, f64, C64)>,
}

impl FieldEvaluator {
    pub fn new(f: &SampledField, mode: Interpolation) -> Self {
        let mut modes = Vec::new();
        if mode == Interpolation::Trigonometric {
            let s = spectral_transform(f);
            let n = f.n();
            let scale = s.data.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let cut = scale * 1e-15;
            for a in 0..n {
                let (xs, nx) = split_freqs(a, n);
                for b in 0..n {
                    let c = s.data[a * n + b];
                    if c.norm() <= cut {
                        continue;
                    }
                    let (ys, ny) = split_freqs(b, n);
                    for &(xi, wx) in &xs[..nx] {
                        for &(eta, wy) in &ys[..ny] {
                            modes.push((xi, eta, c * (wx * wy / n as f64)));
                        }
                    }
                }
            }
        }
        Self { grid: f.grid(), mode, samples: f.data.clone(), modes }
    }

    pub fn mode(&self) -> Interpolation {
        self.mode
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    /// Nonzero modes `(xi, eta, c)` with `f(x, y) = sum c e^{2 pi i (xi x + eta y)}`;
    /// empty in bilinear mode.
    pub fn modes(&self) -> &[(f64, f64, C64)] {
        &self.modes
    }

    pub fn eval(&self, x: f64, y: f64) -> C64 {
        match self.mode {
            Interpolation::Trigonometric => {
                let mut acc = ZERO;
                for &(xi, eta, c) in &self.modes {
                    let ph = 2.0 * PI * (xi * x + eta * y);
                    acc += c * C64::new(ph.cos(), ph.sin());
                }
                acc
            }
            Interpolation::Bilinear => {
                let n = self.grid.n();
                let fx = x * n as f64;
                let fy = y * n as f64;
                let x0 = fx.floor();
                let y0 = fy.floor();
                let tx = fx - x0;
                let ty = fy - y0;
                let i0 = (x0 as i64).rem_euclid(n as i64) as usize;
                let j0 = (y0 as i64).rem_euclid(n as i64) as usize;
                let i1 = (i0 + 1) % n;
                let j1 = (j0 + 1) % n;
                let v = |i: usize, j: usize| self.samples[i * n + j];
                v(i0, j0) * ((1.0 - tx) * (1.0 - ty))
                    + v(i1, j0) * (tx * (1.0 - ty))
                    + v(i0, j1) * ((1.0 - tx) * ty)
                    + v(i1, j1) * (tx * ty)
            }
        }
    }
}

/// Evaluates `f` at the given points.
pub fn interpolate(f: &SampledField, points: &[(f64, f64)], mode: Interpolation) -> Vec<C64> {
    let ev = FieldEvaluator::new(f, mode);
    points.iter().map(|&(x, y)| ev.eval(x, y)).collect()
}

/// Evaluation of the 1-periodic trigonometric interpolant of `n` uniform
/// samples (sample `q` at `t = q / n`) at fixed points, with its adjoint.
///
/// Uses Gaussian gridding on a twice oversampled grid, so a line costs
/// `O(n log n)` instead of `O(n^2)`. Relative error is near `1e-13`; the
/// adjoint is the exact adjoint of the discretized map.
#[derive(Clone, Debug)]
pub struct TrigLine {
    n: usize,
    points: Vec<f64>,
}

/// Half width of the spreading stencil, in oversampled grid cells.
const SPREAD: i64 = 14;

struct Gridding {
    mr: usize,
    tau: f64,
    // deconvolution factors for modes -h..=h
    deconv: Vec<f64>,
    // exp(-j^2 d^2 / (4 tau)) for j = -SPREAD..=SPREAD
    tail: Vec<f64>,
}

impl Gridding {
    fn new(n: usize) -> Self {
        let mr = 2 * n;
        let modes = (n + 1) as f64;
        let r = mr as f64 / modes;
        let tau = PI * SPREAD as f64 / (modes * modes * r * (r - 0.5));
        let h = (n / 2) as i64;
        let deconv = (-h..=h).map(|k| (PI / tau).sqrt() * ((k * k) as f64 * tau).exp()).collect();
        let d = 2.0 * PI / mr as f64;
        let tail = (-SPREAD..=SPREAD).map(|j| (-((j * j) as f64) * d * d / (4.0 * tau)).exp()).collect();
        Self { mr, tau, deconv, tail }
    }

    /// Nearest grid index and the stencil weights for the point `t`.
    fn stencil(&self, t: f64, w: &mut [f64]) -> i64 {
        let d = 2.0 * PI / self.mr as f64;
        let x = 2.0 * PI * t;
        let m0 = (x / d).round() as i64;
        let delta = x - m0 as f64 * d;
        let base = (-delta * delta / (4.0 * self.tau)).exp();
        let step = (delta * d / (2.0 * self.tau)).exp();
        let mut p = base * step.powi(-(SPREAD as i32));
        for (j, wj) in w.iter_mut().enumerate() {
            *wj = p * self.tail[j];
            p *= step;
        }
        m0
    }
}

impl TrigLine {
    pub fn new(n: usize, points: Vec<f64>) -> Self {
        Self { n, points }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn eval(&self, v: &[C64]) -> Vec<C64> {
        let n = self.n;
        assert_eq!(v.len(), n);
        let gr = Gridding::new(n);
        let mr = gr.mr;
        let h = n / 2;
        let mut coef = v.to_vec();
        fft1(&mut coef, true);
        let inv = 1.0 / n as f64;
        // modes -h..=h with the Nyquist coefficient split evenly
        let mut grid = vec![ZERO; mr];
        for k in -(h as i64)..=(h as i64) {
            let c = if k.unsigned_abs() as usize == h {
                coef[h] * 0.5
            } else {
                coef[k.rem_euclid(n as i64) as usize]
            };
            grid[k.rem_euclid(mr as i64) as usize] = c * (inv * gr.deconv[(k + h as i64) as usize]);
        }
        fft1(&mut grid, false);
        let scale = 1.0 / mr as f64;
        let mut w = vec![0.0; (2 * SPREAD + 1) as usize];
        self.points
            .iter()
            .map(|&t| {
                let m0 = gr.stencil(t, &mut w);
                let mut acc = ZERO;
                for (j, &wj) in w.iter().enumerate() {
                    let m = (m0 + j as i64 - SPREAD).rem_euclid(mr as i64) as usize;
                    acc += grid[m] * wj;
                }
                acc * scale
            })
            .collect()
    }

    pub fn eval_adjoint(&self, wv: &[C64]) -> Vec<C64> {
        let n = self.n;
        assert_eq!(wv.len(), self.points.len());
        let gr = Gridding::new(n);
        let mr = gr.mr;
        let h = n / 2;
        let mut grid = vec![ZERO; mr];
        let mut w = vec![0.0; (2 * SPREAD + 1) as usize];
        for (&t, &wp) in self.points.iter().zip(wv) {
            let m0 = gr.stencil(t, &mut w);
            for (j, &wj) in w.iter().enumerate() {
                let m = (m0 + j as i64 - SPREAD).rem_euclid(mr as i64) as usize;
                grid[m] += wp * wj;
            }
        }
        fft1(&mut grid, true);
        let scale = 1.0 / mr as f64;
        let mut coef = vec![ZERO; n];
        for k in -(h as i64)..=(h as i64) {
            let c = grid[k.rem_euclid(mr as i64) as usize] * (scale * gr.deconv[(k + h as i64) as usize]);
            if k.unsigned_abs() as usize == h {
                coef[h] += c * 0.5;
            } else {
                coef[k.rem_euclid(n as i64) as usize] = c;
            }
        }
        fft1(&mut coef, false);
        let inv = 1.0 / n as f64;
        for c in coef.iter_mut() {
            *c *= inv;
        }
        coef
    }
}

pub fn cis(theta: f64) -> C64 {
    C64::new(theta.cos(), theta.sin())
}
