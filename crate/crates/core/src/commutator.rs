//! Per-tile quantities behind the commutator estimate: curve windows
//! `J(x, s)`, window averages `[h]`, frozen-slope packets, and the pointwise,
//! single-term and embedding bounds.
//!
//! Everything is measured in the chart of the curve `Gamma_x` (the horizontal
//! axis parallel to `(1, u(x))`, the curve the graph `x' = g_x(y')`). Curve
//! windows use the tile strip: a curve point with label `x` lies in the
//! adapted tile when it lies in the strip of the tile and `x` is in `P(s)`.
//!
//! The frozen packet `phi_s^x` is the single-scale operator along the
//! constant direction `(1, u(x))` applied to `phi_s`, restricted to the line
//! `y' -> (tau y' + b, y')`. The restriction of a trigonometric polynomial to
//! a line is a finite exponential sum, so the one-dimensional projection
//! `P_k` of it is evaluated mode by mode, without truncating the line.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::beta::{deviation_from, minimax_line, MinimaxLine};
use crate::directional::DirectionalOperator;
use crate::error::{Error, Result};
use crate::family::{CurveChart, DirectionField, LipschitzFamily};
use crate::grid::{fft1, FieldEvaluator, Interpolation, SampledField, C64, ZERO};
use crate::numerics::gauss_legendre_on;
use crate::profile::{psi0, reproducing};
use crate::tiles::{DirectionInterval, PacketBank, Tile};

/// Exponent `N` of the decay majorants.
pub const DECAY_POWER: i32 = 4;

/// Curve samples per unit of height used for windows and betas.
const CURVE_SAMPLES: usize = 4096;

fn bracket(a: f64) -> f64 {
    1.0 + a.abs()
}

fn wrap(d: f64) -> f64 {
    d - d.round()
}

/// A curve `Gamma_x` with its chart, sampled densely by height.
#[derive(Clone, Debug)]
pub struct AnchoredCurve {
    family: LipschitzFamily,
    anchor: f64,
    u: f64,
    chart: CurveChart,
}

impl AnchoredCurve {
    pub fn new(family: &LipschitzFamily, dir: &DirectionField, anchor: f64) -> Self {
        let u = dir.eval(anchor);
        Self { family: family.clone(), anchor, u, chart: family.chart(anchor, u) }
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    /// `u(x)`, the frozen slope.
    pub fn slope(&self) -> f64 {
        self.u
    }

    pub fn chart(&self) -> &CurveChart {
        &self.chart
    }

    /// Physical point of the curve at height `y~`.
    pub fn point(&self, yt: f64) -> (f64, f64) {
        (self.family.g(self.anchor, yt), yt)
    }

    /// Graph samples `(y', g_x(y'))` with `y'` in `[lo, hi]`.
    pub fn graph_samples(&self, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        let c = self.chart.period();
        // y' = y~ cos - g sin and |g - anchor| is small, so this height range covers [lo, hi]
        let s = self.chart.theta().sin();
        let t0 = (lo + self.anchor * s) / c - 0.1;
        let t1 = (hi + self.anchor * s) / c + 0.1;
        let m = ((t1 - t0) * CURVE_SAMPLES as f64).ceil().max(16.0) as usize;
        (0..=m)
            .map(|q| {
                let (xp, yp) = self.chart.graph_at_height(t0 + (t1 - t0) * q as f64 / m as f64);
                (yp, xp)
            })
            .filter(|p| p.0 >= lo && p.0 <= hi)
            .collect()
    }
}

/// `J(x, s)`, the chart-ordinate interval of the curve inside the tile strip.
pub fn curve_window(curve: &AnchoredCurve, tile: &Tile) -> Result<(f64, f64)> {
    let (cx, cy) = tile.center();
    let (sigma, w) = (tile.slope(), tile.width());
    let strip = |yt: f64| {
        let (x, y) = curve.point(yt);
        let dx = wrap(x - cx);
        (y - cy - sigma * dx).abs()
    };
    let m = CURVE_SAMPLES;
    let h = 1.0 / m as f64;
    // heights within half a period of the tile center, closest crossing first
    let (mut best, mut at) = (f64::INFINITY, 0i64);
    for q in -(m as i64) / 2..(m as i64) / 2 {
        let d = strip(cy + q as f64 * h);
        if d < best {
            best = d;
            at = q;
        }
    }
    if best > 0.5 * w {
        return Err(Error::DegenerateInterval(format!("curve {} misses the tile strip", curve.anchor)));
    }
    let (mut lo, mut hi) = (at, at);
    while lo > at - m as i64 && strip(cy + (lo - 1) as f64 * h) <= 0.5 * w {
        lo -= 1;
    }
    while hi < at + m as i64 && strip(cy + (hi + 1) as f64 * h) <= 0.5 * w {
        hi += 1;
    }
    let y0 = curve.chart.y_prime(cy + lo as f64 * h);
    let y1 = curve.chart.y_prime(cy + hi as f64 * h);
    if y1 <= y0 {
        return Err(Error::DegenerateInterval("curve window has zero length".into()));
    }
    Ok((y0, y1))
}

/// Whether `x` lies in `P(s)`, the projection of the tile, from samples of
/// its boundary.
pub fn in_projection(family: &LipschitzFamily, tile: &Tile, x: f64) -> Result<bool> {
    let (cx, cy) = tile.center();
    let (hl, hw, sigma) = (0.5 * tile.length(), 0.5 * tile.width(), tile.slope());
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let q = 8;
    for a in 0..=q {
        let t = -1.0 + 2.0 * a as f64 / q as f64;
        for &(dx, dv) in &[(t * hl, -hw), (t * hl, hw), (-hl, t * hw), (hl, t * hw)] {
            let p = family.project(cx + dx, cy + sigma * dx + dv)?;
            lo = lo.min(p);
            hi = hi.max(p);
        }
    }
    let xr = x + (0.5 * (lo + hi) - x).round();
    Ok(xr >= lo && xr <= hi)
}

/// Window data for one tile and anchor.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TileCurveWindow {
    pub anchor: f64,
    pub window: (f64, f64),
    /// Optimal line on the `3J` window: `tau = slope`, `b = intercept`.
    pub line: MinimaxLine,
    /// `beta_{j0}` for `j0 = 0, 1, ...`, deviations from the line over
    /// `3 max(1, j0) J`, divided by `|J|`.
    pub betas: Vec<f64>,
}

impl TileCurveWindow {
    pub fn new(curve: &AnchoredCurve, tile: &Tile, j0_max: usize) -> Result<Self> {
        let window = curve_window(curve, tile)?;
        Self::on_window(curve, window, j0_max)
    }

    pub fn on_window(curve: &AnchoredCurve, window: (f64, f64), j0_max: usize) -> Result<Self> {
        let len = window.1 - window.0;
        let c = 0.5 * (window.0 + window.1);
        let pts = |j0: usize| curve.graph_samples(c - 1.5 * j0.max(1) as f64 * len, c + 1.5 * j0.max(1) as f64 * len);
        let base = pts(1);
        if base.len() < 2 {
            return Err(Error::DegenerateInterval("window holds fewer than two curve samples".into()));
        }
        let line = minimax_line(&base);
        let betas = (0..=j0_max).map(|j0| deviation_from(&pts(j0), line.slope, line.intercept) / len).collect();
        Ok(Self { anchor: curve.anchor, window, line, betas })
    }

    pub fn length(&self) -> f64 {
        self.window.1 - self.window.0
    }

    pub fn tau(&self) -> f64 {
        self.line.slope
    }
}

/// `phi_s` along the family field and along the frozen direction, both for
/// the single-scale operator of index `k - l`.
pub struct TileFields {
    pub tile: Tile,
    varying: FieldEvaluator,
    frozen: FieldEvaluator,
}

impl TileFields {
    pub fn new(bank: &PacketBank, tile: &Tile, op: &DirectionalOperator, frozen_slope: f64) -> Result<Self> {
        let packet = bank.packet(tile);
        let l = tile.k - tile.omega.l as i64;
        let varying = op.apply_hl(&packet, l)?;
        let frozen = DirectionalOperator::constant(packet.grid(), frozen_slope)?.apply_hl(&packet, l)?;
        Ok(Self {
            tile: *tile,
            varying: FieldEvaluator::new(&varying, Interpolation::Trigonometric),
            frozen: FieldEvaluator::new(&frozen, Interpolation::Trigonometric),
        })
    }

    pub fn varying_at(&self, x: f64, y: f64) -> C64 {
        self.varying.eval(x, y)
    }

    pub fn frozen_at(&self, x: f64, y: f64) -> C64 {
        self.frozen.eval(x, y)
    }
}

/// Samples of `phi_s^x(tau y' + b, y')` and of its projection `P_k`.
#[derive(Clone, Debug)]
pub struct FrozenPacket {
    pub ys: Vec<f64>,
    pub values: Vec<C64>,
    pub projected: Vec<C64>,
    /// `||P_k phi - phi|| / ||phi||` over the samples.
    pub residual: f64,
}

/// The frozen packet on `y' in [lo, hi]` (`m` samples) for the line
/// `x' = tau y' + b` of the chart, with the reproducing check.
pub fn frozen_packet(fields: &TileFields, chart: &CurveChart, tau: f64, b: f64, (lo, hi): (f64, f64), m: usize) -> FrozenPacket {
    let k = fields.tile.k;
    // (X, Y) = to_physical(tau y' + b, y') = p0 + y' d
    let p0 = chart.to_physical(b, 0.0);
    let p1 = chart.to_physical(tau + b, 1.0);
    let d = (p1.0 - p0.0, p1.1 - p0.1);
    let modes: Vec<(f64, C64, f64)> = fields
        .frozen
        .modes()
        .iter()
        .map(|&(xi, eta, c)| {
            let nu = xi * d.0 + eta * d.1;
            let ph = 2.0 * PI * (xi * p0.0 + eta * p0.1);
            (nu, c * C64::new(ph.cos(), ph.sin()), reproducing(2f64.powi(-(k as i32)) * nu.abs()))
        })
        .collect();
    let ys: Vec<f64> = (0..m).map(|q| lo + (hi - lo) * q as f64 / (m.max(2) - 1) as f64).collect();
    let mut values = Vec::with_capacity(m);
    let mut projected = Vec::with_capacity(m);
    for &y in &ys {
        let (mut v, mut p) = (ZERO, ZERO);
        for &(nu, c, w) in &modes {
            let ph = 2.0 * PI * nu * y;
            let e = c * C64::new(ph.cos(), ph.sin());
            v += e;
            p += e * w;
        }
        values.push(v);
        projected.push(p);
    }
    let num: f64 = values.iter().zip(&projected).map(|(a, b)| (a - b).norm_sqr()).sum();
    let den: f64 = values.iter().map(|a| a.norm_sqr()).sum();
    let residual = if den > 0.0 { (num / den).sqrt() } else { 0.0 };
    FrozenPacket { ys, values, projected, residual }
}

/// `psi_0` check kernel: `2 int_0^inf psi_0(r) sin(2 pi r t) dr`.
pub fn psi0_check_kernel(t: f64) -> f64 {
    let mut acc = 0.0;
    for p in 0..24 {
        let a = 0.5 + 1.5 * p as f64 / 24.0;
        for (r, w) in gauss_legendre_on(12, a, a + 1.5 / 24.0) {
            acc += w * psi0(r) * (2.0 * PI * r * t).sin();
        }
    }
    2.0 * acc
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointwiseReport {
    pub tile: Tile,
    pub anchor: f64,
    pub offsets: (i64, i64),
    /// `(j0, max lhs, rhs without constant)` per shift.
    pub rows: Vec<(i64, f64, f64)>,
    pub max_ratio: f64,
    /// Largest `|psi_check(2^{k-l}(t + g - tau z - b)) - psi_check(2^{k-l} t)| / (2^{-l} beta_0)`.
    pub kernel_step_ratio: f64,
}

/// Lemma-type pointwise bound: for `z` in `J(x, s_{m,n}) + j0 2^{-k}`,
/// `|phi_s(g_x(z), z) - phi_s^x(tau z + b, z)|` against
/// `beta_{|j0|} 2^k 2^{-3l/2} / <min(|m|+|n|, |m|+|n|-|j0|)>^N`.
pub fn pointwise_bound_check(fields: &TileFields, curve: &AnchoredCurve, offsets: (i64, i64), j0_range: i64, samples: usize) -> Result<PointwiseReport> {
    let s = fields.tile;
    let win_tile = Tile { m: s.m + offsets.0, n: s.n + offsets.1, ..s };
    let win = TileCurveWindow::new(curve, &win_tile, j0_range.unsigned_abs() as usize)?;
    let (tau, b) = (win.line.slope, win.line.intercept);
    let k = s.k;
    let l = s.omega.l as i32;
    let shift = 2f64.powi(-(k as i32));
    let mn = offsets.0.abs() + offsets.1.abs();
    let chart = curve.chart();
    let mut rows = Vec::new();
    let mut max_ratio = 0.0f64;
    for j0 in -j0_range..=j0_range {
        let (a, bb) = (win.window.0 + j0 as f64 * shift, win.window.1 + j0 as f64 * shift);
        let mut lhs = 0.0f64;
        for q in 0..samples {
            let z = a + (bb - a) * (q as f64 + 0.5) / samples as f64;
            let yt = chart.y_tilde(z);
            let (x, y) = curve.point(yt);
            let (fx, fy) = chart.to_physical(tau * z + b, z);
            lhs = lhs.max((fields.varying_at(x, y) - fields.frozen_at(fx, fy)).norm());
        }
        let beta = win.betas[j0.unsigned_abs() as usize];
        let rhs = beta * 2f64.powi(k as i32) * 2f64.powf(-1.5 * l as f64) / bracket(mn.min(mn - j0.abs()) as f64).powi(DECAY_POWER);
        if rhs > 0.0 {
            max_ratio = max_ratio.max(lhs / rhs);
        }
        rows.push((j0, lhs, rhs));
    }
    let kernel_step_ratio = kernel_step(curve, &win, k - l as i64, l)?;
    Ok(PointwiseReport { tile: s, anchor: curve.anchor, offsets, rows, max_ratio, kernel_step_ratio })
}

fn kernel_step(curve: &AnchoredCurve, win: &TileCurveWindow, scale: i64, l: i32) -> Result<f64> {
    let beta = win.betas[0];
    if beta == 0.0 {
        return Ok(0.0);
    }
    let a = 2f64.powi(scale as i32);
    let chart = curve.chart();
    let mut worst = 0.0f64;
    for q in 0..8 {
        let z = win.window.0 + win.length() * (q as f64 + 0.5) / 8.0;
        let g = chart.graph(z);
        let d = g - win.line.slope * z - win.line.intercept;
        for p in -8..=8 {
            let t = p as f64 / (4.0 * a);
            let lhs = (psi0_check_kernel(a * (t + d)) - psi0_check_kernel(a * t)).abs();
            worst = worst.max(lhs / (2f64.powi(-l) * beta));
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SingleTermReport {
    pub tile: Tile,
    pub anchor: f64,
    pub offsets: (i64, i64),
    pub oriented: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub h_average: f64,
}

/// Samples of a field along the whole curve at uniform `y'` over one period.
fn curve_restriction(curve: &AnchoredCurve, m: usize, f: &dyn Fn(f64, f64) -> C64) -> (Vec<f64>, Vec<C64>) {
    let chart = curve.chart();
    let period = chart.period();
    let y0 = chart.y_prime(0.0);
    let mut ys = Vec::with_capacity(m);
    let mut vals = Vec::with_capacity(m);
    let mut guess = 0.0;
    for q in 0..m {
        let yp = y0 + period * q as f64 / m as f64;
        let yt = chart.y_tilde_from(yp, guess);
        guess = yt;
        let (x, y) = curve.point(yt);
        ys.push(yp);
        vals.push(f(x, y));
    }
    (ys, vals)
}

/// One-dimensional `P_k` with the reproducing profile on a periodic sample.
fn project_periodic(vals: &[C64], period: f64, k: i64) -> Vec<C64> {
    let m = vals.len();
    let mut data = vals.to_vec();
    fft1(&mut data, true);
    for (q, z) in data.iter_mut().enumerate() {
        let nu = crate::grid::signed_freq(q, m) as f64 / period;
        *z *= reproducing(2f64.powi(-(k as i32)) * nu.abs()) / m as f64;
    }
    fft1(&mut data, false);
    data
}

/// Lemma-type single-term bound on `J = J(x, s_{m,n})`:
/// `int_J |h (phi_s - P_k phi_s)|` along the curve against
/// `sum_{j0} 2^{-3l/2} beta_{j0} [h] / <j0 + |m| + |n|>^N`, times the
/// orientation indicator.
pub fn single_term_check(
    fields: &TileFields,
    curve: &AnchoredCurve,
    h: &SampledField,
    offsets: (i64, i64),
    j0_max: usize,
    samples: usize,
) -> Result<SingleTermReport> {
    let s = fields.tile;
    let win_tile = Tile { m: s.m + offsets.0, n: s.n + offsets.1, ..s };
    let win = TileCurveWindow::new(curve, &win_tile, j0_max)?;
    let hev = FieldEvaluator::new(h, Interpolation::Trigonometric);
    let (ys, phi) = curve_restriction(curve, samples, &|x, y| fields.varying_at(x, y));
    let (_, hv) = curve_restriction(curve, samples, &|x, y| hev.eval(x, y));
    let period = curve.chart().period();
    let pk = project_periodic(&phi, period, s.k);
    let dy = period / samples as f64;
    let (mut lhs, mut hsum) = (0.0, 0.0);
    for q in 0..samples {
        // the window may sit in another period of y'
        let y = ys[q];
        let shifted = y + ((0.5 * (win.window.0 + win.window.1) - y) / period).round() * period;
        if shifted >= win.window.0 && shifted <= win.window.1 {
            lhs += (hv[q] * (phi[q] - pk[q])).norm() * dy;
            hsum += hv[q].norm() * dy;
        }
    }
    let h_average = hsum / s.width();
    let oriented = s.omega.in_left_half(-curve.slope());
    let mn = (offsets.0.abs() + offsets.1.abs()) as f64;
    let l = s.omega.l as f64;
    let rhs = if oriented {
        (0..=j0_max).map(|j0| 2f64.powf(-1.5 * l) * win.betas[j0] * h_average / bracket(j0 as f64 + mn).powi(DECAY_POWER)).sum()
    } else {
        0.0
    };
    let ratio = if rhs > 0.0 { lhs / rhs } else if lhs == 0.0 { 0.0 } else { f64::INFINITY };
    Ok(SingleTermReport { tile: s, anchor: curve.anchor, offsets, oriented, lhs, rhs, ratio, h_average })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub tiles: usize,
}

/// `sum w(s) beta_{j0}^2(x, s) [h]_{x,s}^2` over tiles with `x in P(s)` and
/// the right orientation, for `k` in `ks` and the intervals of `D_l`,
/// against `max(1, j0)^3 ||h||^2_{L^2(Gamma_x)}`.
pub fn embedding_bound_check(curve: &AnchoredCurve, h: &SampledField, ks: &[i64], l: u32, j0: usize, samples: usize) -> Result<EmbeddingReport> {
    let hev = FieldEvaluator::new(h, Interpolation::Trigonometric);
    let (ys, hv) = curve_restriction(curve, samples, &|x, y| hev.eval(x, y));
    let period = curve.chart().period();
    let dy = period / samples as f64;
    let norm2: f64 = hv.iter().map(|z| z.norm_sqr()).sum::<f64>() * dy;
    let rhs = (j0.max(1) as f64).powi(3) * norm2;
    let oriented: Vec<DirectionInterval> = DirectionInterval::all(l).into_iter().filter(|w| w.in_left_half(-curve.slope())).collect();
    let mut lhs = 0.0;
    let mut count = 0;
    for &k in ks {
        if k <= l as i64 {
            return Err(Error::ScaleOutOfRange { index: k, lo: l as i64 + 1, hi: i64::MAX });
        }
        for &w in &oriented {
            let (ma, na) = (1i64 << (k - l as i64), 1i64 << k);
            for m in 0..ma {
                for n in 0..na {
                    let tile = Tile { k, omega: w, m, n };
                    if !in_projection(&curve.family, &tile, curve.anchor)? {
                        continue;
                    }
                    let Ok(win) = TileCurveWindow::new(curve, &tile, j0) else { continue };
                    let c = 0.5 * (win.window.0 + win.window.1);
                    let mut hs = 0.0;
                    for (q, &y) in ys.iter().enumerate() {
                        let yy = y + ((c - y) / period).round() * period;
                        if yy >= win.window.0 && yy <= win.window.1 {
                            hs += hv[q].norm() * dy;
                        }
                    }
                    let avg = hs / tile.width();
                    lhs += tile.width() * win.betas[j0].powi(2) * avg * avg;
                    count += 1;
                }
            }
        }
    }
    let ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
    Ok(EmbeddingReport { lhs, rhs, ratio, tiles: count })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::directional::random_field;
    use crate::family::FamilySpec;
    use crate::grid::TorusGrid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sinusoidal() -> LipschitzFamily {
        LipschitzFamily::from_spec(&FamilySpec::Sinusoidal { b0: 0.01, fx: 1.0, fy: 4.0 }).unwrap()
    }

    #[test]
    fn windows_have_tile_size() {
        let fam = sinusoidal();
        let dir = DirectionField::Constant { value: -0.3 };
        let w = DirectionInterval::containing(1, 0.3).unwrap();
        let tile = Tile { k: 4, omega: w, m: 2, n: 5 };
        let (cx, cy) = tile.center();
        let x = fam.project(cx, cy).unwrap();
        let curve = AnchoredCurve::new(&fam, &dir, x);
        assert!(in_projection(&fam, &tile, x).unwrap());
        let win = TileCurveWindow::new(&curve, &tile, 3).unwrap();
        let len = win.length();
        assert!(len > 0.5 * tile.width() && len < 2.0 * tile.width(), "{len}");
        assert!(win.betas.windows(2).all(|p| p[1] >= p[0] - 1e-15));
        // straight curves have no deviation
        let flat = AnchoredCurve::new(&LipschitzFamily::identity(), &dir, x);
        let win = TileCurveWindow::new(&flat, &tile, 2).unwrap();
        assert!(win.betas.iter().all(|&b| b < 1e-12));
    }

    #[test]
    fn frozen_packet_reproduces_and_is_linear() {
        let g = TorusGrid::new(64).unwrap();
        let dir = DirectionField::Constant { value: 0.0 };
        let op = DirectionalOperator::new(g, &LipschitzFamily::identity(), &dir).unwrap();
        let w = DirectionInterval::containing(1, 0.1).unwrap();
        let bank = PacketBank::new(g, 3, w).unwrap();
        let tile = Tile { k: 3, omega: w, m: 1, n: 3 };
        let fields = TileFields::new(&bank, &tile, &op, 0.0).unwrap();
        let curve = AnchoredCurve::new(&LipschitzFamily::identity(), &dir, 0.3);
        let fp = frozen_packet(&fields, curve.chart(), 0.0, 0.3, (-0.5, 0.5), 128);
        assert!(fp.residual < 1e-6, "{}", fp.residual);
        // axis-aligned restriction agrees with direct evaluation
        for (y, v) in fp.ys.iter().zip(&fp.values).step_by(17) {
            assert!((fields.frozen_at(0.3, *y) - v).norm() < 1e-10);
        }
        let half = frozen_packet(&fields, curve.chart(), 0.05, 0.3, (-0.5, 0.5), 32);
        let again = frozen_packet(&fields, curve.chart(), 0.05, 0.3, (-0.5, 0.5), 32);
        for (a, b) in half.values.iter().zip(&again.values) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn straight_curves_have_no_pointwise_error() {
        let g = TorusGrid::new(64).unwrap();
        let dir = DirectionField::Constant { value: -0.2 };
        let op = DirectionalOperator::new(g, &LipschitzFamily::identity(), &dir).unwrap();
        let w = DirectionInterval::containing(1, 0.2).unwrap();
        let bank = PacketBank::new(g, 3, w).unwrap();
        let tile = Tile { k: 3, omega: w, m: 0, n: 2 };
        let fields = TileFields::new(&bank, &tile, &op, -0.2).unwrap();
        let (cx, _) = tile.center();
        let curve = AnchoredCurve::new(&LipschitzFamily::identity(), &dir, cx);
        let rep = pointwise_bound_check(&fields, &curve, (0, 0), 1, 16).unwrap();
        let peak = fields.varying.modes().iter().map(|m| m.2.norm()).sum::<f64>();
        assert!(rep.rows.iter().all(|r| r.1 <= 1e-8 * peak), "{:?}", rep.rows);
    }

    #[test]
    fn single_term_and_embedding() {
        let g = TorusGrid::new(64).unwrap();
        let fam = sinusoidal();
        let dir = DirectionField::Constant { value: -0.2 };
        let op = DirectionalOperator::new(g, &fam, &dir).unwrap();
        let w = DirectionInterval::containing(1, 0.2).unwrap();
        let bank = PacketBank::new(g, 3, w).unwrap();
        let tile = Tile { k: 3, omega: w, m: 1, n: 1 };
        let fields = TileFields::new(&bank, &tile, &op, -0.2).unwrap();
        let (cx, cy) = tile.center();
        let curve = AnchoredCurve::new(&fam, &dir, fam.project(cx, cy).unwrap());
        let zero = SampledField::zeros(g);
        let rep = single_term_check(&fields, &curve, &zero, (0, 0), 2, 256).unwrap();
        assert_eq!(rep.lhs, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_field(g, &mut rng);
        let rep = single_term_check(&fields, &curve, &h, (0, 0), 2, 256).unwrap();
        assert!(rep.lhs.is_finite() && rep.h_average > 0.0);
        let e = embedding_bound_check(&curve, &h, &[2, 3], 1, 1, 256).unwrap();
        assert!(e.tiles > 0 && e.lhs > 0.0 && e.ratio.is_finite());
        let flat = AnchoredCurve::new(&LipschitzFamily::identity(), &dir, 0.3);
        assert!(embedding_bound_check(&flat, &h, &[2, 3], 1, 1, 256).unwrap().lhs < 1e-20);
        let e0 = embedding_bound_check(&curve, &zero, &[2], 1, 1, 256).unwrap();
        assert_eq!((e0.lhs, e0.rhs), (0.0, 0.0));
    }

    #[test]
    fn check_kernel_is_odd_and_smooth() {
        for t in [0.1, 0.37, 1.2] {
            assert!((psi0_check_kernel(t) + psi0_check_kernel(-t)).abs() < 1e-14);
        }
        assert!(psi0_check_kernel(0.0).abs() < 1e-15);
    }
}
