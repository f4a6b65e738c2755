//! The directional Hilbert transform
//! `H_v f(x, y) = p.v. int f(x - t, y - t u(P(x, y))) dt / t`,
//! its truncation to `|t| < eps0`, the single-scale pieces `H_l` and a power
//! iteration for operator norms.
//!
//! `H_v` and `H_l` act on the trigonometric interpolant of the samples and
//! integrate over the whole line, so along the direction `(1, s)` they are the
//! multipliers `-i pi sgn(xi + s eta)` and `psi_l(xi + s eta)`. Slopes vary
//! from point to point:
//! * few distinct slopes: one FFT per slope, masked pointwise;
//! * otherwise `H_v` uses a column sweep with prefix sums over `xi` (exact,
//!   `O(n^3)`), and `H_l` interpolates in the slope with piecewise Chebyshev
//!   nodes (the symbol is smooth in `s`).
//!
//! The pieces recombine as `H_v = -i pi (-I + 2 sum_l H_l)` on fields with no
//! mass at `xi + s eta = 0`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{slope_field, DirectionField, LipschitzFamily};
use crate::frequency::{single_scale_profile, single_scale_support};
use crate::grid::{
    fft2, spectral_transform, FieldEvaluator, Interpolation, SampledField, Spectrum, TorusGrid, C64, ZERO,
};
use crate::numerics::{barycentric_coeffs, chebyshev_nodes, gauss_legendre_on};

/// Linear operator on fields over a fixed grid.
pub trait LinearOperator {
    fn grid(&self) -> TorusGrid;
    fn apply(&self, f: &SampledField) -> Result<SampledField>;
    fn apply_adjoint(&self, f: &SampledField) -> Result<SampledField>;
    fn name(&self) -> String;
}

/// Largest number of distinct slopes handled by per-slope FFTs.
pub const MAX_DISTINCT_SLOPES: usize = 8;

const SIGN_TOL: f64 = 1e-9;

/// Piecewise Chebyshev resolution in the slope variable. Each piece spans at
/// most `piece_width` in the rescaled frequency `2^{-l-2} (xi + s eta)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeResolution {
    pub piece_width: f64,
    pub nodes: usize,
}

impl Default for SlopeResolution {
    fn default() -> Self {
        // about 3e-8 worst-case symbol error
        Self { piece_width: 0.25, nodes: 40 }
    }
}

impl SlopeResolution {
    pub fn fine() -> Self {
        // about 2e-10
        Self { piece_width: 0.25, nodes: 64 }
    }
}

/// Quadrature parameters for the truncated transform.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Minimum Gauss-Legendre nodes per dyadic shell; at least 8.
    pub nodes_per_scale: usize,
    pub interpolation: Interpolation,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { nodes_per_scale: 16, interpolation: Interpolation::Trigonometric }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nodes_per_scale < 8 {
            return Err(Error::Config(format!(
                "nodes_per_scale = {} is below the minimum of 8",
                self.nodes_per_scale
            )));
        }
        Ok(())
    }
}

/// Directional operators along `v = (1, u(P(x, y)))` on a grid.
#[derive(Clone, Debug)]
pub struct DirectionalOperator {
    grid: TorusGrid,
    family: LipschitzFamily,
    dir: DirectionField,
    slopes: Vec<f64>,
    // (slope, node indices) when few distinct slopes occur
    groups: Option<Vec<(f64, Vec<usize>)>>,
    resolution: SlopeResolution,
}

impl DirectionalOperator {
    pub fn new(grid: TorusGrid, family: &LipschitzFamily, dir: &DirectionField) -> Result<Self> {
        let slopes = slope_field(family, dir, grid)?;
        Ok(Self::from_slopes(grid, family.clone(), dir.clone(), slopes))
    }

    /// Operator along the constant direction `(1, s)`.
    pub fn constant(grid: TorusGrid, s: f64) -> Result<Self> {
        Self::new(grid, &LipschitzFamily::identity(), &DirectionField::Constant { value: s })
    }

    fn from_slopes(grid: TorusGrid, family: LipschitzFamily, dir: DirectionField, slopes: Vec<f64>) -> Self {
        let mut distinct: Vec<f64> = slopes.clone();
        distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
        distinct.dedup();
        let groups = if distinct.len() <= MAX_DISTINCT_SLOPES {
            Some(
                distinct
                    .iter()
                    .map(|&s| (s, (0..slopes.len()).filter(|&p| slopes[p] == s).collect()))
                    .collect(),
            )
        } else {
            None
        };
        Self { grid, family, dir, slopes, groups, resolution: SlopeResolution::default() }
    }

    pub fn with_resolution(mut self, r: SlopeResolution) -> Self {
        self.resolution = r;
        self
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn family(&self) -> &LipschitzFamily {
        &self.family
    }

    pub fn direction(&self) -> &DirectionField {
        &self.dir
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn has_few_slopes(&self) -> bool {
        self.groups.is_some()
    }

    /// Disables the per-slope path; used to cross-check the general paths.
    pub fn force_general(mut self) -> Self {
        self.groups = None;
        self
    }

    fn check(&self, f: &SampledField) -> Result<()> {
        self.grid.ensure_same(&f.grid())
    }

    /// `H_v f`.
    pub fn apply_hv(&self, f: &SampledField) -> Result<SampledField> {
        self.check(f)?;
        let spec = spectral_transform(f);
        match &self.groups {
            Some(groups) => Ok(self.grouped(&spec, groups, |s| move |xi, eta| hilbert_symbol(xi + s * eta))),
            None => Ok(self.sweep_forward(&spec)),
        }
    }

    pub fn apply_hv_adjoint(&self, f: &SampledField) -> Result<SampledField> {
        self.check(f)?;
        match &self.groups {
            Some(groups) => Ok(self.grouped_adjoint(f, groups, |s| move |xi, eta| hilbert_symbol(xi + s * eta))),
            None => Ok(self.sweep_adjoint(f)),
        }
    }

    /// `H_l f`, the piece of `H_v` at frequency `|xi + s eta| ~ 2^{l+2}`.
    pub fn apply_hl(&self, f: &SampledField, l: i64) -> Result<SampledField> {
        self.check(f)?;
        let spec = spectral_transform(f);
        let sym = move |s: f64| move |xi: f64, eta: f64| C64::new(single_scale_profile(l, xi + s * eta), 0.0);
        match &self.groups {
            Some(groups) => Ok(self.grouped(&spec, groups, sym)),
            None => Ok(self.chebyshev(&spec, l, false)),
        }
    }

    pub fn apply_hl_adjoint(&self, f: &SampledField, l: i64) -> Result<SampledField> {
        self.check(f)?;
        let sym = move |s: f64| move |xi: f64, eta: f64| C64::new(single_scale_profile(l, xi + s * eta), 0.0);
        match &self.groups {
            Some(groups) => Ok(self.grouped_adjoint(f, groups, sym)),
            None => Ok(self.chebyshev_adjoint(f, l, None)),
        }
    }

    /// `Pi H_l^* f`, where `Pi` keeps the modes with `|eta| <= eta_max`. This
    /// is the adjoint of `H_l Pi` and is much cheaper than the full adjoint
    /// when the band is narrow.
    pub fn apply_hl_adjoint_banded(&self, f: &SampledField, l: i64, eta_max: f64) -> Result<SampledField> {
        self.check(f)?;
        let band = move |eta: f64| if eta.abs() <= eta_max { 1.0 } else { 0.0 };
        match &self.groups {
            Some(_) => {
                let h = self.apply_hl_adjoint(f, l)?;
                Ok(spectral_transform(&h).apply_symbol(|_, eta| C64::new(band(eta), 0.0)).inverse())
            }
            None => Ok(self.chebyshev_adjoint(f, l, Some(eta_max))),
        }
    }

    /// Range of `l` with `H_l f` possibly nonzero for fields on this grid.
    pub fn hl_range(&self) -> (i64, i64) {
        let n = self.grid.n() as f64;
        let smax = self.slopes.iter().fold(0.0f64, |a, s| a.max(s.abs()));
        let tau_max = 0.5 * n * (1.0 + smax);
        let mut hi = 0i64;
        while single_scale_support(hi + 1).0 < tau_max {
            hi += 1;
        }
        // below this level only the column xi = -s eta would contribute, and
        // it is resolved to one frequency unit.
        (self.lowest_hl_level(), hi)
    }

    fn lowest_hl_level(&self) -> i64 {
        // smallest |xi + s eta| over nonzero values is at least the spacing of
        // the slope lattice; a fixed floor keeps the sum finite.
        -(self.grid.log2() as i64) - 8
    }

    fn grouped<F, G>(&self, spec: &Spectrum, groups: &[(f64, Vec<usize>)], sym: G) -> SampledField
    where
        G: Fn(f64) -> F,
        F: Fn(f64, f64) -> C64,
    {
        let mut out = SampledField::zeros(self.grid);
        for (s, idx) in groups {
            let g = spec.apply_symbol(sym(*s)).inverse();
            let od = out.data_mut();
            for &p in idx {
                od[p] = g.data()[p];
            }
        }
        out
    }

    fn grouped_adjoint<F, G>(&self, h: &SampledField, groups: &[(f64, Vec<usize>)], sym: G) -> SampledField
    where
        G: Fn(f64) -> F,
        F: Fn(f64, f64) -> C64,
    {
        let mut acc = vec![ZERO; self.grid.len()];
        for (s, idx) in groups {
            let mut masked = SampledField::zeros(self.grid);
            for &p in idx {
                masked.data_mut()[p] = h.data()[p];
            }
            let m = sym(*s);
            let t = spectral_transform(&masked).apply_symbol(|xi, eta| m(xi, eta).conj());
            for (a, b) in acc.iter_mut().zip(t.data()) {
                *a += b;
            }
        }
        Spectrum::new(self.grid, acc).expect("grid").inverse()
    }

    /// Exact `H_v` for arbitrary slopes: for column `x_i` and each `eta`,
    /// prefix sums over `xi` of `F(xi, eta) e^{2 pi i xi x_i}` split at the
    /// threshold `xi = -s eta`.
    fn sweep_forward(&self, spec: &Spectrum) -> SampledField {
        let n = self.grid.n();
        let ext = extended_freqs(n);
        let roots = roots_of_unity(n);
        let half = (n / 2) as f64;
        let mut out = SampledField::zeros(self.grid);
        let mut prefix = vec![ZERO; (n + 1) * (n + 2)];
        let scale = C64::new(0.0, -PI) / n as f64;
        for i in 0..n {
            for (e, &(eta, _, eb)) in ext.iter().enumerate() {
                let row = &mut prefix[e * (n + 2)..(e + 1) * (n + 2)];
                row[0] = ZERO;
                for (m, &(xi, wx, xb)) in ext.iter().enumerate() {
                    let ph = roots[((xi as i64 * i as i64).rem_euclid(n as i64)) as usize];
                    row[m + 1] = row[m] + spec.data()[xb * n + eb] * ph * wx;
                }
                let _ = eta;
            }
            for j in 0..n {
                let s = self.slopes[i * n + j];
                let mut acc = ZERO;
                for (e, &(eta, we, _)) in ext.iter().enumerate() {
                    let row = &prefix[e * (n + 2)..(e + 1) * (n + 2)];
                    let th = -s * eta;
                    let lo = count_below(th - SIGN_TOL, half, n);
                    let hi = count_at_most(th + SIGN_TOL, half, n);
                    let total = row[n + 1];
                    let r = (total - row[hi]) - row[lo];
                    let ph = roots[((eta as i64 * j as i64).rem_euclid(n as i64)) as usize];
                    acc += r * ph * we;
                }
                out.data_mut()[i * n + j] = acc * scale;
            }
        }
        out
    }

    fn sweep_adjoint(&self, h: &SampledField) -> SampledField {
        let n = self.grid.n();
        let ext = extended_freqs(n);
        let roots = roots_of_unity(n);
        let mut acc = vec![ZERO; self.grid.len()];
        let scale = (C64::new(0.0, -PI) / n as f64).conj();
        let mut order: Vec<usize> = (0..n).collect();
        let mut th = vec![0.0; n];
        let mut q = vec![ZERO; n + 1];
        for i in 0..n {
            let col = &self.slopes[i * n..(i + 1) * n];
            for (&(eta, we, eb), _) in ext.iter().zip(0..) {
                // thresholds -s eta sorted ascending
                order.sort_by(|&a, &b| (-col[a] * eta).partial_cmp(&(-col[b] * eta)).unwrap());
                q[0] = ZERO;
                for (r, &j) in order.iter().enumerate() {
                    th[r] = -col[j] * eta;
                    let ph = roots[((-(eta as i64) * j as i64).rem_euclid(n as i64)) as usize];
                    q[r + 1] = q[r] + h.data()[i * n + j] * ph * we;
                }
                let total = q[n];
                for &(xi, wx, xb) in &ext {
                    let lo = th.partition_point(|&t| t < xi - SIGN_TOL);
                    let hi = th.partition_point(|&t| t <= xi + SIGN_TOL);
                    let r = q[lo] - (total - q[hi]);
                    let ph = roots[((-(xi as i64) * i as i64).rem_euclid(n as i64)) as usize];
                    acc[xb * n + eb] += r * ph * (wx * scale);
                }
            }
        }
        Spectrum::new(self.grid, acc).expect("grid").inverse()
    }

    /// Chebyshev pieces over the slope range; returns for each piece its nodes
    /// and weights.
    fn pieces(&self, spec_eta_max: f64, l: i64) -> Vec<(Vec<f64>, Vec<f64>, f64, f64)> {
        let (smin, smax) = self.slopes.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &s| (a.min(s), b.max(s)));
        let b = 2f64.powi(-(l as i32 + crate::frequency::H_SCALE_OFFSET)) * spec_eta_max;
        let width = b * (smax - smin);
        let count = ((width / self.resolution.piece_width).ceil() as usize).max(1);
        let h = (smax - smin) / count as f64;
        let m = if smax > smin { self.resolution.nodes } else { 1 };
        (0..count)
            .map(|p| {
                let a = smin + p as f64 * h;
                let e = if p + 1 == count { smax } else { a + h };
                let (x, w) = chebyshev_nodes(m, a, e);
                (x, w, a, e)
            })
            .collect()
    }

    fn piece_of(&self, s: f64, pieces: &[(Vec<f64>, Vec<f64>, f64, f64)]) -> usize {
        pieces.iter().position(|p| s <= p.3).unwrap_or(pieces.len() - 1)
    }

    fn chebyshev(&self, spec: &Spectrum, l: i64, _adj: bool) -> SampledField {
        let n = self.grid.n();
        let eta_max = max_active_eta(spec);
        let pieces = self.pieces(eta_max, l);
        let assign: Vec<usize> = self.slopes.iter().map(|&s| self.piece_of(s, &pieces)).collect();
        let mut out = vec![ZERO; self.grid.len()];
        let mut coeffs = Vec::new();
        for (pi, (nodes, weights, _, _)) in pieces.iter().enumerate() {
            let members: Vec<usize> = (0..assign.len()).filter(|&p| assign[p] == pi).collect();
            if members.is_empty() {
                continue;
            }
            let cs: Vec<Vec<f64>> = members
                .iter()
                .map(|&p| {
                    barycentric_coeffs(nodes, weights, self.slopes[p], &mut coeffs);
                    coeffs.clone()
                })
                .collect();
            for (j, &sj) in nodes.iter().enumerate() {
                let mut data = spec.data().to_vec();
                apply_symbol_raw(&mut data, n, |xi, eta| single_scale_profile(l, xi + sj * eta));
                fft2(&mut data, n, false);
                for (k, &p) in members.iter().enumerate() {
                    out[p] += data[p] * cs[k][j];
                }
            }
        }
        SampledField::new(self.grid, out).expect("grid")
    }

    fn chebyshev_adjoint(&self, h: &SampledField, l: i64, band: Option<f64>) -> SampledField {
        let n = self.grid.n();
        // without a band the forward operator may see any |eta| <= n/2
        let eta_max = band.unwrap_or(0.5 * n as f64).min(0.5 * n as f64);
        let pieces = self.pieces(eta_max, l);
        let assign: Vec<usize> = self.slopes.iter().map(|&s| self.piece_of(s, &pieces)).collect();
        let mut acc = vec![ZERO; self.grid.len()];
        let mut coeffs = Vec::new();
        for (pi, (nodes, weights, _, _)) in pieces.iter().enumerate() {
            let members: Vec<usize> = (0..assign.len()).filter(|&p| assign[p] == pi).collect();
            if members.is_empty() {
                continue;
            }
            let cs: Vec<Vec<f64>> = members
                .iter()
                .map(|&p| {
                    barycentric_coeffs(nodes, weights, self.slopes[p], &mut coeffs);
                    coeffs.clone()
                })
                .collect();
            for (j, &sj) in nodes.iter().enumerate() {
                let mut data = vec![ZERO; self.grid.len()];
                for (k, &p) in members.iter().enumerate() {
                    data[p] = h.data()[p] * cs[k][j];
                }
                fft2(&mut data, n, true);
                apply_symbol_raw(&mut data, n, |xi, eta| {
                    if eta.abs() <= eta_max {
                        single_scale_profile(l, xi + sj * eta)
                    } else {
                        0.0
                    }
                });
                for (a, b) in acc.iter_mut().zip(&data) {
                    *a += b;
                }
            }
        }
        Spectrum::new(self.grid, acc).expect("grid").inverse()
    }

    /// `H_{v, eps0} f(p) = int_{|t| < eps0} f(p - t v(p)) dt / t`, by graded
    /// Gauss-Legendre quadrature on dyadic shells, pairing `t` with `-t`.
    pub fn apply_truncated(&self, f: &SampledField, eps0: f64, q: &QuadratureSpec) -> Result<SampledField> {
        self.check(f)?;
        q.validate()?;
        if !(eps0 > 0.0) {
            return Err(Error::Config(format!("truncation eps0 = {eps0} must be positive")));
        }
        let n = self.grid.n();
        let ev = FieldEvaluator::new(f, q.interpolation);
        let bandwidth = effective_bandwidth(f, &self.slopes);
        // shells (eps 2^{-j-1}, eps 2^{-j}], innermost shell [0, eps 2^{-J}]
        let shells = ((eps0 * bandwidth * 8.0).max(1.0)).log2().ceil() as usize + 1;
        let mut rules = Vec::new();
        for j in 0..=shells {
            let hi = eps0 * 2f64.powi(-(j as i32));
            let lo = if j == shells { 0.0 } else { hi * 0.5 };
            let len = hi - lo;
            let nodes = q.nodes_per_scale.max((PI * bandwidth * len).ceil() as usize + 10);
            rules.extend(gauss_legendre_on(nodes, lo, hi));
        }
        let mut out = SampledField::zeros(self.grid);
        for i in 0..n {
            for j in 0..n {
                let (x, y) = self.grid.point(i, j);
                let s = self.slopes[i * n + j];
                let mut acc = ZERO;
                for &(t, w) in &rules {
                    let a = ev.eval(x - t, y - t * s);
                    let b = ev.eval(x + t, y + t * s);
                    acc += (a - b) * (w / t);
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }
}

/// `-i pi sgn(tau)`.
pub fn hilbert_symbol(tau: f64) -> C64 {
    if tau > SIGN_TOL {
        C64::new(0.0, -PI)
    } else if tau < -SIGN_TOL {
        C64::new(0.0, PI)
    } else {
        ZERO
    }
}

fn apply_symbol_raw(data: &mut [C64], n: usize, m: impl Fn(f64, f64) -> f64) {
    for a in 0..n {
        let (xs, nx) = crate::grid::split_freqs(a, n);
        for b in 0..n {
            let z = &mut data[a * n + b];
            if *z == ZERO {
                continue;
            }
            let (ys, ny) = crate::grid::split_freqs(b, n);
            let mut w = 0.0;
            for &(xi, wx) in &xs[..nx] {
                for &(eta, wy) in &ys[..ny] {
                    w += m(xi, eta) * wx * wy;
                }
            }
            *z *= w;
        }
    }
}

fn max_active_eta(spec: &Spectrum) -> f64 {
    let n = spec.grid().n();
    let top = spec.data().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut best = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            if spec.data()[a * n + b].norm() > top * 1e-14 {
                best = best.max(crate::grid::signed_freq(b, n).unsigned_abs() as f64);
            }
        }
    }
    if best == (n / 2) as f64 {
        best
    } else {
        best.max(1.0)
    }
}

/// Largest `|xi + s eta|` over active modes and slopes.
fn effective_bandwidth(f: &SampledField, slopes: &[f64]) -> f64 {
    let spec = spectral_transform(f);
    let n = f.n();
    let smax = slopes.iter().fold(0.0f64, |a, s| a.max(s.abs()));
    let top = spec.data().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut best = 1.0f64;
    for a in 0..n {
        for b in 0..n {
            if spec.data()[a * n + b].norm() > top * 1e-14 {
                let xi = crate::grid::signed_freq(a, n).unsigned_abs() as f64;
                let eta = crate::grid::signed_freq(b, n).unsigned_abs() as f64;
                best = best.max(xi + smax * eta);
            }
        }
    }
    best
}

/// `(freq, weight, bin)` for `freq = -n/2, ..., n/2`, Nyquist split.
fn extended_freqs(n: usize) -> Vec<(f64, f64, usize)> {
    let h = (n / 2) as i64;
    (-h..=h)
        .map(|f| {
            let w = if f.abs() == h { 0.5 } else { 1.0 };
            (f as f64, w, f.rem_euclid(n as i64) as usize)
        })
        .collect()
}

fn roots_of_unity(n: usize) -> Vec<C64> {
    (0..n).map(|k| crate::grid::cis(2.0 * PI * k as f64 / n as f64)).collect()
}

/// Number of `m` in `0..=n` with `m - n/2 < t`.
fn count_below(t: f64, half: f64, n: usize) -> usize {
    ((t + half).ceil().max(0.0) as usize).min(n + 1)
}

/// Number of `m` in `0..=n` with `m - n/2 <= t`.
fn count_at_most(t: f64, half: f64, n: usize) -> usize {
    let v = (t + half).floor() + 1.0;
    (v.max(0.0) as usize).min(n + 1)
}

/// `H_v` as a [`LinearOperator`].
pub struct HilbertOp<'a>(pub &'a DirectionalOperator);

impl LinearOperator for HilbertOp<'_> {
    fn grid(&self) -> TorusGrid {
        self.0.grid
    }
    fn apply(&self, f: &SampledField) -> Result<SampledField> {
        self.0.apply_hv(f)
    }
    fn apply_adjoint(&self, f: &SampledField) -> Result<SampledField> {
        self.0.apply_hv_adjoint(f)
    }
    fn name(&self) -> String {
        "H_v".into()
    }
}

/// `H_l` as a [`LinearOperator`].
pub struct SingleScaleOp<'a>(pub &'a DirectionalOperator, pub i64);

impl LinearOperator for SingleScaleOp<'_> {
    fn grid(&self) -> TorusGrid {
        self.0.grid
    }
    fn apply(&self, f: &SampledField) -> Result<SampledField> {
        self.0.apply_hl(f, self.1)
    }
    fn apply_adjoint(&self, f: &SampledField) -> Result<SampledField> {
        self.0.apply_hl_adjoint(f, self.1)
    }
    fn name(&self) -> String {
        format!("H_{}", self.1)
    }
}

/// Result of [`estimate_norm`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormEstimate {
    pub operator: String,
    pub estimate: f64,
    pub spread: f64,
    pub trials: Vec<f64>,
}

/// Relative linearity defect on random inputs.
pub fn linearity_defect(op: &dyn LinearOperator, seed: u64) -> Result<f64> {
    let g = op.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = random_field(g, &mut rng);
    let h = random_field(g, &mut rng);
    let a = C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
    let b = C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
    let lhs = op.apply(&f.scale(a).add(&h.scale(b)))?;
    let af = op.apply(&f)?;
    let ah = op.apply(&h)?;
    let rhs = af.scale(a).add(&ah.scale(b));
    // floored by the input scale so that (numerically) zero operators pass
    let input = a.norm() * f.norm() + b.norm() * h.norm();
    let denom = (a.norm() * af.norm() + b.norm() * ah.norm()).max(1e-6 * input);
    Ok(lhs.sub(&rhs).norm() / denom)
}

/// Power iteration on `A^* A` from random starts. Rejects operators whose
/// linearity defect exceeds `1e-8`.
pub fn estimate_norm(op: &dyn LinearOperator, trials: usize, iterations: usize, seed: u64) -> Result<NormEstimate> {
    let defect = linearity_defect(op, seed ^ 0x5eed)?;
    if defect > 1e-8 {
        return Err(Error::NotLinear { defect });
    }
    let g = op.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results = Vec::with_capacity(trials);
    for _ in 0..trials.max(1) {
        let mut x = random_field(g, &mut rng);
        let nx = x.norm();
        x = x.scale(C64::new(1.0 / nx, 0.0));
        let mut est = 0.0;
        for _ in 0..iterations.max(1) {
            let y = op.apply(&x)?;
            est = y.norm();
            let z = op.apply_adjoint(&y)?;
            let nz = z.norm();
            if nz == 0.0 {
                break;
            }
            x = z.scale(C64::new(1.0 / nz, 0.0));
        }
        let y = op.apply(&x)?;
        results.push(y.norm().max(est));
    }
    let max = results.iter().cloned().fold(0.0, f64::max);
    let min = results.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(NormEstimate { operator: op.name(), estimate: max, spread: max - min, trials: results })
}

pub fn random_field(g: TorusGrid, rng: &mut impl Rng) -> SampledField {
    SampledField::from_fn(g, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::apply_multiplier;

    fn grid(n: usize) -> TorusGrid {
        TorusGrid::new(n).unwrap()
    }

    fn rand_field(n: usize, seed: u64) -> SampledField {
        random_field(grid(n), &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn cosine_maps_to_pi_sine() {
        let g = grid(64);
        let op = DirectionalOperator::constant(g, 0.0).unwrap();
        let f = SampledField::from_real_fn(g, |x, _| (2.0 * PI * x).cos());
        let h = op.apply_hv(&f).unwrap();
        let want = SampledField::from_real_fn(g, |x, _| PI * (2.0 * PI * x).sin());
        assert!(h.sub(&want).max_abs() < 1e-12);
    }

    #[test]
    fn sweep_matches_per_slope_path() {
        let g = grid(32);
        let u = DirectionField::Step { breaks: vec![0.0, 0.3, 0.7], values: vec![0.2, -0.45, 0.0] };
        let fam = LipschitzFamily::sinusoidal(0.05);
        let fast = DirectionalOperator::new(g, &fam, &u).unwrap();
        assert!(fast.has_few_slopes());
        let slow = fast.clone().force_general();
        let f = rand_field(32, 1);
        let a = fast.apply_hv(&f).unwrap();
        let b = slow.apply_hv(&f).unwrap();
        assert!(a.sub(&b).max_abs() < 1e-10 * a.max_abs());
        let h = rand_field(32, 2);
        let a = fast.apply_hv_adjoint(&h).unwrap();
        let b = slow.apply_hv_adjoint(&h).unwrap();
        assert!(a.sub(&b).max_abs() < 1e-10 * a.max_abs());
    }

    #[test]
    fn sweep_pointwise_oracle() {
        // direct sum over all modes at a few points
        let g = grid(16);
        let fam = LipschitzFamily::sinusoidal(0.05);
        let u = DirectionField::Sinusoidal { amp: 0.3, freq: 1.0, phase: 0.4 };
        let op = DirectionalOperator::new(g, &fam, &u).unwrap();
        assert!(!op.has_few_slopes());
        let f = rand_field(16, 3);
        let h = op.apply_hv(&f).unwrap();
        let spec = spectral_transform(&f);
        for &(i, j) in &[(0usize, 0usize), (3, 7), (15, 2)] {
            let s = op.slopes()[i * 16 + j];
            let (x, y) = g.point(i, j);
            let mut acc = ZERO;
            for a in 0..16 {
                for b in 0..16 {
                    let (xs, nx) = crate::grid::split_freqs(a, 16);
                    let (ys, ny) = crate::grid::split_freqs(b, 16);
                    for &(xi, wx) in &xs[..nx] {
                        for &(eta, wy) in &ys[..ny] {
                            let ph = crate::grid::cis(2.0 * PI * (xi * x + eta * y));
                            acc += spec.data()[a * 16 + b] * hilbert_symbol(xi + s * eta) * ph * (wx * wy / 16.0);
                        }
                    }
                }
            }
            assert!((acc - h.get(i, j)).norm() < 1e-10);
        }
    }

    #[test]
    fn chebyshev_hl_matches_per_slope_path() {
        let g = grid(32);
        let u = DirectionField::Step { breaks: vec![0.0, 0.5], values: vec![0.13, -0.31] };
        let fast = DirectionalOperator::new(g, &LipschitzFamily::identity(), &u).unwrap();
        let slow = fast.clone().force_general().with_resolution(SlopeResolution::fine());
        let f = rand_field(32, 4);
        for l in [-2i64, 0, 2] {
            let a = fast.apply_hl(&f, l).unwrap();
            let b = slow.apply_hl(&f, l).unwrap();
            assert!(a.sub(&b).max_abs() < 1e-8 * f.max_abs(), "l={l}");
        }
    }

    #[test]
    fn adjoint_duality() {
        let g = grid(16);
        let fam = LipschitzFamily::sinusoidal(0.05);
        let u = DirectionField::Sinusoidal { amp: 0.2, freq: 1.0, phase: 0.0 };
        let op = DirectionalOperator::new(g, &fam, &u).unwrap();
        let f = rand_field(16, 5);
        let h = rand_field(16, 6);
        let lhs = op.apply_hv(&f).unwrap().inner(&h);
        let rhs = f.inner(&op.apply_hv_adjoint(&h).unwrap());
        assert!((lhs - rhs).norm() < 1e-12 * (1.0 + lhs.norm()));
        let lhs = op.apply_hl(&f, 1).unwrap().inner(&h);
        let rhs = f.inner(&op.apply_hl_adjoint(&h, 1).unwrap());
        assert!((lhs - rhs).norm() < 1e-12 * (1.0 + lhs.norm()));
    }

    #[test]
    fn banded_adjoint_duality() {
        let g = grid(32);
        let fam = LipschitzFamily::sinusoidal(0.05);
        let u = DirectionField::Sinusoidal { amp: 0.2, freq: 1.0, phase: 0.0 };
        let op = DirectionalOperator::new(g, &fam, &u).unwrap();
        let f = crate::frequency::lp_project(&rand_field(32, 7), 2).unwrap();
        let h = rand_field(32, 8);
        let lhs = op.apply_hl(&f, -1).unwrap().inner(&h);
        let rhs = f.inner(&op.apply_hl_adjoint_banded(&h, -1, 8.0).unwrap());
        assert!((lhs - rhs).norm() < 1e-7 * (1.0 + lhs.norm()), "{lhs} vs {rhs}");
        let full = op.apply_hl_adjoint(&h, -1).unwrap();
        let rhs_full = f.inner(&full);
        assert!((rhs_full - rhs).norm() < 1e-7 * (1.0 + lhs.norm()));
    }

    #[test]
    fn splitting_identity_constant_slope() {
        let g = grid(32);
        let op = DirectionalOperator::constant(g, 0.25).unwrap();
        let f = rand_field(32, 7);
        // remove the line xi + s eta = 0 and the Nyquist bins
        let f = apply_multiplier(&f, |xi, eta| {
            if (xi + 0.25 * eta).abs() < 1e-9 || xi.abs() >= 16.0 || eta.abs() >= 16.0 {
                ZERO
            } else {
                C64::new(1.0, 0.0)
            }
        });
        let (lo, hi) = op.hl_range();
        let mut sum = SampledField::zeros(g);
        for l in lo..=hi {
            sum.add_assign(&op.apply_hl(&f, l).unwrap());
        }
        let rebuilt = sum.scale(C64::new(2.0, 0.0)).sub(&f).scale(C64::new(0.0, -PI));
        let h = op.apply_hv(&f).unwrap();
        let err = rebuilt.sub(&h).max_abs();
        assert!(err < 1e-9 * h.max_abs(), "{err} {} {:?}", h.max_abs(), (lo, hi));
    }

    #[test]
    fn truncated_matches_one_dimensional_oracle() {
        let g = grid(32);
        let op = DirectionalOperator::constant(g, 0.0).unwrap();
        let f = SampledField::from_real_fn(g, |x, _| (2.0 * PI * x).cos());
        let eps = 0.25;
        let h = op.apply_truncated(&f, eps, &QuadratureSpec::default()).unwrap();
        // 2 sin(2 pi x) int_0^eps sin(2 pi t)/t dt by composite Simpson
        let m = 20000;
        let dt = eps / m as f64;
        let g_ = |t: f64| if t == 0.0 { 2.0 * PI } else { (2.0 * PI * t).sin() / t };
        let mut si = g_(0.0) + g_(eps);
        for q in 1..m {
            si += if q % 2 == 1 { 4.0 } else { 2.0 } * g_(q as f64 * dt);
        }
        si *= dt / 3.0;
        let want = SampledField::from_real_fn(g, |x, _| 2.0 * si * (2.0 * PI * x).sin());
        assert!(h.sub(&want).max_abs() < 1e-9);
        let tiny = op.apply_truncated(&f, 1e-9, &QuadratureSpec::default()).unwrap();
        assert!(tiny.max_abs() < 1e-6);
    }

    #[test]
    fn quadrature_spec_floor() {
        let g = grid(16);
        let op = DirectionalOperator::constant(g, 0.0).unwrap();
        let q = QuadratureSpec { nodes_per_scale: 4, ..Default::default() };
        assert!(matches!(op.apply_truncated(&SampledField::zeros(g), 0.1, &q), Err(Error::Config(_))));
    }

    #[test]
    fn norm_of_plain_hilbert() {
        let g = grid(32);
        let op = DirectionalOperator::constant(g, 0.0).unwrap();
        let est = estimate_norm(&HilbertOp(&op), 2, 4, 1).unwrap();
        assert!((est.estimate - PI).abs() < 1e-9);
    }

    struct Squarer(TorusGrid);
    impl LinearOperator for Squarer {
        fn grid(&self) -> TorusGrid {
            self.0
        }
        fn apply(&self, f: &SampledField) -> Result<SampledField> {
            Ok(f.map(|z| z * z))
        }
        fn apply_adjoint(&self, f: &SampledField) -> Result<SampledField> {
            Ok(f.clone())
        }
        fn name(&self) -> String {
            "square".into()
        }
    }

    #[test]
    fn nonlinear_operator_rejected() {
        assert!(matches!(estimate_norm(&Squarer(grid(16)), 1, 1, 0), Err(Error::NotLinear { .. })));
    }
}
