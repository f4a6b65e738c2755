//! Rectangles, popularity and the Lipschitz-Kakeya maximal function on the
//! torus, with the counting bound for incomparable families.
//!
//! A rectangle of slope `k`, length `l` and width `w` is realized as the
//! parallelogram `|x - cx| <= l / (2 sqrt(1 + k^2))`, `|y - cy - k (x - cx)| <= w / 2`:
//! its long sides lie on lines `y = k x + b`, it has long-side length `l`, and
//! its short sides are vertical, so that adapting it to the identity family
//! returns it unchanged. Measures are grid counts times `n^{-2}`.
//!
//! Popularity counts only points of `R` (the `(u o P)^{-1}(EX(R)) cap R` form).

use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{slope_field, DirectionField, LipschitzFamily};
use crate::grid::{SampledField, TorusGrid, C64};

const EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientedRectangle {
    pub cx: f64,
    pub cy: f64,
    pub length: f64,
    pub width: f64,
    pub slope: f64,
}

fn wrap(d: f64) -> f64 {
    d - d.round()
}

impl OrientedRectangle {
    pub fn new(cx: f64, cy: f64, length: f64, width: f64, slope: f64) -> Result<Self> {
        if !(width >= 0.0 && length >= width && length <= 1.0) || !slope.is_finite() {
            return Err(Error::Config(format!("rectangle needs 0 <= width <= length <= 1, got width {width}, length {length}")));
        }
        Ok(Self { cx, cy, length, width, slope })
    }

    /// `EX(R)`: width `w / l`, centered at the slope.
    pub fn uncertainty(&self) -> (f64, f64) {
        let h = 0.5 * self.width / self.length;
        (self.slope - h, self.slope + h)
    }

    fn half_run(&self) -> f64 {
        0.5 * self.length / (1.0 + self.slope * self.slope).sqrt()
    }

    /// Euclidean area of the parallelogram.
    pub fn area(&self) -> f64 {
        2.0 * self.half_run() * self.width
    }

    /// Same center and slope, length and width scaled by `c`.
    pub fn dilate(&self, c: f64) -> Self {
        Self { length: self.length * c, width: self.width * c, ..*self }
    }

    /// Displacement `(dx, dy - k dx)` from the center, on the torus.
    fn local(&self, x: f64, y: f64) -> (f64, f64) {
        let dx = wrap(x - self.cx);
        (dx, wrap(y - self.cy - self.slope * dx))
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dv) = self.local(x, y);
        dx.abs() <= self.half_run() + EPS && dv.abs() <= 0.5 * self.width + EPS
    }

    /// Corners as offsets from the center.
    fn corner_offsets(&self) -> [(f64, f64); 4] {
        let (hx, hw) = (self.half_run(), 0.5 * self.width);
        [(-hx, -self.slope * hx - hw), (-hx, -self.slope * hx + hw), (hx, self.slope * hx - hw), (hx, self.slope * hx + hw)]
    }

    /// Indices of the grid points inside `R`.
    pub fn grid_points(&self, grid: TorusGrid) -> Vec<usize> {
        let n = grid.n() as i64;
        let nf = n as f64;
        let hx = self.half_run();
        let mut out = Vec::new();
        let i0 = ((self.cx - hx - EPS) * nf).ceil() as i64;
        let i1 = ((self.cx + hx + EPS) * nf).floor() as i64;
        for i in i0..=i1.min(i0 + n - 1) {
            let x = i as f64 / nf;
            let yc = self.cy + self.slope * (x - self.cx);
            let j0 = ((yc - 0.5 * self.width - EPS) * nf).ceil() as i64;
            let j1 = ((yc + 0.5 * self.width + EPS) * nf).floor() as i64;
            for j in j0..=j1.min(j0 + n - 1) {
                out.push(grid.index(i.rem_euclid(n) as usize, j.rem_euclid(n) as usize));
            }
        }
        out
    }

    pub fn to_csv_row(&self) -> String {
        format!("{},{},{},{},{}", self.cx, self.cy, self.length, self.width, self.slope)
    }
}

/// `R1 <= R2`: `R1` inside `C R2` and `EX(R2)` inside `EX(R1)`.
pub fn comparable(r1: &OrientedRectangle, r2: &OrientedRectangle, c: f64) -> bool {
    let big = r2.dilate(c);
    let inside = r1.corner_offsets().iter().all(|&(ox, oy)| big.contains(r1.cx + ox, r1.cy + oy));
    let (a1, b1) = r1.uncertainty();
    let (a2, b2) = r2.uncertainty();
    inside && a1 <= a2 + EPS && b2 <= b1 + EPS
}

pub fn read_rectangles_csv<R: BufRead>(r: R) -> Result<Vec<OrientedRectangle>> {
    let mut out = Vec::new();
    for (no, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || (no == 0 && t.starts_with("cx")) {
            continue;
        }
        let v: Vec<f64> = t
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", no + 1))))
            .collect::<Result<_>>()?;
        if v.len() != 5 {
            return Err(Error::Parse(format!("line {}: expected cx,cy,length,width,slope", no + 1)));
        }
        out.push(OrientedRectangle::new(v[0], v[1], v[2], v[3], v[4])?);
    }
    Ok(out)
}

pub fn write_rectangles_csv<W: Write>(rects: &[OrientedRectangle], mut w: W) -> Result<()> {
    writeln!(w, "cx,cy,length,width,slope")?;
    for r in rects {
        writeln!(w, "{}", r.to_csv_row())?;
    }
    Ok(())
}

/// `u o P` sampled on the grid, shared by all rectangle queries.
#[derive(Clone, Debug)]
pub struct KakeyaField {
    grid: TorusGrid,
    slopes: Vec<f64>,
}

impl KakeyaField {
    pub fn new(grid: TorusGrid, family: &LipschitzFamily, dir: &DirectionField) -> Result<Self> {
        Ok(Self { grid, slopes: slope_field(family, dir, grid)? })
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn popularity(&self, r: &OrientedRectangle) -> Result<f64> {
        if r.width <= 0.0 {
            return Err(Error::DegenerateInterval(format!("rectangle at ({}, {}) has zero width", r.cx, r.cy)));
        }
        let pts = r.grid_points(self.grid);
        if pts.is_empty() {
            return Err(Error::DegenerateInterval(format!("rectangle at ({}, {}) contains no grid point", r.cx, r.cy)));
        }
        Ok(popular_fraction(&pts, &self.slopes, r.uncertainty()))
    }

    /// Fraction of `R` covered by `target`.
    pub fn density(&self, r: &OrientedRectangle, target: &[bool]) -> f64 {
        let pts = r.grid_points(self.grid);
        if pts.is_empty() {
            return 0.0;
        }
        pts.iter().filter(|&&p| target[p]).count() as f64 / pts.len() as f64
    }
}

fn popular_fraction(pts: &[usize], slopes: &[f64], (a, b): (f64, f64)) -> f64 {
    pts.iter().filter(|&&p| slopes[p] >= a && slopes[p] <= b).count() as f64 / pts.len() as f64
}

/// The finite candidate lattice of the maximal function: centers on every
/// `stride`-th grid point, lengths `width 2^j` up to `1/2`, slopes at the
/// centers of the dyadic direction intervals of level `direction_level`
/// that lie in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub stride: usize,
    pub width: f64,
    pub lengths: Vec<f64>,
    pub slopes: Vec<f64>,
}

impl CandidateSet {
    pub fn dyadic(width: f64, direction_level: u32, stride: usize) -> Self {
        let mut lengths = Vec::new();
        let mut l = width;
        while l <= 0.5 + EPS {
            lengths.push(l);
            l *= 2.0;
        }
        let step = 2f64.powi(-(direction_level as i32));
        let slopes = (0..(4u64 << direction_level)).map(|j| -2.0 + (j as f64 + 0.5) * step).filter(|s| s.abs() <= 1.0).collect();
        Self { stride: stride.max(1), width, lengths, slopes }
    }

    pub fn rectangles(&self, grid: TorusGrid) -> impl Iterator<Item = OrientedRectangle> + '_ {
        let n = grid.n();
        let idx: Vec<usize> = (0..n).step_by(self.stride).collect();
        let (w, s, ls) = (self.width, self.slopes.clone(), self.lengths.clone());
        idx.clone().into_iter().flat_map(move |i| {
            let (idx, s, ls) = (idx.clone(), s.clone(), ls.clone());
            idx.into_iter().flat_map(move |j| {
                let (x, y) = grid.point(i, j);
                let s = s.clone();
                ls.clone().into_iter().flat_map(move |l| s.clone().into_iter().map(move |k| OrientedRectangle { cx: x, cy: y, length: l, width: w, slope: k }))
            })
        })
    }
}

#[derive(Clone, Debug)]
pub struct MaximalReport {
    pub field: SampledField,
    pub candidates: CandidateSet,
    pub admissible: usize,
    pub warning: Option<String>,
}

/// Admissible rectangles (popularity at least `delta`) with their grid points.
pub fn admissible_rectangles(kf: &KakeyaField, delta: f64, cands: &CandidateSet) -> Vec<(OrientedRectangle, Vec<usize>)> {
    cands
        .rectangles(kf.grid)
        .filter_map(|r| {
            let pts = r.grid_points(kf.grid);
            (!pts.is_empty() && popular_fraction(&pts, &kf.slopes, r.uncertainty()) >= delta).then_some((r, pts))
        })
        .collect()
}

/// `M f(x) = max |R|^{-1} int_R |f|` over admissible candidates containing `x`.
pub fn maximal_function(kf: &KakeyaField, f: &SampledField, delta: f64, cands: &CandidateSet) -> Result<MaximalReport> {
    kf.grid.ensure_same(&f.grid())?;
    if cands.width < kf.grid.spacing() - EPS {
        return Err(Error::Config(format!("rectangle width {} is below the grid spacing", cands.width)));
    }
    let rects = admissible_rectangles(kf, delta, cands);
    Ok(maximal_from(kf.grid, f, &rects, cands.clone()))
}

fn maximal_from(grid: TorusGrid, f: &SampledField, rects: &[(OrientedRectangle, Vec<usize>)], candidates: CandidateSet) -> MaximalReport {
    let abs: Vec<f64> = f.data().iter().map(|z| z.norm()).collect();
    let mut m = vec![0.0f64; grid.len()];
    for (_, pts) in rects {
        let avg = pts.iter().map(|&p| abs[p]).sum::<f64>() / pts.len() as f64;
        for &p in pts {
            m[p] = m[p].max(avg);
        }
    }
    let warning = rects.is_empty().then(|| "no admissible rectangle in the candidate set".to_string());
    let field = SampledField::new(grid, m.into_iter().map(|v| C64::new(v, 0.0)).collect()).expect("grid");
    MaximalReport { field, candidates, admissible: rects.len(), warning }
}

/// `max ||M f||_2 / ||f||_2` over the test fields.
pub fn maximal_norm_estimate(kf: &KakeyaField, tests: &[SampledField], delta: f64, cands: &CandidateSet) -> Result<f64> {
    let rects = admissible_rectangles(kf, delta, cands);
    let mut best = 0.0f64;
    for f in tests {
        kf.grid.ensure_same(&f.grid())?;
        let nf = f.norm();
        if nf > 0.0 {
            best = best.max(maximal_from(kf.grid, f, &rects, cands.clone()).field.norm() / nf);
        }
    }
    Ok(best)
}

/// Hypotheses of the counting bound, all checked by [`counting_check`].
#[derive(Clone, Debug)]
pub struct RectangleFamily {
    pub rects: Vec<OrientedRectangle>,
    pub delta: f64,
    pub lambda: f64,
    /// Target set `F` on the grid.
    pub target: Vec<bool>,
    /// Dilation constant of the comparability order.
    pub c: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountingReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// First failing hypothesis, if any.
pub fn verify_hypotheses(kf: &KakeyaField, fam: &RectangleFamily) -> Result<()> {
    if fam.target.len() != kf.grid.len() {
        return Err(Error::GridMismatch { expected: kf.grid.len(), got: fam.target.len() });
    }
    let width = fam.rects.first().map(|r| r.width);
    for (i, r) in fam.rects.iter().enumerate() {
        if let Some(w) = width {
            if (r.width - w).abs() > EPS {
                return Err(Error::Hypothesis(format!("rectangle {i}: width {} differs from {w}", r.width)));
            }
        }
        let pop = kf.popularity(r)?;
        if pop < fam.delta {
            return Err(Error::Hypothesis(format!("rectangle {i}: popularity {pop} below {}", fam.delta)));
        }
        let d = kf.density(r, &fam.target);
        if d < fam.lambda {
            return Err(Error::Hypothesis(format!("rectangle {i}: density {d} below {}", fam.lambda)));
        }
        for (j, s) in fam.rects.iter().enumerate().skip(i + 1) {
            if comparable(r, s, fam.c) || comparable(s, r, fam.c) {
                return Err(Error::Hypothesis(format!("rectangles {i} and {j} are comparable")));
            }
        }
    }
    Ok(())
}

/// `(sum |R|, |F| / (delta lambda^p), ratio)` after verifying the hypotheses.
pub fn counting_check(kf: &KakeyaField, fam: &RectangleFamily, p: f64) -> Result<CountingReport> {
    verify_hypotheses(kf, fam)?;
    let cell = kf.grid.spacing().powi(2);
    let lhs: f64 = fam.rects.iter().map(|r| r.grid_points(kf.grid).len() as f64 * cell).sum();
    let f_measure = fam.target.iter().filter(|&&b| b).count() as f64 * cell;
    let rhs = f_measure / (fam.delta * fam.lambda.powf(p));
    let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
    Ok(CountingReport { lhs, rhs, ratio })
}

/// A random target set (union of `blocks` random boxes) and a greedy family
/// of pairwise incomparable rectangles of the given width that satisfy the
/// popularity and density hypotheses.
pub fn random_counting_family(
    kf: &KakeyaField,
    delta: f64,
    lambda: f64,
    width: f64,
    c: f64,
    attempts: usize,
    rng: &mut impl Rng,
) -> RectangleFamily {
    let g = kf.grid;
    let n = g.n();
    let mut target = vec![false; g.len()];
    for _ in 0..6 {
        let (x, y) = (rng.gen::<f64>(), rng.gen::<f64>());
        let (hx, hy) = (rng.gen_range(0.05..0.2), rng.gen_range(0.05..0.2));
        for i in 0..n {
            for j in 0..n {
                let (px, py) = g.point(i, j);
                if wrap(px - x).abs() <= hx && wrap(py - y).abs() <= hy {
                    target[g.index(i, j)] = true;
                }
            }
        }
    }
    let mut rects: Vec<OrientedRectangle> = Vec::new();
    let mut lengths = Vec::new();
    let mut l = 2.0 * width;
    while l <= 0.5 + EPS {
        lengths.push(l);
        l *= 2.0;
    }
    for _ in 0..attempts {
        let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let (x, y) = g.point(i, j);
        let length = lengths[rng.gen_range(0..lengths.len())];
        let slope = (kf.slopes[g.index(i, j)] + rng.gen_range(-0.5..0.5) * width / length).clamp(-1.0, 1.0);
        let r = OrientedRectangle { cx: x, cy: y, length, width, slope };
        let ok = kf.popularity(&r).is_ok_and(|p| p >= delta)
            && kf.density(&r, &target) >= lambda
            && rects.iter().all(|s| !comparable(&r, s, c) && !comparable(s, &r, c));
        if ok {
            rects.push(r);
        }
    }
    RectangleFamily { rects, delta, lambda, target, c }
}

/// Result of [`adapt_rectangle`].
#[derive(Clone, Debug)]
pub struct AdaptedRectangle {
    pub points: Vec<usize>,
    pub measure_ratio: f64,
    pub popularity: f64,
    pub adapted_popularity: f64,
}

/// `R~ = {P in P(R)} cap {(x, k x + b): b in [b1, b2]}` on the grid, with its
/// measure relative to `R` and both popularities.
pub fn adapt_rectangle(r: &OrientedRectangle, family: &LipschitzFamily, dir: &DirectionField, grid: TorusGrid) -> Result<AdaptedRectangle> {
    let n = grid.n() as i64;
    let nf = n as f64;
    let ex = r.uncertainty();
    let in_ex = |u: f64| u >= ex.0 && u <= ex.1;
    // unwrapped coordinates near the center keep P continuous
    let rpts: Vec<(f64, f64)> = r
        .grid_points(grid)
        .into_iter()
        .map(|p| {
            let (x, y) = grid.point(p / grid.n(), p % grid.n());
            let dx = wrap(x - r.cx);
            (r.cx + dx, r.cy + r.slope * dx + wrap(y - r.cy - r.slope * dx))
        })
        .collect();
    if rpts.is_empty() || r.width <= 0.0 {
        return Ok(AdaptedRectangle { points: Vec::new(), measure_ratio: 0.0, popularity: 0.0, adapted_popularity: 0.0 });
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut pop = 0usize;
    for &(x, y) in &rpts {
        let p = family.project(x, y)?;
        lo = lo.min(p);
        hi = hi.max(p);
        pop += in_ex(dir.eval(p)) as usize;
    }
    let mut points = Vec::new();
    let mut apop = 0usize;
    for i in (-n / 2)..(n / 2) {
        let x = r.cx + i as f64 / nf;
        let xg = (x * nf).round() / nf;
        let yc = r.cy + r.slope * (xg - r.cx);
        let j0 = ((yc - 0.5 * r.width - EPS) * nf).ceil() as i64;
        let j1 = ((yc + 0.5 * r.width + EPS) * nf).floor() as i64;
        for j in j0..=j1 {
            let y = j as f64 / nf;
            let p = family.project(xg, y)?;
            if p >= lo - EPS && p <= hi + EPS {
                points.push(grid.index(((xg * nf).round() as i64).rem_euclid(n) as usize, j.rem_euclid(n) as usize));
                apop += in_ex(dir.eval(p)) as usize;
            }
        }
    }
    let ap = if points.is_empty() { 0.0 } else { apop as f64 / points.len() as f64 };
    Ok(AdaptedRectangle {
        measure_ratio: points.len() as f64 / rpts.len() as f64,
        points,
        popularity: pop as f64 / rpts.len() as f64,
        adapted_popularity: ap,
    })
}
