//! Jones beta numbers of sampled Lipschitz graphs.
//!
//! `beta_{j0}(I)` is the sup-deviation of `A` from a line on the concentric
//! window of length `3 max(1, j0) |I|`, divided by `|I|`. The line is the
//! optimal (minimax) one, found exactly from the convex hulls of the window
//! samples. Optimal-line betas are no larger than the betas of any other
//! choice of average slope.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Intervals with fewer samples than this get beta 0 in Carleson sums.
pub const MIN_SAMPLES: usize = 8;

/// Samples `A(x_i)` at `x_i = i * length / len`, optionally extended past the
/// ends by `A(x + length) = A(x) + drift`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledGraph {
    values: Vec<f64>,
    length: f64,
    drift: Option<f64>,
}

impl SampledGraph {
    pub fn new(values: Vec<f64>, length: f64) -> Result<Self> {
        Self::build(values, length, None)
    }

    /// Wrapping graph with `A(x + length) = A(x) + drift`.
    pub fn periodic(values: Vec<f64>, length: f64, drift: f64) -> Result<Self> {
        Self::build(values, length, Some(drift))
    }

    fn build(values: Vec<f64>, length: f64, drift: Option<f64>) -> Result<Self> {
        if values.len() < 2 || !(length > 0.0) {
            return Err(Error::Config(format!("graph needs >= 2 samples and positive length, got {} samples on {length}", values.len())));
        }
        Ok(Self { values, length, drift })
    }

    pub fn from_fn(samples: usize, length: f64, periodic: bool, f: impl Fn(f64) -> f64) -> Result<Self> {
        let h = length / samples as f64;
        let values = (0..samples).map(|i| f(i as f64 * h)).collect();
        if periodic {
            let drift = f(length) - f(0.0);
            Self::periodic(values, length, drift)
        } else {
            Self::new(values, length)
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.values.len() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_periodic(&self) -> bool {
        self.drift.is_some()
    }

    /// `(x_i, A(x_i))` for any integer index when wrapping.
    pub fn sample(&self, i: i64) -> Option<(f64, f64)> {
        let m = self.values.len() as i64;
        let x = i as f64 * self.spacing();
        match self.drift {
            Some(d) => Some((x, self.values[i.rem_euclid(m) as usize] + i.div_euclid(m) as f64 * d)),
            None if (0..m).contains(&i) => Some((x, self.values[i as usize])),
            None => None,
        }
    }

    /// `A + a x + b`.
    pub fn add_affine(&self, a: f64, b: f64) -> Self {
        let h = self.spacing();
        let values = self.values.iter().enumerate().map(|(i, v)| v + a * i as f64 * h + b).collect();
        Self { values, length: self.length, drift: self.drift.map(|d| d + a * self.length) }
    }

    pub fn scale(&self, lambda: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| lambda * v).collect(),
            length: self.length,
            drift: self.drift.map(|d| lambda * d),
        }
    }

    /// Largest difference quotient between neighbouring samples.
    pub fn lipschitz(&self) -> f64 {
        let m = self.values.len() as i64;
        let last = if self.is_periodic() { m } else { m - 1 };
        (0..last)
            .filter_map(|i| Some((self.sample(i)?, self.sample(i + 1)?)))
            .map(|((x0, y0), (x1, y1))| ((y1 - y0) / (x1 - x0)).abs())
            .fold(0.0, f64::max)
    }

    /// Samples with `lo <= x <= hi` (endpoints within `1e-9` of a node count).
    pub fn window(&self, lo: f64, hi: f64) -> Result<Vec<(f64, f64)>> {
        let h = self.spacing();
        let a = (lo / h - 1e-9).ceil() as i64;
        let b = (hi / h + 1e-9).floor() as i64;
        let mut out = Vec::with_capacity((b - a + 1).max(0) as usize);
        for i in a..=b {
            match self.sample(i) {
                Some(p) => out.push(p),
                None => return Err(Error::WindowOutsideData { lo, hi, len: self.length }),
            }
        }
        Ok(out)
    }
}

/// Dyadic subinterval `[p, p + 1) * length / 2^level` of the graph's domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicInterval {
    pub level: u32,
    pub position: u64,
}

impl DyadicInterval {
    pub fn new(level: u32, position: u64) -> Result<Self> {
        if level >= 63 || position >= 1u64 << level {
            return Err(Error::DegenerateInterval(format!("position {position} at level {level}")));
        }
        Ok(Self { level, position })
    }

    pub fn root() -> Self {
        Self { level: 0, position: 0 }
    }

    pub fn size(&self, length: f64) -> f64 {
        length / (1u64 << self.level) as f64
    }

    pub fn start(&self, length: f64) -> f64 {
        self.position as f64 * self.size(length)
    }

    pub fn center(&self, length: f64) -> f64 {
        (self.position as f64 + 0.5) * self.size(length)
    }

    pub fn parent(&self) -> Option<Self> {
        (self.level > 0).then(|| Self { level: self.level - 1, position: self.position / 2 })
    }

    pub fn children(&self) -> [Self; 2] {
        let l = self.level + 1;
        [Self { level: l, position: 2 * self.position }, Self { level: l, position: 2 * self.position + 1 }]
    }

    pub fn contains(&self, other: &Self) -> bool {
        other.level >= self.level && other.position >> (other.level - self.level) == self.position
    }
}

/// The line `y = slope x + intercept` and its sup-deviation on the fitted points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimaxLine {
    pub slope: f64,
    pub intercept: f64,
    pub deviation: f64,
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Lower and upper convex hulls of points sorted by `x`.
fn hulls(pts: &[(f64, f64)]) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    let mut lower: Vec<(f64, f64)> = Vec::new();
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) >= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    (lower, upper)
}

/// Chebyshev (minimax) line fit. The width `W(a) = max(y - a x) - min(y - a x)`
/// is convex and piecewise linear with breaks at the hull edge slopes, so the
/// optimum sits at one of them.
pub fn minimax_line(pts: &[(f64, f64)]) -> MinimaxLine {
    assert!(pts.len() >= 2, "minimax fit needs two points");
    let (lower, upper) = hulls(pts);
    let width = |a: f64| {
        let hi = upper.iter().map(|p| p.1 - a * p.0).fold(f64::NEG_INFINITY, f64::max);
        let lo = lower.iter().map(|p| p.1 - a * p.0).fold(f64::INFINITY, f64::min);
        (hi - lo, hi + lo)
    };
    let mut slopes: Vec<f64> = lower
        .windows(2)
        .chain(upper.windows(2))
        .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
        .collect();
    slopes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    slopes.dedup();
    // first index where the width stops decreasing
    let (mut lo, mut hi) = (0usize, slopes.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if width(slopes[mid + 1]).0 >= width(slopes[mid]).0 {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let a = slopes[lo];
    let (w, s) = width(a);
    MinimaxLine { slope: a, intercept: 0.5 * s, deviation: 0.5 * w }
}

/// Sup-deviation of the points from a given line.
pub fn deviation_from(pts: &[(f64, f64)], slope: f64, intercept: f64) -> f64 {
    pts.iter().map(|p| (p.1 - slope * p.0 - intercept).abs()).fold(0.0, f64::max)
}

/// Window `[c - 1.5 m |I|, c + 1.5 m |I|]` with `m = max(1, j0)`.
pub fn beta_window(a: &SampledGraph, i: DyadicInterval, j0: u32) -> (f64, f64) {
    let c = i.center(a.length());
    let half = 1.5 * j0.max(1) as f64 * i.size(a.length());
    (c - half, c + half)
}

/// `beta_{j0}(I)` with its optimal line.
pub fn beta_number(a: &SampledGraph, i: DyadicInterval, j0: u32) -> Result<(f64, MinimaxLine)> {
    let (lo, hi) = beta_window(a, i, j0);
    let pts = a.window(lo, hi)?;
    if pts.len() < 2 {
        return Err(Error::DegenerateInterval(format!("{i:?} holds fewer than two samples")));
    }
    let line = minimax_line(&pts);
    Ok((line.deviation / i.size(a.length()), line))
}

/// Beta with the secant line through the window's end samples; an upper
/// bound for [`beta_number`].
pub fn secant_beta(a: &SampledGraph, i: DyadicInterval, j0: u32) -> Result<f64> {
    let (lo, hi) = beta_window(a, i, j0);
    let pts = a.window(lo, hi)?;
    let (p, q) = (pts[0], pts[pts.len() - 1]);
    let slope = (q.1 - p.1) / (q.0 - p.0);
    Ok(deviation_from(&pts, slope, p.1 - slope * p.0) / i.size(a.length()))
}

fn samples_in(a: &SampledGraph, i: DyadicInterval) -> usize {
    let h = a.spacing();
    let s = i.start(a.length());
    let e = s + i.size(a.length());
    ((e / h - 1e-9).ceil() - (s / h - 1e-9).ceil()).max(0.0) as usize
}

/// `(1/|J|) sum_{I subset J} beta_{j0}(I)^2 |I|` over dyadic `I` holding at
/// least [`MIN_SAMPLES`] samples.
pub fn carleson_sum(a: &SampledGraph, j: DyadicInterval, j0: u32) -> Result<f64> {
    let len = a.length();
    let mut total = 0.0;
    let mut level = j.level;
    loop {
        let first = DyadicInterval { level, position: j.position << (level - j.level) };
        if samples_in(a, first) < MIN_SAMPLES {
            break;
        }
        for q in 0..(1u64 << (level - j.level)) {
            let i = DyadicInterval { level, position: first.position + q };
            let (b, _) = beta_number(a, i, j0)?;
            total += b * b * i.size(len);
        }
        level += 1;
    }
    Ok(total / j.size(len))
}

/// `sup_J` of [`carleson_sum`] over all dyadic `J` large enough to hold
/// [`MIN_SAMPLES`] samples.
pub fn carleson_sup(a: &SampledGraph, j0: u32) -> Result<f64> {
    let mut best = 0.0f64;
    let mut level = 0;
    while samples_in(a, DyadicInterval { level, position: 0 }) >= MIN_SAMPLES {
        for p in 0..(1u64 << level) {
            best = best.max(carleson_sum(a, DyadicInterval { level, position: p }, j0)?);
        }
        level += 1;
    }
    Ok(best)
}

/// Per-interval statistics for the beta tables.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DyadicIntervalStats {
    pub interval: DyadicInterval,
    /// Slope of the optimal line on the smallest window.
    pub average_slope: f64,
    pub betas: Vec<(u32, f64)>,
    pub slopes: Vec<(u32, f64)>,
}

/// Statistics for every dyadic interval with at least [`MIN_SAMPLES`] samples.
pub fn interval_stats(a: &SampledGraph, j0s: &[u32]) -> Result<Vec<DyadicIntervalStats>> {
    let mut out = Vec::new();
    let mut level = 0;
    while samples_in(a, DyadicInterval { level, position: 0 }) >= MIN_SAMPLES {
        for p in 0..(1u64 << level) {
            let interval = DyadicInterval { level, position: p };
            let mut betas = Vec::new();
            let mut slopes = Vec::new();
            for &j0 in j0s {
                let (b, line) = beta_number(a, interval, j0)?;
                betas.push((j0, b));
                slopes.push((j0, line.slope));
            }
            let average_slope = beta_number(a, interval, 0)?.1.slope;
            out.push(DyadicIntervalStats { interval, average_slope, betas, slopes });
        }
        level += 1;
    }
    Ok(out)
}

/// CSV with header `level,position,j0,beta,slope`.
pub fn write_beta_csv<W: Write>(stats: &[DyadicIntervalStats], mut w: W) -> Result<()> {
    writeln!(w, "level,position,j0,beta,slope")?;
    for s in stats {
        for ((j0, b), (_, slope)) in s.betas.iter().zip(&s.slopes) {
            writeln!(w, "{},{},{},{:.17e},{:.17e}", s.interval.level, s.interval.position, j0, b, slope)?;
        }
    }
    Ok(())
}

/// Random periodic Lipschitz graph: a Fourier series rescaled so that its
/// sampled Lipschitz constant is `lip`.
pub fn random_lipschitz_graph(samples: usize, lip: f64, terms: usize, rng: &mut impl rand::Rng) -> Result<SampledGraph> {
    use std::f64::consts::PI;
    let coeffs: Vec<(f64, f64, f64)> = (1..=terms)
        .map(|m| {
            let amp = rng.gen_range(-1.0..1.0) / (m as f64).powf(1.5);
            (m as f64, amp, rng.gen_range(0.0..2.0 * PI))
        })
        .collect();
    let g = SampledGraph::from_fn(samples, 1.0, true, |x| {
        coeffs.iter().map(|&(m, a, ph)| a * (2.0 * PI * m * x + ph).sin()).sum()
    })?;
    let l = g.lipschitz();
    Ok(if l > 0.0 { g.scale(lip / l) } else { g })
}
