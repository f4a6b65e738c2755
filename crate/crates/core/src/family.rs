//! Families of Lipschitz curves `Gamma_x = {(g(x, y), y)}` foliating the
//! plane, direction fields `u` constant on each curve, the projection
//! `P(x, y)` onto the curve label, curve charts and the coarea integral.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{spectral_transform, SampledField, TorusGrid, TrigLine, C64};
use crate::numerics::increasing_root;

/// One real Fourier term `amp * sin(2 pi (fx x + fy y) + phase)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierTerm {
    pub fx: f64,
    pub fy: f64,
    pub amp: f64,
    pub phase: f64,
}

impl FourierTerm {
    fn eval(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let th = 2.0 * PI * (self.fx * x + self.fy * y) + self.phase;
        let (s, c) = th.sin_cos();
        let d = 2.0 * PI * self.amp * c;
        (self.amp * s, d * self.fx, d * self.fy)
    }
}

/// Serializable description of a curve family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilySpec {
    /// Vertical lines, `g(x, y) = x`.
    Identity,
    /// Tilted lines `g(x, y) = x + slope * y`; not periodic in `y`.
    Shear { slope: f64 },
    /// `g = x + b0 / (2 pi fy) * sin(2 pi fy y) * sin(2 pi fx x)`.
    Sinusoidal {
        b0: f64,
        #[serde(default = "one")]
        fx: f64,
        #[serde(default = "one")]
        fy: f64,
    },
    /// `g = x + sum of Fourier terms`; frequencies must be integers for
    /// periodicity.
    Fourier { terms: Vec<FourierTerm> },
    /// `g - x` sampled on an `n x n` grid, evaluated by trigonometric
    /// interpolation. Row-major, index `i * n + j` at `(i/n, j/n)`.
    Tabulated { n: usize, offsets: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone)]
enum Repr {
    Identity,
    Shear(f64),
    Modes(Vec<FourierTerm>),
    Complex(Arc<Vec<(f64, f64, C64)>>),
    Custom(Arc<dyn CustomFamily>),
}

/// User-supplied family, used by the corollary reduction.
pub trait CustomFamily: Send + Sync {
    /// Returns `(g, d1 g, d2 g)` at `(x, y)`.
    fn eval(&self, x: f64, y: f64) -> (f64, f64, f64);
    fn periodic(&self) -> bool;
    fn description(&self) -> String;
}

/// A Lipschitz family `g`, with `d1 g` bounded above and below and
/// `|d2 g| <= b0`.
#[derive(Clone)]
pub struct LipschitzFamily {
    repr: Repr,
    spec: Option<FamilySpec>,
}

impl std::fmt::Debug for LipschitzFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "LipschitzFamily({})", self.describe())
    }
}

impl LipschitzFamily {
    pub fn identity() -> Self {
        Self::from_spec(&FamilySpec::Identity).expect("identity family")
    }

    pub fn sinusoidal(b0: f64) -> Self {
        Self::from_spec(&FamilySpec::Sinusoidal { b0, fx: 1.0, fy: 1.0 }).expect("sinusoidal family")
    }

    pub fn from_custom(c: Arc<dyn CustomFamily>) -> Self {
        Self { repr: Repr::Custom(c), spec: None }
    }

    pub fn from_spec(spec: &FamilySpec) -> Result<Self> {
        let repr = match spec {
            FamilySpec::Identity => Repr::Identity,
            FamilySpec::Shear { slope } => Repr::Shear(*slope),
            FamilySpec::Sinusoidal { b0, fx, fy } => {
                if *fy == 0.0 {
                    return Err(Error::InvalidFamily("sinusoidal family needs fy != 0".into()));
                }
                // sin(a) sin(b) = (cos(a - b) - cos(a + b)) / 2
                let a = b0 / (2.0 * PI * fy) * 0.5;
                Repr::Modes(vec![
                    FourierTerm { fx: *fx, fy: -*fy, amp: a, phase: PI / 2.0 },
                    FourierTerm { fx: *fx, fy: *fy, amp: -a, phase: PI / 2.0 },
                ])
            }
            FamilySpec::Fourier { terms } => Repr::Modes(terms.clone()),
            FamilySpec::Tabulated { n, offsets } => {
                let grid = TorusGrid::new(*n)?;
                let data: Vec<C64> = offsets.iter().map(|&v| C64::new(v, 0.0)).collect();
                let field = SampledField::new(grid, data)?;
                let s = spectral_transform(&field);
                let mut modes = Vec::new();
                for a in 0..*n {
                    for b in 0..*n {
                        let c = s.data()[a * n + b];
                        if c.norm() < 1e-15 {
                            continue;
                        }
                        let (xs, nx) = crate::grid::split_freqs(a, *n);
                        let (ys, ny) = crate::grid::split_freqs(b, *n);
                        for &(xi, wx) in &xs[..nx] {
                            for &(eta, wy) in &ys[..ny] {
                                modes.push((xi, eta, c * (wx * wy / *n as f64)));
                            }
                        }
                    }
                }
                Repr::Complex(Arc::new(modes))
            }
        };
        let fam = Self { repr, spec: Some(spec.clone()) };
        if fam.is_periodic() {
            fam.check_monotone()?;
        }
        Ok(fam)
    }

    /// Random smooth periodic family with `|d2 g| <= b0` and `d1 g` in
    /// `[1 - b0 * spread, 1 + b0 * spread]`.
    pub fn random(seed: u64, b0: f64, max_freq: u32, terms: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t: Vec<FourierTerm> = (0..terms)
            .map(|_| FourierTerm {
                fx: rng.gen_range(0..=max_freq) as f64,
                fy: rng.gen_range(1..=max_freq) as f64 * if rng.gen::<bool>() { 1.0 } else { -1.0 },
                amp: rng.gen_range(0.2..1.0),
                phase: rng.gen_range(0.0..2.0 * PI),
            })
            .collect();
        let total: f64 = t.iter().map(|m| 2.0 * PI * m.fy.abs() * m.amp).sum();
        for m in t.iter_mut() {
            m.amp *= b0 / total;
        }
        Self::from_spec(&FamilySpec::Fourier { terms: t }).expect("random family is admissible")
    }

    pub fn spec(&self) -> Option<&FamilySpec> {
        self.spec.as_ref()
    }

    pub fn describe(&self) -> String {
        match &self.spec {
            Some(s) => serde_json::to_string(s).unwrap_or_default(),
            None => match &self.repr {
                Repr::Custom(c) => c.description(),
                _ => "family".into(),
            },
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.repr, Repr::Identity)
    }

    /// Periodic families satisfy `g(x + 1, y) = g(x, y) + 1` and
    /// `g(x, y + 1) = g(x, y)`, so they descend to the torus.
    pub fn is_periodic(&self) -> bool {
        match &self.repr {
            Repr::Identity | Repr::Complex(_) => true,
            Repr::Shear(s) => *s == 0.0,
            Repr::Modes(t) => t.iter().all(|m| m.fx.fract() == 0.0 && m.fy.fract() == 0.0),
            Repr::Custom(c) => c.periodic(),
        }
    }

    pub fn require_periodic(&self) -> Result<()> {
        if self.is_periodic() {
            Ok(())
        } else {
            Err(Error::InvalidFamily(format!("{} is not periodic on the torus", self.describe())))
        }
    }

    /// `(g, d1 g, d2 g)` at `(x, y)`.
    pub fn eval_with_derivatives(&self, x: f64, y: f64) -> (f64, f64, f64) {
        match &self.repr {
            Repr::Identity => (x, 1.0, 0.0),
            Repr::Shear(s) => (x + s * y, 1.0, *s),
            Repr::Modes(terms) => {
                let (mut g, mut gx, mut gy) = (x, 1.0, 0.0);
                for t in terms {
                    let (v, dx, dy) = t.eval(x, y);
                    g += v;
                    gx += dx;
                    gy += dy;
                }
                (g, gx, gy)
            }
            Repr::Complex(modes) => {
                let (mut g, mut gx, mut gy) = (x, 1.0, 0.0);
                for &(xi, eta, c) in modes.iter() {
                    let th = 2.0 * PI * (xi * x + eta * y);
                    let e = c * C64::new(th.cos(), th.sin());
                    g += e.re;
                    // derivative of Re(c e^{i th}) is Re(i c e^{i th}) dth
                    gx += -e.im * 2.0 * PI * xi;
                    gy += -e.im * 2.0 * PI * eta;
                }
                (g, gx, gy)
            }
            Repr::Custom(c) => c.eval(x, y),
        }
    }

    pub fn g(&self, x: f64, y: f64) -> f64 {
        self.eval_with_derivatives(x, y).0
    }

    /// Sampled bounds `(min d1 g, max d1 g, max |d2 g|)` on an `m x m` grid
    /// of `[0, 1)^2`.
    pub fn sampled_bounds(&self, m: usize) -> (f64, f64, f64) {
        let (mut lo, mut hi, mut b) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
        for i in 0..m {
            for j in 0..m {
                let (_, gx, gy) = self.eval_with_derivatives(i as f64 / m as f64, j as f64 / m as f64);
                lo = lo.min(gx);
                hi = hi.max(gx);
                b = b.max(gy.abs());
            }
        }
        (lo, hi, b)
    }

    /// `(a0, b0)`: `d1 g` in `[1/a0, a0]` and `|d2 g| <= b0`, sampled.
    pub fn constants(&self) -> (f64, f64) {
        let (lo, hi, b) = self.sampled_bounds(96);
        (hi.max(1.0 / lo), b)
    }

    fn check_monotone(&self) -> Result<()> {
        let (lo, _, _) = self.sampled_bounds(64);
        if lo <= 0.0 {
            return Err(Error::InvalidFamily(format!(
                "d1 g reaches {lo:.3e}; curves must not cross"
            )));
        }
        Ok(())
    }

    /// Label `x~` of the curve through `(x, y)`: solves `g(x~, y) = x`.
    pub fn project(&self, x: f64, y: f64) -> Result<f64> {
        self.project_from(x, y, x)
    }

    pub fn project_from(&self, x: f64, y: f64, guess: f64) -> Result<f64> {
        if let Repr::Identity = self.repr {
            return Ok(x);
        }
        if let Repr::Shear(s) = self.repr {
            return Ok(x - s * y);
        }
        let (root, res) = increasing_root(|t| self.g(t, y) - x, guess, 1e-14);
        if !(res <= 1e-10) {
            return Err(Error::ProjectionDiverged { x, y, residual: res });
        }
        Ok(root)
    }

    /// `P` at every grid node, index `i * n + j`.
    pub fn project_grid(&self, grid: TorusGrid) -> Result<Vec<f64>> {
        self.require_periodic()?;
        let n = grid.n();
        let mut out = vec![0.0; grid.len()];
        for j in 0..n {
            let y = j as f64 / n as f64;
            let mut guess = 0.0;
            for i in 0..n {
                let x = i as f64 / n as f64;
                let p = self.project_from(x, y, if i == 0 { x } else { guess + 1.0 / n as f64 })?;
                out[i * n + j] = p;
                guess = p;
            }
        }
        Ok(out)
    }

    /// Chart of the curve with label `anchor`, rotated so that the direction
    /// `(1, u)` becomes horizontal.
    pub fn chart(&self, anchor: f64, u: f64) -> CurveChart {
        CurveChart::new(self.clone(), anchor, u)
    }
}

/// Serializable direction field on curve labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DirectionField {
    Constant { value: f64 },
    /// `amp * sin(2 pi freq x + phase)`.
    Sinusoidal {
        amp: f64,
        #[serde(default = "one")]
        freq: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Piecewise constant and 1-periodic: `values[i]` on `[breaks[i], breaks[i+1])`,
    /// `breaks` increasing in `[0, 1)` starting at 0.
    Step { breaks: Vec<f64>, values: Vec<f64> },
    /// Periodic piecewise-linear through `values[i]` at `i / len`.
    Tabulated { values: Vec<f64> },
}

impl DirectionField {
    pub fn zero() -> Self {
        DirectionField::Constant { value: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DirectionField::Step { breaks, values } => {
                if breaks.is_empty() || breaks.len() != values.len() {
                    return Err(Error::InvalidDirectionField("breaks and values must match".into()));
                }
                if breaks[0] != 0.0 || breaks.windows(2).any(|w| w[1] <= w[0]) || *breaks.last().unwrap() >= 1.0 {
                    return Err(Error::InvalidDirectionField("breaks must increase within [0, 1)".into()));
                }
            }
            DirectionField::Tabulated { values } if values.is_empty() => {
                return Err(Error::InvalidDirectionField("empty table".into()));
            }
            _ => {}
        }
        if self.sup_abs() >= 1.0 {
            return Err(Error::InvalidDirectionField(format!(
                "sup |u| = {} must stay below 1",
                self.sup_abs()
            )));
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            DirectionField::Constant { value } => *value,
            DirectionField::Sinusoidal { amp, freq, phase } => amp * (2.0 * PI * freq * x + phase).sin(),
            DirectionField::Step { breaks, values } => {
                let t = x.rem_euclid(1.0);
                let idx = breaks.partition_point(|&b| b <= t);
                values[idx.saturating_sub(1)]
            }
            DirectionField::Tabulated { values } => {
                let m = values.len();
                let t = x.rem_euclid(1.0) * m as f64;
                let i = (t.floor() as usize).min(m - 1);
                let w = t - i as f64;
                values[i] * (1.0 - w) + values[(i + 1) % m] * w
            }
        }
    }

    pub fn sup_abs(&self) -> f64 {
        match self {
            DirectionField::Constant { value } => value.abs(),
            DirectionField::Sinusoidal { amp, .. } => amp.abs(),
            DirectionField::Step { values, .. } | DirectionField::Tabulated { values } => {
                values.iter().fold(0.0f64, |a, v| a.max(v.abs()))
            }
        }
    }

    /// Number of distinct values if the field is piecewise constant.
    pub fn distinct_values(&self) -> Option<Vec<f64>> {
        match self {
            DirectionField::Constant { value } => Some(vec![*value]),
            DirectionField::Step { values, .. } => {
                let mut v = values.clone();
                v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                v.dedup();
                Some(v)
            }
            _ => None,
        }
    }
}

/// Slopes `u(P(x, y))` at every grid node.
pub fn slope_field(family: &LipschitzFamily, dir: &DirectionField, grid: TorusGrid) -> Result<Vec<f64>> {
    dir.validate()?;
    if family.is_identity() {
        let n = grid.n();
        let mut out = vec![0.0; grid.len()];
        for i in 0..n {
            let u = dir.eval(i as f64 / n as f64);
            out[i * n..(i + 1) * n].fill(u);
        }
        return Ok(out);
    }
    Ok(family.project_grid(grid)?.into_iter().map(|p| dir.eval(p)).collect())
}

/// Curve `Gamma_anchor` in rotated coordinates `x' = X cos + Y sin`,
/// `y' = -X sin + Y cos`, with `tan(theta) = u`. The curve is the graph
/// `x' = g_anchor(y')`.
#[derive(Clone, Debug)]
pub struct CurveChart {
    family: LipschitzFamily,
    anchor: f64,
    theta: f64,
    cos: f64,
    sin: f64,
}

impl CurveChart {
    pub fn new(family: LipschitzFamily, anchor: f64, u: f64) -> Self {
        let theta = u.atan();
        Self { family, anchor, theta, cos: theta.cos(), sin: theta.sin() }
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Period of the chart coordinate `y'` for periodic families.
    pub fn period(&self) -> f64 {
        self.cos
    }

    /// `y'` of the curve point at height `y~`.
    pub fn y_prime(&self, yt: f64) -> f64 {
        yt * self.cos - self.family.g(self.anchor, yt) * self.sin
    }

    /// Curve height `y~` with chart coordinate `y'`.
    pub fn y_tilde(&self, yp: f64) -> f64 {
        let guess = (yp + self.anchor * self.sin) / self.cos;
        increasing_root(|t| self.y_prime(t) - yp, guess, 1e-15).0
    }

    pub fn y_tilde_from(&self, yp: f64, guess: f64) -> f64 {
        increasing_root(|t| self.y_prime(t) - yp, guess, 1e-15).0
    }

    /// Graph function `g_anchor(y')`.
    pub fn graph(&self, yp: f64) -> f64 {
        let yt = self.y_tilde(yp);
        self.family.g(self.anchor, yt) * self.cos + yt * self.sin
    }

    /// Graph value from a known curve height.
    pub fn graph_at_height(&self, yt: f64) -> (f64, f64) {
        let g = self.family.g(self.anchor, yt);
        (g * self.cos + yt * self.sin, yt * self.cos - g * self.sin)
    }

    pub fn to_physical(&self, xp: f64, yp: f64) -> (f64, f64) {
        (xp * self.cos - yp * self.sin, xp * self.sin + yp * self.cos)
    }

    pub fn to_chart(&self, x: f64, y: f64) -> (f64, f64) {
        (x * self.cos + y * self.sin, -x * self.sin + y * self.cos)
    }

    /// Samples `(y', g(y'))` over one period in `y~`, `m` points.
    pub fn sample(&self, m: usize) -> Vec<(f64, f64)> {
        (0..=m)
            .map(|q| {
                let (xp, yp) = self.graph_at_height(q as f64 / m as f64);
                (yp, xp)
            })
            .collect()
    }

    /// Largest difference quotient of `g_anchor` over `m` samples of one period.
    pub fn lipschitz_measured(&self, m: usize) -> f64 {
        let s = self.sample(m);
        s.windows(2)
            .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
            .fold(0.0, f64::max)
    }

    /// Bound `(1 + b0) / (1 - b0)` valid when `|u| <= 1`.
    pub fn lipschitz_bound(b0: f64) -> f64 {
        (1.0 + b0) / (1.0 - b0)
    }
}

/// Chart for a curve: convenience wrapper.
pub fn reparametrize_curve(family: &LipschitzFamily, dir: &DirectionField, anchor: f64) -> CurveChart {
    family.chart(anchor, dir.eval(anchor))
}

/// `int (int_{Gamma_x} |f| ds) dx` over `n` curve labels, each curve sampled at
/// the grid rows and `f` evaluated by exact row interpolation.
pub fn coarea_integral(family: &LipschitzFamily, f: &SampledField) -> Result<f64> {
    family.require_periodic()?;
    let n = f.n();
    let mut total = 0.0;
    for j in 0..n {
        let y = j as f64 / n as f64;
        let mut xs = Vec::with_capacity(n);
        let mut ds = Vec::with_capacity(n);
        for i in 0..n {
            let (g, _, gy) = family.eval_with_derivatives(i as f64 / n as f64, y);
            xs.push(g);
            ds.push((1.0 + gy * gy).sqrt());
        }
        let row: Vec<C64> = (0..n).map(|i| f.get(i, j)).collect();
        let vals = TrigLine::new(n, xs).eval(&row);
        total += vals.iter().zip(&ds).map(|(v, d)| v.norm() * d).sum::<f64>();
    }
    Ok(total / (n * n) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_projection_and_chart() {
        let fam = LipschitzFamily::identity();
        assert_eq!(fam.project(0.3, 0.7).unwrap(), 0.3);
        let ch = fam.chart(0.25, 0.0);
        for yp in [0.0, 0.3, 0.9] {
            assert!((ch.graph(yp) - 0.25).abs() < 1e-14);
        }
    }

    #[test]
    fn shear_chart_is_affine() {
        let fam = LipschitzFamily::from_spec(&FamilySpec::Shear { slope: 0.01 }).unwrap();
        let ch = fam.chart(0.1, 0.0);
        assert!((ch.graph(0.5) - ch.graph(0.0) - 0.005).abs() < 1e-14);
        assert!(!fam.is_periodic());
    }

    #[test]
    fn sinusoidal_constants() {
        let fam = LipschitzFamily::sinusoidal(0.01);
        let (a0, b0) = fam.constants();
        assert!(b0 <= 0.01 + 1e-12 && b0 > 0.0099);
        assert!(a0 <= 1.0 / 0.99 + 1e-9);
        // agrees with the product formula
        let (x, y) = (0.37, 0.81);
        let want = x + 0.01 / (2.0 * PI) * (2.0 * PI * y).sin() * (2.0 * PI * x).sin();
        assert!((fam.g(x, y) - want).abs() < 1e-15);
    }

    #[test]
    fn tabulated_matches_source() {
        let n = 16;
        let src = LipschitzFamily::sinusoidal(0.05);
        let offsets: Vec<f64> = (0..n * n)
            .map(|k| {
                let (i, j) = (k / n, k % n);
                let (x, y) = (i as f64 / n as f64, j as f64 / n as f64);
                src.g(x, y) - x
            })
            .collect();
        let tab = LipschitzFamily::from_spec(&FamilySpec::Tabulated { n, offsets }).unwrap();
        let (a, b) = (0.123, 0.456);
        let (g1, gx1, gy1) = src.eval_with_derivatives(a, b);
        let (g2, gx2, gy2) = tab.eval_with_derivatives(a, b);
        assert!((g1 - g2).abs() < 1e-13 && (gx1 - gx2).abs() < 1e-11 && (gy1 - gy2).abs() < 1e-11);
    }

    #[test]
    fn crossing_family_rejected() {
        let t = FourierTerm { fx: 1.0, fy: 0.0, amp: 0.3, phase: 0.0 };
        assert!(LipschitzFamily::from_spec(&FamilySpec::Fourier { terms: vec![t] }).is_err());
    }

    #[test]
    fn step_field_lookup() {
        let u = DirectionField::Step { breaks: vec![0.0, 0.5], values: vec![0.1, -0.2] };
        u.validate().unwrap();
        assert_eq!(u.eval(0.2), 0.1);
        assert_eq!(u.eval(0.5), -0.2);
        assert_eq!(u.eval(1.2), 0.1);
        assert_eq!(u.distinct_values().unwrap().len(), 2);
        assert!(DirectionField::Constant { value: 1.5 }.validate().is_err());
    }

    #[test]
    fn coarea_of_constant_on_identity() {
        let g = TorusGrid::new(32).unwrap();
        let f = SampledField::from_real_fn(g, |_, _| 1.0);
        let v = coarea_integral(&LipschitzFamily::identity(), &f).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let s = FamilySpec::Sinusoidal { b0: 0.01, fx: 1.0, fy: 2.0 };
        let txt = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<FamilySpec>(&txt).unwrap(), s);
        let d: DirectionField = serde_json::from_str(r#"{"kind":"sinusoidal","amp":0.1}"#).unwrap();
        assert_eq!(d.eval(0.25), 0.1);
    }

    proptest! {
        #[test]
        fn projection_inverts_g(seed in 0u64..50, x in 0.0f64..1.0, y in 0.0f64..1.0) {
            let fam = LipschitzFamily::random(seed, 0.05, 4, 5);
            let p = fam.project(x, y).unwrap();
            prop_assert!((fam.g(p, y) - x).abs() < 1e-12);
        }

        #[test]
        fn chart_lipschitz_within_bound(seed in 0u64..30, anchor in 0.0f64..1.0, u in -1.0f64..1.0) {
            let fam = LipschitzFamily::random(seed, 0.05, 3, 4);
            let b0 = 0.05;
            let ch = fam.chart(anchor, u);
            prop_assert!(ch.lipschitz_measured(256) <= CurveChart::lipschitz_bound(b0) + 1e-6);
        }

        #[test]
        fn chart_round_trip(seed in 0u64..30, anchor in 0.0f64..1.0, yp in -0.5f64..0.5, u in -0.9f64..0.9) {
            let fam = LipschitzFamily::random(seed, 0.05, 3, 4);
            let ch = fam.chart(anchor, u);
            let xp = ch.graph(yp);
            let (x, y) = ch.to_physical(xp, yp);
            prop_assert!((fam.project(x, y).unwrap() - anchor).abs() < 1e-10);
        }
    }
}
