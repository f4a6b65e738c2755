//! Reduction of a bi-Lipschitz family `g0` with a unit field `v0` constant on
//! its curves to finitely many families of the form `(g(x, y), y)`.
//!
//! The circle is cut into `N > 6 pi / d0` arcs centered at `2 pi i / N`.
//! For each arc the image plane is rotated so the arc is bisected by the
//! `x`-axis, the curves `y -> g0(s, y)` are relabelled by where they cross the
//! new `x`-axis, and `g` is read off by solving `(g(x, y), y) = g0(s, y')`.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::family::{CustomFamily, DirectionField, LipschitzFamily};
use crate::numerics::increasing_root;

/// A map of the plane, `g0` or `v0`.
pub type PlanarMap = Arc<dyn Fn(f64, f64) -> (f64, f64) + Send + Sync>;

#[derive(Clone, Debug)]
pub struct ReductionOptions {
    /// Samples per axis on `[0, 1]^2` for the hypothesis checks.
    pub samples: usize,
    /// Nodes of the tabulated direction field.
    pub table: usize,
    /// Tolerance of the constancy-in-`y` check.
    pub tol: f64,
}

impl Default for ReductionOptions {
    fn default() -> Self {
        Self { samples: 16, table: 256, tol: 1e-8 }
    }
}

/// One arc of the decomposition.
#[derive(Clone, Debug)]
pub struct Sector {
    pub index: usize,
    pub center: f64,
    pub half_width: f64,
    /// Whether some sampled curve has its direction in this arc.
    pub nonempty: bool,
    /// Present for nonempty arcs.
    pub family: Option<LipschitzFamily>,
    pub direction: Option<DirectionField>,
    pub b0: f64,
    pub c0: f64,
    /// Sampled `max |d2 g|` and `max |u|` over curves of this arc.
    pub measured_b0: f64,
    pub measured_u: f64,
    pub bounds_hold: bool,
}

fn rotate((x, y): (f64, f64), a: f64) -> (f64, f64) {
    let (s, c) = a.sin_cos();
    (c * x - s * y, s * x + c * y)
}

fn wrap_angle(a: f64) -> f64 {
    let t = (a + PI).rem_euclid(2.0 * PI) - PI;
    if t == -PI {
        PI
    } else {
        t
    }
}

/// Smallest integer strictly above `6 pi / d0`.
pub fn sector_count(d0: f64) -> Result<usize> {
    if !(d0 > 0.0) || !d0.is_finite() {
        return Err(Error::Config(format!("angle d0 = {d0} must be positive")));
    }
    Ok((6.0 * PI / d0).floor() as usize + 1)
}

/// The family `g` of one arc, in the rotated image frame.
struct SectorFamily {
    g0: PlanarMap,
    theta: f64,
    periodic: bool,
}

impl SectorFamily {
    fn image(&self, s: f64, t: f64) -> (f64, f64) {
        rotate((self.g0)(s, t), -self.theta)
    }

    /// Parameters `(s, t)` with `image(s, t) = (x, 0)`, by damped Newton.
    fn label(&self, x: f64) -> (f64, f64) {
        let (mut s, mut t) = rotate((x, 0.0), self.theta);
        let h = 1e-6;
        for _ in 0..100 {
            let (px, py) = self.image(s, t);
            let (rx, ry) = (px - x, py);
            if rx.abs() + ry.abs() < 1e-13 {
                break;
            }
            let (ax, ay) = self.image(s + h, t);
            let (bx, by) = self.image(s, t + h);
            let (j11, j21) = ((ax - px) / h, (ay - py) / h);
            let (j12, j22) = ((bx - px) / h, (by - py) / h);
            let det = j11 * j22 - j12 * j21;
            if det.abs() < 1e-14 {
                break;
            }
            s -= (j22 * rx - j12 * ry) / det;
            t -= (-j21 * rx + j11 * ry) / det;
        }
        (s, t)
    }

    fn g(&self, x: f64, y: f64) -> f64 {
        let (s, t0) = self.label(x);
        // the second image coordinate is monotone along the curve
        let h = 1e-6;
        let up = self.image(s, t0 + h).1 > self.image(s, t0 - h).1;
        let sign = if up { 1.0 } else { -1.0 };
        let (tp, _) = increasing_root(|t| sign * (self.image(s, t0 + sign * t).1 - y), sign * y, 1e-14);
        self.image(s, t0 + sign * tp).0
    }
}

impl CustomFamily for SectorFamily {
    fn eval(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let h = 1e-5;
        let g = self.g(x, y);
        let d1 = (self.g(x + h, y) - self.g(x - h, y)) / (2.0 * h);
        let d2 = (self.g(x, y + h) - self.g(x, y - h)) / (2.0 * h);
        (g, d1, d2)
    }

    fn periodic(&self) -> bool {
        self.periodic
    }

    fn description(&self) -> String {
        format!("reduced family at rotation {:.6}", self.theta)
    }
}

/// Splits `(g0, v0)` into arcs of directions and builds the family and the
/// direction field of each nonempty arc.
pub fn reduce_corollary(g0: PlanarMap, v0: PlanarMap, d0: f64, opts: &ReductionOptions) -> Result<Vec<Sector>> {
    let n = sector_count(d0)?;
    let m = opts.samples.max(2);
    let coords: Vec<f64> = (0..m).map(|i| i as f64 / (m - 1) as f64).collect();

    // hypotheses on the sampled square
    let h = 1e-6;
    let mut curve_angle = Vec::with_capacity(m);
    for &s in &coords {
        let p0 = g0(s, 0.0);
        let (ax, ay) = v0(p0.0, p0.1);
        for &t in &coords {
            let p = g0(s, t);
            let v = v0(p.0, p.1);
            if (v.0 - ax).abs() + (v.1 - ay).abs() > opts.tol {
                return Err(Error::Hypothesis(format!("v0(g0(x, y)) is not constant in y at x = {s}, y = {t}")));
            }
            let q = g0(s, t + h);
            let d = (q.0 - p.0, q.1 - p.1);
            let cos = (d.0 * v.0 + d.1 * v.1).abs() / (d.0.hypot(d.1) * v.0.hypot(v.1));
            if cos.min(1.0).acos() < d0 - 1e-9 {
                return Err(Error::Hypothesis(format!("angle between d2 g0 and v0 is below d0 at x = {s}, y = {t}")));
            }
        }
        curve_angle.push(ay.atan2(ax));
    }

    let half = PI / n as f64;
    let b0 = 1.0 / (d0 / 2.0).tan();
    let ubound = (d0 / 6.0).tan();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let center = 2.0 * PI * i as f64 / n as f64;
        let member = |a: f64| {
            let d = wrap_angle(a - center);
            d >= -half && d < half
        };
        let nonempty = curve_angle.iter().any(|&a| member(a));
        let mut sector = Sector {
            index: i,
            center,
            half_width: half,
            nonempty,
            family: None,
            direction: None,
            b0,
            c0: ubound / b0,
            measured_b0: 0.0,
            measured_u: 0.0,
            bounds_hold: true,
        };
        if !nonempty {
            out.push(sector);
            continue;
        }
        let mut fam = SectorFamily { g0: g0.clone(), theta: center, periodic: false };
        fam.periodic = coords.iter().all(|&y| (fam.g(0.0, y) + 1.0 - fam.g(1.0, y)).abs() < 1e-9 && (fam.g(0.5, y) - fam.g(0.5, y + 1.0)).abs() < 1e-9);

        // u on the relabelled curves, clamped to the arc outside it
        let slope_at = |x: f64| {
            let (s, t) = fam.label(x);
            let p = g0(s, t);
            let v = v0(p.0, p.1);
            let d = wrap_angle(v.1.atan2(v.0) - center);
            (d.clamp(-half, half).tan(), member(v.1.atan2(v.0)))
        };
        let values: Vec<f64> = (0..opts.table.max(2)).map(|k| slope_at(k as f64 / opts.table.max(2) as f64).0).collect();

        for &x in &coords {
            let (u, inside) = slope_at(x);
            if !inside {
                continue;
            }
            sector.measured_u = sector.measured_u.max(u.abs());
            for &y in &coords {
                let (_, _, d2) = fam.eval(x, y);
                sector.measured_b0 = sector.measured_b0.max(d2.abs());
            }
        }
        sector.bounds_hold = sector.measured_b0 <= b0 * (1.0 + 1e-6) && sector.measured_u <= ubound * (1.0 + 1e-9);
        sector.family = Some(LipschitzFamily::from_custom(Arc::new(fam)));
        sector.direction = Some(DirectionField::Tabulated { values });
        out.push(sector);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity() -> PlanarMap {
        Arc::new(|x, y| (x, y))
    }

    #[test]
    fn horizontal_field_gives_one_vertical_family() {
        let secs = reduce_corollary(identity(), Arc::new(|_, _| (1.0, 0.0)), PI / 2.0, &ReductionOptions { samples: 6, table: 16, ..Default::default() }).unwrap();
        assert_eq!(secs.len(), 13);
        let live: Vec<&Sector> = secs.iter().filter(|s| s.nonempty).collect();
        assert_eq!(live.len(), 1);
        assert_eq!(live[0].index, 0);
        let fam = live[0].family.as_ref().unwrap();
        for &(x, y) in &[(0.1, 0.2), (0.7, -0.4), (0.33, 0.9)] {
            assert!((fam.g(x, y) - x).abs() < 1e-10);
        }
        match live[0].direction.as_ref().unwrap() {
            DirectionField::Tabulated { values } => assert!(values.iter().all(|u| u.abs() < 1e-12)),
            other => panic!("{other:?}"),
        }
        assert!(live[0].bounds_hold);
    }

    #[test]
    fn oscillating_field_stays_within_bounds() {
        let v0: PlanarMap = Arc::new(|x, _| {
            let (a, b) = (1.0, 0.1 * (2.0 * PI * x).sin());
            let r = f64::hypot(a, b);
            (a / r, b / r)
        });
        let d0 = PI / 3.0;
        let secs = reduce_corollary(identity(), v0, d0, &ReductionOptions { samples: 9, table: 32, ..Default::default() }).unwrap();
        assert_eq!(secs.len(), 19);
        let live: Vec<&Sector> = secs.iter().filter(|s| s.nonempty).collect();
        assert_eq!(live.len(), 1);
        // independent bound: |u| = 0.1 |sin| <= 0.1 < tan(pi/18)
        assert!(live[0].measured_u <= 0.1 + 1e-9 && live[0].measured_u > 0.09);
        assert!(live[0].measured_u <= (d0 / 6.0).tan());
        assert!(live[0].bounds_hold);
        assert!(live[0].c0 < 1.0);
    }

    #[test]
    fn rotated_frame_relabels_curves() {
        // lines y -> (s, y) seen from a field pointing up-right at 60 degrees
        let v0: PlanarMap = Arc::new(|_, _| (0.5, 3f64.sqrt() / 2.0));
        let secs = reduce_corollary(identity(), v0, 0.4, &ReductionOptions { samples: 4, table: 8, ..Default::default() }).unwrap();
        let live: Vec<&Sector> = secs.iter().filter(|s| s.nonempty).collect();
        assert_eq!(live.len(), 1);
        let s = live[0];
        let fam = s.family.as_ref().unwrap();
        // vertical lines in the rotated frame have slope dx/dy = tan(center)
        let (_, _, d2) = fam.eval_with_derivatives(0.2, 0.3);
        assert!((d2 - s.center.tan()).abs() < 1e-5, "{d2} vs {}", s.center.tan());
        assert!((fam.g(0.2, 0.0) - 0.2).abs() < 1e-10);
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let v: PlanarMap = Arc::new(|_, _| (1.0, 0.0));
        assert!(matches!(reduce_corollary(identity(), v.clone(), 0.0, &ReductionOptions::default()), Err(Error::Config(_))));
        let bad: PlanarMap = Arc::new(|_, y| (y.cos(), y.sin()));
        assert!(matches!(reduce_corollary(identity(), bad, 0.5, &ReductionOptions::default()), Err(Error::Hypothesis(_))));
        // tangent field violates the angle condition
        let tangent: PlanarMap = Arc::new(|_, _| (0.0, 1.0));
        assert!(matches!(reduce_corollary(identity(), tangent, 0.5, &ReductionOptions::default()), Err(Error::Hypothesis(_))));
        assert_eq!(sector_count(PI / 2.0).unwrap(), 13);
        assert_eq!(sector_count(PI / 3.0).unwrap(), 19);
    }
}
