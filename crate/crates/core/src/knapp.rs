//! The Knapp example on a plane patch: `f = 1_{B_1}` and the radial field
//! `v(x) = x / |x|` on an upper cone, where `|H_v f(x)| ~ 1 / |x|` and the
//! `L^2` norm over the cone diverges logarithmically.
//!
//! Outside the cone the field is the nearest boundary ray direction, inside
//! the unit ball it is vertical; only values on the cone enter the report.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::fit_line;

/// Source function of the experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KnappSource {
    /// Indicator of the ball of the given radius at the origin.
    Ball { radius: f64 },
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnappConfig {
    /// Half side of the patch `[-R, R]^2`.
    pub radius: f64,
    /// Angle between the cone boundary and the vertical axis, below `pi/4`.
    pub cone_half_angle: f64,
    /// Grid points per unit length.
    pub cells_per_unit: usize,
    /// Rays used for the power fit.
    pub rays: usize,
    pub samples_per_ray: usize,
    pub source: KnappSource,
}

impl Default for KnappConfig {
    fn default() -> Self {
        Self { radius: 32.0, cone_half_angle: std::f64::consts::PI / 6.0, cells_per_unit: 8, rays: 5, samples_per_ray: 24, source: KnappSource::Ball { radius: 1.0 } }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KnappReport {
    pub config: KnappConfig,
    /// Fitted power of `|H_v f|` against `|x|` on `[2, R/2]`, over all rays.
    pub fitted_power: f64,
    pub r_squared: f64,
    pub ray_powers: Vec<f64>,
    /// Dyadic radii `4, 8, ..., R` and `||H_v f||^2` over the cone inside each.
    pub radii: Vec<f64>,
    pub squared_norms: Vec<f64>,
    /// `||.||^2_{B_{2r}} - ||.||^2_{B_r}` between consecutive radii.
    pub increments: Vec<f64>,
    /// `max / min - 1` over the increments.
    pub increment_spread: f64,
}

/// The extended field at `(x, y)`, a unit vector.
pub fn knapp_field(x: f64, y: f64, half_angle: f64) -> (f64, f64) {
    let r = x.hypot(y);
    if r <= 1.0 {
        return (0.0, 1.0);
    }
    // angle from the vertical axis, clamped to the cone
    let a = x.atan2(y).clamp(-half_angle, half_angle);
    (a.sin(), a.cos())
}

pub fn in_cone(x: f64, y: f64, half_angle: f64) -> bool {
    y > 0.0 && x.atan2(y).abs() <= half_angle
}

/// `p.v. int f(p - t v) dt / t` for the configured source: the line meets
/// the ball in a chord `[t1, t2]` and the integral of `dt / t` over it is a
/// logarithm. When the chord straddles `t = 0` the symmetric part cancels.
pub fn knapp_hilbert(source: KnappSource, x: f64, y: f64, v: (f64, f64)) -> f64 {
    let rho = match source {
        KnappSource::Zero => return 0.0,
        KnappSource::Ball { radius } => radius,
    };
    // |p - t v|^2 = t^2 - 2 t (p.v) + |p|^2 < rho^2
    let b = x * v.0 + y * v.1;
    let disc = b * b - (x * x + y * y - rho * rho);
    if disc <= 0.0 {
        return 0.0;
    }
    let s = disc.sqrt();
    let (t1, t2) = (b - s, b + s);
    let (lo, hi, sign) = if t1 > 0.0 {
        (t1, t2, 1.0)
    } else if t2 < 0.0 {
        (-t2, -t1, -1.0)
    } else if t2 >= -t1 {
        (-t1, t2, 1.0)
    } else {
        (t2, -t1, -1.0)
    };
    if hi <= lo {
        return 0.0;
    }
    sign * (hi / lo).ln()
}

/// Runs the experiment on the grid of the patch.
pub fn run_knapp(cfg: &KnappConfig) -> Result<KnappReport> {
    if cfg.radius < 4.0 {
        return Err(Error::Config(format!("Knapp radius {} is below 4, too small to fit", cfg.radius)));
    }
    if !(cfg.cone_half_angle > 0.0 && cfg.cone_half_angle < std::f64::consts::FRAC_PI_4) {
        return Err(Error::Config("cone half angle must lie in (0, pi/4)".into()));
    }
    if cfg.rays == 0 || cfg.samples_per_ray < 2 || cfg.cells_per_unit == 0 {
        return Err(Error::Config("Knapp experiment needs rays, samples and cells".into()));
    }
    let ha = cfg.cone_half_angle;
    let eval = |x: f64, y: f64| knapp_hilbert(cfg.source, x, y, knapp_field(x, y, ha));

    let (lo, hi) = (2.0f64, cfg.radius / 2.0);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut ray_powers = Vec::new();
    for q in 0..cfg.rays {
        let a = if cfg.rays == 1 { 0.0 } else { -ha + 2.0 * ha * (q as f64 + 0.5) / cfg.rays as f64 };
        let (mut rx, mut ry) = (Vec::new(), Vec::new());
        for i in 0..cfg.samples_per_ray {
            let r = lo * (hi / lo).powf(i as f64 / (cfg.samples_per_ray - 1) as f64);
            let h = eval(r * a.sin(), r * a.cos()).abs();
            if h > 0.0 {
                rx.push(r.ln());
                ry.push(h.ln());
            }
        }
        if rx.len() >= 2 {
            ray_powers.push(fit_line(&rx, &ry).slope);
        }
        xs.extend(rx);
        ys.extend(ry);
    }
    let (fitted_power, r_squared) = if xs.len() >= 2 {
        let f = fit_line(&xs, &ys);
        (f.slope, f.r_squared)
    } else {
        (0.0, 0.0)
    };

    let mut radii = Vec::new();
    let mut r = 4.0;
    while r <= cfg.radius + 1e-9 {
        radii.push(r);
        r *= 2.0;
    }
    let h = 1.0 / cfg.cells_per_unit as f64;
    let m = (cfg.radius * cfg.cells_per_unit as f64).round() as i64;
    let mut squared_norms = vec![0.0; radii.len()];
    for i in -m..=m {
        for j in 1..=m {
            let (x, y) = ((i as f64 + 0.5) * h, (j as f64 - 0.5) * h);
            let d = x.hypot(y);
            if d <= 1.0 || d > cfg.radius || !in_cone(x, y, ha) {
                continue;
            }
            let v = eval(x, y);
            let e = v * v * h * h;
            for (k, &rk) in radii.iter().enumerate() {
                if d <= rk {
                    squared_norms[k] += e;
                }
            }
        }
    }
    let increments: Vec<f64> = squared_norms.windows(2).map(|w| w[1] - w[0]).collect();
    let increment_spread = if increments.is_empty() {
        0.0
    } else {
        let mx = increments.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mn = increments.iter().cloned().fold(f64::INFINITY, f64::min);
        if mn > 0.0 {
            mx / mn - 1.0
        } else {
            0.0
        }
    };
    Ok(KnappReport { config: cfg.clone(), fitted_power, r_squared, ray_powers, radii, squared_norms, increments, increment_spread })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hilbert_on_the_cone_is_the_chord_logarithm() {
        for &(x, y) in &[(0.0, 3.0), (1.0, 5.0), (-2.0, 7.0)] {
            let v = knapp_field(x, y, 0.5);
            let r: f64 = f64::hypot(x, y);
            let want = ((r + 1.0) / (r - 1.0)).ln();
            assert!((knapp_hilbert(KnappSource::Ball { radius: 1.0 }, x, y, v) - want).abs() < 1e-13);
        }
        // line missing the ball, and a chord through the evaluation point
        assert_eq!(knapp_hilbert(KnappSource::Ball { radius: 1.0 }, 3.0, 0.0, (0.0, 1.0)), 0.0);
        let c = knapp_hilbert(KnappSource::Ball { radius: 1.0 }, 0.5, 0.0, (1.0, 0.0));
        assert!((c - 3f64.ln()).abs() < 1e-13, "{c}");
    }

    #[test]
    fn field_is_radial_on_the_cone() {
        let (vx, vy) = knapp_field(1.0, 4.0, 0.5);
        assert!((vx - 1.0 / 17f64.sqrt()).abs() < 1e-14 && (vy - 4.0 / 17f64.sqrt()).abs() < 1e-14);
        assert_eq!(knapp_field(0.1, 0.1, 0.5), (0.0, 1.0));
        let (vx, vy) = knapp_field(5.0, 0.0, 0.5);
        assert!((vx - 0.5f64.sin()).abs() < 1e-14 && (vy - 0.5f64.cos()).abs() < 1e-14);
    }

    #[test]
    fn decay_and_divergence() {
        let rep = run_knapp(&KnappConfig { radius: 16.0, cells_per_unit: 4, ..Default::default() }).unwrap();
        assert!((rep.fitted_power + 1.0).abs() < 0.15, "{}", rep.fitted_power);
        assert_eq!(rep.radii, vec![4.0, 8.0, 16.0]);
        assert!(rep.increments.iter().all(|&d| d > 0.0));
        let zero = run_knapp(&KnappConfig { radius: 8.0, source: KnappSource::Zero, ..Default::default() }).unwrap();
        assert!(zero.squared_norms.iter().all(|&s| s == 0.0));
        assert!(run_knapp(&KnappConfig { radius: 2.0, ..Default::default() }).is_err());
    }
}
