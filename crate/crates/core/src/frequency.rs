//! Fourier multipliers: the cone projection, vertical Littlewood-Paley
//! pieces `P_k` and the one-sided single-scale profiles `psi_l` behind the
//! operators `H_l`.

use std::f64::consts::PI;
use std::io::Write;

use crate::error::Result;
use crate::grid::{apply_multiplier, spectral_transform, SampledField, TorusGrid, C64};
use crate::numerics::gauss_legendre_on;
use crate::profile::{psi0_plus, LpProfile, PSI0_SUPPORT};

/// `psi_l(tau) = psi_0^+(2^{-(l + OFFSET)} tau)`: the positive-side support of
/// `psi_l` is `[2^{l+1}, 2^{l+3}]`. With this offset `H_l P_k = 0` whenever
/// `l > k` and the slope satisfies `|s| < 1`.
pub const H_SCALE_OFFSET: i32 = 2;

/// Indicator of the cone `|xi| <= |eta|`.
pub fn cone(xi: f64, eta: f64) -> f64 {
    if xi.abs() <= eta.abs() {
        1.0
    } else {
        0.0
    }
}

/// Symbol of `P_k`: `profile(2^{-k} |eta|)` restricted to the cone.
pub fn lp_symbol(k: i64, profile: LpProfile) -> impl Fn(f64, f64) -> f64 {
    let s = 2f64.powi(-(k as i32));
    move |xi, eta| profile.eval(s * eta.abs()) * cone(xi, eta)
}

/// Symbol of the vertical projection: `profile(2^{-k} |eta|)`, no cone.
pub fn vertical_symbol(k: i64, profile: LpProfile) -> impl Fn(f64, f64) -> f64 {
    let s = 2f64.powi(-(k as i32));
    move |_, eta| profile.eval(s * eta.abs())
}

/// `psi_l(tau)`.
pub fn single_scale_profile(l: i64, tau: f64) -> f64 {
    psi0_plus(2f64.powi(-(l as i32 + H_SCALE_OFFSET)) * tau)
}

/// Support `[lo, hi]` of `psi_l` on the positive side.
pub fn single_scale_support(l: i64) -> (f64, f64) {
    let s = 2f64.powi(l as i32 + H_SCALE_OFFSET);
    (PSI0_SUPPORT.0 * s, PSI0_SUPPORT.1 * s)
}

/// Kernel `psi_l^vee(t) = int psi_l(tau) e^{2 pi i tau t} d tau`, by
/// Gauss-Legendre quadrature over the support.
pub fn single_scale_kernel(l: i64, t: f64) -> C64 {
    let (a, b) = single_scale_support(l);
    let osc = (b * t).abs();
    let panels = 16 + (2.0 * osc) as usize;
    let h = (b - a) / panels as f64;
    let mut acc = C64::new(0.0, 0.0);
    for p in 0..panels {
        for (tau, w) in gauss_legendre_on(24, a + p as f64 * h, a + (p + 1) as f64 * h) {
            let ph = 2.0 * PI * tau * t;
            acc += C64::new(ph.cos(), ph.sin()) * (w * single_scale_profile(l, tau));
        }
    }
    acc
}

pub fn cone_project(f: &SampledField) -> SampledField {
    apply_multiplier(f, |xi, eta| C64::new(cone(xi, eta), 0.0))
}

/// `P_k f` with the partition profile and the cone.
pub fn lp_project(f: &SampledField, k: i64) -> Result<SampledField> {
    lp_project_with(f, k, LpProfile::Partition)
}

pub fn lp_project_with(f: &SampledField, k: i64, profile: LpProfile) -> Result<SampledField> {
    f.grid().check_scale(k)?;
    let m = lp_symbol(k, profile);
    Ok(apply_multiplier(f, |xi, eta| C64::new(m(xi, eta), 0.0)))
}

/// Vertical projection (no cone), as applied line by line along vertical lines.
pub fn vertical_project(f: &SampledField, k: i64, profile: LpProfile) -> Result<SampledField> {
    f.grid().check_scale(k)?;
    let m = vertical_symbol(k, profile);
    Ok(apply_multiplier(f, |xi, eta| C64::new(m(xi, eta), 0.0)))
}

/// `(sum_k |P_k f|^2)^{1/2}` over the band, and its `L^2` ratio to the norm of
/// the cone part of `f`.
pub fn square_function(f: &SampledField, band: (i64, i64)) -> Result<(SampledField, f64)> {
    let mut acc = vec![0.0; f.grid().len()];
    for k in band.0..=band.1 {
        let p = lp_project(f, k)?;
        for (a, z) in acc.iter_mut().zip(p.data()) {
            *a += z.norm_sqr();
        }
    }
    let sf = SampledField::new(f.grid(), acc.iter().map(|&v| C64::new(v.sqrt(), 0.0)).collect())?;
    let base = cone_project(f).norm();
    let ratio = if base > 0.0 { sf.norm() / base } else { 0.0 };
    Ok((sf, ratio))
}

/// Table of symbol values for CSV export.
pub struct MultiplierTable {
    pub grid: TorusGrid,
    pub weights: Vec<f64>,
}

impl MultiplierTable {
    pub fn sample(grid: TorusGrid, m: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.n();
        let mut weights = Vec::with_capacity(grid.len());
        for a in 0..n {
            for b in 0..n {
                weights.push(m(grid.freq(a) as f64, grid.freq(b) as f64));
            }
        }
        Self { grid, weights }
    }

    /// CSV with header `xi,eta,weight`, nonzero weights only.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.grid.n();
        writeln!(w, "xi,eta,weight")?;
        for a in 0..n {
            for b in 0..n {
                let v = self.weights[a * n + b];
                if v != 0.0 {
                    writeln!(w, "{},{},{:.17e}", self.grid.freq(a), self.grid.freq(b), v)?;
                }
            }
        }
        Ok(())
    }
}

/// Spectral energy of `f` per frequency bin, useful for diagnostics.
pub fn spectral_energy(f: &SampledField) -> Vec<f64> {
    spectral_transform(f).data().iter().map(|z| z.norm_sqr()).collect()
}
