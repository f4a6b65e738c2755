//! Direction intervals, the multipliers `m_{k,omega}`, tiles and wave packets.
//!
//! For `omega` in `D_l` (dyadic intervals of length `2^{-l}` in `[-2, 2]`)
//! the tiles of `U_{k,omega}` are the parallelograms
//! `|x - c_x| <= L/2, |y - c_y - sigma (x - c_x)| <= W/2` with `W = 2^{-k}`,
//! `L = 2^{-k+l}` and long-side slope `sigma = -c(omega)`. Their centers form the
//! lattice spanned by `a1 = (L, sigma L)` and `a2 = (0, W)`, which lies on the
//! grid and is periodic on the torus when `l < k`.
//!
//! Wave packets are `phi_s = alpha sqrt(m_{k,omega})` translated to the tile
//! center, with `alpha` making `||phi_s||_2 = 1` exactly on the grid.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::directional::DirectionalOperator;
use crate::error::{Error, Result};
use crate::grid::{fft2, SampledField, Spectrum, TorusGrid, C64, ZERO};
use crate::numerics::gauss_legendre_on;
use crate::profile::{beta, beta_tilde, sqrt_beta, sqrt_beta_tilde};

/// The constant `c` in `beta_omega(x) = beta(2^{l+c} (x - c_{omega_1}))`.
pub const BUMP_SHIFT: i32 = 3;

/// Dyadic interval `[-2 + j 2^{-l}, -2 + (j+1) 2^{-l})`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DirectionInterval {
    pub l: u32,
    pub index: u32,
}

impl DirectionInterval {
    pub fn new(l: u32, index: u32) -> Result<Self> {
        if l > 20 || index >= 4 << l {
            return Err(Error::Config(format!("no direction interval {index} at level {l}")));
        }
        Ok(Self { l, index })
    }

    /// All of `D_l`, left to right.
    pub fn all(l: u32) -> Vec<Self> {
        (0..4u32 << l).map(|index| Self { l, index }).collect()
    }

    /// The interval of `D_l` containing `x`, if `x` is in `[-2, 2)`.
    pub fn containing(l: u32, x: f64) -> Option<Self> {
        let j = ((x + 2.0) * 2f64.powi(l as i32)).floor();
        (j >= 0.0 && j < (4u64 << l) as f64).then(|| Self { l, index: j as u32 })
    }

    pub fn length(&self) -> f64 {
        2f64.powi(-(self.l as i32))
    }

    pub fn start(&self) -> f64 {
        -2.0 + self.index as f64 * self.length()
    }

    pub fn end(&self) -> f64 {
        self.start() + self.length()
    }

    pub fn center(&self) -> f64 {
        self.start() + 0.5 * self.length()
    }

    /// Center of the right half `omega_1`.
    pub fn right_center(&self) -> f64 {
        self.start() + 0.75 * self.length()
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.start() && x < self.end()
    }

    pub fn in_right_half(&self, x: f64) -> bool {
        x >= self.center() && x < self.end()
    }

    pub fn in_left_half(&self, x: f64) -> bool {
        x >= self.start() && x < self.center()
    }
}

/// `beta_omega(x)`; supported where `|x - c_{omega_1}| < 2^{-l-2}`.
pub fn beta_omega(w: &DirectionInterval, x: f64) -> f64 {
    beta(2f64.powi(w.l as i32 + BUMP_SHIFT) * (x - w.right_center()))
}

fn sqrt_beta_omega(w: &DirectionInterval, x: f64) -> f64 {
    sqrt_beta(2f64.powi(w.l as i32 + BUMP_SHIFT) * (x - w.right_center()))
}

/// `beta_l(x) = sum_{omega in D_l} beta_omega(x)`. The bumps are disjoint, so
/// only the interval containing `x` can contribute.
pub fn beta_l(l: u32, x: f64) -> f64 {
    DirectionInterval::containing(l, x).map_or(0.0, |w| beta_omega(&w, x))
}

/// `int beta`, by composite Gauss-Legendre.
fn beta_integral() -> f64 {
    (0..64).flat_map(|p| gauss_legendre_on(16, -2.0 + p as f64 / 16.0, -2.0 + (p + 1) as f64 / 16.0)).map(|(x, w)| w * beta(x)).sum()
}

/// The constant value `delta` of `gamma_l` on `[-1, 1]`:
/// `2^l` bumps of mass `2^{-l-c} int beta`, halved.
pub fn gamma_delta() -> f64 {
    beta_integral() * 2f64.powi(-BUMP_SHIFT)
}

/// `gamma_l(x) = (1/2) int_{-1}^{1} beta_l(x + t) dt`, integrating each bump
/// over its intersection with `[x - 1, x + 1]`.
pub fn gamma_l(l: u32, x: f64) -> f64 {
    let (a, b) = (x - 1.0, x + 1.0);
    let half_width = 2f64.powi(-(l as i32) - BUMP_SHIFT - 1 + 2);
    let mut acc = 0.0;
    for w in DirectionInterval::all(l) {
        let c = w.right_center();
        let lo = a.max(c - half_width);
        let hi = b.min(c + half_width);
        if hi <= lo {
            continue;
        }
        let panels = 32;
        let h = (hi - lo) / panels as f64;
        for p in 0..panels {
            for (t, wt) in gauss_legendre_on(16, lo + p as f64 * h, lo + (p + 1) as f64 * h) {
                acc += wt * beta_omega(&w, t);
            }
        }
    }
    0.5 * acc
}

fn ratio(xi: f64, eta: f64) -> Option<f64> {
    (eta != 0.0).then(|| xi / eta)
}

/// `m_{k,omega}(xi, eta) = beta_tilde(2^{-k} eta) beta_omega(xi / eta)`, 0 at `eta = 0`.
pub fn m_k_omega(k: i64, w: DirectionInterval) -> impl Fn(f64, f64) -> f64 {
    let s = 2f64.powi(-(k as i32));
    move |xi, eta| ratio(xi, eta).map_or(0.0, |r| beta_tilde(s * eta) * beta_omega(&w, r))
}

/// `m_{k,l,t}(xi, eta) = beta_tilde(2^{-k} eta) beta_l(t + xi / eta)`.
pub fn m_k_l_t(k: i64, l: u32, t: f64) -> impl Fn(f64, f64) -> f64 {
    let s = 2f64.powi(-(k as i32));
    move |xi, eta| ratio(xi, eta).map_or(0.0, |r| beta_tilde(s * eta) * beta_l(l, t + r))
}

/// `m_{k,l}(xi, eta) = beta_tilde(2^{-k} eta) gamma_l(xi / eta)`.
pub fn m_k_l(k: i64, l: u32) -> impl Fn(f64, f64) -> f64 {
    let s = 2f64.powi(-(k as i32));
    move |xi, eta| {
        let b = beta_tilde(s * eta);
        if b == 0.0 {
            return 0.0;
        }
        ratio(xi, eta).map_or(0.0, |r| b * gamma_l(l, r))
    }
}

/// One tile of `U_{k,omega}`, the translate `m a1 + n a2` of the base tile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tile {
    pub k: i64,
    pub omega: DirectionInterval,
    pub m: i64,
    pub n: i64,
}

impl Tile {
    pub fn width(&self) -> f64 {
        2f64.powi(-(self.k as i32))
    }

    pub fn length(&self) -> f64 {
        2f64.powi(self.omega.l as i32 - self.k as i32)
    }

    /// Slope of the long side, `-c(omega)`.
    pub fn slope(&self) -> f64 {
        -self.omega.center()
    }

    pub fn area(&self) -> f64 {
        self.width() * self.length()
    }

    /// Center, reduced to `[0, 1)^2`.
    pub fn center(&self) -> (f64, f64) {
        let l = self.length();
        let x = self.m as f64 * l;
        let y = self.m as f64 * self.slope() * l + self.n as f64 * self.width();
        (x.rem_euclid(1.0), y.rem_euclid(1.0))
    }

    /// Closed-parallelogram membership on the torus.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (cx, cy) = self.center();
        let dx = wrap(x - cx);
        let dy = wrap(y - cy - self.slope() * dx);
        dx.abs() <= 0.5 * self.length() + 1e-12 && dy.abs() <= 0.5 * self.width() + 1e-12
    }

    /// `omega_{s,2}`, the left half, as `[start, end)`.
    pub fn left_half(&self) -> (f64, f64) {
        (self.omega.start(), self.omega.center())
    }
}

fn wrap(d: f64) -> f64 {
    d - d.round()
}

/// Wave packets and tile sums for one `(k, omega)` on a grid.
#[derive(Clone, Debug)]
pub struct PacketBank {
    grid: TorusGrid,
    k: i64,
    omega: DirectionInterval,
    /// `sqrt(m_{k,omega})` per frequency bin.
    root: Vec<f64>,
    mass: f64,
}

impl PacketBank {
    /// Needs `l < k` (periodic lattice on the grid) and the packet spectrum
    /// strictly inside the Nyquist band.
    pub fn new(grid: TorusGrid, k: i64, omega: DirectionInterval) -> Result<Self> {
        let n = grid.n();
        let l = omega.l as i64;
        let top = grid.log2() as i64 - 1;
        if k <= l || k > top {
            return Err(Error::ScaleOutOfRange { index: k, lo: l + 1, hi: top });
        }
        let eta_max = 2.5 * 2f64.powi(k as i32);
        let r_max = omega.right_center().abs() + 2f64.powi(-(omega.l as i32) - 2);
        if eta_max >= 0.5 * n as f64 || eta_max * r_max >= 0.5 * n as f64 {
            return Err(Error::Config(format!(
                "packets for k = {k}, omega = [{}, {}) reach past the Nyquist band of n = {n}",
                omega.start(),
                omega.end()
            )));
        }
        let s = 2f64.powi(-(k as i32));
        let mut root = vec![0.0; grid.len()];
        for a in 0..n {
            for b in 0..n {
                let (xi, eta) = (grid.freq(a) as f64, grid.freq(b) as f64);
                if eta > 0.0 {
                    root[a * n + b] = sqrt_beta_tilde(s * eta) * sqrt_beta_omega(&omega, xi / eta);
                }
            }
        }
        let mass = root.iter().map(|r| r * r).sum();
        Ok(Self { grid, k, omega, root, mass })
    }

    pub fn k(&self) -> i64 {
        self.k
    }

    pub fn omega(&self) -> DirectionInterval {
        self.omega
    }

    /// Lattice extent: `2^{k-l}` translates along `a1`, `2^k` along `a2`.
    pub fn lattice_size(&self) -> (i64, i64) {
        (1 << (self.k - self.omega.l as i64), 1 << self.k)
    }

    pub fn tile_count(&self) -> usize {
        let (a, b) = self.lattice_size();
        (a * b) as usize
    }

    pub fn tiles(&self) -> impl Iterator<Item = Tile> + '_ {
        let (ma, na) = self.lattice_size();
        (0..ma).flat_map(move |m| (0..na).map(move |n| Tile { k: self.k, omega: self.omega, m, n }))
    }

    /// `alpha = n / sqrt(sum m)`: `||phi_s||_2 = 1` for the unitary transform.
    fn alpha(&self) -> f64 {
        self.grid.n() as f64 / self.mass.sqrt()
    }

    /// Tile sums reproduce `kappa m_{k,omega}` after the translation average;
    /// `kappa = #tiles / sum m` is the ratio between `1 / |s|` and the grid
    /// mass of the multiplier.
    pub fn kappa(&self) -> f64 {
        self.tile_count() as f64 / self.mass
    }

    fn lattice_index(&self, tile: &Tile) -> usize {
        let n = self.grid.n() as f64;
        let (cx, cy) = tile.center();
        let i = (cx * n).round() as usize % self.grid.n();
        let j = (cy * n).round() as usize % self.grid.n();
        self.grid.index(i, j)
    }

    pub fn packet(&self, tile: &Tile) -> SampledField {
        let n = self.grid.n();
        let (cx, cy) = tile.center();
        let alpha = self.alpha();
        let mut data = vec![ZERO; self.grid.len()];
        for a in 0..n {
            for b in 0..n {
                let r = self.root[a * n + b];
                if r != 0.0 {
                    let ph = -2.0 * PI * (self.grid.freq(a) as f64 * cx + self.grid.freq(b) as f64 * cy);
                    data[a * n + b] = C64::new(ph.cos(), ph.sin()) * (alpha * r);
                }
            }
        }
        Spectrum::new(self.grid, data).expect("grid").inverse()
    }

    /// `g(p) = <f, phi_{k,omega}(. - p)>` at every grid point `p`.
    fn correlation(&self, f: &SampledField) -> Vec<C64> {
        let n = self.grid.n();
        let mut data = f.data().to_vec();
        fft2(&mut data, n, true);
        for (z, r) in data.iter_mut().zip(&self.root) {
            *z *= *r;
        }
        fft2(&mut data, n, false);
        let s = self.alpha() / n as f64;
        data.iter().map(|z| z * s).collect()
    }

    /// `sum_p c(p) phi_{k,omega}(. - p)` for a field of coefficients on the grid.
    fn synthesize(&self, coeffs: Vec<C64>) -> SampledField {
        let n = self.grid.n();
        let mut data = coeffs;
        fft2(&mut data, n, true);
        let s = self.alpha() * n as f64;
        for (z, r) in data.iter_mut().zip(&self.root) {
            *z *= *r * s;
        }
        fft2(&mut data, n, false);
        SampledField::new(self.grid, data).expect("grid")
    }

    /// `<f, phi_s>` for every tile, in the order of [`PacketBank::tiles`].
    pub fn coefficients(&self, f: &SampledField) -> Result<Vec<(Tile, C64)>> {
        self.grid.ensure_same(&f.grid())?;
        let g = self.correlation(f);
        Ok(self.tiles().map(|t| (t, g[self.lattice_index(&t)])).collect())
    }

    /// `sum_s <f, phi_s> phi_s`. With `average`, the sum is averaged over all
    /// grid translates of the tiling (the finite form of the translation
    /// average), which equals `kappa (m_{k,omega} * f)` exactly.
    pub fn tile_sum(&self, f: &SampledField, average: bool) -> Result<SampledField> {
        self.grid.ensure_same(&f.grid())?;
        let g = self.correlation(f);
        let coeffs = if average {
            let w = self.tile_count() as f64 / self.grid.len() as f64;
            g.iter().map(|z| z * w).collect()
        } else {
            let mut c = vec![ZERO; self.grid.len()];
            for t in self.tiles() {
                let i = self.lattice_index(&t);
                c[i] = g[i];
            }
            c
        };
        Ok(self.synthesize(coeffs))
    }

    /// `m_{k,omega} * f`.
    pub fn convolve(&self, f: &SampledField) -> SampledField {
        let n = self.grid.n();
        let mut data = f.data().to_vec();
        fft2(&mut data, n, true);
        for (z, r) in data.iter_mut().zip(&self.root) {
            *z *= r * r;
        }
        fft2(&mut data, n, false);
        SampledField::new(self.grid, data).expect("grid")
    }
}

/// `|<phi_{s1}, phi_{s2}>| (1 + |m| + |n|)^4` for pairs of tiles of one bank,
/// where `(m, n)` is the lattice offset reduced to the nearest periodic
/// representative. Returns the envelope values and their maximum, the
/// fitted constant.
pub fn envelope_fit(bank: &PacketBank, pairs: &[(Tile, Tile)]) -> (Vec<f64>, f64) {
    let (ma, na) = bank.lattice_size();
    let vals: Vec<f64> = pairs
        .iter()
        .map(|(a, b)| {
            let dm = (b.m - a.m).rem_euclid(ma);
            let dn = (b.n - a.n).rem_euclid(na);
            let dm = dm.min(ma - dm);
            let dn = dn.min(na - dn);
            bank.packet(a).inner(&bank.packet(b)).norm() * (1.0 + (dm + dn) as f64).powi(4)
        })
        .collect();
    let c = vals.iter().fold(0.0f64, |a, &v| a.max(v));
    (vals, c)
}

impl PacketBank {
    /// The tile whose closed parallelogram contains `(x, y)`; ties go to the
    /// lexicographically smaller `(m, n)`.
    pub fn tile_of_point(&self, x: f64, y: f64) -> Tile {
        let (ma, na) = self.lattice_size();
        let probe = Tile { k: self.k, omega: self.omega, m: 0, n: 0 };
        let (l, w, sigma) = (probe.length(), probe.width(), probe.slope());
        let eps = 1e-9;
        let mut best: Option<Tile> = None;
        let m0 = (x / l).round() as i64;
        for m in [m0 - 1, m0, m0 + 1].map(|m| m.rem_euclid(ma)) {
            let cx = m as f64 * l;
            let dx = wrap(x - cx);
            if dx.abs() > 0.5 * l + eps {
                continue;
            }
            let base = (y - m as f64 * sigma * l - sigma * dx) / w;
            let nr = base.round() as i64;
            for n in [nr - 1, nr, nr + 1] {
                let t = Tile { k: self.k, omega: self.omega, m, n: n.rem_euclid(na) };
                if t.contains(x, y) && best.map_or(true, |b| (t.m, t.n) < (b.m, b.n)) {
                    best = Some(t);
                }
            }
        }
        best.expect("tiles cover the torus")
    }

    /// `sum_s |<f, phi_s>|^2 / ||f||^2`.
    pub fn bessel_ratio(&self, f: &SampledField) -> Result<f64> {
        let c = self.coefficients(f)?;
        let e: f64 = c.iter().map(|(_, z)| z.norm_sqr()).sum();
        Ok(e / f.norm().powi(2))
    }
}

/// Coefficient table rows `k,l,omega_index,m,n,coeff_re,coeff_im`.
pub fn write_coefficients_csv<W: Write>(rows: &[(Tile, C64)], mut w: W) -> Result<()> {
    writeln!(w, "k,l,omega_index,m,n,coeff_re,coeff_im")?;
    for (t, c) in rows {
        writeln!(w, "{},{},{},{},{},{:.17e},{:.17e}", t.k, t.omega.l, t.omega.index, t.m, t.n, c.re, c.im)?;
    }
    Ok(())
}

/// `sum_k H_{k-l} sum_{omega in D_l} sum_s <f, phi_s> phi_s` over the given
/// scales. By linearity this is the sum of `<f, phi_s> phi_s`-operator
/// outputs. Only the intervals of `D_l` whose packets fit the grid are used.
pub fn model_sum(op: &DirectionalOperator, f: &SampledField, l: u32, ks: &[i64], average: bool) -> Result<SampledField> {
    let mut acc = SampledField::zeros(f.grid());
    for &k in ks {
        let mut level = SampledField::zeros(f.grid());
        for w in DirectionInterval::all(l) {
            match PacketBank::new(f.grid(), k, w) {
                Ok(bank) => level.add_assign(&bank.tile_sum(f, average)?),
                Err(Error::Config(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        acc.add_assign(&op.apply_hl(&level, k - l as i64)?);
    }
    Ok(acc)
}

/// Result of [`vanishing_check`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VanishingReport {
    pub excluded_points: usize,
    pub max_excluded: f64,
    pub max_total: f64,
    pub ratio: f64,
    pub passes: bool,
}

/// Tolerance of [`vanishing_check`], relative to `max |phi_s|`.
pub const VANISHING_TOL: f64 = 1e-6;

/// Evaluates `phi_s = H_{k-l} varphi_s` (the single-scale operator matching
/// the tile length) and its maximum over points where `-u(P(x, y))` is not
/// in the left half of `omega_s`.
pub fn vanishing_check(bank: &PacketBank, tile: &Tile, op: &DirectionalOperator) -> Result<VanishingReport> {
    let phi = op.apply_hl(&bank.packet(tile), tile.k - tile.omega.l as i64)?;
    let slopes = op.slopes();
    let (mut excluded, mut max_ex, mut max_all) = (0usize, 0.0f64, 0.0f64);
    for (p, z) in phi.data().iter().enumerate() {
        let a = z.norm();
        max_all = max_all.max(a);
        if !tile.omega.in_left_half(-slopes[p]) {
            excluded += 1;
            max_ex = max_ex.max(a);
        }
    }
    let ratio = if max_all > 0.0 { max_ex / max_all } else { 0.0 };
    Ok(VanishingReport { excluded_points: excluded, max_excluded: max_ex, max_total: max_all, ratio, passes: ratio <= VANISHING_TOL })
}
