//! Littlewood-Paley projections adapted to a curve family.
//!
//! `P~_k f` restricts `f` to each curve `Gamma_x`, rewrites the restriction in
//! the chart of the curve (where the curve is the graph `x' = g_x(y')`),
//! applies the one-dimensional multiplier `psi(2^{-k} |nu|)` in `y'`, and reads
//! the result back on the grid. Every stage is trigonometric evaluation
//! (see [`TrigLine`], accurate to about `1e-13`):
//!
//! 1. pull back: along row `y_j`, evaluate at `x = g(x~_i, y_j)`;
//! 2. per curve, resample from uniform `y~` to uniform `y'` (period `cos(theta)`);
//! 3. multiply in `y'`;
//! 4. resample back to uniform `y~`;
//! 5. push forward: along row `y_j`, evaluate at `x~ = P(x_a, y_j)`.
//!
//! The adjoint is the product of the stage adjoints in reverse order.

use std::sync::Arc;

use crate::directional::LinearOperator;
use crate::error::Result;
use crate::family::{DirectionField, LipschitzFamily};
use crate::grid::{fft1, SampledField, TorusGrid, TrigLine, C64, ZERO};
use crate::profile::LpProfile;

/// Precomputed resampling geometry for a family and direction field.
pub struct CurveGeometry {
    grid: TorusGrid,
    family: LipschitzFamily,
    pull: Vec<TrigLine>,
    col_in: Vec<TrigLine>,
    col_out: Vec<TrigLine>,
    push: Vec<TrigLine>,
    periods: Vec<f64>,
}

impl std::fmt::Debug for CurveGeometry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "CurveGeometry(n = {}, {:?})", self.grid.n(), self.family)
    }
}

impl CurveGeometry {
    pub fn new(grid: TorusGrid, family: &LipschitzFamily, dir: &DirectionField) -> Result<Self> {
        family.require_periodic()?;
        dir.validate()?;
        let n = grid.n();
        let h = 1.0 / n as f64;
        let mut pull = Vec::with_capacity(n);
        for j in 0..n {
            let y = j as f64 * h;
            pull.push(TrigLine::new(n, (0..n).map(|i| family.g(i as f64 * h, y)).collect()));
        }
        let anchors = family.project_grid(grid)?;
        let mut push = Vec::with_capacity(n);
        for j in 0..n {
            push.push(TrigLine::new(n, (0..n).map(|a| anchors[a * n + j]).collect()));
        }
        let mut col_in = Vec::with_capacity(n);
        let mut col_out = Vec::with_capacity(n);
        let mut periods = Vec::with_capacity(n);
        for i in 0..n {
            let anchor = i as f64 * h;
            let chart = family.chart(anchor, dir.eval(anchor));
            let period = chart.period();
            let y0 = chart.y_prime(0.0);
            let mut guess = 0.0;
            let mut heights = Vec::with_capacity(n);
            for m in 0..n {
                let yt = chart.y_tilde_from(y0 + m as f64 * period * h, guess);
                heights.push(yt);
                guess = yt + h;
            }
            col_in.push(TrigLine::new(n, heights));
            col_out.push(TrigLine::new(n, (0..n).map(|j| (chart.y_prime(j as f64 * h) - y0) / period).collect()));
            periods.push(period);
        }
        Ok(Self { grid, family: family.clone(), pull, col_in, col_out, push, periods })
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn family(&self) -> &LipschitzFamily {
        &self.family
    }

    /// Curve data in chart coordinates: `out[i][m]` is `f` on curve `i` at the
    /// `m`-th uniform `y'` sample.
    fn to_charts(&self, f: &SampledField) -> Vec<Vec<C64>> {
        let n = self.grid.n();
        let mut pulled = vec![vec![ZERO; n]; n];
        let mut row = vec![ZERO; n];
        for j in 0..n {
            for (i, r) in row.iter_mut().enumerate() {
                *r = f.get(i, j);
            }
            for (i, v) in self.pull[j].eval(&row).into_iter().enumerate() {
                pulled[i][j] = v;
            }
        }
        pulled.iter().enumerate().map(|(i, col)| self.col_in[i].eval(col)).collect()
    }

    fn from_charts(&self, charts: &[Vec<C64>]) -> SampledField {
        let n = self.grid.n();
        let back: Vec<Vec<C64>> = charts.iter().enumerate().map(|(i, c)| self.col_out[i].eval(c)).collect();
        let mut out = SampledField::zeros(self.grid);
        let mut row = vec![ZERO; n];
        for j in 0..n {
            for (i, r) in row.iter_mut().enumerate() {
                *r = back[i][j];
            }
            for (a, v) in self.push[j].eval(&row).into_iter().enumerate() {
                out.set(a, j, v);
            }
        }
        out
    }

    fn from_charts_adjoint(&self, h: &SampledField) -> Vec<Vec<C64>> {
        let n = self.grid.n();
        let mut back = vec![vec![ZERO; n]; n];
        let mut row = vec![ZERO; n];
        for j in 0..n {
            for (a, r) in row.iter_mut().enumerate() {
                *r = h.get(a, j);
            }
            for (i, v) in self.push[j].eval_adjoint(&row).into_iter().enumerate() {
                back[i][j] = v;
            }
        }
        back.iter().enumerate().map(|(i, b)| self.col_out[i].eval_adjoint(b)).collect()
    }

    fn to_charts_adjoint(&self, charts: &[Vec<C64>]) -> SampledField {
        let n = self.grid.n();
        let pulled: Vec<Vec<C64>> = charts.iter().enumerate().map(|(i, c)| self.col_in[i].eval_adjoint(c)).collect();
        let mut out = SampledField::zeros(self.grid);
        let mut row = vec![ZERO; n];
        for j in 0..n {
            for (i, r) in row.iter_mut().enumerate() {
                *r = pulled[i][j];
            }
            for (i, v) in self.pull[j].eval_adjoint(&row).into_iter().enumerate() {
                out.set(i, j, v);
            }
        }
        out
    }

    /// Applies `w(nu)` in the chart variable of every curve (`nu` in cycles per
    /// unit `y'`). `w` must be real and even so the stage is self-adjoint.
    fn multiply(&self, charts: &[Vec<C64>], w: &dyn Fn(f64) -> f64) -> Vec<Vec<C64>> {
        let n = self.grid.n();
        charts
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let mut d = c.clone();
                fft1(&mut d, true);
                for (q, z) in d.iter_mut().enumerate() {
                    let f = crate::grid::signed_freq(q, n).unsigned_abs() as f64;
                    *z *= w(f / self.periods[i]) / n as f64;
                }
                fft1(&mut d, false);
                d
            })
            .collect()
    }

    /// `P~_k f` with the given profile.
    pub fn project(&self, f: &SampledField, k: i64, profile: LpProfile) -> Result<SampledField> {
        self.grid.ensure_same(&f.grid())?;
        self.grid.check_scale(k)?;
        let s = 2f64.powi(-(k as i32));
        let charts = self.to_charts(f);
        Ok(self.from_charts(&self.multiply(&charts, &|nu| profile.eval(s * nu))))
    }

    pub fn project_adjoint(&self, h: &SampledField, k: i64, profile: LpProfile) -> Result<SampledField> {
        self.grid.ensure_same(&h.grid())?;
        self.grid.check_scale(k)?;
        let s = 2f64.powi(-(k as i32));
        let charts = self.from_charts_adjoint(h);
        Ok(self.to_charts_adjoint(&self.multiply(&charts, &|nu| profile.eval(s * nu))))
    }

    /// `P~_k f` for several scales, sharing the pull-back.
    pub fn project_many(&self, f: &SampledField, ks: &[i64], profile: LpProfile) -> Result<Vec<SampledField>> {
        self.grid.ensure_same(&f.grid())?;
        for &k in ks {
            self.grid.check_scale(k)?;
        }
        let charts = self.to_charts(f);
        Ok(ks
            .iter()
            .map(|&k| {
                let s = 2f64.powi(-(k as i32));
                self.from_charts(&self.multiply(&charts, &|nu| profile.eval(s * nu)))
            })
            .collect())
    }

    /// Mean of `f` along each curve in the chart variable, read back on the grid.
    pub fn curve_average(&self, f: &SampledField) -> Result<SampledField> {
        self.grid.ensure_same(&f.grid())?;
        let charts = self.to_charts(f);
        Ok(self.from_charts(&self.multiply(&charts, &|nu| if nu == 0.0 { 1.0 } else { 0.0 })))
    }

    /// Pull back and push forward with no multiplier; the identity up to
    /// resampling error.
    pub fn round_trip(&self, f: &SampledField) -> Result<SampledField> {
        self.grid.ensure_same(&f.grid())?;
        Ok(self.from_charts(&self.to_charts(f)))
    }

    /// `||(sum_k |P~_k f|^2)^{1/2}|| / ||f||` over the band (partition profile).
    pub fn square_function_ratio(&self, f: &SampledField, band: (i64, i64)) -> Result<f64> {
        let ks: Vec<i64> = (band.0..=band.1).collect();
        let parts = self.project_many(f, &ks, LpProfile::Partition)?;
        let mut acc = 0.0;
        for p in &parts {
            acc += p.data().iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        let sq = (acc / self.grid.len() as f64).sqrt();
        Ok(sq / f.norm())
    }
}

/// `P~_k` as an operator.
#[derive(Clone, Debug)]
pub struct AdaptedProjector {
    pub geometry: Arc<CurveGeometry>,
    pub k: i64,
    pub profile: LpProfile,
}

impl LinearOperator for AdaptedProjector {
    fn grid(&self) -> TorusGrid {
        self.geometry.grid
    }
    fn apply(&self, f: &SampledField) -> Result<SampledField> {
        self.geometry.project(f, self.k, self.profile)
    }
    fn apply_adjoint(&self, f: &SampledField) -> Result<SampledField> {
        self.geometry.project_adjoint(f, self.k, self.profile)
    }
    fn name(&self) -> String {
        format!("adapted P_{}", self.k)
    }
}

/// One-shot `P~_k f` with the partition profile.
pub fn adapted_project(f: &SampledField, k: i64, family: &LipschitzFamily, dir: &DirectionField) -> Result<SampledField> {
    CurveGeometry::new(f.grid(), family, dir)?.project(f, k, LpProfile::Partition)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frequency::vertical_project;
    use crate::grid::apply_multiplier;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_field(n: usize, seed: u64) -> SampledField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SampledField::from_fn(TorusGrid::new(n).unwrap(), |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    #[test]
    fn identity_family_is_vertical_projection() {
        let g = TorusGrid::new(32).unwrap();
        let geo = CurveGeometry::new(g, &LipschitzFamily::identity(), &DirectionField::zero()).unwrap();
        let f = rand_field(32, 1);
        for k in 0..5 {
            let a = geo.project(&f, k, LpProfile::Partition).unwrap();
            let b = vertical_project(&f, k, LpProfile::Partition).unwrap();
            assert!(a.sub(&b).max_abs() < 1e-10, "k={k}");
        }
    }

    #[test]
    fn constants_are_annihilated() {
        let g = TorusGrid::new(32).unwrap();
        let geo = CurveGeometry::new(g, &LipschitzFamily::sinusoidal(0.01), &DirectionField::Sinusoidal { amp: 0.2, freq: 1.0, phase: 0.0 }).unwrap();
        let f = SampledField::from_real_fn(g, |_, _| 1.0);
        assert!(geo.project(&f, 2, LpProfile::Partition).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn adjoint_duality() {
        let g = TorusGrid::new(16).unwrap();
        let geo = CurveGeometry::new(g, &LipschitzFamily::sinusoidal(0.05), &DirectionField::Sinusoidal { amp: 0.3, freq: 1.0, phase: 0.2 }).unwrap();
        let f = rand_field(16, 2);
        let h = rand_field(16, 3);
        for profile in [LpProfile::Partition, LpProfile::Reproducing] {
            let lhs = geo.project(&f, 2, profile).unwrap().inner(&h);
            let rhs = f.inner(&geo.project_adjoint(&h, 2, profile).unwrap());
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn pieces_and_mean_rebuild_smooth_fields() {
        let n = 64;
        let g = TorusGrid::new(n).unwrap();
        let geo = CurveGeometry::new(g, &LipschitzFamily::sinusoidal(0.01), &DirectionField::Sinusoidal { amp: 0.1, freq: 1.0, phase: 0.0 }).unwrap();
        let f = apply_multiplier(&rand_field(n, 4), |xi, eta| {
            C64::new(if xi.abs() <= 4.0 && eta.abs() <= 4.0 { 1.0 } else { 0.0 }, 0.0)
        });
        let ks: Vec<i64> = (0..6).collect();
        let mut sum = geo.curve_average(&f).unwrap();
        for p in geo.project_many(&f, &ks, LpProfile::Partition).unwrap() {
            sum.add_assign(&p);
        }
        assert!(sum.sub(&f).max_abs() < 1e-4 * f.max_abs());
    }
}
