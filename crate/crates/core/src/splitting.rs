//! The splitting `H_{k-l} P_k f = P~_k H_{k-l} P_k f + (H_{k-l} P_k f - P~_k H_{k-l} P_k f)`
//! summed over `k`, and the decay of the commutator part in `l`.
//!
//! `P~_k` here uses the reproducing profile: it is the identity on the band
//! of `P_k` along straight vertical lines, so the commutator vanishes for the
//! identity family and measures only the curvature of the family.

use std::io::Write;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adapted::CurveGeometry;
use crate::directional::{random_field, DirectionalOperator, LinearOperator};
use crate::error::{Error, Result};
use crate::family::{DirectionField, LipschitzFamily};
use crate::frequency::lp_project;
use crate::grid::{SampledField, TorusGrid, C64};
use crate::numerics::fit_line;
use crate::profile::LpProfile;

/// Operators and band shared by the main term and the commutator.
#[derive(Clone, Debug)]
pub struct Splitting {
    op: DirectionalOperator,
    geometry: Arc<CurveGeometry>,
    band: (i64, i64),
}

impl Splitting {
    pub fn new(grid: TorusGrid, family: &LipschitzFamily, dir: &DirectionField, band: (i64, i64)) -> Result<Self> {
        let (lo, hi) = grid.admissible_scales();
        if band.0 > band.1 || band.0 < lo || band.1 > hi {
            return Err(Error::ScaleOutOfRange { index: if band.0 < lo { band.0 } else { band.1 }, lo, hi });
        }
        let op = DirectionalOperator::new(grid, family, dir)?;
        let geometry = Arc::new(CurveGeometry::new(grid, family, dir)?);
        Ok(Self { op, geometry, band })
    }

    pub fn grid(&self) -> TorusGrid {
        self.geometry.grid()
    }

    pub fn band(&self) -> (i64, i64) {
        self.band
    }

    pub fn operator(&self) -> &DirectionalOperator {
        &self.op
    }

    pub fn geometry(&self) -> &CurveGeometry {
        &self.geometry
    }

    fn check_l(&self, l: i64) -> Result<()> {
        if l < 0 {
            return Err(Error::Config(format!("splitting index l = {l} must be nonnegative")));
        }
        Ok(())
    }

    /// `(main, commutator)` with `main = sum_k P~_k H_{k-l} P_k f`.
    pub fn split(&self, f: &SampledField, l: i64) -> Result<(SampledField, SampledField)> {
        self.check_l(l)?;
        let mut main = SampledField::zeros(f.grid());
        let mut comm = SampledField::zeros(f.grid());
        for k in self.band.0..=self.band.1 {
            let h = self.op.apply_hl(&lp_project(f, k)?, k - l)?;
            let ph = self.geometry.project(&h, k, LpProfile::Reproducing)?;
            comm.add_assign(&h.sub(&ph));
            main.add_assign(&ph);
        }
        Ok((main, comm))
    }

    /// `sum_k H_{k-l} P_k f`, the left side of the splitting.
    pub fn unsplit(&self, f: &SampledField, l: i64) -> Result<SampledField> {
        self.check_l(l)?;
        let mut acc = SampledField::zeros(f.grid());
        for k in self.band.0..=self.band.1 {
            acc.add_assign(&self.op.apply_hl(&lp_project(f, k)?, k - l)?);
        }
        Ok(acc)
    }

    pub fn commutator(&self, f: &SampledField, l: i64) -> Result<SampledField> {
        Ok(self.split(f, l)?.1)
    }

    /// Adjoint of [`Splitting::commutator`]: `sum_k P_k H_{k-l}^* (I - P~_k^*)`.
    pub fn commutator_adjoint(&self, h: &SampledField, l: i64) -> Result<SampledField> {
        self.term_adjoint(h, l, true)
    }

    pub fn main_term(&self, f: &SampledField, l: i64) -> Result<SampledField> {
        Ok(self.split(f, l)?.0)
    }

    pub fn main_term_adjoint(&self, h: &SampledField, l: i64) -> Result<SampledField> {
        self.term_adjoint(h, l, false)
    }

    fn term_adjoint(&self, h: &SampledField, l: i64, commutator: bool) -> Result<SampledField> {
        self.check_l(l)?;
        let mut acc = SampledField::zeros(h.grid());
        for k in self.band.0..=self.band.1 {
            let ph = self.geometry.project_adjoint(h, k, LpProfile::Reproducing)?;
            let a = if commutator { h.sub(&ph) } else { ph };
            // P_k only keeps |eta| < 2^{k+1}, so the banded adjoint is exact here
            let b = self.op.apply_hl_adjoint_banded(&a, k - l, 2f64.powi(k as i32 + 1))?;
            acc.add_assign(&lp_project(&b, k)?);
        }
        Ok(acc)
    }

    pub fn commutator_operator(&self, l: i64) -> TermOperator<'_> {
        TermOperator { split: self, l, commutator: true }
    }

    pub fn main_operator(&self, l: i64) -> TermOperator<'_> {
        TermOperator { split: self, l, commutator: false }
    }
}

/// The main term or the commutator at a fixed `l`, as a linear operator.
pub struct TermOperator<'a> {
    split: &'a Splitting,
    l: i64,
    commutator: bool,
}

impl LinearOperator for TermOperator<'_> {
    fn grid(&self) -> TorusGrid {
        self.split.grid()
    }

    fn apply(&self, f: &SampledField) -> Result<SampledField> {
        let (main, comm) = self.split.split(f, self.l)?;
        Ok(if self.commutator { comm } else { main })
    }

    fn apply_adjoint(&self, f: &SampledField) -> Result<SampledField> {
        self.split.term_adjoint(f, self.l, self.commutator)
    }

    fn name(&self) -> String {
        if self.commutator {
            format!("commutator(l={})", self.l)
        } else {
            format!("main(l={})", self.l)
        }
    }
}

/// Parameters of the decay experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecayConfig {
    pub l_min: i64,
    pub l_max: i64,
    /// Independent random starts.
    pub trials: usize,
    /// Steps of `C^* C` applied to each start; every iterate is a test field.
    pub iterations: usize,
    pub seed: u64,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self { l_min: 2, l_max: 6, trials: 1, iterations: 2, seed: 0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayReport {
    pub rows: Vec<(i64, f64)>,
    pub gamma_hat: f64,
    pub r_squared: f64,
}

impl DecayReport {
    /// Consecutive ratios `rho_{l+1} / rho_l`.
    pub fn ratios(&self) -> Vec<f64> {
        self.rows.windows(2).map(|w| w[1].1 / w[0].1).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "l,rho_l")?;
        for (l, r) in &self.rows {
            writeln!(w, "{l},{r:.17e}")?;
        }
        Ok(())
    }
}

/// `rho_l = max ||C_l f|| / ||f||` over test fields `f`, for `l` in the
/// configured range, with the fitted decay rate `gamma_hat` from the
/// regression of `log2 rho_l` on `l`.
///
/// The test fields are random starts and their iterates under `C_l^* C_l`;
/// the iterates concentrate on the top singular vectors, so the maximum is a
/// much sharper lower estimate of the operator norm than random fields alone.
pub fn commutator_decay_experiment(split: &Splitting, cfg: &DecayConfig) -> Result<DecayReport> {
    if cfg.l_min < 0 || cfg.l_max < cfg.l_min + 1 {
        return Err(Error::Config(format!("decay range [{}, {}] needs 0 <= l_min < l_max", cfg.l_min, cfg.l_max)));
    }
    let mut rows = Vec::new();
    for l in cfg.l_min..=cfg.l_max {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(l as u64));
        let mut best = 0.0f64;
        for _ in 0..cfg.trials.max(1) {
            let mut f = random_field(split.grid(), &mut rng);
            for it in 0..=cfg.iterations {
                let nf = f.norm();
                if nf == 0.0 {
                    break;
                }
                f = f.scale(C64::new(1.0 / nf, 0.0));
                let cf = split.commutator(&f, l)?;
                best = best.max(cf.norm());
                if it < cfg.iterations {
                    f = split.commutator_adjoint(&cf, l)?;
                }
            }
        }
        rows.push((l, best));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.0 as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1.max(1e-300).log2()).collect();
    let fit = fit_line(&xs, &ys);
    Ok(DecayReport { rows, gamma_hat: -fit.slope, r_squared: fit.r_squared })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::FamilySpec;

    fn rand_field(n: usize, seed: u64) -> SampledField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_field(TorusGrid::new(n).unwrap(), &mut rng)
    }

    fn perturbed(n: usize) -> Splitting {
        let fam = LipschitzFamily::from_spec(&FamilySpec::Sinusoidal { b0: 0.01, fx: 1.0, fy: 4.0 }).unwrap();
        let u = DirectionField::Sinusoidal { amp: 0.05, freq: 1.0, phase: 0.0 };
        Splitting::new(TorusGrid::new(n).unwrap(), &fam, &u, (2, 3)).unwrap()
    }

    #[test]
    fn split_adds_up() {
        let s = perturbed(32);
        let f = rand_field(32, 1);
        for l in [0, 2] {
            let (main, comm) = s.split(&f, l).unwrap();
            let whole = s.unsplit(&f, l).unwrap();
            assert!(main.add(&comm).sub(&whole).max_abs() < 1e-13 * (1.0 + whole.max_abs()));
        }
        let zero = SampledField::zeros(f.grid());
        let (m, c) = s.split(&zero, 1).unwrap();
        assert_eq!(m.max_abs(), 0.0);
        assert_eq!(c.max_abs(), 0.0);
        assert!(s.split(&f, -1).is_err());
    }

    #[test]
    fn commutator_vanishes_for_identity_family() {
        let g = TorusGrid::new(32).unwrap();
        let u = DirectionField::Step { breaks: vec![0.0, 0.3, 0.7], values: vec![0.2, -0.1, 0.05] };
        let s = Splitting::new(g, &LipschitzFamily::identity(), &u, (2, 3)).unwrap();
        let f = rand_field(32, 2);
        for l in 0..3 {
            assert!(s.commutator(&f, l).unwrap().norm() < 1e-10 * f.norm(), "l={l}");
        }
    }

    #[test]
    fn term_adjoints() {
        let s = perturbed(32);
        let f = rand_field(32, 3);
        let h = rand_field(32, 4);
        for commutator in [true, false] {
            let op = if commutator { s.commutator_operator(1) } else { s.main_operator(1) };
            let lhs = op.apply(&f).unwrap().inner(&h);
            let rhs = f.inner(&op.apply_adjoint(&h).unwrap());
            assert!((lhs - rhs).norm() < 1e-7 * (1.0 + lhs.norm()), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn decay_report_shape() {
        let s = perturbed(32);
        let cfg = DecayConfig { l_min: 0, l_max: 2, trials: 1, iterations: 1, seed: 5 };
        let rep = commutator_decay_experiment(&s, &cfg).unwrap();
        assert_eq!(rep.rows.len(), 3);
        assert!(rep.rows.iter().all(|r| r.1.is_finite() && r.1 >= 0.0));
        let mut out = Vec::new();
        rep.write_csv(&mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().starts_with("l,rho_l\n0,"));
        assert!(commutator_decay_experiment(&s, &DecayConfig { l_min: 3, l_max: 3, ..cfg }).is_err());
    }
}
