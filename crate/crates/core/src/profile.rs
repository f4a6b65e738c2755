//! Smooth one-dimensional profiles: cutoffs, the dyadic partition piece
//! `psi_0`, the reproducing profile and the tile bumps `beta`, `beta_tilde`.
//! All are built from the `exp(-1/t)` mollifier and are `C^infinity`.

/// `exp(-1/t)` for `t > 0`, else 0.
fn mollifier(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// Smooth step: 0 for `t <= 0`, 1 for `t >= 1`.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = mollifier(t);
        a / (a + mollifier(1.0 - t))
    }
}

/// Radial cutoff: 1 on `|t| <= 1`, 0 on `|t| >= 2`.
pub fn cutoff(t: f64) -> f64 {
    1.0 - smooth_step(t.abs() - 1.0)
}

/// Partition piece `psi_0(t) = phi(t) - phi(2t)`, supported in
/// `1/2 <= |t| <= 2`, with `sum_k psi_0(2^{-k} t) = 1` for `t != 0` and at
/// most two overlapping terms.
pub fn psi0(t: f64) -> f64 {
    cutoff(t) - cutoff(2.0 * t)
}

/// One-sided piece: `psi_0(t)` for `t > 0`, else 0.
pub fn psi0_plus(t: f64) -> f64 {
    if t > 0.0 {
        psi0(t)
    } else {
        0.0
    }
}

/// Support of the positive part of `psi_0`.
pub const PSI0_SUPPORT: (f64, f64) = (0.5, 2.0);

/// Reproducing profile: 1 on `[0.4, 3.2]`, 0 outside `(0.25, 5)`, even in `t`.
/// It equals 1 wherever `psi_0`, `beta_tilde` and their mild dilations live.
pub fn reproducing(t: f64) -> f64 {
    let a = t.abs();
    smooth_step((a - 0.25) / 0.15) * (1.0 - smooth_step((a - 3.2) / 1.8))
}

pub const REPRODUCING_PLATEAU: (f64, f64) = (0.4, 3.2);

/// `chi` with `chi = 1` on `|x| <= 1`, 0 on `|x| >= 2`; `beta = chi^2`.
pub fn beta(x: f64) -> f64 {
    let c = cutoff(x);
    c * c
}

pub fn sqrt_beta(x: f64) -> f64 {
    cutoff(x)
}

/// Square root of `beta_tilde`: 1 on `[1, 2]`, support `[1/2, 5/2]`.
pub fn sqrt_beta_tilde(t: f64) -> f64 {
    smooth_step((t - 0.5) / 0.5) * (1.0 - smooth_step((t - 2.0) / 0.5))
}

pub fn beta_tilde(t: f64) -> f64 {
    let s = sqrt_beta_tilde(t);
    s * s
}

/// Selector for the radial profile used by Littlewood-Paley projections.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LpProfile {
    /// `psi_0`: pieces sum to one.
    #[default]
    Partition,
    /// Reproducing profile: acts as the identity on each partition band.
    Reproducing,
}

impl LpProfile {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            LpProfile::Partition => psi0(t),
            LpProfile::Reproducing => reproducing(t),
        }
    }
}
