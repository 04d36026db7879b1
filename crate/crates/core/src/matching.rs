//! Impedance and spectral matching of the common resonator to the loaded
//! comb, and measurement of the working bandwidth.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{derive_params, DerivedParams, SystemParams};
use crate::spectral::{load_term, reflection, CombVariant, SpectralResponse};

/// General impedance-matching coupling `kappa = 2 gamma_c + 2 X(0)`.
///
/// `X(0)` is real for every variant because the comb is symmetric about the
/// line center.
pub fn impedance_kappa(p: &SystemParams, dp: &DerivedParams, variant: CombVariant) -> Result<f64> {
    if !(dp.delta_in > 0.0) {
        return Err(Error::InvalidParams("delta_in must be > 0".into()));
    }
    let load = load_term(p, dp, variant, 0.0)?;
    Ok(2.0 * p.gamma_c + 2.0 * load.re)
}

/// Explicit rectangular-comb matching,
/// `2 gamma_c + 2 pi (g^2 / delta) (1 - (2/pi) atan(2 Gamma_sigma / delta_in))`.
pub fn kappa_rectangular(p: &SystemParams, dp: &DerivedParams) -> f64 {
    let ratio = 2.0 * dp.gamma_sigma / dp.delta_in;
    2.0 * p.gamma_c + 2.0 * PI * p.g * p.g / p.delta * (1.0 - 2.0 / PI * ratio.atan())
}

/// Explicit Lorentzian-comb matching, `2 gamma_c + 2 M g^2 / (delta_in + Gamma_sigma)`.
pub fn kappa_lorentzian(p: &SystemParams, dp: &DerivedParams) -> f64 {
    2.0 * p.gamma_c + 2.0 * p.resonators as f64 * p.g * p.g / (dp.delta_in + dp.gamma_sigma)
}

/// Weak-loading limit `2 gamma_c + 2 pi g^2 / delta`.
pub fn kappa_weak_limit(p: &SystemParams) -> f64 {
    2.0 * p.gamma_c + 2.0 * PI * p.g * p.g / p.delta
}

/// Strong-loading limit `2 gamma_c + 2 M g^2 / Gamma_sigma`.
pub fn kappa_strong_limit(p: &SystemParams, dp: &DerivedParams) -> f64 {
    2.0 * p.gamma_c + 2.0 * p.resonators as f64 * p.g * p.g / dp.gamma_sigma
}

/// Spectral-matching coupling `g = sqrt(((chi delta_in)^2 + 4 (chi Gamma_sigma)^2) / (4 M))`.
pub fn spectral_match_g(dp: &DerivedParams, resonators: usize) -> Result<f64> {
    if resonators == 0 {
        return Err(Error::InvalidParams("M must be >= 1".into()));
    }
    let w = dp.chi * dp.delta_in;
    let gamma = dp.chi * dp.gamma_sigma;
    Ok(((w * w + 4.0 * gamma * gamma) / (4.0 * resonators as f64)).sqrt())
}

/// Rectangular impedance matching with the spectrally matched `g` substituted,
/// `2 gamma_c + chi (delta_in^2 + 4 Gamma_sigma^2) / (2 delta_in) (pi - 2 atan(2 Gamma_sigma / delta_in))`.
pub fn matched_kappa_combined(dp: &DerivedParams, gamma_c: f64) -> Result<f64> {
    if !(dp.delta_in > 0.0) {
        return Err(Error::InvalidParams("delta_in must be > 0".into()));
    }
    let d = dp.delta_in;
    let gs = dp.gamma_sigma;
    Ok(2.0 * gamma_c
        + dp.chi * (d * d + 4.0 * gs * gs) / (2.0 * d) * (PI - 2.0 * (2.0 * gs / d).atan()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchConditions {
    pub impedance: bool,
    pub spectral: bool,
}

impl MatchConditions {
    pub const BOTH: MatchConditions = MatchConditions {
        impedance: true,
        spectral: true,
    };
    pub const NONE: MatchConditions = MatchConditions {
        impedance: false,
        spectral: false,
    };
}

impl Default for MatchConditions {
    fn default() -> Self {
        Self::BOTH
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchSolution {
    pub kappa: f64,
    pub g: f64,
    pub variant: CombVariant,
    pub conditions: MatchConditions,
    /// `|U(0)|^2` at the solution.
    pub residual_u0: f64,
    /// `|dU/dw|` at `w = 0`, by central difference.
    pub residual_du0: f64,
}

impl MatchSolution {
    /// `p` with the solved couplings substituted.
    pub fn apply(&self, p: &SystemParams) -> SystemParams {
        SystemParams {
            kappa: self.kappa,
            g: self.g,
            ..p.clone()
        }
    }
}

/// Residuals `|U(0)|^2` and `|dU/dw(0)|` for the couplings already in `p`.
pub fn match_residuals(
    p: &SystemParams,
    dp: &DerivedParams,
    variant: CombVariant,
) -> Result<(f64, f64)> {
    let u0 = reflection(p, dp, variant, 0.0)?;
    let h = 1e-5 * dp.delta_in;
    let up = reflection(p, dp, variant, h)?;
    let um = reflection(p, dp, variant, -h)?;
    Ok((u0.norm_sqr(), ((up - um) / (2.0 * h)).norm()))
}

/// Solves the requested conditions: `g` from spectral matching first, then
/// `kappa` from impedance matching with that `g`.
pub fn solve_match(
    p: &SystemParams,
    variant: CombVariant,
    conditions: MatchConditions,
) -> Result<MatchSolution> {
    let dp = derive_params(p)?;
    let mut q = p.clone();
    if conditions.spectral {
        q.g = spectral_match_g(&dp, p.resonators)?;
    }
    if conditions.impedance {
        q.kappa = impedance_kappa(&q, &dp, variant)?;
    }
    if !(q.kappa > 0.0) {
        return Err(Error::InvalidParams(format!(
            "matched kappa must be > 0, got {} (no loss and no comb coupling)",
            q.kappa
        )));
    }
    let (residual_u0, residual_du0) = match_residuals(&q, &dp, variant)?;
    Ok(MatchSolution {
        kappa: q.kappa,
        g: q.g,
        variant,
        conditions,
        residual_u0,
        residual_du0,
    })
}

/// Working band around the line center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthReport {
    pub epsilon: f64,
    pub width: f64,
    pub lower: f64,
    pub upper: f64,
    /// The band runs into the low end of the grid.
    pub lower_at_grid_edge: bool,
    /// The band runs into the high end of the grid.
    pub upper_at_grid_edge: bool,
}

impl BandwidthReport {
    fn empty(epsilon: f64) -> Self {
        Self {
            epsilon,
            width: 0.0,
            lower: 0.0,
            upper: 0.0,
            lower_at_grid_edge: false,
            upper_at_grid_edge: false,
        }
    }
}

fn crossing(w0: f64, v0: f64, w1: f64, v1: f64, eps: f64) -> f64 {
    if v1 == v0 {
        return w1;
    }
    w0 + (eps - v0) / (v1 - v0) * (w1 - w0)
}

/// Largest contiguous interval containing `w = 0` on which `|U|^2 < epsilon`,
/// with linear interpolation at the crossings. `epsilon = 1` returns the
/// whole grid.
pub fn bandwidth(response: &SpectralResponse, epsilon: f64) -> Result<BandwidthReport> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidParams(format!(
            "bandwidth threshold must lie in (0, 1], got {epsilon}"
        )));
    }
    let w = response.grid.samples();
    let v = response.reflectance();
    bandwidth_from_samples(w, &v, epsilon)
}

pub(crate) fn bandwidth_from_samples(
    w: &[f64],
    v: &[f64],
    epsilon: f64,
) -> Result<BandwidthReport> {
    let n = w.len();
    let (lo, hi) = (w[0], w[n - 1]);
    if epsilon >= 1.0 {
        return Ok(BandwidthReport {
            epsilon,
            width: hi - lo,
            lower: lo,
            upper: hi,
            lower_at_grid_edge: true,
            upper_at_grid_edge: true,
        });
    }
    if !(lo <= 0.0 && hi >= 0.0) {
        return Err(Error::Precondition(format!(
            "grid [{lo}, {hi}] does not contain the line center"
        )));
    }
    // Segment [w[k], w[k+1]] containing zero.
    let k = match w.iter().position(|&x| x >= 0.0) {
        Some(0) => 0,
        Some(j) => j - 1,
        None => n - 1,
    };
    let (v_zero, right_start, left_start) = if w[k] == 0.0 {
        (v[k], k + 1, k as isize - 1)
    } else if k + 1 < n && w[k + 1] == 0.0 {
        (v[k + 1], k + 2, k as isize)
    } else if k + 1 < n {
        let t = -w[k] / (w[k + 1] - w[k]);
        (v[k] + t * (v[k + 1] - v[k]), k + 1, k as isize)
    } else {
        (v[k], n, k as isize - 1)
    };
    if v_zero >= epsilon {
        return Ok(BandwidthReport::empty(epsilon));
    }

    let (mut upper, mut upper_edge) = (hi, true);
    let (mut prev_w, mut prev_v) = (0.0, v_zero);
    for j in right_start..n {
        if v[j] >= epsilon {
            upper = crossing(prev_w, prev_v, w[j], v[j], epsilon);
            upper_edge = false;
            break;
        }
        prev_w = w[j];
        prev_v = v[j];
    }

    let (mut lower, mut lower_edge) = (lo, true);
    let (mut prev_w, mut prev_v) = (0.0, v_zero);
    let mut j = left_start;
    while j >= 0 {
        let i = j as usize;
        if v[i] >= epsilon {
            lower = crossing(prev_w, prev_v, w[i], v[i], epsilon);
            lower_edge = false;
            break;
        }
        prev_w = w[i];
        prev_v = v[i];
        j -= 1;
    }

    Ok(BandwidthReport {
        epsilon,
        width: upper - lower,
        lower,
        upper,
        lower_at_grid_edge: lower_edge,
        upper_at_grid_edge: upper_edge,
    })
}
