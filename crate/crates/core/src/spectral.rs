//! Closed-form frequency-domain response of the memory.
//!
//! Frequencies are offsets from the comb center in the rotating frame. The
//! load that the mini-resonator comb places on the common resonator is
//! written `X(w)`; every transfer function below is built from it:
//!
//! ```text
//! T_cw(w) = sqrt(kappa) / (kappa/2 + gamma_c + X(w) - i w)
//! U(w)    = (kappa/2 - gamma_c - X(w) + i w) / (kappa/2 + gamma_c + X(w) - i w)
//! ```
//!
//! The continuum variants use `X = M g^2 / (delta_in F(w))` with a comb form
//! factor `F`; the discrete variant sums the exact mode responses.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DerivedParams, Pulse, SystemParams};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Denominator modulus below which a response is reported as a pole.
pub const POLE_THRESHOLD: f64 = 1e-14;

/// Sorted sample frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    samples: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParams("frequency grid is empty".into()));
        }
        if samples.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidParams(
                "frequency grid has non-finite samples".into(),
            ));
        }
        if samples.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParams(
                "frequency grid must be strictly increasing".into(),
            ));
        }
        Ok(Self { samples })
    }

    /// `points` equally spaced samples on `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64, points: usize) -> Result<Self> {
        match points {
            0 => Err(Error::InvalidParams("frequency grid is empty".into())),
            1 => Self::new(vec![0.5 * (lo + hi)]),
            _ => {
                if !(hi > lo) {
                    return Err(Error::InvalidParams(format!(
                        "grid bounds must satisfy lo < hi, got [{lo}, {hi}]"
                    )));
                }
                let step = (hi - lo) / (points - 1) as f64;
                let mut samples: Vec<f64> = (0..points).map(|k| lo + k as f64 * step).collect();
                samples[points - 1] = hi;
                Self::new(samples)
            }
        }
    }

    /// Symmetric grid spanning `[-span * delta_in, span * delta_in]`.
    pub fn symmetric(delta_in: f64, span: f64, points: usize) -> Result<Self> {
        if !(span > 0.0) || !span.is_finite() {
            return Err(Error::InvalidParams(format!(
                "grid span must be > 0, got {span}"
            )));
        }
        let half = span * delta_in;
        Self::uniform(-half, half, points)
    }

    /// 4001 points over `[-1.5 delta_in, 1.5 delta_in]`.
    pub fn default_for(delta_in: f64) -> Result<Self> {
        GridSpec::default().build(delta_in)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn span(&self) -> (f64, f64) {
        (self.samples[0], self.samples[self.samples.len() - 1])
    }
}

/// Grid size and half-span in units of `delta_in`, resolved per device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub points: usize,
    pub span: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            points: 4001,
            span: 1.5,
        }
    }
}

impl GridSpec {
    pub fn build(&self, delta_in: f64) -> Result<FrequencyGrid> {
        FrequencyGrid::symmetric(delta_in, self.span, self.points)
    }
}

/// How the mini-resonator comb enters the common-resonator response.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CombVariant {
    /// Continuum limit with a flat (rectangular) distribution of width `delta_in`.
    #[default]
    #[serde(rename = "rectangular_F1", alias = "f1")]
    RectangularF1,
    /// Continuum limit with a Lorentzian distribution of half-width `delta_in`.
    #[serde(rename = "lorentzian_F2", alias = "f2")]
    LorentzianF2,
    /// Explicit sum over the `M` mini-resonators with exact atomic response.
    #[serde(rename = "discrete_sum", alias = "discrete")]
    DiscreteSum,
}

impl CombVariant {
    pub const ALL: [CombVariant; 3] = [
        CombVariant::RectangularF1,
        CombVariant::LorentzianF2,
        CombVariant::DiscreteSum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CombVariant::RectangularF1 => "rectangular_F1",
            CombVariant::LorentzianF2 => "lorentzian_F2",
            CombVariant::DiscreteSum => "discrete_sum",
        }
    }
}

impl fmt::Display for CombVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CombVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "f1" | "rectangular_f1" | "rectangular" => Ok(CombVariant::RectangularF1),
            "f2" | "lorentzian_f2" | "lorentzian" => Ok(CombVariant::LorentzianF2),
            "discrete" | "discrete_sum" => Ok(CombVariant::DiscreteSum),
            other => Err(Error::InvalidParams(format!(
                "unknown comb variant `{other}`"
            ))),
        }
    }
}

/// Atomic susceptibility model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Susceptibility {
    /// `N_a f^2 / (Delta_in,a - i w)`.
    Exact,
    /// First-order expansion `Gamma_a0 + i chi_tilde w`.
    Linearized,
}

pub fn atomic_susceptibility(dp: &DerivedParams, omega: f64, mode: Susceptibility) -> Complex64 {
    match mode {
        Susceptibility::Exact => {
            Complex64::new(dp.coupling_strength, 0.0) / Complex64::new(dp.delta_in_a, -omega)
        }
        Susceptibility::Linearized => Complex64::new(dp.gamma_a0, dp.chi_tilde * omega),
    }
}

fn checked_inverse(den: Complex64, omega: f64) -> Result<Complex64> {
    let modulus = den.norm();
    if modulus < POLE_THRESHOLD || !modulus.is_finite() {
        return Err(Error::SingularResponse { omega, modulus });
    }
    Ok(den.inv())
}

/// Response `M_m(w)` of a mini-resonator detuned by `delta_m`.
///
/// `Exact` keeps the full atomic susceptibility; `Linearized` gives the
/// pulled Lorentzian `chi / (chi Gamma_sigma + i(chi delta_m - w))`.
pub fn mode_response(
    dp: &DerivedParams,
    delta_m: f64,
    omega: f64,
    mode: Susceptibility,
) -> Result<Complex64> {
    match mode {
        Susceptibility::Exact => {
            let den = dp.gamma_b
                + atomic_susceptibility(dp, omega, Susceptibility::Exact)
                + I * (delta_m - omega);
            checked_inverse(den, omega)
        }
        Susceptibility::Linearized => {
            let den = Complex64::new(dp.chi * dp.gamma_sigma, dp.chi * delta_m - omega);
            Ok(dp.chi * checked_inverse(den, omega)?)
        }
    }
}

/// Reciprocal of the continuum form factor.
fn inverse_form_factor(variant: CombVariant, dp: &DerivedParams, omega: f64) -> Result<Complex64> {
    let width = dp.chi * dp.delta_in;
    let gamma = dp.chi * dp.gamma_sigma;
    match variant {
        CombVariant::RectangularF1 => {
            // atan2 with a nonnegative first argument stays on the branch in
            // [0, pi], continuous in omega whenever gamma > 0.
            let phi_plus = (2.0 * gamma).atan2(width + 2.0 * omega);
            let phi_minus = (2.0 * gamma).atan2(width - 2.0 * omega);
            let upper = (0.5 * width + omega).powi(2) + gamma * gamma;
            let lower = (0.5 * width - omega).powi(2) + gamma * gamma;
            if upper == 0.0 || lower == 0.0 {
                return Err(Error::SingularFormFactor { omega });
            }
            let log_b = 0.5 * (upper.ln() - lower.ln());
            Ok(Complex64::new(PI - (phi_plus + phi_minus), log_b))
        }
        CombVariant::LorentzianF2 => {
            let f2 = Complex64::new(1.0 + gamma / width, -omega / width);
            Ok(f2.inv())
        }
        CombVariant::DiscreteSum => Err(Error::NoClosedForm("discrete_sum")),
    }
}

/// Comb form factor `F1` or `F2`.
pub fn form_factor(variant: CombVariant, dp: &DerivedParams, omega: f64) -> Result<Complex64> {
    match variant {
        CombVariant::LorentzianF2 => {
            let width = dp.chi * dp.delta_in;
            Ok(Complex64::new(
                1.0 + dp.chi * dp.gamma_sigma / width,
                -omega / width,
            ))
        }
        _ => {
            let inv = inverse_form_factor(variant, dp, omega)?;
            if inv.norm() == 0.0 {
                return Err(Error::SingularFormFactor { omega });
            }
            Ok(inv.inv())
        }
    }
}

/// Narrowband expansion of `F1`, valid for `Gamma_sigma, |w| << delta_in`.
pub fn form_factor_narrowband(dp: &DerivedParams, omega: f64) -> Complex64 {
    let width = dp.chi * dp.delta_in;
    let x = Complex64::new(dp.chi * dp.gamma_sigma, -omega) * 4.0 / (PI * width);
    (1.0 + x) / PI
}

/// Load `X(w)` the comb places on the common resonator.
pub fn load_term(
    p: &SystemParams,
    dp: &DerivedParams,
    variant: CombVariant,
    omega: f64,
) -> Result<Complex64> {
    let g2 = p.g * p.g;
    match variant {
        CombVariant::DiscreteSum => {
            let mut sum = Complex64::new(0.0, 0.0);
            for &delta_m in &dp.comb_frequencies {
                sum += mode_response(dp, delta_m, omega, Susceptibility::Exact)?;
            }
            Ok(g2 * sum)
        }
        _ => {
            let inv = inverse_form_factor(variant, dp, omega)?;
            Ok(inv * (p.resonators as f64 * g2 / dp.delta_in))
        }
    }
}

fn check_kappa(p: &SystemParams) -> Result<()> {
    if !(p.kappa > 0.0) {
        return Err(Error::InvalidParams(format!(
            "kappa must be > 0, got {}",
            p.kappa
        )));
    }
    Ok(())
}

fn cavity_denominator(p: &SystemParams, load: Complex64, omega: f64) -> Complex64 {
    Complex64::new(0.5 * p.kappa + p.gamma_c, -omega) + load
}

/// Common-resonator transfer `T_cw(w)`, so that `a(w) = T_cw(w) A_in(w)`.
pub fn cavity_transfer(
    p: &SystemParams,
    dp: &DerivedParams,
    variant: CombVariant,
    omega: f64,
) -> Result<Complex64> {
    check_kappa(p)?;
    let load = load_term(p, dp, variant, omega)?;
    let inv = checked_inverse(cavity_denominator(p, load, omega), omega)?;
    Ok(p.kappa.sqrt() * inv)
}

/// Waveguide reflection `U(w)`, so that `A_out(w) = U(w) A_in(w)`.
pub fn reflection(
    p: &SystemParams,
    dp: &DerivedParams,
    variant: CombVariant,
    omega: f64,
) -> Result<Complex64> {
    check_kappa(p)?;
    let load = load_term(p, dp, variant, omega)?;
    let den = cavity_denominator(p, load, omega);
    let num = Complex64::new(0.5 * p.kappa - p.gamma_c, omega) - load;
    Ok(num * checked_inverse(den, omega)?)
}

/// Spectral amplitude captured by mini-resonator `m` (zero-based),
/// `-i g chi T_cw(w) A_in(w) / (chi Gamma_sigma + i(chi delta_m - w))`.
pub fn mini_mode_spectrum(
    p: &SystemParams,
    dp: &DerivedParams,
    variant: CombVariant,
    pulse: &Pulse,
    m: usize,
    omega: f64,
) -> Result<Complex64> {
    let delta_m = *dp
        .comb_frequencies
        .get(m)
        .ok_or_else(|| Error::InvalidParams(format!("mini-resonator index {m} out of range")))?;
    let t_cw = cavity_transfer(p, dp, variant, omega)?;
    let lorentz = mode_response(dp, delta_m, omega, Susceptibility::Linearized)?;
    Ok(-I * p.g * t_cw * lorentz * pulse.spectrum(omega))
}

/// Transfer functions sampled on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralResponse {
    pub grid: FrequencyGrid,
    pub variant: CombVariant,
    pub t_cw: Vec<Complex64>,
    pub u: Vec<Complex64>,
    /// `b_m_spectra[m][k]` at `grid[k]`, when requested.
    pub b_m_spectra: Option<Vec<Vec<Complex64>>>,
}

impl SpectralResponse {
    pub fn evaluate(
        p: &SystemParams,
        dp: &DerivedParams,
        variant: CombVariant,
        grid: &FrequencyGrid,
    ) -> Result<Self> {
        check_kappa(p)?;
        let values: Vec<(Complex64, Complex64)> = grid
            .samples()
            .par_iter()
            .map(|&omega| {
                let load = load_term(p, dp, variant, omega)?;
                let inv = checked_inverse(cavity_denominator(p, load, omega), omega)?;
                let num = Complex64::new(0.5 * p.kappa - p.gamma_c, omega) - load;
                Ok((p.kappa.sqrt() * inv, num * inv))
            })
            .collect::<Result<_>>()?;
        let (t_cw, u) = values.into_iter().unzip();
        Ok(Self {
            grid: grid.clone(),
            variant,
            t_cw,
            u,
            b_m_spectra: None,
        })
    }

    /// Adds the per-mini-resonator spectra driven by `pulse`.
    pub fn with_mode_spectra(
        mut self,
        p: &SystemParams,
        dp: &DerivedParams,
        pulse: &Pulse,
    ) -> Result<Self> {
        let spectra = (0..dp.comb_frequencies.len())
            .into_par_iter()
            .map(|m| {
                let delta_m = dp.comb_frequencies[m];
                self.grid
                    .samples()
                    .iter()
                    .zip(&self.t_cw)
                    .map(|(&omega, &t_cw)| {
                        let lorentz =
                            mode_response(dp, delta_m, omega, Susceptibility::Linearized)?;
                        Ok(-I * p.g * t_cw * lorentz * pulse.spectrum(omega))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        self.b_m_spectra = Some(spectra);
        Ok(self)
    }

    pub fn reflectance(&self) -> Vec<f64> {
        self.u.iter().map(|u| u.norm_sqr()).collect()
    }

    pub const CSV_HEADER: &'static str = "omega,ReU,ImU,absU2,ReTcw,ImTcw";

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for ((omega, u), t) in self.grid.samples().iter().zip(&self.u).zip(&self.t_cw) {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                omega,
                u.re,
                u.im,
                u.norm_sqr(),
                t.re,
                t.im
            )?;
        }
        Ok(())
    }
}
