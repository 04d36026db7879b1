//! Closed-form time-domain predictions and efficiency estimators.
//!
//! Times are measured from the pulse center `t0` wherever a formula needs an
//! origin.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DerivedParams, Pulse, SystemParams};
use crate::spectral::{cavity_transfer, CombVariant};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn require_kappa(p: &SystemParams) -> Result<()> {
    if !(p.kappa > 0.0) {
        return Err(Error::InvalidParams(format!(
            "kappa must be > 0, got {}",
            p.kappa
        )));
    }
    Ok(())
}

fn comb_frequency(dp: &DerivedParams, m: usize) -> Result<f64> {
    dp.comb_frequencies
        .get(m)
        .copied()
        .ok_or_else(|| Error::InvalidParams(format!("mini-resonator index {m} out of range")))
}

/// Mini-resonator amplitude `b_m(t)` predicted with the common-resonator field
/// replaced by `A_in / sqrt(kappa)`.
///
/// Once the pulse has passed (`t - t0 > 2 dt_s`) this is the captured
/// spectral component `-i sqrt(2 pi) (g chi / sqrt(kappa)) A_in(chi delta_m)
/// exp(-chi (i delta_m + Gamma_sigma)(t - t0))`; earlier times use the
/// convolution integral directly.
pub fn analytic_b_m(
    p: &SystemParams,
    dp: &DerivedParams,
    pulse: &Pulse,
    m: usize,
    t: f64,
) -> Result<Complex64> {
    require_kappa(p)?;
    let delta_m = comb_frequency(dp, m)?;
    let lambda = dp.chi * Complex64::new(dp.gamma_sigma, delta_m);
    let prefactor = -I * p.g * dp.chi / p.kappa.sqrt();
    let s = t - pulse.t0;
    if s > 2.0 * pulse.duration {
        let captured = pulse.centered_spectrum(dp.chi * delta_m);
        return Ok(prefactor * (2.0 * PI).sqrt() * captured * (-lambda * s).exp());
    }
    Ok(prefactor * convolve_pulse(pulse, lambda, t))
}

/// `\int_{-inf}^{t} exp(-lambda (t - t')) A_in(t') dt'` by Simpson's rule.
pub fn convolve_pulse(pulse: &Pulse, lambda: Complex64, t: f64) -> Complex64 {
    let lo = pulse.t0 - 6.0 * pulse.duration;
    if t <= lo {
        return Complex64::new(0.0, 0.0);
    }
    let span = t - lo;
    let rate = lambda.norm() + pulse.carrier_offset.abs() + 4.0 / pulse.duration;
    let mut n = ((span * rate / 0.02).ceil() as usize).max(200);
    n += n % 2;
    let h = span / n as f64;
    let mut sum = Complex64::new(0.0, 0.0);
    for k in 0..=n {
        let tp = lo + k as f64 * h;
        let w = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        sum += w * (-lambda * (t - tp)).exp() * pulse.evaluate(tp);
    }
    sum * (h / 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MiniEnergyModel {
    /// Pure exponential `W_in exp(-2 chi Gamma_sigma (t - t0))`.
    Limit26,
    /// Finite-pulse form with the running convolution of `|A_in|^2`.
    Detailed25,
}

/// `\int_{-inf}^{t} |A_in(t')|^2 exp(-r (t - t')) dt'` for the Gaussian pulse.
fn gaussian_decay_integral(pulse: &Pulse, r: f64, t: f64) -> f64 {
    let dt = pulse.duration;
    let s = t - pulse.t0;
    let mu = r * dt * dt / 4.0;
    let x = 2f64.sqrt() * (mu - s) / dt;
    if x > 20.0 {
        // Asymptotic erfc, with the exponentials combined to avoid overflow.
        let series = 1.0 - 1.0 / (2.0 * x * x) + 3.0 / (4.0 * x.powi(4));
        return 0.5 * pulse.energy * (-2.0 * s * s / (dt * dt)).exp() / (x * PI.sqrt()) * series;
    }
    0.5 * pulse.energy * (-r * s + r * r * dt * dt / 8.0).exp() * libm::erfc(x)
}

/// Energy `P_M(t)` held by the mini-resonators.
pub fn mini_energy(
    p: &SystemParams,
    dp: &DerivedParams,
    pulse: &Pulse,
    t: f64,
    model: MiniEnergyModel,
) -> Result<f64> {
    let rate = 2.0 * dp.chi * dp.gamma_sigma;
    match model {
        MiniEnergyModel::Limit26 => Ok(pulse.energy * (-rate * (t - pulse.t0)).exp()),
        MiniEnergyModel::Detailed25 => {
            require_kappa(p)?;
            let d = dp.delta_in;
            let gs = dp.gamma_sigma;
            if d <= gs {
                return Err(Error::InvalidParams(format!(
                    "detailed mini-resonator energy needs delta_in > Gamma_sigma, got {d} <= {gs}"
                )));
            }
            let prefactor =
                2.0 * p.resonators as f64 * p.g * p.g * d / (p.kappa * (d * d - gs * gs));
            let running = gaussian_decay_integral(pulse, rate, t);
            Ok(prefactor * (dp.chi * running - pulse.intensity(t) / (2.0 * d)))
        }
    }
}

fn relaxation(p: &SystemParams, elapsed: f64) -> f64 {
    p.t1.map_or(1.0, |t1| (-elapsed / t1).exp())
}

/// Excitation density of the atoms detuned by `delta` in mini-resonator `m`,
/// `e^{-(t - t0)/T1} |T_a,m|^2 |T_cw(delta)|^2 |A_in(delta)|^2` with the
/// Lorentzian transfer `|T_a,m|^2 = 2 pi chi^2 f^2 g^2 / ((chi Gamma_sigma)^2 + (chi delta_m - delta)^2)`.
pub fn atomic_excitation(
    p: &SystemParams,
    dp: &DerivedParams,
    variant: CombVariant,
    pulse: &Pulse,
    m: usize,
    delta: f64,
    t: f64,
) -> Result<f64> {
    let delta_m = comb_frequency(dp, m)?;
    let chi = dp.chi;
    let lorentz = (chi * dp.gamma_sigma).powi(2) + (chi * delta_m - delta).powi(2);
    if lorentz == 0.0 {
        return Err(Error::SingularResponse {
            omega: delta,
            modulus: 0.0,
        });
    }
    let transfer = 2.0 * PI * (chi * p.f * p.g).powi(2) / lorentz;
    let cavity = cavity_transfer(p, dp, variant, delta)?.norm_sqr();
    Ok(relaxation(p, t - pulse.t0) * transfer * cavity * pulse.spectrum(delta).norm_sqr())
}

/// Stage efficiencies of the loading process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyBudget {
    /// Waveguide to mini-resonators, `(kappa - 2 gamma_c) / kappa`.
    pub e1: f64,
    /// Mini-resonators to atoms, `Gamma_a0 / Gamma_sigma`.
    pub e2: f64,
    /// Round-trip efficiency including dephasing and spin decoherence.
    pub total: f64,
}

impl EfficiencyBudget {
    pub fn from_params(p: &SystemParams, dp: &DerivedParams) -> Result<Self> {
        require_kappa(p)?;
        if p.kappa < 2.0 * p.gamma_c {
            return Err(Error::Precondition(format!(
                "kappa = {} is below 2 gamma_c = {}",
                p.kappa,
                2.0 * p.gamma_c
            )));
        }
        let e1 = (p.kappa - 2.0 * p.gamma_c) / p.kappa;
        let e2 = if dp.gamma_sigma > 0.0 {
            dp.gamma_a0 / dp.gamma_sigma
        } else {
            0.0
        };
        let total = total_efficiency(e1, e2, p.gamma_a, p.tau1, p.tau2, p.ts, p.gamma_12);
        Ok(Self { e1, e2, total })
    }
}

/// `E1^2 E2^2 exp(-8 (tau1 + tau2) gamma_a) exp(-2 Ts gamma_12)`.
pub fn total_efficiency(
    e1: f64,
    e2: f64,
    gamma_a: f64,
    tau1: f64,
    tau2: f64,
    ts: f64,
    gamma_12: f64,
) -> f64 {
    (e1 * e2).powi(2) * (-8.0 * (tau1 + tau2) * gamma_a).exp() * (-2.0 * ts * gamma_12).exp()
}

/// Energy transferred to the atoms once loading is complete.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub e1: f64,
    pub e2: f64,
    /// `E1 E2 W_in`.
    pub energy: f64,
    pub t0: f64,
    pub t1: Option<f64>,
}

impl Plateau {
    /// `E1 E2 W_in e^{-(t - t0)/T1}`.
    pub fn at(&self, t: f64) -> f64 {
        self.energy * self.t1.map_or(1.0, |t1| (-(t - self.t0) / t1).exp())
    }
}

pub fn atomic_population_plateau(
    p: &SystemParams,
    dp: &DerivedParams,
    pulse: &Pulse,
) -> Result<Plateau> {
    let budget = EfficiencyBudget::from_params(p, dp)?;
    Ok(Plateau {
        e1: budget.e1,
        e2: budget.e2,
        energy: budget.e1 * budget.e2 * pulse.energy,
        t0: pulse.t0,
        t1: p.t1,
    })
}

/// Atom-number requirement for loading the comb within half a rephasing period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomRequirement {
    /// `3 delta / pi`.
    pub gamma_a0_min: f64,
    /// `ceil(3 delta Delta_in,a / (pi f^2))`; absent when `f = 0`.
    pub n_a_min: Option<u64>,
    /// Atoms needed here relative to a single-resonator memory with coupling
    /// `f_s`, `(6 delta / (pi kappa)) (f_s / f)^2`.
    pub ratio_vs_single: Option<f64>,
    /// Whether the current `Gamma_a0` meets the threshold.
    pub satisfied: bool,
}

pub fn atom_requirement(
    p: &SystemParams,
    dp: &DerivedParams,
    single_coupling: Option<f64>,
) -> Result<AtomRequirement> {
    require_kappa(p)?;
    if !(p.delta > 0.0) {
        return Err(Error::InvalidParams("delta must be > 0".into()));
    }
    let gamma_a0_min = 3.0 * p.delta / PI;
    let f_s = single_coupling.unwrap_or(p.f);
    let (n_a_min, ratio) = if p.f > 0.0 {
        let n = (gamma_a0_min * dp.delta_in_a / (p.f * p.f)).ceil() as u64;
        let ratio = 6.0 * p.delta / (PI * p.kappa) * (f_s / p.f).powi(2);
        (Some(n), Some(ratio))
    } else {
        (None, None)
    };
    Ok(AtomRequirement {
        gamma_a0_min,
        n_a_min,
        ratio_vs_single: ratio,
        satisfied: dp.gamma_a0 >= gamma_a0_min,
    })
}
