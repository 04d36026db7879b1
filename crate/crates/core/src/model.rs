//! Device parameters, derived constants, input pulses and the discrete
//! sampling of the inhomogeneously broadened atomic line.
//!
//! All rates and frequencies share one user-chosen angular-frequency unit;
//! nothing here assumes physical constants.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw device constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Common-resonator / waveguide coupling rate.
    pub kappa: f64,
    /// Common-resonator loss rate.
    #[serde(default)]
    pub gamma_c: f64,
    /// Mini-resonator loss rate.
    #[serde(default)]
    pub gamma_b: f64,
    /// Atomic transverse decay rate.
    #[serde(default)]
    pub gamma_a: f64,
    /// Common / mini-resonator coupling, identical for every mini-resonator.
    pub g: f64,
    /// Single-atom / mini-resonator coupling.
    pub f: f64,
    /// Number of mini-resonators.
    #[serde(rename = "M")]
    pub resonators: usize,
    /// Comb spacing.
    pub delta: f64,
    /// Half-width of the Lorentzian inhomogeneous atomic line.
    pub delta_in_atomic: f64,
    /// Atoms per mini-resonator.
    #[serde(rename = "N_a")]
    pub atoms: u64,
    /// Longitudinal relaxation time; `None` disables the decay.
    #[serde(rename = "T1", default)]
    pub t1: Option<f64>,
    /// Spin-transition decoherence rate used by the total-efficiency budget.
    #[serde(default)]
    pub gamma_12: f64,
    #[serde(default)]
    pub tau1: f64,
    #[serde(default)]
    pub tau2: f64,
    /// Spin storage duration.
    #[serde(rename = "Ts", default)]
    pub ts: f64,
    /// Replace the dispersive pulling factor by exactly one.
    #[serde(default)]
    pub force_chi_one: bool,
}

impl SystemParams {
    /// A comb of `resonators` mini-resonators spanning `delta_in`, with no
    /// atoms, an uncoupled common resonator and an atomic line one hundred
    /// comb widths wide.
    pub fn comb(resonators: usize, delta_in: f64) -> Self {
        let resonators = resonators.max(1);
        Self {
            kappa: 1.0,
            gamma_c: 0.0,
            gamma_b: 0.0,
            gamma_a: 0.0,
            g: 0.0,
            f: 0.0,
            resonators,
            delta: delta_in / resonators as f64,
            delta_in_atomic: 100.0 * delta_in,
            atoms: 1000,
            t1: None,
            gamma_12: 0.0,
            tau1: 0.0,
            tau2: 0.0,
            ts: 0.0,
            force_chi_one: false,
        }
    }

    /// Chooses the single-atom coupling so that the collective absorption
    /// rate `N_a f^2 / (Delta_in + gamma_a)` equals `gamma_a0`.
    pub fn with_absorption_rate(mut self, gamma_a0: f64) -> Self {
        let width = self.delta_in_atomic + self.gamma_a;
        self.f = (gamma_a0.max(0.0) * width / self.atoms as f64).sqrt();
        self
    }

    /// Sets the loaded mini-resonator linewidth `Gamma_sigma` by adjusting the
    /// atomic absorption rate, keeping `gamma_b`.
    pub fn with_total_linewidth(self, gamma_sigma: f64) -> Result<Self> {
        let gamma_a0 = gamma_sigma - self.gamma_b;
        if !(gamma_a0 >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "total linewidth {gamma_sigma} is below the bare loss gamma_b = {}",
                self.gamma_b
            )));
        }
        Ok(self.with_absorption_rate(gamma_a0))
    }

    /// Rescales the comb spacing so that `M * delta == delta_in`.
    pub fn with_comb_width(mut self, delta_in: f64) -> Self {
        self.delta = delta_in / self.resonators as f64;
        self
    }

    pub fn comb_width(&self) -> f64 {
        self.resonators as f64 * self.delta
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("kappa", self.kappa),
            ("gamma_c", self.gamma_c),
            ("gamma_b", self.gamma_b),
            ("gamma_a", self.gamma_a),
            ("g", self.g),
            ("f", self.f),
            ("delta", self.delta),
            ("delta_in_atomic", self.delta_in_atomic),
            ("gamma_12", self.gamma_12),
            ("tau1", self.tau1),
            ("tau2", self.tau2),
            ("Ts", self.ts),
        ];
        for (name, value) in rates {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidParams(format!(
                    "{name} must be finite and >= 0, got {value}"
                )));
            }
        }
        if let Some(t1) = self.t1 {
            if !(t1 > 0.0) || t1.is_nan() {
                return Err(Error::InvalidParams(format!("T1 must be > 0, got {t1}")));
            }
        }
        if self.resonators == 0 {
            return Err(Error::InvalidParams("M must be >= 1".into()));
        }
        if self.atoms == 0 {
            return Err(Error::InvalidParams("N_a must be >= 1".into()));
        }
        if self.delta <= 0.0 {
            return Err(Error::InvalidParams("delta must be > 0".into()));
        }
        if self.delta_in_atomic <= 0.0 {
            return Err(Error::InvalidParams("delta_in_atomic must be > 0".into()));
        }
        Ok(())
    }
}

/// Quantities derived from [`SystemParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    /// Comb spectral width `M * delta`.
    pub delta_in: f64,
    /// `Delta_in + gamma_a`.
    pub delta_in_a: f64,
    /// Collective absorption rate `N_a f^2 / Delta_in,a`.
    pub gamma_a0: f64,
    /// Loaded mini-resonator linewidth `gamma_a0 + gamma_b`.
    pub gamma_sigma: f64,
    pub chi_tilde: f64,
    /// Dispersive pulling factor `1 / (1 - chi_tilde)`, or 1 when forced.
    pub chi: f64,
    /// Comb rephasing period `2 pi / delta`.
    pub tau: f64,
    /// Mini-resonator detunings from the comb center.
    pub comb_frequencies: Vec<f64>,
    /// `N_a f^2`, the numerator of the atomic susceptibility.
    pub coupling_strength: f64,
    pub gamma_b: f64,
}

pub fn derive_params(p: &SystemParams) -> Result<DerivedParams> {
    p.validate()?;
    let delta_in = p.resonators as f64 * p.delta;
    let delta_in_a = p.delta_in_atomic + p.gamma_a;
    let coupling_strength = p.atoms as f64 * p.f * p.f;
    let gamma_a0 = coupling_strength / delta_in_a;
    let chi_tilde = gamma_a0 / delta_in_a;
    if chi_tilde >= 1.0 {
        return Err(Error::LinearizationInvalid { chi_tilde });
    }
    let chi = if p.force_chi_one {
        1.0
    } else {
        1.0 / (1.0 - chi_tilde)
    };
    let center = (p.resonators as f64 - 1.0) / 2.0;
    let comb_frequencies = (0..p.resonators)
        .map(|m| (m as f64 - center) * p.delta)
        .collect();
    Ok(DerivedParams {
        delta_in,
        delta_in_a,
        gamma_a0,
        gamma_sigma: gamma_a0 + p.gamma_b,
        chi_tilde,
        chi,
        tau: 2.0 * PI / p.delta,
        comb_frequencies,
        coupling_strength,
        gamma_b: p.gamma_b,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PulseShape {
    Gaussian,
}

impl FromStr for PulseShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(PulseShape::Gaussian),
            other => Err(Error::InvalidParams(format!(
                "unknown pulse shape `{other}`"
            ))),
        }
    }
}

impl fmt::Display for PulseShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PulseShape::Gaussian => f.write_str("gaussian"),
        }
    }
}

/// Input signal envelope `A_in(t)` in the frame rotating at the comb center.
///
/// The Gaussian envelope is
/// `sqrt(W) (2 / (pi dt^2))^(1/4) exp(-(t - t0)^2 / dt^2 - i w_c (t - t0))`,
/// so that `|A_in|^2` integrates to the photon number `W`. Spectra use
/// `A(w) = (2 pi)^(-1/2) \int A(t) e^{i w t} dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub shape: PulseShape,
    /// Photon number `\int |A_in|^2 dt`.
    #[serde(rename = "W_in")]
    pub energy: f64,
    /// Duration parameter `dt_s`.
    #[serde(rename = "dt_s")]
    pub duration: f64,
    /// Center time.
    pub t0: f64,
    /// Carrier offset from the comb center.
    #[serde(default)]
    pub carrier_offset: f64,
}

pub fn make_pulse(
    shape: PulseShape,
    energy: f64,
    duration: f64,
    t0: f64,
    carrier_offset: f64,
) -> Result<Pulse> {
    let pulse = Pulse {
        shape,
        energy,
        duration,
        t0,
        carrier_offset,
    };
    pulse.validate()?;
    Ok(pulse)
}

impl Pulse {
    /// Gaussian pulse whose spectral amplitude falls to `1/e` at
    /// `spectral_width` from the carrier, i.e. `dt_s = 2 / spectral_width`.
    pub fn gaussian_with_bandwidth(energy: f64, spectral_width: f64, t0: f64) -> Result<Self> {
        make_pulse(PulseShape::Gaussian, energy, 2.0 / spectral_width, t0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::InvalidParams(format!(
                "pulse duration must be > 0, got {}",
                self.duration
            )));
        }
        if !(self.energy >= 0.0) || !self.energy.is_finite() {
            return Err(Error::InvalidParams(format!(
                "pulse energy must be >= 0, got {}",
                self.energy
            )));
        }
        if !self.t0.is_finite() || !self.carrier_offset.is_finite() {
            return Err(Error::InvalidParams(
                "pulse center and carrier must be finite".into(),
            ));
        }
        Ok(())
    }

    fn amplitude_scale(&self) -> f64 {
        let dt = self.duration;
        self.energy.sqrt() * (2.0 / (PI * dt * dt)).powf(0.25)
    }

    pub fn evaluate(&self, t: f64) -> Complex64 {
        match self.shape {
            PulseShape::Gaussian => {
                let s = t - self.t0;
                let envelope = (-(s * s) / (self.duration * self.duration)).exp();
                Complex64::from_polar(self.amplitude_scale() * envelope, -self.carrier_offset * s)
            }
        }
    }

    pub fn spectrum(&self, omega: f64) -> Complex64 {
        match self.shape {
            PulseShape::Gaussian => {
                let dt = self.duration;
                let detuning = omega - self.carrier_offset;
                let magnitude = self.amplitude_scale() * dt / 2f64.sqrt()
                    * (-(detuning * detuning) * dt * dt / 4.0).exp();
                Complex64::from_polar(magnitude, omega * self.t0)
            }
        }
    }

    /// Spectrum of the same envelope centered at `t = 0`.
    pub fn centered_spectrum(&self, omega: f64) -> Complex64 {
        self.spectrum(omega) * Complex64::from_polar(1.0, -omega * self.t0)
    }

    /// `|A_in(t)|^2`.
    pub fn intensity(&self, t: f64) -> f64 {
        self.evaluate(t).norm_sqr()
    }

    /// `1/e` half-width of the spectral amplitude, `2 / dt_s`.
    pub fn spectral_width(&self) -> f64 {
        2.0 / self.duration
    }

    /// Interval outside which `|A_in|^2` is below `e^-40` of its peak.
    pub fn support(&self) -> (f64, f64) {
        let half = 4.5 * self.duration;
        (self.t0 - half, self.t0 + half)
    }

    /// Energy delivered up to time `t`.
    pub fn cumulative_energy(&self, t: f64) -> f64 {
        match self.shape {
            PulseShape::Gaussian => {
                let x = 2f64.sqrt() * (t - self.t0) / self.duration;
                0.5 * self.energy * libm::erfc(-x)
            }
        }
    }
}

/// Deterministic discretization of the Lorentzian atomic line, identical in
/// every mini-resonator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomSampling {
    pub nodes_per_resonator: usize,
    /// `detunings[m][j]` is the transition detuning of node `j` in
    /// mini-resonator `m`.
    pub detunings: Vec<Vec<f64>>,
    /// Fraction of the ensemble represented by each node.
    pub weights: Vec<f64>,
}

/// Default clamp on node detunings, in units of the atomic half-width.
pub const DEFAULT_DETUNING_CAP: f64 = 50.0;

impl AtomSampling {
    /// Midpoint-quantile placement `delta_j = Delta_in tan(pi (u_j - 1/2))`,
    /// `u_j = (j - 1/2) / N`, equal weights, clamped to `|delta_j| <= cap * Delta_in`.
    pub fn lorentzian(resonators: usize, nodes: usize, half_width: f64, cap: f64) -> Result<Self> {
        if !(half_width > 0.0) || !(cap > 0.0) {
            return Err(Error::InvalidParams(
                "sampling half-width and cap must be > 0".into(),
            ));
        }
        let limit = cap * half_width;
        let row: Vec<f64> = (1..=nodes)
            .map(|j| {
                let u = (j as f64 - 0.5) / nodes as f64;
                (half_width * (PI * (u - 0.5)).tan()).clamp(-limit, limit)
            })
            .collect();
        let weights = vec![1.0 / nodes.max(1) as f64; nodes];
        Ok(Self {
            nodes_per_resonator: nodes,
            detunings: vec![row; resonators],
            weights,
        })
    }

    pub fn for_params(p: &SystemParams, nodes: usize) -> Result<Self> {
        Self::lorentzian(p.resonators, nodes, p.delta_in_atomic, DEFAULT_DETUNING_CAP)
    }

    /// Spacing between the two nodes nearest the line center.
    pub fn central_spacing(&self) -> f64 {
        let row = match self.detunings.first() {
            Some(row) if row.len() >= 2 => row,
            _ => return 0.0,
        };
        let i = row
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let j = if i + 1 < row.len() { i + 1 } else { i - 1 };
        (row[j] - row[i]).abs()
    }

    pub fn resonators(&self) -> usize {
        self.detunings.len()
    }
}
