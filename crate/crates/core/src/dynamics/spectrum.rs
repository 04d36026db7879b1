use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::integrator::Trajectory;
use crate::error::{Error, Result};
use crate::model::Pulse;

/// Input spectral power below this fraction of the peak is outside the mask.
pub const MASK_FRACTION: f64 = 1e-4;
/// Largest internal energy, relative to `W_in`, left at the end of a record.
pub const TRUNCATION_LIMIT: f64 = 1e-4;

/// `(2 pi)^(-1/2) \int x(t) e^{i w t} dt` by the trapezoid rule on the samples.
pub fn transform(t: &[f64], x: &[Complex64], omega: f64) -> Complex64 {
    let n = t.len();
    if n < 2 {
        return Complex64::new(0.0, 0.0);
    }
    let mut sum = Complex64::new(0.0, 0.0);
    for k in 0..n {
        let left = if k > 0 { t[k] - t[k - 1] } else { 0.0 };
        let right = if k + 1 < n { t[k + 1] - t[k] } else { 0.0 };
        sum += x[k] * Complex64::from_polar(0.5 * (left + right), omega * t[k]);
    }
    sum / (2.0 * PI).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRatio {
    pub omega: Vec<f64>,
    /// `A_out(w) / A_in(w)` inside the mask, `None` outside.
    pub ratio: Vec<Option<Complex64>>,
}

impl SpectrumRatio {
    pub fn at(&self, k: usize) -> Result<Complex64> {
        self.ratio[k].ok_or(Error::IllConditioned {
            omega: self.omega[k],
        })
    }

    /// `(w, ratio)` pairs inside the mask.
    pub fn masked(&self) -> impl Iterator<Item = (f64, Complex64)> + '_ {
        self.omega
            .iter()
            .zip(&self.ratio)
            .filter_map(|(&w, r)| r.map(|r| (w, r)))
    }
}

/// Numerical counterpart of the reflection function, from a recorded run.
pub fn output_spectrum_ratio(
    traj: &Trajectory,
    pulse: &Pulse,
    omegas: &[f64],
) -> Result<SpectrumRatio> {
    if traj.len() < 2 {
        return Err(Error::Precondition(
            "trajectory has fewer than two samples".into(),
        ));
    }
    if !(pulse.energy > 0.0) {
        return Err(Error::Precondition("input pulse carries no energy".into()));
    }
    let last = traj.len() - 1;
    let residual = traj.internal_energy(last);
    if residual > TRUNCATION_LIMIT * pulse.energy {
        return Err(Error::Precondition(format!(
            "record truncated: {:.3e} of the input energy is still inside the system",
            residual / pulse.energy
        )));
    }
    let peak = pulse.spectrum(pulse.carrier_offset).norm_sqr();
    let ratio = omegas
        .par_iter()
        .map(|&w| {
            if pulse.spectrum(w).norm_sqr() <= MASK_FRACTION * peak {
                return None;
            }
            let a_in = transform(&traj.t, &traj.a_in, w);
            let a_out = transform(&traj.t, &traj.a_out, w);
            Some(a_out / a_in)
        })
        .collect();
    Ok(SpectrumRatio {
        omega: omegas.to_vec(),
        ratio,
    })
}
