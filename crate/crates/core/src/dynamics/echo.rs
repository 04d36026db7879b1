//! Idealized retrieval: an instantaneous conjugation of every atomic
//! coherence stands in for the pair of rephasing control pulses.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::integrator::{integrate, IntegrateOptions, Trajectory};
use super::system::LinearSystem;
use crate::error::{Error, Result};
use crate::model::{DerivedParams, Pulse};

/// Field energy must stay below this fraction of the atomic energy for the
/// rephasing to act on a cleanly stored excitation.
pub const REPHASE_FIELD_LIMIT: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rephased {
    pub state: Vec<Complex64>,
    /// `(|a|^2 + P_M) / P_a` before the operation.
    pub field_fraction: f64,
    pub precondition_met: bool,
}

/// Conjugates every atomic coherence `S <- S*`, leaving the field modes
/// untouched. Applying it twice restores the input.
pub fn ideal_rephase(sys: &LinearSystem, state: &[Complex64]) -> Result<Rephased> {
    let dim = sys.dimension();
    if state.len() != dim {
        return Err(Error::InvalidParams(format!(
            "state has {} components, system has {dim}",
            state.len()
        )));
    }
    let (field, p_m, p_a) = sys.energies(state);
    let field_fraction = if p_a > 0.0 {
        (field + p_m) / p_a
    } else {
        f64::INFINITY
    };
    let first_atom = 1 + sys.resonators();
    let mut out = state.to_vec();
    for z in &mut out[first_atom..] {
        *z = z.conj();
    }
    Ok(Rephased {
        state: out,
        field_fraction,
        precondition_met: field_fraction < REPHASE_FIELD_LIMIT,
    })
}

/// Storage time `t0 + 2 dt_s + min(tau / 2, 3 / Gamma_a0)`: the loading clock
/// starts once the pulse has entered.
pub fn default_storage_time(dp: &DerivedParams, pulse: &Pulse) -> f64 {
    let loading = if dp.gamma_a0 > 0.0 {
        (0.5 * dp.tau).min(3.0 / dp.gamma_a0)
    } else {
        0.5 * dp.tau
    };
    pulse.t0 + 2.0 * pulse.duration + loading
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoOptions {
    /// Rephasing instant; [`default_storage_time`] when absent.
    pub storage_time: Option<f64>,
    /// Half-width of the echo window in units of `dt_s`.
    pub window_half_width: f64,
    pub integrate: IntegrateOptions,
}

impl Default for EchoOptions {
    fn default() -> Self {
        Self {
            storage_time: None,
            window_half_width: 3.0,
            integrate: IntegrateOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoResult {
    pub storage_time: f64,
    /// Predicted echo center `2T - t0`.
    pub echo_center: f64,
    pub window: (f64, f64),
    pub input_energy: f64,
    pub echo_energy: f64,
    /// `echo_energy / input_energy`.
    pub efficiency: f64,
    /// Atomic energy at the rephasing instant.
    pub stored_energy: f64,
    pub rephase_precondition_met: bool,
    pub field_fraction: f64,
    pub forward: Trajectory,
    pub retrieval: Trajectory,
}

/// Cumulative output energy at time `t`, linear between samples.
fn output_energy_at(traj: &Trajectory, t: f64) -> f64 {
    let k = traj.t.partition_point(|&x| x < t);
    if k == 0 {
        return traj.e_out[0];
    }
    if k >= traj.len() {
        return traj.e_out[traj.len() - 1];
    }
    let (t0, t1) = (traj.t[k - 1], traj.t[k]);
    let s = (t - t0) / (t1 - t0);
    traj.e_out[k - 1] + s * (traj.e_out[k] - traj.e_out[k - 1])
}

/// Stores `pulse`, rephases at the storage time and integrates the undriven
/// system through the echo window.
pub fn run_echo(
    sys: &LinearSystem,
    dp: &DerivedParams,
    pulse: &Pulse,
    opts: &EchoOptions,
) -> Result<EchoResult> {
    if !(opts.window_half_width > 0.0) {
        return Err(Error::InvalidParams("echo window must be > 0".into()));
    }
    let storage_time = opts
        .storage_time
        .unwrap_or_else(|| default_storage_time(dp, pulse));
    let start = pulse.t0 - 5.0 * pulse.duration;
    if storage_time <= start {
        return Err(Error::InvalidParams(format!(
            "storage time {storage_time} precedes the pulse"
        )));
    }
    let forward = integrate(sys, Some(pulse), (start, storage_time), &opts.integrate)?;
    let rephased = ideal_rephase(sys, &forward.final_state)?;
    let stored_energy = sys.energies(&forward.final_state).2;

    let echo_center = 2.0 * storage_time - pulse.t0;
    let half = opts.window_half_width * pulse.duration;
    let window = (echo_center - half, echo_center + half);
    let end = window.1 + pulse.duration;
    let retrieval_opts = IntegrateOptions {
        initial_state: Some(rephased.state.clone()),
        ..opts.integrate.clone()
    };
    let retrieval = integrate(sys, None, (storage_time, end), &retrieval_opts)?;
    let echo_energy = output_energy_at(&retrieval, window.1)
        - output_energy_at(&retrieval, window.0.max(storage_time));
    let input_energy = pulse.energy;
    Ok(EchoResult {
        storage_time,
        echo_center,
        window,
        input_energy,
        echo_energy,
        efficiency: if input_energy > 0.0 {
            echo_energy / input_energy
        } else {
            0.0
        },
        stored_energy,
        rephase_precondition_met: rephased.precondition_met,
        field_fraction: rephased.field_fraction,
        forward,
        retrieval,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::system::build_system;
    use crate::model::{derive_params, AtomSampling, SystemParams};

    #[test]
    fn rephase_is_an_involution() {
        let mut p = SystemParams::comb(2, 2.0).with_absorption_rate(0.5);
        p.g = 0.3;
        let dp = derive_params(&p).unwrap();
        let s = AtomSampling::for_params(&p, 3).unwrap();
        let sys = build_system(&p, &dp, &s).unwrap();
        let state: Vec<Complex64> = (0..sys.dimension())
            .map(|k| Complex64::new(k as f64 * 0.1, 1.0 - k as f64 * 0.05))
            .collect();
        let once = ideal_rephase(&sys, &state).unwrap();
        assert_eq!(once.state[..3], state[..3]);
        assert_eq!(once.state[3], state[3].conj());
        let twice = ideal_rephase(&sys, &once.state).unwrap();
        assert_eq!(twice.state, state);
        assert!(!once.precondition_met);
    }
}
