#![allow(dead_code)]

use std::f64::consts::PI;

use mrqm::dynamics::{build_system, LinearSystem};
use mrqm::matching::{solve_match, MatchConditions};
use mrqm::{derive_params, AtomSampling, CombVariant, DerivedParams, SystemParams};

/// Comb of `m` mini-resonators spanning `delta_in`, with the atomic loading
/// and losses given, matched by both conditions at unit pulling.
pub struct Device {
    pub params: SystemParams,
    pub derived: DerivedParams,
}

pub struct DeviceSpec {
    pub delta_in: f64,
    pub resonators: usize,
    pub gamma_a0: f64,
    pub gamma_b: f64,
    pub gamma_c: f64,
    pub atomic_width: f64,
    pub gamma_a: f64,
}

impl DeviceSpec {
    pub fn new(delta_in: f64, resonators: usize, gamma_a0: f64, atomic_width: f64) -> Self {
        Self {
            delta_in,
            resonators,
            gamma_a0,
            gamma_b: 0.0,
            gamma_c: 0.0,
            atomic_width,
            gamma_a: 0.0,
        }
    }

    /// Atomic dephasing equal to the quantile-node spacing at line center,
    /// which smooths the finite-node bath over the simulated window.
    pub fn smoothed(mut self, nodes: usize) -> Self {
        self.gamma_a = 2.0 * PI * self.atomic_width / nodes as f64;
        self
    }

    pub fn build(&self) -> Device {
        let mut p = SystemParams::comb(self.resonators, self.delta_in);
        p.delta_in_atomic = self.atomic_width;
        p.gamma_a = self.gamma_a;
        p.gamma_b = self.gamma_b;
        p.gamma_c = self.gamma_c;
        let p = p.with_absorption_rate(self.gamma_a0);
        let unit = SystemParams {
            force_chi_one: true,
            ..p.clone()
        };
        let sol = solve_match(&unit, CombVariant::RectangularF1, MatchConditions::BOTH).unwrap();
        let params = sol.apply(&p);
        let derived = derive_params(&params).unwrap();
        Device { params, derived }
    }
}

impl Device {
    pub fn system(&self, nodes: usize) -> LinearSystem {
        let sampling = AtomSampling::for_params(&self.params, nodes).unwrap();
        build_system(&self.params, &self.derived, &sampling).unwrap()
    }
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
