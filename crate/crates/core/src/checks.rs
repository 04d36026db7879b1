//! Self-contained property checks over every module, run by the command-line
//! `--check` mode. Each check exercises a fixed deterministic parameter set
//! and reports a one-line detail.

use std::panic::{catch_unwind, AssertUnwindSafe};

use num_complex::Complex64;
use serde::Serialize;

use crate::dynamics::{
    build_system, ideal_rephase, integrate, run_echo, EchoOptions, IntegrateOptions, LinearSystem,
};
use crate::error::Result;
use crate::matching::{
    bandwidth, matched_kappa_combined, solve_match, MatchConditions, MatchSolution,
};
use crate::model::{
    derive_params, make_pulse, AtomSampling, DerivedParams, PulseShape, SystemParams,
};
use crate::spectral::{reflection, CombVariant, FrequencyGrid, GridSpec, SpectralResponse};
use crate::sweep::{
    evaluate_point, optimize_bandwidth, run_sweep, CouplingBounds, FreeCouplings, OptimizeConfig,
    SweepConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub module: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub outcomes: Vec<CheckOutcome>,
}

impl CheckReport {
    pub fn passed(&self) -> usize {
        self.outcomes.iter().filter(|o| o.passed).count()
    }

    pub fn failed(&self) -> usize {
        self.outcomes.len() - self.passed()
    }
}

type Check = fn() -> Result<(bool, String)>;

const CHECKS: &[(&str, &str, Check)] = &[
    ("model", "absorption rate from atom number", absorption_rate),
    ("model", "pulse normalization", pulse_normalization),
    ("model", "atom sampling weights", atom_sampling),
    ("spectral", "passivity", passivity),
    ("spectral", "far-detuned reflection", far_detuned),
    (
        "spectral",
        "continuum and discrete combs agree",
        variants_agree,
    ),
    ("matching", "impedance residual", impedance_residual),
    ("matching", "spectral residual", spectral_residual),
    ("matching", "closed-form matched kappa", closed_form_kappa),
    (
        "matching",
        "bandwidth monotone in threshold",
        threshold_monotone,
    ),
    ("dynamics", "undriven system stays at rest", rest_state),
    ("dynamics", "energy ledger", energy_ledger),
    ("dynamics", "rephasing is an involution", rephase_involution),
    ("dynamics", "lossless echo", lossless_echo),
    ("sweep", "worker-count independence", worker_independence),
    (
        "sweep",
        "single point equals direct evaluation",
        single_point,
    ),
    (
        "sweep",
        "optimizer dominates closed form",
        optimizer_dominates,
    ),
];

/// Runs every check. A check that errors or panics counts as failed.
pub fn run_all() -> CheckReport {
    let outcomes = CHECKS
        .iter()
        .map(|&(module, name, check)| {
            let (passed, detail) = match catch_unwind(AssertUnwindSafe(check)) {
                Ok(Ok(result)) => result,
                Ok(Err(e)) => (false, format!("error: {e}")),
                Err(_) => (false, "panicked".to_string()),
            };
            CheckOutcome {
                module,
                name,
                passed,
                detail,
            }
        })
        .collect();
    CheckReport { outcomes }
}

/// Unit-pulling comb with the given loaded linewidth and cavity loss.
fn device(
    resonators: usize,
    delta_in: f64,
    gamma_sigma: f64,
    gamma_c: f64,
) -> Result<SystemParams> {
    let mut p = SystemParams::comb(resonators, delta_in);
    p.force_chi_one = true;
    p.gamma_c = gamma_c;
    p.with_total_linewidth(gamma_sigma)
}

fn lattice() -> Result<Vec<SystemParams>> {
    let mut out = Vec::new();
    for &d in &[0.5, 2.0, 10.0] {
        for &ratio in &[0.05, 0.3, 1.0, 3.0] {
            for &gc in &[0.0, 0.1, 1.0] {
                out.push(device(8, d, ratio * d, gc * d)?);
            }
        }
    }
    Ok(out)
}

fn matched(p: &SystemParams) -> Result<(SystemParams, DerivedParams, MatchSolution)> {
    let sol = solve_match(p, CombVariant::RectangularF1, MatchConditions::BOTH)?;
    let q = sol.apply(p);
    let dp = derive_params(&q)?;
    Ok((q, dp, sol))
}

fn absorption_rate() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for &rate in &[0.01, 0.5, 3.0, 40.0] {
        let dp = derive_params(&SystemParams::comb(5, 10.0).with_absorption_rate(rate))?;
        worst = worst.max((dp.gamma_a0 - rate).abs() / rate);
    }
    Ok((worst < 1e-12, format!("max relative error {worst:.2e}")))
}

fn pulse_normalization() -> Result<(bool, String)> {
    let pulse = make_pulse(PulseShape::Gaussian, 2.5, 0.7, 1.0, 3.0)?;
    let (lo, hi) = pulse.support();
    let n = 20_000;
    let h = (hi - lo) / n as f64;
    let trapezoid: f64 = (0..=n)
        .map(|k| {
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            w * pulse.intensity(lo + k as f64 * h)
        })
        .sum::<f64>()
        * h;
    let closed = pulse.cumulative_energy(hi) - pulse.cumulative_energy(lo);
    let err = (trapezoid - 2.5).abs().max((closed - 2.5).abs()) / 2.5;
    Ok((err < 1e-8, format!("relative energy error {err:.2e}")))
}

fn atom_sampling() -> Result<(bool, String)> {
    let s = AtomSampling::lorentzian(3, 101, 50.0, 50.0)?;
    let total: f64 = s.weights.iter().sum();
    let sorted = s
        .detunings
        .iter()
        .all(|row| row.windows(2).all(|w| w[1] > w[0]));
    Ok((
        (total - 1.0).abs() < 1e-12 && sorted,
        format!("weight sum {total:.15}, ascending detunings {sorted}"),
    ))
}

fn passivity() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for p in lattice()? {
        let (q, dp, _) = matched(&p)?;
        for variant in [CombVariant::RectangularF1, CombVariant::DiscreteSum] {
            let grid = GridSpec {
                points: 801,
                span: 3.0,
            }
            .build(dp.delta_in)?;
            let r = SpectralResponse::evaluate(&q, &dp, variant, &grid)?;
            worst = worst.max(r.reflectance().into_iter().fold(0.0, f64::max));
        }
    }
    Ok((worst <= 1.0 + 1e-12, format!("max |U|^2 = {worst:.12}")))
}

fn far_detuned() -> Result<(bool, String)> {
    let (q, dp, _) = matched(&device(8, 2.0, 1.0, 0.0)?)?;
    let u = reflection(&q, &dp, CombVariant::DiscreteSum, 1e4 * dp.delta_in)?.norm_sqr();
    Ok((
        u > 0.99 && u <= 1.0 + 1e-12,
        format!("|U|^2 = {u:.6} at 1e4 delta_in"),
    ))
}

fn variants_agree() -> Result<(bool, String)> {
    // Loaded linewidth equal to the comb spacing.
    let (q, dp, _) = matched(&device(10, 10.0, 1.0, 0.0)?)?;
    let grid = FrequencyGrid::symmetric(dp.delta_in, 1.5, 601)?;
    let f1 = SpectralResponse::evaluate(&q, &dp, CombVariant::RectangularF1, &grid)?;
    let ds = SpectralResponse::evaluate(&q, &dp, CombVariant::DiscreteSum, &grid)?;
    let worst =
        f1.u.iter()
            .zip(&ds.u)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
    Ok((
        worst < 0.03,
        format!("max |U_F1 - U_discrete| = {worst:.4}"),
    ))
}

fn impedance_residual() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for p in lattice()? {
        for variant in CombVariant::ALL {
            let sol = solve_match(&p, variant, MatchConditions::BOTH)?;
            worst = worst.max(sol.residual_u0);
        }
    }
    Ok((worst < 1e-12, format!("max |U(0)|^2 = {worst:.2e}")))
}

fn spectral_residual() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for p in lattice()? {
        let (_, dp, sol) = matched(&p)?;
        worst = worst.max(sol.residual_du0 * dp.delta_in);
    }
    Ok((
        worst < 1e-6,
        format!("max delta_in |dU/dw(0)| = {worst:.2e}"),
    ))
}

fn closed_form_kappa() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for p in lattice()? {
        let (q, dp, sol) = matched(&p)?;
        let k = matched_kappa_combined(&dp, q.gamma_c)?;
        worst = worst.max((k - sol.kappa).abs() / sol.kappa);
    }
    Ok((worst < 1e-10, format!("max relative gap {worst:.2e}")))
}

fn threshold_monotone() -> Result<(bool, String)> {
    let (q, dp, _) = matched(&device(8, 10.0, 4.0, 0.0)?)?;
    let r = SpectralResponse::evaluate(
        &q,
        &dp,
        CombVariant::RectangularF1,
        &FrequencyGrid::default_for(dp.delta_in)?,
    )?;
    let widths = [1e-4, 1e-3, 1e-2, 0.1, 0.5, 1.0]
        .iter()
        .map(|&e| bandwidth(&r, e).map(|b| b.width))
        .collect::<Result<Vec<_>>>()?;
    let ok = widths.windows(2).all(|w| w[1] >= w[0]);
    Ok((ok, format!("widths {widths:.3?}")))
}

fn small_system(nodes: usize) -> Result<(LinearSystem, DerivedParams)> {
    let mut p = SystemParams::comb(8, 10.0);
    p.delta_in_atomic = 100.0;
    let p = p.with_absorption_rate(2.0);
    let unit = SystemParams {
        force_chi_one: true,
        ..p.clone()
    };
    let sol = solve_match(&unit, CombVariant::RectangularF1, MatchConditions::BOTH)?;
    let q = sol.apply(&p);
    let dp = derive_params(&q)?;
    let sampling = AtomSampling::for_params(&q, nodes)?;
    Ok((build_system(&q, &dp, &sampling)?, dp))
}

fn rest_state() -> Result<(bool, String)> {
    let (sys, _) = small_system(21)?;
    let traj = integrate(&sys, None, (0.0, 5.0), &IntegrateOptions::default())?;
    let peak = traj
        .final_state
        .iter()
        .chain(&traj.a_out)
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    Ok((peak == 0.0, format!("max amplitude {peak:e}")))
}

fn energy_ledger() -> Result<(bool, String)> {
    let (sys, _) = small_system(101)?;
    let pulse = make_pulse(PulseShape::Gaussian, 1.0, 1.0, 0.0, 0.5)?;
    let traj = integrate(
        &sys,
        Some(&pulse),
        (-5.0, 8.0),
        &IntegrateOptions::default(),
    )?;
    let r = traj.max_ledger_residual() / pulse.energy;
    Ok((r <= 1e-6, format!("max residual / W_in = {r:.2e}")))
}

fn rephase_involution() -> Result<(bool, String)> {
    let (sys, _) = small_system(5)?;
    let state: Vec<Complex64> = (0..sys.dimension())
        .map(|k| Complex64::new((k as f64).sin(), (k as f64 * 0.7).cos()))
        .collect();
    let twice = ideal_rephase(&sys, &ideal_rephase(&sys, &state)?.state)?.state;
    Ok((
        twice == state,
        format!("{} components restored", state.len()),
    ))
}

fn lossless_echo() -> Result<(bool, String)> {
    let (sys, dp) = small_system(401)?;
    let pulse = make_pulse(PulseShape::Gaussian, 1.0, 1.0, 0.0, 0.0)?;
    let echo = run_echo(&sys, &dp, &pulse, &EchoOptions::default())?;
    Ok((
        (echo.efficiency - 1.0).abs() <= 0.05,
        format!("echo / W_in = {:.4}", echo.efficiency),
    ))
}

fn sweep_config() -> Result<SweepConfig> {
    let base = device(6, 4.0, 1.0, 0.0)?;
    Ok(SweepConfig::new(base)
        .with_axis("gamma_sigma", &[0.5, 1.0, 2.0, 4.0])
        .with_axis("gamma_c", &[0.0, 0.3]))
}

fn csv_bytes(cfg: &SweepConfig, threads: usize) -> Result<Vec<u8>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| crate::Error::Precondition(e.to_string()))?;
    let res = pool.install(|| run_sweep(cfg))?;
    let mut out = Vec::new();
    res.write_csv(&mut out)
        .map_err(|e| crate::Error::Precondition(e.to_string()))?;
    Ok(out)
}

fn worker_independence() -> Result<(bool, String)> {
    let cfg = sweep_config()?;
    let one = csv_bytes(&cfg, 1)?;
    let many = csv_bytes(&cfg, 4)?;
    Ok((
        one == many,
        format!("{} bytes, identical {}", one.len(), one == many),
    ))
}

fn single_point() -> Result<(bool, String)> {
    let mut cfg = sweep_config()?;
    cfg.axes.clear();
    let row = run_sweep(&cfg)?.rows.remove(0);
    let (direct, _) = evaluate_point(
        &cfg.base,
        cfg.variant,
        cfg.matching,
        cfg.epsilon,
        &cfg.grid,
        cfg.band_half_width,
    )?;
    let same = row.metrics.as_ref() == Some(&direct);
    Ok((same, format!("identical metrics {same}")))
}

fn optimizer_dominates() -> Result<(bool, String)> {
    let p = device(10, 10.0, 10.0, 0.0)?;
    let (_, dp, sol) = matched(&p)?;
    let cfg = OptimizeConfig {
        variant: CombVariant::RectangularF1,
        free: FreeCouplings::default(),
        epsilon: 0.01,
        bounds: CouplingBounds::around(&sol, 2.0),
        grid: GridSpec::default(),
    };
    let res = optimize_bandwidth(&p, &dp, &cfg)?;
    let reference = res.analytic.as_ref().map_or(0.0, |a| a.report.width);
    Ok((
        res.report.width >= reference,
        format!("{:.4} vs closed form {reference:.4}", res.report.width),
    ))
}

#[cfg(test)]
mod tests {
    #[test]
    fn every_check_passes() {
        let report = super::run_all();
        for o in &report.outcomes {
            assert!(o.passed, "{} / {}: {}", o.module, o.name, o.detail);
        }
    }
}
