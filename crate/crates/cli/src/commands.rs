//! Subcommand bodies. Each reads a validated [`RunConfig`], queues its
//! artifacts on a [`RunDir`] and returns the text for standard output.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use mrqm::dynamics::{
    build_system, default_storage_time, integrate, run_echo, EchoOptions, IntegrateOptions,
};
use mrqm::matching::{bandwidth, solve_match, BandwidthReport, MatchSolution};
use mrqm::sweep::{optimize_bandwidth, run_sweep, CouplingBounds, OptimizeConfig, OptimizeResult};
use mrqm::{
    derive_params, AtomSampling, DerivedParams, ErrorCategory, Pulse, SpectralResponse,
    SystemParams,
};

use crate::config::RunConfig;
use crate::output::RunDir;

#[derive(Debug)]
pub enum Failure {
    Core(mrqm::Error),
    Config(String),
    Io(std::io::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(e) => match e.category() {
                ErrorCategory::Config => 2,
                ErrorCategory::Numerical => 3,
                ErrorCategory::Precondition => 4,
            },
            Failure::Config(_) => 2,
            Failure::Io(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Config(msg) => write!(f, "invalid config: {msg}"),
            Failure::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<mrqm::Error> for Failure {
    fn from(e: mrqm::Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

type Outcome = Result<String, Failure>;

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable output") + "\n"
}

fn single_point(cfg: &RunConfig, command: &str) -> Result<SystemParams, Failure> {
    if !cfg.axes.is_empty() {
        return Err(Failure::Config(format!(
            "`{command}` works on one point; axes are read by reflect and sweep"
        )));
    }
    Ok(cfg.point()?)
}

/// Solves the configured matching conditions (none leaves the couplings
/// as given) and returns the device actually used.
fn matched(
    cfg: &RunConfig,
    p: &SystemParams,
) -> Result<(SystemParams, DerivedParams, MatchSolution), Failure> {
    let sol = solve_match(p, cfg.variant, cfg.matching)?;
    let q = sol.apply(p);
    let dp = derive_params(&q)?;
    Ok((q, dp, sol))
}

fn response(
    cfg: &RunConfig,
    q: &SystemParams,
    dp: &DerivedParams,
) -> Result<SpectralResponse, Failure> {
    let grid = cfg.grid.build(dp.delta_in)?;
    Ok(SpectralResponse::evaluate(q, dp, cfg.variant, &grid)?)
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<Vec<u8>, Failure> {
    let mut out = Vec::new();
    write(&mut out)?;
    Ok(out)
}

#[derive(Serialize)]
struct ReflectPoint {
    index: Vec<usize>,
    values: BTreeMap<String, f64>,
    file: String,
    params: SystemParams,
    derived: DerivedParams,
    matching: MatchSolution,
    band: BandwidthReport,
}

#[derive(Serialize)]
struct ReflectSummary {
    variant: mrqm::CombVariant,
    epsilon: f64,
    points: Vec<ReflectPoint>,
}

pub fn reflect(cfg: &RunConfig, run: &mut RunDir) -> Outcome {
    let sweep = cfg.sweep();
    sweep.validate()?;
    let indices = sweep.points();
    let width = indices.len().saturating_sub(1).to_string().len();
    let mut points = Vec::with_capacity(indices.len());
    for (k, index) in indices.into_iter().enumerate() {
        let p = sweep.params_at(&index)?;
        let (q, dp, sol) = matched(cfg, &p)?;
        let resp = response(cfg, &q, &dp)?;
        let band = bandwidth(&resp, cfg.epsilon)?;
        let file = if cfg.axes.is_empty() {
            "reflect.csv".to_string()
        } else {
            format!("reflect_{k:0width$}.csv")
        };
        run.add(file.clone(), csv_bytes(|out| resp.write_csv(out))?);
        let values = cfg
            .axes
            .iter()
            .zip(&index)
            .map(|(axis, &i)| (axis.name.clone(), axis.values[i]))
            .collect();
        points.push(ReflectPoint {
            index,
            values,
            file,
            params: q,
            derived: dp,
            matching: sol,
            band,
        });
    }
    let summary = ReflectSummary {
        variant: cfg.variant,
        epsilon: cfg.epsilon,
        points,
    };
    run.add_json("reflect.json", &summary);
    Ok(format!("{} spectra\n", summary.points.len()))
}

pub fn match_cmd(cfg: &RunConfig, run: &mut RunDir) -> Outcome {
    let p = single_point(cfg, "match")?;
    let (_, _, sol) = matched(cfg, &p)?;
    run.add_json("match.json", &sol);
    Ok(json(&sol))
}

pub fn bandwidth_cmd(cfg: &RunConfig, run: &mut RunDir) -> Outcome {
    let p = single_point(cfg, "bandwidth")?;
    let (q, dp, _) = matched(cfg, &p)?;
    let report = bandwidth(&response(cfg, &q, &dp)?, cfg.epsilon)?;
    run.add_json("bandwidth.json", &report);
    Ok(json(&report))
}

struct Device {
    params: SystemParams,
    derived: DerivedParams,
    matching: MatchSolution,
    pulse: Pulse,
    options: IntegrateOptions,
}

fn device(
    cfg: &RunConfig,
    command: &str,
) -> Result<(Device, mrqm::dynamics::LinearSystem), Failure> {
    let p = single_point(cfg, command)?;
    let pulse = cfg
        .pulse
        .clone()
        .ok_or_else(|| Failure::Config(format!("`{command}` needs a `pulse`")))?;
    pulse.validate()?;
    let (params, derived, matching) = matched(cfg, &p)?;
    let sampling = AtomSampling::for_params(&params, cfg.nodes)?;
    let sys = build_system(&params, &derived, &sampling)?;
    let options = IntegrateOptions {
        record_dt: cfg.record_dt,
        record_modes: false,
        ..IntegrateOptions::default()
    };
    Ok((
        Device {
            params,
            derived,
            matching,
            pulse,
            options,
        },
        sys,
    ))
}

#[derive(Serialize)]
struct DynamicsSummary {
    params: SystemParams,
    derived: DerivedParams,
    matching: MatchSolution,
    pulse: Pulse,
    nodes: usize,
    t_span: (f64, f64),
    samples: usize,
    input_energy: f64,
    output_energy: f64,
    storage_efficiency: f64,
    max_ledger_residual: f64,
    accepted_steps: usize,
    rejected_steps: usize,
}

pub fn dynamics(cfg: &RunConfig, run: &mut RunDir) -> Outcome {
    let (dev, sys) = device(cfg, "dynamics")?;
    let t_span = cfg.t_span.unwrap_or_else(|| {
        (
            dev.pulse.t0 - 5.0 * dev.pulse.duration,
            default_storage_time(&dev.derived, &dev.pulse),
        )
    });
    let traj = integrate(&sys, Some(&dev.pulse), t_span, &dev.options)?;
    run.add("trajectory.csv", csv_bytes(|out| traj.write_csv(out))?);
    let last = traj.len() - 1;
    let summary = DynamicsSummary {
        params: dev.params,
        derived: dev.derived,
        matching: dev.matching,
        pulse: dev.pulse,
        nodes: cfg.nodes,
        t_span,
        samples: traj.len(),
        input_energy: traj.e_in[last],
        output_energy: traj.e_out[last],
        storage_efficiency: traj.storage_efficiency(),
        max_ledger_residual: traj.max_ledger_residual(),
        accepted_steps: traj.accepted_steps,
        rejected_steps: traj.rejected_steps,
    };
    run.add_json("dynamics.json", &summary);
    Ok(json(&summary))
}

#[derive(Serialize)]
struct EchoSummary {
    params: SystemParams,
    derived: DerivedParams,
    matching: MatchSolution,
    pulse: Pulse,
    nodes: usize,
    storage_time: f64,
    echo_center: f64,
    window: (f64, f64),
    input_energy: f64,
    echo_energy: f64,
    efficiency: f64,
    stored_energy: f64,
    rephase_precondition_met: bool,
    field_fraction: f64,
}

pub fn echo(cfg: &RunConfig, run: &mut RunDir) -> Outcome {
    let (dev, sys) = device(cfg, "echo")?;
    let opts = EchoOptions {
        storage_time: cfg.storage_time,
        window_half_width: cfg.window_half_width,
        integrate: dev.options.clone(),
    };
    let res = run_echo(&sys, &dev.derived, &dev.pulse, &opts)?;
    run.add("forward.csv", csv_bytes(|out| res.forward.write_csv(out))?);
    run.add(
        "retrieval.csv",
        csv_bytes(|out| res.retrieval.write_csv(out))?,
    );
    let summary = EchoSummary {
        params: dev.params,
        derived: dev.derived,
        matching: dev.matching,
        pulse: dev.pulse,
        nodes: cfg.nodes,
        storage_time: res.storage_time,
        echo_center: res.echo_center,
        window: res.window,
        input_energy: res.input_energy,
        echo_energy: res.echo_energy,
        efficiency: res.efficiency,
        stored_energy: res.stored_energy,
        rephase_precondition_met: res.rephase_precondition_met,
        field_fraction: res.field_fraction,
    };
    run.add_json("echo.json", &summary);
    Ok(json(&summary))
}

pub fn sweep(cfg: &RunConfig, run: &mut RunDir) -> Outcome {
    let res = run_sweep(&cfg.sweep())?;
    run.add("sweep.csv", csv_bytes(|out| res.write_csv(out))?);
    if let Some(spectra) = &res.spectra {
        let width = spectra.len().saturating_sub(1).to_string().len();
        for (k, resp) in spectra.iter().enumerate() {
            if let Some(resp) = resp {
                run.add(
                    format!("spectrum_{k:0width$}.csv"),
                    csv_bytes(|out| resp.write_csv(out))?,
                );
            }
        }
    }
    let summary = res.summary();
    run.add_json("summary.json", &summary);
    Ok(json(&summary))
}

pub fn optimize(cfg: &RunConfig, run: &mut RunDir) -> Outcome {
    let p = single_point(cfg, "optimize")?;
    let bounds = match cfg.bounds {
        Some(b) => b,
        None => {
            if !(cfg.bound_factor >= 1.0) {
                return Err(Failure::Config(format!(
                    "bound_factor must be >= 1, got {}",
                    cfg.bound_factor
                )));
            }
            let sol = solve_match(&p, cfg.variant, mrqm::matching::MatchConditions::BOTH)?;
            CouplingBounds::around(&sol, cfg.bound_factor)
        }
    };
    let opt = OptimizeConfig {
        variant: cfg.variant,
        free: cfg.free,
        epsilon: cfg.epsilon,
        bounds,
        grid: cfg.grid,
    };
    let dp = derive_params(&p)?;
    let res: OptimizeResult = optimize_bandwidth(&p, &dp, &opt)?;
    run.add_json("optimize.json", &res);
    Ok(json(&res))
}
