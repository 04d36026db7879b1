//! `mrqm`: reflection spectra, matching, time-domain runs and parameter
//! scans of a multiresonator atomic-ensemble memory, driven by JSON configs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Failure;
use config::{Overrides, RunConfig};
use mrqm::CombVariant;
use output::{sha256_hex, RunDir, RunManifest, MANIFEST_SCHEMA};

#[derive(Parser)]
#[command(name = "mrqm", version, about)]
struct Cli {
    /// Run the built-in property checks of every module and exit.
    #[arg(long)]
    check: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Reflection spectrum on the frequency grid, one CSV per scan point.
    Reflect(Common),
    /// Solve the matching conditions and print the couplings.
    Match(Common),
    /// Working bandwidth of the matched device.
    Bandwidth(Common),
    /// Integrate the mode equations for the configured pulse.
    Dynamics(Common),
    /// Store, rephase and retrieve the configured pulse.
    Echo(Common),
    /// Scan the configured axes and tabulate bandwidth metrics.
    Sweep(Common),
    /// Search the couplings for the widest working band.
    Optimize(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Run directory; created if missing.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ["f1", "f2", "discrete"])]
    variant: Option<String>,
    #[arg(long)]
    force_chi_one: bool,
    /// Frequency grid points.
    #[arg(long = "grid")]
    grid: Option<usize>,
    /// Grid half-span in units of the comb width.
    #[arg(long)]
    span: Option<f64>,
}

type Body = fn(&RunConfig, &mut RunDir) -> Result<String, Failure>;

impl Command {
    fn parts(&self) -> (&'static str, &Common, Body, bool) {
        match self {
            Command::Reflect(c) => ("reflect", c, commands::reflect, true),
            Command::Match(c) => ("match", c, commands::match_cmd, false),
            Command::Bandwidth(c) => ("bandwidth", c, commands::bandwidth_cmd, false),
            Command::Dynamics(c) => ("dynamics", c, commands::dynamics, true),
            Command::Echo(c) => ("echo", c, commands::echo, true),
            Command::Sweep(c) => ("sweep", c, commands::sweep, true),
            Command::Optimize(c) => ("optimize", c, commands::optimize, false),
        }
    }
}

fn overrides(c: &Common) -> Result<(Overrides, Vec<String>), Failure> {
    let variant = c
        .variant
        .as_deref()
        .map(str::parse::<CombVariant>)
        .transpose()?;
    let mut listed = Vec::new();
    if let Some(v) = &c.variant {
        listed.push(format!("--variant={v}"));
    }
    if c.force_chi_one {
        listed.push("--force-chi-one".into());
    }
    if let Some(n) = c.grid {
        listed.push(format!("--grid={n}"));
    }
    if let Some(s) = c.span {
        listed.push(format!("--span={s}"));
    }
    Ok((
        Overrides {
            variant,
            force_chi_one: c.force_chi_one,
            grid_points: c.grid,
            span: c.span,
        },
        listed,
    ))
}

fn run(command: &Command) -> Result<(), Failure> {
    let (name, common, body, writes_files) = command.parts();
    let raw = std::fs::read(&common.config)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", common.config.display())))?;
    let mut cfg: RunConfig =
        serde_json::from_slice(&raw).map_err(|e| Failure::Config(e.to_string()))?;
    let (ov, listed) = overrides(common)?;
    cfg.apply(&ov);

    if writes_files && common.out.is_none() {
        return Err(Failure::Config(format!(
            "`{name}` writes files and needs --out"
        )));
    }
    let out_dir = common.out.clone().unwrap_or_default();
    let mut dir = RunDir::new(&out_dir);
    let text = body(&cfg, &mut dir)?;
    print!("{text}");

    if common.out.is_some() {
        let mut hashed = raw;
        for flag in &listed {
            hashed.push(0);
            hashed.extend_from_slice(flag.as_bytes());
        }
        dir.finish(RunManifest {
            schema: MANIFEST_SCHEMA,
            subcommand: name.to_string(),
            config: common.config.display().to_string(),
            out_dir: out_dir.display().to_string(),
            deterministic: true,
            tool_version: env!("CARGO_PKG_VERSION"),
            input_sha256: sha256_hex(&hashed),
            overrides: listed,
            files: Vec::new(),
        })?;
    }
    Ok(())
}

fn check() -> ExitCode {
    let report = mrqm::checks::run_all();
    for o in &report.outcomes {
        let status = if o.passed { "PASS" } else { "FAIL" };
        println!("{status} {}: {} ({})", o.module, o.name, o.detail);
    }
    println!("{} passed, {} failed", report.passed(), report.failed());
    if report.failed() == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.check {
        return check();
    }
    let Some(command) = cli.command else {
        eprintln!("error: give a subcommand or --check (see --help)");
        return ExitCode::from(2);
    };
    match run(&command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
