//! Parameter scans over device constants, and the derivative-free optimizer
//! for the working bandwidth.
//!
//! A scan point is a set of named assignments applied to a base
//! [`SystemParams`]. Besides the stored fields, three derived quantities can
//! be assigned directly: `delta_in` (comb width, rescaling the spacing),
//! `gamma_a0` (collective absorption rate, via the single-atom coupling) and
//! `gamma_sigma` (loaded linewidth `gamma_a0 + gamma_b`). Stored fields are
//! applied first, then `delta_in`, then the absorption rate, so the result
//! does not depend on the order in which assignments are listed.

use std::collections::BTreeMap;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::EfficiencyBudget;
use crate::error::{Error, Result};
use crate::matching::{
    bandwidth, match_residuals, solve_match, BandwidthReport, MatchConditions, MatchSolution,
};
use crate::model::{derive_params, DerivedParams, SystemParams};
use crate::spectral::{reflection, CombVariant, GridSpec, SpectralResponse};

pub const MAX_AXES: usize = 3;

/// Every name accepted by [`apply_assignments`].
pub const PARAMETER_NAMES: [&str; 18] = [
    "kappa",
    "gamma_c",
    "gamma_b",
    "gamma_a",
    "g",
    "f",
    "M",
    "delta",
    "delta_in_atomic",
    "N_a",
    "T1",
    "gamma_12",
    "tau1",
    "tau2",
    "Ts",
    "delta_in",
    "gamma_a0",
    "gamma_sigma",
];

fn count(name: &str, value: f64) -> Result<u64> {
    if !(value >= 1.0) || value.fract() != 0.0 || value > u32::MAX as f64 {
        return Err(Error::InvalidParams(format!(
            "{name} must be a positive integer, got {value}"
        )));
    }
    Ok(value as u64)
}

fn set_stored(p: &mut SystemParams, name: &str, value: f64) -> Result<()> {
    match name {
        "kappa" => p.kappa = value,
        "gamma_c" => p.gamma_c = value,
        "gamma_b" => p.gamma_b = value,
        "gamma_a" => p.gamma_a = value,
        "g" => p.g = value,
        "f" => p.f = value,
        "M" => p.resonators = count(name, value)? as usize,
        "delta" => p.delta = value,
        "delta_in_atomic" => p.delta_in_atomic = value,
        "N_a" => p.atoms = count(name, value)?,
        "T1" => p.t1 = Some(value),
        "gamma_12" => p.gamma_12 = value,
        "tau1" => p.tau1 = value,
        "tau2" => p.tau2 = value,
        "Ts" => p.ts = value,
        _ => unreachable!("checked by caller"),
    }
    Ok(())
}

fn check_name(name: &str) -> Result<()> {
    if PARAMETER_NAMES.contains(&name) {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!(
            "unknown parameter `{name}`; expected one of {}",
            PARAMETER_NAMES.join(", ")
        )))
    }
}

/// `base` with the named values substituted, validated.
pub fn apply_assignments(base: &SystemParams, assignments: &[(&str, f64)]) -> Result<SystemParams> {
    let mut p = base.clone();
    let mut delta_in = None;
    let mut gamma_a0 = None;
    let mut gamma_sigma = None;
    for &(name, value) in assignments {
        check_name(name)?;
        if !value.is_finite() {
            return Err(Error::InvalidParams(format!(
                "{name} must be finite, got {value}"
            )));
        }
        match name {
            "delta_in" => delta_in = Some(value),
            "gamma_a0" => gamma_a0 = Some(value),
            "gamma_sigma" => gamma_sigma = Some(value),
            _ => set_stored(&mut p, name, value)?,
        }
    }
    if let Some(d) = delta_in {
        if !(d > 0.0) {
            return Err(Error::InvalidParams(format!(
                "delta_in must be > 0, got {d}"
            )));
        }
        p = p.with_comb_width(d);
    }
    p.validate()?;
    match (gamma_a0, gamma_sigma) {
        (Some(_), Some(_)) => {
            return Err(Error::InvalidParams(
                "gamma_a0 and gamma_sigma cannot both be assigned".into(),
            ))
        }
        (Some(r), None) => {
            if r < 0.0 {
                return Err(Error::InvalidParams(format!(
                    "gamma_a0 must be >= 0, got {r}"
                )));
            }
            p = p.with_absorption_rate(r);
        }
        (None, Some(gs)) => p = p.with_total_linewidth(gs)?,
        (None, None) => {}
    }
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepOutputs {
    /// Keep the full reflection spectrum of every point.
    pub spectra: bool,
}

fn default_epsilon() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: SystemParams,
    /// Assignments shared by every point; axis values override them.
    #[serde(default)]
    pub set: BTreeMap<String, f64>,
    #[serde(default)]
    pub axes: Vec<Axis>,
    /// Conditions solved at every point; with none, `kappa` and `g` are taken
    /// as given.
    #[serde(default)]
    pub matching: MatchConditions,
    #[serde(default)]
    pub variant: CombVariant,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub grid: GridSpec,
    /// Half-width of the window for the in-band reflection maximum;
    /// `delta_in / 2` of each point when absent.
    #[serde(default)]
    pub band_half_width: Option<f64>,
    #[serde(default)]
    pub outputs: SweepOutputs,
}

impl SweepConfig {
    pub fn new(base: SystemParams) -> Self {
        Self {
            base,
            set: BTreeMap::new(),
            axes: Vec::new(),
            matching: MatchConditions::BOTH,
            variant: CombVariant::RectangularF1,
            epsilon: default_epsilon(),
            grid: GridSpec::default(),
            band_half_width: None,
            outputs: SweepOutputs::default(),
        }
    }

    pub fn with_axis(mut self, name: &str, values: &[f64]) -> Self {
        self.axes.push(Axis {
            name: name.to_string(),
            values: values.to_vec(),
        });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.len() > MAX_AXES {
            return Err(Error::InvalidParams(format!(
                "at most {MAX_AXES} axes, got {}",
                self.axes.len()
            )));
        }
        for (k, axis) in self.axes.iter().enumerate() {
            check_name(&axis.name)?;
            if axis.values.is_empty() {
                return Err(Error::InvalidParams(format!(
                    "axis `{}` has no values",
                    axis.name
                )));
            }
            if self.axes[..k].iter().any(|a| a.name == axis.name) {
                return Err(Error::InvalidParams(format!(
                    "axis `{}` is repeated",
                    axis.name
                )));
            }
        }
        for name in self.set.keys() {
            check_name(name)?;
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "bandwidth threshold must lie in (0, 1], got {}",
                self.epsilon
            )));
        }
        if self.grid.points == 0 {
            return Err(Error::InvalidParams("frequency grid is empty".into()));
        }
        if !(self.grid.span > 0.0) || !self.grid.span.is_finite() {
            return Err(Error::InvalidParams(format!(
                "grid span must be > 0, got {}",
                self.grid.span
            )));
        }
        if let Some(w) = self.band_half_width {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidParams(format!(
                    "band half-width must be > 0, got {w}"
                )));
            }
        }
        Ok(())
    }

    /// Axis index tuples in lexicographic order, the last axis varying fastest.
    pub fn points(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new()];
        for axis in &self.axes {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    (0..axis.values.len()).map(move |k| {
                        let mut next = prefix.clone();
                        next.push(k);
                        next
                    })
                })
                .collect();
        }
        out
    }

    /// Device parameters at one point, before matching.
    pub fn params_at(&self, index: &[usize]) -> Result<SystemParams> {
        let mut assignments: Vec<(&str, f64)> = self
            .set
            .iter()
            .filter(|(name, _)| !self.axes.iter().any(|a| &a.name == *name))
            .map(|(name, &v)| (name.as_str(), v))
            .collect();
        for (axis, &k) in self.axes.iter().zip(index) {
            assignments.push((axis.name.as_str(), axis.values[k]));
        }
        apply_assignments(&self.base, &assignments)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMetrics {
    pub kappa: f64,
    pub g: f64,
    pub delta_in: f64,
    pub gamma_sigma: f64,
    pub chi: f64,
    /// `|U(0)|^2`.
    pub u0: f64,
    pub band: BandwidthReport,
    /// Largest `|U|^2` on the grid inside the in-band window.
    pub max_u2_band: Option<f64>,
    /// Atomic plateau per unit input energy, `E1 E2`.
    pub plateau: Option<f64>,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowError {
    pub code: String,
    pub message: String,
}

impl From<&Error> for RowError {
    fn from(e: &Error) -> Self {
        Self {
            code: e.code().to_string(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: Vec<usize>,
    pub values: Vec<f64>,
    pub metrics: Option<PointMetrics>,
    pub error: Option<RowError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axes: Vec<String>,
    pub epsilon: f64,
    pub rows: Vec<SweepRow>,
    /// Per-row spectra, when requested; `None` for failed rows.
    #[serde(skip)]
    pub spectra: Option<Vec<Option<SpectralResponse>>>,
}

/// Matches, evaluates and measures one device.
pub fn evaluate_point(
    p: &SystemParams,
    variant: CombVariant,
    matching: MatchConditions,
    epsilon: f64,
    grid: &GridSpec,
    band_half_width: Option<f64>,
) -> Result<(PointMetrics, SpectralResponse)> {
    let p = if matching.impedance || matching.spectral {
        solve_match(p, variant, matching)?.apply(p)
    } else {
        p.clone()
    };
    let dp = derive_params(&p)?;
    let response = SpectralResponse::evaluate(&p, &dp, variant, &grid.build(dp.delta_in)?)?;
    let band = bandwidth(&response, epsilon)?;
    let u0 = reflection(&p, &dp, variant, 0.0)?.norm_sqr();
    let window = band_half_width.unwrap_or(0.5 * dp.delta_in);
    let max_u2_band = response
        .grid
        .samples()
        .iter()
        .zip(&response.u)
        .filter(|(w, _)| w.abs() <= window)
        .map(|(_, u)| u.norm_sqr())
        .reduce(f64::max);
    let plateau = EfficiencyBudget::from_params(&p, &dp)
        .ok()
        .map(|b| b.e1 * b.e2);
    let mut flags = Vec::new();
    if band.width == 0.0 {
        flags.push("empty_band".to_string());
    } else if band.lower_at_grid_edge || band.upper_at_grid_edge {
        flags.push("band_at_grid_edge".to_string());
    }
    if plateau.is_none() {
        flags.push("no_plateau".to_string());
    }
    let metrics = PointMetrics {
        kappa: p.kappa,
        g: p.g,
        delta_in: dp.delta_in,
        gamma_sigma: dp.gamma_sigma,
        chi: dp.chi,
        u0,
        band,
        max_u2_band,
        plateau,
        flags,
    };
    Ok((metrics, response))
}

/// Evaluates every grid point independently and in parallel. Point failures
/// are recorded in their rows.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let points = cfg.points();
    let evaluated: Vec<(SweepRow, Option<SpectralResponse>)> = points
        .into_par_iter()
        .map(|index| {
            let values = cfg
                .axes
                .iter()
                .zip(&index)
                .map(|(a, &k)| a.values[k])
                .collect();
            let outcome = cfg.params_at(&index).and_then(|p| {
                evaluate_point(
                    &p,
                    cfg.variant,
                    cfg.matching,
                    cfg.epsilon,
                    &cfg.grid,
                    cfg.band_half_width,
                )
            });
            let (metrics, error, spectrum) = match outcome {
                Ok((m, s)) => (Some(m), None, Some(s)),
                Err(e) => (None, Some(RowError::from(&e)), None),
            };
            let row = SweepRow {
                index,
                values,
                metrics,
                error,
            };
            (row, spectrum.filter(|_| cfg.outputs.spectra))
        })
        .collect();
    let (rows, spectra): (Vec<_>, Vec<_>) = evaluated.into_iter().unzip();
    Ok(SweepResult {
        axes: cfg.axes.iter().map(|a| a.name.clone()).collect(),
        epsilon: cfg.epsilon,
        rows,
        spectra: cfg.outputs.spectra.then_some(spectra),
    })
}

const METRIC_COLUMNS: &str = "kappa,g,delta_in,gamma_sigma,chi,absU2_0,bandwidth,band_lower,band_upper,max_absU2_band,plateau,flags,error";

fn opt(x: Option<f64>) -> String {
    x.map_or(String::new(), |v| v.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub rows: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub epsilon: f64,
    /// Widest band; the first such row on ties.
    pub best: Option<SweepRow>,
    /// Narrowest band; the first such row on ties.
    pub worst: Option<SweepRow>,
    pub failures: Vec<SweepRow>,
}

impl SweepResult {
    pub fn csv_header(&self) -> String {
        let mut cols: Vec<&str> = self.axes.iter().map(String::as_str).collect();
        cols.push(METRIC_COLUMNS);
        cols.join(",")
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", self.csv_header())?;
        for row in &self.rows {
            let mut fields: Vec<String> = row.values.iter().map(f64::to_string).collect();
            match &row.metrics {
                Some(m) => fields.extend([
                    m.kappa.to_string(),
                    m.g.to_string(),
                    m.delta_in.to_string(),
                    m.gamma_sigma.to_string(),
                    m.chi.to_string(),
                    m.u0.to_string(),
                    m.band.width.to_string(),
                    m.band.lower.to_string(),
                    m.band.upper.to_string(),
                    opt(m.max_u2_band),
                    opt(m.plateau),
                    m.flags.join(";"),
                    String::new(),
                ]),
                None => {
                    fields.extend(std::iter::repeat_n(String::new(), 12));
                    fields.push(row.error.as_ref().map_or(String::new(), |e| e.code.clone()));
                }
            }
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn summary(&self) -> SweepSummary {
        let ok: Vec<&SweepRow> = self.rows.iter().filter(|r| r.metrics.is_some()).collect();
        let width = |r: &SweepRow| r.metrics.as_ref().map_or(0.0, |m| m.band.width);
        let mut best: Option<&SweepRow> = None;
        let mut worst: Option<&SweepRow> = None;
        for &r in &ok {
            if best.is_none_or(|b| width(r) > width(b)) {
                best = Some(r);
            }
            if worst.is_none_or(|w| width(r) < width(w)) {
                worst = Some(r);
            }
        }
        SweepSummary {
            rows: self.rows.len(),
            succeeded: ok.len(),
            failed: self.rows.len() - ok.len(),
            epsilon: self.epsilon,
            best: best.cloned(),
            worst: worst.cloned(),
            failures: self
                .rows
                .iter()
                .filter(|r| r.error.is_some())
                .cloned()
                .collect(),
        }
    }
}

/// Evaluation budget of [`optimize_bandwidth`].
pub const OPTIMIZER_BUDGET: usize = 200;
const GOLDEN_ITERATIONS: usize = 10;
const INITIAL_LOG_RADIUS: f64 = 1.386_294_361_119_890_6; // ln 4

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FreeCouplings {
    pub kappa: bool,
    pub g: bool,
}

impl Default for FreeCouplings {
    fn default() -> Self {
        Self {
            kappa: true,
            g: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingBounds {
    pub kappa: (f64, f64),
    pub g: (f64, f64),
}

impl CouplingBounds {
    /// `[x / factor, x * factor]` around both couplings of `sol`.
    pub fn around(sol: &MatchSolution, factor: f64) -> Self {
        Self {
            kappa: (sol.kappa / factor, sol.kappa * factor),
            g: (sol.g / factor, sol.g * factor),
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("kappa", self.kappa), ("g", self.g)] {
            if !(lo > 0.0 && lo.is_finite() && hi.is_finite() && hi >= lo) {
                return Err(Error::InvalidParams(format!(
                    "{name} bounds must be positive, finite and ordered, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    #[serde(default)]
    pub variant: CombVariant,
    #[serde(default)]
    pub free: FreeCouplings,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub bounds: CouplingBounds,
    #[serde(default)]
    pub grid: GridSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub solution: MatchSolution,
    pub report: BandwidthReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub solution: MatchSolution,
    pub report: BandwidthReport,
    /// The two-condition closed-form solution, when it exists.
    pub analytic: Option<Benchmark>,
    pub evaluations: usize,
    /// Free couplings that ended on a bound, e.g. `kappa_upper`.
    pub pinned: Vec<String>,
}

struct Objective<'a> {
    p: SystemParams,
    dp: &'a DerivedParams,
    cfg: &'a OptimizeConfig,
    grid: crate::spectral::FrequencyGrid,
    evaluations: usize,
}

impl Objective<'_> {
    /// Band width, or `-|U(0)|^2` when the band is empty so that the search
    /// is still guided towards the matched region.
    fn score(&mut self, kappa: f64, g: f64) -> (f64, Option<BandwidthReport>) {
        self.evaluations += 1;
        self.p.kappa = kappa;
        self.p.g = g;
        let report = SpectralResponse::evaluate(&self.p, self.dp, self.cfg.variant, &self.grid)
            .and_then(|r| bandwidth(&r, self.cfg.epsilon));
        match report {
            Ok(r) if r.width > 0.0 => (r.width, Some(r)),
            Ok(r) => match reflection(&self.p, self.dp, self.cfg.variant, 0.0) {
                Ok(u0) => (-u0.norm_sqr(), Some(r)),
                Err(_) => (f64::NEG_INFINITY, None),
            },
            Err(_) => (f64::NEG_INFINITY, None),
        }
    }
}

struct Incumbent {
    x: [f64; 2],
    score: f64,
    report: Option<BandwidthReport>,
}

impl Incumbent {
    fn offer(&mut self, x: [f64; 2], eval: (f64, Option<BandwidthReport>)) {
        if eval.0 > self.score {
            self.x = x;
            self.score = eval.0;
            self.report = eval.1;
        }
    }
}

/// Maximizes `bandwidth(epsilon)` over the free couplings by cyclic
/// coordinate search in log space, each line refined by golden section, with
/// a fixed budget of [`OPTIMIZER_BUDGET`] evaluations. The search starts from
/// the two-condition solution clamped to the bounds and only ever accepts
/// strict improvements.
pub fn optimize_bandwidth(
    p: &SystemParams,
    dp: &DerivedParams,
    cfg: &OptimizeConfig,
) -> Result<OptimizeResult> {
    cfg.bounds.validate()?;
    if !(cfg.epsilon > 0.0 && cfg.epsilon <= 1.0) {
        return Err(Error::InvalidParams(format!(
            "bandwidth threshold must lie in (0, 1], got {}",
            cfg.epsilon
        )));
    }
    let grid = cfg.grid.build(dp.delta_in)?;
    let analytic = match solve_match(p, cfg.variant, MatchConditions::BOTH) {
        Ok(solution) => {
            let q = solution.apply(p);
            let report = bandwidth(
                &SpectralResponse::evaluate(&q, dp, cfg.variant, &grid)?,
                cfg.epsilon,
            )?;
            Some(Benchmark { solution, report })
        }
        Err(_) => None,
    };

    let bounds = [cfg.bounds.kappa, cfg.bounds.g];
    let free = [cfg.free.kappa, cfg.free.g];
    let given = [p.kappa, p.g];
    let mut start = [0.0; 2];
    for c in 0..2 {
        let (lo, hi) = bounds[c];
        start[c] = if free[c] {
            match &analytic {
                Some(a) => [a.solution.kappa, a.solution.g][c].clamp(lo, hi),
                None => (lo * hi).sqrt(),
            }
        } else {
            given[c]
        };
    }

    let mut objective = Objective {
        p: p.clone(),
        dp,
        cfg,
        grid,
        evaluations: 0,
    };
    let first = objective.score(start[0], start[1]);
    let mut best = Incumbent {
        x: start,
        score: first.0,
        report: first.1,
    };

    let coords: Vec<usize> = (0..2)
        .filter(|&c| free[c] && bounds[c].1 > bounds[c].0)
        .collect();
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut radius = INITIAL_LOG_RADIUS;
    'search: while !coords.is_empty() && radius > 1e-10 {
        for &c in &coords {
            let (lo, hi) = (bounds[c].0.ln(), bounds[c].1.ln());
            let centre = best.x[c].ln();
            let (mut a, mut b) = ((centre - radius).max(lo), (centre + radius).min(hi));
            if !(b > a) {
                continue;
            }
            let mut probe = |v: f64| -> Option<f64> {
                if objective.evaluations >= OPTIMIZER_BUDGET {
                    return None;
                }
                let mut x = best.x;
                x[c] = v.exp();
                let eval = objective.score(x[0], x[1]);
                let score = eval.0;
                best.offer(x, eval);
                Some(score)
            };
            for end in [a, b] {
                if probe(end).is_none() {
                    break 'search;
                }
            }
            let mut x1 = b - inv_phi * (b - a);
            let mut x2 = a + inv_phi * (b - a);
            let (Some(mut f1), Some(mut f2)) = (probe(x1), probe(x2)) else {
                break 'search;
            };
            for _ in 0..GOLDEN_ITERATIONS {
                if f1 >= f2 {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - inv_phi * (b - a);
                    let Some(f) = probe(x1) else { break 'search };
                    f1 = f;
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + inv_phi * (b - a);
                    let Some(f) = probe(x2) else { break 'search };
                    f2 = f;
                }
            }
        }
        radius *= 0.5;
    }

    let evaluations = objective.evaluations;
    let [kappa, g] = best.x;
    let mut pinned = Vec::new();
    for &c in &coords {
        let name = ["kappa", "g"][c];
        let (lo, hi) = bounds[c];
        let x = best.x[c];
        if x <= lo * (1.0 + 1e-9) {
            pinned.push(format!("{name}_lower"));
        } else if x >= hi * (1.0 - 1e-9) {
            pinned.push(format!("{name}_upper"));
        }
    }

    if let Some(a) = &analytic {
        if kappa == a.solution.kappa && g == a.solution.g {
            return Ok(OptimizeResult {
                solution: a.solution.clone(),
                report: a.report.clone(),
                analytic: analytic.clone(),
                evaluations,
                pinned,
            });
        }
    }
    let report = best.report.ok_or_else(|| {
        Error::Precondition("no point inside the bounds has a finite response".into())
    })?;
    let q = SystemParams {
        kappa,
        g,
        ..p.clone()
    };
    let (residual_u0, residual_du0) = match_residuals(&q, dp, cfg.variant)?;
    Ok(OptimizeResult {
        solution: MatchSolution {
            kappa,
            g,
            variant: cfg.variant,
            conditions: MatchConditions::NONE,
            residual_u0,
            residual_du0,
        },
        report,
        analytic,
        evaluations,
        pinned,
    })
}
