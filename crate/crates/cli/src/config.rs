//! Run configuration documents.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use mrqm::matching::MatchConditions;
use mrqm::sweep::{
    apply_assignments, Axis, CouplingBounds, FreeCouplings, SweepConfig, SweepOutputs,
};
use mrqm::{CombVariant, GridSpec, Pulse, Result, SystemParams};

fn default_epsilon() -> f64 {
    0.01
}

fn default_nodes() -> usize {
    201
}

fn default_window() -> f64 {
    3.0
}

fn default_bound_factor() -> f64 {
    2.0
}

/// One JSON document drives every subcommand; each reads the fields it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub base: SystemParams,
    #[serde(default)]
    pub set: BTreeMap<String, f64>,
    #[serde(default)]
    pub axes: Vec<Axis>,
    #[serde(default)]
    pub matching: MatchConditions,
    #[serde(default)]
    pub variant: CombVariant,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub band_half_width: Option<f64>,
    #[serde(default)]
    pub outputs: SweepOutputs,

    #[serde(default)]
    pub pulse: Option<Pulse>,
    /// Detuning nodes per mini-resonator in the time-domain model.
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default)]
    pub t_span: Option<(f64, f64)>,
    #[serde(default)]
    pub record_dt: Option<f64>,
    #[serde(default)]
    pub storage_time: Option<f64>,
    #[serde(default = "default_window")]
    pub window_half_width: f64,

    #[serde(default)]
    pub free: FreeCouplings,
    /// Search box; `bound_factor` around the closed-form couplings when absent.
    #[serde(default)]
    pub bounds: Option<CouplingBounds>,
    #[serde(default = "default_bound_factor")]
    pub bound_factor: f64,
}

/// Command-line settings that take precedence over the document.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub variant: Option<CombVariant>,
    pub force_chi_one: bool,
    pub grid_points: Option<usize>,
    pub span: Option<f64>,
}

impl RunConfig {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.variant {
            self.variant = v;
        }
        if o.force_chi_one {
            self.base.force_chi_one = true;
        }
        if let Some(n) = o.grid_points {
            self.grid.points = n;
        }
        if let Some(s) = o.span {
            self.grid.span = s;
        }
    }

    pub fn sweep(&self) -> SweepConfig {
        SweepConfig {
            base: self.base.clone(),
            set: self.set.clone(),
            axes: self.axes.clone(),
            matching: self.matching,
            variant: self.variant,
            epsilon: self.epsilon,
            grid: self.grid,
            band_half_width: self.band_half_width,
            outputs: self.outputs,
        }
    }

    /// Base parameters with the shared assignments applied; for commands that
    /// work on a single point.
    pub fn point(&self) -> Result<SystemParams> {
        let assignments: Vec<(&str, f64)> =
            self.set.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        apply_assignments(&self.base, &assignments)
    }
}
