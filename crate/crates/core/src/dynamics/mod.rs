//! Time-domain behavior of the memory.
//!
//! The brute-force model samples each atomic ensemble on a finite set of
//! detuning nodes and integrates the full linear mode equations
//! ([`system`], [`integrator`]). The closed-form time-domain predictions and
//! efficiency estimators live in [`analytic`]; [`echo`] performs the idealized
//! retrieval; [`spectrum`] turns a recorded output field back into a
//! reflection ratio.

pub mod analytic;
pub mod echo;
pub mod integrator;
pub mod spectrum;
pub mod system;

pub use analytic::{
    analytic_b_m, atom_requirement, atomic_excitation, atomic_population_plateau, mini_energy,
    total_efficiency, AtomRequirement, EfficiencyBudget, MiniEnergyModel, Plateau,
};
pub use echo::{default_storage_time, ideal_rephase, run_echo, EchoOptions, EchoResult, Rephased};
pub use integrator::{integrate, IntegrateOptions, Trajectory};
pub use spectrum::{output_spectrum_ratio, SpectrumRatio};
pub use system::{build_system, LinearSystem, DIMENSION_LIMIT};
