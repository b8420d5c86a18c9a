//! Configuration, single and ensemble drivers, experiment presets.

pub mod config;
pub mod presets;
pub mod run;

pub use config::{BumpData, InitConfig, RunConfig, Setup};
pub use presets::{preset_blowup, preset_convergence, wilson_interval, BlowupParams, BlowupTable, ConvergenceTable};
pub use run::{run_ensemble, run_jobs, run_paths, run_single, simulate_path, EnsembleSummary, PathRecord, RunOutput, Stats};
