//! Declarative experiments: presets, TOML configs, runs, sweeps and manifests.

mod config;
mod run;
mod table;

pub use config::{
    check_axis, GridConfig, Measure, ModelConfig, ObserveConfig, OpenConfig, OutputConfig,
    Overrides, ScenarioConfig, ScenarioId, StateEntry, SweepAxis, SweepConfig, Variant,
};
pub use run::{
    execute, info, materialize, run, sweep, Derived, IntegratorInfo, Metrics, RunManifest,
    RunOutput, SweepReport, DEFAULT_PERIODS, PHOTON_TOL,
};
pub use table::Table;
