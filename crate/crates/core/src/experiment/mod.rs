//! Config-driven experiments and the statistical checks behind them.

pub mod checks;
mod config;
mod run;

pub use config::{
    parse_config, render_config, validate, BallParams, BoundaryParams, CouplingParams, CriticalParams, EmbeddingKind, ExperimentConfig, ExperimentKind,
    GridParams, McParams, ModelParams, TransformParams,
};
pub use run::{load_config, run_experiment, RunManifest, MANIFEST_FILE, MAX_CRITICAL_REDRAWS};
