//! Built-in experiments, error surfaces, sizing and file artifacts.

pub mod builtin;
pub mod config;
pub mod experiments;
pub mod io;
pub mod sizing;
pub mod surface;

pub use builtin::{build_ex5_network, build_fig2_network, build_fig3_dataset, table1_dataset};
pub use config::RunConfig;
pub use experiments::{
    run_experiment, ExperimentId, ExperimentSpec, Overrides, RunModes, RunResult, RunSummary,
};
pub use sizing::sizing_estimate;
pub use surface::{sample_error_surface, AxisRange, Surface, SurfaceGrid};
