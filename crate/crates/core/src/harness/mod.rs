//! Trial simulation, experiment sweeps and result files.

pub mod config;
pub mod estimation;
pub mod output;
pub mod sim;
pub mod sweeps;

pub use config::{BufferConfig, SimConfig, SnrGrid};
pub use estimation::{estimate_channels, ls_estimate};
pub use output::{emit_results, to_csv, write_csv, write_svg, Plot, Series, CSV_HEADER};
pub use sim::{run_epoch, run_trial, EpochReport, Scheme, TrialContext, TrialOutcome, TrialState};
pub use sweeps::{
    run_ber_sweep, run_buffer_size_sweep, run_delay_experiment, DelayExperiment, ExperimentResult, ExperimentRow,
};
