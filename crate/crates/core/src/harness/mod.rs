//! Configuration, ensemble execution and result persistence behind the
//! command line front end.

pub mod config;
pub mod record;
pub mod runner;

pub use config::{Mode, Overrides, RunConfig};
pub use record::{emit_plotdata, Experiment, ExperimentRecord, FailureRecord};
pub use runner::{run_fig1, run_fig2, run_quench_sweep};
