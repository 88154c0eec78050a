//! Scenario runner: builds a feeder from a scenario file, runs the
//! centralized, fixed-point and ADMM solvers and writes reports.

pub mod compare;
pub mod plot;
pub mod report;
pub mod run;
pub mod scenario;

pub use compare::{compare_methods, comparison_table, ComparisonRow};
pub use plot::emit_plotdata;
pub use report::{MethodRun, Outcome, RunReport};
pub use run::{run_method, run_scenario, run_sweep, sweep_rows, SweepRow};
pub use scenario::{Method, Scenario};
