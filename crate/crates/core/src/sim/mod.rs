//! Time-domain closed-loop simulation with zero-crossing resets.
//!
//! [`build_loop`] realizes controller and plant as one state vector,
//! [`simulate`] integrates it with fixed-step RK4 and locates each sign change
//! of the FORE input inside the step before applying the reset. Step and sine
//! studies over the κ range sit on top.

mod engine;
mod experiments;
mod state_space;

pub use engine::{compute_metrics, simulate, Reference, ResetEvent, SimTrace, TraceMetrics};
pub use experiments::{
    cglp_nominal_crossover, comparison_set, kappa_sweep, kappa_sweep_at, nonrobust_linear, run_experiment,
    sine_experiment, sine_experiment_with, Experiment, NamedController, SineExperiment, SineSummary,
    SweepRow, SweepSpec,
};
pub use state_space::{build_loop, Block, Controller, LoopStateSpace, ResetMode};
