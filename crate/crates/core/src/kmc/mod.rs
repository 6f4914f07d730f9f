//! Kinetic Monte Carlo machinery: rate tables, weighted event selection,
//! and the trajectory engine for the microscopic, coarse-grained and
//! synthetic processes.

mod engine;
mod rates;
mod sumtree;

pub use engine::{
    run_trajectory, Engine, InitConfig, Process, RunOptions, Sampling, Snapshot, TimeStepMode,
    TrajectorySample, UpdateMode,
};
pub use rates::{
    apply_coarse_event, apply_micro_event, coarse_local_update, coarse_rates, micro_local_update,
    micro_rates, select_event, synthetic_local_update, synthetic_rates, EventKind, KmcEvent,
    RateTable,
};
pub use sumtree::SumTree;
