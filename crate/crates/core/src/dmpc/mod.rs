//! Distributed MPC of the collector field: cluster subproblems, flow
//! allocation and the closed-loop simulation.

mod closed_loop;
mod log;
mod subproblem;

pub use closed_loop::{
    allocate_flows, repair_flows, run_closed_loop, shift_warm_start, ClosedLoopOptions, ControllerMode, FlowPlan,
    RunError,
};
pub use log::{ControlRecord, LogError, LogMeta, LogRow, SimulationLog};
pub use subproblem::{
    centralized_reference_solve, predict_outlet_sequence, predict_with_sensitivities, CentralizedProblem,
    CentralizedSolution, ClusterBoundary, ClusterSubproblem, ControllerConfig, CostTerms,
};
