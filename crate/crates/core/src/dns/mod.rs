//! Full-order Taylor-Hood Navier-Stokes solver producing snapshot data.

pub mod problem;
pub mod snapshots;
pub mod solver;


pub use problem::{
    decaying_vortex, forced_cavity, lid_cavity, taylor_green, wall_vortex, ExactSolution,
    ForcedCavityParams, NseProblem, ProblemKind, StokesManufactured,
};
pub use snapshots::{read_snapshots, write_snapshots, SnapshotSet};
pub use solver::{
    solve_nse, solve_stokes, DnsOptions, DnsRun, FlowState, NewtonLog, NewtonSettings, SaddleSystem,
    StepData,
};
