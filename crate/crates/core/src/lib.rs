//! Downlink NOMA user clustering and power allocation under imperfect
//! successive interference cancellation.
//!
//! * [`noma`]: per-cluster rates, minimum power fractions and the pairwise
//!   feasibility gate.
//! * [`clustering`]: cluster layout, the MUP and AMUP schedulers and cell
//!   spectral efficiency.
//! * [`network`]: Poisson deployments, link budgets and per-cell user pools.
//! * [`experiment`]: sweeps, baselines and output files.

pub mod clustering;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod network;
pub mod noma;
pub mod verify;

pub use clustering::{
    evaluate_rates, layout_clusters, layout_pool, run_amup, run_mup, split_cluster, ClusterLayout,
    CseNormalization, Mode, RateSummary, Scheduler, SchedulingOutcome, UserDecision, UserPool,
};
pub use error::{ClusteringError, ExperimentError, NetworkError, NomaError};
pub use exec::Execution;
pub use experiment::{
    emit_outputs, run_experiment, Aggregate, CellSample, ExperimentConfig, MetricsTable, Policy,
};
pub use network::{generate_drop, Deployment, RadioConfig};
pub use noma::{
    allocate_powers, cluster_feasibility, noma_rate, noma_sinr, oma_rate, power_factor,
    AllocationRule, ClusterSpec, FeasibilityReport, LinearSinr, Member, PowerAllocation, UserId,
};
