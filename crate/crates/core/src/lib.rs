//! Heterogeneity-aware load balancing over clusters of processor-sharing
//! servers: closed-form response times, the optimal load split, a brute-force
//! oracle, dispatch policies and a discrete-event simulator.

pub mod cluster;
pub mod oracle;
pub mod policy;
pub mod queueing;
pub mod sim;

pub use cluster::{ArrivalRate, ClusterSpec, GroupSpec, LoadSplit, QueueingError, SplitSolution};
pub use oracle::oracle_optimal_split;
pub use policy::{
    build_policy, wrr_sequence_fractions, DispatcherState, PolicyConfig, PolicyError, PolicyKind,
    PolicyName, ServerId,
};
pub use queueing::{
    activation_thresholds, closed_form_optimal_t, mean_response_time, optimal_split,
    per_server_weights, proportional_split, regime, uniform_server_split, utilization, Regime,
};
pub use sim::{run_simulation, ServiceDistribution, SimConfig, SimError, SimResult};
