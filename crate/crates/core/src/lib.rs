//! Discrete-time simulator of bulk-data dissemination across a mesh of
//! replica servers.
//!
//! A single root server starts out holding the full payload; every other
//! node must download it, becoming a server for each part it completes.
//! Per one-minute slot, a planner admits clients onto servers under
//! per-node upload/download rate caps and hop-dependent link bandwidths,
//! using either best-client selection, greedy-global placement order, or
//! a hybrid of the two. The crate also ships a closed-form phase model
//! for cross-checking simulated fill times and an experiment harness
//! that reproduces the summary tables and fill curves.

pub mod analytic;
pub mod bwmodel;
pub mod engine;
mod error;
pub mod harness;
pub mod heuristics;
mod seeds;
pub mod topology;

pub use bwmodel::{build_links, capacitated_client_bw, slot_bandwidth, BandwidthParams, LinkTable};
pub use engine::{
    apply_slot, plan_slot, run_to_fill, Connection, Heuristic, NodeState, Schedule, SimConfig,
    Trajectory,
};
pub use error::{Error, Result};
pub use harness::{parse_config, run_cell, CellParams, CellResult, ExperimentSpec, SummaryStats};
pub use heuristics::{
    bc_score, best_client_select, gg_cost, gg_order, greedy_global_place, hybrid_switch_index,
    Policy, SelectionContext,
};
pub use topology::{NodeId, PairClass, Topology, TopologyKind};
