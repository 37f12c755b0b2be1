//! Coverage-aware team orienteering for patrolling fleets.
pub mod benchgen;
pub mod cost;
pub mod estimator;
pub mod graph;
pub mod greedy;
pub mod harness;
pub mod instance;
pub mod milp;
pub mod oracle;
pub mod plan;
pub mod results;
pub mod simulator;
pub mod stats;
pub mod svg;
pub mod tocp;
