//! Fixtures shared by the criterion benches.

use tocp_core::benchgen::{generate_instance, BenchmarkConfig};
use tocp_core::estimator::EstimatorState;
use tocp_core::instance::Instance;
use tocp_core::plan::PlanningProblem;

/// Benchmark-suite instance at horizon `h`, first seed with exactly `n`
/// vertices and `m` agents.
pub fn instance(n: usize, m: usize, h: usize) -> Instance {
    let cfg = BenchmarkConfig::default();
    (1..)
        .map(|s| generate_instance(&cfg, s, h).instance)
        .find(|i| i.num_vertices() == n && i.num_agents == m)
        .expect("the generator covers every (N, M) pair")
}

/// Planning problem for one round of `inst` with estimates `c_hat`.
pub fn problem<'a>(inst: &'a Instance, c_hat: &'a [f64]) -> PlanningProblem<'a> {
    PlanningProblem {
        graph: &inst.graph,
        c_hat,
        num_agents: inst.num_agents,
        l_max: inst.l_max,
        must_visit: &inst.must_visit,
    }
}

/// Cost estimates for the first round, before any visit.
pub fn initial_c_hat(inst: &Instance) -> Vec<f64> {
    EstimatorState::new(inst.num_vertices(), inst.mu_default).predicted_cost(1)
}
