//! Closed-loop episodes: estimate, plan, execute, observe, for every
//! iteration of an instance's horizon.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{episode_cost, CostState};
use crate::estimator::EstimatorState;
use crate::graph::{all_pairs_shortest, Vertex, DEPOT};
use crate::greedy::greedy_plan;
use crate::instance::Instance;
use crate::milp::{BranchAndBound, MilpSolver, ModelStats, SolveOptions, SolveStatus};
use crate::plan::{FleetPlan, PlanningProblem};
use crate::tocp::{assignment_from_plan, audit_solution, build, extract_routes, fit_to_model, AuditViolation, ModelOptions, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerKind {
    Tocp,
    Top,
    Greedy,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 3] = [PlannerKind::Tocp, PlannerKind::Top, PlannerKind::Greedy];

    pub fn as_str(self) -> &'static str {
        match self {
            PlannerKind::Tocp => "tocp",
            PlannerKind::Top => "top",
            PlannerKind::Greedy => "greedy",
        }
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlannerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tocp" => Ok(PlannerKind::Tocp),
            "top" => Ok(PlannerKind::Top),
            "greedy" => Ok(PlannerKind::Greedy),
            other => Err(format!("unknown planner '{other}' (expected tocp, top or greedy)")),
        }
    }
}

/// How a planning round ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanStatus {
    Optimal,
    FeasibleTimeout,
    Infeasible,
    TimeoutNoSolution,
    /// Greedy plan; no optimality claim.
    Heuristic,
    SolverError,
}

impl PlanStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PlanStatus::Optimal => "optimal",
            PlanStatus::FeasibleTimeout => "feasible-timeout",
            PlanStatus::Infeasible => "infeasible",
            PlanStatus::TimeoutNoSolution => "timeout-no-solution",
            PlanStatus::Heuristic => "heuristic",
            PlanStatus::SolverError => "solver-error",
        }
    }
}

impl fmt::Display for PlanStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlanStatus {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            PlanStatus::Optimal,
            PlanStatus::FeasibleTimeout,
            PlanStatus::Infeasible,
            PlanStatus::TimeoutNoSolution,
            PlanStatus::Heuristic,
            PlanStatus::SolverError,
        ]
        .into_iter()
        .find(|p| p.as_str() == s)
        .ok_or_else(|| format!("unknown status '{s}'"))
    }
}

impl From<SolveStatus> for PlanStatus {
    fn from(s: SolveStatus) -> Self {
        match s {
            SolveStatus::Optimal => PlanStatus::Optimal,
            SolveStatus::FeasibleTimeout => PlanStatus::FeasibleTimeout,
            SolveStatus::Infeasible => PlanStatus::Infeasible,
            SolveStatus::TimeoutNoSolution => PlanStatus::TimeoutNoSolution,
        }
    }
}

/// Result of one planning round.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    pub status: PlanStatus,
    pub plan: Option<FleetPlan>,
    /// Predicted coverage of the plan (the MIP objective for exact planners).
    pub objective: Option<f64>,
    /// Best proven bound on the objective, exact planners only.
    pub bound: Option<f64>,
    pub model_stats: Option<ModelStats>,
    pub nodes: usize,
    /// Independent constraint check of the MIP solution; empty for greedy.
    pub audit: Vec<AuditViolation>,
    pub message: Option<String>,
    pub seconds: f64,
}

impl PlanOutcome {
    fn failed(status: PlanStatus, message: String, start: Instant) -> Self {
        PlanOutcome {
            status,
            plan: None,
            objective: None,
            bound: None,
            model_stats: None,
            nodes: 0,
            audit: Vec::new(),
            message: Some(message),
            seconds: start.elapsed().as_secs_f64(),
        }
    }
}

/// Plans one round with the chosen planner. Exact planners start from the
/// greedy plan when it fits the model and stop at `time_limit`.
pub fn plan_iteration(
    problem: &PlanningProblem<'_>,
    planner: PlannerKind,
    time_limit: Option<Duration>,
    options: ModelOptions,
) -> PlanOutcome {
    let start = Instant::now();
    let dist = all_pairs_shortest(problem.graph);
    let greedy = greedy_plan(problem, &dist);
    let variant = match planner {
        PlannerKind::Greedy => {
            return match greedy {
                Ok(plan) => PlanOutcome {
                    status: PlanStatus::Heuristic,
                    objective: Some(plan.coverage(problem.c_hat)),
                    plan: Some(plan),
                    bound: None,
                    model_stats: None,
                    nodes: 0,
                    audit: Vec::new(),
                    message: None,
                    seconds: start.elapsed().as_secs_f64(),
                },
                Err(e) => PlanOutcome::failed(PlanStatus::Infeasible, e.to_string(), start),
            };
        }
        PlannerKind::Tocp => Variant::Tocp,
        PlannerKind::Top => Variant::Top,
    };
    let (model, handles) = match build(problem, variant, options) {
        Ok(m) => m,
        Err(e) => return PlanOutcome::failed(PlanStatus::Infeasible, e.to_string(), start),
    };
    let warm_start = greedy
        .ok()
        .map(|g| fit_to_model(&g, problem))
        .and_then(|g| assignment_from_plan(&g, &handles, problem.graph, model.num_variables(), options));
    let remaining = time_limit.map(|t| t.saturating_sub(start.elapsed()));
    let solution = match BranchAndBound::default().solve(&model, &SolveOptions { time_limit: remaining, warm_start }) {
        Ok(s) => s,
        Err(e) => return PlanOutcome::failed(PlanStatus::SolverError, e.to_string(), start),
    };
    let status = PlanStatus::from(solution.status);
    let mut outcome = PlanOutcome {
        status,
        plan: None,
        objective: None,
        bound: solution.bound.is_finite().then_some(solution.bound),
        model_stats: Some(model.stats()),
        nodes: solution.nodes,
        audit: Vec::new(),
        message: None,
        seconds: 0.0,
    };
    if solution.status.has_solution() {
        outcome.audit = audit_solution(problem, &handles, &solution.values, variant, options);
        match extract_routes(&solution.values, &handles, problem.graph) {
            Ok(plan) => {
                outcome.objective = Some(solution.objective);
                outcome.plan = Some(plan);
            }
            Err(e) => {
                outcome.status = PlanStatus::SolverError;
                outcome.message = Some(e.to_string());
            }
        }
    }
    outcome.seconds = start.elapsed().as_secs_f64();
    outcome
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub t: usize,
    pub c_hat: Vec<f64>,
    pub outcome: PlanOutcome,
    /// Vertices whose cost was collected, ascending, depot included.
    pub visited: Vec<Vertex>,
    pub residual_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub instance_id: String,
    pub planner: PlannerKind,
    pub horizon: usize,
    pub iteration_costs: Vec<f64>,
    pub total_cost: f64,
    pub compute_seconds: Vec<f64>,
    pub statuses: Vec<PlanStatus>,
    /// Some iteration produced no plan.
    pub failed: bool,
    pub records: Vec<IterationRecord>,
    pub final_mu_hat: Vec<f64>,
}

impl EpisodeResult {
    /// Recomputes the objective from the growth table and the visit log.
    pub fn recomputed_cost(&self, kappa: &[Vec<f64>]) -> f64 {
        let visits: Vec<Vec<Vertex>> = self.records.iter().map(|r| r.visited.clone()).collect();
        episode_cost(kappa, &visits)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SimulationError {
    #[error("kappa covers {got} iterations but the instance horizon is {expected}")]
    HorizonMismatch { expected: usize, got: usize },
    #[error("kappa has {got} rows for {expected} vertices")]
    VertexMismatch { expected: usize, got: usize },
}

/// Runs iterations `1..=upto` of an episode. Each round plans against the
/// estimator's predicted cost; a round with no plan keeps the fleet at the
/// depot while cost keeps growing.
pub fn run_iterations(
    instance: &Instance,
    planner: PlannerKind,
    time_limit: Option<Duration>,
    upto: usize,
) -> Result<EpisodeResult, SimulationError> {
    let n = instance.num_vertices();
    let h = instance.horizon;
    if instance.kappa.len() != n {
        return Err(SimulationError::VertexMismatch { expected: n, got: instance.kappa.len() });
    }
    if let Some(bad) = instance.kappa.iter().find(|r| r.len() != h) {
        return Err(SimulationError::HorizonMismatch { expected: h, got: bad.len() });
    }
    let upto = upto.min(h);
    let mut cost = CostState::new(instance.kappa.clone());
    let mut est = EstimatorState::new(n, instance.mu_default);
    let mut records = Vec::with_capacity(upto);
    for _ in 0..upto {
        let t = cost.advance().expect("horizon checked above");
        let c_hat = est.predicted_cost(t);
        let problem = PlanningProblem {
            graph: &instance.graph,
            c_hat: &c_hat,
            num_agents: instance.num_agents,
            l_max: instance.l_max,
            must_visit: &instance.must_visit,
        };
        let outcome = plan_iteration(&problem, planner, time_limit, ModelOptions::default());
        let visited = outcome.plan.as_ref().map_or_else(|| vec![DEPOT], FleetPlan::visited);
        for (v, amount) in cost.apply_visits(&visited, t).expect("visited vertices are in range") {
            est.observe(v, amount, t).expect("iterations increase");
        }
        records.push(IterationRecord { t, c_hat, outcome, visited, residual_cost: cost.residual_cost() });
    }
    let iteration_costs: Vec<f64> = records.iter().map(|r| r.residual_cost).collect();
    Ok(EpisodeResult {
        instance_id: instance.id(),
        planner,
        horizon: h,
        total_cost: iteration_costs.iter().sum(),
        iteration_costs,
        compute_seconds: records.iter().map(|r| r.outcome.seconds).collect(),
        statuses: records.iter().map(|r| r.outcome.status).collect(),
        failed: records.iter().any(|r| r.outcome.plan.is_none()),
        final_mu_hat: est.mu_hats(),
        records,
    })
}

pub fn run_episode(
    instance: &Instance,
    planner: PlannerKind,
    time_limit: Option<Duration>,
) -> Result<EpisodeResult, SimulationError> {
    run_iterations(instance, planner, time_limit, instance.horizon)
}
