//! Exhaustive planners for tiny instances, used to certify the MIP and to
//! measure how far per-iteration optimality is from horizon optimality.
//!
//! A route is any closed walk from the depot that uses each directed edge at
//! most once and touches the depot only at its two ends, which is exactly
//! what one agent's binary edge variables can express.

use std::collections::{BTreeMap, HashSet};

use thiserror::Error;

use crate::cost::episode_cost;
use crate::graph::{Graph, Vertex, DEPOT};
use crate::plan::{walk_length, FleetPlan, PlanningProblem, ProblemError};
use crate::tocp::ModelOptions;

pub const MAX_VERTICES: usize = 6;
pub const MAX_AGENTS: usize = 2;
pub const MAX_HORIZON: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("kappa must have one row per vertex and at least one column")]
    BadKappa,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    /// Sum of `c_hat` over the covered non-depot vertices.
    pub reward: f64,
    pub plan: FleetPlan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonSolution {
    /// Episode objective: residual cost summed over iterations.
    pub cost: f64,
    pub plans: Vec<FleetPlan>,
}

/// Every vertex set one agent can cover, each with its shortest witnessing
/// walk, keyed by bitmask (bit 0 is the depot).
pub fn single_agent_covers(graph: &Graph, l_max: f64, allow_idle: bool) -> BTreeMap<u32, (f64, Vec<Vertex>)> {
    let mut out = BTreeMap::new();
    if allow_idle {
        out.insert(1u32, (0.0, vec![DEPOT]));
    }
    let mut seen = HashSet::new();
    let mut walk = vec![DEPOT];
    dfs(graph, l_max, &mut walk, 0u64, 0.0, &mut seen, &mut out);
    out
}

fn dfs(
    graph: &Graph,
    l_max: f64,
    walk: &mut Vec<Vertex>,
    used: u64,
    length: f64,
    seen: &mut HashSet<(Vertex, u64)>,
    out: &mut BTreeMap<u32, (f64, Vec<Vertex>)>,
) {
    let here = *walk.last().expect("walk starts at the depot");
    for &k in graph.out_edges(here) {
        if used >> k & 1 == 1 {
            continue;
        }
        let e = graph.edge(k);
        let next_len = length + e.length;
        if next_len > l_max {
            continue;
        }
        let next_used = used | 1 << k;
        walk.push(e.to);
        if e.to == DEPOT {
            let mask = walk.iter().fold(0u32, |m, &v| m | 1 << v);
            let slot = out.entry(mask).or_insert((f64::INFINITY, Vec::new()));
            if next_len < slot.0 {
                *slot = (next_len, walk.clone());
            }
        } else if seen.insert((e.to, next_used)) {
            dfs(graph, l_max, walk, next_used, next_len, seen, out);
        }
        walk.pop();
    }
}

fn check_size(n: usize, agents: usize, max_agents: usize) -> Result<(), OracleError> {
    if n > MAX_VERTICES {
        return Err(OracleError::TooLarge(format!("{n} vertices (limit {MAX_VERTICES})")));
    }
    if agents > max_agents {
        return Err(OracleError::TooLarge(format!("{agents} agents (limit {max_agents})")));
    }
    Ok(())
}

fn mask_reward(mask: u32, c_hat: &[f64]) -> f64 {
    (1..c_hat.len()).filter(|&v| mask >> v & 1 == 1).map(|v| c_hat[v]).sum()
}

fn must_mask(must: &[Vertex]) -> u32 {
    must.iter().fold(0, |m, &v| m | 1 << v)
}

/// Fleet cover choices as tuples of per-agent masks, in lexicographic order.
fn fleet_choices(covers: &[u32], agents: usize) -> Vec<Vec<u32>> {
    let mut all: Vec<Vec<u32>> = vec![Vec::new()];
    for _ in 0..agents {
        all = all
            .into_iter()
            .flat_map(|prefix| {
                covers.iter().map(move |&c| {
                    let mut p = prefix.clone();
                    p.push(c);
                    p
                })
            })
            .collect();
    }
    all
}

fn plan_from_masks(graph: &Graph, masks: &[u32], covers: &BTreeMap<u32, (f64, Vec<Vertex>)>) -> FleetPlan {
    let routes: Vec<Vec<Vertex>> = masks.iter().map(|m| covers[m].1.clone()).collect();
    let lengths = routes.iter().map(|r| walk_length(graph, r).expect("enumerated walks follow edges")).collect();
    FleetPlan { routes, lengths }
}

/// Best coverage reward for one planning round; `None` when no fleet plan
/// satisfies the depot and must-visit rules.
pub fn brute_force_single_iteration(
    problem: &PlanningProblem<'_>,
    options: ModelOptions,
) -> Result<Option<OracleSolution>, OracleError> {
    problem.check()?;
    let graph = problem.graph;
    check_size(graph.num_vertices(), problem.num_agents, MAX_AGENTS)?;
    let covers = single_agent_covers(graph, problem.l_max, options.allow_idle_agents);
    let keys: Vec<u32> = covers.keys().copied().collect();
    let must = must_mask(problem.must_visit);
    let mut best: Option<(f64, Vec<u32>)> = None;
    for choice in fleet_choices(&keys, problem.num_agents) {
        let union = choice.iter().fold(0, |a, &m| a | m);
        if union & must != must {
            continue;
        }
        let reward = mask_reward(union, problem.c_hat);
        if best.as_ref().is_none_or(|(b, _)| reward > *b) {
            best = Some((reward, choice));
        }
    }
    Ok(best.map(|(reward, masks)| OracleSolution { reward, plan: plan_from_masks(graph, &masks, &covers) }))
}

fn horizon_of(graph: &Graph, kappa: &[Vec<f64>]) -> Result<usize, OracleError> {
    let h = kappa.first().map_or(0, Vec::len);
    if kappa.len() != graph.num_vertices() || h == 0 || kappa.iter().any(|r| r.len() != h) {
        return Err(OracleError::BadKappa);
    }
    if h > MAX_HORIZON {
        return Err(OracleError::TooLarge(format!("horizon {h} (limit {MAX_HORIZON})")));
    }
    Ok(h)
}

fn visited_of(mask: u32, n: usize) -> Vec<Vertex> {
    (0..n).filter(|&v| mask >> v & 1 == 1 || v == DEPOT).collect()
}

/// Single agent, known growth `kappa` (`N x H`): the sequence of rounds that
/// minimizes the episode objective.
pub fn brute_force_horizon(
    graph: &Graph,
    kappa: &[Vec<f64>],
    l_max: f64,
    must_visit: &[Vertex],
    options: ModelOptions,
) -> Result<Option<HorizonSolution>, OracleError> {
    let n = graph.num_vertices();
    let zeros = vec![0.0; n];
    PlanningProblem { graph, c_hat: &zeros, num_agents: 1, l_max, must_visit }.check()?;
    check_size(n, 1, 1)?;
    let h = horizon_of(graph, kappa)?;
    let covers = single_agent_covers(graph, l_max, options.allow_idle_agents);
    let must = must_mask(must_visit);
    let keys: Vec<u32> = covers.keys().copied().filter(|m| m & must == must).collect();
    let mut best: Option<(f64, Vec<u32>)> = None;
    for seq in fleet_choices(&keys, h) {
        let visits: Vec<Vec<Vertex>> = seq.iter().map(|&m| visited_of(m, n)).collect();
        let cost = episode_cost(kappa, &visits);
        if best.as_ref().is_none_or(|(b, _)| cost < *b) {
            best = Some((cost, seq));
        }
    }
    Ok(best.map(|(cost, seq)| HorizonSolution {
        cost,
        plans: seq.iter().map(|&m| plan_from_masks(graph, &[m], &covers)).collect(),
    }))
}

/// Plans each round optimally against the cost actually accrued so far
/// (perfect knowledge of `kappa`, no lookahead) and reports the episode objective.
pub fn chain_per_iteration(
    graph: &Graph,
    kappa: &[Vec<f64>],
    num_agents: usize,
    l_max: f64,
    must_visit: &[Vertex],
    options: ModelOptions,
) -> Result<Option<HorizonSolution>, OracleError> {
    let n = graph.num_vertices();
    let h = horizon_of(graph, kappa)?;
    let mut accrued = vec![0.0; n];
    let mut plans = Vec::with_capacity(h);
    let mut visits = Vec::with_capacity(h);
    for t in 0..h {
        for (a, row) in accrued.iter_mut().zip(kappa) {
            *a += row[t];
        }
        let problem = PlanningProblem { graph, c_hat: &accrued, num_agents, l_max, must_visit };
        let Some(best) = brute_force_single_iteration(&problem, options)? else {
            return Ok(None);
        };
        let visited = best.plan.visited();
        for &v in &visited {
            accrued[v] = 0.0;
        }
        visits.push(visited);
        plans.push(best.plan);
    }
    Ok(Some(HorizonSolution { cost: episode_cost(kappa, &visits), plans }))
}
