//! Round-robin greedy planner: mandatory vertices first (nearest), then the
//! best predicted cost per unit of travel, always keeping a way home.

use crate::graph::{DistanceMatrix, Vertex, DEPOT};
use crate::plan::{walk_length, FleetPlan, PlanningProblem, ProblemError};

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyAgentState {
    pub position: Vertex,
    pub spent: f64,
    pub finished: bool,
    pub route: Vec<Vertex>,
}

impl GreedyAgentState {
    fn new() -> Self {
        GreedyAgentState { position: DEPOT, spent: 0.0, finished: false, route: vec![DEPOT] }
    }
}

pub fn greedy_plan(problem: &PlanningProblem<'_>, dist: &DistanceMatrix) -> Result<FleetPlan, ProblemError> {
    problem.check()?;
    let n = problem.graph.num_vertices();
    let l_max = problem.l_max;
    let c_hat = problem.c_hat;

    // pool[v]: Some(true) for pending must-visit, Some(false) for the rest
    let mut pool: Vec<Option<bool>> = (0..n).map(|v| (v != DEPOT).then_some(false)).collect();
    for &v in problem.must_visit {
        if v != DEPOT {
            pool[v] = Some(true);
        }
    }

    let mut agents = vec![GreedyAgentState::new(); problem.num_agents];
    while agents.iter().any(|a| !a.finished) {
        for agent in agents.iter_mut().filter(|a| !a.finished) {
            let here = agent.position;
            // measured along the actual paths so the final length obeys the budget bit for bit
            let leg = |a: Vertex, b: Vertex| dist.path(a, b).and_then(|p| walk_length(problem.graph, &p));
            let fits = |v: Vertex| match (leg(here, v), leg(v, DEPOT)) {
                (Some(out), Some(back)) => agent.spent + out + back <= l_max,
                _ => false,
            };

            let mut pick = None;
            let mut best = f64::INFINITY;
            for v in (0..n).filter(|&v| pool[v] == Some(true) && fits(v)) {
                if dist.get(here, v) < best {
                    best = dist.get(here, v);
                    pick = Some(v);
                }
            }
            if pick.is_none() {
                let mut best = 0.0;
                for v in (0..n).filter(|&v| pool[v] == Some(false) && fits(v)) {
                    let ratio = c_hat[v] / dist.get(here, v);
                    if ratio > best {
                        best = ratio;
                        pick = Some(v);
                    }
                }
            }

            let target = pick.unwrap_or(DEPOT);
            if target == here {
                agent.finished = true;
                continue;
            }
            let path = dist.path(here, target).expect("candidates are reachable");
            agent.spent += leg(here, target).expect("shortest paths follow edges");
            for &v in &path[1..] {
                pool[v] = None;
                agent.route.push(v);
            }
            agent.position = target;
            if target == DEPOT {
                agent.finished = true;
            }
        }
    }

    let lengths = agents.iter().map(|a| a.spent).collect();
    Ok(FleetPlan { routes: agents.into_iter().map(|a| a.route).collect(), lengths })
}
