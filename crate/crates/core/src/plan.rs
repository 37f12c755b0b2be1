//! Fleet plans (one closed walk per agent) and walk manipulation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{all_pairs_shortest, Graph, Vertex, Violation, DEPOT};

/// Slack allowed on a route length against the budget.
pub const BUDGET_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetPlan {
    /// Per agent, the vertex sequence from the depot back to the depot. The
    /// degenerate route `[DEPOT]` means the agent stays home.
    pub routes: Vec<Vec<Vertex>>,
    pub lengths: Vec<f64>,
}

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("agent {agent}: route must start and end at the depot")]
    NotClosed { agent: usize },
    #[error("agent {agent}: ({from},{to}) is not an edge")]
    NotAnEdge { agent: usize, from: usize, to: usize },
    #[error("agent {agent}: length {length} exceeds budget {budget}")]
    OverBudget { agent: usize, length: f64, budget: f64 },
    #[error("agent {agent}: stored length {stored} differs from the walked length {walked}")]
    LengthMismatch { agent: usize, stored: f64, walked: f64 },
}

impl FleetPlan {
    /// Builds a plan, measuring each route on `graph`. Routes must already be
    /// valid walks.
    pub fn from_routes(graph: &Graph, routes: Vec<Vec<Vertex>>) -> Self {
        let lengths = routes.iter().map(|r| walk_length(graph, r).unwrap_or(f64::INFINITY)).collect();
        FleetPlan { routes, lengths }
    }

    /// A plan where every agent stays at the depot.
    pub fn idle(num_agents: usize) -> Self {
        FleetPlan { routes: vec![vec![DEPOT]; num_agents], lengths: vec![0.0; num_agents] }
    }

    pub fn num_agents(&self) -> usize {
        self.routes.len()
    }

    /// Union of all routes plus the depot, ascending.
    pub fn visited(&self) -> Vec<Vertex> {
        let mut v: Vec<Vertex> = self.routes.iter().flatten().copied().chain([DEPOT]).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Sum of `weights` over visited non-depot vertices.
    pub fn coverage(&self, weights: &[f64]) -> f64 {
        self.visited().into_iter().filter(|&v| v != DEPOT).map(|v| weights[v]).sum()
    }

    pub fn check(&self, graph: &Graph, l_max: f64) -> Result<(), PlanError> {
        for (agent, (route, &stored)) in self.routes.iter().zip(&self.lengths).enumerate() {
            if route.first() != Some(&DEPOT) || route.last() != Some(&DEPOT) {
                return Err(PlanError::NotClosed { agent });
            }
            let mut walked = 0.0;
            for w in route.windows(2) {
                walked += graph
                    .length(w[0], w[1])
                    .ok_or(PlanError::NotAnEdge { agent, from: w[0] + 1, to: w[1] + 1 })?;
            }
            if (walked - stored).abs() > 1e-9 * walked.max(1.0) {
                return Err(PlanError::LengthMismatch { agent, stored, walked });
            }
            if walked > l_max + BUDGET_TOL {
                return Err(PlanError::OverBudget { agent, length: walked, budget: l_max });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ProblemError {
    #[error("invalid graph: {0}")]
    Graph(Violation),
    #[error("expected {expected} predicted costs, got {got}")]
    CostLength { expected: usize, got: usize },
    #[error("predicted cost at vertex {vertex} is {value}; must be finite and non-negative")]
    BadCost { vertex: usize, value: f64 },
    #[error("fleet needs at least one agent")]
    NoAgents,
    #[error("must-visit vertex {0} is out of range")]
    MustVisitOutOfRange(usize),
    #[error("must-visit vertex {vertex} cannot be reached and left within the budget (round trip {round_trip})")]
    UnreachableMustVisit { vertex: usize, round_trip: f64 },
}

/// Variable ids of a built model. Edge-indexed vectors follow `graph.edges()`.
/// Inputs of one planning round.
#[derive(Debug, Clone, Copy)]
pub struct PlanningProblem<'a> {
    pub graph: &'a Graph,
    pub c_hat: &'a [f64],
    pub num_agents: usize,
    pub l_max: f64,
    pub must_visit: &'a [Vertex],
}

impl PlanningProblem<'_> {
    pub fn check(&self) -> Result<(), ProblemError> {
        let n = self.graph.num_vertices();
        self.graph.validate().map_err(ProblemError::Graph)?;
        if self.c_hat.len() != n {
            return Err(ProblemError::CostLength { expected: n, got: self.c_hat.len() });
        }
        if let Some((vertex, &value)) =
            self.c_hat.iter().enumerate().find(|(_, c)| !(c.is_finite() && **c >= 0.0))
        {
            return Err(ProblemError::BadCost { vertex: vertex + 1, value });
        }
        if self.num_agents == 0 {
            return Err(ProblemError::NoAgents);
        }
        let dist = all_pairs_shortest(self.graph);
        for &v in self.must_visit {
            if v >= n {
                return Err(ProblemError::MustVisitOutOfRange(v + 1));
            }
            let rt = dist.round_trip(v);
            if !rt.is_finite() {
                return Err(ProblemError::UnreachableMustVisit { vertex: v + 1, round_trip: rt });
            }
        }
        Ok(())
    }
}

/// Total length of consecutive edges, `None` if some step is not an edge.
pub fn walk_length(graph: &Graph, walk: &[Vertex]) -> Option<f64> {
    walk.windows(2).map(|w| graph.length(w[0], w[1])).sum()
}

/// Removes repeated directed-edge traversals from a walk.
///
/// While some edge `a -> b` occurs twice, the walk between the two
/// occurrences goes from `b` back to `a`; dropping both traversals and running
/// that stretch backwards (every edge has its reverse) keeps the walk closed
/// and keeps every vertex on it, and shortens it by `2 l(a, b)`. Reversal can
/// create a new repeat elsewhere, so the step is iterated; the length drops
/// strictly each time, so it terminates.
pub fn remove_repeated_edges(walk: &[Vertex]) -> Vec<Vertex> {
    let mut w = walk.to_vec();
    while let Some((p, q)) = first_repeat(&w) {
        let mut next = Vec::with_capacity(w.len());
        next.extend_from_slice(&w[..=p]);
        next.extend(w[p + 1..q].iter().rev());
        next.extend_from_slice(&w[q + 2..]);
        w = next;
    }
    w
}

fn first_repeat(w: &[Vertex]) -> Option<(usize, usize)> {
    for p in 0..w.len().saturating_sub(1) {
        for q in p + 1..w.len() - 1 {
            if w[q] == w[p] && w[q + 1] == w[p + 1] {
                return Some((p, q));
            }
        }
    }
    None
}

/// Closed walk from `start` that uses every directed edge in `edges` exactly
/// once (Hierholzer). `None` if the edge set is unbalanced or not connected to
/// `start`. Out-edges are taken in ascending head order.
pub fn eulerian_circuit(num_vertices: usize, edges: &[(Vertex, Vertex)], start: Vertex) -> Option<Vec<Vertex>> {
    if edges.is_empty() {
        return Some(vec![start]);
    }
    let mut out: Vec<Vec<Vertex>> = vec![Vec::new(); num_vertices];
    let mut balance = vec![0i64; num_vertices];
    for &(a, b) in edges {
        out[a].push(b);
        balance[a] += 1;
        balance[b] -= 1;
    }
    if balance.iter().any(|&b| b != 0) {
        return None;
    }
    for list in &mut out {
        // popped from the back, so reverse order gives ascending heads
        list.sort_unstable_by(|a, b| b.cmp(a));
    }
    let mut stack = vec![start];
    let mut circuit = Vec::with_capacity(edges.len() + 1);
    while let Some(&v) = stack.last() {
        match out[v].pop() {
            Some(next) => stack.push(next),
            None => circuit.push(stack.pop().expect("nonempty")),
        }
    }
    circuit.reverse();
    (circuit.len() == edges.len() + 1).then_some(circuit)
}
