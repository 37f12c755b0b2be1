//! The per-iteration coverage MIP, its visit-once (TOP) baseline, route
//! extraction, warm starts from walks, and an independent constraint audit.
//!
//! Variables, per agent `m`:
//! - `x[e][m]` binary: agent traverses directed edge `e`;
//! - `u[e][m]` continuous in `[0, N]`: connectivity flow on `e`;
//! - `y[i][m]` binary: agent visits vertex `i`;
//! - `z[i]` binary: some agent visits `i`.
//!
//! The flow leaves the depot carrying one unit per vertex the agent visits
//! and drops one unit at each of them, so every selected edge of an agent has
//! to hang together with the depot.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{all_pairs_shortest, DistanceMatrix, Graph, Vertex, DEPOT};
use crate::milp::{MilpModel, Relation, Sense, VarId};
use crate::plan::{eulerian_circuit, remove_repeated_edges, walk_length, FleetPlan, PlanningProblem, ProblemError, BUDGET_TOL};

/// Value above which a binary reads as 1.
const ON: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelOptions {
    /// Let an agent stay at the depot (departure `<= 1` instead of `= 1`).
    pub allow_idle_agents: bool,
    /// Use `u <= (N-1) x` plus `u <= sum_j y_j` instead of `u <= N x`.
    pub tight_flow_bound: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Vertices may be revisited; routes are closed walks.
    Tocp,
    /// Each non-depot vertex entered at most once overall; routes are simple cycles.
    Top,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableHandles {
    pub num_vertices: usize,
    pub num_agents: usize,
    pub edges: Vec<(Vertex, Vertex)>,
    pub x: Vec<Vec<VarId>>,
    pub u: Vec<Vec<VarId>>,
    pub y: Vec<Vec<VarId>>,
    pub z: Vec<VarId>,
}

pub fn build_tocp(
    problem: &PlanningProblem<'_>,
    options: ModelOptions,
) -> Result<(MilpModel, VariableHandles), ProblemError> {
    build(problem, Variant::Tocp, options)
}

pub fn build_top(
    problem: &PlanningProblem<'_>,
    options: ModelOptions,
) -> Result<(MilpModel, VariableHandles), ProblemError> {
    build(problem, Variant::Top, options)
}

pub fn build(
    problem: &PlanningProblem<'_>,
    variant: Variant,
    options: ModelOptions,
) -> Result<(MilpModel, VariableHandles), ProblemError> {
    problem.check()?;
    let graph = problem.graph;
    let n = graph.num_vertices();
    let agents = problem.num_agents;
    let n_f = n as f64;
    let edges: Vec<(Vertex, Vertex)> = graph.edges().iter().map(|e| (e.from, e.to)).collect();

    let mut model = MilpModel::new(Sense::Maximize);
    let x: Vec<Vec<VarId>> = edges
        .iter()
        .map(|&(i, j)| (0..agents).map(|m| model.add_binary(format!("x_{}_{}_{}", i + 1, j + 1, m + 1))).collect())
        .collect();
    let y: Vec<Vec<VarId>> = (0..n)
        .map(|i| (0..agents).map(|m| model.add_binary(format!("y_{}_{}", i + 1, m + 1))).collect())
        .collect();
    let z: Vec<VarId> = (0..n).map(|i| model.add_binary(format!("z_{}", i + 1))).collect();
    let u: Vec<Vec<VarId>> = edges
        .iter()
        .map(|&(i, j)| {
            (0..agents)
                .map(|m| model.add_continuous(format!("u_{}_{}_{}", i + 1, j + 1, m + 1), 0.0, n_f))
                .collect()
        })
        .collect();

    for i in 1..n {
        model.set_objective_coefficient(z[i], problem.c_hat[i]);
    }

    let out_of = |v: Vertex| graph.out_edges(v).to_vec();
    let into: Vec<Vec<usize>> = {
        let mut inc = vec![Vec::new(); n];
        for (k, &(_, j)) in edges.iter().enumerate() {
            inc[j].push(k);
        }
        inc
    };
    let degree_rel = if options.allow_idle_agents { Relation::Le } else { Relation::Eq };
    // ratio l_max / min edge length bounds how often one agent can leave a vertex
    let visits_cap = graph.min_edge_length().map_or(0.0, |l| problem.l_max / l);

    for m in 0..agents {
        let tag = m + 1;
        model.add_constraint(
            format!("depart_{tag}"),
            out_of(DEPOT).iter().map(|&k| (x[k][m], 1.0)).collect(),
            degree_rel,
            1.0,
        );
        model.add_constraint(
            format!("return_{tag}"),
            into[DEPOT].iter().map(|&k| (x[k][m], 1.0)).collect(),
            degree_rel,
            1.0,
        );
        for i in 0..n {
            let mut lower = vec![(y[i][m], 1.0)];
            lower.extend(out_of(i).iter().map(|&k| (x[k][m], -1.0)));
            model.add_constraint(format!("visit_lo_{}_{tag}", i + 1), lower, Relation::Le, 0.0);
            let mut upper: Vec<(VarId, f64)> = out_of(i).iter().map(|&k| (x[k][m], 1.0)).collect();
            upper.push((y[i][m], -visits_cap));
            model.add_constraint(format!("visit_hi_{}_{tag}", i + 1), upper, Relation::Le, 0.0);

            let mut balance: Vec<(VarId, f64)> = out_of(i).iter().map(|&k| (x[k][m], 1.0)).collect();
            balance.extend(into[i].iter().map(|&k| (x[k][m], -1.0)));
            model.add_constraint(format!("balance_{}_{tag}", i + 1), balance, Relation::Eq, 0.0);
        }
        model.add_constraint(
            format!("budget_{tag}"),
            graph.edges().iter().enumerate().map(|(k, e)| (x[k][m], e.length)).collect(),
            Relation::Le,
            problem.l_max,
        );

        // flow source: net depot outflow equals the number of visited vertices
        let mut source: Vec<(VarId, f64)> = out_of(DEPOT).iter().map(|&k| (u[k][m], 1.0)).collect();
        source.extend(into[DEPOT].iter().map(|&k| (u[k][m], -1.0)));
        source.extend((1..n).map(|j| (y[j][m], -1.0)));
        model.add_constraint(format!("flow_source_{tag}"), source, Relation::Eq, 0.0);
        // each visited vertex absorbs one unit
        for i in 1..n {
            let mut sink: Vec<(VarId, f64)> = into[i].iter().map(|&k| (u[k][m], 1.0)).collect();
            sink.extend(out_of(i).iter().map(|&k| (u[k][m], -1.0)));
            sink.push((y[i][m], -1.0));
            model.add_constraint(format!("flow_sink_{}_{tag}", i + 1), sink, Relation::Eq, 0.0);
        }
        let link = if options.tight_flow_bound { n_f - 1.0 } else { n_f };
        for (k, &(i, j)) in edges.iter().enumerate() {
            model.add_constraint(
                format!("flow_link_{}_{}_{tag}", i + 1, j + 1),
                vec![(u[k][m], 1.0), (x[k][m], -link)],
                Relation::Le,
                0.0,
            );
            if options.tight_flow_bound {
                let mut cap = vec![(u[k][m], 1.0)];
                cap.extend((1..n).map(|v| (y[v][m], -1.0)));
                model.add_constraint(format!("flow_cap_{}_{}_{tag}", i + 1, j + 1), cap, Relation::Le, 0.0);
            }
        }
    }

    for i in 0..n {
        let mut lo = vec![(z[i], 1.0)];
        lo.extend((0..agents).map(|m| (y[i][m], -1.0)));
        model.add_constraint(format!("cover_lo_{}", i + 1), lo, Relation::Le, 0.0);
        let mut hi: Vec<(VarId, f64)> = (0..agents).map(|m| (y[i][m], 1.0)).collect();
        hi.push((z[i], -(agents as f64)));
        model.add_constraint(format!("cover_hi_{}", i + 1), hi, Relation::Le, 0.0);
    }

    let mut must: Vec<Vertex> = problem.must_visit.to_vec();
    must.sort_unstable();
    must.dedup();
    for &v in &must {
        model.add_constraint(format!("must_visit_{}", v + 1), vec![(z[v], 1.0)], Relation::Ge, 1.0);
    }

    if variant == Variant::Top {
        for i in 1..n {
            let terms = into[i].iter().flat_map(|&k| (0..agents).map(move |m| (k, m))).map(|(k, m)| (x[k][m], 1.0)).collect();
            model.add_constraint(format!("enter_once_{}", i + 1), terms, Relation::Le, 1.0);
        }
    }

    Ok((model, VariableHandles { num_vertices: n, num_agents: agents, edges, x, u, y, z }))
}

#[derive(Debug, Error, PartialEq)]
pub enum IntegrityError {
    #[error("agent {agent}: selected edges do not form one closed walk through the depot")]
    NotOneWalk { agent: usize },
    #[error("agent {agent}: visit flags disagree with the traversed vertices")]
    VisitMismatch { agent: usize },
    #[error("solution has {got} values, model has {expected}")]
    WrongLength { expected: usize, got: usize },
}

/// Turns an integral assignment into one closed walk per agent.
pub fn extract_routes(values: &[f64], handles: &VariableHandles, graph: &Graph) -> Result<FleetPlan, IntegrityError> {
    let expected = handles.z.iter().map(|v| v.0).max().map_or(0, |k| k + 1);
    if values.len() < expected {
        return Err(IntegrityError::WrongLength { expected, got: values.len() });
    }
    let n = handles.num_vertices;
    let mut routes = Vec::with_capacity(handles.num_agents);
    for m in 0..handles.num_agents {
        let selected: Vec<(Vertex, Vertex)> = handles
            .edges
            .iter()
            .zip(&handles.x)
            .filter(|(_, xs)| values[xs[m].0] > ON)
            .map(|(&e, _)| e)
            .collect();
        let walk = eulerian_circuit(n, &selected, DEPOT).ok_or(IntegrityError::NotOneWalk { agent: m + 1 })?;
        let mut on_walk = vec![false; n];
        for &v in &walk {
            on_walk[v] = true;
        }
        for i in 1..n {
            if on_walk[i] != (values[handles.y[i][m].0] > ON) {
                return Err(IntegrityError::VisitMismatch { agent: m + 1 });
            }
        }
        routes.push(walk);
    }
    Ok(FleetPlan::from_routes(graph, routes))
}

/// Reshapes a plan so every route touches the depot only at its ends, as
/// the model requires. A pass `x -> depot -> y` is replaced by a depot-free
/// shortest path from `x` to `y` when the budget allows; otherwise the route
/// is cut there. Loops are then handed out one per agent, each time taking
/// the loop that adds the most uncovered must-visit vertices, then reward;
/// the rest are dropped. Vertices left uncovered are inserted where the
/// budget allows.
pub fn fit_to_model(plan: &FleetPlan, problem: &PlanningProblem<'_>) -> FleetPlan {
    let graph = problem.graph;
    let n = graph.num_vertices();
    let inner = Graph::new(
        n,
        graph.edges().iter().filter(|e| e.from != DEPOT && e.to != DEPOT).copied().collect(),
    );
    let bypass = all_pairs_shortest(&inner);

    let mut loops: Vec<Vec<Vertex>> = Vec::new();
    for route in &plan.routes {
        let mut r = route.clone();
        let mut p = 1;
        while p + 1 < r.len() {
            if r[p] != DEPOT {
                p += 1;
                continue;
            }
            let (a, b) = (r[p - 1], r[p + 1]);
            let detour = if a == b { Some(vec![a]) } else { bypass.path(a, b) };
            if let Some(path) = detour {
                let mut cand = r[..p - 1].to_vec();
                cand.extend(&path);
                cand.extend(&r[p + 2..]);
                if walk_length(graph, &cand).is_some_and(|l| l <= problem.l_max) {
                    r = cand;
                    continue;
                }
            }
            p += 1;
        }
        let mut start = 0;
        for p in 1..r.len() {
            if r[p] == DEPOT {
                if p > start + 1 {
                    loops.push(r[start..=p].to_vec());
                }
                start = p;
            }
        }
    }
    // pick loops one at a time by what they add: uncovered must-visit
    // vertices first, then uncovered reward; ties keep walk order
    let mut covered = vec![false; n];
    covered[DEPOT] = true;
    let mut routes: Vec<Vec<Vertex>> = Vec::new();
    while routes.len() < plan.num_agents() && !loops.is_empty() {
        let gain = |l: &Vec<Vertex>, covered: &[bool]| {
            let mut vs: Vec<Vertex> = l.iter().copied().filter(|&v| !covered[v]).collect();
            vs.sort_unstable();
            vs.dedup();
            let mandatory = vs.iter().filter(|v| problem.must_visit.contains(v)).count();
            (mandatory, vs.iter().map(|&v| problem.c_hat[v]).sum::<f64>())
        };
        let mut best = 0;
        for k in 1..loops.len() {
            let (ma, va) = gain(&loops[k], &covered);
            let (mb, vb) = gain(&loops[best], &covered);
            if ma > mb || (ma == mb && va > vb) {
                best = k;
            }
        }
        let l = loops.remove(best);
        for &v in &l {
            covered[v] = true;
        }
        routes.push(l);
    }
    routes.resize(plan.num_agents(), vec![DEPOT]);
    insert_uncovered(&mut routes, &mut covered, problem, &bypass);
    FleetPlan::from_routes(graph, routes)
}

/// Cheapest insertion of still-uncovered vertices, most valuable first, along
/// paths that keep the depot at the route ends.
fn insert_uncovered(routes: &mut [Vec<Vertex>], covered: &mut [bool], problem: &PlanningProblem<'_>, bypass: &DistanceMatrix) {
    let graph = problem.graph;
    let full = all_pairs_shortest(graph);
    let leg = |a: Vertex, b: Vertex| if a == DEPOT || b == DEPOT { full.path(a, b) } else { bypass.path(a, b) };
    let mut order: Vec<Vertex> = (1..graph.num_vertices()).filter(|&v| !covered[v] && problem.c_hat[v] > 0.0).collect();
    order.sort_by(|&a, &b| problem.c_hat[b].total_cmp(&problem.c_hat[a]).then(a.cmp(&b)));
    for v in order {
        if covered[v] {
            continue;
        }
        let mut best: Option<(f64, usize, Vec<Vertex>)> = None;
        for (m, r) in routes.iter().enumerate() {
            let r: Vec<Vertex> = if r.len() == 1 { vec![DEPOT, DEPOT] } else { r.clone() };
            for p in 0..r.len() - 1 {
                let (Some(a), Some(b)) = (leg(r[p], v), leg(v, r[p + 1])) else { continue };
                let mut cand = r[..p].to_vec();
                cand.extend(&a);
                cand.extend(&b[1..]);
                cand.extend(&r[p + 2..]);
                if cand[1..cand.len() - 1].contains(&DEPOT) {
                    continue;
                }
                let Some(len) = walk_length(graph, &cand).filter(|&l| l <= problem.l_max) else { continue };
                if best.as_ref().is_none_or(|(l, _, _)| len < *l) {
                    best = Some((len, m, cand));
                }
            }
        }
        if let Some((_, m, cand)) = best {
            for &u in &cand {
                covered[u] = true;
            }
            routes[m] = cand;
        }
    }
}

/// Encodes walks as a model assignment, for use as a warm start.
///
/// Each walk is first stripped of repeated edge traversals. An agent with an
/// empty route is sent to the nearest neighbour of the depot and back when
/// departure is mandatory. Returns `None` when a walk cannot be represented
/// (say, it passes through the depot mid-route); the solver still checks the
/// result for feasibility.
pub fn assignment_from_plan(
    plan: &FleetPlan,
    handles: &VariableHandles,
    graph: &Graph,
    num_variables: usize,
    options: ModelOptions,
) -> Option<Vec<f64>> {
    if plan.num_agents() != handles.num_agents {
        return None;
    }
    let n = handles.num_vertices;
    let mut values = vec![0.0; num_variables];
    for (m, route) in plan.routes.iter().enumerate() {
        let mut walk = remove_repeated_edges(route);
        if walk.len() <= 1 && !options.allow_idle_agents {
            let k = *graph.out_edges(DEPOT).iter().min_by(|&&a, &&b| graph.edge(a).length.total_cmp(&graph.edge(b).length))?;
            walk = vec![DEPOT, graph.edge(k).to, DEPOT];
        }
        if walk.len() <= 1 {
            continue;
        }
        if walk[1..walk.len() - 1].contains(&DEPOT) {
            return None;
        }
        // flow on the k-th step = number of first visits still ahead of it
        let mut first = vec![false; walk.len()];
        let mut seen = vec![false; n];
        for (pos, &v) in walk.iter().enumerate() {
            if v != DEPOT && !seen[v] {
                seen[v] = true;
                first[pos] = true;
            }
        }
        let total_first = first.iter().filter(|&&f| f).count();
        let mut remaining = total_first;
        for (pos, step) in walk.windows(2).enumerate() {
            if first[pos] {
                remaining -= 1;
            }
            let k = graph.edge_index(step[0], step[1])?;
            values[handles.x[k][m].0] = 1.0;
            values[handles.u[k][m].0] = remaining as f64;
        }
        for (v, &s) in seen.iter().enumerate() {
            if s {
                values[handles.y[v][m].0] = 1.0;
            }
        }
        values[handles.y[DEPOT][m].0] = 1.0;
    }
    for i in 0..n {
        if (0..handles.num_agents).any(|m| values[handles.y[i][m].0] > ON) {
            values[handles.z[i].0] = 1.0;
        }
    }
    Some(values)
}

/// One failed check of the audit.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditViolation {
    pub check: &'static str,
    pub detail: String,
}

impl fmt::Display for AuditViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.check, self.detail)
    }
}

/// Re-checks an assignment against every constraint family straight from
/// the graph data, without looking at the model's rows.
pub fn audit_solution(
    problem: &PlanningProblem<'_>,
    handles: &VariableHandles,
    values: &[f64],
    variant: Variant,
    options: ModelOptions,
) -> Vec<AuditViolation> {
    const TOL: f64 = 1e-6;
    let graph = problem.graph;
    let n = handles.num_vertices;
    let agents = handles.num_agents;
    let mut out = Vec::new();
    let mut fail = |check: &'static str, detail: String| out.push(AuditViolation { check, detail });
    let val = |v: VarId| values[v.0];
    let bin = |v: VarId| values[v.0] > ON;

    for &(i, j) in &handles.edges {
        if i == j {
            fail("no-self-loop", format!("edge ({},{})", i + 1, j + 1));
        }
    }
    let mut all: Vec<VarId> = handles.x.iter().chain(&handles.y).flatten().copied().collect();
    all.extend(&handles.z);
    for v in all {
        let x = val(v);
        if (x - x.round()).abs() > TOL || !(-TOL..=1.0 + TOL).contains(&x) {
            fail("integrality", format!("variable {} = {x}", v.0));
        }
    }

    for m in 0..agents {
        let a = m + 1;
        let (mut depart, mut ret) = (0usize, 0usize);
        let mut outdeg = vec![0usize; n];
        let mut indeg = vec![0usize; n];
        let mut length = 0.0;
        let mut net_flow = vec![0.0; n];
        for (k, &(i, j)) in handles.edges.iter().enumerate() {
            let on = bin(handles.x[k][m]);
            let flow = val(handles.u[k][m]);
            if on {
                outdeg[i] += 1;
                indeg[j] += 1;
                length += graph.length(i, j).unwrap_or(f64::INFINITY);
                if i == DEPOT {
                    depart += 1;
                }
                if j == DEPOT {
                    ret += 1;
                }
            }
            if flow < -TOL || flow > n as f64 * if on { 1.0 } else { 0.0 } + TOL {
                fail("flow-link", format!("agent {a}: u({},{}) = {flow} with x = {}", i + 1, j + 1, on as u8));
            }
            net_flow[i] += flow;
            net_flow[j] -= flow;
        }
        let ok_deg = |d: usize| if options.allow_idle_agents { d <= 1 } else { d == 1 };
        if !ok_deg(depart) || !ok_deg(ret) {
            fail("depot-degree", format!("agent {a}: departs {depart}, returns {ret}"));
        }
        for i in 0..n {
            if outdeg[i] != indeg[i] {
                fail("flow-conservation", format!("agent {a}: vertex {} out {} in {}", i + 1, outdeg[i], indeg[i]));
            }
            let visits = bin(handles.y[i][m]);
            if visits && outdeg[i] == 0 {
                fail("visit-definition", format!("agent {a}: y_{} = 1 without traversal", i + 1));
            }
            if !visits && outdeg[i] > 0 {
                fail("visit-definition", format!("agent {a}: vertex {} traversed with y = 0", i + 1));
            }
        }
        if length > problem.l_max + TOL {
            fail("budget", format!("agent {a}: length {length} > {}", problem.l_max));
        }
        let visited: usize = (1..n).filter(|&i| bin(handles.y[i][m])).count();
        if (net_flow[DEPOT] - visited as f64).abs() > TOL {
            fail("flow-source", format!("agent {a}: depot emits {} for {visited} visits", net_flow[DEPOT]));
        }
        for i in 1..n {
            let absorbed = -net_flow[i];
            let expect = if bin(handles.y[i][m]) { 1.0 } else { 0.0 };
            if (absorbed - expect).abs() > TOL {
                fail("flow-sink", format!("agent {a}: vertex {} absorbs {absorbed}", i + 1));
            }
        }
    }

    for i in 0..n {
        let any = (0..agents).any(|m| bin(handles.y[i][m]));
        if any != bin(handles.z[i]) {
            fail("cover-definition", format!("vertex {}: z = {} but agents visiting = {any}", i + 1, bin(handles.z[i]) as u8));
        }
    }
    for &v in problem.must_visit {
        if !bin(handles.z[v]) {
            fail("must-visit", format!("vertex {} not covered", v + 1));
        }
    }
    if variant == Variant::Top {
        for i in 1..n {
            let entries: usize = handles
                .edges
                .iter()
                .enumerate()
                .filter(|(_, &(_, j))| j == i)
                .map(|(k, _)| (0..agents).filter(|&m| bin(handles.x[k][m])).count())
                .sum();
            if entries > 1 {
                fail("enter-once", format!("vertex {} entered {entries} times", i + 1));
            }
        }
    }
    out
}

/// Checks a plan against the budget and must-visit rules of a round.
pub fn plan_satisfies(problem: &PlanningProblem<'_>, plan: &FleetPlan) -> bool {
    let visited = plan.visited();
    plan.check(problem.graph, problem.l_max).is_ok()
        && problem.must_visit.iter().all(|v| visited.contains(v))
        && plan.lengths.iter().all(|&l| l <= problem.l_max + BUDGET_TOL)
}
