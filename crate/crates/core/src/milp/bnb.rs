use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::{Duration, Instant};

use super::simplex::{DualSimplex, LpData, LpStatus};
use super::{
    relative_gap, MilpError, MilpModel, MilpSolution, MilpSolver, Sense, SolveOptions, SolveStatus,
    VarKind, FEASIBILITY_TOL, INTEGRALITY_TOL, RELATIVE_GAP_TOL,
};

/// Best-first branch-and-bound with plunging.
///
/// After a node is branched the search dives into the child on the side the
/// branching variable rounds to and parks its sibling in a queue ordered by
/// LP bound. When a dive ends (pruned, infeasible or integral) the best
/// parked node is resumed. The time limit is checked between nodes.
#[derive(Debug, Clone)]
pub struct BranchAndBound {
    /// Simplex pivots allowed per node before the node is abandoned.
    pub max_lp_iterations: u64,
}

impl Default for BranchAndBound {
    fn default() -> Self {
        BranchAndBound { max_lp_iterations: 200_000 }
    }
}

/// Bound change on the path from the root to a node.
struct Fix {
    var: usize,
    value: f64,
    parent: Option<Rc<Fix>>,
}

struct Node {
    // LP bound of the parent, in minimization form.
    bound: f64,
    depth: usize,
    seq: u64,
    fixes: Option<Rc<Fix>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Max-heap: smallest bound first, then deeper, then older.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

struct Incumbent {
    // minimization form
    value: f64,
    values: Vec<f64>,
}

impl BranchAndBound {
    fn cutoff(inc: &Option<Incumbent>) -> f64 {
        match inc {
            Some(i) => i.value - RELATIVE_GAP_TOL * i.value.abs().max(1e-9),
            None => f64::INFINITY,
        }
    }
}

impl MilpSolver for BranchAndBound {
    fn solve(&self, model: &MilpModel, options: &SolveOptions) -> Result<MilpSolution, MilpError> {
        model.validate()?;
        let start = Instant::now();
        let deadline = options.time_limit.map(|t| start + t);
        let sign = match model.sense {
            Sense::Maximize => -1.0,
            Sense::Minimize => 1.0,
        };
        let binaries: Vec<usize> = model
            .variables()
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(k, _)| k)
            .collect();

        let mut incumbent: Option<Incumbent> = None;
        if let Some(ws) = &options.warm_start {
            if model.is_feasible(ws) {
                let mut values = ws.clone();
                for &b in &binaries {
                    values[b] = values[b].round();
                }
                if model.is_feasible(&values) {
                    incumbent = Some(Incumbent { value: sign * model.objective_value(&values), values });
                }
            }
        }

        let lp = LpData::from_model(model);
        let mut simplex = DualSimplex::new(&lp);
        let root_bounds: Vec<(f64, f64)> = (0..lp.n).map(|j| simplex.bounds(j)).collect();

        let mut queue = BinaryHeap::new();
        let mut seq = 0u64;
        let mut nodes = 0usize;
        let mut timed_out = false;
        // the node currently being plunged into
        let mut current: Option<Node> =
            Some(Node { bound: f64::NEG_INFINITY, depth: 0, seq: 0, fixes: None });
        let mut current_fixed: Vec<(usize, f64)> = Vec::new();

        loop {
            let node = match current.take() {
                Some(n) => n,
                None => {
                    let cutoff = Self::cutoff(&incumbent);
                    let mut next = None;
                    while let Some(n) = queue.pop() {
                        let n: Node = n;
                        if n.bound < cutoff {
                            next = Some(n);
                            break;
                        }
                    }
                    let Some(n) = next else { break };
                    // reset to root bounds plus the node's fixes
                    for &(var, _) in &current_fixed {
                        let (lo, hi) = root_bounds[var];
                        simplex.set_bounds(var, lo, hi);
                    }
                    current_fixed.clear();
                    let mut link = n.fixes.clone();
                    while let Some(f) = link {
                        simplex.set_bounds(f.var, f.value, f.value);
                        current_fixed.push((f.var, f.value));
                        link = f.parent.clone();
                    }
                    n
                }
            };

            if let Some(dl) = deadline {
                if nodes > 0 && Instant::now() >= dl {
                    queue.push(node);
                    timed_out = true;
                    break;
                }
            }
            nodes += 1;

            if node.bound >= Self::cutoff(&incumbent) {
                continue;
            }
            match simplex.solve(self.max_lp_iterations) {
                LpStatus::Infeasible => continue,
                LpStatus::IterationLimit => {
                    return Err(MilpError::Numerical(format!(
                        "LP iteration limit reached at node {nodes}"
                    )))
                }
                LpStatus::Optimal => {}
            }
            if simplex.touches_artificial_bound() {
                return Err(MilpError::Unbounded);
            }
            let lp_obj = simplex.objective();
            if lp_obj >= Self::cutoff(&incumbent) {
                continue;
            }

            let values = simplex.values();
            let mut branch: Option<(usize, f64)> = None;
            let mut best_frac = INTEGRALITY_TOL;
            for &b in &binaries {
                let v = values[b];
                let frac = (v - v.floor()).min(v.ceil() - v);
                if frac > best_frac + 1e-12 {
                    best_frac = frac;
                    branch = Some((b, v));
                }
            }

            let Some((var, val)) = branch else {
                let mut cand = values.to_vec();
                for &b in &binaries {
                    cand[b] = cand[b].round();
                }
                if model.max_violation(&cand) <= 10.0 * FEASIBILITY_TOL {
                    let value = sign * model.objective_value(&cand);
                    if incumbent.as_ref().is_none_or(|i| value < i.value) {
                        incumbent = Some(Incumbent { value, values: cand });
                    }
                }
                continue;
            };

            let up_first = val >= 0.5;
            let (dive_val, park_val) = if up_first { (1.0, 0.0) } else { (0.0, 1.0) };
            seq += 1;
            queue.push(Node {
                bound: lp_obj,
                depth: node.depth + 1,
                seq,
                fixes: Some(Rc::new(Fix { var, value: park_val, parent: node.fixes.clone() })),
            });
            seq += 1;
            simplex.set_bounds(var, dive_val, dive_val);
            current_fixed.push((var, dive_val));
            current = Some(Node {
                bound: lp_obj,
                depth: node.depth + 1,
                seq,
                fixes: Some(Rc::new(Fix { var, value: dive_val, parent: node.fixes })),
            });
        }

        let solve_time = start.elapsed();
        let cutoff = Self::cutoff(&incumbent);
        let open_bound = queue
            .iter()
            .filter(|n| n.bound < cutoff)
            .map(|n| n.bound)
            .min_by(f64::total_cmp);
        Ok(finish(model.sense, sign, incumbent, open_bound, timed_out, solve_time, nodes))
    }
}

fn finish(
    sense: Sense,
    sign: f64,
    incumbent: Option<Incumbent>,
    open_bound: Option<f64>,
    timed_out: bool,
    solve_time: Duration,
    nodes: usize,
) -> MilpSolution {
    match incumbent {
        Some(inc) => {
            let objective = sign * inc.value;
            let (status, bound) = match open_bound {
                Some(b) if timed_out => {
                    (SolveStatus::FeasibleTimeout, sign * b.min(inc.value))
                }
                _ => (SolveStatus::Optimal, objective),
            };
            let gap = relative_gap(objective, bound, sense);
            let status = if gap <= RELATIVE_GAP_TOL { SolveStatus::Optimal } else { status };
            let gap = if status == SolveStatus::Optimal { 0.0 } else { gap };
            MilpSolution { status, values: inc.values, objective, bound, gap, solve_time, nodes }
        }
        None => {
            let (status, bound) = match open_bound {
                Some(b) if timed_out => (SolveStatus::TimeoutNoSolution, sign * b),
                _ => (SolveStatus::Infeasible, f64::NAN),
            };
            MilpSolution {
                status,
                values: Vec::new(),
                objective: f64::NAN,
                bound,
                gap: f64::INFINITY,
                solve_time,
                nodes,
            }
        }
    }
}
