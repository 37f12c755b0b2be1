//! Bounded dual simplex over `min c'x  s.t.  A x + s = b,  l <= (x, s) <= u`.
//!
//! Every structural variable is boxed (infinite bounds are replaced by
//! `±ARTIFICIAL_BOUND`), so the all-slack basis with each structural parked at
//! the bound favoured by its cost is dual feasible from the start. Branching
//! only moves bounds, which never breaks dual feasibility, so one simplex
//! state is carried across the whole search tree.
//!
//! The basis inverse is kept explicitly (dense, row-major) with exact dual
//! steepest-edge weights refreshed during each product-form update.

use super::{MilpModel, Relation, Sense};

pub(crate) const ARTIFICIAL_BOUND: f64 = 1e7;

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-7;
const REFACTOR_EVERY: usize = 100;
/// Consecutive pivots without dual progress before costs are perturbed.
const STALL_LIMIT: usize = 50;
const PERTURBATION: f64 = 1e-8;

/// The relaxation in computational form.
#[derive(Debug, Clone)]
pub(crate) struct LpData {
    pub m: usize,
    pub n: usize,
    pub cols: Vec<Vec<(usize, f64)>>,
    /// Minimization costs for structurals followed by zero slack costs.
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rhs: Vec<f64>,
    /// Structural bounds that were boxed artificially.
    pub artificial: Vec<bool>,
}

impl LpData {
    pub fn from_model(model: &MilpModel) -> Self {
        let n = model.num_variables();
        let m = model.constraints().len();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut rhs = Vec::with_capacity(m);
        let mut lower = Vec::with_capacity(n + m);
        let mut upper = Vec::with_capacity(n + m);
        let mut artificial = Vec::with_capacity(n);

        for (i, c) in model.constraints().iter().enumerate() {
            for &(v, a) in &c.terms {
                cols[v.0].push((i, a));
            }
            rhs.push(c.rhs);
        }
        for col in &mut cols {
            col.sort_by_key(|&(i, _)| i);
            col.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
            col.retain(|&(_, a)| a != 0.0);
        }

        let mut cost = vec![0.0; n + m];
        let sign = match model.sense {
            Sense::Maximize => -1.0,
            Sense::Minimize => 1.0,
        };
        for &(v, c) in model.objective() {
            cost[v.0] += sign * c;
        }
        for var in model.variables() {
            let lo = if var.lower.is_finite() { var.lower } else { -ARTIFICIAL_BOUND };
            let hi = if var.upper.is_finite() { var.upper } else { ARTIFICIAL_BOUND };
            artificial.push(!var.lower.is_finite() || !var.upper.is_finite());
            lower.push(lo);
            upper.push(hi);
        }
        for c in model.constraints() {
            let (lo, hi) = match c.relation {
                Relation::Le => (0.0, f64::INFINITY),
                Relation::Ge => (f64::NEG_INFINITY, 0.0),
                Relation::Eq => (0.0, 0.0),
            };
            lower.push(lo);
            upper.push(hi);
        }
        LpData { m, n, cols, cost, lower, upper, rhs, artificial }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

pub(crate) struct DualSimplex<'a> {
    lp: &'a LpData,
    m: usize,
    nt: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    basis: Vec<usize>,
    row_of: Vec<usize>,
    state: Vec<State>,
    binv: Vec<f64>,
    weights: Vec<f64>,
    x: Vec<f64>,
    d: Vec<f64>,
    cost: Vec<f64>,
    since_refactor: usize,
    iterations: u64,
    perturbed: bool,
    perturb_rounds: u64,
    alpha_r: Vec<f64>,
    alpha_q: Vec<f64>,
}

impl<'a> DualSimplex<'a> {
    pub fn new(lp: &'a LpData) -> Self {
        let (m, n) = (lp.m, lp.n);
        let nt = n + m;
        let mut s = DualSimplex {
            lp,
            m,
            nt,
            lower: lp.lower.clone(),
            upper: lp.upper.clone(),
            basis: Vec::new(),
            row_of: vec![usize::MAX; nt],
            state: vec![State::Lower; nt],
            binv: vec![0.0; m * m],
            weights: vec![1.0; m],
            x: vec![0.0; nt],
            d: vec![0.0; nt],
            cost: lp.cost.clone(),
            since_refactor: 0,
            iterations: 0,
            perturbed: false,
            perturb_rounds: 0,
            alpha_r: vec![0.0; nt],
            alpha_q: vec![0.0; m],
        };
        s.install_slack_basis();
        s
    }

    pub fn values(&self) -> &[f64] {
        &self.x[..self.lp.n]
    }

    /// Objective in minimization form with the unshifted costs.
    pub fn objective(&self) -> f64 {
        (0..self.lp.n).map(|j| self.lp.cost[j] * self.x[j]).sum()
    }

    /// True when some artificially boxed structural sits on its artificial bound.
    pub fn touches_artificial_bound(&self) -> bool {
        (0..self.lp.n).any(|j| {
            self.lp.artificial[j] && self.x[j].abs() >= ARTIFICIAL_BOUND * (1.0 - 1e-9)
        })
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    /// Moves the bounds of structural `j`, keeping the basis.
    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        if self.lower[j] == lo && self.upper[j] == hi {
            return;
        }
        self.lower[j] = lo;
        self.upper[j] = hi;
        if self.state[j] == State::Basic {
            return;
        }
        // a variable released from a fixing must sit on the bound its
        // reduced cost prefers, or the basis loses dual feasibility
        if lo < hi {
            if self.d[j] < -DUAL_TOL && hi.is_finite() {
                self.state[j] = State::Upper;
            } else if self.d[j] > DUAL_TOL && lo.is_finite() {
                self.state[j] = State::Lower;
            }
        }
        let target = match self.state[j] {
            State::Upper => hi,
            _ => lo,
        };
        let delta = target - self.x[j];
        if delta != 0.0 {
            self.x[j] = target;
            // x_B -= delta * B^-1 a_j
            self.column_into_alpha_q(j);
            for r in 0..self.m {
                let b = self.basis[r];
                self.x[b] -= delta * self.alpha_q[r];
            }
        }
    }

    fn install_slack_basis(&mut self) {
        let (m, n) = (self.m, self.lp.n);
        self.basis = (n..n + m).collect();
        self.row_of.fill(usize::MAX);
        for r in 0..m {
            self.row_of[n + r] = r;
            self.state[n + r] = State::Basic;
        }
        self.cost.copy_from_slice(&self.lp.cost);
        self.perturbed = false;
        for j in 0..n {
            self.state[j] = if self.cost[j] < 0.0 { State::Upper } else { State::Lower };
        }
        self.binv.fill(0.0);
        for r in 0..m {
            self.binv[r * m + r] = 1.0;
        }
        self.weights.fill(1.0);
        self.since_refactor = 0;
        self.recompute();
    }

    #[inline]
    fn dot_col(&self, v: &[f64], j: usize) -> f64 {
        if j < self.lp.n {
            self.lp.cols[j].iter().map(|&(i, a)| v[i] * a).sum()
        } else {
            v[j - self.lp.n]
        }
    }

    fn column_into_alpha_q(&mut self, j: usize) {
        let m = self.m;
        if j < self.lp.n {
            let col = &self.lp.cols[j];
            for k in 0..m {
                let row = &self.binv[k * m..(k + 1) * m];
                self.alpha_q[k] = col.iter().map(|&(i, a)| row[i] * a).sum();
            }
        } else {
            let i = j - self.lp.n;
            for k in 0..m {
                self.alpha_q[k] = self.binv[k * m + i];
            }
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            State::Upper => self.upper[j],
            _ => self.lower[j],
        }
    }

    /// Rebuilds primal values and reduced costs from the current inverse.
    fn recompute(&mut self) {
        let (m, nt) = (self.m, self.nt);
        for j in 0..nt {
            if self.state[j] != State::Basic {
                self.x[j] = self.nonbasic_value(j);
            }
        }
        let mut resid = self.lp.rhs.clone();
        for j in 0..nt {
            if self.state[j] == State::Basic || self.x[j] == 0.0 {
                continue;
            }
            let xj = self.x[j];
            if j < self.lp.n {
                for &(i, a) in &self.lp.cols[j] {
                    resid[i] -= a * xj;
                }
            } else {
                resid[j - self.lp.n] -= xj;
            }
        }
        for r in 0..m {
            let row = &self.binv[r * m..(r + 1) * m];
            let v: f64 = row.iter().zip(&resid).map(|(a, b)| a * b).sum();
            self.x[self.basis[r]] = v;
        }

        let mut y = vec![0.0; m];
        for r in 0..m {
            let cb = self.cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.binv[r * m..(r + 1) * m];
                for (yc, &b) in y.iter_mut().zip(row) {
                    *yc += cb * b;
                }
            }
        }
        let mut flipped = false;
        for j in 0..nt {
            if self.state[j] == State::Basic {
                self.d[j] = 0.0;
                continue;
            }
            let dj = self.cost[j] - self.dot_col(&y, j);
            self.d[j] = dj;
            if self.lower[j] == self.upper[j] {
                continue;
            }
            let wrong = match self.state[j] {
                State::Lower => dj < -DUAL_TOL,
                State::Upper => dj > DUAL_TOL,
                State::Basic => false,
            };
            if !wrong {
                continue;
            }
            let other_finite = match self.state[j] {
                State::Lower => self.upper[j].is_finite(),
                _ => self.lower[j].is_finite(),
            };
            if other_finite && dj.abs() > 1e-7 {
                self.state[j] = if self.state[j] == State::Lower { State::Upper } else { State::Lower };
                flipped = true;
            } else {
                // small drift: shift the cost so the reduced cost is zero
                self.cost[j] -= dj;
                self.d[j] = 0.0;
            }
        }
        if flipped {
            self.recompute();
        }
    }

    fn refactor(&mut self) -> bool {
        let (m, n) = (self.m, self.lp.n);
        let mut covered = vec![usize::MAX; m];
        let mut structs = Vec::new();
        for r in 0..m {
            let j = self.basis[r];
            if j >= n {
                covered[j - n] = r;
            } else {
                structs.push((r, j));
            }
        }
        let rbar: Vec<usize> = (0..m).filter(|&i| covered[i] == usize::MAX).collect();
        let k = structs.len();
        if rbar.len() != k {
            return false;
        }
        let mut pos = vec![usize::MAX; m];
        for (a, &i) in rbar.iter().enumerate() {
            pos[i] = a;
        }
        let mut kmat = vec![0.0; k * k];
        for (b, &(_, j)) in structs.iter().enumerate() {
            for &(i, a) in &self.lp.cols[j] {
                if pos[i] != usize::MAX {
                    kmat[pos[i] * k + b] = a;
                }
            }
        }
        let Some(kinv) = invert_dense(kmat, k) else {
            return false;
        };
        self.binv.fill(0.0);
        for (b, &(r, _)) in structs.iter().enumerate() {
            for (a, &c) in rbar.iter().enumerate() {
                self.binv[r * m + c] = kinv[b * k + a];
            }
        }
        for (i, &r) in covered.iter().enumerate() {
            if r != usize::MAX {
                self.binv[r * m + i] = 1.0;
            }
        }
        for &(rs, j) in &structs {
            for &(i, a) in &self.lp.cols[j] {
                let r = covered[i];
                if r == usize::MAX {
                    continue;
                }
                for &c in &rbar {
                    let v = self.binv[rs * m + c];
                    self.binv[r * m + c] -= a * v;
                }
            }
        }
        for r in 0..m {
            self.weights[r] = self.binv[r * m..(r + 1) * m].iter().map(|v| v * v).sum();
        }
        self.since_refactor = 0;
        true
    }

    fn refresh(&mut self) {
        if !self.refactor() {
            self.install_slack_basis();
            return;
        }
        self.recompute();
    }

    /// Nudges every nonbasic cost away from its bound by a small, index-seeded
    /// amount so that ties in the ratio test break and the dual objective moves.
    fn perturb_costs(&mut self) {
        self.perturb_rounds += 1;
        for j in 0..self.nt {
            if self.state[j] == State::Basic || self.lower[j] == self.upper[j] {
                continue;
            }
            let mut h = (j as u64 ^ self.perturb_rounds.rotate_left(32)).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            h ^= h >> 31;
            let u = (h >> 11) as f64 / (1u64 << 53) as f64;
            let delta = PERTURBATION * (1.0 + self.lp.cost[j].abs()) * (1.0 + u);
            let delta = if self.state[j] == State::Upper { -delta } else { delta };
            self.cost[j] += delta;
            self.d[j] += delta;
        }
        self.perturbed = true;
    }

    /// Restores the true costs. Reduced costs that end up on the wrong side by
    /// a hair are absorbed by `recompute`'s cost shift.
    fn remove_perturbation(&mut self) {
        self.cost.copy_from_slice(&self.lp.cost);
        self.perturbed = false;
        self.recompute();
    }

    pub fn solve(&mut self, max_iterations: u64) -> LpStatus {
        let start = self.iterations;
        let mut verified = false;
        let mut stalled = 0;
        loop {
            if self.iterations - start >= max_iterations {
                if self.perturbed {
                    self.remove_perturbation();
                }
                return LpStatus::IterationLimit;
            }

            let Some(r) = self.pick_leaving_row() else {
                if self.perturbed {
                    self.remove_perturbation();
                    stalled = 0;
                    continue;
                }
                if self.since_refactor > 0 && !verified {
                    self.refresh();
                    verified = true;
                    continue;
                }
                return LpStatus::Optimal;
            };

            let leave = self.basis[r];
            let xv = self.x[leave];
            let to_lower = xv < self.lower[leave];
            let bound = if to_lower { self.lower[leave] } else { self.upper[leave] };
            let delta = xv - bound;

            let Some(q) = self.ratio_test(r, to_lower) else {
                if self.perturbed {
                    self.remove_perturbation();
                    continue;
                }
                if self.since_refactor > 0 && !verified {
                    self.refresh();
                    verified = true;
                    continue;
                }
                return LpStatus::Infeasible;
            };
            let alpha_rq = self.alpha_r[q];

            self.column_into_alpha_q(q);
            let drift = (self.alpha_q[r] - alpha_rq).abs();
            if drift > 1e-7 * (1.0 + alpha_rq.abs()) && self.since_refactor > 0 {
                self.refresh();
                continue;
            }
            verified = false;

            let theta_d = self.d[q] / alpha_rq;
            if theta_d.abs() < 1e-12 {
                stalled += 1;
                if stalled >= STALL_LIMIT && !self.perturbed {
                    self.perturb_costs();
                    stalled = 0;
                    continue;
                }
            } else {
                stalled = 0;
            }
            for j in 0..self.nt {
                if self.state[j] != State::Basic {
                    self.d[j] -= theta_d * self.alpha_r[j];
                }
            }
            self.d[leave] = -theta_d;
            self.d[q] = 0.0;

            let theta_p = delta / alpha_rq;
            for i in 0..self.m {
                let b = self.basis[i];
                self.x[b] -= theta_p * self.alpha_q[i];
            }
            self.x[leave] = bound;
            self.x[q] += theta_p;

            self.state[leave] = if to_lower { State::Lower } else { State::Upper };
            self.row_of[leave] = usize::MAX;
            self.state[q] = State::Basic;
            self.row_of[q] = r;
            self.basis[r] = q;
            self.update_inverse(r);
            self.iterations += 1;
            self.since_refactor += 1;
            if self.since_refactor >= REFACTOR_EVERY {
                self.refresh();
            }
        }
    }

    fn pick_leaving_row(&self) -> Option<usize> {
        let mut best = None;
        let mut best_score = 0.0;
        for r in 0..self.m {
            let j = self.basis[r];
            let xv = self.x[j];
            let viol = if xv < self.lower[j] - PRIMAL_TOL {
                self.lower[j] - xv
            } else if xv > self.upper[j] + PRIMAL_TOL {
                xv - self.upper[j]
            } else {
                continue;
            };
            let score = viol * viol / self.weights[r].max(1e-12);
            if score > best_score {
                best_score = score;
                best = Some(r);
            }
        }
        best
    }

    /// Harris two-pass dual ratio test; fills `alpha_r` for every nonbasic column.
    fn ratio_test(&mut self, r: usize, to_lower: bool) -> Option<usize> {
        let m = self.m;
        let sign = if to_lower { -1.0 } else { 1.0 };
        let mut t_max = f64::INFINITY;
        let mut any = false;
        for j in 0..self.nt {
            if self.state[j] == State::Basic {
                continue;
            }
            let rho = &self.binv[r * m..(r + 1) * m];
            let a = self.dot_col(rho, j);
            self.alpha_r[j] = a;
            if self.lower[j] == self.upper[j] {
                continue;
            }
            let at = sign * a;
            let bound = match self.state[j] {
                State::Lower if at > PIVOT_TOL => (self.d[j] + DUAL_TOL) / at,
                State::Upper if at < -PIVOT_TOL => (self.d[j] - DUAL_TOL) / at,
                _ => continue,
            };
            any = true;
            if bound < t_max {
                t_max = bound;
            }
        }
        if !any {
            return None;
        }
        let mut best = None;
        let mut best_mag = 0.0;
        for j in 0..self.nt {
            if self.state[j] == State::Basic || self.lower[j] == self.upper[j] {
                continue;
            }
            let at = sign * self.alpha_r[j];
            let eligible = match self.state[j] {
                State::Lower => at > PIVOT_TOL,
                State::Upper => at < -PIVOT_TOL,
                State::Basic => false,
            };
            if eligible && self.d[j] / at <= t_max && at.abs() > best_mag {
                best_mag = at.abs();
                best = Some(j);
            }
        }
        best
    }

    fn update_inverse(&mut self, r: usize) {
        let m = self.m;
        let piv = self.alpha_q[r];
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (pivot_row, after) = rest.split_at_mut(m);
        for v in pivot_row.iter_mut() {
            *v /= piv;
        }
        let update = |row: &mut [f64], f: f64| -> f64 {
            let mut w = 0.0;
            if f == 0.0 {
                for v in row.iter() {
                    w += v * v;
                }
                return w;
            }
            for (v, &p) in row.iter_mut().zip(pivot_row.iter()) {
                *v -= f * p;
                w += *v * *v;
            }
            w
        };
        for (i, row) in before.chunks_exact_mut(m).enumerate() {
            self.weights[i] = update(row, self.alpha_q[i]);
        }
        for (k, row) in after.chunks_exact_mut(m).enumerate() {
            let i = r + 1 + k;
            self.weights[i] = update(row, self.alpha_q[i]);
        }
        self.weights[r] = self.binv[r * m..(r + 1) * m].iter().map(|v| v * v).sum();
    }
}

/// Gauss-Jordan inverse with partial pivoting; `None` when singular.
fn invert_dense(mut a: Vec<f64>, k: usize) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; k * k];
    for i in 0..k {
        inv[i * k + i] = 1.0;
    }
    for col in 0..k {
        let (mut piv, mut mag) = (col, 0.0);
        for row in col..k {
            let v = a[row * k + col].abs();
            if v > mag {
                mag = v;
                piv = row;
            }
        }
        if mag < 1e-11 {
            return None;
        }
        if piv != col {
            for c in 0..k {
                a.swap(piv * k + c, col * k + c);
                inv.swap(piv * k + c, col * k + c);
            }
        }
        let p = a[col * k + col];
        for c in 0..k {
            a[col * k + c] /= p;
            inv[col * k + c] /= p;
        }
        for row in 0..k {
            if row == col {
                continue;
            }
            let f = a[row * k + col];
            if f == 0.0 {
                continue;
            }
            for c in 0..k {
                a[row * k + c] -= f * a[col * k + c];
                inv[row * k + c] -= f * inv[col * k + c];
            }
        }
    }
    Some(inv)
}
