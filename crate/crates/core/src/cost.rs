//! Ground-truth cost growth and the visit/reset bookkeeping of an episode.
//!
//! Before iteration `t` every vertex gains `kappa[i][t]`. A visit during `t`
//! collects everything accrued since the previous visit and resets the
//! vertex. The episode objective is the sum over iterations of what is left
//! uncollected at the end of each iteration.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Vertex, DEPOT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthParams {
    pub mu_star: Vec<f64>,
    /// Standard deviation of the Gaussian draw before clipping.
    pub noise_scale: f64,
    pub clip_lo: f64,
    pub clip_hi: f64,
}

impl GrowthParams {
    pub fn new(mu_star: Vec<f64>, noise_scale: f64) -> Self {
        GrowthParams { mu_star, noise_scale, clip_lo: 0.0, clip_hi: 1.0 }
    }
}

/// Growth draws for iteration `t` (1-based), one per vertex.
///
/// The draws depend only on `(stream, t)`: each iteration gets its own
/// ChaCha stream, so materializing a longer horizon extends a shorter one.
pub fn sample_growth(params: &GrowthParams, stream: u64, t: usize) -> Vec<f64> {
    assert!(t >= 1, "iterations are 1-based");
    let mut rng = ChaCha8Rng::seed_from_u64(stream);
    rng.set_stream(t as u64);
    params
        .mu_star
        .iter()
        .map(|&mu| {
            let x = if params.noise_scale > 0.0 {
                Normal::new(mu, params.noise_scale).expect("finite parameters").sample(&mut rng)
            } else {
                mu
            };
            x.clamp(params.clip_lo, params.clip_hi)
        })
        .collect()
}

/// `kappa[i][t-1]` for `t = 1..=horizon`.
pub fn materialize_kappa(params: &GrowthParams, stream: u64, horizon: usize) -> Vec<Vec<f64>> {
    let n = params.mu_star.len();
    let mut kappa = vec![Vec::with_capacity(horizon); n];
    for t in 1..=horizon {
        for (row, v) in kappa.iter_mut().zip(sample_growth(params, stream, t)) {
            row.push(v);
        }
    }
    kappa
}

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error("horizon of {horizon} iterations exhausted")]
    HorizonExhausted { horizon: usize },
    #[error("visits reported for iteration {got} while the state is at iteration {expected}")]
    WrongIteration { expected: usize, got: usize },
    #[error("visited set must include the depot")]
    DepotNotVisited,
    #[error("vertex {0} out of range")]
    VertexOutOfRange(usize),
}

/// Per-vertex accrued cost and last-visit iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct CostState {
    t: usize,
    last_visit: Vec<usize>,
    accrued: Vec<f64>,
    kappa: Vec<Vec<f64>>,
}

impl CostState {
    /// `kappa` is `N x H`, as stored in instance files.
    pub fn new(kappa: Vec<Vec<f64>>) -> Self {
        let n = kappa.len();
        CostState { t: 0, last_visit: vec![0; n], accrued: vec![0.0; n], kappa }
    }

    pub fn iteration(&self) -> usize {
        self.t
    }

    pub fn horizon(&self) -> usize {
        self.kappa.first().map_or(0, Vec::len)
    }

    pub fn accrued(&self) -> &[f64] {
        &self.accrued
    }

    pub fn last_visit(&self) -> &[usize] {
        &self.last_visit
    }

    pub fn kappa(&self) -> &[Vec<f64>] {
        &self.kappa
    }

    /// Starts the next iteration and adds its growth; returns the new `t`.
    pub fn advance(&mut self) -> Result<usize, CostError> {
        if self.t >= self.horizon() {
            return Err(CostError::HorizonExhausted { horizon: self.horizon() });
        }
        self.t += 1;
        for (acc, row) in self.accrued.iter_mut().zip(&self.kappa) {
            *acc += row[self.t - 1];
        }
        Ok(self.t)
    }

    /// Collects and resets every visited vertex. Returns the amount taken at
    /// each visited vertex in ascending vertex order; repeats in `visited`
    /// count once.
    pub fn apply_visits(&mut self, visited: &[Vertex], t: usize) -> Result<Vec<(Vertex, f64)>, CostError> {
        if t != self.t {
            return Err(CostError::WrongIteration { expected: self.t, got: t });
        }
        if !visited.contains(&DEPOT) {
            return Err(CostError::DepotNotVisited);
        }
        let n = self.accrued.len();
        let mut seen = vec![false; n];
        for &v in visited {
            if v >= n {
                return Err(CostError::VertexOutOfRange(v));
            }
            seen[v] = true;
        }
        let mut collected = Vec::new();
        for v in (0..n).filter(|&v| seen[v]) {
            collected.push((v, self.accrued[v]));
            self.accrued[v] = 0.0;
            self.last_visit[v] = t;
        }
        Ok(collected)
    }

    /// Total cost left on the graph, the per-iteration term of the episode objective.
    pub fn residual_cost(&self) -> f64 {
        self.accrued.iter().sum()
    }

    /// Largest gap between `accrued` and a fresh sum of `kappa` since the last visit.
    pub fn identity_error(&self) -> f64 {
        (0..self.accrued.len())
            .map(|i| {
                let expect: f64 = self.kappa[i][self.last_visit[i]..self.t].iter().sum();
                (expect - self.accrued[i]).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Episode objective evaluated directly from growth draws and per-iteration
/// visited sets: `sum_t sum_i sum_{k = T_i(t)+1..t} kappa[i][k]`.
pub fn episode_cost(kappa: &[Vec<f64>], visits: &[Vec<Vertex>]) -> f64 {
    let n = kappa.len();
    let mut last = vec![0usize; n];
    let mut total = 0.0;
    for (t0, visited) in visits.iter().enumerate() {
        let t = t0 + 1;
        for v in visited {
            last[*v] = t;
        }
        for i in 0..n {
            if i == DEPOT || last[i] == t {
                continue;
            }
            total += kappa[i][last[i]..t].iter().sum::<f64>();
        }
    }
    total
}
