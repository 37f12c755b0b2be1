//! Maximum-likelihood growth-rate estimates from collected lumps, and the
//! predicted accumulated cost that drives each planning round.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Vertex;

#[derive(Debug, Error, PartialEq)]
pub enum EstimatorError {
    #[error("vertex {vertex} observed at iteration {t}, but it was last visited at {last}")]
    NonIncreasingVisit { vertex: Vertex, t: usize, last: usize },
    #[error("collected cost must be finite and non-negative, got {0}")]
    BadAmount(f64),
    #[error("vertex {0} out of range")]
    VertexOutOfRange(Vertex),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorState {
    last_visit: Vec<usize>,
    collected: Vec<f64>,
    mu_default: f64,
}

impl EstimatorState {
    pub fn new(num_vertices: usize, mu_default: f64) -> Self {
        EstimatorState { last_visit: vec![0; num_vertices], collected: vec![0.0; num_vertices], mu_default }
    }

    pub fn mu_default(&self) -> f64 {
        self.mu_default
    }

    pub fn last_visit(&self, v: Vertex) -> usize {
        self.last_visit[v]
    }

    /// Total collected at `v` over all visits so far.
    pub fn collected(&self, v: Vertex) -> f64 {
        self.collected[v]
    }

    /// Records the lump collected at `vertex` during iteration `t`.
    pub fn observe(&mut self, vertex: Vertex, amount: f64, t: usize) -> Result<(), EstimatorError> {
        if vertex >= self.last_visit.len() {
            return Err(EstimatorError::VertexOutOfRange(vertex));
        }
        if !(amount >= 0.0) || !amount.is_finite() {
            return Err(EstimatorError::BadAmount(amount));
        }
        let last = self.last_visit[vertex];
        if t <= last {
            return Err(EstimatorError::NonIncreasingVisit { vertex, t, last });
        }
        self.collected[vertex] += amount;
        self.last_visit[vertex] = t;
        Ok(())
    }

    pub fn mu_hat(&self, v: Vertex) -> f64 {
        match self.last_visit[v] {
            0 => self.mu_default,
            last => self.collected[v] / last as f64,
        }
    }

    pub fn mu_hats(&self) -> Vec<f64> {
        (0..self.last_visit.len()).map(|v| self.mu_hat(v)).collect()
    }

    /// `mu_hat * (t - last_visit)` for every vertex.
    pub fn predicted_cost(&self, t: usize) -> Vec<f64> {
        (0..self.last_visit.len())
            .map(|v| {
                let since = t.saturating_sub(self.last_visit[v]) as f64;
                (self.mu_hat(v) * since).max(0.0)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{materialize_kappa, CostState, GrowthParams};
    use crate::graph::DEPOT;

    #[test]
    fn single_sample_estimate() {
        let mut e = EstimatorState::new(2, 0.5);
        e.observe(1, 1.5, 3).unwrap();
        assert_eq!(e.collected(1), 1.5);
        assert_eq!(e.last_visit(1), 3);
        assert_eq!(e.mu_hat(1), 0.5);
    }

    #[test]
    fn unvisited_vertex_uses_default() {
        let e = EstimatorState::new(3, 0.37);
        assert_eq!(e.mu_hat(2), 0.37);
        assert_eq!(e.predicted_cost(4)[2], 4.0 * 0.37);
    }

    #[test]
    fn prediction_arithmetic() {
        let mut e = EstimatorState::new(2, 0.5);
        assert_eq!(e.predicted_cost(4)[1], 2.0);
        e.observe(1, 1.0, 4).unwrap();
        assert_eq!(e.predicted_cost(4)[1], 0.0);
        // linear in t - T for fixed estimate
        assert_eq!(e.predicted_cost(6)[1], 0.5);
        assert_eq!(e.predicted_cost(8)[1], 1.0);
    }

    #[test]
    fn visits_must_move_forward() {
        let mut e = EstimatorState::new(2, 0.5);
        e.observe(1, 0.3, 2).unwrap();
        assert_eq!(
            e.observe(1, 0.3, 2),
            Err(EstimatorError::NonIncreasingVisit { vertex: 1, t: 2, last: 2 })
        );
        assert!(e.observe(1, -1.0, 3).is_err());
        assert!(e.observe(5, 1.0, 3).is_err());
    }

    #[test]
    fn scripted_episode_matches_direct_estimate() {
        let n = 5;
        let params = GrowthParams::new(vec![0.5, 0.2, 0.45, 0.7, 0.85], 0.1);
        let kappa = materialize_kappa(&params, 42, 10);
        let mut cost = CostState::new(kappa.clone());
        let mut est = EstimatorState::new(n, 0.5);
        // vertex v visited whenever t is a multiple of v
        for t in 1..=10 {
            cost.advance().unwrap();
            let visited: Vec<usize> = (0..n).filter(|&v| v == DEPOT || t % v == 0).collect();
            for (v, amt) in cost.apply_visits(&visited, t).unwrap() {
                est.observe(v, amt, t).unwrap();
            }
            for v in 1..n {
                let last = est.last_visit(v);
                let expect = if last == 0 {
                    0.5
                } else {
                    kappa[v][..last].iter().sum::<f64>() / last as f64
                };
                assert!((est.mu_hat(v) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_noise_prediction_matches_ground_truth() {
        let params = GrowthParams::new(vec![0.5, 0.25, 0.75, 0.125], 0.0);
        let mut cost = CostState::new(materialize_kappa(&params, 0, 6));
        let mut est = EstimatorState::new(4, 0.5);
        for t in 1..=6 {
            cost.advance().unwrap();
            let c_hat = est.predicted_cost(t);
            for v in 1..4 {
                if est.last_visit(v) > 0 {
                    assert_eq!(c_hat[v], cost.accrued()[v]);
                    assert_eq!(est.mu_hat(v), params.mu_star[v]);
                }
            }
            let visited: Vec<usize> = (0..4).filter(|&v| v == DEPOT || (t + v) % 2 == 0).collect();
            for (v, amt) in cost.apply_visits(&visited, t).unwrap() {
                est.observe(v, amt, t).unwrap();
            }
        }
    }
}
