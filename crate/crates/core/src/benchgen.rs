//! Seeded random benchmark instances: vertices scattered in a square around
//! the depot, each wired to its nearest neighbours, random fleet size,
//! budget and mandatory vertices, and clipped-Gaussian growth.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::{index, IndexedRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{materialize_kappa, GrowthParams};
use crate::graph::{all_pairs_shortest, reachable_round_trip, Graph, Vertex, DEPOT};
use crate::instance::{write_instance, Instance, InstanceError};

/// Added to the seed each time a draw has no candidate must-visit vertex.
pub const SEED_ESCALATION: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    /// Inclusive seed range.
    pub seeds: (u64, u64),
    pub horizons: Vec<usize>,
    pub n_choices: Vec<usize>,
    /// Half the side of the square holding the non-depot vertices.
    pub half_width: f64,
    pub neighbour_choices: Vec<usize>,
    pub l_max_base: f64,
    /// `l_max ~ U(base, base + per_vertex * N)`.
    pub l_max_per_vertex: f64,
    pub agent_choices: Vec<usize>,
    pub must_visit_choices: Vec<usize>,
    pub mu_range: (f64, f64),
    pub clip: (f64, f64),
    pub noise_stddev: f64,
    pub mu_default: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            seeds: (1, 120),
            horizons: vec![2, 4, 6, 8, 10],
            n_choices: vec![10, 12, 14, 16, 18, 20],
            half_width: 5.0,
            neighbour_choices: vec![3, 4, 5],
            l_max_base: 20.0,
            l_max_per_vertex: 2.0,
            agent_choices: vec![2, 3, 4, 5],
            must_visit_choices: vec![1, 2, 3],
            mu_range: (0.1, 0.9),
            clip: (0.0, 1.0),
            noise_stddev: 0.1,
            mu_default: 0.5,
        }
    }
}

impl BenchmarkConfig {
    pub fn num_instances(&self) -> usize {
        let (a, b) = self.seeds;
        (b.saturating_sub(a) as usize + 1) * self.horizons.len()
    }
}

/// An instance plus the raw nearest-neighbour lists it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub instance: Instance,
    pub neighbours: Vec<Vec<Vertex>>,
}

/// The `k[i]` nearest other vertices of each vertex; ties go to the lower index.
pub fn nearest_neighbours(positions: &[[f64; 2]], k: &[usize]) -> Vec<Vec<Vertex>> {
    let n = positions.len();
    (0..n)
        .map(|i| {
            let mut others: Vec<(f64, Vertex)> =
                (0..n).filter(|&j| j != i).map(|j| (euclid(positions[i], positions[j]), j)).collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            others.into_iter().take(k[i]).map(|(_, j)| j).collect()
        })
        .collect()
}

/// Unordered pairs `(i, j)`, `i < j`, present in either direction.
pub fn symmetrize(lists: &[Vec<Vertex>]) -> Vec<(Vertex, Vertex)> {
    let mut pairs: Vec<(Vertex, Vertex)> =
        lists.iter().enumerate().flat_map(|(i, l)| l.iter().map(move |&j| (i.min(j), i.max(j)))).collect();
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

fn euclid(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub fn generate_instance(config: &BenchmarkConfig, seed: u64, horizon: usize) -> Generated {
    let mut effective = seed;
    loop {
        if let Some(g) = draw(config, seed, effective, horizon) {
            return g;
        }
        effective += SEED_ESCALATION;
    }
}

fn draw(config: &BenchmarkConfig, seed: u64, effective: u64, horizon: usize) -> Option<Generated> {
    let mut rng = ChaCha8Rng::seed_from_u64(effective);
    // one stream per horizon so that every (seed, H) pair is its own draw
    rng.set_stream(horizon as u64);
    let w = config.half_width;

    let n = *config.n_choices.choose(&mut rng).expect("non-empty N choices");
    let mut positions = vec![[0.0, 0.0]];
    for _ in 1..n {
        positions.push([rng.random_range(-w..w), rng.random_range(-w..w)]);
    }
    let k: Vec<usize> = (0..n)
        .map(|_| (*config.neighbour_choices.choose(&mut rng).expect("non-empty neighbour choices")).min(n - 1))
        .collect();
    let neighbours = nearest_neighbours(&positions, &k);
    let pairs: Vec<(Vertex, Vertex, f64)> =
        symmetrize(&neighbours).into_iter().map(|(i, j)| (i, j, euclid(positions[i], positions[j]))).collect();
    let graph = Graph::from_undirected(n, &pairs).with_positions(positions);

    let l_max = rng.random_range(config.l_max_base..config.l_max_base + config.l_max_per_vertex * n as f64);
    let num_agents = *config.agent_choices.choose(&mut rng).expect("non-empty M choices");
    let x = *config.must_visit_choices.choose(&mut rng).expect("non-empty must-visit choices");
    let dist = all_pairs_shortest(&graph);
    let pool: Vec<Vertex> = reachable_round_trip(&dist, l_max).into_iter().filter(|&v| v != DEPOT).collect();
    if pool.is_empty() {
        return None;
    }
    let count = x.min(num_agents).min(pool.len());
    let mut must_visit: Vec<Vertex> = index::sample(&mut rng, pool.len(), count).into_iter().map(|i| pool[i]).collect();
    must_visit.sort_unstable();

    let (lo, hi) = config.mu_range;
    let mu_star: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    let kappa_stream: u64 = rng.random();
    let params = GrowthParams { mu_star: mu_star.clone(), noise_scale: config.noise_stddev, clip_lo: config.clip.0, clip_hi: config.clip.1 };
    let kappa = materialize_kappa(&params, kappa_stream, horizon);

    Some(Generated {
        instance: Instance {
            seed,
            effective_seed: effective,
            horizon,
            graph,
            num_agents,
            l_max,
            must_visit,
            mu_star,
            mu_default: config.mu_default,
            noise_stddev: config.noise_stddev,
            kappa,
        },
        neighbours,
    })
}

/// Every `(seed, H)` instance of the config, ordered by H then seed.
pub fn generate_all(config: &BenchmarkConfig) -> Vec<Generated> {
    let (a, b) = config.seeds;
    let jobs: Vec<(usize, u64)> = config.horizons.iter().flat_map(|&h| (a..=b).map(move |s| (h, s))).collect();
    jobs.into_par_iter().map(|(h, s)| generate_instance(config, s, h)).collect()
}

pub fn suite_path(dir: &Path, horizon: usize, seed: u64) -> PathBuf {
    dir.join(format!("H{horizon}")).join(format!("seed{seed}.json"))
}

/// Writes the suite under `dir` as `H{H}/seed{seed}.json`. Refuses to touch
/// a non-empty directory unless `force`.
pub fn generate_suite(config: &BenchmarkConfig, dir: &Path, force: bool) -> Result<Vec<PathBuf>, InstanceError> {
    let occupied = fs::read_dir(dir).map(|mut d| d.next().is_some()).unwrap_or(false);
    if occupied && !force {
        return Err(InstanceError::Exists(dir.display().to_string()));
    }
    generate_all(config)
        .into_par_iter()
        .map(|g| {
            let path = suite_path(dir, g.instance.horizon, g.instance.seed);
            write_instance(&path, &g.instance, true)?;
            Ok(path)
        })
        .collect()
}

/// Instance files under `dir`, sorted by H then seed.
pub fn list_suite(dir: &Path) -> Result<Vec<PathBuf>, InstanceError> {
    let io_err = |source| InstanceError::Io { path: dir.display().to_string(), source };
    let mut found = Vec::new();
    for sub in fs::read_dir(dir).map_err(io_err)? {
        let sub = sub.map_err(io_err)?.path();
        let Some(h) = sub.file_name().and_then(|s| s.to_str()).and_then(|s| s.strip_prefix('H')).and_then(|s| s.parse::<usize>().ok()) else {
            continue;
        };
        for f in fs::read_dir(&sub).map_err(io_err)? {
            let f = f.map_err(io_err)?.path();
            let seed = f
                .file_name()
                .and_then(|s| s.to_str())
                .and_then(|s| s.strip_prefix("seed"))
                .and_then(|s| s.strip_suffix(".json"))
                .and_then(|s| s.parse::<u64>().ok());
            if let Some(seed) = seed {
                found.push((h, seed, f));
            }
        }
    }
    found.sort();
    Ok(found.into_iter().map(|(_, _, p)| p).collect())
}
