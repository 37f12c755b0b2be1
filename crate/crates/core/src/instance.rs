//! Problem instances and their JSON file format.
//!
//! Files use 1-based vertex ids; the depot is vertex 1. Each undirected edge
//! is listed once as `[i, j, length]` and mirrored on read.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, Vertex};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    /// Seed requested from the generator.
    pub seed: u64,
    /// Seed actually used after any regeneration.
    pub effective_seed: u64,
    pub horizon: usize,
    pub graph: Graph,
    pub num_agents: usize,
    pub l_max: f64,
    pub must_visit: Vec<Vertex>,
    pub mu_star: Vec<f64>,
    pub mu_default: f64,
    pub noise_stddev: f64,
    /// `kappa[i][t - 1]`: growth at vertex `i` before iteration `t`.
    pub kappa: Vec<Vec<f64>>,
}

impl Instance {
    pub fn num_vertices(&self) -> usize {
        self.graph.num_vertices()
    }

    /// Label used in result tables.
    pub fn id(&self) -> String {
        format!("H{}/seed{}", self.horizon, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub version: u32,
    pub seed: u64,
    #[serde(default)]
    pub effective_seed: Option<u64>,
    #[serde(rename = "H")]
    pub horizon: usize,
    #[serde(rename = "N")]
    pub num_vertices: usize,
    #[serde(rename = "M")]
    pub num_agents: usize,
    pub l_max: f64,
    pub positions: Vec<[f64; 2]>,
    pub edges: Vec<(usize, usize, f64)>,
    pub must_visit: Vec<usize>,
    pub mu_star: Vec<f64>,
    pub mu_default: f64,
    pub noise_stddev: f64,
    pub kappa: Vec<Vec<f64>>,
}

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("malformed instance file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("{0} already exists")]
    Exists(String),
}

fn invalid(msg: impl Into<String>) -> InstanceError {
    InstanceError::Invalid(msg.into())
}

impl InstanceFile {
    pub fn from_instance(inst: &Instance) -> Self {
        let n = inst.num_vertices();
        InstanceFile {
            version: FORMAT_VERSION,
            seed: inst.seed,
            effective_seed: Some(inst.effective_seed),
            horizon: inst.horizon,
            num_vertices: n,
            num_agents: inst.num_agents,
            l_max: inst.l_max,
            positions: inst.graph.positions().map_or_else(|| vec![[0.0, 0.0]; n], <[_]>::to_vec),
            edges: inst.graph.undirected_edges().into_iter().map(|(i, j, l)| (i + 1, j + 1, l)).collect(),
            must_visit: inst.must_visit.iter().map(|v| v + 1).collect(),
            mu_star: inst.mu_star.clone(),
            mu_default: inst.mu_default,
            noise_stddev: inst.noise_stddev,
            kappa: inst.kappa.clone(),
        }
    }

    pub fn into_instance(self) -> Result<Instance, InstanceError> {
        if self.version != FORMAT_VERSION {
            return Err(InstanceError::Version(self.version));
        }
        let n = self.num_vertices;
        if n == 0 {
            return Err(invalid("N must be positive"));
        }
        if self.num_agents == 0 {
            return Err(invalid("M must be positive"));
        }
        if !(self.l_max.is_finite() && self.l_max >= 0.0) {
            return Err(invalid(format!("l_max {} must be finite and non-negative", self.l_max)));
        }
        if self.positions.len() != n {
            return Err(invalid(format!("{} positions for N = {n}", self.positions.len())));
        }
        if self.mu_star.len() != n {
            return Err(invalid(format!("{} mu_star entries for N = {n}", self.mu_star.len())));
        }
        if self.kappa.len() != n || self.kappa.iter().any(|r| r.len() != self.horizon) {
            return Err(invalid(format!("kappa must be {n} x {}", self.horizon)));
        }
        if self.kappa.iter().flatten().any(|k| !(k.is_finite() && *k >= 0.0)) {
            return Err(invalid("kappa entries must be finite and non-negative"));
        }
        let mut pairs = Vec::with_capacity(self.edges.len());
        for &(i, j, l) in &self.edges {
            if !(1..=n).contains(&i) || !(1..=n).contains(&j) {
                return Err(invalid(format!("edge ({i},{j}) out of range")));
            }
            if !(l.is_finite() && l > 0.0) {
                return Err(invalid(format!("edge ({i},{j}) has length {l}")));
            }
            pairs.push((i - 1, j - 1, l));
        }
        let graph = Graph::from_undirected(n, &pairs).with_positions(self.positions);
        graph.validate().map_err(|v| invalid(v.to_string()))?;
        let mut must_visit = Vec::with_capacity(self.must_visit.len());
        for &v in &self.must_visit {
            if !(1..=n).contains(&v) {
                return Err(invalid(format!("must-visit vertex {v} out of range")));
            }
            must_visit.push(v - 1);
        }
        Ok(Instance {
            seed: self.seed,
            effective_seed: self.effective_seed.unwrap_or(self.seed),
            horizon: self.horizon,
            graph,
            num_agents: self.num_agents,
            l_max: self.l_max,
            must_visit,
            mu_star: self.mu_star,
            mu_default: self.mu_default,
            noise_stddev: self.noise_stddev,
            kappa: self.kappa,
        })
    }
}

pub fn to_json(inst: &Instance) -> String {
    let mut s = serde_json::to_string_pretty(&InstanceFile::from_instance(inst)).expect("plain data serializes");
    s.push('\n');
    s
}

pub fn from_json(text: &str) -> Result<Instance, InstanceError> {
    serde_json::from_str::<InstanceFile>(text)?.into_instance()
}

pub fn read_instance(path: &Path) -> Result<Instance, InstanceError> {
    let text = fs::read_to_string(path).map_err(|source| InstanceError::Io { path: path.display().to_string(), source })?;
    from_json(&text)
}

/// Writes `inst` to `path`, refusing to replace an existing file unless `force`.
pub fn write_instance(path: &Path, inst: &Instance, force: bool) -> Result<(), InstanceError> {
    let io_err = |source| InstanceError::Io { path: path.display().to_string(), source };
    if !force && path.exists() {
        return Err(InstanceError::Exists(path.display().to_string()));
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    fs::write(path, to_json(inst)).map_err(io_err)
}
