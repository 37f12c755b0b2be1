//! Runs every (instance, planner) episode of a suite on a worker pool.
//!
//! Workers send finished rows over a channel; one writer emits them in task
//! order, so the output does not depend on scheduling.

use std::collections::BTreeMap;
use std::sync::mpsc;
use std::time::Duration;

use thiserror::Error;

use crate::instance::Instance;
use crate::results::ResultRow;
use crate::simulator::{run_episode, PlannerKind, SimulationError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{instance} / {planner}: {source}")]
    Simulation { instance: String, planner: PlannerKind, source: SimulationError },
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("writer: {0}")]
    Sink(String),
}

/// Runs the suite and hands rows to `sink` in (instance, planner) order.
/// `jobs = 0` uses rayon's default thread count.
pub fn run_suite<F>(
    instances: &[Instance],
    planners: &[PlannerKind],
    time_limit: Option<Duration>,
    jobs: usize,
    mut sink: F,
) -> Result<Vec<ResultRow>, HarnessError>
where
    F: FnMut(&ResultRow) -> Result<(), String>,
{
    let tasks: Vec<(usize, &Instance, PlannerKind)> = instances
        .iter()
        .flat_map(|inst| planners.iter().map(move |&p| (inst, p)))
        .enumerate()
        .map(|(k, (inst, p))| (k, inst, p))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let (tx, rx) = mpsc::channel::<(usize, Result<ResultRow, HarnessError>)>();

    let mut rows = Vec::with_capacity(tasks.len());
    let mut first_error = None;
    std::thread::scope(|scope| {
        scope.spawn(|| {
            pool.scope_fifo(|s| {
                for &(k, inst, planner) in &tasks {
                    let tx = tx.clone();
                    s.spawn_fifo(move |_| {
                        let r = run_episode(inst, planner, time_limit)
                            .map(|e| ResultRow::from(&e))
                            .map_err(|source| HarnessError::Simulation { instance: inst.id(), planner, source });
                        let _ = tx.send((k, r));
                    });
                }
            });
            drop(tx);
        });

        let mut pending = BTreeMap::new();
        let mut next = 0;
        for (k, r) in rx {
            pending.insert(k, r);
            while let Some(r) = pending.remove(&next) {
                next += 1;
                match r {
                    Ok(row) => {
                        if first_error.is_none() {
                            if let Err(e) = sink(&row) {
                                first_error = Some(HarnessError::Sink(e));
                            }
                        }
                        rows.push(row);
                    }
                    Err(e) => {
                        first_error.get_or_insert(e);
                    }
                }
            }
        }
    });
    match first_error {
        Some(e) => Err(e),
        None => Ok(rows),
    }
}
