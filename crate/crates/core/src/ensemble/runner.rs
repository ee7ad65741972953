//! Parallel execution of independent trajectories with ordered reduction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::StreamId;
use crate::{Error, Result};

/// Trajectories handed to the pool at a time; results of a chunk are reduced
/// in index order before the next chunk starts.
const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskSettings {
    pub master_seed: u64,
    pub threads: usize,
    pub abort_tolerance: f64,
    pub max_attempts: u32,
}

/// Seed bookkeeping of one ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRecord {
    pub label: String,
    pub master_seed: u64,
    pub requested: usize,
    pub completed: usize,
    /// Trajectories that succeeded only on a later attempt.
    pub retried: usize,
    pub aborted: usize,
    /// Stream actually used by trajectory `i` (the last attempt if it aborted).
    pub streams: Vec<u64>,
    /// Error messages of aborted trajectories, by index.
    pub abort_messages: Vec<(usize, String)>,
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn attempt<T, F>(task: &F, first: StreamId, max_attempts: u32) -> (StreamId, Result<T>)
where
    F: Fn(StreamId) -> Result<T>,
{
    let mut stream = first;
    loop {
        let result = task(stream);
        if result.is_ok() || stream.attempt + 1 >= max_attempts {
            return (stream, result);
        }
        stream = stream.next_attempt();
    }
}

/// Runs `task` for trajectories `0..n` and feeds successful results to
/// `sink` in index order, whatever the thread count. Fails with
/// [`Error::TooManyAborts`] when more than `abort_tolerance * n`
/// trajectories fail every attempt; errors from `sink` stop the run.
pub fn run_tasks<T, F, S>(
    label: &str,
    n: usize,
    settings: &TaskSettings,
    task: F,
    mut sink: S,
) -> Result<EnsembleRecord>
where
    T: Send,
    F: Fn(StreamId) -> Result<T> + Sync,
    S: FnMut(usize, T) -> Result<()>,
{
    let pool = pool(settings.threads)?;
    let max_attempts = settings.max_attempts.max(1);
    let mut record = EnsembleRecord {
        label: label.to_string(),
        master_seed: settings.master_seed,
        requested: n,
        completed: 0,
        retried: 0,
        aborted: 0,
        streams: Vec::with_capacity(n),
        abort_messages: Vec::new(),
    };
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        let results: Vec<(StreamId, Result<T>)> = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map(|i| {
                    attempt(
                        &task,
                        StreamId::new(settings.master_seed, i as u64),
                        max_attempts,
                    )
                })
                .collect()
        });
        for (offset, (stream, result)) in results.into_iter().enumerate() {
            let i = start + offset;
            record.streams.push(stream.stream());
            match result {
                Ok(value) => {
                    record.completed += 1;
                    if stream.attempt > 0 {
                        record.retried += 1;
                    }
                    sink(i, value)?;
                }
                Err(e) => {
                    record.aborted += 1;
                    record.abort_messages.push((i, e.to_string()));
                }
            }
        }
        start = end;
    }
    if record.aborted as f64 > settings.abort_tolerance * n as f64 {
        return Err(Error::TooManyAborts {
            failed: record.aborted,
            total: n,
            tolerance: settings.abort_tolerance,
        });
    }
    Ok(record)
}
