//! Map/reduce job orchestration.
//!
//! A job is split into shards, shards are pulled greedily by workers (the map
//! phase), and results are reduced in shard order into the output document.
//! Failed shards go back to the pending set and run elsewhere; the first
//! RESULT for a shard wins, so a shard executed twice is reduced once.
//!
//! Two drivers share the [`Scheduler`] state machine: [`run_job`] talks to
//! live workers over TCP, [`simulate_job`] runs in-process workers on a
//! virtual clock.

mod net;
mod report;
pub mod scheduler;
mod sim;

use thiserror::Error;

use crate::corpus::{CorpusError, Document, DEFAULT_SHARD_SIZE};
use crate::engines::EngineError;

pub use net::{run_job, run_job_with, NetOptions};
pub use report::{parse_worker_pool, timing_csv, JobReport};
pub use scheduler::{next_assignment, Completion, Scheduler, WorkerState};
pub use sim::{simulate_job, KillPlan, SimCluster};

pub const DEFAULT_RETRY_LIMIT: u32 = 3;

#[derive(Debug, Clone)]
pub struct Job {
    pub job_id: String,
    pub source: Document,
    pub shard_size: usize,
    pub workers: Vec<String>,
    pub retry_limit: u32,
}

impl Job {
    pub fn new(job_id: &str, source: Document, workers: Vec<String>) -> Self {
        Job {
            job_id: job_id.into(),
            source,
            shard_size: DEFAULT_SHARD_SIZE,
            workers,
            retry_limit: DEFAULT_RETRY_LIMIT,
        }
    }

    /// A job for `worker_count` in-process simulated workers.
    pub fn simulated(job_id: &str, source: Document, worker_count: usize) -> Self {
        Job::new(
            job_id,
            source,
            (0..worker_count).map(|i| format!("sim-{i}")).collect(),
        )
    }

    pub fn with_shard_size(mut self, shard_size: usize) -> Self {
        self.shard_size = shard_size;
        self
    }

    pub fn with_retry_limit(mut self, retry_limit: u32) -> Self {
        self.retry_limit = retry_limit;
        self
    }

    pub(crate) fn validate(&self) -> Result<(), JobError> {
        if self.shard_size == 0 {
            return Err(JobError::InvalidJob("shard_size must be at least 1".into()));
        }
        if self.workers.is_empty() {
            return Err(JobError::InvalidJob(
                "a job needs at least one worker".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShardTiming {
    pub shard_id: usize,
    pub worker: String,
    pub words: usize,
    /// Seconds since job start when the successful attempt was dispatched.
    pub dispatch_seconds: f64,
    pub cost_seconds: f64,
    pub wall_seconds: f64,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FailureRecord {
    pub shard_id: usize,
    pub worker: String,
    pub reason: String,
    pub reassigned_to: Option<String>,
}

#[derive(Debug, Clone)]
pub struct JobResult {
    pub job_id: String,
    pub output: Document,
    /// One entry per shard, ordered by shard id.
    pub timing: Vec<ShardTiming>,
    /// Job-level fixed overhead: pool handshake and manifest construction.
    pub setup_seconds: f64,
    /// Engine setup each worker reported at handshake (service architecture).
    pub worker_setup_seconds: Vec<(String, f64)>,
    pub total_wall_seconds: f64,
    pub failures: Vec<FailureRecord>,
    /// True when times are virtual.
    pub simulated: bool,
}

impl JobResult {
    pub fn total_cost_seconds(&self) -> f64 {
        self.timing.iter().map(|t| t.cost_seconds).sum()
    }

    pub fn shards_served_by(&self, worker: &str) -> usize {
        self.timing.iter().filter(|t| t.worker == worker).count()
    }
}

#[derive(Debug, Error)]
pub enum JobError {
    #[error("invalid job: {0}")]
    InvalidJob(String),
    #[error("connectivity failure: {0}")]
    Connectivity(String),
    #[error("shard {shard_id} failed after {} attempt(s): {}", reasons.len(), reasons.join("; "))]
    ShardFailed {
        shard_id: usize,
        reasons: Vec<String>,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

pub(crate) fn failure_records(sched: &Scheduler, names: &[String]) -> Vec<FailureRecord> {
    sched
        .failures()
        .iter()
        .map(|f| FailureRecord {
            shard_id: f.shard_id,
            worker: names[f.worker].clone(),
            reason: f.reason.clone(),
            reassigned_to: f.reassigned_to.map(|w| names[w].clone()),
        })
        .collect()
}
