//! Scheduler state machine shared by the networked and simulated drivers.
//!
//! Greedy pull: an idle worker takes the lowest-numbered pending shard.
//! Completion is first-RESULT-wins; a shard whose failures exceed the retry
//! limit fails the job.

use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkerState {
    Idle,
    Busy(usize),
    /// No new work until a successful PING.
    Quarantined,
    Dead,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub shard_id: usize,
    pub worker: usize,
    pub reason: String,
    pub reassigned_to: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Completion {
    Accepted,
    /// The shard was already reduced; this result is dropped.
    Duplicate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShardExhausted {
    pub shard_id: usize,
    pub reasons: Vec<String>,
}

/// Lowest pending shard paired with the lowest idle worker.
pub fn next_assignment(
    pending: &BTreeSet<usize>,
    idle: &BTreeSet<usize>,
) -> Option<(usize, usize)> {
    Some((*pending.first()?, *idle.first()?))
}

#[derive(Debug, Clone)]
pub struct Scheduler {
    pending: BTreeSet<usize>,
    workers: Vec<WorkerState>,
    attempts: Vec<u32>,
    completed: Vec<bool>,
    completed_count: usize,
    retry_limit: u32,
    failures: Vec<Failure>,
    exhausted: Option<ShardExhausted>,
}

impl Scheduler {
    pub fn new(shard_count: usize, worker_count: usize, retry_limit: u32) -> Self {
        Scheduler {
            pending: (0..shard_count).collect(),
            workers: vec![WorkerState::Idle; worker_count],
            attempts: vec![0; shard_count],
            completed: vec![false; shard_count],
            completed_count: 0,
            retry_limit,
            failures: Vec::new(),
            exhausted: None,
        }
    }

    pub fn worker_state(&self, worker: usize) -> WorkerState {
        self.workers[worker]
    }

    pub fn pending(&self) -> &BTreeSet<usize> {
        &self.pending
    }

    pub fn idle_workers(&self) -> BTreeSet<usize> {
        self.workers
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == WorkerState::Idle)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn live_workers(&self) -> usize {
        self.workers
            .iter()
            .filter(|s| **s != WorkerState::Dead)
            .count()
    }

    pub fn attempts(&self, shard: usize) -> u32 {
        self.attempts[shard]
    }

    pub fn failures(&self) -> &[Failure] {
        &self.failures
    }

    pub fn exhausted(&self) -> Option<&ShardExhausted> {
        self.exhausted.as_ref()
    }

    pub fn is_complete(&self) -> bool {
        self.completed_count == self.completed.len()
    }

    pub fn is_failed(&self) -> bool {
        self.exhausted.is_some()
    }

    pub fn is_finished(&self) -> bool {
        self.is_complete() || self.is_failed()
    }

    /// No idle worker while a shard waits unassigned.
    pub fn is_work_conserving(&self) -> bool {
        self.pending.is_empty() || self.idle_workers().is_empty()
    }

    /// Global greedy step: one pairing, or `None` if nothing can be paired.
    pub fn dispatch_next(&mut self) -> Option<(usize, usize)> {
        if self.is_failed() {
            return None;
        }
        let (shard, worker) = next_assignment(&self.pending, &self.idle_workers())?;
        self.pending.remove(&shard);
        self.workers[worker] = WorkerState::Busy(shard);
        Some((shard, worker))
    }

    /// Pull for one specific worker.
    pub fn assign_to(&mut self, worker: usize) -> Option<usize> {
        if self.is_failed() || self.workers[worker] != WorkerState::Idle {
            return None;
        }
        let shard = self.pending.pop_first()?;
        self.workers[worker] = WorkerState::Busy(shard);
        Some(shard)
    }

    pub fn complete(&mut self, shard: usize, worker: usize) -> Completion {
        if self.workers[worker] == WorkerState::Busy(shard) {
            self.workers[worker] = WorkerState::Idle;
        }
        if self.completed[shard] {
            return Completion::Duplicate;
        }
        self.completed[shard] = true;
        self.completed_count += 1;
        self.pending.remove(&shard);
        for f in self.failures.iter_mut().filter(|f| f.shard_id == shard) {
            f.reassigned_to.get_or_insert(worker);
        }
        Completion::Accepted
    }

    /// In-flight shard failed on `worker`: the shard goes back to pending and
    /// the worker is quarantined.
    pub fn fail(
        &mut self,
        shard: usize,
        worker: usize,
        reason: &str,
    ) -> Result<(), ShardExhausted> {
        if self.workers[worker] != WorkerState::Dead {
            self.workers[worker] = WorkerState::Quarantined;
        }
        if self.completed[shard] {
            return Ok(());
        }
        self.attempts[shard] += 1;
        self.failures.push(Failure {
            shard_id: shard,
            worker,
            reason: reason.to_owned(),
            reassigned_to: None,
        });
        if self.attempts[shard] > self.retry_limit {
            let reasons = self
                .failures
                .iter()
                .filter(|f| f.shard_id == shard)
                .map(|f| f.reason.clone())
                .collect();
            let exhausted = ShardExhausted {
                shard_id: shard,
                reasons,
            };
            self.exhausted.get_or_insert(exhausted.clone());
            return Err(exhausted);
        }
        self.pending.insert(shard);
        Ok(())
    }

    /// Worker declined the shard for now: it goes back to pending without
    /// counting as an attempt, and the worker stays available.
    pub fn release(&mut self, shard: usize, worker: usize) {
        if self.workers[worker] == WorkerState::Busy(shard) {
            self.workers[worker] = WorkerState::Idle;
        }
        if !self.completed[shard] {
            self.pending.insert(shard);
        }
    }

    /// Takes an idle worker out of rotation without failing anything.
    pub fn mark_quarantined(&mut self, worker: usize) {
        if self.workers[worker] == WorkerState::Idle {
            self.workers[worker] = WorkerState::Quarantined;
        }
    }

    /// Successful PING after quarantine.
    pub fn reinstate(&mut self, worker: usize) {
        if self.workers[worker] == WorkerState::Quarantined {
            self.workers[worker] = WorkerState::Idle;
        }
    }

    pub fn mark_dead(&mut self, worker: usize) {
        if let WorkerState::Busy(shard) = self.workers[worker] {
            self.workers[worker] = WorkerState::Dead;
            let _ = self.fail(shard, worker, "worker died");
        }
        self.workers[worker] = WorkerState::Dead;
    }

    /// Pending work that no live worker will ever pick up.
    pub fn is_stranded(&self) -> bool {
        !self.is_finished() && self.live_workers() == 0
    }
}
