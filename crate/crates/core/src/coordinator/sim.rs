//! Discrete-event driver: in-process workers on a virtual clock.
//!
//! Shards really are translated (through the same request handler the TCP
//! worker uses); only time is virtual. A shard dispatched at `t` completes at
//! `t + cost`, where cost is what the engine's cost model charged.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::scheduler::{Scheduler, WorkerState};
use super::{failure_records, Job, JobError, JobResult, ShardTiming};
use crate::corpus::{make_shards, reassemble, Shard, ShardManifest};
use crate::engines::{Engine, EngineFactory, EngineSpec};
use crate::protocol::WireFrame;
use crate::worker::{handle_translate_request, Architecture};

/// Worker `worker` crashes at virtual time `at_seconds` (job start = 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KillPlan {
    pub worker: usize,
    pub at_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SimCluster {
    pub engine: EngineSpec,
    pub architecture: Architecture,
    /// Fixed job overhead before any shard starts.
    pub job_overhead_seconds: f64,
    pub kills: Vec<KillPlan>,
}

impl SimCluster {
    /// The engine is forced into simulate mode.
    pub fn new(engine: EngineSpec, architecture: Architecture) -> Self {
        SimCluster {
            engine: engine.with_simulate(true),
            architecture,
            job_overhead_seconds: 0.0,
            kills: Vec::new(),
        }
    }

    pub fn with_overhead(mut self, seconds: f64) -> Self {
        self.job_overhead_seconds = seconds;
        self
    }

    pub fn with_kills(mut self, kills: Vec<KillPlan>) -> Self {
        self.kills = kills;
        self
    }
}

#[derive(Debug)]
enum EventKind {
    Done {
        worker: usize,
        shard: usize,
        response: WireFrame,
        dispatched: f64,
    },
    Ready {
        worker: usize,
    },
    Kill {
        worker: usize,
    },
}

impl EventKind {
    fn priority(&self) -> u8 {
        match self {
            EventKind::Done { .. } => 0,
            EventKind::Ready { .. } => 1,
            EventKind::Kill { .. } => 2,
        }
    }
}

#[derive(Debug)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl Event {
    fn key(&self) -> (f64, u8, u64) {
        (self.time, self.kind.priority(), self.seq)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed: BinaryHeap pops the earliest event first.
    fn cmp(&self, other: &Self) -> Ordering {
        let (ta, pa, sa) = self.key();
        let (tb, pb, sb) = other.key();
        tb.total_cmp(&ta).then(pb.cmp(&pa)).then(sb.cmp(&sa))
    }
}

struct Queue {
    heap: BinaryHeap<Event>,
    seq: u64,
}

impl Queue {
    fn push(&mut self, time: f64, kind: EventKind) {
        self.seq += 1;
        self.heap.push(Event {
            time,
            seq: self.seq,
            kind,
        });
    }
}

fn execute(
    shard: &Shard,
    job_id: &str,
    engine: &mut Option<Box<dyn Engine>>,
    factory: &dyn EngineFactory,
) -> Result<WireFrame, JobError> {
    let frame = WireFrame::Translate {
        job_id: job_id.into(),
        shard_id: shard.shard_id as u64,
        sentences: shard.texts(),
    };
    Ok(match engine {
        Some(persistent) => handle_translate_request(persistent.as_mut(), &frame, 0.0, 0),
        None => {
            let mut fresh = factory.create()?;
            let setup = fresh.setup_seconds();
            handle_translate_request(fresh.as_mut(), &frame, setup, 0)
        }
    })
}

/// Runs `job` on `job.workers.len()` simulated workers.
pub fn simulate_job(job: &Job, cluster: &SimCluster) -> Result<JobResult, JobError> {
    job.validate()?;
    let shards = make_shards(&job.source, job.shard_size)?;
    let manifest = ShardManifest::from_shards(&shards);
    let names = &job.workers;
    let k = names.len();
    let start = cluster.job_overhead_seconds;

    let mut sched = Scheduler::new(shards.len(), k, job.retry_limit);
    let mut queue = Queue {
        heap: BinaryHeap::new(),
        seq: 0,
    };
    let mut engines: Vec<Option<Box<dyn Engine>>> = Vec::with_capacity(k);
    let mut worker_setup = Vec::with_capacity(k);
    for (w, name) in names.iter().enumerate() {
        let (engine, setup) = match cluster.architecture {
            Architecture::Service => {
                let e = cluster.engine.create()?;
                let s = e.setup_seconds();
                (Some(e), s)
            }
            Architecture::Simple => (None, 0.0),
        };
        engines.push(engine);
        worker_setup.push((name.clone(), setup));
        // Unavailable until its engine is up.
        sched.mark_quarantined(w);
        queue.push(start + setup, EventKind::Ready { worker: w });
    }
    for kill in &cluster.kills {
        if kill.worker < k {
            queue.push(
                kill.at_seconds,
                EventKind::Kill {
                    worker: kill.worker,
                },
            );
        }
    }

    let mut slots: Vec<Option<(Vec<String>, ShardTiming)>> = vec![None; shards.len()];
    let mut now = start;
    let mut makespan = start;

    loop {
        while let Some((shard, w)) = sched.dispatch_next() {
            let response = execute(
                &shards[shard],
                &job.job_id,
                &mut engines[w],
                &cluster.engine,
            )?;
            let cost = match &response {
                WireFrame::Result { cost_seconds, .. } => *cost_seconds,
                _ => 0.0,
            };
            queue.push(
                now + cost,
                EventKind::Done {
                    worker: w,
                    shard,
                    response,
                    dispatched: now,
                },
            );
        }
        debug_assert!(sched.is_work_conserving());

        if sched.is_complete() {
            break;
        }
        if let Some(exhausted) = sched.exhausted() {
            return Err(JobError::ShardFailed {
                shard_id: exhausted.shard_id,
                reasons: exhausted.reasons.clone(),
            });
        }
        if sched.is_stranded() {
            return Err(JobError::Connectivity(format!(
                "all {k} simulated workers died with {} shard(s) unfinished",
                shards.len() - slots.iter().filter(|s| s.is_some()).count()
            )));
        }
        let Some(first) = queue.heap.pop() else {
            return Err(JobError::Connectivity(
                "simulation stalled with work outstanding".into(),
            ));
        };
        now = first.time;
        // Everything due at `now` is applied before the next dispatch round.
        let mut next = Some(first);
        while let Some(event) = next.take() {
            if queue.heap.peek().is_some_and(|e| e.time == now) {
                next = queue.heap.pop();
            }
            match event.kind {
                EventKind::Ready { worker } => sched.reinstate(worker),
                EventKind::Kill { worker } => sched.mark_dead(worker),
                EventKind::Done {
                    worker,
                    shard,
                    response,
                    dispatched,
                } => {
                    if sched.worker_state(worker) != WorkerState::Busy(shard) {
                        // Worker died while this shard was in flight.
                        continue;
                    }
                    match response {
                        WireFrame::Result {
                            translations,
                            cost_seconds,
                            ..
                        } if translations.len() == shards[shard].sentences.len() => {
                            let attempts = sched.attempts(shard) + 1;
                            if sched.complete(shard, worker) == super::Completion::Accepted {
                                makespan = makespan.max(now);
                                slots[shard] = Some((
                                    translations,
                                    ShardTiming {
                                        shard_id: shard,
                                        worker: names[worker].clone(),
                                        words: shards[shard].word_count,
                                        dispatch_seconds: dispatched,
                                        cost_seconds,
                                        wall_seconds: now - dispatched,
                                        attempts,
                                    },
                                ));
                            }
                        }
                        other => {
                            let reason = match other {
                                WireFrame::Error { message, .. } => message,
                                WireFrame::Result { translations, .. } => format!(
                                    "RESULT carried {} translations for {} sentences",
                                    translations.len(),
                                    shards[shard].sentences.len()
                                ),
                                f => format!("unexpected {} frame", f.type_name()),
                            };
                            let _ = sched.fail(shard, worker, &reason);
                            // The worker answers PING at once; only the shard is lost.
                            sched.reinstate(worker);
                        }
                    }
                }
            }
        }
    }

    let mut texts = Vec::with_capacity(slots.len());
    let mut timing = Vec::with_capacity(slots.len());
    for (id, slot) in slots.into_iter().enumerate() {
        let (t, s) = slot.expect("complete job has every slot");
        texts.push((id, t));
        timing.push(s);
    }
    let output = reassemble(&manifest, texts)?;
    Ok(JobResult {
        job_id: job.job_id.clone(),
        output,
        timing,
        setup_seconds: cluster.job_overhead_seconds,
        worker_setup_seconds: worker_setup,
        total_wall_seconds: makespan,
        failures: failure_records(&sched, names),
        simulated: true,
    })
}
