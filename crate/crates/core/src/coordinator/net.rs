//! TCP driver: one session thread per worker feeding the shared scheduler.

use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use log::{info, warn};

use super::scheduler::{Completion, Scheduler, WorkerState};
use super::{failure_records, Job, JobError, JobResult, ShardTiming};
use crate::corpus::{make_shards, reassemble, Shard, ShardManifest};
use crate::protocol::{read_frame, write_frame, ProtocolError, WireFrame, PROTOCOL_VERSION};

#[derive(Debug, Clone)]
pub struct NetOptions {
    pub connect_timeout: Duration,
    /// Per-request read timeout; `None` waits indefinitely.
    pub request_timeout: Option<Duration>,
    /// Reconnect tries before a quarantined worker is declared dead.
    pub reconnect_attempts: u32,
    pub reconnect_backoff: Duration,
}

impl Default for NetOptions {
    fn default() -> Self {
        NetOptions {
            connect_timeout: Duration::from_secs(5),
            request_timeout: None,
            reconnect_attempts: 3,
            reconnect_backoff: Duration::from_millis(50),
        }
    }
}

struct Session {
    addr: SocketAddr,
    stream: Option<TcpStream>,
    setup_seconds: f64,
}

fn resolve(address: &str) -> Result<SocketAddr, String> {
    address
        .to_socket_addrs()
        .map_err(|e| format!("{address}: {e}"))?
        .next()
        .ok_or_else(|| format!("{address}: no address"))
}

fn request(stream: &mut TcpStream, frame: &WireFrame) -> Result<WireFrame, ProtocolError> {
    write_frame(stream, frame)?;
    read_frame(stream)?.ok_or_else(|| ProtocolError::Framing("worker closed the connection".into()))
}

/// Connects and completes the HELLO exchange; returns the worker's setup cost.
fn handshake(addr: SocketAddr, options: &NetOptions) -> Result<(TcpStream, f64), String> {
    let mut stream =
        TcpStream::connect_timeout(&addr, options.connect_timeout).map_err(|e| e.to_string())?;
    let _ = stream.set_nodelay(true);
    stream
        .set_read_timeout(Some(options.connect_timeout))
        .map_err(|e| e.to_string())?;
    match request(&mut stream, &WireFrame::hello()).map_err(|e| e.to_string())? {
        WireFrame::Hello {
            protocol_version,
            setup_seconds,
            ..
        } if protocol_version == PROTOCOL_VERSION => {
            stream
                .set_read_timeout(options.request_timeout)
                .map_err(|e| e.to_string())?;
            Ok((stream, setup_seconds.unwrap_or(0.0)))
        }
        WireFrame::Hello {
            protocol_version, ..
        } => Err(format!("worker speaks protocol '{protocol_version}'")),
        WireFrame::Error { message, .. } => Err(message),
        other => Err(format!("unexpected {} reply to HELLO", other.type_name())),
    }
}

enum Outcome {
    Done {
        translations: Vec<String>,
        cost_seconds: f64,
    },
    /// Worker answered with an ERROR; the connection is still usable.
    Rejected(String),
    /// Worker is full or draining and asked to be tried again later.
    Busy(String),
    /// The connection is broken or out of sync.
    Broken(String),
}

fn run_shard(stream: &mut TcpStream, job_id: &str, shard: &Shard) -> Outcome {
    let frame = WireFrame::Translate {
        job_id: job_id.into(),
        shard_id: shard.shard_id as u64,
        sentences: shard.texts(),
    };
    match request(stream, &frame) {
        Ok(WireFrame::Result {
            shard_id,
            translations,
            cost_seconds,
            ..
        }) => {
            if shard_id != shard.shard_id as u64 {
                Outcome::Broken(format!(
                    "RESULT for shard {shard_id}, expected {}",
                    shard.shard_id
                ))
            } else if translations.len() != shard.sentences.len() {
                Outcome::Broken(format!(
                    "RESULT carried {} translations for {} sentences",
                    translations.len(),
                    shard.sentences.len()
                ))
            } else {
                Outcome::Done {
                    translations,
                    cost_seconds,
                }
            }
        }
        Ok(WireFrame::Error {
            message,
            retry_later: true,
            ..
        }) => Outcome::Busy(message),
        Ok(WireFrame::Error { message, .. }) => Outcome::Rejected(message),
        Ok(other) => Outcome::Broken(format!(
            "unexpected {} reply to TRANSLATE",
            other.type_name()
        )),
        Err(e) => Outcome::Broken(e.to_string()),
    }
}

/// Brings a quarantined worker back with a successful PING, reconnecting if
/// the old connection is gone.
fn recover(session: &mut Session, options: &NetOptions) -> bool {
    for attempt in 0..=options.reconnect_attempts {
        if attempt > 0 {
            thread::sleep(options.reconnect_backoff * attempt);
        }
        if session.stream.is_none() {
            match handshake(session.addr, options) {
                Ok((stream, setup)) => {
                    session.stream = Some(stream);
                    session.setup_seconds = setup;
                }
                Err(e) => {
                    info!("coordinator: reconnect to {} failed: {e}", session.addr);
                    continue;
                }
            }
        }
        let stream = session.stream.as_mut().expect("connected");
        match request(stream, &WireFrame::Ping) {
            Ok(WireFrame::Pong) => return true,
            _ => session.stream = None,
        }
    }
    false
}

struct State {
    sched: Scheduler,
    slots: Vec<Option<(Vec<String>, ShardTiming)>>,
}

struct Shared<'a> {
    state: Mutex<State>,
    changed: Condvar,
    job: &'a Job,
    shards: &'a [Shard],
    names: &'a [String],
    started: Instant,
    options: &'a NetOptions,
}

impl Shared<'_> {
    /// Blocks until this worker has a shard, or returns `None` when it
    /// should stop.
    fn take_work(&self, worker: usize) -> Option<usize> {
        let mut st = self.state.lock().unwrap();
        loop {
            if st.sched.is_finished() || st.sched.is_stranded() {
                self.changed.notify_all();
                return None;
            }
            match st.sched.worker_state(worker) {
                WorkerState::Dead | WorkerState::Quarantined => return None,
                _ => {}
            }
            if let Some(shard) = st.sched.assign_to(worker) {
                return Some(shard);
            }
            st = self.changed.wait(st).unwrap();
        }
    }

    fn session(&self, worker: usize, mut session: Session) {
        let mut busy_streak = 0;
        while let Some(shard_id) = self.take_work(worker) {
            let shard = &self.shards[shard_id];
            let dispatched = self.started.elapsed().as_secs_f64();
            let attempt_start = Instant::now();
            let outcome = match session.stream.as_mut() {
                Some(stream) => run_shard(stream, &self.job.job_id, shard),
                None => Outcome::Broken("not connected".into()),
            };
            let wall = attempt_start.elapsed().as_secs_f64();
            let reason = match outcome {
                Outcome::Done {
                    translations,
                    cost_seconds,
                } => {
                    busy_streak = 0;
                    let mut st = self.state.lock().unwrap();
                    let attempts = st.sched.attempts(shard_id) + 1;
                    if st.sched.complete(shard_id, worker) == Completion::Accepted {
                        st.slots[shard_id] = Some((
                            translations,
                            ShardTiming {
                                shard_id,
                                worker: self.names[worker].clone(),
                                words: shard.word_count,
                                dispatch_seconds: dispatched,
                                cost_seconds,
                                wall_seconds: wall,
                                attempts,
                            },
                        ));
                    }
                    self.changed.notify_all();
                    continue;
                }
                Outcome::Busy(reason) if busy_streak < self.options.reconnect_attempts => {
                    busy_streak += 1;
                    info!(
                        "coordinator: {} busy ({reason}), backing off",
                        self.names[worker]
                    );
                    self.state.lock().unwrap().sched.release(shard_id, worker);
                    self.changed.notify_all();
                    thread::sleep(self.options.reconnect_backoff * busy_streak);
                    continue;
                }
                Outcome::Rejected(reason) | Outcome::Busy(reason) => reason,
                Outcome::Broken(reason) => {
                    session.stream = None;
                    reason
                }
            };
            warn!(
                "coordinator: shard {shard_id} failed on {}: {reason}",
                self.names[worker]
            );
            {
                let mut st = self.state.lock().unwrap();
                let _ = st.sched.fail(shard_id, worker, &reason);
                self.changed.notify_all();
                if st.sched.is_finished() {
                    return;
                }
            }
            let healthy = recover(&mut session, self.options);
            let mut st = self.state.lock().unwrap();
            if healthy {
                st.sched.reinstate(worker);
            } else {
                warn!("coordinator: giving up on {}", self.names[worker]);
                st.sched.mark_dead(worker);
            }
            self.changed.notify_all();
        }
    }
}

pub fn run_job(job: &Job) -> Result<JobResult, JobError> {
    run_job_with(job, &NetOptions::default())
}

/// Runs `job` against the live workers named in `job.workers`.
pub fn run_job_with(job: &Job, options: &NetOptions) -> Result<JobResult, JobError> {
    job.validate()?;
    let started = Instant::now();

    let mut sessions = Vec::with_capacity(job.workers.len());
    let mut unreachable = Vec::new();
    for name in &job.workers {
        match resolve(name)
            .and_then(|addr| handshake(addr, options).map(|(s, setup)| (addr, s, setup)))
        {
            Ok((addr, stream, setup_seconds)) => sessions.push(Some(Session {
                addr,
                stream: Some(stream),
                setup_seconds,
            })),
            Err(e) => {
                warn!("coordinator: worker {name} unreachable: {e}");
                unreachable.push(format!("{name}: {e}"));
                sessions.push(None);
            }
        }
    }
    if sessions.iter().all(Option::is_none) {
        return Err(JobError::Connectivity(format!(
            "no reachable workers ({})",
            unreachable.join("; ")
        )));
    }

    let shards = make_shards(&job.source, job.shard_size)?;
    let manifest = ShardManifest::from_shards(&shards);
    let setup_seconds = started.elapsed().as_secs_f64();

    let mut sched = Scheduler::new(shards.len(), job.workers.len(), job.retry_limit);
    for (w, s) in sessions.iter().enumerate() {
        if s.is_none() {
            sched.mark_dead(w);
        }
    }
    let worker_setup_seconds = job
        .workers
        .iter()
        .zip(&sessions)
        .map(|(name, s)| (name.clone(), s.as_ref().map_or(0.0, |s| s.setup_seconds)))
        .collect();

    let shared = Shared {
        state: Mutex::new(State {
            sched,
            slots: vec![None; shards.len()],
        }),
        changed: Condvar::new(),
        job,
        shards: &shards,
        names: &job.workers,
        started,
        options,
    };
    thread::scope(|scope| {
        for (w, session) in sessions.into_iter().enumerate() {
            if let Some(session) = session {
                let shared = &shared;
                scope.spawn(move || shared.session(w, session));
            }
        }
    });

    let State { sched, slots } = shared.state.into_inner().unwrap();
    if let Some(exhausted) = sched.exhausted() {
        return Err(JobError::ShardFailed {
            shard_id: exhausted.shard_id,
            reasons: exhausted.reasons.clone(),
        });
    }
    if !sched.is_complete() {
        return Err(JobError::Connectivity(format!(
            "all workers lost with {} shard(s) unfinished",
            sched.pending().len()
        )));
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
        setup_seconds,
        worker_setup_seconds,
        total_wall_seconds: started.elapsed().as_secs_f64(),
        failures: failure_records(&sched, &job.workers),
        simulated: false,
    })
}
