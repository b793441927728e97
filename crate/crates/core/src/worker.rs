//! Worker node: hosts one engine behind the wire protocol.
//!
//! Connections are accepted concurrently, but every TRANSLATE goes through a
//! single FIFO queue drained by one engine thread, so requests are serviced in
//! arrival order with exactly one request inside the engine at a time.
//!
//! In the `service` architecture one engine lives for the whole worker
//! lifetime. In the `simple` architecture a fresh engine is created for each
//! request and its setup cost is added to that request's RESULT.

use std::collections::VecDeque;
use std::fmt;
use std::io;
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Sentence;
use crate::engines::{Engine, EngineError, EngineFactory, EngineSpec};
use crate::protocol::{read_frame, write_frame, ProtocolError, WireFrame, PROTOCOL_VERSION};

pub const DEFAULT_MAX_QUEUE: usize = 64;

const ACCEPT_POLL: Duration = Duration::from_millis(5);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    Simple,
    Service,
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Architecture::Simple => "simple",
            Architecture::Service => "service",
        })
    }
}

impl FromStr for Architecture {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "simple" => Ok(Architecture::Simple),
            "service" => Ok(Architecture::Service),
            other => Err(format!(
                "unknown architecture '{other}' (expected simple or service)"
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct WorkerConfig {
    pub listen_address: String,
    pub engine_spec: EngineSpec,
    pub architecture: Architecture,
    pub max_queue: usize,
}

impl WorkerConfig {
    pub fn new(listen_address: &str, engine_spec: EngineSpec, architecture: Architecture) -> Self {
        WorkerConfig {
            listen_address: listen_address.into(),
            engine_spec,
            architecture,
            max_queue: DEFAULT_MAX_QUEUE,
        }
    }
}

#[derive(Debug, Error)]
pub enum WorkerError {
    #[error("cannot listen on {address}: {source}")]
    Bind { address: String, source: io::Error },
    #[error("invalid worker config: {0}")]
    Config(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WorkerStats {
    pub requests_served: u64,
    pub engines_created: u64,
}

/// Translates one shard. Sentence failures abort the shard with an ERROR
/// naming the document index of the failing sentence. `setup_seconds` is
/// added to the reported cost (engine created for this request).
pub fn handle_translate_request(
    engine: &mut dyn Engine,
    frame: &WireFrame,
    setup_seconds: f64,
    seq: u64,
) -> WireFrame {
    let WireFrame::Translate {
        job_id,
        shard_id,
        sentences,
    } = frame
    else {
        return WireFrame::Error {
            shard_id: None,
            message: format!("expected TRANSLATE, got {}", frame.type_name()),
            retry_later: false,
        };
    };
    let mut translations = Vec::with_capacity(sentences.len());
    let mut cost_seconds = setup_seconds;
    for (offset, text) in sentences.iter().enumerate() {
        match engine.translate_sentence(&Sentence::new(offset, text)) {
            Ok(t) => {
                cost_seconds += t.cost_seconds;
                translations.push(t.sentence.text().to_owned());
            }
            Err(e) => {
                return WireFrame::Error {
                    shard_id: Some(*shard_id),
                    message: format!("sentence {offset} of shard {shard_id}: {e}"),
                    retry_later: false,
                }
            }
        }
    }
    WireFrame::Result {
        job_id: job_id.clone(),
        shard_id: *shard_id,
        translations,
        cost_seconds,
        seq,
    }
}

type Reply = Arc<Mutex<TcpStream>>;

struct Request {
    seq: u64,
    frame: WireFrame,
    reply: Reply,
}

#[derive(Default)]
struct QueueState {
    items: VecDeque<Request>,
    next_seq: u64,
    shutting_down: bool,
}

struct Shared {
    queue: Mutex<QueueState>,
    ready: Condvar,
    killed: AtomicBool,
    connections: Mutex<Vec<TcpStream>>,
    max_queue: usize,
    crash_after: Option<u64>,
    served: AtomicU64,
}

impl Shared {
    fn request_shutdown(&self) {
        self.queue.lock().unwrap().shutting_down = true;
        self.ready.notify_all();
    }

    fn kill(&self) {
        self.killed.store(true, Ordering::SeqCst);
        self.request_shutdown();
        self.close_connections();
    }

    fn close_connections(&self) {
        for conn in self.connections.lock().unwrap().drain(..) {
            let _ = conn.shutdown(Shutdown::Both);
        }
    }

    fn stopping(&self) -> bool {
        self.killed.load(Ordering::SeqCst) || self.queue.lock().unwrap().shutting_down
    }
}

fn send(reply: &Reply, frame: &WireFrame) -> Result<(), ProtocolError> {
    let mut stream = reply.lock().unwrap();
    write_frame(&mut *stream, frame)
}

pub struct Worker {
    listener: TcpListener,
    factory: Arc<dyn EngineFactory>,
    architecture: Architecture,
    engine: Option<Box<dyn Engine>>,
    setup_seconds: f64,
    shared: Arc<Shared>,
}

impl Worker {
    pub fn bind(config: WorkerConfig) -> Result<Self, WorkerError> {
        let factory: Arc<dyn EngineFactory> = Arc::new(config.engine_spec);
        Worker::with_factory(
            &config.listen_address,
            factory,
            config.architecture,
            config.max_queue,
        )
    }

    /// Binds a worker around any engine factory. In the service architecture
    /// the engine is created here, paying its setup once.
    pub fn with_factory(
        listen_address: &str,
        factory: Arc<dyn EngineFactory>,
        architecture: Architecture,
        max_queue: usize,
    ) -> Result<Self, WorkerError> {
        if max_queue == 0 {
            return Err(WorkerError::Config("max_queue must be positive".into()));
        }
        let listener = TcpListener::bind(listen_address).map_err(|source| WorkerError::Bind {
            address: listen_address.into(),
            source,
        })?;
        let (engine, setup_seconds) = match architecture {
            Architecture::Service => {
                let engine = factory.create()?;
                let setup = engine.setup_seconds();
                (Some(engine), setup)
            }
            Architecture::Simple => (None, 0.0),
        };
        Ok(Worker {
            listener,
            factory,
            architecture,
            engine,
            setup_seconds,
            shared: Arc::new(Shared {
                queue: Mutex::new(QueueState::default()),
                ready: Condvar::new(),
                killed: AtomicBool::new(false),
                connections: Mutex::new(Vec::new()),
                max_queue,
                crash_after: None,
                served: AtomicU64::new(0),
            }),
        })
    }

    /// Fault injection: after `served` results the worker drops every
    /// connection and stops, as if the node had crashed.
    pub fn crash_after(mut self, served: u64) -> Self {
        Arc::get_mut(&mut self.shared)
            .expect("worker not yet serving")
            .crash_after = Some(served);
        self
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Runs in a background thread.
    pub fn spawn(self) -> io::Result<WorkerHandle> {
        let addr = self.local_addr()?;
        let shared = Arc::clone(&self.shared);
        let thread = thread::Builder::new()
            .name(format!("worker-{addr}"))
            .spawn(move || self.serve())?;
        Ok(WorkerHandle {
            addr,
            shared,
            thread: Some(thread),
        })
    }

    /// Serves until a SHUTDOWN frame arrives and the queue has drained, or
    /// until the worker is killed.
    pub fn serve(self) -> Result<WorkerStats, WorkerError> {
        let Worker {
            listener,
            factory,
            architecture,
            engine,
            setup_seconds,
            shared,
        } = self;
        let hello = WireFrame::Hello {
            protocol_version: PROTOCOL_VERSION.into(),
            engine_kind: Some(factory.kind().as_str().into()),
            architecture: Some(architecture),
            setup_seconds: Some(setup_seconds),
        };

        let engine_thread = {
            let shared = Arc::clone(&shared);
            thread::Builder::new()
                .name("worker-engine".into())
                .spawn(move || run_engine(shared, factory, engine))?
        };

        listener.set_nonblocking(true)?;
        while !shared.stopping() {
            match listener.accept() {
                Ok((stream, peer)) => {
                    debug!("worker: connection from {peer}");
                    stream.set_nonblocking(false)?;
                    let _ = stream.set_nodelay(true);
                    match stream.try_clone() {
                        Ok(registered) => shared.connections.lock().unwrap().push(registered),
                        Err(e) => {
                            warn!("worker: dropping connection from {peer}: {e}");
                            continue;
                        }
                    }
                    let shared = Arc::clone(&shared);
                    let hello = hello.clone();
                    thread::spawn(move || {
                        if let Err(e) = run_connection(stream, &shared, &hello) {
                            debug!("worker: connection from {peer} closed: {e}");
                        }
                        // Drop the registry's clone; the socket closes once queued replies are sent.
                        shared
                            .connections
                            .lock()
                            .unwrap()
                            .retain(|c| c.peer_addr().ok() != Some(peer));
                    });
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(ACCEPT_POLL),
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => {
                    shared.kill();
                    let _ = engine_thread.join();
                    return Err(e.into());
                }
            }
        }
        drop(listener);
        let stats = engine_thread.join().expect("engine thread panicked");
        shared.close_connections();
        Ok(stats)
    }
}

fn run_connection(
    stream: TcpStream,
    shared: &Shared,
    hello: &WireFrame,
) -> Result<(), ProtocolError> {
    let mut reader = stream.try_clone()?;
    let reply: Reply = Arc::new(Mutex::new(stream));
    loop {
        let frame = match read_frame(&mut reader) {
            Ok(Some(frame)) => frame,
            Ok(None) => return Ok(()),
            Err(ProtocolError::Io(e)) => return Err(ProtocolError::Io(e)),
            Err(e) => {
                // The stream position is unknown after a bad frame; report and hang up.
                let _ = send(
                    &reply,
                    &WireFrame::Error {
                        shard_id: None,
                        message: e.to_string(),
                        retry_later: false,
                    },
                );
                return Err(e);
            }
        };
        match frame {
            WireFrame::Hello {
                protocol_version, ..
            } => {
                if protocol_version != PROTOCOL_VERSION {
                    send(
                        &reply,
                        &WireFrame::Error {
                            shard_id: None,
                            message: format!(
                                "unsupported protocol version '{protocol_version}', worker speaks '{PROTOCOL_VERSION}'"
                            ),
                            retry_later: false,
                        },
                    )?;
                    return Ok(());
                }
                send(&reply, hello)?;
            }
            WireFrame::Ping => send(&reply, &WireFrame::Pong)?,
            WireFrame::Shutdown => shared.request_shutdown(),
            WireFrame::Translate { shard_id, .. } => {
                let rejection = {
                    let mut q = shared.queue.lock().unwrap();
                    if q.shutting_down {
                        Some("worker is shutting down")
                    } else if q.items.len() >= shared.max_queue {
                        Some("worker queue is full, retry later")
                    } else {
                        let seq = q.next_seq;
                        q.next_seq += 1;
                        q.items.push_back(Request {
                            seq,
                            frame,
                            reply: Arc::clone(&reply),
                        });
                        None
                    }
                };
                match rejection {
                    None => shared.ready.notify_one(),
                    Some(message) => send(
                        &reply,
                        &WireFrame::Error {
                            shard_id: Some(shard_id),
                            message: message.into(),
                            retry_later: true,
                        },
                    )?,
                }
            }
            other => send(
                &reply,
                &WireFrame::Error {
                    shard_id: None,
                    message: format!("unexpected {} frame", other.type_name()),
                    retry_later: false,
                },
            )?,
        }
    }
}

fn run_engine(
    shared: Arc<Shared>,
    factory: Arc<dyn EngineFactory>,
    mut engine: Option<Box<dyn Engine>>,
) -> WorkerStats {
    let mut stats = WorkerStats::default();
    loop {
        let request = {
            let mut q = shared.queue.lock().unwrap();
            loop {
                if shared.killed.load(Ordering::SeqCst) {
                    return stats;
                }
                if let Some(r) = q.items.pop_front() {
                    break r;
                }
                if q.shutting_down {
                    return stats;
                }
                q = shared.ready.wait(q).unwrap();
            }
        };

        if shared.crash_after == Some(shared.served.load(Ordering::SeqCst)) {
            warn!(
                "worker: injected crash after {} results",
                stats.requests_served
            );
            shared.kill();
            return stats;
        }

        let response = match engine.as_deref_mut() {
            Some(persistent) => {
                handle_translate_request(persistent, &request.frame, 0.0, request.seq)
            }
            None => match factory.create() {
                Ok(mut fresh) => {
                    stats.engines_created += 1;
                    let setup = fresh.setup_seconds();
                    handle_translate_request(fresh.as_mut(), &request.frame, setup, request.seq)
                }
                Err(e) => WireFrame::Error {
                    shard_id: match &request.frame {
                        WireFrame::Translate { shard_id, .. } => Some(*shard_id),
                        _ => None,
                    },
                    message: format!("engine creation failed: {e}"),
                    retry_later: false,
                },
            },
        };
        if let Err(e) = send(&request.reply, &response) {
            debug!(
                "worker: could not deliver response for request {}: {e}",
                request.seq
            );
        }
        shared.served.fetch_add(1, Ordering::SeqCst);
        stats.requests_served += 1;
    }
}

/// Handle to a worker running in a background thread.
pub struct WorkerHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    thread: Option<JoinHandle<Result<WorkerStats, WorkerError>>>,
}

impl WorkerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Same as receiving SHUTDOWN: drain, then exit.
    pub fn shutdown(&self) {
        self.shared.request_shutdown();
    }

    /// Abrupt stop: queued work is dropped and connections are reset.
    pub fn kill(&self) {
        self.shared.kill();
    }

    pub fn join(mut self) -> Result<WorkerStats, WorkerError> {
        self.thread
            .take()
            .expect("joined once")
            .join()
            .expect("worker thread panicked")
    }
}

impl Drop for WorkerHandle {
    fn drop(&mut self) {
        if let Some(thread) = self.thread.take() {
            self.shared.kill();
            let _ = thread.join();
        }
    }
}

/// Binds per `config` and serves until shut down.
pub fn worker_serve(config: WorkerConfig) -> Result<WorkerStats, WorkerError> {
    Worker::bind(config)?.serve()
}
