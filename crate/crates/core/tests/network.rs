//! Worker and coordinator behaviour over real loopback sockets.

use std::io::Write;
use std::net::TcpStream;
use std::sync::Arc;
use std::time::Duration;

use shardmt_core::coordinator::{run_job, run_job_with, NetOptions};
use shardmt_core::corpus::generate_artificial;
use shardmt_core::engines::{translate_document, CostModel, EngineFactory};
use shardmt_core::protocol::{read_frame, write_frame, WireFrame};
use shardmt_core::{Architecture, Document, EngineSpec, Job, JobError, Worker, WorkerConfig};

fn start(
    spec: EngineSpec,
    architecture: Architecture,
    max_queue: usize,
) -> shardmt_core::WorkerHandle {
    let mut config = WorkerConfig::new("127.0.0.1:0", spec, architecture);
    config.max_queue = max_queue;
    Worker::bind(config).unwrap().spawn().unwrap()
}

fn connect(worker: &shardmt_core::WorkerHandle) -> TcpStream {
    let stream = TcpStream::connect(worker.addr()).unwrap();
    stream
        .set_read_timeout(Some(Duration::from_secs(20)))
        .unwrap();
    stream
}

fn call(stream: &mut TcpStream, frame: &WireFrame) -> WireFrame {
    write_frame(stream, frame).unwrap();
    read_frame(stream).unwrap().expect("worker hung up")
}

fn translate(shard_id: u64, sentences: &[&str]) -> WireFrame {
    WireFrame::Translate {
        job_id: "t".into(),
        shard_id,
        sentences: sentences.iter().map(|s| s.to_string()).collect(),
    }
}

fn identity(setup: f64, per_word: f64) -> EngineSpec {
    EngineSpec::delay_model(CostModel::new(setup, per_word).simulated(true))
}

#[test]
fn handshake_and_ping() {
    let worker = start(EngineSpec::rbmt_builtin(), Architecture::Service, 8);
    let mut s = connect(&worker);
    match call(&mut s, &WireFrame::hello()) {
        WireFrame::Hello {
            protocol_version,
            engine_kind,
            architecture,
            ..
        } => {
            assert_eq!(protocol_version, "1");
            assert_eq!(engine_kind.as_deref(), Some("rbmt"));
            assert_eq!(architecture, Some(Architecture::Service));
        }
        other => panic!("expected HELLO, got {other:?}"),
    }
    assert_eq!(call(&mut s, &WireFrame::Ping), WireFrame::Pong);
}

#[test]
fn protocol_version_mismatch_is_refused() {
    let worker = start(identity(0.0, 0.0), Architecture::Service, 8);
    let mut s = connect(&worker);
    let hello = WireFrame::Hello {
        protocol_version: "99".into(),
        engine_kind: None,
        architecture: None,
        setup_seconds: None,
    };
    match call(&mut s, &hello) {
        WireFrame::Error { message, .. } => assert!(message.contains("99"), "{message}"),
        other => panic!("expected ERROR, got {other:?}"),
    }
    assert!(read_frame(&mut s).unwrap().is_none());
}

#[test]
fn malformed_frame_gets_error_then_close() {
    let worker = start(identity(0.0, 0.0), Architecture::Service, 8);
    let mut s = connect(&worker);
    let payload = br#"{"type":"BOGUS"}"#;
    s.write_all(&(payload.len() as u32).to_be_bytes()).unwrap();
    s.write_all(payload).unwrap();
    assert!(matches!(
        read_frame(&mut s).unwrap(),
        Some(WireFrame::Error { shard_id: None, .. })
    ));
    assert!(read_frame(&mut s).unwrap().is_none());

    // The worker itself keeps serving.
    let mut s = connect(&worker);
    assert_eq!(call(&mut s, &WireFrame::Ping), WireFrame::Pong);
}

#[test]
fn pipelined_requests_are_answered_in_arrival_order() {
    let worker = start(identity(0.0, 1e-3), Architecture::Service, 64);
    let mut s = connect(&worker);
    for id in 0..30 {
        write_frame(&mut s, &translate(id, &["a b", "c"])).unwrap();
    }
    let mut last_seq = None;
    for id in 0..30 {
        match read_frame(&mut s).unwrap().unwrap() {
            WireFrame::Result {
                shard_id,
                translations,
                seq,
                ..
            } => {
                assert_eq!(shard_id, id);
                assert_eq!(translations, ["a b", "c"]);
                if let Some(prev) = last_seq {
                    assert!(seq > prev);
                }
                last_seq = Some(seq);
            }
            other => panic!("expected RESULT, got {other:?}"),
        }
    }
}

#[test]
fn architectures_agree_on_output_and_differ_on_setup() {
    let text = ["the house is big", "I can see the houses", "*xyzzy stays"];
    let rbmt = |arch| {
        let worker = start(EngineSpec::rbmt_builtin(), arch, 8);
        let mut s = connect(&worker);
        match call(&mut s, &translate(0, &text)) {
            WireFrame::Result { translations, .. } => translations,
            other => panic!("{other:?}"),
        }
    };
    assert_eq!(rbmt(Architecture::Simple), rbmt(Architecture::Service));

    let cost = |arch| {
        let worker = start(identity(0.5, 0.01), arch, 8);
        let mut s = connect(&worker);
        (0..3)
            .map(|id| match call(&mut s, &translate(id, &["one two"])) {
                WireFrame::Result { cost_seconds, .. } => cost_seconds,
                other => panic!("{other:?}"),
            })
            .collect::<Vec<_>>()
    };
    for c in cost(Architecture::Simple) {
        assert!((c - 0.52).abs() < 1e-9, "{c}");
    }
    for c in cost(Architecture::Service) {
        assert!((c - 0.02).abs() < 1e-9, "{c}");
    }
}

#[test]
fn full_queue_asks_to_retry_later() {
    // Real sleeping keeps the engine busy while frames pile up.
    let spec = EngineSpec::delay_model(CostModel::new(0.0, 0.05));
    let worker = start(spec, Architecture::Service, 1);
    let mut s = connect(&worker);
    for id in 0..6 {
        write_frame(&mut s, &translate(id, &["w"])).unwrap();
    }
    let (mut results, mut retry) = (0, 0);
    for _ in 0..6 {
        match read_frame(&mut s).unwrap().unwrap() {
            WireFrame::Result { .. } => results += 1,
            WireFrame::Error {
                retry_later: true,
                shard_id: Some(_),
                ..
            } => retry += 1,
            other => panic!("{other:?}"),
        }
    }
    assert_eq!(results + retry, 6);
    assert!(retry >= 1, "no request was turned away");
    assert!(results >= 1);
}

#[test]
fn shutdown_drains_queue_before_exit() {
    let spec = EngineSpec::delay_model(CostModel::new(0.0, 0.01));
    let worker = start(spec, Architecture::Service, 16);
    let mut s = connect(&worker);
    for id in 0..4 {
        write_frame(&mut s, &translate(id, &["a b c"])).unwrap();
    }
    write_frame(&mut s, &WireFrame::Shutdown).unwrap();
    for id in 0..4 {
        match read_frame(&mut s).unwrap().unwrap() {
            WireFrame::Result { shard_id, .. } => assert_eq!(shard_id, id),
            other => panic!("{other:?}"),
        }
    }
    assert!(read_frame(&mut s).unwrap().is_none());
    assert_eq!(worker.join().unwrap().requests_served, 4);
}

#[test]
fn simple_architecture_builds_one_engine_per_request() {
    let worker = start(identity(0.0, 0.0), Architecture::Simple, 8);
    let mut s = connect(&worker);
    for id in 0..5 {
        call(&mut s, &translate(id, &["x"]));
    }
    worker.shutdown();
    let stats = worker.join().unwrap();
    assert_eq!(stats.requests_served, 5);
    assert_eq!(stats.engines_created, 5);
}

fn corpus(sentences: usize) -> Document {
    generate_artificial(sentences, "the house is big and I can see the houses").unwrap()
}

fn sequential(doc: &Document) -> Document {
    let mut engine = EngineSpec::rbmt_builtin().create().unwrap();
    translate_document(engine.as_mut(), doc).unwrap().0
}

#[test]
fn job_survives_a_crashing_worker() {
    let doc = corpus(3_000);
    let crashing = Worker::bind(WorkerConfig::new(
        "127.0.0.1:0",
        EngineSpec::rbmt_builtin(),
        Architecture::Service,
    ))
    .unwrap()
    .crash_after(1)
    .spawn()
    .unwrap();
    let healthy: Vec<_> = (0..2)
        .map(|_| start(EngineSpec::rbmt_builtin(), Architecture::Simple, 8))
        .collect();
    let mut addrs = vec![crashing.addr().to_string()];
    addrs.extend(healthy.iter().map(|w| w.addr().to_string()));

    let job = Job::new("crash", doc.clone(), addrs).with_shard_size(100);
    let options = NetOptions {
        reconnect_attempts: 1,
        reconnect_backoff: Duration::from_millis(10),
        ..NetOptions::default()
    };
    let result = run_job_with(&job, &options).unwrap();
    assert_eq!(result.output, sequential(&doc));
    assert_eq!(result.timing.len(), 30);
    assert!(!result.failures.is_empty());
    assert!(result.shards_served_by(&crashing.addr().to_string()) <= 1);
}

#[test]
fn failing_engine_exhausts_retries() {
    // `false` exits at once, so every translation attempt fails.
    let spec = EngineSpec::external_command("false", &[]);
    let worker = start(spec, Architecture::Simple, 8);
    let job = Job::new("fail", corpus(10), vec![worker.addr().to_string()]).with_retry_limit(2);
    match run_job(&job) {
        Err(JobError::ShardFailed { .. }) => {}
        other => panic!("expected ShardFailed, got {other:?}"),
    }
}

#[test]
fn unreachable_pool_is_a_connectivity_error() {
    let job = Job::new("none", corpus(10), vec!["127.0.0.1:1".into()]);
    assert!(matches!(run_job(&job), Err(JobError::Connectivity(_))));
}

#[test]
fn factory_trait_is_usable_directly() {
    let spec: Arc<dyn EngineFactory> = Arc::new(identity(0.0, 0.0));
    let worker = Worker::with_factory("127.0.0.1:0", spec, Architecture::Service, 4)
        .unwrap()
        .spawn()
        .unwrap();
    let mut s = connect(&worker);
    assert!(matches!(
        call(&mut s, &translate(7, &["keep"])),
        WireFrame::Result { shard_id: 7, .. }
    ));
}

/// Hand-rolled worker that turns the first `busy` TRANSLATEs away with
/// `retry_later` and echoes the rest.
fn fake_busy_worker(busy: usize) -> String {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    std::thread::spawn(move || {
        let mut turned_away = 0;
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { return };
            while let Ok(Some(frame)) = read_frame(&mut stream) {
                let reply = match frame {
                    WireFrame::Hello { .. } => WireFrame::hello(),
                    WireFrame::Ping => WireFrame::Pong,
                    WireFrame::Translate { shard_id, .. } if turned_away < busy => {
                        turned_away += 1;
                        WireFrame::Error {
                            shard_id: Some(shard_id),
                            message: "queue full".into(),
                            retry_later: true,
                        }
                    }
                    WireFrame::Translate {
                        job_id,
                        shard_id,
                        sentences,
                    } => WireFrame::Result {
                        job_id,
                        shard_id,
                        translations: sentences,
                        cost_seconds: 0.0,
                        seq: 0,
                    },
                    _ => return,
                };
                if write_frame(&mut stream, &reply).is_err() {
                    break;
                }
            }
        }
    });
    addr
}

#[test]
fn retry_later_does_not_spend_the_retry_budget() {
    let doc = corpus(5);
    let job = Job::new("busy", doc.clone(), vec![fake_busy_worker(2)]).with_retry_limit(0);
    let options = NetOptions {
        reconnect_backoff: Duration::from_millis(5),
        ..NetOptions::default()
    };
    let result = run_job_with(&job, &options).unwrap();
    assert_eq!(result.output, doc);
    assert!(result.failures.is_empty());
}

#[test]
fn endless_retry_later_eventually_fails_the_shard() {
    let job = Job::new("busy", corpus(5), vec![fake_busy_worker(usize::MAX)]).with_retry_limit(1);
    let options = NetOptions {
        reconnect_attempts: 2,
        reconnect_backoff: Duration::from_millis(5),
        ..NetOptions::default()
    };
    assert!(matches!(
        run_job_with(&job, &options),
        Err(JobError::ShardFailed { .. })
    ));
}
