//! Sequential runs and node-count sweeps.

use std::fmt;
use std::time::Instant;

use log::info;
use serde::Serialize;

use super::metrics::{compute_throughput, RunContext, ThroughputReport};
use crate::coordinator::{
    run_job, simulate_job, Job, JobError, JobResult, SimCluster, DEFAULT_RETRY_LIMIT,
};
use crate::corpus::{generate_artificial, Document, DEFAULT_BASE_SENTENCE, DEFAULT_SHARD_SIZE};
use crate::engines::{engine_create, translate_document, EngineError, EngineSpec};
use crate::worker::{Architecture, Worker, WorkerConfig, WorkerHandle};

#[derive(Debug, Clone)]
pub struct ScalingConfig {
    pub engine: EngineSpec,
    pub words_total: usize,
    pub node_counts: Vec<usize>,
    pub shard_size: usize,
    /// Virtual clocks and in-process workers; otherwise local TCP workers.
    pub simulate: bool,
    pub architecture: Architecture,
    /// Fixed cost charged once per job before any shard runs (simulate only).
    pub job_overhead_seconds: f64,
    pub base_sentence: String,
    pub retry_limit: u32,
}

impl ScalingConfig {
    pub fn new(engine: EngineSpec, words_total: usize, node_counts: Vec<usize>) -> Self {
        ScalingConfig {
            engine,
            words_total,
            node_counts,
            shard_size: DEFAULT_SHARD_SIZE,
            simulate: true,
            architecture: Architecture::Service,
            job_overhead_seconds: 0.0,
            base_sentence: DEFAULT_BASE_SENTENCE.into(),
            retry_limit: DEFAULT_RETRY_LIMIT,
        }
    }

    pub fn with_shard_size(mut self, shard_size: usize) -> Self {
        self.shard_size = shard_size;
        self
    }

    pub fn with_simulate(mut self, simulate: bool) -> Self {
        self.simulate = simulate;
        self
    }

    pub fn with_architecture(mut self, architecture: Architecture) -> Self {
        self.architecture = architecture;
        self
    }

    pub fn with_overhead(mut self, seconds: f64) -> Self {
        self.job_overhead_seconds = seconds;
        self
    }

    pub fn with_base_sentence(mut self, base: &str) -> Self {
        self.base_sentence = base.into();
        self
    }

    /// Copies of the base sentence covering at least `words_total` words.
    pub fn corpus(&self) -> Result<Document, JobError> {
        let per_sentence = self.base_sentence.split_whitespace().count().max(1);
        let count = self.words_total.div_ceil(per_sentence).max(1);
        Ok(generate_artificial(count, &self.base_sentence)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub nodes: usize,
    pub report: ThroughputReport,
    /// `T_k / (k * T_1)`.
    pub efficiency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    /// Single-node run on the same input, used as `T_1`.
    pub baseline: ThroughputReport,
    pub rows: Vec<ScalingRow>,
}

impl ScalingReport {
    pub fn row(&self, nodes: usize) -> Option<&ScalingRow> {
        self.rows.iter().find(|r| r.nodes == nodes)
    }
}

/// A sweep that stopped on a failed job; rows finished before it are kept.
#[derive(Debug)]
pub struct ScalingFailure {
    pub partial: Option<Box<ScalingReport>>,
    pub nodes: usize,
    pub error: JobError,
}

impl fmt::Display for ScalingFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let done = self.partial.as_ref().map_or(0, |p| p.rows.len());
        write!(
            f,
            "scaling run with {} node(s) failed after {done} completed row(s): {}",
            self.nodes, self.error
        )
    }
}

impl std::error::Error for ScalingFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

fn job_report(result: &JobResult, context: RunContext) -> Result<ThroughputReport, JobError> {
    let words = result.output.total_words() as u64;
    let setup = result.setup_seconds.min(result.total_wall_seconds);
    let translation = (result.total_wall_seconds - setup).max(0.0);
    let report = compute_throughput(words, setup, translation)
        .map_err(|e| JobError::InvalidJob(e.to_string()))?;
    Ok(report.with_context(context))
}

struct LocalCluster {
    handles: Vec<WorkerHandle>,
}

impl LocalCluster {
    fn start(config: &ScalingConfig, nodes: usize) -> Result<Self, JobError> {
        let mut handles = Vec::with_capacity(nodes);
        for _ in 0..nodes {
            let worker = Worker::bind(WorkerConfig::new(
                "127.0.0.1:0",
                config.engine.clone(),
                config.architecture,
            ))
            .map_err(|e| JobError::Connectivity(e.to_string()))?;
            handles.push(
                worker
                    .spawn()
                    .map_err(|e| JobError::Connectivity(e.to_string()))?,
            );
        }
        Ok(LocalCluster { handles })
    }

    fn addresses(&self) -> Vec<String> {
        self.handles.iter().map(|h| h.addr().to_string()).collect()
    }
}

impl Drop for LocalCluster {
    fn drop(&mut self) {
        for h in &self.handles {
            h.shutdown();
        }
    }
}

fn run_once(
    config: &ScalingConfig,
    doc: &Document,
    nodes: usize,
) -> Result<ThroughputReport, JobError> {
    let job_id = format!("scaling-{nodes}");
    let system = format!("mr-{}-{}", config.architecture, config.engine.kind);
    let mut context = RunContext::new(&system, doc.len(), nodes);
    context.engine = Some(config.engine.kind.to_string());
    context.shard_size = Some(config.shard_size);
    context.architecture = Some(config.architecture);
    context.simulated = config.simulate;

    let result = if config.simulate {
        let job = Job::simulated(&job_id, doc.clone(), nodes)
            .with_shard_size(config.shard_size)
            .with_retry_limit(config.retry_limit);
        let cluster = SimCluster::new(config.engine.clone(), config.architecture)
            .with_overhead(config.job_overhead_seconds);
        simulate_job(&job, &cluster)?
    } else {
        let cluster = LocalCluster::start(config, nodes)?;
        let job = Job::new(&job_id, doc.clone(), cluster.addresses())
            .with_shard_size(config.shard_size)
            .with_retry_limit(config.retry_limit);
        run_job(&job)?
    };
    info!(
        "bench: {nodes} node(s): {} words in {:.3} s",
        result.output.total_words(),
        result.total_wall_seconds
    );
    job_report(&result, context)
}

/// One job per node count on the same input, plus a single-node baseline.
pub fn run_scaling_experiment(config: &ScalingConfig) -> Result<ScalingReport, ScalingFailure> {
    let fail = |partial, nodes, error| ScalingFailure {
        partial,
        nodes,
        error,
    };
    if let Some(&bad) = config.node_counts.iter().find(|&&k| k == 0) {
        return Err(fail(
            None,
            bad,
            JobError::InvalidJob("node counts must be at least 1".into()),
        ));
    }
    let doc = config.corpus().map_err(|e| fail(None, 1, e))?;
    let baseline = run_once(config, &doc, 1).map_err(|e| fail(None, 1, e))?;
    let mut report = ScalingReport {
        baseline,
        rows: Vec::with_capacity(config.node_counts.len()),
    };
    for &nodes in &config.node_counts {
        let r = if nodes == 1 {
            Ok(report.baseline.clone())
        } else {
            run_once(config, &doc, nodes)
        };
        match r {
            Ok(r) => {
                let efficiency = if report.baseline.throughput > 0.0 {
                    r.throughput / (nodes as f64 * report.baseline.throughput)
                } else {
                    0.0
                };
                report.rows.push(ScalingRow {
                    nodes,
                    report: r,
                    efficiency,
                });
            }
            Err(error) => return Err(fail(Some(Box::new(report)), nodes, error)),
        }
    }
    Ok(report)
}

/// Translates `doc` on one engine instance, counting its setup.
///
/// Simulated engines report the cost they charged; otherwise translation
/// time is measured on the wall clock.
pub fn run_sequential(
    spec: &EngineSpec,
    doc: &Document,
    system: &str,
) -> Result<(Document, ThroughputReport), EngineError> {
    let started = Instant::now();
    let mut engine = engine_create(spec)?;
    let setup_wall = started.elapsed().as_secs_f64();
    let translate_start = Instant::now();
    let (output, charged) = translate_document(engine.as_mut(), doc)?;
    let translate_wall = translate_start.elapsed().as_secs_f64();

    let (setup, translation) = if spec.simulate() {
        (engine.setup_seconds(), charged)
    } else {
        (setup_wall, translate_wall)
    };
    let report = compute_throughput(doc.total_words() as u64, setup, translation)
        .map_err(|e| EngineError::InvalidInput(e.to_string()))?;
    let mut context = RunContext::new(system, doc.len(), 1);
    context.engine = Some(spec.kind.to_string());
    context.simulated = spec.simulate();
    Ok((output, report.with_context(context)))
}

/// Sequential runs over artificial corpora of the given sentence counts.
pub fn run_sequential_sweep(
    spec: &EngineSpec,
    sentence_counts: &[usize],
    base_sentence: &str,
    system: &str,
) -> Result<Vec<ThroughputReport>, EngineError> {
    sentence_counts
        .iter()
        .map(|&count| {
            let doc = generate_artificial(count, base_sentence)
                .map_err(|e| EngineError::InvalidInput(e.to_string()))?;
            run_sequential(spec, &doc, system).map(|(_, r)| r)
        })
        .collect()
}
