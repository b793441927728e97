//! Batch machine translation over map/reduce.
//!
//! Documents are segmented into sentences, grouped into shards, translated
//! on workers and reassembled in order. The [`bench`] module measures
//! throughput and fits cost models to the results.

pub mod bench;
pub mod coordinator;
pub mod corpus;
pub mod engines;
pub mod protocol;
pub mod worker;

pub use bench::{BenchError, LinearCostModel, ScalingReport, SpeedupReport, ThroughputReport};
pub use coordinator::{run_job, simulate_job, Job, JobError, JobResult, SimCluster};
pub use corpus::{CorpusError, Document, Sentence, Shard, ShardManifest};
pub use engines::{CostModel, Engine, EngineError, EngineFactory, EngineKind, EngineSpec};
pub use protocol::{ProtocolError, WireFrame};
pub use worker::{Architecture, Worker, WorkerConfig, WorkerError, WorkerHandle};
