use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use shardmt_bench::corpus;
use shardmt_core::corpus::make_shards;
use shardmt_core::engines::{translate_document, CostModel, EngineFactory};
use shardmt_core::protocol::{decode_frame, encode_frame, WireFrame};
use shardmt_core::{simulate_job, Architecture, EngineSpec, Job, SimCluster};

fn rbmt_translation(c: &mut Criterion) {
    let mut group = c.benchmark_group("rbmt");
    let mut engine = EngineSpec::rbmt_builtin().create().unwrap();
    for sentences in [100, 1_000] {
        let doc = corpus(sentences);
        group.throughput(Throughput::Elements(doc.total_words() as u64));
        group.bench_with_input(BenchmarkId::from_parameter(sentences), &doc, |b, doc| {
            b.iter(|| translate_document(engine.as_mut(), black_box(doc)).unwrap())
        });
    }
    group.finish();
}

fn frame_codec(c: &mut Criterion) {
    let doc = corpus(1_000);
    let frame = WireFrame::Translate {
        job_id: "bench".into(),
        shard_id: 0,
        sentences: doc
            .sentences()
            .iter()
            .map(|s| s.text().to_owned())
            .collect(),
    };
    let bytes = encode_frame(&frame).unwrap();
    let mut group = c.benchmark_group("frame");
    group.throughput(Throughput::Bytes(bytes.len() as u64));
    group.bench_function("encode", |b| {
        b.iter(|| encode_frame(black_box(&frame)).unwrap())
    });
    group.bench_function("decode", |b| {
        b.iter(|| decode_frame(black_box(&bytes)).unwrap())
    });
    group.finish();
}

fn sharding(c: &mut Criterion) {
    let doc = corpus(100_000);
    c.bench_function("make_shards/100k", |b| {
        b.iter(|| make_shards(black_box(&doc), 1_000).unwrap())
    });
}

fn simulated_job(c: &mut Criterion) {
    let spec = EngineSpec::delay_model(CostModel::new(1.117222, 2.18551e-4).simulated(true));
    let cluster = SimCluster::new(spec, Architecture::Service);
    let doc = corpus(100_000);
    let mut group = c.benchmark_group("simulate_job");
    group.sample_size(10);
    for nodes in [2, 16] {
        let job = Job::simulated("bench", doc.clone(), nodes);
        group.bench_with_input(BenchmarkId::from_parameter(nodes), &job, |b, job| {
            b.iter(|| simulate_job(black_box(job), &cluster).unwrap())
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    rbmt_translation,
    frame_codec,
    sharding,
    simulated_job
);
criterion_main!(benches);
