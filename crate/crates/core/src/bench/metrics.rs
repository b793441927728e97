use serde::Serialize;

use super::BenchError;
use crate::worker::Architecture;

/// What a throughput figure was measured on.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunContext {
    pub system: String,
    pub engine: Option<String>,
    pub sentences: usize,
    pub nodes: usize,
    pub shard_size: Option<usize>,
    pub architecture: Option<Architecture>,
    pub simulated: bool,
}

impl RunContext {
    pub fn new(system: &str, sentences: usize, nodes: usize) -> Self {
        RunContext {
            system: system.into(),
            sentences,
            nodes,
            ..RunContext::default()
        }
    }
}

/// Words per second including setup time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThroughputReport {
    pub word_count: u64,
    pub setup_seconds: f64,
    pub translation_seconds: f64,
    pub total_seconds: f64,
    pub throughput: f64,
    pub context: RunContext,
}

impl ThroughputReport {
    pub fn with_context(mut self, context: RunContext) -> Self {
        self.context = context;
        self
    }
}

pub fn compute_throughput(
    words: u64,
    setup_seconds: f64,
    translation_seconds: f64,
) -> Result<ThroughputReport, BenchError> {
    for (name, v) in [
        ("setup", setup_seconds),
        ("translation", translation_seconds),
    ] {
        if !v.is_finite() || v < 0.0 {
            return Err(BenchError::InvalidMeasurement(format!(
                "{name} time must be a non-negative number, got {v}"
            )));
        }
    }
    let total_seconds = setup_seconds + translation_seconds;
    let throughput = if words == 0 {
        0.0
    } else if total_seconds > 0.0 {
        words as f64 / total_seconds
    } else {
        return Err(BenchError::InvalidMeasurement(format!(
            "{words} words translated in zero time"
        )));
    };
    Ok(ThroughputReport {
        word_count: words,
        setup_seconds,
        translation_seconds,
        total_seconds,
        throughput,
        context: RunContext::default(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeedupReport {
    pub new_throughput: f64,
    pub reference_throughput: f64,
    pub speedup: f64,
}

pub fn compute_speedup(
    new_throughput: f64,
    reference_throughput: f64,
) -> Result<SpeedupReport, BenchError> {
    if !(reference_throughput.is_finite() && reference_throughput > 0.0) {
        return Err(BenchError::InvalidReference(reference_throughput));
    }
    if !(new_throughput.is_finite() && new_throughput > 0.0) {
        return Err(BenchError::InvalidMeasurement(format!(
            "new throughput must be positive, got {new_throughput}"
        )));
    }
    Ok(SpeedupReport {
        new_throughput,
        reference_throughput,
        speedup: new_throughput / reference_throughput,
    })
}
