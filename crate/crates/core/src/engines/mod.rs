//! Translation engines behind one contract.
//!
//! Every engine translates one sentence at a time and reports the cost the
//! translation is charged under its [`CostModel`]. When the model is in
//! simulate mode costs are only accounted; otherwise the engine sleeps for
//! them, so wall-clock runs take at least as long as their virtual cost.

mod delay;
mod external;
pub mod rbmt;
pub mod smt;
mod spec;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, Sentence};

pub use delay::DelayEngine;
pub use external::ExternalCommandEngine;
pub use rbmt::{LexicalUnit, RbmtEngine, RbmtResources};
pub use smt::{smt_stub_translate, SentenceCache, SmtStubEngine};
pub use spec::EngineSpec;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid engine spec: {0}")]
    InvalidSpec(String),
    #[error("resource error: {0}")]
    Resource(String),
    #[error("failed to spawn external command: {0}")]
    Spawn(String),
    #[error("engine failed on sentence {sentence_index}: {reason}")]
    Sentence {
        sentence_index: usize,
        reason: String,
    },
    #[error("tag model has no probability for tag '{tag}'")]
    ModelCoverage { tag: String },
    #[error("bilingual dictionary has no entry for {lemma}<{tags}>")]
    TransferCoverage { lemma: String, tags: String },
    #[error("generation dictionary has no entry for {lemma}<{tags}>")]
    Generation { lemma: String, tags: String },
    #[error("{0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    Rbmt,
    SmtStub,
    DelayModel,
    ExternalCommand,
}

impl EngineKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EngineKind::Rbmt => "rbmt",
            EngineKind::SmtStub => "smt_stub",
            EngineKind::DelayModel => "delay_model",
            EngineKind::ExternalCommand => "external_command",
        }
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EngineKind {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rbmt" => Ok(EngineKind::Rbmt),
            "smt_stub" => Ok(EngineKind::SmtStub),
            "delay_model" => Ok(EngineKind::DelayModel),
            "external_command" => Ok(EngineKind::ExternalCommand),
            other => Err(EngineError::InvalidSpec(format!(
                "unknown engine kind '{other}'"
            ))),
        }
    }
}

/// Setup plus linear per-word cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub setup_seconds: f64,
    pub per_word_seconds: f64,
    /// Fraction of a sentence's cost avoided on a cache hit (`smt_stub` only).
    pub cache_hit_savings: f64,
    pub simulate: bool,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            setup_seconds: 0.0,
            per_word_seconds: 0.0,
            cache_hit_savings: 0.0,
            simulate: true,
        }
    }
}

impl CostModel {
    pub fn new(setup_seconds: f64, per_word_seconds: f64) -> Self {
        CostModel {
            setup_seconds,
            per_word_seconds,
            ..CostModel::default()
        }
    }

    pub fn simulated(mut self, simulate: bool) -> Self {
        self.simulate = simulate;
        self
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let finite_non_negative = |v: f64| v.is_finite() && v >= 0.0;
        if !finite_non_negative(self.setup_seconds) {
            return Err(EngineError::InvalidSpec(format!(
                "setup_seconds must be a non-negative number, got {}",
                self.setup_seconds
            )));
        }
        if !finite_non_negative(self.per_word_seconds) {
            return Err(EngineError::InvalidSpec(format!(
                "per_word_seconds must be a non-negative number, got {}",
                self.per_word_seconds
            )));
        }
        if !(0.0..1.0).contains(&self.cache_hit_savings) {
            return Err(EngineError::InvalidSpec(format!(
                "cache_hit_savings must lie in [0, 1), got {}",
                self.cache_hit_savings
            )));
        }
        Ok(())
    }

    pub fn sentence_cost(&self, word_count: usize) -> f64 {
        word_count as f64 * self.per_word_seconds
    }

    /// Sleeps for `seconds` unless simulating.
    pub fn pay(&self, seconds: f64) {
        if !self.simulate && seconds > 0.0 {
            std::thread::sleep(Duration::from_secs_f64(seconds));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Translation {
    pub sentence: Sentence,
    pub cost_seconds: f64,
}

/// A ready translation engine. One call in flight at a time.
pub trait Engine: Send {
    fn kind(&self) -> EngineKind;

    /// Setup cost paid when this instance was created.
    fn setup_seconds(&self) -> f64;

    fn translate_sentence(&mut self, sentence: &Sentence) -> Result<Translation, EngineError>;
}

/// Makes fresh engine instances; a worker in the simple architecture calls
/// this once per shard.
pub trait EngineFactory: Send + Sync {
    fn kind(&self) -> EngineKind;

    fn create(&self) -> Result<Box<dyn Engine>, EngineError>;
}

impl EngineFactory for EngineSpec {
    fn kind(&self) -> EngineKind {
        self.kind
    }

    fn create(&self) -> Result<Box<dyn Engine>, EngineError> {
        engine_create(self)
    }
}

/// Validates `spec`, loads its resources and pays its setup cost.
pub fn engine_create(spec: &EngineSpec) -> Result<Box<dyn Engine>, EngineError> {
    let cost = spec.cost_model()?;
    let engine: Box<dyn Engine> = match spec.kind {
        EngineKind::DelayModel => {
            spec.check_keys(&[])?;
            Box::new(DelayEngine::new(cost))
        }
        EngineKind::SmtStub => {
            spec.check_keys(&["cache"])?;
            let caching = spec.get_bool("cache")?.unwrap_or(false);
            Box::new(SmtStubEngine::new(cost, caching))
        }
        EngineKind::Rbmt => {
            spec.check_keys(&["dictionaries"])?;
            let resources = match spec.get_str("dictionaries")? {
                None | Some("builtin") => RbmtResources::builtin()?,
                Some(dir) => RbmtResources::load_dir(&spec.resolve_path(dir))?,
            };
            Box::new(RbmtEngine::new(resources.into(), cost))
        }
        EngineKind::ExternalCommand => {
            spec.check_keys(&["command", "args"])?;
            let command = spec.get_str("command")?.ok_or_else(|| {
                EngineError::InvalidSpec("external_command requires 'command'".into())
            })?;
            let args = spec.get_str_list("args")?.unwrap_or_default();
            return Ok(Box::new(ExternalCommandEngine::spawn(command, &args)?));
        }
    };
    cost.pay(cost.setup_seconds);
    Ok(engine)
}

/// Sequential reference run: every sentence of `doc` through one engine.
///
/// Returns the translated document and the summed per-sentence cost.
pub fn translate_document(
    engine: &mut dyn Engine,
    doc: &Document,
) -> Result<(Document, f64), EngineError> {
    let mut out = Vec::with_capacity(doc.len());
    let mut cost = 0.0;
    for s in doc.sentences() {
        let t = engine.translate_sentence(s)?;
        cost += t.cost_seconds;
        out.push(t.sentence);
    }
    let doc = Document::new(out).map_err(|e| EngineError::InvalidInput(e.to_string()))?;
    Ok((doc, cost))
}
