//! Statistical MT stand-in. The text is a placeholder rewrite; what matters is
//! the cost model and the exact-sentence translation cache.

use std::collections::HashSet;

use super::{CostModel, Engine, EngineError, EngineKind, Translation};
use crate::corpus::Sentence;

/// Exact-text sentence cache, unbounded for the lifetime of an engine.
#[derive(Debug, Clone, Default)]
pub struct SentenceCache {
    enabled: bool,
    seen: HashSet<String>,
    hits: u64,
    misses: u64,
}

impl SentenceCache {
    pub fn new(enabled: bool) -> Self {
        SentenceCache {
            enabled,
            ..SentenceCache::default()
        }
    }

    pub fn enabled(&self) -> bool {
        self.enabled
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }

    /// Records a lookup; true on hit.
    fn lookup(&mut self, text: &str) -> bool {
        if !self.enabled {
            return false;
        }
        if self.seen.contains(text) {
            self.hits += 1;
            true
        } else {
            self.seen.insert(text.to_owned());
            self.misses += 1;
            false
        }
    }
}

/// Uppercases each token and tags it `/smt`.
fn rewrite(sentence: &Sentence) -> String {
    sentence
        .words()
        .map(|w| format!("{}/smt", w.to_uppercase()))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Translates one sentence, updating `cache` in place. Returns the text and
/// its cost; a cache hit costs `1 - cache_hit_savings` of a miss.
pub fn smt_stub_translate(
    sentence: &Sentence,
    cache: &mut SentenceCache,
    cost: &CostModel,
) -> (String, f64) {
    let base = cost.sentence_cost(sentence.word_count());
    let charged = if cache.lookup(sentence.text()) {
        base * (1.0 - cost.cache_hit_savings)
    } else {
        base
    };
    (rewrite(sentence), charged)
}

#[derive(Debug, Clone)]
pub struct SmtStubEngine {
    cost: CostModel,
    cache: SentenceCache,
}

impl SmtStubEngine {
    pub fn new(cost: CostModel, caching: bool) -> Self {
        SmtStubEngine {
            cost,
            cache: SentenceCache::new(caching),
        }
    }

    pub fn cache(&self) -> &SentenceCache {
        &self.cache
    }
}

impl Engine for SmtStubEngine {
    fn kind(&self) -> EngineKind {
        EngineKind::SmtStub
    }

    fn setup_seconds(&self) -> f64 {
        self.cost.setup_seconds
    }

    fn translate_sentence(&mut self, sentence: &Sentence) -> Result<Translation, EngineError> {
        let (text, cost_seconds) = smt_stub_translate(sentence, &mut self.cache, &self.cost);
        self.cost.pay(cost_seconds);
        Ok(Translation {
            sentence: sentence.with_text(&text),
            cost_seconds,
        })
    }
}
