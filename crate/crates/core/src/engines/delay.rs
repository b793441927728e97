use super::{CostModel, Engine, EngineError, EngineKind, Translation};
use crate::corpus::Sentence;

/// Pure cost engine: text passes through unchanged.
#[derive(Debug, Clone)]
pub struct DelayEngine {
    cost: CostModel,
}

impl DelayEngine {
    pub fn new(cost: CostModel) -> Self {
        DelayEngine { cost }
    }
}

impl Engine for DelayEngine {
    fn kind(&self) -> EngineKind {
        EngineKind::DelayModel
    }

    fn setup_seconds(&self) -> f64 {
        self.cost.setup_seconds
    }

    fn translate_sentence(&mut self, sentence: &Sentence) -> Result<Translation, EngineError> {
        let cost_seconds = self.cost.sentence_cost(sentence.word_count());
        self.cost.pay(cost_seconds);
        Ok(Translation {
            sentence: sentence.clone(),
            cost_seconds,
        })
    }
}
