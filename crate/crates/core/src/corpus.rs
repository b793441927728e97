//! Text model: sentences, documents, shards and the order-preserving reduce.
//!
//! A sentence is one line of input. Words are whitespace-delimited tokens and
//! are re-joined with single spaces, so a `Sentence` always holds normalized
//! text.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Twenty-word sentence built from the bundled Spanish toy dictionary.
pub const DEFAULT_BASE_SENTENCE: &str =
    "el gato negro come la comida en la casa grande y el perro blanco duerme en el parque verde hoy";

/// Shard size used when a job does not pick one.
pub const DEFAULT_SHARD_SIZE: usize = 1_000;

#[derive(Debug, Error, PartialEq)]
pub enum CorpusError {
    #[error("input is not valid UTF-8 at byte offset {offset}")]
    Decode { offset: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("incomplete job: missing shard(s) {missing:?}")]
    IncompleteJob { missing: Vec<usize> },
    #[error("integrity error: {0}")]
    Integrity(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sentence {
    index: usize,
    text: String,
    word_count: usize,
}

impl Sentence {
    /// Builds a sentence, collapsing any run of whitespace to one space.
    pub fn new(index: usize, text: &str) -> Self {
        let mut normalized = String::with_capacity(text.len());
        let mut word_count = 0;
        for word in text.split_whitespace() {
            if word_count > 0 {
                normalized.push(' ');
            }
            normalized.push_str(word);
            word_count += 1;
        }
        Sentence {
            index,
            text: normalized,
            word_count,
        }
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn word_count(&self) -> usize {
        self.word_count
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.text.split(' ').filter(|w| !w.is_empty())
    }

    /// Same position, different text.
    pub fn with_text(&self, text: &str) -> Self {
        Sentence::new(self.index, text)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    sentences: Vec<Sentence>,
    total_words: usize,
}

impl Document {
    /// Fails unless indices are exactly `0..len` in order.
    pub fn new(sentences: Vec<Sentence>) -> Result<Self, CorpusError> {
        if let Some((pos, s)) = sentences.iter().enumerate().find(|(i, s)| s.index != *i) {
            return Err(CorpusError::Integrity(format!(
                "sentence at position {pos} carries index {}",
                s.index
            )));
        }
        let total_words = sentences.iter().map(|s| s.word_count).sum();
        Ok(Document {
            sentences,
            total_words,
        })
    }

    /// Builds a document from lines of text, indexing them in order.
    pub fn from_texts<I, S>(texts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let sentences: Vec<Sentence> = texts
            .into_iter()
            .enumerate()
            .map(|(i, t)| Sentence::new(i, t.as_ref()))
            .collect();
        let total_words = sentences.iter().map(|s| s.word_count).sum();
        Document {
            sentences,
            total_words,
        }
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn total_words(&self) -> usize {
        self.total_words
    }

    /// One sentence per line, LF terminated.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.sentences.iter().map(|s| s.text.len() + 1).sum());
        for s in &self.sentences {
            out.push_str(&s.text);
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shard {
    pub shard_id: usize,
    pub first_index: usize,
    pub sentences: Vec<Sentence>,
    pub word_count: usize,
}

impl Shard {
    pub fn texts(&self) -> Vec<String> {
        self.sentences.iter().map(|s| s.text.clone()).collect()
    }

    pub fn manifest_entry(&self) -> ManifestEntry {
        ManifestEntry {
            shard_id: self.shard_id,
            first_index: self.first_index,
            sentence_count: self.sentences.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub shard_id: usize,
    pub first_index: usize,
    pub sentence_count: usize,
}

/// Sharding layout of a document, kept by the coordinator to validate the reduce.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardManifest {
    pub entries: Vec<ManifestEntry>,
}

impl ShardManifest {
    pub fn from_shards(shards: &[Shard]) -> Self {
        ShardManifest {
            entries: shards.iter().map(Shard::manifest_entry).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sentence_count(&self) -> usize {
        self.entries.iter().map(|e| e.sentence_count).sum()
    }
}

/// Splits raw bytes into one sentence per line, dropping blank lines.
pub fn segment_sentences(raw: &[u8]) -> Result<Document, CorpusError> {
    let text = std::str::from_utf8(raw).map_err(|e| CorpusError::Decode {
        offset: e.valid_up_to(),
    })?;
    Ok(Document::from_texts(
        text.split('\n').filter(|line| !line.trim().is_empty()),
    ))
}

/// `sentence_count` copies of `base_sentence`.
pub fn generate_artificial(
    sentence_count: usize,
    base_sentence: &str,
) -> Result<Document, CorpusError> {
    if sentence_count == 0 {
        return Err(CorpusError::InvalidArgument(
            "sentence_count must be positive".into(),
        ));
    }
    let base = Sentence::new(0, base_sentence);
    if base.word_count == 0 {
        return Err(CorpusError::InvalidArgument(
            "base sentence must contain at least one word".into(),
        ));
    }
    let sentences: Vec<Sentence> = (0..sentence_count)
        .map(|i| Sentence {
            index: i,
            text: base.text.clone(),
            word_count: base.word_count,
        })
        .collect();
    Ok(Document {
        total_words: sentence_count * base.word_count,
        sentences,
    })
}

pub fn make_shards(doc: &Document, shard_size: usize) -> Result<Vec<Shard>, CorpusError> {
    if shard_size == 0 {
        return Err(CorpusError::InvalidArgument(
            "shard_size must be at least 1".into(),
        ));
    }
    Ok(doc
        .sentences
        .chunks(shard_size)
        .enumerate()
        .map(|(shard_id, chunk)| Shard {
            shard_id,
            first_index: chunk[0].index,
            word_count: chunk.iter().map(|s| s.word_count).sum(),
            sentences: chunk.to_vec(),
        })
        .collect())
}

/// Reduce phase: orders translated shards by id and rebuilds the document.
///
/// Shards may arrive in any order. A repeated shard with identical content is
/// ignored (first arrival wins); one with different content is an integrity
/// error.
pub fn reassemble<I>(manifest: &ShardManifest, translated: I) -> Result<Document, CorpusError>
where
    I: IntoIterator<Item = (usize, Vec<String>)>,
{
    let mut slots: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (shard_id, texts) in translated {
        let Some(entry) = manifest.entries.get(shard_id) else {
            return Err(CorpusError::Integrity(format!(
                "shard {shard_id} is not part of the manifest ({} shards)",
                manifest.len()
            )));
        };
        if texts.len() != entry.sentence_count {
            return Err(CorpusError::Integrity(format!(
                "shard {shard_id} carries {} sentences, manifest expects {}",
                texts.len(),
                entry.sentence_count
            )));
        }
        match slots.get(&shard_id) {
            Some(existing) if *existing != texts => {
                return Err(CorpusError::Integrity(format!(
                    "shard {shard_id} delivered twice with differing content"
                )));
            }
            Some(_) => {}
            None => {
                slots.insert(shard_id, texts);
            }
        }
    }

    let present: BTreeSet<usize> = slots.keys().copied().collect();
    let missing: Vec<usize> = (0..manifest.len())
        .filter(|id| !present.contains(id))
        .collect();
    if !missing.is_empty() {
        return Err(CorpusError::IncompleteJob { missing });
    }

    let mut sentences = Vec::with_capacity(manifest.sentence_count());
    for (entry, texts) in manifest.entries.iter().zip(slots.into_values()) {
        if entry.first_index != sentences.len() {
            return Err(CorpusError::Integrity(format!(
                "shard {} starts at {} but {} sentences precede it",
                entry.shard_id,
                entry.first_index,
                sentences.len()
            )));
        }
        for (offset, text) in texts.iter().enumerate() {
            sentences.push(Sentence::new(entry.first_index + offset, text));
        }
    }
    Document::new(sentences)
}
