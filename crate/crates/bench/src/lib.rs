//! Fixtures shared by the criterion benchmarks.

use shardmt_core::corpus::{generate_artificial, Document, DEFAULT_BASE_SENTENCE};

/// Artificial corpus of `sentences` copies of the default base sentence.
pub fn corpus(sentences: usize) -> Document {
    generate_artificial(sentences, DEFAULT_BASE_SENTENCE).expect("non-empty base sentence")
}
