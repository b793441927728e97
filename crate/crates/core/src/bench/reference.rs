//! Published reference measurements used for calibration and comparison.
//!
//! Each row carries the throughput as originally printed next to the value
//! recomputed from its word count and time. Rows where the two disagree are
//! flagged and kept out of calibration fits.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceRow {
    pub words: u64,
    pub sentences: u64,
    pub system: &'static str,
    pub seconds: f64,
    pub nodes: u32,
    pub printed_rate: f64,
}

const fn row(
    words: u64,
    sentences: u64,
    system: &'static str,
    seconds: f64,
    nodes: u32,
    printed_rate: f64,
) -> ReferenceRow {
    ReferenceRow {
        words,
        sentences,
        system,
        seconds,
        nodes,
        printed_rate,
    }
}

impl ReferenceRow {
    pub fn recomputed_rate(&self) -> f64 {
        self.words as f64 / self.seconds
    }

    /// Printed minus recomputed, relative to recomputed.
    pub fn relative_deviation(&self) -> f64 {
        (self.printed_rate - self.recomputed_rate()) / self.recomputed_rate()
    }

    /// The printed rate matches words/seconds up to rounding of the printed
    /// digits or half a percent, whichever is looser.
    pub fn is_consistent(&self) -> bool {
        let diff = (self.printed_rate - self.recomputed_rate()).abs();
        diff <= 1.0 || diff <= 0.005 * self.recomputed_rate()
    }
}

/// Sequential SMT, sentence cache on vs off.
pub const SMT_CACHE: &[ReferenceRow] = &[
    row(2_000, 100, "seq. smt-fast cache on", 51.11, 1, 39.1),
    row(20_000, 1_000, "seq. smt-fast cache on", 502.26, 1, 39.8),
    row(2_000, 100, "seq. smt-fast cache off", 82.89, 1, 24.1),
    row(20_000, 1_000, "seq. smt-fast cache off", 824.39, 1, 24.3),
];

/// Sequential RBMT on the artificial corpus.
pub const SEQUENTIAL_RBMT: &[ReferenceRow] = &[
    row(2_000, 100, "seq. rbmt", 1.78, 1, 1_124.0),
    row(20_000, 1_000, "seq. rbmt", 5.24, 1, 3_817.0),
    row(200_000, 10_000, "seq. rbmt", 44.85, 1, 4_459.0),
    row(2_000_000, 100_000, "seq. rbmt", 517.82, 1, 4_672.0),
    row(2_000, 100, "seq. rbmt-fast", 0.91, 1, 2_198.0),
    row(20_000, 1_000, "seq. rbmt-fast", 2.60, 1, 7_692.0),
    row(200_000, 10_000, "seq. rbmt-fast", 20.22, 1, 9_891.0),
    row(2_000_000, 100_000, "seq. rbmt-fast", 196.36, 1, 10_185.0),
];

/// Sequential RBMT on natural text.
pub const SEQUENTIAL_RBMT_NATURAL: &[ReferenceRow] = &[
    row(21_118, 1_000, "seq. rbmt", 6.92, 1, 3_052.0),
    row(42_236, 2_000, "seq. rbmt", 10.04, 1, 4_207.0),
    row(21_118, 1_000, "seq. rbmt-fast", 3.03, 1, 6_970.0),
    row(42_236, 2_000, "seq. rbmt-fast", 5.30, 1, 7_969.0),
];

/// Sequential SMT on the artificial corpus.
pub const SEQUENTIAL_SMT: &[ReferenceRow] = &[
    row(200, 10, "seq. smt", 16.83, 1, 11.9),
    row(2_000, 100, "seq. smt", 166.04, 1, 12.0),
    row(20_000, 1_000, "seq. smt", 2_002.39, 1, 10.0),
    row(200_000, 10_000, "seq. smt", 18_899.74, 1, 10.58),
    row(200, 10, "seq. smt-fast", 8.50, 1, 23.5),
    row(2_000, 100, "seq. smt-fast", 82.89, 1, 24.1),
    row(20_000, 1_000, "seq. smt-fast", 824.39, 1, 24.3),
    row(200_000, 10_000, "seq. smt-fast", 8_484.10, 1, 23.6),
];

/// Sequential SMT on natural text.
pub const SEQUENTIAL_SMT_NATURAL: &[ReferenceRow] = &[
    row(21_118, 1_000, "seq. smt", 1_504.95, 1, 14.0),
    row(42_236, 2_000, "seq. smt", 3_012.32, 1, 14.0),
    row(21_118, 1_000, "seq. smt-fast", 738.93, 1, 28.6),
    row(42_236, 2_000, "seq. smt-fast", 1_495.78, 1, 28.2),
];

/// Single-node map/reduce with a persistent engine (service) vs an engine
/// per shard (simple).
pub const ARCHITECTURES: &[ReferenceRow] = &[
    row(200, 10, "mr-service-rbmt", 201.82, 1, 1.0),
    row(2_000, 100, "mr-service-rbmt", 202.40, 1, 9.9),
    row(20_000, 1_000, "mr-service-rbmt", 207.75, 1, 96.3),
    row(200_000, 10_000, "mr-service-rbmt", 265.36, 1, 753.7),
    row(2_000_000, 100_000, "mr-service-rbmt", 844.71, 1, 2_367.7),
    row(200, 10, "mr-simple-rbmt", 201.37, 1, 1.0),
    row(2_000, 100, "mr-simple-rbmt", 202.45, 1, 9.9),
    row(20_000, 1_000, "mr-simple-rbmt", 207.16, 1, 96.5),
    row(200_000, 10_000, "mr-simple-rbmt", 250.32, 1, 799.0),
    row(2_000_000, 100_000, "mr-simple-rbmt", 684.88, 1, 2_920.2),
];

/// Map/reduce RBMT over 2 to 16 nodes.
pub const MR_RBMT: &[ReferenceRow] = &[
    row(2_000, 100, "mr-rbmt", 212.63, 4, 9.4),
    row(20_000, 1_000, "mr-rbmt", 214.75, 4, 93.1),
    row(200_000, 10_000, "mr-rbmt", 225.15, 4, 886.3),
    row(2_000_000, 100_000, "mr-rbmt", 448.09, 2, 4_362.9),
    row(2_000_000, 100_000, "mr-rbmt", 332.75, 4, 5_918.6),
    row(2_000_000, 100_000, "mr-rbmt", 280.99, 8, 7_052.6),
    row(2_000_000, 100_000, "mr-rbmt", 268.00, 16, 7_426.8),
    row(20_000_000, 1_000_000, "mr-rbmt", 2_607.82, 2, 7_377.3),
    row(20_000_000, 1_000_000, "mr-rbmt", 1_419.04, 4, 13_597.2),
    row(20_000_000, 1_000_000, "mr-rbmt", 822.02, 8, 23_588.5),
    row(20_000_000, 1_000_000, "mr-rbmt", 538.23, 16, 36_285.8),
];

/// SMT behind a persistent server process.
pub const SMT_SERVER: &[ReferenceRow] = &[
    row(200, 10, "smt-server-fast", 8.7, 1, 23.0),
    row(2_000, 100, "smt-server-fast", 83.98, 1, 23.8),
    row(20_000, 1_000, "smt-server-fast", 852.35, 1, 23.5),
    row(200_000, 10_000, "smt-server-fast", 8_505.87, 1, 23.5),
];

/// Map/reduce SMT over 2 to 16 nodes.
pub const MR_SMT: &[ReferenceRow] = &[
    row(2_000, 100, "mr-smt", 260.37, 4, 6.0),
    row(20_000, 1_000, "mr-smt", 812.24, 4, 26.7),
    row(200_000, 10_000, "mr-smt", 5_907.44, 4, 35.9),
    row(2_000_000, 100_000, "mr-smt", 112_391.16, 2, 18.8),
    row(2_000_000, 100_000, "mr-smt", 56_428.55, 4, 37.6),
    row(2_000_000, 100_000, "mr-smt", 28_284.39, 8, 74.9),
    row(2_000_000, 100_000, "mr-smt", 14_281.17, 16, 148.4),
    row(20_000_000, 1_000_000, "mr-smt", 564_138.55, 4, 37.8),
    row(20_000_000, 1_000_000, "mr-smt", 282_003.69, 8, 75.5),
    row(20_000_000, 1_000_000, "mr-smt", 140_507.45, 16, 150.8),
];

pub const ALL: &[(&str, &[ReferenceRow])] = &[
    ("smt-cache", SMT_CACHE),
    ("sequential-rbmt", SEQUENTIAL_RBMT),
    ("sequential-rbmt-natural", SEQUENTIAL_RBMT_NATURAL),
    ("sequential-smt", SEQUENTIAL_SMT),
    ("sequential-smt-natural", SEQUENTIAL_SMT_NATURAL),
    ("architectures", ARCHITECTURES),
    ("mr-rbmt", MR_RBMT),
    ("smt-server", SMT_SERVER),
    ("mr-smt", MR_SMT),
];

pub fn dataset(name: &str) -> Option<&'static [ReferenceRow]> {
    ALL.iter().find(|(n, _)| *n == name).map(|(_, rows)| *rows)
}

pub fn rows_for<'a>(
    rows: &'a [ReferenceRow],
    system: &'a str,
) -> impl Iterator<Item = &'a ReferenceRow> + 'a {
    rows.iter().filter(move |r| r.system == system)
}

/// `(words, seconds)` for the consistent rows of one system.
pub fn word_observations(rows: &[ReferenceRow], system: &str) -> Vec<(f64, f64)> {
    rows_for(rows, system)
        .filter(|r| r.is_consistent())
        .map(|r| (r.words as f64, r.seconds))
        .collect()
}

/// `(sentences, seconds)` for rows of one system with at least
/// `min_sentences` sentences.
pub fn sentence_observations(
    rows: &[ReferenceRow],
    system: &str,
    min_sentences: u64,
) -> Vec<(f64, f64)> {
    rows_for(rows, system)
        .filter(|r| r.is_consistent() && r.sentences >= min_sentences)
        .map(|r| (r.sentences as f64, r.seconds))
        .collect()
}
