//! Aligned text tables and CSV for throughput reports.

use super::metrics::ThroughputReport;
use super::reference::ReferenceRow;
use super::scaling::ScalingReport;
use super::BenchError;

/// One timing from an observations file.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub system: String,
    /// Size in the file's unit, sentences or words.
    pub size: f64,
    pub seconds: f64,
}

/// Reads `system,<size>,seconds` CSV. The header row names the size column;
/// lines starting with `#` are skipped.
pub fn parse_observations(text: &str) -> Result<Vec<Observation>, BenchError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| BenchError::InvalidArgument(format!("observations header: {e}")))?
        .clone();
    if headers.len() != 3 {
        return Err(BenchError::InvalidArgument(format!(
            "expected 3 columns (system, size, seconds), found {}",
            headers.len()
        )));
    }
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record
            .map_err(|e| BenchError::InvalidArgument(format!("observations row {}: {e}", i + 1)))?;
        let number = |col: usize| -> Result<f64, BenchError> {
            record[col].parse::<f64>().map_err(|_| {
                BenchError::InvalidMeasurement(format!(
                    "row {}: '{}' is not a number in column '{}'",
                    i + 1,
                    &record[col],
                    &headers[col]
                ))
            })
        };
        out.push(Observation {
            system: record[0].to_owned(),
            size: number(1)?,
            seconds: number(2)?,
        });
    }
    Ok(out)
}

/// `(size, seconds)` pairs of one system.
pub fn observations_for(observations: &[Observation], system: &str) -> Vec<(f64, f64)> {
    observations
        .iter()
        .filter(|o| o.system == system)
        .map(|o| (o.size, o.seconds))
        .collect()
}

/// `h:mm:ss.cc`, rounded to the hundredth.
pub fn format_real_time(seconds: f64) -> String {
    let centis = (seconds.max(0.0) * 100.0).round() as u64;
    let (h, rem) = (centis / 360_000, centis % 360_000);
    let (m, rem) = (rem / 6_000, rem % 6_000);
    let (s, c) = (rem / 100, rem % 100);
    format!("{h}:{m:02}:{s:02}.{c:02}")
}

/// Thousands separators on the integer part.
fn group(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

fn format_rate(rate: f64) -> String {
    let tenths = (rate * 10.0).round() as u64;
    format!("{}.{}", group(tenths / 10), tenths % 10)
}

fn render(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| {
                // Text columns left-aligned, numbers right-aligned.
                if i == 2 || i == 7 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        parts.join("  ").trim_end().to_owned()
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

fn cells(r: &ThroughputReport) -> Vec<String> {
    vec![
        group(r.word_count),
        group(r.context.sentences as u64),
        r.context.system.clone(),
        format_real_time(r.total_seconds),
        r.context.nodes.to_string(),
        format_rate(r.throughput),
    ]
}

const HEADER: [&str; 6] = [
    "words",
    "sentences",
    "system",
    "real time",
    "nodes",
    "words/s",
];

pub fn throughput_table(reports: &[ThroughputReport]) -> String {
    render(&HEADER, &reports.iter().map(cells).collect::<Vec<_>>())
}

pub fn scaling_table(report: &ScalingReport) -> String {
    let mut header = HEADER.to_vec();
    header.push("efficiency");
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|row| {
            let mut c = cells(&row.report);
            c.push(format!("{:.3}", row.efficiency));
            c
        })
        .collect();
    render(&header, &rows)
}

/// Reference rows with the printed and recomputed rates side by side.
pub fn reference_table(rows: &[ReferenceRow]) -> String {
    let header = [
        "words",
        "sentences",
        "system",
        "real time",
        "nodes",
        "words/s",
        "recomputed",
        "note",
    ];
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                group(r.words),
                group(r.sentences),
                r.system.to_owned(),
                format_real_time(r.seconds),
                r.nodes.to_string(),
                format_rate(r.printed_rate),
                format_rate(r.recomputed_rate()),
                if r.is_consistent() {
                    String::new()
                } else {
                    format!("inconsistent ({:+.1}%)", 100.0 * r.relative_deviation())
                },
            ]
        })
        .collect();
    render(&header, &body)
}

fn csv_row(r: &ThroughputReport) -> Vec<String> {
    vec![
        r.word_count.to_string(),
        r.context.sentences.to_string(),
        r.context.system.clone(),
        r.context.nodes.to_string(),
        format!("{:.6}", r.setup_seconds),
        format!("{:.6}", r.translation_seconds),
        format!("{:.6}", r.total_seconds),
        format!("{:.6}", r.throughput),
    ]
}

const CSV_HEADER: [&str; 8] = [
    "words",
    "sentences",
    "system",
    "nodes",
    "setup_seconds",
    "translation_seconds",
    "total_seconds",
    "words_per_second",
];

fn write_csv(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

pub fn throughput_csv(reports: &[ThroughputReport]) -> String {
    write_csv(&CSV_HEADER, reports.iter().map(csv_row))
}

pub fn scaling_csv(report: &ScalingReport) -> String {
    let mut header = CSV_HEADER.to_vec();
    header.push("efficiency");
    write_csv(
        &header,
        report.rows.iter().map(|row| {
            let mut c = csv_row(&row.report);
            c.push(format!("{:.6}", row.efficiency));
            c
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{compute_throughput, RunContext};

    #[test]
    fn observations_file() {
        let text = "# comment\nsystem,sentences,seconds\n# a,1,2\na, 10 ,1.5\nb,10,2\na,20,2.5\n";
        let obs = parse_observations(text).unwrap();
        assert_eq!(obs.len(), 3);
        assert_eq!(observations_for(&obs, "a"), [(10.0, 1.5), (20.0, 2.5)]);
        assert!(parse_observations("system,sentences,seconds\na,x,1\n").is_err());
        assert!(parse_observations("system,seconds\na,1\n").is_err());
    }

    #[test]
    fn real_time_format() {
        assert_eq!(format_real_time(1.78), "0:00:01.78");
        assert_eq!(format_real_time(517.82), "0:08:37.82");
        assert_eq!(format_real_time(18_899.74), "5:14:59.74");
        assert_eq!(format_real_time(59.999), "0:01:00.00");
        assert_eq!(format_real_time(0.0), "0:00:00.00");
    }

    #[test]
    fn grouping() {
        assert_eq!(group(0), "0");
        assert_eq!(group(999), "999");
        assert_eq!(group(1_000), "1,000");
        assert_eq!(group(20_000_000), "20,000,000");
        assert_eq!(format_rate(36_285.84), "36,285.8");
    }

    #[test]
    fn table_columns() {
        let r = compute_throughput(2_000, 0.0, 1.78)
            .unwrap()
            .with_context(RunContext::new("seq. rbmt", 100, 1));
        let table = throughput_table(std::slice::from_ref(&r));
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("words"));
        assert!(lines[2].contains("seq. rbmt"));
        assert!(lines[2].contains("0:00:01.78"));
        assert!(lines[2].ends_with("1,123.6"));
        let csv = throughput_csv(&[r]);
        assert_eq!(
            csv.lines().nth(1).unwrap(),
            "2000,100,seq. rbmt,1,0.000000,1.780000,1.780000,1123.595506"
        );
    }
}
