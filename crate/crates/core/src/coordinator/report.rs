use std::fmt;

use super::JobResult;

/// One `host:port` per line; blank lines and `#` comments are skipped.
pub fn parse_worker_pool(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Per-shard CSV: `shard_id,worker,words,cost_seconds,wall_seconds,attempts`.
pub fn timing_csv(result: &JobResult) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "shard_id",
        "worker",
        "words",
        "cost_seconds",
        "wall_seconds",
        "attempts",
    ])
    .expect("in-memory write");
    for t in &result.timing {
        w.write_record([
            t.shard_id.to_string(),
            t.worker.clone(),
            t.words.to_string(),
            format!("{:.6}", t.cost_seconds),
            format!("{:.6}", t.wall_seconds),
            t.attempts.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// Human-readable job summary.
pub struct JobReport<'a>(pub &'a JobResult);

impl fmt::Display for JobReport<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.0;
        let clock = if r.simulated { "virtual" } else { "wall" };
        writeln!(f, "job:        {}", r.job_id)?;
        writeln!(
            f,
            "sentences:  {}   words: {}   shards: {}",
            r.output.len(),
            r.output.total_words(),
            r.timing.len()
        )?;
        writeln!(f, "setup:      {:.3} s ({clock})", r.setup_seconds)?;
        writeln!(f, "total:      {:.3} s ({clock})", r.total_wall_seconds)?;
        writeln!(f, "shard cost: {:.3} s summed", r.total_cost_seconds())?;
        for (name, setup) in &r.worker_setup_seconds {
            writeln!(
                f,
                "worker {name}: {} shard(s), engine setup {setup:.3} s",
                r.shards_served_by(name)
            )?;
        }
        if r.failures.is_empty() {
            writeln!(f, "failures:   none")?;
        } else {
            writeln!(f, "failures:   {}", r.failures.len())?;
            for x in &r.failures {
                writeln!(
                    f,
                    "  shard {} on {}: {} -> {}",
                    x.shard_id,
                    x.worker,
                    x.reason,
                    x.reassigned_to.as_deref().unwrap_or("not reassigned")
                )?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coordinator::{simulate_job, Job, SimCluster};
    use crate::corpus::generate_artificial;
    use crate::engines::{CostModel, EngineSpec};
    use crate::worker::Architecture;

    #[test]
    fn pool_file_parsing() {
        let pool = parse_worker_pool("# cluster\n10.0.0.1:7000\n\n  10.0.0.2:7000  # rack b\n");
        assert_eq!(pool, ["10.0.0.1:7000", "10.0.0.2:7000"]);
    }

    #[test]
    fn csv_has_one_row_per_shard() {
        let doc = generate_artificial(5, "a b").unwrap();
        let job = Job::simulated("csv", doc, 2).with_shard_size(2);
        let spec = EngineSpec::delay_model(CostModel::new(0.0, 0.5));
        let result = simulate_job(&job, &SimCluster::new(spec, Architecture::Simple)).unwrap();
        let csv = timing_csv(&result);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "shard_id,worker,words,cost_seconds,wall_seconds,attempts"
        );
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "0,sim-0,4,2.000000,2.000000,1");
        let text = JobReport(&result).to_string();
        assert!(text.contains("failures:   none"));
    }
}
