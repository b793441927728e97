use std::error::Error;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, LevelFilter};

use shardmt_core::bench::{
    self, find_breakeven_shard, fit_cost_model, observations_for, parse_observations, reference,
    run_scaling_experiment, run_sequential, run_sequential_sweep, ScalingConfig,
};
use shardmt_core::coordinator::{
    parse_worker_pool, run_job, simulate_job, timing_csv, Job, JobReport, SimCluster,
    DEFAULT_RETRY_LIMIT,
};
use shardmt_core::corpus::{
    generate_artificial, segment_sentences, DEFAULT_BASE_SENTENCE, DEFAULT_SHARD_SIZE,
};
use shardmt_core::engines::EngineSpec;
use shardmt_core::worker::{Architecture, Worker, WorkerConfig, DEFAULT_MAX_QUEUE};

#[derive(Debug, Parser)]
#[command(name = "shardmt", version, about = "Batch translation over map/reduce")]
struct Cli {
    /// More log output on stderr (-v info, -vv debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write an artificial corpus of repeated sentences
    GenData {
        #[arg(long)]
        sentences: usize,
        /// File whose first line is the sentence to repeat
        #[arg(long)]
        base: Option<PathBuf>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Translate a file sequentially on one engine
    Translate {
        /// Engine spec (TOML)
        #[arg(long)]
        engine: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Where to write the throughput report (default stdout)
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Serve translation requests on a TCP port
    Worker {
        #[arg(long, default_value = "127.0.0.1:7100")]
        listen: String,
        #[arg(long)]
        engine: PathBuf,
        #[arg(long, value_enum, default_value_t = ArchArg::Service)]
        architecture: ArchArg,
        #[arg(long, default_value_t = DEFAULT_MAX_QUEUE)]
        max_queue: usize,
    },
    /// Run a sharded job on a worker pool
    RunJob {
        /// Worker pool file, one host:port per line
        #[arg(long, required_unless_present = "simulate")]
        workers: Option<PathBuf>,
        /// Run on this many in-process workers in virtual time instead
        #[arg(long, requires = "engine", conflicts_with = "workers")]
        simulate: Option<usize>,
        /// Engine spec for simulated workers
        #[arg(long)]
        engine: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ArchArg::Service)]
        architecture: ArchArg,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SHARD_SIZE)]
        shard_size: usize,
        #[arg(long, default_value_t = DEFAULT_RETRY_LIMIT)]
        retry_limit: u32,
        #[arg(long, default_value = "job")]
        job_id: String,
        /// Per-shard timing CSV
        #[arg(long)]
        timing_csv: Option<PathBuf>,
        /// Where to write the job summary (default stdout)
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Sequential throughput over growing artificial corpora
    BenchSeq {
        #[arg(long)]
        engine: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "100,1000,10000,100000")]
        sentences: Vec<usize>,
        #[arg(long)]
        base: Option<PathBuf>,
        /// Label for the system column
        #[arg(long, default_value = "seq.")]
        system: String,
        #[command(flatten)]
        out: ReportArgs,
    },
    /// Throughput for each node count on the same corpus
    BenchScaling {
        #[arg(long)]
        engine: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,16")]
        nodes: Vec<usize>,
        #[arg(long, default_value_t = 2_000_000)]
        words: usize,
        #[arg(long, default_value_t = DEFAULT_SHARD_SIZE)]
        shard_size: usize,
        /// Virtual clocks and in-process workers
        #[arg(long)]
        simulate: bool,
        #[arg(long, value_enum, default_value_t = ArchArg::Service)]
        architecture: ArchArg,
        /// Fixed per-job overhead in seconds (simulate only)
        #[arg(long, default_value_t = 0.0)]
        overhead: f64,
        #[arg(long)]
        base: Option<PathBuf>,
        #[command(flatten)]
        out: ReportArgs,
    },
    /// Shard size where two architectures' cost lines cross
    Breakeven {
        /// CSV with columns system,sentences,seconds
        #[arg(long)]
        observations: PathBuf,
        /// System whose line is `a` (default: first in file)
        #[arg(long)]
        a: Option<String>,
        /// System whose line is `b` (default: second in file)
        #[arg(long)]
        b: Option<String>,
        /// Ignore rows smaller than this
        #[arg(long, default_value_t = 0.0)]
        min_size: f64,
    },
    /// Print a reference dataset with recomputed rates
    Reference {
        /// Dataset name; omit to list them
        name: Option<String>,
    },
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ArchArg {
    Simple,
    Service,
}

impl From<ArchArg> for Architecture {
    fn from(a: ArchArg) -> Self {
        match a {
            ArchArg::Simple => Architecture::Simple,
            ArchArg::Service => Architecture::Service,
        }
    }
}

type Result<T> = std::result::Result<T, Box<dyn Error>>;

/// Usage problems found after parsing; reported like clap's own.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl Error for Usage {}

fn usage(msg: impl Into<String>) -> Box<dyn Error> {
    Box::new(Usage(msg.into()))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()).into()),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn load_engine(path: &Path) -> Result<EngineSpec> {
    Ok(EngineSpec::from_file(path)?)
}

fn base_sentence(base: Option<&Path>) -> Result<String> {
    match base {
        None => Ok(DEFAULT_BASE_SENTENCE.to_owned()),
        Some(path) => read_text(path)?
            .lines()
            .find(|l| !l.trim().is_empty())
            .map(str::to_owned)
            .ok_or_else(|| format!("{}: no sentence found", path.display()).into()),
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::GenData {
            sentences,
            base,
            output,
        } => {
            let doc = generate_artificial(sentences, &base_sentence(base.as_deref())?)?;
            info!(
                "generated {} sentences, {} words",
                doc.len(),
                doc.total_words()
            );
            emit(output.as_deref(), &doc.to_text())
        }
        Command::Translate {
            engine,
            input,
            out,
            report,
        } => {
            let spec = load_engine(&engine)?;
            let doc = segment_sentences(
                &fs::read(&input).map_err(|e| format!("{}: {e}", input.display()))?,
            )?;
            let (translated, mut r) = run_sequential(&spec, &doc, "seq.")?;
            r.context.system = format!("seq. {}", spec.kind);
            fs::write(&out, translated.to_text()).map_err(|e| format!("{}: {e}", out.display()))?;
            emit(report.as_deref(), &bench::throughput_table(&[r]))
        }
        Command::Worker {
            listen,
            engine,
            architecture,
            max_queue,
        } => {
            let mut config = WorkerConfig::new(&listen, load_engine(&engine)?, architecture.into());
            config.max_queue = max_queue;
            let arch = config.architecture;
            let worker = Worker::bind(config)?;
            eprintln!(
                "worker listening on {} ({arch} architecture)",
                worker.local_addr()?
            );
            let stats = worker.serve()?;
            info!("worker stopped after {} request(s)", stats.requests_served);
            Ok(())
        }
        Command::RunJob {
            workers,
            simulate,
            engine,
            architecture,
            input,
            out,
            shard_size,
            retry_limit,
            job_id,
            timing_csv: timing_path,
            report,
        } => {
            let doc = segment_sentences(
                &fs::read(&input).map_err(|e| format!("{}: {e}", input.display()))?,
            )?;
            let result = match (simulate, workers) {
                (Some(k), _) => {
                    let spec = load_engine(
                        engine
                            .as_deref()
                            .ok_or_else(|| usage("--simulate needs --engine"))?,
                    )?;
                    let job = Job::simulated(&job_id, doc, k)
                        .with_shard_size(shard_size)
                        .with_retry_limit(retry_limit);
                    simulate_job(&job, &SimCluster::new(spec, architecture.into()))?
                }
                (None, Some(pool)) => {
                    let addrs = parse_worker_pool(&read_text(&pool)?);
                    if addrs.is_empty() {
                        return Err(format!("{}: no workers listed", pool.display()).into());
                    }
                    let job = Job::new(&job_id, doc, addrs)
                        .with_shard_size(shard_size)
                        .with_retry_limit(retry_limit);
                    run_job(&job)?
                }
                (None, None) => return Err(usage("either --workers or --simulate is required")),
            };
            fs::write(&out, result.output.to_text())
                .map_err(|e| format!("{}: {e}", out.display()))?;
            if let Some(path) = timing_path {
                fs::write(&path, timing_csv(&result))
                    .map_err(|e| format!("{}: {e}", path.display()))?;
            }
            emit(report.as_deref(), &JobReport(&result).to_string())
        }
        Command::BenchSeq {
            engine,
            sentences,
            base,
            system,
            out,
        } => {
            let spec = load_engine(&engine)?;
            let reports =
                run_sequential_sweep(&spec, &sentences, &base_sentence(base.as_deref())?, &system)?;
            let text = match out.format {
                Format::Table => bench::throughput_table(&reports),
                Format::Csv => bench::throughput_csv(&reports),
            };
            emit(out.output.as_deref(), &text)
        }
        Command::BenchScaling {
            engine,
            nodes,
            words,
            shard_size,
            simulate,
            architecture,
            overhead,
            base,
            out,
        } => {
            if nodes.contains(&0) {
                return Err(usage("node counts must be at least 1"));
            }
            if overhead != 0.0 && !simulate {
                return Err(usage("--overhead only applies with --simulate"));
            }
            let config = ScalingConfig::new(load_engine(&engine)?, words, nodes)
                .with_shard_size(shard_size)
                .with_simulate(simulate)
                .with_architecture(architecture.into())
                .with_overhead(overhead)
                .with_base_sentence(&base_sentence(base.as_deref())?);
            let report = run_scaling_experiment(&config)?;
            let text = match out.format {
                Format::Table => bench::scaling_table(&report),
                Format::Csv => bench::scaling_csv(&report),
            };
            emit(out.output.as_deref(), &text)
        }
        Command::Breakeven {
            observations,
            a,
            b,
            min_size,
        } => {
            let obs: Vec<_> = parse_observations(&read_text(&observations)?)?
                .into_iter()
                .filter(|o| o.size >= min_size)
                .collect();
            let mut systems: Vec<&str> = Vec::new();
            for o in &obs {
                if !systems.contains(&o.system.as_str()) {
                    systems.push(&o.system);
                }
            }
            let pick = |given: &Option<String>, idx: usize| -> Result<String> {
                match given {
                    Some(s) => Ok(s.clone()),
                    None => systems.get(idx).map(|s| (*s).to_owned()).ok_or_else(|| {
                        format!("observations name fewer than {} systems", idx + 1).into()
                    }),
                }
            };
            let (name_a, name_b) = (pick(&a, 0)?, pick(&b, 1)?);
            let model_a = fit_cost_model(&observations_for(&obs, &name_a))
                .map_err(|e| format!("{name_a}: {e}"))?;
            let model_b = fit_cost_model(&observations_for(&obs, &name_b))
                .map_err(|e| format!("{name_b}: {e}"))?;
            let mut text = String::new();
            for (name, m) in [(&name_a, &model_a), (&name_b, &model_b)] {
                text.push_str(&format!(
                    "{name}: t = {:.6} + {:.6e} * m  (max rel err {:.2}%)\n",
                    m.setup_s,
                    m.per_word_p,
                    100.0 * m.residual
                ));
            }
            match find_breakeven_shard(&model_a, &model_b) {
                Some(m) => text.push_str(&format!("break-even: {m:.1} sentences\n")),
                None => text.push_str("break-even: none\n"),
            }
            emit(None, &text)
        }
        Command::Reference { name } => match name {
            None => {
                let names: Vec<&str> = reference::ALL.iter().map(|(n, _)| *n).collect();
                emit(None, &(names.join("\n") + "\n"))
            }
            Some(name) => {
                let rows = reference::dataset(&name)
                    .ok_or_else(|| usage(format!("unknown dataset '{name}'")))?;
                emit(None, &bench::reference_table(rows))
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => LevelFilter::Warn,
        1 => LevelFilter::Info,
        _ => LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .target(env_logger::Target::Stderr)
        .init();

    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<Usage>() => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = e.source();
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(2)
        }
    }
}
