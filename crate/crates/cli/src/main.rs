use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use derivclust::embeddings::{load_embeddings_text, FrequencyTable, DEFAULT_MIN_FREQ};
use derivclust::experiment::{gen_synthetic, ExperimentConfig, SyntheticSpec};
use derivclust::lexnet::parse_network;
use derivclust::pipeline::{self, Evaluation};
use derivclust::signature::ClassMap;
use derivclust::{Error, Execution};

/// Clusters derivational relations by the difference of their word embeddings.
#[derive(Parser)]
#[command(name = "derivclust", version, about)]
struct Cli {
    /// Random seed; overrides the seed in an experiment config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Leave the timestamp out of JSON reports.
    #[arg(long, global = true)]
    no_timestamp: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract parent-child pairs from a DeriNet TSV file.
    ExtractPairs {
        network: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Annotate pairs with their derivation type and class.
    Signatures(SignaturesArgs),
    /// Cluster difference vectors and score them against the classes.
    Evaluate(EvaluateArgs),
    /// Write a synthetic difference dataset with known classes.
    GenSynthetic(SyntheticArgs),
}

#[derive(Args)]
struct SignaturesArgs {
    pairs: PathBuf,
    #[arg(short, long)]
    out: PathBuf,
    /// Class map TSV; the bundled Czech map is used when absent.
    #[arg(long)]
    classmap: Option<PathBuf>,
    #[arg(long, default_value_t = 250)]
    min_type_count: usize,
    /// Corpus frequencies; pairs with a rarer lemma are not counted.
    #[arg(long)]
    freq: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MIN_FREQ)]
    min_freq: u64,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Annotated pairs from `signatures`.
    #[arg(required_unless_present = "diffs", conflicts_with = "diffs")]
    pairs: Option<PathBuf>,
    #[arg(long, requires = "pairs")]
    embeddings: Option<PathBuf>,
    #[arg(long, requires = "pairs")]
    freq: Option<PathBuf>,
    /// Ready-made difference dataset instead of pairs and embeddings.
    #[arg(long)]
    diffs: Option<PathBuf>,
    /// `key = value` experiment settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for the report files.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct SyntheticArgs {
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long, default_value_t = 21)]
    classes: usize,
    #[arg(long, default_value_t = 250)]
    per_class: usize,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 0.05)]
    sigma: f64,
    /// Scale each vector by a log-uniform factor in [MIN, MAX].
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"])]
    scale: Option<Vec<f64>>,
}

/// An error with its exit code: 1 for bad data, 2 for usage and I/O.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_io() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure {
        code: 2,
        message: format!("{}: {e}", path.display()),
    }
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path).map(BufReader::new).map_err(|e| io_failure(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| io_failure(path, e))
}

/// Runs `f` on a buffered writer for `path`, then flushes it.
fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> derivclust::Result<()>) -> Result<(), Failure> {
    let mut w = create(path)?;
    f(&mut w).map_err(|e| in_file(path, e))?;
    w.flush().map_err(|e| io_failure(path, e))
}

fn in_file(path: &Path, e: Error) -> Failure {
    let mut f = Failure::from(e);
    f.message = format!("{}: {}", path.display(), f.message);
    f
}

fn read_with<T>(path: &Path, f: impl FnOnce(BufReader<File>) -> derivclust::Result<T>) -> Result<T, Failure> {
    f(open(path)?).map_err(|e| in_file(path, e))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("derivclust: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        set_threads(n)?;
    }
    let exec = Execution::default();
    match cli.command {
        Command::ExtractPairs { network, out } => {
            let net = read_with(&network, parse_network)?;
            let pairs = net.extract_pairs();
            write_file(&out, |w| pipeline::write_pairs(w, &pairs))?;
            eprintln!("{} lexemes, {} relations", net.len(), pairs.len());
        }
        Command::Signatures(args) => signatures(args)?,
        Command::Evaluate(args) => evaluate(args, cli.seed, !cli.no_timestamp, exec)?,
        Command::GenSynthetic(args) => {
            let mut spec = SyntheticSpec::new(args.classes, args.per_class, args.dim, args.sigma, cli.seed.unwrap_or(0));
            spec.scale_range = args.scale.map(|v| (v[0], v[1]));
            let data = gen_synthetic(&spec)?;
            write_file(&args.out, |w| pipeline::write_diffs(w, &data))?;
        }
    }
    Ok(())
}

#[cfg(feature = "parallel")]
fn set_threads(n: usize) -> Result<(), Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure {
            code: 2,
            message: format!("cannot start {n} threads: {e}"),
        })
}

#[cfg(not(feature = "parallel"))]
fn set_threads(_: usize) -> Result<(), Failure> {
    Ok(())
}

fn signatures(args: SignaturesArgs) -> Result<(), Failure> {
    let pairs = read_with(&args.pairs, pipeline::read_pairs)?;
    let map = match &args.classmap {
        Some(path) => read_with(path, ClassMap::parse)?,
        None => ClassMap::czech(),
    };
    let freq = args.freq.as_deref().map(|p| read_with(p, FrequencyTable::parse)).transpose()?;
    let (rows, summary) = pipeline::annotate_pairs(
        &pairs,
        &map,
        args.min_type_count,
        freq.as_ref().map(|f| (f, args.min_freq)),
    )?;
    write_file(&args.out, |w| pipeline::write_annotated(w, &rows))?;

    let counts = &summary.counts;
    let instances = |h: &derivclust::signature::TypeHistogram| h.values().sum::<usize>();
    eprintln!(
        "{} pairs: {} degenerate, {} irregular, {} below frequency threshold",
        pairs.len(),
        counts.degenerate,
        counts.irregular,
        summary.low_frequency
    );
    eprintln!(
        "types before filtering: {} ({} instances); kept with count >= {}: {} ({} instances)",
        counts.histogram.len(),
        instances(&counts.histogram),
        args.min_type_count,
        summary.kept.len(),
        instances(&summary.kept)
    );
    for (sig, n) in &summary.kept {
        eprintln!("  {n}\t{sig}\t{}", map.class_of(sig));
    }
    Ok(())
}

fn evaluate(args: EvaluateArgs, seed: Option<u64>, timestamp: bool, exec: Execution) -> Result<(), Failure> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
            ExperimentConfig::parse(&text).map_err(|e| in_file(path, e))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }

    let ev: Evaluation = match (&args.pairs, &args.diffs) {
        (Some(pairs_path), _) => {
            let emb_path = args.embeddings.as_deref().ok_or_else(|| Failure {
                code: 2,
                message: "--embeddings is required when evaluating pairs".into(),
            })?;
            let rows = read_with(pairs_path, pipeline::read_annotated)?;
            let table = read_with(emb_path, load_embeddings_text)?;
            if table.duplicates() > 0 {
                eprintln!(
                    "warning: {}: {} duplicate tokens, last occurrence kept",
                    emb_path.display(),
                    table.duplicates()
                );
            }
            let freq = args.freq.as_deref().map(|p| read_with(p, FrequencyTable::parse)).transpose()?;
            pipeline::evaluate_pairs(&rows, &table, freq.as_ref(), &cfg, exec)?
        }
        (None, Some(diffs_path)) => {
            let data = read_with(diffs_path, pipeline::read_diffs)?;
            pipeline::evaluate_diffs(&data, &cfg, exec)?
        }
        (None, None) => unreachable!("clap requires pairs or --diffs"),
    };

    fs::create_dir_all(&args.out).map_err(|e| io_failure(&args.out, e))?;
    let ts = timestamp.then(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()));
    let json = pipeline::report_json(&ev, &cfg, ts)?;
    let json_path = args.out.join("report.json");
    fs::write(&json_path, json).map_err(|e| io_failure(&json_path, e))?;
    write_file(&args.out.join("report.tsv"), |w| pipeline::write_report_tsv(w, &[&ev.report]))?;
    write_file(&args.out.join("per_class.tsv"), |w| pipeline::write_per_class_tsv(w, &ev.report))?;
    write_file(&args.out.join("exclusions.tsv"), |w| pipeline::write_exclusions_tsv(w, &ev.exclusions))?;

    let r = &ev.report;
    eprintln!(
        "{} on {} items, {} runs: cls {:.1}, H {:.2}, C {:.2}, V {:.2}, A {:.2}; {} pairs excluded",
        r.method,
        r.items,
        r.runs.len(),
        r.mean_cls,
        100.0 * r.mean_h,
        100.0 * r.mean_c,
        100.0 * r.mean_v,
        100.0 * r.mean_accuracy,
        ev.exclusions.total()
    );
    Ok(())
}
