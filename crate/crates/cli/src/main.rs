use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use hkg_core::analytics;
use hkg_core::corpus::{self, FixtureIndex, RetrievalConfig};
use hkg_core::extraction::{self, HeuristicExtractor, Lexicon, TupleSet};
use hkg_core::hkg::{self, CentralConceptParams, Hkg};
use hkg_core::quality::{self, DegradationSpec, MatchCriterion, QualityReport};
use hkg_core::store::{self, ArtifactKind};
use hkg_core::Execution;

/// Build, degrade, score and serve hierarchical knowledge graphs.
#[derive(Debug, Parser)]
#[command(name = "hkg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract tuples from a corpus and build the graph hierarchy.
    Build(BuildArgs),
    /// Synthesize a degraded graph from a gold graph.
    Degrade(DegradeArgs),
    /// Score a system tuple set against gold.
    Score(ScoreArgs),
    /// Compute interaction metrics from an event log.
    Metrics(MetricsArgs),
    /// Serve saved graphs over HTTP.
    Serve(ServeArgs),
    /// Rank documents of a local index against a query.
    Retrieve(RetrieveArgs),
}

#[derive(Debug, Args)]
struct BuildArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    gazetteer: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "gold")]
    name: String,
    #[arg(long, default_value_t = 3)]
    min_degree: usize,
    #[arg(long, default_value_t = 15)]
    max_count: usize,
    /// Fall back to the top `max_count` nodes when thresholding empties out.
    #[arg(long)]
    relax_ties: bool,
    /// Maximum documents per partition.
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Args)]
struct DegradeArgs {
    /// Gold graph or tuple artifact.
    #[arg(long)]
    gold: PathBuf,
    /// JSON file with `precision`, `recall` and `seed`.
    #[arg(long, conflicts_with_all = ["precision", "recall", "seed"])]
    spec: Option<PathBuf>,
    #[arg(long, required_unless_present = "spec")]
    precision: Option<f64>,
    #[arg(long, required_unless_present = "spec")]
    recall: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Artifact name; defaults to `auto-p<P>-r<R>-s<seed>`.
    #[arg(long)]
    name: Option<String>,
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long)]
    system: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    #[arg(long)]
    log: PathBuf,
    /// Also write one CSV row per session here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    artifacts: PathBuf,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, default_value_t = hkg::DEFAULT_HIDE_THRESHOLD)]
    hide_threshold: u64,
}

#[derive(Debug, Args)]
struct RetrieveArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    query: String,
    #[arg(long, default_value_t = 10)]
    n: usize,
    /// URL substring filter; empty disables it.
    #[arg(long, default_value = "wikipedia")]
    domain: String,
}

enum Failure {
    Usage(String),
    Runtime(&'static str, anyhow::Error),
}

type Outcome = Result<(), Failure>;

trait Stage<T> {
    fn stage(self, name: &'static str) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Stage<T> for Result<T, E> {
    fn stage(self, name: &'static str) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(name, e.into()))
    }
}

fn require_file(flag: &str, path: &Path) -> Outcome {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("--{flag}: no such file: {}", path.display())))
    }
}

fn usage_check(ok: bool, msg: impl FnOnce() -> String) -> Outcome {
    if ok {
        Ok(())
    } else {
        Err(Failure::Usage(msg()))
    }
}

fn exec(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Outcome {
    let text = serde_json::to_string_pretty(value).stage("output")?;
    println!("{text}");
    Ok(())
}

fn build(a: BuildArgs) -> Outcome {
    require_file("manifest", &a.manifest)?;
    require_file("gazetteer", &a.gazetteer)?;
    usage_check(a.min_degree >= 1, || "--min-degree: must be at least 1".into())?;
    usage_check(a.n >= 1, || "--n: must be at least 1".into())?;
    let params = CentralConceptParams {
        min_degree: a.min_degree,
        max_count: a.max_count,
        relax_ties: a.relax_ties,
    };
    let retrieval = RetrievalConfig {
        n: a.n,
        ..RetrievalConfig::default()
    };

    let corpus = corpus::load_corpus_with(&a.manifest, &retrieval).stage("corpus")?;
    let lexicon = Lexicon::load(&a.gazetteer).stage("extraction")?;
    let extractor = HeuristicExtractor::new(lexicon);
    let tuples =
        extraction::run_pipeline_with(&corpus, &extractor, exec(a.sequential)).stage("extraction")?;
    let hkg = hkg::build_hkg(&corpus, &tuples, &params, exec(a.sequential)).stage("hkg")?;

    std::fs::create_dir_all(&a.out)
        .with_context(|| format!("creating {}", a.out.display()))
        .stage("store")?;
    store::save(&corpus, a.out.join("corpus.json")).stage("store")?;
    store::save(&tuples, a.out.join(format!("{}.tuples.json", a.name))).stage("store")?;
    let jsonl = a.out.join(format!("{}.tuples.jsonl", a.name));
    let file = std::fs::File::create(&jsonl)
        .with_context(|| format!("creating {}", jsonl.display()))
        .stage("store")?;
    tuples
        .write_jsonl(std::io::BufWriter::new(file))
        .with_context(|| format!("writing {}", jsonl.display()))
        .stage("store")?;
    let hash = store::save(&hkg, a.out.join(format!("{}.hkg.json", a.name))).stage("store")?;

    println!("content_hash {hash}");
    println!(
        "documents {} tuples {} nodes {} edges {}",
        corpus.documents.len(),
        tuples.len(),
        hkg.detail.nodes.len(),
        hkg.detail.edges.len()
    );
    for doc in hkg.document_ids() {
        println!("central {doc} {}", hkg.minimaps[doc].len());
    }
    Ok(())
}

/// Tuples from either a tuple artifact or a graph artifact.
fn load_tuples(path: &Path) -> anyhow::Result<(TupleSet, Option<Hkg>)> {
    let env = store::load_envelope(path)?;
    match env.kind {
        ArtifactKind::Tuples => Ok((store::load(path)?, None)),
        ArtifactKind::Hkg => {
            let hkg: Hkg = store::load(path)?;
            Ok((hkg.detail.tuples(), Some(hkg)))
        }
        other => anyhow::bail!("{}: expected a tuples or hkg artifact, found {other}", path.display()),
    }
}

fn criterion(theta: f64) -> Result<MatchCriterion, Failure> {
    MatchCriterion::new(theta).map_err(|e| Failure::Usage(format!("--theta: {e}")))
}

fn degrade(a: DegradeArgs) -> Outcome {
    require_file("gold", &a.gold)?;
    let spec = match &a.spec {
        Some(path) => {
            require_file("spec", path)?;
            let text = std::fs::read_to_string(path).stage("degrade")?;
            serde_json::from_str::<DegradationSpec>(&text)
                .map_err(|e| Failure::Usage(format!("--spec: {}: {e}", path.display())))?
        }
        None => DegradationSpec {
            precision: a.precision.unwrap_or(1.0),
            recall: a.recall.unwrap_or(1.0),
            seed: a.seed,
        },
    };
    spec.validate()
        .map_err(|e| Failure::Usage(format!("--precision/--recall: {e}")))?;
    let c = criterion(a.theta)?;
    let name = a.name.clone().unwrap_or_else(|| {
        format!("auto-p{}-r{}-s{}", spec.precision, spec.recall, spec.seed)
    });

    let (gold, gold_hkg) = load_tuples(&a.gold).stage("store")?;
    let system = quality::degrade(&gold, &spec).stage("degrade")?;
    let report = quality::score(&system, &gold, &c);
    std::fs::create_dir_all(&a.out)
        .with_context(|| format!("creating {}", a.out.display()))
        .stage("store")?;
    store::save(&system, a.out.join(format!("{name}.tuples.json"))).stage("store")?;
    let hash = match gold_hkg {
        Some(g) => {
            let hkg = hkg::build_hkg_from_collection(g.collection, &system, &g.params, Execution::Parallel)
                .stage("hkg")?;
            store::save(&hkg, a.out.join(format!("{name}.hkg.json"))).stage("store")?
        }
        None => system.content_hash(),
    };
    store::save(&report, a.out.join(format!("{name}.report.json"))).stage("store")?;
    println!("content_hash {hash}");
    print_json(&report)
}

fn score(a: ScoreArgs) -> Outcome {
    require_file("system", &a.system)?;
    require_file("gold", &a.gold)?;
    let c = criterion(a.theta)?;
    let (system, _) = load_tuples(&a.system).stage("store")?;
    let (gold, _) = load_tuples(&a.gold).stage("store")?;
    let report: QualityReport = quality::score(&system, &gold, &c);
    print_json(&report)
}

fn metrics(a: MetricsArgs) -> Outcome {
    require_file("log", &a.log)?;
    let events = store::read_events(&a.log).stage("store")?;
    let sessions: Vec<Vec<_>> = analytics::group_by_session(events).into_values().collect();
    let per_session = analytics::session_metrics_batch(&sessions, Execution::Parallel)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        .stage("analytics")?;
    let aggregate = analytics::aggregate(&per_session).stage("analytics")?;
    if let Some(path) = &a.csv {
        let file = std::fs::File::create(path)
            .with_context(|| format!("creating {}", path.display()))
            .stage("output")?;
        analytics::write_csv(&per_session, file).stage("output")?;
    }
    print_json(&serde_json::json!({
        "sessions": per_session,
        "aggregate": aggregate,
    }))
}

fn serve(a: ServeArgs) -> Outcome {
    usage_check(a.artifacts.is_dir(), || {
        format!("--artifacts: no such directory: {}", a.artifacts.display())
    })?;
    let config = hkg_server::ServerConfig {
        artifacts: a.artifacts,
        port: a.port,
        log: a.log,
        hide_threshold: a.hide_threshold,
    };
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .stage("serve")?;
    runtime.block_on(hkg_server::serve(config)).stage("serve")
}

fn retrieve(a: RetrieveArgs) -> Outcome {
    require_file("index", &a.index)?;
    usage_check(a.n >= 1, || "--n: must be at least 1".into())?;
    let index = FixtureIndex::load(&a.index).stage("corpus")?;
    let cfg = RetrievalConfig {
        n: a.n,
        domain_filter: a.domain,
    };
    let partition = corpus::retrieve(&a.query, &cfg, &index).stage("corpus")?;
    print_json(&partition)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Build(a) => build(a),
        Command::Degrade(a) => degrade(a),
        Command::Score(a) => score(a),
        Command::Metrics(a) => metrics(a),
        Command::Serve(a) => serve(a),
        Command::Retrieve(a) => retrieve(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(stage, err)) => {
            eprintln!("error[{stage}]: {err:#}");
            ExitCode::from(1)
        }
    }
}
