use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use liblearn_cli::{
    export_graph, resume_online, run_online, summarize_runs, ConditionFlags, RunConfig,
};
use liblearn_core::compress::{compress, CompressionConfig};
use liblearn_core::domains::{self, load_domain, DomainSpec};
use liblearn_core::expr::{self, Expr};
use liblearn_core::library::{Library, LibraryFile};
use liblearn_core::task::{read_programs_jsonl, write_tasks_jsonl};
use liblearn_llm::autodoc::{document_library, AutoDocConfig};
use liblearn_llm::backend::ScriptedBackend;

#[derive(Parser)]
#[command(
    name = "liblearn",
    version,
    about = "Learn reusable program libraries from synthesis tasks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the online learning loop and write a run directory.
    Run(RunArgs),
    /// Solve-rate vs. enumeration-budget curve under a frozen library.
    Offline(OfflineArgs),
    /// Compress a program corpus and print the accepted abstractions.
    Compress(CompressArgs),
    /// Name and document a library's anonymous abstractions.
    Autodoc(AutodocArgs),
    /// Export a library's invocation structure as DOT.
    Graph(GraphArgs),
    /// Aggregate final solve rates across run directories.
    Report(ReportArgs),
    /// Generate a task corpus deterministically.
    GenCorpus(GenCorpusArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML run config; command line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    domain: Option<String>,
    /// Named condition: search-compress, llm-only, llm-compress,
    /// llm-compress-doc, or full.
    #[arg(long)]
    condition: Option<String>,
    /// Scale profile: desk or paper.
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Backend mode: oracle, script, constant, garbage, or http.
    #[arg(long)]
    backend: Option<String>,
    /// JSON file mapping prompt-target patterns to completion texts.
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long)]
    constant: Option<String>,
    #[arg(long)]
    garbage_seed: Option<u64>,
    /// Run directory to create (default: runs/<domain>-<condition>-...).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Resume an existing run directory from its latest checkpoint.
    #[arg(long, conflicts_with_all = ["config", "domain", "condition", "profile", "seed", "out"])]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct OfflineArgs {
    #[arg(long, default_value = "toylist")]
    domain: String,
    /// Library JSONL (e.g. a run's library_final.jsonl); default base DSL.
    #[arg(long)]
    library: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    split: String,
    /// Candidate-count budget ladder.
    #[arg(long, value_delimiter = ',')]
    budgets: Option<Vec<u64>>,
    #[arg(long, default_value_t = 30.0)]
    timeout: f64,
    #[arg(long, default_value_t = 4)]
    workers: usize,
    /// JSON report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Plot-ready CSV path.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct CompressArgs {
    #[arg(long, default_value = "toylist")]
    domain: String,
    /// Programs JSONL with {"id", "program"} records.
    #[arg(long)]
    programs: PathBuf,
    #[arg(long, default_value_t = 10)]
    iterations: usize,
    #[arg(long, default_value_t = 3)]
    max_arity: usize,
    #[arg(long, default_value_t = 2)]
    min_sites: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AutodocArgs {
    #[arg(long, default_value = "toylist")]
    domain: String,
    #[arg(long)]
    library: PathBuf,
    /// Scripted documentation answers: JSON anon-name pattern -> completions.
    #[arg(long)]
    script: PathBuf,
    /// Optional frontier programs JSONL for usage examples.
    #[arg(long)]
    programs: Option<PathBuf>,
    /// Documented library JSONL output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GraphArgs {
    #[arg(long, default_value = "toylist")]
    domain: String,
    #[arg(long)]
    library: Option<PathBuf>,
    /// Solved programs JSONL used to sample per-abstraction task examples.
    #[arg(long)]
    programs: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directories to aggregate.
    #[arg(required = true)]
    dirs: Vec<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct GenCorpusArgs {
    #[arg(long, default_value = "stringrw")]
    domain: String,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    train: usize,
    #[arg(long, default_value_t = 30)]
    test: usize,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Run(args) => cmd_run(args),
        Command::Offline(args) => cmd_offline(args),
        Command::Compress(args) => cmd_compress(args),
        Command::Autodoc(args) => cmd_autodoc(args),
        Command::Graph(args) => cmd_graph(args),
        Command::Report(args) => cmd_report(args),
        Command::GenCorpus(args) => cmd_gen_corpus(args),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, text).with_context(|| path.display().to_string())?;
            println!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn load_library(domain: &DomainSpec, path: Option<&Path>) -> Result<Library> {
    match path {
        None => Ok(domain.library.clone()),
        Some(path) => {
            let text =
                std::fs::read_to_string(path).with_context(|| path.display().to_string())?;
            let file = LibraryFile::from_jsonl(&text)?;
            Ok(Library::restore(domain.library.clone(), &file)?)
        }
    }
}

fn load_programs(
    lib: &Library,
    path: &Path,
) -> Result<Vec<(String, Expr)>> {
    let text = std::fs::read_to_string(path).with_context(|| path.display().to_string())?;
    let entries = read_programs_jsonl(&text, lib)?;
    Ok(entries
        .into_iter()
        .enumerate()
        .map(|(i, (id, program))| (id.unwrap_or_else(|| format!("program_{i}")), program))
        .collect())
}

fn parse_backend_mode(name: &str) -> Result<liblearn_cli::BackendMode> {
    use liblearn_cli::BackendMode::*;
    Ok(match name {
        "oracle" => Oracle,
        "script" => Script,
        "constant" => Constant,
        "garbage" => Garbage,
        "http" => Http,
        other => bail!("unknown backend mode {other:?}; expected oracle, script, constant, garbage, or http"),
    })
}

fn default_run_dir(cfg: &RunConfig) -> PathBuf {
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    PathBuf::from("runs").join(format!(
        "{}-{}-seed{}-{stamp}",
        cfg.domain,
        cfg.condition.name(),
        cfg.seed
    ))
}

fn print_summary(summary: &liblearn_cli::RunSummary) {
    println!("run directory: {}", summary.root.display());
    println!("iterations run: {}", summary.iterations_run);
    if let Some(m) = &summary.final_metrics {
        println!(
            "final train solve: {}/{} ({:.1}%)",
            m.train_solved, m.train_total, m.train_solve_pct
        );
        if let (Some(solved), Some(total), Some(pct)) =
            (m.test_solved, m.test_total, m.test_solve_pct)
        {
            println!("final test solve: {solved}/{total} ({pct:.1}%)");
        }
        println!(
            "library: {} abstractions, total body size {}",
            m.abstractions, m.library_size
        );
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    if let Some(dir) = args.resume {
        let summary = resume_online(&dir, args.iterations)?;
        print_summary(&summary);
        return Ok(());
    }
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::for_domain(args.domain.as_deref().unwrap_or("toylist")),
    };
    if let Some(domain) = args.domain {
        cfg.domain = domain;
    }
    if let Some(name) = &args.condition {
        cfg.condition = ConditionFlags::named(name)
            .with_context(|| format!("unknown condition {name:?}"))?;
    }
    if let Some(profile) = &args.profile {
        cfg.apply_profile(profile)?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(iterations) = args.iterations {
        cfg.iterations = iterations;
    }
    if let Some(batch_size) = args.batch_size {
        cfg.batch_size = batch_size;
    }
    if let Some(mode) = &args.backend {
        cfg.backend.mode = parse_backend_mode(mode)?;
    }
    if let Some(script) = args.script {
        cfg.backend.script = Some(script);
    }
    if let Some(constant) = args.constant {
        cfg.backend.constant = constant;
    }
    if let Some(garbage_seed) = args.garbage_seed {
        cfg.backend.garbage_seed = garbage_seed;
    }
    cfg.validate()?;
    let out = args.out.unwrap_or_else(|| default_run_dir(&cfg));
    let summary = run_online(&cfg, &out)?;
    print_summary(&summary);
    Ok(())
}

fn cmd_offline(args: OfflineArgs) -> Result<()> {
    let domain = load_domain(&args.domain)?;
    let lib = load_library(&domain, args.library.as_deref())?;
    let tasks = match args.split.as_str() {
        "train" => &domain.train,
        "test" => &domain.test,
        other => bail!("unknown split {other:?}; expected train or test"),
    };
    let budgets = args
        .budgets
        .unwrap_or_else(|| liblearn_cli::DEFAULT_BUDGETS.to_vec());
    let points = liblearn_cli::solve_curve(
        &lib,
        tasks,
        &budgets,
        args.timeout,
        liblearn_core::eval::DEFAULT_STEP_BUDGET,
        args.workers,
    );
    for p in &points {
        println!(
            "budget {:>9}: {}/{} solved ({:.1}%)",
            p.max_candidates, p.solved, p.total, p.solve_pct
        );
    }
    let report = liblearn_cli::OfflineReport {
        domain: args.domain.clone(),
        split: args.split.clone(),
        library: args
            .library
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "base".into()),
        points,
    };
    if let Some(csv) = &args.csv {
        emit(Some(csv), &liblearn_cli::offline::to_csv(&report))?;
    }
    if args.out.is_some() || args.csv.is_none() {
        let json = serde_json::to_string_pretty(&report)?;
        emit(args.out.as_deref(), &format!("{json}\n"))?;
    }
    Ok(())
}

fn cmd_compress(args: CompressArgs) -> Result<()> {
    let domain = load_domain(&args.domain)?;
    let programs = load_programs(&domain.library, &args.programs)?;
    let corpus: Vec<Expr> = programs.into_iter().map(|(_, p)| p).collect();
    let cfg = CompressionConfig {
        iterations: args.iterations,
        max_arity: args.max_arity,
        min_sites: args.min_sites,
    };
    let outcome = compress(&corpus, &cfg);
    let before: usize = corpus.iter().map(Expr::size).sum();
    let after: usize = outcome.rewritten.iter().map(Expr::size).sum();
    println!(
        "{} abstractions, corpus {before} -> {after}, ratio {:.3}",
        outcome.accepted.len(),
        outcome.ratio
    );
    let report = serde_json::json!({
        "ratio": outcome.ratio,
        "corpus_before": before,
        "corpus_after": after,
        "abstractions": outcome
            .accepted
            .iter()
            .zip(&outcome.bodies)
            .map(|(cand, body)| {
                serde_json::json!({
                    "name": cand.anon_name,
                    "body": expr::print(body).expect("abstraction bodies print"),
                    "arity": cand.pattern.arity,
                    "sites": cand.sites,
                    "utility": cand.utility,
                    "corpus_before": cand.corpus_before,
                    "corpus_after": cand.corpus_after,
                })
            })
            .collect::<Vec<_>>(),
        "rewritten": outcome
            .rewritten
            .iter()
            .map(|p| expr::print(p).expect("rewritten programs print"))
            .collect::<Vec<_>>(),
    });
    emit(
        args.out.as_deref(),
        &format!("{}\n", serde_json::to_string_pretty(&report)?),
    )
}

fn cmd_autodoc(args: AutodocArgs) -> Result<()> {
    let domain = load_domain(&args.domain)?;
    let lib = load_library(&domain, Some(&args.library))?;
    let script =
        std::fs::read_to_string(&args.script).with_context(|| args.script.display().to_string())?;
    let mut backend = ScriptedBackend::from_script_json(&script)?;
    let pairs = match &args.programs {
        Some(path) => load_programs(&lib, path)?,
        None => Vec::new(),
    };
    let outcome = document_library(
        &mut backend,
        &lib,
        &domain.header,
        &pairs,
        None,
        &AutoDocConfig::default(),
    );
    for (anon, name) in &outcome.renames {
        println!("renamed {anon} -> {name}");
    }
    for anon in &outcome.skipped {
        println!("skipped {anon}");
    }
    emit(args.out.as_deref(), &outcome.library.to_file().to_jsonl())
}

fn cmd_graph(args: GraphArgs) -> Result<()> {
    let domain = load_domain(&args.domain)?;
    let lib = load_library(&domain, args.library.as_deref())?;
    let solutions = match &args.programs {
        Some(path) => load_programs(&lib, path)?,
        None => Vec::new(),
    };
    emit(args.out.as_deref(), &export_graph(&lib, &solutions))
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let summaries = summarize_runs(&args.dirs)?;
    print!("{}", liblearn_cli::report::render_table(&summaries));
    if let Some(csv) = &args.csv {
        emit(Some(csv), &liblearn_cli::report::to_csv(&summaries))?;
    }
    Ok(())
}

fn cmd_gen_corpus(args: GenCorpusArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out)?;
    let (train, test, ground_truth) = match args.domain.as_str() {
        "stringrw" => {
            let corpus = domains::stringrw::generate_corpus(
                &domains::stringrw::template_families(),
                args.seed,
                args.train,
                args.test,
            );
            (corpus.train, corpus.test, corpus.ground_truth)
        }
        "toylist" => {
            // The toy corpus is a fixed, hand-curated set; size and seed
            // flags do not apply.
            let corpus = domains::toylist::generate_corpus();
            (corpus.train, corpus.test, corpus.ground_truth)
        }
        other => bail!("unknown domain {other:?}; expected stringrw or toylist"),
    };
    std::fs::write(args.out.join("train.jsonl"), write_tasks_jsonl(&train))?;
    std::fs::write(args.out.join("test.jsonl"), write_tasks_jsonl(&test))?;
    std::fs::write(
        args.out.join("ground_truth.jsonl"),
        domains::write_ground_truth_jsonl(&ground_truth),
    )?;
    println!(
        "wrote {} train, {} test tasks to {}",
        train.len(),
        test.len(),
        args.out.display()
    );
    Ok(())
}
