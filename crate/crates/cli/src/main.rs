//! `egoassist`: benchmarks, closed-loop simulations, session analysis,
//! prompt goldens, synthetic data and the HTTP service.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 provider error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand, ValueEnum};
use egoassist_core::bench::BenchOptions;
use egoassist_core::config::{BuildContext, ConfigError, RunConfig};
use egoassist_core::dataset::{expand_videos, write_samples, write_videos};
use egoassist_core::goldens::{check_goldens, repo_goldens_dir, update_goldens};
use egoassist_core::jobs::{
    configured_scripts, load_session_files, rerun_sessions, run_bench, save_study_session,
    BenchKind, BenchRequest, JobError, SessionFile,
};
use egoassist_core::pipelines::PredictorKind;
use egoassist_core::session::analyze::render_comparison;
use egoassist_core::session::assistants::AssistantSpec;
use egoassist_core::session::simulate::simulation_providers;
use egoassist_core::session::{
    analyze_skips, simulate_user, SessionError, SessionReport, StudySession,
};
use egoassist_core::synthetic;
use egoassist_core::ActivityScript;

#[derive(Debug, Parser)]
#[command(
    name = "egoassist",
    version,
    about = "Video-history-grounded activity assistance toolkit"
)]
struct Cli {
    /// TOML configuration file (defaults to $EGOASSIST_CONFIG).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Upper bound on worker threads.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an offline benchmark and write report.json and table.txt.
    Bench(BenchArgs),
    /// Run closed-loop sessions with a simulated user.
    Simulate(SimulateArgs),
    /// Skip breakdown and offline-vs-online comparison over saved sessions.
    Analyze(AnalyzeArgs),
    /// Check or regenerate the prompt goldens.
    Goldens(GoldensArgs),
    /// Write the synthetic datasets, stubs and fixtures.
    Data(DataArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Lta,
    Vpa,
    Rerun,
}

impl From<KindArg> for BenchKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Lta => BenchKind::Lta,
            KindArg::Vpa => BenchKind::Vpa,
            KindArg::Rerun => BenchKind::Rerun,
        }
    }
}

#[derive(Debug, Args)]
struct BenchArgs {
    kind: KindArg,
    /// JSONL benchmark samples.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// JSONL annotated videos, expanded into samples at `--z`.
    #[arg(long)]
    videos: Option<PathBuf>,
    /// Directory of saved sessions (rerun).
    #[arg(long)]
    sessions: Option<PathBuf>,
    /// Synthetic samples to generate when no dataset is given.
    #[arg(long)]
    synthetic: Option<usize>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    z: Option<usize>,
    #[arg(long, default_value = "socratic", value_parser = parse_predictor)]
    predictor: PredictorKind,
    #[arg(long, overrides_with = "no_goal")]
    goal: bool,
    #[arg(long)]
    no_goal: bool,
    #[arg(long)]
    no_text_history: bool,
    #[arg(long)]
    num_examples: Option<usize>,
    #[arg(long)]
    label: Option<String>,
    /// Run directory (prompts/, predictions/, reports/, events/).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    script: String,
    /// oracle, repeat-once, stuck, stub:FILE or remote:URL.
    #[arg(long, default_value = "oracle")]
    assistant: String,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// socratic, vclm or both.
    #[arg(long, default_value = "socratic")]
    predictor: String,
    /// Alternate predictor order across trials.
    #[arg(long)]
    latin_square: bool,
    /// Rotates the latin-square schedule.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Writes sessions/ and events/ here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long)]
    sessions: PathBuf,
    /// Skip the offline rerun of study sessions.
    #[arg(long)]
    no_rerun: bool,
}

#[derive(Debug, Args)]
struct GoldensArgs {
    #[arg(long, conflicts_with = "update")]
    check: bool,
    #[arg(long)]
    update: bool,
    #[arg(long)]
    dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DataArgs {
    #[arg(long, default_value = "data")]
    out: PathBuf,
    #[arg(long, default_value_t = 20)]
    samples: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// Overrides the configured bind address.
    #[arg(long)]
    bind: Option<String>,
}

fn parse_predictor(s: &str) -> Result<PredictorKind, String> {
    s.parse()
}

#[derive(Debug)]
enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
    Provider(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Self::Usage(_) => 1,
            Self::Data(_) => 2,
            Self::Provider(_) => 3,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Self::Usage(e) | Self::Data(e) | Self::Provider(e) => e,
        }
    }
}

impl From<JobError> for Failure {
    fn from(e: JobError) -> Self {
        if e.is_provider() {
            Self::Provider(e.into())
        } else if e.is_usage() {
            Self::Usage(e.into())
        } else {
            Self::Data(e.into())
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Provider(_) => Self::Provider(e.into()),
            _ => Self::Usage(e.into()),
        }
    }
}

impl From<SessionError> for Failure {
    fn from(e: SessionError) -> Self {
        if e.is_provider() {
            Self::Provider(e.into())
        } else {
            Self::Data(e.into())
        }
    }
}

fn data(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Data(e.into())
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(anyhow!(msg.into()))
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.error());
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: Cli) -> CliResult {
    let mut cfg = RunConfig::resolve(cli.config.as_deref())?;
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    match cli.command {
        Command::Bench(a) => bench(&cfg, a),
        Command::Simulate(a) => simulate(&cfg, a),
        Command::Analyze(a) => analyze(&cfg, a),
        Command::Goldens(a) => goldens(a),
        Command::Data(a) => write_data(a),
        Command::Serve(a) => serve(cfg, a),
    }
}

fn bench(cfg: &RunConfig, a: BenchArgs) -> CliResult {
    let kind = BenchKind::from(a.kind);
    let mut req = BenchRequest {
        predictor: a.predictor,
        z: a.z,
        dataset: a.dataset,
        videos: a.videos,
        sessions_dir: a.sessions,
        goal_conditioning: !a.no_goal,
        use_text_history: !a.no_text_history,
        num_examples: a.num_examples,
        label: a.label,
        ..BenchRequest::default()
    };
    if let Some(n) = a.synthetic {
        let z = req.horizon(kind);
        req.samples = match kind {
            BenchKind::Lta => synthetic::lta_samples(n, z, a.seed),
            BenchKind::Vpa => synthetic::vpa_samples(n, z, a.seed),
            BenchKind::Rerun => return Err(usage("--synthetic applies to lta and vpa")),
        };
    }
    let out = run_bench(kind, &req, cfg, a.out.clone())?;
    print!("{}", out.table(&req.label()));
    if let Some(dir) = &a.out {
        println!("wrote {}", dir.join("reports").display());
    }
    if out.provider_errors > 0 {
        return Err(Failure::Provider(anyhow!(
            "{} samples failed with provider errors",
            out.provider_errors
        )));
    }
    Ok(())
}

fn predictors(spec: &str) -> Result<Vec<PredictorKind>, Failure> {
    match spec {
        "both" => Ok(vec![PredictorKind::Socratic, PredictorKind::Vclm]),
        s => Ok(vec![s.parse().map_err(usage)?]),
    }
}

/// Predictor order for each trial. With a latin square the two orders
/// alternate, starting from the one picked by `seed`.
fn schedule(
    kinds: &[PredictorKind],
    trials: usize,
    latin: bool,
    seed: u64,
) -> Vec<Vec<PredictorKind>> {
    (0..trials)
        .map(|t| {
            let mut order = kinds.to_vec();
            if latin && !order.is_empty() {
                let shift = (t + seed as usize) % order.len();
                order.rotate_left(shift);
            }
            order
        })
        .collect()
}

fn find_script(cfg: &RunConfig, id: &str) -> Result<ActivityScript, Failure> {
    let scripts = configured_scripts(cfg)?;
    let known: Vec<String> = scripts.iter().map(|s| s.script_id.clone()).collect();
    scripts
        .into_iter()
        .find(|s| s.script_id == id)
        .ok_or_else(|| {
            usage(format!(
                "unknown script `{id}` (available: {})",
                known.join(", ")
            ))
        })
}

fn simulate(cfg: &RunConfig, a: SimulateArgs) -> CliResult {
    if a.trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    let script = find_script(cfg, &a.script)?;
    let assistant: AssistantSpec = a.assistant.parse().map_err(usage)?;
    let kinds = predictors(&a.predictor)?;
    let embedder = cfg
        .providers
        .build(&BuildContext {
            script: Some(&script),
            ..BuildContext::default()
        })?
        .embedder;
    let mut reports: Vec<SessionReport> = Vec::new();
    let mut failures = Vec::new();
    for (trial, order) in schedule(&kinds, a.trials, a.latin_square, a.seed)
        .into_iter()
        .enumerate()
    {
        for kind in order {
            let id = format!(
                "{}-{}-{}",
                script.script_id,
                kind.label().to_lowercase(),
                trial + 1
            );
            let result = simulation_providers(&assistant, &script, kind, embedder.clone())
                .map_err(|e| SessionError::Provider(e.to_string()))
                .and_then(|p| simulate_user(&id, &script, cfg.session_config(kind), p));
            match result {
                Ok(sim) => {
                    if let Some(dir) = &a.out {
                        persist(dir, &sim.study, &sim.events.render()).map_err(data)?;
                    }
                    println!(
                        "{id}: success={} end_reason={} online_miou={:.3} suggestions={}",
                        sim.report.success,
                        serde_json::to_value(sim.report.end_reason)
                            .map_err(data)?
                            .as_str()
                            .unwrap_or_default(),
                        sim.report.online_miou,
                        sim.report.suggestions.len()
                    );
                    reports.push(sim.report);
                }
                Err(e) => {
                    println!("{id}: failed: {e}");
                    failures.push(Failure::from(e));
                }
            }
        }
    }
    let ok = reports.iter().filter(|r| r.success).count();
    println!(
        "\n{ok}/{} sessions succeeded\n",
        reports.len() + failures.len()
    );
    print!("{}", analyze_skips(&reports).render());
    match failures.into_iter().max_by_key(Failure::code) {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

fn persist(dir: &Path, study: &StudySession, events: &str) -> std::io::Result<()> {
    save_study_session(&dir.join("sessions"), study)?;
    let ev = dir.join("events");
    std::fs::create_dir_all(&ev)?;
    std::fs::write(
        ev.join(format!("{}.jsonl", study.report.session_id)),
        events,
    )
}

fn analyze(cfg: &RunConfig, a: AnalyzeArgs) -> CliResult {
    let files = load_session_files(&a.sessions)?;
    if files.is_empty() {
        return Err(data(anyhow!(
            "no session files in {}",
            a.sessions.display()
        )));
    }
    let reports: Vec<SessionReport> = files.iter().map(|f| f.report().clone()).collect();
    print!("{}", analyze_skips(&reports).render());
    let mut offline = BTreeMap::new();
    if !a.no_rerun {
        let mut by_kind: BTreeMap<String, Vec<StudySession>> = BTreeMap::new();
        for f in &files {
            if let SessionFile::Study(s) = f {
                by_kind
                    .entry(s.report.predictor.clone())
                    .or_default()
                    .push(s.clone());
            }
        }
        let scripts = configured_scripts(cfg)?;
        let opts = BenchOptions {
            workers: cfg.workers,
            run_dir: None,
            label: "offline".into(),
        };
        for (method, sessions) in by_kind {
            let kind: PredictorKind = method.parse().map_err(|m: String| data(anyhow!(m)))?;
            let out = rerun_sessions(cfg, kind, &sessions, &scripts, &opts)?;
            if let Some(m) = out.report.aggregates.miou {
                offline.insert(method, m);
            }
        }
    }
    println!();
    print!(
        "{}",
        render_comparison(&egoassist_core::session::analyze::compare_online_offline(
            &reports, &offline
        ))
    );
    Ok(())
}

fn goldens(a: GoldensArgs) -> CliResult {
    let dir = a.dir.unwrap_or_else(repo_goldens_dir);
    if a.update {
        for p in update_goldens(&dir).map_err(data)? {
            println!("wrote {}", p.display());
        }
        return Ok(());
    }
    let check = check_goldens(&dir).map_err(data)?;
    print!("{}", check.render());
    if check.is_ok() {
        Ok(())
    } else {
        Err(data(anyhow!(
            "prompt goldens differ from {}",
            dir.display()
        )))
    }
}

/// A latte planner that proposes pouring milk before frothing it.
const LATTE_PRECEDENCE_STUB: [&str; 4] = [
    "Pour milk into espresso cup",
    "Froth milk using the steam wand",
    "Pour milk into espresso cup",
    "Serve the dish",
];

fn write_data(a: DataArgs) -> CliResult {
    let out = &a.out;
    let mk = |p: &Path| std::fs::create_dir_all(p).map_err(data);
    let synth = out.join("synthetic");
    mk(&synth)?;
    let lta = synthetic::lta_samples(a.samples, 20, a.seed);
    write_samples(&lta, synth.join("lta.jsonl")).map_err(data)?;
    let videos = synthetic::vpa_videos(a.samples, 5, 9, a.seed);
    write_videos(&videos, synth.join("vpa_videos.jsonl")).map_err(data)?;
    write_samples(&expand_videos(&videos, 3), synth.join("vpa_z3.jsonl")).map_err(data)?;
    std::fs::write(
        synth.join("vocabulary.json"),
        synthetic::vocabulary().to_json_string(),
    )
    .map_err(data)?;

    let stubs = out.join("stubs");
    mk(&stubs)?;
    let stub = serde_json::json!({ "items": LATTE_PRECEDENCE_STUB });
    std::fs::write(
        stubs.join("latte_precedence.json"),
        serde_json::to_string_pretty(&stub).map_err(data)?,
    )
    .map_err(data)?;
    std::fs::write(
        stubs.join("lta_cheating.json"),
        serde_json::to_string_pretty(&synthetic::cheating_fixture(&lta)).map_err(data)?,
    )
    .map_err(data)?;

    let fixtures = out.join("fixtures").join("skip_table");
    mk(&fixtures)?;
    for r in synthetic::skip_fixture_reports() {
        let text = serde_json::to_string_pretty(&r).map_err(data)?;
        std::fs::write(fixtures.join(format!("{}.json", r.session_id)), text).map_err(data)?;
    }
    println!(
        "wrote synthetic data, stubs and fixtures under {}",
        out.display()
    );
    Ok(())
}

fn serve(mut cfg: RunConfig, a: ServeArgs) -> CliResult {
    if let Some(b) = a.bind {
        cfg.service.bind = b;
    }
    let rt = tokio::runtime::Runtime::new().map_err(data)?;
    rt.block_on(egoassist_service::serve(cfg))
        .map_err(|e| match e {
            egoassist_service::ServiceError::Setup(j) => Failure::from(j),
            e => data(e),
        })
}
