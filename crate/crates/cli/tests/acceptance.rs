//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if
//! any criterion fails.

use std::collections::BTreeSet;
use std::net::TcpListener;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::sync::Arc;
use std::time::{Duration, Instant};

use egoassist_core::bench::{online_report, BenchOptions};
use egoassist_core::config::RunConfig;
use egoassist_core::dataset::expand_video;
use egoassist_core::goldens::{check_goldens, repo_goldens_dir};
use egoassist_core::jobs::{rerun_sessions, run_bench, BenchKind, BenchRequest};
use egoassist_core::metrics::{edit_distance, mean_accuracy, miou, success_rate, Stream};
use egoassist_core::pipelines::{PredictorConfig, PredictorKind};
use egoassist_core::prompting::budget::fit_to_budget;
use egoassist_core::prompting::templates::{lta_parts, vpa_parts};
use egoassist_core::prompting::PromptExample;
use egoassist_core::providers::stub::BagOfWordsEmbedder;
use egoassist_core::providers::{Embedder, Tokenizer, WordTokenizer};
use egoassist_core::script::{bundled_script, bundled_scripts};
use egoassist_core::session::assistants::AssistantSpec;
use egoassist_core::session::matching::DEFAULT_MATCH_THRESHOLD;
use egoassist_core::session::{
    analyze_skips, simulate_with, EndReason, Phase, SessionError, SessionState,
};
use egoassist_core::{
    synthetic, ActionLabel, ActionSequence, ActivityScript, SuggestionOutcome, Task,
};
use egoassist_service::client::{simulate_remote, ApiClient};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($arg)+));
        }
    };
}

fn embedder() -> Arc<dyn Embedder> {
    Arc::new(BagOfWordsEmbedder::default())
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_egoassist")
}

// Metric oracles.

const VERBS: [&str; 4] = ["take", "pour", "froth", "cut"];
const NOUNS: [&str; 4] = ["cup", "milk", "tomato", "knife"];

type Pairs = Vec<(usize, usize)>;

fn seq(pairs: &[(usize, usize)], horizon: usize) -> ActionSequence {
    let labels = pairs
        .iter()
        .map(|&(v, n)| ActionLabel::new(v, n, VERBS[v], NOUNS[n]))
        .collect();
    ActionSequence::new(labels, horizon.max(1)).unwrap()
}

fn padded(pairs: &[(usize, usize)], z: usize) -> Vec<Option<(usize, usize)>> {
    (0..z).map(|i| pairs.get(i).copied()).collect()
}

fn dp_levenshtein(a: &[Option<usize>], b: &[Option<usize>]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let same = matches!((a[i - 1], b[j - 1]), (Some(x), Some(y)) if x == y);
            d[i][j] = (d[i - 1][j] + 1)
                .min(d[i][j - 1] + 1)
                .min(d[i - 1][j - 1] + usize::from(!same));
        }
    }
    d[a.len()][b.len()]
}

fn oracle_ed(p: &[(usize, usize)], g: &[(usize, usize)], z: usize, stream: Stream) -> f64 {
    let project = |s: &[(usize, usize)]| -> Vec<Option<usize>> {
        padded(s, z)
            .into_iter()
            .map(|x| {
                x.map(|(v, n)| match stream {
                    Stream::Verb => v,
                    Stream::Noun => n,
                    Stream::Action => v * 100 + n,
                })
            })
            .collect()
    };
    dp_levenshtein(&project(p), &project(g)) as f64 / z as f64
}

fn oracle_macc(p: &[(usize, usize)], g: &[(usize, usize)], z: usize) -> f64 {
    let (a, b) = (padded(p, z), padded(g, z));
    (0..z).filter(|&i| a[i].is_some() && a[i] == b[i]).count() as f64 / z as f64
}

fn oracle_iou(p: &[(usize, usize)], g: &[(usize, usize)]) -> f64 {
    let a: BTreeSet<_> = p.iter().collect();
    let b: BTreeSet<_> = g.iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        0.0
    } else {
        a.intersection(&b).count() as f64 / union as f64
    }
}

fn oracle_sr(p: &[(usize, usize)], g: &[(usize, usize)], z: usize) -> bool {
    let (a, b) = (padded(p, z), padded(g, z));
    (0..z).all(|i| a[i].is_some() && a[i] == b[i])
}

fn random_pairs(rng: &mut ChaCha8Rng, n: usize) -> Pairs {
    (0..n)
        .map(|_| (rng.random_range(0..4), rng.random_range(0..4)))
        .collect()
}

fn random_case(rng: &mut ChaCha8Rng) -> (Pairs, Pairs, usize) {
    let z = rng.random_range(1..7);
    let plen = rng.random_range(0..=z + 1);
    let p = random_pairs(rng, plen);
    let glen = z + rng.random_range(0..=2);
    let g = random_pairs(rng, glen);
    (p, g, z)
}

fn metric_oracle_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cases = 2000;
    let mut disagreements = 0;
    for _ in 0..cases {
        let (p, g, z) = random_case(&mut rng);
        let (ps, gs) = (seq(&p, z + 2), seq(&g, z + 2));
        for stream in [Stream::Verb, Stream::Noun, Stream::Action] {
            let got = edit_distance(&ps, &gs, z, stream).map_err(|e| e.to_string())?;
            disagreements += usize::from((got - oracle_ed(&p, &g, z, stream)).abs() > 1e-12);
        }
        let macc = mean_accuracy(&ps, &gs, z).map_err(|e| e.to_string())?;
        disagreements += usize::from((macc - oracle_macc(&p, &g, z)).abs() > 1e-12);
        disagreements += usize::from(
            success_rate(&ps, &gs, z).map_err(|e| e.to_string())? != oracle_sr(&p, &g, z),
        );
        disagreements += usize::from((miou(&ps, &gs) - oracle_iou(&p, &g)).abs() > 1e-12);
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(
        disagreements == 0,
        "{disagreements} disagreements over {cases} cases"
    );
    ensure!(secs < 10.0, "took {secs:.2}s");
    Ok(format!("{cases} cases, 0 disagreements, {secs:.2}s"))
}

fn metric_ordering() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut sr_hits, mut macc_hits) = (0, 0);
    for _ in 0..5000 {
        let (mut p, g, z) = random_case(&mut rng);
        if rng.random_bool(0.3) {
            p = g.clone();
        }
        let (ps, gs) = (seq(&p, z + 2), seq(&g, z + 2));
        let sr = success_rate(&ps, &gs, z).map_err(|e| e.to_string())?;
        let macc = mean_accuracy(&ps, &gs, z).map_err(|e| e.to_string())?;
        let ed = edit_distance(&ps, &gs, z, Stream::Action).map_err(|e| e.to_string())?;
        if sr {
            sr_hits += 1;
            ensure!(macc == 1.0, "sr=1 but macc={macc} for {p:?} vs {g:?}");
        }
        if macc == 1.0 {
            macc_hits += 1;
            ensure!(ed == 0.0, "macc=1 but ed={ed} for {p:?} vs {g:?}");
        }
    }
    let p = seq(&[(0, 0), (1, 1), (2, 1)], 3);
    let g = seq(&[(0, 0), (2, 1), (1, 1)], 3);
    ensure!(
        miou(&p, &g) == 1.0,
        "constructed pair has miou {}",
        miou(&p, &g)
    );
    ensure!(
        !success_rate(&p, &g, 3).map_err(|e| e.to_string())?,
        "constructed pair succeeded"
    );
    Ok(format!(
        "5000 pairs ({sr_hits} with sr=1, {macc_hits} with macc=1); miou=1 with sr=0 exists"
    ))
}

fn prompt_goldens() -> Outcome {
    let dir = repo_goldens_dir();
    let check = check_goldens(&dir).map_err(|e| e.to_string())?;
    ensure!(check.is_ok(), "{}", check.render());
    let status = Command::new(bin())
        .args(["goldens", "--check"])
        .stdout(Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    ensure!(
        status.code() == Some(0),
        "goldens --check exited with {status}"
    );
    Ok(format!(
        "{} goldens byte-identical; `goldens --check` exit 0",
        check.matched.len()
    ))
}

const WORDS: [&str; 8] = ["take", "cup", "pour", "milk", "stir", "pan", "cut", "bread"];

fn sentence(rng: &mut ChaCha8Rng) -> String {
    let len = rng.random_range(1..25);
    let body: Vec<&str> = (0..len)
        .map(|_| WORDS[rng.random_range(0..WORDS.len())])
        .collect();
    format!("A person {}", body.join(" "))
}

fn budget_law() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let tok = WordTokenizer;
    let (mut fewer, mut prompts) = (0, 0);
    for set in 0..100 {
        let examples: Vec<PromptExample> = (0..rng.random_range(0..=12))
            .map(|i| {
                let lines = rng.random_range(1..30);
                let ns = (0..lines).map(|_| sentence(&mut rng)).collect();
                PromptExample::new(format!("ex-{i:02}"), ns, Some(format!("goal {i}")))
            })
            .collect();
        let history: Vec<String> = (0..rng.random_range(1..40))
            .map(|_| sentence(&mut rng))
            .collect();
        let z = rng.random_range(1..25);
        let vpa = set % 2 == 1;
        let parts = if vpa {
            vpa_parts(Some("make a latte"), &examples, &history, z, true)
                .map_err(|e| e.to_string())?
        } else {
            lta_parts(&examples, &history, z)
        };
        let task = if vpa { Task::Vpa } else { Task::Lta };
        let fit = |kind| {
            let cfg = PredictorConfig::of_kind(kind, task, z);
            (
                fit_to_budget(&parts, &tok, cfg.context_limit, cfg.reserved()).ok(),
                cfg,
            )
        };
        let (soc, soc_cfg) = fit(PredictorKind::Socratic);
        let (vclm, vclm_cfg) = fit(PredictorKind::Vclm);
        ensure!(
            soc_cfg.reserved() == 0 && vclm_cfg.reserved() == 256,
            "unexpected reservations"
        );
        ensure!(
            soc_cfg.context_limit == 2048 && vclm_cfg.context_limit == 2048,
            "unexpected context limit"
        );
        for (p, cfg) in [(&soc, &soc_cfg), (&vclm, &vclm_cfg)] {
            if let Some(p) = p {
                prompts += 1;
                ensure!(
                    p.token_count == tok.count(&p.text),
                    "token count drift in set {set}"
                );
                ensure!(
                    p.token_count + cfg.reserved() <= 2048,
                    "set {set}: {} + {} > 2048",
                    p.token_count,
                    cfg.reserved()
                );
            }
        }
        match (&soc, &vclm) {
            (Some(s), Some(v)) => {
                ensure!(
                    v.examples_used.len() <= s.examples_used.len(),
                    "set {set}: VCLM kept more examples"
                );
                fewer += usize::from(v.examples_used.len() < s.examples_used.len());
            }
            (None, Some(_)) => {
                return Err(format!("set {set}: VCLM fit where Socratic overflowed"))
            }
            _ => {}
        }
    }
    Ok(format!(
        "100 sets, {prompts} prompts within budget, VCLM kept fewer examples in {fewer}"
    ))
}

fn text_history_ablation() -> Outcome {
    let cfg = RunConfig::parse("[providers]\nllm = \"prose\"\n", "acceptance")
        .map_err(|e| e.to_string())?;
    let req = BenchRequest {
        predictor: PredictorKind::Vclm,
        use_text_history: false,
        samples: synthetic::lta_samples(20, 20, 5),
        ..BenchRequest::default()
    };
    let r = run_bench(BenchKind::Lta, &req, &cfg, None)
        .map_err(|e| e.to_string())?
        .report;
    let a = &r.aggregates;
    let got = (a.ed_verb, a.ed_noun, a.ed_action);
    ensure!(
        got == (Some(1.0), Some(1.0), Some(1.0)),
        "ED verb/noun/action = {got:?}"
    );
    Ok(format!(
        "ED 1.000/1.000/1.000 over {} samples",
        r.counts.evaluated
    ))
}

fn cheating_upper_bounds() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |kind: BenchKind, samples: Vec<egoassist_core::BenchmarkSample>, name: &str| {
        let path = dir.path().join(name);
        std::fs::write(
            &path,
            serde_json::to_string(&synthetic::cheating_fixture(&samples)).unwrap(),
        )
        .unwrap();
        let cfg = RunConfig::parse(
            &format!("[providers]\nllm = \"stub:{}\"\n", path.display()),
            "acceptance",
        )
        .unwrap();
        let req = BenchRequest {
            samples,
            ..BenchRequest::default()
        };
        run_bench(
            kind,
            &req,
            &cfg,
            Some(dir.path().join(format!("run-{name}"))),
        )
        .map(|o| o.report)
    };
    let lta = run(
        BenchKind::Lta,
        synthetic::lta_samples(20, 20, 11),
        "lta.json",
    )
    .map_err(|e| e.to_string())?;
    let vpa = run(
        BenchKind::Vpa,
        synthetic::vpa_samples(20, 3, 12),
        "vpa.json",
    )
    .map_err(|e| e.to_string())?;
    let (l, v) = (&lta.aggregates, &vpa.aggregates);
    ensure!(
        lta.counts.evaluated == 20 && vpa.counts.evaluated == 20,
        "not every sample was evaluated"
    );
    ensure!(
        (l.ed_verb, l.ed_noun, l.ed_action) == (Some(0.0), Some(0.0), Some(0.0)),
        "LTA ED {l:?}"
    );
    ensure!(
        (v.sr, v.macc, v.miou) == (Some(1.0), Some(1.0), Some(1.0)),
        "VPA {v:?}"
    );
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 30.0, "took {secs:.2}s");
    Ok(format!("LTA ED 0.000; VPA SR/mAcc/mIoU 100%; {secs:.2}s"))
}

fn sample_expansion() -> Outcome {
    let video = synthetic::vpa_videos(1, 7, 7, 4).remove(0);
    ensure!(
        video.steps.len() == 7,
        "video has {} steps",
        video.steps.len()
    );
    let samples = expand_video(&video, 3);
    ensure!(samples.len() == 4, "{} samples", samples.len());
    ensure!(
        samples == expand_video(&video, 3),
        "expansion is not deterministic"
    );
    Ok("K=7, Z=3 gives 4 samples".into())
}

fn latte_precedence_stub(dir: &Path) -> AssistantSpec {
    let path = dir.join("latte_precedence.json");
    let items = [
        "Pour milk into espresso cup",
        "Froth milk using the steam wand",
        "Pour milk into espresso cup",
        "Serve the dish",
    ];
    std::fs::write(&path, serde_json::json!({ "items": items }).to_string()).unwrap();
    AssistantSpec::Stub(path.display().to_string())
}

fn closed_loop_protocol() -> Outcome {
    let start = Instant::now();
    let mut trials = 0;
    for script in bundled_scripts() {
        for t in 0..5 {
            let id = format!("{}-{t}", script.script_id);
            let r = simulate_with(
                &id,
                &script,
                &AssistantSpec::Oracle,
                PredictorKind::Socratic,
                embedder(),
            )
            .map_err(|e| e.to_string())?
            .report;
            ensure!(
                r.success && r.end_reason == EndReason::DoneStep && r.online_miou == 1.0,
                "{id}: success={} end={:?} miou={}",
                r.success,
                r.end_reason,
                r.online_miou
            );
            trials += 1;
        }
    }
    let caprese = bundled_script("caprese").map_err(|e| e.to_string())?;
    let stuck = simulate_with(
        "stuck",
        &caprese,
        &AssistantSpec::Stuck,
        PredictorKind::Socratic,
        embedder(),
    )
    .map_err(|e| e.to_string())?
    .report;
    ensure!(
        stuck.end_reason == EndReason::ThreeSkips,
        "stuck ended with {:?}",
        stuck.end_reason
    );
    ensure!(
        stuck.suggestions.len() == 3
            && stuck
                .suggestions
                .iter()
                .all(|s| s.outcome == SuggestionOutcome::SkippedRedundant),
        "stuck outcomes {:?}",
        stuck
            .suggestions
            .iter()
            .map(|s| s.outcome)
            .collect::<Vec<_>>()
    );
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let latte = bundled_script("latte").map_err(|e| e.to_string())?;
    let lp = simulate_with(
        "latte-stub",
        &latte,
        &latte_precedence_stub(dir.path()),
        PredictorKind::Socratic,
        embedder(),
    )
    .map_err(|e| e.to_string())?
    .report;
    let infeasible = lp.skip_breakdown.infeasible;
    ensure!(infeasible >= 1, "latte stub produced no infeasible skip");
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 20.0, "took {secs:.2}s");
    Ok(format!(
        "oracle {trials}/{trials} success; stuck ends after 3 redundant skips; latte stub {infeasible} infeasible; {secs:.2}s"
    ))
}

fn random_script(rng: &mut ChaCha8Rng) -> ActivityScript {
    let n = rng.random_range(2..12);
    let boundary = rng.random_range(1..n);
    let steps: Vec<_> = (0..n)
        .map(|i| {
            serde_json::json!({
                "step_id": format!("s{i}"),
                "description": format!("do step {i}"),
                "optional": i >= boundary && i + 1 < n && rng.random_bool(0.3),
            })
        })
        .collect();
    let file = serde_json::json!({
        "script_id": "random",
        "title": "Random",
        "goal_text": "finish",
        "steps": steps,
        "assist_boundary": boundary,
    });
    ActivityScript::from_json_str(&file.to_string()).unwrap()
}

const OUTCOMES: [SuggestionOutcome; 4] = [
    SuggestionOutcome::Executed,
    SuggestionOutcome::SkippedRedundant,
    SuggestionOutcome::SkippedInfeasible,
    SuggestionOutcome::SkippedIrrelevant,
];

fn termination_property() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10_000);
    let mut longest = 0;
    for case in 0..10_000 {
        let mut state =
            SessionState::new("p", random_script(&mut rng), None).map_err(|e| e.to_string())?;
        let bound = state.suggestion_bound();
        let mut turns = 0;
        let mut t = 0.0;
        while !state.is_completed() {
            ensure!(
                turns <= bound,
                "case {case}: {turns} suggestions exceed bound {bound}"
            );
            t += 1.0;
            if rng.random_bool(0.05) {
                state
                    .system_error("Please repeat the request", t)
                    .map_err(|e| e.to_string())?;
            } else {
                let done = rng.random_bool(0.03);
                let idx = state
                    .issue(format!("step {turns}"), None, done, t)
                    .map_err(|e| e.to_string())?;
                turns += 1;
                let outcome = OUTCOMES[rng.random_range(0..OUTCOMES.len())];
                state
                    .report_outcome(Some(idx), outcome)
                    .map_err(|e| e.to_string())?;
            }
            state
                .check_invariants()
                .map_err(|e| format!("case {case}: {e}"))?;
        }
        ensure!(
            turns <= bound,
            "case {case}: {turns} suggestions exceed bound {bound}"
        );
        ensure!(
            state.phase == Phase::Completed,
            "case {case}: phase {:?}",
            state.phase
        );
        ensure!(
            matches!(
                state.report_outcome(None, SuggestionOutcome::Executed),
                Err(SessionError::SessionCompleted)
            ),
            "case {case}: completed session accepted an outcome"
        );
        longest = longest.max(turns);
    }
    Ok(format!(
        "10000 sequences terminated within bound; longest run {longest} suggestions"
    ))
}

fn skip_fixture() -> Outcome {
    let reports = synthetic::skip_fixture_reports();
    let table = analyze_skips(&reports);
    let row = |m: &str| {
        let c = table.method_total(m);
        (c.redundant, c.infeasible, c.irrelevant)
    };
    ensure!(row("VCLM") == (32, 13, 4), "VCLM row {:?}", row("VCLM"));
    ensure!(
        row("Socratic") == (33, 16, 7),
        "Socratic row {:?}",
        row("Socratic")
    );
    let total = table.total();
    ensure!(
        total.redundant == 65 && total.total() == 105,
        "totals {total:?}"
    );
    let share = table.redundant_share().unwrap_or_default();
    ensure!((share - 65.0 / 105.0).abs() < 1e-12, "share {share}");
    Ok(format!(
        "VCLM 32/13/4, Socratic 33/16/7, redundant share {:.1}% (65/105)",
        share * 100.0
    ))
}

fn offline_vs_online() -> Outcome {
    let scripts = bundled_scripts();
    let mut sessions = Vec::new();
    for i in 0..10 {
        let script = &scripts[i % scripts.len()];
        let sim = simulate_with(
            &format!("s{i}"),
            script,
            &AssistantSpec::RepeatOnce,
            PredictorKind::Socratic,
            embedder(),
        )
        .map_err(|e| e.to_string())?;
        sessions.push(sim.study);
    }
    let cfg = RunConfig::parse("[providers]\nllm = \"repeat-once\"\n", "acceptance")
        .map_err(|e| e.to_string())?;
    let offline = rerun_sessions(
        &cfg,
        PredictorKind::Socratic,
        &sessions,
        &scripts,
        &BenchOptions::default(),
    )
    .map_err(|e| e.to_string())?
    .report;
    let online = online_report(&sessions).map_err(|e| e.to_string())?;
    for (id, m) in &online.per_sample {
        let (on, off) = (
            m.miou.unwrap_or_default(),
            offline.per_sample[id].miou.unwrap_or_default(),
        );
        ensure!(off > on, "{id}: offline {off:.3} <= online {on:.3}");
    }
    Ok(format!(
        "10 sessions; mean mIoU offline {:.3} > online {:.3}",
        offline.aggregates.miou.unwrap_or_default(),
        online.aggregates.miou.unwrap_or_default()
    ))
}

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn start_server(run_dir: &Path) -> Result<(Server, ApiClient), String> {
    let port = TcpListener::bind("127.0.0.1:0")
        .and_then(|l| l.local_addr())
        .map_err(|e| e.to_string())?
        .port();
    let cfg = run_dir.join("service.toml");
    std::fs::write(
        &cfg,
        format!("[service]\nrun_dir = {:?}\n", run_dir.display().to_string()),
    )
    .map_err(|e| e.to_string())?;
    let child = Command::new(bin())
        .args([
            "--config",
            &cfg.display().to_string(),
            "serve",
            "--bind",
            &format!("127.0.0.1:{port}"),
        ])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| e.to_string())?;
    let server = Server(child);
    let client = ApiClient::new(format!("http://127.0.0.1:{port}"));
    let start = Instant::now();
    while client.health().is_err() {
        ensure!(
            start.elapsed() < Duration::from_secs(20),
            "service did not come up"
        );
        std::thread::sleep(Duration::from_millis(50));
    }
    Ok((server, client))
}

fn http_parity() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (_server, client) = start_server(dir.path())?;
    let mut n = 0;
    for script in bundled_scripts() {
        for kind in [PredictorKind::Socratic, PredictorKind::Vclm] {
            let id = format!("parity-{}-{}", script.script_id, kind.label());
            let local = simulate_with(&id, &script, &AssistantSpec::Oracle, kind, embedder())
                .map_err(|e| e.to_string())?;
            let remote = simulate_remote(
                &client,
                &id,
                &script,
                kind,
                &BagOfWordsEmbedder::default(),
                DEFAULT_MATCH_THRESHOLD,
            )
            .map_err(|e| e.to_string())?;
            let expected = serde_json::to_vec(&local.report).map_err(|e| e.to_string())?;
            ensure!(remote.raw_report == expected, "{id}: reports differ");
            n += 1;
        }
    }
    Ok(format!(
        "{n} scenarios byte-identical in-process and over HTTP"
    ))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("metric oracle suite", metric_oracle_suite),
        ("metric ordering property", metric_ordering),
        ("prompt goldens", prompt_goldens),
        ("budget law", budget_law),
        ("text-history ablation echo", text_history_ablation),
        ("cheating-stub upper bounds", cheating_upper_bounds),
        ("sample expansion", sample_expansion),
        ("closed-loop protocol", closed_loop_protocol),
        ("protocol termination property", termination_property),
        ("skip analytics fixture", skip_fixture),
        ("offline-vs-online comparison", offline_vs_online),
        ("HTTP parity", http_parity),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.2}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} [{secs:.2}s]", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
