//! Batch commands. Each returns a [`CmdError`] carrying its exit code.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use argtune_core::backend::{
    BackendError, CompletionBackend, CompletionRequest, CompletionResult, ReplayCursor,
};
use argtune_core::curation::{
    assemble_mixture, dataset_stats, export_review_sheet, export_training_records,
    reserve_test_tasks, sample_eval_instances, split_instances, PromptTemplate, SourceSpec,
    StatsReport,
};
use argtune_core::eval::{evaluate_model, mean_rank, model_scores, EvalTask, Leaderboard, Metric};
use argtune_core::rng::{indexed_substream, substream};
use argtune_core::synthesis::{run_synthesis, Fate, SynthesisError, SynthesisState};
use argtune_core::task::{validate_task, Area, Task, TaskId, TaskKind, TaskPool};
use serde::Serialize;

use crate::backend::{open_backend, DynBackend, RecordingBackend, ReplayBackend};
use crate::checkpoint::DirCheckpoint;
use crate::config::RunConfig;
use crate::io::{read_json, read_lines, read_tasks, write_json_pretty, write_jsonl, IoError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CmdError {
    #[error("{0}")]
    Domain(String),
    #[error("{0}")]
    Io(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("backend: {0}")]
    Backend(String),
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Domain(_) => 1,
            CmdError::Io(_) | CmdError::Config(_) => 2,
            CmdError::Backend(_) => 3,
        }
    }
}

impl From<IoError> for CmdError {
    fn from(e: IoError) -> Self {
        CmdError::Io(e.to_string())
    }
}

type Out<'a> = &'a mut dyn Write;

fn say(out: Out<'_>, line: impl AsRef<str>) {
    // Output is best effort; a closed stdout should not fail the command.
    let _ = writeln!(out, "{}", line.as_ref());
}

pub const TASKS_FILE: &str = "tasks.jsonl";
pub const GENERATED_FILE: &str = "generated.jsonl";
pub const RUN_LOG_FILE: &str = "run_log.jsonl";
pub const CHECKPOINT_DIR: &str = "checkpoint";

/// Checks every task of a file; exit 1 lists the violations.
pub fn cmd_validate(path: &Path, out: Out<'_>) -> Result<usize, CmdError> {
    let tasks = read_tasks(path)?;
    let mut problems = 0;
    let mut seen: BTreeMap<&TaskId, usize> = BTreeMap::new();
    for (line, t) in tasks.iter().enumerate() {
        if let Some(first) = seen.insert(t.id(), line + 1) {
            say(out, format!("{}: duplicate id (first on line {first})", t.id()));
            problems += 1;
        }
        for v in validate_task(t) {
            say(out, format!("{}: {v}", t.id()));
            problems += 1;
        }
    }
    if problems > 0 {
        return Err(CmdError::Domain(format!(
            "{problems} violation(s) in {}",
            path.display()
        )));
    }
    say(out, format!("{}: {} valid task(s)", path.display(), tasks.len()));
    Ok(tasks.len())
}

#[derive(Debug, Clone, Default)]
pub struct GenerateOptions {
    pub resume: bool,
    /// Write every exchange with the backend to this fixture file.
    pub record_fixtures: Option<PathBuf>,
}

fn generation_backend(cfg: &RunConfig) -> Result<DynBackend, CmdError> {
    match &cfg.paths.fixtures {
        Some(p) => Ok(Box::new(ReplayBackend::load(p)?)),
        None => open_backend(&cfg.backend.base_url, &cfg.backend).map_err(CmdError::Config),
    }
}

/// Grows the seed pool to `synthesis.target_count` generated tasks.
///
/// Writes `tasks.jsonl` (whole pool), `generated.jsonl`, `run_log.jsonl`
/// and a resumable `checkpoint/` directory under the output directory.
pub fn cmd_generate(
    cfg: &RunConfig,
    opts: &GenerateOptions,
    out: Out<'_>,
) -> Result<SynthesisState, CmdError> {
    cfg.validate().map_err(CmdError::Config)?;
    let negatives = match &cfg.synthesis.negative_exemplar_file {
        Some(p) => read_lines(Path::new(p))?,
        None => Vec::new(),
    };
    if negatives.is_empty() {
        say(out, "note: no negative relevance exemplars configured");
    }
    let ckpt_dir = cfg.out(CHECKPOINT_DIR);
    let (mut sink, state) = if opts.resume {
        DirCheckpoint::open(&ckpt_dir)?
    } else {
        let seeds = read_tasks(&cfg.paths.seed_tasks)?;
        let pool = TaskPool::from_tasks(seeds).map_err(|e| CmdError::Domain(e.to_string()))?;
        let state = SynthesisState::new(pool);
        (DirCheckpoint::create(&ckpt_dir, &state)?, state)
    };
    let inner = generation_backend(cfg)?;
    let result = match &opts.record_fixtures {
        Some(path) => {
            let rec = RecordingBackend::new(inner);
            let r = run_synthesis(&rec, state, &cfg.synthesis, &negatives, &mut sink);
            rec.write(path)?;
            r
        }
        None => run_synthesis(&inner, state, &cfg.synthesis, &negatives, &mut sink),
    };
    let state = match result {
        Ok(s) => s,
        Err(halt) => {
            say(
                out,
                format!(
                    "halted after {} generated task(s); resume from {} with --resume",
                    halt.state.cursor.generated,
                    ckpt_dir.display()
                ),
            );
            return Err(match halt.error {
                SynthesisError::Backend(e) => CmdError::Backend(e.to_string()),
                SynthesisError::Checkpoint(e) => CmdError::Io(e),
                SynthesisError::Config(e) => CmdError::Config(e),
                e @ (SynthesisError::EmptyPool | SynthesisError::Stalled(_)) => {
                    CmdError::Domain(e.to_string())
                }
            });
        }
    };
    write_jsonl(&cfg.out(TASKS_FILE), state.pool.tasks())?;
    let generated: Vec<&Task> = state.pool.generated().collect();
    write_jsonl(&cfg.out(GENERATED_FILE), &generated)?;
    write_jsonl(&cfg.out(RUN_LOG_FILE), &state.log)?;

    let mut fates: BTreeMap<&str, usize> = BTreeMap::new();
    for e in &state.log {
        let name = match e.fate {
            Fate::Accepted => "accepted",
            Fate::NotRelevant => "not_relevant",
            Fate::TooSimilar => "too_similar",
            Fate::Malformed => "malformed",
            Fate::PostprocessFailed => "postprocess_failed",
        };
        *fates.entry(name).or_default() += 1;
    }
    say(
        out,
        format!(
            "pool: {} task(s), {} generated; {} candidate(s) logged",
            state.pool.len(),
            generated.len(),
            state.log.len()
        ),
    );
    for (k, v) in fates {
        say(out, format!("  {k:<20} {v}"));
    }
    Ok(state)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitManifest {
    pub rng_seed: u64,
    pub test_task_fraction: f64,
    pub instance_ratios: [u32; 3],
    pub tasks_total: usize,
    pub test_tasks: Vec<TaskId>,
    pub test_tasks_per_area: BTreeMap<&'static str, usize>,
    pub train_tasks: Vec<TaskId>,
    pub instances: BTreeMap<&'static str, usize>,
}

pub const SPLIT_DIR: &str = "split";

/// Reserves unseen test tasks and splits the remaining tasks' instances.
///
/// Writes under `split/`: `test_tasks.jsonl` (reserved tasks with all
/// their instances), `train.jsonl`, `val.jsonl` and `test.jsonl` (the
/// remaining tasks restricted to each instance split, tasks without
/// instances in a split omitted) and `manifest.json`.
pub fn cmd_split(cfg: &RunConfig, out: Out<'_>) -> Result<SplitManifest, CmdError> {
    cfg.split.validate().map_err(|e| CmdError::Config(e.to_string()))?;
    let seeds = read_tasks(&cfg.paths.seed_tasks)?;
    let groups: Option<BTreeMap<TaskId, String>> = match &cfg.paths.split_groups {
        Some(p) => Some(read_json(p)?),
        None => None,
    };
    let reservation = reserve_test_tasks(
        &seeds,
        &cfg.split,
        groups.as_ref(),
        &mut substream(cfg.rng_seed, "split"),
    )
    .map_err(|e| CmdError::Domain(e.to_string()))?;

    let mut parts: [Vec<Task>; 3] = Default::default();
    for (i, t) in reservation.train_tasks.iter().enumerate() {
        let s = split_instances(
            &t.instances,
            cfg.split.instance_ratios,
            &mut indexed_substream(cfg.rng_seed, "split-instances", i as u64),
        );
        for (k, inst) in [s.train, s.val, s.test].into_iter().enumerate() {
            if !inst.is_empty() {
                parts[k].push(t.with_instances(inst));
            }
        }
    }
    let dir = cfg.out(SPLIT_DIR);
    write_jsonl(&dir.join("test_tasks.jsonl"), &reservation.test_tasks)?;
    let names = ["train", "val", "test"];
    for (k, name) in names.iter().enumerate() {
        write_jsonl(&dir.join(format!("{name}.jsonl")), &parts[k])?;
    }
    let mut per_area: BTreeMap<&'static str, usize> =
        Area::ALL.iter().map(|a| (a.as_str(), 0)).collect();
    for t in &reservation.test_tasks {
        if let Some(a) = t.instruction.area {
            *per_area.entry(a.as_str()).or_default() += 1;
        }
    }
    let manifest = SplitManifest {
        rng_seed: cfg.rng_seed,
        test_task_fraction: cfg.split.test_task_fraction,
        instance_ratios: cfg.split.instance_ratios,
        tasks_total: seeds.len(),
        test_tasks: reservation.test_tasks.iter().map(|t| t.id().clone()).collect(),
        test_tasks_per_area: per_area,
        train_tasks: reservation.train_tasks.iter().map(|t| t.id().clone()).collect(),
        instances: names
            .iter()
            .enumerate()
            .map(|(k, n)| (*n, parts[k].iter().map(|t| t.instances.len()).sum()))
            .collect(),
    };
    write_json_pretty(&dir.join("manifest.json"), &manifest)?;
    say(
        out,
        format!(
            "reserved {} of {} task(s) for testing {:?}; instances {:?}",
            manifest.test_tasks.len(),
            manifest.tasks_total,
            manifest.test_tasks_per_area,
            manifest.instances
        ),
    );
    Ok(manifest)
}

pub const MIX_DIR: &str = "mix";

/// Sources used when the configuration lists none: the training split of
/// the seed tasks and the generated tasks.
pub fn default_sources(cfg: &RunConfig) -> Vec<SourceSpec> {
    vec![
        SourceSpec {
            name: "seed".into(),
            task_file: cfg.out(SPLIT_DIR).join("train.jsonl").display().to_string(),
            included: true,
        },
        SourceSpec {
            name: "generated".into(),
            task_file: cfg.out(GENERATED_FILE).display().to_string(),
            included: true,
        },
    ]
}

/// Assembles the training mixture and writes `mix/records.jsonl` and
/// `mix/manifest.json`.
pub fn cmd_mix(
    cfg: &RunConfig,
    out: Out<'_>,
) -> Result<argtune_core::curation::MixtureManifest, CmdError> {
    let mut spec = cfg.mixture.clone();
    if spec.sources.is_empty() {
        spec.sources = default_sources(cfg);
    }
    if PromptTemplate::by_name(&cfg.template).is_none() {
        return Err(CmdError::Config(format!("unknown template {:?}", cfg.template)));
    }
    let mut pools = Vec::with_capacity(spec.sources.len());
    for s in &spec.sources {
        pools.push(if s.included {
            read_tasks(Path::new(&s.task_file))?
        } else {
            Vec::new()
        });
    }
    let mixture = assemble_mixture(&spec, &pools, &mut substream(cfg.rng_seed, "mix"))
        .map_err(|e| CmdError::Domain(e.to_string()))?;
    let (records, manifest) = export_training_records(&mixture, &spec, &cfg.template, cfg.rng_seed)
        .map_err(|e| CmdError::Config(e.to_string()))?;
    let dir = cfg.out(MIX_DIR);
    write_jsonl(&dir.join("records.jsonl"), &records)?;
    write_json_pretty(&dir.join("manifest.json"), &manifest)?;
    for w in &manifest.warnings {
        say(out, format!("warning: {w}"));
    }
    for a in &manifest.sources {
        say(
            out,
            format!(
                "{:<16} quota {:>7}  drawn {:>7}  available {:>7}{}",
                a.name,
                a.quota,
                a.drawn,
                a.available,
                if a.included { "" } else { "  (excluded)" }
            ),
        );
    }
    say(out, format!("{} training record(s)", records.len()));
    Ok(manifest)
}

/// Counts requests and failures passing through a backend.
struct Counted<B> {
    inner: B,
    requests: AtomicUsize,
    failures: AtomicUsize,
}

impl<B: CompletionBackend> Counted<B> {
    fn new(inner: B) -> Self {
        Counted {
            inner,
            requests: AtomicUsize::new(0),
            failures: AtomicUsize::new(0),
        }
    }

    fn tally(&self, r: &Result<CompletionResult, BackendError>) {
        self.requests.fetch_add(1, Ordering::Relaxed);
        if r.is_err() {
            self.failures.fetch_add(1, Ordering::Relaxed);
        }
    }
}

impl<B: CompletionBackend> CompletionBackend for Counted<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, BackendError> {
        let r = self.inner.complete(request);
        self.tally(&r);
        r
    }

    fn complete_batch(
        &self,
        requests: &[CompletionRequest],
    ) -> Vec<Result<CompletionResult, BackendError>> {
        let rs = self.inner.complete_batch(requests);
        rs.iter().for_each(|r| self.tally(r));
        rs
    }

    fn replay_cursor(&self) -> Option<ReplayCursor> {
        self.inner.replay_cursor()
    }
}

pub const EVAL_DIR: &str = "eval";

/// Parses `name=locator`.
pub fn parse_model_arg(s: &str) -> Result<(String, String), String> {
    let (name, loc) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=url, got {s:?}"))?;
    let ok = !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        && !name.starts_with('.');
    if !ok || loc.is_empty() {
        return Err(format!("invalid model spec {s:?}"));
    }
    Ok((name.to_string(), loc.to_string()))
}

/// Tasks with their sampled evaluation instances.
pub fn eval_tasks(cfg: &RunConfig, tasks: &[Task]) -> Result<Vec<EvalTask>, CmdError> {
    tasks
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut rng = indexed_substream(cfg.rng_seed, "sample", i as u64);
            sample_eval_instances(t, cfg.eval_instances, &mut rng)
                .map(|instances| EvalTask {
                    task: t.clone(),
                    instances,
                })
                .map_err(|e| CmdError::Domain(format!("{}: {e}", t.id())))
        })
        .collect()
}

pub fn eval_tasks_path(cfg: &RunConfig) -> PathBuf {
    cfg.paths
        .eval_tasks
        .clone()
        .unwrap_or_else(|| cfg.out(SPLIT_DIR).join("test_tasks.jsonl"))
}

/// Evaluates each model on the sampled test instances and ranks them.
///
/// Writes `eval/<model>/predictions.jsonl`, `eval/<model>/summary.jsonl`
/// (one record per task), `eval/leaderboard.txt` and
/// `eval/leaderboard.json`.
pub fn cmd_eval(
    cfg: &RunConfig,
    models: &[(String, String)],
    out: Out<'_>,
) -> Result<Leaderboard, CmdError> {
    if models.is_empty() {
        return Err(CmdError::Config("no models given (use --models name=url)".into()));
    }
    let template = PromptTemplate::by_name(&cfg.template)
        .ok_or_else(|| CmdError::Config(format!("unknown template {:?}", cfg.template)))?;
    let tasks = read_tasks(&eval_tasks_path(cfg))?;
    for t in &tasks {
        let v = validate_task(t);
        if !v.is_empty() {
            return Err(CmdError::Domain(format!("{}: {}", t.id(), v[0])));
        }
    }
    let sampled = eval_tasks(cfg, &tasks)?;
    let dir = cfg.out(EVAL_DIR);
    let mut scores = Vec::new();
    for (name, locator) in models {
        let backend = Counted::new(open_backend(locator, &cfg.backend).map_err(CmdError::Config)?);
        let evals = evaluate_model(&backend, &sampled, template)
            .map_err(|e| CmdError::Domain(e.to_string()))?;
        let requests = backend.requests.load(Ordering::Relaxed);
        let failures = backend.failures.load(Ordering::Relaxed);
        if requests > 0 && failures == requests {
            return Err(CmdError::Backend(format!(
                "model {name}: all {requests} request(s) failed"
            )));
        }
        if failures > 0 {
            say(out, format!("warning: model {name}: {failures} of {requests} request(s) failed"));
        }
        let predictions: Vec<_> = evals.iter().flat_map(|e| e.predictions.iter()).collect();
        write_jsonl(&dir.join(name).join("predictions.jsonl"), &predictions)?;
        write_jsonl(&dir.join(name).join("summary.jsonl"), &evals)?;
        scores.push(model_scores(name, &evals));
    }
    let board = mean_rank(&scores).map_err(|e| CmdError::Domain(e.to_string()))?;
    let text = render_leaderboard(&board);
    crate::io::atomic_write(&dir.join("leaderboard.txt"), text.as_bytes())?;
    write_json_pretty(&dir.join("leaderboard.json"), &board)?;
    let _ = out.write_all(text.as_bytes());
    Ok(board)
}

/// Aligned-column leaderboard: per-metric means and both mean ranks.
pub fn render_leaderboard(board: &Leaderboard) -> String {
    let metrics = [Metric::MicroF1, Metric::Mase, Metric::RougeL];
    let width = board
        .rows
        .iter()
        .map(|r| r.model.chars().count())
        .max()
        .unwrap_or(0)
        .max(5);
    let mut s = format!("{:<width$}", "model");
    for m in metrics {
        s.push_str(&format!("  {:>8}", m.short_name()));
    }
    s.push_str(&format!("  {:>10}  {:>13}\n", "rank/task", "rank/dataset"));
    for r in &board.rows {
        s.push_str(&format!("{:<width$}", r.model));
        for m in metrics {
            match r.metrics.get(&m) {
                Some(v) => s.push_str(&format!("  {v:>8.4}")),
                None => s.push_str(&format!("  {:>8}", "-")),
            }
        }
        s.push_str(&format!(
            "  {:>10.4}  {:>13.4}\n",
            r.mean_rank, r.mean_rank_by_dataset
        ));
    }
    s.push_str(&format!(
        "({} task(s), {} dataset(s))\n",
        board.tasks, board.datasets
    ));
    s
}

/// Statistics over the concatenation of the given task files.
pub fn cmd_stats(
    files: &[PathBuf],
    report_path: Option<&Path>,
    out: Out<'_>,
) -> Result<StatsReport, CmdError> {
    let mut tasks = Vec::new();
    for f in files {
        tasks.extend(read_tasks(f)?);
    }
    let r = dataset_stats(&tasks);
    say(out, format!("{:<16}{:>12}{:>12}", "", "instructions", "instances"));
    for k in TaskKind::ALL {
        let c = r.per_kind.get(&k).copied().unwrap_or_default();
        say(out, format!("{:<16}{:>12}{:>12}", k.as_str(), c.instructions, c.instances));
    }
    say(out, format!("{:<16}{:>12}{:>12}", "total", r.instructions_total, r.instances_total));
    say(
        out,
        format!(
            "average length (words): instruction {:.2}, input {:.2} ({} non-empty), output {:.2}",
            r.avg_len_instruction, r.avg_len_input, r.non_empty_inputs, r.avg_len_output
        ),
    );
    match &r.diversity {
        Some(d) => {
            say(
                out,
                format!(
                    "max ROUGE-L to seeds over {} generated instruction(s): mean {:.4}, min {:.4}, max {:.4}",
                    d.compared, d.mean, d.min, d.max
                ),
            );
            for (i, c) in d.histogram.iter().enumerate() {
                say(out, format!("  [{:.1}, {:.1}{} {c}", i as f64 / 10.0, (i + 1) as f64 / 10.0, if i == 9 { "]" } else { ")" }));
            }
        }
        None => say(out, "diversity: needs both seed and generated tasks"),
    }
    if let Some(p) = report_path {
        write_json_pretty(p, &r)?;
    }
    Ok(r)
}

pub const REVIEW_DIR: &str = "review";

/// Samples generated tasks into `review/review_sheet.jsonl`.
pub fn cmd_review(
    cfg: &RunConfig,
    file: &Path,
    sample_size: usize,
    out: Out<'_>,
) -> Result<usize, CmdError> {
    let tasks = read_tasks(file)?;
    let sheet = export_review_sheet(&tasks, sample_size, &mut substream(cfg.rng_seed, "review"))
        .map_err(|e| CmdError::Domain(e.to_string()))?;
    let path = cfg.out(REVIEW_DIR).join("review_sheet.jsonl");
    write_jsonl(&path, &sheet)?;
    say(out, format!("{} task(s) written to {}", sheet.len(), path.display()));
    Ok(sheet.len())
}
