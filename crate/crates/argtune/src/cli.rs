//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::{
    cmd_eval, cmd_generate, cmd_mix, cmd_review, cmd_split, cmd_stats, cmd_validate,
    parse_model_arg, CmdError, GenerateOptions,
};
use crate::config::RunConfig;
use argtune_core::curation::DEFAULT_REVIEW_SAMPLE;

#[derive(Debug, Parser)]
#[command(name = "argtune", version, about = "Synthesize, curate and evaluate argumentation instruction tasks")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed_tasks: Option<PathBuf>,
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub rng_seed: Option<u64>,
    /// Replay fixture file used instead of the configured endpoint.
    #[arg(long, global = true)]
    pub mock_fixtures: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a task file (defaults to the seed tasks).
    Validate { file: Option<PathBuf> },
    /// Run the synthesis loop.
    Generate {
        #[arg(long)]
        target_count: Option<usize>,
        /// Novelty threshold on ROUGE-L F1.
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        fewshot_size: Option<usize>,
        /// Continue from the checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
        /// Record every backend exchange to this fixture file.
        #[arg(long)]
        record_fixtures: Option<PathBuf>,
    },
    /// Reserve test tasks and split instances.
    Split,
    /// Assemble the training mixture and export records.
    Mix {
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Evaluate models and write the leaderboard.
    Eval {
        /// `name=url`; url may be `mock:<fixture file>` or `sim[:seed]`.
        #[arg(long = "models", required = true)]
        models: Vec<String>,
        #[arg(long)]
        eval_tasks: Option<PathBuf>,
    },
    /// Dataset statistics over task files.
    Stats {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Export a manual review sheet of generated tasks.
    Review {
        file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_REVIEW_SAMPLE)]
        sample_size: usize,
    },
}

impl Cli {
    /// Loads the configuration file (if any) and applies flag overrides.
    pub fn run_config(&self) -> Result<RunConfig, CmdError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p).map_err(CmdError::Config)?,
            None => RunConfig::default(),
        };
        if let Some(p) = &self.seed_tasks {
            cfg.paths.seed_tasks = p.clone();
        }
        if let Some(p) = &self.output_dir {
            cfg.paths.output_dir = p.clone();
        }
        if let Some(s) = self.rng_seed {
            cfg.rng_seed = s;
        }
        if let Some(p) = &self.mock_fixtures {
            cfg.paths.fixtures = Some(p.clone());
        }
        match &self.command {
            Command::Generate { target_count, tau, fewshot_size, .. } => {
                if let Some(n) = target_count {
                    cfg.synthesis.target_count = *n;
                }
                if let Some(t) = tau {
                    cfg.synthesis.novelty_threshold = *t;
                }
                if let Some(l) = fewshot_size {
                    cfg.synthesis.fewshot_size = *l;
                }
            }
            Command::Mix { budget: Some(b) } => cfg.mixture.total_budget = *b,
            Command::Eval { eval_tasks: Some(p), .. } => cfg.paths.eval_tasks = Some(p.clone()),
            _ => {}
        }
        cfg.sync_seeds();
        Ok(cfg)
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<(), CmdError> {
    let cfg = cli.run_config()?;
    match &cli.command {
        Command::Validate { file } => {
            cmd_validate(file.as_ref().unwrap_or(&cfg.paths.seed_tasks), out).map(|_| ())
        }
        Command::Generate { resume, record_fixtures, .. } => {
            let opts = GenerateOptions {
                resume: *resume,
                record_fixtures: record_fixtures.clone(),
            };
            cmd_generate(&cfg, &opts, out).map(|_| ())
        }
        Command::Split => cmd_split(&cfg, out).map(|_| ()),
        Command::Mix { .. } => cmd_mix(&cfg, out).map(|_| ()),
        Command::Eval { models, .. } => {
            let models = models
                .iter()
                .map(|m| parse_model_arg(m))
                .collect::<Result<Vec<_>, _>>()
                .map_err(CmdError::Config)?;
            cmd_eval(&cfg, &models, out).map(|_| ())
        }
        Command::Stats { files } => {
            let report = cli.output_dir.as_ref().map(|d| d.join("stats.json"));
            cmd_stats(files, report.as_deref(), out).map(|_| ())
        }
        Command::Review { file, sample_size } => {
            cmd_review(&cfg, file, *sample_size, out).map(|_| ())
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
