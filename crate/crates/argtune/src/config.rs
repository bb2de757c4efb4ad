//! The TOML run configuration.

use std::path::{Path, PathBuf};

use argtune_core::curation::{MixtureSpec, SplitSpec, EVAL_INSTANCES_PER_TASK};
use argtune_core::synthesis::SynthesisConfig;
use serde::{Deserialize, Serialize};

use crate::backend::BackendConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub seed_tasks: PathBuf,
    pub output_dir: PathBuf,
    /// Replay fixture file; when set, generation uses it instead of the
    /// HTTP backend.
    pub fixtures: Option<PathBuf>,
    /// Task file evaluated by `eval`; defaults to the reserved test tasks
    /// written by `split`.
    pub eval_tasks: Option<PathBuf>,
    /// JSON object mapping task ids to dataset groups that are reserved
    /// for testing as a whole.
    pub split_groups: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            seed_tasks: PathBuf::from("seed_tasks.jsonl"),
            output_dir: PathBuf::from("out"),
            fixtures: None,
            eval_tasks: None,
            split_groups: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed; every stage derives its own named stream from it.
    pub rng_seed: u64,
    /// Prompt template used for training records and evaluation prompts.
    pub template: String,
    /// Instances sampled per evaluated task.
    pub eval_instances: usize,
    pub backend: BackendConfig,
    pub synthesis: SynthesisConfig,
    pub split: SplitSpec,
    pub mixture: MixtureSpec,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            rng_seed: 0,
            template: "alpaca".into(),
            eval_instances: EVAL_INSTANCES_PER_TASK,
            backend: BackendConfig::default(),
            synthesis: SynthesisConfig::default(),
            split: SplitSpec::default(),
            mixture: MixtureSpec::default(),
            paths: Paths::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        let mut c: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        c.sync_seeds();
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_toml(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Copies the root seed into the stage configurations.
    pub fn sync_seeds(&mut self) {
        self.synthesis.rng_seed = self.rng_seed;
        self.split.rng_seed = self.rng_seed;
    }

    pub fn validate(&self) -> Result<(), String> {
        self.backend.validate()?;
        self.synthesis.validate()?;
        self.split.validate().map_err(|e| e.to_string())?;
        if self.eval_instances == 0 {
            return Err("eval_instances must be at least 1".into());
        }
        Ok(())
    }

    pub fn out(&self, rel: &str) -> PathBuf {
        self.paths.output_dir.join(rel)
    }
}
