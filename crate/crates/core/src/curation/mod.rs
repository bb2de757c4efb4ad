//! Seed-task splitting, evaluation sampling, training mixtures, record
//! export, statistics, and review sheets.

mod mixture;
mod record;
mod review;
mod sampling;
mod split;
mod stats;

pub use mixture::{
    assemble_mixture, export_training_records, mixture_quotas, Hyperparameters, Mixture,
    MixtureError, MixtureItem, MixtureManifest, MixtureSpec, SourceAllocation, SourceSpec,
    DEFAULT_MIXTURE_BUDGET,
};
pub use record::{render_records, PromptTemplate, TrainingRecord, ALPACA, TEMPLATES};
pub use review::{export_review_sheet, Judgment, ReviewError, ReviewRecord, DEFAULT_REVIEW_SAMPLE, REVIEW_QUESTIONS};
pub use sampling::{
    regression_bin, sample_eval_instances, sample_instances, sampleable_count, water_fill,
    SampleError, EVAL_INSTANCES_PER_TASK, REGRESSION_BINS,
};
pub use split::{
    reserve_test_tasks, split_instances, split_sizes, InstanceSplit, Reservation, SplitError,
    SplitSpec,
};
pub use stats::{dataset_stats, DiversityReport, KindCounts, StatsReport, DIVERSITY_BINS};
