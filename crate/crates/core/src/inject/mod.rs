//! Error injection: mask a random subtree of a correct program, let a
//! language model recover it (greedily or with mask-best sampling), and keep
//! recoveries whose execution no longer matches the ground truth.

pub mod category;
pub mod decode;
pub mod pipeline;
pub mod prompt;
pub mod records;

pub use category::{categorize_error, ErrorCategory};
pub use decode::{
    greedy_sample, low_confidence, mask_best_sample, mask_best_step, Decoded, MaskBestConfig,
    StopReason, StopRule,
};
pub use pipeline::{
    entry_rng, inject_error, inject_pool, mask_region, try_candidate, DatasetRecord, DecodeMode,
    InjectConfig, InjectError, OutcomeSummary, PoolEntry, PoolResult,
};
pub use prompt::PromptTemplate;
pub use records::{
    error_rate, serialize_training_records, verify_record, CriticRow, RecordError, RefinerRow,
    RowSource, TrainingSet,
};
