//! Injection rates, record verification and training-row serialization.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::pipeline::{DatasetRecord, PoolEntry};
use crate::debugger::{encode_loc, LocError};
use crate::dsl::differs_only_within;
use crate::exec::{execute_or_syntax_error, render_feedback, DEFAULT_STEP_LIMIT};
use crate::harness::metrics::matches_ground_truth;
use crate::model::{T_CORRECT, T_INCORRECT};
use crate::world::{SceneGraph, SceneStore};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("error rate needs a non-empty correct pool")]
pub struct EmptyPool;

/// `100 · injected / pool` in tenths of a percent, rounded half away from
/// zero. Exact integer arithmetic.
pub fn error_rate_tenths(n_injected: u64, n_pool: u64) -> Result<u64, EmptyPool> {
    if n_pool == 0 {
        return Err(EmptyPool);
    }
    let num = 1000u128 * n_injected as u128;
    let pool = n_pool as u128;
    Ok(((2 * num + pool) / (2 * pool)) as u64)
}

/// The injection success rate as a percentage with one decimal.
pub fn error_rate(n_injected: u64, n_pool: u64) -> Result<f64, EmptyPool> {
    error_rate_tenths(n_injected, n_pool).map(|t| t as f64 / 10.0)
}

/// Why a record fails verification.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RecordError {
    #[error("record {id}: programs differ outside loc {start}..{end}")]
    Containment { id: String, start: usize, end: usize },
    #[error("record {id}: loc is not a valid span of the incorrect program")]
    InvalidLoc { id: String },
    #[error("record {id}: cannot mark loc: {source}")]
    Marking { id: String, source: LocError },
    #[error("record {id}: correct program does not reach the ground truth ({detail})")]
    CorrectMismatch { id: String, detail: String },
    #[error("record {id}: incorrect program still reaches the ground truth")]
    IncorrectMatches { id: String },
    #[error("record {id}: {message}")]
    Scene { id: String, message: String },
}

/// Re-executes both programs of `record` and checks every record invariant.
pub fn verify_record(record: &DatasetRecord, store: &SceneStore) -> Result<(), RecordError> {
    let id = record.id.clone();
    check_containment(record)?;
    let scenes = store.resolve(&record.scene_ids).map_err(|e| RecordError::Scene {
        id: id.clone(),
        message: e.to_string(),
    })?;
    let corr = execute_or_syntax_error(&record.program_correct, &scenes, DEFAULT_STEP_LIMIT);
    if !matches_ground_truth(&corr, &record.ground_truth) {
        return Err(RecordError::CorrectMismatch {
            id,
            detail: format!("result {:?}, exception {:?}", corr.result, corr.exception),
        });
    }
    let inc = execute_or_syntax_error(&record.program_incorrect, &scenes, DEFAULT_STEP_LIMIT);
    if matches_ground_truth(&inc, &record.ground_truth) {
        return Err(RecordError::IncorrectMatches { id });
    }
    Ok(())
}

fn check_containment(record: &DatasetRecord) -> Result<(), RecordError> {
    let id = record.id.clone();
    if !record.loc.is_valid_in(&record.program_incorrect) {
        return Err(RecordError::InvalidLoc { id });
    }
    if !differs_only_within(&record.program_incorrect, &record.program_correct, &record.loc) {
        return Err(RecordError::Containment {
            id,
            start: record.loc.start_byte,
            end: record.loc.end_byte,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowSource {
    InjectedCorrect,
    InjectedIncorrect,
    Natural,
}

/// One critic training example: predict `target` from program and feedback.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticRow {
    pub id: String,
    pub source: RowSource,
    pub program: String,
    pub feedback: String,
    /// The correctness token, followed for localized errors by a newline and
    /// the loc-marked program.
    pub target: String,
}

/// One refiner training example: rewrite the marked span of the program.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinerRow {
    pub id: String,
    pub program_incorrect: String,
    pub feedback: String,
    pub marked_program: String,
    pub target: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrainingSet {
    pub critic: Vec<CriticRow>,
    pub refiner: Vec<RefinerRow>,
}

impl TrainingSet {
    pub fn critic_jsonl(&self) -> String {
        to_jsonl(&self.critic)
    }

    pub fn refiner_jsonl(&self) -> String {
        to_jsonl(&self.refiner)
    }
}

fn to_jsonl<T: Serialize>(rows: &[T]) -> String {
    rows.iter()
        .map(|r| serde_json::to_string(r).expect("rows serialize") + "\n")
        .collect()
}

fn feedback(program: &str, scenes: &[Arc<SceneGraph>], budget: usize) -> String {
    render_feedback(&execute_or_syntax_error(program, scenes, DEFAULT_STEP_LIMIT), budget).text
}

/// Builds critic and refiner rows.
///
/// Each injected record contributes a correct and an incorrect critic row
/// plus one refiner row. Each natural program contributes one critic row
/// labeled by whether its execution matches the ground truth, without loc.
pub fn serialize_training_records(
    records: &[DatasetRecord],
    natural: &[PoolEntry],
    store: &SceneStore,
    budget: usize,
) -> Result<TrainingSet, RecordError> {
    let mut set = TrainingSet::default();
    for r in records {
        check_containment(r)?;
        let scenes = store.resolve(&r.scene_ids).map_err(|e| RecordError::Scene {
            id: r.id.clone(),
            message: e.to_string(),
        })?;
        let marked = encode_loc(&r.program_incorrect, &r.loc).map_err(|source| RecordError::Marking {
            id: r.id.clone(),
            source,
        })?;
        let fb_inc = feedback(&r.program_incorrect, &scenes, budget);
        set.critic.push(CriticRow {
            id: r.id.clone(),
            source: RowSource::InjectedCorrect,
            program: r.program_correct.clone(),
            feedback: feedback(&r.program_correct, &scenes, budget),
            target: T_CORRECT.to_string(),
        });
        set.critic.push(CriticRow {
            id: r.id.clone(),
            source: RowSource::InjectedIncorrect,
            program: r.program_incorrect.clone(),
            feedback: fb_inc.clone(),
            target: format!("{T_INCORRECT}\n{marked}"),
        });
        set.refiner.push(RefinerRow {
            id: r.id.clone(),
            program_incorrect: r.program_incorrect.clone(),
            feedback: fb_inc,
            marked_program: marked,
            target: r.program_correct.clone(),
        });
    }
    for n in natural {
        let scenes = store.resolve(&n.scene_ids).map_err(|e| RecordError::Scene {
            id: n.id.clone(),
            message: e.to_string(),
        })?;
        let outcome = execute_or_syntax_error(&n.program, &scenes, DEFAULT_STEP_LIMIT);
        let correct = matches_ground_truth(&outcome, &n.ground_truth);
        set.critic.push(CriticRow {
            id: n.id.clone(),
            source: RowSource::Natural,
            program: n.program.clone(),
            feedback: render_feedback(&outcome, budget).text,
            target: if correct { T_CORRECT } else { T_INCORRECT }.to_string(),
        });
    }
    Ok(set)
}
