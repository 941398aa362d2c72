//! Dataset evaluation: per-iteration metrics of the debugging loop.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{matches_ground_truth, score, GroundTruth, TaskKind};
use crate::debugger::{
    run_debug_loop, BackendError, Critic, DebugSessionConfig, OracleCritic, OracleRefiner, Refiner,
    RemoteCritic, RemoteRefiner, Termination,
};
use crate::dsl::SourceSpan;
use crate::exec::{execute_or_syntax_error, ExecutionOutcome};
use crate::inject::{DatasetRecord, PoolEntry};
use crate::world::{SceneGraph, SceneStore};

/// Stored correct program and injected location, used by oracle backends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReference {
    pub program_correct: String,
    /// Injected span in the sample's program.
    pub loc: SourceSpan,
    /// Corresponding span in `program_correct`.
    pub loc_correct: SourceSpan,
}

impl OracleReference {
    pub fn correct_text(&self) -> Option<&str> {
        self.program_correct
            .get(self.loc_correct.start_byte..self.loc_correct.end_byte)
    }
}

/// One evaluation sample: a program to run and debug, with its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub question: String,
    pub scene_ids: Vec<String>,
    pub ground_truth: GroundTruth,
    pub program: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<OracleReference>,
}

impl Sample {
    pub fn task_kind(&self) -> TaskKind {
        self.ground_truth.task_kind()
    }

    /// The incorrect program of an injected record, with oracle reference.
    pub fn from_record(r: &DatasetRecord) -> Self {
        Sample {
            id: r.id.clone(),
            question: r.question.clone(),
            scene_ids: r.scene_ids.clone(),
            ground_truth: r.ground_truth.clone(),
            program: r.program_incorrect.clone(),
            reference: Some(OracleReference {
                program_correct: r.program_correct.clone(),
                loc: r.loc,
                loc_correct: r.loc_correct,
            }),
        }
    }

    pub fn from_entry(e: &PoolEntry) -> Self {
        Sample {
            id: e.id.clone(),
            question: e.question.clone(),
            scene_ids: e.scene_ids.clone(),
            ground_truth: e.ground_truth.clone(),
            program: e.program.clone(),
            reference: None,
        }
    }
}

/// Builds the critic and refiner for one sample.
pub trait BackendFactory: Sync {
    fn make(
        &self,
        sample: &Sample,
        scenes: &[Arc<SceneGraph>],
    ) -> Result<(Box<dyn Critic>, Box<dyn Refiner>), BackendError>;
}

/// Which critic/refiner pair to run.
#[derive(Debug, Clone, PartialEq)]
pub enum Backends {
    /// Ground-truth oracles using each sample's reference.
    Oracle,
    Remote {
        critic_url: String,
        refiner_url: String,
        timeout: Duration,
        retries: usize,
    },
}

impl BackendFactory for Backends {
    fn make(
        &self,
        sample: &Sample,
        scenes: &[Arc<SceneGraph>],
    ) -> Result<(Box<dyn Critic>, Box<dyn Refiner>), BackendError> {
        Ok(match self {
            Backends::Oracle => (
                Box::new(OracleCritic {
                    scenes: scenes.to_vec(),
                    ground_truth: Some(sample.ground_truth.clone()),
                    injected_loc: sample.reference.as_ref().map(|r| r.loc),
                }),
                Box::new(OracleRefiner {
                    correct_text: sample
                        .reference
                        .as_ref()
                        .and_then(|r| r.correct_text())
                        .map(str::to_string),
                }),
            ),
            Backends::Remote {
                critic_url,
                refiner_url,
                timeout,
                retries,
            } => (
                Box::new(RemoteCritic::new(critic_url, *timeout, *retries)),
                Box::new(RemoteRefiner::new(refiner_url, *timeout, *retries)),
            ),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Debugging iterations; 0 runs plain execution only.
    pub iterations: usize,
    pub session: DebugSessionConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let session = DebugSessionConfig::default();
        EvalConfig {
            iterations: session.max_steps,
            session,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorSource {
    Correct,
    /// Wrong because a fixture answer on the executed path is deliberately
    /// wrong, standing in for a perception-model mistake.
    VlmErrorSimulated,
    ProgramError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub id: String,
    pub task_kind: TaskKind,
    /// Metric contribution after 0, 1, ..., T iterations.
    pub scores: Vec<f64>,
    pub error_source: ErrorSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub termination: Option<Termination>,
    pub refinements: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorTally {
    pub correct: usize,
    pub vlm_error_simulated: usize,
    pub program_error: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: usize,
    /// Mean answer-match accuracy over QA samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qa_accuracy: Option<f64>,
    /// Mean IoU over grounding samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grounding_iou: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub iterations: usize,
    pub per_iteration: Vec<IterationMetrics>,
    /// Sorted by id.
    pub samples: Vec<SampleOutcome>,
    /// Sources of error at iteration 0.
    pub tally: ErrorTally,
}

impl EvalReport {
    /// Tab-separated summary, one row per iteration.
    pub fn table(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{:.1}", 100.0 * x));
        let mut out = String::from("iteration\tqa_accuracy\tgrounding_iou\n");
        for m in &self.per_iteration {
            out.push_str(&format!("{}\t{}\t{}\n", m.iteration, fmt(m.qa_accuracy), fmt(m.grounding_iou)));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("empty dataset")]
    EmptyDataset,
}

fn error_source(outcome: &ExecutionOutcome, gt: &GroundTruth) -> ErrorSource {
    if matches_ground_truth(outcome, gt) {
        ErrorSource::Correct
    } else if outcome.queries.iter().any(|q| q.faulty) {
        ErrorSource::VlmErrorSimulated
    } else {
        ErrorSource::ProgramError
    }
}

fn evaluate_sample(
    sample: &Sample,
    store: &SceneStore,
    cfg: &EvalConfig,
    backends: &dyn BackendFactory,
) -> SampleOutcome {
    let t = cfg.iterations;
    let failed = |error: String| SampleOutcome {
        id: sample.id.clone(),
        task_kind: sample.task_kind(),
        scores: vec![0.0; t + 1],
        error_source: ErrorSource::ProgramError,
        termination: None,
        refinements: 0,
        error: Some(error),
    };
    let scenes = match store.resolve(&sample.scene_ids) {
        Ok(s) => s,
        Err(e) => return failed(e.to_string()),
    };
    let step_limit = cfg.session.step_limit;
    let initial = execute_or_syntax_error(&sample.program, &scenes, step_limit);
    let mut scores = vec![score(&initial, &sample.ground_truth)];
    let error_source = error_source(&initial, &sample.ground_truth);
    if t == 0 {
        return SampleOutcome {
            id: sample.id.clone(),
            task_kind: sample.task_kind(),
            scores,
            error_source,
            termination: None,
            refinements: 0,
            error: None,
        };
    }
    let (critic, refiner) = match backends.make(sample, &scenes) {
        Ok(b) => b,
        Err(e) => return failed(e.to_string()),
    };
    let session = DebugSessionConfig {
        max_steps: t,
        ..cfg.session
    };
    let transcript = run_debug_loop(&sample.program, &scenes, critic.as_ref(), refiner.as_ref(), &session);
    let mut cache: HashMap<&str, f64> = HashMap::new();
    cache.insert(&sample.program, scores[0]);
    for k in 1..=t {
        let program = transcript.program_at(k);
        let s = *cache.entry(program).or_insert_with(|| {
            score(&execute_or_syntax_error(program, &scenes, step_limit), &sample.ground_truth)
        });
        scores.push(s);
    }
    SampleOutcome {
        id: sample.id.clone(),
        task_kind: sample.task_kind(),
        scores,
        error_source,
        termination: Some(transcript.termination),
        refinements: transcript.refinements(),
        error: transcript.error.clone(),
    }
}

/// Runs every sample through plain execution (iteration 0) and the
/// debugging loop (iterations 1..=T).
pub fn evaluate(
    samples: &[Sample],
    store: &SceneStore,
    cfg: &EvalConfig,
    backends: &dyn BackendFactory,
) -> Result<EvalReport, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let mut outcomes: Vec<SampleOutcome> = samples
        .par_iter()
        .map(|s| evaluate_sample(s, store, cfg, backends))
        .collect();
    // Aggregating in id order keeps every float sum independent of input order.
    outcomes.sort_by(|a, b| a.id.cmp(&b.id).then_with(|| a.scores.partial_cmp(&b.scores).unwrap_or(std::cmp::Ordering::Equal)));
    let per_iteration = (0..=cfg.iterations)
        .map(|k| {
            let mean = |kind: TaskKind| {
                let vals: Vec<f64> = outcomes
                    .iter()
                    .filter(|o| o.task_kind == kind)
                    .map(|o| o.scores[k])
                    .collect();
                (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
            };
            IterationMetrics {
                iteration: k,
                qa_accuracy: mean(TaskKind::Qa),
                grounding_iou: mean(TaskKind::Grounding),
            }
        })
        .collect();
    let mut tally = ErrorTally::default();
    for o in &outcomes {
        match o.error_source {
            ErrorSource::Correct => tally.correct += 1,
            ErrorSource::VlmErrorSimulated => tally.vlm_error_simulated += 1,
            ErrorSource::ProgramError => tally.program_error += 1,
        }
    }
    Ok(EvalReport {
        iterations: cfg.iterations,
        per_iteration,
        samples: outcomes,
        tally,
    })
}
