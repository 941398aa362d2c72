//! Injection over a pool of correct programs.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::category::{categorize_error, ErrorCategory};
use super::decode::{greedy_sample, mask_best_sample, Decoded, MaskBestConfig, StopRule};
use super::prompt::{mask_program, program_signature, PromptTemplate};
use crate::dsl::ast::NodeKind;
use crate::dsl::{self, differs_only_within, enumerate_subtrees, SourceSpan};
use crate::exec::{execute_or_syntax_error, ExecutionOutcome, DEFAULT_STEP_LIMIT};
use crate::harness::metrics::{matches_ground_truth, GroundTruth};
use crate::model::{pieces, LanguageModel, ModelError};
use crate::world::{SceneError, SceneGraph, SceneStore};

/// One program of the input pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    #[serde(default)]
    pub id: String,
    pub question: String,
    pub scene_ids: Vec<String>,
    pub ground_truth: GroundTruth,
    pub program: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecodeMode {
    Greedy,
    MaskBest,
}

impl DecodeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DecodeMode::Greedy => "greedy",
            DecodeMode::MaskBest => "mask-best",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InjectConfig {
    pub mode: DecodeMode,
    pub mask_best: MaskBestConfig,
    /// Candidate recoveries tried per program before giving up.
    pub attempts: usize,
    pub step_limit: usize,
}

impl Default for InjectConfig {
    fn default() -> Self {
        InjectConfig {
            mode: DecodeMode::MaskBest,
            mask_best: MaskBestConfig::default(),
            attempts: 5,
            step_limit: DEFAULT_STEP_LIMIT,
        }
    }
}

/// The parts of an [`ExecutionOutcome`] kept in dataset records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeSummary {
    pub result: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result_box: Option<[i64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exception: Option<String>,
    pub step_count: usize,
}

impl From<&ExecutionOutcome> for OutcomeSummary {
    fn from(o: &ExecutionOutcome) -> Self {
        OutcomeSummary {
            result: o.result.clone(),
            result_box: o.result_box,
            exception: o.exception.clone(),
            step_count: o.step_count,
        }
    }
}

/// A correct program paired with an injected incorrect variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub question: String,
    pub scene_ids: Vec<String>,
    pub ground_truth: GroundTruth,
    pub program_correct: String,
    pub program_incorrect: String,
    /// The spliced span in `program_incorrect`.
    pub loc: SourceSpan,
    /// The span of `program_correct` that `loc` replaced.
    pub loc_correct: SourceSpan,
    pub outcome_correct: OutcomeSummary,
    pub outcome_incorrect: OutcomeSummary,
    pub error_category: ErrorCategory,
    pub mode: DecodeMode,
    /// 1-based attempt that produced the record.
    pub attempt: usize,
    pub masked_kind: String,
    pub masked_steps: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum InjectError {
    #[error("program does not parse: {0}")]
    Parse(#[from] dsl::ParseError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("program is not correct on its scenes (result {result:?}, exception {exception:?})")]
    NotCorrect {
        result: Option<String>,
        exception: Option<String>,
    },
    #[error("program has no subtrees to mask")]
    NoSubtrees,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// The byte range actually regenerated for a masked subtree: the subtree
/// span widened to whole tokenizer pieces. Leading spaces of the first
/// piece belong to the region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskRegion {
    pub start: usize,
    pub end: usize,
    /// The piece right after the region, used as the decoding stop token.
    pub next_piece: Option<String>,
}

pub fn mask_region(program: &str, span: &SourceSpan) -> MaskRegion {
    let mut offset = 0;
    let mut start = None;
    let mut end = None;
    let mut next_piece = None;
    for p in pieces(program) {
        let (s, e) = (offset, offset + p.len());
        if start.is_none() && e > span.start_byte {
            start = Some(s);
        }
        if end.is_some() {
            next_piece = Some(p.to_string());
            break;
        }
        if e >= span.end_byte {
            end = Some(e);
        }
        offset = e;
    }
    MaskRegion {
        start: start.unwrap_or(span.start_byte),
        end: end.unwrap_or(program.len()),
        next_piece,
    }
}

/// Result of one injection attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub program: String,
    pub recovered: String,
    pub loc: Option<SourceSpan>,
    pub loc_correct: SourceSpan,
    pub outcome: ExecutionOutcome,
    pub decoded: Decoded,
}

/// Masks `span` of `entry.program`, decodes a recovery and splices it in.
pub fn try_candidate<R: Rng + ?Sized>(
    entry: &PoolEntry,
    span: &SourceSpan,
    scenes: &[Arc<SceneGraph>],
    model: &dyn LanguageModel,
    template: &PromptTemplate,
    cfg: &InjectConfig,
    rng: &mut R,
) -> Result<Candidate, ModelError> {
    let program = entry.program.as_str();
    let region = mask_region(program, span);
    let signature = program_signature(program);
    let code = mask_program(program, span.start_byte, span.end_byte);
    let mut prompt = template.render(&entry.question, &code, signature);
    prompt.push_str(&program[signature.len()..region.start]);
    let vocab = model.vocab();
    let context = vocab.tokenize(&prompt);
    let stop = region
        .next_piece
        .as_deref()
        .and_then(|p| vocab.id(p))
        .map(|token| StopRule { token });
    let decoded = match cfg.mode {
        DecodeMode::Greedy => greedy_sample(model, &context, cfg.mask_best.max_tokens, stop)?,
        DecodeMode::MaskBest => mask_best_sample(model, &context, &cfg.mask_best, stop, rng)?,
    };
    let recovered = vocab.detokenize(&decoded.tokens);
    let spliced = format!("{}{}{}", &program[..region.start], recovered, &program[region.end..]);
    let outcome = execute_or_syntax_error(&spliced, scenes, cfg.step_limit);

    // Whitespace shared by the start of both sides stays outside loc.
    let original = &program[region.start..region.end];
    let shared = recovered
        .bytes()
        .zip(original.bytes())
        .take_while(|(a, b)| a == b && (*a == b' ' || *a == b'\t'))
        .count();
    let shared = if shared < recovered.len() && shared < original.len() { shared } else { 0 };
    let loc_start = region.start + shared;
    let loc = SourceSpan::from_bytes(&spliced, loc_start, region.start + recovered.len());
    let loc_correct = SourceSpan::from_bytes(program, loc_start, region.end)
        .expect("mask region lies inside the program");
    Ok(Candidate {
        program: spliced,
        recovered,
        loc,
        loc_correct,
        outcome,
        decoded,
    })
}

/// Runs up to `cfg.attempts` injection attempts on one correct program.
///
/// Returns `Ok(None)` when no attempt changed the execution result.
pub fn inject_error<R: Rng + ?Sized>(
    entry: &PoolEntry,
    scenes: &[Arc<SceneGraph>],
    model: &dyn LanguageModel,
    template: &PromptTemplate,
    cfg: &InjectConfig,
    rng: &mut R,
) -> Result<Option<DatasetRecord>, InjectError> {
    let ast = dsl::parse(&entry.program)?;
    let correct = execute_or_syntax_error(&entry.program, scenes, cfg.step_limit);
    if !matches_ground_truth(&correct, &entry.ground_truth) {
        return Err(InjectError::NotCorrect {
            result: correct.result,
            exception: correct.exception,
        });
    }
    let subtrees = enumerate_subtrees(&ast);
    if subtrees.is_empty() {
        return Err(InjectError::NoSubtrees);
    }
    for attempt in 1..=cfg.attempts {
        let chosen = &subtrees[rng.gen_range(0..subtrees.len())];
        let cand = try_candidate(entry, &chosen.span, scenes, model, template, cfg, rng)?;
        let Some(loc) = cand.loc else {
            log::debug!("{}: attempt {attempt} recovered nothing", entry.id);
            continue;
        };
        if matches_ground_truth(&cand.outcome, &entry.ground_truth) {
            continue;
        }
        if !differs_only_within(&cand.program, &entry.program, &loc) {
            log::warn!("{}: attempt {attempt} broke the containment invariant", entry.id);
            continue;
        }
        let error_category = categorize_error(&entry.program, &cand.program, &loc, &cand.outcome);
        return Ok(Some(DatasetRecord {
            id: entry.id.clone(),
            question: entry.question.clone(),
            scene_ids: entry.scene_ids.clone(),
            ground_truth: entry.ground_truth.clone(),
            program_correct: entry.program.clone(),
            program_incorrect: cand.program,
            loc,
            loc_correct: cand.loc_correct,
            outcome_correct: (&correct).into(),
            outcome_incorrect: (&cand.outcome).into(),
            error_category,
            mode: cfg.mode,
            attempt,
            masked_kind: format!("{:?}", chosen.kind),
            masked_steps: cand.decoded.masked_steps.len(),
        }));
    }
    Ok(None)
}

/// Per-entry result of a pool run, in input order.
#[derive(Debug)]
pub struct PoolResult {
    pub index: usize,
    pub result: Result<Option<DatasetRecord>, InjectError>,
}

/// The random stream for pool entry `index`; independent of thread count.
pub fn entry_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Injects errors into every pool entry in parallel.
pub fn inject_pool(
    entries: &[PoolEntry],
    store: &SceneStore,
    model: &dyn LanguageModel,
    template: &PromptTemplate,
    cfg: &InjectConfig,
) -> Vec<PoolResult> {
    entries
        .par_iter()
        .enumerate()
        .map(|(index, entry)| {
            let mut rng = entry_rng(cfg.mask_best.seed, index);
            let result = store
                .resolve(&entry.scene_ids)
                .map_err(InjectError::from)
                .and_then(|scenes| inject_error(entry, &scenes, model, template, cfg, &mut rng));
            PoolResult { index, result }
        })
        .collect()
}

/// Kinds of the subtrees a program offers for masking, for reporting.
pub fn maskable_kinds(program: &str) -> Result<Vec<NodeKind>, dsl::ParseError> {
    Ok(enumerate_subtrees(&dsl::parse(program)?).into_iter().map(|s| s.kind).collect())
}
