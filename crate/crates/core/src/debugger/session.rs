use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::backends::{Critic, CriticVerdict, Refiner};
use crate::dsl::{self, differs_only_within, SourceSpan};
use crate::exec::{execute_or_syntax_error, render_feedback, DEFAULT_BUDGET, DEFAULT_STEP_LIMIT};
use crate::world::SceneGraph;

/// What to do with a refinement that edits bytes outside the location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContainmentPolicy {
    /// Discard the refinement and keep the previous program.
    Strict,
    /// Accept the full rewrite.
    Lenient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DebugSessionConfig {
    /// The critic accepts a program when its score is strictly above this.
    pub score_threshold: f64,
    /// Maximum number of critic-refiner iterations.
    pub max_steps: usize,
    pub containment: ContainmentPolicy,
    pub feedback_budget: usize,
    pub step_limit: usize,
}

impl Default for DebugSessionConfig {
    fn default() -> Self {
        DebugSessionConfig {
            score_threshold: 0.5,
            max_steps: 3,
            containment: ContainmentPolicy::Strict,
            feedback_budget: DEFAULT_BUDGET,
            step_limit: DEFAULT_STEP_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid debug session config: {0}")]
pub struct SessionConfigError(pub String);

impl DebugSessionConfig {
    pub fn validate(&self) -> Result<(), SessionConfigError> {
        if !(self.score_threshold > 0.0 && self.score_threshold < 1.0) {
            return Err(SessionConfigError(format!(
                "score threshold {} not in (0, 1)",
                self.score_threshold
            )));
        }
        if self.max_steps == 0 {
            return Err(SessionConfigError("max_steps must be at least 1".into()));
        }
        Ok(())
    }
}

/// One critic call, and the refinement that followed a rejection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebugIteration {
    pub program: String,
    pub feedback: String,
    pub verdict: CriticVerdict,
    /// The location handed to the refiner; the whole body when the critic
    /// gave none.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loc: Option<SourceSpan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refined: Option<String>,
    /// The refiner edited outside `loc`.
    #[serde(default)]
    pub containment_violation: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    CriticAccepted,
    MaxSteps,
    /// A backend failed; `error` holds the reason.
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebugTranscript {
    pub iterations: Vec<DebugIteration>,
    pub final_program: String,
    pub termination: Termination,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl DebugTranscript {
    /// Number of refiner calls made.
    pub fn refinements(&self) -> usize {
        self.iterations.iter().filter(|i| i.refined.is_some()).count()
    }

    /// The program a session limited to `k` iterations would return; `k = 0`
    /// is the input program.
    pub fn program_at(&self, k: usize) -> &str {
        // Each iteration starts from the program the previous one carried
        // forward, so the (k+1)-th entry holds the state after k iterations.
        match self.iterations.get(k) {
            Some(it) => &it.program,
            None => &self.final_program,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcripts serialize")
    }
}

/// Span of the function body, or of everything after the first line when
/// the program does not parse.
pub fn whole_body_span(program: &str) -> Option<SourceSpan> {
    if let Ok(ast) = dsl::parse(program) {
        let body = &ast.function.body;
        if let (Some(first), Some(last)) = (body.first(), body.last()) {
            return SourceSpan::from_bytes(program, first.span.start_byte, last.span.end_byte);
        }
    }
    match program.find('\n') {
        Some(nl) if nl + 1 < program.len() => SourceSpan::from_bytes(program, nl + 1, program.len()),
        _ => SourceSpan::from_bytes(program, 0, program.len()),
    }
}

/// The critic-refiner loop: execute, judge, and refine the located span
/// until the critic accepts or `max_steps` iterations have run.
pub fn run_debug_loop(
    program: &str,
    scenes: &[Arc<SceneGraph>],
    critic: &dyn Critic,
    refiner: &dyn Refiner,
    cfg: &DebugSessionConfig,
) -> DebugTranscript {
    let mut current = program.to_string();
    let mut iterations = Vec::new();
    for _ in 0..cfg.max_steps {
        let outcome = execute_or_syntax_error(&current, scenes, cfg.step_limit);
        let feedback = render_feedback(&outcome, cfg.feedback_budget).text;
        let verdict = match critic.judge(&current, &feedback) {
            Ok(v) => v,
            Err(e) => return aborted(iterations, current, e.to_string()),
        };
        if verdict.score > cfg.score_threshold {
            iterations.push(DebugIteration {
                program: current.clone(),
                feedback,
                verdict,
                loc: None,
                refined: None,
                containment_violation: false,
            });
            return DebugTranscript {
                iterations,
                final_program: current,
                termination: Termination::CriticAccepted,
                error: None,
            };
        }
        let loc = verdict
            .loc
            .filter(|l| l.is_valid_in(&current))
            .or_else(|| whole_body_span(&current));
        let Some(loc) = loc else {
            return aborted(iterations, current, "program is empty; nothing to refine".into());
        };
        let refined = match refiner.refine(&current, &feedback, &loc) {
            Ok(p) => p,
            Err(e) => return aborted(iterations, current, e.to_string()),
        };
        let violation = !differs_only_within(&current, &refined, &loc);
        let next = if violation && cfg.containment == ContainmentPolicy::Strict {
            log::debug!("refinement edits outside loc; keeping previous program");
            current.clone()
        } else {
            refined.clone()
        };
        iterations.push(DebugIteration {
            program: current,
            feedback,
            verdict,
            loc: Some(loc),
            refined: Some(refined),
            containment_violation: violation,
        });
        current = next;
    }
    DebugTranscript {
        iterations,
        final_program: current,
        termination: Termination::MaxSteps,
        error: None,
    }
}

fn aborted(iterations: Vec<DebugIteration>, current: String, error: String) -> DebugTranscript {
    DebugTranscript {
        iterations,
        final_program: current,
        termination: Termination::Aborted,
        error: Some(error),
    }
}
