//! Critic and refiner backends: ground-truth oracles, fixed stubs for loop
//! testing, and HTTP clients for served models.

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::codec::decode_loc;
use crate::dsl::{splice, SourceSpan};
use crate::exec::{execute_or_syntax_error, DEFAULT_STEP_LIMIT};
use crate::harness::metrics::{matches_ground_truth, GroundTruth};
use crate::remote::{HttpClient, RemoteError};
use crate::world::SceneGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticVerdict {
    /// Probability assigned to the correct-token.
    pub score: f64,
    /// Error location; present when the critic judged the program incorrect
    /// and produced a decodable location.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loc: Option<SourceSpan>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error(transparent)]
    Remote(#[from] RemoteError),
    #[error("oracle: {0}")]
    Oracle(String),
}

pub trait Critic: Send + Sync {
    fn judge(&self, program: &str, feedback: &str) -> Result<CriticVerdict, BackendError>;
}

pub trait Refiner: Send + Sync {
    /// Rewrites `program`; the change is expected to stay inside `loc`.
    fn refine(&self, program: &str, feedback: &str, loc: &SourceSpan) -> Result<String, BackendError>;
}

/// Scores 1 when execution matches the ground truth, else 0 with the stored
/// injected location.
#[derive(Debug, Clone)]
pub struct OracleCritic {
    pub scenes: Vec<Arc<SceneGraph>>,
    pub ground_truth: Option<GroundTruth>,
    pub injected_loc: Option<SourceSpan>,
}

impl Critic for OracleCritic {
    fn judge(&self, program: &str, _feedback: &str) -> Result<CriticVerdict, BackendError> {
        let gt = self
            .ground_truth
            .as_ref()
            .ok_or_else(|| BackendError::Oracle("missing ground truth".into()))?;
        let outcome = execute_or_syntax_error(program, &self.scenes, DEFAULT_STEP_LIMIT);
        Ok(if matches_ground_truth(&outcome, gt) {
            CriticVerdict { score: 1.0, loc: None }
        } else {
            CriticVerdict {
                score: 0.0,
                loc: self.injected_loc,
            }
        })
    }
}

/// Splices the stored correct text into the given location.
#[derive(Debug, Clone)]
pub struct OracleRefiner {
    pub correct_text: Option<String>,
}

impl Refiner for OracleRefiner {
    fn refine(&self, program: &str, _feedback: &str, loc: &SourceSpan) -> Result<String, BackendError> {
        let text = self
            .correct_text
            .as_deref()
            .ok_or_else(|| BackendError::Oracle("missing stored correct span".into()))?;
        splice(program, loc, text).map_err(|e| BackendError::Oracle(e.to_string()))
    }
}

/// Returns the same verdict for every program.
#[derive(Debug, Clone)]
pub struct FixedCritic {
    pub verdict: CriticVerdict,
}

impl FixedCritic {
    pub fn accepting() -> Self {
        FixedCritic {
            verdict: CriticVerdict { score: 1.0, loc: None },
        }
    }

    pub fn rejecting() -> Self {
        FixedCritic {
            verdict: CriticVerdict { score: 0.0, loc: None },
        }
    }
}

impl Critic for FixedCritic {
    fn judge(&self, _program: &str, _feedback: &str) -> Result<CriticVerdict, BackendError> {
        Ok(self.verdict.clone())
    }
}

/// Returns its input unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityRefiner;

impl Refiner for IdentityRefiner {
    fn refine(&self, program: &str, _feedback: &str, _loc: &SourceSpan) -> Result<String, BackendError> {
        Ok(program.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticRequest {
    pub program: String,
    pub feedback: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticResponse {
    pub p_correct: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marked_program: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineRequest {
    pub program: String,
    pub feedback: String,
    pub marked_program: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineResponse {
    pub program: String,
}

/// Critic served at `POST /v1/critic`.
#[derive(Debug, Clone)]
pub struct RemoteCritic {
    client: HttpClient,
}

impl RemoteCritic {
    pub fn new(endpoint: &str, timeout: Duration, retries: usize) -> Self {
        RemoteCritic {
            client: HttpClient::new(endpoint, timeout, retries),
        }
    }
}

impl Critic for RemoteCritic {
    fn judge(&self, program: &str, feedback: &str) -> Result<CriticVerdict, BackendError> {
        let resp: CriticResponse = self.client.post_json(
            "/v1/critic",
            &CriticRequest {
                program: program.to_string(),
                feedback: feedback.to_string(),
            },
        )?;
        if !(0.0..=1.0).contains(&resp.p_correct) {
            return Err(RemoteError::Malformed(format!("p_correct {} outside [0, 1]", resp.p_correct)).into());
        }
        let loc = resp.marked_program.as_deref().and_then(|m| match decode_loc(m) {
            Ok((clean, span)) if clean == program => Some(span),
            Ok(_) => {
                log::warn!("critic marked a different program; ignoring its location");
                None
            }
            Err(e) => {
                log::warn!("critic location not decodable: {e}");
                None
            }
        });
        Ok(CriticVerdict {
            score: resp.p_correct,
            loc,
        })
    }
}

/// Refiner served at `POST /v1/refine`.
#[derive(Debug, Clone)]
pub struct RemoteRefiner {
    client: HttpClient,
}

impl RemoteRefiner {
    pub fn new(endpoint: &str, timeout: Duration, retries: usize) -> Self {
        RemoteRefiner {
            client: HttpClient::new(endpoint, timeout, retries),
        }
    }
}

impl Refiner for RemoteRefiner {
    fn refine(&self, program: &str, feedback: &str, loc: &SourceSpan) -> Result<String, BackendError> {
        let marked_program = super::codec::encode_loc(program, loc)
            .map_err(|e| RemoteError::Malformed(format!("cannot mark request program: {e}")))?;
        let resp: RefineResponse = self.client.post_json(
            "/v1/refine",
            &RefineRequest {
                program: program.to_string(),
                feedback: feedback.to_string(),
                marked_program,
            },
        )?;
        Ok(resp.program)
    }
}
