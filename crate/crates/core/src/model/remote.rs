use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{LanguageModel, ModelError, TokenDistribution, Vocabulary, SUM_TOLERANCE};
use crate::remote::HttpClient;

/// Responses whose mass is off by at most this much are rescaled to sum to
/// one; larger deviations are rejected as malformed.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabResponse {
    pub version: u32,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextRequest {
    pub context: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextResponse {
    pub probs: Vec<f64>,
}

/// A language model served over HTTP: `GET /v1/vocab` once at connect time,
/// then `POST /v1/next` per decoding step.
#[derive(Debug, Clone)]
pub struct RemoteModel {
    client: HttpClient,
    vocab: Vocabulary,
}

impl RemoteModel {
    pub fn connect(endpoint: &str, timeout: Duration, retries: usize) -> Result<Self, ModelError> {
        let client = HttpClient::new(endpoint, timeout, retries);
        let resp: VocabResponse = client.get_json("/v1/vocab")?;
        if resp.version != super::VOCAB_VERSION {
            return Err(ModelError::Malformed(format!(
                "unsupported vocabulary version {}",
                resp.version
            )));
        }
        let vocab =
            Vocabulary::from_tokens(resp.tokens).map_err(|e| ModelError::Malformed(e.to_string()))?;
        Ok(RemoteModel { client, vocab })
    }
}

/// Checks a served probability vector against the vocabulary size.
pub fn validate_probs(probs: Vec<f64>, vocab_size: usize) -> Result<TokenDistribution, ModelError> {
    if probs.len() != vocab_size {
        return Err(ModelError::Malformed(format!(
            "distribution has {} entries, vocabulary has {vocab_size}",
            probs.len()
        )));
    }
    if let Some((i, p)) = probs.iter().enumerate().find(|(_, p)| !p.is_finite() || **p < 0.0) {
        return Err(ModelError::Malformed(format!("probability {p} at index {i}")));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > RENORMALIZE_TOLERANCE {
        return Err(ModelError::Malformed(format!("probabilities sum to {sum}")));
    }
    let probs = if (sum - 1.0).abs() > SUM_TOLERANCE {
        probs.into_iter().map(|p| p / sum).collect()
    } else {
        probs
    };
    TokenDistribution::new(probs).map_err(|e| ModelError::Malformed(e.to_string()))
}

impl LanguageModel for RemoteModel {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn next_distribution(&self, context: &[u32]) -> Result<TokenDistribution, ModelError> {
        let resp: NextResponse = self.client.post_json(
            "/v1/next",
            &NextRequest {
                context: context.to_vec(),
            },
        )?;
        validate_probs(resp.probs, self.vocab.len())
    }
}
