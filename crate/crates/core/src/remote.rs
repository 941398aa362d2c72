//! Minimal JSON-over-HTTP client shared by the remote model, critic and
//! refiner backends.
//!
//! Transport failures and timeouts are retried up to a configured count;
//! malformed responses are not, since repeating the request would not help.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RemoteError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("request timed out: {0}")]
    Timeout(String),
}

impl RemoteError {
    /// Whether repeating the request may succeed.
    pub fn is_retryable(&self) -> bool {
        !matches!(self, RemoteError::Malformed(_))
    }
}

#[derive(Debug, Clone)]
pub struct HttpClient {
    base: String,
    agent: ureq::Agent,
    retries: usize,
}

impl HttpClient {
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);
    pub const DEFAULT_RETRIES: usize = 2;

    pub fn new(base_url: &str, timeout: Duration, retries: usize) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpClient {
            base: base_url.trim_end_matches('/').to_string(),
            agent,
            retries,
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    pub fn get_json<T: DeserializeOwned>(&self, path: &str) -> Result<T, RemoteError> {
        let url = format!("{}{path}", self.base);
        self.with_retries(|| {
            let resp = self.agent.get(&url).call().map_err(classify)?;
            read_json(resp)
        })
    }

    pub fn post_json<B: Serialize, T: DeserializeOwned>(
        &self,
        path: &str,
        body: &B,
    ) -> Result<T, RemoteError> {
        let url = format!("{}{path}", self.base);
        let payload = serde_json::to_string(body)
            .map_err(|e| RemoteError::Transport(format!("cannot encode request: {e}")))?;
        self.with_retries(|| {
            let resp = self
                .agent
                .post(&url)
                .header("content-type", "application/json")
                .send(payload.as_str())
                .map_err(classify)?;
            read_json(resp)
        })
    }

    fn with_retries<T>(&self, mut f: impl FnMut() -> Result<T, RemoteError>) -> Result<T, RemoteError> {
        let mut attempt = 0;
        loop {
            match f() {
                Err(e) if e.is_retryable() && attempt < self.retries => {
                    attempt += 1;
                    log::warn!("{e}; retry {attempt}/{}", self.retries);
                    std::thread::sleep(Duration::from_millis(50 << attempt.min(5)));
                }
                other => return other,
            }
        }
    }
}

fn classify(e: ureq::Error) -> RemoteError {
    match e {
        ureq::Error::Timeout(t) => RemoteError::Timeout(t.to_string()),
        other => RemoteError::Transport(other.to_string()),
    }
}

fn read_json<T: DeserializeOwned>(
    mut resp: ureq::http::Response<ureq::Body>,
) -> Result<T, RemoteError> {
    let status = resp.status().as_u16();
    let text = resp.body_mut().read_to_string().map_err(classify)?;
    if status >= 500 {
        return Err(RemoteError::Transport(format!("server returned status {status}")));
    }
    if status != 200 {
        return Err(RemoteError::Malformed(format!("status {status}: {text}")));
    }
    serde_json::from_str(&text).map_err(|e| RemoteError::Malformed(e.to_string()))
}
