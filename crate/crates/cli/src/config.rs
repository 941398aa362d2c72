//! TOML configuration. Every key is optional; see `docs/config.md`.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;
use visprog_core::debugger::ContainmentPolicy;
use visprog_core::inject::DecodeMode;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub scenes: ScenesSection,
    #[serde(default)]
    pub inject: InjectSection,
    #[serde(default)]
    pub debug: DebugSection,
    #[serde(default)]
    pub endpoints: EndpointsSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenesSection {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectSection {
    pub mode: Option<DecodeMode>,
    pub threshold: Option<f64>,
    pub max_masked: Option<usize>,
    pub max_tokens: Option<usize>,
    pub seed: Option<u64>,
    pub attempts: Option<usize>,
    pub ngram_order: Option<usize>,
    pub ngram_alpha: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DebugSection {
    pub threshold: Option<f64>,
    pub max_steps: Option<usize>,
    pub containment: Option<ContainmentPolicy>,
    pub feedback_budget: Option<usize>,
    pub step_limit: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointsSection {
    pub model: Option<String>,
    pub critic: Option<String>,
    pub refiner: Option<String>,
    pub timeout_ms: Option<u64>,
    pub retries: Option<usize>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Config> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_schema_parses() {
        let cfg: Config = toml::from_str(
            r#"
            [scenes]
            dir = "fixtures/scenes"
            [inject]
            mode = "greedy"
            threshold = 0.8
            max_masked = 2
            max_tokens = 64
            seed = 9
            attempts = 3
            ngram_order = 4
            ngram_alpha = 0.5
            [debug]
            threshold = 0.6
            max_steps = 2
            containment = "lenient"
            feedback_budget = 500
            step_limit = 1000
            [endpoints]
            model = "http://127.0.0.1:1"
            critic = "http://127.0.0.1:2"
            refiner = "http://127.0.0.1:3"
            timeout_ms = 2000
            retries = 1
            "#,
        )
        .unwrap();
        assert_eq!(cfg.inject.mode, Some(DecodeMode::Greedy));
        assert_eq!(cfg.debug.containment, Some(ContainmentPolicy::Lenient));
        assert_eq!(cfg.endpoints.retries, Some(1));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<Config>("[inject]\ntemperature = 1.0").is_err());
    }
}
