//! Recovery decoders: mask-best sampling and the greedy baseline.

use std::borrow::Cow;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::{LanguageModel, ModelError, TokenDistribution, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskBestConfig {
    /// Confidence threshold `th`: a step is eligible for masking when the
    /// gap between the two most likely tokens is below it.
    pub threshold: f64,
    /// Maximum number of masked steps `N`.
    pub max_masked: usize,
    /// Maximum number of generated tokens `T`.
    pub max_tokens: usize,
    pub seed: u64,
}

impl Default for MaskBestConfig {
    fn default() -> Self {
        MaskBestConfig {
            threshold: 0.9,
            max_masked: 1,
            max_tokens: 128,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid mask-best config: {0}")]
pub struct ConfigError(pub String);

impl MaskBestConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(ConfigError(format!("threshold {} not in (0, 1]", self.threshold)));
        }
        if self.max_tokens == 0 {
            return Err(ConfigError("max_tokens must be at least 1".into()));
        }
        Ok(())
    }
}

/// Whether the confidence gate is open for `p`: the top-two gap is below
/// `threshold`.
pub fn low_confidence(p: &TokenDistribution, threshold: f64) -> bool {
    let (top, second) = p.top2();
    if top == second {
        return false;
    }
    p.probs()[top] - p.probs()[second] < threshold
}

/// The distribution to sample from at one step, and whether the tail
/// substitution fired. A degenerate tail (`p[i*] = 1`) never fires.
pub fn mask_best_step<'a>(
    p: &'a TokenDistribution,
    masked_so_far: usize,
    cfg: &MaskBestConfig,
) -> (Cow<'a, TokenDistribution>, bool) {
    if masked_so_far < cfg.max_masked && low_confidence(p, cfg.threshold) {
        if let Some(tail) = p.tail() {
            return (Cow::Owned(tail), true);
        }
    }
    (Cow::Borrowed(p), false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Eos,
    StopToken,
    MaxTokens,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decoded {
    /// Generated ids, excluding EOS and the stop token.
    pub tokens: Vec<u32>,
    /// Indices into `tokens` at which the tail substitution fired.
    pub masked_steps: Vec<usize>,
    pub stop: StopReason,
}

/// Optional early stop: decoding ends, without keeping the token, when
/// `token` is produced while every bracket opened during decoding is closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopRule {
    pub token: u32,
}

fn bracket_delta(vocab: &Vocabulary, id: u32) -> i32 {
    match vocab.token(id).map(str::trim_start) {
        Some("(" | "[" | "{") => 1,
        Some(")" | "]" | "}") => -1,
        _ => 0,
    }
}

/// Removes the mask, location and verdict markers from `p`. They are not
/// program text, and a recovery containing them could not be marked up
/// later. When they hold all the mass the result is certain EOS.
fn without_control_tokens(p: TokenDistribution, vocab: &Vocabulary) -> TokenDistribution {
    let control = [
        vocab.masked(),
        vocab.bug_open(),
        vocab.bug_close(),
        vocab.t_correct(),
        vocab.t_incorrect(),
    ];
    let probs = p.probs();
    if control.iter().all(|&id| probs.get(id as usize).is_none_or(|&x| x == 0.0)) {
        return p;
    }
    let mut probs = probs.to_vec();
    for id in control {
        if let Some(x) = probs.get_mut(id as usize) {
            *x = 0.0;
        }
    }
    let sum: f64 = probs.iter().sum();
    if sum <= 0.0 {
        let mut eos = vec![0.0; probs.len()];
        eos[vocab.eos() as usize] = 1.0;
        return TokenDistribution::new(eos).expect("one-hot distribution is valid");
    }
    probs.iter_mut().for_each(|x| *x /= sum);
    TokenDistribution::new(probs).expect("renormalized distribution is valid")
}

/// Shared decoding loop. `pick` chooses the next id from the model's
/// distribution, given the number of masked steps so far, and reports
/// whether it masked.
fn decode(
    model: &dyn LanguageModel,
    prompt: &[u32],
    max_tokens: usize,
    stop: Option<StopRule>,
    mut pick: impl FnMut(&TokenDistribution, usize) -> (usize, bool),
) -> Result<Decoded, ModelError> {
    let vocab = model.vocab();
    let eos = vocab.eos();
    let mut context = prompt.to_vec();
    let mut tokens = Vec::new();
    let mut masked_steps = Vec::new();
    let mut depth = 0i32;
    while tokens.len() < max_tokens {
        let p = without_control_tokens(model.next_distribution(&context)?, vocab);
        let (id, masked) = pick(&p, masked_steps.len());
        let id = id as u32;
        if masked {
            masked_steps.push(tokens.len());
        }
        if id == eos {
            return Ok(Decoded { tokens, masked_steps, stop: StopReason::Eos });
        }
        if stop.is_some_and(|s| s.token == id) && depth <= 0 {
            return Ok(Decoded { tokens, masked_steps, stop: StopReason::StopToken });
        }
        depth += bracket_delta(vocab, id);
        tokens.push(id);
        context.push(id);
    }
    Ok(Decoded { tokens, masked_steps, stop: StopReason::MaxTokens })
}

/// Mask-best sampling: at each step, if fewer than `N` steps have been
/// masked and the model is not confident, sample from the tail distribution
/// (argmax removed); otherwise sample from `p` itself.
pub fn mask_best_sample<R: Rng + ?Sized>(
    model: &dyn LanguageModel,
    prompt: &[u32],
    cfg: &MaskBestConfig,
    stop: Option<StopRule>,
    rng: &mut R,
) -> Result<Decoded, ModelError> {
    decode(model, prompt, cfg.max_tokens, stop, |p, n| {
        let (dist, fired) = mask_best_step(p, n, cfg);
        (dist.sample(rng), fired)
    })
}

/// Greedy decoding: the argmax token at every step.
pub fn greedy_sample(
    model: &dyn LanguageModel,
    prompt: &[u32],
    max_tokens: usize,
    stop: Option<StopRule>,
) -> Result<Decoded, ModelError> {
    decode(model, prompt, max_tokens, stop, |p, _| (p.argmax(), false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NGramLm;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dist(p: &[f64]) -> TokenDistribution {
        TokenDistribution::new(p.to_vec()).unwrap()
    }

    #[test]
    fn gate_examples() {
        let cfg = MaskBestConfig { max_masked: 5, ..Default::default() };
        let p = dist(&[0.6, 0.3, 0.1]);
        let (d, fired) = mask_best_step(&p, 0, &cfg);
        assert!(fired);
        assert_eq!(d.probs()[0], 0.0);
        assert!((d.probs()[1] - 0.75).abs() < 1e-12);
        assert!((d.probs()[2] - 0.25).abs() < 1e-12);

        let p = dist(&[0.96, 0.03, 0.01]);
        let (d, fired) = mask_best_step(&p, 0, &cfg);
        assert!(!fired);
        assert_eq!(d.probs(), p.probs());

        let p = dist(&[0.6, 0.3, 0.1]);
        assert!(!mask_best_step(&p, 5, &cfg).1);
        let off = MaskBestConfig { max_masked: 0, ..cfg };
        assert!(!mask_best_step(&p, 0, &off).1);
    }

    #[test]
    fn config_validation() {
        assert!(MaskBestConfig::default().validate().is_ok());
        assert!(MaskBestConfig { threshold: 0.0, ..Default::default() }.validate().is_err());
        assert!(MaskBestConfig { threshold: 1.5, ..Default::default() }.validate().is_err());
        assert!(MaskBestConfig { max_tokens: 0, ..Default::default() }.validate().is_err());
    }

    fn lm() -> NGramLm {
        let progs = ["def f(image):\n    return image_patch.simple_query('a')"; 3];
        NGramLm::train_on_texts(progs.iter().copied(), 3, 0.01)
    }

    #[test]
    fn greedy_follows_the_memorized_continuation() {
        let lm = lm();
        let prompt = lm.vocab().tokenize("def f(image):\n    return");
        let a = greedy_sample(&lm, &prompt, 50, None).unwrap();
        assert_eq!(a.stop, StopReason::Eos);
        assert_eq!(lm.vocab().detokenize(&a.tokens), " image_patch.simple_query('a')");
        assert_eq!(greedy_sample(&lm, &prompt, 50, None).unwrap(), a);
    }

    #[test]
    fn stop_token_respects_brackets() {
        let lm = lm();
        let prompt = lm.vocab().tokenize("def f(image):\n    return");
        let close = lm.vocab().id(")").unwrap();
        let d = greedy_sample(&lm, &prompt, 50, Some(StopRule { token: close })).unwrap();
        // The ")" closing the call's own "(" is kept; there is no unmatched one.
        assert_eq!(d.stop, StopReason::Eos);
        let prompt = lm.vocab().tokenize("def f(image):\n    return image_patch.simple_query(");
        let d = greedy_sample(&lm, &prompt, 50, Some(StopRule { token: close })).unwrap();
        assert_eq!(d.stop, StopReason::StopToken);
        assert_eq!(lm.vocab().detokenize(&d.tokens), "'a'");
    }

    #[test]
    fn mask_best_diverges_from_greedy_at_first_masked_step() {
        let lm = lm();
        let prompt = lm.vocab().tokenize("def f(image):\n    return");
        let greedy = greedy_sample(&lm, &prompt, 50, None).unwrap();
        let cfg = MaskBestConfig { threshold: 1.0, max_masked: 1, ..Default::default() };
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = mask_best_sample(&lm, &prompt, &cfg, None, &mut rng).unwrap();
            assert_eq!(d.masked_steps, vec![0]);
            assert_ne!(d.tokens.first(), greedy.tokens.first());
        }
    }
}
