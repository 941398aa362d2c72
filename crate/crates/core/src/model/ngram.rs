use std::collections::HashMap;

use super::{LanguageModel, ModelError, TokenDistribution, Vocabulary};

#[derive(Debug, Clone, Default)]
struct Counts {
    total: u64,
    next: HashMap<u32, u64>,
}

/// Order-k n-gram counts over ids `0..vocab_size` with add-α smoothing.
///
/// The conditional for a context uses the longest suffix of it (at most
/// k−1 tokens) that was observed in training. A non-empty context with no
/// observed suffix gets the smoothed distribution of zero counts, which is
/// uniform. The empty context uses unigram counts.
#[derive(Debug, Clone)]
pub struct NGramModel {
    order: usize,
    alpha: f64,
    vocab_size: usize,
    tables: HashMap<Vec<u32>, Counts>,
}

impl NGramModel {
    pub const DEFAULT_ORDER: usize = 3;
    pub const DEFAULT_ALPHA: f64 = 1.0;

    pub fn new(vocab_size: usize, order: usize, alpha: f64) -> Self {
        assert!(vocab_size >= 1, "vocabulary must be non-empty");
        assert!(order >= 1, "n-gram order must be at least 1");
        assert!(alpha >= 0.0 && alpha.is_finite(), "alpha must be finite and non-negative");
        NGramModel {
            order,
            alpha,
            vocab_size,
            tables: HashMap::new(),
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    /// Adds every (context, next) pair of `seq` for context lengths
    /// 0..order−1.
    pub fn observe(&mut self, seq: &[u32]) {
        for t in 0..seq.len() {
            assert!((seq[t] as usize) < self.vocab_size, "token id {} out of range", seq[t]);
            for len in 0..self.order.min(t + 1) {
                let entry = self.tables.entry(seq[t - len..t].to_vec()).or_default();
                entry.total += 1;
                *entry.next.entry(seq[t]).or_default() += 1;
            }
        }
    }

    fn lookup(&self, context: &[u32]) -> Option<&Counts> {
        if context.is_empty() {
            return self.tables.get(context);
        }
        let longest = context.len().min(self.order - 1);
        (1..=longest)
            .rev()
            .find_map(|len| self.tables.get(&context[context.len() - len..]))
    }

    pub fn distribution(&self, context: &[u32]) -> TokenDistribution {
        let v = self.vocab_size;
        let Some(counts) = self.lookup(context).filter(|c| c.total > 0) else {
            return TokenDistribution::uniform(v);
        };
        let denom = counts.total as f64 + self.alpha * v as f64;
        let mut probs = vec![self.alpha / denom; v];
        for (&tok, &c) in &counts.next {
            probs[tok as usize] = (c as f64 + self.alpha) / denom;
        }
        TokenDistribution::new(probs).expect("smoothed counts form a distribution")
    }
}

/// An [`NGramModel`] paired with the vocabulary its ids refer to.
#[derive(Debug, Clone)]
pub struct NGramLm {
    vocab: Vocabulary,
    ngram: NGramModel,
}

impl NGramLm {
    pub fn new(vocab: Vocabulary, order: usize, alpha: f64) -> Self {
        let ngram = NGramModel::new(vocab.len(), order, alpha);
        NGramLm { vocab, ngram }
    }

    /// Builds a vocabulary from `texts` and trains on them, each text
    /// terminated by EOS.
    pub fn train_on_texts<'a, I>(texts: I, order: usize, alpha: f64) -> Self
    where
        I: IntoIterator<Item = &'a str> + Clone,
    {
        let mut lm = NGramLm::new(Vocabulary::build(texts.clone()), order, alpha);
        for t in texts {
            lm.observe_text(t);
        }
        lm
    }

    pub fn observe_text(&mut self, text: &str) {
        let mut ids = self.vocab.tokenize(text);
        ids.push(self.vocab.eos());
        self.ngram.observe(&ids);
    }

    pub fn ngram(&self) -> &NGramModel {
        &self.ngram
    }
}

impl LanguageModel for NGramLm {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn next_distribution(&self, context: &[u32]) -> Result<TokenDistribution, ModelError> {
        Ok(self.ngram.distribution(context))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unseen_context_is_uniform() {
        let mut m = NGramModel::new(4, 3, 1.0);
        assert_eq!(m.distribution(&[1, 2]).probs(), &[0.25; 4]);
        m.observe(&[0, 1, 2, 3]);
        assert_eq!(m.distribution(&[3, 3]).probs(), &[0.25; 4]);
    }

    #[test]
    fn hand_counted_conditional() {
        let mut m = NGramModel::new(4, 2, 1.0);
        for _ in 0..9 {
            m.observe(&[1, 0]);
        }
        let p = m.distribution(&[1]);
        assert_eq!(p.probs()[0], (9.0 + 1.0) / (9.0 + 4.0));
        assert_eq!(p.probs()[2], 1.0 / 13.0);
    }

    #[test]
    fn backoff_uses_longest_seen_context() {
        let mut m = NGramModel::new(16, 3, 0.0);
        m.observe(&[10, 11, 12]);
        m.observe(&[5, 11, 13]);
        assert_eq!(m.distribution(&[10, 11]).argmax(), 12);
        let d = m.distribution(&[7, 11]);
        assert_eq!(d.probs()[12], 0.5);
        assert_eq!(d.probs()[13], 0.5);
        assert_eq!(m.distribution(&[]).probs()[11], 2.0 / 6.0);
    }

    #[test]
    fn lm_distributions_are_normalized() {
        let progs = ["def f(image):\n    return 'yes'", "def f(image):\n    x = 1\n    return x"];
        let lm = NGramLm::train_on_texts(progs, 3, 1.0);
        let ret = lm.vocab().id("return").unwrap();
        for ctx in [&[][..], &[1, 2], &[ret]] {
            let d = lm.next_distribution(ctx).unwrap();
            assert_eq!(d.len(), lm.vocab().len());
            let s: f64 = d.probs().iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
        let quote = lm.vocab().id(" 'yes'").unwrap();
        assert_eq!(lm.next_distribution(&[ret]).unwrap().argmax(), quote as usize);
    }
}
