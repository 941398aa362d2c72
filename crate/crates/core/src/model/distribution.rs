use rand::Rng;
use serde::{Deserialize, Serialize};

/// Tolerance on the total probability mass of a distribution.
pub const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DistributionError {
    #[error("empty distribution")]
    Empty,
    #[error("probability at index {index} is {value}, not a finite non-negative number")]
    Invalid { index: usize, value: f64 },
    #[error("probabilities sum to {0}, not 1")]
    Sum(f64),
    #[error("distribution has {got} entries, vocabulary has {expected}")]
    Length { expected: usize, got: usize },
}

/// A validated next-token distribution over a vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TokenDistribution {
    probs: Vec<f64>,
}

impl TryFrom<Vec<f64>> for TokenDistribution {
    type Error = DistributionError;

    fn try_from(probs: Vec<f64>) -> Result<Self, Self::Error> {
        TokenDistribution::new(probs)
    }
}

impl From<TokenDistribution> for Vec<f64> {
    fn from(d: TokenDistribution) -> Self {
        d.probs
    }
}

impl TokenDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self, DistributionError> {
        if probs.is_empty() {
            return Err(DistributionError::Empty);
        }
        if let Some((index, &value)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(DistributionError::Invalid { index, value });
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(DistributionError::Sum(sum));
        }
        Ok(TokenDistribution { probs })
    }

    pub fn uniform(n: usize) -> Self {
        TokenDistribution {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Index of the largest probability; the lowest index wins ties.
    pub fn argmax(&self) -> usize {
        self.top2().0
    }

    /// The largest and second-largest entries as `(i*, i2)`, lowest index
    /// first on ties. For a single-entry distribution both are 0.
    pub fn top2(&self) -> (usize, usize) {
        let mut best = 0;
        let mut second: Option<usize> = None;
        for i in 1..self.probs.len() {
            let p = self.probs[i];
            if p > self.probs[best] {
                second = Some(best);
                best = i;
            } else if second.is_none_or(|s| p > self.probs[s]) {
                second = Some(i);
            }
        }
        (best, second.unwrap_or(best))
    }

    /// The tail distribution: zero at `i*`, every other entry divided by
    /// `1 - p[i*]`. `None` when `p[i*] = 1`, where the tail is undefined.
    pub fn tail(&self) -> Option<TokenDistribution> {
        let top = self.argmax();
        let rest = 1.0 - self.probs[top];
        if rest <= 0.0 {
            return None;
        }
        let mut probs: Vec<f64> = self.probs.iter().map(|p| p / rest).collect();
        probs[top] = 0.0;
        // The input may itself be up to SUM_TOLERANCE away from 1, so the
        // divided entries are scaled once more by their exact sum.
        let sum: f64 = probs.iter().sum();
        if sum <= 0.0 {
            return None;
        }
        probs.iter_mut().for_each(|p| *p /= sum);
        Some(TokenDistribution { probs })
    }

    /// Draws an index with probability proportional to its entry.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total: f64 = self.probs.iter().sum();
        let mut u = rng.gen::<f64>() * total;
        let mut last_positive = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                if u < p {
                    return i;
                }
                u -= p;
                last_positive = i;
            }
        }
        last_positive
    }
}
