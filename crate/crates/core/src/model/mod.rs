//! Token-level language models.
//!
//! A [`Vocabulary`] maps DSL-lexeme pieces (plus reserved markers and 256
//! byte-fallback tokens) to dense ids. [`LanguageModel`] is the single
//! interface the decoders need: a next-token distribution for a context.
//! [`NGramLm`] is the built-in backend; [`RemoteModel`] speaks the HTTP wire
//! protocol documented in `docs/protocol.md`.

mod distribution;
mod ngram;
mod remote;
mod vocab;

pub use distribution::{DistributionError, TokenDistribution, SUM_TOLERANCE};
pub use ngram::{NGramLm, NGramModel};
pub use remote::{validate_probs, NextRequest, NextResponse, RemoteModel, VocabResponse};
pub use vocab::{
    pieces, VocabError, Vocabulary, BUG_CLOSE, BUG_OPEN, EOS, MASKED, RESERVED, T_CORRECT,
    T_INCORRECT, VOCAB_VERSION,
};

pub use crate::remote::RemoteError as ModelError;

/// A next-token predictor. Implementations are immutable once built and
/// safe to call concurrently.
pub trait LanguageModel: Send + Sync {
    fn vocab(&self) -> &Vocabulary;

    fn next_distribution(&self, context: &[u32]) -> Result<TokenDistribution, ModelError>;
}
