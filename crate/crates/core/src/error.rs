use alloc::string::String;

use crate::corpus::FrequencyBand;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("electrode vector has {found} values, expected {expected}")]
    ElectrodeCount { expected: usize, found: usize },
    #[error("non-finite value in {context}")]
    NonFinite { context: String },
    #[error("record references unknown sentence `{0}`")]
    DanglingSentence(String),
    #[error("token index {index} out of range for sentence `{sentence_id}` of length {len}")]
    TokenIndex {
        sentence_id: String,
        index: usize,
        len: usize,
    },
    #[error("record task disagrees with sentence `{0}`")]
    TaskMismatch(String),
    #[error("duplicate sentence id `{0}`")]
    DuplicateSentence(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid electrode index {0}")]
    ElectrodeIndex(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("corpus has no {0} records")]
    MissingTask(&'static str),
    #[error("training data contains a single class")]
    SingleClass,
    #[error("sentence `{0}` has no positive attention score to normalise by")]
    NonPositiveMax(String),
    #[error("token {index} of sentence `{sentence_id}` has no embeddings")]
    UncoveredToken { sentence_id: String, index: usize },
    #[error("embeddings for band {band:?} come from different electrode selections")]
    MixedSelection { band: FrequencyBand },
    #[error("non-finite gradient for parameter `{0}`")]
    NonFiniteGradient(String),
    #[error("non-finite loss at epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("forward cache is stale (parameters changed since the forward pass)")]
    StaleCache,
    #[error("loss closure is not deterministic: {first} != {second}")]
    NonDeterministic { first: f64, second: f64 },
    #[error("score sequence for `{sentence_id}` has {scores} scores for {tokens} tokens")]
    Alignment {
        sentence_id: String,
        tokens: usize,
        scores: usize,
    },
    #[error("unknown tag scheme `{0}`")]
    UnknownTagScheme(String),
    #[error("infeasible task spec: {0}")]
    Infeasible(String),
}
