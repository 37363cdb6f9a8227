//! Token-level attention supervision from EEG embeddings and from baseline
//! signals.
//!
//! Every producer ends with the same two steps: divide by the sentence
//! maximum, then divide by the damping constant `e`. Final scores therefore
//! lie in `[0, 1/e]` with the sentence maximum at exactly `1/e`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{FrequencyBand, Sentence, Task};
use crate::error::{Error, Result};
use crate::math;
use crate::reduction::ReducedEmbedding;
use crate::rng::Rng;

pub const DEFAULT_E: f64 = 2.0;
/// Raw oracle score of a keyword token.
pub const ORACLE_HIGH: f64 = 1.0;
/// Raw oracle score of every other token.
pub const ORACLE_LOW: f64 = 0.1;

/// Anything with a sentence id and an ordered token list.
pub trait Tokenized {
    fn id(&self) -> &str;
    fn tokens(&self) -> &[String];
}

impl Tokenized for Sentence {
    fn id(&self) -> &str {
        &self.sentence_id
    }

    fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Eeg {
        band: FrequencyBand,
        k: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        task: Option<Task>,
    },
    FreqInverse,
    Fixation,
    /// Keyword oracle; `inverted` marks the anti-oracle control.
    Oracle {
        #[serde(default)]
        inverted: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionScoreSeq {
    pub sentence_id: String,
    pub tokens: Vec<String>,
    pub scores: Vec<f64>,
    pub provenance: Provenance,
}

impl AttentionScoreSeq {
    pub fn check_alignment(&self) -> Result<()> {
        if self.tokens.len() != self.scores.len() {
            return Err(Error::Alignment {
                sentence_id: self.sentence_id.clone(),
                tokens: self.tokens.len(),
                scores: self.scores.len(),
            });
        }
        Ok(())
    }
}

impl Tokenized for AttentionScoreSeq {
    fn id(&self) -> &str {
        &self.sentence_id
    }

    fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    Max,
    /// Kept only to compare against max pooling.
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarConfig {
    pub e: f64,
    pub pooling: Pooling,
    pub participant_average: bool,
}

impl Default for ScalarConfig {
    fn default() -> Self {
        Self {
            e: DEFAULT_E,
            pooling: Pooling::Max,
            participant_average: true,
        }
    }
}

/// Largest electrode value of a word embedding.
pub fn pool_token(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::Empty("word embedding"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "word embedding".into(),
        });
    }
    Ok(x.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

fn pool(x: &[f64], pooling: Pooling) -> Result<f64> {
    match pooling {
        Pooling::Max => pool_token(x),
        Pooling::Mean => {
            pool_token(x)?;
            Ok(math::mean(x))
        }
    }
}

/// Divides by the sentence maximum, which must be positive.
pub fn normalize_sentence(a: &[f64]) -> Result<Vec<f64>> {
    if a.is_empty() {
        return Err(Error::Empty("sentence scores"));
    }
    let max = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0 && max.is_finite()) {
        return Err(Error::NonPositiveMax(String::new()));
    }
    Ok(a.iter().map(|v| v / max).collect())
}

/// Divides every score by `e`.
pub fn damp(a: &[f64], e: f64) -> Result<Vec<f64>> {
    if !(e > 0.0 && e.is_finite()) {
        return Err(Error::InvalidParameter(format!("e must be positive, got {e}")));
    }
    Ok(a.iter().map(|v| v / e).collect())
}

fn finish(id: &str, raw: &[f64], e: f64) -> Result<Vec<f64>> {
    let normalized = normalize_sentence(raw).map_err(|err| match err {
        Error::NonPositiveMax(_) => Error::NonPositiveMax(id.to_string()),
        other => other,
    })?;
    damp(&normalized, e)
}

/// Shannon entropy in nats.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * math::ln(x)).sum::<f64>()
}

/// Scores of one sentence from its embeddings (one band, any number of
/// participants). Each embedding is pooled to a scalar; pooled values of
/// a token are averaged across participants before normalisation and
/// damping. With `participant_average` off only the lowest participant id
/// is used.
pub fn sentence_scores(
    sentence_id: &str,
    tokens: &[String],
    embeddings: &[&ReducedEmbedding],
    provenance: Provenance,
    config: &ScalarConfig,
) -> Result<AttentionScoreSeq> {
    if tokens.is_empty() {
        return Err(Error::Empty("sentence tokens"));
    }
    let first_participant = embeddings.iter().map(|e| e.participant_id).min();
    let mut sums = alloc::vec![0.0; tokens.len()];
    let mut counts = alloc::vec![0usize; tokens.len()];
    for e in embeddings {
        if e.sentence_id != sentence_id {
            return Err(Error::InvalidParameter(format!(
                "embedding of `{}` passed for sentence `{sentence_id}`",
                e.sentence_id
            )));
        }
        if !config.participant_average && Some(e.participant_id) != first_participant {
            continue;
        }
        if e.token_index >= tokens.len() {
            return Err(Error::TokenIndex {
                sentence_id: sentence_id.to_string(),
                index: e.token_index,
                len: tokens.len(),
            });
        }
        sums[e.token_index] += pool(&e.values, config.pooling)?;
        counts[e.token_index] += 1;
    }
    if let Some(index) = counts.iter().position(|&c| c == 0) {
        return Err(Error::UncoveredToken {
            sentence_id: sentence_id.to_string(),
            index,
        });
    }
    let raw: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    Ok(AttentionScoreSeq {
        sentence_id: sentence_id.to_string(),
        tokens: tokens.to_vec(),
        scores: finish(sentence_id, &raw, config.e)?,
        provenance,
    })
}

/// EEG scores for every sentence that has embeddings of `band`, optionally
/// restricted to one reading task. Sentences come back in corpus order.
pub fn eeg_scores(
    sentences: &[Sentence],
    embeddings: &[ReducedEmbedding],
    band: FrequencyBand,
    task: Option<Task>,
    config: &ScalarConfig,
) -> Result<Vec<AttentionScoreSeq>> {
    let mut by_sentence: BTreeMap<&str, Vec<&ReducedEmbedding>> = BTreeMap::new();
    let mut k = None;
    for e in embeddings.iter().filter(|e| e.band == band) {
        k.get_or_insert(e.values.len());
        by_sentence.entry(e.sentence_id.as_str()).or_default().push(e);
    }
    let k = k.ok_or(Error::Empty("embeddings for the requested band"))?;
    sentences
        .iter()
        .filter(|s| task.is_none_or(|t| s.task == t))
        .filter_map(|s| by_sentence.get(s.sentence_id.as_str()).map(|e| (s, e)))
        .map(|(s, e)| {
            sentence_scores(
                &s.sentence_id,
                &s.tokens,
                e,
                Provenance::Eeg { band, k, task },
                config,
            )
        })
        .collect()
}

/// Token counts keyed by lowercased token.
pub type FrequencyTable = BTreeMap<String, u64>;

/// Frequency table counted over the given sentences.
pub fn count_frequencies<S: Tokenized>(sentences: &[S]) -> FrequencyTable {
    let mut table = FrequencyTable::new();
    for s in sentences {
        for t in s.tokens() {
            *table.entry(t.to_lowercase()).or_insert(0) += 1;
        }
    }
    table
}

/// Inverse-frequency baseline: raw score `1 / count` (unseen tokens count
/// as 1), then normalised and damped.
pub fn freq_inverse_scores<S: Tokenized>(sentences: &[S], table: &FrequencyTable, e: f64) -> Result<Vec<AttentionScoreSeq>> {
    if table.is_empty() {
        return Err(Error::Empty("frequency table"));
    }
    sentences
        .iter()
        .map(|s| {
            let raw: Vec<f64> = s
                .tokens()
                .iter()
                .map(|t| 1.0 / table.get(&t.to_lowercase()).copied().unwrap_or(1).max(1) as f64)
                .collect();
            Ok(AttentionScoreSeq {
                sentence_id: s.id().to_string(),
                tokens: s.tokens().to_vec(),
                scores: finish(s.id(), &raw, e)?,
                provenance: Provenance::FreqInverse,
            })
        })
        .collect()
}

/// External per-token scalar (e.g. mean fixation duration) keyed by
/// lowercased token. Tokens missing from the table get the table mean.
pub fn fixation_scores<S: Tokenized>(
    sentences: &[S],
    table: &BTreeMap<String, f64>,
    e: f64,
) -> Result<Vec<AttentionScoreSeq>> {
    if table.is_empty() {
        return Err(Error::Empty("fixation table"));
    }
    let fallback = table.values().sum::<f64>() / table.len() as f64;
    sentences
        .iter()
        .map(|s| {
            let raw: Vec<f64> = s
                .tokens()
                .iter()
                .map(|t| table.get(&t.to_lowercase()).copied().unwrap_or(fallback))
                .collect();
            Ok(AttentionScoreSeq {
                sentence_id: s.id().to_string(),
                tokens: s.tokens().to_vec(),
                scores: finish(s.id(), &raw, e)?,
                provenance: Provenance::Fixation,
            })
        })
        .collect()
}

fn keyword_scores<S: Tokenized>(
    sentences: &[S],
    keywords: &BTreeSet<String>,
    e: f64,
    inverted: bool,
    mut is_keyword: impl FnMut(&str) -> bool,
) -> Result<Vec<AttentionScoreSeq>> {
    if keywords.is_empty() {
        return Err(Error::Empty("keyword set"));
    }
    sentences
        .iter()
        .map(|s| {
            let raw: Vec<f64> = s
                .tokens()
                .iter()
                .map(|t| {
                    if is_keyword(t) != inverted {
                        ORACLE_HIGH
                    } else {
                        ORACLE_LOW
                    }
                })
                .collect();
            Ok(AttentionScoreSeq {
                sentence_id: s.id().to_string(),
                tokens: s.tokens().to_vec(),
                scores: finish(s.id(), &raw, e)?,
                provenance: Provenance::Oracle { inverted },
            })
        })
        .collect()
}

/// Synthetic supervision: raw 1.0 on keywords and 0.1 elsewhere.
pub fn oracle_scores<S: Tokenized>(sentences: &[S], keywords: &BTreeSet<String>, e: f64) -> Result<Vec<AttentionScoreSeq>> {
    keyword_scores(sentences, keywords, e, false, |t| keywords.contains(t))
}

/// Falsification control: high on every non-keyword, low on keywords.
pub fn anti_oracle_scores<S: Tokenized>(sentences: &[S], keywords: &BTreeSet<String>, e: f64) -> Result<Vec<AttentionScoreSeq>> {
    keyword_scores(sentences, keywords, e, true, |t| keywords.contains(t))
}

/// Oracle whose keyword test is flipped independently per token with
/// probability `flip`.
pub fn noisy_oracle_scores<S: Tokenized>(
    sentences: &[S],
    keywords: &BTreeSet<String>,
    e: f64,
    flip: f64,
    rng: &mut Rng,
) -> Result<Vec<AttentionScoreSeq>> {
    if !(0.0..=1.0).contains(&flip) {
        return Err(Error::InvalidParameter(format!("flip probability {flip} outside [0,1]")));
    }
    keyword_scores(sentences, keywords, e, false, |t| {
        keywords.contains(t) != (rng.random::<f64>() < flip)
    })
}
