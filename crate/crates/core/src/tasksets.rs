//! Binary sentence-classification datasets: adapters for token-annotated
//! corpora and a synthetic keyword-detection generator.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use rand_distr::{Distribution, Zipf};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::seqlabel::{LabeledSentence, Prf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

/// Annotation tag on a source sentence. `kind` is `"relation"` or
/// `"entity"`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tag {
    pub kind: String,
    pub value: String,
}

pub const TAG_KINDS: [&str; 2] = ["relation", "entity"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedSentence {
    pub sentence_id: String,
    pub tokens: Vec<String>,
    #[serde(default)]
    pub tags: Vec<Tag>,
    /// Sentences without a split belong to train.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

/// A sentence is positive iff it carries a tag of `tag_kind` whose value is
/// in `positive_values`. Relation values are compared without an argument
/// suffix, so `Entity-Origin(e1,e2)` matches `Entity-Origin`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryTaskSpec {
    pub name: String,
    pub tag_kind: String,
    pub positive_values: Vec<String>,
    /// Reference (train, dev, test) sizes of the original benchmark.
    pub split_sizes: Option<[usize; 3]>,
}

impl BinaryTaskSpec {
    pub fn semeval() -> Self {
        Self {
            name: "semeval".into(),
            tag_kind: "relation".into(),
            positive_values: vec!["Entity-Origin".into(), "Entity-Destination".into()],
            split_sizes: Some([8096, 1361, 1372]),
        }
    }

    pub fn wikipedia() -> Self {
        Self {
            name: "wikipedia".into(),
            tag_kind: "relation".into(),
            positive_values: vec!["job title".into()],
            split_sizes: Some([1733, 361, 354]),
        }
    }

    pub fn ontonotes() -> Self {
        Self {
            name: "ontonotes".into(),
            tag_kind: "entity".into(),
            positive_values: ["PER", "LOC", "ORG", "MISC"].map(String::from).to_vec(),
            split_sizes: Some([89389, 11289, 11318]),
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "semeval" => Some(Self::semeval()),
            "wikipedia" => Some(Self::wikipedia()),
            "ontonotes" => Some(Self::ontonotes()),
            _ => None,
        }
    }

    pub fn is_positive(&self, s: &AnnotatedSentence) -> bool {
        s.tags.iter().any(|t| {
            t.kind == self.tag_kind && {
                let v = t.value.split('(').next().unwrap_or("").trim();
                self.positive_values.iter().any(|p| p == v)
            }
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSplits {
    pub train: Vec<LabeledSentence>,
    pub dev: Vec<LabeledSentence>,
    pub test: Vec<LabeledSentence>,
}

impl TaskSplits {
    pub fn split(&self, s: Split) -> &[LabeledSentence] {
        match s {
            Split::Train => &self.train,
            Split::Dev => &self.dev,
            Split::Test => &self.test,
        }
    }

    fn split_mut(&mut self, s: Split) -> &mut Vec<LabeledSentence> {
        match s {
            Split::Train => &mut self.train,
            Split::Dev => &mut self.dev,
            Split::Test => &mut self.test,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &LabeledSentence> {
        self.train.iter().chain(&self.dev).chain(&self.test)
    }
}

/// Labels annotated sentences with `spec`, keeping the source's split
/// assignment and dropping every id in `exclude`.
pub fn adapt_generic(
    source: &[AnnotatedSentence],
    spec: &BinaryTaskSpec,
    exclude: &BTreeSet<String>,
) -> Result<TaskSplits> {
    if !TAG_KINDS.contains(&spec.tag_kind.as_str()) {
        return Err(Error::UnknownTagScheme(spec.tag_kind.clone()));
    }
    let mut seen = BTreeSet::new();
    let mut out = TaskSplits::default();
    for s in source {
        if let Some(t) = s.tags.iter().find(|t| !TAG_KINDS.contains(&t.kind.as_str())) {
            return Err(Error::UnknownTagScheme(t.kind.clone()));
        }
        if !seen.insert(s.sentence_id.as_str()) {
            return Err(Error::DuplicateSentence(s.sentence_id.clone()));
        }
        if s.tokens.is_empty() {
            return Err(Error::Empty("sentence tokens"));
        }
        if exclude.contains(&s.sentence_id) {
            continue;
        }
        out.split_mut(s.split.unwrap_or(Split::Train)).push(LabeledSentence {
            sentence_id: s.sentence_id.clone(),
            tokens: s.tokens.clone(),
            label: spec.is_positive(s) as u8,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTaskSpec {
    /// Token texts are `w<rank>` for ranks `1..=vocab_size`, the same naming
    /// as the synthetic EEG corpus.
    pub vocab_size: usize,
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    /// Size of an extra sentence pool, disjoint from the splits, for
    /// auxiliary attention supervision.
    #[serde(default)]
    pub n_aux: usize,
    pub positive_rate: f64,
    pub n_keywords: usize,
    /// Keywords are drawn from ranks above this many most frequent ones.
    pub keyword_min_rank: usize,
    pub length: (usize, usize),
    /// Probability of flipping each label after generation.
    pub label_noise: f64,
    pub seed: u64,
}

impl Default for SyntheticTaskSpec {
    fn default() -> Self {
        Self {
            vocab_size: 2000,
            n_train: 2000,
            n_dev: 500,
            n_test: 1000,
            n_aux: 0,
            positive_rate: 0.2,
            n_keywords: 20,
            keyword_min_rank: 100,
            length: (5, 15),
            label_noise: 0.0,
            seed: 1,
        }
    }
}

impl SyntheticTaskSpec {
    /// Split sizes and positive rate of the SemEval relation task.
    pub fn semeval_shaped(seed: u64) -> Self {
        Self {
            n_train: 8096,
            n_dev: 1361,
            n_test: 1372,
            positive_rate: 0.193,
            seed,
            ..Self::default()
        }
    }

    pub fn size(&self, split: Split) -> usize {
        match split {
            Split::Train => self.n_train,
            Split::Dev => self.n_dev,
            Split::Test => self.n_test,
        }
    }

    /// Positives in a split of `n` sentences, before label noise.
    pub fn positives(&self, n: usize) -> usize {
        crate::math::round(self.positive_rate * n as f64) as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.positive_rate > 0.0 && self.positive_rate < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "positive_rate {} outside (0,1)",
                self.positive_rate
            )));
        }
        if !(0.0..=1.0).contains(&self.label_noise) {
            return Err(Error::InvalidParameter(format!("label_noise {} outside [0,1]", self.label_noise)));
        }
        let (lo, hi) = self.length;
        if lo == 0 || lo > hi {
            return Err(Error::InvalidParameter(format!("bad length range ({lo}, {hi})")));
        }
        if self.n_keywords == 0 {
            return Err(Error::InvalidParameter("n_keywords must be positive".into()));
        }
        let pool = self.vocab_size.saturating_sub(self.keyword_min_rank);
        if self.n_keywords >= pool || self.n_keywords >= self.vocab_size {
            return Err(Error::Infeasible(format!(
                "{} keywords leave no filler tokens in a pool of {pool} ranks",
                self.n_keywords
            )));
        }
        Ok(())
    }
}

pub fn token(rank: usize) -> String {
    format!("w{rank}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticTask {
    pub splits: TaskSplits,
    /// The auxiliary pool (`n_aux` sentences, ids `aux-*`).
    pub aux: Vec<LabeledSentence>,
    pub keywords: BTreeSet<String>,
    /// Ids whose label was flipped by label noise.
    pub flipped: BTreeSet<String>,
}

/// Keyword-detection task. Filler tokens are Zipf(1.1) draws over the
/// vocabulary with keywords rejected; each positive gets exactly one keyword
/// at a random position. Every split holds exactly
/// `round(positive_rate * n)` positives before noise.
pub fn generate_task(spec: &SyntheticTaskSpec) -> Result<SyntheticTask> {
    spec.validate()?;
    let mut kr = rng::stream(spec.seed, "tasks/keywords");
    let pool: Vec<usize> = (spec.keyword_min_rank + 1..=spec.vocab_size).collect();
    let keyword_ranks: BTreeSet<usize> = pool.choose_multiple(&mut kr, spec.n_keywords).copied().collect();
    let keyword_list: Vec<String> = keyword_ranks.iter().map(|&r| token(r)).collect();
    let zipf = Zipf::new(spec.vocab_size as f64, 1.1).map_err(|e| Error::InvalidParameter(e.to_string()))?;

    let mut splits = TaskSplits::default();
    let mut aux = Vec::new();
    let mut flipped = BTreeSet::new();
    let mut noise = rng::stream(spec.seed, "tasks/noise");
    let pools: [(&str, usize); 4] = [
        ("train", spec.n_train),
        ("dev", spec.n_dev),
        ("test", spec.n_test),
        ("aux", spec.n_aux),
    ];
    for (name, n) in pools {
        let n_pos = spec.positives(n);
        let mut r = rng::stream(spec.seed, &format!("tasks/{name}"));
        let mut labels: Vec<u8> = (0..n).map(|i| (i < n_pos) as u8).collect();
        labels.shuffle(&mut r);
        let out = match name {
            "train" => &mut splits.train,
            "dev" => &mut splits.dev,
            "test" => &mut splits.test,
            _ => &mut aux,
        };
        for (i, label) in labels.into_iter().enumerate() {
            let len = r.random_range(spec.length.0..=spec.length.1);
            let mut tokens = Vec::with_capacity(len);
            while tokens.len() < len {
                let rank = zipf.sample(&mut r) as usize;
                if !keyword_ranks.contains(&rank) {
                    tokens.push(token(rank));
                }
            }
            if label == 1 {
                let at = r.random_range(0..len);
                tokens[at] = keyword_list.choose(&mut r).expect("keywords non-empty").clone();
            }
            let sentence_id = format!("{name}-{:05}", i + 1);
            let mut label = label;
            // the aux pool keeps clean labels; its labels are never trained on
            if name != "aux" && spec.label_noise > 0.0 && noise.random::<f64>() < spec.label_noise {
                label = 1 - label;
                flipped.insert(sentence_id.clone());
            }
            out.push(LabeledSentence {
                sentence_id,
                tokens,
                label,
            });
        }
    }
    Ok(SyntheticTask {
        splits,
        aux,
        keywords: keyword_list.into_iter().collect(),
        flipped,
    })
}

/// Bag-of-words rule: 1 iff any token is a keyword.
pub fn keyword_detector(sentences: &[LabeledSentence], keywords: &BTreeSet<String>) -> Vec<u8> {
    sentences
        .iter()
        .map(|s| s.tokens.iter().any(|t| keywords.contains(t)) as u8)
        .collect()
}

pub fn keyword_detector_prf(sentences: &[LabeledSentence], keywords: &BTreeSet<String>) -> Prf {
    let gold: Vec<u8> = sentences.iter().map(|s| s.label).collect();
    Prf::from_predictions(&gold, &keyword_detector(sentences, keywords))
}

/// Table-style overview of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub n_train: usize,
    /// Percentage of positive train sentences; 0 for an empty train split.
    pub pct_positive_train: f64,
    pub n_dev: usize,
    pub n_test: usize,
}

pub fn summarize(name: &str, splits: &TaskSplits) -> DatasetSummary {
    let pos = splits.train.iter().filter(|s| s.label == 1).count();
    DatasetSummary {
        name: name.into(),
        n_train: splits.train.len(),
        pct_positive_train: if splits.train.is_empty() {
            0.0
        } else {
            100.0 * pos as f64 / splits.train.len() as f64
        },
        n_dev: splits.dev.len(),
        n_test: splits.test.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn annotated(id: &str, tags: &[(&str, &str)], split: Option<Split>) -> AnnotatedSentence {
        AnnotatedSentence {
            sentence_id: id.into(),
            tokens: vec!["x".into()],
            tags: tags
                .iter()
                .map(|(k, v)| Tag {
                    kind: k.to_string(),
                    value: v.to_string(),
                })
                .collect(),
            split,
        }
    }

    #[test]
    fn semeval_rule() {
        let src = vec![
            annotated("a", &[("relation", "Entity-Origin(e1,e2)")], None),
            annotated("b", &[("relation", "Message-Topic(e2,e1)")], Some(Split::Dev)),
            annotated("c", &[("relation", "Entity-Destination")], Some(Split::Test)),
            annotated("d", &[], None),
        ];
        let out = adapt_generic(&src, &BinaryTaskSpec::semeval(), &BTreeSet::new()).unwrap();
        assert_eq!(out.train.iter().map(|s| s.label).collect::<Vec<_>>(), vec![1, 0]);
        assert_eq!(out.dev[0].label, 0);
        assert_eq!(out.test[0].label, 1);
        let excl: BTreeSet<String> = ["a".to_string()].into();
        let out = adapt_generic(&src, &BinaryTaskSpec::semeval(), &excl).unwrap();
        assert!(out.iter().all(|s| s.sentence_id != "a"));
        let bad = vec![annotated("z", &[("pos", "NN")], None)];
        assert_eq!(
            adapt_generic(&bad, &BinaryTaskSpec::semeval(), &BTreeSet::new()),
            Err(Error::UnknownTagScheme("pos".into()))
        );
        let onto = vec![annotated("o", &[("entity", "ORG")], None), annotated("p", &[("entity", "DATE")], None)];
        let out = adapt_generic(&onto, &BinaryTaskSpec::ontonotes(), &BTreeSet::new()).unwrap();
        assert_eq!((out.train[0].label, out.train[1].label), (1, 0));
    }

    #[test]
    fn generator_construction() {
        let spec = SyntheticTaskSpec {
            n_train: 200,
            n_dev: 50,
            n_test: 50,
            ..SyntheticTaskSpec::default()
        };
        let task = generate_task(&spec).unwrap();
        assert_eq!(task.splits.train.iter().filter(|s| s.label == 1).count(), 40);
        assert_eq!(task.splits.dev.iter().filter(|s| s.label == 1).count(), 10);
        for s in task.splits.iter() {
            let kw = s.tokens.iter().filter(|t| task.keywords.contains(*t)).count();
            assert_eq!(kw, s.label as usize);
            assert!((5..=15).contains(&s.tokens.len()));
        }
        let prf = keyword_detector_prf(&task.splits.test, &task.keywords);
        assert_eq!(prf.f1, 1.0);
        assert_eq!(task, generate_task(&spec).unwrap());
        let summary = summarize("synthetic", &task.splits);
        assert_eq!((summary.n_train, summary.n_dev, summary.n_test), (200, 50, 50));
        assert_eq!(summary.pct_positive_train, 20.0);
    }

    #[test]
    fn noise_and_infeasibility() {
        let spec = SyntheticTaskSpec {
            n_train: 500,
            label_noise: 0.1,
            ..SyntheticTaskSpec::default()
        };
        let task = generate_task(&spec).unwrap();
        let train = &task.splits.train;
        let flipped_pos = train.iter().filter(|s| task.flipped.contains(&s.sentence_id) && s.label == 1).count();
        let flipped_neg = train.iter().filter(|s| task.flipped.contains(&s.sentence_id) && s.label == 0).count();
        let prf = keyword_detector_prf(train, &task.keywords);
        // detector fires on the 100 planted positives
        let tp = 100 - flipped_neg;
        assert_eq!(prf.tp, tp);
        assert_eq!(prf.fp, flipped_neg);
        assert_eq!(prf.fn_, flipped_pos);
        assert!(prf.f1 < 1.0);
        let bad = SyntheticTaskSpec {
            vocab_size: 50,
            keyword_min_rank: 10,
            n_keywords: 40,
            ..SyntheticTaskSpec::default()
        };
        assert!(matches!(generate_task(&bad), Err(Error::Infeasible(_))));
    }

    #[test]
    fn semeval_shape() {
        let spec = SyntheticTaskSpec::semeval_shaped(1);
        assert_eq!(spec.positives(spec.n_train), 1563);
        assert!((100.0 * 1563.0 / 8096.0 - 19.3f64).abs() < 0.05);
    }
}
