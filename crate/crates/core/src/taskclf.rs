//! Reading-task sanity classifier: a unidirectional LSTM over per-word EEG
//! embeddings, predicting NR vs AR (or session 1 vs 2) from the last hidden
//! state.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{FrequencyBand, Sentence};
use crate::error::{Error, Result};
use crate::neural::{self, AdamConfig, AdamState, Dense, Lstm, ParamStore};
use crate::reduction::{label_of, LabelKind, ReducedEmbedding};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskClfConfig {
    pub hidden: usize,
    pub dropout: f64,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub label_kind: LabelKind,
    pub seed: u64,
}

impl Default for TaskClfConfig {
    fn default() -> Self {
        Self {
            hidden: 50,
            dropout: 0.5,
            lr: 0.001,
            batch: 32,
            epochs: 50,
            label_kind: LabelKind::Task,
            seed: 1,
        }
    }
}

impl TaskClfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.batch == 0 {
            return Err(Error::InvalidParameter("hidden and batch must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidParameter(format!("dropout {} outside [0,1)", self.dropout)));
        }
        if !(self.lr > 0.0) {
            return Err(Error::InvalidParameter(format!("lr must be positive, got {}", self.lr)));
        }
        Ok(())
    }
}

/// Which band values make up a token vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "band")]
pub enum InputLayout {
    /// All bands present, concatenated in band order.
    Concat,
    Single(FrequencyBand),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedSentence {
    pub sentence_id: String,
    /// `None` when participants were averaged.
    pub participant_id: Option<u32>,
    pub input_dim: usize,
    /// Row-major `T x input_dim`.
    pub values: Vec<f64>,
    pub label: u8,
}

impl EmbeddedSentence {
    pub fn len(&self) -> usize {
        self.values.len() / self.input_dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Groups word embeddings into sentence sequences.
///
/// Token vectors keep token order; with `average_participants` each token
/// vector is the mean over the participants that have a record for it,
/// otherwise every (sentence, participant) pair becomes its own example.
/// Labels come from `sentences`. Embeddings of one band must all use the same
/// electrode selection.
pub fn assemble_dataset(
    embeddings: &[ReducedEmbedding],
    sentences: &[Sentence],
    label_kind: LabelKind,
    layout: InputLayout,
    average_participants: bool,
) -> Result<Vec<EmbeddedSentence>> {
    let mut selection: BTreeMap<FrequencyBand, &[usize]> = BTreeMap::new();
    for e in embeddings {
        match selection.get(&e.band) {
            Some(sel) if *sel != e.selected_indices.as_slice() => {
                return Err(Error::MixedSelection { band: e.band });
            }
            Some(_) => {}
            None => {
                selection.insert(e.band, &e.selected_indices);
            }
        }
        if e.values.len() != e.selected_indices.len() {
            return Err(Error::Dimension {
                expected: e.selected_indices.len(),
                found: e.values.len(),
            });
        }
    }
    let bands: Vec<FrequencyBand> = match layout {
        InputLayout::Concat => selection.keys().copied().collect(),
        InputLayout::Single(b) => {
            if !selection.contains_key(&b) {
                return Err(Error::InvalidParameter(format!("no embeddings for band {}", b.name())));
            }
            vec![b]
        }
    };
    if bands.is_empty() {
        return Err(Error::Empty("embeddings"));
    }
    let offsets: Vec<usize> = bands
        .iter()
        .scan(0, |acc, b| {
            let o = *acc;
            *acc += selection[b].len();
            Some(o)
        })
        .collect();
    let input_dim: usize = bands.iter().map(|b| selection[b].len()).sum();
    let labels: BTreeMap<&str, u8> = sentences
        .iter()
        .map(|s| (s.sentence_id.as_str(), label_of(s.task, s.session, label_kind)))
        .collect();

    // (sentence, participant) -> token -> (vector, bands filled)
    type Tokens = BTreeMap<usize, (Vec<f64>, usize)>;
    let mut grouped: BTreeMap<(&str, u32), Tokens> = BTreeMap::new();
    for e in embeddings {
        let Some(slot) = bands.iter().position(|b| *b == e.band) else {
            continue;
        };
        if !labels.contains_key(e.sentence_id.as_str()) {
            return Err(Error::DanglingSentence(e.sentence_id.clone()));
        }
        let entry = grouped
            .entry((e.sentence_id.as_str(), e.participant_id))
            .or_default()
            .entry(e.token_index)
            .or_insert_with(|| (vec![0.0; input_dim], 0));
        entry.0[offsets[slot]..offsets[slot] + e.values.len()].copy_from_slice(&e.values);
        entry.1 += 1;
    }
    for ((sid, _), tokens) in &grouped {
        for (&index, (_, filled)) in tokens {
            if *filled != bands.len() {
                return Err(Error::UncoveredToken {
                    sentence_id: String::from(*sid),
                    index,
                });
            }
        }
    }

    let mut out = Vec::new();
    if average_participants {
        let mut by_sentence: BTreeMap<&str, BTreeMap<usize, (Vec<f64>, usize)>> = BTreeMap::new();
        for ((sid, _), tokens) in &grouped {
            let acc = by_sentence.entry(sid).or_default();
            for (&index, (v, _)) in tokens {
                let slot = acc.entry(index).or_insert_with(|| (vec![0.0; input_dim], 0));
                crate::math::axpy(1.0, v, &mut slot.0);
                slot.1 += 1;
            }
        }
        for (sid, tokens) in by_sentence {
            let mut values = Vec::with_capacity(tokens.len() * input_dim);
            for (v, n) in tokens.values() {
                values.extend(v.iter().map(|x| x / *n as f64));
            }
            out.push(EmbeddedSentence {
                sentence_id: sid.into(),
                participant_id: None,
                input_dim,
                values,
                label: labels[sid],
            });
        }
    } else {
        for ((sid, pid), tokens) in grouped {
            let mut values = Vec::with_capacity(tokens.len() * input_dim);
            for (v, _) in tokens.values() {
                values.extend_from_slice(v);
            }
            out.push(EmbeddedSentence {
                sentence_id: sid.into(),
                participant_id: Some(pid),
                input_dim,
                values,
                label: labels[sid],
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskClassifier {
    pub config: TaskClfConfig,
    pub input_dim: usize,
    pub store: ParamStore,
    lstm: Lstm,
    out: Dense,
}

impl TaskClassifier {
    pub fn new(config: TaskClfConfig, input_dim: usize) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 {
            return Err(Error::InvalidParameter("input_dim must be positive".into()));
        }
        let mut store = ParamStore::new(config.seed);
        let mut r = rng::stream(config.seed, "taskclf/init");
        let lstm = Lstm::new(&mut store, "lstm", input_dim, config.hidden, &mut r);
        let out = Dense::new(&mut store, "out", config.hidden, 1, &mut r);
        Ok(Self {
            config,
            input_dim,
            store,
            lstm,
            out,
        })
    }

    fn check(&self, s: &EmbeddedSentence) -> Result<()> {
        if s.input_dim != self.input_dim {
            return Err(Error::Dimension {
                expected: self.input_dim,
                found: s.input_dim,
            });
        }
        if s.is_empty() {
            return Err(Error::Empty("sentence"));
        }
        Ok(())
    }

    /// Logit of the positive class, inference mode.
    pub fn logit(&self, s: &EmbeddedSentence) -> Result<f64> {
        self.check(s)?;
        let cache = self.lstm.forward(&self.store, &s.values)?;
        let h = cache.hidden_states();
        let last = &h[h.len() - self.config.hidden..];
        Ok(self.out.forward(&self.store, last)[0])
    }

    pub fn predict(&self, s: &EmbeddedSentence) -> Result<u8> {
        Ok((self.logit(s)? >= 0.0) as u8)
    }

    /// Mean BCE over `batch` in inference mode.
    pub fn loss(&self, batch: &[EmbeddedSentence]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let mut total = 0.0;
        for s in batch {
            total += neural::bce_with_logit(s.label as f64, self.logit(s)?);
        }
        Ok(total / batch.len() as f64)
    }

    /// Accumulates the gradient of [`Self::loss`] into the store (without
    /// dropout) and returns the loss.
    pub fn loss_and_grad(&mut self, batch: &[EmbeddedSentence]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let scale = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        for s in batch {
            total += self.accumulate(s, scale, None)?.0;
        }
        Ok(total * scale)
    }

    /// Adds the gradient of `scale * BCE` for one sentence; returns the
    /// unscaled loss and the prediction. Dropout is applied when a
    /// generator is given.
    fn accumulate(&mut self, s: &EmbeddedSentence, scale: f64, dropout_rng: Option<&mut rng::Rng>) -> Result<(f64, u8)> {
        self.check(s)?;
        let h = self.config.hidden;
        let cache = self.lstm.forward(&self.store, &s.values)?;
        let states = cache.hidden_states();
        let last = &states[states.len() - h..];
        let (dropped, mask) = match dropout_rng {
            Some(r) => neural::dropout(last, self.config.dropout, r, true)?,
            None => (last.to_vec(), neural::DropoutMask::identity(h)),
        };
        let z = self.out.forward(&self.store, &dropped)[0];
        let y = s.label as f64;
        let loss = neural::bce_with_logit(y, z);
        let dz = scale * (neural::sigmoid(z) - y);
        let mut dh = self.out.backward(&mut self.store, &dropped, &[dz]);
        mask.apply(&mut dh);
        let mut grad_h = vec![0.0; states.len()];
        grad_h[states.len() - h..].copy_from_slice(&dh);
        self.lstm.backward(&mut self.store, &cache, &grad_h)?;
        Ok((loss, (z >= 0.0) as u8))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub accuracy: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

pub fn evaluate(clf: &TaskClassifier, test: &[EmbeddedSentence]) -> Result<Accuracy> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for s in test {
        match (s.label, clf.predict(s)?) {
            (1, 1) => tp += 1,
            (0, 1) => fp += 1,
            (1, 0) => fn_ += 1,
            _ => tn += 1,
        }
    }
    Ok(Accuracy {
        accuracy: (tp + tn) as f64 / test.len() as f64,
        tp,
        fp,
        fn_,
        tn,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean BCE over the epoch's training passes.
    pub train_loss: f64,
    /// Accuracy of the training-mode (dropout) predictions made during the
    /// epoch.
    pub train_acc: f64,
    pub dev_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskClfLog {
    pub config: TaskClfConfig,
    pub input_dim: usize,
    pub average_participants: bool,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_dev_acc: f64,
}

/// Mini-batch Adam on mean BCE; keeps the parameters of the epoch with the
/// best dev accuracy (earliest on ties).
pub fn train(
    config: &TaskClfConfig,
    train_set: &[EmbeddedSentence],
    dev_set: &[EmbeddedSentence],
) -> Result<(TaskClassifier, TaskClfLog)> {
    let first = train_set.first().ok_or(Error::Empty("training set"))?;
    if dev_set.is_empty() {
        return Err(Error::Empty("dev set"));
    }
    let positives = train_set.iter().filter(|s| s.label == 1).count();
    if positives == 0 || positives == train_set.len() {
        return Err(Error::SingleClass);
    }
    let mut clf = TaskClassifier::new(config.clone(), first.input_dim)?;
    let mut adam = AdamState::new(
        &clf.store,
        AdamConfig {
            lr: config.lr,
            ..AdamConfig::default()
        },
    );
    let mut order_rng = rng::stream(config.seed, "taskclf/order");
    let mut dropout_rng = rng::stream(config.seed, "taskclf/dropout");
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64, ParamStore)> = None;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut order_rng);
        let (mut loss, mut correct) = (0.0, 0usize);
        for chunk in order.chunks(config.batch) {
            clf.store.zero_grad();
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let (l, p) = clf.accumulate(&train_set[i], scale, Some(&mut dropout_rng))?;
                loss += l;
                correct += (p == train_set[i].label) as usize;
            }
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            adam.step(&mut clf.store).map_err(|e| match e {
                Error::NonFiniteGradient(_) => Error::Divergence { epoch },
                other => other,
            })?;
        }
        let dev_acc = evaluate(&clf, dev_set)?.accuracy;
        epochs.push(EpochRecord {
            epoch,
            train_loss: loss / train_set.len() as f64,
            train_acc: correct as f64 / train_set.len() as f64,
            dev_acc,
        });
        if best.as_ref().is_none_or(|(_, acc, _)| dev_acc > *acc) {
            best = Some((epoch, dev_acc, clf.store.clone()));
        }
    }
    let (best_epoch, best_dev_acc) = match best {
        Some((epoch, acc, store)) => {
            clf.store = store;
            (epoch, acc)
        }
        None => (0, evaluate(&clf, dev_set)?.accuracy),
    };
    let average_participants = train_set.iter().all(|s| s.participant_id.is_none());
    Ok((
        clf,
        TaskClfLog {
            config: config.clone(),
            input_dim: first.input_dim,
            average_participants,
            epochs,
            best_epoch,
            best_dev_acc,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Session, Task};

    fn emb(sid: &str, tok: usize, pid: u32, band: FrequencyBand, sel: &[usize], v: &[f64]) -> ReducedEmbedding {
        ReducedEmbedding {
            sentence_id: sid.into(),
            token_index: tok,
            participant_id: pid,
            band,
            selected_indices: sel.to_vec(),
            values: v.to_vec(),
        }
    }

    fn sentences() -> Vec<Sentence> {
        vec![
            Sentence {
                sentence_id: "s1".into(),
                task: Task::AR,
                session: Session::One,
                tokens: vec!["a".into(), "b".into()],
            },
            Sentence {
                sentence_id: "s2".into(),
                task: Task::NR,
                session: Session::Two,
                tokens: vec!["c".into()],
            },
        ]
    }

    #[test]
    fn assembles_concat_and_averages() {
        use FrequencyBand::*;
        let e = vec![
            emb("s1", 0, 1, Theta, &[0], &[1.0]),
            emb("s1", 0, 1, Alpha, &[3, 4], &[2.0, 3.0]),
            emb("s1", 1, 1, Theta, &[0], &[4.0]),
            emb("s1", 1, 1, Alpha, &[3, 4], &[5.0, 6.0]),
            emb("s1", 0, 2, Theta, &[0], &[3.0]),
            emb("s1", 0, 2, Alpha, &[3, 4], &[4.0, 5.0]),
            emb("s2", 0, 1, Theta, &[0], &[0.0]),
            emb("s2", 0, 1, Alpha, &[3, 4], &[0.0, 0.0]),
        ];
        let per = assemble_dataset(&e, &sentences(), LabelKind::Task, InputLayout::Concat, false).unwrap();
        assert_eq!(per.len(), 3);
        assert_eq!(per[0].input_dim, 3);
        assert_eq!(per[0].values, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(per[0].label, 1);
        assert_eq!(per[2].label, 0);
        let avg = assemble_dataset(&e, &sentences(), LabelKind::Session, InputLayout::Concat, true).unwrap();
        assert_eq!(avg.len(), 2);
        assert_eq!(avg[0].values, vec![2.0, 3.0, 4.0, 4.0, 5.0, 6.0]);
        assert_eq!((avg[0].label, avg[1].label), (0, 1));
        let single = assemble_dataset(&e, &sentences(), LabelKind::Task, InputLayout::Single(Alpha), false).unwrap();
        assert_eq!(single[0].input_dim, 2);

        let mut mixed = e.clone();
        mixed[2].selected_indices = vec![7];
        assert_eq!(
            assemble_dataset(&mixed, &sentences(), LabelKind::Task, InputLayout::Concat, false),
            Err(Error::MixedSelection { band: Theta })
        );
        let mut partial = e.clone();
        partial.pop();
        assert!(matches!(
            assemble_dataset(&partial, &sentences(), LabelKind::Task, InputLayout::Concat, false),
            Err(Error::UncoveredToken { .. })
        ));
    }

    fn toy(n: usize, shift: f64, seed: u64) -> Vec<EmbeddedSentence> {
        use rand::Rng as _;
        let mut r = rng::stream(seed, "test");
        (0..n)
            .map(|i| {
                let label = (i % 2) as u8;
                let t = r.random_range(2..6);
                let values = (0..t * 3)
                    .map(|_| r.random::<f64>() - 0.5 + shift * label as f64)
                    .collect();
                EmbeddedSentence {
                    sentence_id: format!("s{i}"),
                    participant_id: Some(0),
                    input_dim: 3,
                    values,
                    label,
                }
            })
            .collect()
    }

    #[test]
    fn learns_a_shift_and_is_reproducible() {
        let cfg = TaskClfConfig {
            epochs: 30,
            hidden: 8,
            lr: 0.01,
            ..TaskClfConfig::default()
        };
        let (tr, dev) = (toy(80, 1.0, 1), toy(40, 1.0, 2));
        let (clf, log) = train(&cfg, &tr, &dev).unwrap();
        let acc = evaluate(&clf, &toy(40, 1.0, 3)).unwrap();
        assert!(acc.accuracy >= 0.95, "{acc:?}");
        assert_eq!(acc.tp + acc.fp + acc.fn_ + acc.tn, 40);
        let (clf2, log2) = train(&cfg, &tr, &dev).unwrap();
        assert_eq!(log, log2);
        assert_eq!(clf.store.values(), clf2.store.values());
        assert!(log.epochs.iter().all(|e| e.dev_acc <= log.best_dev_acc));
    }

    #[test]
    fn rejects_single_class_and_empty() {
        let mut tr = toy(4, 0.0, 1);
        tr.iter_mut().for_each(|s| s.label = 0);
        let cfg = TaskClfConfig::default();
        assert_eq!(train(&cfg, &tr, &toy(2, 0.0, 2)).unwrap_err(), Error::SingleClass);
        assert!(train(&cfg, &[], &tr).is_err());
        let clf = TaskClassifier::new(cfg, 3).unwrap();
        assert!(evaluate(&clf, &[]).is_err());
    }
}
