//! Multi-task biLSTM sentence classifier with supervised token attention.
//!
//! ```text
//! e_t = E[token_t]
//! h_t = biLSTM(e)_t                       (dropout on h during training)
//! â_t = sigmoid(v · tanh(W h_t + b))       pre-softmax attention, in (0,1)
//! α   = softmax(â)
//! s   = Σ_t α_t h_t
//! ŷ   = sigmoid(u · s + c)
//! ```
//!
//! Training alternates between main batches, which minimise `Σ (y - ŷ)²`
//! over every parameter, and auxiliary batches, which minimise
//! `Σ_t (a_t - â_t)²` against external token scalars while updating only the
//! attention scorer `(W, b, v)`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::attnscore::{AttentionScoreSeq, Tokenized, DEFAULT_E};
use crate::error::{Error, Result};
use crate::math::{self, axpy, dot};
use crate::neural::{
    self, AdamConfig, AdamState, BiLstm, BiLstmCache, DropoutMask, Init, ParamId, ParamStore,
};
use crate::rng::{self, Rng};

/// A tokenised sentence with a binary label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSentence {
    pub sentence_id: String,
    pub tokens: Vec<String>,
    pub label: u8,
}

impl Tokenized for LabeledSentence {
    fn id(&self) -> &str {
        &self.sentence_id
    }

    fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeqModelConfig {
    pub embed_dim: usize,
    /// Hidden units per direction.
    pub hidden: usize,
    pub attn_hidden: usize,
    pub dropout: f64,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    /// Auxiliary batches per main batch; 0 disables supervision.
    pub aux_ratio: usize,
    pub e: f64,
    pub seed: u64,
}

impl Default for SeqModelConfig {
    fn default() -> Self {
        Self {
            embed_dim: 64,
            hidden: 50,
            attn_hidden: 50,
            dropout: 0.5,
            lr: 0.001,
            batch: 32,
            epochs: 10,
            aux_ratio: 1,
            e: DEFAULT_E,
            seed: 1,
        }
    }
}

impl SeqModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.hidden == 0 || self.attn_hidden == 0 || self.batch == 0 {
            return Err(Error::InvalidParameter("model dimensions and batch must be positive".into()));
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

pub const UNK: &str = "<unk>";

/// Lowercased token vocabulary; id 0 is the shared unknown token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        Self::from_tokens(tokens)
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    /// Tokens in order of first occurrence.
    pub fn build<S: Tokenized>(sentences: &[S]) -> Self {
        let mut v = Self::from_tokens(vec![UNK.to_string()]);
        for s in sentences {
            for t in s.tokens() {
                let t = t.to_lowercase();
                if !v.index.contains_key(&t) {
                    v.index.insert(t.clone(), v.tokens.len());
                    v.tokens.push(t);
                }
            }
        }
        v
    }

    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(&token.to_lowercase()).copied().unwrap_or(0)
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }
}

/// Per-sentence attention diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionTrace {
    /// Pre-softmax scores `â`.
    pub scores: Vec<f64>,
    /// Softmax weights `α`.
    pub weights: Vec<f64>,
    pub prediction: f64,
}

struct Cache {
    ids: Vec<usize>,
    bi: BiLstmCache,
    mask: DropoutMask,
    /// Hidden states after dropout, `T x 2h`.
    hd: Vec<f64>,
    /// `tanh(W h_t + b)`, `T x A`.
    u: Vec<f64>,
    a_hat: Vec<f64>,
    alpha: Vec<f64>,
    s: Vec<f64>,
    y_hat: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scope {
    /// Gradients for every parameter.
    Full,
    /// Gradients for the attention scorer only.
    Attention,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeqModel {
    pub config: SeqModelConfig,
    pub vocab: Vocab,
    pub store: ParamStore,
    embed: ParamId,
    bilstm: BiLstm,
    attn_w: ParamId,
    attn_b: ParamId,
    attn_v: ParamId,
    out_w: ParamId,
    out_b: ParamId,
}

impl SeqModel {
    pub fn new(config: SeqModelConfig, vocab: Vocab) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new(config.seed);
        let mut rng = rng::stream(config.seed, "seqlabel/init");
        let embed = store.add(
            "embed",
            vocab.len(),
            config.embed_dim,
            Init::Uniform(1.0 / math::sqrt(config.embed_dim as f64)),
            &mut rng,
        );
        let layout = Layout::new(&mut store, &config, &mut rng);
        Ok(Self {
            config,
            vocab,
            store,
            embed,
            bilstm: layout.bilstm,
            attn_w: layout.attn_w,
            attn_b: layout.attn_b,
            attn_v: layout.attn_v,
            out_w: layout.out_w,
            out_b: layout.out_b,
        })
    }

    /// Rebuilds a model around stored parameters (e.g. a checkpoint).
    pub fn from_store(config: SeqModelConfig, vocab: Vocab, store: ParamStore) -> Result<Self> {
        let reference = Self::new(config.clone(), vocab.clone())?;
        let same_layout = reference.store.len() == store.len()
            && reference
                .store
                .iter()
                .zip(store.iter())
                .all(|((a, ia), (b, ib))| a == b && ia == ib);
        if !same_layout {
            return Err(Error::InvalidParameter("parameter layout does not match config".into()));
        }
        Ok(Self { store, ..reference })
    }

    /// Attention scorer tensors `(W, b, v)`: the only ones auxiliary steps
    /// update.
    pub fn attention_params(&self) -> [ParamId; 3] {
        [self.attn_w, self.attn_b, self.attn_v]
    }

    /// Every tensor outside the attention scorer.
    pub fn frozen_params(&self) -> Vec<ParamId> {
        let att = self.attention_params();
        self.store.ids().iter().copied().filter(|id| !att.contains(id)).collect()
    }

    pub fn bilstm_params(&self) -> [ParamId; 6] {
        self.bilstm.params()
    }

    fn forward_ids(&self, ids: &[usize], dropout_rng: Option<&mut Rng>) -> Result<Cache> {
        if ids.is_empty() {
            return Err(Error::Empty("sentence"));
        }
        let e_dim = self.config.embed_dim;
        let table = self.store.value(self.embed);
        let mut emb = Vec::with_capacity(ids.len() * e_dim);
        for &i in ids {
            emb.extend_from_slice(&table[i * e_dim..(i + 1) * e_dim]);
        }
        let bi = self.bilstm.forward(&self.store, &emb)?;
        let (hd, mask) = match dropout_rng {
            Some(r) => neural::dropout(&bi.out, self.config.dropout, r, true)?,
            None => (bi.out.clone(), DropoutMask::identity(bi.out.len())),
        };
        let h2 = 2 * self.config.hidden;
        let a = self.config.attn_hidden;
        let (w, b, v) = (
            self.store.value(self.attn_w),
            self.store.value(self.attn_b),
            self.store.value(self.attn_v),
        );
        let steps = ids.len();
        let mut u = vec![0.0; steps * a];
        let mut a_hat = vec![0.0; steps];
        for t in 0..steps {
            let h_t = &hd[t * h2..(t + 1) * h2];
            let u_t = &mut u[t * a..(t + 1) * a];
            for r in 0..a {
                u_t[r] = math::tanh(b[r] + dot(&w[r * h2..(r + 1) * h2], h_t));
            }
            a_hat[t] = math::sigmoid(dot(v, u_t));
        }
        let alpha = neural::softmax(&a_hat)?;
        let mut s = vec![0.0; h2];
        for t in 0..steps {
            axpy(alpha[t], &hd[t * h2..(t + 1) * h2], &mut s);
        }
        let y_hat = math::sigmoid(dot(self.store.value(self.out_w), &s) + self.store.value(self.out_b)[0]);
        Ok(Cache {
            ids: ids.to_vec(),
            bi,
            mask,
            hd,
            u,
            a_hat,
            alpha,
            s,
            y_hat,
        })
    }

    /// Inference-mode forward pass (no dropout).
    pub fn forward(&self, tokens: &[String]) -> Result<(f64, AttentionTrace)> {
        let c = self.forward_ids(&self.vocab.encode(tokens), None)?;
        Ok((
            c.y_hat,
            AttentionTrace {
                scores: c.a_hat,
                weights: c.alpha,
                prediction: c.y_hat,
            },
        ))
    }

    pub fn predict_proba(&self, tokens: &[String]) -> Result<f64> {
        Ok(self.forward_ids(&self.vocab.encode(tokens), None)?.y_hat)
    }

    /// Accumulates gradients of a loss whose derivatives w.r.t. `ŷ` and
    /// (directly) w.r.t. `â` are given.
    fn backward(&mut self, c: &Cache, d_yhat: f64, d_ahat: Option<&[f64]>, scope: Scope) -> Result<()> {
        let h2 = 2 * self.config.hidden;
        let a = self.config.attn_hidden;
        let steps = c.ids.len();
        let mut dhd = vec![0.0; steps * h2];
        let mut da = vec![0.0; steps];
        {
            let (values, grads) = self.store.split_mut();
            if d_yhat != 0.0 {
                let dz = d_yhat * c.y_hat * (1.0 - c.y_hat);
                axpy(dz, &c.s, &mut grads[self.out_w.range()]);
                grads[self.out_b.range()][0] += dz;
                let out_w = &values[self.out_w.range()];
                let ds: Vec<f64> = out_w.iter().map(|w| dz * w).collect();
                let d_alpha: Vec<f64> = (0..steps).map(|t| dot(&ds, &c.hd[t * h2..(t + 1) * h2])).collect();
                if scope == Scope::Full {
                    for t in 0..steps {
                        axpy(c.alpha[t], &ds, &mut dhd[t * h2..(t + 1) * h2]);
                    }
                }
                da = neural::softmax_backward(&c.alpha, &d_alpha);
            }
            if let Some(direct) = d_ahat {
                for (x, y) in da.iter_mut().zip(direct) {
                    *x += y;
                }
            }
            let w = &values[self.attn_w.range()];
            let v = &values[self.attn_v.range()];
            let mut dp = vec![0.0; a];
            for t in 0..steps {
                let dv = da[t] * c.a_hat[t] * (1.0 - c.a_hat[t]);
                let u_t = &c.u[t * a..(t + 1) * a];
                axpy(dv, u_t, &mut grads[self.attn_v.range()]);
                for r in 0..a {
                    dp[r] = dv * v[r] * (1.0 - u_t[r] * u_t[r]);
                }
                let h_t = &c.hd[t * h2..(t + 1) * h2];
                {
                    let gw = &mut grads[self.attn_w.range()];
                    for r in 0..a {
                        axpy(dp[r], h_t, &mut gw[r * h2..(r + 1) * h2]);
                    }
                }
                axpy(1.0, &dp, &mut grads[self.attn_b.range()]);
                if scope == Scope::Full {
                    let dh_t = &mut dhd[t * h2..(t + 1) * h2];
                    for r in 0..a {
                        axpy(dp[r], &w[r * h2..(r + 1) * h2], dh_t);
                    }
                }
            }
        }
        if scope == Scope::Attention {
            return Ok(());
        }
        c.mask.apply(&mut dhd);
        let de = self.bilstm.backward(&mut self.store, &c.bi, &dhd)?;
        let e_dim = self.config.embed_dim;
        let ge = self.store.grad_mut(self.embed);
        for (t, &i) in c.ids.iter().enumerate() {
            axpy(1.0, &de[t * e_dim..(t + 1) * e_dim], &mut ge[i * e_dim..(i + 1) * e_dim]);
        }
        Ok(())
    }

    /// Main-task loss `Σ (y - ŷ)²` and its gradient for every parameter,
    /// accumulated into the store (not zeroed first).
    pub fn main_loss_and_grad(&mut self, batch: &[LabeledSentence], mut dropout_rng: Option<&mut Rng>) -> Result<f64> {
        let mut loss = 0.0;
        for s in batch {
            let c = self.forward_ids(&self.vocab.encode(&s.tokens), dropout_rng.as_deref_mut())?;
            let y = s.label as f64;
            loss += (y - c.y_hat) * (y - c.y_hat);
            self.backward(&c, 2.0 * (c.y_hat - y), None, Scope::Full)?;
        }
        Ok(loss)
    }

    /// Auxiliary loss `Σ_t (a_t - â_t)²`. With `full` the gradient of every
    /// parameter is accumulated; otherwise only the attention scorer's.
    pub fn aux_loss_and_grad(
        &mut self,
        batch: &[AttentionScoreSeq],
        mut dropout_rng: Option<&mut Rng>,
        full: bool,
    ) -> Result<f64> {
        let mut loss = 0.0;
        for seq in batch {
            seq.check_alignment()?;
            let c = self.forward_ids(&self.vocab.encode(&seq.tokens), dropout_rng.as_deref_mut())?;
            let d: Vec<f64> = c.a_hat.iter().zip(&seq.scores).map(|(p, t)| 2.0 * (p - t)).collect();
            loss += neural::squared_error(&seq.scores, &c.a_hat);
            let scope = if full { Scope::Full } else { Scope::Attention };
            self.backward(&c, 0.0, Some(&d), scope)?;
        }
        Ok(loss)
    }

    /// Inference-mode main loss.
    pub fn main_loss(&self, batch: &[LabeledSentence]) -> Result<f64> {
        batch.iter().try_fold(0.0, |acc, s| {
            let p = self.predict_proba(&s.tokens)?;
            let y = s.label as f64;
            Ok(acc + (y - p) * (y - p))
        })
    }

    /// Inference-mode auxiliary loss.
    pub fn aux_loss(&self, batch: &[AttentionScoreSeq]) -> Result<f64> {
        batch.iter().try_fold(0.0, |acc, seq| {
            seq.check_alignment()?;
            let (_, trace) = self.forward(&seq.tokens)?;
            Ok(acc + neural::squared_error(&seq.scores, &trace.scores))
        })
    }

    /// Mean squared distance between `â` and the targets over all tokens.
    pub fn supervision_distance(&self, aux: &[AttentionScoreSeq]) -> Result<f64> {
        let n: usize = aux.iter().map(|s| s.tokens.len()).sum();
        if n == 0 {
            return Err(Error::Empty("auxiliary data"));
        }
        Ok(self.aux_loss(aux)? / n as f64)
    }
}

struct Layout {
    bilstm: BiLstm,
    attn_w: ParamId,
    attn_b: ParamId,
    attn_v: ParamId,
    out_w: ParamId,
    out_b: ParamId,
}

impl Layout {
    fn new(store: &mut ParamStore, c: &SeqModelConfig, rng: &mut Rng) -> Self {
        let bilstm = BiLstm::new(store, "bilstm", c.embed_dim, c.hidden, rng);
        let h2 = 2 * c.hidden;
        let attn_w = store.add("attn.w", c.attn_hidden, h2, Init::Uniform(1.0 / math::sqrt(h2 as f64)), rng);
        let attn_b = store.add("attn.b", 1, c.attn_hidden, Init::Constant(0.0), rng);
        let attn_v = store.add(
            "attn.v",
            1,
            c.attn_hidden,
            Init::Uniform(1.0 / math::sqrt(c.attn_hidden as f64)),
            rng,
        );
        let out_w = store.add("out.w", 1, h2, Init::Uniform(1.0 / math::sqrt(h2 as f64)), rng);
        let out_b = store.add("out.b", 1, 1, Init::Constant(0.0), rng);
        Self {
            bilstm,
            attn_w,
            attn_b,
            attn_v,
            out_w,
            out_b,
        }
    }
}

/// Optimiser and random streams of one training run.
pub struct Trainer {
    /// Shared by both losses, so the second-moment estimate of the scorer
    /// reflects whichever gradient is larger, as plain gradient descent
    /// would.
    pub adam: AdamState,
    main_dropout: Rng,
    aux_dropout: Rng,
}

impl Trainer {
    pub fn new(model: &SeqModel) -> Self {
        let seed = model.config.seed;
        let config = AdamConfig {
            lr: model.config.lr,
            ..AdamConfig::default()
        };
        Self {
            adam: AdamState::new(&model.store, config),
            main_dropout: rng::stream(seed, "seqlabel/dropout-main"),
            aux_dropout: rng::stream(seed, "seqlabel/dropout-aux"),
        }
    }

    /// One Adam update of all parameters on the batch-summed squared error.
    /// Returns the loss before the update.
    pub fn main_step(&mut self, model: &mut SeqModel, batch: &[LabeledSentence]) -> Result<f64> {
        model.store.zero_grad();
        let loss = model.main_loss_and_grad(batch, Some(&mut self.main_dropout))?;
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                context: "main loss".into(),
            });
        }
        self.adam.step(&mut model.store)?;
        Ok(loss)
    }

    /// One Adam update of the attention scorer only, against token-level
    /// targets. Returns the loss before the update.
    pub fn aux_step(&mut self, model: &mut SeqModel, batch: &[AttentionScoreSeq]) -> Result<f64> {
        model.store.zero_grad();
        let loss = model.aux_loss_and_grad(batch, Some(&mut self.aux_dropout), false)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                context: "auxiliary loss".into(),
            });
        }
        let ids = model.attention_params();
        self.adam.step_subset(&mut model.store, &ids)?;
        Ok(loss)
    }
}

/// Positive-class precision, recall and F1 with their counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Prf {
    /// Precision is 1 when nothing is predicted positive; F1 is 0 when
    /// precision and recall are both 0.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
        let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            precision,
            recall,
            f1,
            tp,
            fp,
            fn_,
            tn,
        }
    }

    pub fn from_predictions(gold: &[u8], predicted: &[u8]) -> Self {
        let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
        for (&g, &p) in gold.iter().zip(predicted) {
            match (g, p) {
                (1, 1) => tp += 1,
                (0, 1) => fp += 1,
                (1, 0) => fn_ += 1,
                _ => tn += 1,
            }
        }
        Self::from_counts(tp, fp, fn_, tn)
    }
}

pub fn evaluate(model: &SeqModel, test: &[LabeledSentence], threshold: f64) -> Result<Prf> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let mut predicted = Vec::with_capacity(test.len());
    for s in test {
        predicted.push((model.predict_proba(&s.tokens)? >= threshold) as u8);
    }
    let gold: Vec<u8> = test.iter().map(|s| s.label).collect();
    Ok(Prf::from_predictions(&gold, &predicted))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean per-sentence main loss over the epoch's batches.
    pub main_loss: f64,
    /// Mean per-token auxiliary loss; NaN-free zero when no aux steps ran.
    pub aux_loss: f64,
    pub aux_steps: usize,
    pub dev: Prf,
    /// Mean squared distance of `â` to the aux targets after the epoch.
    pub supervision_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub config: SeqModelConfig,
    pub initial_supervision_distance: Option<f64>,
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_dev_f1: f64,
}

/// Alternating training. Each main batch is preceded by `aux_ratio`
/// auxiliary batches drawn cyclically from `aux` (which may be a different,
/// smaller sentence set). The parameters with the best dev F1 (earliest on
/// ties) are returned. Evaluation never sees auxiliary data.
pub fn train_multitask(
    config: &SeqModelConfig,
    main_train: &[LabeledSentence],
    main_dev: &[LabeledSentence],
    aux: &[AttentionScoreSeq],
) -> Result<(SeqModel, TrainLog)> {
    if main_train.is_empty() {
        return Err(Error::Empty("main training set"));
    }
    if main_dev.is_empty() {
        return Err(Error::Empty("main dev set"));
    }
    for seq in aux {
        seq.check_alignment()?;
    }
    let mut model = SeqModel::new(config.clone(), Vocab::build(main_train))?;
    let mut trainer = Trainer::new(&model);
    let use_aux = config.aux_ratio > 0 && !aux.is_empty();
    let mut order_rng = rng::stream(config.seed, "seqlabel/main-order");
    let mut aux_order: Vec<usize> = (0..aux.len()).collect();
    aux_order.shuffle(&mut rng::stream(config.seed, "seqlabel/aux-order"));
    let mut aux_cursor = 0;
    let initial_supervision_distance = if use_aux {
        Some(model.supervision_distance(aux)?)
    } else {
        None
    };

    let mut best: Option<(usize, f64, ParamStore)> = None;
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..main_train.len()).collect();
    let mut main_batch = Vec::with_capacity(config.batch);
    let mut aux_batch = Vec::with_capacity(config.batch);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut order_rng);
        let (mut main_loss, mut aux_loss, mut aux_tokens, mut aux_steps) = (0.0, 0.0, 0usize, 0usize);
        for chunk in order.chunks(config.batch) {
            if use_aux {
                for _ in 0..config.aux_ratio {
                    aux_batch.clear();
                    for _ in 0..config.batch.min(aux.len()) {
                        let seq = &aux[aux_order[aux_cursor]];
                        aux_tokens += seq.tokens.len();
                        aux_batch.push(seq.clone());
                        aux_cursor = (aux_cursor + 1) % aux.len();
                    }
                    aux_loss += trainer
                        .aux_step(&mut model, &aux_batch)
                        .map_err(|e| divergence(e, epoch))?;
                    aux_steps += 1;
                }
            }
            main_batch.clear();
            main_batch.extend(chunk.iter().map(|&i| main_train[i].clone()));
            main_loss += trainer
                .main_step(&mut model, &main_batch)
                .map_err(|e| divergence(e, epoch))?;
        }
        let dev = evaluate(&model, main_dev, 0.5)?;
        let supervision_distance = if use_aux {
            Some(model.supervision_distance(aux)?)
        } else {
            None
        };
        epochs.push(EpochLog {
            epoch,
            main_loss: main_loss / main_train.len() as f64,
            aux_loss: if aux_tokens > 0 { aux_loss / aux_tokens as f64 } else { 0.0 },
            aux_steps,
            dev,
            supervision_distance,
        });
        if best.as_ref().is_none_or(|(_, f1, _)| dev.f1 > *f1) {
            best = Some((epoch, dev.f1, model.store.clone()));
        }
    }
    let (best_epoch, best_dev_f1) = match best {
        Some((epoch, f1, store)) => {
            model.store = store;
            (epoch, f1)
        }
        None => (0, evaluate(&model, main_dev, 0.5)?.f1),
    };
    Ok((
        model,
        TrainLog {
            config: config.clone(),
            initial_supervision_distance,
            epochs,
            best_epoch,
            best_dev_f1,
        },
    ))
}

fn divergence(e: Error, epoch: usize) -> Error {
    match e {
        Error::NonFinite { .. } | Error::NonFiniteGradient(_) => Error::Divergence { epoch },
        other => other,
    }
}
