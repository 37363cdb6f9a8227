//! Band binning, TRT restriction, sentence-level splits, forest-based
//! electrode selection and k-dimensional per-band word embeddings.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{EegCorpus, EtFeature, FrequencyBand, Task, N_ELECTRODES};
use crate::error::{Error, Result};
use crate::forest::{self, ForestConfig, Matrix};
use crate::math;
use crate::rng;

/// Values of `k` explored for per-band embeddings.
pub const PAPER_K: [usize; 3] = [5, 15, 30];
/// The only eye-tracking feature the pipeline consumes.
pub const ET_FEATURE: EtFeature = EtFeature::Trt;
pub const DEFAULT_RATIOS: (f64, f64, f64) = (0.70, 0.15, 0.15);

/// Which sentence attribute acts as the binary label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    /// NR = 0, AR = 1.
    Task,
    /// Session 1 = 0, session 2 = 1.
    Session,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionConfig {
    pub k: usize,
    pub bands: Vec<FrequencyBand>,
    pub n_trees: usize,
    pub label: LabelKind,
    pub seed: u64,
}

impl Default for ReductionConfig {
    fn default() -> Self {
        Self {
            k: 5,
            bands: FrequencyBand::DEFAULT.to_vec(),
            n_trees: 100,
            label: LabelKind::Task,
            seed: 0,
        }
    }
}

impl ReductionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > N_ELECTRODES {
            return Err(Error::InvalidParameter(format!(
                "k must be in 1..={N_ELECTRODES}, got {}",
                self.k
            )));
        }
        if self.bands.is_empty() {
            return Err(Error::InvalidParameter("bands must not be empty".into()));
        }
        Ok(())
    }

    pub fn is_paper_k(&self) -> bool {
        PAPER_K.contains(&self.k)
    }
}

/// Sentence ids per split.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SplitIds {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSplits {
    pub ids: SplitIds,
    pub train: EegCorpus,
    pub dev: EegCorpus,
    pub test: EegCorpus,
}

/// Sentence-disjoint split, stratified by task. Within each task the
/// sentence ids are shuffled and cut at `round(n * train)` and
/// `round(n * dev)`.
pub fn split_corpus(corpus: &EegCorpus, ratios: (f64, f64, f64), seed: u64) -> Result<CorpusSplits> {
    let ids = split_ids(corpus, ratios, seed)?;
    let set = |v: &[String]| v.iter().cloned().collect::<BTreeSet<_>>();
    Ok(CorpusSplits {
        train: corpus.subset(&set(&ids.train)),
        dev: corpus.subset(&set(&ids.dev)),
        test: corpus.subset(&set(&ids.test)),
        ids,
    })
}

pub fn split_ids(corpus: &EegCorpus, ratios: (f64, f64, f64), seed: u64) -> Result<SplitIds> {
    let (tr, dv, te) = ratios;
    if [tr, dv, te].iter().any(|r| !(0.0..=1.0).contains(r)) || (tr + dv + te - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "split ratios must be non-negative and sum to 1, got {ratios:?}"
        )));
    }
    if corpus.sentences().len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "need at least 3 sentences to split, got {}",
            corpus.sentences().len()
        )));
    }
    let mut out = SplitIds::default();
    for task in [Task::NR, Task::AR] {
        let mut group: Vec<String> = corpus
            .sentences()
            .iter()
            .filter(|s| s.task == task)
            .map(|s| s.sentence_id.clone())
            .collect();
        group.sort();
        group.shuffle(&mut rng::stream(seed, &format!("split/{}", task.name())));
        let n = group.len() as f64;
        let n_train = (math::round(n * tr) as usize).min(group.len());
        let n_dev = (math::round(n * dv) as usize).min(group.len() - n_train);
        out.train.extend_from_slice(&group[..n_train]);
        out.dev.extend_from_slice(&group[n_train..n_train + n_dev]);
        out.test.extend_from_slice(&group[n_train + n_dev..]);
    }
    Ok(out)
}

/// Identifies the word occurrence behind a feature-matrix row.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowKey {
    pub sentence_id: String,
    pub token_index: usize,
    pub participant_id: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    /// Columns are band-major, then electrode-ascending.
    pub x: Matrix,
    pub y: Vec<u8>,
    pub rows: Vec<RowKey>,
    pub bands: Vec<FrequencyBand>,
}

impl FeatureMatrix {
    /// The 105-column block of one band.
    pub fn band_block(&self, band: FrequencyBand) -> Option<Matrix> {
        let pos = self.bands.iter().position(|&b| b == band)?;
        let cols: Vec<usize> = (pos * N_ELECTRODES..(pos + 1) * N_ELECTRODES).collect();
        Some(self.x.select_columns(&cols))
    }
}

pub fn label_of(task: Task, session: crate::corpus::Session, kind: LabelKind) -> u8 {
    match kind {
        LabelKind::Task => task.label(),
        LabelKind::Session => session.label(),
    }
}

/// One row per (word, participant) TRT record, labelled by task (AR = 1).
pub fn build_feature_matrix(part: &EegCorpus, bands: &[FrequencyBand]) -> Result<FeatureMatrix> {
    build_feature_matrix_with(part, bands, LabelKind::Task)
}

pub fn build_feature_matrix_with(
    part: &EegCorpus,
    bands: &[FrequencyBand],
    label: LabelKind,
) -> Result<FeatureMatrix> {
    if bands.is_empty() {
        return Err(Error::InvalidParameter("bands must not be empty".into()));
    }
    let records: Vec<_> = part
        .records()
        .iter()
        .filter(|r| r.et_feature == ET_FEATURE)
        .collect();
    if records.is_empty() {
        return Err(Error::Empty("TRT records"));
    }
    let cols = bands.len() * N_ELECTRODES;
    let mut data = Vec::with_capacity(records.len() * cols);
    let mut y = Vec::with_capacity(records.len());
    let mut rows = Vec::with_capacity(records.len());
    for r in records {
        for &b in bands {
            data.extend(r.band_power(b));
        }
        y.push(label_of(r.task, r.session, label));
        rows.push(RowKey {
            sentence_id: r.sentence_id.clone(),
            token_index: r.token_index,
            participant_id: r.participant_id,
        });
    }
    Ok(FeatureMatrix {
        x: Matrix::new(rows.len(), cols, data)?,
        y,
        rows,
        bands: bands.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSelection {
    pub band: FrequencyBand,
    /// Top-k electrodes, most important first.
    pub indices: Vec<usize>,
    /// Importances of `indices`, same order.
    pub importances: Vec<f64>,
    /// Importances of all 105 electrodes.
    pub all_importances: Vec<f64>,
    pub max_importance: f64,
    /// Set when no electrode reaches twice the uniform share (2/105).
    pub low_signal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub k: usize,
    pub label: LabelKind,
    pub n_trees: usize,
    pub seed: u64,
    pub n_train_rows: usize,
    pub bands: Vec<BandSelection>,
    /// Sentence splits the selection was trained on, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub splits: Option<SplitIds>,
}

impl SelectionReport {
    pub fn band(&self, band: FrequencyBand) -> Option<&BandSelection> {
        self.bands.iter().find(|b| b.band == band)
    }

    /// The `n` strongest (band, electrode, importance) triples across all
    /// band forests.
    pub fn global_top(&self, n: usize) -> Vec<(FrequencyBand, usize, f64)> {
        let mut all: Vec<(FrequencyBand, usize, f64)> = self
            .bands
            .iter()
            .flat_map(|b| b.all_importances.iter().enumerate().map(move |(j, &v)| (b.band, j, v)))
            .collect();
        all.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
        all.truncate(n);
        all
    }
}

/// Fits one forest per configured band on that band's 105 columns of the
/// training matrix and keeps its top-k electrodes. The band forest seed is
/// derived from `config.seed` and the band name.
pub fn select_electrodes(train: &FeatureMatrix, config: &ReductionConfig) -> Result<SelectionReport> {
    config.validate()?;
    if !(train.y.contains(&0) && train.y.contains(&1)) {
        return Err(Error::SingleClass);
    }
    let mut bands = Vec::with_capacity(config.bands.len());
    for &band in &config.bands {
        let block = train.band_block(band).ok_or_else(|| {
            Error::InvalidParameter(format!("band {} missing from training matrix", band.name()))
        })?;
        let forest = forest::fit_forest(
            &block,
            &train.y,
            &ForestConfig {
                n_trees: config.n_trees,
                seed: rng::sub_seed(config.seed, band.name()),
                ..ForestConfig::default()
            },
        )?;
        let indices = forest::top_k_features(&forest, config.k)?;
        let all = forest.feature_importances;
        let max_importance = all.iter().copied().fold(0.0, f64::max);
        bands.push(BandSelection {
            band,
            importances: indices.iter().map(|&j| all[j]).collect(),
            indices,
            max_importance,
            low_signal: max_importance < 2.0 / N_ELECTRODES as f64,
            all_importances: all,
        });
    }
    Ok(SelectionReport {
        k: config.k,
        label: config.label,
        n_trees: config.n_trees,
        seed: config.seed,
        n_train_rows: train.x.rows(),
        bands,
        splits: None,
    })
}

/// k-dimensional band-binned EEG vector of one word for one participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedEmbedding {
    pub sentence_id: String,
    pub token_index: usize,
    pub participant_id: u32,
    pub band: FrequencyBand,
    pub selected_indices: Vec<usize>,
    pub values: Vec<f64>,
}

/// Projects every TRT record onto each band's selected electrodes, in
/// record order then report band order.
pub fn embed_words(part: &EegCorpus, report: &SelectionReport) -> Result<Vec<ReducedEmbedding>> {
    for b in &report.bands {
        if let Some(&j) = b.indices.iter().find(|&&j| j >= N_ELECTRODES) {
            return Err(Error::ElectrodeIndex(j));
        }
    }
    let mut out = Vec::new();
    for r in part.records().iter().filter(|r| r.et_feature == ET_FEATURE) {
        for b in &report.bands {
            out.push(ReducedEmbedding {
                sentence_id: r.sentence_id.clone(),
                token_index: r.token_index,
                participant_id: r.participant_id,
                band: b.band,
                selected_indices: b.indices.clone(),
                values: b.indices.iter().map(|&j| r.band_power_at(b.band, j)).collect(),
            });
        }
    }
    Ok(out)
}

/// Full pipeline: split, build the training matrix, select, embed all
/// splits. The report records the split it was trained on.
pub fn reduce(corpus: &EegCorpus, config: &ReductionConfig) -> Result<(SelectionReport, Vec<ReducedEmbedding>)> {
    config.validate()?;
    let splits = split_corpus(corpus, DEFAULT_RATIOS, rng::sub_seed(config.seed, "split"))?;
    let train = build_feature_matrix_with(&splits.train, &config.bands, config.label)?;
    let mut report = select_electrodes(&train, config)?;
    report.splits = Some(splits.ids);
    let embeddings = embed_words(corpus, &report)?;
    Ok((report, embeddings))
}
