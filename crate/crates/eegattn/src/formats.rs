//! Readers and writers for the pipeline's artifacts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use eegattn_core::attnscore::{AttentionScoreSeq, FrequencyTable};
use eegattn_core::corpus::FrequencyBand;
use eegattn_core::forest::{DecisionTree, Node, RandomForest, LEAF};
use eegattn_core::reduction::{ReducedEmbedding, SelectionReport};
use eegattn_core::seqlabel::{LabeledSentence, TrainLog};
use eegattn_core::stats::ElectrodeTestResult;
use eegattn_core::taskclf::TaskClfLog;
use eegattn_core::tasksets::{AnnotatedSentence, DatasetSummary};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EmbeddingLine {
    sentence_id: String,
    token_index: usize,
    participant_id: u32,
    band: FrequencyBand,
    indices: Vec<usize>,
    values: Vec<f64>,
}

pub fn write_embeddings(path: &Path, embeddings: &[ReducedEmbedding]) -> Result<()> {
    let lines: Vec<EmbeddingLine> = embeddings
        .iter()
        .map(|e| EmbeddingLine {
            sentence_id: e.sentence_id.clone(),
            token_index: e.token_index,
            participant_id: e.participant_id,
            band: e.band,
            indices: e.selected_indices.clone(),
            values: e.values.clone(),
        })
        .collect();
    jsonl::write(path, &lines)
}

pub fn read_embeddings(path: &Path) -> Result<Vec<ReducedEmbedding>> {
    let lines: Vec<EmbeddingLine> = jsonl::read(path)?;
    Ok(lines
        .into_iter()
        .map(|l| ReducedEmbedding {
            sentence_id: l.sentence_id,
            token_index: l.token_index,
            participant_id: l.participant_id,
            band: l.band,
            selected_indices: l.indices,
            values: l.values,
        })
        .collect())
}

pub fn write_report(path: &Path, report: &SelectionReport) -> Result<()> {
    jsonl::write_json(path, report)
}

pub fn read_report(path: &Path) -> Result<SelectionReport> {
    jsonl::read_json(path)
}

pub const STATS_HEADER: &str = "band\telectrode_index\telectrode_label\tmean_nr\tmean_ar\tt_stat\tp_value\tdirection";

pub fn write_stats(path: &Path, results: &[ElectrodeTestResult], labels: &[String]) -> Result<()> {
    let mut out = String::from(STATS_HEADER);
    out.push('\n');
    for r in results {
        let label = labels.get(r.electrode_index).map(String::as_str).unwrap_or("");
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.band.name(),
            r.electrode_index,
            label,
            r.mean_nr,
            r.mean_ar,
            r.t_stat,
            r.p_value,
            r.direction.name()
        )
        .expect("string write");
    }
    jsonl::write_text(path, &out)
}

pub const FOREST_SCHEMA: &str = "forest/1";

/// A tree as parallel node arrays; leaves have `feature = -1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatTree {
    pub n_features: usize,
    pub feature: Vec<i64>,
    pub threshold: Vec<f64>,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub count0: Vec<usize>,
    pub count1: Vec<usize>,
    pub impurity_decrease: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestFile {
    pub schema: String,
    pub max_features: usize,
    pub feature_importances: Vec<f64>,
    pub trees: Vec<FlatTree>,
}

impl From<&RandomForest> for ForestFile {
    fn from(f: &RandomForest) -> Self {
        let trees = f
            .trees
            .iter()
            .map(|t| FlatTree {
                n_features: t.n_features,
                feature: t
                    .nodes
                    .iter()
                    .map(|n| if n.is_leaf() { -1 } else { n.feature as i64 })
                    .collect(),
                threshold: t.nodes.iter().map(|n| n.threshold).collect(),
                left: t.nodes.iter().map(|n| n.left).collect(),
                right: t.nodes.iter().map(|n| n.right).collect(),
                count0: t.nodes.iter().map(|n| n.class_counts[0]).collect(),
                count1: t.nodes.iter().map(|n| n.class_counts[1]).collect(),
                impurity_decrease: t.impurity_decrease.clone(),
            })
            .collect();
        Self {
            schema: FOREST_SCHEMA.into(),
            max_features: f.max_features,
            feature_importances: f.feature_importances.clone(),
            trees,
        }
    }
}

impl ForestFile {
    pub fn into_forest(self) -> Result<RandomForest> {
        if self.schema != FOREST_SCHEMA {
            return Err(Error::Format(format!("unsupported forest schema {:?}", self.schema)));
        }
        let mut trees = Vec::with_capacity(self.trees.len());
        for t in self.trees {
            let n = t.feature.len();
            let lens = [t.threshold.len(), t.left.len(), t.right.len(), t.count0.len(), t.count1.len()];
            if lens.iter().any(|&l| l != n) {
                return Err(Error::Format("forest node arrays differ in length".into()));
            }
            let mut nodes = Vec::with_capacity(n);
            for i in 0..n {
                let feature = match t.feature[i] {
                    -1 => LEAF,
                    f if f >= 0 && (f as usize) < t.n_features => f as usize,
                    f => return Err(Error::Format(format!("node {i}: feature {f} out of range"))),
                };
                if feature != LEAF && (t.left[i] >= n || t.right[i] >= n) {
                    return Err(Error::Format(format!("node {i}: child out of range")));
                }
                nodes.push(Node {
                    feature,
                    threshold: t.threshold[i],
                    left: t.left[i],
                    right: t.right[i],
                    class_counts: [t.count0[i], t.count1[i]],
                });
            }
            trees.push(DecisionTree {
                n_features: t.n_features,
                nodes,
                impurity_decrease: t.impurity_decrease,
            });
        }
        Ok(RandomForest {
            trees,
            max_features: self.max_features,
            feature_importances: self.feature_importances,
        })
    }
}

pub fn write_forest(path: &Path, forest: &RandomForest) -> Result<()> {
    jsonl::write_json(path, &ForestFile::from(forest))
}

pub fn read_forest(path: &Path) -> Result<RandomForest> {
    jsonl::read_json::<ForestFile>(path)?.into_forest()
}

pub fn write_importances(path: &Path, importances: &[f64]) -> Result<()> {
    let mut out = String::from("feature_index\timportance\n");
    for (i, v) in importances.iter().enumerate() {
        writeln!(out, "{i}\t{v}").expect("string write");
    }
    jsonl::write_text(path, &out)
}

pub fn write_scores(path: &Path, scores: &[AttentionScoreSeq]) -> Result<()> {
    jsonl::write(path, scores)
}

pub fn read_scores(path: &Path) -> Result<Vec<AttentionScoreSeq>> {
    let scores: Vec<AttentionScoreSeq> = jsonl::read(path)?;
    for s in &scores {
        s.check_alignment()?;
    }
    Ok(scores)
}

/// Tab-separated `key<TAB>value` lines; blank lines and `#` comments skip.
fn read_pairs(path: &Path) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (n, line) in jsonl::lines(path)? {
        if line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, n, "expected token<TAB>value"))?;
        out.push((n, k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn write_frequencies(path: &Path, table: &FrequencyTable) -> Result<()> {
    let mut out = String::new();
    for (t, c) in table {
        writeln!(out, "{t}\t{c}").expect("string write");
    }
    jsonl::write_text(path, &out)
}

pub fn read_frequencies(path: &Path) -> Result<FrequencyTable> {
    read_pairs(path)?
        .into_iter()
        .map(|(n, k, v)| {
            let c = v.parse::<u64>().map_err(|e| Error::parse(path, n, e))?;
            Ok((k.to_lowercase(), c))
        })
        .collect()
}

/// Per-token fixation durations (or any non-negative token statistic).
pub fn read_fixations(path: &Path) -> Result<BTreeMap<String, f64>> {
    read_pairs(path)?
        .into_iter()
        .map(|(n, k, v)| {
            let x = v.parse::<f64>().map_err(|e| Error::parse(path, n, e))?;
            if !x.is_finite() {
                return Err(Error::parse(path, n, "non-finite value"));
            }
            Ok((k.to_lowercase(), x))
        })
        .collect()
}

/// One token per line.
pub fn read_keywords(path: &Path) -> Result<BTreeSet<String>> {
    Ok(jsonl::lines(path)?.into_iter().map(|(_, l)| l.trim().to_string()).collect())
}

pub fn write_keywords(path: &Path, keywords: &BTreeSet<String>) -> Result<()> {
    let mut out = String::new();
    for k in keywords {
        out.push_str(k);
        out.push('\n');
    }
    jsonl::write_text(path, &out)
}

/// One id per line.
pub fn read_id_list(path: &Path) -> Result<BTreeSet<String>> {
    read_keywords(path)
}

pub fn read_annotated(path: &Path) -> Result<Vec<AnnotatedSentence>> {
    jsonl::read(path)
}

pub fn write_labeled(path: &Path, sentences: &[LabeledSentence]) -> Result<()> {
    jsonl::write(path, sentences)
}

pub fn read_labeled(path: &Path) -> Result<Vec<LabeledSentence>> {
    let out: Vec<LabeledSentence> = jsonl::read(path)?;
    for (i, s) in out.iter().enumerate() {
        if s.label > 1 {
            return Err(Error::Format(format!("{}: sentence {} has label {}", path.display(), i + 1, s.label)));
        }
        if s.tokens.is_empty() {
            return Err(Error::Format(format!("{}: sentence {} has no tokens", path.display(), s.sentence_id)));
        }
    }
    Ok(out)
}

pub fn write_summary(path: &Path, rows: &[DatasetSummary]) -> Result<()> {
    let mut out = String::from("source\tn_train\tpct_positive_train\tn_dev\tn_test\n");
    for r in rows {
        writeln!(
            out,
            "{}\t{}\t{:.1}\t{}\t{}",
            r.name, r.n_train, r.pct_positive_train, r.n_dev, r.n_test
        )
        .expect("string write");
    }
    jsonl::write_text(path, &out)
}

pub fn write_taskclf_log(path: &Path, log: &TaskClfLog) -> Result<()> {
    let mut out = String::from("epoch,train_loss,train_acc,dev_acc\n");
    for e in &log.epochs {
        writeln!(out, "{},{},{},{}", e.epoch, e.train_loss, e.train_acc, e.dev_acc).expect("string write");
    }
    jsonl::write_text(path, &out)
}

pub fn write_train_log(path: &Path, log: &TrainLog) -> Result<()> {
    let mut out = String::from(
        "epoch,main_loss,aux_loss,aux_steps,dev_precision,dev_recall,dev_f1,supervision_distance\n",
    );
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    writeln!(out, "0,,,0,,,,{}", opt(log.initial_supervision_distance)).expect("string write");
    for e in &log.epochs {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            e.epoch,
            e.main_loss,
            e.aux_loss,
            e.aux_steps,
            e.dev.precision,
            e.dev.recall,
            e.dev.f1,
            opt(e.supervision_distance)
        )
        .expect("string write");
    }
    jsonl::write_text(path, &out)
}

/// Splits a header-checked CSV into rows of fields.
fn read_csv(path: &Path, header: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let lines = jsonl::lines(path)?;
    let Some(((n, first), rest)) = lines.split_first() else {
        return Err(Error::parse(path, 1, "empty file"));
    };
    if first.trim() != header {
        return Err(Error::parse(path, *n, format!("expected header {header:?}")));
    }
    let width = header.split(',').count();
    rest.iter()
        .map(|(n, l)| {
            let fields: Vec<String> = l.trim().split(',').map(str::to_string).collect();
            if fields.len() != width {
                return Err(Error::parse(path, *n, format!("expected {width} fields")));
            }
            Ok((*n, fields))
        })
        .collect()
}

fn field<T: std::str::FromStr>(path: &Path, n: usize, s: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e| Error::parse(path, n, format!("{s:?}: {e}")))
}

pub const EVAL_HEADER: &str = "source,precision,recall,f1,seed";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub source: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub seed: u64,
}

pub fn write_eval(path: &Path, rows: &[EvalRow]) -> Result<()> {
    let mut out = String::from(EVAL_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.source, r.precision, r.recall, r.f1, r.seed).expect("string write");
    }
    jsonl::write_text(path, &out)
}

pub fn read_eval(path: &Path) -> Result<Vec<EvalRow>> {
    read_csv(path, EVAL_HEADER)?
        .into_iter()
        .map(|(n, f)| {
            Ok(EvalRow {
                source: f[0].clone(),
                precision: field(path, n, &f[1])?,
                recall: field(path, n, &f[2])?,
                f1: field(path, n, &f[3])?,
                seed: field(path, n, &f[4])?,
            })
        })
        .collect()
}

pub const TASKCLF_HEADER: &str = "label,layout,input_dim,average_participants,seed,best_epoch,dev_acc,test_acc";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskClfRow {
    pub label: String,
    pub layout: String,
    pub input_dim: usize,
    pub average_participants: bool,
    pub seed: u64,
    pub best_epoch: usize,
    pub dev_acc: f64,
    pub test_acc: f64,
}

pub fn write_taskclf_results(path: &Path, rows: &[TaskClfRow]) -> Result<()> {
    let mut out = String::from(TASKCLF_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.label, r.layout, r.input_dim, r.average_participants, r.seed, r.best_epoch, r.dev_acc, r.test_acc
        )
        .expect("string write");
    }
    jsonl::write_text(path, &out)
}

pub fn read_taskclf_results(path: &Path) -> Result<Vec<TaskClfRow>> {
    read_csv(path, TASKCLF_HEADER)?
        .into_iter()
        .map(|(n, f)| {
            Ok(TaskClfRow {
                label: f[0].clone(),
                layout: f[1].clone(),
                input_dim: field(path, n, &f[2])?,
                average_participants: field(path, n, &f[3])?,
                seed: field(path, n, &f[4])?,
                best_epoch: field(path, n, &f[5])?,
                dev_acc: field(path, n, &f[6])?,
                test_acc: field(path, n, &f[7])?,
            })
        })
        .collect()
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Supervision source x P/R/F1, mean and std over seeds, sources in first
/// appearance order.
pub fn table2(rows: &[EvalRow]) -> String {
    let mut order: Vec<&str> = Vec::new();
    for r in rows {
        if !order.contains(&r.source.as_str()) {
            order.push(&r.source);
        }
    }
    let mut out = String::from("source,n_seeds,precision_mean,precision_std,recall_mean,recall_std,f1_mean,f1_std\n");
    for source in order {
        let sel: Vec<&EvalRow> = rows.iter().filter(|r| r.source == source).collect();
        let col = |f: fn(&EvalRow) -> f64| mean_std(&sel.iter().map(|r| 100.0 * f(r)).collect::<Vec<_>>());
        let (pm, ps) = col(|r| r.precision);
        let (rm, rs) = col(|r| r.recall);
        let (fm, fs) = col(|r| r.f1);
        writeln!(
            out,
            "{source},{},{pm:.2},{ps:.2},{rm:.2},{rs:.2},{fm:.2},{fs:.2}",
            sel.len()
        )
        .expect("string write");
    }
    out
}

/// Label x input dimension accuracies (percent), mean and std over seeds.
pub fn table1(rows: &[TaskClfRow]) -> String {
    let mut keys: Vec<(String, usize)> = Vec::new();
    for r in rows {
        let k = (r.label.clone(), r.input_dim);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let mut out = String::from("label,input_dim,n_seeds,dev_acc_mean,dev_acc_std,test_acc_mean,test_acc_std\n");
    for (label, dim) in keys {
        let sel: Vec<&TaskClfRow> = rows.iter().filter(|r| r.label == label && r.input_dim == dim).collect();
        let (dm, ds) = mean_std(&sel.iter().map(|r| 100.0 * r.dev_acc).collect::<Vec<_>>());
        let (tm, ts) = mean_std(&sel.iter().map(|r| 100.0 * r.test_acc).collect::<Vec<_>>());
        writeln!(out, "{label},{dim},{},{dm:.2},{ds:.2},{tm:.2},{ts:.2}", sel.len()).expect("string write");
    }
    out
}
