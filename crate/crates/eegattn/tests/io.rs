use std::collections::BTreeMap;

use eegattn::corpus_io::{load_corpus, save_corpus};
use eegattn::{formats, Error};
use eegattn_core::corpus::{generate_synthetic, EegCorpus, FrequencyBand, SyntheticSpec};
use eegattn_core::forest::{fit_forest, ForestConfig, Matrix};

fn small_corpus(seed: u64) -> EegCorpus {
    let spec = SyntheticSpec {
        n_sentences_nr: 4,
        n_sentences_ar: 5,
        n_participants: 2,
        informative_electrodes: vec![10, 11, 12],
        band_shift: BTreeMap::from([(FrequencyBand::Theta, 1.0)]),
        seed,
        ..SyntheticSpec::default()
    };
    generate_synthetic(&spec).unwrap()
}

#[test]
fn corpus_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.jsonl");
    let corpus = small_corpus(7);
    save_corpus(&corpus, &path).unwrap();
    let back = load_corpus(&path).unwrap();
    assert_eq!(back, corpus);
    // and the text is stable under a second save
    let again = dir.path().join("again.jsonl");
    save_corpus(&back, &again).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn empty_file_is_an_empty_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.jsonl");
    std::fs::write(&path, "").unwrap();
    let c = load_corpus(&path).unwrap();
    assert!(c.is_empty());
    assert_eq!(c.electrode_labels().len(), 105);
}

fn corrupt_line(edit: impl Fn(&str) -> String, target: usize) -> Error {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.jsonl");
    save_corpus(&small_corpus(3), &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<String> = text
        .lines()
        .enumerate()
        .map(|(i, l)| if i + 1 == target { edit(l) } else { l.to_string() })
        .collect();
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    load_corpus(&path).unwrap_err()
}

fn error_line(e: &Error) -> usize {
    match e {
        Error::Parse { line, .. } => *line,
        other => panic!("expected a parse error, got {other}"),
    }
}

#[test]
fn short_electrode_vector_names_its_line() {
    // line 1 is metadata, 2..=10 are sentences, word lines follow
    let e = corrupt_line(|l| l.replace("\"theta2\":[", "\"theta2\":[1.0,"), 14);
    assert_eq!(error_line(&e), 14, "{e}");
    assert!(e.to_string().contains(":14:"), "{e}");
    assert!(e.to_string().contains("106"), "{e}");
}

#[test]
fn unknown_domain_key_names_its_line() {
    let e = corrupt_line(|l| l.replace("\"theta1\"", "\"delta1\""), 20);
    assert_eq!(error_line(&e), 20);
    assert!(e.to_string().contains("delta1"), "{e}");
}

#[test]
fn unknown_sentence_names_its_line() {
    let e = corrupt_line(|l| l.replacen("\"sentence_id\":\"", "\"sentence_id\":\"x", 1), 12);
    assert_eq!(error_line(&e), 12);
}

#[test]
fn missing_file_is_an_io_error() {
    let e = load_corpus(std::path::Path::new("/nonexistent/corpus.jsonl")).unwrap_err();
    assert!(matches!(e, Error::Io { .. }), "{e}");
}

#[test]
fn forest_json_round_trip_predicts_identically() {
    let n = 200;
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let a = (i as f64 * 0.37).sin();
        let b = (i as f64 * 1.91).cos();
        rows.push(vec![a, b, a * b]);
        y.push(u8::from(a + 0.5 * b > 0.0));
    }
    let x = Matrix::from_rows(&rows).unwrap();
    let forest = fit_forest(&x, &y, &ForestConfig { n_trees: 10, ..ForestConfig::with_seed(4) }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("forest.json");
    formats::write_forest(&path, &forest).unwrap();
    let back = formats::read_forest(&path).unwrap();
    for r in &rows {
        assert_eq!(back.predict_row(r), forest.predict_row(r));
    }
    assert_eq!(back.feature_importances, forest.feature_importances);
}

#[test]
fn table2_reports_percent_mean_and_sample_std() {
    let rows: Vec<formats::EvalRow> = [0.70, 0.72, 0.74]
        .iter()
        .enumerate()
        .map(|(i, &f1)| formats::EvalRow {
            source: "oracle".into(),
            precision: f1,
            recall: f1,
            f1,
            seed: i as u64 + 1,
        })
        .collect();
    let t = formats::table2(&rows);
    let mut lines = t.lines();
    assert!(lines.next().unwrap().starts_with("source,n_seeds,"));
    let row = lines.next().unwrap();
    assert!(row.starts_with("oracle,3,72.00,2.00,"), "{row}");
}
