//! Corpus JSONL: one metadata line, then sentence lines, then word lines.
//!
//! ```text
//! {"schema":"eeg-corpus/1","electrode_labels":[...105],"participants":[1,2]}
//! {"kind":"sentence","sentence_id":"NR-0001","task":"NR","session":1,"tokens":["w3","w1"]}
//! {"kind":"word","participant_id":1,"sentence_id":"NR-0001","token_index":0,"et_feature":"TRT","domains":{"theta1":[...105],...}}
//! ```
//!
//! Floats are written with 17 significant digits, so a save/load round trip
//! is bit-exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use eegattn_core::corpus::{
    EegCorpus, EegWordRecord, ElectrodeVector, EtFeature, FrequencyDomain, Sentence, Session, Task,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;

pub const SCHEMA: &str = "eeg-corpus/1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Metadata {
    schema: String,
    electrode_labels: Vec<String>,
    participants: Vec<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Line {
    Sentence {
        sentence_id: String,
        task: Task,
        session: Session,
        tokens: Vec<String>,
    },
    Word {
        participant_id: u32,
        sentence_id: String,
        token_index: usize,
        et_feature: EtFeature,
        domains: BTreeMap<String, Vec<f64>>,
    },
}

/// Decimal text with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn load_corpus(path: &Path) -> Result<EegCorpus> {
    let lines = jsonl::lines(path)?;
    let Some(((first_no, first), rest)) = lines.split_first() else {
        return Ok(EegCorpus::empty());
    };
    let meta: Metadata = serde_json::from_str(first).map_err(|e| Error::parse(path, *first_no, e))?;
    if meta.schema != SCHEMA {
        return Err(Error::parse(
            path,
            *first_no,
            format!("unsupported schema {:?}, expected {SCHEMA:?}", meta.schema),
        ));
    }
    let mut sentences: Vec<Sentence> = Vec::new();
    let mut by_id: BTreeMap<String, usize> = BTreeMap::new();
    let mut records = Vec::new();
    for (n, line) in rest {
        let parsed: Line = serde_json::from_str(line).map_err(|e| Error::parse(path, *n, e))?;
        match parsed {
            Line::Sentence {
                sentence_id,
                task,
                session,
                tokens,
            } => {
                if by_id.insert(sentence_id.clone(), sentences.len()).is_some() {
                    return Err(Error::parse(path, *n, format!("duplicate sentence {sentence_id}")));
                }
                sentences.push(Sentence {
                    sentence_id,
                    task,
                    session,
                    tokens,
                });
            }
            Line::Word {
                participant_id,
                sentence_id,
                token_index,
                et_feature,
                mut domains,
            } => {
                let Some(&si) = by_id.get(&sentence_id) else {
                    return Err(Error::parse(
                        path,
                        *n,
                        format!("word references unknown sentence {sentence_id}"),
                    ));
                };
                let s = &sentences[si];
                if let Some(key) = domains.keys().find(|k| FrequencyDomain::from_key(k).is_none()) {
                    return Err(Error::parse(path, *n, format!("unknown domain key {key:?}")));
                }
                let mut vectors = Vec::with_capacity(8);
                for d in FrequencyDomain::ALL {
                    let values = domains
                        .remove(d.key())
                        .ok_or_else(|| Error::parse(path, *n, format!("missing domain {}", d.key())))?;
                    let v = ElectrodeVector::new(values)
                        .map_err(|e| Error::parse(path, *n, format!("domain {}: {e}", d.key())))?;
                    vectors.push(v);
                }
                records.push(EegWordRecord {
                    participant_id,
                    task: s.task,
                    session: s.session,
                    sentence_id,
                    token_index,
                    et_feature,
                    domains: vectors.try_into().expect("eight domains"),
                });
            }
        }
    }
    Ok(EegCorpus::new(meta.electrode_labels, meta.participants, sentences, records)?)
}

pub fn save_corpus(corpus: &EegCorpus, path: &Path) -> Result<()> {
    let labels = corpus.electrode_labels().to_vec();
    // validate before touching the file
    for r in corpus.records() {
        for d in FrequencyDomain::ALL {
            if let Some(j) = r.domain(d).iter().position(|v| !v.is_finite()) {
                return Err(Error::Format(format!(
                    "non-finite value in record (sentence {}, token {}, participant {}), domain {}, electrode {j}",
                    r.sentence_id,
                    r.token_index,
                    r.participant_id,
                    d.key()
                )));
            }
        }
    }
    let json = |e: serde_json::Error| Error::Format(e.to_string());
    let mut w = jsonl::create(path)?;
    let meta = Metadata {
        schema: SCHEMA.into(),
        electrode_labels: labels,
        participants: corpus.participants().to_vec(),
    };
    let mut out = serde_json::to_string(&meta).map_err(json)?;
    out.push('\n');
    for s in corpus.sentences() {
        out.push_str(&format!(
            "{{\"kind\":\"sentence\",\"sentence_id\":{},\"task\":\"{}\",\"session\":{},\"tokens\":{}}}\n",
            serde_json::to_string(&s.sentence_id).map_err(json)?,
            s.task.name(),
            s.session.number(),
            serde_json::to_string(&s.tokens).map_err(json)?,
        ));
    }
    w.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))?;
    let mut line = String::new();
    for r in corpus.records() {
        line.clear();
        write!(
            line,
            "{{\"kind\":\"word\",\"participant_id\":{},\"sentence_id\":{},\"token_index\":{},\"et_feature\":\"{}\",\"domains\":{{",
            r.participant_id,
            serde_json::to_string(&r.sentence_id).map_err(json)?,
            r.token_index,
            r.et_feature.name(),
        )
        .expect("string write");
        for (i, d) in FrequencyDomain::ALL.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            write!(line, "\"{}\":[", d.key()).expect("string write");
            for (j, v) in r.domain(*d).iter().enumerate() {
                if j > 0 {
                    line.push(',');
                }
                line.push_str(&fmt_f64(*v));
            }
            line.push(']');
        }
        line.push_str("}}\n");
        w.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
