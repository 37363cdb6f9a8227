//! Word-aligned EEG reading corpus: frequency domains and bands, word
//! records, validation, and a seeded synthetic generator.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{Distribution, Normal, Zipf};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Electrodes left on the 128-channel cap after 23 were excluded.
pub const N_ELECTRODES: usize = 105;

/// One of the eight recorded EEG frequency domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrequencyDomain {
    Theta1,
    Theta2,
    Alpha1,
    Alpha2,
    Beta1,
    Beta2,
    Gamma1,
    Gamma2,
}

impl FrequencyDomain {
    pub const ALL: [FrequencyDomain; 8] = [
        Self::Theta1,
        Self::Theta2,
        Self::Alpha1,
        Self::Alpha2,
        Self::Beta1,
        Self::Beta2,
        Self::Gamma1,
        Self::Gamma2,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn key(self) -> &'static str {
        match self {
            Self::Theta1 => "theta1",
            Self::Theta2 => "theta2",
            Self::Alpha1 => "alpha1",
            Self::Alpha2 => "alpha2",
            Self::Beta1 => "beta1",
            Self::Beta2 => "beta2",
            Self::Gamma1 => "gamma1",
            Self::Gamma2 => "gamma2",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.key() == key)
    }

    /// Recorded range in Hz.
    pub fn hz_range(self) -> (f64, f64) {
        match self {
            Self::Theta1 => (4.0, 6.0),
            Self::Theta2 => (6.5, 8.0),
            Self::Alpha1 => (8.5, 10.0),
            Self::Alpha2 => (10.5, 13.0),
            Self::Beta1 => (13.5, 18.0),
            Self::Beta2 => (18.5, 30.0),
            Self::Gamma1 => (30.5, 40.0),
            Self::Gamma2 => (40.0, 49.5),
        }
    }

    pub fn band(self) -> FrequencyBand {
        FrequencyBand::ALL[self.index() / 2]
    }
}

/// A general frequency band, binned from two adjacent domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrequencyBand {
    Theta,
    Alpha,
    Beta,
    Gamma,
}

impl FrequencyBand {
    pub const ALL: [FrequencyBand; 4] = [Self::Theta, Self::Alpha, Self::Beta, Self::Gamma];
    /// Bands used for embeddings; gamma is left out.
    pub const DEFAULT: [FrequencyBand; 3] = [Self::Theta, Self::Alpha, Self::Beta];

    pub fn domains(self) -> [FrequencyDomain; 2] {
        let i = self as usize * 2;
        [FrequencyDomain::ALL[i], FrequencyDomain::ALL[i + 1]]
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Theta => "theta",
            Self::Alpha => "alpha",
            Self::Beta => "beta",
            Self::Gamma => "gamma",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.name() == name)
    }

    pub fn hz_range(self) -> (f64, f64) {
        let [lo, hi] = self.domains();
        (lo.hz_range().0, hi.hz_range().1)
    }
}

/// Eye-tracking event a record's EEG is aligned to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EtFeature {
    /// First fixation duration.
    Ffd,
    /// Gaze duration.
    Gd,
    /// Go-past time.
    Gpt,
    /// Total reading time.
    Trt,
    /// Single fixation duration.
    Sfd,
}

impl EtFeature {
    pub const ALL: [EtFeature; 5] = [Self::Ffd, Self::Gd, Self::Gpt, Self::Trt, Self::Sfd];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ffd => "FFD",
            Self::Gd => "GD",
            Self::Gpt => "GPT",
            Self::Trt => "TRT",
            Self::Sfd => "SFD",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Task {
    /// Normal reading.
    NR,
    /// Annotation reading.
    AR,
}

impl Task {
    /// Binary label with AR as the positive class.
    pub fn label(self) -> u8 {
        match self {
            Task::NR => 0,
            Task::AR => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::NR => "NR",
            Task::AR => "AR",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "NR" => Some(Task::NR),
            "AR" => Some(Task::AR),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Session {
    One,
    Two,
}

impl Session {
    pub fn number(self) -> u8 {
        match self {
            Session::One => 1,
            Session::Two => 2,
        }
    }

    pub fn label(self) -> u8 {
        self.number() - 1
    }
}

impl TryFrom<u8> for Session {
    type Error = String;

    fn try_from(v: u8) -> core::result::Result<Self, String> {
        match v {
            1 => Ok(Session::One),
            2 => Ok(Session::Two),
            other => Err(format!("session must be 1 or 2, got {other}")),
        }
    }
}

impl From<Session> for u8 {
    fn from(s: Session) -> u8 {
        s.number()
    }
}

/// Power values of the 105 retained electrodes for one frequency domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ElectrodeVector(Vec<f64>);

impl ElectrodeVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != N_ELECTRODES {
            return Err(Error::ElectrodeCount {
                expected: N_ELECTRODES,
                found: values.len(),
            });
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("electrode {j}"),
            });
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for ElectrodeVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ElectrodeVector> for Vec<f64> {
    fn from(v: ElectrodeVector) -> Vec<f64> {
        v.0
    }
}

/// Default sidecar labels `E1`..`E105`.
pub fn default_electrode_labels() -> Vec<String> {
    (1..=N_ELECTRODES).map(|i| format!("E{i}")).collect()
}

/// EEG for one word occurrence, one participant and one eye-tracking
/// feature: the 8 x 105 domain/electrode powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EegWordRecord {
    pub participant_id: u32,
    pub task: Task,
    pub session: Session,
    pub sentence_id: String,
    pub token_index: usize,
    pub et_feature: EtFeature,
    /// Indexed by [`FrequencyDomain::index`].
    pub domains: [ElectrodeVector; 8],
}

impl EegWordRecord {
    pub fn domain(&self, d: FrequencyDomain) -> &[f64] {
        self.domains[d.index()].values()
    }

    /// Elementwise mean of the band's two source domains.
    pub fn band_power(&self, band: FrequencyBand) -> Vec<f64> {
        let [a, b] = band.domains();
        self.domain(a)
            .iter()
            .zip(self.domain(b))
            .map(|(x, y)| (x + y) / 2.0)
            .collect()
    }

    /// Band power at a single electrode.
    pub fn band_power_at(&self, band: FrequencyBand, electrode: usize) -> f64 {
        let [a, b] = band.domains();
        (self.domain(a)[electrode] + self.domain(b)[electrode]) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub sentence_id: String,
    pub task: Task,
    pub session: Session,
    pub tokens: Vec<String>,
}

/// A validated corpus. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct EegCorpus {
    electrode_labels: Vec<String>,
    participants: Vec<u32>,
    sentences: Vec<Sentence>,
    records: Vec<EegWordRecord>,
    index: BTreeMap<String, usize>,
}

impl EegCorpus {
    pub fn new(
        electrode_labels: Vec<String>,
        participants: Vec<u32>,
        sentences: Vec<Sentence>,
        records: Vec<EegWordRecord>,
    ) -> Result<Self> {
        if electrode_labels.len() != N_ELECTRODES {
            return Err(Error::ElectrodeCount {
                expected: N_ELECTRODES,
                found: electrode_labels.len(),
            });
        }
        let mut index = BTreeMap::new();
        for (i, s) in sentences.iter().enumerate() {
            if index.insert(s.sentence_id.clone(), i).is_some() {
                return Err(Error::DuplicateSentence(s.sentence_id.clone()));
            }
        }
        for r in &records {
            let s = index
                .get(&r.sentence_id)
                .map(|&i| &sentences[i])
                .ok_or_else(|| Error::DanglingSentence(r.sentence_id.clone()))?;
            Self::check_record(r, s)?;
        }
        Ok(Self {
            electrode_labels,
            participants,
            sentences,
            records,
            index,
        })
    }

    pub fn empty() -> Self {
        Self {
            electrode_labels: default_electrode_labels(),
            participants: Vec::new(),
            sentences: Vec::new(),
            records: Vec::new(),
            index: BTreeMap::new(),
        }
    }

    fn check_record(r: &EegWordRecord, s: &Sentence) -> Result<()> {
        if r.token_index >= s.tokens.len() {
            return Err(Error::TokenIndex {
                sentence_id: r.sentence_id.clone(),
                index: r.token_index,
                len: s.tokens.len(),
            });
        }
        if r.task != s.task || r.session != s.session {
            return Err(Error::TaskMismatch(r.sentence_id.clone()));
        }
        Ok(())
    }

    pub fn electrode_labels(&self) -> &[String] {
        &self.electrode_labels
    }

    pub fn participants(&self) -> &[u32] {
        &self.participants
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn records(&self) -> &[EegWordRecord] {
        &self.records
    }

    pub fn sentence(&self, id: &str) -> Option<&Sentence> {
        self.index.get(id).map(|&i| &self.sentences[i])
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty() && self.sentences.is_empty()
    }

    /// Sub-corpus restricted to the given sentence ids, preserving order.
    pub fn subset(&self, ids: &BTreeSet<String>) -> Self {
        let sentences: Vec<Sentence> = self
            .sentences
            .iter()
            .filter(|s| ids.contains(&s.sentence_id))
            .cloned()
            .collect();
        let records = self
            .records
            .iter()
            .filter(|r| ids.contains(&r.sentence_id))
            .cloned()
            .collect();
        let index = sentences
            .iter()
            .enumerate()
            .map(|(i, s)| (s.sentence_id.clone(), i))
            .collect();
        Self {
            electrode_labels: self.electrode_labels.clone(),
            participants: self.participants.clone(),
            sentences,
            records,
            index,
        }
    }
}

/// Parameters of the synthetic corpus generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_sentences_nr: usize,
    pub n_sentences_ar: usize,
    /// Inclusive token-count range per sentence.
    pub tokens_per_sentence: (usize, usize),
    pub n_participants: usize,
    pub informative_electrodes: Vec<usize>,
    /// Additive AR-only shift per band at the informative electrodes.
    pub band_shift: BTreeMap<FrequencyBand, f64>,
    pub noise_sigma: f64,
    /// Token texts are `w<rank>` drawn Zipf(1.1) from this many ranks.
    pub vocab_size: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_sentences_nr: 300,
            n_sentences_ar: 407,
            tokens_per_sentence: (5, 20),
            n_participants: 12,
            informative_electrodes: Vec::new(),
            band_shift: BTreeMap::new(),
            noise_sigma: 0.1,
            vocab_size: 500,
            seed: 0,
        }
    }
}

/// Baseline mean power of the generator.
pub const BASELINE_POWER: f64 = 1.0;

/// Generates a corpus where every power is `|N(1, sigma)|` and AR records get
/// `band_shift[band]` added at the informative electrodes in both source
/// domains of each shifted band. Sessions are assigned uniformly at random
/// per sentence.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<EegCorpus> {
    let n_sentences = spec.n_sentences_nr + spec.n_sentences_ar;
    if n_sentences == 0 || spec.n_participants == 0 {
        return Err(Error::Empty("synthetic corpus request"));
    }
    if let Some(&j) = spec.informative_electrodes.iter().find(|&&j| j >= N_ELECTRODES) {
        return Err(Error::ElectrodeIndex(j));
    }
    if !(spec.noise_sigma > 0.0 && spec.noise_sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise_sigma must be positive, got {}",
            spec.noise_sigma
        )));
    }
    let (min_len, max_len) = spec.tokens_per_sentence;
    if min_len == 0 || min_len > max_len {
        return Err(Error::InvalidParameter(format!(
            "invalid token range {min_len}..={max_len}"
        )));
    }
    if spec.vocab_size == 0 {
        return Err(Error::InvalidParameter("vocab_size must be positive".into()));
    }

    let mut structure = rng::stream(spec.seed, "corpus/structure");
    let zipf = Zipf::new(spec.vocab_size as f64, 1.1)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut sentences = Vec::with_capacity(n_sentences);
    for (task, n) in [(Task::NR, spec.n_sentences_nr), (Task::AR, spec.n_sentences_ar)] {
        for i in 0..n {
            let len = structure.random_range(min_len..=max_len);
            let session = if structure.random_bool(0.5) {
                Session::One
            } else {
                Session::Two
            };
            let tokens = (0..len)
                .map(|_| format!("w{}", zipf.sample(&mut structure) as u64))
                .collect();
            sentences.push(Sentence {
                sentence_id: format!("{}-{:04}", task.name(), i + 1),
                task,
                session,
                tokens,
            });
        }
    }

    let mut informative = [false; N_ELECTRODES];
    for &j in &spec.informative_electrodes {
        informative[j] = true;
    }
    let noise = Normal::new(BASELINE_POWER, spec.noise_sigma)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut power = rng::stream(spec.seed, "corpus/power");
    let participants: Vec<u32> = (1..=spec.n_participants as u32).collect();
    let mut records = Vec::new();
    for s in &sentences {
        for &p in &participants {
            for t in 0..s.tokens.len() {
                let domains = FrequencyDomain::ALL.map(|d| {
                    let shift = match s.task {
                        Task::AR => spec.band_shift.get(&d.band()).copied().unwrap_or(0.0),
                        Task::NR => 0.0,
                    };
                    let values = (0..N_ELECTRODES)
                        .map(|j| {
                            let v = noise.sample(&mut power).abs();
                            if informative[j] {
                                v + shift
                            } else {
                                v
                            }
                        })
                        .collect();
                    ElectrodeVector(values)
                });
                records.push(EegWordRecord {
                    participant_id: p,
                    task: s.task,
                    session: s.session,
                    sentence_id: s.sentence_id.clone(),
                    token_index: t,
                    et_feature: EtFeature::Trt,
                    domains,
                });
            }
        }
    }
    EegCorpus::new(default_electrode_labels(), participants, sentences, records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            n_sentences_nr: 3,
            n_sentences_ar: 3,
            tokens_per_sentence: (2, 4),
            n_participants: 2,
            informative_electrodes: alloc::vec![10, 11, 12],
            band_shift: [(FrequencyBand::Theta, 1.0)].into_iter().collect(),
            noise_sigma: 0.1,
            vocab_size: 50,
            seed,
        }
    }

    #[test]
    fn domain_table_matches_recording_setup() {
        assert_eq!(FrequencyDomain::ALL.len(), 8);
        assert_eq!(FrequencyDomain::Theta1.hz_range(), (4.0, 6.0));
        assert_eq!(FrequencyDomain::Beta2.hz_range(), (18.5, 30.0));
        assert_eq!(FrequencyDomain::Gamma2.hz_range(), (40.0, 49.5));
        assert_eq!(FrequencyBand::Theta.hz_range(), (4.0, 8.0));
        assert_eq!(FrequencyBand::Alpha.hz_range(), (8.5, 13.0));
        assert_eq!(FrequencyBand::Beta.hz_range(), (13.5, 30.0));
        assert_eq!(FrequencyBand::Gamma.hz_range(), (30.5, 49.5));
        let mut seen = BTreeSet::new();
        for b in FrequencyBand::ALL {
            for d in b.domains() {
                assert_eq!(d.band(), b);
                assert!(seen.insert(d));
            }
        }
        assert_eq!(seen.len(), 8);
        assert_eq!(EtFeature::ALL.len(), 5);
    }

    #[test]
    fn electrode_vector_rejects_wrong_length_and_nan() {
        assert_eq!(
            ElectrodeVector::new(alloc::vec![0.0; 104]),
            Err(Error::ElectrodeCount { expected: 105, found: 104 })
        );
        let mut v = alloc::vec![0.0; 105];
        v[3] = f64::NAN;
        assert!(matches!(ElectrodeVector::new(v), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn generator_is_deterministic_and_valid() {
        let a = generate_synthetic(&spec(7)).unwrap();
        let b = generate_synthetic(&spec(7)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_synthetic(&spec(8)).unwrap());
        let tokens: usize = a.sentences().iter().map(|s| s.tokens.len()).sum();
        assert_eq!(a.records().len(), tokens * 2);
        assert!(a.records().iter().all(|r| r
            .domains
            .iter()
            .all(|d| d.values().iter().all(|&v| v >= 0.0))));
    }

    #[test]
    fn shift_lands_only_on_ar_informative_theta() {
        let c = generate_synthetic(&spec(3)).unwrap();
        for r in c.records() {
            let th = r.band_power_at(FrequencyBand::Theta, 11);
            let al = r.band_power_at(FrequencyBand::Alpha, 11);
            match r.task {
                Task::AR => assert!(th > 1.5 && al < 1.5),
                Task::NR => assert!(th < 1.5),
            }
        }
    }

    #[test]
    fn generator_rejects_bad_specs() {
        let mut s = spec(1);
        s.informative_electrodes.push(105);
        assert_eq!(generate_synthetic(&s), Err(Error::ElectrodeIndex(105)));
        let mut s = spec(1);
        s.n_sentences_nr = 0;
        s.n_sentences_ar = 0;
        assert!(matches!(generate_synthetic(&s), Err(Error::Empty(_))));
        let mut s = spec(1);
        s.noise_sigma = 0.0;
        assert!(generate_synthetic(&s).is_err());
    }

    #[test]
    fn dangling_and_out_of_range_records_are_rejected() {
        let c = generate_synthetic(&spec(2)).unwrap();
        let mut r = c.records()[0].clone();
        r.sentence_id = "missing".into();
        let err = EegCorpus::new(
            default_electrode_labels(),
            c.participants().to_vec(),
            c.sentences().to_vec(),
            alloc::vec![r],
        );
        assert_eq!(err, Err(Error::DanglingSentence("missing".into())));
        let mut r = c.records()[0].clone();
        r.token_index = 99;
        let err = EegCorpus::new(
            default_electrode_labels(),
            c.participants().to_vec(),
            c.sentences().to_vec(),
            alloc::vec![r],
        );
        assert!(matches!(err, Err(Error::TokenIndex { .. })));
    }
}
