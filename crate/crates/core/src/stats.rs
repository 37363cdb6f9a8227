//! Per-electrode NR/AR comparison: band binning and a bootstrap Welch
//! t-test under the pooled null.

use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{EegCorpus, EegWordRecord, EtFeature, FrequencyBand, Task, N_ELECTRODES};
use crate::error::{Error, Result};
use crate::math;
use crate::rng::{self, Rng};

pub const DEFAULT_ALPHA: f64 = 0.01;
pub const DEFAULT_N_BOOT: usize = 2000;
pub const MIN_N_BOOT: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "AR_higher")]
    ArHigher,
    #[serde(rename = "NR_higher")]
    NrHigher,
    #[serde(rename = "none")]
    None,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::ArHigher => "AR_higher",
            Direction::NrHigher => "NR_higher",
            Direction::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectrodeTestResult {
    pub electrode_index: usize,
    pub band: FrequencyBand,
    pub mean_nr: f64,
    pub mean_ar: f64,
    /// Welch t of AR against NR; positive when AR is higher.
    pub t_stat: f64,
    pub p_value: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t_stat: f64,
    pub p_value: f64,
}

/// Per-word band vectors: the elementwise mean of the band's two domains.
pub fn band_power(records: &[&EegWordRecord], band: FrequencyBand) -> Result<Vec<Vec<f64>>> {
    let first = records.first().ok_or(Error::Empty("record set"))?;
    if records.iter().any(|r| r.et_feature != first.et_feature) {
        return Err(Error::InvalidParameter(
            "records mix eye-tracking features".into(),
        ));
    }
    Ok(records.iter().map(|r| r.band_power(band)).collect())
}

/// Welch's unequal-variance t statistic `(mean(x) - mean(y)) / se`.
/// Zero standard error yields 0 for equal means and a signed infinity
/// otherwise.
pub fn welch_t(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (math::mean(x), math::mean(y));
    let se2 = math::variance(x) / x.len() as f64 + math::variance(y) / y.len() as f64;
    t_from_moments(mx - my, se2)
}

fn t_from_moments(diff: f64, se2: f64) -> f64 {
    if se2 > 0.0 {
        diff / math::sqrt(se2)
    } else if diff == 0.0 {
        0.0
    } else if diff > 0.0 {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    }
}

/// Lexicographic order on (length, values) so a pair has a canonical
/// orientation independent of argument order.
fn canonical_order(x: &[f64], y: &[f64]) -> Ordering {
    x.len().cmp(&y.len()).then_with(|| {
        x.iter()
            .zip(y)
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

/// Mean and unbiased variance of a bootstrap resample, drawn without
/// materialising it.
fn resample_moments(src: &[f64], rng: &mut Rng) -> (f64, f64) {
    let n = src.len();
    let (mut mean, mut m2) = (0.0, 0.0);
    for i in 0..n {
        let v = src[rng.random_range(0..n)];
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    (mean, m2 / (n as f64 - 1.0))
}

/// Two-sided bootstrap Welch t-test.
///
/// Both samples are shifted to the pooled mean, each is resampled with
/// replacement `n_boot` times, and the p-value is the add-one estimate
/// `(c + 1) / (n_boot + 1)` where `c` counts `|t*| >= |t_obs|`. The
/// resampler runs on the canonically ordered pair, so swapping `x` and `y`
/// negates `t_stat` and leaves `p_value` bit-identical.
pub fn bootstrap_ttest(x: &[f64], y: &[f64], n_boot: usize, seed: u64) -> Result<TTest> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "t-test needs at least 2 samples per group, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if n_boot < MIN_N_BOOT {
        return Err(Error::InvalidParameter(format!(
            "n_boot must be at least {MIN_N_BOOT}, got {n_boot}"
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "t-test sample".into(),
        });
    }
    let swapped = canonical_order(x, y) == Ordering::Greater;
    let (a, b) = if swapped { (y, x) } else { (x, y) };
    let t_ab = welch_t(a, b);
    let t_stat = if swapped { -t_ab } else { t_ab };
    let min_p = 1.0 / (n_boot as f64 + 1.0);

    let (va, vb) = (math::variance(a), math::variance(b));
    if va == 0.0 && vb == 0.0 {
        let p_value = if t_ab == 0.0 { 1.0 } else { min_p };
        return Ok(TTest { t_stat, p_value });
    }

    let (ma, mb) = (math::mean(a), math::mean(b));
    let pooled = (ma * a.len() as f64 + mb * b.len() as f64) / (a.len() + b.len()) as f64;
    let a0: Vec<f64> = a.iter().map(|v| v - ma + pooled).collect();
    let b0: Vec<f64> = b.iter().map(|v| v - mb + pooled).collect();
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let threshold = t_ab.abs();
    let mut rng = rng::indexed(seed, "stats/bootstrap", 0);
    let mut count = 0usize;
    for _ in 0..n_boot {
        let (ra, sa) = resample_moments(&a0, &mut rng);
        let (rb, sb) = resample_moments(&b0, &mut rng);
        let t = t_from_moments(ra - rb, sa / na + sb / nb);
        if t.abs() >= threshold {
            count += 1;
        }
    }
    Ok(TTest {
        t_stat,
        p_value: (count as f64 + 1.0) / (n_boot as f64 + 1.0),
    })
}

/// Bootstrap test of every electrode in `band` between AR and NR word
/// records (TRT only), pooling words across participants. Each electrode
/// uses the derived seed `seed ^ electrode_index` in a band-specific stream.
pub fn electrode_map(
    corpus: &EegCorpus,
    band: FrequencyBand,
    alpha: f64,
    n_boot: usize,
    seed: u64,
) -> Result<Vec<ElectrodeTestResult>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must be in (0,1), got {alpha}")));
    }
    let mut ar: Vec<Vec<f64>> = Vec::new();
    let mut nr: Vec<Vec<f64>> = Vec::new();
    for r in corpus.records().iter().filter(|r| r.et_feature == EtFeature::Trt) {
        match r.task {
            Task::AR => ar.push(r.band_power(band)),
            Task::NR => nr.push(r.band_power(band)),
        }
    }
    if nr.is_empty() {
        return Err(Error::MissingTask("NR"));
    }
    if ar.is_empty() {
        return Err(Error::MissingTask("AR"));
    }
    let band_seed = rng::sub_seed(seed, band.name());
    (0..N_ELECTRODES)
        .map(|j| {
            let x: Vec<f64> = ar.iter().map(|v| v[j]).collect();
            let y: Vec<f64> = nr.iter().map(|v| v[j]).collect();
            let test = bootstrap_ttest(&x, &y, n_boot, band_seed ^ j as u64)?;
            let (mean_ar, mean_nr) = (math::mean(&x), math::mean(&y));
            let direction = if test.p_value >= alpha {
                Direction::None
            } else if mean_ar > mean_nr {
                Direction::ArHigher
            } else if mean_ar < mean_nr {
                Direction::NrHigher
            } else {
                Direction::None
            };
            Ok(ElectrodeTestResult {
                electrode_index: j,
                band,
                mean_nr,
                mean_ar,
                t_stat: test.t_stat,
                p_value: test.p_value,
                direction,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand_distr::{Distribution, Normal};

    fn normal_sample(n: usize, mu: f64, seed: u64) -> Vec<f64> {
        let mut r = rng::stream(seed, "test/normal");
        let d = Normal::new(mu, 1.0).unwrap();
        (0..n).map(|_| d.sample(&mut r)).collect()
    }

    #[test]
    fn welch_matches_hand_computation() {
        // x: mean 2, var 1; y: mean 5, var 1; se = sqrt(1/3 + 1/3)
        let t = welch_t(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]);
        assert!((t - (-3.0 / math::sqrt(2.0 / 3.0))).abs() < 1e-12);
    }

    #[test]
    fn identical_samples_give_zero_t_and_large_p() {
        let x = vec![1.0, 2.5, 3.0, 0.5];
        let r = bootstrap_ttest(&x, &x, 2000, 1).unwrap();
        assert_eq!(r.t_stat, 0.0);
        assert!(r.p_value >= 0.5);
    }

    #[test]
    fn swapping_negates_t_and_keeps_p() {
        let x = normal_sample(30, 0.0, 1);
        let y = normal_sample(40, 0.4, 2);
        let a = bootstrap_ttest(&x, &y, 1000, 9).unwrap();
        let b = bootstrap_ttest(&y, &x, 1000, 9).unwrap();
        assert_eq!(a.t_stat, -b.t_stat);
        assert_eq!(a.p_value.to_bits(), b.p_value.to_bits());
    }

    #[test]
    fn degenerate_constant_samples() {
        let r = bootstrap_ttest(&[2.0, 2.0], &[2.0, 2.0, 2.0], 1000, 0).unwrap();
        assert_eq!((r.t_stat, r.p_value), (0.0, 1.0));
        let r = bootstrap_ttest(&[3.0, 3.0], &[2.0, 2.0], 1000, 0).unwrap();
        assert_eq!(r.t_stat, f64::INFINITY);
        assert_eq!(r.p_value, 1.0 / 1001.0);
    }

    #[test]
    fn preconditions() {
        assert!(bootstrap_ttest(&[1.0], &[1.0, 2.0], 1000, 0).is_err());
        assert!(bootstrap_ttest(&[1.0, 2.0], &[1.0, 2.0], 999, 0).is_err());
        assert_eq!(band_power(&[], FrequencyBand::Theta), Err(Error::Empty("record set")));
    }

    #[test]
    fn shifted_normals_are_detected() {
        let mut hits = 0;
        for trial in 0..20 {
            let x = normal_sample(200, 0.0, 2 * trial);
            let y = normal_sample(200, 1.0, 2 * trial + 1);
            let r = bootstrap_ttest(&x, &y, 2000, trial).unwrap();
            assert!(r.p_value >= 1.0 / 2001.0 && r.p_value <= 1.0);
            if r.p_value < 0.01 {
                hits += 1;
            }
        }
        assert_eq!(hits, 20);
    }
}
