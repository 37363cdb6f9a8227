use std::collections::{BTreeMap, BTreeSet};

use eegattn_core::attnscore::{oracle_scores, DEFAULT_E};
use eegattn_core::corpus::{generate_synthetic, EegCorpus, ElectrodeVector, FrequencyBand, FrequencyDomain, SyntheticSpec};
use eegattn_core::reduction::{reduce, split_ids, ReductionConfig, DEFAULT_RATIOS};
use eegattn_core::rng;
use eegattn_core::seqlabel::{train_multitask, SeqModelConfig};
use eegattn_core::taskclf::{assemble_dataset, InputLayout};
use eegattn_core::tasksets::{generate_task, SyntheticTaskSpec};

fn spec(seed: u64, bands: &[FrequencyBand]) -> SyntheticSpec {
    SyntheticSpec {
        n_sentences_nr: 12,
        n_sentences_ar: 12,
        n_participants: 2,
        informative_electrodes: vec![10, 11, 12],
        band_shift: bands.iter().map(|&b| (b, 1.0)).collect(),
        seed,
        ..SyntheticSpec::default()
    }
}

/// Adds a huge AR-only offset at electrode 50 to every dev and test record.
fn poison_held_out(corpus: &EegCorpus, held_out: &BTreeSet<String>) -> EegCorpus {
    let records = corpus
        .records()
        .iter()
        .cloned()
        .map(|mut r| {
            if held_out.contains(&r.sentence_id) && r.task.label() == 1 {
                for d in FrequencyDomain::ALL {
                    let mut v = r.domain(d).to_vec();
                    v[50] += 100.0;
                    r.domains[d.index()] = ElectrodeVector::new(v).unwrap();
                }
            }
            r
        })
        .collect();
    EegCorpus::new(
        corpus.electrode_labels().to_vec(),
        corpus.participants().to_vec(),
        corpus.sentences().to_vec(),
        records,
    )
    .unwrap()
}

#[test]
fn selection_never_sees_held_out_sentences() {
    let corpus = generate_synthetic(&spec(11, &[FrequencyBand::Theta])).unwrap();
    let config = ReductionConfig { n_trees: 20, bands: vec![FrequencyBand::Theta], seed: 3, ..ReductionConfig::default() };
    let ids = split_ids(&corpus, DEFAULT_RATIOS, rng::sub_seed(config.seed, "split")).unwrap();
    let held_out: BTreeSet<String> = ids.dev.iter().chain(&ids.test).cloned().collect();
    let poisoned = poison_held_out(&corpus, &held_out);
    let (clean, _) = reduce(&corpus, &config).unwrap();
    let (dirty, _) = reduce(&poisoned, &config).unwrap();
    assert_ne!(corpus, poisoned);
    assert_eq!(clean, dirty);

    // control: the same poison on training sentences is picked up at once
    let train: BTreeSet<String> = ids.train.iter().cloned().collect();
    let (seen, _) = reduce(&poison_held_out(&corpus, &train), &config).unwrap();
    let imp50 = |sel: &eegattn_core::reduction::SelectionReport| sel.band(FrequencyBand::Theta).unwrap().all_importances[50];
    assert!(imp50(&seen) > 2.0 * imp50(&clean), "{} vs {}", imp50(&seen), imp50(&clean));
    assert!(seen.band(FrequencyBand::Theta).unwrap().indices.contains(&50));
}

#[test]
fn concatenated_width_is_three_k() {
    let corpus = generate_synthetic(&spec(2, &FrequencyBand::DEFAULT)).unwrap();
    for k in [5, 15, 30] {
        let config = ReductionConfig { k, n_trees: 5, seed: 1, ..ReductionConfig::default() };
        let (_, emb) = reduce(&corpus, &config).unwrap();
        let data = assemble_dataset(&emb, corpus.sentences(), config.label, InputLayout::Concat, true).unwrap();
        assert!(data.iter().all(|s| s.input_dim == 3 * k), "k = {k}");
        let single =
            assemble_dataset(&emb, corpus.sentences(), config.label, InputLayout::Single(FrequencyBand::Alpha), false)
                .unwrap();
        assert!(single.iter().all(|s| s.input_dim == k));
        assert_eq!(single.len(), 2 * data.len());
    }
}

#[test]
fn reduction_is_a_function_of_corpus_config_and_seed() {
    let corpus = generate_synthetic(&spec(5, &[FrequencyBand::Theta])).unwrap();
    let config = ReductionConfig { n_trees: 10, seed: 9, ..ReductionConfig::default() };
    assert_eq!(reduce(&corpus, &config).unwrap(), reduce(&corpus, &config).unwrap());
}

#[test]
fn auxiliary_training_pulls_scores_toward_targets() {
    let task = generate_task(&SyntheticTaskSpec {
        n_train: 200,
        n_dev: 40,
        n_test: 40,
        vocab_size: 300,
        n_keywords: 5,
        keyword_min_rank: 30,
        seed: 4,
        ..SyntheticTaskSpec::default()
    })
    .unwrap();
    let aux = oracle_scores(&task.splits.train[..60], &task.keywords, DEFAULT_E).unwrap();
    let config = SeqModelConfig { embed_dim: 8, hidden: 6, attn_hidden: 6, epochs: 3, seed: 2, ..SeqModelConfig::default() };
    let (_, log) = train_multitask(&config, &task.splits.train, &task.splits.dev, &aux).unwrap();
    let start = log.initial_supervision_distance.unwrap();
    let end = log.epochs.last().unwrap().supervision_distance.unwrap();
    assert!(end < start, "{start} -> {end}");
    let steps: BTreeMap<usize, usize> = log.epochs.iter().map(|e| (e.epoch, e.aux_steps)).collect();
    assert!(steps.values().all(|&s| s == 200usize.div_ceil(config.batch)));
}
