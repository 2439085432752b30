use std::collections::BTreeSet;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use mcnam::analysis::fit_pca;
use mcnam::clocked::{ClockedNetwork, ClockedSpec, MarkedSequence};
use mcnam::harness::{derive_seed, morphology_corpus, stat, suite_syllables};
use mcnam::io::{metrics_csv, metrics_rows, CorpusFile};
use mcnam::morphogen::{build_pair_corpus, PairTask, RuleKind};
use mcnam::net::{Network, NetworkSpec, TrainConfig};
use mcnam::phonology::{build_inventory, InventoryKind};
use mcnam::trainer::{classify_one_hot, train, TrainSet};

fn morphology_rule() -> impl Strategy<Value = RuleKind> {
    prop::sample::select(
        RuleKind::ALL
            .iter()
            .copied()
            .filter(|r| r.pair_task().is_none())
            .collect::<Vec<_>>(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn corpus_splits_partition_every_word(rule in morphology_rule(), seed in any::<u64>()) {
        let inv = build_inventory(rule.inventory_kind()).unwrap();
        let c = morphology_corpus(rule, &inv, seed).unwrap();
        let total = c.roots.len() * c.rule.inflection_combinations().len();
        prop_assert_eq!(c.train.len() + c.test.len(), total);
        prop_assert_eq!(c.train.len(), (2 * total + 1) / 3);
        let keys: BTreeSet<_> = c.all_words().map(|w| (w.root_id, w.inflection_ids.clone())).collect();
        prop_assert_eq!(keys.len(), total);
        for w in c.all_words() {
            for s in &w.surface {
                prop_assert!(inv.contains(s), "{} not in inventory", s);
            }
        }
        prop_assert_eq!(c, morphology_corpus(rule, &inv, seed).unwrap());
    }

    #[test]
    fn corpus_files_round_trip(rule in morphology_rule(), seed in any::<u64>()) {
        let inv = build_inventory(rule.inventory_kind()).unwrap();
        let c = morphology_corpus(rule, &inv, seed).unwrap();
        let file = CorpusFile::from_corpus(&c);
        let back = CorpusFile::from_json(&file.to_json()).unwrap();
        prop_assert_eq!(&back, &file);
        prop_assert_eq!(back.to_corpus().unwrap(), c);
    }

    #[test]
    fn pair_corpora_are_balanced_labelled_and_disjoint(
        onset in any::<bool>(),
        half_train in 1usize..40,
        half_test in 1usize..15,
        seed in any::<u64>(),
    ) {
        let task = if onset { PairTask::Onset } else { PairTask::Rime };
        let inv = build_inventory(InventoryKind::Reduplication).unwrap();
        let syl = suite_syllables(&inv, None);
        let pc = build_pair_corpus(&syl, task, 2 * half_train, 2 * half_test, seed).unwrap();
        prop_assert_eq!(pc.train.len(), 2 * half_train);
        prop_assert_eq!(pc.test.len(), 2 * half_test);
        prop_assert_eq!(pc.train.iter().filter(|p| p.label).count(), half_train);
        prop_assert_eq!(pc.test.iter().filter(|p| p.label).count(), half_test);
        let mut seen = BTreeSet::new();
        for p in pc.train.iter().chain(&pc.test) {
            prop_assert_eq!(p.label, task.label(&p.first, &p.second));
            prop_assert!(seen.insert((p.first.text(), p.second.text())), "duplicate pair");
        }
    }

    #[test]
    fn derived_seeds_depend_on_every_part(master in any::<u64>(), a in "[a-z]{1,8}", b in "[a-z]{1,8}") {
        let s = derive_seed(master, &[&a, &b]);
        prop_assert_eq!(s, derive_seed(master, &[&a, &b]));
        prop_assert_ne!(s, derive_seed(master.wrapping_add(1), &[&a, &b]));
        // the separator keeps ("ab", "c") apart from ("a", "bc")
        let joined = format!("{a}{b}");
        prop_assert_ne!(s, derive_seed(master, &[&joined]));
    }

    #[test]
    fn stat_mean_lies_within_range(values in prop::collection::vec(-1e3f64..1e3, 1..30)) {
        let s = stat(&values).unwrap();
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(s.mean >= lo - 1e-9 && s.mean <= hi + 1e-9);
        prop_assert!(s.std >= 0.0);
        prop_assert_eq!(s.n, values.len());
    }

    #[test]
    fn network_outputs_are_probabilities(seed in any::<u64>(), x in prop::collection::vec(0.0f64..1.0, 4)) {
        let spec = NetworkSpec::modular(4, 5, &[("tense", 3)], 3, 2);
        let net = Network::new(spec, seed).unwrap();
        let phones = vec![x.clone(), x.iter().map(|v| 1.0 - v).collect()];
        let st = net.infer(&phones).unwrap();
        for y in st.outputs.iter().flatten() {
            prop_assert!(*y > 0.0 && *y < 1.0);
        }
        prop_assert_eq!(st, net.infer(&phones).unwrap());
    }

    #[test]
    fn one_hot_classification_picks_the_maximum(y in prop::collection::vec(0.0f64..1.0, 2..12)) {
        let k = classify_one_hot(&y).unwrap();
        prop_assert!(y.iter().all(|&v| v <= y[k] + 1e-12));
    }

    #[test]
    fn pca_projection_reconstructs_in_full_rank(
        rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 4..20),
    ) {
        prop_assume!(stat(&rows.iter().map(|r| r[0]).collect::<Vec<_>>()).unwrap().std > 1e-3);
        let pca = fit_pca(&rows).unwrap();
        let shares: Vec<f64> = (0..3).map(|k| pca.variance_share(k)).collect();
        prop_assert!(shares.windows(2).all(|w| w[0] + 1e-12 >= w[1]));
        assert_abs_diff_eq!(shares.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        for r in &rows {
            let back = pca.reconstruct(&pca.project(r, 3));
            for (a, b) in back.iter().zip(r) {
                assert_abs_diff_eq!(*a, *b, epsilon = 1e-8);
            }
        }
        for c in pca.project(&pca.mean, 3) {
            assert_abs_diff_eq!(c, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn clocked_module_steps_once_per_syllable(picks in prop::collection::vec(0usize..225, 1..6), seed in 0u64..50) {
        let inv = build_inventory(InventoryKind::Reduplication).unwrap();
        let syl = suite_syllables(&inv, None);
        let word: Vec<_> = picks.iter().map(|&i| syl[i % syl.len()].clone()).collect();
        let spec = ClockedSpec {
            input_width: inv.feature_count(),
            segment_hidden: 4,
            encoder_hidden: 3,
            syllable_hidden: 3,
            word_width: 1,
            weight_init_range: 0.5,
        };
        let net = ClockedNetwork::new(spec, seed).unwrap();
        let seq = MarkedSequence::from_syllables(&inv, &word).unwrap();
        let tr = net.forward_clocked(&seq).unwrap();
        prop_assert_eq!(tr.syllable_steps, word.len());
        prop_assert_eq!(tr.segment_steps, seq.phones.len() + 1);
        prop_assert!(tr.syllable_contexts.iter().flatten().all(|&v| v == 0.0));
        for i in 0..word.len() {
            for j in 0..word.len() {
                if word[i] == word[j] {
                    prop_assert_eq!(&tr.syllable_inputs[i], &tr.syllable_inputs[j]);
                }
            }
        }
    }
}

#[test]
fn metrics_table_has_two_rows_per_epoch() {
    let inv = build_inventory(InventoryKind::Standard).unwrap();
    let c = morphology_corpus(RuleKind::Prefix, &inv, 2).unwrap();
    let set = TrainSet::from_corpus(&c, &inv, true).unwrap();
    let spec = NetworkSpec::modular(inv.feature_count(), c.root_count(), &[("tense", 2)], 6, 6);
    let cfg = TrainConfig {
        epochs: 3,
        seed: 1,
        ..TrainConfig::default()
    };
    let out = train(&set, &spec, &cfg).unwrap();
    let rows = metrics_rows("s", "prefix", 1, &out.history);
    assert_eq!(rows.len(), 6);
    let csv = metrics_csv(&rows).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(csv.lines().nth(1).unwrap().starts_with("s,prefix,1,1,train,"));
    assert!(csv.lines().nth(2).unwrap().starts_with("s,prefix,1,1,test,"));
}
