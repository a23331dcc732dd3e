// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::Path;

use proptest::prelude::*;

use tal_core::ingest::{
    load_dataset, read_array, synthesize_channel, write_dataset, AnomalyInterval, AnomalyKind, ArrayFormat,
    BehaviorKind, PlantedAnomaly, TelemetryChannel, TEST_DIR,
};
use tal_core::signature::compute_signature;

fn corpus(n: usize, seed: u64) -> Vec<TelemetryChannel> {
    (0..n)
        .map(|i| {
            let kind = BehaviorKind::ALL[i % 5];
            let planted: Vec<PlantedAnomaly> = (0..i % 3)
                .map(|j| PlantedAnomaly {
                    interval: AnomalyInterval {
                        start: 50 + 120 * j,
                        end: 80 + 120 * j,
                        kind: if j % 2 == 0 {
                            AnomalyKind::Point
                        } else {
                            AnomalyKind::Contextual
                        },
                    },
                    magnitude: 0.4,
                })
                .collect();
            synthesize_channel(kind, 300, 400, 2, &planted, seed + i as u64).unwrap()
        })
        .collect()
}

/// Recounts test rows and labels straight from the files on disk.
fn recount(root: &Path) -> (usize, usize) {
    let mut values = 0;
    for entry in std::fs::read_dir(root.join(TEST_DIR)).unwrap() {
        values += read_array(&entry.unwrap().path()).unwrap().nrows();
    }
    let table = std::fs::read_to_string(root.join("labeled_anomalies.csv")).unwrap();
    let sequences = table
        .lines()
        .skip(1)
        .map(|l| l.matches('[').count().saturating_sub(2))
        .sum();
    (values, sequences)
}

#[test]
fn written_dataset_reloads_exactly() {
    let channels = corpus(7, 40);
    for format in [ArrayFormat::Npy, ArrayFormat::Csv] {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &channels, format).unwrap();
        let (manifest, loaded) = load_dataset(dir.path()).unwrap();
        assert_eq!(loaded.len(), 7);
        for c in &channels {
            let back = loaded.iter().find(|l| l.id == c.id).unwrap();
            assert_eq!(back.train, c.train, "{format:?}");
            assert_eq!(back.test, c.test, "{format:?}");
            if c.labels.is_empty() {
                assert!(back.labels.is_empty());
            } else {
                assert_eq!(back.labels, c.labels);
                assert_eq!(back.spacecraft, c.spacecraft);
            }
        }
        let (values, sequences) = recount(dir.path());
        assert_eq!(manifest.total_test_values, values);
        assert_eq!(manifest.total_anomaly_sequences, sequences);
        assert_eq!(manifest.point_anomalies() + manifest.contextual_anomalies(), sequences);
    }
}

#[test]
fn missing_splits_and_empty_roots() {
    let dir = tempfile::tempdir().unwrap();
    assert!(load_dataset(dir.path()).is_err());
    std::fs::create_dir_all(dir.path().join("train")).unwrap();
    std::fs::create_dir_all(dir.path().join("test")).unwrap();
    let (manifest, channels) = load_dataset(dir.path()).unwrap();
    assert!(channels.is_empty());
    assert_eq!(manifest.total_test_values, 0);
}

#[test]
fn flat_generator_is_constant_in_training() {
    let c = synthesize_channel(BehaviorKind::Flat, 1000, 1000, 2, &[], 7).unwrap();
    let s = compute_signature(&c.train_target().to_vec()).unwrap();
    assert_eq!(s.std, 0.0);
    assert_eq!(c.dims(), 3);
}

#[test]
fn spiky_shift_moves_the_window_mean() {
    let planted = PlantedAnomaly {
        interval: AnomalyInterval::new(500, 550),
        magnitude: 0.8,
    };
    let clean = synthesize_channel(BehaviorKind::Spiky, 1000, 1000, 2, &[], 3).unwrap();
    let shifted = synthesize_channel(BehaviorKind::Spiky, 1000, 1000, 2, &[planted], 3).unwrap();
    let mean = |c: &TelemetryChannel| c.test_target().slice(ndarray::s![500..=550]).mean().unwrap();
    assert!(((mean(&shifted) - mean(&clean)).abs() - 0.8).abs() < 1e-9);
    assert_eq!(shifted.train, clean.train);
    assert_eq!(shifted.labels, vec![planted.interval]);
}

#[test]
fn unknown_kind_is_rejected() {
    assert!("wobbly".parse::<BehaviorKind>().is_err());
    assert_eq!("Spiky".parse::<BehaviorKind>().unwrap(), BehaviorKind::Spiky);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn synthesis_is_reproducible(kind in 0usize..5, seed in any::<u64>(), context in 0usize..4) {
        let kind = BehaviorKind::ALL[kind];
        let a = synthesize_channel(kind, 300, 300, context, &[], seed).unwrap();
        let b = synthesize_channel(kind, 300, 300, context, &[], seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.dims(), context + 1);
    }

    #[test]
    fn manifest_counts_match_the_corpus(n in 1usize..12, seed in 0u64..1000) {
        let channels = corpus(n, seed);
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &channels, ArrayFormat::Npy).unwrap();
        let (manifest, _) = load_dataset(dir.path()).unwrap();
        prop_assert_eq!(manifest.channels.len(), n);
        prop_assert_eq!(manifest.total_anomaly_sequences, channels.iter().map(|c| c.labels.len()).sum::<usize>());
        prop_assert_eq!(manifest.total_test_values, 400 * n);
    }
}
