// SPDX-License-Identifier: MIT OR Apache-2.0

use nalgebra::{Matrix4, SymmetricEigen};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use tal_core::ingest::{synthesize_channel, BehaviorKind};
use tal_core::seed;
use tal_core::signature::{
    assign_cluster, compute_signature, elbow_select, kmeans_fit, knee, lloyd, nearest, pca_project, purity,
    signature_table, squared_distance, ChannelSignature, KMeansConfig, Point,
};

fn named(points: &[Point]) -> Vec<(String, ChannelSignature)> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| (format!("ch{i:03}"), ChannelSignature::from_array(*p)))
        .collect()
}

fn oracle_moments(x: &[f64]) -> [f64; 4] {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let mut m = [0.0; 5];
    for v in x {
        let d = v - mean;
        for (p, slot) in m.iter_mut().enumerate() {
            *slot += d.powi(p as i32) / n;
        }
    }
    if m[2] == 0.0 {
        return [mean, 0.0, 0.0, 0.0];
    }
    [
        mean,
        m[2].sqrt(),
        m[3] / (m[2] * m[2].sqrt()),
        m[4] / (m[2] * m[2]) - 3.0,
    ]
}

#[test]
fn constant_and_two_level_series() {
    let s = compute_signature(&[5.0; 4]).unwrap();
    assert_eq!(s.to_array(), [5.0, 0.0, 0.0, 0.0]);

    let alternating: Vec<f64> = (0..200).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 }).collect();
    let s = compute_signature(&alternating).unwrap();
    assert_eq!(s.mean, 0.0);
    assert!((s.std - 1.0).abs() < 1e-15);
    assert!(s.skewness.abs() < 1e-15);
    assert!((s.kurtosis + 2.0).abs() < 1e-12);
}

#[test]
fn invalid_series_are_rejected() {
    assert!(compute_signature(&[1.0]).is_err());
    assert!(compute_signature(&[1.0, f64::NAN, 2.0]).is_err());
    assert!(compute_signature(&[1.0, f64::INFINITY]).is_err());
}

#[test]
fn seeded_series_match_direct_summation() {
    let mut rng = seed::rng(200);
    let x: Vec<f64> = (0..200).map(|_| rng.random::<f64>().exp()).collect();
    let got = compute_signature(&x).unwrap().to_array();
    for (a, b) in got.iter().zip(oracle_moments(&x)) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
}

proptest! {
    #[test]
    fn signature_ignores_order(x in prop::collection::vec(-10.0f64..10.0, 2..300), s in any::<u64>()) {
        let mut shuffled = x.clone();
        shuffled.shuffle(&mut seed::rng(s));
        let a = compute_signature(&x).unwrap().to_array();
        let b = compute_signature(&shuffled).unwrap().to_array();
        for (u, v) in a.iter().zip(b) {
            prop_assert!((u - v).abs() <= 1e-9 * (1.0 + u.abs()));
        }
    }

    #[test]
    fn signature_entries_are_finite(x in prop::collection::vec(-1e3f64..1e3, 2..100)) {
        let s = compute_signature(&x).unwrap();
        prop_assert!(s.to_array().iter().all(|v| v.is_finite()));
        prop_assert!(s.std >= 0.0);
    }
}

#[test]
fn k1_distortion_is_total_scatter() {
    let mut rng = seed::rng(4);
    let pts: Vec<Point> = (0..30).map(|_| std::array::from_fn(|_| rng.random::<f64>())).collect();
    let model = kmeans_fit(&named(&pts), 1, 9, &KMeansConfig::default()).unwrap();
    let mean: Point = std::array::from_fn(|j| pts.iter().map(|p| p[j]).sum::<f64>() / 30.0);
    let scatter: f64 = pts.iter().map(|p| squared_distance(p, &mean)).sum();
    assert!((model.distortion - scatter).abs() < 1e-12);
}

#[test]
fn separated_groups_are_recovered_exactly() {
    let mut rng = seed::rng(12);
    let mut pts = Vec::new();
    for g in 0..2 {
        for _ in 0..15 {
            pts.push(std::array::from_fn(|_| g as f64 * 10.0 + rng.random::<f64>()));
        }
    }
    let model = kmeans_fit(&named(&pts), 2, 0, &KMeansConfig::default()).unwrap();
    let labels: Vec<usize> = (0..30).map(|i| model.assignments[&format!("ch{i:03}")]).collect();
    let truth: Vec<usize> = (0..30).map(|i| i / 15).collect();
    let flipped: Vec<usize> = truth.iter().map(|t| 1 - t).collect();
    assert!(labels == truth || labels == flipped);
}

#[test]
fn fit_errors() {
    let pts = named(&[[0.0; 4], [0.0; 4], [1.0; 4]]);
    assert!(kmeans_fit(&pts, 3, 0, &KMeansConfig::default()).is_err());
    assert!(kmeans_fit(&[], 1, 0, &KMeansConfig::default()).is_err());
    assert!(kmeans_fit(&pts, 0, 0, &KMeansConfig::default()).is_err());
    assert!(kmeans_fit(&pts, 2, 0, &KMeansConfig::default()).is_ok());
}

#[test]
fn assignment_follows_nearest_centroid() {
    let model = kmeans_fit(
        &named(&[[0.0; 4], [2.0, 0.0, 0.0, 0.0], [10.0; 4], [11.0; 4], [-9.0; 4]]),
        3,
        5,
        &KMeansConfig::default(),
    )
    .unwrap();
    for (i, c) in model.centroids.iter().enumerate() {
        assert_eq!(assign_cluster(&model, &ChannelSignature::from_array(*c)), i);
    }
    let tie = [[1.0, 0.0, 0.0, 0.0], [-1.0, 0.0, 0.0, 0.0]];
    assert_eq!(nearest(&tie, &[0.0; 4]).0, 0);

    let mut rng = seed::rng(77);
    for _ in 0..200 {
        let p: Point = std::array::from_fn(|_| rng.random_range(-12.0..12.0));
        let scan = (0..model.k)
            .min_by(|&a, &b| {
                squared_distance(&model.centroids[a], &p).total_cmp(&squared_distance(&model.centroids[b], &p))
            })
            .unwrap();
        assert_eq!(assign_cluster(&model, &ChannelSignature::from_array(p)), scan);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lloyd_descends_to_a_fixed_point(s in any::<u64>(), n in 6usize..40, k in 1usize..5) {
        let mut rng = seed::rng(s);
        let pts: Vec<Point> = (0..n).map(|_| std::array::from_fn(|_| rng.random::<f64>())).collect();
        let run = lloyd(&pts, k, s, &KMeansConfig::default());
        for w in run.trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
        let brute: f64 = pts.iter().map(|p| nearest(&run.centroids, p).1).sum();
        prop_assert!((brute - run.distortion).abs() < 1e-9);
        for (p, &l) in pts.iter().zip(&run.labels) {
            prop_assert_eq!(nearest(&run.centroids, p).0, l);
        }
    }
}

fn kind_population(seed_base: u64) -> (Vec<ChannelSignature>, Vec<BehaviorKind>) {
    let mut sigs = Vec::new();
    let mut kinds = Vec::new();
    for (k, &kind) in BehaviorKind::ALL.iter().enumerate() {
        for j in 0..20 {
            let c = synthesize_channel(
                kind,
                1000,
                300,
                1,
                &[],
                seed::derive_index(seed_base, (k * 20 + j) as u64),
            )
            .unwrap();
            sigs.push(signature_table(std::slice::from_ref(&c)).unwrap()[0].1);
            kinds.push(kind);
        }
    }
    (sigs, kinds)
}

#[test]
fn synthetic_kinds_cluster_cleanly() {
    let (sigs, kinds) = kind_population(3);
    let table: Vec<(String, ChannelSignature)> = sigs.iter().enumerate().map(|(i, s)| (format!("c{i}"), *s)).collect();
    let model = kmeans_fit(&table, 5, 1, &KMeansConfig::default()).unwrap();
    let labels: Vec<usize> = table.iter().map(|(id, _)| model.assignments[id]).collect();
    assert!(purity(&labels, &kinds) >= 0.9);

    let curve = elbow_select(&sigs, 1, 10, 1, &KMeansConfig::default()).unwrap();
    assert_eq!(curve.chosen_k, 5);
    for w in curve.entries.windows(2) {
        assert!(w[1].1 <= w[0].1 * (1.0 + 1e-9));
    }
}

#[test]
fn curve_without_a_knee_picks_smallest_interior_k() {
    let flat: Vec<(usize, f64)> = (1..=6).map(|k| (k, 4.0)).collect();
    assert_eq!(knee(&flat).unwrap(), 2);
    let straight: Vec<(usize, f64)> = (1..=6).map(|k| (k, 10.0 - k as f64)).collect();
    assert_eq!(knee(&straight).unwrap(), 2);
    assert!(knee(&flat[..2]).is_err());

    let mut rng = seed::rng(8);
    let blob: Vec<ChannelSignature> = (0..40)
        .map(|_| ChannelSignature::from_array(std::array::from_fn(|_| 1.0 + 1e-3 * rng.random::<f64>())))
        .collect();
    let curve = elbow_select(&blob, 1, 6, 0, &KMeansConfig::default()).unwrap();
    assert!((2..=5).contains(&curve.chosen_k));
    assert!(elbow_select(&blob, 1, 2, 0, &KMeansConfig::default()).is_err());
}

fn pca_oracle(pts: &[Point]) -> (Vec<f64>, Vec<[f64; 4]>) {
    let n = pts.len() as f64;
    let mean: Point = std::array::from_fn(|j| pts.iter().map(|p| p[j]).sum::<f64>() / n);
    let mut cov = Matrix4::<f64>::zeros();
    for p in pts {
        let d = nalgebra::Vector4::from_fn(|j, _| p[j] - mean[j]);
        cov += d * d.transpose();
    }
    cov /= n - 1.0;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let axes: Vec<[f64; 4]> = order[..2]
        .iter()
        .map(|&i| {
            let mut v: [f64; 4] = std::array::from_fn(|j| eig.eigenvectors[(j, i)]);
            let lead = (0..4).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs())).unwrap();
            if v[lead] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();
    let coords = pts
        .iter()
        .flat_map(|p| {
            axes.iter()
                .map(move |a| (0..4).map(|j| (p[j] - mean[j]) * a[j]).sum::<f64>())
        })
        .collect();
    (coords, axes)
}

#[test]
fn projection_matches_dense_eigensolver() {
    let mut rng = seed::rng(31);
    let scales = [3.0, 1.5, 0.7, 0.2];
    let pts: Vec<Point> = (0..60)
        .map(|_| std::array::from_fn(|j| scales[j] * (rng.random::<f64>() - 0.5)))
        .collect();
    let table = named(&pts);
    let proj = pca_project(&table).unwrap();
    let (coords, axes) = pca_oracle(&pts);
    for (c, axis) in proj.components.iter().zip(&axes) {
        for (a, b) in c.iter().zip(axis) {
            assert!((a - b).abs() < 1e-8);
        }
    }
    for (i, (id, _)) in table.iter().enumerate() {
        let (x, y) = proj.points[id];
        assert!((x - coords[2 * i]).abs() < 1e-8);
        assert!((y - coords[2 * i + 1]).abs() < 1e-8);
    }
    assert!(proj.explained_variance[0] >= proj.explained_variance[1]);
    let dot: f64 = (0..4).map(|j| proj.components[0][j] * proj.components[1][j]).sum();
    assert!(dot.abs() < 1e-12);
}

#[test]
fn planar_data_is_fully_explained_and_duplicates_coincide() {
    let mut rng = seed::rng(5);
    let mut pts: Vec<Point> = (0..20).map(|_| [rng.random(), 0.0, rng.random(), 0.0]).collect();
    pts.push(pts[0]);
    let table = named(&pts);
    let proj = pca_project(&table).unwrap();
    let ratio: f64 = proj.explained_variance_ratio.iter().sum();
    assert!((ratio - 1.0).abs() < 1e-12);
    assert_eq!(proj.points["ch000"], proj.points["ch020"]);
}

#[test]
fn identical_points_have_no_projection() {
    let err = pca_project(&named(&[[1.0; 4]; 5])).unwrap_err();
    assert!(err.to_string().contains("no variance to project"));
}
