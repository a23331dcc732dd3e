// SPDX-License-Identifier: MIT OR Apache-2.0

use nalgebra::{DMatrix, DVector};
use ndarray::{s, Array2};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use tal_core::forecast::{
    gradient_check, load_archive, make_windows, predict, save_archive, train, train_on, weights_json, Family,
    ForecasterSpec, TrainedForecaster,
};
use tal_core::ingest::{synthesize_channel, BehaviorKind};
use tal_core::seed;

fn column(values: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((values.len(), 1), values.to_vec()).unwrap()
}

fn spec(family: Family, window: usize) -> ForecasterSpec {
    ForecasterSpec {
        window,
        ..ForecasterSpec::preset(family)
    }
}

#[test]
fn window_alignment_examples() {
    let ds = make_windows(&column(&[0.0, 1.0, 2.0, 3.0, 4.0]), 0, 2).unwrap();
    assert_eq!(ds.targets(), vec![2.0, 3.0, 4.0]);
    let wide = Array2::<f64>::zeros((100, 3));
    assert_eq!(make_windows(&wide, 1, 10).unwrap().to_tensor().shape(), &[90, 10, 3]);
    assert!(make_windows(&column(&[1.0, 2.0]), 0, 2).is_err());
}

proptest! {
    #[test]
    fn windows_reassemble_the_series(t in 3usize..60, d in 1usize..4, w in 1usize..10, s in any::<u64>()) {
        prop_assume!(t > w);
        let mut rng = seed::rng(s);
        let data = Array2::from_shape_fn((t, d), |_| rng.random::<f64>());
        let target = rng.random_range(0..d);
        let ds = make_windows(&data, target, w).unwrap();
        prop_assert_eq!(ds.len(), t - w);
        // window i covers rows i..i+w; its target is row i+w
        for i in 0..ds.len() {
            prop_assert_eq!(ds.input_view(i), data.slice(s![i..i + w, ..]));
            prop_assert_eq!(ds.target(i), data[[i + w, target]]);
        }
        let mut rebuilt = ds.input_view(0).to_owned().into_raw_vec_and_offset().0;
        for i in 1..ds.len() {
            rebuilt.extend(ds.input_view(i).row(w - 1).iter());
        }
        rebuilt.extend(data.row(t - 1).iter());
        prop_assert_eq!(rebuilt, data.into_raw_vec_and_offset().0);
    }
}

/// Least squares `[y_{t-2}, y_{t-1}, 1] -> y_t` via the normal equations.
fn normal_equations(y: &[f64]) -> [f64; 3] {
    let n = y.len() - 2;
    let x = DMatrix::from_fn(n, 3, |i, j| if j == 2 { 1.0 } else { y[i + j] });
    let t = DVector::from_fn(n, |i, _| y[i + 2]);
    let xtx = x.transpose() * &x;
    let sol = xtx.cholesky().expect("full-rank design").solve(&(x.transpose() * t));
    [sol[0], sol[1], sol[2]]
}

/// Linear-family weights mapped back to signal units: lag weights and intercept.
fn raw_coefficients(f: &TrainedForecaster) -> [f64; 3] {
    let w = &f.weights[0].values;
    let b = f.weights[1].values[0];
    let (m, sd) = (f.standardizer.mean[0], f.standardizer.scale[0]);
    [w[0], w[1], m + sd * b - (w[0] + w[1]) * m]
}

#[test]
fn exact_ar2_coefficients_are_recovered() {
    let omega = std::f64::consts::TAU / 8.0;
    let y: Vec<f64> = (0..2000).map(|t| 0.8 * (omega * t as f64 + 0.3).sin()).collect();
    let f = train_on(&spec(Family::LinearAr, 2), &column(&y), 0).unwrap();
    let coef = raw_coefficients(&f);
    assert!((coef[0] + 1.0).abs() < 1e-3, "{coef:?}");
    assert!((coef[1] - 2.0 * omega.cos()).abs() < 1e-3, "{coef:?}");
}

#[test]
fn gradient_training_reaches_the_normal_equations() {
    let mut rng = seed::rng(21);
    let noise = Normal::new(0.0, 0.1).unwrap();
    let mut y = vec![0.0, 0.0];
    for t in 2..3000 {
        let next = 0.2 + 0.6 * y[t - 1] - 0.3 * y[t - 2] + noise.sample(&mut rng);
        y.push(next);
    }
    let f = train_on(&spec(Family::LinearAr, 2), &column(&y), 0).unwrap();
    let got = raw_coefficients(&f);
    let want = normal_equations(&y);
    for (a, b) in got.iter().zip(want) {
        assert!((a - b).abs() < 1e-3, "{got:?} vs {want:?}");
    }
}

#[test]
fn mlp_learns_a_constant() {
    let data = column(&[0.42; 300]);
    let f = train_on(&spec(Family::Mlp, 10), &data, 0).unwrap();
    for p in predict(&f, &data, 0).unwrap() {
        assert!((p - 0.42).abs() < 1e-3);
    }
}

#[test]
fn every_family_predicts_a_constant_on_flat_data() {
    let mut data = Array2::<f64>::zeros((400, 3));
    data.column_mut(0).fill(-0.3);
    for family in Family::ALL {
        let s = ForecasterSpec {
            hidden: 4,
            epochs: 2,
            ..spec(family, 8)
        };
        let f = train_on(&s, &data, 0).unwrap();
        for p in predict(&f, &data, 0).unwrap() {
            assert!((p + 0.3).abs() < 1e-3, "{family}: {p}");
        }
    }
}

#[test]
fn persistence_shifts_the_target() {
    let c = synthesize_channel(BehaviorKind::Oscillating, 400, 400, 2, &[], 3).unwrap();
    let f = train(&spec(Family::Persistence, 5), &c).unwrap();
    assert!(f.training_seconds < 1e-3);
    let pred = predict(&f, &c.test, 0).unwrap();
    let target = c.test_target();
    assert_eq!(pred.len(), 395);
    for (i, p) in pred.iter().enumerate() {
        assert_eq!(*p, target[i + 4]);
    }
}

#[test]
fn window_longer_than_training_split_is_an_error() {
    let data = column(&[1.0; 20]);
    for family in Family::ALL {
        assert!(train_on(&spec(family, 20), &data, 0).is_err(), "{family}");
    }
}

#[test]
fn neural_gradients_agree_with_finite_differences() {
    let c = synthesize_channel(BehaviorKind::Spiky, 400, 300, 2, &[], 9).unwrap();
    for family in [Family::Mlp, Family::Recurrent] {
        for seed in 0..3 {
            let s = ForecasterSpec {
                seed,
                ..spec(family, 20)
            };
            let rows = c
                .train
                .slice(s![seed as usize * 30..seed as usize * 30 + 36, ..])
                .to_owned();
            let batch = make_windows(&rows, 0, 20).unwrap();
            let err = gradient_check(&s, &batch).unwrap();
            assert!(err < 1e-4, "{family} seed {seed}: {err:e}");
        }
    }
    assert!(gradient_check(&spec(Family::LinearAr, 20), &make_windows(&c.train, 0, 20).unwrap()).is_ok());
    assert!(gradient_check(&spec(Family::Persistence, 20), &make_windows(&c.train, 0, 20).unwrap()).is_err());
}

#[test]
fn training_is_reproducible_and_archives_round_trip() {
    let c = synthesize_channel(BehaviorKind::Complex, 600, 400, 2, &[], 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for family in Family::ALL {
        let s = ForecasterSpec {
            hidden: 4,
            epochs: 2,
            seed: 17,
            ..spec(family, 12)
        };
        let a = train(&s, &c).unwrap();
        let b = train(&s, &c).unwrap();
        assert_eq!(weights_json(&a).unwrap(), weights_json(&b).unwrap());
        let epochs_run = if family == Family::Persistence { 0 } else { s.epochs };
        assert_eq!(a.loss_history.len(), epochs_run);

        let path = dir.path().join(format!("{family}.json"));
        save_archive(&path, &a).unwrap();
        let back = load_archive(&path).unwrap();
        assert_eq!(back, a);
        assert_eq!(predict(&back, &c.test, 0).unwrap(), predict(&a, &c.test, 0).unwrap());
    }
}

#[test]
fn seeds_change_neural_weights() {
    let c = synthesize_channel(BehaviorKind::Binary, 400, 300, 2, &[], 2).unwrap();
    let run = |seed| {
        let s = ForecasterSpec {
            hidden: 4,
            epochs: 1,
            seed,
            ..spec(Family::Mlp, 10)
        };
        weights_json(&train(&s, &c).unwrap()).unwrap()
    };
    assert_ne!(run(1), run(2));
}
