use ndarray::Array2;
use proptest::prelude::*;

use robust_sources::baselines::{
    apply_normalization, componentwise_median, fit_normalization, geometric_median, sum_of_distances,
    WEISZFELD_TOLERANCE,
};
use robust_sources::corruption::{corrupt_detailed, CorruptionKind, CorruptionSpec};
use robust_sources::data::{kfold_indices, load_csv, save_csv, Dataset, Label, LabelEncoding};
use robust_sources::discrepancy::{default_relax_config, empirical_discrepancy, exact_discrepancy_oracle, HypothesisFamily};
use robust_sources::linear::{huber_temper, Loss, HUBER_THRESHOLD};
use robust_sources::weights::{project_simplex, solve_weights, SimplexWeights, WeightProblem};

fn dataset(d: usize, max_rows: usize) -> impl Strategy<Value = Dataset> {
    (1..=max_rows).prop_flat_map(move |n| {
        (
            prop::collection::vec(-5.0f64..5.0, n * d),
            prop::collection::vec(any::<bool>(), n),
        )
            .prop_map(move |(values, labels)| {
                let features = Array2::from_shape_vec((n, d), values).unwrap();
                let labels = labels
                    .into_iter()
                    .map(|b| if b { Label::Positive } else { Label::Negative })
                    .collect();
                Dataset::new(features, labels).unwrap()
            })
    })
}

fn assert_on_simplex(alpha: &SimplexWeights) {
    assert!(alpha.as_slice().iter().all(|a| *a >= 0.0));
    assert!((alpha.as_slice().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_lands_on_simplex_and_is_idempotent(v in prop::collection::vec(-10.0f64..10.0, 1..8)) {
        let p = project_simplex(&v).unwrap();
        assert_on_simplex(&p);
        let again = project_simplex(p.as_slice()).unwrap();
        for (a, b) in p.as_slice().iter().zip(again.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn weights_beat_vertices_and_uniform(
        problem in (1usize..7).prop_flat_map(|n| (
            prop::collection::vec(0.0f64..=1.0, n),
            prop::collection::vec(1usize..1000, n),
            0.0f64..20.0,
        ))
    ) {
        let (d, m, lambda) = problem;
        let n = d.len();
        let p = WeightProblem::new(d, m, lambda).unwrap();
        let alpha = solve_weights(&p).unwrap();
        assert_on_simplex(&alpha);
        let value = p.objective(alpha.as_slice());
        prop_assert!(value <= p.objective(SimplexWeights::uniform(n).as_slice()) + 1e-12);
        for i in 0..n {
            prop_assert!(value <= p.objective(SimplexWeights::vertex(n, i).as_slice()) + 1e-12);
        }
    }

    #[test]
    fn discrepancy_of_a_sample_with_itself_is_zero(s in (1usize..5).prop_flat_map(|d| dataset(d, 40))) {
        let v = empirical_discrepancy(&s, &s, &default_relax_config()).unwrap();
        prop_assert_eq!(v.value, 0.0);
    }

    #[test]
    fn discrepancy_in_unit_interval(s in dataset(2, 30), t in dataset(2, 30)) {
        let v = empirical_discrepancy(&s, &t, &default_relax_config()).unwrap();
        prop_assert!((0.0..=1.0).contains(&v.value));
        prop_assert_eq!(v.value, (1.0 - v.solver_risk).clamp(0.0, 1.0));
    }

    #[test]
    fn oracle_is_symmetric(s in dataset(2, 12), t in dataset(2, 12)) {
        let a = exact_discrepancy_oracle(&s, &t, HypothesisFamily::Lines2d).unwrap();
        let b = exact_discrepancy_oracle(&t, &s, HypothesisFamily::Lines2d).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn shuffled_labels_keep_label_counts(s in dataset(3, 50), p in 0.01f64..=1.0, seed in any::<u64>()) {
        let spec = CorruptionSpec::new(CorruptionKind::ShuffledLabels, p, seed).unwrap();
        let c = corrupt_detailed(&s, &spec).unwrap();
        let count = |d: &Dataset| d.labels().iter().filter(|l| **l == Label::Positive).count();
        prop_assert_eq!(count(&c.data), count(&s));
        prop_assert_eq!(c.data.features(), s.features());
        prop_assert_eq!(c.affected.len(), spec.affected_count(s.n_samples()));
    }

    #[test]
    fn shuffled_features_permute_affected_rows(s in dataset(4, 30), p in 0.01f64..=1.0, seed in any::<u64>()) {
        let spec = CorruptionSpec::new(CorruptionKind::ShuffledFeatures, p, seed).unwrap();
        let c = corrupt_detailed(&s, &spec).unwrap();
        let perm = c.feature_permutation.unwrap();
        for i in 0..s.n_samples() {
            for (j, &src) in perm.iter().enumerate() {
                let expected = if c.affected.contains(&i) { s.features()[[i, src]] } else { s.features()[[i, j]] };
                prop_assert_eq!(c.data.features()[[i, j]], expected);
            }
        }
        prop_assert_eq!(c.data.labels(), s.labels());
    }

    #[test]
    fn label_bias_only_adds_positives(s in dataset(2, 50), p in 0.01f64..=1.0, seed in any::<u64>()) {
        let spec = CorruptionSpec::new(CorruptionKind::LabelBias, p, seed).unwrap();
        let c = corrupt_detailed(&s, &spec).unwrap();
        for (i, (before, after)) in s.labels().iter().zip(c.data.labels()).enumerate() {
            if c.affected.contains(&i) {
                prop_assert_eq!(*after, Label::Positive);
            } else {
                prop_assert_eq!(after, before);
            }
        }
    }

    #[test]
    fn componentwise_median_within_coordinate_range(points in prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 3), 1..12)) {
        let med = componentwise_median(&points).unwrap();
        for j in 0..3 {
            let lo = points.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min);
            let hi = points.iter().map(|p| p[j]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo <= med[j] && med[j] <= hi);
        }
    }

    #[test]
    fn geometric_median_no_worse_than_centroid_or_points(points in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 2), 1..15)) {
        let z = geometric_median(&points, WEISZFELD_TOLERANCE).unwrap();
        let n = points.len() as f64;
        let centroid: Vec<f64> = (0..2).map(|j| points.iter().map(|p| p[j]).sum::<f64>() / n).collect();
        let value = sum_of_distances(&z, &points);
        prop_assert!(value <= sum_of_distances(&centroid, &points) + 1e-12);
        for p in &points {
            prop_assert!(value <= sum_of_distances(p, &points) + 1e-12);
        }
    }

    #[test]
    fn kfold_is_a_partition(n in 2usize..200, k in 2usize..10, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let folds = kfold_indices(n, k, seed).unwrap();
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn csv_round_trip_is_exact(s in dataset(3, 20), zero_one in any::<bool>()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let encoding = if zero_one { LabelEncoding::ZeroOne } else { LabelEncoding::Signed };
        save_csv(&s, &path, "y", encoding).unwrap();
        let back = load_csv(&path, "y", encoding).unwrap();
        prop_assert_eq!(back.features(), s.features());
        prop_assert_eq!(back.labels(), s.labels());
    }

    #[test]
    fn standardization_centers_and_scales(s in dataset(3, 40)) {
        let stats = fit_normalization(&s).unwrap();
        let z = apply_normalization(&s, &stats).unwrap();
        for j in 0..3 {
            let col = z.features().column(j);
            let mean = col.sum() / col.len() as f64;
            prop_assert!(mean.abs() <= 1e-10);
            if stats.std[j] >= 1e-12 {
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
                prop_assert!((var - 1.0).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn huber_never_exceeds_logistic(z in -40.0f64..40.0) {
        let l = Loss::Logistic.value(z, 1.0);
        let h = Loss::huber().value(z, 1.0);
        prop_assert!(h <= l);
        prop_assert!(h >= 0.0);
        prop_assert_eq!(huber_temper(l, HUBER_THRESHOLD) == l, l <= HUBER_THRESHOLD);
    }
}
