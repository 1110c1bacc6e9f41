//! Property-based tests of the library's structural invariants.

use proptest::collection::vec;
use proptest::prelude::*;

use placemetrics::cluster::{adjusted_rand, silhouette};
use placemetrics::featstats::{anova_f, mutual_info};
use placemetrics::forest::{rf_fit, stratified_kfold, ForestParams};
use placemetrics::io;
use placemetrics::model::{
    describe, placement, total_score, PlacementLabel, ResponseMatrix, StudentRecord,
};
use placemetrics::synth::{reconstruct_exact, MarginalSpec};

/// A random unlabelled matrix: per-student ability keeps the totals spread.
fn matrix_strategy(
    max_n: usize,
    max_m: usize,
) -> impl Strategy<Value = ResponseMatrix> {
    (1..=max_n, 1..=max_m, any::<u64>()).prop_map(|(n, m, seed)| {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let students: Vec<StudentRecord> = (0..n)
            .map(|i| {
                let ability = rng.random::<f64>();
                let row: Vec<u8> = (0..m)
                    .map(|_| u8::from(rng.random::<f64>() < ability))
                    .collect();
                StudentRecord::new(format!("s{i:04}"), row, None)
            })
            .collect();
        ResponseMatrix::new(students, m).unwrap()
    })
}

proptest! {
    #[test]
    fn percent_score_is_invariant_under_column_permutation(
        row in vec(0u8..=1, 1..60),
        rotation in 0usize..60,
    ) {
        let baseline = total_score(&row);
        let mut permuted = row.clone();
        permuted.rotate_left(rotation % row.len());
        let moved = total_score(&permuted);
        prop_assert_eq!(baseline.raw, moved.raw);
        prop_assert_eq!(baseline.percent, moved.percent);
    }

    #[test]
    fn placement_respects_the_cut_scores(percent in 0.0f64..=100.0) {
        let label = placement(percent).unwrap();
        let expected = if percent <= 55.0 {
            PlacementLabel::CollegeAlgebra
        } else if percent <= 70.0 {
            PlacementLabel::Precalculus
        } else {
            PlacementLabel::Calculus1
        };
        prop_assert_eq!(label, expected);
    }

    #[test]
    fn placement_is_monotone_in_percent(a in 0.0f64..=100.0, b in 0.0f64..=100.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(placement(lo).unwrap().rank() <= placement(hi).unwrap().rank());
    }

    #[test]
    fn describe_is_invariant_under_input_permutation(
        mut scores in vec(0.0f64..100.0, 1..50),
        seed in any::<u64>(),
    ) {
        use rand::prelude::*;
        let original = describe(&scores).unwrap();
        scores.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let shuffled = describe(&scores).unwrap();
        // Order statistics come from a sorted copy and are bit-identical;
        // the moments are summed in input order and may move by ULPs.
        prop_assert_eq!(original.n, shuffled.n);
        prop_assert_eq!(original.min, shuffled.min);
        prop_assert_eq!(original.max, shuffled.max);
        prop_assert_eq!(original.median, shuffled.median);
        prop_assert_eq!(original.q1, shuffled.q1);
        prop_assert_eq!(original.q3, shuffled.q3);
        prop_assert!((original.mean - shuffled.mean).abs() <= 1e-9);
        prop_assert!((original.sd - shuffled.sd).abs() <= 1e-9);
    }

    #[test]
    fn describe_orders_its_quantiles(scores in vec(0.0f64..100.0, 1..50)) {
        let s = describe(&scores).unwrap();
        prop_assert!(s.min <= s.q1 && s.q1 <= s.median);
        prop_assert!(s.median <= s.q3 && s.q3 <= s.max);
        prop_assert!(s.sd >= 0.0 && s.iqr >= 0.0 && s.range >= 0.0);
        prop_assert!(s.min <= s.mean && s.mean <= s.max);
    }

    #[test]
    fn csv_round_trip_preserves_the_matrix(matrix in matrix_strategy(40, 12)) {
        let labelled = matrix.with_labels_from_placement();
        for m in [matrix, labelled] {
            let text = io::write_csv_string(&m);
            let load = io::load_csv_reader(text.as_bytes()).unwrap();
            prop_assert_eq!(load.matrix.students(), m.students());
            prop_assert_eq!(load.matrix.item_count(), m.item_count());
            prop_assert!(load.warnings.is_empty());
        }
    }

    #[test]
    fn anova_and_mi_are_invariant_under_student_order(
        matrix in matrix_strategy(30, 8),
        seed in any::<u64>(),
    ) {
        use rand::prelude::*;
        let m = matrix.with_labels_from_placement();
        let classes = m.class_counts().iter().filter(|&&c| c > 0).count();
        prop_assume!(classes >= 2 && m.n() > classes);
        let mut students = m.students().to_vec();
        students.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let shuffled = ResponseMatrix::new(students, m.item_count()).unwrap();
        for item in 0..m.item_count() {
            let a = anova_f(&m, item).unwrap();
            let b = anova_f(&shuffled, item).unwrap();
            prop_assert!(a.f_stat >= 0.0 || a.f_stat.is_infinite());
            // Identical group compositions, so identical sums of squares.
            prop_assert_eq!(a.ss_between, b.ss_between);
            prop_assert_eq!(a.ss_within, b.ss_within);
            let mi_a = mutual_info(&m, item).unwrap();
            let mi_b = mutual_info(&shuffled, item).unwrap();
            prop_assert!(mi_a >= 0.0);
            prop_assert_eq!(mi_a, mi_b);
        }
    }

    #[test]
    fn stratified_folds_partition_and_balance(
        matrix in matrix_strategy(120, 6),
        k in 2usize..=5,
        seed in any::<u64>(),
    ) {
        let m = matrix.with_labels_from_placement();
        let labels = m.labels().unwrap();
        let feasible = m.class_counts().iter().all(|&c| c == 0 || c >= k);
        prop_assume!(feasible && m.n() >= k);

        let folds = stratified_kfold(&m, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k);

        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..m.n()).collect::<Vec<_>>());

        for rank in 0..3 {
            let counts: Vec<usize> = folds
                .iter()
                .map(|f| f.iter().filter(|&&i| labels[i].rank() == rank).count())
                .collect();
            let spread = counts.iter().max().unwrap() - counts.iter().min().unwrap();
            prop_assert!(spread <= 1, "class {} fold counts {:?}", rank, counts);
        }
    }

    #[test]
    fn mdi_is_normalized_whenever_a_forest_fits(
        matrix in matrix_strategy(60, 6),
        seed in any::<u64>(),
    ) {
        let m = matrix.with_labels_from_placement();
        let params = ForestParams { n_estimators: 15, ..ForestParams::default() };
        prop_assume!(m.n() >= params.min_samples_split);
        prop_assume!(m.class_counts().iter().filter(|&&c| c > 0).count() >= 2);
        let model = rf_fit(&m, &params, seed, 1).unwrap();
        let sum: f64 = model.mdi_importance().iter().sum();
        // Degenerate cohorts can grow 15 stumps with no splits at all; the
        // importance vector is then all zero rather than normalized.
        prop_assert!((sum - 1.0).abs() <= 1e-9 || sum == 0.0);
        for &v in model.mdi_importance() {
            prop_assert!(v >= 0.0);
        }
    }

    #[test]
    fn silhouette_values_stay_in_unit_interval(
        coords in vec(vec(-5.0f64..5.0, 2), 4..20),
        seed in any::<u64>(),
    ) {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let k = rng.random_range(2..=coords.len().min(4));
        let assignments: Vec<usize> = (0..coords.len())
            .map(|i| if i < k { i } else { rng.random_range(0..k) })
            .collect();
        let report = silhouette(&coords, &assignments).unwrap();
        for &s in &report.per_point {
            prop_assert!((-1.0..=1.0).contains(&s), "silhouette {} out of range", s);
        }
        let mean = report.per_point.iter().sum::<f64>() / coords.len() as f64;
        prop_assert!((report.mean - mean).abs() <= 1e-12);
    }

    #[test]
    fn adjusted_rand_is_symmetric_and_reflexive(
        a in vec(0usize..4, 2..30),
        seed in any::<u64>(),
    ) {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<usize> = a.iter().map(|_| rng.random_range(0..4)).collect();
        prop_assert_eq!(adjusted_rand(&a, &a).unwrap(), 1.0);
        prop_assert_eq!(
            adjusted_rand(&a, &b).unwrap(),
            adjusted_rand(&b, &a).unwrap()
        );
    }

    #[test]
    fn reconstruction_hits_requested_group_counts_exactly(
        sizes in (1usize..40, 1usize..25, 1usize..12),
        items in 1usize..6,
        seed in any::<u64>(),
    ) {
        use rand::prelude::*;
        let group_sizes = [sizes.0, sizes.1, sizes.2];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let correct: Vec<[usize; 3]> = (0..items)
            .map(|_| {
                [
                    rng.random_range(0..=group_sizes[0]),
                    rng.random_range(0..=group_sizes[1]),
                    rng.random_range(0..=group_sizes[2]),
                ]
            })
            .collect();
        let spec = MarginalSpec {
            group_sizes,
            per_item_group_correct: Some(correct.clone()),
            per_item_difficulty: None,
        };
        let matrix = reconstruct_exact(&spec, seed).unwrap();
        let labels = matrix.labels().unwrap();
        for (j, want) in correct.iter().enumerate() {
            let mut got = [0usize; 3];
            for (s, l) in matrix.students().iter().zip(&labels) {
                got[l.rank()] += usize::from(s.responses[j]);
            }
            prop_assert_eq!(&got, want, "item {} counts", j);
        }
    }
}
