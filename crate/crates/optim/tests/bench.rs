use archopt_core::KnownOptimum;
use archopt_optim::bench::{
    aggregate, delta_hv_ratio, delta_hv_series, hypervolume_2d, pooled_t_test, quartile_bands, rank, reference_point,
    regret, select_best, Aggregate, ProblemRanking, Summary,
};
use archopt_optim::EvalRecord;
use proptest::prelude::*;
use serde::Deserialize;

#[derive(Deserialize)]
struct Config {
    mean: f64,
    sd: f64,
    n: usize,
}

#[derive(Deserialize)]
struct Pair {
    a: usize,
    b: usize,
    p: f64,
}

#[derive(Deserialize)]
struct Case {
    configs: Vec<Config>,
    minimize: bool,
    pairs: Vec<Pair>,
    ranks: Vec<usize>,
}

fn cases() -> Vec<Case> {
    serde_json::from_str(include_str!("fixtures/rank_cases.json")).unwrap()
}

fn summaries(configs: &[Config]) -> Vec<Summary> {
    configs
        .iter()
        .enumerate()
        .map(|(i, c)| Summary { name: format!("c{i}"), mean: c.mean, sd: c.sd, n: c.n })
        .collect()
}

fn s(mean: f64, sd: f64, n: usize) -> Summary {
    Summary { name: String::new(), mean, sd, n }
}

fn eval(iter: usize, f: &[f64], viable: bool) -> EvalRecord {
    EvalRecord { iter, x: vec![0.0], active: vec![true], f: f.to_vec(), g: vec![], viable, corrected: false }
}

/// Area dominated by the points on a fine grid of cell centres.
fn grid_hypervolume(points: &[Vec<f64>], reference: &[f64], cells: usize) -> f64 {
    let h = 1.0 / cells as f64;
    let mut covered = 0;
    for i in 0..cells {
        for j in 0..cells {
            let (x, y) = ((i as f64 + 0.5) * h * reference[0], (j as f64 + 0.5) * h * reference[1]);
            covered += usize::from(points.iter().any(|p| p[0] <= x && p[1] <= y));
        }
    }
    covered as f64 * h * h * reference[0] * reference[1]
}

#[test]
fn hypervolume_examples() {
    assert_eq!(hypervolume_2d(&[vec![0.0, 0.0]], &[1.0, 1.0]), 1.0);
    assert_eq!(hypervolume_2d(&[vec![0.25, 0.75], vec![0.5, 0.5]], &[1.0, 1.0]), 0.3125);
    assert_eq!(hypervolume_2d(&[vec![1.5, 0.0]], &[1.0, 1.0]), 0.0);
    assert_eq!(hypervolume_2d(&[], &[1.0, 1.0]), 0.0);
}

#[test]
fn reference_point_extends_the_nadir() {
    let r = reference_point(&[vec![0.0, 10.0], vec![4.0, -2.0]]);
    assert!((r[0] - 4.4).abs() < 1e-12 && (r[1] - 11.2).abs() < 1e-12);
}

#[test]
fn single_objective_delta_hv() {
    let evals = vec![
        eval(0, &[5.0], true),
        eval(0, &[9.0], true),
        eval(0, &[f64::NAN], false),
        eval(1, &[7.0], true),
        eval(2, &[3.0], true),
        eval(3, &[1.0], true),
    ];
    let known = KnownOptimum::Value(1.0);
    let d = delta_hv_series(&evals, &known, None);
    assert_eq!(d, vec![0.5, 0.5, 0.25, 0.0]);
    assert_eq!(delta_hv_ratio(&d), vec![1.0, 1.0, 0.5, 0.0]);
    // a shared, larger normalization bound
    assert_eq!(delta_hv_series(&evals, &known, Some(17.0)), vec![0.25, 0.25, 0.125, 0.0]);
    // degenerate range
    assert_eq!(delta_hv_series(&[eval(0, &[1.0], true)], &known, None), vec![0.0]);
}

#[test]
fn multi_objective_delta_hv() {
    let front = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
    let known = KnownOptimum::Front(front.clone());
    let evals = vec![eval(0, &[1.0, 1.0], true), eval(1, &[0.0, 1.0], true), eval(2, &[1.0, 0.0], true)];
    let d = delta_hv_series(&evals, &known, None);
    let r = reference_point(&front);
    let hv_ref = hypervolume_2d(&front, &r);
    assert!((d[0] - (hv_ref - 0.01) / hv_ref).abs() < 1e-12);
    assert!(d[0] > d[1] && d[1] > d[2]);
    assert!(d[2].abs() < 1e-12);
}

#[test]
fn zero_initial_delta_gives_zero_ratio() {
    assert_eq!(delta_hv_ratio(&[0.0, 0.0]), vec![0.0, 0.0]);
}

#[test]
fn regret_examples() {
    assert_eq!(regret(&[1.0, 0.5], 1.0), vec![0.0, 0.75]);
    assert_eq!(regret(&[1.0, 0.5, 0.25], 1.0), vec![0.0, 0.75, 1.125]);
    assert_eq!(regret(&[0.4, 0.4], 3.0), vec![0.0, 1.2000000000000002]);
}

#[test]
fn t_test_matches_reference() {
    let mut n = 0;
    for case in cases() {
        let sums = summaries(&case.configs);
        for pair in &case.pairs {
            let p = pooled_t_test(&sums[pair.a], &sums[pair.b]);
            assert!((p - pair.p).abs() < 1e-6, "p {p} vs {}", pair.p);
            n += 1;
        }
    }
    assert!(n > 100);
}

#[test]
fn ranks_match_reference() {
    let cases = cases();
    assert_eq!(cases.len(), 100);
    for case in cases {
        assert_eq!(rank(&summaries(&case.configs), case.minimize), case.ranks);
    }
}

#[test]
fn rank_examples() {
    assert_eq!(rank(&[s(1.0, 0.1, 16), s(1.0, 0.1, 16), s(2.0, 0.1, 16)], true), vec![1, 1, 2]);
    assert_eq!(rank(&vec![s(3.0, 0.5, 8); 4], true), vec![1, 1, 1, 1]);
    assert_eq!(rank(&[s(3.0, 0.1, 10), s(1.0, 0.1, 10), s(2.0, 0.1, 10)], true), vec![3, 1, 2]);
    assert_eq!(rank(&[s(3.0, 0.1, 10), s(1.0, 0.1, 10), s(2.0, 0.1, 10)], false), vec![1, 3, 2]);
    // zero variance: equal means are the same, different means are not
    assert_eq!(pooled_t_test(&s(1.0, 0.0, 5), &s(1.0, 0.0, 5)), 1.0);
    assert_eq!(pooled_t_test(&s(1.0, 0.0, 5), &s(1.5, 0.0, 5)), 0.0);
    assert_eq!(rank(&[s(2.0, 0.0, 5), s(1.0, 0.0, 5), s(1.0, 0.0, 5)], true), vec![2, 1, 1]);
}

#[test]
fn t_statistic_example() {
    // t = 1 / sqrt(0.01 * 2 / 16) ≈ 28.28 with 30 degrees of freedom
    let p = pooled_t_test(&s(1.0, 0.1, 16), &s(2.0, 0.1, 16));
    assert!(p < 1e-20);
    assert_eq!(pooled_t_test(&s(1.0, 0.1, 16), &s(1.0, 0.1, 16)), 1.0);
}

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("c{i}")).collect()
}

#[test]
fn aggregation_prefers_rank1_within_best_rank2() {
    // c0: rank 1 once, rank 3 twice -> rank<=2 share 1/3
    // c1: rank 2 everywhere -> rank<=2 share 1, rank-1 share 0
    // c2: rank 1 twice, rank 2 once -> rank<=2 share 1, rank-1 share 2/3
    let problems = vec![
        ProblemRanking { ranks: vec![1, 2, 1], mean_regret: vec![1.0, 2.0, 1.0] },
        ProblemRanking { ranks: vec![3, 2, 1], mean_regret: vec![4.0, 3.0, 2.0] },
        ProblemRanking { ranks: vec![3, 2, 2], mean_regret: vec![6.0, 4.0, 5.0] },
    ];
    let aggs = aggregate(&names(3), &problems);
    assert!((aggs[0].rank1_share - 1.0 / 3.0).abs() < 1e-12);
    assert!((aggs[0].rank2_share - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(aggs[1].rank2_share, 1.0);
    assert!((aggs[2].rank1_share - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(select_best(&aggs), Some(2));
    // penalty of c1: mean of (2-1)/1, (3-2)/2, (4-4)/4
    assert!((aggs[1].penalty - 0.5).abs() < 1e-12);
    assert!((aggs[2].penalty - 0.25 / 3.0).abs() < 1e-12);
}

#[test]
fn aggregation_ignores_rank1_outside_the_top_rank2_set() {
    // c0 has the most rank-1 results but fails the rank<=2 filter
    let aggs = vec![
        Aggregate { name: "c0".into(), rank1_share: 0.8, rank2_share: 0.8, penalty: 0.0 },
        Aggregate { name: "c1".into(), rank1_share: 0.2, rank2_share: 1.0, penalty: 0.5 },
        Aggregate { name: "c2".into(), rank1_share: 0.4, rank2_share: 1.0, penalty: 0.9 },
    ];
    assert_eq!(select_best(&aggs), Some(2));
}

#[test]
fn quartile_bands_per_index() {
    let bands = quartile_bands(&[vec![1.0, 0.5], vec![1.0, 0.3], vec![1.0]]);
    assert_eq!(bands[0], [1.0, 1.0, 1.0]);
    assert_eq!(bands[1], [0.4, 0.5, 0.75]);
}

proptest! {
    #[test]
    fn hypervolume_matches_grid(pts in prop::collection::vec((0u8..8, 0u8..8), 1..8)) {
        let points: Vec<Vec<f64>> = pts.iter().map(|&(a, b)| vec![a as f64 / 8.0, b as f64 / 8.0]).collect();
        let hv = hypervolume_2d(&points, &[1.0, 1.0]);
        prop_assert!((hv - grid_hypervolume(&points, &[1.0, 1.0], 64)).abs() < 1e-12);
    }

    #[test]
    fn hypervolume_never_decreases(
        pts in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..10),
        extra in (0.0f64..1.0, 0.0f64..1.0),
    ) {
        let mut points: Vec<Vec<f64>> = pts.iter().map(|&(a, b)| vec![a, b]).collect();
        let before = hypervolume_2d(&points, &[1.0, 1.0]);
        points.push(vec![extra.0, extra.1]);
        prop_assert!(hypervolume_2d(&points, &[1.0, 1.0]) >= before - 1e-15);
    }

    #[test]
    fn regret_is_non_decreasing(ratio in prop::collection::vec(0.0f64..1.0, 1..30), step in 0.5f64..4.0) {
        let r = regret(&ratio, step);
        prop_assert_eq!(r[0], 0.0);
        for w in r.windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn delta_hv_is_monotone(fs in prop::collection::vec(0.0f64..10.0, 1..30)) {
        let evals: Vec<EvalRecord> = fs.iter().enumerate().map(|(i, &f)| eval(i, &[f], true)).collect();
        let d = delta_hv_series(&evals, &KnownOptimum::Value(0.0), None);
        for w in d.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn duplicated_rows_share_ranks(
        rows in prop::collection::vec((-3.0f64..3.0, 0.05f64..1.0, 2usize..20), 2..7),
        dup in 0usize..6,
    ) {
        let sums: Vec<Summary> = rows.iter().map(|&(m, sd, n)| s(m, sd, n)).collect();
        let dup = dup % sums.len();
        let mut with_dup = sums.clone();
        with_dup.push(sums[dup].clone());
        let base = rank(&sums, true);
        let ranked = rank(&with_dup, true);
        prop_assert_eq!(&ranked[..sums.len()], &base[..]);
        prop_assert_eq!(ranked[sums.len()], base[dup]);
    }
}
