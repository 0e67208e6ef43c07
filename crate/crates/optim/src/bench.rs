//! Convergence bookkeeping and statistical comparison of optimizer
//! configurations: hypervolume, ΔHV series, regret, t-test ranking and
//! aggregation across problems.

use archopt_core::KnownOptimum;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::nsga2::non_dominated_sort;
use crate::record::EvalRecord;

/// Two-sided p-value at or below which two configurations get different
/// ranks.
pub const P_SAME_THRESHOLD: f64 = 0.10;

/// Hypervolume of a two-objective point set with respect to `reference`
/// (minimization). Points not strictly dominating the reference are ignored.
pub fn hypervolume_2d(points: &[Vec<f64>], reference: &[f64]) -> f64 {
    let mut pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p[0] < reference[0] && p[1] < reference[1])
        .map(|p| (p[0], p[1]))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut hv = 0.0;
    let mut y_prev = reference[1];
    for (x, y) in pts {
        if y < y_prev {
            hv += (reference[0] - x) * (y_prev - y);
            y_prev = y;
        }
    }
    hv
}

/// Reference point for a known front: nadir + 0.1·(nadir − ideal), with a
/// unit margin in degenerate dimensions.
pub fn reference_point(front: &[Vec<f64>]) -> Vec<f64> {
    let n = front[0].len();
    (0..n)
        .map(|m| {
            let lo = front.iter().map(|p| p[m]).fold(f64::INFINITY, f64::min);
            let hi = front.iter().map(|p| p[m]).fold(f64::NEG_INFINITY, f64::max);
            let span = hi - lo;
            hi + if span > 0.0 { 0.1 * span } else { 1.0 }
        })
        .collect()
}

/// Largest objective value among viable evaluations (first objective).
pub fn max_viable_objective(evals: &[EvalRecord]) -> f64 {
    evals.iter().filter(|e| e.viable).map(|e| e.f[0]).fold(f64::NEG_INFINITY, f64::max)
}

/// Distance to the known optimum after each iteration, normalized to [0, 1].
/// `f_max` overrides the single-objective normalization bound (shared across
/// runs when comparing); by default the run's own largest viable value is
/// used.
pub fn delta_hv_series(evals: &[EvalRecord], known: &KnownOptimum, f_max: Option<f64>) -> Vec<f64> {
    let n_iter = evals.iter().map(|e| e.iter + 1).max().unwrap_or(0);
    let mut upto = vec![0usize; n_iter];
    for (k, e) in evals.iter().enumerate() {
        upto[e.iter] = upto[e.iter].max(k + 1);
    }
    // iterations without their own evaluations inherit the earlier prefix
    for i in 1..n_iter {
        upto[i] = upto[i].max(upto[i - 1]);
    }
    match known {
        KnownOptimum::Value(f_opt) => {
            let f_max = f_max.unwrap_or_else(|| max_viable_objective(evals));
            let range = f_max - f_opt;
            let mut best = f64::INFINITY;
            let mut done = 0;
            upto.iter()
                .map(|&end| {
                    for e in &evals[done..end] {
                        if e.is_feasible() {
                            best = best.min(e.f[0]);
                        }
                    }
                    done = end;
                    if !(range > 0.0) {
                        0.0
                    } else if best == f64::INFINITY {
                        1.0
                    } else {
                        ((best - f_opt) / range).clamp(0.0, 1.0)
                    }
                })
                .collect()
        }
        KnownOptimum::Front(front) => {
            let reference = reference_point(front);
            let hv_ref = hypervolume_2d(front, &reference);
            let mut pts: Vec<Vec<f64>> = Vec::new();
            let mut done = 0;
            upto.iter()
                .map(|&end| {
                    pts.extend(evals[done..end].iter().filter(|e| e.is_feasible()).map(|e| e.f.clone()));
                    done = end;
                    if pts.len() > 64 {
                        let keep = non_dominated_sort(&pts).swap_remove(0);
                        pts = keep.into_iter().map(|i| pts[i].clone()).collect();
                    }
                    if hv_ref <= 0.0 {
                        0.0
                    } else {
                        ((hv_ref - hypervolume_2d(&pts, &reference)) / hv_ref).clamp(0.0, 1.0)
                    }
                })
                .collect()
        }
    }
}

/// Re-indexes a run so that the initial design (iteration 0) stays step 0 and
/// every later evaluation is its own step. Puts algorithms with different
/// batch or population sizes on a common per-evaluation axis.
pub fn by_evaluation(evals: &[EvalRecord]) -> Vec<EvalRecord> {
    let mut step = 0;
    evals
        .iter()
        .map(|e| {
            let mut e = e.clone();
            if e.iter > 0 {
                step += 1;
                e.iter = step;
            }
            e
        })
        .collect()
}

/// ΔHV relative to its first value. A zero first value gives all zeros.
pub fn delta_hv_ratio(series: &[f64]) -> Vec<f64> {
    match series.first() {
        Some(&d0) if d0 > 0.0 => series.iter().map(|d| d / d0).collect(),
        _ => vec![0.0; series.len()],
    }
}

/// Cumulative trapezoid area under a ΔHV ratio series, starting at 0.
pub fn regret(ratio: &[f64], n_step: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(ratio.len());
    let mut acc = 0.0;
    for (i, r) in ratio.iter().enumerate() {
        if i > 0 {
            acc += 0.5 * n_step * (ratio[i - 1] + r);
        }
        out.push(acc);
    }
    out
}

/// Summary statistics of one configuration's results on one problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl Summary {
    /// Mean and sample standard deviation of `values`.
    pub fn of(name: &str, values: &[f64]) -> Summary {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        Summary { name: name.into(), mean, sd: var.sqrt(), n }
    }
}

/// Two-sided p-value of the pooled-variance two-sample t-test computed from
/// summary statistics.
pub fn pooled_t_test(a: &Summary, b: &Summary) -> f64 {
    let df = (a.n + b.n) as f64 - 2.0;
    let sp2 = ((a.n as f64 - 1.0) * a.sd * a.sd + (b.n as f64 - 1.0) * b.sd * b.sd) / df;
    let se = (sp2 * (1.0 / a.n as f64 + 1.0 / b.n as f64)).sqrt();
    let diff = a.mean - b.mean;
    if se == 0.0 || !se.is_finite() {
        return if diff == 0.0 { 1.0 } else { 0.0 };
    }
    let t = (diff / se).abs();
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.sf(t)).min(1.0)
}

/// Performance ranks (1 = best). Configurations are visited from best to
/// worst mean; each is tested against the current reference and starts a new
/// rank, becoming the reference, when the p-value is at most
/// `P_SAME_THRESHOLD`.
pub fn rank(configs: &[Summary], minimize: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..configs.len()).collect();
    order.sort_by(|&a, &b| {
        let c = configs[a].mean.total_cmp(&configs[b].mean);
        if minimize { c } else { c.reverse() }.then(a.cmp(&b))
    });
    let mut ranks = vec![0; configs.len()];
    let Some(&first) = order.first() else { return ranks };
    let mut reference = first;
    let mut r = 1;
    ranks[first] = 1;
    for &i in &order[1..] {
        if pooled_t_test(&configs[reference], &configs[i]) <= P_SAME_THRESHOLD {
            r += 1;
            reference = i;
        }
        ranks[i] = r;
    }
    ranks
}

/// Per-configuration aggregate over several problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub name: String,
    pub rank1_share: f64,
    pub rank2_share: f64,
    /// Mean relative regret increase over the best configuration.
    pub penalty: f64,
}

/// Results of all configurations on one problem: ranks and mean regrets,
/// indexed like the configuration names.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemRanking {
    pub ranks: Vec<usize>,
    pub mean_regret: Vec<f64>,
}

pub fn aggregate(names: &[String], problems: &[ProblemRanking]) -> Vec<Aggregate> {
    let n_p = problems.len() as f64;
    names
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let rank1 = problems.iter().filter(|p| p.ranks[c] == 1).count() as f64 / n_p;
            let rank2 = problems.iter().filter(|p| p.ranks[c] <= 2).count() as f64 / n_p;
            let penalty = problems
                .iter()
                .map(|p| {
                    let best = p.mean_regret.iter().copied().fold(f64::INFINITY, f64::min);
                    let own = p.mean_regret[c];
                    if best > 0.0 {
                        (own - best) / best
                    } else if own == best {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                })
                .sum::<f64>()
                / n_p;
            Aggregate { name: name.clone(), rank1_share: rank1, rank2_share: rank2, penalty }
        })
        .collect()
}

/// Index of the preferred configuration: highest rank-1 share among those
/// with the highest rank-≤2 share, then lowest penalty, then first listed.
pub fn select_best(aggs: &[Aggregate]) -> Option<usize> {
    let top2 = aggs.iter().map(|a| a.rank2_share).fold(f64::NEG_INFINITY, f64::max);
    (0..aggs.len()).filter(|&i| aggs[i].rank2_share == top2).min_by(|&a, &b| {
        aggs[b]
            .rank1_share
            .total_cmp(&aggs[a].rank1_share)
            .then(aggs[a].penalty.total_cmp(&aggs[b].penalty))
            .then(a.cmp(&b))
    })
}

/// Median and quartiles of several equally long series, per index. Shorter
/// series are extended with their last value.
pub fn quartile_bands(series: &[Vec<f64>]) -> Vec<[f64; 3]> {
    let len = series.iter().map(Vec::len).max().unwrap_or(0);
    (0..len)
        .map(|i| {
            let mut v: Vec<f64> =
                series.iter().filter_map(|s| s.get(i).or_else(|| s.last()).copied()).collect();
            v.sort_by(f64::total_cmp);
            [quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75)]
        })
        .collect()
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}
