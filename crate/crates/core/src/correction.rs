//! Repair of invalid discrete design vectors.
//!
//! Eager modes search the enumerated valid set; lazy modes only need the
//! correctness check and walk candidate vectors until one passes. Corrected
//! vectors are always imputed, so outputs are valid.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::{DesignSpace, SpaceError};

pub const DEFAULT_MAX_TRIALS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CorrectionError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("no correct vector found within {0} trials")]
    TrialsExceeded(usize),
    #[error("the space has no valid discrete vectors")]
    EmptyEnumeration,
    #[error("problem-specific correction returned an incorrect vector")]
    HookFailed,
    #[error("problem-specific mode selected without a hook")]
    MissingHook,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    Manhattan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LazyOrder {
    DepthFirst,
    DistanceFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum CorrectionMode {
    EagerAny,
    EagerGreedy { randomized: bool },
    EagerSimilar { metric: Metric, randomized: bool },
    LazyAny { randomized: bool },
    LazySimilar { order: LazyOrder, metric: Metric },
    ProblemSpecific,
}

/// Problem-supplied correction. Receives a vector and returns a correct one;
/// it may also move continuous values.
pub type CorrectionHook = Arc<dyn Fn(&DesignSpace, &[f64]) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
pub struct Corrector {
    pub mode: CorrectionMode,
    pub max_trials: usize,
    hook: Option<CorrectionHook>,
}

impl fmt::Debug for Corrector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Corrector")
            .field("mode", &self.mode)
            .field("max_trials", &self.max_trials)
            .field("hook", &self.hook.is_some())
            .finish()
    }
}

/// Distance weights decreasing linearly from 1.1 (first discrete variable) to
/// 1.0 (last).
pub fn distance_weights(n_discrete: usize) -> Vec<f64> {
    if n_discrete <= 1 {
        return vec![1.0; n_discrete];
    }
    (0..n_discrete).map(|i| 1.1 - 0.1 * i as f64 / (n_discrete - 1) as f64).collect()
}

fn weighted_distance(metric: Metric, w: &[f64], deltas: impl Iterator<Item = f64>) -> f64 {
    match metric {
        Metric::Manhattan => deltas.zip(w).map(|(d, wi)| wi * d.abs()).sum(),
        Metric::Euclidean => deltas.zip(w).map(|(d, wi)| wi * d * d).sum::<f64>().sqrt(),
    }
}

impl Corrector {
    pub fn new(mode: CorrectionMode) -> Self {
        Corrector { mode, max_trials: DEFAULT_MAX_TRIALS, hook: None }
    }

    pub fn with_hook(hook: CorrectionHook) -> Self {
        Corrector { mode: CorrectionMode::ProblemSpecific, max_trials: DEFAULT_MAX_TRIALS, hook: Some(hook) }
    }

    /// Problem hook if given, else eager-any when the space can be
    /// enumerated, else depth-first lazy-similar.
    pub fn default_for(space: &DesignSpace, hook: Option<CorrectionHook>) -> Self {
        match hook {
            Some(h) => Corrector::with_hook(h),
            None if space.enumeration().is_ok() => Corrector::new(CorrectionMode::EagerAny),
            None => Corrector::new(CorrectionMode::LazySimilar { order: LazyOrder::DepthFirst, metric: Metric::Euclidean }),
        }
    }

    pub fn correct_seeded(&self, space: &DesignSpace, x: &[f64], seed: u64) -> Result<Vec<f64>, CorrectionError> {
        self.correct(space, x, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn correct<R: Rng + ?Sized>(
        &self,
        space: &DesignSpace,
        x: &[f64],
        rng: &mut R,
    ) -> Result<Vec<f64>, CorrectionError> {
        self.correct_counted(space, x, rng).map(|(v, _)| v)
    }

    /// Corrects `x` and reports the number of correctness checks made by lazy
    /// modes (0 for eager modes and already-correct inputs).
    pub fn correct_counted<R: Rng + ?Sized>(
        &self,
        space: &DesignSpace,
        x: &[f64],
        rng: &mut R,
    ) -> Result<(Vec<f64>, usize), CorrectionError> {
        space.check(x)?;
        if space.is_correct(x) {
            return Ok((space.impute(x).0, 0));
        }
        let disc = space.discrete_indices();
        let w = distance_weights(disc.len());
        match self.mode {
            CorrectionMode::EagerAny => {
                let e = space.enumeration()?;
                let v = e.vectors.choose(rng).ok_or(CorrectionError::EmptyEnumeration)?;
                Ok((assemble(space, x, v, &disc), 0))
            }
            CorrectionMode::EagerGreedy { randomized } => {
                let e = space.enumeration()?;
                if e.is_empty() {
                    return Err(CorrectionError::EmptyEnumeration);
                }
                let mut cand: Vec<usize> = (0..e.len()).collect();
                for &i in &disc {
                    let target = x[i];
                    let exact: Vec<usize> = cand.iter().copied().filter(|&k| e.vectors[k][i] == target).collect();
                    cand = if exact.is_empty() {
                        // nearest available value, ties resolved downward
                        let best = cand
                            .iter()
                            .map(|&k| e.vectors[k][i])
                            .min_by(|a, b| {
                                let (da, db) = ((a - target).abs(), (b - target).abs());
                                da.partial_cmp(&db).unwrap().then(a.partial_cmp(b).unwrap())
                            })
                            .unwrap();
                        cand.into_iter().filter(|&k| e.vectors[k][i] == best).collect()
                    } else {
                        exact
                    };
                }
                let k = if randomized { *cand.choose(rng).unwrap() } else { cand[0] };
                Ok((assemble(space, x, &e.vectors[k], &disc), 0))
            }
            CorrectionMode::EagerSimilar { metric, randomized } => {
                let e = space.enumeration()?;
                if e.is_empty() {
                    return Err(CorrectionError::EmptyEnumeration);
                }
                let dists: Vec<f64> = e
                    .vectors
                    .iter()
                    .map(|v| weighted_distance(metric, &w, disc.iter().map(|&i| v[i] - x[i])))
                    .collect();
                let min = dists.iter().cloned().fold(f64::INFINITY, f64::min);
                let ties: Vec<usize> = (0..dists.len()).filter(|&k| dists[k] == min).collect();
                let k = if randomized { *ties.choose(rng).unwrap() } else { ties[0] };
                Ok((assemble(space, x, &e.vectors[k], &disc), 0))
            }
            CorrectionMode::LazyAny { randomized: true } => {
                let mut cand = x.to_vec();
                for trial in 1..=self.max_trials {
                    for &i in &disc {
                        cand[i] = rng.random_range(0..space.variables()[i].n_options()) as f64;
                    }
                    if space.is_correct(&cand) {
                        return Ok((space.impute(&cand).0, trial));
                    }
                }
                Err(CorrectionError::TrialsExceeded(self.max_trials))
            }
            CorrectionMode::LazyAny { randomized: false } => {
                let mut cand = x.to_vec();
                for &i in &disc {
                    cand[i] = 0.0;
                }
                for trial in 1..=self.max_trials {
                    if space.is_correct(&cand) {
                        return Ok((space.impute(&cand).0, trial));
                    }
                    if !odometer(space, &disc, &mut cand) {
                        break;
                    }
                }
                Err(CorrectionError::TrialsExceeded(self.max_trials))
            }
            CorrectionMode::LazySimilar { order, metric } => {
                let offsets: Vec<Vec<i64>> =
                    disc.iter().map(|&i| offset_list(x[i] as i64, space.variables()[i].n_options() as i64)).collect();
                let mut cand = x.to_vec();
                let mut trials = 0usize;
                let mut check = |pos: &[usize]| -> Option<Vec<f64>> {
                    for (k, &i) in disc.iter().enumerate() {
                        cand[i] = x[i] + offsets[k][pos[k]] as f64;
                    }
                    space.is_correct(&cand).then(|| space.impute(&cand).0)
                };
                match order {
                    LazyOrder::DepthFirst => {
                        let mut pos = vec![0usize; disc.len()];
                        loop {
                            trials += 1;
                            if let Some(v) = check(&pos) {
                                return Ok((v, trials));
                            }
                            if trials >= self.max_trials || !step_positions(&mut pos, &offsets) {
                                break;
                            }
                        }
                    }
                    LazyOrder::DistanceFirst => {
                        let dist = |pos: &[usize]| {
                            weighted_distance(metric, &w, pos.iter().zip(&offsets).map(|(&p, o)| o[p] as f64))
                        };
                        let mut heap = BinaryHeap::new();
                        let start = vec![0usize; disc.len()];
                        heap.push(Node { dist: dist(&start), pos: start, last: 0 });
                        while let Some(node) = heap.pop() {
                            trials += 1;
                            if let Some(v) = check(&node.pos) {
                                return Ok((v, trials));
                            }
                            if trials >= self.max_trials {
                                break;
                            }
                            // each tuple is generated once, from the parent that
                            // differs in its last incremented coordinate
                            for k in node.last..disc.len() {
                                if node.pos[k] + 1 < offsets[k].len() {
                                    let mut p = node.pos.clone();
                                    p[k] += 1;
                                    heap.push(Node { dist: dist(&p), pos: p, last: k });
                                }
                            }
                        }
                    }
                }
                Err(CorrectionError::TrialsExceeded(trials))
            }
            CorrectionMode::ProblemSpecific => {
                let hook = self.hook.as_ref().ok_or(CorrectionError::MissingHook)?;
                let v = hook(space, x);
                space.check(&v)?;
                if !space.is_correct(&v) {
                    return Err(CorrectionError::HookFailed);
                }
                Ok((space.impute(&v).0, 0))
            }
        }
    }
}

fn assemble(space: &DesignSpace, x: &[f64], valid: &[f64], disc: &[usize]) -> Vec<f64> {
    let mut out = x.to_vec();
    for &i in disc {
        out[i] = valid[i];
    }
    space.impute(&out).0
}

/// Offsets 0, -1, +1, -2, +2, ... restricted to `0 <= c + o < n`.
fn offset_list(c: i64, n: i64) -> Vec<i64> {
    let mut out = vec![0];
    for m in 1..n {
        for o in [-m, m] {
            if (0..n).contains(&(c + o)) {
                out.push(o);
            }
        }
    }
    out
}

/// Advances a mixed-radix counter with the last digit fastest. Returns false
/// after the final combination.
fn step_positions(pos: &mut [usize], offsets: &[Vec<i64>]) -> bool {
    for k in (0..pos.len()).rev() {
        if pos[k] + 1 < offsets[k].len() {
            pos[k] += 1;
            return true;
        }
        pos[k] = 0;
    }
    false
}

fn odometer(space: &DesignSpace, disc: &[usize], x: &mut [f64]) -> bool {
    for &i in disc.iter().rev() {
        if (x[i] as usize) + 1 < space.variables()[i].n_options() {
            x[i] += 1.0;
            return true;
        }
        x[i] = 0.0;
    }
    false
}

#[derive(Debug, Clone, PartialEq)]
struct Node {
    dist: f64,
    pos: Vec<usize>,
    last: usize,
}

impl Eq for Node {}

impl Ord for Node {
    // reversed so the max-heap pops the smallest distance, then smallest position
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.pos.cmp(&self.pos))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Expr;

    fn table2() -> DesignSpace {
        DesignSpace::builder()
            .integer("x0", 0, 3)
            .integer("x1", 0, 2)
            .active_if("x1", Expr::is_in("x0", [0, 1]))
            .forbid(Expr::and(vec![Expr::eq("x0", 0), Expr::eq("x1", 2)]))
            .forbid(Expr::and(vec![Expr::eq("x0", 1), Expr::eq("x1", 1)]))
            .build()
            .unwrap()
    }

    #[test]
    fn weights_endpoints() {
        let w = distance_weights(5);
        assert!((w[0] - 1.1).abs() < 1e-15 && (w[4] - 1.0).abs() < 1e-15);
        assert_eq!(distance_weights(1), vec![1.0]);
    }

    #[test]
    fn offsets_alternate() {
        assert_eq!(offset_list(1, 4), vec![0, -1, 1, 2]);
        assert_eq!(offset_list(0, 3), vec![0, 1, 2]);
        assert_eq!(offset_list(2, 5), vec![0, -1, 1, -2, 2]);
    }

    #[test]
    fn greedy_table2() {
        let c = Corrector::new(CorrectionMode::EagerGreedy { randomized: false });
        assert_eq!(c.correct_seeded(&table2(), &[0.0, 2.0], 0).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn similar_table2() {
        let c = Corrector::new(CorrectionMode::EagerSimilar { metric: Metric::Manhattan, randomized: false });
        assert_eq!(c.correct_seeded(&table2(), &[3.0, 1.0], 0).unwrap(), vec![3.0, 0.0]);
    }

    #[test]
    fn distance_first_visits_in_distance_order() {
        // (0,2) is incorrect; the nearest correct candidates are at distance 1 along x1.
        let c = Corrector::new(CorrectionMode::LazySimilar { order: LazyOrder::DistanceFirst, metric: Metric::Manhattan });
        let (v, trials) = c.correct_counted(&table2(), &[0.0, 2.0], &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(v, vec![0.0, 1.0]);
        assert_eq!(trials, 2);
    }

    #[test]
    fn missing_hook_is_an_error() {
        let c = Corrector::new(CorrectionMode::ProblemSpecific);
        assert_eq!(c.correct_seeded(&table2(), &[0.0, 2.0], 0), Err(CorrectionError::MissingHook));
    }
}
