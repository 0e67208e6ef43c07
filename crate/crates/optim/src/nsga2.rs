//! NSGA-II for hierarchical mixed-discrete problems.
//!
//! The selection and variation building blocks are public so the same engine
//! can drive the surrogate-based infill search.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use archopt_core::sampling::{sample_hierarchical, sample_nonhierarchical, unit_to_declared};
use archopt_core::sobol::SobolSampler;
use archopt_core::{Corrector, DesignSpace, Grouping, Weighting};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::record::{EvalRecord, Evaluator, RecordError, RunHeader, RunRecord};
use crate::OptimError;

/// How much of the design-space hierarchy the optimizer is told about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integration {
    /// Correction happens inside evaluation; the optimizer keeps raw genomes.
    Naive,
    /// The corrected vector replaces the genome after evaluation.
    XOut,
    /// Candidates are corrected before evaluation.
    Repair,
    /// As `Repair`, with a hierarchical initial design.
    HierSampling,
    /// As `HierSampling`; surrogates also use hierarchical kernels.
    Activeness,
}

impl Integration {
    pub const ALL: [Integration; 5] =
        [Integration::Naive, Integration::XOut, Integration::Repair, Integration::HierSampling, Integration::Activeness];

    pub fn name(self) -> &'static str {
        match self {
            Integration::Naive => "naive",
            Integration::XOut => "x-out",
            Integration::Repair => "repair",
            Integration::HierSampling => "hier-sampling",
            Integration::Activeness => "activeness",
        }
    }
}

impl fmt::Display for Integration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Integration {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        Integration::ALL
            .into_iter()
            .find(|i| i.name() == key)
            .ok_or_else(|| format!("unknown integration level {s:?}"))
    }
}

/// Pareto dominance for minimization.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

/// Fast non-dominated sort. Returns fronts of indices, best first.
pub fn non_dominated_sort(objs: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let n = objs.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut count = vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            if dominates(&objs[i], &objs[j]) {
                dominated_by[i].push(j);
                count[j] += 1;
            } else if dominates(&objs[j], &objs[i]) {
                dominated_by[j].push(i);
                count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by[i] {
                count[j] -= 1;
                if count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each member of `front`, in the same order.
pub fn crowding_distance(objs: &[Vec<f64>], front: &[usize]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let n_obj = objs[front[0]].len();
    let mut order: Vec<usize> = (0..n).collect();
    for m in 0..n_obj {
        order.sort_by(|&a, &b| objs[front[a]][m].total_cmp(&objs[front[b]][m]));
        let lo = objs[front[order[0]]][m];
        let hi = objs[front[order[n - 1]]][m];
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if !(range.is_finite() && range > 0.0) {
            continue;
        }
        for k in 1..n - 1 {
            let gap = objs[front[order[k + 1]]][m] - objs[front[order[k - 1]]][m];
            dist[order[k]] += gap / range;
        }
    }
    dist
}

/// A genome with its objective values and total constraint violation.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub x: Vec<f64>,
    pub f: Vec<f64>,
    pub cv: f64,
}

impl Individual {
    /// Builds an individual from an evaluation. Failed evaluations get +∞
    /// objectives and violation.
    pub fn from_evaluation(x: Vec<f64>, f: &[f64], g: &[f64]) -> Self {
        if f.iter().chain(g).any(|v| v.is_nan()) {
            return Individual { x, f: vec![f64::INFINITY; f.len()], cv: f64::INFINITY };
        }
        let cv = g.iter().map(|&v| v.max(0.0)).sum();
        Individual { x, f: f.to_vec(), cv }
    }

    pub fn is_failed(&self) -> bool {
        self.cv == f64::INFINITY
    }

    pub fn is_feasible(&self) -> bool {
        self.cv == 0.0
    }
}

/// Sorts a population into fronts under constrained domination: feasible
/// individuals by Pareto fronts, then infeasible ones by increasing violation
/// (equal violations share a front).
pub fn constrained_sort(pop: &[Individual]) -> Vec<Vec<usize>> {
    let feasible: Vec<usize> = (0..pop.len()).filter(|&i| pop[i].is_feasible()).collect();
    let objs: Vec<Vec<f64>> = feasible.iter().map(|&i| pop[i].f.clone()).collect();
    let mut fronts: Vec<Vec<usize>> =
        non_dominated_sort(&objs).into_iter().map(|fr| fr.into_iter().map(|k| feasible[k]).collect()).collect();
    let mut infeasible: Vec<usize> = (0..pop.len()).filter(|&i| !pop[i].is_feasible()).collect();
    infeasible.sort_by(|&a, &b| pop[a].cv.total_cmp(&pop[b].cv).then(a.cmp(&b)));
    for i in infeasible {
        match fronts.last_mut() {
            Some(last) if !pop[last[0]].is_feasible() && pop[last[0]].cv == pop[i].cv => last.push(i),
            _ => fronts.push(vec![i]),
        }
    }
    fronts
}

/// Front rank and crowding distance of every individual.
pub fn rank_and_crowding(pop: &[Individual]) -> (Vec<usize>, Vec<f64>) {
    let mut rank = vec![0; pop.len()];
    let mut crowd = vec![0.0; pop.len()];
    let objs: Vec<Vec<f64>> = pop.iter().map(|p| p.f.clone()).collect();
    for (r, front) in constrained_sort(pop).iter().enumerate() {
        for (&i, d) in front.iter().zip(crowding_distance(&objs, front)) {
            rank[i] = r;
            crowd[i] = d;
        }
    }
    (rank, crowd)
}

/// Elitist survival: fills `n` slots front by front, breaking the last front
/// by decreasing crowding distance.
pub fn survive(pop: Vec<Individual>, n: usize) -> Vec<Individual> {
    if pop.len() <= n {
        return pop;
    }
    let objs: Vec<Vec<f64>> = pop.iter().map(|p| p.f.clone()).collect();
    let mut keep = Vec::with_capacity(n);
    for front in constrained_sort(&pop) {
        if keep.len() + front.len() <= n {
            keep.extend(front);
            continue;
        }
        let d = crowding_distance(&objs, &front);
        let mut order: Vec<usize> = (0..front.len()).collect();
        order.sort_by(|&a, &b| d[b].total_cmp(&d[a]).then(a.cmp(&b)));
        keep.extend(order.into_iter().take(n - keep.len()).map(|k| front[k]));
        break;
    }
    let mut slots: Vec<Option<Individual>> = pop.into_iter().map(Some).collect();
    keep.into_iter().map(|i| slots[i].take().expect("kept once")).collect()
}

/// Variation operator settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Variation {
    pub crossover_prob: f64,
    pub eta_c: f64,
    pub eta_m: f64,
    /// Per-gene mutation probability; `None` means 1/n_x.
    pub mutation_prob: Option<f64>,
}

impl Default for Variation {
    fn default() -> Self {
        Variation { crossover_prob: 0.9, eta_c: 15.0, eta_m: 20.0, mutation_prob: None }
    }
}

fn sbx_pair<R: Rng + ?Sized>(a: f64, b: f64, lo: f64, hi: f64, eta: f64, rng: &mut R) -> (f64, f64) {
    if (a - b).abs() <= 1e-14 || hi <= lo {
        return (a, b);
    }
    let (y1, y2) = if a < b { (a, b) } else { (b, a) };
    let u: f64 = rng.random();
    let child = |beta: f64| {
        let alpha = 2.0 - beta.powf(-(eta + 1.0));
        if u <= 1.0 / alpha {
            (u * alpha).powf(1.0 / (eta + 1.0))
        } else {
            (1.0 / (2.0 - u * alpha)).powf(1.0 / (eta + 1.0))
        }
    };
    let bq1 = child(1.0 + 2.0 * (y1 - lo) / (y2 - y1));
    let c1 = 0.5 * ((y1 + y2) - bq1 * (y2 - y1));
    let bq2 = child(1.0 + 2.0 * (hi - y2) / (y2 - y1));
    let c2 = 0.5 * ((y1 + y2) + bq2 * (y2 - y1));
    let (c1, c2) = (c1.clamp(lo, hi), c2.clamp(lo, hi));
    if rng.random_bool(0.5) {
        (c2, c1)
    } else {
        (c1, c2)
    }
}

fn polynomial_mutation<R: Rng + ?Sized>(y: f64, lo: f64, hi: f64, eta: f64, rng: &mut R) -> f64 {
    if hi <= lo {
        return y;
    }
    let d1 = (y - lo) / (hi - lo);
    let d2 = (hi - y) / (hi - lo);
    let u: f64 = rng.random();
    let p = 1.0 / (eta + 1.0);
    let dq = if u < 0.5 {
        let v = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1).powf(eta + 1.0);
        v.powf(p) - 1.0
    } else {
        let v = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2).powf(eta + 1.0);
        1.0 - v.powf(p)
    };
    (y + dq * (hi - lo)).clamp(lo, hi)
}

impl Variation {
    /// Recombines two parents into two children.
    pub fn crossover<R: Rng + ?Sized>(
        &self,
        space: &DesignSpace,
        a: &[f64],
        b: &[f64],
        rng: &mut R,
    ) -> (Vec<f64>, Vec<f64>) {
        let (mut c1, mut c2) = (a.to_vec(), b.to_vec());
        if !rng.random_bool(self.crossover_prob) {
            return (c1, c2);
        }
        for (i, v) in space.variables().iter().enumerate() {
            if !rng.random_bool(0.5) {
                continue;
            }
            if v.is_discrete() {
                std::mem::swap(&mut c1[i], &mut c2[i]);
            } else {
                let (lo, hi) = v.bounds();
                let (y1, y2) = sbx_pair(a[i], b[i], lo, hi, self.eta_c, rng);
                c1[i] = y1;
                c2[i] = y2;
            }
        }
        (c1, c2)
    }

    /// Mutates in place: polynomial mutation on continuous genes, random
    /// reset to a different option on discrete genes.
    pub fn mutate<R: Rng + ?Sized>(&self, space: &DesignSpace, x: &mut [f64], rng: &mut R) {
        let n = space.n_vars();
        let pm = self.mutation_prob.unwrap_or(1.0 / n.max(1) as f64).clamp(0.0, 1.0);
        for (i, v) in space.variables().iter().enumerate() {
            if !rng.random_bool(pm) {
                continue;
            }
            if v.is_discrete() {
                let k = v.n_options();
                if k > 1 {
                    let cur = x[i] as usize;
                    let r = rng.random_range(0..k - 1);
                    x[i] = (if r >= cur { r + 1 } else { r }) as f64;
                }
            } else {
                let (lo, hi) = v.bounds();
                x[i] = polynomial_mutation(x[i], lo, hi, self.eta_m, rng);
            }
        }
    }
}

/// Binary tournament on (rank, crowding). Failed individuals are only picked
/// when nothing else is available.
pub fn tournament<R: Rng + ?Sized>(pop: &[Individual], rank: &[usize], crowd: &[f64], rng: &mut R) -> usize {
    let pool: Vec<usize> = (0..pop.len()).filter(|&i| !pop[i].is_failed()).collect();
    let pool = if pool.is_empty() { (0..pop.len()).collect() } else { pool };
    let a = *pool.choose(rng).expect("non-empty population");
    let b = *pool.choose(rng).expect("non-empty population");
    if rank[a] != rank[b] {
        return if rank[a] < rank[b] { a } else { b };
    }
    if crowd[a] != crowd[b] {
        return if crowd[a] > crowd[b] { a } else { b };
    }
    if rng.random_bool(0.5) {
        a
    } else {
        b
    }
}

fn key(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

const DUPLICATE_RETRIES: usize = 20;

/// Produces `n` offspring by tournament, crossover, mutation and `repair`.
/// Children equal to a member of `seen` or to an earlier child are redrawn
/// a limited number of times.
pub fn make_offspring<R: Rng + ?Sized>(
    space: &DesignSpace,
    variation: &Variation,
    pop: &[Individual],
    n: usize,
    seen: &HashSet<Vec<u64>>,
    repair: &mut dyn FnMut(Vec<f64>, &mut R) -> Vec<f64>,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let (rank, crowd) = rank_and_crowding(pop);
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut fresh: HashSet<Vec<u64>> = HashSet::new();
    let mut retries = 0;
    while out.len() < n {
        let a = tournament(pop, &rank, &crowd, rng);
        let b = tournament(pop, &rank, &crowd, rng);
        let (mut c1, mut c2) = variation.crossover(space, &pop[a].x, &pop[b].x, rng);
        variation.mutate(space, &mut c1, rng);
        variation.mutate(space, &mut c2, rng);
        for c in [c1, c2] {
            if out.len() == n {
                break;
            }
            let c = repair(c, rng);
            let k = key(&c);
            if (seen.contains(&k) || fresh.contains(&k)) && retries < DUPLICATE_RETRIES * n {
                retries += 1;
                continue;
            }
            fresh.insert(k);
            out.push(c);
        }
    }
    out
}

/// Runs the generational loop on an arbitrary batch evaluator. `evaluate`
/// receives the generation index and the genomes and returns one individual
/// per genome, or fewer to signal that the budget ran out.
pub fn evolve<R, E>(
    space: &DesignSpace,
    variation: &Variation,
    pop_size: usize,
    n_gen: usize,
    init: Vec<Vec<f64>>,
    repair: &mut dyn FnMut(Vec<f64>, &mut R) -> Vec<f64>,
    evaluate: &mut dyn FnMut(usize, &[Vec<f64>], &mut R) -> Result<Vec<Individual>, E>,
    rng: &mut R,
) -> Result<Vec<Individual>, E>
where
    R: Rng + ?Sized,
{
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    let pop = evaluate(0, &init, rng)?;
    let done = pop.len() < init.len();
    seen.extend(pop.iter().map(|p| key(&p.x)));
    let mut pop = survive(pop, pop_size);
    if done || pop.is_empty() {
        return Ok(pop);
    }
    for gen in 1..=n_gen {
        let children = make_offspring(space, variation, &pop, pop_size, &seen, repair, rng);
        let evaluated = evaluate(gen, &children, rng)?;
        let done = evaluated.len() < children.len();
        seen.extend(evaluated.iter().map(|p| key(&p.x)));
        pop.extend(evaluated);
        pop = survive(pop, pop_size);
        if done {
            break;
        }
    }
    Ok(pop)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nsga2Config {
    /// Population size; at least 4 and even.
    pub pop_size: usize,
    pub n_gen: usize,
    /// Hard cap on problem evaluations, including the initial population.
    pub max_evals: Option<usize>,
    pub integration: Integration,
    #[serde(default)]
    pub variation: Variation,
}

impl Nsga2Config {
    /// Population of 10·n_x rounded up to an even number.
    pub fn for_space(space: &DesignSpace, n_gen: usize, integration: Integration) -> Self {
        let p = (10 * space.n_vars()).max(4);
        Nsga2Config { pop_size: p + p % 2, n_gen, max_evals: None, integration, variation: Variation::default() }
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        if self.pop_size < 4 || self.pop_size % 2 != 0 {
            return Err(OptimError::Config(format!("population size {} must be even and at least 4", self.pop_size)));
        }
        if !(0.0..=1.0).contains(&self.variation.crossover_prob) {
            return Err(OptimError::Config("crossover probability must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Initial design for a run: hierarchical sampling at the upper integration
/// levels (topped up by corrected Sobol' points when a purely discrete space
/// has fewer valid vectors than requested), corrected Sobol' points under
/// repair, raw Sobol' points below that.
pub fn initial_design(
    space: &DesignSpace,
    n: usize,
    integration: Integration,
    corrector: &Corrector,
    seed: u64,
) -> Result<Vec<Vec<f64>>, OptimError> {
    match integration {
        Integration::Naive | Integration::XOut => {
            let mut s = SobolSampler::new(space.n_vars().max(1), seed);
            Ok((0..n).map(|_| unit_to_declared(space, &s.next_point())).collect())
        }
        Integration::Repair => Ok(sample_nonhierarchical(space, n, corrector, seed)?.x),
        Integration::HierSampling | Integration::Activeness => {
            match sample_hierarchical(space, n, Grouping::ByXAct, Weighting::Uniform, seed) {
                Ok(doe) => {
                    let mut x = doe.x;
                    if x.len() < n {
                        let extra = sample_nonhierarchical(space, n - x.len(), corrector, seed ^ 0x5eed)?;
                        x.extend(extra.x);
                    }
                    Ok(x)
                }
                Err(_) => Ok(sample_nonhierarchical(space, n, corrector, seed)?.x),
            }
        }
    }
}

/// Outcome of an NSGA-II run.
#[derive(Debug, Clone)]
pub struct Nsga2Result {
    pub record: RunRecord,
    pub population: Vec<Individual>,
}

/// Runs NSGA-II on a problem. Evaluations go through `evaluator`, which
/// corrects, logs and (when resuming) replays them.
pub fn nsga2_run(
    evaluator: &mut Evaluator<'_>,
    config: &Nsga2Config,
    header: RunHeader,
    seed: u64,
) -> Result<Nsga2Result, OptimError> {
    config.validate()?;
    let space = evaluator.space().clone();
    let corrector = evaluator.corrector().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let integration = config.integration;
    let budget = config.max_evals.unwrap_or(usize::MAX);

    let init = initial_design(&space, config.pop_size, integration, &corrector, seed)?;
    let mut repair = |x: Vec<f64>, rng: &mut ChaCha8Rng| -> Vec<f64> {
        if integration >= Integration::Repair {
            corrector.correct(&space, &x, rng).unwrap_or_else(|_| space.impute(&x).0)
        } else {
            x
        }
    };
    let mut evaluate = |gen: usize, xs: &[Vec<f64>], rng: &mut ChaCha8Rng| -> Result<Vec<Individual>, RecordError> {
        let room = budget.saturating_sub(evaluator.n_evals());
        let xs = &xs[..xs.len().min(room)];
        let seeds: Vec<u64> = xs.iter().map(|_| rng.random()).collect();
        let records: Vec<EvalRecord> = evaluator.evaluate(gen, xs, &seeds)?;
        Ok(xs
            .iter()
            .zip(records)
            .map(|(raw, r)| {
                let genome = if integration == Integration::Naive { raw.clone() } else { r.x };
                Individual::from_evaluation(genome, &r.f, &r.g)
            })
            .collect())
    };
    let population = evolve(
        &space,
        &config.variation,
        config.pop_size,
        config.n_gen,
        init,
        &mut repair,
        &mut evaluate,
        &mut rng,
    )?;
    let record = RunRecord { header, evals: evaluator.evals.clone() };
    Ok(Nsga2Result { record, population })
}
