//! Bayesian optimization with an infill-criterion ensemble, viability and
//! constraint filtering, and batch selection.

use std::collections::HashSet;

use archopt_core::DesignSpace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::gp::{FitOptions, GpModel, KernelSpec, Prediction};
use crate::nsga2::{constrained_sort, evolve, initial_design, non_dominated_sort, Individual, Integration, Variation};
use crate::record::{EvalRecord, Evaluator, RunHeader, RunRecord};
use crate::OptimError;

/// Multiplier of the standard deviation in the lower confidence bound.
pub const LCB_LAMBDA: f64 = 2.0;

fn std_normal() -> Normal {
    Normal::standard()
}

/// Φ(num/sd) with the limits for sd = 0.
fn cdf_ratio(num: f64, sd: f64) -> f64 {
    if sd > 0.0 {
        std_normal().cdf(num / sd)
    } else if num > 0.0 {
        1.0
    } else if num < 0.0 {
        0.0
    } else {
        0.5
    }
}

pub fn lower_confidence_bound(p: Prediction) -> f64 {
    p.mean - LCB_LAMBDA * p.sd
}

pub fn expected_improvement(y_min: f64, p: Prediction) -> f64 {
    let d = y_min - p.mean;
    if p.sd <= 0.0 {
        return d.max(0.0);
    }
    let z = d / p.sd;
    let n = std_normal();
    (d * n.cdf(z) + p.sd * n.pdf(z)).max(0.0)
}

pub fn probability_of_improvement(y_min: f64, p: Prediction) -> f64 {
    if p.sd <= 0.0 {
        return if p.mean < y_min { 1.0 } else { 0.0 };
    }
    std_normal().cdf((y_min - p.mean) / p.sd)
}

/// Minimum over front members of the probability that the prediction is not
/// dominated by that member.
pub fn min_probability_of_improvement(front: &[Vec<f64>], preds: &[Prediction]) -> f64 {
    front
        .iter()
        .map(|fj| {
            let p_dominated: f64 = preds.iter().zip(fj).map(|(p, &f)| cdf_ratio(p.mean - f, p.sd)).product();
            1.0 - p_dominated
        })
        .fold(1.0, f64::min)
}

/// MPoI scaled by the Euclidean distance from the predicted mean to the
/// nearest front member, with each objective normalized by the front extent.
pub fn min_euclidean_probability_of_improvement(front: &[Vec<f64>], preds: &[Prediction]) -> f64 {
    let n_obj = preds.len();
    let extent: Vec<f64> = (0..n_obj)
        .map(|m| {
            let lo = front.iter().map(|f| f[m]).fold(f64::INFINITY, f64::min);
            let hi = front.iter().map(|f| f[m]).fold(f64::NEG_INFINITY, f64::max);
            if hi > lo {
                hi - lo
            } else {
                1.0
            }
        })
        .collect();
    let d_min = front
        .iter()
        .map(|fj| {
            preds.iter().zip(fj).zip(&extent).map(|((p, &f), &e)| ((p.mean - f) / e).powi(2)).sum::<f64>().sqrt()
        })
        .fold(f64::INFINITY, f64::min);
    min_probability_of_improvement(front, preds) * d_min
}

/// Best-so-far reference for the infill criteria.
#[derive(Debug, Clone, PartialEq)]
pub enum Incumbent {
    Best(f64),
    Front(Vec<Vec<f64>>),
}

/// Ensemble criteria at one point, oriented so that larger is better:
/// (−LCB, EI, PoI) for one objective, (MPoI, MEPoI) for several.
pub fn infill_criteria(incumbent: &Incumbent, preds: &[Prediction]) -> Vec<f64> {
    match incumbent {
        Incumbent::Best(y_min) => {
            let p = preds[0];
            vec![-lower_confidence_bound(p), expected_improvement(*y_min, p), probability_of_improvement(*y_min, p)]
        }
        Incumbent::Front(front) => vec![
            min_probability_of_improvement(front, preds),
            min_euclidean_probability_of_improvement(front, preds),
        ],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum ConstraintMode {
    /// Predicted constraint means must satisfy g ≤ 0.
    Mean,
    /// The probability of satisfying each constraint must reach `target`.
    Pof { target: f64 },
}

impl ConstraintMode {
    pub const DEFAULT_POF_TARGET: f64 = 0.5;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoConfig {
    pub n_doe: usize,
    /// Number of infill evaluations after the DoE.
    pub n_infill: usize,
    pub n_batch: usize,
    pub integration: Integration,
    pub constraint: ConstraintMode,
    pub pov_min: f64,
    pub inner_pop: usize,
    pub inner_gen: usize,
    /// Likelihood starts for the fit on the DoE.
    pub fit_starts: usize,
    /// Likelihood starts for later refits, in addition to the warm start.
    pub refit_starts: usize,
    pub fit_iters: u64,
    /// Hyperparameters are re-optimized every this many iterations and
    /// reused in between.
    pub refit_every: usize,
}

impl BoConfig {
    /// Defaults with a DoE of `doe_mult`·n_x points.
    pub fn for_space(space: &DesignSpace, doe_mult: usize, n_infill: usize) -> Self {
        BoConfig {
            n_doe: (doe_mult * space.n_vars()).max(2),
            n_infill,
            n_batch: 1,
            integration: Integration::Activeness,
            constraint: ConstraintMode::Mean,
            pov_min: 0.25,
            inner_pop: 50,
            inner_gen: 30,
            fit_starts: 5,
            refit_starts: 1,
            fit_iters: 150,
            refit_every: 4,
        }
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        if self.n_doe < 2 {
            return Err(OptimError::Config("n_doe must be at least 2".into()));
        }
        if self.refit_every == 0 {
            return Err(OptimError::Config("refit_every must be at least 1".into()));
        }
        if self.n_batch == 0 {
            return Err(OptimError::Config("batch size must be at least 1".into()));
        }
        if !(self.pov_min > 0.0 && self.pov_min < 1.0) {
            return Err(OptimError::Config("pov_min must be in (0, 1)".into()));
        }
        if self.integration < Integration::Repair {
            return Err(OptimError::Config(format!(
                "integration level {} is not supported by BO; use repair, hier-sampling or activeness",
                self.integration
            )));
        }
        if let ConstraintMode::Pof { target } = self.constraint {
            if !(target > 0.0 && target < 1.0) {
                return Err(OptimError::Config("PoF target must be in (0, 1)".into()));
            }
        }
        if self.inner_pop < 4 || self.inner_pop % 2 != 0 {
            return Err(OptimError::Config("inner population must be even and at least 4".into()));
        }
        Ok(())
    }
}

fn key(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

/// Surrogates of one iteration: one model per objective and constraint,
/// trained on viable points, plus the viability model.
struct Surrogates {
    f: Vec<GpModel>,
    g: Vec<GpModel>,
    pov: Option<GpModel>,
}

impl Surrogates {
    fn predict(&self, space: &DesignSpace, x: &[f64]) -> Result<(Vec<Prediction>, Vec<Prediction>, f64), OptimError> {
        let mask = space.mask(x);
        let f = self.f.iter().map(|m| m.predict(x, &mask)).collect::<Result<Vec<_>, _>>()?;
        let g = self.g.iter().map(|m| m.predict(x, &mask)).collect::<Result<Vec<_>, _>>()?;
        let pov = match &self.pov {
            Some(m) => m.predict(x, &mask)?.mean.clamp(0.0, 1.0),
            None => 1.0,
        };
        Ok((f, g, pov))
    }
}

/// Fits models, reusing the previous hyperparameters as a warm start or, when
/// `optimize` is off, as they are.
struct ModelFitter<'a> {
    space: &'a DesignSpace,
    config: &'a BoConfig,
    spec: KernelSpec,
    warm: Vec<Option<Vec<f64>>>,
    optimize: bool,
    seed: u64,
}

impl ModelFitter<'_> {
    fn fit(&mut self, slot: usize, x: &[Vec<f64>], masks: &[Vec<bool>], y: &[f64]) -> Result<GpModel, OptimError> {
        if self.warm.len() <= slot {
            self.warm.resize(slot + 1, None);
        }
        let warm = self.warm[slot].clone();
        if let (false, Some(params)) = (self.optimize, &warm) {
            return Ok(GpModel::with_params(self.space, x, masks, y, self.spec, params)?);
        }
        let n_starts = if warm.is_some() { self.config.refit_starts + 1 } else { self.config.fit_starts };
        let opts = FitOptions { n_starts, max_iters: self.config.fit_iters, warm_start: warm, seed: self.seed };
        let model = GpModel::fit(self.space, x, masks, y, self.spec, &opts)?;
        self.warm[slot] = Some(model.params().to_vec());
        Ok(model)
    }
}

/// Training set with duplicate vectors removed (first occurrence kept).
fn unique_records(evals: &[EvalRecord]) -> Vec<&EvalRecord> {
    let mut seen = HashSet::new();
    evals.iter().filter(|e| seen.insert(key(&e.x))).collect()
}

fn incumbent(evals: &[&EvalRecord], n_obj: usize) -> Incumbent {
    let viable: Vec<&&EvalRecord> = evals.iter().filter(|e| e.viable).collect();
    let feasible: Vec<&&EvalRecord> = viable.iter().copied().filter(|e| e.is_feasible()).collect();
    let pool = if feasible.is_empty() { viable } else { feasible };
    if n_obj == 1 {
        return Incumbent::Best(pool.iter().map(|e| e.f[0]).fold(f64::INFINITY, f64::min));
    }
    let objs: Vec<Vec<f64>> = pool.iter().map(|e| e.f.clone()).collect();
    let first = non_dominated_sort(&objs).into_iter().next().unwrap_or_default();
    Incumbent::Front(first.into_iter().map(|i| objs[i].clone()).collect())
}

/// Up to `n` evaluated designs, best first under constrained domination.
fn best_designs(evals: &[&EvalRecord], n: usize) -> Vec<Vec<f64>> {
    let pop: Vec<Individual> = evals.iter().map(|e| Individual::from_evaluation(e.x.clone(), &e.f, &e.g)).collect();
    let mut out = Vec::with_capacity(n);
    for front in constrained_sort(&pop) {
        for i in front {
            if out.len() == n || pop[i].is_failed() {
                return out;
            }
            out.push(pop[i].x.clone());
        }
    }
    out
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Picks `n` points from candidates given their (minimized) criterion
/// vectors: the compromise point closest to the ideal first, then maximin
/// spacing in normalized criterion space.
pub fn select_batch(objs: &[Vec<f64>], n: usize) -> Vec<usize> {
    if objs.is_empty() || n == 0 {
        return Vec::new();
    }
    let n_obj = objs[0].len();
    let mut lo = vec![f64::INFINITY; n_obj];
    let mut hi = vec![f64::NEG_INFINITY; n_obj];
    for o in objs {
        for m in 0..n_obj {
            lo[m] = lo[m].min(o[m]);
            hi[m] = hi[m].max(o[m]);
        }
    }
    let norm: Vec<Vec<f64>> = objs
        .iter()
        .map(|o| (0..n_obj).map(|m| if hi[m] > lo[m] { (o[m] - lo[m]) / (hi[m] - lo[m]) } else { 0.0 }).collect())
        .collect();
    let origin = vec![0.0; n_obj];
    let first = (0..norm.len())
        .min_by(|&a, &b| distance(&norm[a], &origin).total_cmp(&distance(&norm[b], &origin)).then(a.cmp(&b)))
        .expect("non-empty");
    let mut picked = vec![first];
    let mut d_min: Vec<f64> = norm.iter().map(|p| distance(p, &norm[first])).collect();
    while picked.len() < n.min(norm.len()) {
        let next = (0..norm.len())
            .filter(|i| !picked.contains(i))
            .max_by(|&a, &b| d_min[a].total_cmp(&d_min[b]).then(b.cmp(&a)))
            .expect("unpicked candidate");
        picked.push(next);
        for (i, p) in norm.iter().enumerate() {
            d_min[i] = d_min[i].min(distance(p, &norm[next]));
        }
    }
    picked
}

/// Outcome of a BO run.
#[derive(Debug, Clone)]
pub struct BoResult {
    pub record: RunRecord,
    /// Inner-search candidates rejected for duplicating evaluated points and
    /// replaced by mutated variants.
    pub n_perturbed: usize,
}

/// Runs the BO loop: DoE, then batches of infills until `n_infill`
/// evaluations have been made.
pub fn bo_run(
    evaluator: &mut Evaluator<'_>,
    config: &BoConfig,
    header: RunHeader,
    seed: u64,
) -> Result<BoResult, OptimError> {
    config.validate()?;
    let space = evaluator.space().clone();
    let corrector = evaluator.corrector().clone();
    let n_obj = evaluator.problem().n_obj();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = KernelSpec { hierarchical: config.integration == Integration::Activeness, ..KernelSpec::default() };
    let mut fitter =
        ModelFitter { space: &space, config, spec, warm: Vec::new(), optimize: true, seed: 0 };
    let variation = Variation::default();

    let doe = initial_design(&space, config.n_doe, config.integration, &corrector, seed)?;
    let seeds: Vec<u64> = doe.iter().map(|_| rng.random()).collect();
    evaluator.evaluate(0, &doe, &seeds)?;
    if !evaluator.evals.iter().any(|e| e.viable) {
        return Err(OptimError::NoViablePoints(format!(
            "none of the {} DoE points could be evaluated; increase the DoE size or check the problem",
            evaluator.evals.len()
        )));
    }

    let mut n_perturbed = 0;
    let mut iter = 0;
    let mut done = 0;
    while done < config.n_infill {
        iter += 1;
        let n_now = config.n_batch.min(config.n_infill - done);
        let train = unique_records(&evaluator.evals);
        let viable: Vec<&EvalRecord> = train.iter().copied().filter(|e| e.viable).collect();
        let xv: Vec<Vec<f64>> = viable.iter().map(|e| e.x.clone()).collect();
        let mv: Vec<Vec<bool>> = viable.iter().map(|e| e.active.clone()).collect();
        fitter.seed = rng.random();
        fitter.optimize = (iter - 1) % config.refit_every == 0;
        let mut f_models = Vec::with_capacity(n_obj);
        for m in 0..n_obj {
            let y: Vec<f64> = viable.iter().map(|e| e.f[m]).collect();
            f_models.push(fitter.fit(m, &xv, &mv, &y)?);
        }
        let n_con = viable[0].g.len();
        let mut g_models = Vec::with_capacity(n_con);
        for k in 0..n_con {
            let y: Vec<f64> = viable.iter().map(|e| e.g[k]).collect();
            g_models.push(fitter.fit(n_obj + k, &xv, &mv, &y)?);
        }
        let pov = if train.iter().all(|e| e.viable) {
            None
        } else {
            let xa: Vec<Vec<f64>> = train.iter().map(|e| e.x.clone()).collect();
            let ma: Vec<Vec<bool>> = train.iter().map(|e| e.active.clone()).collect();
            let y: Vec<f64> = train.iter().map(|e| if e.viable { 1.0 } else { 0.0 }).collect();
            Some(fitter.fit(n_obj + n_con, &xa, &ma, &y)?)
        };
        let models = Surrogates { f: f_models, g: g_models, pov };
        let inc = incumbent(&train, n_obj);

        let evaluated: HashSet<Vec<u64>> = evaluator.evals.iter().map(|e| key(&e.x)).collect();
        let inner_seed: u64 = rng.random();
        let mut inner_rng = ChaCha8Rng::seed_from_u64(inner_seed);
        let mut init = initial_design(&space, config.inner_pop, config.integration, &corrector, inner_seed)?;
        // start the infill search from the best evaluated designs as well
        let n_seeded = (config.inner_pop / 5).min(init.len());
        for (slot, x) in best_designs(&train, n_seeded).into_iter().enumerate() {
            init[slot] = x;
        }
        let mut repair = |x: Vec<f64>, r: &mut ChaCha8Rng| corrector.correct(&space, &x, r).unwrap_or_else(|_| space.impute(&x).0);
        let constraint = config.constraint;
        let pov_min = config.pov_min;
        let mut surrogate_eval = |_: usize, xs: &[Vec<f64>], _: &mut ChaCha8Rng| -> Result<Vec<Individual>, OptimError> {
            xs.iter()
                .map(|x| {
                    let (fp, gp, pv) = models.predict(&space, x)?;
                    let crit = infill_criteria(&inc, &fp);
                    let objs: Vec<f64> = crit.iter().map(|c| -c).collect();
                    let mut cv = (pov_min - pv).max(0.0);
                    for p in &gp {
                        cv += match constraint {
                            ConstraintMode::Mean => p.mean.max(0.0),
                            ConstraintMode::Pof { target } => (target - cdf_ratio(-p.mean, p.sd)).max(0.0),
                        };
                    }
                    Ok(Individual { x: x.clone(), f: objs, cv })
                })
                .collect()
        };
        let pop = evolve(
            &space,
            &variation,
            config.inner_pop,
            config.inner_gen,
            init,
            &mut repair,
            &mut surrogate_eval,
            &mut inner_rng,
        )?;

        // candidates: new points, best fronts first
        let mut cands: Vec<&Individual> = Vec::new();
        let mut cand_keys: HashSet<Vec<u64>> = HashSet::new();
        for front in constrained_sort(&pop) {
            for i in front {
                let k = key(&pop[i].x);
                if !evaluated.contains(&k) && cand_keys.insert(k) {
                    cands.push(&pop[i]);
                }
            }
            if cands.len() >= n_now {
                break;
            }
        }
        let first_front: Vec<Vec<f64>> = cands.iter().map(|c| c.f.clone()).collect();
        let mut batch: Vec<Vec<f64>> =
            select_batch(&first_front, n_now).into_iter().map(|i| cands[i].x.clone()).collect();

        // inner search exhausted: perturb known points until new ones appear
        let mut taken: HashSet<Vec<u64>> = evaluated.clone();
        taken.extend(batch.iter().map(|x| key(x)));
        let mut attempts = 0;
        while batch.len() < n_now && attempts < 10_000 {
            attempts += 1;
            let base = &pop[inner_rng.random_range(0..pop.len())].x;
            let mut x = base.clone();
            let strong = Variation { mutation_prob: Some((2.0 / space.n_vars() as f64).min(1.0)), ..variation };
            strong.mutate(&space, &mut x, &mut inner_rng);
            let x = repair(x, &mut inner_rng);
            if taken.insert(key(&x)) {
                batch.push(x);
                n_perturbed += 1;
            }
        }
        if batch.is_empty() {
            break;
        }
        let seeds: Vec<u64> = batch.iter().map(|_| rng.random()).collect();
        evaluator.evaluate(iter, &batch, &seeds)?;
        done += batch.len();
    }
    let record = RunRecord { header, evals: evaluator.evals.clone() };
    Ok(BoResult { record, n_perturbed })
}
