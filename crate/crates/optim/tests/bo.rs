use std::collections::HashSet;

use archopt_core::problems::by_name;
use archopt_core::{Corrector, DesignSpace, Evaluation, Problem};
use archopt_optim::bo::{
    bo_run, expected_improvement, infill_criteria, lower_confidence_bound, min_euclidean_probability_of_improvement,
    min_probability_of_improvement, probability_of_improvement, select_batch, BoConfig, ConstraintMode, Incumbent,
};
use archopt_optim::gp::Prediction;
use archopt_optim::{Evaluator, Integration, OptimError, RunHeader};

struct Quadratic {
    space: DesignSpace,
}

impl Problem for Quadratic {
    fn name(&self) -> String {
        "quadratic".into()
    }
    fn space(&self) -> &DesignSpace {
        &self.space
    }
    fn n_obj(&self) -> usize {
        1
    }
    fn evaluate(&self, x: &[f64]) -> Evaluation {
        Evaluation { f: vec![(x[0] - 0.3).powi(2) + (x[1] + 0.4).powi(2)], g: vec![] }
    }
}

fn quadratic() -> Quadratic {
    Quadratic { space: DesignSpace::builder().continuous("a", -1.0, 1.0).continuous("b", -1.0, 1.0).build().unwrap() }
}

/// Fails everywhere.
struct Broken(Quadratic);

impl Problem for Broken {
    fn name(&self) -> String {
        "broken".into()
    }
    fn space(&self) -> &DesignSpace {
        &self.0.space
    }
    fn n_obj(&self) -> usize {
        1
    }
    fn evaluate(&self, _: &[f64]) -> Evaluation {
        Evaluation::failed(1, 0)
    }
}

fn pred(mean: f64, sd: f64) -> Prediction {
    Prediction { mean, sd }
}

fn header(p: &dyn Problem, seed: u64) -> RunHeader {
    RunHeader::new(&p.name(), "bo", serde_json::Value::Null, seed)
}

fn run(p: &dyn Problem, cfg: &BoConfig, seed: u64) -> Result<archopt_optim::bo::BoResult, OptimError> {
    let mut ev = Evaluator::new(p, Corrector::default_for(p.space(), p.correction_hook()));
    bo_run(&mut ev, cfg, header(p, seed), seed)
}

#[test]
fn single_objective_criteria() {
    assert_eq!(expected_improvement(1.0, pred(2.0, 0.0)), 0.0);
    assert_eq!(probability_of_improvement(1.0, pred(2.0, 0.0)), 0.0);
    let ei = expected_improvement(1.0, pred(1.0, 1.0));
    assert!((ei - 0.398_942_280_401_432_7).abs() < 1e-12);
    assert!((probability_of_improvement(1.0, pred(1.0, 1.0)) - 0.5).abs() < 1e-15);
    assert_eq!(lower_confidence_bound(pred(1.0, 0.25)), 0.5);
    // improvement without uncertainty takes the closed-form limit
    assert_eq!(expected_improvement(1.0, pred(0.25, 0.0)), 0.75);
    assert_eq!(probability_of_improvement(1.0, pred(0.25, 0.0)), 1.0);
    let c = infill_criteria(&Incumbent::Best(1.0), &[pred(1.0, 1.0)]);
    assert_eq!(c.len(), 3);
    assert!((c[0] - 1.0).abs() < 1e-15);
}

#[test]
fn multi_objective_criteria() {
    let front = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
    let dominating = [pred(0.0, 1e-9), pred(0.0, 1e-9)];
    assert!((min_probability_of_improvement(&front, &dominating) - 1.0).abs() < 1e-12);
    // a point on the front cannot improve on itself
    let on_front = [pred(0.0, 1e-9), pred(1.0, 1e-9)];
    assert!((min_probability_of_improvement(&front, &on_front) - 0.75).abs() < 1e-12);
    let dominated = [pred(2.0, 1e-9), pred(2.0, 1e-9)];
    assert!(min_probability_of_improvement(&front, &dominated) < 1e-12);
    // distance to the nearest member, per unit front extent: sqrt(0 + 1)
    let m = min_euclidean_probability_of_improvement(&front, &dominating);
    assert!((m - 1.0).abs() < 1e-12);
    let half = [pred(0.0, 1e-9), pred(0.5, 1e-9)];
    assert!((min_euclidean_probability_of_improvement(&front, &half) - 0.5).abs() < 1e-12);
}

#[test]
fn batch_selection_starts_at_the_compromise() {
    let objs = vec![vec![0.0, 1.0], vec![0.45, 0.45], vec![1.0, 0.0], vec![0.5, 0.52]];
    let picks = select_batch(&objs, 3);
    assert_eq!(picks[0], 1);
    assert_eq!(picks.len(), 3);
    let rest: HashSet<usize> = picks[1..].iter().copied().collect();
    assert_eq!(rest, HashSet::from([0, 2]));
}

#[test]
fn converges_on_quadratic() {
    let p = quadratic();
    let mut cfg = BoConfig::for_space(p.space(), 3, 20);
    cfg.n_doe = 9;
    let res = run(&p, &cfg, 1).unwrap();
    assert_eq!(res.record.evals.len(), 29);
    let best = res.record.evals.iter().map(|e| e.f[0]).fold(f64::INFINITY, f64::min);
    assert!(best < 1e-2, "best {best}");
}

#[test]
fn batches_are_distinct_and_valid() {
    let p = by_name("turbofan").unwrap();
    let mut cfg = BoConfig::for_space(p.space(), 2, 12);
    cfg.n_batch = 4;
    let res = run(p.as_ref(), &cfg, 5).unwrap();
    let evals = &res.record.evals;
    let n_doe = evals.iter().filter(|e| e.iter == 0).count();
    assert_eq!(evals.len(), n_doe + 12);
    for it in 1..=3 {
        let batch: Vec<_> = evals.iter().filter(|e| e.iter == it).collect();
        assert_eq!(batch.len(), 4);
        let keys: HashSet<Vec<u64>> = batch.iter().map(|e| e.x.iter().map(|v| v.to_bits()).collect()).collect();
        assert_eq!(keys.len(), 4);
    }
    for e in evals.iter().filter(|e| e.iter > 0) {
        assert!(!e.corrected && p.space().is_valid(&e.x));
    }
}

#[test]
fn viability_filter_avoids_failed_region() {
    let p = by_name("turbofan").unwrap();
    let mut doe_fail = 0;
    let mut doe_n = 0;
    let mut infill_fail = 0;
    let mut infill_n = 0;
    for seed in 0..2 {
        let mut cfg = BoConfig::for_space(p.space(), 10, 20);
        cfg.constraint = ConstraintMode::Pof { target: 0.5 };
        let res = run(p.as_ref(), &cfg, seed).unwrap();
        for e in &res.record.evals {
            if e.iter == 0 {
                doe_n += 1;
                doe_fail += usize::from(!e.viable);
            } else {
                infill_n += 1;
                infill_fail += usize::from(!e.viable);
                assert!(!e.corrected && p.space().is_valid(&e.x));
            }
        }
    }
    let doe_rate = doe_fail as f64 / doe_n as f64;
    let infill_rate = infill_fail as f64 / infill_n as f64;
    assert!(infill_rate < doe_rate, "infill {infill_rate} vs doe {doe_rate}");
}

#[test]
fn runs_are_deterministic() {
    let p = by_name("toy").unwrap();
    let cfg = BoConfig::for_space(p.space(), 3, 5);
    let a = run(p.as_ref(), &cfg, 8).unwrap().record;
    let b = run(p.as_ref(), &cfg, 8).unwrap().record;
    assert_eq!(a, b);
}

#[test]
fn aborts_without_viable_points() {
    let p = Broken(quadratic());
    let cfg = BoConfig::for_space(p.space(), 3, 5);
    assert!(matches!(run(&p, &cfg, 0), Err(OptimError::NoViablePoints(_))));
}

#[test]
fn rejects_bad_configs() {
    let p = quadratic();
    let mut cfg = BoConfig::for_space(p.space(), 3, 5);
    cfg.integration = Integration::Naive;
    assert!(matches!(run(&p, &cfg, 0), Err(OptimError::Config(_))));
    let mut cfg = BoConfig::for_space(p.space(), 3, 5);
    cfg.pov_min = 1.0;
    assert!(matches!(run(&p, &cfg, 0), Err(OptimError::Config(_))));
}
