use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use archopt_core::problems::by_name;
use archopt_core::{Corrector, KnownOptimum, Problem};
use archopt_optim::bench::{
    aggregate, by_evaluation, delta_hv_ratio, delta_hv_series, max_viable_objective, median, quartile_bands,
    rank as rank_configs, regret, select_best, Aggregate, ProblemRanking, Summary,
};
use archopt_optim::bo::{bo_run, BoConfig, ConstraintMode};
use archopt_optim::nsga2::{nsga2_run, non_dominated_sort};
use archopt_optim::{
    EvalRecord, Evaluator, Integration, Nsga2Config, OptimError, RecordError, RunHeader, RunRecord, RunWriter,
};
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::{emit, read_text, to_json, write_atomic, CliError, CliResult, Format, Global, Meta};

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Nsga2,
    Bo,
}

impl Algo {
    fn name(self) -> &'static str {
        match self {
            Algo::Nsga2 => "nsga2",
            Algo::Bo => "bo",
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegrationArg {
    Naive,
    XOut,
    Repair,
    HierSampling,
    Activeness,
}

impl From<IntegrationArg> for Integration {
    fn from(a: IntegrationArg) -> Self {
        match a {
            IntegrationArg::Naive => Integration::Naive,
            IntegrationArg::XOut => Integration::XOut,
            IntegrationArg::Repair => Integration::Repair,
            IntegrationArg::HierSampling => Integration::HierSampling,
            IntegrationArg::Activeness => Integration::Activeness,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintArg {
    Mean,
    Pof,
}

/// Algorithm settings shared by `optimize` flags and bench configuration
/// entries. Unset values take the defaults.
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Knobs {
    #[arg(long, value_enum)]
    pub integration: Option<IntegrationArg>,
    /// NSGA-II population size (default 10 per variable).
    #[arg(long)]
    pub pop_size: Option<usize>,
    /// NSGA-II generations (default 20).
    #[arg(long)]
    pub n_gen: Option<usize>,
    /// NSGA-II evaluation budget.
    #[arg(long)]
    pub max_evals: Option<usize>,
    /// BO initial design size per variable (default 3).
    #[arg(long)]
    pub n_doe_mult: Option<usize>,
    /// BO infill evaluations (default 40).
    #[arg(long)]
    pub n_infill: Option<usize>,
    /// BO infill batch size (default 1).
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long, value_enum)]
    pub constraint: Option<ConstraintArg>,
    /// Minimum predicted viability of BO infill points.
    #[arg(long)]
    pub pov_min: Option<f64>,
    /// Target probability of feasibility under `--constraint pof`.
    #[arg(long)]
    pub pof_target: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
enum Settings {
    Nsga2(Nsga2Config),
    Bo(BoConfig),
}

fn settings(problem: &dyn Problem, algo: Algo, k: &Knobs) -> Settings {
    let space = problem.space();
    let integration = k.integration.map(Integration::from).unwrap_or(Integration::Activeness);
    match algo {
        Algo::Nsga2 => {
            let mut c = Nsga2Config::for_space(space, k.n_gen.unwrap_or(20), integration);
            if let Some(p) = k.pop_size {
                c.pop_size = p;
            }
            c.max_evals = k.max_evals;
            Settings::Nsga2(c)
        }
        Algo::Bo => {
            let mut c = BoConfig::for_space(space, k.n_doe_mult.unwrap_or(3), k.n_infill.unwrap_or(40));
            c.integration = integration;
            if let Some(b) = k.batch {
                c.n_batch = b;
            }
            if let Some(p) = k.pov_min {
                c.pov_min = p;
            }
            if k.constraint == Some(ConstraintArg::Pof) {
                c.constraint =
                    ConstraintMode::Pof { target: k.pof_target.unwrap_or(ConstraintMode::DEFAULT_POF_TARGET) };
            }
            Settings::Bo(c)
        }
    }
}

fn optim_err(e: OptimError) -> CliError {
    match e {
        OptimError::Config(_) | OptimError::NoViablePoints(_) | OptimError::Record(_) => CliError::user(e.to_string()),
        OptimError::Sampling(_) | OptimError::Gp(_) => CliError::internal(e.to_string()),
    }
}

fn record_err(path: &Path, e: RecordError) -> CliError {
    CliError::user(format!("{}: {e}", path.display()))
}

fn problem_by_name(name: &str) -> CliResult<Box<dyn Problem>> {
    by_name(name).ok_or_else(|| {
        CliError::user(format!(
            "unknown problem {name:?}; built-in problems: {}",
            archopt_core::problems::PROBLEM_NAMES.join(", ")
        ))
    })
}

struct RunSpec {
    problem: String,
    name: String,
    algo: Algo,
    knobs: Knobs,
    seed: u64,
}

impl RunSpec {
    fn header(&self, settings: &Settings) -> RunHeader {
        let config = json!({ "name": self.name, "settings": settings });
        RunHeader::new(&self.problem, self.algo.name(), config, self.seed)
    }

    /// Runs to `path`, appending to what is already logged there when
    /// `resume` is set.
    fn execute(&self, path: &Path, resume: bool, parallel: bool) -> CliResult<RunRecord> {
        let problem = problem_by_name(&self.problem)?;
        let settings = settings(problem.as_ref(), self.algo, &self.knobs);
        let header = self.header(&settings);
        let (writer, replay) = if resume {
            RunWriter::resume(path, &header).map_err(|e| record_err(path, e))?
        } else {
            (RunWriter::create(path, &header).map_err(|e| record_err(path, e))?, Vec::new())
        };
        let corrector = Corrector::default_for(problem.space(), problem.correction_hook());
        let mut ev = Evaluator::new(problem.as_ref(), corrector).with_writer(writer).with_replay(replay);
        ev.parallel = parallel;
        Ok(match &settings {
            Settings::Nsga2(c) => nsga2_run(&mut ev, c, header, self.seed).map_err(optim_err)?.record,
            Settings::Bo(c) => bo_run(&mut ev, c, header, self.seed).map_err(optim_err)?.record,
        })
    }
}

#[derive(Args, Debug)]
pub struct OptimizeArgs {
    /// Built-in problem name.
    pub problem: String,
    #[arg(long, value_enum)]
    pub algo: Algo,
    /// Run record (line-delimited JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Continue the run logged in `--out` instead of starting over.
    #[arg(long)]
    pub resume: bool,
    #[command(flatten)]
    pub knobs: Knobs,
}

#[derive(Serialize)]
struct RunSummary {
    n_evals: usize,
    n_viable: usize,
    n_feasible: usize,
    /// Best feasible objective values (single objective) or the feasible
    /// non-dominated set (several objectives).
    best: Vec<Vec<f64>>,
    final_delta_hv: Option<f64>,
}

fn summarize(problem: &dyn Problem, record: &RunRecord) -> RunSummary {
    let evals = &record.evals;
    let feasible: Vec<Vec<f64>> = evals.iter().filter(|e| e.is_feasible()).map(|e| e.f.clone()).collect();
    let best = if problem.n_obj() == 1 {
        feasible.iter().min_by(|a, b| a[0].total_cmp(&b[0])).cloned().into_iter().collect()
    } else {
        let mut front: Vec<Vec<f64>> =
            non_dominated_sort(&feasible).first().map(|f| f.iter().map(|&i| feasible[i].clone()).collect()).unwrap_or_default();
        front.sort_by(|a, b| a[0].total_cmp(&b[0]));
        front.dedup();
        front
    };
    let final_delta_hv = problem.optimum().and_then(|k| delta_hv_series(evals, &k, None).last().copied());
    RunSummary {
        n_evals: evals.len(),
        n_viable: evals.iter().filter(|e| e.viable).count(),
        n_feasible: feasible.len(),
        best,
        final_delta_hv,
    }
}

pub fn optimize(g: &Global, a: &OptimizeArgs) -> CliResult<()> {
    let spec = RunSpec {
        problem: a.problem.clone(),
        name: format!(
            "{}-{}",
            a.algo.name(),
            Integration::from(a.knobs.integration.unwrap_or(IntegrationArg::Activeness)).name()
        ),
        algo: a.algo,
        knobs: a.knobs.clone(),
        seed: g.seed,
    };
    let record = spec.execute(&a.out, a.resume, g.threads != Some(1))?;
    let problem = problem_by_name(&a.problem)?;
    let summary = summarize(problem.as_ref(), &record);
    let meta = Meta::new("optimize", g.seed, record.header.config.clone());
    let text = match g.format.unwrap_or(Format::Text) {
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                meta: Meta<'a>,
                out: &'a Path,
                summary: &'a RunSummary,
            }
            to_json(&Out { meta, out: &a.out, summary: &summary })
        }
        Format::Csv => {
            let mut out = meta.comment();
            out.push_str("n_evals,n_viable,n_feasible,final_delta_hv\n");
            let dhv = summary.final_delta_hv.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{dhv}", summary.n_evals, summary.n_viable, summary.n_feasible);
            out
        }
        Format::Text => {
            let mut out = meta.comment();
            let _ = writeln!(out, "run record      {}", a.out.display());
            let _ = writeln!(out, "evaluations     {}", summary.n_evals);
            let _ = writeln!(out, "viable          {}", summary.n_viable);
            let _ = writeln!(out, "feasible        {}", summary.n_feasible);
            for f in &summary.best {
                let _ = writeln!(out, "best            {f:?}");
            }
            if let Some(d) = summary.final_delta_hv {
                let _ = writeln!(out, "final delta HV  {d:.6}");
            }
            out
        }
    };
    emit(None, &text)
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// JSON benchmark configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for the run records.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Write per-step quartiles of the ΔHV ratio as CSV.
    #[arg(long)]
    pub emit_plot: Option<PathBuf>,
    /// Ranking table output (stdout by default).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchConfig {
    problems: Vec<String>,
    repetitions: usize,
    configs: Vec<serde_json::Map<String, serde_json::Value>>,
}

struct BenchEntry {
    name: String,
    algo: Algo,
    knobs: Knobs,
}

fn parse_entry(mut m: serde_json::Map<String, serde_json::Value>, index: usize) -> CliResult<BenchEntry> {
    let ctx = |msg: String| CliError::user(format!("configs[{index}]: {msg}"));
    let name = match m.remove("name") {
        Some(serde_json::Value::String(s)) => s,
        _ => return Err(ctx("missing string field \"name\"".into())),
    };
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
        return Err(ctx(format!("name {name:?} may only use letters, digits, '-', '_' and '.'")));
    }
    let algo: Algo = serde_json::from_value(m.remove("algorithm").unwrap_or_default())
        .map_err(|_| ctx("field \"algorithm\" must be \"nsga2\" or \"bo\"".into()))?;
    let knobs: Knobs = serde_json::from_value(serde_json::Value::Object(m)).map_err(|e| ctx(e.to_string()))?;
    Ok(BenchEntry { name, algo, knobs })
}

pub fn bench(g: &Global, a: &BenchArgs) -> CliResult<()> {
    let text = read_text(&a.config)?;
    let cfg: BenchConfig =
        serde_json::from_str(&text).map_err(|e| CliError::user(format!("{}: {e}", a.config.display())))?;
    let entries =
        cfg.configs.into_iter().enumerate().map(|(i, m)| parse_entry(m, i)).collect::<CliResult<Vec<_>>>()?;
    for (i, e) in entries.iter().enumerate() {
        if entries[..i].iter().any(|o| o.name == e.name) {
            return Err(CliError::user(format!("duplicate configuration name {:?}", e.name)));
        }
    }
    for p in &cfg.problems {
        problem_by_name(p)?;
    }
    fs::create_dir_all(&a.out_dir)
        .map_err(|e| CliError::user(format!("cannot create {}: {e}", a.out_dir.display())))?;

    let mut jobs = Vec::new();
    for p in &cfg.problems {
        for e in &entries {
            for rep in 0..cfg.repetitions {
                let spec = RunSpec {
                    problem: p.clone(),
                    name: e.name.clone(),
                    algo: e.algo,
                    knobs: e.knobs.clone(),
                    seed: g.seed.wrapping_add(rep as u64),
                };
                let path = a.out_dir.join(format!("{p}__{}__r{rep:03}.jsonl", e.name));
                jobs.push((spec, path));
            }
        }
    }
    let verbose = g.verbose;
    let results: Vec<CliResult<()>> = jobs
        .par_iter()
        .map(|(spec, path)| {
            let r = bench_run(spec, path);
            if verbose {
                eprintln!("{}: {}", path.display(), if r.is_ok() { "done" } else { "failed" });
            }
            r
        })
        .collect();
    results.into_iter().collect::<CliResult<Vec<()>>>()?;

    let paths: Vec<PathBuf> = jobs.into_iter().map(|(_, p)| p).collect();
    let runs = paths.iter().map(|p| load_run(p)).collect::<CliResult<Vec<_>>>()?;
    let meta = Meta::new("bench", g.seed, serde_json::from_str(&text).unwrap_or_default());
    report(g, meta, &runs, a.out.as_deref(), a.emit_plot.as_deref())
}

/// One benchmark run. Logs to `<file>.partial` and renames on completion; a
/// finished file with a matching header is kept and a partial one resumed.
fn bench_run(spec: &RunSpec, path: &Path) -> CliResult<()> {
    if path.exists() {
        let problem = problem_by_name(&spec.problem)?;
        let header = spec.header(&settings(problem.as_ref(), spec.algo, &spec.knobs));
        return match RunRecord::read_jsonl(path).map_err(|e| record_err(path, e))? {
            Some(r) if r.header == header => Ok(()),
            _ => Err(CliError::user(format!("{} exists with a different configuration", path.display()))),
        };
    }
    let mut name = path.file_name().expect("run files have names").to_os_string();
    name.push(".partial");
    let partial = path.with_file_name(name);
    spec.execute(&partial, true, false)?;
    fs::rename(&partial, path).map_err(|e| CliError::user(format!("cannot write {}: {e}", path.display())))
}

#[derive(Args, Debug)]
pub struct RankArgs {
    /// Run record files or directories containing them.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Write per-step quartiles of the ΔHV ratio as CSV.
    #[arg(long)]
    pub emit_plot: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

struct LoadedRun {
    problem: String,
    config: String,
    evals: Vec<EvalRecord>,
}

fn load_run(path: &Path) -> CliResult<LoadedRun> {
    let rec = RunRecord::read_jsonl(path)
        .map_err(|e| record_err(path, e))?
        .ok_or_else(|| CliError::user(format!("{}: empty run record", path.display())))?;
    let config = match rec.header.config.get("name") {
        Some(serde_json::Value::String(s)) => s.clone(),
        _ => rec.header.algorithm.clone(),
    };
    Ok(LoadedRun { problem: rec.header.problem, config, evals: rec.evals })
}

fn collect_inputs(inputs: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| CliError::user(format!("cannot read {}: {e}", p.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            files.sort();
            out.extend(files);
        } else if p.is_file() {
            out.push(p.clone());
        } else {
            return Err(CliError::user(format!("no such file or directory: {}", p.display())));
        }
    }
    if out.is_empty() {
        return Err(CliError::user("no run records found"));
    }
    Ok(out)
}

pub fn rank(g: &Global, a: &RankArgs) -> CliResult<()> {
    let files = collect_inputs(&a.inputs)?;
    let runs = files.iter().map(|p| load_run(p)).collect::<CliResult<Vec<_>>>()?;
    report(g, Meta::new("rank", g.seed, json!({ "inputs": a.inputs })), &runs, a.out.as_deref(), a.emit_plot.as_deref())
}

#[derive(Debug, Serialize)]
struct ConfigRow {
    config: String,
    n: usize,
    mean_regret: f64,
    sd_regret: f64,
    median_final_delta_hv: f64,
    rank: usize,
}

#[derive(Debug, Serialize)]
struct ProblemTable {
    problem: String,
    rows: Vec<ConfigRow>,
}

#[derive(Debug, Serialize)]
struct Ranking {
    problems: Vec<ProblemTable>,
    overall: Vec<Aggregate>,
    selected: Option<String>,
}

struct PlotRow {
    problem: String,
    config: String,
    step: usize,
    band: [f64; 3],
}

fn first_seen<'a>(items: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for s in items {
        if !out.iter().any(|o| o == s) {
            out.push(s.to_string());
        }
    }
    out
}

/// Reference optimum of a problem: the built-in one, else the best found
/// over all runs.
fn reference_optimum(problem: &str, runs: &[&LoadedRun]) -> KnownOptimum {
    if let Some(k) = by_name(problem).and_then(|p| p.optimum()) {
        return k;
    }
    let feasible: Vec<Vec<f64>> =
        runs.iter().flat_map(|r| r.evals.iter().filter(|e| e.is_feasible()).map(|e| e.f.clone())).collect();
    if feasible.first().is_some_and(|f| f.len() > 1) {
        let front = non_dominated_sort(&feasible).swap_remove(0);
        KnownOptimum::Front(front.into_iter().map(|i| feasible[i].clone()).collect())
    } else {
        KnownOptimum::Value(feasible.iter().map(|f| f[0]).fold(f64::INFINITY, f64::min))
    }
}

fn build_ranking(runs: &[LoadedRun]) -> CliResult<(Ranking, Vec<PlotRow>)> {
    let configs = first_seen(runs.iter().map(|r| r.config.as_str()));
    let problems = first_seen(runs.iter().map(|r| r.problem.as_str()));
    let mut tables = Vec::new();
    let mut rankings = Vec::new();
    let mut plots = Vec::new();
    for p in &problems {
        let on_p: Vec<&LoadedRun> = runs.iter().filter(|r| &r.problem == p).collect();
        let known = reference_optimum(p, &on_p);
        let f_max = match known {
            KnownOptimum::Value(_) => {
                Some(on_p.iter().map(|r| max_viable_objective(&r.evals)).fold(f64::NEG_INFINITY, f64::max))
            }
            KnownOptimum::Front(_) => None,
        };
        let mut summaries = Vec::new();
        let mut medians = Vec::new();
        for c in &configs {
            let mut regrets = Vec::new();
            let mut finals = Vec::new();
            let mut ratios = Vec::new();
            for r in on_p.iter().filter(|r| &r.config == c) {
                let series = delta_hv_series(&by_evaluation(&r.evals), &known, f_max);
                let ratio = delta_hv_ratio(&series);
                regrets.push(regret(&ratio, 1.0).last().copied().unwrap_or(0.0));
                finals.push(series.last().copied().unwrap_or(f64::NAN));
                ratios.push(ratio);
            }
            if regrets.is_empty() {
                return Err(CliError::user(format!("configuration {c:?} has no runs on problem {p:?}")));
            }
            for (step, band) in quartile_bands(&ratios).into_iter().enumerate() {
                plots.push(PlotRow { problem: p.clone(), config: c.clone(), step, band });
            }
            summaries.push(Summary::of(c, &regrets));
            medians.push(median(&finals));
        }
        let ranks = rank_configs(&summaries, true);
        let rows = summaries
            .iter()
            .zip(&ranks)
            .zip(medians)
            .map(|((s, &rank), med)| ConfigRow {
                config: s.name.clone(),
                n: s.n,
                mean_regret: s.mean,
                sd_regret: s.sd,
                median_final_delta_hv: med,
                rank,
            })
            .collect();
        rankings.push(ProblemRanking { ranks, mean_regret: summaries.iter().map(|s| s.mean).collect() });
        tables.push(ProblemTable { problem: p.clone(), rows });
    }
    let overall = aggregate(&configs, &rankings);
    let selected = select_best(&overall).map(|i| overall[i].name.clone());
    Ok((Ranking { problems: tables, overall, selected }, plots))
}

fn fmt_pct(v: f64) -> String {
    if v.is_finite() {
        format!("{:.1}", 100.0 * v)
    } else {
        "inf".into()
    }
}

fn report(
    g: &Global,
    meta: Meta<'_>,
    runs: &[LoadedRun],
    out: Option<&Path>,
    plot: Option<&Path>,
) -> CliResult<()> {
    let (ranking, plots) = build_ranking(runs)?;
    if let Some(path) = plot {
        let mut s = meta.comment();
        s.push_str("problem,config,step,q25,median,q75\n");
        for r in &plots {
            let _ = writeln!(s, "{},{},{},{},{},{}", r.problem, r.config, r.step, r.band[0], r.band[1], r.band[2]);
        }
        write_atomic(path, s.as_bytes())?;
    }
    let text = match g.format.unwrap_or(Format::Text) {
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                meta: Meta<'a>,
                ranking: &'a Ranking,
            }
            to_json(&Out { meta, ranking: &ranking })
        }
        Format::Csv => {
            let mut s = meta.comment();
            s.push_str("problem,config,n,mean_regret,sd_regret,median_final_delta_hv,rank,rank1_pct,rank2_pct,penalty_pct\n");
            for t in &ranking.problems {
                for r in &t.rows {
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{},{},{},,,",
                        t.problem, r.config, r.n, r.mean_regret, r.sd_regret, r.median_final_delta_hv, r.rank
                    );
                }
            }
            for a in &ranking.overall {
                let _ = writeln!(
                    s,
                    "all,{},,,,,,{},{},{}",
                    a.name,
                    fmt_pct(a.rank1_share),
                    fmt_pct(a.rank2_share),
                    fmt_pct(a.penalty)
                );
            }
            s
        }
        Format::Text => {
            let mut s = meta.comment();
            let w = ranking.overall.iter().map(|a| a.name.len()).max().unwrap_or(6).max(6);
            for t in &ranking.problems {
                let _ = writeln!(s, "problem {}", t.problem);
                let _ = writeln!(
                    s,
                    "  {:<w$}  {:>4}  {:>12}  {:>10}  {:>12}  {:>4}",
                    "config", "n", "mean regret", "sd", "median dHV", "rank"
                );
                for r in &t.rows {
                    let _ = writeln!(
                        s,
                        "  {:<w$}  {:>4}  {:>12.4}  {:>10.4}  {:>12.6}  {:>4}",
                        r.config, r.n, r.mean_regret, r.sd_regret, r.median_final_delta_hv, r.rank
                    );
                }
                s.push('\n');
            }
            let _ = writeln!(s, "overall");
            let _ = writeln!(s, "  {:<w$}  {:>8}  {:>8}  {:>10}", "config", "rank 1 %", "rank<=2 %", "penalty %");
            for a in &ranking.overall {
                let mark = if ranking.selected.as_deref() == Some(a.name.as_str()) { "  *" } else { "" };
                let _ = writeln!(
                    s,
                    "  {:<w$}  {:>8}  {:>9}  {:>10}{mark}",
                    a.name,
                    fmt_pct(a.rank1_share),
                    fmt_pct(a.rank2_share),
                    fmt_pct(a.penalty)
                );
            }
            s
        }
    };
    emit(out, &text)
}
