use std::fmt::Write as _;
use std::path::PathBuf;

use archopt_core::format::space_to_json;
use archopt_core::problems::by_name;
use archopt_core::sampling::sample_hierarchical;
use archopt_core::{hierarchy_stats, CorrectionMode, Corrector, DesignSpace, Grouping, LazyOrder, Metric, Weighting};
use clap::{Args, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::{emit, load_space, read_text, to_json, CliError, CliResult, Format, Global, Meta};

const ACTIVE_PREFIX: &str = "active:";

#[derive(Args, Debug)]
pub struct MetricsArgs {
    /// Built-in space name or JSON space file.
    pub space: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    /// Built-in space name or JSON space file.
    pub space: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = GroupingArg::Xact)]
    pub grouping: GroupingArg,
    #[arg(long, value_enum, default_value_t = WeightingArg::Uniform)]
    pub weighting: WeightingArg,
    /// Minimum rate diversity for a split under `--grouping mrd`.
    #[arg(long, default_value_t = Grouping::DEFAULT_RD_MIN)]
    pub rd_min: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum GroupingArg {
    None,
    Nact,
    Xact,
    Mrd,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum WeightingArg {
    Uniform,
    Nact,
    Size,
}

#[derive(Args, Debug)]
pub struct CorrectArgs {
    /// Built-in space name or JSON space file.
    pub space: String,
    /// CSV of declared vectors, one column per variable.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::EagerAny)]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value_t = MetricArg::Euclidean)]
    pub metric: MetricArg,
    #[arg(long, value_enum, default_value_t = OrderArg::DepthFirst)]
    pub order: OrderArg,
    #[arg(long)]
    pub randomized: bool,
    /// Trial limit for the lazy modes.
    #[arg(long)]
    pub max_trials: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum ModeArg {
    EagerAny,
    EagerGreedy,
    EagerSimilar,
    LazyAny,
    LazySimilar,
    /// The built-in problem's own correction.
    Problem,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum MetricArg {
    Euclidean,
    Manhattan,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum OrderArg {
    DepthFirst,
    DistanceFirst,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    /// Built-in space name or JSON space file.
    pub space: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn metrics(g: &Global, a: &MetricsArgs) -> CliResult<()> {
    let space = load_space(&a.space)?;
    let stats = hierarchy_stats(&space).map_err(|e| CliError::user(e.to_string()))?;
    let meta = Meta::new("metrics", g.seed, json!({ "space": a.space }));
    let text = match g.format.unwrap_or(Format::Json) {
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                meta: Meta<'a>,
                stats: &'a archopt_core::HierarchyStats,
            }
            to_json(&Out { meta, stats: &stats })
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["variable", "inactive_rate", "rd_all", "rd", "value_rates"]).map_err(csv_err)?;
            for r in &stats.rates {
                let rates: Vec<String> = r.value_rates.iter().map(f64::to_string).collect();
                w.write_record([
                    r.name.clone(),
                    r.inactive_rate.map(|v| v.to_string()).unwrap_or_default(),
                    r.rd_all.to_string(),
                    r.rd.to_string(),
                    rates.join(";"),
                ])
                .map_err(csv_err)?;
            }
            meta.comment() + &csv_string(w)?
        }
        Format::Text => meta.comment() + &metrics_table(&stats),
    };
    emit(a.out.as_deref(), &text)
}

fn pct(v: f64) -> String {
    format!("{:.1}%", 100.0 * v)
}

fn metrics_table(s: &archopt_core::HierarchyStats) -> String {
    let mut out = String::new();
    let rows: [(&str, String); 12] = [
        ("declared discrete", s.n_declared.to_string()),
        ("valid discrete", s.n_valid_discr.to_string()),
        ("correct discrete", s.n_corr_discr.to_string()),
        ("ir_d", format!("{:.3}", s.ir_d)),
        ("ir_c", format!("{:.3}", s.ir_c)),
        ("ir", format!("{:.3}", s.ir)),
        ("cr_d", format!("{:.3}", s.cr_d)),
        ("cr_c", format!("{:.3}", s.cr_c)),
        ("cr", format!("{:.3}", s.cr)),
        ("crf", format!("{:.3}", s.crf)),
        ("mrd", pct(s.mrd)),
        ("mrd (incl. inactive)", pct(s.mrd_all)),
    ];
    for (k, v) in rows {
        let _ = writeln!(out, "{k:<22}{v:>10}");
    }
    if s.rates.is_empty() {
        return out;
    }
    let width = s.rates.iter().map(|r| r.name.len()).max().unwrap_or(8).max(8);
    let _ = writeln!(out, "\n{:<width$}  {:>8}  {:>8}  {:>8}  rates", "variable", "inactive", "rd_all", "rd");
    for r in &s.rates {
        let inactive = r.inactive_rate.map(pct).unwrap_or_else(|| "-".into());
        let rates: Vec<String> = r.value_rates.iter().map(|&v| pct(v)).collect();
        let _ = writeln!(
            out,
            "{:<width$}  {:>8}  {:>8}  {:>8}  {}",
            r.name,
            inactive,
            pct(r.rd_all),
            pct(r.rd),
            rates.join(" ")
        );
    }
    out
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::internal(format!("csv: {e}"))
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> CliResult<String> {
    let bytes = w.into_inner().map_err(|e| CliError::internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::internal(e.to_string()))
}

/// CSV of design vectors followed by their activeness flags.
pub fn vectors_csv(space: &DesignSpace, xs: &[Vec<f64>], masks: &[Vec<bool>]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let names = space.variables().iter().map(|v| v.name.clone());
    let active = space.variables().iter().map(|v| format!("{ACTIVE_PREFIX}{}", v.name));
    w.write_record(names.chain(active)).map_err(csv_err)?;
    for (x, m) in xs.iter().zip(masks) {
        let vals = x.iter().map(f64::to_string);
        let flags = m.iter().map(|&b| if b { "1".to_string() } else { "0".to_string() });
        w.write_record(vals.chain(flags)).map_err(csv_err)?;
    }
    csv_string(w)
}

pub fn sample(g: &Global, a: &SampleArgs) -> CliResult<()> {
    let space = load_space(&a.space)?;
    let grouping = match a.grouping {
        GroupingArg::None => Grouping::None,
        GroupingArg::Nact => Grouping::ByNAct,
        GroupingArg::Xact => Grouping::ByXAct,
        GroupingArg::Mrd => Grouping::ByMrd { rd_min: a.rd_min },
    };
    let weighting = match a.weighting {
        WeightingArg::Uniform => Weighting::Uniform,
        WeightingArg::Nact => Weighting::NAct,
        WeightingArg::Size => Weighting::GroupSize,
    };
    let doe = sample_hierarchical(&space, a.n, grouping, weighting, g.seed).map_err(|e| CliError::user(e.to_string()))?;
    if g.verbose {
        eprintln!("group quotas {:?}, drawn {:?}, shortfall {}", doe.quotas, doe.drawn, doe.shortfall);
    }
    let meta = Meta::new(
        "sample",
        g.seed,
        json!({ "space": a.space, "n": a.n, "grouping": grouping, "weighting": weighting }),
    );
    let text = match g.format.unwrap_or(Format::Csv) {
        Format::Csv => meta.comment() + &vectors_csv(&space, &doe.x, &doe.masks)?,
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                meta: Meta<'a>,
                doe: &'a archopt_core::Doe,
            }
            to_json(&Out { meta, doe: &doe })
        }
        Format::Text => {
            let mut out = meta.comment();
            let _ = writeln!(out, "{:>6}  {:>6}  {:>6}", "group", "quota", "drawn");
            for (i, (q, d)) in doe.quotas.iter().zip(&doe.drawn).enumerate() {
                let _ = writeln!(out, "{i:>6}  {q:>6}  {d:>6}");
            }
            let _ = writeln!(out, "samples {}, shortfall {}", doe.x.len(), doe.shortfall);
            out
        }
    };
    emit(a.out.as_deref(), &text)
}

/// Reads declared vectors from CSV. Columns are matched to variables by name;
/// activeness columns are ignored.
fn read_vectors(space: &DesignSpace, text: &str) -> CliResult<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = r.headers().map_err(|e| CliError::user(format!("input: {e}")))?.clone();
    let mut column = vec![None; space.n_vars()];
    for (c, h) in headers.iter().enumerate() {
        if h.starts_with(ACTIVE_PREFIX) {
            continue;
        }
        let i = space.var_index(h).ok_or_else(|| CliError::user(format!("input: unknown column {h:?}")))?;
        column[i] = Some(c);
    }
    if let Some(i) = column.iter().position(Option::is_none) {
        return Err(CliError::user(format!("input: missing column {:?}", space.variables()[i].name)));
    }
    let mut out = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::user(format!("input: {e}")))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(row as u64 + 2);
        let x = column
            .iter()
            .map(|c| {
                let field = rec.get(c.expect("checked above")).unwrap_or("");
                field.parse::<f64>().map_err(|_| CliError::user(format!("input line {line}: bad number {field:?}")))
            })
            .collect::<CliResult<Vec<f64>>>()?;
        space.check(&x).map_err(|e| CliError::user(format!("input line {line}: {e}")))?;
        out.push(x);
    }
    Ok(out)
}

#[derive(Serialize)]
struct CorrectionSummary {
    rows: usize,
    changed_rows: usize,
    /// Changed values per variable.
    changes: Vec<(String, usize)>,
}

pub fn correct(g: &Global, a: &CorrectArgs) -> CliResult<()> {
    let space = load_space(&a.space)?;
    let metric = match a.metric {
        MetricArg::Euclidean => Metric::Euclidean,
        MetricArg::Manhattan => Metric::Manhattan,
    };
    let order = match a.order {
        OrderArg::DepthFirst => LazyOrder::DepthFirst,
        OrderArg::DistanceFirst => LazyOrder::DistanceFirst,
    };
    let mut corrector = match a.mode {
        ModeArg::EagerAny => Corrector::new(CorrectionMode::EagerAny),
        ModeArg::EagerGreedy => Corrector::new(CorrectionMode::EagerGreedy { randomized: a.randomized }),
        ModeArg::EagerSimilar => Corrector::new(CorrectionMode::EagerSimilar { metric, randomized: a.randomized }),
        ModeArg::LazyAny => Corrector::new(CorrectionMode::LazyAny { randomized: a.randomized }),
        ModeArg::LazySimilar => Corrector::new(CorrectionMode::LazySimilar { order, metric }),
        ModeArg::Problem => {
            let hook = by_name(&a.space).and_then(|p| p.correction_hook()).ok_or_else(|| {
                CliError::user(format!("{:?} has no problem-specific correction", a.space))
            })?;
            Corrector::with_hook(hook)
        }
    };
    if let Some(t) = a.max_trials {
        corrector.max_trials = t;
    }
    let xs = read_vectors(&space, &read_text(&a.input)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
    let mut fixed = Vec::with_capacity(xs.len());
    let mut per_var = vec![0usize; space.n_vars()];
    let mut changed_rows = 0;
    for (row, x) in xs.iter().enumerate() {
        let y = corrector.correct(&space, x, &mut rng).map_err(|e| CliError::user(format!("row {}: {e}", row + 1)))?;
        let mut changed = false;
        for (i, (u, v)) in x.iter().zip(&y).enumerate() {
            if u.to_bits() != v.to_bits() {
                per_var[i] += 1;
                changed = true;
            }
        }
        changed_rows += usize::from(changed);
        fixed.push(y);
    }
    let masks: Vec<Vec<bool>> = fixed.iter().map(|x| space.mask(x)).collect();
    let summary = CorrectionSummary {
        rows: xs.len(),
        changed_rows,
        changes: space.variables().iter().map(|v| v.name.clone()).zip(per_var).collect(),
    };
    let meta = Meta::new(
        "correct",
        g.seed,
        json!({ "space": a.space, "input": a.input, "mode": corrector.mode, "max_trials": corrector.max_trials }),
    );
    let text = match g.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            eprintln!("corrected {} of {} rows", summary.changed_rows, summary.rows);
            meta.comment() + &vectors_csv(&space, &fixed, &masks)?
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                meta: Meta<'a>,
                summary: &'a CorrectionSummary,
                x: &'a [Vec<f64>],
                active: &'a [Vec<bool>],
            }
            to_json(&Out { meta, summary: &summary, x: &fixed, active: &masks })
        }
        Format::Text => {
            let mut out = meta.comment();
            let _ = writeln!(out, "rows {}, changed {}", summary.rows, summary.changed_rows);
            for (name, count) in &summary.changes {
                let _ = writeln!(out, "{name:<20}{count:>8}");
            }
            out
        }
    };
    emit(a.out.as_deref(), &text)
}

pub fn export_space(_g: &Global, a: &ExportArgs) -> CliResult<()> {
    let space = load_space(&a.space)?;
    let mut text = space_to_json(&space);
    text.push('\n');
    emit(a.out.as_deref(), &text)
}
