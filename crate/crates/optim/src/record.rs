//! Evaluation logs: the in-memory run record, its line-delimited JSON file
//! format, and the evaluator that writes to and replays from it.

use std::collections::VecDeque;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Seek, SeekFrom, Write};
use std::path::Path;

use archopt_core::{Corrector, DesignSpace, Evaluation, Problem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA: &str = "archopt-run/1";

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("unsupported schema {found:?}, expected {SCHEMA:?}")]
    Schema { found: String },
    #[error("existing run was made with a different configuration")]
    HeaderMismatch,
    #[error("replayed evaluation {index} does not match the logged design vector")]
    ReplayDiverged { index: usize },
}

/// Serializes NaN entries as `null` so failed evaluations survive JSON.
mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| if x.is_nan() { None } else { Some(*x) }))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let v: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRecord {
    /// Generation (NSGA-II) or infill iteration (BO); 0 is the initial design.
    pub iter: usize,
    /// The vector the problem was evaluated at (corrected and imputed).
    pub x: Vec<f64>,
    pub active: Vec<bool>,
    #[serde(with = "nan_as_null")]
    pub f: Vec<f64>,
    #[serde(with = "nan_as_null")]
    pub g: Vec<f64>,
    pub viable: bool,
    /// Whether the submitted vector had to be corrected before evaluation.
    pub corrected: bool,
}

fn bits_eq(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

impl PartialEq for EvalRecord {
    fn eq(&self, o: &Self) -> bool {
        self.iter == o.iter
            && bits_eq(&self.x, &o.x)
            && self.active == o.active
            && bits_eq(&self.f, &o.f)
            && bits_eq(&self.g, &o.g)
            && self.viable == o.viable
            && self.corrected == o.corrected
    }
}

impl EvalRecord {
    pub fn evaluation(&self) -> Evaluation {
        Evaluation { f: self.f.clone(), g: self.g.clone() }
    }

    pub fn is_feasible(&self) -> bool {
        self.viable && self.g.iter().all(|&v| v <= 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub schema: String,
    pub problem: String,
    pub algorithm: String,
    pub config: serde_json::Value,
    pub seed: u64,
}

impl RunHeader {
    pub fn new(problem: &str, algorithm: &str, config: serde_json::Value, seed: u64) -> Self {
        RunHeader { schema: SCHEMA.into(), problem: problem.into(), algorithm: algorithm.into(), config, seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub header: RunHeader,
    pub evals: Vec<EvalRecord>,
}

impl RunRecord {
    pub fn n_iters(&self) -> usize {
        self.evals.iter().map(|e| e.iter + 1).max().unwrap_or(0)
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<(), RecordError> {
        let mut w = RunWriter::create(path, &self.header)?;
        for e in &self.evals {
            w.append(e)?;
        }
        Ok(())
    }

    /// Reads a run file. A truncated last line is ignored; an empty file
    /// gives `None`.
    pub fn read_jsonl(path: &Path) -> Result<Option<RunRecord>, RecordError> {
        Ok(read_lines(path)?.map(|(header, evals, _)| RunRecord { header, evals }))
    }
}

type Parsed = (RunHeader, Vec<EvalRecord>, u64);

/// Parses a run file, returning the byte length of its complete prefix.
fn read_lines(path: &Path) -> Result<Option<Parsed>, RecordError> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut header: Option<RunHeader> = None;
    let mut evals = Vec::new();
    let mut good = 0u64;
    let mut buf = String::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        let n = reader.read_line(&mut buf)?;
        if n == 0 {
            break;
        }
        line_no += 1;
        if !buf.ends_with('\n') {
            break;
        }
        let text = buf.trim_end();
        if header.is_none() {
            let h: RunHeader = match serde_json::from_str(text) {
                Ok(h) => h,
                Err(e) => {
                    let v: serde_json::Value =
                        serde_json::from_str(text).map_err(|source| RecordError::Json { line: line_no, source })?;
                    match v.get("schema").and_then(|s| s.as_str()) {
                        Some(s) if s != SCHEMA => return Err(RecordError::Schema { found: s.into() }),
                        _ => return Err(RecordError::Json { line: line_no, source: e }),
                    }
                }
            };
            if h.schema != SCHEMA {
                return Err(RecordError::Schema { found: h.schema });
            }
            header = Some(h);
        } else {
            evals.push(serde_json::from_str(text).map_err(|source| RecordError::Json { line: line_no, source })?);
        }
        good += n as u64;
    }
    Ok(header.map(|h| (h, evals, good)))
}

/// Appends records to a run file, one JSON object per line, flushing after
/// each line.
pub struct RunWriter {
    out: BufWriter<File>,
}

impl RunWriter {
    pub fn create(path: &Path, header: &RunHeader) -> Result<Self, RecordError> {
        let mut w = RunWriter { out: BufWriter::new(File::create(path)?) };
        w.line(header)?;
        Ok(w)
    }

    /// Opens an existing run for continuation. Returns the writer and the
    /// logged evaluations, or a fresh writer when the file is missing or
    /// empty.
    pub fn resume(path: &Path, header: &RunHeader) -> Result<(Self, Vec<EvalRecord>), RecordError> {
        let parsed = if path.exists() { read_lines(path)? } else { None };
        let Some((old, evals, good)) = parsed else {
            return Ok((Self::create(path, header)?, Vec::new()));
        };
        if &old != header {
            return Err(RecordError::HeaderMismatch);
        }
        let mut file = OpenOptions::new().write(true).open(path)?;
        file.set_len(good)?;
        file.seek(SeekFrom::End(0))?;
        Ok((RunWriter { out: BufWriter::new(file) }, evals))
    }

    pub fn append(&mut self, e: &EvalRecord) -> Result<(), RecordError> {
        self.line(e)
    }

    fn line<T: Serialize>(&mut self, v: &T) -> Result<(), RecordError> {
        serde_json::to_writer(&mut self.out, v).map_err(|source| RecordError::Json { line: 0, source })?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(())
    }
}

/// Evaluates design vectors on a problem: corrects them, replays logged
/// results when resuming, and logs new results.
pub struct Evaluator<'a> {
    problem: &'a dyn Problem,
    corrector: Corrector,
    replay: VecDeque<EvalRecord>,
    n_replayed: usize,
    writer: Option<RunWriter>,
    pub parallel: bool,
    pub evals: Vec<EvalRecord>,
}

impl<'a> Evaluator<'a> {
    pub fn new(problem: &'a dyn Problem, corrector: Corrector) -> Self {
        Evaluator {
            problem,
            corrector,
            replay: VecDeque::new(),
            n_replayed: 0,
            writer: None,
            parallel: false,
            evals: Vec::new(),
        }
    }

    pub fn with_writer(mut self, writer: RunWriter) -> Self {
        self.writer = Some(writer);
        self
    }

    pub fn with_replay(mut self, evals: Vec<EvalRecord>) -> Self {
        self.replay = evals.into();
        self
    }

    pub fn space(&self) -> &DesignSpace {
        self.problem.space()
    }

    pub fn problem(&self) -> &dyn Problem {
        self.problem
    }

    pub fn corrector(&self) -> &Corrector {
        &self.corrector
    }

    pub fn n_evals(&self) -> usize {
        self.evals.len()
    }

    /// Evaluates a batch. `seeds` seed the correction of each vector.
    pub fn evaluate(&mut self, iter: usize, xs: &[Vec<f64>], seeds: &[u64]) -> Result<Vec<EvalRecord>, RecordError> {
        let space = self.problem.space();
        let prepared: Vec<(Vec<f64>, Vec<bool>, bool)> = xs
            .iter()
            .zip(seeds)
            .map(|(raw, &seed)| {
                let x = self
                    .corrector
                    .correct(space, raw, &mut ChaCha8Rng::seed_from_u64(seed))
                    .unwrap_or_else(|_| space.impute(raw).0);
                let mask = space.mask(&x);
                let corrected = !bits_eq(&x, raw);
                (x, mask, corrected)
            })
            .collect();

        let mut out: Vec<Option<EvalRecord>> = vec![None; xs.len()];
        let mut fresh = Vec::new();
        for (k, (x, mask, corrected)) in prepared.into_iter().enumerate() {
            if let Some(r) = self.replay.pop_front() {
                if r.iter != iter || !bits_eq(&r.x, &x) {
                    return Err(RecordError::ReplayDiverged { index: self.n_replayed });
                }
                self.n_replayed += 1;
                out[k] = Some(EvalRecord { active: mask, corrected, ..r });
            } else {
                fresh.push((k, x, mask, corrected));
            }
        }
        let problem = self.problem;
        let run = |(k, x, mask, corrected): &(usize, Vec<f64>, Vec<bool>, bool)| {
            let e = problem.evaluate(x);
            let viable = !e.is_failed();
            (*k, EvalRecord { iter, x: x.clone(), active: mask.clone(), f: e.f, g: e.g, viable, corrected: *corrected })
        };
        let results: Vec<(usize, EvalRecord)> =
            if self.parallel { fresh.par_iter().map(run).collect() } else { fresh.iter().map(run).collect() };
        for (k, r) in results {
            if let Some(w) = self.writer.as_mut() {
                w.append(&r)?;
            }
            out[k] = Some(r);
        }
        let out: Vec<EvalRecord> = out.into_iter().map(|r| r.expect("every slot filled")).collect();
        self.evals.extend(out.iter().cloned());
        Ok(out)
    }
}
