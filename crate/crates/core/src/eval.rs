//! Precision-vs-percentile curves.
//!
//! At level `p ∈ 0..100` the threshold is the score of rank
//! `⌊p·n/100⌋` (0-based, ascending). Every example scoring at or above the
//! threshold is "above"; the curve value is the fraction of those that are
//! positives. Positives are correct predictions in trustworthy mode and
//! incorrect ones in suspicious mode, where scores are negated first.
//!
//! Only the ordering of scores matters, so any strictly increasing
//! relabeling leaves every curve unchanged.

use std::cmp::Ordering;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LEVELS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// High score should mean a correct prediction.
    Trustworthy,
    /// Low score should mean an incorrect prediction.
    Suspicious,
}

impl Mode {
    pub const BOTH: [Mode; 2] = [Mode::Trustworthy, Mode::Suspicious];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Trustworthy => "trustworthy",
            Mode::Suspicious => "suspicious",
        }
    }
}

/// One test example: a score (may be `±∞`, never NaN) and whether the
/// classifier got it right.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredExample {
    score: f64,
    correct: bool,
}

impl ScoredExample {
    pub fn new(score: f64, correct: bool) -> Result<Self> {
        if score.is_nan() {
            return Err(Error::invalid("score", "NaN score"));
        }
        Ok(Self { score, correct })
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    pub fn correct(&self) -> bool {
        self.correct
    }
}

/// Zips scores with correctness flags.
pub fn scored_examples(scores: &[f64], correct: &[bool]) -> Result<Vec<ScoredExample>> {
    if scores.len() != correct.len() {
        return Err(Error::RowCountMismatch {
            expected: correct.len(),
            found: scores.len(),
        });
    }
    scores
        .iter()
        .zip(correct)
        .map(|(&s, &c)| ScoredExample::new(s, c))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionCurve {
    pub method: String,
    pub mode: Mode,
    pub percentiles: Vec<u32>,
    pub precisions: Vec<f64>,
    /// Classifier error rate (trustworthy) or accuracy (suspicious).
    pub reference_line: f64,
}

fn cmp_scores(a: &f64, b: &f64) -> Ordering {
    a.partial_cmp(b).expect("scores are never NaN")
}

pub fn precision_curve(
    method: impl Into<String>,
    examples: &[ScoredExample],
    mode: Mode,
) -> Result<PrecisionCurve> {
    let n = examples.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut ranked: Vec<(f64, bool)> = examples
        .iter()
        .map(|e| match mode {
            Mode::Trustworthy => (e.score, e.correct),
            Mode::Suspicious => (-e.score, !e.correct),
        })
        .collect();
    ranked.sort_by(|a, b| cmp_scores(&a.0, &b.0));

    // positives_from[i] = positives among ranked[i..]
    let mut positives_from = vec![0usize; n + 1];
    for i in (0..n).rev() {
        positives_from[i] = positives_from[i + 1] + usize::from(ranked[i].1);
    }
    let correct = examples.iter().filter(|e| e.correct).count();
    let reference_line = match mode {
        Mode::Trustworthy => (n - correct) as f64 / n as f64,
        Mode::Suspicious => correct as f64 / n as f64,
    };

    let mut precisions = Vec::with_capacity(LEVELS);
    let mut last = 0.0;
    for p in 0..LEVELS {
        let threshold = ranked[p * n / LEVELS].0;
        let start = ranked.partition_point(|&(s, _)| s < threshold);
        let above = n - start;
        if above > 0 {
            last = positives_from[start] as f64 / above as f64;
        }
        precisions.push(last);
    }
    Ok(PrecisionCurve {
        method: method.into(),
        mode,
        percentiles: (0..LEVELS as u32).collect(),
        precisions,
        reference_line,
    })
}

/// Which end of a method's score means "trust the prediction".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    HigherIsTrusted,
    LowerIsTrusted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodScores {
    pub name: String,
    pub scores: Vec<f64>,
    pub orientation: Orientation,
}

impl MethodScores {
    pub fn new(name: impl Into<String>, scores: Vec<f64>, orientation: Orientation) -> Self {
        Self {
            name: name.into(),
            scores,
            orientation,
        }
    }

    fn oriented(&self) -> Vec<f64> {
        match self.orientation {
            Orientation::HigherIsTrusted => self.scores.clone(),
            Orientation::LowerIsTrusted => self.scores.iter().map(|s| -s).collect(),
        }
    }
}

/// Scores of several methods over one shared, ordered set of examples.
#[derive(Debug, Clone, PartialEq)]
pub struct RunScores {
    pub correct: Vec<bool>,
    pub methods: Vec<MethodScores>,
}

/// One curve per (method, mode), methods in input order, trustworthy first.
pub fn compare_methods(run: &RunScores) -> Result<Vec<PrecisionCurve>> {
    let mut out = Vec::with_capacity(run.methods.len() * 2);
    for m in &run.methods {
        if m.scores.len() != run.correct.len() {
            return Err(Error::ShapeMismatch(format!(
                "method {:?} has {} scores for {} examples (length/order mismatch)",
                m.name,
                m.scores.len(),
                run.correct.len()
            )));
        }
        let examples = scored_examples(&m.oriented(), &run.correct)?;
        for mode in Mode::BOTH {
            out.push(precision_curve(m.name.clone(), &examples, mode)?);
        }
    }
    Ok(out)
}

/// A curve ready for output; `stderr` is present for multi-run aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub method: String,
    pub mode: Mode,
    pub reference_line: f64,
    pub percentiles: Vec<u32>,
    pub precisions: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
    pub runs: usize,
}

impl From<PrecisionCurve> for CurveRecord {
    fn from(c: PrecisionCurve) -> Self {
        Self {
            method: c.method,
            mode: c.mode,
            reference_line: c.reference_line,
            percentiles: c.percentiles,
            precisions: c.precisions,
            stderr: None,
            runs: 1,
        }
    }
}

/// Pointwise mean and standard error (sample std / √runs) across runs.
pub fn multi_run_aggregate(runs: &[Vec<PrecisionCurve>]) -> Result<Vec<CurveRecord>> {
    if runs.len() < 2 {
        return Err(Error::invalid("runs", "aggregation needs at least 2 runs"));
    }
    let first = &runs[0];
    for (r, run) in runs.iter().enumerate() {
        let congruent = run.len() == first.len()
            && run.iter().zip(first).all(|(a, b)| {
                a.method == b.method && a.mode == b.mode && a.precisions.len() == b.precisions.len()
            });
        if !congruent {
            return Err(Error::ShapeMismatch(format!(
                "run {r} does not match the curves of run 0"
            )));
        }
    }
    let count = runs.len() as f64;
    let mean_sd = |values: &mut dyn Iterator<Item = f64>| {
        let v: Vec<f64> = values.collect();
        // offset by the first run so identical runs give an exact mean
        let mean = v[0] + v.iter().map(|x| x - v[0]).sum::<f64>() / count;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (count - 1.0);
        (mean, var.sqrt() / count.sqrt())
    };
    Ok(first
        .iter()
        .enumerate()
        .map(|(c, proto)| {
            let (precisions, stderr): (Vec<f64>, Vec<f64>) = (0..proto.precisions.len())
                .map(|p| mean_sd(&mut runs.iter().map(|run| run[c].precisions[p])))
                .unzip();
            let (reference_line, _) = mean_sd(&mut runs.iter().map(|run| run[c].reference_line));
            CurveRecord {
                method: proto.method.clone(),
                mode: proto.mode,
                reference_line,
                percentiles: proto.percentiles.clone(),
                precisions,
                stderr: Some(stderr),
                runs: runs.len(),
            }
        })
        .collect())
}

/// CSV with columns `method,mode,percentile,precision,stderr`; `stderr` is
/// empty for single-run curves.
pub fn write_curves_csv<W: Write>(out: W, curves: &[CurveRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "mode", "percentile", "precision", "stderr"])?;
    for c in curves {
        for (i, (&p, &v)) in c.percentiles.iter().zip(&c.precisions).enumerate() {
            let se = c
                .stderr
                .as_ref()
                .map(|s| format!("{:?}", s[i]))
                .unwrap_or_default();
            w.write_record([
                c.method.as_str(),
                c.mode.name(),
                &p.to_string(),
                &format!("{v:?}"),
                &se,
            ])?;
        }
    }
    w.flush().map_err(|e| Error::Io {
        path: "<curves>".into(),
        source: e,
    })?;
    Ok(())
}

pub fn curves_to_json(curves: &[CurveRecord]) -> Result<String> {
    Ok(serde_json::to_string_pretty(curves)?)
}
