//! Budget/outcome curves for the crop baseline and calibrated stopping.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::calibrate::CalibrationResult;
use crate::error::{Error, Result};
use crate::pca::PcaModel;
use crate::risk::{pair_scores, risk_totals, score_set, stop_index_at};
use crate::scorer::{CombinedScorer, ScoreMode};
use crate::trace::{LabelKind, Trace, TraceSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Crop,
    Supervised,
    Consistent,
    NovelLeaf,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Crop => "crop",
            Method::Supervised => "supervised",
            Method::Consistent => "consistent",
            Method::NovelLeaf => "novel_leaf",
        }
    }
}

impl From<ScoreMode> for Method {
    fn from(mode: ScoreMode) -> Method {
        match mode {
            ScoreMode::Correct => Method::Supervised,
            ScoreMode::Consistent => Method::Consistent,
            ScoreMode::NovelLeaf => Method::NovelLeaf,
        }
    }
}

/// Which per-step label counts as a good outcome at the stop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Correct,
    Consistent,
}

impl Outcome {
    fn label(self) -> LabelKind {
        match self {
            Outcome::Correct => LabelKind::Correct,
            Outcome::Consistent => LabelKind::Consistent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetCurvePoint {
    pub method: Method,
    /// Token budget for crop points.
    pub budget: Option<u64>,
    /// Error level for calibrated points.
    pub epsilon: Option<f64>,
    pub selected_lambda: Option<f64>,
    /// Thinking tokens up to and including the stop step.
    pub mean_tokens: f64,
    pub mean_steps: f64,
    /// Fraction of traces whose outcome label is true at the stop.
    pub outcome_rate: f64,
    pub n_test: usize,
}

struct Tally {
    tokens: u64,
    steps: usize,
    good: usize,
    n: usize,
}

impl Tally {
    fn new() -> Self {
        Tally {
            tokens: 0,
            steps: 0,
            good: 0,
            n: 0,
        }
    }

    /// Records a stop at 1-based `step`.
    fn add(&mut self, trace: &Trace, step: usize, outcome: Outcome) -> Result<()> {
        self.tokens += trace.steps[..step]
            .iter()
            .map(|s| u64::from(s.token_count))
            .sum::<u64>();
        self.steps += step;
        self.good += usize::from(trace.label(outcome.label(), step - 1)?);
        self.n += 1;
        Ok(())
    }

    fn point(&self, method: Method, budget: Option<u64>, epsilon: Option<f64>, lambda: Option<f64>) -> BudgetCurvePoint {
        let n = self.n as f64;
        BudgetCurvePoint {
            method,
            budget,
            epsilon,
            selected_lambda: lambda,
            mean_tokens: self.tokens as f64 / n,
            mean_steps: self.steps as f64 / n,
            outcome_rate: self.good as f64 / n,
            n_test: self.n,
        }
    }
}

/// Last step whose cumulative token count fits in `budget`, at least 1.
pub fn crop_stop(trace: &Trace, budget: u64) -> usize {
    trace
        .cumulative_tokens()
        .iter()
        .take_while(|&&c| c <= budget)
        .count()
        .max(1)
}

pub fn crop_baseline(test: &TraceSet, budgets: &[u64], outcome: Outcome) -> Result<Vec<BudgetCurvePoint>> {
    if budgets.is_empty() {
        return Err(Error::invalid("crop budgets are empty"));
    }
    if test.is_empty() {
        return Err(Error::invalid("test set is empty"));
    }
    budgets
        .iter()
        .map(|&budget| {
            let mut tally = Tally::new();
            for trace in test.traces() {
                tally.add(trace, crop_stop(trace, budget), outcome)?;
            }
            Ok(tally.point(Method::Crop, Some(budget), None, None))
        })
        .collect()
}

/// One point per calibration, in the order given.
pub fn efficiency_curve(
    test: &TraceSet,
    scorer: &CombinedScorer,
    pca: &PcaModel,
    calibrations: &[CalibrationResult],
    outcome: Outcome,
) -> Result<Vec<BudgetCurvePoint>> {
    if test.is_empty() {
        return Err(Error::invalid("test set is empty"));
    }
    check_modes(scorer, calibrations)?;
    let scores = score_set(test, scorer, pca)?;
    calibrations
        .iter()
        .map(|cal| {
            let mut tally = Tally::new();
            for (trace, s) in test.traces().iter().zip(&scores) {
                tally.add(trace, stop_index_at(s, cal.selected_lambda), outcome)?;
            }
            Ok(tally.point(
                scorer.mode().into(),
                None,
                Some(cal.spec.epsilon),
                cal.selected_lambda,
            ))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReportRow {
    pub epsilon: f64,
    pub delta: f64,
    /// Mean loss at the stop on the test set under the calibration's risk.
    pub realized_violation_rate: f64,
    pub selected_lambda: Option<f64>,
    pub mean_stop_step: f64,
    /// `1 - stop tokens / full-budget tokens`.
    pub token_savings: f64,
}

/// Rows sorted by `epsilon`.
pub fn calibration_report(
    test: &TraceSet,
    scorer: &CombinedScorer,
    pca: &PcaModel,
    calibrations: &[CalibrationResult],
) -> Result<Vec<CalibrationReportRow>> {
    if test.is_empty() {
        return Err(Error::invalid("test set is empty"));
    }
    check_modes(scorer, calibrations)?;
    let scores = score_set(test, scorer, pca)?;
    let scored = pair_scores(test, &scores);
    let n = test.len() as f64;
    let full_tokens: u64 = test.traces().iter().map(|t| t.total_tokens).sum();
    let mut rows = calibrations
        .iter()
        .map(|cal| {
            let (loss, _) = risk_totals(&scored, cal.selected_lambda, &cal.spec)?;
            let mut steps = 0usize;
            let mut tokens = 0u64;
            for s in &scored {
                let stop = stop_index_at(s.scores, cal.selected_lambda);
                steps += stop;
                tokens += s.trace.cumulative_tokens()[stop - 1];
            }
            Ok(CalibrationReportRow {
                epsilon: cal.spec.epsilon,
                delta: cal.spec.delta,
                realized_violation_rate: loss / n,
                selected_lambda: cal.selected_lambda,
                mean_stop_step: steps as f64 / n,
                token_savings: if full_tokens == 0 {
                    0.0
                } else {
                    1.0 - tokens as f64 / full_tokens as f64
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
    Ok(rows)
}

fn check_modes(scorer: &CombinedScorer, calibrations: &[CalibrationResult]) -> Result<()> {
    match calibrations.iter().find(|c| c.spec.mode != scorer.mode()) {
        Some(c) => Err(Error::invalid(alloc::format!(
            "calibration for mode {} used with a {} scorer",
            c.spec.mode.name(),
            scorer.mode().name()
        ))),
        None => Ok(()),
    }
}
