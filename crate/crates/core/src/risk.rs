//! Risk specification, threshold grids, stopping times, and per-trace loss.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pca::PcaModel;
use crate::scorer::{score_trace, CombinedScorer, ScoreMode};
use crate::trace::{Trace, TraceSet};

/// How the loss at the stopping step is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossForm {
    /// `1{label} * (1 - f) + 1{!label} * f` with `f` the score at the stop.
    PaperSoft,
    /// `1{!label}`.
    HardIndicator,
}

/// Binomial parameter used by the tail p-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueRate {
    /// Test `H: E[R] > delta` with `Binom(n, delta)`.
    #[default]
    Delta,
    /// Compatibility reading that plugs the error level into the binomial.
    Epsilon,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskSpec {
    pub mode: ScoreMode,
    /// Risk tolerance on the expected loss.
    pub delta: f64,
    /// Allowed probability, over calibration draws, that the tolerance fails.
    pub epsilon: f64,
    pub loss_form: LossForm,
    #[serde(default)]
    pub pvalue_rate: PValueRate,
}

impl RiskSpec {
    pub fn new(mode: ScoreMode, delta: f64, epsilon: f64, loss_form: LossForm) -> Result<RiskSpec> {
        let spec = RiskSpec {
            mode,
            delta,
            epsilon,
            loss_form,
            pvalue_rate: PValueRate::Delta,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid(alloc::format!("delta {} not in (0, 1)", self.delta)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::invalid(alloc::format!("epsilon {} not in (0, 1)", self.epsilon)));
        }
        Ok(())
    }

    pub fn binomial_rate(&self) -> f64 {
        match self.pvalue_rate {
            PValueRate::Delta => self.delta,
            PValueRate::Epsilon => self.epsilon,
        }
    }
}

/// Strictly descending thresholds in `[0, 1]`, tested in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LambdaGrid {
    values: Vec<f64>,
}

impl LambdaGrid {
    pub fn new(values: Vec<f64>) -> Result<LambdaGrid> {
        if values.is_empty() {
            return Err(Error::invalid("lambda grid is empty"));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("lambda grid values must lie in [0, 1]"));
        }
        if values.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::invalid("lambda grid must be strictly descending"));
        }
        Ok(LambdaGrid { values })
    }

    /// `count` evenly spaced values from `hi` down to `lo` inclusive.
    pub fn linspace(hi: f64, lo: f64, count: usize) -> Result<LambdaGrid> {
        if count == 1 {
            return LambdaGrid::new(alloc::vec![hi]);
        }
        let step = (hi - lo) / (count - 1) as f64;
        LambdaGrid::new((0..count).map(|i| hi - step * i as f64).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl Default for LambdaGrid {
    /// 0.99, 0.98, ..., 0.01.
    fn default() -> Self {
        LambdaGrid {
            values: (1..=99).rev().map(|i| f64::from(i) / 100.0).collect(),
        }
    }
}

impl TryFrom<Vec<f64>> for LambdaGrid {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        LambdaGrid::new(values)
    }
}

impl From<LambdaGrid> for Vec<f64> {
    fn from(grid: LambdaGrid) -> Vec<f64> {
        grid.values
    }
}

/// 1-based index of the first step whose score reaches `lambda`, or `T`
/// when none does.
pub fn stop_index(scores: &[f64], lambda: f64) -> usize {
    scores
        .iter()
        .position(|&s| s >= lambda)
        .map_or(scores.len(), |i| i + 1)
}

/// Like [`stop_index`]; `None` never stops early.
pub fn stop_index_at(scores: &[f64], lambda: Option<f64>) -> usize {
    match lambda {
        Some(l) => stop_index(scores, l),
        None => scores.len(),
    }
}

/// Loss of stopping `trace` at [`stop_index_at`]`(scores, lambda)`.
pub fn loss_at_stop(trace: &Trace, scores: &[f64], lambda: Option<f64>, spec: &RiskSpec) -> Result<f64> {
    if scores.len() != trace.len() {
        return Err(Error::DimensionMismatch {
            expected: trace.len(),
            got: scores.len(),
        });
    }
    let t = stop_index_at(scores, lambda);
    let label = trace.label(spec.mode.risk_label(), t - 1)?;
    Ok(step_loss(label, scores[t - 1], spec.loss_form))
}

pub fn step_loss(label: bool, score: f64, form: LossForm) -> f64 {
    match (form, label) {
        (LossForm::PaperSoft, true) => 1.0 - score,
        (LossForm::PaperSoft, false) => score,
        (LossForm::HardIndicator, true) => 0.0,
        (LossForm::HardIndicator, false) => 1.0,
    }
}

/// A trace together with its smoothed scores, so a grid walk scores once.
#[derive(Debug, Clone, Copy)]
pub struct ScoredTrace<'a> {
    pub trace: &'a Trace,
    pub scores: &'a [f64],
}

/// Smoothed scores for every trace in `set`.
pub fn score_set(set: &TraceSet, scorer: &CombinedScorer, pca: &PcaModel) -> Result<Vec<Vec<f64>>> {
    set.traces().iter().map(|t| score_trace(scorer, t, pca)).collect()
}

pub fn pair_scores<'a>(set: &'a TraceSet, scores: &'a [Vec<f64>]) -> Vec<ScoredTrace<'a>> {
    set.traces()
        .iter()
        .zip(scores)
        .map(|(trace, scores)| ScoredTrace { trace, scores })
        .collect()
}

/// Summed loss and number of early stops (before `T`) at `lambda`.
pub fn risk_totals(scored: &[ScoredTrace<'_>], lambda: Option<f64>, spec: &RiskSpec) -> Result<(f64, usize)> {
    let mut total = 0.0;
    let mut early = 0;
    for s in scored {
        total += loss_at_stop(s.trace, s.scores, lambda, spec)?;
        if stop_index_at(s.scores, lambda) < s.trace.len() {
            early += 1;
        }
    }
    Ok((total, early))
}

/// Mean loss over the calibration traces at `lambda`.
pub fn empirical_risk(
    cal: &TraceSet,
    scorer: &CombinedScorer,
    pca: &PcaModel,
    lambda: Option<f64>,
    spec: &RiskSpec,
) -> Result<f64> {
    if cal.is_empty() {
        return Err(Error::invalid("empirical risk over an empty set"));
    }
    let scores = score_set(cal, scorer, pca)?;
    let (total, _) = risk_totals(&pair_scores(cal, &scores), lambda, spec)?;
    Ok(total / cal.len() as f64)
}
