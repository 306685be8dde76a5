//! Fixed-sequence Learn-then-Test threshold selection.
//!
//! Each grid value `lambda_j` carries the null hypothesis that stopping at
//! `lambda_j` has expected loss above `delta`. The grid is walked from the
//! most permissive threshold down; `H_j` is rejected while its binomial tail
//! p-value is at most `epsilon`, and the walk ends at the first failure. The
//! last rejected threshold is returned, which controls the family-wise error
//! rate at `epsilon` without requiring the risk to be monotone in lambda.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::binomial::binom_tail_pvalue;
use crate::error::{Error, Result};
use crate::pca::PcaModel;
use crate::risk::{pair_scores, risk_totals, score_set, LambdaGrid, RiskSpec, ScoredTrace};
use crate::scorer::CombinedScorer;
use crate::trace::TraceSet;

/// Slack for treating a loss sum within rounding of an integer as that
/// integer before taking the ceiling.
const COUNT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub spec: RiskSpec,
    pub grid: LambdaGrid,
    /// Empirical risk for each tested grid value (a prefix of the grid).
    pub empirical_risk: Vec<f64>,
    pub p_values: Vec<f64>,
    /// Fraction of calibration traces stopping before their last step.
    pub stop_fraction: Vec<f64>,
    /// `None` means no threshold was validated: never stop early.
    pub selected_lambda: Option<f64>,
    pub n: usize,
}

impl CalibrationResult {
    pub fn tested(&self) -> &[f64] {
        &self.grid.values()[..self.p_values.len()]
    }
}

/// Index of the last hypothesis rejected before the first `p > epsilon`, or
/// `None` when the first one already fails.
pub fn select_fixed_sequence(p_values: &[f64], epsilon: f64) -> Option<usize> {
    p_values
        .iter()
        .position(|&p| p.is_nan() || p > epsilon)
        .unwrap_or(p_values.len())
        .checked_sub(1)
}

/// Ceiling of `n * R_hat`, i.e. of the summed loss.
pub fn achieved_count(loss_sum: f64, n: usize) -> u64 {
    let k = libm::ceil(loss_sum - COUNT_TOLERANCE).max(0.0) as u64;
    k.min(n as u64)
}

pub fn calibrate_fixed_sequence(
    cal: &TraceSet,
    scorer: &CombinedScorer,
    pca: &PcaModel,
    grid: &LambdaGrid,
    spec: &RiskSpec,
) -> Result<CalibrationResult> {
    if spec.mode != scorer.mode() {
        return Err(Error::invalid(alloc::format!(
            "risk mode {} does not match scorer mode {}",
            spec.mode.name(),
            scorer.mode().name()
        )));
    }
    let scores = score_set(cal, scorer, pca)?;
    calibrate_scored(&pair_scores(cal, &scores), grid, spec)
}

/// Calibration over traces whose smoothed scores are already computed.
pub fn calibrate_scored(
    scored: &[ScoredTrace<'_>],
    grid: &LambdaGrid,
    spec: &RiskSpec,
) -> Result<CalibrationResult> {
    spec.validate()?;
    let n = scored.len();
    if n == 0 {
        return Err(Error::invalid("calibration set is empty"));
    }
    let rate = spec.binomial_rate();
    let mut empirical_risk = Vec::new();
    let mut p_values = Vec::new();
    let mut stop_fraction = Vec::new();
    for &lambda in grid.values() {
        let (loss_sum, early) = risk_totals(scored, Some(lambda), spec)?;
        let p = binom_tail_pvalue(n as u64, rate, achieved_count(loss_sum, n))?;
        empirical_risk.push(loss_sum / n as f64);
        p_values.push(p);
        stop_fraction.push(early as f64 / n as f64);
        if p.is_nan() || p > spec.epsilon {
            break;
        }
    }
    let selected_lambda = select_fixed_sequence(&p_values, spec.epsilon).map(|j| grid.values()[j]);
    Ok(CalibrationResult {
        spec: *spec,
        grid: grid.clone(),
        empirical_risk,
        p_values,
        stop_fraction,
        selected_lambda,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn walks_until_first_failure() {
        assert_eq!(select_fixed_sequence(&[0.001, 0.004, 0.2, 0.01], 0.05), Some(1));
        assert_eq!(select_fixed_sequence(&[0.01, 0.02], 0.05), Some(1));
        assert_eq!(select_fixed_sequence(&[0.3, 0.01], 0.05), None);
        assert_eq!(select_fixed_sequence(&[0.05], 0.05), Some(0));
        assert_eq!(select_fixed_sequence(&[f64::NAN], 0.05), None);
    }

    #[test]
    fn achieved_count_is_a_ceiling() {
        assert_eq!(achieved_count(0.0, 10), 0);
        assert_eq!(achieved_count(3.0, 10), 3);
        assert_eq!(achieved_count(3.0 + 1e-12, 10), 3);
        assert_eq!(achieved_count(3.2, 10), 4);
        assert_eq!(achieved_count(12.0, 10), 10);
        // 0.1 summed ten times is not exactly 1.0
        let s: f64 = [0.1; 10].iter().sum();
        assert_eq!(achieved_count(s, 10), 1);
    }
}
