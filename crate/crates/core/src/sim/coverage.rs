//! Empirical check of the risk-control guarantee on simulated data.
//!
//! Every repeat draws fresh train, calibration and test sets, fits PCA and
//! probes on train, calibrates once per error level on the calibration set,
//! and measures the loss at the selected threshold on the test set. A repeat
//! violates at level `epsilon` when that test risk exceeds `delta`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::calibrate::calibrate_scored;
use crate::error::{Error, Result};
use crate::pca::{fit_pca, PcaModel, DEFAULT_OUTPUT_DIM};
use crate::probe::TrainConfig;
use crate::risk::{pair_scores, risk_totals, score_set, LambdaGrid, LossForm, RiskSpec};
use crate::scorer::{fit_scorer, CombinedScorer, ScoreMode};
use crate::sim::{generate_set, SimConfig};
use crate::smooth::SmoothingSpec;
use crate::trace::{SplitTag, TraceSet};

pub const MIN_REPEATS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoverageConfig {
    pub sim: SimConfig,
    pub n_train: usize,
    pub n_cal: usize,
    pub n_test: usize,
    pub mode: ScoreMode,
    pub loss_form: LossForm,
    pub delta: f64,
    pub epsilons: Vec<f64>,
    pub repeats: usize,
    pub seed: u64,
    pub pca_dim: usize,
    pub train: TrainConfig,
    pub smoothing: SmoothingSpec,
    pub grid: LambdaGrid,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        CoverageConfig {
            sim: SimConfig::default(),
            n_train: 500,
            n_cal: 450,
            n_test: 500,
            mode: ScoreMode::Consistent,
            loss_form: LossForm::HardIndicator,
            delta: 0.1,
            epsilons: alloc::vec![0.05, 0.1, 0.2, 0.5],
            repeats: 200,
            seed: 0,
            pca_dim: DEFAULT_OUTPUT_DIM,
            train: TrainConfig::default(),
            smoothing: SmoothingSpec::default(),
            grid: LambdaGrid::default(),
        }
    }
}

impl CoverageConfig {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        if self.repeats < MIN_REPEATS {
            return Err(Error::invalid(alloc::format!(
                "coverage needs at least {MIN_REPEATS} repeats, got {}",
                self.repeats
            )));
        }
        if self.n_train == 0 || self.n_cal == 0 || self.n_test == 0 {
            return Err(Error::invalid("split sizes must be positive"));
        }
        if self.epsilons.is_empty() {
            return Err(Error::invalid("no error levels requested"));
        }
        for &eps in &self.epsilons {
            RiskSpec::new(self.mode, self.delta, eps, self.loss_form)?;
        }
        Ok(())
    }

    fn spec(&self, epsilon: f64) -> Result<RiskSpec> {
        RiskSpec::new(self.mode, self.delta, epsilon, self.loss_form)
    }
}

/// Seed for `(repeat, split)`, decorrelated by a splitmix64 finalizer.
pub fn split_seed(seed: u64, repeat: usize, split: SplitTag) -> u64 {
    let lane = match split {
        SplitTag::Train => 1u64,
        SplitTag::Calibration => 2,
        SplitTag::Test => 3,
    };
    let mut z = seed
        .wrapping_add((repeat as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(lane.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws one split of `n` traces for `repeat`.
pub fn draw_split(cfg: &CoverageConfig, repeat: usize, split: SplitTag, n: usize) -> Result<TraceSet> {
    let sim = SimConfig {
        seed: split_seed(cfg.seed, repeat, split),
        n_traces: n,
        ..cfg.sim.clone()
    };
    Ok(generate_set(&sim, split)?.0)
}

/// Fits PCA (clamped to the input dimension) and the probes for `mode` on
/// the training split.
pub fn fit_pipeline(
    train: &TraceSet,
    mode: ScoreMode,
    pca_dim: usize,
    config: &TrainConfig,
    smoothing: SmoothingSpec,
) -> Result<(PcaModel, CombinedScorer)> {
    let rows: Vec<&[f32]> = train.embeddings().collect();
    let pca = fit_pca(&rows, pca_dim.min(train.dimension()))?;
    let scorer = fit_scorer(mode, train, &pca, "in-memory", config, smoothing)?;
    Ok((pca, scorer))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonOutcome {
    pub epsilon: f64,
    pub selected_lambda: Option<f64>,
    pub test_risk: f64,
    pub violated: bool,
    pub mean_stop_step: f64,
    pub mean_full_steps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatOutcome {
    pub repeat: usize,
    pub outcomes: Vec<EpsilonOutcome>,
}

pub fn run_repeat(cfg: &CoverageConfig, repeat: usize) -> Result<RepeatOutcome> {
    let train = draw_split(cfg, repeat, SplitTag::Train, cfg.n_train)?;
    let cal = draw_split(cfg, repeat, SplitTag::Calibration, cfg.n_cal)?;
    let test = draw_split(cfg, repeat, SplitTag::Test, cfg.n_test)?;
    let (pca, scorer) = fit_pipeline(&train, cfg.mode, cfg.pca_dim, &cfg.train, cfg.smoothing)?;

    let cal_scores = score_set(&cal, &scorer, &pca)?;
    let cal_scored = pair_scores(&cal, &cal_scores);
    let test_scores = score_set(&test, &scorer, &pca)?;
    let test_scored = pair_scores(&test, &test_scores);
    let n_test = test.len() as f64;
    let mean_full_steps = test.step_count() as f64 / n_test;

    let outcomes = cfg
        .epsilons
        .iter()
        .map(|&epsilon| {
            let spec = cfg.spec(epsilon)?;
            let result = calibrate_scored(&cal_scored, &cfg.grid, &spec)?;
            let lambda = result.selected_lambda;
            let (loss, _) = risk_totals(&test_scored, lambda, &spec)?;
            let test_risk = loss / n_test;
            let stops: usize = test_scored
                .iter()
                .map(|s| crate::risk::stop_index_at(s.scores, lambda))
                .sum();
            Ok(EpsilonOutcome {
                epsilon,
                selected_lambda: lambda,
                test_risk,
                violated: test_risk > cfg.delta,
                mean_stop_step: stops as f64 / n_test,
                mean_full_steps,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RepeatOutcome { repeat, outcomes })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub epsilon: f64,
    pub delta: f64,
    pub repeats: usize,
    pub violations: usize,
    pub violation_fraction: f64,
    /// 95% Wilson score interval for the violation probability.
    pub ci_low: f64,
    pub ci_high: f64,
    /// `epsilon + 2 * sqrt(epsilon * (1 - epsilon) / repeats)`.
    pub bound: f64,
    pub mean_test_risk: f64,
    pub mean_step_savings: f64,
    /// Fraction of repeats where no threshold was validated.
    pub none_fraction: f64,
}

impl CoverageRow {
    pub fn within_bound(&self) -> bool {
        self.violation_fraction <= self.bound
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub rows: Vec<CoverageRow>,
}

pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let center = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * libm::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / (1.0 + z2 / n);
    ((center - half).max(0.0), (center + half).min(1.0))
}

pub fn summarize(cfg: &CoverageConfig, repeats: &[RepeatOutcome]) -> CoverageReport {
    let r = repeats.len();
    let mut rows: Vec<CoverageRow> = cfg
        .epsilons
        .iter()
        .enumerate()
        .map(|(k, &epsilon)| {
            let outcomes: Vec<&EpsilonOutcome> = repeats.iter().map(|rep| &rep.outcomes[k]).collect();
            let violations = outcomes.iter().filter(|o| o.violated).count();
            let (ci_low, ci_high) = wilson_interval(violations, r, 1.96);
            let mean = |f: &dyn Fn(&EpsilonOutcome) -> f64| {
                outcomes.iter().map(|o| f(o)).sum::<f64>() / r.max(1) as f64
            };
            CoverageRow {
                epsilon,
                delta: cfg.delta,
                repeats: r,
                violations,
                violation_fraction: violations as f64 / r.max(1) as f64,
                ci_low,
                ci_high,
                bound: epsilon + 2.0 * libm::sqrt(epsilon * (1.0 - epsilon) / r.max(1) as f64),
                mean_test_risk: mean(&|o| o.test_risk),
                mean_step_savings: mean(&|o| 1.0 - o.mean_stop_step / o.mean_full_steps),
                none_fraction: mean(&|o| if o.selected_lambda.is_none() { 1.0 } else { 0.0 }),
            }
        })
        .collect();
    rows.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
    CoverageReport { rows }
}

/// Runs every repeat in order. The `riskstop` crate offers a parallel
/// driver over [`run_repeat`] with identical output.
pub fn coverage_experiment(cfg: &CoverageConfig) -> Result<CoverageReport> {
    cfg.validate()?;
    let repeats = (0..cfg.repeats)
        .map(|r| run_repeat(cfg, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(cfg, &repeats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_brackets_the_estimate() {
        let (lo, hi) = wilson_interval(20, 200, 1.96);
        assert!(lo < 0.1 && 0.1 < hi);
        assert_eq!(wilson_interval(0, 0, 1.96), (0.0, 1.0));
    }

    #[test]
    fn split_seeds_differ() {
        let a = split_seed(1, 0, SplitTag::Train);
        assert_ne!(a, split_seed(1, 0, SplitTag::Calibration));
        assert_ne!(a, split_seed(1, 1, SplitTag::Train));
        assert_ne!(a, split_seed(2, 0, SplitTag::Train));
    }

    #[test]
    fn too_few_repeats_rejected() {
        let cfg = CoverageConfig {
            repeats: 10,
            ..CoverageConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
