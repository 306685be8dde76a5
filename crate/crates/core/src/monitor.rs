//! Online stopping monitor.
//!
//! Feeds one step embedding at a time and reproduces the offline decision
//! `stop_index(score_trace(..), lambda)` exactly: the raw score goes through
//! the same projection and probes, and the trailing window is averaged in
//! the same order as [`crate::smooth::smooth_scores`].

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pca::PcaModel;
use crate::scorer::CombinedScorer;
use crate::smooth::window_mean;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Continue,
    Stop,
    AtBudget,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Continue => "continue",
            Action::Stop => "stop",
            Action::AtBudget => "at_budget",
        }
    }

    pub fn is_terminal(self) -> bool {
        self != Action::Continue
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopDecision {
    /// 1-based step number.
    pub step: usize,
    pub raw_score: f64,
    pub smoothed_score: f64,
    pub threshold: Option<f64>,
    pub action: Action,
}

/// Hard limits; whichever is reached first ends the stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub max_steps: usize,
    pub max_tokens: Option<u64>,
}

impl Budget {
    pub fn steps(max_steps: usize) -> Budget {
        Budget {
            max_steps,
            max_tokens: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MonitorState<'a> {
    scorer: &'a CombinedScorer,
    pca: &'a PcaModel,
    lambda: Option<f64>,
    window: VecDeque<f64>,
    step_count: usize,
    tokens: u64,
    stopped: bool,
    stop_step: Option<usize>,
}

impl<'a> MonitorState<'a> {
    pub fn new(scorer: &'a CombinedScorer, pca: &'a PcaModel, lambda: Option<f64>) -> Result<Self> {
        if scorer.input_dim() != pca.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: pca.output_dim(),
                got: scorer.input_dim(),
            });
        }
        Ok(MonitorState {
            scorer,
            pca,
            lambda,
            window: VecDeque::with_capacity(scorer.smoothing().window()),
            step_count: 0,
            tokens: 0,
            stopped: false,
            stop_step: None,
        })
    }

    pub fn lambda(&self) -> Option<f64> {
        self.lambda
    }

    pub fn step_count(&self) -> usize {
        self.step_count
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped
    }

    pub fn stop_step(&self) -> Option<usize> {
        self.stop_step
    }

    pub fn feed_step(&mut self, embedding: &[f32], token_count: u64, budget: &Budget) -> Result<StopDecision> {
        if self.stopped {
            return Err(Error::MonitorTerminated);
        }
        let raw_score = self.scorer.raw_step_score(self.pca, embedding)?;
        if self.window.len() == self.scorer.smoothing().window() {
            self.window.pop_front();
        }
        self.window.push_back(raw_score);
        self.step_count += 1;
        self.tokens += token_count;
        let smoothed_score = window_mean(&self.window);

        let action = if self.lambda.is_some_and(|l| smoothed_score >= l) {
            Action::Stop
        } else if self.step_count >= budget.max_steps
            || budget.max_tokens.is_some_and(|cap| self.tokens >= cap)
        {
            Action::AtBudget
        } else {
            Action::Continue
        };
        if action.is_terminal() {
            self.stopped = true;
            self.stop_step = Some(self.step_count);
        }
        Ok(StopDecision {
            step: self.step_count,
            raw_score,
            smoothed_score,
            threshold: self.lambda,
            action,
        })
    }

    /// Drives [`Self::feed_step`] until a terminal decision. The source must
    /// not run dry first.
    pub fn run_stream<'s, I>(&mut self, source: I, budget: &Budget) -> Result<(usize, Vec<StopDecision>)>
    where
        I: IntoIterator<Item = (&'s [f32], u64)>,
    {
        let mut decisions = Vec::new();
        for (embedding, tokens) in source {
            let decision = self.feed_step(embedding, tokens, budget)?;
            decisions.push(decision);
            if decision.action.is_terminal() {
                return Ok((decision.step, decisions));
            }
        }
        if decisions.is_empty() {
            Err(Error::EmptyStream)
        } else {
            Err(Error::StreamExhausted {
                steps: decisions.len(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probe::{ProbeModel, TrainConfig, TrainMeta};
    use crate::scorer::ScoreMode;
    use crate::smooth::SmoothingSpec;
    use crate::trace::LabelKind;
    use alloc::string::String;
    use alloc::vec;

    fn setup(window: usize) -> (CombinedScorer, PcaModel) {
        // identity PCA in 1-D; probe score = sigmoid(x), so x = logit(target)
        let pca = PcaModel::from_parts(vec![0.0], vec![1.0], 1, vec![1.0]).unwrap();
        let probe = ProbeModel {
            kind: LabelKind::Consistent,
            weights: vec![1.0],
            bias: 0.0,
            pca_ref: String::new(),
            train_meta: TrainMeta {
                config: TrainConfig::default(),
                examples: 0,
                positives: 0,
                initial_loss: 0.0,
                final_loss: 0.0,
            },
        };
        let scorer = CombinedScorer::new(
            ScoreMode::Consistent,
            vec![probe],
            SmoothingSpec::new(window).unwrap(),
        )
        .unwrap();
        (scorer, pca)
    }

    fn logit(p: f64) -> f32 {
        libm::log(p / (1.0 - p)) as f32
    }

    #[test]
    fn sentinel_never_stops_early() {
        let (scorer, pca) = setup(3);
        let mut m = MonitorState::new(&scorer, &pca, None).unwrap();
        let xs = [[5.0f32]; 6];
        let (stop, decisions) = m
            .run_stream(xs.iter().map(|x| (&x[..], 1)), &Budget::steps(6))
            .unwrap();
        assert_eq!(stop, 6);
        assert!(decisions[..5].iter().all(|d| d.action == Action::Continue));
        assert_eq!(decisions[5].action, Action::AtBudget);
    }

    #[test]
    fn stops_at_first_crossing() {
        // raw scores 0.1, 0.9 with window 2 smooth to 0.1, 0.5
        let (scorer, pca) = setup(2);
        let mut m = MonitorState::new(&scorer, &pca, Some(0.45)).unwrap();
        let d1 = m.feed_step(&[logit(0.1)], 1, &Budget::steps(10)).unwrap();
        assert_eq!(d1.action, Action::Continue);
        assert!((d1.smoothed_score - 0.1).abs() < 1e-6);
        let d2 = m.feed_step(&[logit(0.9)], 1, &Budget::steps(10)).unwrap();
        assert_eq!(d2.action, Action::Stop);
        assert_eq!(d2.step, 2);
        assert!((d2.smoothed_score - 0.5 * (0.1 + 0.9)).abs() < 1e-6);
        assert_eq!(m.stop_step(), Some(2));
        assert_eq!(
            m.feed_step(&[0.0], 1, &Budget::steps(10)),
            Err(Error::MonitorTerminated)
        );
    }

    #[test]
    fn single_step_zero_threshold() {
        let (scorer, pca) = setup(10);
        let mut m = MonitorState::new(&scorer, &pca, Some(0.0)).unwrap();
        let x = [-3.0f32];
        let (stop, d) = m.run_stream([(&x[..], 4)], &Budget::steps(100)).unwrap();
        assert_eq!((stop, d.len(), d[0].action), (1, 1, Action::Stop));
    }

    #[test]
    fn sub_threshold_runs_to_budget() {
        let (scorer, pca) = setup(10);
        let mut m = MonitorState::new(&scorer, &pca, Some(0.9)).unwrap();
        let xs = [[0.0f32]; 20];
        let (stop, d) = m
            .run_stream(xs.iter().map(|x| (&x[..], 1)), &Budget::steps(8))
            .unwrap();
        assert_eq!(stop, 8);
        assert_eq!(d.iter().filter(|d| d.action.is_terminal()).count(), 1);
        assert_eq!(d.last().unwrap().action, Action::AtBudget);
    }

    #[test]
    fn token_ceiling() {
        let (scorer, pca) = setup(10);
        let mut m = MonitorState::new(&scorer, &pca, None).unwrap();
        let xs = [[0.0f32]; 20];
        let budget = Budget {
            max_steps: 20,
            max_tokens: Some(250),
        };
        let (stop, _) = m.run_stream(xs.iter().map(|x| (&x[..], 100)), &budget).unwrap();
        assert_eq!(stop, 3);
    }

    #[test]
    fn stream_errors() {
        let (scorer, pca) = setup(10);
        let mut m = MonitorState::new(&scorer, &pca, None).unwrap();
        assert_eq!(
            m.run_stream(core::iter::empty(), &Budget::steps(5)),
            Err(Error::EmptyStream)
        );
        let x = [0.0f32];
        assert_eq!(
            m.run_stream([(&x[..], 1)], &Budget::steps(5)),
            Err(Error::StreamExhausted { steps: 1 })
        );
        let mut m = MonitorState::new(&scorer, &pca, None).unwrap();
        assert!(matches!(
            m.feed_step(&[0.0, 1.0], 1, &Budget::steps(5)),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
