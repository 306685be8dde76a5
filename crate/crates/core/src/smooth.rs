//! Causal windowed smoothing of per-step scores.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_WINDOW: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct SmoothingSpec {
    window: usize,
}

impl SmoothingSpec {
    pub fn new(window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::invalid("smoothing window must be at least 1"));
        }
        Ok(SmoothingSpec { window })
    }

    pub fn window(self) -> usize {
        self.window
    }
}

impl Default for SmoothingSpec {
    fn default() -> Self {
        SmoothingSpec {
            window: DEFAULT_WINDOW,
        }
    }
}

impl TryFrom<usize> for SmoothingSpec {
    type Error = Error;

    fn try_from(window: usize) -> Result<Self> {
        SmoothingSpec::new(window)
    }
}

impl From<SmoothingSpec> for usize {
    fn from(spec: SmoothingSpec) -> usize {
        spec.window
    }
}

/// Trailing mean: `out[t] = mean(scores[max(0, t-w+1) ..= t])`.
pub fn smooth_scores(scores: &[f64], spec: SmoothingSpec) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::invalid("cannot smooth an empty score vector"));
    }
    if let Some(bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::invalid(alloc::format!("score {bad} outside [0, 1]")));
    }
    let w = spec.window;
    Ok((0..scores.len())
        .map(|t| window_mean(&scores[(t + 1).saturating_sub(w)..=t]))
        .collect())
}

/// Mean of a window, summed oldest to newest. The online monitor calls this
/// on its buffer so that its output matches [`smooth_scores`] bit for bit.
pub(crate) fn window_mean<'a>(window: impl IntoIterator<Item = &'a f64>) -> f64 {
    let (sum, n) = window
        .into_iter()
        .fold((0.0, 0usize), |(sum, n), &s| (sum + s, n + 1));
    sum / n as f64
}
