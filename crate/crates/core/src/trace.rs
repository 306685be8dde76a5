//! Trace data model: steps, optional per-step labels, and validated sets.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One reasoning step with its pooled embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub index: usize,
    pub text: String,
    pub embedding: Vec<f32>,
    pub token_count: u32,
}

/// Per-step supervision. Any subset may be present.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepLabels {
    pub correct_if_stopped: Option<bool>,
    pub consistent_with_final: Option<bool>,
    pub is_leaf: Option<bool>,
    pub is_novel: Option<bool>,
}

/// Which of the four step labels an operation reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    Correct,
    Consistent,
    Leaf,
    Novel,
}

impl LabelKind {
    pub const ALL: [LabelKind; 4] = [
        LabelKind::Correct,
        LabelKind::Consistent,
        LabelKind::Leaf,
        LabelKind::Novel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LabelKind::Correct => "correct",
            LabelKind::Consistent => "consistent",
            LabelKind::Leaf => "leaf",
            LabelKind::Novel => "novel",
        }
    }

    pub fn get(self, labels: &StepLabels) -> Option<bool> {
        match self {
            LabelKind::Correct => labels.correct_if_stopped,
            LabelKind::Consistent => labels.consistent_with_final,
            LabelKind::Leaf => labels.is_leaf,
            LabelKind::Novel => labels.is_novel,
        }
    }
}

/// One question's full thought trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub id: String,
    pub question: String,
    pub steps: Vec<Step>,
    pub labels: Vec<StepLabels>,
    /// Correctness at the full budget, when known.
    pub final_correct: Option<bool>,
    pub total_tokens: u64,
}

impl Trace {
    /// Builds a trace, filling `index` and `total_tokens` from the steps.
    pub fn from_parts(
        id: impl Into<String>,
        question: impl Into<String>,
        steps: Vec<(String, Vec<f32>, u32)>,
        labels: Vec<StepLabels>,
        final_correct: Option<bool>,
    ) -> Result<Trace> {
        let steps: Vec<Step> = steps
            .into_iter()
            .enumerate()
            .map(|(index, (text, embedding, token_count))| Step {
                index,
                text,
                embedding,
                token_count,
            })
            .collect();
        let total_tokens = steps.iter().map(|s| u64::from(s.token_count)).sum();
        let trace = Trace {
            id: id.into(),
            question: question.into(),
            steps,
            labels,
            final_correct,
            total_tokens,
        };
        trace.validate(None)?;
        Ok(trace)
    }

    /// Number of steps `T`.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Embedding length of the first step (0 for an empty trace).
    pub fn dimension(&self) -> usize {
        self.steps.first().map_or(0, |s| s.embedding.len())
    }

    /// Label `kind` at 0-based `step`, failing loudly when absent.
    pub fn label(&self, kind: LabelKind, step: usize) -> Result<bool> {
        self.labels
            .get(step)
            .and_then(|l| kind.get(l))
            .ok_or_else(|| Error::MissingLabel {
                label: kind.name(),
                id: self.id.clone(),
                step,
            })
    }

    /// Cumulative token count after each step.
    pub fn cumulative_tokens(&self) -> Vec<u64> {
        self.steps
            .iter()
            .scan(0u64, |acc, s| {
                *acc += u64::from(s.token_count);
                Some(*acc)
            })
            .collect()
    }

    /// Checks the structural invariants. With `dimension` set, every step
    /// embedding must have exactly that length.
    pub fn validate(&self, dimension: Option<usize>) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::EmptyTrace {
                id: self.id.clone(),
            });
        }
        if self.labels.len() != self.steps.len() {
            return Err(Error::LabelStepMismatch {
                id: self.id.clone(),
            });
        }
        let expected = dimension.unwrap_or_else(|| self.dimension());
        let mut summed = 0u64;
        for (position, step) in self.steps.iter().enumerate() {
            if step.index != position {
                return Err(Error::StepIndex {
                    id: self.id.clone(),
                    position,
                    index: step.index,
                });
            }
            if step.embedding.len() != expected {
                return Err(Error::TraceDimension {
                    id: self.id.clone(),
                    expected,
                    got: step.embedding.len(),
                });
            }
            if step.embedding.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteEmbedding {
                    id: self.id.clone(),
                    step: position,
                });
            }
            if !step.text.is_empty() && step.token_count == 0 {
                return Err(Error::ZeroTokens {
                    id: self.id.clone(),
                    step: position,
                });
            }
            summed += u64::from(step.token_count);
        }
        if summed != self.total_tokens {
            return Err(Error::TokenTotal {
                id: self.id.clone(),
                declared: self.total_tokens,
                summed,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTag {
    Train,
    Calibration,
    Test,
}

/// A validated collection of traces sharing one embedding dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSet {
    traces: Vec<Trace>,
    dimension: usize,
    split: SplitTag,
}

impl TraceSet {
    pub fn new(traces: Vec<Trace>, dimension: usize, split: SplitTag) -> Result<TraceSet> {
        let mut seen = BTreeSet::new();
        for trace in &traces {
            trace.validate(Some(dimension))?;
            if !seen.insert(trace.id.as_str()) {
                return Err(Error::DuplicateId(trace.id.clone()));
            }
        }
        Ok(TraceSet {
            traces,
            dimension,
            split,
        })
    }

    /// Infers the dimension from the first trace. An empty list yields
    /// dimension 0.
    pub fn from_traces(traces: Vec<Trace>, split: SplitTag) -> Result<TraceSet> {
        let dimension = traces.first().map_or(0, Trace::dimension);
        TraceSet::new(traces, dimension, split)
    }

    pub fn traces(&self) -> &[Trace] {
        &self.traces
    }

    pub fn into_traces(self) -> Vec<Trace> {
        self.traces
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn split(&self) -> SplitTag {
        self.split
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    /// Total number of steps across all traces.
    pub fn step_count(&self) -> usize {
        self.traces.iter().map(Trace::len).sum()
    }

    /// Iterates over every step embedding in trace order.
    pub fn embeddings(&self) -> impl Iterator<Item = &[f32]> {
        self.traces
            .iter()
            .flat_map(|t| t.steps.iter().map(|s| s.embedding.as_slice()))
    }
}
