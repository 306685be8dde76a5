//! Synthetic reasoning traces with known ground truth.
//!
//! Each trace grows a [`ReasoningGraph`]. At step `t` the generator either
//! adds a child of the current node (a novel thought, with probability
//! `initial * decay^(t-1)` while `t` is within the trace's convergence
//! horizon) or moves within the existing graph: back to a uniformly chosen
//! ancestor with probability `p_backtrack`, otherwise a redundant restatement
//! of the most recent thought or, half the time, of a uniformly chosen node.
//!
//! The attempt after `t` steps is the deepest answer-bearing node present
//! (newest among equals), and a step is labeled consistent when that attempt
//! equals the one at the last step. The last added node is always
//! answer-bearing, so any trace that grows has a final attempt; whether that
//! attempt is correct is an independent Bernoulli(1 - difficulty) draw.
//!
//! Step embeddings are the visited node's latent vector (zero on the
//! planted coordinates), plus planted signals, plus isotropic Gaussian noise:
//!
//! | coordinate | signal                                   |
//! |------------|------------------------------------------|
//! | 0          | step visits an answer-bearing node (leaf)|
//! | 1          | step added a node (novel)                |
//! | 2          | graph has stopped changing               |

pub mod coverage;
mod graph;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use graph::{GraphNode, ReasoningGraph};

use crate::error::{Error, Result};
use crate::trace::{SplitTag, StepLabels, Trace, TraceSet};

pub const PLANTED_LEAF: usize = 0;
pub const PLANTED_NOVEL: usize = 1;
pub const PLANTED_SETTLED: usize = 2;
const PLANTED: usize = 3;

/// Novel-thought probability `initial * decay^(t-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeafSchedule {
    pub initial: f64,
    pub decay: f64,
}

impl LeafSchedule {
    pub fn at(&self, step: usize) -> f64 {
        self.initial * libm::pow(self.decay, (step - 1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub seed: u64,
    pub n_traces: usize,
    pub min_steps: usize,
    /// Maximum budget `T` in steps.
    pub max_steps: usize,
    pub p_new_leaf: LeafSchedule,
    /// The convergence horizon is `ceil(u * len)` for `u` uniform in
    /// `[lo, hi]`; no node is added after it.
    pub convergence: (f64, f64),
    pub p_backtrack: f64,
    /// Probability a new node is answer-bearing.
    pub p_answer: f64,
    /// Probability a trace's final attempt is wrong.
    pub difficulty: f64,
    pub noise_scale: f64,
    pub signal_scale: f64,
    pub latent_scale: f64,
    pub embed_dim: usize,
    pub tokens_per_step: (u32, u32),
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 0,
            n_traces: 500,
            min_steps: 24,
            max_steps: 40,
            p_new_leaf: LeafSchedule {
                initial: 0.85,
                decay: 0.97,
            },
            convergence: (0.1, 0.45),
            p_backtrack: 0.3,
            p_answer: 0.35,
            difficulty: 0.25,
            noise_scale: 0.6,
            signal_scale: 1.0,
            latent_scale: 0.5,
            embed_dim: 64,
            tokens_per_step: (16, 160),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("p_new_leaf.initial", self.p_new_leaf.initial),
            ("p_new_leaf.decay", self.p_new_leaf.decay),
            ("p_backtrack", self.p_backtrack),
            ("p_answer", self.p_answer),
            ("difficulty", self.difficulty),
            ("convergence.lo", self.convergence.0),
            ("convergence.hi", self.convergence.1),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} = {p} not in [0, 1]")));
            }
        }
        if self.convergence.0 > self.convergence.1 {
            return Err(Error::invalid("convergence range is reversed"));
        }
        if self.min_steps == 0 || self.min_steps > self.max_steps {
            return Err(Error::invalid("need 1 <= min_steps <= max_steps"));
        }
        if self.embed_dim < PLANTED {
            return Err(Error::invalid(format!("embed_dim must be at least {PLANTED}")));
        }
        if !(self.noise_scale >= 0.0 && self.signal_scale >= 0.0 && self.latent_scale >= 0.0) {
            return Err(Error::invalid("scales must be non-negative"));
        }
        if self.tokens_per_step.0 == 0 || self.tokens_per_step.0 > self.tokens_per_step.1 {
            return Err(Error::invalid("need 1 <= tokens_per_step.0 <= tokens_per_step.1"));
        }
        Ok(())
    }
}

/// Hidden state behind one simulated trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub id: String,
    pub added_leaf: Vec<bool>,
    pub was_backtrack: Vec<bool>,
    /// Node visited at each step.
    pub visited: Vec<usize>,
    /// Attempt implied after each step.
    pub attempts: Vec<Option<usize>>,
    /// 1-based step of the last graph change (1 if it never changes).
    pub graph_converged_at: usize,
    pub convergence_horizon: usize,
    pub solvable: bool,
    pub graph: ReasoningGraph,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub trace: Trace,
    pub truth: GroundTruth,
}

/// Generates `config.n_traces` traces. Trace `i` depends only on
/// `(config, i)`.
pub fn generate(config: &SimConfig) -> Result<Vec<SimTrace>> {
    config.validate()?;
    Ok((0..config.n_traces).map(|i| generate_one(config, i)).collect())
}

/// [`generate`], split into a validated set and its ground truth.
pub fn generate_set(config: &SimConfig, split: SplitTag) -> Result<(TraceSet, Vec<GroundTruth>)> {
    let (traces, truth) = generate(config)?
        .into_iter()
        .map(|s| (s.trace, s.truth))
        .unzip();
    Ok((TraceSet::new(traces, config.embed_dim, split)?, truth))
}

fn gaussian_vec(rng: &mut ChaCha8Rng, dim: usize, scale: f64, skip: usize) -> Vec<f32> {
    (0..dim)
        .map(|j| {
            if j < skip {
                0.0
            } else {
                (scale * rng.sample::<f64, _>(StandardNormal)) as f32
            }
        })
        .collect()
}

fn generate_one(config: &SimConfig, index: usize) -> SimTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);
    let dim = config.embed_dim;

    let len = rng.random_range(config.min_steps..=config.max_steps);
    let u = if config.convergence.0 < config.convergence.1 {
        rng.random_range(config.convergence.0..=config.convergence.1)
    } else {
        config.convergence.0
    };
    let horizon = (libm::ceil(u * len as f64) as usize).clamp(1, len);
    let solvable_draw = rng.random_bool(1.0 - config.difficulty);

    let mut graph = ReasoningGraph::new(gaussian_vec(&mut rng, dim, config.latent_scale, PLANTED));
    let mut current = ReasoningGraph::ROOT;
    let mut last_added: Option<usize> = None;
    let mut added_leaf = Vec::with_capacity(len);
    let mut was_backtrack = Vec::with_capacity(len);
    let mut visited = Vec::with_capacity(len);
    let mut tokens = Vec::with_capacity(len);

    for t in 1..=len {
        let add = t <= horizon && rng.random_bool(config.p_new_leaf.at(t).clamp(0.0, 1.0));
        let mut backtrack = false;
        if add {
            let answer = rng.random_bool(config.p_answer);
            let latent = gaussian_vec(&mut rng, dim, config.latent_scale, PLANTED);
            current = graph.add_child(current, answer, t, latent);
            last_added = Some(current);
        } else if rng.random_bool(config.p_backtrack) {
            let ancestors = graph.ancestors(current);
            if !ancestors.is_empty() {
                current = ancestors[rng.random_range(0..ancestors.len())];
                backtrack = true;
            }
        } else if let (Some(last), false) = (last_added, rng.random_bool(0.5)) {
            current = last;
        } else {
            current = rng.random_range(0..graph.len());
        }
        added_leaf.push(add);
        was_backtrack.push(backtrack);
        visited.push(current);
        tokens.push(rng.random_range(config.tokens_per_step.0..=config.tokens_per_step.1));
    }

    if let Some(last) = last_added {
        graph.set_answer_bearing(last);
    }
    let graph_converged_at = last_added
        .and_then(|id| graph.node(id).added_at)
        .unwrap_or(1);
    let attempts: Vec<Option<usize>> = (1..=len).map(|t| graph.attempt_at(t)).collect();
    let final_attempt = attempts[len - 1];
    let solvable = solvable_draw && final_attempt.is_some();
    graph.answer_node = if solvable { final_attempt } else { None };

    let mut steps = Vec::with_capacity(len);
    let mut labels = Vec::with_capacity(len);
    for t in 1..=len {
        let i = t - 1;
        let node = graph.node(visited[i]);
        let leaf = node.answer_bearing;
        let novel = added_leaf[i];
        let settled = t >= graph_converged_at;
        let consistent = attempts[i] == final_attempt;

        let mut embedding = node.latent.clone();
        let s = config.signal_scale as f32;
        embedding[PLANTED_LEAF] += if leaf { s } else { 0.0 };
        embedding[PLANTED_NOVEL] += if novel { s } else { 0.0 };
        embedding[PLANTED_SETTLED] += if settled { s } else { 0.0 };
        for v in embedding.iter_mut() {
            *v += (config.noise_scale * rng.sample::<f64, _>(StandardNormal)) as f32;
        }

        let text = if novel {
            format!("But consider a new thought (node {}).", visited[i])
        } else if was_backtrack[i] {
            format!("Wait, go back to node {}.", visited[i])
        } else {
            format!("Wait, restating node {}.", visited[i])
        };
        steps.push((text, embedding, tokens[i]));
        labels.push(StepLabels {
            correct_if_stopped: Some(solvable && consistent),
            consistent_with_final: Some(consistent),
            is_leaf: Some(leaf),
            is_novel: Some(novel),
        });
    }

    let id = format!("sim-{index:06}");
    let trace = Trace::from_parts(
        id.clone(),
        format!("Synthetic question {index}"),
        steps,
        labels,
        Some(solvable),
    )
    .expect("simulator emits valid traces");
    SimTrace {
        trace,
        truth: GroundTruth {
            id,
            added_leaf,
            was_backtrack,
            visited,
            attempts,
            graph_converged_at,
            convergence_horizon: horizon,
            solvable,
            graph,
        },
    }
}
