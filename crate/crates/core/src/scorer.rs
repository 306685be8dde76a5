//! Per-step exit scores built from one or two probes, then smoothed.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pca::PcaModel;
use crate::probe::{score_step, train_probe, ProbeKind, ProbeModel, TrainConfig};
use crate::smooth::{smooth_scores, SmoothingSpec};
use crate::trace::{LabelKind, Trace, TraceSet};

/// Which exit score a scorer produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    Correct,
    Consistent,
    NovelLeaf,
}

impl ScoreMode {
    pub fn name(self) -> &'static str {
        match self {
            ScoreMode::Correct => "correct",
            ScoreMode::Consistent => "consistent",
            ScoreMode::NovelLeaf => "novel_leaf",
        }
    }

    /// Probe kinds this mode needs.
    pub fn probe_kinds(self) -> &'static [ProbeKind] {
        match self {
            ScoreMode::Correct => &[LabelKind::Correct],
            ScoreMode::Consistent => &[LabelKind::Consistent],
            ScoreMode::NovelLeaf => &[LabelKind::Leaf, LabelKind::Novel],
        }
    }

    /// Label that supervises the risk for this mode. The novel-leaf risk
    /// reuses consistency labels.
    pub fn risk_label(self) -> LabelKind {
        match self {
            ScoreMode::Correct => LabelKind::Correct,
            ScoreMode::Consistent | ScoreMode::NovelLeaf => LabelKind::Consistent,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Probes {
    Single(ProbeModel),
    NovelLeaf { leaf: ProbeModel, novel: ProbeModel },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinedScorer {
    mode: ScoreMode,
    probes: Probes,
    smoothing: SmoothingSpec,
}

impl CombinedScorer {
    /// Requires exactly the probes `mode` needs, all of the same dimension.
    pub fn new(mode: ScoreMode, probes: Vec<ProbeModel>, smoothing: SmoothingSpec) -> Result<Self> {
        let kinds = mode.probe_kinds();
        let mut picked: Vec<ProbeModel> = Vec::with_capacity(kinds.len());
        let mut rest = probes;
        for &kind in kinds {
            let pos = rest
                .iter()
                .position(|p| p.kind == kind)
                .ok_or(Error::MissingProbe(kind.name()))?;
            picked.push(rest.swap_remove(pos));
        }
        if let Some(extra) = rest.first() {
            return Err(Error::invalid(alloc::format!(
                "mode {} does not use a {} probe",
                mode.name(),
                extra.kind.name()
            )));
        }
        if picked.iter().any(|p| p.dim() != picked[0].dim()) {
            return Err(Error::invalid("probes disagree on input dimension"));
        }
        let probes = if mode == ScoreMode::NovelLeaf {
            let novel = picked.pop().expect("two probes");
            let leaf = picked.pop().expect("two probes");
            Probes::NovelLeaf { leaf, novel }
        } else {
            Probes::Single(picked.pop().expect("one probe"))
        };
        Ok(CombinedScorer {
            mode,
            probes,
            smoothing,
        })
    }

    pub fn mode(&self) -> ScoreMode {
        self.mode
    }

    pub fn smoothing(&self) -> SmoothingSpec {
        self.smoothing
    }

    pub fn probes(&self) -> Vec<&ProbeModel> {
        match &self.probes {
            Probes::Single(p) => alloc::vec![p],
            Probes::NovelLeaf { leaf, novel } => alloc::vec![leaf, novel],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.probes()[0].dim()
    }

    /// Unsmoothed score for one projected embedding. For novel-leaf this is
    /// `P(leaf) * (1 - P(novel))`.
    pub fn raw_score(&self, projected: &[f64]) -> Result<f64> {
        match &self.probes {
            Probes::Single(p) => score_step(p, projected),
            Probes::NovelLeaf { leaf, novel } => {
                Ok(novel_leaf_score(score_step(leaf, projected)?, score_step(novel, projected)?))
            }
        }
    }

    /// Projects `embedding` through `pca`, then scores it.
    pub fn raw_step_score(&self, pca: &PcaModel, embedding: &[f32]) -> Result<f64> {
        self.raw_score(&pca.project(embedding)?)
    }
}

pub fn novel_leaf_score(p_leaf: f64, p_novel: f64) -> f64 {
    p_leaf * (1.0 - p_novel)
}

/// Raw per-step scores for a trace, before smoothing.
pub fn raw_trace_scores(scorer: &CombinedScorer, trace: &Trace, pca: &PcaModel) -> Result<Vec<f64>> {
    trace
        .steps
        .iter()
        .map(|s| scorer.raw_step_score(pca, &s.embedding))
        .collect()
}

/// Smoothed exit scores, one per step.
pub fn score_trace(scorer: &CombinedScorer, trace: &Trace, pca: &PcaModel) -> Result<Vec<f64>> {
    if trace.dimension() != pca.input_dim() {
        return Err(Error::TraceDimension {
            id: trace.id.clone(),
            expected: pca.input_dim(),
            got: trace.dimension(),
        });
    }
    smooth_scores(&raw_trace_scores(scorer, trace, pca)?, scorer.smoothing)
}

/// Trains every probe `mode` needs on `train` and assembles the scorer.
pub fn fit_scorer(
    mode: ScoreMode,
    train: &TraceSet,
    pca: &PcaModel,
    pca_ref: &str,
    config: &TrainConfig,
    smoothing: SmoothingSpec,
) -> Result<CombinedScorer> {
    let probes = mode
        .probe_kinds()
        .iter()
        .map(|&kind| train_probe(kind, train, pca, pca_ref, config))
        .collect::<Result<Vec<_>>>()?;
    CombinedScorer::new(mode, probes, smoothing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probe::TrainMeta;
    use crate::trace::StepLabels;
    use alloc::string::String;
    use alloc::vec;
    use proptest::prelude::*;

    fn probe(kind: ProbeKind, weights: Vec<f64>, bias: f64) -> ProbeModel {
        ProbeModel {
            kind,
            weights,
            bias,
            pca_ref: String::new(),
            train_meta: TrainMeta {
                config: TrainConfig::default(),
                examples: 0,
                positives: 0,
                initial_loss: 0.0,
                final_loss: 0.0,
            },
        }
    }

    fn identity_pca(dim: usize) -> PcaModel {
        let mut comps = vec![0.0; dim * dim];
        for i in 0..dim {
            comps[i * dim + i] = 1.0;
        }
        PcaModel::from_parts(vec![0.0; dim], comps, dim, vec![1.0; dim]).unwrap()
    }

    fn trace_from(rows: &[[f32; 2]]) -> Trace {
        Trace::from_parts(
            "t",
            "",
            rows.iter().map(|r| (String::new(), r.to_vec(), 1)).collect(),
            vec![StepLabels::default(); rows.len()],
            None,
        )
        .unwrap()
    }

    #[test]
    fn mode_requirements() {
        let s = SmoothingSpec::default();
        let leaf = probe(LabelKind::Leaf, vec![0.0], 0.0);
        let novel = probe(LabelKind::Novel, vec![0.0], 0.0);
        let cons = probe(LabelKind::Consistent, vec![0.0], 0.0);
        assert_eq!(
            CombinedScorer::new(ScoreMode::NovelLeaf, vec![leaf.clone()], s),
            Err(Error::MissingProbe("novel"))
        );
        assert_eq!(
            CombinedScorer::new(ScoreMode::Correct, vec![cons.clone()], s),
            Err(Error::MissingProbe("correct"))
        );
        assert!(CombinedScorer::new(ScoreMode::Consistent, vec![cons.clone(), leaf.clone()], s).is_err());
        let nl = CombinedScorer::new(ScoreMode::NovelLeaf, vec![novel, leaf], s).unwrap();
        assert_eq!(nl.probes()[0].kind, LabelKind::Leaf);
    }

    #[test]
    fn novel_leaf_endpoints() {
        // huge biases saturate the sigmoids to exactly 0 or 1
        let s = SmoothingSpec::new(3).unwrap();
        let pca = identity_pca(2);
        let trace = trace_from(&[[0.1, 0.2], [0.3, -0.4], [1.0, 1.0]]);
        let sure_leaf = probe(LabelKind::Leaf, vec![0.0, 0.0], 800.0);
        let never_novel = probe(LabelKind::Novel, vec![0.0, 0.0], -800.0);
        let always_novel = probe(LabelKind::Novel, vec![0.0, 0.0], 800.0);
        let sc = CombinedScorer::new(ScoreMode::NovelLeaf, vec![sure_leaf.clone(), never_novel], s).unwrap();
        assert_eq!(raw_trace_scores(&sc, &trace, &pca).unwrap(), vec![1.0; 3]);
        let random_leaf = probe(LabelKind::Leaf, vec![0.7, -1.3], 0.2);
        let sc = CombinedScorer::new(ScoreMode::NovelLeaf, vec![random_leaf, always_novel], s).unwrap();
        assert_eq!(score_trace(&sc, &trace, &pca).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn consistent_mode_hand_computation() {
        // w = (1, -1), b = 0.5 on 5 steps, window 2
        let rows = [[0.0f32, 0.0], [1.0, 0.0], [0.0, 1.0], [2.0, 1.0], [-1.0, 0.5]];
        let logits = [0.5f64, 1.5, -0.5, 1.5, -1.0];
        let raw: Vec<f64> = logits.iter().map(|z| 1.0 / (1.0 + libm::exp(-z))).collect();
        let expected = [
            raw[0],
            (raw[0] + raw[1]) / 2.0,
            (raw[1] + raw[2]) / 2.0,
            (raw[2] + raw[3]) / 2.0,
            (raw[3] + raw[4]) / 2.0,
        ];
        let sc = CombinedScorer::new(
            ScoreMode::Consistent,
            vec![probe(LabelKind::Consistent, vec![1.0, -1.0], 0.5)],
            SmoothingSpec::new(2).unwrap(),
        )
        .unwrap();
        let got = score_trace(&sc, &trace_from(&rows), &identity_pca(2)).unwrap();
        for (g, e) in got.iter().zip(expected) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_names_trace() {
        let sc = CombinedScorer::new(
            ScoreMode::Consistent,
            vec![probe(LabelKind::Consistent, vec![1.0; 3], 0.0)],
            SmoothingSpec::default(),
        )
        .unwrap();
        let err = score_trace(&sc, &trace_from(&[[0.0, 0.0]]), &identity_pca(3)).unwrap_err();
        assert!(matches!(err, Error::TraceDimension { .. }));
    }

    proptest! {
        #[test]
        fn novel_leaf_bounds_and_monotonicity(
            l1 in 0.0f64..=1.0, l2 in 0.0f64..=1.0, n1 in 0.0f64..=1.0, n2 in 0.0f64..=1.0,
        ) {
            let s = novel_leaf_score(l1, n1);
            prop_assert!((0.0..=1.0).contains(&s));
            let (lo_l, hi_l) = (l1.min(l2), l1.max(l2));
            prop_assert!(novel_leaf_score(lo_l, n1) <= novel_leaf_score(hi_l, n1));
            let (lo_n, hi_n) = (n1.min(n2), n1.max(n2));
            prop_assert!(novel_leaf_score(l1, lo_n) >= novel_leaf_score(l1, hi_n));
        }
    }
}
