//! JSON artifacts for trained probes and calibration results.

use std::path::{Path, PathBuf};

use riskstop_core::calibrate::CalibrationResult;
use riskstop_core::pca::PcaModel;
use riskstop_core::probe::{ProbeKind, ProbeModel, TrainConfig, TrainMeta};
use riskstop_core::scorer::CombinedScorer;
use riskstop_core::smooth::SmoothingSpec;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha1::{Digest, Sha1};

use crate::error::{Error, Result};
use crate::pca_file::load_pca;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeMetrics {
    pub examples: usize,
    pub positives: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub train_auroc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeArtifact {
    pub kind: ProbeKind,
    pub d: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
    /// The PCA model the weights expect projections from.
    pub pca: PathBuf,
    pub hyperparameters: TrainConfig,
    pub metrics: ProbeMetrics,
}

impl ProbeArtifact {
    pub fn new(probe: &ProbeModel, pca: &Path, train_auroc: f64) -> Self {
        let meta = &probe.train_meta;
        ProbeArtifact {
            kind: probe.kind,
            d: probe.dim(),
            weights: probe.weights.clone(),
            bias: probe.bias,
            pca: pca.to_path_buf(),
            hyperparameters: meta.config,
            metrics: ProbeMetrics {
                examples: meta.examples,
                positives: meta.positives,
                initial_loss: meta.initial_loss,
                final_loss: meta.final_loss,
                train_auroc,
            },
        }
    }

    pub fn into_model(self) -> Result<ProbeModel> {
        if self.weights.len() != self.d {
            return Err(riskstop_core::Error::DimensionMismatch {
                expected: self.d,
                got: self.weights.len(),
            }
            .into());
        }
        Ok(ProbeModel {
            kind: self.kind,
            weights: self.weights,
            bias: self.bias,
            pca_ref: self.pca.display().to_string(),
            train_meta: TrainMeta {
                config: self.hyperparameters,
                examples: self.metrics.examples,
                positives: self.metrics.positives,
                initial_loss: self.metrics.initial_loss,
                final_loss: self.metrics.final_loss,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRef {
    pub path: PathBuf,
    pub kind: ProbeKind,
    /// Git blob hash of the artifact bytes at calibration time.
    pub sha1: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationArtifact {
    #[serde(flatten)]
    pub result: CalibrationResult,
    pub window: usize,
    pub pca: PathBuf,
    pub probes: Vec<ProbeRef>,
}

/// `sha1("blob <len>\0" ++ bytes)`, as `git hash-object` computes it.
pub fn git_blob_sha1(bytes: &[u8]) -> String {
    let mut hasher = Sha1::new();
    hasher.update(format!("blob {}\0", bytes.len()).as_bytes());
    hasher.update(bytes);
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json { path: path.into(), source: e })
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Json { path: path.into(), source: e })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_probe(path: &Path) -> Result<ProbeArtifact> {
    read_json(path)
}

/// Absolute form of `path`, so artifacts stay valid from any working directory.
pub fn absolute(path: &Path) -> Result<PathBuf> {
    std::path::absolute(path).map_err(|e| Error::io(path, e))
}

pub fn probe_ref(path: &Path) -> Result<ProbeRef> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let artifact: ProbeArtifact =
        serde_json::from_slice(&bytes).map_err(|e| Error::Json { path: path.into(), source: e })?;
    Ok(ProbeRef {
        path: absolute(path)?,
        kind: artifact.kind,
        sha1: git_blob_sha1(&bytes),
    })
}

/// Loads the PCA model and probes a calibration refers to, checking each
/// probe against its recorded hash.
pub fn load_calibrated_scorer(cal: &CalibrationArtifact) -> Result<(PcaModel, CombinedScorer)> {
    let pca = load_pca(&cal.pca)?;
    let mut probes = Vec::with_capacity(cal.probes.len());
    for r in &cal.probes {
        let bytes = std::fs::read(&r.path).map_err(|e| Error::io(&r.path, e))?;
        let actual = git_blob_sha1(&bytes);
        if actual != r.sha1 {
            return Err(Error::StaleProbe {
                path: r.path.clone(),
                expected: r.sha1.clone(),
                actual,
            });
        }
        let artifact: ProbeArtifact =
            serde_json::from_slice(&bytes).map_err(|e| Error::Json { path: r.path.clone(), source: e })?;
        probes.push(artifact.into_model()?);
    }
    let scorer = CombinedScorer::new(cal.result.spec.mode, probes, SmoothingSpec::new(cal.window)?)?;
    Ok((pca, scorer))
}
