//! Trace files: one JSON object per line plus a binary embedding sidecar.
//!
//! Sidecar layout, all little-endian: `TCAL`, version `u32` = 1, dim `u32`,
//! row count `u64`, then `count * dim` `f32` values. Each step's `emb_off`
//! is its row in the sidecar.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use riskstop_core::trace::{SplitTag, StepLabels, Trace, TraceSet};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SIDECAR_MAGIC: &[u8; 4] = b"TCAL";
pub const SIDECAR_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepRecord {
    text: String,
    token_count: u32,
    emb_off: u64,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelRecord {
    correct: Option<bool>,
    consistent: Option<bool>,
    leaf: Option<bool>,
    novel: Option<bool>,
}

impl From<&StepLabels> for LabelRecord {
    fn from(l: &StepLabels) -> Self {
        LabelRecord {
            correct: l.correct_if_stopped,
            consistent: l.consistent_with_final,
            leaf: l.is_leaf,
            novel: l.is_novel,
        }
    }
}

impl From<LabelRecord> for StepLabels {
    fn from(l: LabelRecord) -> Self {
        StepLabels {
            correct_if_stopped: l.correct,
            consistent_with_final: l.consistent,
            is_leaf: l.leaf,
            is_novel: l.novel,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceRecord {
    id: String,
    question: String,
    steps: Vec<StepRecord>,
    labels: Vec<LabelRecord>,
    final_correct: Option<bool>,
}

/// The sidecar that accompanies `path`: same stem, extension `tcal`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("tcal")
}

pub fn save_traceset(set: &TraceSet, path: &Path) -> Result<()> {
    let dim = set.dimension();
    let rows = set.step_count();
    let mut sidecar = Vec::with_capacity(HEADER_LEN + rows * dim * 4);
    sidecar.extend_from_slice(SIDECAR_MAGIC);
    sidecar.extend_from_slice(&SIDECAR_VERSION.to_le_bytes());
    sidecar.extend_from_slice(&(dim as u32).to_le_bytes());
    sidecar.extend_from_slice(&(rows as u64).to_le_bytes());

    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut offset = 0u64;
    for trace in set.traces() {
        let mut steps = Vec::with_capacity(trace.len());
        for step in &trace.steps {
            for v in &step.embedding {
                sidecar.extend_from_slice(&v.to_le_bytes());
            }
            steps.push(StepRecord {
                text: step.text.clone(),
                token_count: step.token_count,
                emb_off: offset,
            });
            offset += 1;
        }
        let record = TraceRecord {
            id: trace.id.clone(),
            question: trace.question.clone(),
            steps,
            labels: trace.labels.iter().map(LabelRecord::from).collect(),
            final_correct: trace.final_correct,
        };
        serde_json::to_writer(&mut out, &record).map_err(|e| Error::Json { path: path.into(), source: e })?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    std::fs::write(&side, sidecar).map_err(|e| Error::io(&side, e))
}

struct Sidecar {
    dim: usize,
    rows: Vec<f32>,
}

impl Sidecar {
    fn row(&self, i: u64) -> Option<&[f32]> {
        let start = usize::try_from(i).ok()?.checked_mul(self.dim)?;
        self.rows.get(start..start + self.dim)
    }

    fn count(&self) -> usize {
        self.rows.len().checked_div(self.dim).unwrap_or(0)
    }
}

fn read_sidecar(path: &Path) -> Result<Sidecar> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < HEADER_LEN || &bytes[..4] != SIDECAR_MAGIC {
        return Err(Error::container(path, "not a TCAL sidecar"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != SIDECAR_VERSION {
        return Err(Error::container(path, format!("unsupported sidecar version {version}")));
    }
    let dim = u32_at(8) as usize;
    let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let expected = (count as u128) * (dim as u128) * 4 + HEADER_LEN as u128;
    if bytes.len() as u128 != expected {
        return Err(Error::container(
            path,
            format!("sidecar holds {} bytes, header implies {expected}", bytes.len()),
        ));
    }
    let rows = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Sidecar { dim, rows })
}

/// Reads a trace file and its sidecar. Any invalid record aborts the load.
pub fn load_traceset(path: &Path, split: SplitTag) -> Result<TraceSet> {
    let side_path = sidecar_path(path);
    if !side_path.exists() {
        return Err(Error::MissingInput(format!("embedding sidecar {}", side_path.display())));
    }
    let sidecar = read_sidecar(&side_path)?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let malformed = |line: usize, msg: String| Error::Malformed {
        path: path.into(),
        line,
        msg,
    };

    let mut traces = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TraceRecord = serde_json::from_str(&line).map_err(|e| malformed(line_no, e.to_string()))?;
        let mut steps = Vec::with_capacity(record.steps.len());
        for s in record.steps {
            let row = sidecar.row(s.emb_off).ok_or_else(|| {
                malformed(
                    line_no,
                    format!("emb_off {} outside sidecar of {} rows", s.emb_off, sidecar.count()),
                )
            })?;
            steps.push((s.text, row.to_vec(), s.token_count));
        }
        let labels = record.labels.into_iter().map(StepLabels::from).collect();
        traces.push(Trace::from_parts(record.id, record.question, steps, labels, record.final_correct)?);
    }
    Ok(TraceSet::new(traces, sidecar.dim, split)?)
}
