//! Line protocol for the online monitor.
//!
//! Input frames are a header line `STEP <id> <dim>` followed by `dim`
//! whitespace-separated floats, on the header line or the lines after it.
//! Each frame yields one output line
//! `DECIDE <id> <step> <smoothed:.6f> <continue|stop|at_budget>`.
//! Streams with different ids are independent.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use riskstop_core::monitor::{Budget, MonitorState};
use riskstop_core::pca::PcaModel;
use riskstop_core::scorer::CombinedScorer;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ProtocolSummary {
    pub frames: usize,
    pub streams: usize,
    pub stopped: usize,
}

struct Frame {
    id: String,
    dim: usize,
    values: Vec<f32>,
    line: usize,
}

fn protocol(line: usize, msg: impl Into<String>) -> Error {
    Error::Protocol { line, msg: msg.into() }
}

pub fn run_protocol<R: BufRead, W: Write>(
    input: R,
    mut output: W,
    scorer: &CombinedScorer,
    pca: &PcaModel,
    lambda: Option<f64>,
    budget: &Budget,
) -> Result<ProtocolSummary> {
    let mut states: HashMap<String, MonitorState<'_>> = HashMap::new();
    let mut summary = ProtocolSummary::default();
    let mut pending: Option<Frame> = None;

    let mut decide = |frame: Frame, summary: &mut ProtocolSummary| -> Result<()> {
        if !states.contains_key(&frame.id) {
            states.insert(frame.id.clone(), MonitorState::new(scorer, pca, lambda)?);
            summary.streams += 1;
        }
        let state = states.get_mut(&frame.id).expect("inserted above");
        if state.is_stopped() {
            return Err(protocol(frame.line, format!("stream {} already terminated", frame.id)));
        }
        let d = state
            .feed_step(&frame.values, 0, budget)
            .map_err(|e| protocol(frame.line, e.to_string()))?;
        summary.frames += 1;
        if d.action.is_terminal() {
            summary.stopped += 1;
        }
        writeln!(
            output,
            "DECIDE {} {} {:.6} {}",
            frame.id,
            d.step,
            d.smoothed_score,
            d.action.as_str()
        )
        .and_then(|_| output.flush())
        .map_err(|e| Error::io("<stdout>", e))
    };

    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io("<stdin>", e))?;
        let mut tokens = line.split_whitespace();
        if pending.is_none() {
            let Some(head) = tokens.next() else { continue };
            if head != "STEP" {
                return Err(protocol(line_no, format!("expected STEP, found {head:?}")));
            }
            let id = tokens.next().ok_or_else(|| protocol(line_no, "missing stream id"))?;
            let dim: usize = tokens
                .next()
                .ok_or_else(|| protocol(line_no, "missing dimension"))?
                .parse()
                .map_err(|_| protocol(line_no, "dimension is not a non-negative integer"))?;
            if dim != pca.input_dim() {
                return Err(protocol(
                    line_no,
                    format!("dimension {dim} does not match the model's {}", pca.input_dim()),
                ));
            }
            pending = Some(Frame {
                id: id.to_string(),
                dim,
                values: Vec::with_capacity(dim),
                line: line_no,
            });
        }
        let frame = pending.as_mut().expect("frame open");
        for tok in tokens {
            if frame.values.len() == frame.dim {
                return Err(protocol(line_no, format!("more than {} values in frame", frame.dim)));
            }
            let v: f32 = tok
                .parse()
                .map_err(|_| protocol(line_no, format!("bad float {tok:?}")))?;
            frame.values.push(v);
        }
        if frame.values.len() == frame.dim {
            decide(pending.take().expect("frame open"), &mut summary)?;
        }
    }
    if let Some(frame) = pending {
        return Err(protocol(
            frame.line,
            format!("input ended inside the frame for {} ({}/{} values)", frame.id, frame.values.len(), frame.dim),
        ));
    }
    Ok(summary)
}
