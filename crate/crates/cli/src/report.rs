//! CSV reports. Missing thresholds and levels are written as `NONE`.

use std::io::Write;

use riskstop_core::eval::{BudgetCurvePoint, CalibrationReportRow};
use riskstop_core::sim::coverage::CoverageRow;
use serde::Serialize;

use crate::error::Result;

pub const NONE: &str = "NONE";

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| NONE.to_string(), |x| x.to_string())
}

#[derive(Serialize)]
struct CurveRow<'a> {
    method: &'a str,
    budget: String,
    epsilon: String,
    selected_lambda: String,
    mean_tokens: f64,
    mean_steps: f64,
    outcome_rate: f64,
    n_test: usize,
}

pub fn write_curve<W: Write>(points: &[BudgetCurvePoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(CurveRow {
            method: p.method.name(),
            budget: opt(p.budget),
            epsilon: opt(p.epsilon),
            selected_lambda: opt(p.selected_lambda),
            mean_tokens: p.mean_tokens,
            mean_steps: p.mean_steps,
            outcome_rate: p.outcome_rate,
            n_test: p.n_test,
        })?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Serialize)]
struct ReportRow {
    epsilon: f64,
    delta: f64,
    realized_violation_rate: f64,
    selected_lambda: String,
    mean_stop_step: f64,
    token_savings: f64,
}

pub fn write_calibration_report<W: Write>(rows: &[CalibrationReportRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(ReportRow {
            epsilon: r.epsilon,
            delta: r.delta,
            realized_violation_rate: r.realized_violation_rate,
            selected_lambda: opt(r.selected_lambda),
            mean_stop_step: r.mean_stop_step,
            token_savings: r.token_savings,
        })?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_coverage<W: Write>(rows: &[CoverageRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
