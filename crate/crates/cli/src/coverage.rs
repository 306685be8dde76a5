//! Parallel driver for the coverage experiment.

use rayon::prelude::*;
use riskstop_core::sim::coverage::{run_repeat, summarize, CoverageConfig, CoverageReport, RepeatOutcome};

use crate::error::Result;

/// Same output as the sequential core driver; repeats run on the rayon
/// pool and are reduced in repeat order.
pub fn coverage_parallel(cfg: &CoverageConfig) -> Result<(CoverageReport, Vec<RepeatOutcome>)> {
    cfg.validate()?;
    let repeats = (0..cfg.repeats)
        .into_par_iter()
        .map(|r| run_repeat(cfg, r))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((summarize(cfg, &repeats), repeats))
}
