//! Ranking metrics.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Binary AUROC: the probability that a random positive outranks a random
/// negative, ties counting one half.
///
/// Computed by a sort-and-sweep over tie groups with integer counts, so the
/// result is exactly `(2 * wins + ties) / (2 * P * N)`.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("AUROC scores contain NaN"));
    }
    let positives = labels.iter().filter(|&&l| l).count() as u64;
    let negatives = labels.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::DegenerateLabels(format!(
            "AUROC needs both classes, got {positives} positives and {negatives} negatives"
        )));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // twice the Mann-Whitney U statistic
    let mut doubled_u: u128 = 0;
    let mut negatives_below: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut group_pos, mut group_neg) = (0u64, 0u64);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] {
                group_pos += 1;
            } else {
                group_neg += 1;
            }
            j += 1;
        }
        doubled_u += 2 * u128::from(group_pos) * u128::from(negatives_below)
            + u128::from(group_pos) * u128::from(group_neg);
        negatives_below += group_neg;
        i = j;
    }
    Ok(doubled_u as f64 / (2 * u128::from(positives) * u128::from(negatives)) as f64)
}
