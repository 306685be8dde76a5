//! Exact binomial lower tail, used as the Learn-then-Test p-value.

use crate::error::{Error, Result};

/// `P(Binom(n, rate) <= k)`.
///
/// Terms are summed exactly by the pmf recurrence
/// `pmf(i+1) = pmf(i) * (n-i)/(i+1) * rate/(1-rate)` starting from
/// `(1-rate)^n`. When that starting term would underflow, each term is
/// evaluated in log space instead. Returns exactly 1 at `k = n`.
pub fn binom_tail_pvalue(n: u64, rate: f64, k: u64) -> Result<f64> {
    if k > n {
        return Err(Error::CountOutOfRange { n, k });
    }
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::invalid(alloc::format!("binomial rate {rate} not in (0, 1)")));
    }
    if k == n {
        return Ok(1.0);
    }
    let log_q = libm::log1p(-rate);
    let p = if n as f64 * log_q > -700.0 {
        recurrence_sum(n, rate, k)
    } else {
        log_space_sum(n, rate, k)
    };
    Ok(p.clamp(0.0, 1.0))
}

fn recurrence_sum(n: u64, rate: f64, k: u64) -> f64 {
    let odds = rate / (1.0 - rate);
    let mut term = pow_u64(1.0 - rate, n);
    let mut total = term;
    for i in 0..k {
        term = term * (n - i) as f64 / (i + 1) as f64 * odds;
        total += term;
    }
    total
}

fn log_space_sum(n: u64, rate: f64, k: u64) -> f64 {
    let log_p = libm::log(rate);
    let log_q = libm::log1p(-rate);
    let ln_n_fact = libm::lgamma(n as f64 + 1.0);
    let log_term = |i: u64| {
        ln_n_fact - libm::lgamma(i as f64 + 1.0) - libm::lgamma((n - i) as f64 + 1.0)
            + i as f64 * log_p
            + (n - i) as f64 * log_q
    };
    // the pmf is unimodal, so the largest summed term is at min(k, mode)
    let mode = libm::floor((n + 1) as f64 * rate) as u64;
    let peak = log_term(k.min(mode));
    let scaled: f64 = (0..=k).map(|i| libm::exp(log_term(i) - peak)).sum();
    libm::exp(peak) * scaled
}

/// `base^exp` by repeated squaring with a fixed operation order.
fn pow_u64(base: f64, mut exp: u64) -> f64 {
    let mut acc = 1.0;
    let mut b = base;
    while exp > 0 {
        if exp & 1 == 1 {
            acc *= b;
        }
        b *= b;
        exp >>= 1;
    }
    acc
}
