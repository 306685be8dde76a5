//! Slow, independent reference implementations used by the integration
//! and acceptance tests.

#![allow(dead_code)]

/// Sample covariance (1/(N-1)) of row-major `rows`, computed directly.
pub fn covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let mut cov = vec![vec![0.0; d]; d];
    for a in 0..d {
        for b in 0..d {
            let s: f64 = rows.iter().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).sum();
            cov[a][b] = s / (n - 1) as f64;
        }
    }
    cov
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Top `k` eigenpairs of a symmetric PSD matrix by power iteration with
/// Hotelling deflation.
pub fn power_iteration_eigen(matrix: &[Vec<f64>], k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d = matrix.len();
    let mut m: Vec<Vec<f64>> = matrix.to_vec();
    let mut values = Vec::new();
    let mut vectors = Vec::new();
    for c in 0..k {
        // deterministic start not orthogonal to anything in particular
        let mut v: Vec<f64> = (0..d).map(|j| 1.0 + ((j * 7 + c * 13) % 11) as f64 / 10.0).collect();
        let n0 = norm(&v);
        v.iter_mut().for_each(|x| *x /= n0);
        let mut lambda = 0.0;
        for _ in 0..200_000 {
            let mut w = mat_vec(&m, &v);
            let nw = norm(&w);
            if nw == 0.0 {
                lambda = 0.0;
                break;
            }
            w.iter_mut().for_each(|x| *x /= nw);
            let next = w.iter().zip(mat_vec(&m, &w)).map(|(a, b)| a * b).sum::<f64>();
            let delta: f64 = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
            v = w;
            let done = (next - lambda).abs() <= 1e-15 * next.abs().max(1e-300) && delta < 1e-12;
            lambda = next;
            if done {
                break;
            }
        }
        for a in 0..d {
            for b in 0..d {
                m[a][b] -= lambda * v[a] * v[b];
            }
        }
        values.push(lambda);
        vectors.push(v);
    }
    (values, vectors)
}

/// Probability that a positive outranks a negative, ties counting one half,
/// by comparing every pair.
pub fn pairwise_auroc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut doubled: u64 = 0;
    let mut pairs: u64 = 0;
    for (i, &si) in scores.iter().enumerate() {
        if !labels[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] {
                continue;
            }
            pairs += 1;
            doubled += if si > sj {
                2
            } else if si == sj {
                1
            } else {
                0
            };
        }
    }
    doubled as f64 / (2 * pairs) as f64
}

/// `P(Binom(n, p) <= k)` as `sum_i C(n, i) p^i (1-p)^(n-i)`, with binomial
/// coefficients from Pascal's triangle.
pub fn binomial_cdf_direct(n: usize, p: f64, k: usize) -> f64 {
    let mut row = vec![1.0f64];
    for _ in 0..n {
        let mut next = vec![1.0; row.len() + 1];
        for i in 1..row.len() {
            next[i] = row[i - 1] + row[i];
        }
        row = next;
    }
    (0..=k)
        .map(|i| row[i] * p.powi(i as i32) * (1.0 - p).powi((n - i) as i32))
        .sum()
}

/// Largest `j` such that every hypothesis `0..=j` is rejected at `epsilon`,
/// found by checking each candidate prefix.
pub fn fixed_sequence_oracle(p_values: &[f64], epsilon: f64) -> Option<usize> {
    (0..p_values.len())
        .filter(|&j| p_values[..=j].iter().all(|&p| p <= epsilon))
        .max()
}

/// Central-difference gradient of `f` at `x`.
pub fn finite_difference<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}
