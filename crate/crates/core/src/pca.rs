//! Principal component analysis for step embeddings.
//!
//! The model is fit once on training-split embeddings and then frozen. The
//! covariance uses `1/(N-1)` normalization and is diagonalized with cyclic
//! Jacobi rotations, so fitting is deterministic. Each component's sign is
//! fixed by making its largest-magnitude coordinate positive.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;

/// Target dimension used for real model embeddings.
pub const DEFAULT_OUTPUT_DIM: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    mean: Vec<f64>,
    /// Row-major `output_dim x input_dim`; rows are orthonormal axes.
    components: Vec<f64>,
    input_dim: usize,
    output_dim: usize,
    explained_variance: Vec<f64>,
}

impl PcaModel {
    /// Reassembles a model from stored parts, checking shapes.
    pub fn from_parts(
        mean: Vec<f64>,
        components: Vec<f64>,
        output_dim: usize,
        explained_variance: Vec<f64>,
    ) -> Result<PcaModel> {
        let input_dim = mean.len();
        if components.len() != output_dim * input_dim {
            return Err(Error::invalid("component matrix shape does not match dimensions"));
        }
        if explained_variance.len() != output_dim {
            return Err(Error::invalid("explained variance length does not match output_dim"));
        }
        if mean
            .iter()
            .chain(&components)
            .chain(&explained_variance)
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("PCA model contains non-finite values"));
        }
        Ok(PcaModel {
            mean,
            components,
            input_dim,
            output_dim,
            explained_variance,
        })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.components[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    /// `components . (x - mean)`
    pub fn project(&self, x: &[f32]) -> Result<Vec<f64>> {
        self.check_input(x.len())?;
        Ok(self.project_with(|j| f64::from(x[j])))
    }

    pub fn project_f64(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x.len())?;
        Ok(self.project_with(|j| x[j]))
    }

    /// Maps projected coordinates back to input space.
    pub fn reconstruct(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.output_dim {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim,
                got: z.len(),
            });
        }
        let mut out = self.mean.clone();
        for (i, &zi) in z.iter().enumerate() {
            for (o, c) in out.iter_mut().zip(self.component(i)) {
                *o += zi * c;
            }
        }
        Ok(out)
    }

    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: len,
            });
        }
        Ok(())
    }

    fn project_with(&self, x: impl Fn(usize) -> f64) -> Vec<f64> {
        let centered: Vec<f64> = (0..self.input_dim).map(|j| x(j) - self.mean[j]).collect();
        (0..self.output_dim)
            .map(|i| {
                self.component(i)
                    .iter()
                    .zip(&centered)
                    .map(|(c, v)| c * v)
                    .sum()
            })
            .collect()
    }
}

/// Fits a `d`-component PCA on `rows` (each of equal length `D`).
///
/// A request larger than `D` is clamped to `D` with a warning; a request
/// larger than `N - 1` is an error. Rank-deficient data is fine: trailing
/// eigenvalues come out as zero.
pub fn fit_pca<R: AsRef<[f32]>>(rows: &[R], d: usize) -> Result<PcaModel> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::TooFewRows(n));
    }
    let dim = rows[0].as_ref().len();
    if let Some(bad) = rows.iter().find(|r| r.as_ref().len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.as_ref().len(),
        });
    }
    let mut d = d;
    if d > dim {
        log::warn!("PCA target dimension {d} exceeds input dimension {dim}; clamping to {dim}");
        d = dim;
    }
    if d > n - 1 || d == 0 {
        return Err(Error::PcaDimension {
            requested: d,
            limit: dim.min(n - 1),
            rows_minus_one: n - 1,
        });
    }

    let mut mean = vec![0.0; dim];
    for row in rows {
        for (m, &v) in mean.iter_mut().zip(row.as_ref()) {
            *m += f64::from(v);
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }

    // Upper triangle of the scatter matrix, then mirrored.
    let mut cov = vec![0.0; dim * dim];
    let mut centered = vec![0.0; dim];
    for row in rows {
        for ((c, &v), m) in centered.iter_mut().zip(row.as_ref()).zip(&mean) {
            *c = f64::from(v) - m;
        }
        for i in 0..dim {
            let ci = centered[i];
            if ci == 0.0 {
                continue;
            }
            let out = &mut cov[i * dim + i..(i + 1) * dim];
            for (o, cj) in out.iter_mut().zip(&centered[i..]) {
                *o += ci * cj;
            }
        }
    }
    let scale = 1.0 / (n - 1) as f64;
    for i in 0..dim {
        for j in i..dim {
            let v = cov[i * dim + j] * scale;
            cov[i * dim + j] = v;
            cov[j * dim + i] = v;
        }
    }

    let (values, vectors) = symmetric_eigen(cov, dim);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));

    let mut components = Vec::with_capacity(d * dim);
    let mut explained_variance = Vec::with_capacity(d);
    for &col in order.iter().take(d) {
        let mut axis: Vec<f64> = (0..dim).map(|k| vectors[k * dim + col]).collect();
        let pivot = axis
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (k, v)| {
                if v.abs() > best.1 {
                    (k, v.abs())
                } else {
                    best
                }
            })
            .0;
        if axis[pivot] < 0.0 {
            axis.iter_mut().for_each(|v| *v = -*v);
        }
        components.extend(axis);
        explained_variance.push(values[col].max(0.0));
    }

    Ok(PcaModel {
        mean,
        components,
        input_dim: dim,
        output_dim: d,
        explained_variance,
    })
}
