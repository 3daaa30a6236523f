use nalgebra::{DMatrix, SymmetricEigen};

use super::{FeatureVector, Stage};
use crate::{Error, Result};

pub const DEFAULT_COMPONENTS: usize = 21;

/// Principal-component basis fitted on a training set.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub dim: usize,
    pub mean: Vec<f64>,
    /// `n_components × dim`, row-major; rows are orthonormal.
    pub components: Vec<f64>,
    /// Sample variance along each component, non-increasing.
    pub eigenvalues: Vec<f64>,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn component(&self, j: usize) -> &[f64] {
        &self.components[j * self.dim..(j + 1) * self.dim]
    }

    /// Scores of a raw vector: `components · (v − mean)`.
    pub fn project_slice(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: v.len(),
            });
        }
        Ok((0..self.n_components())
            .map(|j| {
                self.component(j)
                    .iter()
                    .zip(v.iter().zip(&self.mean))
                    .map(|(c, (x, m))| c * (x - m))
                    .sum()
            })
            .collect())
    }

    pub fn project(&self, v: &FeatureVector) -> Result<FeatureVector> {
        if v.stage != Stage::RawNormalized {
            return Err(Error::Stage {
                expected: Stage::RawNormalized,
                got: v.stage,
            });
        }
        Ok(FeatureVector {
            values: self.project_slice(&v.values)?,
            stage: Stage::Pca,
        })
    }

    /// Maps scores back to the input space.
    pub fn reconstruct(&self, scores: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (j, s) in scores.iter().enumerate() {
            for (o, c) in out.iter_mut().zip(self.component(j)) {
                *o += s * c;
            }
        }
        out
    }
}

/// Fits PCA on `rows` (each of equal length) via the symmetric
/// eigendecomposition of the sample covariance (denominator `n − 1`).
///
/// Each component is oriented so that its largest-magnitude entry is
/// positive (first such entry on ties). Eigenvalues are clamped at zero.
pub fn fit_pca<V: AsRef<[f64]>>(rows: &[V], n_components: usize) -> Result<PcaModel> {
    let n = rows.len();
    if n < n_components + 1 {
        return Err(Error::InsufficientSamples {
            needed: n_components + 1,
            got: n,
        });
    }
    let dim = rows[0].as_ref().len();
    if n_components == 0 || n_components > dim {
        return Err(Error::Config(format!(
            "n_components must lie in 1..={dim}, got {n_components}"
        )));
    }

    let mut mean = vec![0.0; dim];
    for r in rows {
        let r = r.as_ref();
        if r.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: r.len(),
            });
        }
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }

    let centered = DMatrix::from_fn(n, dim, |i, j| rows[i].as_ref()[j] - mean[j]);
    let cov = centered.tr_mul(&centered) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
            .then(a.cmp(&b))
    });

    let mut components = Vec::with_capacity(n_components * dim);
    let mut eigenvalues = Vec::with_capacity(n_components);
    for &k in order.iter().take(n_components) {
        let col = eig.eigenvectors.column(k);
        let mut pivot = 0;
        for i in 1..dim {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let s = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        components.extend(col.iter().map(|v| s * v));
        eigenvalues.push(eig.eigenvalues[k].max(0.0));
    }

    Ok(PcaModel {
        dim,
        mean,
        components,
        eigenvalues,
    })
}
