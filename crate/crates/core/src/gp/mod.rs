//! Nearest-neighbour local-kriging Gaussian-process classifier.
//!
//! Every query is predicted from its `k` nearest training points only:
//! the `k × k` system `σ²(C + εI)` (correlation matrix `C`, nugget `ε`
//! relative to the kernel variance) is factored with Cholesky, and the
//! posterior mean of the one-hot label matrix and the posterior variance
//! are read off. The predicted class is the arg-max of
//! the two mean components; a small gap between them marks the cutout as
//! ambiguous.

pub mod bessel;
mod cholesky;
pub mod kernel;

use crate::{Error, Label, Result};

pub use cholesky::Cholesky;
pub use kernel::MaternKernel;

/// Hyperparameters of the GP classifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpSettings {
    pub nu: f64,
    pub length_scale: f64,
    pub variance: f64,
    pub k_neighbors: usize,
    pub nugget: f64,
    pub ambiguity_threshold: f64,
}

impl Default for GpSettings {
    fn default() -> Self {
        Self {
            nu: 10.0,
            length_scale: 20.0,
            variance: 1.0,
            k_neighbors: 28,
            nugget: 1e-5,
            ambiguity_threshold: 0.2,
        }
    }
}

impl GpSettings {
    pub fn kernel(&self) -> Result<MaternKernel> {
        MaternKernel::new(self.nu, self.length_scale, self.variance)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpPrediction {
    /// Posterior mean of the one-hot label, per class.
    pub mean: [f64; 2],
    pub variance: f64,
    pub label: Label,
    pub ambiguous: bool,
}

impl GpPrediction {
    pub fn gap(&self) -> f64 {
        (self.mean[0] - self.mean[1]).abs()
    }
}

/// Stored training set plus hyperparameters. Immutable once built.
#[derive(Debug, Clone)]
pub struct GpModel {
    dim: usize,
    features: Vec<f64>,
    /// One-hot rows, `n × 2`.
    labels: Vec<[f64; 2]>,
    kernel: MaternKernel,
    k_neighbors: usize,
    nugget: f64,
    ambiguity_threshold: f64,
}

fn one_hot(l: Label) -> [f64; 2] {
    match l {
        Label::Single => [1.0, 0.0],
        Label::Cso => [0.0, 1.0],
    }
}

const JITTER_STEPS: usize = 10;

impl GpModel {
    pub fn fit<V: AsRef<[f64]>>(
        features: &[V],
        labels: &[Label],
        settings: &GpSettings,
    ) -> Result<Self> {
        let rows: Vec<[f64; 2]> = labels.iter().map(|&l| one_hot(l)).collect();
        Self::from_one_hot(features, rows, settings)
    }

    /// Builds a model from explicit label rows (each must sum to one).
    pub fn from_one_hot<V: AsRef<[f64]>>(
        features: &[V],
        labels: Vec<[f64; 2]>,
        settings: &GpSettings,
    ) -> Result<Self> {
        let n = features.len();
        if n == 0 || labels.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: labels.len(),
            });
        }
        if settings.k_neighbors == 0 || settings.k_neighbors > n {
            return Err(Error::Config(format!(
                "k_neighbors must lie in 1..={n}, got {}",
                settings.k_neighbors
            )));
        }
        if !(settings.nugget >= 0.0) {
            return Err(Error::Config("nugget must be >= 0".into()));
        }
        if labels.iter().any(|r| (r[0] + r[1] - 1.0).abs() > 1e-12) {
            return Err(Error::Config("label rows must sum to 1".into()));
        }
        let dim = features[0].as_ref().len();
        let mut flat = Vec::with_capacity(n * dim);
        for f in features {
            let f = f.as_ref();
            if f.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: f.len(),
                });
            }
            flat.extend_from_slice(f);
        }
        Ok(Self {
            dim,
            features: flat,
            labels,
            kernel: settings.kernel()?,
            k_neighbors: settings.k_neighbors,
            nugget: settings.nugget,
            ambiguity_threshold: settings.ambiguity_threshold,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kernel(&self) -> &MaternKernel {
        &self.kernel
    }

    pub fn k_neighbors(&self) -> usize {
        self.k_neighbors
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn ambiguity_threshold(&self) -> f64 {
        self.ambiguity_threshold
    }

    pub fn feature(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label_rows(&self) -> &[[f64; 2]] {
        &self.labels
    }

    pub fn settings(&self) -> GpSettings {
        GpSettings {
            nu: self.kernel.nu(),
            length_scale: self.kernel.length_scale(),
            variance: self.kernel.variance(),
            k_neighbors: self.k_neighbors,
            nugget: self.nugget,
            ambiguity_threshold: self.ambiguity_threshold,
        }
    }

    /// Indices of the `k` training points closest to `query` in Euclidean
    /// distance, nearest first; equal distances go to the lower index.
    pub fn find_neighbors(&self, query: &[f64]) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = (0..self.len())
            .map(|i| (kernel::squared_euclidean(query, self.feature(i)), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        let k = self.k_neighbors;
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, cmp);
            d.truncate(k);
        }
        d.sort_unstable_by(cmp);
        d.into_iter().map(|(_, i)| i).collect()
    }

    fn factor_with_jitter(&self, mut kmat: Vec<f64>, n: usize) -> Result<Cholesky> {
        if let Some(c) = Cholesky::factor(&kmat, n) {
            return Ok(c);
        }
        let diag: Vec<f64> = (0..n).map(|i| kmat[i * n + i]).collect();
        let mean_diag = diag.iter().sum::<f64>() / n as f64;
        let mut jitter = 1e-12 * mean_diag;
        let mut added = 0.0;
        for _ in 0..JITTER_STEPS {
            for i in 0..n {
                kmat[i * n + i] += jitter - added;
            }
            added = jitter;
            if let Some(c) = Cholesky::factor(&kmat, n) {
                return Ok(c);
            }
            jitter *= 10.0;
        }
        Err(Error::Factorization {
            size: n,
            jitter: added,
            min_diag: diag.iter().copied().fold(f64::INFINITY, f64::min),
            max_diag: diag.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }

    /// Local kriging prediction at `query`.
    pub fn posterior(&self, query: &[f64]) -> Result<GpPrediction> {
        if query.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: query.len(),
            });
        }
        let nbrs = self.find_neighbors(query);
        let n = nbrs.len();

        let mut kmat = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..a {
                let v = self
                    .kernel
                    .between(self.feature(nbrs[a]), self.feature(nbrs[b]));
                kmat[a * n + b] = v;
                kmat[b * n + a] = v;
            }
            kmat[a * n + a] = self.kernel.variance() * (1.0 + self.nugget);
        }
        let chol = self.factor_with_jitter(kmat, n)?;

        let cross: Vec<f64> = nbrs
            .iter()
            .map(|&i| self.kernel.between(query, self.feature(i)))
            .collect();

        let mut mean = [0.0; 2];
        for (c, m) in mean.iter_mut().enumerate() {
            let mut alpha: Vec<f64> = nbrs.iter().map(|&i| self.labels[i][c]).collect();
            chol.solve(&mut alpha);
            *m = cross.iter().zip(&alpha).map(|(k, a)| k * a).sum();
        }

        let mut v = cross;
        chol.forward(&mut v);
        let explained: f64 = v.iter().map(|x| x * x).sum();
        let variance = (self.kernel.variance() - explained).max(0.0);

        let label = if mean[1] > mean[0] {
            Label::Cso
        } else {
            Label::Single
        };
        Ok(GpPrediction {
            mean,
            variance,
            label,
            ambiguous: (mean[0] - mean[1]).abs() < self.ambiguity_threshold,
        })
    }

    /// Posterior for each query, in order.
    pub fn classify_batch<V: AsRef<[f64]>>(&self, queries: &[V]) -> Result<Vec<GpPrediction>> {
        queries.iter().map(|q| self.posterior(q.as_ref())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::seed::stream;
    use rand::Rng;

    fn instance(n: usize, dim: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Label>) {
        let mut rng = stream(seed, "gp");
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.random::<f64>() * 4.0).collect())
            .collect();
        let y = x
            .iter()
            .map(|r| {
                if r[0] + r[1] > 4.0 {
                    Label::Cso
                } else {
                    Label::Single
                }
            })
            .collect();
        (x, y)
    }

    fn settings(k: usize, nugget: f64) -> GpSettings {
        GpSettings {
            nu: 0.5,
            length_scale: 1.0,
            k_neighbors: k,
            nugget,
            ..GpSettings::default()
        }
    }

    #[test]
    fn neighbors_match_full_sort() {
        let (x, y) = instance(200, 5, 1);
        let m = GpModel::fit(&x, &y, &settings(28, 1e-5)).unwrap();
        let q = vec![2.0; 5];
        let mut all: Vec<(f64, usize)> = x
            .iter()
            .enumerate()
            .map(|(i, r)| (kernel::euclidean(&q, r), i))
            .collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let want: Vec<usize> = all.iter().take(28).map(|p| p.1).collect();
        assert_eq!(m.find_neighbors(&q), want);

        assert_eq!(m.find_neighbors(&x[17])[0], 17);
    }

    #[test]
    fn neighbor_ties_prefer_lower_index() {
        let x = vec![vec![1.0], vec![-1.0], vec![1.0], vec![5.0]];
        let y = vec![Label::Single; 4];
        let m = GpModel::fit(&x, &y, &settings(2, 0.0)).unwrap();
        assert_eq!(m.find_neighbors(&[0.0]), vec![0, 1]);
        let all = GpModel::fit(&x, &y, &settings(4, 0.0)).unwrap();
        let mut got = all.find_neighbors(&[0.0]);
        got.sort_unstable();
        assert_eq!(got, vec![0, 1, 2, 3]);
    }

    #[test]
    fn interpolates_noiseless_training_points() {
        let (x, y) = instance(60, 3, 2);
        let m = GpModel::fit(&x, &y, &settings(10, 0.0)).unwrap();
        for j in [0, 13, 59] {
            let p = m.posterior(&x[j]).unwrap();
            let want = one_hot(y[j]);
            assert!((p.mean[0] - want[0]).abs() < 1e-8);
            assert!((p.mean[1] - want[1]).abs() < 1e-8);
            assert!(p.variance < 1e-8);
            assert_eq!(p.label, y[j]);
        }
    }

    #[test]
    fn swapping_label_columns_swaps_means() {
        let (x, y) = instance(80, 4, 3);
        let rows: Vec<[f64; 2]> = y.iter().map(|&l| one_hot(l)).collect();
        let swapped: Vec<[f64; 2]> = rows.iter().map(|r| [r[1], r[0]]).collect();
        let s = GpSettings {
            k_neighbors: 20,
            ..GpSettings::default()
        };
        let a = GpModel::from_one_hot(&x, rows, &s).unwrap();
        let b = GpModel::from_one_hot(&x, swapped, &s).unwrap();
        let q = vec![1.5, 2.5, 0.5, 3.0];
        let pa = a.posterior(&q).unwrap();
        let pb = b.posterior(&q).unwrap();
        assert_eq!(pa.mean[0], pb.mean[1]);
        assert_eq!(pa.mean[1], pb.mean[0]);
    }

    #[test]
    fn labels_invariant_to_variance_scale() {
        let (x, y) = instance(150, 4, 4);
        let queries = instance(40, 4, 5).0;
        let base = GpSettings {
            nu: 2.5,
            length_scale: 2.0,
            k_neighbors: 15,
            nugget: 1e-3,
            ..GpSettings::default()
        };
        let a = GpModel::fit(&x, &y, &base).unwrap();
        let scaled = GpSettings {
            variance: 7.0,
            ..base
        };
        let b = GpModel::fit(&x, &y, &scaled).unwrap();
        for q in &queries {
            let (pa, pb) = (a.posterior(q).unwrap(), b.posterior(q).unwrap());
            assert_eq!(pa.label, pb.label);
            assert!((pa.gap() - pb.gap()).abs() < 1e-10);
            assert!((7.0 * pa.variance - pb.variance).abs() < 1e-9);
        }
    }

    #[test]
    fn batch_matches_sequential_and_permutes() {
        let (x, y) = instance(120, 4, 6);
        let m = GpModel::fit(&x, &y, &GpSettings::default()).unwrap();
        let qs = instance(12, 4, 7).0;
        let batch = m.classify_batch(&qs).unwrap();
        for (q, b) in qs.iter().zip(&batch) {
            assert_eq!(&m.posterior(q).unwrap(), b);
        }
        let rev: Vec<Vec<f64>> = qs.iter().rev().cloned().collect();
        let rb = m.classify_batch(&rev).unwrap();
        let mut back = rb.clone();
        back.reverse();
        assert_eq!(back, batch);
        assert!(m.classify_batch::<Vec<f64>>(&[]).unwrap().is_empty());
    }

    #[test]
    fn ambiguity_flag_follows_gap() {
        let (x, y) = instance(100, 2, 8);
        let mut s = settings(20, 1e-4);
        s.ambiguity_threshold = 0.2;
        let m = GpModel::fit(&x, &y, &s).unwrap();
        for q in instance(30, 2, 9).0 {
            let p = m.posterior(&q).unwrap();
            assert_eq!(p.ambiguous, p.gap() < 0.2);
            assert_eq!(p.label == Label::Cso, p.mean[1] > p.mean[0]);
            assert!(p.variance >= 0.0);
        }
    }

    #[test]
    fn jitter_rescues_duplicate_points() {
        let x = vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 1.0]];
        let y = vec![Label::Single, Label::Single, Label::Cso];
        let m = GpModel::fit(&x, &y, &settings(3, 0.0)).unwrap();
        assert!(m.posterior(&[0.2, 0.1]).is_ok());
    }

    #[test]
    fn construction_errors() {
        let (x, y) = instance(10, 2, 10);
        assert!(GpModel::fit(&x, &y, &settings(11, 0.0)).is_err());
        assert!(GpModel::fit(&x, &y[..9], &settings(3, 0.0)).is_err());
        let bad = GpSettings {
            nu: 0.3,
            ..settings(3, 0.0)
        };
        assert!(matches!(
            GpModel::fit(&x, &y, &bad),
            Err(Error::UnsupportedNu(_))
        ));
        let m = GpModel::fit(&x, &y, &settings(3, 0.0)).unwrap();
        assert!(matches!(m.posterior(&[1.0]), Err(Error::Dimension { .. })));
    }
}
