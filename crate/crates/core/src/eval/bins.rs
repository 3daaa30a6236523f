use crate::{Error, Result};

/// Equal-count partition of a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Bins {
    /// `(lowest, highest)` value in each bin.
    pub ranges: Vec<(f64, f64)>,
    /// Mean of the values in each bin.
    pub means: Vec<f64>,
    pub counts: Vec<usize>,
    /// Bin of each input value, in input order.
    pub assignment: Vec<usize>,
}

impl Bins {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Sorts `values` (stable, so ties keep input order) and cuts the sorted
/// sequence into `n_bins` contiguous runs. Bin sizes are `⌊n/b⌋` or
/// `⌈n/b⌉`, with the larger bins first.
pub fn equal_count_bins(values: &[f64], n_bins: usize) -> Result<Bins> {
    let n = values.len();
    if n_bins == 0 || n < n_bins {
        return Err(Error::TooFewValues {
            values: n,
            bins: n_bins,
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("covariate values must be finite".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

    let (base, rem) = (n / n_bins, n % n_bins);
    let mut assignment = vec![0; n];
    let mut ranges = Vec::with_capacity(n_bins);
    let mut means = Vec::with_capacity(n_bins);
    let mut counts = Vec::with_capacity(n_bins);
    let mut start = 0;
    for b in 0..n_bins {
        let size = base + usize::from(b < rem);
        let members = &order[start..start + size];
        for &i in members {
            assignment[i] = b;
        }
        ranges.push((values[members[0]], values[members[size - 1]]));
        means.push(members.iter().map(|&i| values[i]).sum::<f64>() / size as f64);
        counts.push(size);
        start += size;
    }
    Ok(Bins {
        ranges,
        means,
        counts,
        assignment,
    })
}
