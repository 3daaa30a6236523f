use super::bins::{equal_count_bins, Bins};
use super::{Item, RunResult};
use crate::{Label, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Covariate {
    Separation,
    DeltaMag,
    PrimaryMag,
}

impl Covariate {
    pub const ALL: [Covariate; 3] = [
        Covariate::Separation,
        Covariate::DeltaMag,
        Covariate::PrimaryMag,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Covariate::Separation => "separation",
            Covariate::DeltaMag => "delta_mag",
            Covariate::PrimaryMag => "primary_mag",
        }
    }

    pub fn axis_label(self) -> &'static str {
        match self {
            Covariate::Separation => "separation (arcsec)",
            Covariate::DeltaMag => "delta magnitude",
            Covariate::PrimaryMag => "primary magnitude",
        }
    }

    /// Value on `item`; separation and ΔMag exist only for CSO truth.
    pub fn value(self, item: &Item) -> Option<f64> {
        match self {
            Covariate::Separation => item.separation_arcsec,
            Covariate::DeltaMag => item.delta_mag,
            Covariate::PrimaryMag => Some(item.primary_mag),
        }
    }
}

/// Fixed bins over the whole dataset for one covariate.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateBins {
    pub covariate: Covariate,
    pub bins: Bins,
    /// Bin of each dataset item, `None` when the covariate is absent.
    pub item_bin: Vec<Option<usize>>,
}

pub fn covariate_bins(
    items: &[Item],
    covariate: Covariate,
    n_bins: usize,
) -> Result<CovariateBins> {
    let (ids, values): (Vec<usize>, Vec<f64>) = items
        .iter()
        .enumerate()
        .filter_map(|(i, it)| covariate.value(it).map(|v| (i, v)))
        .unzip();
    let bins = equal_count_bins(&values, n_bins)?;
    let mut item_bin = vec![None; items.len()];
    for (&i, &b) in ids.iter().zip(&bins.assignment) {
        item_bin[i] = Some(b);
    }
    Ok(CovariateBins {
        covariate,
        bins,
        item_bin,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinStat {
    pub lo: f64,
    pub hi: f64,
    pub x_mean: f64,
    /// Mean over the runs in which the bin held test items.
    pub acc_mean: Option<f64>,
    /// Population standard deviation over the same runs.
    pub acc_std: Option<f64>,
    /// Dataset items in the bin.
    pub n: usize,
    pub runs_present: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinnedAccuracy {
    pub covariate: Covariate,
    pub bins: Vec<BinStat>,
}

/// Per-bin `(correct, total)` for one run.
pub fn bin_tallies(run: &RunResult, bins: &CovariateBins) -> Vec<(usize, usize)> {
    let mut t = vec![(0, 0); bins.bins.len()];
    for r in &run.records {
        if let Some(b) = bins.item_bin[r.item] {
            t[b].1 += 1;
            if r.truth == r.pred {
                t[b].0 += 1;
            }
        }
    }
    t
}

pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

pub fn binned_accuracy(runs: &[RunResult], bins: &CovariateBins) -> BinnedAccuracy {
    let nb = bins.bins.len();
    let mut per_bin: Vec<Vec<f64>> = vec![Vec::new(); nb];
    for run in runs {
        for (b, (c, t)) in bin_tallies(run, bins).into_iter().enumerate() {
            if t > 0 {
                per_bin[b].push(c as f64 / t as f64);
            }
        }
    }
    BinnedAccuracy {
        covariate: bins.covariate,
        bins: (0..nb)
            .map(|b| {
                let ms = mean_std(&per_bin[b]);
                BinStat {
                    lo: bins.bins.ranges[b].0,
                    hi: bins.bins.ranges[b].1,
                    x_mean: bins.bins.means[b],
                    acc_mean: ms.map(|m| m.0),
                    acc_std: ms.map(|m| m.1),
                    n: bins.bins.counts[b],
                    runs_present: per_bin[b].len(),
                }
            })
            .collect(),
    }
}

/// 2×2 counts indexed `[truth][prediction]`, SINGLE = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub counts: [[u64; 2]; 2],
}

impl Confusion {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Label, Label)>) -> Self {
        let mut c = Self::default();
        for (t, p) in pairs {
            c.counts[t.index()][p.index()] += 1;
        }
        c
    }

    pub fn of_run(run: &RunResult) -> Self {
        Self::from_pairs(run.records.iter().map(|r| (r.truth, r.pred)))
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        (self.counts[0][0] + self.counts[1][1]) as f64 / self.total() as f64
    }

    /// Fraction of a true class given each predicted class; `None` for an
    /// absent class.
    pub fn rate(&self, truth: Label, pred: Label) -> Option<f64> {
        let row = self.counts[truth.index()];
        let total = row[0] + row[1];
        (total > 0).then(|| row[pred.index()] as f64 / total as f64)
    }

    /// True SINGLE called CSO.
    pub fn false_positive_rate(&self) -> Option<f64> {
        self.rate(Label::Single, Label::Cso)
    }

    /// True CSO called SINGLE.
    pub fn false_negative_rate(&self) -> Option<f64> {
        self.rate(Label::Cso, Label::Single)
    }

    pub fn true_cso_rate(&self) -> Option<f64> {
        self.rate(Label::Cso, Label::Cso)
    }
}

/// Confusion statistics averaged over runs.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanConfusion {
    pub runs: usize,
    pub mean_counts: [[f64; 2]; 2],
    /// Row-normalised rates, averaged over runs where the class appears.
    pub mean_rates: [[f64; 2]; 2],
    pub std_rates: [[f64; 2]; 2],
}

impl MeanConfusion {
    pub fn true_cso_rate(&self) -> f64 {
        self.mean_rates[1][1]
    }

    pub fn false_positive_rate(&self) -> f64 {
        self.mean_rates[0][1]
    }

    pub fn false_negative_rate(&self) -> f64 {
        self.mean_rates[1][0]
    }
}

pub fn average_confusion(runs: &[RunResult]) -> MeanConfusion {
    let mats: Vec<Confusion> = runs.iter().map(Confusion::of_run).collect();
    let mut out = MeanConfusion {
        runs: runs.len(),
        mean_counts: [[0.0; 2]; 2],
        mean_rates: [[f64::NAN; 2]; 2],
        std_rates: [[f64::NAN; 2]; 2],
    };
    for t in 0..2 {
        for p in 0..2 {
            let counts: Vec<f64> = mats.iter().map(|m| m.counts[t][p] as f64).collect();
            out.mean_counts[t][p] = mean_std(&counts).map_or(0.0, |m| m.0);
            let rates: Vec<f64> = mats
                .iter()
                .filter_map(|m| m.rate(Label::from_index(t), Label::from_index(p)))
                .collect();
            if let Some((m, s)) = mean_std(&rates) {
                out.mean_rates[t][p] = m;
                out.std_rates[t][p] = s;
            }
        }
    }
    out
}
