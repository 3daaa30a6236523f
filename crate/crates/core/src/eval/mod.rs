//! Repeated train/test experiments and their summaries.
//!
//! One run draws a fresh 80/20 split from `derive_seed(root, "split/{run}")`;
//! every model in the plan sees that same split, and the PCA basis used by
//! the GP and the logistic model is refitted on the run's training images.

mod artifacts;
mod bins;
mod metrics;

pub use artifacts::{read_results_csv, write_artifacts, write_results_csv, ArtifactSet};
pub use bins::{equal_count_bins, Bins};
pub use metrics::{
    average_confusion, bin_tallies, binned_accuracy, covariate_bins, mean_std, BinStat,
    BinnedAccuracy, Confusion, Covariate, CovariateBins, MeanConfusion,
};

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::cnn::{self, CnnConfig, CnnModel, TrainSettings};
use crate::gp::{GpModel, GpSettings};
use crate::io::seed::stream;
use crate::logreg::{self, CvPlan};
use crate::preprocess::{fit_pca, minmax_normalize, split, DEFAULT_COMPONENTS};
use crate::sim::Cutout;
use crate::{Error, Label, Result};

pub const DEFAULT_BINS: usize = 12;

/// A labelled cutout with its covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub pixels: Vec<f64>,
    pub label: Label,
    pub separation_arcsec: Option<f64>,
    pub delta_mag: Option<f64>,
    pub primary_mag: f64,
}

impl From<&Cutout> for Item {
    fn from(c: &Cutout) -> Self {
        Self {
            pixels: c.pixels.clone(),
            label: c.label,
            separation_arcsec: c.separation_arcsec,
            delta_mag: c.delta_mag,
            primary_mag: c.scene.primary_mag,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Gp,
    LogReg,
    Cnn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Gp, ModelKind::LogReg, ModelKind::Cnn];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Gp => "gp",
            ModelKind::LogReg => "logreg",
            ModelKind::Cnn => "cnn",
        }
    }

    /// Parameters accepted by [`ExperimentPlan::set_param`].
    pub fn params(self) -> &'static [&'static str] {
        match self {
            ModelKind::Gp => &[
                "nu",
                "length_scale",
                "variance",
                "k",
                "nugget",
                "pca_components",
            ],
            ModelKind::LogReg => &["lambda", "max_iter", "pca_components"],
            ModelKind::Cnn => &["epochs", "batch_size", "learning_rate"],
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gp" => Ok(ModelKind::Gp),
            "logreg" => Ok(ModelKind::LogReg),
            "cnn" => Ok(ModelKind::Cnn),
            _ => Err(Error::Config(format!(
                "unknown model '{s}' (gp, logreg, cnn)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Record {
    /// Index of the item in the dataset.
    pub item: usize,
    pub truth: Label,
    pub pred: Label,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub run: usize,
    /// One record per test item, in split order.
    pub records: Vec<Record>,
}

impl RunResult {
    pub fn accuracy(&self) -> f64 {
        Confusion::of_run(self).accuracy()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub models: Vec<ModelKind>,
    pub runs: usize,
    /// Run count for the CNN when lower than `runs`.
    pub cnn_runs: Option<usize>,
    pub seed: u64,
    pub train_fraction: f64,
    pub pca_components: usize,
    pub gp: GpSettings,
    pub logreg: CvPlan,
    pub cnn: CnnConfig,
    pub cnn_train: TrainSettings,
    /// When set, each trained CNN is saved here as `cnn_run{run}.ckpt`.
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            models: ModelKind::ALL.to_vec(),
            runs: 100,
            cnn_runs: None,
            seed: 0,
            train_fraction: 0.8,
            pca_components: DEFAULT_COMPONENTS,
            gp: GpSettings::default(),
            logreg: CvPlan::default(),
            cnn: CnnConfig::full(),
            cnn_train: TrainSettings::default(),
            checkpoint_dir: None,
        }
    }
}

impl ExperimentPlan {
    pub fn runs_for(&self, kind: ModelKind) -> usize {
        match (kind, self.cnn_runs) {
            (ModelKind::Cnn, Some(c)) => c.min(self.runs),
            _ => self.runs,
        }
    }

    /// Overrides one hyperparameter of `model` by name.
    pub fn set_param(&mut self, model: ModelKind, name: &str, value: f64) -> Result<()> {
        let count = |v: f64| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::Config(format!(
                    "{name} must be a positive integer, got {value}"
                )))
            }
        };
        match (model, name) {
            (ModelKind::Gp, "nu") => self.gp.nu = value,
            (ModelKind::Gp, "length_scale") => self.gp.length_scale = value,
            (ModelKind::Gp, "variance") => self.gp.variance = value,
            (ModelKind::Gp, "k") => self.gp.k_neighbors = count(value)?,
            (ModelKind::Gp, "nugget") => self.gp.nugget = value,
            (ModelKind::LogReg, "lambda") => self.logreg.lambda_grid = vec![value],
            (ModelKind::LogReg, "max_iter") => self.logreg.max_iter = count(value)?,
            (ModelKind::Gp | ModelKind::LogReg, "pca_components") => {
                self.pca_components = count(value)?
            }
            (ModelKind::Cnn, "epochs") => self.cnn_train.epochs = count(value)?,
            (ModelKind::Cnn, "batch_size") => self.cnn_train.batch_size = count(value)?,
            (ModelKind::Cnn, "learning_rate") => self.cnn_train.adam.learning_rate = value,
            _ => {
                return Err(Error::UnknownParameter {
                    model: model.name().into(),
                    name: name.into(),
                    valid: model.params().join(", "),
                })
            }
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be >= 1".into()));
        }
        if self.models.is_empty() {
            return Err(Error::Config("no models selected".into()));
        }
        let mut seen = self.models.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.models.len() {
            return Err(Error::Config("model listed twice".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config("train_fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelRuns {
    pub kind: ModelKind,
    pub runs: Vec<RunResult>,
}

impl ModelRuns {
    pub fn accuracies(&self) -> Vec<f64> {
        self.runs.iter().map(RunResult::accuracy).collect()
    }

    /// Mean and population standard deviation of per-run accuracy.
    pub fn accuracy(&self) -> (f64, f64) {
        mean_std(&self.accuracies()).unwrap_or((f64::NAN, f64::NAN))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub models: Vec<ModelRuns>,
}

impl Experiment {
    pub fn model(&self, kind: ModelKind) -> Option<&ModelRuns> {
        self.models.iter().find(|m| m.kind == kind)
    }
}

/// Min/max-normalises every cutout.
pub fn normalize_items(items: &[Item]) -> Result<Vec<Vec<f64>>> {
    items
        .iter()
        .map(|it| Ok(minmax_normalize(&it.pixels)?.values))
        .collect()
}

/// The split for `run` under `seed`.
pub fn run_split(n: usize, train_fraction: f64, seed: u64, run: usize) -> (Vec<usize>, Vec<usize>) {
    split(
        n,
        train_fraction,
        &mut stream(seed, &format!("split/{run}")),
    )
}

/// Trains one model on `train` and predicts `test`, both given as indices
/// into `images` (already normalised) and `labels`.
pub fn fit_predict(
    kind: ModelKind,
    images: &[Vec<f64>],
    labels: &[Label],
    train: &[usize],
    test: &[usize],
    plan: &ExperimentPlan,
    run: usize,
) -> Result<Vec<Label>> {
    let train_labels: Vec<Label> = train.iter().map(|&i| labels[i]).collect();
    match kind {
        ModelKind::Gp | ModelKind::LogReg => {
            let train_rows: Vec<&[f64]> = train.iter().map(|&i| images[i].as_slice()).collect();
            let pca = fit_pca(&train_rows, plan.pca_components)?;
            let project = |idx: &[usize]| -> Result<Vec<Vec<f64>>> {
                idx.iter().map(|&i| pca.project_slice(&images[i])).collect()
            };
            let (xtr, xte) = (project(train)?, project(test)?);
            if kind == ModelKind::Gp {
                let model = GpModel::fit(&xtr, &train_labels, &plan.gp)?;
                Ok(model
                    .classify_batch(&xte)?
                    .into_iter()
                    .map(|p| p.label)
                    .collect())
            } else {
                let mut rng = stream(plan.seed, &format!("logreg-cv/{run}"));
                let out = logreg::cross_validate(&xtr, &train_labels, &plan.logreg, &mut rng)?;
                Ok(xte.iter().map(|x| out.model.predict(x)).collect())
            }
        }
        ModelKind::Cnn => {
            let xtr: Vec<&[f64]> = train.iter().map(|&i| images[i].as_slice()).collect();
            let xte: Vec<&[f64]> = test.iter().map(|&i| images[i].as_slice()).collect();
            let mut model = CnnModel::new(
                plan.cnn.clone(),
                &mut stream(plan.seed, &format!("cnn-init/{run}")),
            )?;
            let mut rng = stream(plan.seed, &format!("cnn-train/{run}"));
            cnn::train(&mut model, &xtr, &train_labels, &plan.cnn_train, &mut rng)?;
            if let Some(dir) = &plan.checkpoint_dir {
                crate::io::model_file::save_cnn(&dir.join(format!("cnn_run{run}.ckpt")), &model)?;
            }
            model.predict(&xte)
        }
    }
}

/// Runs every model in `plan` for its run count. `sink` sees each finished
/// run as it completes (model order within a run follows `plan.models`).
pub fn run_experiment(
    items: &[Item],
    plan: &ExperimentPlan,
    sink: &mut dyn FnMut(ModelKind, &RunResult) -> Result<()>,
) -> Result<Experiment> {
    plan.validate()?;
    let images = normalize_items(items)?;
    let labels: Vec<Label> = items.iter().map(|it| it.label).collect();
    let mut out = Experiment {
        models: plan
            .models
            .iter()
            .map(|&kind| ModelRuns {
                kind,
                runs: Vec::new(),
            })
            .collect(),
    };
    for run in 0..plan.runs {
        let (train, test) = run_split(items.len(), plan.train_fraction, plan.seed, run);
        for slot in &mut out.models {
            if run >= plan.runs_for(slot.kind) {
                continue;
            }
            let preds = fit_predict(slot.kind, &images, &labels, &train, &test, plan, run)?;
            let result = RunResult {
                run,
                records: test
                    .iter()
                    .zip(preds)
                    .map(|(&item, pred)| Record {
                        item,
                        truth: labels[item],
                        pred,
                    })
                    .collect(),
            };
            sink(slot.kind, &result)?;
            slot.runs.push(result);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub acc_mean: f64,
    pub acc_std: f64,
    pub best: bool,
}

/// Overall accuracy at each grid value of `param`. The best point has the
/// highest mean; ties go to the smaller value.
pub fn sweep(
    items: &[Item],
    plan: &ExperimentPlan,
    model: ModelKind,
    param: &str,
    grid: &[f64],
    progress: &mut dyn FnMut(f64, f64, f64),
) -> Result<Vec<SweepPoint>> {
    if grid.is_empty() {
        return Err(Error::Config("empty sweep grid".into()));
    }
    // reject a bad name before any work
    plan.clone().set_param(model, param, grid[0])?;
    let mut points = Vec::with_capacity(grid.len());
    for &value in grid {
        let mut p = plan.clone();
        p.models = vec![model];
        p.set_param(model, param, value)?;
        let exp = run_experiment(items, &p, &mut |_, _| Ok(()))?;
        let (m, s) = exp.models[0].accuracy();
        progress(value, m, s);
        points.push(SweepPoint {
            value,
            acc_mean: m,
            acc_std: s,
            best: false,
        });
    }
    let best = (0..points.len())
        .max_by(|&a, &b| {
            points[a]
                .acc_mean
                .total_cmp(&points[b].acc_mean)
                .then(points[b].value.total_cmp(&points[a].value))
        })
        .expect("non-empty grid");
    points[best].best = true;
    Ok(points)
}
