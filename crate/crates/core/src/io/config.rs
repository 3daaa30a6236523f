//! Plain-text `section.key = value` configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key is
//! optional and falls back to its default; unknown or repeated keys are
//! rejected. [`Config::to_text`] writes every key in a fixed order, so
//! parsing and re-serialising is a fixed point.

use std::fmt::Display;
use std::str::FromStr;

use crate::cnn::{CnnConfig, TrainSettings};
use crate::eval::{ExperimentPlan, ModelKind, DEFAULT_BINS};
use crate::gp::GpSettings;
use crate::logreg::CvPlan;
use crate::preprocess::DEFAULT_COMPONENTS;
use crate::sim::SimConfig;
use crate::{Error, Result};

/// Which CNN width to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CnnNetwork {
    Full,
    Desk,
    Tiny,
}

impl CnnNetwork {
    pub fn config(self) -> CnnConfig {
        match self {
            CnnNetwork::Full => CnnConfig::full(),
            CnnNetwork::Desk => CnnConfig::desk(),
            CnnNetwork::Tiny => CnnConfig::tiny(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            CnnNetwork::Full => "full",
            CnnNetwork::Desk => "desk",
            CnnNetwork::Tiny => "tiny",
        }
    }
}

impl FromStr for CnnNetwork {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(CnnNetwork::Full),
            "desk" => Ok(CnnNetwork::Desk),
            "tiny" => Ok(CnnNetwork::Tiny),
            _ => Err(Error::Config(format!(
                "unknown network '{s}' (full, desk, tiny)"
            ))),
        }
    }
}

/// Dataset size and experiment protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct HarnessSettings {
    pub n_single: usize,
    pub n_cso: usize,
    pub runs: usize,
    /// 0 means the same as `runs`.
    pub cnn_runs: usize,
    pub train_fraction: f64,
    pub pca_components: usize,
    pub bins: usize,
}

impl Default for HarnessSettings {
    fn default() -> Self {
        Self {
            n_single: 2000,
            n_cso: 2000,
            runs: 100,
            cnn_runs: 0,
            train_fraction: 0.8,
            pca_components: DEFAULT_COMPONENTS,
            bins: DEFAULT_BINS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub sim: SimConfig,
    pub gp: GpSettings,
    pub logreg: CvPlan,
    pub cnn_network: CnnNetwork,
    pub cnn_train: TrainSettings,
    pub harness: HarnessSettings,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            gp: GpSettings::default(),
            logreg: CvPlan::default(),
            cnn_network: CnnNetwork::Full,
            cnn_train: TrainSettings::default(),
            harness: HarnessSettings::default(),
        }
    }
}

fn list<T: Display>(v: &[T]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| parse(key, s.trim())).collect()
}

impl Config {
    /// Every key and its current value, in canonical order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let s = &self.sim;
        let g = &self.gp;
        let l = &self.logreg;
        let c = &self.cnn_train;
        let h = &self.harness;
        vec![
            ("sim.primary_mag_min", s.primary_mag_range[0].to_string()),
            ("sim.primary_mag_max", s.primary_mag_range[1].to_string()),
            ("sim.delta_mag_min", s.delta_mag_range[0].to_string()),
            ("sim.delta_mag_max", s.delta_mag_range[1].to_string()),
            ("sim.fwhm_min", s.fwhm_range[0].to_string()),
            ("sim.fwhm_max", s.fwhm_range[1].to_string()),
            (
                "sim.offset_factor_min",
                s.offset_factor_range[0].to_string(),
            ),
            (
                "sim.offset_factor_max",
                s.offset_factor_range[1].to_string(),
            ),
            ("sim.exposure_choices", list(&s.exposure_choices)),
            ("sim.sky_mag_min", s.sky_mag_range[0].to_string()),
            ("sim.sky_mag_max", s.sky_mag_range[1].to_string()),
            ("sim.zp_unif_min", s.zp_unif_range[0].to_string()),
            ("sim.zp_unif_max", s.zp_unif_range[1].to_string()),
            ("sim.size_min", s.size_range[0].to_string()),
            ("sim.size_max", s.size_range[1].to_string()),
            ("sim.albedo_min", s.albedo_range[0].to_string()),
            ("sim.albedo_max", s.albedo_range[1].to_string()),
            ("sim.cutout_size", s.cutout_size.to_string()),
            ("sim.plate_scale", s.plate_scale.to_string()),
            ("sim.gain", s.gain.to_string()),
            ("sim.read_noise", s.read_noise.to_string()),
            (
                "sim.centering_error_sigma",
                s.centering_error_sigma.to_string(),
            ),
            ("sim.jitter_deg", s.jitter_deg.to_string()),
            ("gp.nu", g.nu.to_string()),
            ("gp.length_scale", g.length_scale.to_string()),
            ("gp.variance", g.variance.to_string()),
            ("gp.k", g.k_neighbors.to_string()),
            ("gp.nugget", g.nugget.to_string()),
            ("gp.ambiguity_threshold", g.ambiguity_threshold.to_string()),
            ("logreg.folds", l.folds.to_string()),
            ("logreg.lambda_grid", list(&l.lambda_grid)),
            ("logreg.max_iter", l.max_iter.to_string()),
            ("logreg.tolerance", l.tolerance.to_string()),
            ("cnn.network", self.cnn_network.name().to_string()),
            ("cnn.epochs", c.epochs.to_string()),
            ("cnn.batch_size", c.batch_size.to_string()),
            ("cnn.learning_rate", c.adam.learning_rate.to_string()),
            ("cnn.beta1", c.adam.beta1.to_string()),
            ("cnn.beta2", c.adam.beta2.to_string()),
            ("cnn.epsilon", c.adam.epsilon.to_string()),
            ("harness.n_single", h.n_single.to_string()),
            ("harness.n_cso", h.n_cso.to_string()),
            ("harness.runs", h.runs.to_string()),
            ("harness.cnn_runs", h.cnn_runs.to_string()),
            ("harness.train_fraction", h.train_fraction.to_string()),
            ("harness.pca_components", h.pca_components.to_string()),
            ("harness.bins", h.bins.to_string()),
        ]
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let s = &mut self.sim;
        let g = &mut self.gp;
        let l = &mut self.logreg;
        let c = &mut self.cnn_train;
        let h = &mut self.harness;
        match key {
            "sim.primary_mag_min" => s.primary_mag_range[0] = parse(key, v)?,
            "sim.primary_mag_max" => s.primary_mag_range[1] = parse(key, v)?,
            "sim.delta_mag_min" => s.delta_mag_range[0] = parse(key, v)?,
            "sim.delta_mag_max" => s.delta_mag_range[1] = parse(key, v)?,
            "sim.fwhm_min" => s.fwhm_range[0] = parse(key, v)?,
            "sim.fwhm_max" => s.fwhm_range[1] = parse(key, v)?,
            "sim.offset_factor_min" => s.offset_factor_range[0] = parse(key, v)?,
            "sim.offset_factor_max" => s.offset_factor_range[1] = parse(key, v)?,
            "sim.exposure_choices" => s.exposure_choices = parse_list(key, v)?,
            "sim.sky_mag_min" => s.sky_mag_range[0] = parse(key, v)?,
            "sim.sky_mag_max" => s.sky_mag_range[1] = parse(key, v)?,
            "sim.zp_unif_min" => s.zp_unif_range[0] = parse(key, v)?,
            "sim.zp_unif_max" => s.zp_unif_range[1] = parse(key, v)?,
            "sim.size_min" => s.size_range[0] = parse(key, v)?,
            "sim.size_max" => s.size_range[1] = parse(key, v)?,
            "sim.albedo_min" => s.albedo_range[0] = parse(key, v)?,
            "sim.albedo_max" => s.albedo_range[1] = parse(key, v)?,
            "sim.cutout_size" => s.cutout_size = parse(key, v)?,
            "sim.plate_scale" => s.plate_scale = parse(key, v)?,
            "sim.gain" => s.gain = parse(key, v)?,
            "sim.read_noise" => s.read_noise = parse(key, v)?,
            "sim.centering_error_sigma" => s.centering_error_sigma = parse(key, v)?,
            "sim.jitter_deg" => s.jitter_deg = parse(key, v)?,
            "gp.nu" => g.nu = parse(key, v)?,
            "gp.length_scale" => g.length_scale = parse(key, v)?,
            "gp.variance" => g.variance = parse(key, v)?,
            "gp.k" => g.k_neighbors = parse(key, v)?,
            "gp.nugget" => g.nugget = parse(key, v)?,
            "gp.ambiguity_threshold" => g.ambiguity_threshold = parse(key, v)?,
            "logreg.folds" => l.folds = parse(key, v)?,
            "logreg.lambda_grid" => l.lambda_grid = parse_list(key, v)?,
            "logreg.max_iter" => l.max_iter = parse(key, v)?,
            "logreg.tolerance" => l.tolerance = parse(key, v)?,
            "cnn.network" => self.cnn_network = v.parse()?,
            "cnn.epochs" => c.epochs = parse(key, v)?,
            "cnn.batch_size" => c.batch_size = parse(key, v)?,
            "cnn.learning_rate" => c.adam.learning_rate = parse(key, v)?,
            "cnn.beta1" => c.adam.beta1 = parse(key, v)?,
            "cnn.beta2" => c.adam.beta2 = parse(key, v)?,
            "cnn.epsilon" => c.adam.epsilon = parse(key, v)?,
            "harness.n_single" => h.n_single = parse(key, v)?,
            "harness.n_cso" => h.n_cso = parse(key, v)?,
            "harness.runs" => h.runs = parse(key, v)?,
            "harness.cnn_runs" => h.cnn_runs = parse(key, v)?,
            "harness.train_fraction" => h.train_fraction = parse(key, v)?,
            "harness.pca_components" => h.pca_components = parse(key, v)?,
            "harness.bins" => h.bins = parse(key, v)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        let mut seen = std::collections::HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !seen.insert(k.to_string()) {
                return Err(Error::Config(format!("line {}: repeated key '{k}'", n + 1)));
            }
            cfg.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        cfg.sim.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Experiment plan for `models` under `seed`.
    pub fn plan(&self, models: Vec<ModelKind>, seed: u64) -> ExperimentPlan {
        ExperimentPlan {
            models,
            runs: self.harness.runs,
            cnn_runs: (self.harness.cnn_runs > 0).then_some(self.harness.cnn_runs),
            seed,
            train_fraction: self.harness.train_fraction,
            pca_components: self.harness.pca_components,
            gp: self.gp,
            logreg: self.logreg.clone(),
            cnn: self.cnn_network.config(),
            cnn_train: self.cnn_train,
            checkpoint_dir: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_round_trip() {
        let text = Config::default().to_text();
        let back = Config::parse(&text).unwrap();
        assert_eq!(back, Config::default());
        assert_eq!(back.to_text(), text);
        assert!(text.contains("gp.k = 28\n"));
        assert!(text.contains("sim.exposure_choices = 0.1,0.2,0.5\n"));
    }

    #[test]
    fn partial_file_and_comments() {
        let c =
            Config::parse("# desk run\n\ngp.nu = inf\ncnn.network = desk\n  harness.runs=20 \n")
                .unwrap();
        assert_eq!(c.gp.nu, f64::INFINITY);
        assert_eq!(c.cnn_network, CnnNetwork::Desk);
        assert_eq!(c.harness.runs, 20);
        assert_eq!(c.gp.k_neighbors, 28);
        assert_eq!(Config::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Config::parse("gp.depth = 3").is_err());
        assert!(Config::parse("gp.k = 3\ngp.k = 4").is_err());
        assert!(Config::parse("gp.k").is_err());
        assert!(Config::parse("gp.k = three").is_err());
        assert!(Config::parse("sim.fwhm_min = 9").is_err());
    }

    #[test]
    fn plan_mirrors_settings() {
        let mut c = Config::default();
        c.harness.cnn_runs = 5;
        let p = c.plan(vec![ModelKind::Gp], 9);
        assert_eq!(p.cnn_runs, Some(5));
        assert_eq!(p.seed, 9);
        assert_eq!(p.cnn, CnnConfig::full());
    }

    proptest! {
        #[test]
        fn random_values_round_trip(
            nu in prop::sample::select(vec![0.5, 1.0, 2.5, 10.0, f64::INFINITY]),
            ls in 1e-3f64..1e3,
            k in 1usize..200,
            grid in prop::collection::vec(1e-6f64..1e6, 1..6),
            rate in 1e-6f64..1.0,
        ) {
            let mut c = Config::default();
            c.gp.nu = nu;
            c.gp.length_scale = ls;
            c.gp.k_neighbors = k;
            c.logreg.lambda_grid = grid;
            c.cnn_train.adam.learning_rate = rate;
            let text = c.to_text();
            let back = Config::parse(&text).unwrap();
            prop_assert_eq!(&back, &c);
            prop_assert_eq!(back.to_text(), text);
        }
    }
}
