use rand::seq::SliceRandom;
use rand::RngCore;

use super::{loss, stack_images, CnnModel, Masks};
use crate::{Error, Label, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

/// First and second moment estimates, shaped like the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(model: &CnnModel, config: AdamConfig) -> Self {
        let zeros: Vec<Vec<f64>> = model.params().iter().map(|p| vec![0.0; p.len()]).collect();
        Self {
            step: 0,
            m: zeros.clone(),
            v: zeros,
            config,
        }
    }

    /// One bias-corrected Adam update.
    pub fn apply(&mut self, params: &mut [Vec<f64>], grads: &[Vec<f64>]) {
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        self.step += 1;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for j in 0..p.len() {
                m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
                v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
                p[j] -= learning_rate * (m[j] / c1) / ((v[j] / c2).sqrt() + epsilon);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            epochs: 15,
            batch_size: 200,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    /// Sample-weighted mean training loss of each epoch.
    pub epoch_loss: Vec<f64>,
    pub steps: u64,
}

/// Mini-batch Adam on shuffled data. The shuffle and the dropout masks both
/// draw from `rng`.
pub fn train<V: AsRef<[f64]>>(
    model: &mut CnnModel,
    images: &[V],
    labels: &[Label],
    settings: &TrainSettings,
    rng: &mut dyn RngCore,
) -> Result<TrainLog> {
    if images.len() != labels.len() {
        return Err(Error::Dimension {
            expected: images.len(),
            got: labels.len(),
        });
    }
    if settings.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    let mut adam = AdamState::new(model, settings.adam);
    let mut order: Vec<usize> = (0..images.len()).collect();
    let mut epoch_loss = Vec::with_capacity(settings.epochs);

    for epoch in 0..settings.epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for (b, idx) in order.chunks(settings.batch_size).enumerate() {
            let chunk: Vec<&[f64]> = idx.iter().map(|&i| images[i].as_ref()).collect();
            let y: Vec<usize> = idx.iter().map(|&i| labels[i].index()).collect();
            let batch = stack_images(&chunk, model.input_len())?;
            let fwd = model.forward(&batch, idx.len(), Masks::Sample(rng))?;
            let l = loss(fwd.output(), &y, model.output_width());
            if !l.is_finite() {
                return Err(Error::NonFiniteLoss {
                    loss: l,
                    iteration: adam.step as usize,
                    context: format!("epoch {epoch}, batch {b}"),
                });
            }
            total += l * idx.len() as f64;
            let grads = model.backward(&fwd, &y)?;
            adam.apply(model.params_mut(), &grads);
        }
        epoch_loss.push(total / images.len().max(1) as f64);
    }
    Ok(TrainLog {
        epoch_loss,
        steps: adam.step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnn::CnnConfig;
    use crate::io::seed::stream;
    use crate::preprocess::minmax_normalize;
    use crate::sim::{simulate_dataset, SimConfig};

    fn small_set(n_each: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Label>) {
        let data = simulate_dataset(&SimConfig::default(), n_each, n_each, seed).unwrap();
        let x = data
            .iter()
            .map(|c| minmax_normalize(&c.pixels).unwrap().values)
            .collect();
        let y = data.iter().map(|c| c.label).collect();
        (x, y)
    }

    #[test]
    fn adam_first_step_is_signed_learning_rate() {
        let m = CnnModel::zeros(CnnConfig::tiny()).unwrap();
        let mut adam = AdamState::new(&m, AdamConfig::default());
        let mut p = vec![vec![1.0, 1.0, 1.0]];
        adam.m = vec![vec![0.0; 3]];
        adam.v = vec![vec![0.0; 3]];
        adam.apply(&mut p, &[vec![0.5, -2.0, 0.0]]);
        // m̂ = g, v̂ = g², so the step is lr · g / (|g| + ε)
        assert!((p[0][0] - (1.0 - 1e-3 * 0.5 / (0.5 + 1e-7))).abs() < 1e-15);
        assert!((p[0][1] - (1.0 + 1e-3 * 2.0 / (2.0 + 1e-7))).abs() < 1e-15);
        assert_eq!(p[0][2], 1.0);
        assert_eq!(adam.step, 1);
    }

    #[test]
    fn zero_epochs_leave_model_unchanged() {
        let (x, y) = small_set(5, 1);
        let mut m = CnnModel::new(CnnConfig::tiny(), &mut stream(1, "init")).unwrap();
        let before = m.clone();
        let settings = TrainSettings {
            epochs: 0,
            ..TrainSettings::default()
        };
        let log = train(&mut m, &x, &y, &settings, &mut stream(1, "train")).unwrap();
        assert_eq!(m, before);
        assert_eq!(log.steps, 0);
    }

    #[test]
    fn fixed_seed_reproduces_loss() {
        let (x, y) = small_set(10, 2);
        let settings = TrainSettings {
            epochs: 3,
            batch_size: 8,
            ..TrainSettings::default()
        };
        let run = || {
            let mut m = CnnModel::new(CnnConfig::tiny(), &mut stream(2, "init")).unwrap();
            train(&mut m, &x, &y, &settings, &mut stream(2, "train")).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn overfits_fifty_samples() {
        let (x, y) = small_set(25, 3);
        let mut m = CnnModel::new(CnnConfig::desk(), &mut stream(3, "init")).unwrap();
        let settings = TrainSettings {
            epochs: 200,
            ..TrainSettings::default()
        };
        let log = train(&mut m, &x, &y, &settings, &mut stream(3, "train")).unwrap();
        let pred = m.predict(&x).unwrap();
        let acc = pred.iter().zip(&y).filter(|(a, b)| a == b).count() as f64 / 50.0;
        assert!(
            acc >= 0.98,
            "train accuracy {acc}, final loss {:?}",
            log.epoch_loss.last()
        );
    }

    #[test]
    fn non_finite_input_aborts() {
        let (mut x, y) = small_set(3, 4);
        x[0][10] = f64::NAN;
        let mut m = CnnModel::new(CnnConfig::tiny(), &mut stream(4, "init")).unwrap();
        let r = train(
            &mut m,
            &x,
            &y,
            &TrainSettings::default(),
            &mut stream(4, "train"),
        );
        assert!(matches!(r, Err(Error::NonFiniteLoss { .. })));
    }
}
