//! Per-image scaling, PCA reduction and train/test splitting.

mod normalize;
mod pca;
mod split;

use serde::{Deserialize, Serialize};

pub use normalize::minmax_normalize;
pub use pca::{fit_pca, PcaModel, DEFAULT_COMPONENTS};
pub use split::{split, SplitSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    /// Flattened min/max-scaled pixels.
    RawNormalized,
    /// PCA scores.
    Pca,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub stage: Stage,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
