//! Seeding, configuration text and on-disk formats.

pub mod config;
pub mod dataset;
pub mod model_file;
pub mod seed;

pub use config::{CnnNetwork, Config, HarnessSettings};
pub use dataset::{load_dataset, write_dataset, Dataset, DatasetManifest};
pub use seed::{derive_seed, stream};
