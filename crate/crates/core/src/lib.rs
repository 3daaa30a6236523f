//! Benchtop for single-satellite versus closely-spaced-object (CSO)
//! classification on simulated 24×24 optical cutouts.
//!
//! The crate is organised the way the data flows:
//!
//! * [`sim`] samples scene parameters and renders noisy cutouts,
//! * [`geometry`] holds the sky-coordinate helpers used for CSO covariates,
//! * [`preprocess`] does per-image min/max scaling, PCA and train/test splits,
//! * [`gp`], [`logreg`] and [`cnn`] are the three classifiers,
//! * [`eval`] runs repeated experiments and builds binned accuracy curves
//!   and confusion matrices,
//! * [`io`] covers configuration, seeding and on-disk formats.

pub mod cnn;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod gp;
pub mod io;
pub mod logreg;
pub mod preprocess;
pub mod sim;

pub use error::{Error, Result};

/// Ground-truth or predicted class of a cutout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Label {
    Single,
    Cso,
}

impl Label {
    /// Class index used by every classifier: SINGLE = 0, CSO = 1.
    pub fn index(self) -> usize {
        match self {
            Label::Single => 0,
            Label::Cso => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Label::Single
        } else {
            Label::Cso
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Single => "SINGLE",
            Label::Cso => "CSO",
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
