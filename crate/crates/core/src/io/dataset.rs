//! On-disk dataset: `manifest.json` plus a raw pixel blob.
//!
//! `pixels.f32le` holds every cutout back to back as little-endian `f32`,
//! row-major, in record order. The manifest echoes the simulation config
//! and seed, lists per-cutout metadata, and stores the SHA-256 of the blob,
//! which is checked on load.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::eval::Item;
use crate::sim::{Cutout, SceneSample, SimConfig};
use crate::{Error, Label, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PIXEL_FILE: &str = "pixels.f32le";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoutRecord {
    pub id: usize,
    pub label: Label,
    pub separation_arcsec: Option<f64>,
    pub delta_mag: Option<f64>,
    pub scene: SceneSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub seed: u64,
    pub config: SimConfig,
    pub n_single: usize,
    pub n_cso: usize,
    pub cutout_size: usize,
    pub pixel_file: String,
    pub pixel_sha256: String,
    pub records: Vec<CutoutRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub pixels: Vec<f32>,
}

impl Dataset {
    pub fn pixels_per_cutout(&self) -> usize {
        self.manifest.cutout_size * self.manifest.cutout_size
    }

    pub fn len(&self) -> usize {
        self.manifest.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.records.is_empty()
    }

    pub fn cutout_pixels(&self, i: usize) -> &[f32] {
        let p = self.pixels_per_cutout();
        &self.pixels[i * p..(i + 1) * p]
    }

    pub fn items(&self) -> Vec<Item> {
        self.manifest
            .records
            .iter()
            .enumerate()
            .map(|(i, r)| Item {
                pixels: self
                    .cutout_pixels(i)
                    .iter()
                    .map(|&v| f64::from(v))
                    .collect(),
                label: r.label,
                separation_arcsec: r.separation_arcsec,
                delta_mag: r.delta_mag,
                primary_mag: r.scene.primary_mag,
            })
            .collect()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn pixel_bytes(cutouts: &[Cutout]) -> Vec<u8> {
    cutouts
        .iter()
        .flat_map(|c| c.pixels.iter().flat_map(|&v| (v as f32).to_le_bytes()))
        .collect()
}

/// Fails with [`Error::OutputExists`] if `dir` holds anything and `force`
/// is off.
pub fn prepare_output_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let mut entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        if entries.next().is_some() && !force {
            return Err(Error::OutputExists(dir.to_path_buf()));
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `cutouts` (singles first, as produced by the simulator) to `dir`.
pub fn write_dataset(
    dir: &Path,
    cutouts: &[Cutout],
    config: &SimConfig,
    seed: u64,
    force: bool,
) -> Result<DatasetManifest> {
    prepare_output_dir(dir, force)?;
    let bytes = pixel_bytes(cutouts);
    let n_cso = cutouts.iter().filter(|c| c.label == Label::Cso).count();
    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        seed,
        config: config.clone(),
        n_single: cutouts.len() - n_cso,
        n_cso,
        cutout_size: config.cutout_size,
        pixel_file: PIXEL_FILE.into(),
        pixel_sha256: sha256_hex(&bytes),
        records: cutouts
            .iter()
            .enumerate()
            .map(|(id, c)| CutoutRecord {
                id,
                label: c.label,
                separation_arcsec: c.separation_arcsec,
                delta_mag: c.delta_mag,
                scene: c.scene.clone(),
            })
            .collect(),
    };
    let pix = dir.join(PIXEL_FILE);
    fs::write(&pix, &bytes).map_err(|e| Error::io(&pix, e))?;
    let man = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&man, text).map_err(|e| Error::io(&man, e))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let p = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Loads and verifies a dataset directory.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest = read_manifest(dir)?;
    let corrupt = |path: PathBuf, reason: String| Error::CorruptDataset { path, reason };
    if manifest.format_version != FORMAT_VERSION {
        return Err(corrupt(
            dir.join(MANIFEST_FILE),
            format!(
                "format version {} (expected {FORMAT_VERSION})",
                manifest.format_version
            ),
        ));
    }
    let pix = dir.join(&manifest.pixel_file);
    let bytes = fs::read(&pix).map_err(|e| Error::io(&pix, e))?;
    let per = manifest.cutout_size * manifest.cutout_size * 4;
    if per == 0 || bytes.len() % per != 0 || bytes.len() / per != manifest.records.len() {
        return Err(corrupt(
            pix,
            format!(
                "{} bytes do not hold {} cutouts of {per} bytes",
                bytes.len(),
                manifest.records.len()
            ),
        ));
    }
    let hash = sha256_hex(&bytes);
    if hash != manifest.pixel_sha256 {
        return Err(corrupt(
            pix,
            format!(
                "content hash {hash} does not match manifest {}",
                manifest.pixel_sha256
            ),
        ));
    }
    let counted = manifest
        .records
        .iter()
        .filter(|r| r.label == Label::Cso)
        .count();
    if counted != manifest.n_cso || manifest.records.len() - counted != manifest.n_single {
        return Err(corrupt(
            dir.join(MANIFEST_FILE),
            "class counts disagree with records".into(),
        ));
    }
    let pixels = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
        .collect();
    Ok(Dataset { manifest, pixels })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovariateSummary {
    pub name: &'static str,
    pub count: usize,
    pub min: f64,
    pub mean: f64,
    pub std: f64,
    pub max: f64,
}

/// Count, range, mean and population std of the main covariates.
pub fn covariate_summary(records: &[CutoutRecord]) -> Vec<CovariateSummary> {
    let columns: [(&'static str, Vec<f64>); 5] = [
        (
            "separation_arcsec",
            records.iter().filter_map(|r| r.separation_arcsec).collect(),
        ),
        (
            "delta_mag",
            records.iter().filter_map(|r| r.delta_mag).collect(),
        ),
        (
            "primary_mag",
            records.iter().map(|r| r.scene.primary_mag).collect(),
        ),
        ("fwhm", records.iter().map(|r| r.scene.fwhm).collect()),
        ("sky_mag", records.iter().map(|r| r.scene.sky_mag).collect()),
    ];
    columns
        .into_iter()
        .map(|(name, v)| {
            let n = v.len();
            let mean = v.iter().sum::<f64>() / n as f64;
            let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
            CovariateSummary {
                name,
                count: n,
                min: v.iter().copied().fold(f64::INFINITY, f64::min),
                mean,
                std: var.sqrt(),
                max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect()
}
