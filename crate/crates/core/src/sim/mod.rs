//! Scene sampling and cutout rendering.
//!
//! A cutout is rendered directly at 24×24 around the tracked (primary)
//! satellite: sky background, the primary at its exposure midpoint offset by
//! a centring error, and for CSO scenes a second point source offset by a
//! FWHM-scaled amount on each axis. Both sources share a Gaussian PSF.

pub mod photometry;
pub mod render;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{
    angular_separation, from_tangent_plane, magnitude_difference, midpoint, tangent_plane,
    Endpoints, SkyCoord,
};
use crate::{Error, Label, Result};

pub use photometry::{mag_to_counts, sky_counts_per_pixel};
pub use render::{add_noise, render_point_source, Grid};

/// Zero point is `ZERO_POINT_BASE + u / ZERO_POINT_SCALE`, `u` drawn from
/// [`SimConfig::zp_unif_range`].
pub const ZERO_POINT_BASE: f64 = 24.0;
pub const ZERO_POINT_SCALE: f64 = 0.4;

/// Pointings are drawn away from the RA wrap, where the coordinate-wise
/// endpoint mean breaks down.
const POINTING_RA: (f64, f64) = (30.0, 330.0);
const POINTING_DEC: (f64, f64) = (-60.0, 60.0);
/// Apparent angular rate of the satellites, degrees per second. Only the
/// endpoint metadata depends on it.
const APPARENT_RATE: (f64, f64) = (0.05, 0.5);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub primary_mag_range: [f64; 2],
    /// Additive secondary-minus-primary offset before clamping.
    pub delta_mag_range: [f64; 2],
    pub fwhm_range: [f64; 2],
    pub offset_factor_range: [f64; 2],
    pub exposure_choices: Vec<f64>,
    pub sky_mag_range: [f64; 2],
    pub zp_unif_range: [f64; 2],
    pub size_range: [f64; 2],
    pub albedo_range: [f64; 2],
    pub cutout_size: usize,
    pub plate_scale: f64,
    pub gain: f64,
    pub read_noise: f64,
    pub centering_error_sigma: f64,
    /// Pointing jitter, degrees. Recorded only; the sampled FWHM is taken as
    /// the delivered PSF.
    pub jitter_deg: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            primary_mag_range: [12.0, 15.0],
            delta_mag_range: [-1.5, 1.5],
            fwhm_range: [2.0, 6.0],
            offset_factor_range: [0.2, 1.5],
            exposure_choices: vec![0.1, 0.2, 0.5],
            sky_mag_range: [18.3, 20.3],
            zp_unif_range: [0.0, 0.3],
            size_range: [0.1, 10.0],
            albedo_range: [0.05, 0.2],
            cutout_size: 24,
            plate_scale: 1.0,
            gain: 1.0,
            read_noise: 5.0,
            centering_error_sigma: 0.5,
            jitter_deg: 0.00139,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("primary_mag_range", self.primary_mag_range),
            ("delta_mag_range", self.delta_mag_range),
            ("fwhm_range", self.fwhm_range),
            ("offset_factor_range", self.offset_factor_range),
            ("sky_mag_range", self.sky_mag_range),
            ("zp_unif_range", self.zp_unif_range),
            ("size_range", self.size_range),
            ("albedo_range", self.albedo_range),
        ];
        for (name, [lo, hi]) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Config(format!(
                    "{name}: need finite lo <= hi, got [{lo}, {hi}]"
                )));
            }
        }
        if self.fwhm_range[0] <= 0.0 {
            return Err(Error::Config("fwhm_range must be positive".into()));
        }
        if self.exposure_choices.is_empty() || self.exposure_choices.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::Config(
                "exposure_choices must be non-empty and positive".into(),
            ));
        }
        if self.cutout_size < 8 {
            return Err(Error::Config(format!(
                "cutout_size {} < 8",
                self.cutout_size
            )));
        }
        if !(self.plate_scale > 0.0) {
            return Err(Error::Config("plate_scale must be > 0".into()));
        }
        if !(self.gain > 0.0) {
            return Err(Error::Config("gain must be > 0".into()));
        }
        if !(self.read_noise >= 0.0) {
            return Err(Error::Config("read_noise must be >= 0".into()));
        }
        if !(self.centering_error_sigma >= 0.0) {
            return Err(Error::Config("centering_error_sigma must be >= 0".into()));
        }
        Ok(())
    }

    pub fn pixels_per_cutout(&self) -> usize {
        self.cutout_size * self.cutout_size
    }
}

/// The secondary satellite of a CSO scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Secondary {
    pub mag: f64,
    /// Offset from the primary midpoint on the tangent plane, arcsec.
    pub offset_arcsec: (f64, f64),
    pub endpoints: Endpoints,
}

/// One draw of every scene parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSample {
    /// Sky position of the cutout centre (the primary's calculated position).
    pub pointing: SkyCoord,
    pub primary_mag: f64,
    pub fwhm: f64,
    pub exposure: f64,
    pub sky_mag: f64,
    pub zero_point: f64,
    pub primary_endpoints: Endpoints,
    pub secondary: Option<Secondary>,
    pub size_m: f64,
    pub albedo: f64,
    pub centering_error: (f64, f64),
}

impl SceneSample {
    pub fn is_cso(&self) -> bool {
        self.secondary.is_some()
    }

    pub fn secondary_mag(&self) -> Option<f64> {
        self.secondary.as_ref().map(|s| s.mag)
    }
}

/// A rendered, noisy cutout plus its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Cutout {
    pub size: usize,
    pub pixels: Vec<f64>,
    pub label: Label,
    pub scene: SceneSample,
    pub separation_arcsec: Option<f64>,
    pub delta_mag: Option<f64>,
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

fn sign<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.random_bool(0.5) {
        1.0
    } else {
        -1.0
    }
}

/// Endpoints for a source moving at `rate` deg/s along position angle
/// `theta` during `exposure`, centred on `mid`.
fn motion_endpoints(mid: SkyCoord, rate: f64, theta: f64, exposure: f64) -> Endpoints {
    let half = 0.5 * rate * exposure;
    let d_ra = half * theta.cos() / mid.dec.to_radians().cos();
    let d_dec = half * theta.sin();
    Endpoints::symmetric(mid, d_ra, d_dec)
}

/// Draws one scene. Draw order is fixed so that a given generator state
/// always yields the same scene.
pub fn sample_scene<R: Rng + ?Sized>(
    config: &SimConfig,
    want_cso: bool,
    rng: &mut R,
) -> SceneSample {
    let pointing = SkyCoord::new(
        rng.random_range(POINTING_RA.0..POINTING_RA.1),
        rng.random_range(POINTING_DEC.0..POINTING_DEC.1),
    );
    let primary_mag = uniform(rng, config.primary_mag_range);
    let fwhm = uniform(rng, config.fwhm_range);
    let exposure = *config
        .exposure_choices
        .choose(rng)
        .expect("validated non-empty");
    let sky_mag = uniform(rng, config.sky_mag_range);
    let zero_point = ZERO_POINT_BASE + uniform(rng, config.zp_unif_range) / ZERO_POINT_SCALE;
    let size_m = uniform(rng, config.size_range);
    let albedo = uniform(rng, config.albedo_range);

    let centering_error = if config.centering_error_sigma > 0.0 {
        let n = Normal::new(0.0, config.centering_error_sigma).expect("validated sigma");
        (n.sample(rng), n.sample(rng))
    } else {
        (0.0, 0.0)
    };
    let primary_mid = from_tangent_plane(pointing, centering_error.0, centering_error.1);

    let rate = rng.random_range(APPARENT_RATE.0..APPARENT_RATE.1);
    let theta = rng.random_range(0.0..std::f64::consts::TAU);
    let primary_endpoints = motion_endpoints(primary_mid, rate, theta, exposure);

    let secondary = want_cso.then(|| {
        let [lo, hi] = config.primary_mag_range;
        let mag = (primary_mag + uniform(rng, config.delta_mag_range)).clamp(lo, hi);
        let sx = sign(rng);
        let sy = sign(rng);
        let fx = uniform(rng, config.offset_factor_range);
        let fy = uniform(rng, config.offset_factor_range);
        let offset_arcsec = (sx * fx * fwhm, sy * fy * fwhm);
        let mid = from_tangent_plane(primary_mid, offset_arcsec.0, offset_arcsec.1);
        Secondary {
            mag,
            offset_arcsec,
            endpoints: motion_endpoints(mid, rate, theta, exposure),
        }
    });

    SceneSample {
        pointing,
        primary_mag,
        fwhm,
        exposure,
        sky_mag,
        zero_point,
        primary_endpoints,
        secondary,
        size_m,
        albedo,
        centering_error,
    }
}

/// Pixel-frame position of a sky coordinate in a cutout centred on
/// `pointing`. The cutout centre sits at `(size/2, size/2)`.
pub fn sky_to_pixel(config: &SimConfig, pointing: SkyCoord, p: SkyCoord) -> (f64, f64) {
    let (xi, eta) = tangent_plane(pointing, p);
    let c = config.cutout_size as f64 / 2.0;
    (c + xi / config.plate_scale, c + eta / config.plate_scale)
}

/// Noise-free expected counts for a scene.
pub fn expected_grid(scene: &SceneSample, config: &SimConfig) -> Grid {
    let sky = sky_counts_per_pixel(
        scene.sky_mag,
        scene.zero_point,
        scene.exposure,
        config.plate_scale,
    );
    let mut grid = Grid::filled(config.cutout_size, sky);
    let fwhm_px = scene.fwhm / config.plate_scale;

    let p = midpoint(&scene.primary_endpoints);
    render_point_source(
        &mut grid,
        sky_to_pixel(config, scene.pointing, p),
        mag_to_counts(scene.primary_mag, scene.zero_point, scene.exposure),
        fwhm_px,
    );
    if let Some(sec) = &scene.secondary {
        let s = midpoint(&sec.endpoints);
        render_point_source(
            &mut grid,
            sky_to_pixel(config, scene.pointing, s),
            mag_to_counts(sec.mag, scene.zero_point, scene.exposure),
            fwhm_px,
        );
    }
    grid
}

/// Renders `scene` and draws detector noise.
pub fn simulate_cutout<R: Rng + ?Sized>(
    scene: &SceneSample,
    config: &SimConfig,
    rng: &mut R,
) -> Result<Cutout> {
    let expected = expected_grid(scene, config);
    let observed = add_noise(&expected, config.read_noise, config.gain, rng)?;

    let (label, separation_arcsec, delta_mag) = match &scene.secondary {
        Some(sec) => {
            let p = midpoint(&scene.primary_endpoints);
            let s = midpoint(&sec.endpoints);
            (
                Label::Cso,
                Some(angular_separation(p, s)),
                Some(magnitude_difference(sec.mag, scene.primary_mag)),
            )
        }
        None => (Label::Single, None, None),
    };
    Ok(Cutout {
        size: config.cutout_size,
        pixels: observed.data,
        label,
        scene: scene.clone(),
        separation_arcsec,
        delta_mag,
    })
}

/// Simulates `n_single` single-satellite cutouts followed by `n_cso` CSO
/// cutouts. Item `i` draws from its own generator stream
/// `derive_seed(seed, "cutout/{i}")`, so any item can be regenerated alone.
/// Pixels are rounded through `f32`, the on-disk precision.
pub fn simulate_dataset(
    config: &SimConfig,
    n_single: usize,
    n_cso: usize,
    seed: u64,
) -> Result<Vec<Cutout>> {
    config.validate()?;
    (0..n_single + n_cso)
        .map(|i| {
            let mut rng = crate::io::seed::stream(seed, &format!("cutout/{i}"));
            let scene = sample_scene(config, i >= n_single, &mut rng);
            let mut c = simulate_cutout(&scene, config, &mut rng)?;
            for v in &mut c.pixels {
                *v = *v as f32 as f64;
            }
            Ok(c)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_scene_has_no_secondary() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = sample_scene(&SimConfig::default(), false, &mut rng);
        assert!(!s.is_cso());
        assert!(s.secondary_mag().is_none());
    }

    #[test]
    fn secondary_clamped_to_primary_bounds() {
        let c = SimConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let s = sample_scene(&c, true, &mut rng);
            let m = s.secondary_mag().unwrap();
            assert!((12.0..=15.0).contains(&m));
        }
        // the clamping rule itself
        assert_eq!((14.2f64 + 1.4).clamp(12.0, 15.0), 15.0);
    }

    #[test]
    fn zero_point_range() {
        let c = SimConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..1000 {
            let s = sample_scene(&c, false, &mut rng);
            assert!((24.0..=24.75).contains(&s.zero_point));
        }
    }

    #[test]
    fn primary_lands_at_center_plus_error() {
        let c = SimConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = sample_scene(&c, true, &mut rng);
        let (x, y) = sky_to_pixel(&c, s.pointing, midpoint(&s.primary_endpoints));
        assert!((x - 12.0 - s.centering_error.0).abs() < 1e-6);
        assert!((y - 12.0 - s.centering_error.1).abs() < 1e-6);
    }

    #[test]
    fn zero_flux_secondary_matches_single() {
        let c = SimConfig {
            centering_error_sigma: 0.0,
            ..SimConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut cso = sample_scene(&c, true, &mut rng);
        let mut single = cso.clone();
        single.secondary = None;
        // +∞ magnitude is zero flux
        cso.secondary.as_mut().unwrap().mag = f64::INFINITY;
        assert_eq!(expected_grid(&cso, &c), expected_grid(&single, &c));
    }

    #[test]
    fn expected_sum_is_sky_plus_sources() {
        let c = SimConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut s = sample_scene(&c, true, &mut rng);
        s.fwhm = 2.0;
        let sec = s.secondary.as_mut().unwrap();
        sec.offset_arcsec = (1.0, -1.5);
        let pmid = midpoint(&s.primary_endpoints);
        let mid = from_tangent_plane(pmid, 1.0, -1.5);
        sec.endpoints = Endpoints::symmetric(mid, 0.0, 0.0);
        let sky = sky_counts_per_pixel(s.sky_mag, s.zero_point, s.exposure, 1.0);
        let src = mag_to_counts(s.primary_mag, s.zero_point, s.exposure)
            + mag_to_counts(s.secondary_mag().unwrap(), s.zero_point, s.exposure);
        let g = expected_grid(&s, &c);
        let want = sky * 576.0 + src;
        assert!((g.sum() - want).abs() / want < 1e-6);
    }

    #[test]
    fn cutout_records_covariates() {
        let c = SimConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = sample_scene(&c, true, &mut rng);
        let cut = simulate_cutout(&s, &c, &mut rng).unwrap();
        assert_eq!(cut.label, Label::Cso);
        assert_eq!(cut.pixels.len(), 576);
        let (ox, oy) = s.secondary.as_ref().unwrap().offset_arcsec;
        let sep = cut.separation_arcsec.unwrap();
        assert!(sep > 0.0);
        assert!((sep - ox.hypot(oy)).abs() < 1e-6, "{sep}");
        assert!(cut.pixels.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn dataset_counts_and_determinism() {
        let c = SimConfig::default();
        let a = simulate_dataset(&c, 7, 5, 99).unwrap();
        let b = simulate_dataset(&c, 7, 5, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.iter().filter(|c| c.label == Label::Single).count(), 7);
        assert_eq!(a.iter().filter(|c| c.label == Label::Cso).count(), 5);
    }

    #[test]
    fn invalid_config_rejected() {
        let c = SimConfig {
            fwhm_range: [6.0, 2.0],
            ..SimConfig::default()
        };
        assert!(c.validate().is_err());
        let c = SimConfig {
            cutout_size: 4,
            ..SimConfig::default()
        };
        assert!(c.validate().is_err());
        let c = SimConfig {
            read_noise: -1.0,
            ..SimConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
