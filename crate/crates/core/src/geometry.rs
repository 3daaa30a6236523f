//! Sky-coordinate helpers. Angles are in degrees unless a name says otherwise.

use serde::{Deserialize, Serialize};

pub const ARCSEC_PER_DEG: f64 = 3600.0;

/// A position on the celestial sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkyCoord {
    pub ra: f64,
    pub dec: f64,
}

impl SkyCoord {
    pub fn new(ra: f64, dec: f64) -> Self {
        Self { ra, dec }
    }
}

/// Start and end sky positions of a satellite over one exposure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Endpoints {
    pub ra_start: f64,
    pub dec_start: f64,
    pub ra_end: f64,
    pub dec_end: f64,
}

impl Endpoints {
    /// Endpoints placed symmetrically about `mid`, displaced by
    /// `(±d_ra, ±d_dec)` degrees.
    pub fn symmetric(mid: SkyCoord, d_ra: f64, d_dec: f64) -> Self {
        Self {
            ra_start: mid.ra - d_ra,
            dec_start: mid.dec - d_dec,
            ra_end: mid.ra + d_ra,
            dec_end: mid.dec + d_dec,
        }
    }
}

/// Coordinate-wise arithmetic mean of the two endpoints.
///
/// Taken literally, so RA is not unwrapped: endpoints straddling 0°/360°
/// average to the far side of the sphere. Scenes are generated away from
/// the wrap for that reason.
pub fn midpoint(ep: &Endpoints) -> SkyCoord {
    SkyCoord {
        ra: (ep.ra_start + ep.ra_end) / 2.0,
        dec: (ep.dec_start + ep.dec_end) / 2.0,
    }
}

/// Great-circle distance in arcseconds (Vincenty's arctangent form, which
/// stays accurate at sub-arcsecond separations).
pub fn angular_separation(p: SkyCoord, s: SkyCoord) -> f64 {
    let (ra1, dec1) = (p.ra.to_radians(), p.dec.to_radians());
    let (ra2, dec2) = (s.ra.to_radians(), s.dec.to_radians());
    let dra = ra2 - ra1;
    let (sin_d1, cos_d1) = dec1.sin_cos();
    let (sin_d2, cos_d2) = dec2.sin_cos();
    let (sin_dra, cos_dra) = dra.sin_cos();

    let a = cos_d2 * sin_dra;
    let b = cos_d1 * sin_d2 - sin_d1 * cos_d2 * cos_dra;
    let num = a.hypot(b);
    let den = sin_d1 * sin_d2 + cos_d1 * cos_d2 * cos_dra;
    num.atan2(den).to_degrees() * ARCSEC_PER_DEG
}

/// Secondary minus primary magnitude. Positive means the secondary is fainter.
pub fn magnitude_difference(secondary: f64, primary: f64) -> f64 {
    secondary - primary
}

/// Gnomonic projection of `p` about the tangent point `center`, returning
/// standard coordinates (ξ, η) in arcseconds. ξ grows with RA, η with DEC.
pub fn tangent_plane(center: SkyCoord, p: SkyCoord) -> (f64, f64) {
    let (ra0, dec0) = (center.ra.to_radians(), center.dec.to_radians());
    let (ra, dec) = (p.ra.to_radians(), p.dec.to_radians());
    let dra = ra - ra0;
    let cos_c = dec0.sin() * dec.sin() + dec0.cos() * dec.cos() * dra.cos();
    let xi = dec.cos() * dra.sin() / cos_c;
    let eta = (dec0.cos() * dec.sin() - dec0.sin() * dec.cos() * dra.cos()) / cos_c;
    (
        xi.to_degrees() * ARCSEC_PER_DEG,
        eta.to_degrees() * ARCSEC_PER_DEG,
    )
}

/// Inverse of [`tangent_plane`].
pub fn from_tangent_plane(center: SkyCoord, xi_arcsec: f64, eta_arcsec: f64) -> SkyCoord {
    let xi = (xi_arcsec / ARCSEC_PER_DEG).to_radians();
    let eta = (eta_arcsec / ARCSEC_PER_DEG).to_radians();
    let (ra0, dec0) = (center.ra.to_radians(), center.dec.to_radians());
    let denom = dec0.cos() - eta * dec0.sin();
    let ra = ra0 + xi.atan2(denom);
    let dec = (dec0.sin() + eta * dec0.cos()).atan2(xi.hypot(denom));
    SkyCoord {
        ra: ra.to_degrees(),
        dec: dec.to_degrees(),
    }
}
