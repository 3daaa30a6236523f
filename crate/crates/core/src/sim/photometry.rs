//! Magnitude ↔ count conversions.

/// Expected total counts from a source of magnitude `m` observed for `t`
/// seconds with zero point `zp` (the magnitude that yields one count per
/// second).
pub fn mag_to_counts(m: f64, zp: f64, t: f64) -> f64 {
    t * 10f64.powf(-0.4 * (m - zp))
}

/// Expected sky counts in one pixel for a surface brightness `m_sky`
/// (mag arcsec⁻²) and a square pixel of side `plate_scale` arcsec.
pub fn sky_counts_per_pixel(m_sky: f64, zp: f64, t: f64, plate_scale: f64) -> f64 {
    mag_to_counts(m_sky, zp, t) * plate_scale * plate_scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_point_definition() {
        assert_eq!(mag_to_counts(20.0, 20.0, 1.0), 1.0);
        assert!((mag_to_counts(17.5, 20.0, 1.0) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn bright_primary_short_exposure() {
        let c = mag_to_counts(12.0, 24.0, 0.1);
        let expected = 0.1 * 10f64.powf(4.8);
        assert!((c - expected).abs() < 1e-9);
        assert!((c - 6309.57).abs() < 0.01, "{c}");
    }

    #[test]
    fn sky_scaling() {
        assert_eq!(sky_counts_per_pixel(21.0, 21.0, 1.0, 1.0), 1.0);
        let a = sky_counts_per_pixel(19.0, 24.2, 0.2, 1.0);
        let b = sky_counts_per_pixel(19.0, 24.2, 0.2, 2.0);
        assert!((b / a - 4.0).abs() < 1e-12);
        let s = sky_counts_per_pixel(18.3, 24.0, 0.1, 1.0);
        assert!((s - 19.05).abs() < 0.005, "{s}");
    }
}
