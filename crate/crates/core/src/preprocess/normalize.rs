use super::{FeatureVector, Stage};
use crate::{Error, Result};

/// Scales one image to [0, 1]: `(x - min) / (max - min)`, flattened in the
/// input (row-major) order. The extremes map to exactly 0 and 1.
pub fn minmax_normalize(pixels: &[f64]) -> Result<FeatureVector> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in pixels {
        if !v.is_finite() {
            return Err(Error::Shape(format!("non-finite pixel {v}")));
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if pixels.is_empty() || hi == lo {
        return Err(Error::DegenerateCutout {
            len: pixels.len(),
            value: lo,
        });
    }
    let span = hi - lo;
    Ok(FeatureVector {
        values: pixels.iter().map(|&v| (v - lo) / span).collect(),
        stage: Stage::RawNormalized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn affine_map() {
        let f = minmax_normalize(&[2.0, 4.0, 6.0, 3.0]).unwrap();
        assert_eq!(f.values, vec![0.0, 0.5, 1.0, 0.25]);
        assert_eq!(f.stage, Stage::RawNormalized);
    }

    #[test]
    fn identity_on_unit_range() {
        let x = vec![0.0, 0.3, 1.0, 0.7];
        assert_eq!(minmax_normalize(&x).unwrap().values, x);
    }

    #[test]
    fn constant_image_is_degenerate() {
        assert!(matches!(
            minmax_normalize(&[5.0; 9]),
            Err(Error::DegenerateCutout { len: 9, .. })
        ));
    }

    proptest! {
        #[test]
        fn attains_bounds_and_affine_invariant(
            xs in prop::collection::vec(-1e4f64..1e4, 2..64),
            a in 0.01f64..100.0,
            b in -1e3f64..1e3,
        ) {
            prop_assume!(xs.iter().any(|&v| v != xs[0]));
            let f = minmax_normalize(&xs).unwrap();
            prop_assert!(f.values.contains(&0.0));
            prop_assert!(f.values.contains(&1.0));
            prop_assert!(f.values.iter().all(|&v| (0.0..=1.0).contains(&v)));

            let ys: Vec<f64> = xs.iter().map(|&v| a * v + b).collect();
            prop_assume!(ys.iter().any(|&v| v != ys[0]));
            let g = minmax_normalize(&ys).unwrap();
            for (u, v) in f.values.iter().zip(&g.values) {
                prop_assert!((u - v).abs() < 1e-9);
            }
        }
    }
}
