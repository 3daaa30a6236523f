//! Point-source rendering and detector noise.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::{Error, Result};

/// σ / FWHM for a Gaussian profile: 1 / (2√(2 ln 2)).
pub const FWHM_TO_SIGMA: f64 = 0.424_660_900_144_009_5;

/// Square image stored row-major; `data[row * size + col]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub size: usize,
    pub data: Vec<f64>,
}

impl Grid {
    pub fn new(size: usize) -> Self {
        Self::filled(size, 0.0)
    }

    pub fn filled(size: usize, value: f64) -> Self {
        Self {
            size,
            data: vec![value; size * size],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.size + col]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }
}

/// Probability mass of a unit normal on [a, b], computed through `erfc` on
/// the side that avoids cancellation.
fn normal_interval(a: f64, b: f64) -> f64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    if a >= 0.0 {
        0.5 * (libm::erfc(a * s) - libm::erfc(b * s))
    } else if b <= 0.0 {
        0.5 * (libm::erfc(-b * s) - libm::erfc(-a * s))
    } else {
        1.0 - 0.5 * (libm::erfc(-a * s) + libm::erfc(b * s))
    }
}

/// Fraction of a 1-D Gaussian (centred at `center`, width `sigma`) falling in
/// each unit pixel `[i, i + 1)`, `i = 0..n`.
fn pixel_masses(n: usize, center: f64, sigma: f64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let lo = (i as f64 - center) / sigma;
            let hi = (i as f64 + 1.0 - center) / sigma;
            normal_interval(lo, hi)
        })
        .collect()
}

/// Adds a circular Gaussian source with `total_counts` to `grid`,
/// integrating the profile exactly over each pixel. Pixel `(row, col)`
/// covers `[col, col+1) × [row, row+1)` in the `(x, y)` frame. Flux falling
/// outside the grid is lost.
pub fn render_point_source(
    grid: &mut Grid,
    center: (f64, f64),
    total_counts: f64,
    fwhm_pixels: f64,
) {
    if total_counts == 0.0 {
        return;
    }
    let sigma = fwhm_pixels * FWHM_TO_SIGMA;
    let mx = pixel_masses(grid.size, center.0, sigma);
    let my = pixel_masses(grid.size, center.1, sigma);
    for (row, wy) in my.iter().enumerate() {
        if *wy == 0.0 {
            continue;
        }
        let line = &mut grid.data[row * grid.size..(row + 1) * grid.size];
        for (px, wx) in line.iter_mut().zip(&mx) {
            *px += total_counts * wy * wx;
        }
    }
}

/// Draws an observed frame from expected electron counts: Poisson shot noise
/// plus Gaussian read noise, converted to ADU by `gain`.
pub fn add_noise<R: Rng + ?Sized>(
    expected: &Grid,
    read_noise: f64,
    gain: f64,
    rng: &mut R,
) -> Result<Grid> {
    let read = if read_noise > 0.0 {
        Some(Normal::new(0.0, read_noise).map_err(|e| Error::Config(e.to_string()))?)
    } else {
        None
    };
    let mut data = Vec::with_capacity(expected.data.len());
    for (index, &lambda) in expected.data.iter().enumerate() {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::NegativeExpectation {
                index,
                value: lambda,
            });
        }
        let shot = if lambda > 0.0 {
            Poisson::new(lambda)
                .map_err(|e| Error::Config(e.to_string()))?
                .sample(rng)
        } else {
            0.0
        };
        let electrons = shot + read.map_or(0.0, |n| n.sample(rng));
        data.push(electrons / gain);
    }
    Ok(Grid {
        size: expected.size,
        data,
    })
}
