use super::bessel;
use crate::{Error, Result};

/// How the Matérn function is evaluated for a given smoothness.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Smoothness {
    /// ν = p + ½: exponential times a polynomial of degree p.
    HalfInteger(u32),
    /// ν = n: modified Bessel function of integer order.
    Integer(u32),
    /// ν = ∞: squared exponential.
    Gaussian,
}

/// Isotropic Matérn covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaternKernel {
    nu: f64,
    length_scale: f64,
    variance: f64,
    smoothness: Smoothness,
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

impl MaternKernel {
    /// Accepts positive integers, positive half-integers and `f64::INFINITY`
    /// for `nu`.
    pub fn new(nu: f64, length_scale: f64, variance: f64) -> Result<Self> {
        if !(length_scale > 0.0) || !length_scale.is_finite() {
            return Err(Error::Config(format!(
                "length_scale must be positive, got {length_scale}"
            )));
        }
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::Config(format!(
                "variance must be positive, got {variance}"
            )));
        }
        let smoothness = if nu == f64::INFINITY {
            Smoothness::Gaussian
        } else if nu > 0.0 && nu.fract() == 0.0 && nu <= 1000.0 {
            Smoothness::Integer(nu as u32)
        } else if nu > 0.0 && (nu - 0.5).fract() == 0.0 && nu <= 1000.0 {
            Smoothness::HalfInteger((nu - 0.5) as u32)
        } else {
            return Err(Error::UnsupportedNu(nu));
        };
        Ok(Self {
            nu,
            length_scale,
            variance,
            smoothness,
        })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// Covariance at distance `d ≥ 0`.
    pub fn eval(&self, d: f64) -> f64 {
        debug_assert!(d >= 0.0);
        if d == 0.0 {
            return self.variance;
        }
        let r = d / self.length_scale;
        let z = (2.0 * self.nu).sqrt() * r;
        let corr = match self.smoothness {
            Smoothness::Gaussian => (-0.5 * r * r).exp(),
            Smoothness::HalfInteger(p) => {
                // p!/(2p)! Σ_i (p+i)! / (i! (p−i)!) (2z)^(p−i)
                let lead = ln_factorial(p) - ln_factorial(2 * p);
                let poly: f64 = (0..=p)
                    .map(|i| {
                        let ln_coef = ln_factorial(p + i) - ln_factorial(i) - ln_factorial(p - i);
                        (ln_coef + lead).exp() * (2.0 * z).powi((p - i) as i32)
                    })
                    .sum();
                (-z).exp() * poly
            }
            Smoothness::Integer(n) => integer_matern(n, z),
        };
        self.variance * corr
    }

    /// Covariance between two feature vectors (Euclidean distance).
    pub fn between(&self, a: &[f64], b: &[f64]) -> f64 {
        self.eval(euclidean(a, b))
    }
}

/// `2^(1−n)/Γ(n) · z^n · K_n(z)` evaluated in log space.
fn integer_matern(n: u32, z: f64) -> f64 {
    if n >= 2 && z < 1e-8 {
        // z^n K_n(z) 2^(1−n)/Γ(n) = 1 − z²/(4(n−1)) + O(z⁴)
        return 1.0 - z * z / (4.0 * (n as f64 - 1.0));
    }
    let ks = bessel::kn_scaled(n, z);
    let ln = (1.0 - n as f64) * std::f64::consts::LN_2 - ln_factorial(n - 1) + n as f64 * z.ln()
        - z
        + ks.ln();
    ln.exp()
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_euclidean(a, b).sqrt()
}

pub fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
