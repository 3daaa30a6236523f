//! Exponentially scaled modified Bessel functions of the second kind,
//! `e^x · K_n(x)`, for integer order.
//!
//! Orders 0 and 1 come from their power series for `x ≤ 2` and from Steed's
//! continued fraction (Thompson & Barnett) above; higher orders use the
//! upward recurrence `K_{n+1} = K_{n-1} + (2n / x) K_n`, which is stable for
//! the second-kind functions.

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const MAX_TERMS: usize = 500;

/// `(e^x K_0(x), e^x K_1(x))` for `x > 0`.
pub fn k0_k1_scaled(x: f64) -> (f64, f64) {
    debug_assert!(x > 0.0);
    if x <= 2.0 {
        let (k0, k1) = series_k0_k1(x);
        let e = x.exp();
        (k0 * e, k1 * e)
    } else {
        steed_k0_k1_scaled(x)
    }
}

/// `e^x · K_n(x)` for `x > 0`.
pub fn kn_scaled(n: u32, x: f64) -> f64 {
    let (mut prev, mut cur) = k0_k1_scaled(x);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let next = prev + 2.0 * k as f64 / x * cur;
        prev = cur;
        cur = next;
    }
    cur
}

/// `K_n(x)`; underflows to zero for large `x`.
pub fn kn(n: u32, x: f64) -> f64 {
    kn_scaled(n, x) * (-x).exp()
}

/// Ascending series (A&S 9.6.13 and 9.6.11 with n = 1), accurate for small x.
fn series_k0_k1(x: f64) -> (f64, f64) {
    let t = 0.25 * x * x;
    let log_half = (0.5 * x).ln();

    // I0, I1 and the harmonic / digamma sums share the term t^k / (k!)^2.
    let mut term = 1.0; // t^k / (k!)^2
    let mut harmonic = 0.0; // H_k
    let mut i0 = 0.0;
    let mut i1_sum = 0.0; // Σ t^k / (k! (k+1)!)
    let mut k0_sum = 0.0; // Σ H_k t^k / (k!)^2
    let mut k1_sum = 0.0; // Σ (ψ(k+1) + ψ(k+2)) t^k / (k! (k+1)!)
    for k in 0..MAX_TERMS {
        let kf = k as f64;
        if k > 0 {
            term *= t / (kf * kf);
            harmonic += 1.0 / kf;
        }
        let term1 = term / (kf + 1.0);
        let psi_sum = 2.0 * (harmonic - EULER_GAMMA) + 1.0 / (kf + 1.0);
        i0 += term;
        i1_sum += term1;
        k0_sum += harmonic * term;
        k1_sum += psi_sum * term1;
        if term < 1e-17 * i0 && term1 * psi_sum.abs() < 1e-17 * k1_sum.abs().max(1e-300) {
            break;
        }
    }
    let i1 = 0.5 * x * i1_sum;
    let k0 = -(log_half + EULER_GAMMA) * i0 + k0_sum;
    let k1 = 1.0 / x + log_half * i1 - 0.25 * x * k1_sum;
    (k0, k1)
}

/// Steed's algorithm for the continued fraction of `K_{ν+1} / K_ν` at ν = 0,
/// evaluated together with the normalising sum so that no I-function is
/// required. Valid for `x > 1`; used for `x > 2`.
fn steed_k0_k1_scaled(x: f64) -> (f64, f64) {
    let v = 0.0f64;
    let mut a = v * v - 0.25;
    let mut b = 2.0 * (x + 1.0);
    let mut d = 1.0 / b;
    let mut delta = d;
    let mut f = d;
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut q = -a;
    let mut c = -a;
    let mut s = 1.0 + q * delta;

    for k in 2..MAX_TERMS {
        let kf = k as f64;
        a -= 2.0 * (kf - 1.0);
        b += 2.0;
        d = 1.0 / (b + a * d);
        delta *= b * d - 1.0;
        f += delta;

        let t = (prev - (b - 2.0) * cur) / a;
        prev = cur;
        cur = t;
        c *= -a / kf;
        q += c * t;
        s += q * delta;

        if (q * delta).abs() < s.abs() * f64::EPSILON * 0.5 {
            break;
        }
    }
    let k0 = (std::f64::consts::PI / (2.0 * x)).sqrt() / s;
    let k1 = k0 * (0.5 + v + x + (v * v - 0.25) * f) / x;
    (k0, k1)
}
