//! Standard-normal helpers with tail-accurate evaluation.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Standard normal density.
pub fn phi(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF.
pub fn cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// Upper tail `1 - cdf(z)`, accurate for large `z`.
pub fn tail(z: f64) -> f64 {
    0.5 * erfc(z * FRAC_1_SQRT_2)
}

/// Probability that `N(y, 1)` falls in `[l, u]`,
/// i.e. `0.5 * (erf((y-l)/sqrt2) - erf((y-u)/sqrt2))`.
///
/// The form is chosen per case so that both tails keep relative accuracy.
pub fn interval_mass(y: f64, l: f64, u: f64) -> f64 {
    let a = l - y;
    let b = u - y;
    if b <= a {
        return 0.0;
    }
    let v = if a >= 0.0 {
        tail(a) - tail(b)
    } else if b <= 0.0 {
        tail(-b) - tail(-a)
    } else {
        1.0 - tail(-a) - tail(b)
    };
    v.max(0.0)
}

/// Derivative of [`interval_mass`] with respect to `y`.
pub fn interval_mass_dy(y: f64, l: f64, u: f64) -> f64 {
    phi(l - y) - phi(u - y)
}

/// `d/dy ln interval_mass(y, l, u)`, computed without forming tiny ratios
/// where possible. Returns `None` if the mass underflows to zero.
pub fn interval_log_slope(y: f64, l: f64, u: f64) -> Option<f64> {
    let m = interval_mass(y, l, u);
    if m > 1e-280 {
        return Some(interval_mass_dy(y, l, u) / m);
    }
    // Far tail: mass ~ phi(d)/d, slope ~ d (pointing back to the interval).
    let a = l - y;
    let b = u - y;
    if a > 0.0 {
        Some(mills_slope(a))
    } else if b < 0.0 {
        Some(-mills_slope(-b))
    } else {
        None
    }
}

// Slope of -ln tail(z) for large z: phi(z)/tail(z), via continued fraction.
fn mills_slope(z: f64) -> f64 {
    let t = tail(z);
    if t > 1e-280 {
        return phi(z) / t;
    }
    // Asymptotic inverse Mills ratio.
    let z2 = z * z;
    z / (1.0 - 1.0 / (z2 + 2.0) + 1.0 / ((z2 + 2.0) * (z2 + 4.0)))
}
