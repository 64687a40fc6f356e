//! Gamma function helpers.

use std::f64::consts::PI;

/// Γ(x) for real x, using the reflection formula below 1/2.
///
/// Returns ±infinity at the poles (non-positive integers).
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        if x == x.floor() {
            return f64::INFINITY;
        }
        PI / ((PI * x).sin() * statrs::function::gamma::gamma(1.0 - x))
    } else {
        statrs::function::gamma::gamma(x)
    }
}

/// 1/Γ(x), which is entire; zero at the poles of Γ.
pub fn recip_gamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        0.0
    } else {
        1.0 / gamma(x)
    }
}
