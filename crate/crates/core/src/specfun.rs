//! The modified Bessel function `K_0` and the mass `H(a) = ||e^{-a<y>}||^2`
//! of the exponential family on `H^1`.

use crate::error::{Error, Result};
use crate::quad::{integrate, QuadConfig};

/// Largest exponent for which `exp(-x)` is still a normal double.
const UNDERFLOW_EXPONENT: f64 = 745.0;

/// `e^x K_0(x) = ∫_0^∞ exp(-x (cosh t - 1)) dt`.
///
/// The integrand is truncated where `x (cosh t - 1)` reaches the underflow
/// exponent, unless `cfg.tail_cut` fixes the cut explicitly.
pub fn bessel_k0_scaled(x: f64, cfg: &QuadConfig) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain("bessel_k0 argument", format!("x = {x}, expected x > 0")));
    }
    let cut = match cfg.tail_cut {
        Some(c) => c,
        None => (1.0 + UNDERFLOW_EXPONENT / x).acosh(),
    };
    let est = integrate(
        |t: f64| {
            let s = (0.5 * t).sinh();
            (-2.0 * x * s * s).exp()
        },
        0.0,
        cut,
        cfg,
    )?;
    Ok(est.value)
}

/// `K_0(x) = ∫_0^∞ exp(-x cosh t) dt` for `x > 0`.
///
/// Underflows to zero past `x ≈ 745`; use [`bessel_k0_scaled`] there.
pub fn bessel_k0(x: f64, cfg: &QuadConfig) -> Result<f64> {
    Ok(bessel_k0_scaled(x, cfg)? * (-x).exp())
}

/// `H(a) = ||f_a||^2_{L^2(H^1)} = 2 K_0(2a)` for `f_a(y) = e^{-a<y>}`.
pub fn mass_exp_family(a: f64, cfg: &QuadConfig) -> Result<f64> {
    check_family_parameter(a)?;
    Ok(2.0 * bessel_k0(2.0 * a, cfg)?)
}

/// `e^{2a} H(a)`, finite for every `a > 0`.
pub fn mass_exp_family_scaled(a: f64, cfg: &QuadConfig) -> Result<f64> {
    check_family_parameter(a)?;
    Ok(2.0 * bessel_k0_scaled(2.0 * a, cfg)?)
}

fn check_family_parameter(a: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::domain("exponential family parameter", format!("a = {a}, expected a > 0")));
    }
    Ok(())
}
