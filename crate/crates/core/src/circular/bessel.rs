//! Modified Bessel functions of the first kind, orders 0 and 1.
//!
//! Power series below [`SERIES_CROSSOVER`], exponentially scaled Hankel
//! asymptotic expansion above it. The scaled forms `e^{-z} I_m(z)` stay
//! finite for any `z`, so the ratio `I_1/I_0` and `log I_0` are available
//! far beyond the overflow point of `I_0` itself.

use crate::error::{Result, TorusError};

/// Switch point between the power series and the asymptotic expansion.
pub const SERIES_CROSSOVER: f64 = 15.0;

const MAX_TERMS: usize = 500;

fn check_arg(z: f64) -> Result<()> {
    if !z.is_finite() || z < 0.0 {
        return Err(TorusError::domain(format!(
            "Bessel argument must be finite and non-negative, got {z}"
        )));
    }
    Ok(())
}

/// Power series for `I_order(z)`, summed until terms stop contributing.
fn series(order: u32, z: f64) -> f64 {
    let q = 0.25 * z * z;
    let mut term = if order == 0 { 1.0 } else { 0.5 * z };
    let mut sum = term;
    for k in 1..MAX_TERMS {
        let k = k as f64;
        term *= q / (k * (k + order as f64));
        sum += term;
        if term <= sum * f64::EPSILON * 0.5 {
            break;
        }
    }
    sum
}

/// Scaled asymptotic expansion `e^{-z} I_order(z)` for large `z`.
fn scaled_asymptotic(order: u32, z: f64) -> f64 {
    let mu = 4.0 * (order * order) as f64;
    let mut term = 1.0_f64;
    let mut sum = 1.0;
    for k in 1..MAX_TERMS {
        let odd = (2 * k - 1) as f64;
        let next = -term * (mu - odd * odd) / (k as f64 * 8.0 * z);
        if next.abs() >= term.abs() {
            // asymptotic series: stop at the smallest term
            break;
        }
        term = next;
        sum += term;
        if term.abs() <= sum.abs() * f64::EPSILON * 0.5 {
            break;
        }
    }
    sum / (2.0 * std::f64::consts::PI * z).sqrt()
}

fn check_order(order: u32) -> Result<()> {
    if order > 1 {
        return Err(TorusError::domain(format!(
            "only Bessel orders 0 and 1 are supported, got {order}"
        )));
    }
    Ok(())
}

/// `I_order(z)` for `order` in {0, 1} and `z >= 0`.
pub fn bessel_i(order: u32, z: f64) -> Result<f64> {
    check_order(order)?;
    check_arg(z)?;
    if z <= SERIES_CROSSOVER {
        Ok(series(order, z))
    } else {
        Ok(scaled_asymptotic(order, z) * z.exp())
    }
}

/// Exponentially scaled `e^{-z} I_order(z)`.
pub fn bessel_i_scaled(order: u32, z: f64) -> Result<f64> {
    check_order(order)?;
    check_arg(z)?;
    if z <= SERIES_CROSSOVER {
        Ok(series(order, z) * (-z).exp())
    } else {
        Ok(scaled_asymptotic(order, z))
    }
}

/// `ln I_0(z)`, finite for every finite `z >= 0`.
pub fn log_bessel_i0(z: f64) -> Result<f64> {
    check_arg(z)?;
    if z <= SERIES_CROSSOVER {
        Ok(series(0, z).ln())
    } else {
        Ok(z + scaled_asymptotic(0, z).ln())
    }
}

/// `A(z) = I_1(z) / I_0(z)`, the mean resultant length of a von Mises
/// distribution with concentration `z`.
pub fn bessel_ratio(z: f64) -> Result<f64> {
    check_arg(z)?;
    if z == 0.0 {
        return Ok(0.0);
    }
    if z <= SERIES_CROSSOVER {
        Ok(series(1, z) / series(0, z))
    } else {
        Ok(scaled_asymptotic(1, z) / scaled_asymptotic(0, z))
    }
}
