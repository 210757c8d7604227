//! Scalar circular statistics: angle wrapping, Bessel functions, harmonic
//! addition, resultants, phase locking value, circular correlation, and the
//! Rayleigh, Kolmogorov-Smirnov and Fisher tests.

mod bessel;
mod stats;
mod vonmises;

pub use bessel::{bessel_i, bessel_i_scaled, bessel_ratio, log_bessel_i0, SERIES_CROSSOVER};
pub use stats::{
    circular_correlation, circular_mean_resultant, fisher_combine, ks_two_sample, plv,
    rayleigh_statistic, rayleigh_test, MeanDirectionInterval, mean_direction_interval,
};
pub use vonmises::{von_mises_draw, von_mises_sample};
pub(crate) use stats::chi2_sf;

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Result, TorusError};

/// An angle in radians, always in `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Angle(f64);

impl Angle {
    pub const ZERO: Angle = Angle(0.0);

    /// Wraps any finite value into `[0, 2π)`.
    pub fn new(radians: f64) -> Result<Self> {
        wrap_angle(radians)
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// The same direction expressed in `[-π, π)`.
    pub fn signed(self) -> f64 {
        if self.0 >= PI {
            self.0 - TAU
        } else {
            self.0
        }
    }
}

impl From<Angle> for f64 {
    fn from(a: Angle) -> f64 {
        a.0
    }
}

/// Reduces `x` modulo 2π into `[0, 2π)`.
///
/// `rem_euclid` can round up to exactly `2π` for tiny negative inputs; that
/// case is folded back to zero.
#[inline]
pub fn wrap(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Checked version of [`wrap`].
pub fn wrap_angle(x: f64) -> Result<Angle> {
    if !x.is_finite() {
        return Err(TorusError::domain(format!("angle must be finite, got {x}")));
    }
    Ok(Angle(wrap(x)))
}

/// Mean direction and mean resultant length of a sample of angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resultant {
    pub mean_direction: Angle,
    pub mean_resultant_length: f64,
    /// Set when the resultant vanishes and the direction is reported as 0.
    pub degenerate: bool,
}

/// Output of the harmonic addition identity
/// `Σ a_i cos(x - δ_i) = A cos(x - Δ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Harmonic {
    pub amplitude: f64,
    pub phase: Angle,
}

/// Sums `(amplitude, phase)` cosine terms into a single cosine.
pub fn harmonic_sum<I>(terms: I) -> Harmonic
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let (mut bx, mut by) = (0.0, 0.0);
    for (a, delta) in terms {
        let (s, c) = delta.sin_cos();
        bx += a * c;
        by += a * s;
    }
    Harmonic {
        amplitude: bx.hypot(by),
        phase: Angle(wrap(by.atan2(bx))),
    }
}

/// Harmonic addition of equally long amplitude and phase lists.
pub fn harmonic_addition(amplitudes: &[f64], phases: &[f64]) -> Result<Harmonic> {
    if amplitudes.is_empty() {
        return Err(TorusError::domain("harmonic addition needs at least one term"));
    }
    if amplitudes.len() != phases.len() {
        return Err(TorusError::Dimension {
            expected: amplitudes.len(),
            got: phases.len(),
        });
    }
    Ok(harmonic_sum(amplitudes.iter().copied().zip(phases.iter().copied())))
}
