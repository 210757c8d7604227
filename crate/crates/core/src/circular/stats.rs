use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{wrap, Angle, Resultant};
use crate::error::{Result, TorusError};

const DEGENERATE_LENGTH: f64 = 64.0 * f64::EPSILON;

/// First trigonometric moment of a sample of angles.
pub fn circular_mean_resultant(angles: &[f64]) -> Result<Resultant> {
    if angles.is_empty() {
        return Err(TorusError::domain("resultant of an empty sample"));
    }
    let n = angles.len() as f64;
    let (mut c, mut s) = (0.0, 0.0);
    for &x in angles {
        let (sx, cx) = x.sin_cos();
        c += cx;
        s += sx;
    }
    let (c, s) = (c / n, s / n);
    let length = c.hypot(s).min(1.0);
    if length < DEGENERATE_LENGTH {
        return Ok(Resultant {
            mean_direction: Angle::ZERO,
            mean_resultant_length: 0.0,
            degenerate: true,
        });
    }
    Ok(Resultant {
        mean_direction: Angle(wrap(s.atan2(c))),
        mean_resultant_length: length,
        degenerate: false,
    })
}

/// Rayleigh `Z = N R̄²` for a sample of angles.
pub fn rayleigh_statistic(angles: &[f64]) -> Result<f64> {
    let r = circular_mean_resultant(angles)?;
    Ok(angles.len() as f64 * r.mean_resultant_length.powi(2))
}

/// Rayleigh test of circular uniformity.
///
/// Uses the refined exponential approximation
/// `p = exp(√(1 + 4N + 4(N² - R_n²)) - (1 + 2N))` with `R_n = N R̄`.
pub fn rayleigh_test(angles: &[f64]) -> Result<f64> {
    let n = angles.len();
    if n < 2 {
        return Err(TorusError::domain(format!(
            "Rayleigh test needs at least 2 angles, got {n}"
        )));
    }
    let nf = n as f64;
    let r = circular_mean_resultant(angles)?.mean_resultant_length;
    let rn = nf * r;
    let inner = (1.0 + 4.0 * nf + 4.0 * (nf * nf - rn * rn)).max(0.0);
    let p = (inner.sqrt() - (1.0 + 2.0 * nf)).exp();
    Ok(p.clamp(0.0, 1.0))
}

/// Phase locking value `|N⁻¹ Σ exp(i(x_n - y_n))|`.
pub fn plv(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(TorusError::domain("PLV of empty samples"));
    }
    if x.len() != y.len() {
        return Err(TorusError::Dimension {
            expected: x.len(),
            got: y.len(),
        });
    }
    let (mut c, mut s) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (sd, cd) = (a - b).sin_cos();
        c += cd;
        s += sd;
    }
    let n = x.len() as f64;
    Ok((c / n).hypot(s / n).min(1.0))
}

/// Sample circular correlation coefficient
/// `mean(sin(x-μx) sin(y-μy)) / √(mean sin²(x-μx) · mean sin²(y-μy))`.
pub fn circular_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(TorusError::Dimension {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(TorusError::domain("circular correlation needs at least 2 pairs"));
    }
    let mx = circular_mean_resultant(x)?.mean_direction.value();
    let my = circular_mean_resultant(y)?.mean_direction.value();
    let (mut num, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let sa = (a - mx).sin();
        let sb = (b - my).sin();
        num += sa * sb;
        sxx += sa * sa;
        syy += sb * sb;
    }
    let denom = (sxx * syy).sqrt();
    if denom <= f64::MIN_POSITIVE || !denom.is_finite() {
        return Err(TorusError::Degenerate(
            "circular correlation denominator is zero".into(),
        ));
    }
    Ok((num / denom).clamp(-1.0, 1.0))
}

/// Fisher's method: `-2 Σ ln p_i` referred to the χ²(2k) upper tail.
pub fn fisher_combine(pvals: &[f64]) -> Result<f64> {
    if pvals.is_empty() {
        return Err(TorusError::domain("Fisher's method needs at least one p-value"));
    }
    let mut stat = 0.0;
    for &p in pvals {
        if !(p > 0.0 && p <= 1.0) {
            return Err(TorusError::domain(format!("p-value {p} outside (0, 1]")));
        }
        stat -= 2.0 * p.ln();
    }
    chi2_sf(stat, 2 * pvals.len())
}

/// Upper tail of the χ² distribution.
pub(crate) fn chi2_sf(x: f64, df: usize) -> Result<f64> {
    if x <= 0.0 {
        return Ok(1.0);
    }
    let dist = ChiSquared::new(df as f64)
        .map_err(|e| TorusError::domain(format!("invalid χ² degrees of freedom {df}: {e}")))?;
    Ok(dist.sf(x).clamp(0.0, 1.0))
}

/// Kolmogorov limiting distribution `Q(λ) = 2 Σ (-1)^{k-1} exp(-2k²λ²)`.
fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // theta-function form converges quickly for small λ
        let y = (-std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda)).exp();
        let mut sum = 0.0;
        let mut k = 1.0_f64;
        loop {
            let term = y.powf(k * k);
            sum += term;
            if term < 1e-17 {
                break;
            }
            k += 2.0;
        }
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * sum;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        for k in 1..=100 {
            let k = k as f64;
            let term = (-2.0 * k * k * lambda * lambda).exp();
            sum += if k as u64 % 2 == 1 { term } else { -term };
            if term < 1e-17 {
                break;
            }
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value at
/// effective size `n_a n_b / (n_a + n_b)`. Returns `(D, p)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(TorusError::domain("KS test needs two nonempty samples"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    let by_value = |x: &f64, y: &f64| x.total_cmp(y);
    a.sort_by(by_value);
    b.sort_by(by_value);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    Ok((d, kolmogorov_sf(ne.sqrt() * d)))
}

/// Mean direction with a resultant-based large-sample confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanDirectionInterval {
    pub mean: Angle,
    pub resultant_length: f64,
    /// Half-width in radians; `None` when the interval covers the circle.
    pub half_width: Option<f64>,
    pub n: usize,
}

/// Large-sample interval `μ̂ ± asin(z σ̂)` with
/// `σ̂² = (1 - ρ̂₂) / (2 n R̄²)` and `ρ̂₂ = mean cos 2(θ - μ̂)`.
pub fn mean_direction_interval(angles: &[f64], z: f64) -> Result<MeanDirectionInterval> {
    let r = circular_mean_resultant(angles)?;
    if r.degenerate {
        return Ok(MeanDirectionInterval {
            mean: r.mean_direction,
            resultant_length: 0.0,
            half_width: None,
            n: angles.len(),
        });
    }
    let n = angles.len() as f64;
    let mu = r.mean_direction.value();
    let rho2 = angles.iter().map(|t| (2.0 * (t - mu)).cos()).sum::<f64>() / n;
    let sigma = ((1.0 - rho2).max(0.0) / (2.0 * n * r.mean_resultant_length.powi(2))).sqrt();
    let arg = z * sigma;
    Ok(MeanDirectionInterval {
        mean: r.mean_direction,
        resultant_length: r.mean_resultant_length,
        half_width: (arg <= 1.0).then(|| arg.asin()),
        n: angles.len(),
    })
}
