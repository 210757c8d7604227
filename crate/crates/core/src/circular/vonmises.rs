use std::f64::consts::PI;

use rand::Rng;

use super::wrap;
use crate::error::{Result, TorusError};

/// One von Mises draw by Best and Fisher's rejection sampler, which uses a
/// wrapped Cauchy envelope. `kappa` must already be validated.
pub fn von_mises_draw<R: Rng + ?Sized>(mu: f64, kappa: f64, rng: &mut R) -> f64 {
    if kappa < 1e-8 {
        return rng.random::<f64>() * 2.0 * PI;
    }
    let s = if kappa < 1e-5 {
        // second-order expansion of (1 + ρ²)/(2ρ); the closed form cancels badly here
        1.0 / kappa + kappa
    } else {
        let r = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
        let rho = (r - (2.0 * r).sqrt()) / (2.0 * kappa);
        (1.0 + rho * rho) / (2.0 * rho)
    };
    loop {
        let u: f64 = rng.random();
        let z = (PI * u).cos();
        let w = (1.0 + s * z) / (s + z);
        let y = kappa * (s - w);
        let v: f64 = rng.random();
        if y * (2.0 - y) - v >= 0.0 || (y / v).ln() + 1.0 - y >= 0.0 {
            let u3: f64 = rng.random();
            let mut theta = w.clamp(-1.0, 1.0).acos();
            if u3 < 0.5 {
                theta = -theta;
            }
            return wrap(mu + theta);
        }
    }
}

/// `n` independent von Mises draws with mean direction `mu` and
/// concentration `kappa`; `kappa == 0` gives the uniform distribution.
pub fn von_mises_sample<R: Rng + ?Sized>(
    mu: f64,
    kappa: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(kappa.is_finite() && kappa >= 0.0) {
        return Err(TorusError::domain(format!(
            "von Mises concentration must be finite and >= 0, got {kappa}"
        )));
    }
    if !mu.is_finite() {
        return Err(TorusError::domain(format!("von Mises mean must be finite, got {mu}")));
    }
    Ok((0..n).map(|_| von_mises_draw(mu, kappa, rng)).collect())
}
