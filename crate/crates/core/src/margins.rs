//! Closed-form marginal densities of pairwise phase differences.
//!
//! Bivariate: for two nodes with marginal concentrations and rotational
//! coupling, the density of `w = x₁ - x₂` factors as `f(w) g(w)`.
//! Trivariate: with zero marginal concentrations, the density of
//! `w = x₁ - x₂` factors as `g(w) h(w)` where `h` carries the indirect path
//! through node 3.

use std::io::Write;

use crate::circular::log_bessel_i0;
use crate::error::{Result, TorusError};

pub const DEFAULT_GRID_SIZE: usize = 1024;
const MIN_GRID_SIZE: usize = 16;

/// Function values on the uniform grid `2πi/G`, `i = 0..G`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    support: Vec<f64>,
    values: Vec<f64>,
    normalized: bool,
}

impl DensityGrid {
    pub fn from_fn(size: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        check_size(size)?;
        let support = uniform_support(size);
        let values: Vec<f64> = support.iter().map(|&w| f(w)).collect();
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(TorusError::Degenerate("grid values must be finite and nonnegative".into()));
        }
        Ok(DensityGrid {
            support,
            values,
            normalized: false,
        })
    }

    /// Builds a normalized density from log values, rescaling before
    /// exponentiating.
    pub fn from_log_values(size: usize, logf: impl Fn(f64) -> f64) -> Result<Self> {
        check_size(size)?;
        let support = uniform_support(size);
        let logs: Vec<f64> = support.iter().map(|&w| logf(w)).collect();
        if logs.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(TorusError::Degenerate("log density is not finite".into()));
        }
        let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let values = logs.iter().map(|l| (l - m).exp()).collect();
        let mut grid = DensityGrid {
            support,
            values,
            normalized: false,
        };
        grid.normalize()?;
        Ok(grid)
    }

    pub fn size(&self) -> usize {
        self.values.len()
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn spacing(&self) -> f64 {
        std::f64::consts::TAU / self.size() as f64
    }

    /// Trapezoid rule with periodic closure.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spacing()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let z = self.integral();
        if !(z.is_finite() && z > 0.0) {
            return Err(TorusError::Degenerate("density integrates to zero".into()));
        }
        self.values.iter_mut().for_each(|v| *v /= z);
        self.normalized = true;
        Ok(())
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }
}

fn check_size(size: usize) -> Result<()> {
    if size < MIN_GRID_SIZE {
        return Err(TorusError::domain(format!(
            "grid size must be at least {MIN_GRID_SIZE}, got {size}"
        )));
    }
    Ok(())
}

fn uniform_support(size: usize) -> Vec<f64> {
    let h = std::f64::consts::TAU / size as f64;
    (0..size).map(|i| i as f64 * h).collect()
}

fn log_g(alpha: f64, beta: f64, w: f64) -> f64 {
    alpha.hypot(beta) * (w - beta.atan2(alpha)).cos()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BivariateMargin {
    /// Normalized density of `x₁ - x₂`.
    pub p: DensityGrid,
    /// Factor from the marginal concentrations (unnormalized).
    pub f: DensityGrid,
    /// Factor from the direct coupling (unnormalized).
    pub g: DensityGrid,
}

/// Density of `x₁ - x₂` for a bivariate phase-difference model.
pub fn bivar_phase_diff_density(
    kappa: (f64, f64),
    mu: (f64, f64),
    coupling: (f64, f64),
    grid_size: usize,
) -> Result<BivariateMargin> {
    let (k1, k2) = kappa;
    if !(k1 >= 0.0 && k2 >= 0.0) || !k1.is_finite() || !k2.is_finite() {
        return Err(TorusError::domain("concentrations must be finite and >= 0"));
    }
    let (alpha, beta) = coupling;
    if !alpha.is_finite() || !beta.is_finite() || !mu.0.is_finite() || !mu.1.is_finite() {
        return Err(TorusError::domain("parameters must be finite"));
    }
    let dmu = mu.0 - mu.1;
    let log_f = |w: f64| {
        let r2 = k1 * k1 + k2 * k2 + 2.0 * k1 * k2 * (w - dmu).cos();
        log_bessel_i0(r2.max(0.0).sqrt()).unwrap_or(f64::NAN)
    };
    let p = DensityGrid::from_log_values(grid_size, |w| log_f(w) + log_g(alpha, beta, w))?;
    let f = DensityGrid::from_fn(grid_size, |w| log_f(w).exp())?;
    let g = DensityGrid::from_fn(grid_size, |w| log_g(alpha, beta, w).exp())?;
    Ok(BivariateMargin { p, f, g })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrivariateMargin {
    /// Normalized density of `x₁ - x₂`.
    pub p: DensityGrid,
    /// Factor from the direct coupling of nodes 1 and 2 (unnormalized).
    pub g: DensityGrid,
    /// Factor from the path through node 3 (unnormalized).
    pub h: DensityGrid,
}

/// Density of `x₁ - x₂` in a three-node phase-difference model with zero
/// marginal concentrations. Couplings are `(α, β)` for edges (1,2), (1,3),
/// (2,3).
pub fn trivar_phase_diff_density(
    c12: (f64, f64),
    c13: (f64, f64),
    c23: (f64, f64),
    grid_size: usize,
) -> Result<TrivariateMargin> {
    if [c12.0, c12.1, c13.0, c13.1, c23.0, c23.1].iter().any(|v| !v.is_finite()) {
        return Err(TorusError::domain("couplings must be finite"));
    }
    let a13 = c13.0.hypot(c13.1);
    let a23 = c23.0.hypot(c23.1);
    let s = a13 * a13 + a23 * a23;
    let t = a13 * a23;
    let u = c13.1.atan2(c13.0) - c23.1.atan2(c23.0);
    let log_h = |w: f64| log_bessel_i0((s + 2.0 * t * (w - u).cos()).max(0.0).sqrt()).unwrap_or(f64::NAN);
    let p = DensityGrid::from_log_values(grid_size, |w| log_g(c12.0, c12.1, w) + log_h(w))?;
    let g = DensityGrid::from_fn(grid_size, |w| log_g(c12.0, c12.1, w).exp())?;
    let h = DensityGrid::from_fn(grid_size, |w| log_h(w).exp())?;
    Ok(TrivariateMargin { p, g, h })
}

/// `|∫ e^{iw} p(w) dw|` for a normalized density grid.
pub fn population_plv_from_grid(p: &DensityGrid) -> Result<f64> {
    if !p.is_normalized() {
        return Err(TorusError::domain("density grid is not normalized"));
    }
    let (mut c, mut s) = (0.0, 0.0);
    for (&w, &v) in p.support().iter().zip(p.values()) {
        c += v * w.cos();
        s += v * w.sin();
    }
    Ok((c.hypot(s) * p.spacing()).min(1.0))
}

/// Writes a `w` column followed by one column per named grid.
pub fn write_grids_csv<W: Write>(out: W, grids: &[(&str, &DensityGrid)]) -> Result<()> {
    let size = grids
        .first()
        .map(|(_, g)| g.size())
        .ok_or_else(|| TorusError::domain("no grids to write"))?;
    if grids.iter().any(|(_, g)| g.size() != size) {
        return Err(TorusError::domain("grids differ in size"));
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["w"];
    header.extend(grids.iter().map(|(n, _)| *n));
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..size {
        let mut row = vec![grids[0].1.support()[i].to_string()];
        row.extend(grids.iter().map(|(_, g)| g.values()[i].to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> TorusError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => TorusError::Io(io),
        other => TorusError::Schema(format!("{other:?}")),
    }
}
