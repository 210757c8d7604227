//! Per-sample score-matching terms and their empirical averages.

use nalgebra::{DMatrix, DVector};

use crate::data::AngleMatrix;
use crate::error::{Result, TorusError};
use crate::model::{suff_stats_into, Layout};

/// Samples per leaf of the pairwise summation tree.
const LEAF: usize = 64;

/// Nonzero entries of column `l` of the Jacobian, in increasing index order.
/// `s` holds the sufficient statistics of the sample.
fn jacobian_column(layout: &Layout, s: &[f64], l: usize, out: &mut Vec<(usize, f64)>) {
    out.clear();
    // cos x_l, sin x_l sit at 2l, 2l+1
    out.push((2 * l, -s[2 * l + 1]));
    out.push((2 * l + 1, s[2 * l]));
    for j in 0..l {
        let o = layout.coupling(j, l);
        out.push((o, s[o + 1]));
        out.push((o + 1, -s[o]));
        out.push((o + 2, -s[o + 3]));
        out.push((o + 3, s[o + 2]));
    }
    for k in l + 1..layout.d {
        let o = layout.coupling(l, k);
        out.push((o, -s[o + 1]));
        out.push((o + 1, s[o]));
        out.push((o + 2, -s[o + 3]));
        out.push((o + 3, s[o + 2]));
    }
}

/// Jacobian of the sufficient statistics, `2d² × d`, entry `(i, l)` is
/// `∂S_i/∂x_l`.
pub fn jacobian_d(x: &[f64]) -> DMatrix<f64> {
    let layout = Layout::new(x.len());
    let p = layout.n_params();
    let mut s = vec![0.0; p];
    suff_stats_into(x, &mut s);
    let mut dm = DMatrix::zeros(p, layout.d);
    let mut col = Vec::new();
    for l in 0..layout.d {
        jacobian_column(&layout, &s, l, &mut col);
        for &(i, v) in &col {
            dm[(i, l)] = v;
        }
    }
    dm
}

/// `H(x) = [S¹(x), 2 S²(x)]`, the negative divergence of the Jacobian columns.
fn h_of_stats(d: usize, s: &[f64], out: &mut [f64]) {
    out[..2 * d].copy_from_slice(&s[..2 * d]);
    for (o, v) in out[2 * d..].iter_mut().zip(&s[2 * d..]) {
        *o = 2.0 * v;
    }
}

/// `Γ(x) = D(x) D(x)ᵀ` and `H(x)` for one sample.
pub fn gamma_h_of_sample(x: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let d = x.len();
    let dm = jacobian_d(x);
    let gamma = &dm * dm.transpose();
    let mut s = vec![0.0; 2 * d * d];
    suff_stats_into(x, &mut s);
    let mut h = vec![0.0; s.len()];
    h_of_stats(d, &s, &mut h);
    (gamma, DVector::from_vec(h))
}

/// Unnormalized sums of `Γ(x)` (upper triangle only) and `H(x)`.
#[derive(Debug, Clone)]
pub(crate) struct MomentSums {
    p: usize,
    gamma_upper: Vec<f64>,
    h: Vec<f64>,
    n: usize,
}

impl MomentSums {
    fn zeros(p: usize) -> Self {
        MomentSums {
            p,
            gamma_upper: vec![0.0; p * p],
            h: vec![0.0; p],
            n: 0,
        }
    }

    fn add_rows(&mut self, data: &AngleMatrix, rows: &[usize]) {
        let layout = Layout::new(data.d());
        let p = self.p;
        let mut s = vec![0.0; p];
        let mut h = vec![0.0; p];
        let mut col = Vec::with_capacity(2 + 4 * layout.d);
        for &r in rows {
            suff_stats_into(data.row(r), &mut s);
            for l in 0..layout.d {
                jacobian_column(&layout, &s, l, &mut col);
                for (ai, &(a, va)) in col.iter().enumerate() {
                    let row = &mut self.gamma_upper[a * p..(a + 1) * p];
                    for &(b, vb) in &col[ai..] {
                        row[b] += va * vb;
                    }
                }
            }
            h_of_stats(layout.d, &s, &mut h);
            self.h.iter_mut().zip(&h).for_each(|(acc, v)| *acc += v);
        }
        self.n += rows.len();
    }

    fn merge(mut self, other: &MomentSums) -> Self {
        self.gamma_upper
            .iter_mut()
            .zip(&other.gamma_upper)
            .for_each(|(a, b)| *a += b);
        self.h.iter_mut().zip(&other.h).for_each(|(a, b)| *a += b);
        self.n += other.n;
        self
    }

    /// Pairwise summation over `rows`; the tree shape depends only on the
    /// row count, so results are reproducible.
    pub(crate) fn over_rows(data: &AngleMatrix, rows: &[usize]) -> Self {
        let p = Layout::new(data.d()).n_params();
        if rows.len() <= LEAF {
            let mut acc = MomentSums::zeros(p);
            acc.add_rows(data, rows);
            return acc;
        }
        let (left, right) = rows.split_at(rows.len() / 2);
        let (a, b) = rayon::join(|| Self::over_rows(data, left), || Self::over_rows(data, right));
        a.merge(&b)
    }

    pub(crate) fn sum(parts: &[&MomentSums]) -> Self {
        let mut acc = MomentSums::zeros(parts[0].p);
        for part in parts {
            acc = acc.merge(part);
        }
        acc
    }

    pub(crate) fn to_moments(&self) -> ScoreMatchingMoments {
        let p = self.p;
        let scale = 1.0 / self.n as f64;
        let mut gamma = DMatrix::zeros(p, p);
        for a in 0..p {
            for b in a..p {
                let v = self.gamma_upper[a * p + b] * scale;
                gamma[(a, b)] = v;
                gamma[(b, a)] = v;
            }
        }
        ScoreMatchingMoments {
            gamma_hat: gamma,
            h_hat: DVector::from_iterator(p, self.h.iter().map(|v| v * scale)),
            n: self.n,
        }
    }
}

/// Empirical `Γ̂` and `Ĥ` of the score-matching objective.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatchingMoments {
    pub gamma_hat: DMatrix<f64>,
    pub h_hat: DVector<f64>,
    pub n: usize,
}

impl ScoreMatchingMoments {
    pub fn n_params(&self) -> usize {
        self.h_hat.len()
    }

    fn check(&self, phi: &[f64]) -> Result<()> {
        if phi.len() != self.n_params() {
            return Err(TorusError::Dimension {
                expected: self.n_params(),
                got: phi.len(),
            });
        }
        Ok(())
    }

    /// `Γ̂ φ - Ĥ`.
    pub fn gradient(&self, phi: &[f64]) -> Result<DVector<f64>> {
        self.check(phi)?;
        let v = DVector::from_column_slice(phi);
        Ok(&self.gamma_hat * v - &self.h_hat)
    }
}

/// Averages `Γ(x)` and `H(x)` over the rows of `data`.
pub fn accumulate_moments(data: &AngleMatrix) -> Result<ScoreMatchingMoments> {
    if data.n() == 0 || data.d() == 0 {
        return Err(TorusError::domain("cannot accumulate moments of an empty dataset"));
    }
    let rows: Vec<usize> = (0..data.n()).collect();
    Ok(MomentSums::over_rows(data, &rows).to_moments())
}

/// `½ φᵀ Γ̂ φ - φᵀ Ĥ`.
pub fn sm_objective(phi: &[f64], moments: &ScoreMatchingMoments) -> Result<f64> {
    moments.check(phi)?;
    let v = DVector::from_column_slice(phi);
    Ok(0.5 * v.dot(&(&moments.gamma_hat * &v)) - v.dot(&moments.h_hat))
}

/// Per-sample residuals `Γ(x)φ - H(x)` restricted to `active`, one column
/// per sample.
pub(crate) fn residual_columns(data: &AngleMatrix, phi: &[f64], active: &[usize]) -> DMatrix<f64> {
    let layout = Layout::new(data.d());
    let p = layout.n_params();
    let mut out = DMatrix::zeros(active.len(), data.n());
    let mut s = vec![0.0; p];
    let mut h = vec![0.0; p];
    let mut full = vec![0.0; p];
    let mut col = Vec::with_capacity(2 + 4 * layout.d);
    for (n, x) in data.rows().enumerate() {
        suff_stats_into(x, &mut s);
        h_of_stats(layout.d, &s, &mut h);
        full.iter_mut().zip(&h).for_each(|(f, v)| *f = -v);
        for l in 0..layout.d {
            jacobian_column(&layout, &s, l, &mut col);
            let dphi: f64 = col.iter().map(|&(i, v)| v * phi[i]).sum();
            for &(i, v) in &col {
                full[i] += v * dphi;
            }
        }
        for (r, &a) in active.iter().enumerate() {
            out[(r, n)] = full[a];
        }
    }
    out
}
