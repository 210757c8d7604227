use crate::circular::wrap;
use crate::error::{Result, TorusError};

/// Trials × channels matrix of angles in `[0, 2π)`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleMatrix {
    n: usize,
    d: usize,
    values: Vec<f64>,
}

impl AngleMatrix {
    /// Builds a matrix from row-major values, wrapping each into `[0, 2π)`.
    pub fn from_row_major(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * d {
            return Err(TorusError::Dimension {
                expected: n * d,
                got: values.len(),
            });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(TorusError::domain(format!(
                "non-finite angle at row {}, column {}",
                bad / d.max(1),
                bad % d.max(1)
            )));
        }
        let values = values.into_iter().map(wrap).collect();
        Ok(AngleMatrix { n, d, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * d);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(TorusError::domain(format!(
                    "row {i} has {} entries, expected {d}",
                    r.len()
                )));
            }
            values.extend_from_slice(r);
        }
        Self::from_row_major(rows.len(), d, values)
    }

    /// Builds a matrix from per-channel columns of equal length.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let d = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(TorusError::domain("columns have unequal lengths"));
        }
        let mut values = Vec::with_capacity(n * d);
        for i in 0..n {
            values.extend(columns.iter().map(|c| c[i]));
        }
        Self::from_row_major(n, d, values)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.d.max(1)).take(self.n)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Wrapped differences `x_j - x_k` across trials.
    pub fn differences(&self, j: usize, k: usize) -> Vec<f64> {
        self.rows().map(|r| wrap(r[j] - r[k])).collect()
    }

    /// Wrapped sums `x_j + x_k` across trials.
    pub fn sums(&self, j: usize, k: usize) -> Vec<f64> {
        self.rows().map(|r| wrap(r[j] + r[k])).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Submatrix of the given trials, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> AngleMatrix {
        let mut values = Vec::with_capacity(idx.len() * self.d);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        AngleMatrix {
            n: idx.len(),
            d: self.d,
            values,
        }
    }

    /// Adds `c` to every angle of channel `j`.
    pub fn rotate_channel(&self, j: usize, c: f64) -> AngleMatrix {
        let mut out = self.clone();
        for i in 0..self.n {
            let v = &mut out.values[i * self.d + j];
            *v = wrap(*v + c);
        }
        out
    }

    /// Stacks `other` under `self`.
    pub fn vstack(&self, other: &AngleMatrix) -> Result<AngleMatrix> {
        if other.d != self.d {
            return Err(TorusError::Dimension {
                expected: self.d,
                got: other.d,
            });
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Ok(AngleMatrix {
            n: self.n + other.n,
            d: self.d,
            values,
        })
    }
}
