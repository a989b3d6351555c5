//! Square matrices whose entries are truncated Laurent series.

use std::fmt;

use thiserror::Error;

use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::series::Series;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeriesMatrixError {
    #[error("matrix of series is singular to its known order")]
    Singular,
}

#[derive(Clone)]
pub struct SeriesMatrix<F> {
    n: usize,
    entries: Vec<Series<F>>,
}

impl<F: Scalar> SeriesMatrix<F> {
    pub fn from_entries(n: usize, entries: Vec<Series<F>>) -> Self {
        assert_eq!(entries.len(), n * n, "expected {n}x{n} entries");
        Self { n, entries }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> Series<F>) -> Self {
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(f(i, j));
            }
        }
        Self { n, entries }
    }

    pub fn zero(n: usize, order: i64) -> Self {
        Self::from_fn(n, |_, _| Series::zero(order))
    }

    pub fn identity(n: usize, order: i64) -> Self {
        Self::from_fn(n, |i, j| {
            if i == j {
                Series::one(order)
            } else {
                Series::zero(order)
            }
        })
    }

    pub fn diagonal(series: &[Series<F>]) -> Self {
        let n = series.len();
        let order = series.iter().map(Series::order).min().unwrap_or(0);
        Self::from_fn(n, |i, j| {
            if i == j {
                series[i].clone()
            } else {
                Series::zero(order)
            }
        })
    }

    /// `sum_k coeffs[k] z^(k_min + k)` with the given truncation order.
    pub fn from_coefficients(coeffs: &[Matrix<F>], k_min: i64, order: i64) -> Self {
        let n = coeffs.first().map_or(0, Matrix::rows);
        Self::from_fn(n, |i, j| {
            Series::new(k_min, coeffs.iter().map(|c| c[(i, j)].clone()).collect(), order)
        })
    }

    /// Constant-coefficient matrix as a series matrix.
    pub fn constant(m: &Matrix<F>, order: i64) -> Self {
        Self::from_coefficients(std::slice::from_ref(m), 0, order)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &Series<F> {
        &self.entries[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, s: Series<F>) {
        self.entries[i * self.n + j] = s;
    }

    pub fn entries(&self) -> &[Series<F>] {
        &self.entries
    }

    /// Smallest truncation order among the entries.
    pub fn order(&self) -> i64 {
        self.entries.iter().map(Series::order).min().unwrap_or(0)
    }

    /// Smallest valuation among the entries.
    pub fn valuation(&self) -> i64 {
        self.entries
            .iter()
            .map(Series::valuation)
            .min()
            .unwrap_or(0)
    }

    /// Matrix of `z^e` coefficients; unknown entries read as zero.
    pub fn coefficient(&self, e: i64) -> Matrix<F> {
        Matrix::from_fn(self.n, self.n, |i, j| {
            self.get(i, j).coeff(e).unwrap_or_else(F::zero)
        })
    }

    pub fn truncate(&self, order: i64) -> Self {
        self.map(|s| s.truncate(order))
    }

    pub fn map(&self, f: impl Fn(&Series<F>) -> Series<F>) -> Self {
        Self {
            n: self.n,
            entries: self.entries.iter().map(f).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_fn(self.n, |i, j| self.get(i, j) + other.get(i, j))
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::from_fn(self.n, |i, j| self.get(i, j) - other.get(i, j))
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        Self::from_fn(self.n, |i, j| {
            let mut acc: Option<Series<F>> = None;
            for k in 0..self.n {
                let term = self.get(i, k) * other.get(k, j);
                acc = Some(match acc {
                    None => term,
                    Some(a) => &a + &term,
                });
            }
            acc.unwrap_or_else(|| Series::zero(0))
        })
    }

    pub fn scale(&self, c: &Series<F>) -> Self {
        self.map(|s| s * c)
    }

    pub fn derivative(&self) -> Self {
        self.map(Series::derivative)
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self.get(j, i).clone())
    }

    /// Gaussian elimination over the Laurent field, pivoting on the entry of
    /// lowest valuation. Truncation orders propagate through every step.
    pub fn inverse(&self) -> Result<Self, SeriesMatrixError> {
        let n = self.n;
        let mut a = self.clone();
        let order = self.order();
        let mut inv = Self::identity(n, order.max(0) + 64);
        for c in 0..n {
            let pivot = (c..n)
                .filter(|&r| !a.get(r, c).is_zero())
                .min_by_key(|&r| a.get(r, c).valuation())
                .ok_or(SeriesMatrixError::Singular)?;
            a.swap_rows(pivot, c);
            inv.swap_rows(pivot, c);
            let p_inv = a
                .get(c, c)
                .inverse()
                .map_err(|_| SeriesMatrixError::Singular)?;
            for j in 0..n {
                let x = a.get(c, j) * &p_inv;
                a.set(c, j, x);
                let y = inv.get(c, j) * &p_inv;
                inv.set(c, j, y);
            }
            for r in 0..n {
                if r == c || a.get(r, c).is_zero() {
                    continue;
                }
                let f = a.get(r, c).clone();
                for j in 0..n {
                    let x = a.get(r, j) - &(&f * a.get(c, j));
                    a.set(r, j, x);
                    let y = inv.get(r, j) - &(&f * inv.get(c, j));
                    inv.set(r, j, y);
                }
            }
        }
        Ok(inv)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.n {
            self.entries.swap(a * self.n + j, b * self.n + j);
        }
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| i == j || self.get(i, j).is_zero()))
    }

    pub fn diagonal_entries(&self) -> Vec<Series<F>> {
        (0..self.n).map(|i| self.get(i, i).clone()).collect()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }

    /// Exact agreement on shared known ranges, ignoring truncation orders.
    pub fn agrees_with(&self, other: &Self) -> bool {
        self.entries
            .iter()
            .zip(&other.entries)
            .all(|(a, b)| a.compare(b).overlap_agrees)
    }
}

impl<F: Scalar> PartialEq for SeriesMatrix<F> {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.entries == other.entries
    }
}

impl<F: Scalar> fmt::Debug for SeriesMatrix<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[")?;
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|j| self.get(i, j).to_string()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Cq;

    fn s(terms: &[(i64, i64)], order: i64) -> Series<Cq> {
        Series::from_terms(terms.iter().map(|&(e, c)| (e, Cq::from_i64(c))), order)
    }

    #[test]
    fn inverse_of_unit_matrix() {
        let g = SeriesMatrix::from_entries(
            2,
            vec![s(&[(0, 1), (4, 1)], 6), s(&[(2, -1)], 6), s(&[(2, -1)], 6), s(&[(0, 1), (4, 1)], 6)],
        );
        let inv = g.inverse().unwrap();
        let prod = g.mul(&inv);
        assert_eq!(prod.order(), 6);
        assert!(prod.agrees_with(&SeriesMatrix::identity(2, 6)));
    }

    #[test]
    fn inverse_of_meromorphic_twist() {
        let g = SeriesMatrix::diagonal(&[s(&[(1, 1)], 8), s(&[(0, 1)], 8)]);
        let inv = g.inverse().unwrap();
        assert_eq!(inv.get(0, 0).valuation(), -1);
        assert!(g.mul(&inv).agrees_with(&SeriesMatrix::identity(2, 5)));
    }

    #[test]
    fn singular_is_reported() {
        let g = SeriesMatrix::from_entries(
            2,
            vec![s(&[(0, 1)], 4), s(&[(0, 2)], 4), s(&[(0, 2)], 4), s(&[(0, 4)], 4)],
        );
        assert_eq!(g.inverse(), Err(SeriesMatrixError::Singular));
    }
}
