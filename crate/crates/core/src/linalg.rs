//! Small dense matrices over a [`Scalar`] field, plus the handful of complex
//! numerics (eigen-decomposition, singular values) that go through nalgebra.

use std::fmt;
use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;

use crate::scalar::{Scalar, C64};

#[derive(Clone, PartialEq)]
pub struct Matrix<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Scalar> Matrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = F::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> F) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Panics on ragged input.
    pub fn from_rows(rows: Vec<Vec<F>>) -> Self {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == m), "ragged matrix rows");
        Self {
            rows: n,
            cols: m,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn diag(entries: &[F]) -> Self {
        let mut m = Self::zeros(entries.len(), entries.len());
        for (i, e) in entries.iter().enumerate() {
            m[(i, i)] = e.clone();
        }
        m
    }

    /// Elementary matrix with a single 1 at `(i, j)`.
    pub fn unit(n: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(n, n);
        m[(i, j)] = F::one();
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> Vec<F> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn col(&self, j: usize) -> Vec<F> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<F>> {
        (0..self.rows).map(|i| self.row(i)).collect()
    }

    pub fn entries(&self) -> &[F] {
        &self.data
    }

    pub fn diagonal(&self) -> Vec<F> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)].clone()).collect()
    }

    pub fn map<G: Scalar>(&self, f: impl Fn(&F) -> G) -> Matrix<G> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    pub fn scale(&self, c: &F) -> Self {
        self.map(|x| x.clone() * c.clone())
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a.clone() - b.clone())
                .collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matrix product shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = &other[(k, j)];
                    if b.is_zero() {
                        continue;
                    }
                    out[(i, j)] = out[(i, j)].clone() + a.clone() * b.clone();
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[F]) -> Vec<F> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                (0..self.cols).fold(F::zero(), |acc, j| acc + self[(i, j)].clone() * v[j].clone())
            })
            .collect()
    }

    /// Product of a sequence, left to right.
    pub fn product<'a>(n: usize, factors: impl IntoIterator<Item = &'a Self>) -> Self {
        factors
            .into_iter()
            .fold(Self::identity(n), |acc, m| acc.mul(m))
    }

    /// Gauss-Jordan inverse with partial pivoting; `None` when singular.
    pub fn inverse(&self) -> Option<Self> {
        self.inverse_tol(0.0)
    }

    pub fn inverse_tol(&self, tol: f64) -> Option<Self> {
        assert!(self.is_square());
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        for c in 0..n {
            let p = (c..n).max_by(|&x, &y| {
                a[(x, c)]
                    .magnitude()
                    .partial_cmp(&a[(y, c)].magnitude())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })?;
            if a[(p, c)].negligible(tol * scale) || a[(p, c)].is_zero() {
                return None;
            }
            a.swap_rows(p, c);
            inv.swap_rows(p, c);
            let pivot_inv = F::one() / a[(c, c)].clone();
            for j in 0..n {
                a[(c, j)] = a[(c, j)].clone() * pivot_inv.clone();
                inv[(c, j)] = inv[(c, j)].clone() * pivot_inv.clone();
            }
            for i in 0..n {
                if i == c || a[(i, c)].is_zero() {
                    continue;
                }
                let f = a[(i, c)].clone();
                for j in 0..n {
                    let t = a[(c, j)].clone();
                    a[(i, j)] = a[(i, j)].clone() - f.clone() * t;
                    let t = inv[(c, j)].clone();
                    inv[(i, j)] = inv[(i, j)].clone() - f.clone() * t;
                }
            }
        }
        Some(inv)
    }

    pub fn det(&self) -> F {
        assert!(self.is_square());
        let n = self.rows;
        let mut a = self.clone();
        let mut det = F::one();
        for c in 0..n {
            let p = (c..n).max_by(|&x, &y| {
                a[(x, c)]
                    .magnitude()
                    .partial_cmp(&a[(y, c)].magnitude())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            let Some(p) = p else { return F::zero() };
            if a[(p, c)].is_zero() {
                return F::zero();
            }
            if p != c {
                a.swap_rows(p, c);
                det = -det;
            }
            let pivot = a[(c, c)].clone();
            det = det * pivot.clone();
            for i in c + 1..n {
                if a[(i, c)].is_zero() {
                    continue;
                }
                let f = a[(i, c)].clone() / pivot.clone();
                for j in c..n {
                    let t = a[(c, j)].clone();
                    a[(i, j)] = a[(i, j)].clone() - f.clone() * t;
                }
            }
        }
        det
    }

    pub fn trace(&self) -> F {
        self.diagonal().into_iter().fold(F::zero(), |a, b| a + b)
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    /// Reduced row echelon form. Returns the reduced matrix and pivot columns.
    /// Entries of magnitude `<= tol * max|a|` count as zero (exact fields
    /// use exact zero tests).
    pub fn rref(&self, tol: f64) -> (Self, Vec<usize>) {
        let mut a = self.clone();
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut pivots = Vec::new();
        let mut row = 0;
        for c in 0..self.cols {
            if row == self.rows {
                break;
            }
            let p = (row..self.rows)
                .max_by(|&x, &y| {
                    a[(x, c)]
                        .magnitude()
                        .partial_cmp(&a[(y, c)].magnitude())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .unwrap();
            if a[(p, c)].negligible(tol * scale) {
                if !F::EXACT {
                    for i in row..self.rows {
                        a[(i, c)] = F::zero();
                    }
                }
                continue;
            }
            a.swap_rows(p, row);
            let pivot_inv = F::one() / a[(row, c)].clone();
            for j in c..self.cols {
                a[(row, j)] = a[(row, j)].clone() * pivot_inv.clone();
            }
            for i in 0..self.rows {
                if i == row || a[(i, c)].is_zero() {
                    continue;
                }
                let f = a[(i, c)].clone();
                for j in c..self.cols {
                    let t = a[(row, j)].clone();
                    a[(i, j)] = a[(i, j)].clone() - f.clone() * t;
                }
            }
            pivots.push(c);
            row += 1;
        }
        (a, pivots)
    }

    pub fn rank(&self, tol: f64) -> usize {
        self.rref(tol).1.len()
    }

    /// Basis of the right null space.
    pub fn nullspace(&self, tol: f64) -> Vec<Vec<F>> {
        let (r, pivots) = self.rref(tol);
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut v = vec![F::zero(); self.cols];
                v[f] = F::one();
                for (row, &pc) in pivots.iter().enumerate() {
                    v[pc] = -r[(row, f)].clone();
                }
                v
            })
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.magnitude()).fold(0.0, f64::max)
    }

    /// Max-abs entry of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.sub(other).max_abs()
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        self.is_square() && self.max_abs_diff(&Self::identity(self.rows)) <= tol
    }

    pub fn to_c64(&self) -> Matrix<C64> {
        self.map(|x| x.to_c64())
    }

    /// Commutator `self*other - other*self`.
    pub fn commutator(&self, other: &Self) -> Self {
        self.mul(other).sub(&other.mul(self))
    }

    /// Flattened row-major entries (used for Burnside span checks).
    pub fn to_vec(&self) -> Vec<F> {
        self.data.clone()
    }
}

impl<F> Index<(usize, usize)> for Matrix<F> {
    type Output = F;
    fn index(&self, (i, j): (usize, usize)) -> &F {
        &self.data[i * self.cols + j]
    }
}

impl<F> IndexMut<(usize, usize)> for Matrix<F> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut F {
        &mut self.data[i * self.cols + j]
    }
}

impl<F: Scalar> fmt::Debug for Matrix<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[")?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// Complex matrices serialize as rows of `[re, im]` pairs.
impl serde::Serialize for Matrix<C64> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> serde::Deserialize<'de> for Matrix<C64> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let rows: Vec<Vec<C64>> = Vec::deserialize(d)?;
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(D::Error::custom("ragged matrix rows"));
        }
        Ok(Matrix::from_rows(rows))
    }
}

pub fn to_nalgebra(m: &Matrix<C64>) -> DMatrix<C64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

pub fn from_nalgebra(m: &DMatrix<C64>) -> Matrix<C64> {
    Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Singular values in decreasing order.
pub fn singular_values(m: &Matrix<C64>) -> Vec<f64> {
    if m.rows() == 0 || m.cols() == 0 {
        return Vec::new();
    }
    let svd = to_nalgebra(m).svd(false, false);
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

/// Numerical rank: singular values above `rel_tol * sigma_max`.
pub fn numerical_rank(m: &Matrix<C64>, rel_tol: f64) -> usize {
    let s = singular_values(m);
    let Some(&smax) = s.first() else { return 0 };
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > rel_tol * smax).count()
}

/// Eigenvalues of a complex square matrix (Schur form).
pub fn eigenvalues(m: &Matrix<C64>) -> Vec<C64> {
    let n = m.rows();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![m[(0, 0)]];
    }
    if n == 2 {
        // Closed form, numerically stable variant.
        let tr = m[(0, 0)] + m[(1, 1)];
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        let disc = (tr * tr * 0.25 - det).sqrt();
        let half = tr * 0.5;
        let l1 = if (half + disc).norm() >= (half - disc).norm() {
            half + disc
        } else {
            half - disc
        };
        let l2 = if l1.norm() > 0.0 { det / l1 } else { half - disc };
        return vec![l1, l2];
    }
    let schur = nalgebra::Schur::new(to_nalgebra(m));
    let (_, t) = schur.unpack();
    (0..n).map(|i| t[(i, i)]).collect()
}

/// Unit eigenvector for `lambda`: right singular vector of the smallest
/// singular value of `m - lambda I`.
pub fn eigenvector(m: &Matrix<C64>, lambda: C64) -> Vec<C64> {
    let n = m.rows();
    let shifted = m.sub(&Matrix::identity(n).scale(&lambda));
    let svd = to_nalgebra(&shifted).svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
        .unwrap();
    (0..n).map(|j| v_t[(idx, j)].conj()).collect()
}

/// `m = P diag(lambda) P^{-1}` for a diagonalizable matrix; eigenvectors are
/// the columns of `P`, scaled so their largest entry is 1.
pub fn eigen_decomposition(m: &Matrix<C64>) -> (Vec<C64>, Matrix<C64>) {
    let lambdas = eigenvalues(m);
    let n = m.rows();
    let mut p = Matrix::zeros(n, n);
    for (j, &l) in lambdas.iter().enumerate() {
        let v = eigenvector(m, l);
        let big = v
            .iter()
            .copied()
            .max_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap())
            .unwrap_or(C64::new(1.0, 0.0));
        for i in 0..n {
            p[(i, j)] = v[i] / big;
        }
    }
    (lambdas, p)
}

/// Characteristic polynomial coefficients `c_0..c_n` of `det(x I - m)`
/// (monic, `c_n = 1`) via Faddeev-LeVerrier. Exact over exact fields.
pub fn characteristic_polynomial<F: Scalar>(m: &Matrix<F>) -> Vec<F> {
    let n = m.rows();
    let mut coeffs = vec![F::zero(); n + 1];
    coeffs[n] = F::one();
    let mut mk = Matrix::<F>::zeros(n, n);
    let ident = Matrix::<F>::identity(n);
    for k in 1..=n {
        let prev = coeffs[n - k + 1].clone();
        mk = m.mul(&mk).add(&ident.scale(&prev));
        let tr = m.mul(&mk).trace();
        coeffs[n - k] = -(tr / F::from_i64(k as i64));
    }
    coeffs
}

pub fn eval_poly<F: Scalar>(coeffs: &[F], x: &F) -> F {
    coeffs
        .iter()
        .rev()
        .fold(F::zero(), |acc, c| acc * x.clone() + c.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Cq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn exact_inverse_and_det() {
        let m = Matrix::from_rows(vec![
            vec![Cq::from_i64(2), Cq::from_i64(1)],
            vec![Cq::from_i64(7), Cq::from_i64(4)],
        ]);
        assert_eq!(m.det(), Cq::from_i64(1));
        let inv = m.inverse().unwrap();
        assert_eq!(m.mul(&inv), Matrix::identity(2));
        let singular = Matrix::from_rows(vec![
            vec![Cq::from_i64(1), Cq::from_i64(2)],
            vec![Cq::from_i64(2), Cq::from_i64(4)],
        ]);
        assert!(singular.inverse().is_none());
        assert_eq!(singular.det(), Cq::zero());
        assert_eq!(singular.rank(0.0), 1);
        let ns = singular.nullspace(0.0);
        assert_eq!(ns.len(), 1);
        assert!(singular.mul_vec(&ns[0]).iter().all(|x| x.is_zero()));
    }

    #[test]
    fn characteristic_polynomial_matches_det() {
        let m = Matrix::from_rows(vec![
            vec![Cq::from_i64(1), Cq::from_i64(2), Cq::from_i64(0)],
            vec![Cq::from_i64(3), Cq::from_i64(-1), Cq::from_i64(4)],
            vec![Cq::from_i64(0), Cq::from_i64(5), Cq::from_i64(2)],
        ]);
        let p = characteristic_polynomial(&m);
        for x in [-2i64, 0, 3, 7] {
            let xi = Matrix::identity(3).scale(&Cq::from_i64(x)).sub(&m);
            assert_eq!(eval_poly(&p, &Cq::from_i64(x)), xi.det());
        }
    }

    #[test]
    fn complex_eigen_decomposition() {
        let m = Matrix::from_rows(vec![
            vec![c(1.0, 1.0), c(2.0, 0.0), c(0.0, 0.5)],
            vec![c(0.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0)],
            vec![c(0.3, 0.0), c(0.0, 0.0), c(2.0, -1.0)],
        ]);
        let (l, p) = eigen_decomposition(&m);
        let recon = p.mul(&Matrix::diag(&l)).mul(&p.inverse().unwrap());
        assert!(recon.max_abs_diff(&m) < 1e-12);
    }

    #[test]
    fn rank_by_svd() {
        let m = Matrix::from_rows(vec![
            vec![c(1.0, 0.0), c(2.0, 0.0)],
            vec![c(2.0, 0.0), c(4.0, 0.0)],
            vec![c(0.0, 1.0), c(0.0, 2.0)],
        ]);
        assert_eq!(numerical_rank(&m, 1e-10), 1);
    }
}
