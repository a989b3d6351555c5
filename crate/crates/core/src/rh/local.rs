//! Local analysis at a marked point: generalized exponents, the formal
//! gauge and its least-term summation.

use crate::formal::{formal_diagonalize_generic, FormalConnection, FormalError};
use crate::linalg::{self, Matrix};
use crate::scalar::C64;
use crate::series::Series;

use super::connection::{MarkedPoint, RationalConnection};
use super::RhError;

/// Formal solution `G(zeta) diag(exp(-q_j(zeta)) zeta^{-lambda_j})` at a
/// marked point, in the local coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSolution {
    pub point: MarkedPoint,
    /// `nu_j` with support in `[-m, -1]`.
    pub exponents: Vec<Series<C64>>,
    /// Coefficients `G_0, G_1, ...` of the gauge.
    pub gauge: Vec<Matrix<C64>>,
    norms: Vec<f64>,
}

/// Generalized exponents at a marked point, computed from a depth-`depth`
/// truncation of the local expansion.
pub fn local_exponents(
    conn: &RationalConnection,
    point: &MarkedPoint,
    depth: i64,
    tol: f64,
) -> Result<Vec<Series<C64>>, RhError> {
    Ok(LocalSolution::compute(conn, point, depth, tol)?.exponents)
}

impl LocalSolution {
    pub fn compute(conn: &RationalConnection, point: &MarkedPoint, depth: i64, tol: f64) -> Result<Self, RhError> {
        let formal = conn.local_formal(point, depth)?;
        let sol = if point.m == 1 {
            Self::frobenius(&formal, point, tol)?
        } else {
            let diag = formal_diagonalize_generic(&formal, tol)?;
            let gauge: Vec<Matrix<C64>> = (0..depth).map(|n| diag.gauge.coefficient(n)).collect();
            let norms = gauge.iter().map(Matrix::max_abs).collect();
            Self {
                point: *point,
                exponents: diag.exponents,
                gauge,
                norms,
            }
        };
        Ok(sol.canonical_order())
    }

    /// Sorts the exponents in descending order (top coefficient first,
    /// real part before imaginary) and permutes the gauge columns to match. Eigen-solvers return eigenvalues in an order that can flip
    /// under small perturbations, which would relabel the monodromy data.
    fn canonical_order(self) -> Self {
        const EPS: f64 = 1e-9;
        let r = self.r();
        let keys: Vec<Vec<C64>> = (0..r).map(|j| self.coefficients(j)).collect();
        let cmp_num = |a: f64, b: f64| {
            if (a - b).abs() <= EPS * (1.0 + a.abs().max(b.abs())) {
                std::cmp::Ordering::Equal
            } else {
                b.total_cmp(&a)
            }
        };
        let mut perm: Vec<usize> = (0..r).collect();
        perm.sort_by(|&x, &y| {
            keys[x]
                .iter()
                .zip(&keys[y])
                .map(|(a, b)| cmp_num(a.re, b.re).then(cmp_num(a.im, b.im)))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        if perm.iter().enumerate().all(|(i, &p)| i == p) {
            return self;
        }
        let gauge = self
            .gauge
            .iter()
            .map(|g| Matrix::from_fn(r, r, |i, j| g[(i, perm[j])]))
            .collect();
        Self {
            point: self.point,
            exponents: perm.iter().map(|&p| self.exponents[p].clone()).collect(),
            gauge,
            norms: self.norms,
        }
    }

    /// Fuchsian points: `H(zeta) zeta^{-Lambda}` from the linear recursion
    /// `(lambda_i - lambda_j + n) H_n = -sum_k B_k H_{n-k}` in the residue
    /// eigenbasis. Splitting off a normalized diagonal instead would factor
    /// the convergent solution into two series of smaller radius.
    fn frobenius(formal: &FormalConnection<C64>, point: &MarkedPoint, tol: f64) -> Result<Self, RhError> {
        let r = formal.r;
        let depth = formal.depth as usize;
        let b: Vec<Matrix<C64>> = (0..depth).map(|k| formal.a.coefficient(k as i64 - 1)).collect();
        let (lambda, t) = linalg::eigen_decomposition(&b[0]);
        let scale = b[0].max_abs().max(1.0);
        for i in 0..r {
            for j in 0..r {
                if i == j {
                    continue;
                }
                let diff = lambda[j] - lambda[i];
                if diff.norm() <= tol * scale {
                    return Err(FormalError::NonGenericLeadingTerm.into());
                }
                let k = diff.re.round();
                if k >= 1.0 && (diff - k).norm() <= tol * scale {
                    return Err(FormalError::ResonantRegular { i, j, shift: k as i64 }.into());
                }
            }
        }
        let t_inv = t.inverse_tol(tol).ok_or(FormalError::NonGenericLeadingTerm)?;
        let bt: Vec<Matrix<C64>> = b.iter().map(|bk| t_inv.mul(bk).mul(&t)).collect();
        let mut h: Vec<Matrix<C64>> = vec![Matrix::identity(r)];
        for n in 1..depth {
            let mut rhs = Matrix::zeros(r, r);
            for k in 1..=n {
                rhs = rhs.add(&bt[k].mul(&h[n - k]));
            }
            h.push(Matrix::from_fn(r, r, |i, j| -rhs[(i, j)] / (lambda[i] - lambda[j] + n as f64)));
        }
        let gauge: Vec<Matrix<C64>> = h.iter().map(|hn| t.mul(hn)).collect();
        let norms = gauge.iter().map(Matrix::max_abs).collect();
        Ok(Self {
            point: *point,
            exponents: lambda.iter().map(|&l| Series::monomial(l, -1, 0)).collect(),
            gauge,
            norms,
        })
    }

    pub fn r(&self) -> usize {
        self.exponents.len()
    }

    pub fn m(&self) -> usize {
        self.point.m
    }

    /// `a_{j,k}` for `k = -m..-1`, top term first.
    pub fn coefficients(&self, j: usize) -> Vec<C64> {
        let m = self.m() as i64;
        (-m..0)
            .map(|e| self.exponents[j].coeff(e).unwrap_or(C64::new(0.0, 0.0)))
            .collect()
    }

    pub fn residues(&self) -> Vec<C64> {
        (0..self.r()).map(|j| self.coefficients(j)[self.m() - 1]).collect()
    }

    /// Diagonal of the formal monodromy, `exp(-2 pi i lambda_j)`.
    pub fn gamma_hat(&self) -> Vec<C64> {
        let two_pi_i = C64::new(0.0, std::f64::consts::TAU);
        self.residues().into_iter().map(|l| (-two_pi_i * l).exp()).collect()
    }

    /// Truncation order minimizing `|G_n| rho^n`, with that smallest term.
    /// Past the computed depth the last term stands in for the tail.
    pub fn least_term(&self, rho: f64) -> (usize, f64) {
        let mut best = (self.norms.len(), f64::INFINITY);
        let mut pw = 1.0;
        for (n, &v) in self.norms.iter().enumerate() {
            let t = v * pw;
            if n > 0 && t < best.1 {
                best = (n, t);
            }
            pw *= rho;
        }
        best
    }

    /// `sum_{n < terms} G_n zeta^n`.
    pub fn gauge_at(&self, zeta: C64, terms: usize) -> Matrix<C64> {
        let r = self.r();
        let mut acc = Matrix::zeros(r, r);
        for g in self.gauge.iter().take(terms).rev() {
            acc = acc.scale(&zeta).add(g);
        }
        acc
    }

    /// `exp(-q_j(zeta)) zeta^{-lambda_j}` with `log zeta = ln|zeta| + i arg`.
    pub fn exponential_factor(&self, zeta: C64, arg: f64) -> Vec<C64> {
        let m = self.m();
        let log = C64::new(zeta.norm().ln(), arg);
        (0..self.r())
            .map(|j| {
                let a = self.coefficients(j);
                let mut q = C64::new(0.0, 0.0);
                // a_{j,k} zeta^{k+1} / (k+1) for k = -m..-2
                for (idx, c) in a.iter().enumerate().take(m - 1) {
                    let k = idx as i32 - m as i32;
                    q += c * (log * (k + 1) as f64).exp() / (k + 1) as f64;
                }
                (-q - a[m - 1] * log).exp()
            })
            .collect()
    }

    /// Fundamental matrix at `zeta` on the branch `arg`, gauge summed to
    /// `terms` terms.
    pub fn solution(&self, zeta: C64, arg: f64, terms: usize) -> Matrix<C64> {
        let e = self.exponential_factor(zeta, arg);
        self.gauge_at(zeta, terms).mul(&Matrix::diag(&e))
    }
}
