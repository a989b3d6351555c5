//! Formal connections over `C[[z]]/(z^N)`.
//!
//! A connection of pole order `m` and depth `N` acts as
//! `v -> dv + A v dz` where `A` has valuation `>= -m` and is known through
//! exponent `N - m - 1`. Gauge transformations act by
//! `A -> g^{-1} A g + g^{-1} g'`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{self, Matrix};
use crate::scalar::{Scalar, C64};
use crate::series::{Series, SeriesError};
use crate::series_matrix::SeriesMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormalError {
    #[error("exponent must be supported in [-m, -1], found a term of exponent {0}")]
    BadExponentSupport(i64),
    #[error("gauge matrix is not invertible to its known order")]
    NonInvertibleGauge,
    #[error("leading coefficient has a repeated eigenvalue")]
    NonGenericLeadingTerm,
    #[error("residue eigenvalues {i} and {j} differ by the integer {shift}")]
    ResonantRegular { i: usize, j: usize, shift: i64 },
    #[error("leading eigenvalue is not a Gaussian rational; use float mode")]
    IrrationalEigenvalue,
    #[error("no invertible intertwiner exists modulo z^{0}")]
    NoIsomorphism(i64),
    #[error("depth {depth} is below pole order {m}")]
    DepthBelowPoleOrder { depth: i64, m: usize },
    #[error("graded residue {0:?} is outside 0 <= Re < 1")]
    ResidueOutOfRange(C64),
    #[error("connection has no filtration")]
    NotFiltered,
    #[error("invalid filtration: {0}")]
    BadFiltration(String),
    #[error("entry ({i},{j}) has valuation {valuation} below -m = -{m}")]
    PoleOrderExceeded { i: usize, j: usize, valuation: i64, m: usize },
    #[error("operation needs rank {expected}, got {got}")]
    WrongRank { expected: usize, got: usize },
    #[error(transparent)]
    Series(#[from] SeriesError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FormalConnection<F: Scalar> {
    pub r: usize,
    pub m: usize,
    /// Truncation depth `N`: the module is `C[[z]]/(z^N)`.
    pub depth: i64,
    pub a: SeriesMatrix<F>,
    /// `filtration[j]` lists the standard basis vectors spanning `l_j`, for
    /// `j = 0..=r` with `l_0` everything and `l_r` empty.
    pub filtration: Option<Vec<Vec<usize>>>,
}

impl<F: Scalar> FormalConnection<F> {
    /// Truncates `a` to order `depth - m` and checks the pole order.
    pub fn new(m: usize, depth: i64, a: SeriesMatrix<F>) -> Result<Self, FormalError> {
        if depth < m as i64 {
            return Err(FormalError::DepthBelowPoleOrder { depth, m });
        }
        let r = a.dim();
        let a = a.truncate(depth - m as i64);
        for i in 0..r {
            for j in 0..r {
                let v = a.get(i, j).valuation();
                if v < -(m as i64) {
                    return Err(FormalError::PoleOrderExceeded { i, j, valuation: v, m });
                }
            }
        }
        Ok(Self {
            r,
            m,
            depth,
            a,
            filtration: None,
        })
    }

    pub fn with_filtration(mut self, filtration: Vec<Vec<usize>>) -> Result<Self, FormalError> {
        self.check_filtration(&filtration)?;
        self.filtration = Some(filtration);
        Ok(self)
    }

    /// The flag `l_j = span(e_0, ..., e_{r-1-j})`, stable under upper
    /// triangular connection matrices.
    pub fn standard_flag(r: usize) -> Vec<Vec<usize>> {
        (0..=r).map(|j| (0..r - j).collect()).collect()
    }

    fn check_filtration(&self, f: &[Vec<usize>]) -> Result<(), FormalError> {
        let r = self.r;
        if f.len() != r + 1 {
            return Err(FormalError::BadFiltration(format!("expected {} steps, got {}", r + 1, f.len())));
        }
        for (j, step) in f.iter().enumerate() {
            if step.len() != r - j {
                return Err(FormalError::BadFiltration(format!("l_{j} must have rank {}", r - j)));
            }
            if step.iter().any(|&k| k >= r) {
                return Err(FormalError::BadFiltration(format!("l_{j} names a basis vector out of range")));
            }
            if j > 0 && !step.iter().all(|k| f[j - 1].contains(k)) {
                return Err(FormalError::BadFiltration(format!("l_{j} is not contained in l_{}", j - 1)));
            }
            // A-stability: columns in l_j have no component outside l_j.
            for &col in step {
                for row in 0..r {
                    if !step.contains(&row) && !self.a.get(row, col).is_zero() {
                        return Err(FormalError::BadFiltration(format!(
                            "l_{j} is not preserved: entry ({row},{col}) is nonzero"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Exponents of the graded pieces `l_j / l_{j+1}`, `j = 0..r-1`.
    pub fn graded_exponents(&self) -> Result<Vec<Series<F>>, FormalError> {
        let f = self.filtration.as_ref().ok_or(FormalError::NotFiltered)?;
        Ok((0..self.r)
            .map(|j| {
                let k = *f[j].iter().find(|k| !f[j + 1].contains(k)).expect("rank drops by one");
                polar(self.a.get(k, k))
            })
            .collect())
    }

    /// `z^m A`, holomorphic and known modulo `z^depth`.
    pub fn scaled_matrix(&self) -> SeriesMatrix<F> {
        self.a.map(|s| s.shift(self.m as i64))
    }

    /// Coefficient matrices `B_0..B_{depth-1}` of `z^m A`.
    fn scaled_coefficients(&self) -> Vec<Matrix<F>> {
        let m = self.m as i64;
        (0..self.depth).map(|k| self.a.coefficient(k - m)).collect()
    }
}

/// Polar part as an exactly known series of order 0.
fn polar<F: Scalar>(s: &Series<F>) -> Series<F> {
    Series::from_terms(s.terms().filter(|(e, _)| *e < 0).map(|(e, c)| (e, c.clone())), 0)
}

/// `V(nu, r)`: `nu I + z^{-1} J` with `J e_j = e_{j-1}`.
pub fn make_v<F: Scalar>(nu: &Series<F>, r: usize, depth: i64) -> Result<FormalConnection<F>, FormalError> {
    if let Some((e, _)) = nu.terms().find(|(e, _)| *e >= 0) {
        return Err(FormalError::BadExponentSupport(e));
    }
    let m = (-nu.valuation()).max(1) as usize;
    let order = depth - m as i64;
    let nu = polar(nu).truncate(order);
    let a = SeriesMatrix::from_fn(r, |i, j| {
        if i == j {
            nu.clone()
        } else if j == i + 1 {
            Series::monomial(F::one(), -1, order)
        } else {
            Series::zero(order)
        }
    });
    FormalConnection::new(m, depth, a)?.with_filtration(FormalConnection::<F>::standard_flag(r))
}

/// `A' = g^{-1} A g + g^{-1} g'`. The filtration survives when `g` preserves
/// every step of it.
pub fn gauge<F: Scalar>(conn: &FormalConnection<F>, g: &SeriesMatrix<F>) -> Result<FormalConnection<F>, FormalError> {
    let g_inv = g.inverse().map_err(|_| FormalError::NonInvertibleGauge)?;
    let inner = conn.a.mul(g).add(&g.derivative());
    let a = g_inv.mul(&inner).truncate(conn.depth - conn.m as i64);
    let m = (conn.m as i64).max(-a.valuation()) as usize;
    let depth = (a.order() + m as i64).min(conn.depth);
    let mut out = FormalConnection::new(m, depth, a)?;
    if let Some(f) = &conn.filtration {
        let keeps = f.iter().all(|step| {
            step.iter()
                .all(|&col| (0..conn.r).all(|row| step.contains(&row) || g.get(row, col).is_zero()))
        });
        if keeps {
            out.filtration = Some(f.clone());
        }
    }
    Ok(out)
}

/// Splits a rank-one connection into its polar exponent and the gauge
/// `exp(-integral of the regular part)` that removes the rest.
pub fn rank1_polar_normalize<F: Scalar>(conn: &FormalConnection<F>) -> Result<(Series<F>, SeriesMatrix<F>), FormalError> {
    if conn.r != 1 {
        return Err(FormalError::WrongRank { expected: 1, got: conn.r });
    }
    let a = conn.a.get(0, 0);
    let g = exp_neg_integral(&a.regular_part(), conn.depth)?;
    Ok((polar(a), SeriesMatrix::from_entries(1, vec![g])))
}

/// `exp(-integral reg)` with `reg` read as a polynomial, known modulo
/// `z^depth`.
fn exp_neg_integral<F: Scalar>(reg: &Series<F>, depth: i64) -> Result<Series<F>, FormalError> {
    let known: Vec<(i64, F)> = reg.terms().map(|(e, c)| (e, c.clone())).collect();
    let poly = Series::from_terms(known, depth - 1);
    Ok((-poly.antiderivative()?).exp_series()?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Diagonalization<F: Scalar> {
    /// Polar exponents `nu_j`, exactly known (order 0).
    pub exponents: Vec<Series<F>>,
    /// Unit gauge with `gauge(conn, g)` diagonal with entries `nu_j`.
    pub gauge: SeriesMatrix<F>,
}

/// Eigenvalues and eigenvector matrix of `b0`, ordered so a diagonal input
/// gives the identity. Exact fields require Gaussian-rational eigenvalues.
fn leading_eigen<F: Scalar>(b0: &Matrix<F>, tol: f64) -> Result<(Vec<F>, Matrix<F>), FormalError> {
    let r = b0.rows();
    let numeric = b0.to_c64();
    let approx = linalg::eigenvalues(&numeric);
    let scale = numeric.max_abs().max(1.0);
    for i in 0..r {
        for j in i + 1..r {
            if (approx[i] - approx[j]).norm() <= tol * scale {
                return Err(FormalError::NonGenericLeadingTerm);
            }
        }
    }
    let charpoly = F::EXACT.then(|| linalg::characteristic_polynomial(b0));
    let mut pairs: Vec<(usize, F, Vec<F>)> = Vec::with_capacity(r);
    for &l in &approx {
        let lambda = F::approximate(l);
        let vec = if let Some(cp) = &charpoly {
            if !linalg::eval_poly(cp, &lambda).is_zero() {
                return Err(FormalError::IrrationalEigenvalue);
            }
            let shifted = b0.sub(&Matrix::identity(r).scale(&lambda));
            shifted
                .nullspace(0.0)
                .into_iter()
                .next()
                .ok_or(FormalError::NonGenericLeadingTerm)?
        } else {
            linalg::eigenvector(&numeric, l).into_iter().map(F::approximate).collect()
        };
        let lead = (0..r)
            .max_by(|&a, &b| vec[a].magnitude().total_cmp(&vec[b].magnitude()).then(b.cmp(&a)))
            .expect("r >= 1");
        let inv = F::one() / vec[lead].clone();
        pairs.push((lead, lambda, vec.into_iter().map(|x| x * inv.clone()).collect()));
    }
    pairs.sort_by_key(|p| p.0);
    let lambdas = pairs.iter().map(|p| p.1.clone()).collect();
    let t = Matrix::from_fn(r, r, |i, j| pairs[j].2[i].clone());
    Ok((lambdas, t))
}

/// Order-by-order splitting: diagonalize the leading term, then kill
/// off-diagonal terms one order at a time, then remove regular diagonal
/// parts line by line.
pub fn formal_diagonalize_generic<F: Scalar>(
    conn: &FormalConnection<F>,
    tol: f64,
) -> Result<Diagonalization<F>, FormalError> {
    let r = conn.r;
    let m = conn.m;
    let depth = conn.depth;
    let b = conn.scaled_coefficients();
    let (lambda0, t) = leading_eigen(&b[0], tol)?;
    let t_inv = t.inverse_tol(tol).ok_or(FormalError::NonGenericLeadingTerm)?;
    if m == 1 {
        for i in 0..r {
            for j in 0..r {
                let diff = (lambda0[j].clone() - lambda0[i].clone()).to_c64();
                let k = diff.re.round();
                if i != j && k >= 1.0 && k < depth as f64 && F::approximate(C64::new(k, 0.0)).near(&(lambda0[j].clone() - lambda0[i].clone()), tol) {
                    return Err(FormalError::ResonantRegular { i, j, shift: k as i64 });
                }
            }
        }
    }
    // Work in the eigenbasis of the leading term.
    let bt: Vec<Matrix<F>> = b.iter().map(|bk| t_inv.mul(bk).mul(&t)).collect();
    let n_max = depth as usize;
    let mut gs: Vec<Matrix<F>> = vec![Matrix::identity(r)];
    let mut lams: Vec<Vec<F>> = vec![lambda0.clone()];
    for n in 1..n_max {
        let mut rn = Matrix::zeros(r, r);
        for k in 1..=n {
            rn = rn.add(&bt[k].mul(&gs[n - k]));
        }
        if m >= 2 && n + 1 > m {
            let idx = n + 1 - m;
            rn = rn.add(&gs[idx].scale(&F::from_i64(idx as i64)));
        }
        for k in 1..n {
            rn = rn.sub(&gs[n - k].mul(&Matrix::diag(&lams[k])));
        }
        let shift = if m == 1 { F::from_i64(n as i64) } else { F::zero() };
        let mut gn = Matrix::zeros(r, r);
        for i in 0..r {
            for j in 0..r {
                if i != j {
                    let denom = lambda0[i].clone() - lambda0[j].clone() + shift.clone();
                    gn[(i, j)] = -(rn[(i, j)].clone() / denom);
                }
            }
        }
        lams.push(rn.diagonal());
        gs.push(gn);
    }
    let order = depth - m as i64;
    let g_series = SeriesMatrix::from_coefficients(&gs, 0, depth);
    let mut exponents = Vec::with_capacity(r);
    let mut line_gauges = Vec::with_capacity(r);
    for j in 0..r {
        let diag_entry = Series::new(-(m as i64), lams.iter().map(|l| l[j].clone()).collect(), order);
        exponents.push(polar(&diag_entry));
        line_gauges.push(exp_neg_integral(&diag_entry.regular_part(), depth)?);
    }
    let gauge = SeriesMatrix::constant(&t, depth)
        .mul(&g_series)
        .mul(&SeriesMatrix::diagonal(&line_gauges));
    Ok(Diagonalization { exponents, gauge })
}

/// Outcome of the depth-`N` isomorphism test.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMatch<F: Scalar> {
    /// An invertible `P` with `z^m P' + A_W P - P A_V = 0 mod z^N`.
    pub intertwiner: SeriesMatrix<F>,
    /// `sigma` with `nu^V_i = nu^W_sigma(i)`, when the graded exponent lists
    /// agree up to order.
    pub permutation: Option<Vec<usize>>,
    /// `N >= r^2 m`, where equal exponent multisets are guaranteed.
    pub depth_guaranteed: bool,
    pub exponents_v: Vec<Series<F>>,
    pub exponents_w: Vec<Series<F>>,
}

/// Searches for an invertible horizontal map `V -> W` modulo `z^N` by a
/// dense linear solve on its coefficients, then compares graded exponents.
pub fn exponents_match_at_depth<F: Scalar>(
    v: &FormalConnection<F>,
    w: &FormalConnection<F>,
    seed: u64,
    tol: f64,
) -> Result<DepthMatch<F>, FormalError> {
    if v.r != w.r {
        return Err(FormalError::WrongRank { expected: v.r, got: w.r });
    }
    let r = v.r;
    let m = v.m.max(w.m);
    let depth = v.depth.min(w.depth);
    if depth < m as i64 {
        return Err(FormalError::DepthBelowPoleOrder { depth, m });
    }
    let ev = v.graded_exponents()?;
    let ew = w.graded_exponents()?;
    for nu in ev.iter().chain(&ew) {
        let res = nu.coeff(-1).unwrap_or_else(F::zero).to_c64();
        if res.re < -tol || res.re >= 1.0 - tol {
            return Err(FormalError::ResidueOutOfRange(res));
        }
    }
    let nd = depth as usize;
    let bv: Vec<Matrix<F>> = (0..nd).map(|k| v.a.coefficient(k as i64 - m as i64)).collect();
    let bw: Vec<Matrix<F>> = (0..nd).map(|k| w.a.coefficient(k as i64 - m as i64)).collect();
    // Unknown (a, b, e) -> column (e * r + a) * r + b.
    let col = |a: usize, b: usize, e: usize| (e * r + a) * r + b;
    let unknowns = r * r * nd;
    let mut sys = Matrix::<F>::zeros(unknowns, unknowns);
    for k in 0..nd {
        for a in 0..r {
            for bb in 0..r {
                let row = col(a, bb, k);
                // z^m P' contributes (k - m + 1) P_{k-m+1}.
                if k + 1 >= m {
                    let e = k + 1 - m;
                    if e >= 1 {
                        sys[(row, col(a, bb, e))] = sys[(row, col(a, bb, e))].clone() + F::from_i64(e as i64);
                    }
                }
                for s in 0..=k {
                    for c in 0..r {
                        let aw = &bw[s][(a, c)];
                        if !aw.is_zero() {
                            let idx = col(c, bb, k - s);
                            sys[(row, idx)] = sys[(row, idx)].clone() + aw.clone();
                        }
                        let av = &bv[s][(c, bb)];
                        if !av.is_zero() {
                            let idx = col(a, c, k - s);
                            sys[(row, idx)] = sys[(row, idx)].clone() - av.clone();
                        }
                    }
                }
            }
        }
    }
    let basis = sys.nullspace(tol);
    if basis.is_empty() {
        return Err(FormalError::NoIsomorphism(depth));
    }
    // Random combinations: a nonzero determinant polynomial survives a
    // random integer point with high probability.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found = None;
    for _ in 0..8 {
        let weights: Vec<F> = basis.iter().map(|_| F::from_i64(rng.gen_range(-1000..=1000))).collect();
        let mut comb = vec![F::zero(); unknowns];
        for (wgt, vecb) in weights.iter().zip(&basis) {
            for (acc, x) in comb.iter_mut().zip(vecb) {
                *acc = acc.clone() + wgt.clone() * x.clone();
            }
        }
        let p0 = Matrix::from_fn(r, r, |a, b| comb[col(a, b, 0)].clone());
        let det = p0.det();
        let nonzero = if F::EXACT { !det.is_zero() } else { det.magnitude() > tol * p0.max_abs().powi(r as i32).max(tol) };
        if nonzero {
            found = Some(comb);
            break;
        }
    }
    let comb = found.ok_or(FormalError::NoIsomorphism(depth))?;
    let coeffs: Vec<Matrix<F>> = (0..nd)
        .map(|e| Matrix::from_fn(r, r, |a, b| comb[col(a, b, e)].clone()))
        .collect();
    let intertwiner = SeriesMatrix::from_coefficients(&coeffs, 0, depth);
    Ok(DepthMatch {
        intertwiner,
        permutation: match_permutation(&ev, &ew, tol),
        depth_guaranteed: depth >= (r * r * m) as i64,
        exponents_v: ev,
        exponents_w: ew,
    })
}

/// `sigma` with `a[i] == b[sigma(i)]`, if one exists.
pub fn match_permutation<F: Scalar>(a: &[Series<F>], b: &[Series<F>], tol: f64) -> Option<Vec<usize>> {
    let mut used = vec![false; b.len()];
    let mut sigma = Vec::with_capacity(a.len());
    for x in a {
        let j = (0..b.len()).find(|&j| !used[j] && x.compare_approx(&b[j], tol).overlap_agrees)?;
        used[j] = true;
        sigma.push(j);
    }
    Some(sigma)
}

/// Multiset equality of exponent lists.
pub fn same_exponents<F: Scalar>(a: &[Series<F>], b: &[Series<F>], tol: f64) -> bool {
    a.len() == b.len() && match_permutation(a, b, tol).is_some()
}

/// Twists the graded lines by powers of `z` so every graded residue has
/// `0 <= Re < 1`. Returns the new connection and the diagonal gauge used.
pub fn normalize_residues<F: Scalar>(
    conn: &FormalConnection<F>,
) -> Result<(FormalConnection<F>, SeriesMatrix<F>), FormalError> {
    let f = conn.filtration.as_ref().ok_or(FormalError::NotFiltered)?;
    let depth = conn.depth;
    let mut shifts = vec![0i64; conn.r];
    for j in 0..conn.r {
        let k = *f[j].iter().find(|k| !f[j + 1].contains(k)).expect("rank drops by one");
        let res = conn.a.get(k, k).coeff(-1).unwrap_or_else(F::zero).to_c64();
        // Gauge by z^s on a line adds s to its residue.
        shifts[k] = -(res.re.floor() as i64);
    }
    let g = SeriesMatrix::diagonal(
        &shifts
            .iter()
            .map(|&s| Series::monomial(F::one(), s, depth + s))
            .collect::<Vec<_>>(),
    );
    Ok((gauge(conn, &g)?, g))
}

/// The pair of presentations with equal top terms whose exponent lists
/// disagree at depth 6, and the gauge carrying the first to the second.
pub fn counterexample_pair<F: Scalar>() -> (FormalConnection<F>, FormalConnection<F>, SeriesMatrix<F>) {
    counterexample_pair_at(6)
}

/// Same matrices at an arbitrary depth `N >= 6`.
pub fn counterexample_pair_at<F: Scalar>(depth: i64) -> (FormalConnection<F>, FormalConnection<F>, SeriesMatrix<F>) {
    let order = depth - 6;
    let s = |terms: &[(i64, i64)], order: i64| Series::from_terms(terms.iter().map(|&(e, c)| (e, F::from_i64(c))), order);
    let first = SeriesMatrix::from_entries(
        2,
        vec![
            s(&[(-6, 1), (-2, 1)], order),
            s(&[(-4, 1)], order),
            s(&[], order),
            s(&[(-6, 1), (-2, -1)], order),
        ],
    );
    let second = SeriesMatrix::from_entries(
        2,
        vec![s(&[(-6, 1)], order), s(&[(-4, 1)], order), s(&[], order), s(&[(-6, 1)], order)],
    );
    let g = SeriesMatrix::from_entries(
        2,
        vec![
            s(&[(0, 1), (4, 1)], depth),
            s(&[(2, -1)], depth),
            s(&[(2, -1)], depth),
            s(&[(0, 1), (4, 1)], depth),
        ],
    );
    let flag = FormalConnection::<F>::standard_flag(2);
    let v = FormalConnection::new(6, depth, first)
        .and_then(|c| c.with_filtration(flag.clone()))
        .expect("fixture is well formed");
    let w = FormalConnection::new(6, depth, second)
        .and_then(|c| c.with_filtration(flag))
        .expect("fixture is well formed");
    (v, w, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Cq;
    use proptest::prelude::*;

    fn q(n: i64) -> Cq {
        Cq::from_i64(n)
    }

    fn s(terms: &[(i64, i64)], order: i64) -> Series<Cq> {
        Series::from_terms(terms.iter().map(|&(e, c)| (e, q(c))), order)
    }

    fn diag_conn(exps: &[Series<Cq>], m: usize, depth: i64) -> FormalConnection<Cq> {
        let order = depth - m as i64;
        let entries: Vec<Series<Cq>> = exps.iter().map(|e| e.with_k_min(-(m as i64)).truncate(order)).collect();
        let a = SeriesMatrix::from_fn(exps.len(), |i, j| {
            if i == j {
                Series::new(-(m as i64), (-(m as i64)..0).map(|e| entries[i].coeff(e).unwrap_or_else(Cq::zero)).collect(), order)
            } else {
                Series::zero(order)
            }
        });
        FormalConnection::new(m, depth, a).unwrap()
    }

    #[test]
    fn make_v_examples() {
        let v = make_v(&s(&[(-2, 1)], 0), 1, 6).unwrap();
        assert_eq!(v.m, 2);
        assert!(v.a.get(0, 0).compare(&s(&[(-2, 1)], 4)).overlap_agrees);
        let nu = s(&[(-2, 3)], 0);
        let v = make_v(&nu, 2, 5).unwrap();
        assert!(v.a.get(0, 1).compare(&s(&[(-1, 1)], 3)).overlap_agrees);
        assert!(v.a.get(1, 0).is_zero());
        assert!(v.a.get(1, 1).compare(&nu).overlap_agrees);
        let v = make_v(&Series::<Cq>::zero(0), 3, 4).unwrap();
        assert!(v.a.get(0, 1).compare(&s(&[(-1, 1)], 3)).overlap_agrees);
        assert!(v.a.get(1, 2).compare(&s(&[(-1, 1)], 3)).overlap_agrees);
        assert!(v.a.get(0, 0).is_zero() && v.a.get(0, 2).is_zero() && v.a.get(2, 1).is_zero());
        assert_eq!(make_v(&s(&[(-2, 1), (0, 1)], 3), 1, 4).unwrap_err(), FormalError::BadExponentSupport(0));
    }

    #[test]
    fn counterexample_gauge_is_exact() {
        let (v, w, g) = counterexample_pair::<Cq>();
        let moved = gauge(&v, &g).unwrap();
        assert_eq!(moved.a.order(), 0);
        assert_eq!(moved.a, w.a);
        let ev = v.graded_exponents().unwrap();
        let ew = w.graded_exponents().unwrap();
        assert!(!same_exponents(&ev, &ew, 0.0));
    }

    #[test]
    fn counterexample_intertwiner_exists_at_depth_six() {
        let (v, w, _) = counterexample_pair::<Cq>();
        let found = exponents_match_at_depth(&v, &w, 1, 0.0).unwrap();
        assert!(found.permutation.is_none());
        assert!(!found.depth_guaranteed);
    }

    #[test]
    fn counterexample_has_no_intertwiner_at_full_depth() {
        let (v, w, _) = counterexample_pair_at::<Cq>(24);
        assert_eq!(exponents_match_at_depth(&v, &w, 1, 0.0), Err(FormalError::NoIsomorphism(24)));
    }

    #[test]
    fn identity_match() {
        let (v, _, _) = counterexample_pair::<Cq>();
        let found = exponents_match_at_depth(&v, &v, 3, 0.0).unwrap();
        assert_eq!(found.permutation, Some(vec![0, 1]));
    }

    #[test]
    fn depth_below_pole_order() {
        let a = SeriesMatrix::from_entries(1, vec![s(&[(-3, 1)], 0)]);
        assert_eq!(
            FormalConnection::new(3, 2, a).unwrap_err(),
            FormalError::DepthBelowPoleOrder { depth: 2, m: 3 }
        );
    }

    #[test]
    fn rank1_examples() {
        let c = FormalConnection::new(2, 6, SeriesMatrix::from_entries(1, vec![s(&[(-2, 1), (0, 1), (1, 1)], 4)])).unwrap();
        let (nu, g) = rank1_polar_normalize(&c).unwrap();
        assert_eq!(nu, s(&[(-2, 1)], 0));
        let expected = (-Series::from_terms([(1, q(1)), (2, Cq::from_ratio(1, 2))], 6)).exp_series().unwrap();
        assert!(g.get(0, 0).compare(&expected).overlap_agrees);
        let moved = gauge(&c, &g).unwrap();
        assert!(moved.a.get(0, 0).compare(&s(&[(-2, 1)], 4)).overlap_agrees);
        assert_eq!(moved.a.order(), 4);

        let c = FormalConnection::new(1, 4, SeriesMatrix::from_entries(1, vec![s(&[(-1, 5)], 3)])).unwrap();
        let (nu, g) = rank1_polar_normalize(&c).unwrap();
        assert_eq!(nu, s(&[(-1, 5)], 0));
        assert!(g.get(0, 0).compare(&Series::one(4)).overlap_agrees);
        let c = FormalConnection::new(1, 4, SeriesMatrix::<Cq>::zero(1, 3)).unwrap();
        assert!(rank1_polar_normalize(&c).unwrap().0.is_zero());
    }

    #[test]
    fn diagonalize_known_conjugate() {
        let exps = [s(&[(-2, 1)], 0), s(&[(-2, -1)], 0)];
        let d = diag_conn(&exps, 2, 8);
        let g = SeriesMatrix::from_entries(2, vec![s(&[(0, 1)], 8), s(&[(1, 1)], 8), s(&[], 8), s(&[(0, 1)], 8)]);
        let c = gauge(&d, &g).unwrap();
        let out = formal_diagonalize_generic(&c, 1e-12).unwrap();
        assert!(same_exponents(&out.exponents, &exps, 0.0));
        let back = gauge(&c, &out.gauge).unwrap();
        assert!(back.a.is_diagonal());
        for (j, e) in out.exponents.iter().enumerate() {
            assert!(back.a.get(j, j).compare(e).overlap_agrees);
        }
    }

    #[test]
    fn diagonal_input_is_fixed() {
        let exps = [s(&[(-3, 2), (-1, 1)], 0), s(&[(-3, -1), (-2, 4)], 0), s(&[(-3, 5)], 0)];
        let d = diag_conn(&exps, 3, 7);
        let out = formal_diagonalize_generic(&d, 1e-12).unwrap();
        assert_eq!(out.exponents, exps.to_vec());
        assert!(out.gauge.agrees_with(&SeriesMatrix::identity(3, 7)));
    }

    #[test]
    fn refuses_equal_top_terms() {
        let (v, _, _) = counterexample_pair::<Cq>();
        assert_eq!(formal_diagonalize_generic(&v, 1e-12).unwrap_err(), FormalError::NonGenericLeadingTerm);
    }

    #[test]
    fn resonant_fuchsian_is_refused() {
        let d = diag_conn(&[s(&[(-1, 0)], 0), s(&[(-1, 2)], 0)], 1, 5);
        assert!(matches!(formal_diagonalize_generic(&d, 1e-12), Err(FormalError::ResonantRegular { .. })));
    }

    #[test]
    fn twist_shifts_one_residue() {
        let exps = [
            Series::from_terms([(-2, q(1)), (-1, Cq::from_ratio(1, 3))], 0),
            Series::from_terms([(-2, q(-1)), (-1, Cq::from_ratio(1, 5))], 0),
        ];
        let d = diag_conn(&exps, 2, 8);
        let g = SeriesMatrix::from_entries(2, vec![s(&[(0, 1)], 8), s(&[(2, 3)], 8), s(&[(2, -1)], 8), s(&[(0, 1), (3, 2)], 8)]);
        let c = gauge(&d, &g).unwrap();
        let twist = SeriesMatrix::from_entries(2, vec![s(&[(1, 1)], 9), s(&[], 9), s(&[], 9), s(&[(0, 1)], 9)]);
        let twisted = gauge(&c, &twist).unwrap();
        assert_eq!(twisted.m, 2);
        let out = formal_diagonalize_generic(&twisted, 1e-12).unwrap();
        let mut want = exps.to_vec();
        want[0] = &want[0] + &s(&[(-1, 1)], 0);
        assert!(same_exponents(&out.exponents, &want, 0.0));
    }

    #[test]
    fn normalize_residues_moves_into_unit_strip() {
        let a = SeriesMatrix::from_entries(
            2,
            vec![
                Series::from_terms([(-2, q(1)), (-1, Cq::from_ratio(7, 3))], 4),
                s(&[], 4),
                s(&[], 4),
                Series::from_terms([(-2, q(2)), (-1, Cq::from_ratio(-1, 2))], 4),
            ],
        );
        let c = FormalConnection::new(2, 6, a)
            .unwrap()
            .with_filtration(FormalConnection::<Cq>::standard_flag(2))
            .unwrap();
        let (n, _) = normalize_residues(&c).unwrap();
        let ex = n.graded_exponents().unwrap();
        let res: Vec<Cq> = ex.iter().map(|e| e.coeff(-1).unwrap()).collect();
        assert!(res.contains(&Cq::from_ratio(1, 3)));
        assert!(res.contains(&Cq::from_ratio(1, 2)));
    }

    fn arb_gauge(r: usize, depth: i64) -> impl Strategy<Value = SeriesMatrix<Cq>> {
        proptest::collection::vec(-2i64..3, r * r * 3).prop_map(move |v| {
            SeriesMatrix::from_fn(r, |i, j| {
                let base = (i * r + j) * 3;
                let mut terms = vec![(1, q(v[base])), (2, q(v[base + 1]))];
                if i == j {
                    terms.push((0, q(1)));
                } else if i < j {
                    terms.push((0, q(v[base + 2])));
                }
                Series::from_terms(terms, depth)
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn gauge_is_a_group_action(g in arb_gauge(2, 7), h in arb_gauge(2, 7)) {
            let d = diag_conn(&[s(&[(-2, 1), (-1, 1)], 0), s(&[(-2, 3)], 0)], 2, 7);
            let left = gauge(&gauge(&d, &g).unwrap(), &h).unwrap();
            let right = gauge(&d, &g.mul(&h)).unwrap();
            prop_assert!(left.a.agrees_with(&right.a));
            let back = gauge(&gauge(&d, &g).unwrap(), &g.inverse().unwrap()).unwrap();
            prop_assert!(back.a.agrees_with(&d.a));
        }

        #[test]
        fn exponents_are_unit_gauge_invariant(g in arb_gauge(2, 8)) {
            let exps = [s(&[(-3, 1), (-1, 2)], 0), s(&[(-3, -2), (-2, 1)], 0)];
            let d = diag_conn(&exps, 3, 8);
            let out = formal_diagonalize_generic(&gauge(&d, &g).unwrap(), 1e-12).unwrap();
            prop_assert!(same_exponents(&out.exponents, &exps, 0.0));
        }

        #[test]
        fn full_depth_match_finds_permutation(g in arb_gauge(2, 8)) {
            let exps = [
                Series::from_terms([(-2, q(1)), (-1, Cq::from_ratio(1, 3))], 0),
                Series::from_terms([(-2, q(-1)), (-1, Cq::from_ratio(1, 4))], 0),
            ];
            let flag = FormalConnection::<Cq>::standard_flag(2);
            let v = diag_conn(&exps, 2, 8).with_filtration(flag.clone()).unwrap();
            let moved = gauge(&v, &g).unwrap();
            // Re-diagonalize to read exponents off a filtered presentation of W.
            let dg = formal_diagonalize_generic(&moved, 1e-12).unwrap();
            let w = gauge(&moved, &dg.gauge).unwrap().with_filtration(flag).unwrap();
            let found = exponents_match_at_depth(&v, &w, 5, 0.0).unwrap();
            prop_assert!(found.depth_guaranteed);
            prop_assert!(found.permutation.is_some());
        }
    }
}
