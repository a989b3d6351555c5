//! Truncated Laurent series with explicit truncation order.
//!
//! A [`Series`] stores coefficients for exponents `k_min..order`. Exponents at
//! or above `order` are *unknown*, not zero, and every operation propagates
//! the order it can actually vouch for.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeriesError {
    #[error("exponential needs valuation >= 1, found a nonzero term of exponent {exponent}")]
    NonPositiveValuation { exponent: i64 },
    #[error("exponential needs coefficients known through exponent 0 (order is {order})")]
    UnknownLowTerms { order: i64 },
    #[error("antiderivative of a series with a nonzero z^-1 term needs a logarithm")]
    ResidueObstruction,
    #[error("series is zero to its known order; no inverse")]
    NotInvertible,
}

#[derive(Clone)]
pub struct Series<F> {
    k_min: i64,
    order: i64,
    coeffs: Vec<F>,
}

/// Result of comparing two series that may carry different truncation orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeriesComparison {
    /// Coefficients agree on every exponent both series know.
    pub overlap_agrees: bool,
    pub same_order: bool,
}

impl SeriesComparison {
    pub fn equal(&self) -> bool {
        self.overlap_agrees && self.same_order
    }
}

impl<F: Scalar> Series<F> {
    /// The zero series, known to be zero below `order`.
    pub fn zero(order: i64) -> Self {
        Self {
            k_min: order,
            order,
            coeffs: Vec::new(),
        }
    }

    /// Builds a series from dense coefficients starting at exponent `k_min`.
    /// Coefficients at or beyond `order` are dropped; missing ones are zero.
    pub fn new(k_min: i64, coeffs: Vec<F>, order: i64) -> Self {
        let k_min = k_min.min(order);
        let len = (order - k_min) as usize;
        let mut coeffs = coeffs;
        coeffs.truncate(len);
        coeffs.resize(len, F::zero());
        Self { k_min, order, coeffs }
    }

    /// Builds a series from sparse `(exponent, coefficient)` terms.
    pub fn from_terms<I>(terms: I, order: i64) -> Self
    where
        I: IntoIterator<Item = (i64, F)>,
    {
        let terms: Vec<(i64, F)> = terms.into_iter().filter(|(e, _)| *e < order).collect();
        let k_min = terms.iter().map(|(e, _)| *e).min().unwrap_or(order);
        let mut out = Self::new(k_min, Vec::new(), order);
        for (e, c) in terms {
            let idx = (e - k_min) as usize;
            out.coeffs[idx] = out.coeffs[idx].clone() + c;
        }
        out
    }

    pub fn monomial(c: F, exponent: i64, order: i64) -> Self {
        Self::from_terms([(exponent, c)], order)
    }

    pub fn constant(c: F, order: i64) -> Self {
        Self::monomial(c, 0, order)
    }

    pub fn one(order: i64) -> Self {
        Self::constant(F::one(), order)
    }

    pub fn k_min(&self) -> i64 {
        self.k_min
    }

    /// Truncation order: exponents `>= order` are unknown.
    pub fn order(&self) -> i64 {
        self.order
    }

    /// Coefficient of `z^exponent`, or `None` when it lies beyond the
    /// truncation order.
    pub fn coeff(&self, exponent: i64) -> Option<F> {
        if exponent >= self.order {
            None
        } else if exponent < self.k_min {
            Some(F::zero())
        } else {
            Some(self.coeffs[(exponent - self.k_min) as usize].clone())
        }
    }

    fn c(&self, exponent: i64) -> F {
        self.coeff(exponent).unwrap_or_else(F::zero)
    }

    fn c_ref(&self, exponent: i64) -> &F {
        &self.coeffs[(exponent - self.k_min) as usize]
    }

    /// Nonzero terms in increasing exponent order.
    pub fn terms(&self) -> impl Iterator<Item = (i64, &F)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(move |(i, c)| (self.k_min + i as i64, c))
    }

    /// Lowest exponent with a nonzero coefficient; `order` for the zero series.
    pub fn valuation(&self) -> i64 {
        self.terms().next().map(|(e, _)| e).unwrap_or(self.order)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// Drops knowledge of exponents `>= order`.
    pub fn truncate(&self, order: i64) -> Self {
        if order >= self.order {
            return self.clone();
        }
        Self::new(self.k_min, self.coeffs.clone(), order)
    }

    /// Reports exponents known but never stored explicitly as zero.
    pub fn with_k_min(&self, k_min: i64) -> Self {
        if k_min >= self.k_min {
            return self.clone();
        }
        let mut coeffs = vec![F::zero(); (self.k_min - k_min) as usize];
        coeffs.extend(self.coeffs.iter().cloned());
        Self::new(k_min, coeffs, self.order)
    }

    pub fn scale(&self, c: &F) -> Self {
        Self {
            k_min: self.k_min,
            order: self.order,
            coeffs: self.coeffs.iter().map(|x| x.clone() * c.clone()).collect(),
        }
    }

    /// Multiplication by `z^k`.
    pub fn shift(&self, k: i64) -> Self {
        Self {
            k_min: self.k_min + k,
            order: self.order + k,
            coeffs: self.coeffs.clone(),
        }
    }

    /// Terms of negative exponent; the regular part is replaced by known zeros.
    pub fn polar_part(&self) -> Self {
        let terms = self
            .terms()
            .filter(|(e, _)| *e < 0)
            .map(|(e, c)| (e, c.clone()));
        Self::from_terms(terms, self.order)
    }

    /// Terms of exponent `>= 0`.
    pub fn regular_part(&self) -> Self {
        let terms = self
            .terms()
            .filter(|(e, _)| *e >= 0)
            .map(|(e, c)| (e, c.clone()));
        Self::from_terms(terms, self.order)
    }

    pub fn add_series(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a + b)
    }

    pub fn sub_series(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a - b)
    }

    fn combine(&self, other: &Self, op: impl Fn(F, F) -> F) -> Self {
        let order = self.order.min(other.order);
        let k_min = self.k_min.min(other.k_min).min(order);
        let coeffs = (k_min..order).map(|e| op(self.c(e), other.c(e))).collect();
        Self { k_min, order, coeffs }
    }

    /// Cauchy product. The result order is `min(N_a + v_b, N_b + v_a)`.
    pub fn mul_series(&self, other: &Self) -> Self {
        let (va, vb) = (self.valuation(), other.valuation());
        let order = (self.order + vb).min(other.order + va);
        let k_min = (va + vb).min(order);
        let mut coeffs = Vec::with_capacity((order - k_min) as usize);
        for e in k_min..order {
            let mut acc = F::zero();
            // i ranges over exponents of self with both factors known.
            for i in va..=(e - vb) {
                if i >= self.order {
                    break;
                }
                let j = e - i;
                if j < other.k_min || j >= other.order {
                    continue;
                }
                let a = self.c_ref(i);
                if a.is_zero() {
                    continue;
                }
                let b = other.c_ref(j);
                if b.is_zero() {
                    continue;
                }
                acc = acc + a.clone() * b.clone();
            }
            coeffs.push(acc);
        }
        Self { k_min, order, coeffs }
    }

    /// `d/dz`.
    pub fn derivative(&self) -> Self {
        let order = self.order - 1;
        let k_min = (self.k_min - 1).min(order);
        let coeffs = (k_min..order)
            .map(|e| self.c(e + 1) * F::from_i64(e + 1))
            .collect();
        Self { k_min, order, coeffs }
    }

    /// Termwise integral with zero constant of integration.
    pub fn antiderivative(&self) -> Result<Self, SeriesError> {
        if let Some(res) = self.coeff(-1) {
            if !res.is_zero() {
                return Err(SeriesError::ResidueObstruction);
            }
        }
        let order = self.order + 1;
        let k_min = (self.k_min + 1).min(order);
        let coeffs = (k_min..order)
            .map(|e| {
                if e == 0 {
                    F::zero()
                } else {
                    self.c(e - 1) / F::from_i64(e)
                }
            })
            .collect();
        Ok(Self { k_min, order, coeffs })
    }

    /// `exp(a)` for `a` of valuation at least one, truncated at `a`'s order.
    pub fn exp_series(&self) -> Result<Self, SeriesError> {
        if let Some((e, _)) = self.terms().next() {
            if e <= 0 {
                return Err(SeriesError::NonPositiveValuation { exponent: e });
            }
        }
        if self.order < 1 {
            return Err(SeriesError::UnknownLowTerms { order: self.order });
        }
        // E' = a' E  gives  n E_n = sum_{k=1}^{n} k a_k E_{n-k}.
        let order = self.order;
        let mut out: Vec<F> = Vec::with_capacity(order as usize);
        out.push(F::one());
        for n in 1..order {
            let mut acc = F::zero();
            for k in 1..=n {
                let ak = self.c(k);
                if ak.is_zero() {
                    continue;
                }
                acc = acc + ak * F::from_i64(k) * out[(n - k) as usize].clone();
            }
            out.push(acc / F::from_i64(n));
        }
        Ok(Self {
            k_min: 0,
            order,
            coeffs: out,
        })
    }

    /// Multiplicative inverse in the Laurent field. For `a = z^v u` with `u`
    /// a unit the result is known through exponent `N_a - 2v - 1`.
    pub fn inverse(&self) -> Result<Self, SeriesError> {
        let v = self.valuation();
        if v >= self.order {
            return Err(SeriesError::NotInvertible);
        }
        let len = (self.order - v) as usize;
        let u: Vec<F> = (0..len as i64).map(|n| self.c(v + n)).collect();
        let u0_inv = F::one() / u[0].clone();
        let mut b: Vec<F> = Vec::with_capacity(len);
        b.push(u0_inv.clone());
        for n in 1..len {
            let mut acc = F::zero();
            for k in 1..=n {
                if u[k].is_zero() {
                    continue;
                }
                acc = acc + u[k].clone() * b[n - k].clone();
            }
            b.push(-(acc * u0_inv.clone()));
        }
        Ok(Self::new(-v, b, self.order - 2 * v))
    }

    /// Compares only the exponents both series know, and reports whether the
    /// truncation orders match.
    pub fn compare(&self, other: &Self) -> SeriesComparison {
        self.compare_with(other, |a, b| a == b)
    }

    /// Tolerance-aware comparison for float coefficients.
    pub fn compare_approx(&self, other: &Self, tol: f64) -> SeriesComparison {
        self.compare_with(other, |a, b| a.near(b, tol))
    }

    fn compare_with(&self, other: &Self, eq: impl Fn(&F, &F) -> bool) -> SeriesComparison {
        let hi = self.order.min(other.order);
        let lo = self.k_min.min(other.k_min);
        let overlap_agrees = (lo..hi).all(|e| eq(&self.c(e), &other.c(e)));
        SeriesComparison {
            overlap_agrees,
            same_order: self.order == other.order,
        }
    }

    /// Largest coefficient difference on the shared known range.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let hi = self.order.min(other.order);
        let lo = self.k_min.min(other.k_min);
        (lo..hi)
            .map(|e| (self.c(e) - other.c(e)).magnitude())
            .fold(0.0, f64::max)
    }

    /// Evaluates the known part at a point (float view).
    pub fn eval_c64(&self, z: crate::scalar::C64) -> crate::scalar::C64 {
        let mut acc = crate::scalar::C64::new(0.0, 0.0);
        for (e, c) in self.terms() {
            acc += c.to_c64() * z.powi(e as i32);
        }
        acc
    }

    pub fn map_coeffs<G: Scalar>(&self, f: impl Fn(&F) -> G) -> Series<G> {
        Series {
            k_min: self.k_min,
            order: self.order,
            coeffs: self.coeffs.iter().map(f).collect(),
        }
    }
}

impl<F: Scalar> PartialEq for Series<F> {
    fn eq(&self, other: &Self) -> bool {
        self.compare(other).equal()
    }
}

impl<F: Scalar> fmt::Debug for Series<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl<F: Scalar> fmt::Display for Series<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (e, c) in self.terms() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match e {
                0 => write!(f, "({c:?})")?,
                1 => write!(f, "({c:?})z")?,
                _ => write!(f, "({c:?})z^{e}")?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, " + O(z^{})", self.order)
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, $inner:ident) => {
        impl<'a, F: Scalar> $trait<&'a Series<F>> for &'a Series<F> {
            type Output = Series<F>;
            fn $method(self, rhs: &'a Series<F>) -> Series<F> {
                self.$inner(rhs)
            }
        }
        impl<F: Scalar> $trait for Series<F> {
            type Output = Series<F>;
            fn $method(self, rhs: Series<F>) -> Series<F> {
                self.$inner(&rhs)
            }
        }
    };
}

forward_binop!(Add, add, add_series);
forward_binop!(Sub, sub, sub_series);
forward_binop!(Mul, mul, mul_series);

impl<F: Scalar> Neg for &Series<F> {
    type Output = Series<F>;
    fn neg(self) -> Series<F> {
        self.scale(&-F::one())
    }
}

impl<F: Scalar> Neg for Series<F> {
    type Output = Series<F>;
    fn neg(self) -> Series<F> {
        self.scale(&-F::one())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{Cq, C64};
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> Cq {
        Cq::from_ratio(n, d)
    }

    fn s(terms: &[(i64, i64, i64)], order: i64) -> Series<Cq> {
        Series::from_terms(terms.iter().map(|&(e, n, d)| (e, q(n, d))), order)
    }

    #[test]
    fn add_examples() {
        let a = s(&[(-1, 1, 1), (0, 1, 1)], 3);
        let b = s(&[(0, 1, 1), (1, 1, 1)], 3);
        assert_eq!(&a + &b, s(&[(-1, 1, 1), (0, 2, 1), (1, 1, 1)], 3));
        assert_eq!(&a + &Series::zero(3), a);
        // Truncation propagates to the smaller order.
        let c = s(&[(0, 1, 1)], 2) + s(&[(2, 1, 1)], 4);
        assert_eq!(c, s(&[(0, 1, 1)], 2));
        assert_eq!(c.order(), 2);
    }

    #[test]
    fn mul_examples() {
        let p = s(&[(0, 1, 1), (1, 1, 1)], 4) * s(&[(0, 1, 1), (1, -1, 1)], 4);
        assert_eq!(p, s(&[(0, 1, 1), (2, -1, 1)], 4));
        let p = s(&[(-2, 1, 1)], 6) * s(&[(3, 1, 1)], 6);
        assert_eq!(p.valuation(), 1);
        // min(6 + 3, 6 - 2)
        assert_eq!(p.order(), 4);
        assert_eq!(p, s(&[(1, 1, 1)], 4));
    }

    #[test]
    fn mul_reproduces_basis_change_pieces() {
        // (z^-6 + z^-2)(1 + z^4) + z^-4 (-z^2) = z^-6 + z^-2 modulo z^0.
        let entry = s(&[(-6, 1, 1), (-2, 1, 1)], 0);
        let e1 = s(&[(0, 1, 1), (4, 1, 1)], 6);
        let e2 = s(&[(2, -1, 1)], 6);
        let off = s(&[(-4, 1, 1)], 0);
        let row = &(&entry * &e1) + &(&off * &e2);
        assert_eq!(row, s(&[(-6, 1, 1), (-2, 1, 1)], 0));
        // and the second row: (z^-6 - z^-2)(-z^2) = -z^-4 modulo z^0.
        let lower = s(&[(-6, 1, 1), (-2, -1, 1)], 0);
        assert_eq!(&lower * &e2, s(&[(-4, -1, 1)], 0));
    }

    #[test]
    fn exp_examples() {
        assert_eq!(Series::<Cq>::zero(5).exp_series().unwrap(), Series::one(5));
        let e = s(&[(1, 1, 1)], 4).exp_series().unwrap();
        assert_eq!(e, s(&[(0, 1, 1), (1, 1, 1), (2, 1, 2), (3, 1, 6)], 4));
        // Brute-force Taylor sum of (z + z^2)^k / k! for k <= 2, truncated mod z^3.
        let a = s(&[(1, 1, 1), (2, 1, 1)], 3);
        let mut brute = Series::one(3);
        let mut power = Series::one(3);
        let mut fact = 1;
        for k in 1..=3 {
            power = &power * &a;
            fact *= k;
            brute = &brute + &power.scale(&q(1, fact));
        }
        let e = a.exp_series().unwrap();
        assert_eq!(e, brute);
        assert_eq!(e, s(&[(0, 1, 1), (1, 1, 1), (2, 3, 2)], 3));
        assert_eq!(
            s(&[(0, 1, 1)], 3).exp_series(),
            Err(SeriesError::NonPositiveValuation { exponent: 0 })
        );
        assert!(s(&[(-1, 1, 1)], 3).exp_series().is_err());
    }

    #[test]
    fn antiderivative_examples() {
        let a = s(&[(0, 1, 1), (1, 1, 1)], 4);
        let i = a.antiderivative().unwrap();
        assert_eq!(i, s(&[(1, 1, 1), (2, 1, 2)], 5));
        let i = s(&[(-3, 1, 1)], 2).antiderivative().unwrap();
        assert_eq!(i, s(&[(-2, -1, 2)], 3));
        assert_eq!(
            s(&[(-1, 1, 1)], 2).antiderivative(),
            Err(SeriesError::ResidueObstruction)
        );
    }

    #[test]
    fn inverse_of_meromorphic_series() {
        let a = s(&[(-2, 1, 1), (0, 1, 1)], 4);
        let inv = a.inverse().unwrap();
        let prod = &a * &inv;
        assert_eq!(prod.valuation(), 0);
        assert_eq!(prod.coeff(0), Some(Cq::one()));
        for e in 1..prod.order() {
            assert_eq!(prod.coeff(e), Some(Cq::zero()));
        }
        assert_eq!(Series::<Cq>::zero(3).inverse(), Err(SeriesError::NotInvertible));
    }

    #[test]
    fn different_orders_compare_only_overlap() {
        let a = s(&[(0, 1, 1), (3, 5, 1)], 4);
        let b = s(&[(0, 1, 1)], 2);
        let cmp = a.compare(&b);
        assert!(cmp.overlap_agrees);
        assert!(!cmp.same_order);
        assert_ne!(a, b);
    }

    fn arb_series(order: i64) -> impl Strategy<Value = Series<Cq>> {
        (-2i64..1, proptest::collection::vec((-4i64..5, -4i64..5), 0..7)).prop_map(
            move |(k_min, cs)| {
                let coeffs = cs.into_iter().map(|(a, b)| Cq::new(q(a, 1).re, q(b, 2).re)).collect();
                Series::new(k_min, coeffs, order)
            },
        )
    }

    fn arb_residue_free() -> impl Strategy<Value = Series<Cq>> {
        proptest::collection::vec(-5i64..6, 0..8).prop_map(|cs| {
            let terms = cs
                .into_iter()
                .enumerate()
                .map(|(i, c)| (i as i64 - 3, q(c, 3)))
                .filter(|(e, _)| *e != -1);
            Series::from_terms(terms, 5)
        })
    }

    proptest! {
        #[test]
        fn ring_axioms(a in arb_series(5), b in arb_series(4), c in arb_series(6)) {
            let left = &(&a * &b) * &c;
            let right = &a * &(&b * &c);
            prop_assert!(left.compare(&right).overlap_agrees);
            let d1 = &a * &(&b + &c);
            let d2 = &(&a * &b) + &(&a * &c);
            prop_assert!(d1.compare(&d2).overlap_agrees);
        }

        #[test]
        fn derivative_inverts_antiderivative(a in arb_residue_free()) {
            let back = a.antiderivative().unwrap().derivative();
            prop_assert_eq!(back, a);
        }

        #[test]
        fn exp_of_negation_is_inverse(cs in proptest::collection::vec(-4i64..5, 1..6)) {
            let a = Series::from_terms(cs.iter().enumerate().map(|(i, &c)| (i as i64 + 1, q(c, 2))), 7);
            let prod = a.exp_series().unwrap() * (-&a).exp_series().unwrap();
            prop_assert_eq!(prod, Series::one(7));
        }

        #[test]
        fn truncated_product_never_contradicts_deeper_one(
            cs_a in proptest::collection::vec(-3i64..4, 12),
            cs_b in proptest::collection::vec(-3i64..4, 12),
            ka in -3i64..2, kb in -3i64..2, na in 1i64..4, nb in 1i64..4,
        ) {
            // Oracle: the same underlying series known 8 orders deeper.
            let full_a: Vec<Cq> = cs_a.iter().map(|&c| q(c, 1)).collect();
            let full_b: Vec<Cq> = cs_b.iter().map(|&c| q(c, 1)).collect();
            let shallow = Series::new(ka, full_a.clone(), ka + na) * Series::new(kb, full_b.clone(), kb + nb);
            let deep = Series::new(ka, full_a, ka + na + 8) * Series::new(kb, full_b, kb + nb + 8);
            prop_assert!(shallow.order() <= deep.order());
            prop_assert!(shallow.compare(&deep).overlap_agrees);
        }
    }

    #[test]
    fn float_series_work_too() {
        let a: Series<C64> = Series::from_terms([(1, C64::new(0.5, 0.0))], 6);
        let e = a.exp_series().unwrap();
        let expect = (0..6).map(|k| 0.5f64.powi(k) / (1..=k).product::<i32>().max(1) as f64);
        for (k, v) in expect.enumerate() {
            assert!((e.coeff(k as i64).unwrap().re - v).abs() < 1e-15);
        }
    }
}
