//! Generalized exponents: points of the parameter space of local formal
//! types, with the Fuchs relation, the generic/resonant/reducible/simple
//! predicates, the (top, mid, res) split and the formal-monodromy map.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{distance_to_integer, C64};
use crate::stokes;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExponentError {
    #[error("malformed exponent tuple: {0}")]
    Shape(String),
    #[error("reducibility search would visit {needed} subset choices (bound {bound})")]
    ReducibilitySearchTooLarge { needed: u128, bound: u128 },
}

/// `a[i][j][k]` is the coefficient of `z_i^(k - m_i) dz_i` in the exponent
/// `nu^(i)_j`, so `k = 0` is the top term and `k = m_i - 1` the residue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentTuple {
    pub r: usize,
    pub d: i64,
    pub n: usize,
    pub m: Vec<usize>,
    #[serde(with = "complex_cube")]
    pub a: Vec<Vec<Vec<C64>>>,
}

mod complex_cube {
    use super::C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(a: &[Vec<Vec<C64>>], s: S) -> Result<S::Ok, S::Error> {
        let raw: Vec<Vec<Vec<[f64; 2]>>> = a
            .iter()
            .map(|p| p.iter().map(|j| j.iter().map(|c| [c.re, c.im]).collect()).collect())
            .collect();
        raw.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<Vec<C64>>>, D::Error> {
        let raw: Vec<Vec<Vec<[f64; 2]>>> = Vec::deserialize(d)?;
        Ok(raw
            .into_iter()
            .map(|p| {
                p.into_iter()
                    .map(|j| j.into_iter().map(|[re, im]| C64::new(re, im)).collect())
                    .collect()
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub generic: bool,
    pub resonant: bool,
    pub reducible: bool,
    pub simple: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    /// Distance-to-integer gap for resonance and reducibility tests.
    pub integrality_tol: f64,
    /// Two top coefficients closer than this count as equal.
    pub equality_tol: f64,
    /// Rays closer than this (radians) are one singular direction.
    pub direction_tol: f64,
    /// Largest number of subset choices the reducibility search may visit.
    pub search_bound: u128,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            integrality_tol: 1e-9,
            equality_tol: 1e-12,
            direction_tol: 1e-9,
            search_bound: 1_000_000,
        }
    }
}

/// `(nu_top, nu_mid, nu_res)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// Per point: `Some(top coefficients per j)` when `m_i >= 2`.
    pub top: Vec<Option<Vec<C64>>>,
    /// Per point, per j: coefficients of `z^k`, `-m_i < k < -1`, increasing k.
    pub mid: Vec<Vec<Vec<C64>>>,
    /// Per point, per j: the residue `a_{j,-1}`.
    pub res: Vec<Vec<C64>>,
}

/// Diagonal entries of the formal monodromies `gamma_hat_i`, in the basis
/// order `j = 0..r-1` of the formal decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormalMonodromyTuple {
    #[serde(with = "complex_matrix_rows")]
    pub eigenvalues: Vec<Vec<C64>>,
}

pub(crate) mod complex_matrix_rows {
    use super::C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(a: &[Vec<C64>], s: S) -> Result<S::Ok, S::Error> {
        let raw: Vec<Vec<[f64; 2]>> = a
            .iter()
            .map(|row| row.iter().map(|c| [c.re, c.im]).collect())
            .collect();
        raw.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<C64>>, D::Error> {
        let raw: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        Ok(raw
            .into_iter()
            .map(|row| row.into_iter().map(|[re, im]| C64::new(re, im)).collect())
            .collect())
    }
}

impl ExponentTuple {
    /// Checks the array layout against `r`, `n` and the pole orders.
    pub fn new(r: usize, d: i64, m: Vec<usize>, a: Vec<Vec<Vec<C64>>>) -> Result<Self, ExponentError> {
        let t = Self {
            r,
            d,
            n: m.len(),
            m,
            a,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), ExponentError> {
        if self.r == 0 {
            return Err(ExponentError::Shape("rank must be positive".into()));
        }
        if self.n != self.m.len() || self.a.len() != self.n {
            return Err(ExponentError::Shape(format!(
                "n = {} but m has {} entries and a has {} points",
                self.n,
                self.m.len(),
                self.a.len()
            )));
        }
        for (i, (point, &mi)) in self.a.iter().zip(&self.m).enumerate() {
            if mi == 0 {
                return Err(ExponentError::Shape(format!("pole order m_{i} must be >= 1")));
            }
            if point.len() != self.r {
                return Err(ExponentError::Shape(format!(
                    "point {i} has {} exponents, expected r = {}",
                    point.len(),
                    self.r
                )));
            }
            if let Some(j) = point.iter().position(|e| e.len() != mi) {
                return Err(ExponentError::Shape(format!(
                    "exponent ({i},{j}) has {} coefficients, expected m_{i} = {mi}",
                    point[j].len()
                )));
            }
        }
        Ok(())
    }

    /// Coefficient `a^(i)_{j,k}` for `-m_i <= k <= -1`.
    pub fn coeff(&self, i: usize, j: usize, k: i64) -> C64 {
        let mi = self.m[i] as i64;
        assert!((-mi..=-1).contains(&k), "exponent {k} outside [-{mi}, -1]");
        self.a[i][j][(k + mi) as usize]
    }

    pub fn top(&self, i: usize, j: usize) -> C64 {
        self.a[i][j][0]
    }

    pub fn residue(&self, i: usize, j: usize) -> C64 {
        *self.a[i][j].last().expect("m_i >= 1")
    }

    /// `d + sum_{i,j} a^(i)_{j,-1}`; zero exactly on valid tuples.
    pub fn fuchs_residue_sum(&self) -> C64 {
        let mut acc = C64::new(self.d as f64, 0.0);
        for i in 0..self.n {
            for j in 0..self.r {
                acc += self.residue(i, j);
            }
        }
        acc
    }

    pub fn satisfies_fuchs(&self, tol: f64) -> bool {
        self.fuchs_residue_sum().norm() <= tol
    }

    /// Top terms pairwise distinct at point `i`.
    pub fn generic_at(&self, i: usize, tol: f64) -> bool {
        for j1 in 0..self.r {
            for j2 in j1 + 1..self.r {
                if (self.top(i, j1) - self.top(i, j2)).norm() <= tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn is_generic(&self, tol: f64) -> bool {
        (0..self.n).all(|i| self.generic_at(i, tol))
    }

    pub fn is_resonant(&self, integrality_tol: f64) -> bool {
        (0..self.n).filter(|&i| self.m[i] == 1).any(|i| {
            (0..self.r).any(|j1| {
                (0..self.r).any(|j2| {
                    j1 != j2
                        && distance_to_integer(self.residue(i, j1) - self.residue(i, j2))
                            <= integrality_tol
                })
            })
        })
    }

    /// Exhaustive search over `1 <= h < r` and per-point h-subsets for an
    /// integral partial residue sum.
    pub fn is_reducible(&self, integrality_tol: f64, bound: u128) -> Result<bool, ExponentError> {
        for h in 1..self.r {
            let subsets = k_subsets(self.r, h);
            let needed = (subsets.len() as u128).saturating_pow(self.n as u32);
            if needed > bound {
                return Err(ExponentError::ReducibilitySearchTooLarge { needed, bound });
            }
            // Partial sums for every subset at every point.
            let sums: Vec<Vec<C64>> = (0..self.n)
                .map(|i| {
                    subsets
                        .iter()
                        .map(|s| s.iter().map(|&j| self.residue(i, j)).sum())
                        .collect()
                })
                .collect();
            let mut idx = vec![0usize; self.n];
            loop {
                let total: C64 = (0..self.n).map(|i| sums[i][idx[i]]).sum();
                if distance_to_integer(total) <= integrality_tol {
                    return Ok(true);
                }
                // Odometer increment.
                let mut p = 0;
                loop {
                    if p == self.n {
                        break;
                    }
                    idx[p] += 1;
                    if idx[p] < subsets.len() {
                        break;
                    }
                    idx[p] = 0;
                    p += 1;
                }
                if p == self.n {
                    break;
                }
            }
        }
        Ok(false)
    }

    pub fn classify(&self, opts: &ClassifyOptions) -> Result<Classification, ExponentError> {
        let generic = self.is_generic(opts.equality_tol);
        let resonant = self.is_resonant(opts.integrality_tol);
        let reducible = self.is_reducible(opts.integrality_tol, opts.search_bound)?;
        let simple = generic && stokes::is_simple(self, opts.direction_tol);
        Ok(Classification {
            generic,
            resonant,
            reducible,
            simple,
        })
    }

    pub fn decompose(&self) -> Decomposition {
        let mut top = Vec::with_capacity(self.n);
        let mut mid = Vec::with_capacity(self.n);
        let mut res = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let mi = self.m[i];
            top.push((mi >= 2).then(|| (0..self.r).map(|j| self.a[i][j][0]).collect()));
            mid.push(
                (0..self.r)
                    .map(|j| {
                        if mi >= 3 {
                            self.a[i][j][1..mi - 1].to_vec()
                        } else {
                            Vec::new()
                        }
                    })
                    .collect(),
            );
            res.push((0..self.r).map(|j| self.residue(i, j)).collect());
        }
        Decomposition { top, mid, res }
    }

    /// Inverse of [`ExponentTuple::decompose`].
    pub fn recompose(r: usize, d: i64, parts: &Decomposition) -> Result<Self, ExponentError> {
        let n = parts.res.len();
        let mut m = Vec::with_capacity(n);
        let mut a = Vec::with_capacity(n);
        for i in 0..n {
            let mid_len = parts.mid[i].first().map_or(0, Vec::len);
            let mi = match &parts.top[i] {
                Some(_) => mid_len + 2,
                None => 1,
            };
            if parts.top[i].is_none() && mid_len > 0 {
                return Err(ExponentError::Shape(format!(
                    "point {i} has mid terms but no top term"
                )));
            }
            m.push(mi);
            let mut point = Vec::with_capacity(r);
            for j in 0..r {
                let mut coeffs = Vec::with_capacity(mi);
                if let Some(top) = &parts.top[i] {
                    coeffs.push(top[j]);
                    coeffs.extend_from_slice(&parts.mid[i][j]);
                }
                coeffs.push(parts.res[i][j]);
                point.push(coeffs);
            }
            a.push(point);
        }
        Self::new(r, d, m, a)
    }

    pub fn formal_monodromy(&self) -> FormalMonodromyTuple {
        formal_monodromy(&self.decompose().res)
    }

    /// Reorders the points.
    pub fn permute_points(&self, perm: &[usize]) -> Self {
        Self {
            r: self.r,
            d: self.d,
            n: self.n,
            m: perm.iter().map(|&p| self.m[p]).collect(),
            a: perm.iter().map(|&p| self.a[p].clone()).collect(),
        }
    }

    /// Reorders the basis labels `j` at every point.
    pub fn permute_labels(&self, perm: &[usize]) -> Self {
        Self {
            a: self
                .a
                .iter()
                .map(|p| perm.iter().map(|&j| p[j].clone()).collect())
                .collect(),
            ..self.clone()
        }
    }
}

/// `gamma_hat_i` eigenvalue on label `j` is `exp(-2 pi i a^(i)_{j,-1})`.
pub fn formal_monodromy(res: &[Vec<C64>]) -> FormalMonodromyTuple {
    let two_pi_i = C64::new(0.0, 2.0 * std::f64::consts::PI);
    FormalMonodromyTuple {
        eigenvalues: res
            .iter()
            .map(|point| point.iter().map(|&a| (-two_pi_i * a).exp()).collect())
            .collect(),
    }
}

fn k_subsets(r: usize, h: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(h);
    fn rec(start: usize, r: usize, h: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == h {
            out.push(cur.clone());
            return;
        }
        for j in start..r {
            cur.push(j);
            rec(j + 1, r, h, cur, out);
            cur.pop();
        }
    }
    rec(0, r, h, &mut cur, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn fuchsian(r: usize, d: i64, residues: Vec<Vec<C64>>) -> ExponentTuple {
        let n = residues.len();
        ExponentTuple::new(
            r,
            d,
            vec![1; n],
            residues
                .into_iter()
                .map(|p| p.into_iter().map(|a| vec![a]).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn fuchs_sum_examples() {
        let t = fuchsian(1, 0, vec![vec![c(0.0, 0.0)]]);
        assert_eq!(t.fuchs_residue_sum(), c(0.0, 0.0));
        let t = fuchsian(2, -1, vec![vec![c(0.5, 0.0), c(0.5, 0.0)]]);
        assert_eq!(t.fuchs_residue_sum(), c(0.0, 0.0));
        let mut res = vec![vec![c(0.0, 0.0); 2]; 4];
        res[2][1] = c(1.0, 0.0);
        let t = fuchsian(2, -1, res);
        assert_eq!(t.fuchs_residue_sum(), c(0.0, 0.0));
        assert!(t.satisfies_fuchs(0.0));
    }

    #[test]
    fn shape_errors() {
        assert!(ExponentTuple::new(2, 0, vec![2], vec![vec![vec![c(1.0, 0.0)]; 2]]).is_err());
        assert!(ExponentTuple::new(2, 0, vec![1, 1], vec![vec![vec![c(1.0, 0.0)]; 2]]).is_err());
        assert!(ExponentTuple::new(2, 0, vec![0], vec![vec![vec![]; 2]]).is_err());
    }

    #[test]
    fn classify_irregular_example() {
        // m = (2): tops 1 and i, residues 1/3 and -1/3.
        let t = ExponentTuple::new(
            2,
            0,
            vec![2],
            vec![vec![vec![c(1.0, 0.0), c(1.0 / 3.0, 0.0)], vec![c(0.0, 1.0), c(-1.0 / 3.0, 0.0)]]],
        )
        .unwrap();
        let cls = t.classify(&ClassifyOptions::default()).unwrap();
        assert_eq!(
            cls,
            Classification {
                generic: true,
                resonant: false,
                reducible: false,
                simple: true
            }
        );
    }

    #[test]
    fn resonance_and_genericity_failures() {
        let t = fuchsian(2, -1, vec![vec![c(0.25, 0.0), c(1.25, 0.0)], vec![c(-0.5, 0.0), c(0.0, 0.0)]]);
        assert!(t.is_resonant(1e-9));
        let t = ExponentTuple::new(
            2,
            0,
            vec![2],
            vec![vec![vec![c(1.0, 0.0), c(0.1, 0.0)], vec![c(1.0, 0.0), c(-0.1, 0.0)]]],
        )
        .unwrap();
        assert!(!t.is_generic(1e-12));
        assert!(!t.classify(&ClassifyOptions::default()).unwrap().simple);
    }

    #[test]
    fn reducibility_search_bound() {
        let res = vec![vec![c(0.1, 0.0), c(0.2, 0.0), c(-0.3, 0.0)]; 4];
        let t = fuchsian(3, 0, res);
        let err = t.is_reducible(1e-9, 10).unwrap_err();
        assert_eq!(err, ExponentError::ReducibilitySearchTooLarge { needed: 81, bound: 10 });
    }

    #[test]
    fn reducible_when_a_subset_sums_to_an_integer() {
        // h = 1: 0.3 + 0.7 = 1.
        let t = fuchsian(
            2,
            0,
            vec![vec![c(0.3, 0.0), c(-0.3, 0.0)], vec![c(0.7, 0.0), c(-0.7, 0.0)]],
        );
        assert!(t.is_reducible(1e-9, 1000).unwrap());
        let t = fuchsian(
            2,
            0,
            vec![vec![c(0.3, 0.0), c(-0.3, 0.0)], vec![c(0.45, 0.0), c(-0.45, 0.0)]],
        );
        assert!(!t.is_reducible(1e-9, 1000).unwrap());
    }

    #[test]
    fn decompose_examples() {
        let t = fuchsian(2, 0, vec![vec![c(0.1, 0.0), c(-0.1, 0.0)]; 4]);
        let d = t.decompose();
        assert!(d.top.iter().all(Option::is_none));
        assert!(d.mid.iter().flatten().all(Vec::is_empty));
        assert_eq!(d.res.len(), 4);

        let two = ExponentTuple::new(2, 0, vec![2], vec![vec![vec![c(1.0, 0.0), c(0.5, 0.0)], vec![c(-1.0, 0.0), c(-0.5, 0.0)]]]).unwrap();
        let d = two.decompose();
        assert_eq!(d.top[0], Some(vec![c(1.0, 0.0), c(-1.0, 0.0)]));
        assert!(d.mid[0].iter().all(Vec::is_empty));
        assert_eq!(d.res[0], vec![c(0.5, 0.0), c(-0.5, 0.0)]);

        let three = ExponentTuple::new(
            2,
            0,
            vec![3],
            vec![vec![vec![c(1.0, 0.0), c(2.0, 0.0), c(0.5, 0.0)], vec![c(-1.0, 0.0), c(3.0, 0.0), c(-0.5, 0.0)]]],
        )
        .unwrap();
        let d = three.decompose();
        assert_eq!(d.top[0], Some(vec![c(1.0, 0.0), c(-1.0, 0.0)]));
        assert_eq!(d.mid[0], vec![vec![c(2.0, 0.0)], vec![c(3.0, 0.0)]]);
        assert_eq!(ExponentTuple::recompose(2, 0, &d).unwrap(), three);
    }

    #[test]
    fn formal_monodromy_examples() {
        let f = formal_monodromy(&[vec![c(0.0, 0.0), c(0.5, 0.0)]]);
        assert!((f.eigenvalues[0][0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((f.eigenvalues[0][1] - c(-1.0, 0.0)).norm() < 1e-15);
        let shifted = formal_monodromy(&[vec![c(3.0, 0.0), c(-1.5, 0.0)]]);
        for j in 0..2 {
            assert!((shifted.eigenvalues[0][j] - f.eigenvalues[0][j]).norm() < 1e-12);
        }
    }

    fn arb_tuple() -> impl Strategy<Value = ExponentTuple> {
        (2usize..4, 1usize..4, proptest::collection::vec(1usize..4, 1..4)).prop_flat_map(|(r, _, m)| {
            let n = m.len();
            let total: usize = m.iter().sum::<usize>() * r;
            proptest::collection::vec((-3i32..4, -3i32..4), total).prop_map(move |vals| {
                let mut it = vals.into_iter().map(|(a, b)| C64::new(a as f64 / 4.0, b as f64 / 3.0));
                let a = (0..n)
                    .map(|i| (0..r).map(|_| (0..m[i]).map(|_| it.next().unwrap()).collect()).collect())
                    .collect();
                ExponentTuple::new(r, 0, m.clone(), a).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn classify_is_permutation_equivariant(t in arb_tuple(), rot in 0usize..4) {
            let opts = ClassifyOptions::default();
            let base = t.classify(&opts).unwrap();
            let n = t.n;
            let point_perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
            let label_perm: Vec<usize> = (0..t.r).rev().collect();
            let moved = t.permute_points(&point_perm).permute_labels(&label_perm);
            prop_assert_eq!(moved.classify(&opts).unwrap(), base);
        }

        #[test]
        fn formal_monodromy_ignores_integer_shifts(t in arb_tuple(), k in -3i32..4) {
            let mut shifted = t.clone();
            // Shift one residue up by k and another down by k: Fuchs is preserved.
            let last = shifted.m[0] - 1;
            shifted.a[0][0][last] += C64::new(k as f64, 0.0);
            shifted.a[0][1][last] -= C64::new(k as f64, 0.0);
            let a = t.formal_monodromy();
            let b = shifted.formal_monodromy();
            for (pa, pb) in a.eigenvalues.iter().zip(&b.eigenvalues) {
                for (x, y) in pa.iter().zip(pb) {
                    prop_assert!((x - y).norm() < 1e-9 * x.norm().max(1.0));
                }
            }
        }
    }
}
