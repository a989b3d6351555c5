//! Rational connections on the Riemann sphere in partial-fraction form.

use serde::{Deserialize, Serialize};

use crate::formal::FormalConnection;
use crate::linalg::Matrix;
use crate::scalar::C64;
use crate::series_matrix::SeriesMatrix;

use super::RhError;

/// `C_1 / (z - t) + ... + C_m / (z - t)^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pole {
    pub t: C64,
    /// `coeffs[k - 1]` multiplies `(z - t)^{-k}`.
    pub coeffs: Vec<Matrix<C64>>,
}

impl Pole {
    pub fn order(&self) -> usize {
        self.coeffs.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Location {
    Finite(C64),
    Infinity,
}

/// A marked point with its pole order; `source` indexes `poles`, or is
/// `None` for infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkedPoint {
    pub location: Location,
    pub m: usize,
    pub source: Option<usize>,
}

/// `A(z) dz` with `A = sum_i sum_k C_{i,k} (z - t_i)^{-k} + sum_k D_k z^k`.
/// Flat sections solve `Y' = -A Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalConnection {
    pub r: usize,
    pub poles: Vec<Pole>,
    /// `D_0, D_1, ...`; a nonzero `D_k` makes infinity a pole of order `k + 2`.
    #[serde(default)]
    pub polynomial: Vec<Matrix<C64>>,
    /// Whether infinity is one of the marked points.
    #[serde(default)]
    pub infinity: bool,
    pub base: C64,
    /// Direction of the cut ray from the base point, in degrees.
    #[serde(default)]
    pub cut_angle: f64,
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl RationalConnection {
    pub fn validate(&self) -> Result<(), RhError> {
        let r = self.r;
        if r == 0 {
            return Err(RhError::Input("rank must be positive".into()));
        }
        let square = |m: &Matrix<C64>| m.rows() == r && m.cols() == r;
        for (i, p) in self.poles.iter().enumerate() {
            if p.coeffs.is_empty() || !p.coeffs.iter().all(square) {
                return Err(RhError::Input(format!("pole {i} needs r x r coefficients")));
            }
            if p.coeffs.last().map_or(0.0, Matrix::max_abs) == 0.0 {
                return Err(RhError::Input(format!("leading coefficient of pole {i} vanishes")));
            }
            for (j, q) in self.poles.iter().enumerate().take(i) {
                if (p.t - q.t).norm() == 0.0 {
                    return Err(RhError::Input(format!("poles {j} and {i} coincide")));
                }
            }
        }
        if !self.polynomial.iter().all(square) {
            return Err(RhError::Input("polynomial part needs r x r coefficients".into()));
        }
        if self.infinity_order() > 0 && !self.infinity {
            return Err(RhError::Input("infinity is a pole but not marked".into()));
        }
        if !self.cut_angle.is_finite() || self.poles.iter().any(|p| !(p.t.re.is_finite() && p.t.im.is_finite())) {
            return Err(RhError::Input("non-finite geometry".into()));
        }
        Ok(())
    }

    fn polynomial_degree(&self) -> Option<usize> {
        self.polynomial.iter().rposition(|d| d.max_abs() > 0.0)
    }

    pub fn residue_at_infinity(&self) -> Matrix<C64> {
        let mut acc = Matrix::zeros(self.r, self.r);
        for p in &self.poles {
            acc = acc.sub(&p.coeffs[0]);
        }
        acc
    }

    /// Pole order of `A dz` at infinity, 0 when it is regular there.
    pub fn infinity_order(&self) -> usize {
        match self.polynomial_degree() {
            Some(d) => d + 2,
            None => usize::from(self.residue_at_infinity().max_abs() > 0.0),
        }
    }

    /// Marked points: finite poles in input order, then infinity if marked.
    pub fn points(&self) -> Vec<MarkedPoint> {
        let mut out: Vec<MarkedPoint> = self
            .poles
            .iter()
            .enumerate()
            .map(|(i, p)| MarkedPoint {
                location: Location::Finite(p.t),
                m: p.order(),
                source: Some(i),
            })
            .collect();
        if self.infinity {
            out.push(MarkedPoint {
                location: Location::Infinity,
                m: self.infinity_order().max(1),
                source: None,
            });
        }
        out
    }

    pub fn eval(&self, z: C64) -> Matrix<C64> {
        let r = self.r;
        let mut acc = Matrix::zeros(r, r);
        for p in &self.poles {
            let u = (z - p.t).inv();
            let mut pw = u;
            for c in &p.coeffs {
                acc = acc.add(&c.scale(&pw));
                pw *= u;
            }
        }
        let mut pw = C64::new(1.0, 0.0);
        for d in &self.polynomial {
            acc = acc.add(&d.scale(&pw));
            pw *= z;
        }
        acc
    }

    pub fn trace_eval(&self, z: C64) -> C64 {
        self.eval(z).trace()
    }

    /// Distance from `z` to the nearest finite pole.
    pub fn pole_distance(&self, z: C64) -> f64 {
        self.poles.iter().map(|p| (z - p.t).norm()).fold(f64::INFINITY, f64::min)
    }

    /// Taylor coefficients `A_0..A_{n-1}` of `A(z0 + h)` in `h`.
    pub fn taylor(&self, z0: C64, n: usize) -> Vec<Matrix<C64>> {
        let r = self.r;
        let mut out = vec![Matrix::zeros(r, r); n];
        for p in &self.poles {
            let u = z0 - p.t;
            let ui = u.inv();
            for (k1, c) in p.coeffs.iter().enumerate() {
                let k = (k1 + 1) as f64;
                // (u + h)^{-k} = sum_l c_l h^l
                let mut cl = ui.powi(k1 as i32 + 1);
                for (l, slot) in out.iter_mut().enumerate() {
                    if l > 0 {
                        cl *= -(k + l as f64 - 1.0) / l as f64 * ui;
                    }
                    *slot = slot.add(&c.scale(&cl));
                }
            }
        }
        for (k, d) in self.polynomial.iter().enumerate() {
            for (l, slot) in out.iter_mut().enumerate().take(k + 1) {
                let c = z0.powi((k - l) as i32) * binom(k, l);
                *slot = slot.add(&d.scale(&c));
            }
        }
        out
    }

    /// Expansion of `A` in the local coordinate at a marked point (`z - t`,
    /// or `w = 1/z` at infinity with `A dz = -A(1/w) w^{-2} dw`), known to
    /// order `depth - m`.
    pub fn local_formal(&self, point: &MarkedPoint, depth: i64) -> Result<FormalConnection<C64>, RhError> {
        let r = self.r;
        let m = point.m;
        let order = depth - m as i64;
        let mut coeffs: Vec<Matrix<C64>> = vec![Matrix::zeros(r, r); depth.max(0) as usize];
        let idx = |e: i64| (e + m as i64) as usize;
        match point.location {
            Location::Finite(t) => {
                let own = point.source.expect("finite point has a pole");
                for (k1, c) in self.poles[own].coeffs.iter().enumerate() {
                    let e = -(k1 as i64 + 1);
                    coeffs[idx(e)] = coeffs[idx(e)].add(c);
                }
                let others = RationalConnection {
                    poles: self
                        .poles
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| *i != own)
                        .map(|(_, p)| p.clone())
                        .collect(),
                    ..self.clone()
                };
                let n_reg = order.max(0) as usize;
                for (e, a) in others.taylor(t, n_reg).into_iter().enumerate() {
                    let j = idx(e as i64);
                    coeffs[j] = coeffs[j].add(&a);
                }
            }
            Location::Infinity => {
                for p in &self.poles {
                    let t = p.t;
                    for (k1, c) in p.coeffs.iter().enumerate() {
                        let k = k1 + 1;
                        // -C w^{k-2} (1 - t w)^{-k}
                        let mut n = 0usize;
                        loop {
                            let e = (k + n) as i64 - 2;
                            if e >= order {
                                break;
                            }
                            let f = -t.powi(n as i32) * binom(k + n - 1, n);
                            coeffs[idx(e)] = coeffs[idx(e)].add(&c.scale(&f));
                            n += 1;
                        }
                    }
                }
                for (k, d) in self.polynomial.iter().enumerate() {
                    let e = -(k as i64) - 2;
                    if e < -(m as i64) {
                        continue;
                    }
                    coeffs[idx(e)] = coeffs[idx(e)].sub(d);
                }
            }
        }
        let a = SeriesMatrix::from_coefficients(&coeffs, -(m as i64), order);
        Ok(FormalConnection::new(m, depth, a)?)
    }

    /// `z` for a local coordinate value at a marked point.
    pub fn from_local(point: &MarkedPoint, zeta: C64) -> C64 {
        match point.location {
            Location::Finite(t) => t + zeta,
            Location::Infinity => zeta.inv(),
        }
    }

    /// Scalar Fuchsian model `c / z` (rank one, infinity marked).
    pub fn scalar_log(c: C64) -> Self {
        Self {
            r: 1,
            poles: vec![Pole {
                t: C64::new(0.0, 0.0),
                coeffs: vec![Matrix::from_rows(vec![vec![c]])],
            }],
            polynomial: Vec::new(),
            infinity: true,
            base: C64::new(1.0, 0.0),
            cut_angle: 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::Series;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn m2(a: [[f64; 2]; 2]) -> Matrix<C64> {
        Matrix::from_fn(2, 2, |i, j| c(a[i][j], 0.0))
    }

    fn eval_series(s: &Series<C64>, zeta: C64) -> C64 {
        s.terms().fold(C64::new(0.0, 0.0), |acc, (e, c)| acc + c * zeta.powi(e as i32))
    }

    fn sample() -> RationalConnection {
        RationalConnection {
            r: 2,
            poles: vec![
                Pole {
                    t: c(0.0, 0.0),
                    coeffs: vec![m2([[0.3, 0.1], [0.2, -0.1]]), m2([[1.0, 0.0], [0.0, -1.0]])],
                },
                Pole {
                    t: c(1.0, 0.5),
                    coeffs: vec![m2([[0.2, 0.4], [0.1, 0.05]])],
                },
            ],
            polynomial: vec![m2([[0.1, 0.0], [0.3, 0.2]]), m2([[0.0, 0.5], [0.0, 0.0]])],
            infinity: true,
            base: c(0.5, 0.5),
            cut_angle: 90.0,
        }
    }

    #[test]
    fn taylor_matches_evaluation() {
        let conn = sample();
        let z0 = c(0.4, -0.3);
        let coeffs = conn.taylor(z0, 40);
        let h = c(0.05, 0.07);
        let mut acc = Matrix::zeros(2, 2);
        let mut pw = c(1.0, 0.0);
        for a in &coeffs {
            acc = acc.add(&a.scale(&pw));
            pw *= h;
        }
        assert!(acc.max_abs_diff(&conn.eval(z0 + h)) < 1e-12);
    }

    #[test]
    fn local_expansions_match_evaluation() {
        let conn = sample();
        for p in conn.points() {
            let f = conn.local_formal(&p, 40).unwrap();
            let zeta = match p.location {
                Location::Finite(_) => c(0.05, 0.03),
                Location::Infinity => c(0.04, -0.02),
            };
            let z = RationalConnection::from_local(&p, zeta);
            let mut local = Matrix::zeros(2, 2);
            for i in 0..2 {
                for j in 0..2 {
                    local[(i, j)] = eval_series(f.a.get(i, j), zeta);
                }
            }
            // A dz = A_loc dzeta, dz/dzeta = 1 or -1/w^2.
            let expect = match p.location {
                Location::Finite(_) => conn.eval(z),
                Location::Infinity => conn.eval(z).scale(&(-zeta.powi(-2))),
            };
            assert!(local.max_abs_diff(&expect) < 1e-9 * expect.max_abs().max(1.0), "{:?}", p.location);
        }
        assert_eq!(conn.infinity_order(), 3);
    }
}
