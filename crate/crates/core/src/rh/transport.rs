//! Parallel transport by adaptive Taylor stepping.
//!
//! At each point the partial-fraction expansion gives the Taylor
//! coefficients of `A` exactly, and the local propagator `P(h)` with
//! `P' = -A P`, `P(0) = I` follows from `(n+1) P_{n+1} = -sum A_l P_{n-l}`.
//! Steps stay inside half the distance to the nearest pole and are shrunk
//! until the truncated tail is below tolerance.

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::scalar::C64;

use super::connection::RationalConnection;
use super::path::Path;
use super::RhError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportOptions {
    /// Bound on the dropped Taylor tail per step.
    pub tol: f64,
    /// Paths may not come closer than this to a pole.
    pub clearance: f64,
    pub max_order: usize,
    pub max_steps: usize,
    /// Largest angle subtended by one chord of an arc.
    pub max_angle: f64,
}

impl Default for TransportOptions {
    fn default() -> Self {
        Self {
            tol: 1e-14,
            clearance: 1e-6,
            max_order: 48,
            max_steps: 500_000,
            max_angle: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transport {
    /// The fundamental solution equal to `I` at the start has this value at
    /// the end. Columns are solutions.
    pub matrix: Matrix<C64>,
    pub steps: usize,
    pub min_clearance: f64,
}

/// Flat row-major `r x r` buffers; the step loop is hot.
struct Work {
    r: usize,
    a: Vec<Vec<C64>>,
    p: Vec<Vec<C64>>,
}

impl Work {
    fn new(r: usize, k: usize) -> Self {
        Self {
            r,
            a: vec![vec![C64::new(0.0, 0.0); r * r]; k],
            p: vec![vec![C64::new(0.0, 0.0); r * r]; k],
        }
    }

    fn load(&mut self, coeffs: &[Matrix<C64>]) {
        for (dst, src) in self.a.iter_mut().zip(coeffs) {
            dst.copy_from_slice(src.entries());
        }
    }

    /// Fills `p` and returns the max-entry norm of each `P_n`.
    fn propagate(&mut self) -> Vec<f64> {
        let r = self.r;
        let k = self.p.len();
        let mut norms = vec![0.0; k];
        for x in self.p[0].iter_mut() {
            *x = C64::new(0.0, 0.0);
        }
        for i in 0..r {
            self.p[0][i * r + i] = C64::new(1.0, 0.0);
        }
        norms[0] = 1.0;
        let mut acc = vec![C64::new(0.0, 0.0); r * r];
        for n in 0..k - 1 {
            acc.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
            for l in 0..=n {
                let al = &self.a[l];
                let pm = &self.p[n - l];
                for i in 0..r {
                    for q in 0..r {
                        let aiq = al[i * r + q];
                        if aiq.re == 0.0 && aiq.im == 0.0 {
                            continue;
                        }
                        for j in 0..r {
                            acc[i * r + j] += aiq * pm[q * r + j];
                        }
                    }
                }
            }
            let f = -1.0 / (n + 1) as f64;
            let mut nrm: f64 = 0.0;
            for (dst, x) in self.p[n + 1].iter_mut().zip(&acc) {
                *dst = x * f;
                nrm = nrm.max(dst.norm());
            }
            norms[n + 1] = nrm;
        }
        norms
    }

    fn sum(&self, h: C64) -> Matrix<C64> {
        let r = self.r;
        let mut s = self.p[self.p.len() - 1].clone();
        for n in (0..self.p.len() - 1).rev() {
            for (x, y) in s.iter_mut().zip(&self.p[n]) {
                *x = *x * h + y;
            }
        }
        Matrix::from_fn(r, r, |i, j| s[i * r + j])
    }
}

const GROWTH_CAP: f64 = 30.0;

/// Largest step length `<= s0` with a small tail and bounded terms.
fn step_length(norms: &[f64], s0: f64, tol: f64) -> f64 {
    let k = norms.len();
    let ok = |s: f64| {
        let mut pw = 1.0;
        let mut tail = 0.0;
        for (n, &v) in norms.iter().enumerate() {
            let t = v * pw;
            if t > GROWTH_CAP {
                return false;
            }
            if n + 2 >= k {
                tail += t;
            }
            pw *= s;
        }
        tail <= tol
    };
    let mut s = s0;
    while s > 0.0 && !ok(s) {
        s *= 0.8;
    }
    s
}

/// Transports along `path`, returning the propagator.
pub fn transport(conn: &RationalConnection, path: &Path, opts: &TransportOptions) -> Result<Transport, RhError> {
    let r = conn.r;
    let mut phi = Matrix::identity(r);
    let mut steps = 0usize;
    let mut min_clearance = f64::INFINITY;
    let mut work = Work::new(r, opts.max_order.max(4));
    let pts = path.waypoints(opts.max_angle);
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mut z = a;
        loop {
            let rem = b - z;
            let len = rem.norm();
            if len <= 1e-15 * (1.0 + b.norm()) {
                break;
            }
            let dist = conn.pole_distance(z);
            min_clearance = min_clearance.min(dist);
            if dist < opts.clearance {
                return Err(RhError::PathTooClose { z, distance: dist });
            }
            work.load(&conn.taylor(z, work.a.len()));
            let norms = work.propagate();
            let s0 = len.min(0.5 * dist);
            let s = step_length(&norms, s0, opts.tol);
            if s < 1e-13 * (1.0 + z.norm()) {
                return Err(RhError::ToleranceNotMet { z, step: s });
            }
            let h = if s >= len { rem } else { rem * (s / len) };
            phi = work.sum(h).mul(&phi);
            z = if s >= len { b } else { z + h };
            steps += 1;
            if steps > opts.max_steps {
                return Err(RhError::ToleranceNotMet { z, step: s });
            }
        }
    }
    if let Some(end) = path.end() {
        min_clearance = min_clearance.min(conn.pole_distance(end));
    }
    Ok(Transport {
        matrix: phi,
        steps,
        min_clearance,
    })
}

/// `integral of tr A dz` along `path`, from the antiderivative of the
/// partial fractions with the logarithms tracked across short chords.
pub fn trace_integral(conn: &RationalConnection, path: &Path, max_angle: f64) -> C64 {
    let traces: Vec<(C64, Vec<C64>)> = conn
        .poles
        .iter()
        .map(|p| (p.t, p.coeffs.iter().map(Matrix::trace).collect()))
        .collect();
    let poly: Vec<C64> = conn.polynomial.iter().map(Matrix::trace).collect();
    let prim = |z: C64| -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (t, tr) in &traces {
            for (k1, c) in tr.iter().enumerate().skip(1) {
                let e = -(k1 as i32);
                acc += c * (z - t).powi(e) / e as f64;
            }
        }
        for (k, c) in poly.iter().enumerate() {
            acc += c * z.powi(k as i32 + 1) / (k + 1) as f64;
        }
        acc
    };
    let log_part = |a: C64, b: C64| -> C64 {
        traces
            .iter()
            .map(|(t, tr)| tr[0] * ((b - t) / (a - t)).ln())
            .sum()
    };
    let pts = path.waypoints(max_angle);
    let mut total = C64::new(0.0, 0.0);
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        total += prim(b) - prim(a);
        let mut z = a;
        while (b - z).norm() > 0.0 {
            let dist = conn.pole_distance(z);
            let rem = b - z;
            let s = rem.norm().min(0.25 * dist);
            let next = if s >= rem.norm() { b } else { z + rem * (s / rem.norm()) };
            total += log_part(z, next);
            z = next;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{PI, TAU};

    use super::super::connection::Pole;
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn scalar_loop_matches_closed_form() {
        let k = c(0.3, -0.2);
        let conn = RationalConnection::scalar_log(k);
        let opts = TransportOptions::default();
        let ccw = transport(&conn, &Path::circle(c(0.0, 0.0), 1.0, 0.0), &opts).unwrap();
        let expect = (c(0.0, -TAU) * k).exp();
        assert!((ccw.matrix[(0, 0)] - expect).norm() < 1e-12);
        let cw = transport(&conn, &Path::circle(c(0.0, 0.0), 1.0, 0.0).reversed(), &opts).unwrap();
        assert!((cw.matrix[(0, 0)] - (c(0.0, TAU) * k).exp()).norm() < 1e-12);
    }

    #[test]
    fn irregular_scalar_matches_exponential() {
        // A = a/z^2 + b/z: Y = exp(a/z) z^{-b}.
        let (a, b) = (c(1.0, 0.5), c(0.25, 0.0));
        let conn = RationalConnection {
            r: 1,
            poles: vec![Pole {
                t: c(0.0, 0.0),
                coeffs: vec![Matrix::diag(&[b]), Matrix::diag(&[a])],
            }],
            polynomial: Vec::new(),
            infinity: true,
            base: c(1.0, 0.0),
            cut_angle: 0.0,
        };
        let y = |rad: f64, ang: f64| {
            let z = C64::from_polar(rad, ang);
            (a / z).exp() * (-b * c(rad.ln(), ang)).exp()
        };
        let path = Path::line(c(1.0, 0.0), c(0.3, 0.0)).then(&Path::arc(c(0.0, 0.0), 0.3, 0.0, 2.0));
        let t = transport(&conn, &path, &TransportOptions::default()).unwrap();
        let expect = y(0.3, 2.0) / y(1.0, 0.0);
        assert!((t.matrix[(0, 0)] / expect - 1.0).norm() < 1e-11, "{} vs {}", t.matrix[(0, 0)], expect);
    }

    #[test]
    fn rejects_paths_through_poles() {
        let conn = RationalConnection::scalar_log(c(0.5, 0.0));
        let err = transport(&conn, &Path::line(c(-1.0, 0.0), c(1.0, 0.0)), &TransportOptions::default()).unwrap_err();
        assert!(matches!(err, RhError::PathTooClose { .. }));
    }

    #[test]
    fn trace_integral_winds() {
        let conn = RationalConnection::scalar_log(c(1.0, 0.0));
        let v = trace_integral(&conn, &Path::circle(c(0.0, 0.0), 2.0, 0.5), 0.2);
        assert!((v - c(0.0, 2.0 * PI)).norm() < 1e-12);
    }
}
