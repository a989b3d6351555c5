//! Random points of the monodromy variety, for property tests and rank
//! experiments.

use std::f64::consts::TAU;

use rand::Rng;

use super::{GroupElement, MonodromyData, MonodromyError, PointData};
use crate::exponents::ExponentTuple;
use crate::linalg::{self, Matrix};
use crate::scalar::C64;
use crate::stokes;

fn rand_c<R: Rng>(rng: &mut R) -> C64 {
    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// Well-conditioned random invertible matrix.
pub fn random_matrix<R: Rng>(rng: &mut R, r: usize) -> Matrix<C64> {
    let mut out = Matrix::identity(r).scale(&C64::new(1.5, 0.0));
    for i in 0..r {
        for j in 0..r {
            out[(i, j)] += rand_c(rng) * 0.5;
        }
    }
    out
}

/// Unit-modulus-ish eigenvalue `exp(-2 pi i a)` for a random residue `a`.
fn random_formal_eigenvalue<R: Rng>(rng: &mut R) -> C64 {
    let a = C64::new(rng.gen_range(0.05..0.95), rng.gen_range(-0.2..0.2));
    (C64::new(0.0, -TAU) * a).exp()
}

/// A random point of the variety with pole orders `m`; the last point must
/// be Fuchsian, and its formal monodromy and link are solved from the
/// relation.
pub fn random_point<R: Rng>(rng: &mut R, r: usize, g: usize, m: &[usize]) -> Result<MonodromyData<C64>, MonodromyError> {
    let n = m.len();
    if n == 0 || m[n - 1] != 1 {
        return Err(MonodromyError::Shape("the last point must be Fuchsian".into()));
    }
    // Random tops for the direction tables.
    let a: Vec<Vec<Vec<C64>>> = m
        .iter()
        .map(|&mi| (0..r).map(|_| (0..mi).map(|_| rand_c(rng)).collect()).collect())
        .collect();
    let nu = ExponentTuple::new(r, 0, m.to_vec(), a).map_err(|e| MonodromyError::Shape(e.to_string()))?;
    let mut points = Vec::with_capacity(n);
    for i in 0..n - 1 {
        let mut table = stokes::singular_directions(&nu, i, 1e-9).map_err(|e| MonodromyError::Shape(e.to_string()))?;
        table.point = i;
        let stokes = (0..table.len())
            .map(|k| {
                let mut st = Matrix::identity(r);
                for (row, col) in super::stokes_pattern(&table, k) {
                    st[(row, col)] = rand_c(rng);
                }
                st
            })
            .collect();
        points.push(PointData {
            table,
            gamma_hat: (0..r).map(|_| random_formal_eigenvalue(rng)).collect(),
            stokes,
            link: random_matrix(rng, r),
        });
    }
    let handles: Vec<(Matrix<C64>, Matrix<C64>)> = (0..g).map(|_| (random_matrix(rng, r), random_matrix(rng, r))).collect();
    let mut partial = MonodromyData { r, points, handles };
    // mu = M_n X with X the product of everything else; solve M_n = X^{-1}.
    let x = partial.mu()?;
    let target = x.inverse().ok_or_else(|| MonodromyError::Singular { what: "partial product".into() })?;
    let (lambda, p) = linalg::eigen_decomposition(&target);
    let link = p.inverse().ok_or_else(|| MonodromyError::Singular { what: "eigenvector matrix".into() })?;
    let mut last = PointData::fuchsian(lambda, link);
    last.table.point = n - 1;
    // Insert before the handles act: points are ordered 1..n, last is n.
    partial.points.push(last);
    Ok(partial)
}

/// Every matrix diagonal (links identity, Stokes trivial): a reducible point
/// of the variety.
pub fn reducible_point<R: Rng>(rng: &mut R, r: usize, m: &[usize]) -> MonodromyData<C64> {
    let n = m.len();
    let mut points: Vec<PointData<C64>> = Vec::with_capacity(n);
    let mut prod = vec![C64::new(1.0, 0.0); r];
    for (i, &mi) in m.iter().enumerate() {
        let gamma: Vec<C64> = if i + 1 < n {
            (0..r).map(|_| random_formal_eigenvalue(rng)).collect()
        } else {
            prod.iter().map(|p| C64::new(1.0, 0.0) / p).collect()
        };
        for (acc, x) in prod.iter_mut().zip(&gamma) {
            *acc *= x;
        }
        let mut point = PointData::fuchsian(gamma, Matrix::identity(r));
        point.table.point = i;
        point.table.m = mi;
        if mi >= 2 {
            let a = vec![(0..r).map(|j| {
                let mut v = vec![C64::new(0.0, 0.0); mi];
                v[0] = C64::new(j as f64 + 1.0, 0.5 * j as f64);
                v
            }).collect()];
            let nu = ExponentTuple::new(r, 0, vec![mi], a).expect("well formed");
            let mut table = stokes::singular_directions(&nu, 0, 1e-9).expect("distinct tops");
            table.point = i;
            point.stokes = vec![Matrix::identity(r); table.len()];
            point.table = table;
        }
        points.push(point);
    }
    MonodromyData { r, points, handles: Vec::new() }
}

pub fn random_group_element<R: Rng>(rng: &mut R, r: usize, n: usize) -> GroupElement<C64> {
    GroupElement {
        sigma: random_matrix(rng, r),
        tori: (0..n)
            .map(|_| (0..r).map(|_| C64::from_polar(rng.gen_range(0.5..2.0), rng.gen_range(0.0..TAU))).collect())
            .collect(),
    }
}
