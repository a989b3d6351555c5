use std::f64::consts::TAU;

use stokeslab::iso::{self, IsoOptions};
use stokeslab::linalg::{eigenvalues, Matrix};
use stokeslab::rh::{self, fixtures, RationalConnection, RhOptions};
use stokeslab::scalar::C64;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

// Distance between two multisets of two complex numbers.
fn pair_gap(a: &[C64], b: &[C64]) -> f64 {
    let straight = (a[0] - b[0]).norm().max((a[1] - b[1]).norm());
    let crossed = (a[0] - b[1]).norm().max((a[1] - b[0]).norm());
    straight.min(crossed)
}

#[test]
fn fuchsian_loops_have_exponential_spectrum() {
    let conn = fixtures::painleve_vi(c(0.3, 1.4));
    let opts = RhOptions::default();
    let res = rh::full_monodromy_data(&conn, &opts).unwrap();
    let loops = rh::loop_monodromies(&conn, &opts).unwrap();
    for (pos, m) in loops.iter().enumerate() {
        let want: Vec<C64> = (0..2)
            .map(|j| (c(0.0, -TAU) * res.exponents.residue(pos, j)).exp())
            .collect();
        let gap = pair_gap(&eigenvalues(m), &want);
        assert!(gap < 1e-9, "loop {pos}: spectrum off by {gap:e}");
    }
    // The product of the loops in order is the identity.
    let prod = loops.iter().fold(Matrix::identity(2), |acc, m| m.mul(&acc));
    assert!(prod.max_abs_diff(&Matrix::identity(2)) < 1e-9);
}

fn conjugate(conn: &RationalConnection, p: &Matrix<C64>) -> RationalConnection {
    let pi = p.inverse().unwrap();
    let mut out = conn.clone();
    for pole in &mut out.poles {
        for a in &mut pole.coeffs {
            *a = p.mul(a).mul(&pi);
        }
    }
    for d in &mut out.polynomial {
        *d = p.mul(d).mul(&pi);
    }
    out
}

#[test]
fn constant_gauge_leaves_monodromy_class_fixed() {
    let p = Matrix::from_rows(vec![vec![c(1.0, 0.2), c(0.4, 0.0)], vec![c(-0.3, 0.1), c(0.9, -0.5)]]);
    let opts = IsoOptions::default();
    for conn in [fixtures::painleve_v(), fixtures::painleve_vi(c(0.3, 1.4))] {
        let moved = conjugate(&conn, &p);
        let drift = iso::monodromy_drift(&conn, &moved, &opts).unwrap();
        assert!(drift < 1e-8, "conjugation changed the class by {drift:e}");
    }
}

#[test]
fn tightening_the_integrator_converges() {
    let conn = fixtures::painleve_v();
    let at = |tol: f64| {
        let mut opts = RhOptions::default();
        opts.transport.tol = tol;
        let res = rh::full_monodromy_data(&conn, &opts).unwrap();
        res.data.normalize(1e-9).unwrap()
    };
    let (coarse, mid, fine) = (at(1e-10), at(1e-12), at(1e-14));
    let d1 = coarse.max_abs_diff(&fine);
    let d2 = mid.max_abs_diff(&fine);
    assert!(d1 < 1e-7, "coarse run off by {d1:e}");
    assert!(d2 < 1e-9, "middle run off by {d2:e}");
    assert!(d2 <= d1 + 1e-12);
}

#[test]
fn moving_the_base_point_keeps_the_class() {
    let conn = fixtures::painleve_v();
    let mut moved = conn.clone();
    moved.base = c(0.45, 0.6);
    let drift = iso::monodromy_drift(&conn, &moved, &IsoOptions::default()).unwrap();
    assert!(drift < 1e-8, "base point change moved the class by {drift:e}");
}
