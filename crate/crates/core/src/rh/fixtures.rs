//! Reference connections used by tests, benches and the command line.

use crate::linalg::Matrix;
use crate::scalar::C64;

use super::connection::{Pole, RationalConnection};

fn m2(a: [[f64; 2]; 2]) -> Matrix<C64> {
    Matrix::from_fn(2, 2, |i, j| C64::new(a[i][j], 0.0))
}

/// Rank 2 with an order-two pole at 0 and Fuchsian points at 1 and
/// infinity: the pole-order pattern of the fifth Painleve equation. The
/// top coefficient is turned by `exp(i pi / 4)` so that its singular
/// directions stay clear of angle zero, where their labels wrap.
pub fn painleve_v() -> RationalConnection {
    let turn = C64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
    RationalConnection {
        r: 2,
        poles: vec![
            Pole {
                t: C64::new(0.0, 0.0),
                coeffs: vec![m2([[0.15, 0.1], [-0.2, 0.05]]), m2([[1.0, 0.3], [0.2, -0.8]]).scale(&turn)],
            },
            Pole {
                t: C64::new(1.0, 0.0),
                coeffs: vec![m2([[0.1, 0.25], [0.3, -0.2]])],
            },
        ],
        polynomial: Vec::new(),
        infinity: true,
        base: C64::new(0.5, 0.5),
        cut_angle: 90.0,
    }
}

/// Rank 2 Fuchsian with four points `0, 1, t, infinity`.
pub fn painleve_vi(t: C64) -> RationalConnection {
    RationalConnection {
        r: 2,
        poles: vec![
            Pole {
                t: C64::new(0.0, 0.0),
                coeffs: vec![m2([[0.2, 0.1], [0.3, -0.1]])],
            },
            Pole {
                t: C64::new(1.0, 0.0),
                coeffs: vec![m2([[-0.15, 0.2], [0.1, 0.25]])],
            },
            Pole {
                t,
                coeffs: vec![m2([[0.1, -0.3], [0.2, 0.05]])],
            },
        ],
        polynomial: Vec::new(),
        infinity: true,
        base: C64::new(0.5, -0.6),
        cut_angle: -90.0,
    }
}

/// `diag(1, -1) / z^2 + C / z` with infinity Fuchsian.
pub fn stokes_model(c: [[f64; 2]; 2]) -> RationalConnection {
    RationalConnection {
        r: 2,
        poles: vec![Pole {
            t: C64::new(0.0, 0.0),
            coeffs: vec![m2(c), m2([[1.0, 0.0], [0.0, -1.0]])],
        }],
        polynomial: Vec::new(),
        infinity: true,
        base: C64::new(1.0, 1.0),
        cut_angle: 45.0,
    }
}

/// `A = -g' g^{-1}` for `g = [[1, 1/z + 1/(z-1)], [0, 1]]`: every loop
/// monodromy is trivial.
pub fn trivial_monodromy() -> RationalConnection {
    RationalConnection {
        r: 2,
        poles: vec![
            Pole {
                t: C64::new(0.0, 0.0),
                coeffs: vec![m2([[0.0, 0.0], [0.0, 0.0]]), m2([[0.0, 1.0], [0.0, 0.0]])],
            },
            Pole {
                t: C64::new(1.0, 0.0),
                coeffs: vec![m2([[0.0, 0.0], [0.0, 0.0]]), m2([[0.0, 1.0], [0.0, 0.0]])],
            },
        ],
        polynomial: Vec::new(),
        infinity: false,
        base: C64::new(0.5, 0.5),
        cut_angle: 90.0,
    }
}
