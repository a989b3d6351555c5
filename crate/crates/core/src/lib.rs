//! Computational toolkit for unramified irregular singular connections:
//! truncated Laurent series, formal normal forms, generalized exponents,
//! Stokes geometry, monodromy data, a numerical Riemann-Hilbert map and
//! isomonodromic flows.

pub mod exponents;
pub mod formal;
pub mod io;
pub mod iso;
pub mod linalg;
pub mod monodromy;
pub mod par;
pub mod rh;
pub mod scalar;
pub mod series;
pub mod series_matrix;
pub mod stokes;
