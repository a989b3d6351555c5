//! Sector solutions, Stokes matrices, links, and assembly of the full
//! monodromy data.
//!
//! Sector solutions are seeded on the sector bisector at a small radius
//! where the least term of the formal series is below tolerance, then
//! carried radially out to the matching circle. Along bisectors the
//! exponential factors stay balanced, so the radial leg is well
//! conditioned; crossing a singular direction happens on the circle where
//! the dominance ratio is moderate.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::exponents::ExponentTuple;
use crate::linalg::Matrix;
use crate::monodromy::{stokes_pattern, MonodromyData, PointData};
use crate::par::{self, ExecMode};
use crate::scalar::C64;
use crate::stokes::{singular_directions, SingularDirectionTable};

use super::connection::{Location, MarkedPoint, RationalConnection};
use super::local::LocalSolution;
use super::path::{segment_distance, Path};
use super::transport::{transport, TransportOptions};
use super::RhError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhOptions {
    pub transport: TransportOptions,
    /// Depth of the formal expansion at irregular points.
    pub irregular_depth: i64,
    /// Depth of the convergent expansion at Fuchsian points.
    pub fuchsian_depth: i64,
    /// Target size of the least term at the seeding radius.
    pub match_tol: f64,
    /// Largest tolerated deviation of a Stokes matrix from its pattern.
    pub support_tol: f64,
    /// Tolerance for distinct leading eigenvalues.
    pub eigen_tol: f64,
    pub mode: ExecMode,
}

impl Default for RhOptions {
    fn default() -> Self {
        Self {
            transport: TransportOptions::default(),
            irregular_depth: 72,
            fuchsian_depth: 90,
            match_tol: 1e-14,
            support_tol: 1e-6,
            eigen_tol: 1e-9,
            mode: ExecMode::Parallel,
        }
    }
}

/// A sector solution at one irregular point.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorSolution {
    /// 1-based sector index; `s + 1` is sector 1 one turn later.
    pub k: usize,
    pub bisector: f64,
    /// Seeding radius and truncation order of the formal gauge there.
    pub rho: f64,
    pub terms: usize,
    /// Size of the least term at the seed.
    pub least_term: f64,
    /// `(z, F(z))` at the seed and on the matching circle.
    pub samples: Vec<(C64, Matrix<C64>)>,
}

impl SectorSolution {
    pub fn at_circle(&self) -> &Matrix<C64> {
        &self.samples.last().expect("two samples").1
    }
}

/// Numerical diagnostics for one marked point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCheck {
    /// Index into `RationalConnection::points`.
    pub source: usize,
    pub radius: f64,
    /// Largest off-pattern entry (or diagonal defect) of the raw Stokes
    /// matrices before they are projected onto their pattern.
    pub support_error: f64,
    /// `gamma_hat St_s ... St_1` against the directly transported loop.
    pub top_error: f64,
    /// Loop monodromy from `L^{-1} Top L` against the transported loop.
    pub loop_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RhResult {
    /// Points in loop order.
    pub data: MonodromyData<C64>,
    /// `order[i]` is the index into `points()` of loop position `i`.
    pub order: Vec<usize>,
    pub exponents: ExponentTuple,
    pub residual: f64,
    pub checks: Vec<PointCheck>,
}

impl RhResult {
    pub fn max_top_error(&self) -> f64 {
        self.checks.iter().map(|c| c.top_error).fold(0.0, f64::max)
    }

    pub fn max_support_error(&self) -> f64 {
        self.checks.iter().map(|c| c.support_error).fold(0.0, f64::max)
    }
}

/// Placement of the local picture at one marked point.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub point: MarkedPoint,
    /// Circle radius in `z` (about `t`, or about 0 at infinity).
    pub radius: f64,
    /// Angle of the anchor in the local coordinate.
    pub anchor_arg: f64,
    pub anchor: C64,
    /// From the base point to the anchor.
    pub path: Path,
    /// The loop around the point, starting and ending at the anchor.
    pub circle: Path,
}

fn wrap(a: f64) -> f64 {
    let x = (a + PI).rem_euclid(TAU) - PI;
    if x <= -PI {
        x + TAU
    } else {
        x
    }
}

/// Circle radii and the loop order: finite points by angle seen from the
/// base point, counterclockwise from the cut ray, then infinity.
pub fn loop_order(conn: &RationalConnection) -> Result<(Vec<usize>, Vec<f64>), RhError> {
    conn.validate()?;
    let pts = conn.points();
    let b = conn.base;
    let finite: Vec<(usize, C64)> = pts
        .iter()
        .enumerate()
        .filter_map(|(i, p)| match p.location {
            Location::Finite(t) => Some((i, t)),
            Location::Infinity => None,
        })
        .collect();
    let mut radii = vec![0.0; pts.len()];
    for &(i, t) in &finite {
        let others = finite
            .iter()
            .filter(|(j, _)| *j != i)
            .map(|(_, u)| (t - u).norm())
            .fold(f64::INFINITY, f64::min);
        let to_base = (b - t).norm();
        if to_base == 0.0 {
            return Err(RhError::Input("base point is a pole".into()));
        }
        radii[i] = (0.4 * others).min(to_base / 1.5).min(1.0);
    }
    let reach = finite.iter().map(|(_, t)| t.norm()).fold(b.norm(), f64::max);
    let r_inf = 2.5 * reach.max(0.5);
    if let Some(i) = pts.iter().position(|p| p.location == Location::Infinity) {
        radii[i] = r_inf;
    }
    // Segments from the base to each point, and the cut ray, must keep
    // clear of the other circles.
    let cut = conn.cut_angle.to_radians();
    let ray_end = b + C64::from_polar(2.0 * r_inf + b.norm(), cut);
    for &(i, t) in &finite {
        if segment_distance(t, b, ray_end) <= radii[i] {
            return Err(RhError::NotStarShaped);
        }
        for &(j, u) in &finite {
            if i != j && segment_distance(u, b, t) <= radii[j] {
                return Err(RhError::NotStarShaped);
            }
        }
    }
    let mut order: Vec<(f64, usize)> = finite
        .iter()
        .map(|&(i, t)| {
            let a = (t - b).arg() - cut;
            (a.rem_euclid(TAU), i)
        })
        .collect();
    order.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut out: Vec<usize> = order.into_iter().map(|(_, i)| i).collect();
    if let Some(i) = pts.iter().position(|p| p.location == Location::Infinity) {
        out.push(i);
    }
    Ok((out, radii))
}

fn geometry(conn: &RationalConnection, point: &MarkedPoint, radius: f64, anchor_arg: Option<f64>) -> Geometry {
    let b = conn.base;
    match point.location {
        Location::Finite(t) => {
            let toward = (b - t).arg();
            let theta = anchor_arg.unwrap_or(toward);
            let entry = t + C64::from_polar(radius, toward);
            let sweep = wrap(theta - toward);
            let mut path = Path::line(b, entry);
            if sweep != 0.0 {
                path = path.then(&Path::arc(t, radius, toward, sweep));
            }
            Geometry {
                point: *point,
                radius,
                anchor_arg: theta,
                anchor: t + C64::from_polar(radius, theta),
                path,
                circle: Path::circle(t, radius, theta),
            }
        }
        Location::Infinity => {
            // Where the cut ray from the base leaves the disc |z| < radius.
            let u = C64::from_polar(1.0, conn.cut_angle.to_radians());
            let bu = (b * u.conj()).re;
            let s = -bu + (bu * bu - b.norm_sqr() + radius * radius).sqrt();
            let anchor = b + u * s;
            let za = anchor.arg();
            Geometry {
                point: *point,
                radius,
                anchor_arg: -za,
                anchor,
                path: Path::line(b, anchor),
                circle: Path::arc(C64::new(0.0, 0.0), radius, za, -TAU),
            }
        }
    }
}

/// Local coordinate of `z` near a marked point.
fn local_coord(point: &MarkedPoint, z: C64) -> C64 {
    match point.location {
        Location::Finite(t) => z - t,
        Location::Infinity => z.inv(),
    }
}

/// Singular directions at an irregular point, from its local exponents.
pub fn point_table(local: &LocalSolution, point_index: usize, direction_tol: f64) -> Result<SingularDirectionTable, RhError> {
    let r = local.r();
    let m = local.m();
    let a = vec![(0..r).map(|j| local.coefficients(j)).collect()];
    let single = ExponentTuple {
        r,
        d: 0,
        n: 1,
        m: vec![m],
        a,
    };
    let mut table = singular_directions(&single, 0, direction_tol)?;
    table.point = point_index;
    Ok(table)
}

/// Seed the sector solution with bisector `phi` and carry it to the circle.
fn sector_solution(
    conn: &RationalConnection,
    local: &LocalSolution,
    k: usize,
    phi: f64,
    radius: f64,
    opts: &RhOptions,
) -> Result<SectorSolution, RhError> {
    let t = match local.point.location {
        Location::Finite(t) => t,
        Location::Infinity => return Err(RhError::IrregularInfinity),
    };
    let mut rho = 0.5 * radius;
    let (terms, least) = loop {
        let (n, v) = local.least_term(rho);
        if v <= opts.match_tol {
            break (n, v);
        }
        rho *= 0.9;
        if rho < 1e-3 * radius {
            return Err(RhError::MatchingRadiusNotFound {
                point: local.point.source.unwrap_or(usize::MAX),
            });
        }
    };
    let zeta = C64::from_polar(rho, phi);
    let seed = local.solution(zeta, phi, terms);
    let out = transport(conn, &Path::line(t + zeta, t + C64::from_polar(radius, phi)), &opts.transport)?;
    let at_circle = out.matrix.mul(&seed);
    Ok(SectorSolution {
        k,
        bisector: phi,
        rho,
        terms,
        least_term: least,
        samples: vec![(t + zeta, seed), (t + C64::from_polar(radius, phi), at_circle)],
    })
}

/// Sector bisectors `phi_1..phi_s`, with `phi_1` the base angle.
fn bisectors(table: &SingularDirectionTable) -> Vec<f64> {
    (1..=table.len()).map(|k| 0.5 * (table.angle(k - 1) + table.angle(k))).collect()
}

/// Sector solution `F_k` (1-based) at point `point_index` of `points()`.
pub fn sector_fundamental_matrix(
    conn: &RationalConnection,
    point_index: usize,
    k: usize,
    opts: &RhOptions,
) -> Result<SectorSolution, RhError> {
    let (_, radii) = loop_order(conn)?;
    let point = conn.points()[point_index];
    let local = LocalSolution::compute(conn, &point, opts.irregular_depth, opts.eigen_tol)?;
    let table = point_table(&local, point_index, 1e-9)?;
    if k == 0 || k > table.len() {
        return Err(RhError::Input(format!("sector {k} out of range 1..={}", table.len())));
    }
    sector_solution(conn, &local, k, bisectors(&table)[k - 1], radii[point_index], opts)
}

/// Raw Stokes data at an irregular point.
struct StokesRun {
    table: SingularDirectionTable,
    stokes: Vec<Matrix<C64>>,
    support_error: f64,
    /// `F_1` on the circle, at the anchor.
    anchor_solution: Matrix<C64>,
}

fn stokes_run(
    conn: &RationalConnection,
    local: &LocalSolution,
    point_index: usize,
    radius: f64,
    opts: &RhOptions,
) -> Result<StokesRun, RhError> {
    let t = match local.point.location {
        Location::Finite(t) => t,
        Location::Infinity => return Err(RhError::IrregularInfinity),
    };
    let table = point_table(local, point_index, 1e-9)?;
    let phis = bisectors(&table);
    let s = phis.len();
    let sectors: Vec<Result<SectorSolution, RhError>> = par::map_range(opts.mode, s, |k| {
        sector_solution(conn, local, k + 1, phis[k], radius, opts)
    });
    let sectors: Vec<SectorSolution> = sectors.into_iter().collect::<Result<_, _>>()?;
    let gamma = Matrix::diag(&local.gamma_hat());
    let arcs: Vec<Result<Matrix<C64>, RhError>> = par::map_range(opts.mode, s, |k| {
        let next = if k + 1 < s { phis[k + 1] } else { phis[0] + TAU };
        Ok(transport(conn, &Path::arc(t, radius, phis[k], next - phis[k]), &opts.transport)?.matrix)
    });
    let mut stokes = Vec::with_capacity(s);
    let mut support_error: f64 = 0.0;
    for (k, arc) in arcs.into_iter().enumerate() {
        let arc = arc?;
        let target = if k + 1 < s {
            sectors[k + 1].at_circle().clone()
        } else {
            sectors[0].at_circle().mul(&gamma)
        };
        let inv = target
            .inverse()
            .ok_or_else(|| RhError::Singular(format!("sector solution {}", k + 2)))?;
        let raw = inv.mul(&arc).mul(sectors[k].at_circle());
        let pattern = stokes_pattern(&table, k);
        let r = raw.rows();
        let mut clean = Matrix::identity(r);
        for i in 0..r {
            for j in 0..r {
                if pattern.contains(&(i, j)) {
                    clean[(i, j)] = raw[(i, j)];
                    continue;
                }
                let dev = if i == j {
                    (raw[(i, j)] - 1.0).norm()
                } else {
                    raw[(i, j)].norm()
                };
                if dev > opts.support_tol {
                    return Err(RhError::SupportViolation {
                        point: point_index,
                        k: k + 1,
                        row: i,
                        col: j,
                        value: dev,
                    });
                }
                support_error = support_error.max(dev);
            }
        }
        stokes.push(clean);
    }
    Ok(StokesRun {
        table,
        stokes,
        support_error,
        anchor_solution: sectors[0].at_circle().clone(),
    })
}

/// Stokes matrix across `d_k` (1-based) at point `point_index`, projected
/// onto its pattern.
pub fn stokes_matrix(
    conn: &RationalConnection,
    point_index: usize,
    k: usize,
    opts: &RhOptions,
) -> Result<Matrix<C64>, RhError> {
    let (_, radii) = loop_order(conn)?;
    let point = conn.points()[point_index];
    let local = LocalSolution::compute(conn, &point, opts.irregular_depth, opts.eigen_tol)?;
    let run = stokes_run(conn, &local, point_index, radii[point_index], opts)?;
    if k == 0 || k > run.stokes.len() {
        return Err(RhError::Input(format!("direction {k} out of range 1..={}", run.stokes.len())));
    }
    Ok(run.stokes[k - 1].clone())
}

struct PointOutcome {
    data: PointData<C64>,
    exponents: Vec<Vec<C64>>,
    check: PointCheck,
}

fn analyse_point(
    conn: &RationalConnection,
    point: &MarkedPoint,
    source: usize,
    position: usize,
    radius: f64,
    opts: &RhOptions,
) -> Result<PointOutcome, RhError> {
    let irregular = point.m >= 2;
    let depth = if irregular { opts.irregular_depth } else { opts.fuchsian_depth };
    let local = LocalSolution::compute(conn, point, depth, opts.eigen_tol)?;
    let r = local.r();
    let gamma_hat = local.gamma_hat();
    let (table, stokes, support_error, geo, anchor_solution) = if irregular {
        let run = stokes_run(conn, &local, position, radius, opts)?;
        let base = run.table.base_angle.expect("irregular table has directions");
        let geo = geometry(conn, point, radius, Some(base));
        (run.table, run.stokes, run.support_error, geo, run.anchor_solution)
    } else {
        let geo = geometry(conn, point, radius, None);
        let zeta = local_coord(point, geo.anchor);
        let y = local.solution(zeta, geo.anchor_arg, local.gauge.len());
        let table = SingularDirectionTable {
            point: position,
            m: point.m,
            r,
            directions: Vec::new(),
            base_angle: None,
        };
        (table, Vec::new(), 0.0, geo, y)
    };
    let to_anchor = transport(conn, &geo.path, &opts.transport)?.matrix;
    let around = transport(conn, &geo.circle, &opts.transport)?.matrix;
    let y_inv = anchor_solution
        .inverse()
        .ok_or_else(|| RhError::Singular(format!("local solution at point {source}")))?;
    let link = y_inv.mul(&to_anchor);
    let data = PointData {
        table,
        gamma_hat,
        stokes,
        link,
    };
    let top_direct = y_inv.mul(&around).mul(&anchor_solution);
    let top = data.top();
    let top_error = top.max_abs_diff(&top_direct) / top.max_abs().max(1.0);
    let loop_direct = to_anchor
        .inverse()
        .ok_or_else(|| RhError::Singular("path transport".into()))?
        .mul(&around)
        .mul(&to_anchor);
    let loop_error = data.local_monodromy()?.max_abs_diff(&loop_direct) / loop_direct.max_abs().max(1.0);
    Ok(PointOutcome {
        data,
        exponents: (0..r).map(|j| local.coefficients(j)).collect(),
        check: PointCheck {
            source,
            radius,
            support_error,
            top_error,
            loop_error,
        },
    })
}

/// The full Riemann-Hilbert map on a genus-zero rational connection.
pub fn full_monodromy_data(conn: &RationalConnection, opts: &RhOptions) -> Result<RhResult, RhError> {
    let (order, radii) = loop_order(conn)?;
    let pts = conn.points();
    for &i in &order {
        if pts[i].location == Location::Infinity && pts[i].m >= 2 {
            return Err(RhError::IrregularInfinity);
        }
    }
    let outcomes: Vec<Result<PointOutcome, RhError>> = par::map_range(opts.mode, order.len(), |pos| {
        let i = order[pos];
        analyse_point(conn, &pts[i], i, pos, radii[i], opts)
    });
    let outcomes: Vec<PointOutcome> = outcomes.into_iter().collect::<Result<_, _>>()?;
    let r = conn.r;
    let mut residue_sum = C64::new(0.0, 0.0);
    for o in &outcomes {
        for e in &o.exponents {
            residue_sum += e[e.len() - 1];
        }
    }
    let exponents = ExponentTuple::new(
        r,
        -residue_sum.re.round() as i64,
        order.iter().map(|&i| pts[i].m).collect(),
        outcomes.iter().map(|o| o.exponents.clone()).collect(),
    )
    .map_err(|e| RhError::Input(e.to_string()))?;
    let checks = outcomes.iter().map(|o| o.check.clone()).collect();
    let data = MonodromyData {
        r,
        points: outcomes.into_iter().map(|o| o.data).collect(),
        handles: Vec::new(),
    };
    let (_, residual) = data.relation_residual()?;
    Ok(RhResult {
        data,
        order,
        exponents,
        residual,
        checks,
    })
}

/// Loop monodromies at the base point, in loop order, by transport alone.
pub fn loop_monodromies(conn: &RationalConnection, opts: &RhOptions) -> Result<Vec<Matrix<C64>>, RhError> {
    let (order, radii) = loop_order(conn)?;
    let pts = conn.points();
    let loops: Vec<Result<Matrix<C64>, RhError>> = par::map_range(opts.mode, order.len(), |pos| {
        let i = order[pos];
        let geo = geometry(conn, &pts[i], radii[i], None);
        let path = geo.path.clone().then(&geo.circle).then(&geo.path.reversed());
        Ok(transport(conn, &path, &opts.transport)?.matrix)
    });
    loops.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::super::connection::Pole;
    use super::super::fixtures;
    use super::super::transport::trace_integral;
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn painleve_v_meets_targets() {
        let conn = fixtures::painleve_v();
        let res = full_monodromy_data(&conn, &RhOptions::default()).unwrap();
        assert_eq!(res.order, vec![0, 1, 2]);
        assert!(res.residual <= 1e-8, "residual {:e}", res.residual);
        assert!(res.max_support_error() <= 1e-8);
        assert!(res.max_top_error() <= 1e-6);
        assert!(res.checks.iter().all(|c| c.loop_error <= 1e-8));
        let p = &res.data.points[0];
        assert_eq!(p.stokes.len(), 2);
        assert!(res.data.validate(1e-9).is_ok());
        assert!(res.exponents.satisfies_fuchs(1e-9));
        assert_eq!(res.exponents.d, 0);
    }

    #[test]
    fn modes_agree() {
        let conn = fixtures::painleve_v();
        let seq = full_monodromy_data(
            &conn,
            &RhOptions {
                mode: ExecMode::Sequential,
                ..RhOptions::default()
            },
        )
        .unwrap();
        let par = full_monodromy_data(&conn, &RhOptions::default()).unwrap();
        assert_eq!(seq.data, par.data);
    }

    #[test]
    fn painleve_vi_relation() {
        let conn = fixtures::painleve_vi(c(0.3, 1.4));
        let res = full_monodromy_data(&conn, &RhOptions::default()).unwrap();
        assert_eq!(res.data.n(), 4);
        assert!(res.residual <= 1e-9, "residual {:e}", res.residual);
        assert!(res.data.is_irreducible(1e-8).unwrap());
    }

    #[test]
    fn stokes_model_products_reproduce_loop() {
        let conn = fixtures::stokes_model([[0.1, 0.4], [0.3, -0.2]]);
        let res = full_monodromy_data(&conn, &RhOptions::default()).unwrap();
        let p = &res.data.points[0];
        assert_eq!(p.stokes.len(), 2);
        for (k, st) in p.stokes.iter().enumerate() {
            let (i, j) = stokes_pattern(&p.table, k)[0];
            assert!(st[(i, j)].norm() > 1e-3, "Stokes multiplier {k} vanished");
        }
        assert!(res.max_top_error() <= 1e-9);
        assert!(res.residual <= 1e-9);
    }

    fn diagonal_connection() -> RationalConnection {
        let lead = Matrix::diag(&[c(1.0, 0.0), c(-1.0, 0.0)]);
        let res = Matrix::diag(&[c(0.2, 0.1), c(-0.1, 0.0)]);
        RationalConnection {
            r: 2,
            poles: vec![Pole {
                t: c(0.0, 0.0),
                coeffs: vec![res, lead],
            }],
            polynomial: Vec::new(),
            infinity: true,
            base: c(1.0, 1.0),
            cut_angle: 45.0,
        }
    }

    #[test]
    fn diagonal_connection_has_trivial_stokes() {
        let conn = diagonal_connection();
        let opts = RhOptions::default();
        for k in 1..=2 {
            let st = stokes_matrix(&conn, 0, k, &opts).unwrap();
            assert!(st.is_identity(1e-12), "{st:?}");
        }
        let f = sector_fundamental_matrix(&conn, 0, 1, &opts).unwrap();
        let (z, seed) = &f.samples[0];
        // diag(exp(1/z) z^{-0.2-0.1i}, exp(-1/z) z^{0.1})
        let log = c(z.norm().ln(), f.bisector);
        let expect = Matrix::diag(&[(z.inv() - c(0.2, 0.1) * log).exp(), (-z.inv() + 0.1 * log).exp()]);
        assert!(seed.max_abs_diff(&expect) <= 1e-12 * expect.max_abs());
    }

    #[test]
    fn gauge_conjugate_sector_solution_is_exact() {
        let a = 1.5;
        let conn = RationalConnection {
            r: 2,
            poles: vec![Pole {
                t: c(0.0, 0.0),
                coeffs: vec![
                    Matrix::from_rows(vec![vec![c(0.0, 0.0), c(2.0 * a, 0.0)], vec![c(0.0, 0.0), c(0.0, 0.0)]]),
                    Matrix::diag(&[c(a, 0.0), c(-a, 0.0)]),
                ],
            }],
            polynomial: vec![Matrix::from_rows(vec![
                vec![c(0.0, 0.0), c(1.0, 0.0)],
                vec![c(0.0, 0.0), c(0.0, 0.0)],
            ])],
            infinity: true,
            base: c(1.0, 1.0),
            cut_angle: 45.0,
        };
        let opts = RhOptions::default();
        for k in 1..=2 {
            let f = sector_fundamental_matrix(&conn, 0, k, &opts).unwrap();
            for (z, m) in &f.samples {
                let zeta = *z;
                let g = Matrix::from_rows(vec![vec![c(1.0, 0.0), -zeta], vec![c(0.0, 0.0), c(1.0, 0.0)]]);
                let d = Matrix::diag(&[(a / zeta).exp(), (-a / zeta).exp()]);
                let expect = g.mul(&d);
                assert!(m.max_abs_diff(&expect) <= 1e-10 * expect.max_abs(), "sector {k}");
            }
            let st = stokes_matrix(&conn, 0, k, &opts).unwrap();
            assert!(st.is_identity(1e-10));
        }
    }

    #[test]
    fn trivial_monodromy_loops_are_identity() {
        let conn = fixtures::trivial_monodromy();
        let loops = loop_monodromies(&conn, &RhOptions::default()).unwrap();
        assert_eq!(loops.len(), 2);
        for m in &loops {
            assert!(m.is_identity(1e-10), "{m:?}");
        }
    }

    #[test]
    fn transport_is_homotopy_invariant_and_obeys_liouville() {
        let conn = fixtures::painleve_v();
        let opts = TransportOptions::default();
        let a = c(0.5, 0.5);
        let b = c(0.5, -0.5);
        // Both routes pass to the right of 0 and to the left of 1.
        let direct = Path::line(a, b);
        let detour = Path::line(a, c(0.7, 0.1)).then(&Path::line(c(0.7, 0.1), c(0.35, -0.2))).then(&Path::line(c(0.35, -0.2), b));
        let p1 = transport(&conn, &direct, &opts).unwrap().matrix;
        let p2 = transport(&conn, &detour, &opts).unwrap().matrix;
        assert!(p1.max_abs_diff(&p2) <= 1e-10 * p1.max_abs());
        let lp = geometry(&conn, &conn.points()[0], 0.4, None);
        let path = lp.path.then(&lp.circle);
        let phi = transport(&conn, &path, &opts).unwrap().matrix;
        let expect = (-trace_integral(&conn, &path, 0.2)).exp();
        assert!((phi.det() - expect).norm() <= 1e-10 * expect.norm());
    }

    #[test]
    fn loop_order_rejects_hidden_points() {
        let mut conn = fixtures::painleve_v();
        conn.base = c(2.0, 0.0);
        assert_eq!(loop_order(&conn).unwrap_err(), RhError::NotStarShaped);
    }
}
