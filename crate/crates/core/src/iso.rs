//! Isomonodromic deformations.
//!
//! Fuchsian connections follow the Schlesinger system, integrated with an
//! adaptive Dormand-Prince 5(4) scheme. Irregular connections are carried
//! along by a predictor-corrector that re-fits the partial-fraction
//! coefficients so that the local exponents follow the prescribed path and
//! the normalized monodromy data stays fixed.
//!
//! With `Y' = -A Y` and `A = sum_i A_i / (z - t_i)` the Schlesinger system
//! reads `dA_i = sum_{j != i} [A_i, A_j] d log(t_i - t_j)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, Matrix};
use crate::monodromy::{MonodromyData, MonodromyError};
use crate::par::{self, ExecMode};
use crate::rh::{full_monodromy_data, RationalConnection, RhError, RhOptions, RhResult};
use crate::scalar::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IsoError {
    #[error("step rejected at s = {s}: {reason}")]
    StepRejected { s: f64, reason: String },
    #[error("Schlesinger flow needs simple poles and no polynomial part")]
    NonFuchsianInput,
    #[error("corrector diverged at s = {s} (residual {residual:e})")]
    CorrectorDiverged { s: f64, residual: f64 },
    #[error("a singular direction crossed the labeling origin")]
    Relabeled,
    #[error("bad deformation path: {0}")]
    BadPath(String),
    #[error(transparent)]
    Rh(#[from] RhError),
    #[error(transparent)]
    Monodromy(#[from] MonodromyError),
}

/// Sample of the deformation parameters at time `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knot {
    pub s: f64,
    /// Positions of the finite poles, in input order.
    pub positions: Vec<C64>,
    /// Prescribed top coefficients at the irregular point, if they move.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tops: Option<Vec<C64>>,
}

/// Piecewise-linear path in time space; residues stay fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformationPath {
    pub knots: Vec<Knot>,
}

fn lerp(a: C64, b: C64, u: f64) -> C64 {
    a + (b - a) * u
}

impl DeformationPath {
    pub fn validate(&self, conn: &RationalConnection) -> Result<(), IsoError> {
        if self.knots.is_empty() {
            return Err(IsoError::BadPath("no knots".into()));
        }
        for w in self.knots.windows(2) {
            if w[1].s < w[0].s {
                return Err(IsoError::BadPath("times must be nondecreasing".into()));
            }
        }
        for k in &self.knots {
            if k.positions.len() != conn.poles.len() {
                return Err(IsoError::BadPath(format!(
                    "knot at s = {} has {} positions for {} poles",
                    k.s,
                    k.positions.len(),
                    conn.poles.len()
                )));
            }
            if k.tops.as_ref().is_some_and(|t| t.len() != conn.r) {
                return Err(IsoError::BadPath(format!("knot at s = {} needs {} tops", k.s, conn.r)));
            }
        }
        Ok(())
    }

    /// Pole `i` runs once counterclockwise around the circle about
    /// `center` through its current position.
    pub fn pole_loop(conn: &RationalConnection, i: usize, center: C64, samples: usize) -> Self {
        let base: Vec<C64> = conn.poles.iter().map(|p| p.t).collect();
        let (radius, start) = (base[i] - center).to_polar();
        let knots = (0..=samples)
            .map(|k| {
                let s = k as f64 / samples as f64;
                let mut positions = base.clone();
                positions[i] = center + C64::from_polar(radius, start + std::f64::consts::TAU * s);
                if k == samples {
                    positions[i] = base[i];
                }
                Knot { s, positions, tops: None }
            })
            .collect();
        Self { knots }
    }

    /// Pole `i` moves in a straight line to `to`.
    pub fn pole_segment(conn: &RationalConnection, i: usize, to: C64, samples: usize) -> Self {
        let base: Vec<C64> = conn.poles.iter().map(|p| p.t).collect();
        let knots = (0..=samples)
            .map(|k| {
                let s = k as f64 / samples as f64;
                let mut positions = base.clone();
                positions[i] = lerp(base[i], to, s);
                Knot { s, positions, tops: None }
            })
            .collect();
        Self { knots }
    }

    /// Top coefficient `j` at the irregular point follows `f(s)` added to
    /// its starting value; the others stay put.
    pub fn top_path(conn: &RationalConnection, tops: &[C64], j: usize, samples: usize, f: impl Fn(f64) -> C64) -> Self {
        let base: Vec<C64> = conn.poles.iter().map(|p| p.t).collect();
        let knots = (0..=samples)
            .map(|k| {
                let s = k as f64 / samples as f64;
                let mut t = tops.to_vec();
                t[j] += f(s);
                Knot {
                    s,
                    positions: base.clone(),
                    tops: Some(t),
                }
            })
            .collect();
        Self { knots }
    }

    /// Same path with each segment cut into `factor` pieces.
    pub fn refined(&self, factor: usize) -> Self {
        let mut knots = Vec::with_capacity(self.knots.len() * factor);
        for w in self.knots.windows(2) {
            for q in 0..factor {
                let u = q as f64 / factor as f64;
                knots.push(Knot {
                    s: w[0].s + (w[1].s - w[0].s) * u,
                    positions: w[0].positions.iter().zip(&w[1].positions).map(|(&a, &b)| lerp(a, b, u)).collect(),
                    tops: match (&w[0].tops, &w[1].tops) {
                        (Some(a), Some(b)) => Some(a.iter().zip(b).map(|(&x, &y)| lerp(x, y, u)).collect()),
                        _ => w[0].tops.clone(),
                    },
                });
            }
        }
        knots.extend(self.knots.last().cloned());
        Self { knots }
    }

    pub fn reversed(&self) -> Self {
        let end = self.knots.last().map_or(0.0, |k| k.s);
        let start = self.knots.first().map_or(0.0, |k| k.s);
        Self {
            knots: self
                .knots
                .iter()
                .rev()
                .map(|k| Knot {
                    s: start + end - k.s,
                    ..k.clone()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsoOptions {
    pub rh: RhOptions,
    /// Local error target of the Schlesinger integrator.
    pub ode_tol: f64,
    /// Poles closer than this end the flow.
    pub collision: f64,
    pub corrector_tol: f64,
    pub max_corrector_iters: usize,
    /// Relative finite-difference step for the corrector Jacobian.
    pub fd_step: f64,
    pub normalize_tol: f64,
    pub mode: ExecMode,
}

impl Default for IsoOptions {
    fn default() -> Self {
        Self {
            rh: RhOptions::default(),
            ode_tol: 1e-12,
            collision: 1e-6,
            corrector_tol: 1e-10,
            max_corrector_iters: 12,
            fd_step: 1e-6,
            normalize_tol: 1e-9,
            mode: ExecMode::Parallel,
        }
    }
}

/// Conserved quantities at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    pub s: f64,
    pub positions: Vec<C64>,
    /// `tr C_{i,1}` and `det C_{i,1}` per finite pole.
    pub traces: Vec<C64>,
    pub dets: Vec<C64>,
    /// Corrector residual (zero for the Schlesinger flow).
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    pub samples: Vec<FlowSample>,
}

impl FlowReport {
    fn push(&mut self, s: f64, conn: &RationalConnection, residual: f64) {
        self.samples.push(FlowSample {
            s,
            positions: conn.poles.iter().map(|p| p.t).collect(),
            traces: conn.poles.iter().map(|p| p.coeffs[0].trace()).collect(),
            dets: conn.poles.iter().map(|p| p.coeffs[0].det()).collect(),
            residual,
        });
    }

    /// Column names and numeric rows, ready for a CSV writer.
    pub fn table(&self) -> (Vec<String>, Vec<Vec<f64>>) {
        let n = self.samples.first().map_or(0, |s| s.positions.len());
        let mut header = vec!["s".to_string()];
        for i in 0..n {
            for what in ["t", "tr", "det"] {
                header.push(format!("{what}{i}_re"));
                header.push(format!("{what}{i}_im"));
            }
        }
        header.push("residual".into());
        let rows = self
            .samples
            .iter()
            .map(|smp| {
                let mut row = vec![smp.s];
                for i in 0..n {
                    for z in [smp.positions[i], smp.traces[i], smp.dets[i]] {
                        row.push(z.re);
                        row.push(z.im);
                    }
                }
                row.push(smp.residual);
                row
            })
            .collect();
        (header, rows)
    }

    /// Largest drift of the residue invariants from their first values.
    pub fn max_invariant_drift(&self) -> f64 {
        let Some(first) = self.samples.first() else {
            return 0.0;
        };
        self.samples
            .iter()
            .flat_map(|s| {
                s.traces
                    .iter()
                    .zip(&first.traces)
                    .chain(s.dets.iter().zip(&first.dets))
                    .map(|(a, b)| (a - b).norm())
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult {
    pub connection: RationalConnection,
    pub report: FlowReport,
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `y' = f(s, y)` from `s0` to `s1` with adaptive steps,
/// calling `on_step` after each accepted step.
pub fn dopri5<Fn1, Fn2>(
    f: Fn1,
    s0: f64,
    s1: f64,
    y0: Vec<C64>,
    tol: f64,
    mut on_step: Fn2,
) -> Result<Vec<C64>, IsoError>
where
    Fn1: Fn(f64, &[C64]) -> Result<Vec<C64>, IsoError>,
    Fn2: FnMut(f64, &[C64]),
{
    let span = s1 - s0;
    if span == 0.0 {
        return Ok(y0);
    }
    let dir = span.signum();
    let mut s = s0;
    let mut y = y0;
    let mut h = 0.05 * span.abs();
    let n = y.len();
    let mut k: Vec<Vec<C64>> = vec![Vec::new(); 7];
    let mut steps = 0usize;
    while (s1 - s) * dir > 0.0 {
        if h < 1e-14 * span.abs() || steps > 1_000_000 {
            return Err(IsoError::StepRejected {
                s,
                reason: "step size underflow".into(),
            });
        }
        let hh = h.min((s1 - s) * dir) * dir;
        k[0] = f(s, &y)?;
        for st in 1..7 {
            let mut yt = y.clone();
            for (p, kp) in k.iter().enumerate().take(st) {
                let a = A[st][p];
                if a != 0.0 {
                    for q in 0..n {
                        yt[q] += kp[q] * (a * hh);
                    }
                }
            }
            k[st] = f(s + C[st] * hh, &yt)?;
        }
        let mut y5 = y.clone();
        let mut err: f64 = 0.0;
        for q in 0..n {
            let mut d5 = C64::new(0.0, 0.0);
            let mut d4 = C64::new(0.0, 0.0);
            for st in 0..7 {
                d5 += k[st][q] * B5[st];
                d4 += k[st][q] * B4[st];
            }
            y5[q] += d5 * hh;
            let sc = tol * (1.0 + y[q].norm().max(y5[q].norm()));
            err = err.max(((d5 - d4) * hh).norm() / sc);
        }
        steps += 1;
        if err <= 1.0 {
            s += hh;
            y = y5;
            on_step(s, &y);
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = hh.abs() * factor;
    }
    Ok(y)
}

fn residues(conn: &RationalConnection) -> Vec<Matrix<C64>> {
    conn.poles.iter().map(|p| p.coeffs[0].clone()).collect()
}

fn pack(ms: &[Matrix<C64>]) -> Vec<C64> {
    ms.iter().flat_map(|m| m.entries().to_vec()).collect()
}

fn unpack(y: &[C64], r: usize) -> Vec<Matrix<C64>> {
    y.chunks(r * r)
        .map(|c| Matrix::from_fn(r, r, |i, j| c[i * r + j]))
        .collect()
}

/// Schlesinger flow of a Fuchsian connection along `path`.
pub fn flow_schlesinger(conn: &RationalConnection, path: &DeformationPath, opts: &IsoOptions) -> Result<FlowResult, IsoError> {
    if conn.poles.iter().any(|p| p.order() != 1) || conn.polynomial.iter().any(|d| d.max_abs() > 0.0) {
        return Err(IsoError::NonFuchsianInput);
    }
    conn.validate()?;
    path.validate(conn)?;
    let r = conn.r;
    let mut state = pack(&residues(conn));
    let mut report = FlowReport { samples: Vec::new() };
    let mut current = conn.clone();
    for (p, t) in current.poles.iter_mut().zip(&path.knots[0].positions) {
        p.t = *t;
    }
    report.push(path.knots[0].s, &current, 0.0);
    for w in path.knots.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let len = b.s - a.s;
        if len == 0.0 {
            continue;
        }
        let vel: Vec<C64> = a.positions.iter().zip(&b.positions).map(|(x, y)| (y - x) / len).collect();
        let pos = |s: f64| -> Vec<C64> { a.positions.iter().zip(&vel).map(|(x, v)| x + v * (s - a.s)).collect() };
        let rhs = |s: f64, y: &[C64]| -> Result<Vec<C64>, IsoError> {
            let t = pos(s);
            let mats = unpack(y, r);
            let mut out = Vec::with_capacity(y.len());
            for i in 0..mats.len() {
                let mut d = Matrix::zeros(r, r);
                for j in 0..mats.len() {
                    if i == j {
                        continue;
                    }
                    let gap = t[i] - t[j];
                    if gap.norm() < opts.collision {
                        return Err(IsoError::StepRejected {
                            s,
                            reason: format!("poles {i} and {j} collide"),
                        });
                    }
                    let w = (vel[i] - vel[j]) / gap;
                    d = d.add(&mats[i].commutator(&mats[j]).scale(&w));
                }
                out.extend_from_slice(d.entries());
            }
            Ok(out)
        };
        let mut samples: Vec<(f64, Vec<C64>)> = Vec::new();
        state = dopri5(rhs, a.s, b.s, state, opts.ode_tol, |s, y| samples.push((s, y.to_vec())))?;
        for (s, y) in samples {
            let mut c = current.clone();
            for ((p, t), m) in c.poles.iter_mut().zip(pos(s)).zip(unpack(&y, r)) {
                p.t = t;
                p.coeffs[0] = m;
            }
            report.push(s, &c, 0.0);
        }
        for ((p, t), m) in current.poles.iter_mut().zip(&b.positions).zip(unpack(&state, r)) {
            p.t = *t;
            p.coeffs[0] = m;
        }
    }
    Ok(FlowResult {
        connection: current,
        report,
    })
}

/// Max-norm distance between the normalized monodromy data of two
/// connections.
pub fn monodromy_drift(a: &RationalConnection, b: &RationalConnection, opts: &IsoOptions) -> Result<f64, IsoError> {
    let da = normalized(a, opts)?;
    let db = normalized(b, opts)?;
    if da.points.len() != db.points.len() {
        return Err(IsoError::BadPath("connections have different point sets".into()));
    }
    Ok(da.max_abs_diff(&db))
}

fn normalized(conn: &RationalConnection, opts: &IsoOptions) -> Result<MonodromyData<C64>, IsoError> {
    let res = full_monodromy_data(conn, &opts.rh)?;
    Ok(res.data.normalize(opts.normalize_tol)?)
}

/// Free coefficients of the partial-fraction form.
fn params(conn: &RationalConnection) -> Vec<C64> {
    conn.poles
        .iter()
        .flat_map(|p| p.coeffs.iter().flat_map(|c| c.entries().to_vec()))
        .collect()
}

fn with_params(conn: &RationalConnection, x: &[C64]) -> RationalConnection {
    let r = conn.r;
    let mut out = conn.clone();
    let mut it = x.chunks(r * r);
    for p in &mut out.poles {
        for c in &mut p.coeffs {
            let chunk = it.next().expect("parameter count matches");
            *c = Matrix::from_fn(r, r, |i, j| chunk[i * r + j]);
        }
    }
    out
}

/// Exponent targets per loop position: `(top, residue)` pairs.
type Targets = Vec<Vec<(C64, C64)>>;

fn exponent_pairs(res: &RhResult) -> Targets {
    let e = &res.exponents;
    (0..e.n)
        .map(|i| (0..e.r).map(|j| (e.top(i, j), e.residue(i, j))).collect())
        .collect()
}

/// Residual of the constraints: exponents against `targets` (matched by
/// nearest top) and normalized data against `data`.
fn constraint_residual(
    conn: &RationalConnection,
    targets: &Targets,
    data: &MonodromyData<C64>,
    opts: &IsoOptions,
) -> Result<Vec<C64>, IsoError> {
    let res = full_monodromy_data(conn, &opts.rh)?;
    let got = exponent_pairs(&res);
    if got.len() != targets.len() {
        return Err(IsoError::BadPath("point set changed".into()));
    }
    let mut out = Vec::new();
    for (g, t) in got.iter().zip(targets) {
        for &(top, resid) in t {
            let best = g
                .iter()
                .min_by(|x, y| (x.0 - top).norm().total_cmp(&(y.0 - top).norm()))
                .expect("rank >= 1");
            out.push(best.0 - top);
            out.push(best.1 - resid);
        }
    }
    let norm = res.data.normalize(opts.normalize_tol)?;
    let relabeled = norm.points.iter().zip(&data.points).any(|(p, q)| {
        p.table.directions.len() != q.table.directions.len()
            || p.table.directions.iter().zip(&q.table.directions).any(|(x, y)| x.pairs != y.pairs)
    });
    if relabeled {
        return Err(IsoError::Relabeled);
    }
    let a = norm.coordinates();
    let b = data.coordinates();
    if a.len() != b.len() {
        return Err(IsoError::BadPath("monodromy data changed shape".into()));
    }
    out.extend(a.iter().zip(&b).map(|(x, y)| x - y));
    Ok(out)
}

fn max_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Gauss-Newton with minimum-norm steps; the conjugation freedom of the
/// connection shows up as null directions of the Jacobian.
fn correct(
    conn: &RationalConnection,
    x0: Vec<C64>,
    targets: &Targets,
    data: &MonodromyData<C64>,
    s: f64,
    opts: &IsoOptions,
) -> Result<(Vec<C64>, f64), IsoError> {
    let diverged = |residual: f64| IsoError::CorrectorDiverged { s, residual };
    let eval = |x: &[C64]| constraint_residual(&with_params(conn, x), targets, data, opts);
    let mut x = x0;
    let mut f = eval(&x).map_err(|e| match e {
        IsoError::Relabeled => e,
        _ => diverged(f64::INFINITY),
    })?;
    let mut fnorm = max_norm(&f);
    for _ in 0..opts.max_corrector_iters {
        if fnorm <= opts.corrector_tol {
            return Ok((x, fnorm));
        }
        let cols: Vec<Result<Vec<C64>, IsoError>> = par::map_range(opts.mode, x.len(), |p| {
            let h = opts.fd_step * x[p].norm().max(1.0);
            let mut xp = x.clone();
            xp[p] += h;
            let fp = eval(&xp)?;
            xp[p] = x[p] - h;
            let fm = eval(&xp)?;
            Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
        });
        let cols: Vec<Vec<C64>> = cols.into_iter().collect::<Result<_, _>>().map_err(|_| diverged(fnorm))?;
        let jac = nalgebra::DMatrix::from_fn(f.len(), x.len(), |i, j| cols[j][i]);
        let rhs = nalgebra::DVector::from_iterator(f.len(), f.iter().map(|z| -z));
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let delta = svd.solve(&rhs, 1e-10 * smax).map_err(|_| diverged(fnorm))?;

        // Halve the step until the residual decreases.
        let mut lambda = 1.0;
        loop {
            let trial: Vec<C64> = x.iter().zip(delta.iter()).map(|(a, d)| a + d * lambda).collect();
            if let Ok(ft) = eval(&trial) {
                let n = max_norm(&ft);
                if n < fnorm {
                    x = trial;
                    f = ft;
                    fnorm = n;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-3 {
                return Err(diverged(fnorm));
            }
        }
    }
    if fnorm <= opts.corrector_tol {
        Ok((x, fnorm))
    } else {
        Err(diverged(fnorm))
    }
}

/// Isomonodromic flow of a connection with irregular poles: at each knot
/// the poles move to their new positions, the tops at the irregular point
/// take their prescribed values, and the coefficients are re-fitted to keep
/// the normalized monodromy data.
pub fn flow_irregular(conn: &RationalConnection, path: &DeformationPath, opts: &IsoOptions) -> Result<FlowResult, IsoError> {
    conn.validate()?;
    path.validate(conn)?;
    let irregular: Vec<usize> = (0..conn.poles.len()).filter(|&i| conn.poles[i].order() >= 2).collect();
    if irregular.len() != 1 {
        return Err(IsoError::BadPath("expected exactly one irregular pole".into()));
    }
    let start = full_monodromy_data(conn, &opts.rh)?;
    let data = start.data.normalize(opts.normalize_tol)?;
    let base_targets = exponent_pairs(&start);
    // Loop position of the irregular pole.
    let pos = start
        .order
        .iter()
        .position(|&o| o == irregular[0])
        .expect("irregular pole is a marked point");
    let mut report = FlowReport { samples: Vec::new() };
    let mut current = conn.clone();
    report.push(path.knots[0].s, &current, 0.0);
    let mut prev: Option<Vec<C64>> = None;
    for (idx, knot) in path.knots.iter().enumerate() {
        let mut moved = current.clone();
        for (p, t) in moved.poles.iter_mut().zip(&knot.positions) {
            p.t = *t;
        }
        let mut targets = base_targets.clone();
        if let Some(tops) = &knot.tops {
            for (j, &t) in tops.iter().enumerate() {
                targets[pos][j].0 = t;
            }
        }
        let x = params(&moved);
        let guess = match &prev {
            Some(p) => x.iter().zip(p).map(|(a, b)| a + (a - b)).collect(),
            None => x.clone(),
        };
        let (solved, residual) = match correct(&moved, guess, &targets, &data, knot.s, opts) {
            Ok(v) => v,
            Err(_) if prev.is_some() => correct(&moved, x.clone(), &targets, &data, knot.s, opts)?,
            Err(e) => return Err(e),
        };
        prev = Some(x);
        current = with_params(&moved, &solved);
        if idx > 0 {
            report.push(knot.s, &current, residual);
        }
    }
    Ok(FlowResult {
        connection: current,
        report,
    })
}

/// Conjugation invariants `tr(w)` for words of length at most three in the
/// coefficient matrices; used to compare connections up to constant gauge.
pub fn gauge_invariants(conn: &RationalConnection) -> Vec<C64> {
    let mats: Vec<&Matrix<C64>> = conn.poles.iter().flat_map(|p| p.coeffs.iter()).collect();
    let mut out = Vec::new();
    for a in &mats {
        out.push(a.trace());
        for b in &mats {
            let ab = a.mul(b);
            out.push(ab.trace());
            for c in &mats {
                out.push(ab.mul(c).trace());
            }
        }
    }
    out
}

/// Eigenvalues of each residue, for conservation checks.
pub fn residue_spectra(conn: &RationalConnection) -> Vec<Vec<C64>> {
    conn.poles.iter().map(|p| linalg::eigenvalues(&p.coeffs[0])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rh::fixtures;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn dopri_integrates_exponential() {
        let y = dopri5(
            |_, y: &[C64]| Ok(vec![y[0] * c(0.0, 1.0)]),
            0.0,
            std::f64::consts::PI,
            vec![c(1.0, 0.0)],
            1e-12,
            |_, _| {},
        )
        .unwrap();
        assert!((y[0] + 1.0).norm() < 1e-9);
    }

    #[test]
    fn zero_length_and_commuting_flows_do_nothing() {
        let conn = fixtures::painleve_vi(c(0.3, 1.4));
        let opts = IsoOptions::default();
        let still = DeformationPath {
            knots: vec![Knot {
                s: 0.0,
                positions: conn.poles.iter().map(|p| p.t).collect(),
                tops: None,
            }],
        };
        assert_eq!(flow_schlesinger(&conn, &still, &opts).unwrap().connection, conn);
        let mut diag = conn.clone();
        for (k, p) in diag.poles.iter_mut().enumerate() {
            p.coeffs[0] = Matrix::diag(&[c(0.1 * k as f64 + 0.05, 0.0), c(-0.2, 0.1)]);
        }
        let path = DeformationPath::pole_segment(&diag, 2, c(0.5, 1.2), 4);
        let out = flow_schlesinger(&diag, &path, &opts).unwrap().connection;
        for (a, b) in out.poles.iter().zip(&diag.poles) {
            assert!(a.coeffs[0].max_abs_diff(&b.coeffs[0]) < 1e-14);
        }
    }

    #[test]
    fn schlesinger_conserves_and_reverses() {
        let conn = fixtures::painleve_vi(c(0.3, 1.4));
        let opts = IsoOptions::default();
        let path = DeformationPath::pole_segment(&conn, 2, c(0.45, 1.25), 8);
        let fwd = flow_schlesinger(&conn, &path, &opts).unwrap();
        assert!(fwd.report.max_invariant_drift() < 1e-9);
        let back = flow_schlesinger(&fwd.connection, &path.reversed(), &opts).unwrap();
        for (a, b) in back.connection.poles.iter().zip(&conn.poles) {
            assert!(a.coeffs[0].max_abs_diff(&b.coeffs[0]) < 1e-9);
            assert!((a.t - b.t).norm() < 1e-15);
        }
        let drift = monodromy_drift(&conn, &fwd.connection, &opts).unwrap();
        assert!(drift < 1e-6, "drift {drift:e}");
    }

    #[test]
    fn schlesinger_pole_loop_keeps_monodromy() {
        let conn = fixtures::painleve_vi(c(0.3, 1.4));
        let opts = IsoOptions::default();
        let path = DeformationPath::pole_loop(&conn, 2, c(0.4, 1.4), 16);
        let out = flow_schlesinger(&conn, &path, &opts).unwrap();
        assert!(out.report.max_invariant_drift() < 1e-9);
        let drift = monodromy_drift(&conn, &out.connection, &opts).unwrap();
        assert!(drift < 1e-6, "drift {drift:e}");
    }

    #[test]
    fn collisions_are_rejected() {
        let conn = fixtures::painleve_vi(c(0.3, 1.4));
        let path = DeformationPath::pole_segment(&conn, 2, c(1.0, 0.0), 4);
        let err = flow_schlesinger(&conn, &path, &IsoOptions::default()).unwrap_err();
        assert!(matches!(err, IsoError::StepRejected { .. }));
        let pv = fixtures::painleve_v();
        let path = DeformationPath::pole_segment(&pv, 1, c(2.0, 0.0), 2);
        assert_eq!(flow_schlesinger(&pv, &path, &IsoOptions::default()).unwrap_err(), IsoError::NonFuchsianInput);
    }

    fn pv_tops() -> Vec<C64> {
        let conn = fixtures::painleve_v();
        let res = full_monodromy_data(&conn, &RhOptions::default()).unwrap();
        (0..2).map(|j| res.exponents.top(0, j)).collect()
    }

    fn invariant_gap(a: &RationalConnection, b: &RationalConnection) -> f64 {
        gauge_invariants(a)
            .iter()
            .zip(gauge_invariants(b))
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn irregular_zero_length_is_identity() {
        let conn = fixtures::painleve_v();
        let path = DeformationPath::top_path(&conn, &pv_tops(), 0, 1, |_| c(0.0, 0.0));
        let out = flow_irregular(&conn, &path, &IsoOptions::default()).unwrap();
        assert!(invariant_gap(&out.connection, &conn) < 1e-9);
    }

    #[test]
    fn irregular_top_loop_returns() {
        let conn = fixtures::painleve_v();
        let opts = IsoOptions::default();
        let eps = 0.05;
        let path = DeformationPath::top_path(&conn, &pv_tops(), 0, 8, |s| {
            C64::from_polar(eps, std::f64::consts::TAU * s) - eps
        });
        let out = flow_irregular(&conn, &path, &opts).unwrap();
        let drift = monodromy_drift(&conn, &out.connection, &opts).unwrap();
        assert!(drift <= 1e-5, "drift {drift:e}");
        assert!(invariant_gap(&out.connection, &conn) < 1e-6);
        // The flow really moved.
        let mid = &out.report.samples[4];
        let start = &out.report.samples[0];
        assert!((mid.dets[0] - start.dets[0]).norm() > 1e-4);
    }

    #[test]
    fn perturbation_changes_monodromy() {
        let conn = fixtures::painleve_v();
        let mut bent = conn.clone();
        bent.poles[0].coeffs[0][(0, 1)] += c(0.1, -0.05);
        let drift = monodromy_drift(&conn, &bent, &IsoOptions::default()).unwrap();
        assert!(drift >= 1e-2, "drift {drift:e}");
        assert_eq!(monodromy_drift(&conn, &conn, &IsoOptions::default()).unwrap(), 0.0);
    }

    #[test]
    fn irregular_step_halving_agrees() {
        let conn = fixtures::painleve_v();
        let opts = IsoOptions::default();
        let path = DeformationPath::top_path(&conn, &pv_tops(), 0, 2, |s| c(0.04 * s, -0.03 * s));
        let coarse = flow_irregular(&conn, &path, &opts).unwrap().connection;
        let fine = flow_irregular(&conn, &path.refined(2), &opts).unwrap().connection;
        let gap = invariant_gap(&coarse, &fine);
        assert!(gap < 10.0 * opts.corrector_tol.max(1e-9), "gap {gap:e}");
        assert!(invariant_gap(&coarse, &conn) > 1e-3);
    }
}

