use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};
use stokeslab::exponents::{ClassifyOptions, ExponentTuple};
use stokeslab::formal::{self, FormalConnection, FormalError};
use stokeslab::io;
use stokeslab::iso::{self, DeformationPath, IsoOptions};
use stokeslab::monodromy::{self, MonodromyData, RankOptions};
use stokeslab::rh::{self, RationalConnection, RhOptions};
use stokeslab::scalar::{Cq, Scalar, C64};
use stokeslab::stokes::{self, to_degrees};

use crate::config::RunConfig;
use crate::errors::{tag, usage, Kind};
use crate::output::{num, write_csv, Report};
use crate::{ExponentsCmd, FormalCmd, IsoCmd, MonodromyCmd, RhCmd, StokesCmd};

pub struct Ctx {
    pub cfg: RunConfig,
    pub out: Option<PathBuf>,
}

pub struct Outcome {
    pub report: Report,
    /// Printed after the report; sets the exit code.
    pub failure: Option<(Kind, String)>,
}

impl Outcome {
    fn ok(report: Report) -> Self {
        Self { report, failure: None }
    }

    fn check(report: Report, kind: Kind, failed: Option<String>) -> Self {
        Self {
            report,
            failure: failed.map(|m| (kind, m)),
        }
    }
}

impl Ctx {
    fn rh_options(&self) -> RhOptions {
        let t = &self.cfg.tolerances;
        let mut o = RhOptions::default();
        o.transport.tol = t.ode;
        o.match_tol = t.matching;
        o
    }

    fn write_out(&self, doc: &Value) -> Result<()> {
        if let Some(p) = &self.out {
            write_json(p, doc)?;
        }
        Ok(())
    }
}

fn read_value(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(usage)
}

fn read_typed<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_value(read_value(path)?)
        .with_context(|| format!("decoding {}", path.display()))
        .map_err(usage)
}

fn write_json(path: &Path, doc: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(doc)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn c(z: C64) -> Value {
    json!([z.re, z.im])
}

fn is_exact(v: &Value) -> bool {
    v.get("exact").and_then(Value::as_bool).unwrap_or(false)
}

/// Monodromy data stored bare or under a `monodromy` key.
fn read_monodromy(path: &Path) -> Result<MonodromyData<C64>> {
    let v = read_value(path)?;
    let inner = v.get("monodromy").unwrap_or(&v);
    if is_exact(inner) {
        return Ok(io::monodromy_from_json::<Cq>(inner).map_err(tag)?.to_c64());
    }
    io::monodromy_from_json(inner).map_err(tag)
}

pub fn exponents(ctx: &Ctx, cmd: ExponentsCmd) -> Result<Outcome> {
    let t = &ctx.cfg.tolerances;
    match cmd {
        ExponentsCmd::Check { file } => {
            let nu: ExponentTuple = read_typed(&file)?;
            if let Err(e) = nu.validate() {
                let report = Report::new(json!({"valid": false, "error": e.to_string()}));
                return Ok(Outcome::check(report, Kind::Validation, Some(e.to_string())));
            }
            let residual = nu.fuchs_residue_sum();
            let ok = nu.satisfies_fuchs(t.float_eq);
            let doc = json!({
                "valid": ok,
                "r": nu.r,
                "d": nu.d,
                "n": nu.n,
                "m": nu.m,
                "fuchs_residual": c(residual),
                "fuchs_residual_abs": residual.norm(),
            });
            ctx.write_out(&doc)?;
            let failed = (!ok).then(|| format!("Fuchs relation violated: residual {:e}", residual.norm()));
            Ok(Outcome::check(Report::new(doc), Kind::Validation, failed))
        }
        ExponentsCmd::Classify { file } => {
            let nu: ExponentTuple = read_typed(&file)?;
            nu.validate().map_err(tag)?;
            let opts = ClassifyOptions {
                integrality_tol: t.integrality,
                equality_tol: t.float_eq,
                direction_tol: t.float_eq,
                search_bound: ctx.cfg.bound,
            };
            let cls = nu.classify(&opts).map_err(tag)?;
            let doc = serde_json::to_value(cls)?;
            ctx.write_out(&doc)?;
            Ok(Outcome::ok(Report::new(doc)))
        }
        ExponentsCmd::Decompose { file } => {
            let nu: ExponentTuple = read_typed(&file)?;
            nu.validate().map_err(tag)?;
            let parts = nu.decompose();
            let fm = nu.formal_monodromy();
            let doc = json!({
                "decomposition": serde_json::to_value(&parts)?,
                "formal_monodromy": serde_json::to_value(&fm)?,
            });
            let header = ["point", "j", "residue_re", "residue_im", "gamma_re", "gamma_im"]
                .map(String::from)
                .to_vec();
            let mut rows = Vec::new();
            for (i, res) in parts.res.iter().enumerate() {
                for (j, l) in res.iter().enumerate() {
                    let g = fm.eigenvalues[i][j];
                    rows.push(vec![i.to_string(), j.to_string(), num(l.re), num(l.im), num(g.re), num(g.im)]);
                }
            }
            ctx.write_out(&doc)?;
            Ok(Outcome::ok(Report::new(doc).with_rows(header, rows)))
        }
    }
}

pub fn stokes(ctx: &Ctx, cmd: StokesCmd) -> Result<Outcome> {
    let StokesCmd::Directions { file, point } = cmd;
    let nu: ExponentTuple = read_typed(&file)?;
    nu.validate().map_err(tag)?;
    let table = stokes::singular_directions(&nu, point, ctx.cfg.tolerances.float_eq).map_err(tag)?;
    let m = table.m;
    let r = table.r;
    let directions: Vec<Value> = table
        .directions
        .iter()
        .enumerate()
        .map(|(k, d)| {
            json!({
                "k": k + 1,
                "angle": d.angle,
                "degrees": to_degrees(d.angle),
                "multiplicity": d.multiplicity(),
                "pairs": d.pairs,
            })
        })
        .collect();
    let doc = json!({
        "point": point,
        "m": m,
        "r": r,
        "directions": directions,
        "base_angle": table.base_angle,
        "total_multiplicity": table.total_multiplicity(),
        "expected_total": (m.max(1) - 1) * r * (r - 1),
        "simple": table.is_simple(),
    });
    let header = ["k", "angle_rad", "angle_deg", "multiplicity", "pairs"].map(String::from).to_vec();
    let rows = table
        .directions
        .iter()
        .enumerate()
        .map(|(k, d)| {
            let pairs: Vec<String> = d.pairs.iter().map(|(a, b)| format!("{a}>{b}")).collect();
            vec![
                (k + 1).to_string(),
                num(d.angle),
                num(to_degrees(d.angle)),
                d.multiplicity().to_string(),
                pairs.join(" "),
            ]
        })
        .collect();
    ctx.write_out(&doc)?;
    Ok(Outcome::ok(Report::new(doc).with_rows(header, rows)))
}

fn series_list<F: Scalar>(list: &[stokeslab::series::Series<F>]) -> Value {
    Value::Array(list.iter().map(io::series_to_json).collect())
}

fn diagonalize<F: Scalar>(ctx: &Ctx, v: &Value) -> Result<Value> {
    let conn: FormalConnection<F> = io::formal_from_json(v).map_err(tag)?;
    let d = formal::formal_diagonalize_generic(&conn, ctx.cfg.tolerances.float_eq).map_err(tag)?;
    let diag = formal::gauge(&conn, &d.gauge).map_err(tag)?;
    Ok(json!({
        "exponents": series_list(&d.exponents),
        "gauge": io::series_matrix_to_json(&d.gauge),
        "diagonal": io::formal_to_json(&diag),
    }))
}

fn match_depth<F: Scalar>(ctx: &Ctx, a: &Value, b: &Value) -> Result<Value> {
    let v: FormalConnection<F> = io::formal_from_json(a).map_err(tag)?;
    let w: FormalConnection<F> = io::formal_from_json(b).map_err(tag)?;
    let depth = v.depth.min(w.depth);
    match formal::exponents_match_at_depth(&v, &w, ctx.cfg.seed, ctx.cfg.tolerances.float_eq) {
        Ok(m) => Ok(json!({
            "isomorphic": true,
            "depth": depth,
            "depth_guaranteed": m.depth_guaranteed,
            "exponents_agree": m.permutation.is_some(),
            "permutation": m.permutation,
            "exponents_first": series_list(&m.exponents_v),
            "exponents_second": series_list(&m.exponents_w),
            "intertwiner": io::series_matrix_to_json(&m.intertwiner),
        })),
        Err(FormalError::NoIsomorphism(n)) => Ok(json!({
            "isomorphic": false,
            "depth": n,
            "depth_guaranteed": n >= (v.r * v.r * v.m.max(w.m)) as i64,
        })),
        Err(e) => Err(tag(e)),
    }
}

pub fn formal(ctx: &Ctx, cmd: FormalCmd) -> Result<Outcome> {
    let doc = match cmd {
        FormalCmd::Diagonalize { file } => {
            let v = read_value(&file)?;
            if is_exact(&v) {
                diagonalize::<Cq>(ctx, &v)?
            } else {
                diagonalize::<C64>(ctx, &v)?
            }
        }
        FormalCmd::MatchDepth { first, second } => {
            let a = read_value(&first)?;
            let b = read_value(&second)?;
            if is_exact(&a) && is_exact(&b) {
                match_depth::<Cq>(ctx, &a, &b)?
            } else {
                match_depth::<C64>(ctx, &a, &b)?
            }
        }
        FormalCmd::Counterexample { depth } => {
            if depth < 6 {
                return Err(usage(anyhow::anyhow!("--depth must be at least 6")));
            }
            let (v, w, g) = formal::counterexample_pair_at::<Cq>(depth);
            let image = formal::gauge(&v, &g).map_err(tag)?;
            json!({
                "depth": depth,
                "first": io::formal_to_json(&v),
                "second": io::formal_to_json(&w),
                "gauge": io::series_matrix_to_json(&g),
                "gauge_maps_first_to_second": image.a == w.a,
                "exponents_first": series_list(&v.graded_exponents().map_err(tag)?),
                "exponents_second": series_list(&w.graded_exponents().map_err(tag)?),
            })
        }
    };
    ctx.write_out(&doc)?;
    Ok(Outcome::ok(Report::new(doc)))
}

pub fn monodromy(ctx: &Ctx, cmd: MonodromyCmd) -> Result<Outcome> {
    let t = &ctx.cfg.tolerances;
    match cmd {
        MonodromyCmd::Residual { file } => {
            let data = read_monodromy(&file)?;
            data.validate(t.float_eq).map_err(tag)?;
            let (mu, residual) = data.relation_residual().map_err(tag)?;
            let doc = json!({"residual": residual, "mu": io::matrix_to_json(&mu)});
            ctx.write_out(&doc)?;
            Ok(Outcome::ok(Report::new(doc)))
        }
        MonodromyCmd::Normalize { file } => {
            let data = read_monodromy(&file)?;
            data.validate(t.float_eq).map_err(tag)?;
            let norm = data.normalize(t.float_eq).map_err(tag)?;
            let doc = io::monodromy_to_json(&norm);
            ctx.write_out(&doc)?;
            Ok(Outcome::ok(Report::new(doc)))
        }
        MonodromyCmd::Rank { file } => {
            let data = read_monodromy(&file)?;
            data.validate(t.float_eq).map_err(tag)?;
            let opts = RankOptions {
                threshold: t.rank_threshold,
                ..RankOptions::default()
            };
            let jac = monodromy::dmu_jacobian(&data, &opts).map_err(tag)?;
            let rank = monodromy::tangent_rank_dmu(&data, &opts).map_err(tag)?;
            let full = data.r * data.r - 1;
            let doc = json!({
                "rank": rank,
                "full_rank": full,
                "surjective": rank == full,
                "singular_values": stokeslab::linalg::singular_values(&jac),
            });
            ctx.write_out(&doc)?;
            Ok(Outcome::ok(Report::new(doc)))
        }
        MonodromyCmd::Dim { g, r, n, m, all } => {
            if m.len() != n {
                return Err(usage(anyhow::anyhow!("--m lists {} pole orders but --n is {n}", m.len())));
            }
            if r == 0 || m.contains(&0) {
                return Err(usage(anyhow::anyhow!("rank and pole orders must be positive")));
            }
            let d = monodromy::expected_dimension(g, r, &m);
            let doc = if all { serde_json::to_value(d)? } else { json!(d.moduli) };
            ctx.write_out(&doc)?;
            Ok(Outcome::ok(Report::new(doc)))
        }
    }
}

fn rh_document(res: &rh::RhResult) -> Result<Value> {
    Ok(json!({
        "monodromy": io::monodromy_to_json(&res.data),
        "order": res.order,
        "exponents": serde_json::to_value(&res.exponents)?,
        "residual": res.residual,
        "max_top_error": res.max_top_error(),
        "max_support_error": res.max_support_error(),
        "checks": serde_json::to_value(&res.checks)?,
    }))
}

pub fn rh(ctx: &Ctx, cmd: RhCmd) -> Result<Outcome> {
    match cmd {
        RhCmd::Compute { file, tol } => {
            let conn: RationalConnection = read_typed(&file)?;
            conn.validate().map_err(tag)?;
            let res = rh::full_monodromy_data(&conn, &ctx.rh_options()).map_err(tag)?;
            let doc = rh_document(&res)?;
            ctx.write_out(&doc)?;
            let failed = (res.residual > tol).then(|| format!("relation residual {:e} exceeds {tol:e}", res.residual));
            Ok(Outcome::check(Report::new(doc), Kind::Numerical, failed))
        }
        RhCmd::Check { file, conn, tol, top_tol } => {
            let data = read_monodromy(&file)?;
            let mut problems = Vec::new();
            if let Err(e) = data.validate(tol) {
                problems.push(e.to_string());
            }
            let (_, residual) = data.relation_residual().map_err(tag)?;
            if residual > tol {
                problems.push(format!("relation residual {residual:e} exceeds {tol:e}"));
            }
            let mut doc = json!({"residual": residual});
            if let Some(path) = conn {
                let conn: RationalConnection = read_typed(&path)?;
                let res = rh::full_monodromy_data(&conn, &ctx.rh_options()).map_err(tag)?;
                let eps = ctx.cfg.tolerances.float_eq;
                let drift = match (data.normalize(eps), res.data.normalize(eps)) {
                    (Ok(a), Ok(b)) if a.points.len() == b.points.len() => a.max_abs_diff(&b),
                    _ => data.max_abs_diff(&res.data),
                };
                if res.max_top_error() > top_tol {
                    problems.push(format!("two-route local monodromy mismatch {:e} exceeds {top_tol:e}", res.max_top_error()));
                }
                if res.max_support_error() > tol {
                    problems.push(format!("Stokes support error {:e} exceeds {tol:e}", res.max_support_error()));
                }
                if drift > top_tol {
                    problems.push(format!("stored data differs from recomputed data by {drift:e}"));
                }
                doc["recomputed_residual"] = json!(res.residual);
                doc["max_top_error"] = json!(res.max_top_error());
                doc["max_support_error"] = json!(res.max_support_error());
                doc["drift"] = json!(drift);
            }
            doc["ok"] = json!(problems.is_empty());
            doc["problems"] = json!(problems);
            ctx.write_out(&doc)?;
            let failed = (!problems.is_empty()).then(|| problems.join("; "));
            Ok(Outcome::check(Report::new(doc), Kind::Validation, failed))
        }
    }
}

pub fn iso(ctx: &Ctx, cmd: IsoCmd) -> Result<Outcome> {
    let mut opts = IsoOptions {
        rh: ctx.rh_options(),
        normalize_tol: ctx.cfg.tolerances.float_eq,
        ..IsoOptions::default()
    };
    match cmd {
        IsoCmd::Flow { conn, path, tol, report } => {
            let start: RationalConnection = read_typed(&conn)?;
            let dpath: DeformationPath = read_typed(&path)?;
            let fuchsian = start.poles.iter().all(|p| p.order() == 1) && start.polynomial.is_empty();
            let flow = if fuchsian {
                opts.ode_tol = tol;
                iso::flow_schlesinger(&start, &dpath, &opts)
            } else {
                opts.corrector_tol = tol.max(1e-13);
                iso::flow_irregular(&start, &dpath, &opts)
            }
            .map_err(tag)?;
            let drift = iso::monodromy_drift(&start, &flow.connection, &opts).map_err(tag)?;
            let (header, rows) = flow.report.table();
            if let Some(p) = &report {
                if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
                    let mut f = std::fs::File::create(p).with_context(|| format!("writing {}", p.display()))?;
                    let cells: Vec<Vec<String>> = rows.iter().map(|r| r.iter().map(|x| num(*x)).collect()).collect();
                    write_csv(&header, &cells, &mut f)?;
                } else {
                    write_json(
                        p,
                        &json!({
                            "drift": drift,
                            "invariant_drift": flow.report.max_invariant_drift(),
                            "columns": header,
                            "rows": rows,
                        }),
                    )?;
                }
            }
            let end = serde_json::to_value(&flow.connection)?;
            ctx.write_out(&end)?;
            let doc = json!({
                "method": if fuchsian { "schlesinger" } else { "corrector" },
                "drift": drift,
                "invariant_drift": flow.report.max_invariant_drift(),
                "samples": flow.report.samples.len(),
                "end": end,
            });
            Ok(Outcome::ok(Report::new(doc)))
        }
        IsoCmd::Drift { first, second } => {
            let a: RationalConnection = read_typed(&first)?;
            let b: RationalConnection = read_typed(&second)?;
            let drift = iso::monodromy_drift(&a, &b, &opts).map_err(tag)?;
            let doc = json!({"drift": drift});
            ctx.write_out(&doc)?;
            Ok(Outcome::ok(Report::new(doc)))
        }
    }
}
