//! JSON forms for the types that do not derive serde.
//!
//! Complex numbers are `[re, im]` pairs. Exact values write decimal strings
//! and carry `"exact": true` at the top level of the document.

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::formal::{FormalConnection, FormalError};
use crate::linalg::Matrix;
use crate::monodromy::{MonodromyData, PointData};
use crate::scalar::{Scalar, ScalarParseError};
use crate::series::Series;
use crate::series_matrix::SeriesMatrix;
use crate::stokes::SingularDirectionTable;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("missing or malformed field `{0}`")]
    Field(&'static str),
    #[error("{0}")]
    Shape(String),
    #[error(transparent)]
    Scalar(#[from] ScalarParseError),
    #[error(transparent)]
    Formal(#[from] FormalError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn field<'a>(v: &'a Value, name: &'static str) -> Result<&'a Value, IoError> {
    v.get(name).ok_or(IoError::Field(name))
}

fn as_array<'a>(v: &'a Value, name: &'static str) -> Result<&'a Vec<Value>, IoError> {
    v.as_array().ok_or(IoError::Field(name))
}

fn as_i64(v: &Value, name: &'static str) -> Result<i64, IoError> {
    v.as_i64().ok_or(IoError::Field(name))
}

fn as_usize(v: &Value, name: &'static str) -> Result<usize, IoError> {
    v.as_u64().map(|x| x as usize).ok_or(IoError::Field(name))
}

pub fn scalar_to_json<F: Scalar>(x: &F) -> Value {
    let [re, im] = x.to_json();
    json!([re, im])
}

pub fn scalar_from_json<F: Scalar>(v: &Value) -> Result<F, IoError> {
    match v.as_array().map(Vec::as_slice) {
        Some([re, im]) => Ok(F::from_json(re, im)?),
        _ => Err(IoError::Shape(format!("expected [re, im], found {v}"))),
    }
}

fn with_exact<F: Scalar>(mut obj: Map<String, Value>) -> Value {
    if F::EXACT {
        obj.insert("exact".into(), Value::Bool(true));
    }
    Value::Object(obj)
}

/// `{"terms": [[k, re, im], ...], "N": order}`; zero terms are dropped.
pub fn series_to_json<F: Scalar>(s: &Series<F>) -> Value {
    let terms: Vec<Value> = s
        .terms()
        .filter(|(_, c)| !c.is_zero())
        .map(|(k, c)| {
            let [re, im] = c.to_json();
            json!([k, re, im])
        })
        .collect();
    let mut obj = Map::new();
    obj.insert("terms".into(), Value::Array(terms));
    obj.insert("N".into(), json!(s.order()));
    with_exact::<F>(obj)
}

pub fn series_from_json<F: Scalar>(v: &Value) -> Result<Series<F>, IoError> {
    let order = as_i64(field(v, "N")?, "N")?;
    let mut terms = Vec::new();
    for t in as_array(field(v, "terms")?, "terms")? {
        match t.as_array().map(Vec::as_slice) {
            Some([k, re, im]) => terms.push((as_i64(k, "terms")?, F::from_json(re, im)?)),
            _ => return Err(IoError::Shape(format!("series term must be [k, re, im], found {t}"))),
        }
    }
    if let Some(&(k, _)) = terms.iter().find(|(k, _)| *k >= order) {
        return Err(IoError::Shape(format!("term z^{k} is beyond the known order {order}")));
    }
    Ok(Series::from_terms(terms, order))
}

/// Rows of `[re, im]` pairs.
pub fn matrix_to_json<F: Scalar>(m: &Matrix<F>) -> Value {
    Value::Array(
        (0..m.rows())
            .map(|i| Value::Array(m.row(i).iter().map(scalar_to_json).collect()))
            .collect(),
    )
}

pub fn matrix_from_json<F: Scalar>(v: &Value) -> Result<Matrix<F>, IoError> {
    let rows = as_array(v, "matrix")?;
    let parsed: Vec<Vec<F>> = rows
        .iter()
        .map(|row| as_array(row, "matrix")?.iter().map(scalar_from_json).collect())
        .collect::<Result<_, _>>()?;
    let cols = parsed.first().map_or(0, Vec::len);
    if parsed.iter().any(|r| r.len() != cols) {
        return Err(IoError::Shape("ragged matrix".into()));
    }
    Ok(Matrix::from_rows(parsed))
}

/// `{"r", "m", "N", "A": [[series, ...], ...], "filtration"?}`.
pub fn formal_to_json<F: Scalar>(c: &FormalConnection<F>) -> Value {
    let rows: Vec<Value> = (0..c.r)
        .map(|i| Value::Array((0..c.r).map(|j| series_to_json(c.a.get(i, j))).collect()))
        .collect();
    let mut obj = Map::new();
    obj.insert("r".into(), json!(c.r));
    obj.insert("m".into(), json!(c.m));
    obj.insert("N".into(), json!(c.depth));
    obj.insert("A".into(), Value::Array(rows));
    if let Some(f) = &c.filtration {
        obj.insert("filtration".into(), json!(f));
    }
    with_exact::<F>(obj)
}

pub fn formal_from_json<F: Scalar>(v: &Value) -> Result<FormalConnection<F>, IoError> {
    let r = as_usize(field(v, "r")?, "r")?;
    let m = as_usize(field(v, "m")?, "m")?;
    let depth = as_i64(field(v, "N")?, "N")?;
    let rows = as_array(field(v, "A")?, "A")?;
    if rows.len() != r {
        return Err(IoError::Shape(format!("A has {} rows for r = {r}", rows.len())));
    }
    let mut entries = Vec::with_capacity(r * r);
    for row in rows {
        let row = as_array(row, "A")?;
        if row.len() != r {
            return Err(IoError::Shape(format!("A row has {} entries for r = {r}", row.len())));
        }
        for s in row {
            entries.push(series_from_json::<F>(s)?);
        }
    }
    let conn = FormalConnection::new(m, depth, SeriesMatrix::from_entries(r, entries))?;
    match v.get("filtration") {
        None | Some(Value::Null) => Ok(conn),
        Some(f) => {
            let flag: Vec<Vec<usize>> = serde_json::from_value(f.clone())?;
            Ok(conn.with_filtration(flag)?)
        }
    }
}

/// A series matrix in the same per-entry form as the formal connection.
pub fn series_matrix_to_json<F: Scalar>(g: &SeriesMatrix<F>) -> Value {
    let n = g.dim();
    Value::Array(
        (0..n)
            .map(|i| Value::Array((0..n).map(|j| series_to_json(g.get(i, j))).collect()))
            .collect(),
    )
}

pub fn monodromy_to_json<F: Scalar>(d: &MonodromyData<F>) -> Value {
    let points: Vec<Value> = d
        .points
        .iter()
        .map(|p| {
            json!({
                "table": serde_json::to_value(&p.table).expect("table serializes"),
                "gamma_hat": p.gamma_hat.iter().map(scalar_to_json).collect::<Vec<_>>(),
                "stokes": p.stokes.iter().map(matrix_to_json).collect::<Vec<_>>(),
                "link": matrix_to_json(&p.link),
            })
        })
        .collect();
    let handles: Vec<Value> = d
        .handles
        .iter()
        .map(|(a, b)| json!([matrix_to_json(a), matrix_to_json(b)]))
        .collect();
    let mut obj = Map::new();
    obj.insert("r".into(), json!(d.r));
    obj.insert("points".into(), Value::Array(points));
    obj.insert("handles".into(), Value::Array(handles));
    with_exact::<F>(obj)
}

pub fn monodromy_from_json<F: Scalar>(v: &Value) -> Result<MonodromyData<F>, IoError> {
    let r = as_usize(field(v, "r")?, "r")?;
    let mut points = Vec::new();
    for p in as_array(field(v, "points")?, "points")? {
        let table: SingularDirectionTable = serde_json::from_value(field(p, "table")?.clone())?;
        let gamma_hat = as_array(field(p, "gamma_hat")?, "gamma_hat")?
            .iter()
            .map(scalar_from_json)
            .collect::<Result<Vec<F>, _>>()?;
        let stokes = as_array(field(p, "stokes")?, "stokes")?
            .iter()
            .map(matrix_from_json)
            .collect::<Result<Vec<Matrix<F>>, _>>()?;
        let link = matrix_from_json(field(p, "link")?)?;
        points.push(PointData {
            table,
            gamma_hat,
            stokes,
            link,
        });
    }
    let mut handles = Vec::new();
    if let Some(h) = v.get("handles") {
        for pair in as_array(h, "handles")? {
            match pair.as_array().map(Vec::as_slice) {
                Some([a, b]) => handles.push((matrix_from_json(a)?, matrix_from_json(b)?)),
                _ => return Err(IoError::Shape("handle must be a pair of matrices".into())),
            }
        }
    }
    Ok(MonodromyData { r, points, handles })
}
