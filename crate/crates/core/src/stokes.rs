//! Singular directions, multiplicity sets and sectors at irregular points.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exponents::ExponentTuple;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StokesError {
    #[error("top terms of exponents {j1} and {j2} coincide at point {point}")]
    NonGenericAtPoint { point: usize, j1: usize, j2: usize },
    #[error("point index {0} out of range")]
    NoSuchPoint(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularDirection {
    /// Angle in `[0, 2 pi)`.
    pub angle: f64,
    /// Ordered pairs `(j1, j2)` whose ratio `f_j1 / f_j2` is maximally
    /// growing along this ray.
    pub pairs: Vec<(usize, usize)>,
}

impl SingularDirection {
    pub fn multiplicity(&self) -> usize {
        self.pairs.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularDirectionTable {
    pub point: usize,
    pub m: usize,
    pub r: usize,
    pub directions: Vec<SingularDirection>,
    /// Angle of the base point `t*` near the singularity, in
    /// `(d_s - 2 pi, d_1)`.
    pub base_angle: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub point: usize,
    /// 1-based index: sector `k` lies between directions `k-1` and `k`.
    pub k: usize,
    pub start: f64,
    pub end: f64,
    pub radius: f64,
}

impl Sector {
    pub fn bisector(&self) -> f64 {
        0.5 * (self.start + self.end)
    }

    pub fn contains(&self, angle: f64) -> bool {
        let a = self.start + (angle - self.start).rem_euclid(TAU);
        a > self.start && a < self.end
    }
}

impl SingularDirectionTable {
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn total_multiplicity(&self) -> usize {
        self.directions.iter().map(SingularDirection::multiplicity).sum()
    }

    pub fn is_simple(&self) -> bool {
        self.directions.iter().all(|d| d.multiplicity() == 1)
    }

    /// `d_k` for `k = 0..=s`, with `d_0 = d_s - 2 pi`.
    pub fn angle(&self, k: usize) -> f64 {
        if k == 0 {
            self.directions.last().map_or(0.0, |d| d.angle - TAU)
        } else {
            self.directions[k - 1].angle
        }
    }

    /// `s` sectors `(d_{k-1}, d_k)`; the first one contains the base angle.
    pub fn sectors(&self, radius: f64) -> Vec<Sector> {
        (1..=self.len())
            .map(|k| Sector {
                point: self.point,
                k,
                start: self.angle(k - 1),
                end: self.angle(k),
                radius,
            })
            .collect()
    }
}

/// Table at point `i`. Empty for Fuchsian points.
pub fn singular_directions(
    nu: &ExponentTuple,
    i: usize,
    direction_tol: f64,
) -> Result<SingularDirectionTable, StokesError> {
    if i >= nu.n {
        return Err(StokesError::NoSuchPoint(i));
    }
    let m = nu.m[i];
    let r = nu.r;
    if m < 2 {
        return Ok(SingularDirectionTable {
            point: i,
            m,
            r,
            directions: Vec::new(),
            base_angle: None,
        });
    }
    let tops: Vec<_> = (0..r).map(|j| nu.top(i, j)).collect();
    let mut raw: Vec<(f64, (usize, usize))> = Vec::with_capacity((m - 1) * r * (r - 1));
    for j1 in 0..r {
        for j2 in 0..r {
            if j1 == j2 {
                continue;
            }
            let delta = tops[j1] - tops[j2];
            if delta.norm() == 0.0 {
                return Err(StokesError::NonGenericAtPoint {
                    point: i,
                    j1: j1.min(j2),
                    j2: j1.max(j2),
                });
            }
            for l in 0..m - 1 {
                let d = ((delta.arg() + TAU * l as f64) / (m - 1) as f64).rem_euclid(TAU);
                raw.push((d, (j1, j2)));
            }
        }
    }
    Ok(SingularDirectionTable {
        point: i,
        m,
        r,
        base_angle: None,
        directions: merge_rays(raw, direction_tol),
    }
    .with_base_angle())
}

impl SingularDirectionTable {
    fn with_base_angle(mut self) -> Self {
        if !self.directions.is_empty() {
            self.base_angle = Some(0.5 * (self.angle(0) + self.angle(1)));
        }
        self
    }
}

fn merge_rays(mut raw: Vec<(f64, (usize, usize))>, tol: f64) -> Vec<SingularDirection> {
    raw.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<SingularDirection> = Vec::new();
    for (angle, pair) in raw {
        match out.last_mut() {
            Some(last) if angle - last.angle < tol => last.pairs.push(pair),
            _ => out.push(SingularDirection {
                angle,
                pairs: vec![pair],
            }),
        }
    }
    // Rays just below 2 pi are the same as rays near 0.
    if out.len() > 1 {
        let first = out[0].angle;
        let last = out[out.len() - 1].angle;
        if first + TAU - last < tol {
            let tail = out.pop().expect("nonempty");
            out[0].pairs.extend(tail.pairs);
        }
    }
    for d in &mut out {
        d.pairs.sort_unstable();
    }
    out
}

pub fn all_tables(nu: &ExponentTuple, direction_tol: f64) -> Result<Vec<SingularDirectionTable>, StokesError> {
    (0..nu.n).map(|i| singular_directions(nu, i, direction_tol)).collect()
}

/// Generic and every singular direction has multiplicity one.
pub fn is_simple(nu: &ExponentTuple, direction_tol: f64) -> bool {
    match all_tables(nu, direction_tol) {
        Ok(tables) => tables.iter().all(SingularDirectionTable::is_simple),
        Err(_) => false,
    }
}

/// Degrees in `[0, 360)`.
pub fn to_degrees(angle: f64) -> f64 {
    (angle * 180.0 / PI).rem_euclid(360.0)
}
