//! Piecewise paths made of segments and circular arcs.

use serde::{Deserialize, Serialize};

use crate::scalar::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Piece {
    Line { from: C64, to: C64 },
    /// Angles in radians; positive sweep is counterclockwise.
    Arc { center: C64, radius: f64, start: f64, sweep: f64 },
}

impl Piece {
    pub fn start(&self) -> C64 {
        match *self {
            Piece::Line { from, .. } => from,
            Piece::Arc { center, radius, start, .. } => center + C64::from_polar(radius, start),
        }
    }

    pub fn end(&self) -> C64 {
        match *self {
            Piece::Line { to, .. } => to,
            Piece::Arc {
                center,
                radius,
                start,
                sweep,
            } => center + C64::from_polar(radius, start + sweep),
        }
    }

    pub fn reversed(&self) -> Self {
        match *self {
            Piece::Line { from, to } => Piece::Line { from: to, to: from },
            Piece::Arc {
                center,
                radius,
                start,
                sweep,
            } => Piece::Arc {
                center,
                radius,
                start: start + sweep,
                sweep: -sweep,
            },
        }
    }

    /// Points along the piece whose consecutive chords stay within the
    /// arc's pole-free annulus: lines give their endpoints, arcs are cut
    /// into steps of at most `max_angle`.
    pub fn waypoints(&self, max_angle: f64) -> Vec<C64> {
        match *self {
            Piece::Line { from, to } => vec![from, to],
            Piece::Arc {
                center,
                radius,
                start,
                sweep,
            } => {
                let n = ((sweep.abs() / max_angle).ceil() as usize).max(1);
                (0..=n)
                    .map(|k| center + C64::from_polar(radius, start + sweep * k as f64 / n as f64))
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Path {
    pub pieces: Vec<Piece>,
}

impl Path {
    pub fn new(pieces: Vec<Piece>) -> Self {
        Self { pieces }
    }

    pub fn line(from: C64, to: C64) -> Self {
        Self::new(vec![Piece::Line { from, to }])
    }

    pub fn arc(center: C64, radius: f64, start: f64, sweep: f64) -> Self {
        Self::new(vec![Piece::Arc {
            center,
            radius,
            start,
            sweep,
        }])
    }

    /// Full counterclockwise circle starting at angle `start`.
    pub fn circle(center: C64, radius: f64, start: f64) -> Self {
        Self::arc(center, radius, start, std::f64::consts::TAU)
    }

    pub fn then(mut self, other: &Path) -> Self {
        self.pieces.extend_from_slice(&other.pieces);
        self
    }

    pub fn reversed(&self) -> Self {
        Self::new(self.pieces.iter().rev().map(Piece::reversed).collect())
    }

    pub fn start(&self) -> Option<C64> {
        self.pieces.first().map(Piece::start)
    }

    pub fn end(&self) -> Option<C64> {
        self.pieces.last().map(Piece::end)
    }

    /// Largest gap between the end of one piece and the start of the next.
    pub fn max_gap(&self) -> f64 {
        self.pieces
            .windows(2)
            .map(|w| (w[0].end() - w[1].start()).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_closed(&self, tol: f64) -> bool {
        match (self.start(), self.end()) {
            (Some(a), Some(b)) => (a - b).norm() <= tol,
            _ => true,
        }
    }

    /// Waypoints of every piece, joined.
    pub fn waypoints(&self, max_angle: f64) -> Vec<C64> {
        let mut out: Vec<C64> = Vec::new();
        for p in &self.pieces {
            let w = p.waypoints(max_angle);
            let skip = usize::from(!out.is_empty());
            out.extend(w.into_iter().skip(skip));
        }
        out
    }
}

/// Distance from `p` to the segment `[a, b]`.
pub fn segment_distance(p: C64, a: C64, b: C64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let s = (((p - a) * d.conj()).re / len2).clamp(0.0, 1.0);
    (p - (a + d * s)).norm()
}
