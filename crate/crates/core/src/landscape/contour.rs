//! Marching-squares isolines and highest-density-region levels.
//!
//! Lattice cells are walked counter-clockwise from their lower-left corner.
//! A crossing where the boundary leaves the superlevel set `{f ≥ level}` is
//! an exit, one where it comes back is an entry. Every segment runs from an
//! exit to an entry, which keeps the superlevel set on its left, so closed
//! outer rings come out counter-clockwise and holes clockwise. Saddle cells
//! are resolved with the mean of the four corners: when the centre is
//! inside, each exit pairs with the next entry, otherwise with the previous
//! one.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::density::{DensityField, GridSpec};
use super::LandscapeError;

pub const DEFAULT_MASSES: [f64; 3] = [0.5, 0.75, 0.9];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub closed: bool,
    /// For closed lines the first point is not repeated.
    pub points: Vec<[f64; 2]>,
}

impl Polyline {
    /// Shoelace area; positive when the line winds counter-clockwise.
    /// Open lines are treated as if closed by a straight chord.
    pub fn signed_area(&self) -> f64 {
        let n = self.points.len();
        let mut twice = 0.0;
        for k in 0..n {
            let a = self.points[k];
            let b = self.points[(k + 1) % n];
            twice += a[0] * b[1] - b[0] * a[1];
        }
        twice / 2.0
    }
}

/// All isolines at one density value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourLevel {
    pub level: f64,
    /// Probability mass enclosed, when the level came from [`hdr_levels`].
    pub mass: Option<f64>,
    pub polylines: Vec<Polyline>,
}

impl ContourLevel {
    /// Area of the superlevel region bounded by the closed lines. Holes
    /// wind clockwise and subtract.
    pub fn enclosed_area(&self) -> f64 {
        self.polylines
            .iter()
            .filter(|p| p.closed)
            .map(Polyline::signed_area)
            .sum()
    }

    pub fn is_closed(&self) -> bool {
        self.polylines.iter().all(|p| p.closed)
    }
}

/// Density thresholds whose superlevel sets hold each fraction of the
/// field's discrete mass. Returns `(mass, level)` pairs in input order.
pub fn hdr_levels(field: &DensityField, masses: &[f64]) -> Result<Vec<(f64, f64)>, LandscapeError> {
    for &m in masses {
        if !(m > 0.0 && m < 1.0) {
            return Err(LandscapeError::Levels(format!(
                "mass {m} is outside (0, 1)"
            )));
        }
    }
    let mut sorted = field.values.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = sorted.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(LandscapeError::Degenerate(format!(
            "cell {} has no mass on the grid",
            field.cell
        )));
    }
    let mut cumulative = Vec::with_capacity(sorted.len());
    let mut acc = 0.0;
    for v in &sorted {
        acc += v;
        cumulative.push(acc / total);
    }
    Ok(masses
        .iter()
        .map(|&m| {
            let k = cumulative.partition_point(|&c| c < m).min(sorted.len() - 1);
            (m, sorted[k].max(f64::MIN_POSITIVE))
        })
        .collect())
}

/// Isolines of `field` at each of `levels`, which must be positive and
/// strictly increasing. A level above the field maximum yields no lines.
pub fn extract_contours(
    field: &DensityField,
    levels: &[f64],
) -> Result<Vec<ContourLevel>, LandscapeError> {
    for (k, &l) in levels.iter().enumerate() {
        if !(l > 0.0 && l.is_finite()) {
            return Err(LandscapeError::Levels(format!("level {l} is not positive")));
        }
        if k > 0 && l <= levels[k - 1] {
            return Err(LandscapeError::Levels(
                "levels must be strictly increasing".into(),
            ));
        }
    }
    Ok(levels
        .iter()
        .map(|&level| ContourLevel {
            level,
            mass: None,
            polylines: isolines(&field.values, &field.grid, level),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Edge {
    /// Between nodes (i, j) and (i + 1, j).
    H(usize, usize),
    /// Between nodes (i, j) and (i, j + 1).
    V(usize, usize),
}

fn crossing(values: &[f64], grid: &GridSpec, level: f64, edge: Edge) -> [f64; 2] {
    let at = |i: usize, j: usize| values[j * grid.nx + i];
    match edge {
        Edge::H(i, j) => {
            let (a, b) = (at(i, j), at(i + 1, j));
            let t = ((level - a) / (b - a)).clamp(0.0, 1.0);
            [grid.x(i) + t * grid.dx, grid.y(j)]
        }
        Edge::V(i, j) => {
            let (a, b) = (at(i, j), at(i, j + 1));
            let t = ((level - a) / (b - a)).clamp(0.0, 1.0);
            [grid.x(i), grid.y(j) + t * grid.dy]
        }
    }
}

/// Marching squares over a row-major lattice.
pub fn isolines(values: &[f64], grid: &GridSpec, level: f64) -> Vec<Polyline> {
    let nx = grid.nx;
    let inside = |i: usize, j: usize| values[j * nx + i] >= level;
    // exit edge -> entry edge
    let mut next: BTreeMap<Edge, Edge> = BTreeMap::new();

    for j in 0..grid.ny.saturating_sub(1) {
        for i in 0..nx.saturating_sub(1) {
            let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let flags = corners.map(|(a, b)| inside(a, b));
            if flags.iter().all(|f| *f) || flags.iter().all(|f| !*f) {
                continue;
            }
            let edges = [
                Edge::H(i, j),
                Edge::V(i + 1, j),
                Edge::H(i, j + 1),
                Edge::V(i, j),
            ];
            let mut exits = Vec::with_capacity(2);
            let mut entries = Vec::with_capacity(2);
            for k in 0..4 {
                match (flags[k], flags[(k + 1) % 4]) {
                    (true, false) => exits.push(k),
                    (false, true) => entries.push(k),
                    _ => {}
                }
            }
            if exits.len() == 1 {
                next.insert(edges[exits[0]], edges[entries[0]]);
                continue;
            }
            let centre = corners
                .iter()
                .map(|&(a, b)| values[b * nx + a])
                .sum::<f64>()
                / 4.0;
            let centre_inside = centre >= level;
            for &x in &exits {
                // entries alternate with exits around the cell
                let e = if centre_inside {
                    (x + 1) % 4
                } else {
                    (x + 3) % 4
                };
                debug_assert!(entries.contains(&e));
                next.insert(edges[x], edges[e]);
            }
        }
    }

    let ends: std::collections::BTreeSet<Edge> = next.values().copied().collect();
    let mut lines = Vec::new();
    let starts: Vec<Edge> = next.keys().copied().filter(|e| !ends.contains(e)).collect();
    for start in starts {
        let mut edges = vec![start];
        let mut cur = start;
        while let Some(n) = next.remove(&cur) {
            edges.push(n);
            cur = n;
        }
        lines.push(Polyline {
            closed: false,
            points: edges
                .iter()
                .map(|&e| crossing(values, grid, level, e))
                .collect(),
        });
    }
    while let Some((&start, _)) = next.iter().next() {
        let mut edges = Vec::new();
        let mut cur = start;
        while let Some(n) = next.remove(&cur) {
            edges.push(cur);
            cur = n;
        }
        lines.push(Polyline {
            closed: true,
            points: edges
                .iter()
                .map(|&e| crossing(values, grid, level, e))
                .collect(),
        });
    }
    lines
}
