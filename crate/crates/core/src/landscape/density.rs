//! Weighted Gaussian kernel density over projected constraints.
//!
//! For a cell with weights `w_k` (its frequency column, summing to 1) over
//! score points `(x_k, y_k)`, the density at `(x, y)` is
//!
//! ```text
//! f(x, y) = Σ_k w_k · φ((x − x_k) / h_x) / h_x · φ((y − y_k) / h_y) / h_y
//! ```
//!
//! with `φ` the standard normal density. Default bandwidths follow the
//! weighted Scott rule per axis, `h = σ_w · m_eff^(−1/6)`, where `σ_w` is
//! the weighted standard deviation and `m_eff = 1 / Σ w_k²`.

use serde::{Deserialize, Serialize};

use crate::harness::CellKey;

use super::contour::{extract_contours, hdr_levels, ContourLevel};
use super::{LandscapeError, LandscapeProjection};

/// Padding around the score bounding box, in maximum bandwidths.
pub const PADDING_BANDWIDTHS: f64 = 3.0;
pub const DEFAULT_GRID: usize = 256;

/// A regular lattice; node `(i, j)` sits at `(x0 + i·dx, y0 + j·dy)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x0: f64,
    pub y0: f64,
    pub dx: f64,
    pub dy: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y0 + j as f64 * self.dy
    }

    pub fn x1(&self) -> f64 {
        self.x(self.nx - 1)
    }

    pub fn y1(&self) -> f64 {
        self.y(self.ny - 1)
    }

    pub fn contains(&self, p: [f64; 2], tol: f64) -> bool {
        p[0] >= self.x0 - tol
            && p[0] <= self.x1() + tol
            && p[1] >= self.y0 - tol
            && p[1] <= self.y1() + tol
    }
}

/// Weighted mean, standard deviation and effective point count.
pub fn weighted_spread(points: &[[f64; 2]], weights: &[f64]) -> ([f64; 2], [f64; 2], f64) {
    let total: f64 = weights.iter().sum();
    let mut mean = [0.0; 2];
    let mut sum_sq_w = 0.0;
    for (p, &w) in points.iter().zip(weights) {
        let w = w / total;
        mean[0] += w * p[0];
        mean[1] += w * p[1];
        sum_sq_w += w * w;
    }
    let mut var = [0.0; 2];
    for (p, &w) in points.iter().zip(weights) {
        let w = w / total;
        var[0] += w * (p[0] - mean[0]).powi(2);
        var[1] += w * (p[1] - mean[1]).powi(2);
    }
    (mean, [var[0].sqrt(), var[1].sqrt()], 1.0 / sum_sq_w)
}

/// Weighted Scott bandwidths, or `None` when the cell is degenerate
/// (fewer than two weighted points or no spread on an axis).
pub fn scott_bandwidth(points: &[[f64; 2]], weights: &[f64]) -> Option<(f64, f64)> {
    let support = weights.iter().filter(|w| **w > 0.0).count();
    if support < 2 {
        return None;
    }
    let (_, sd, m_eff) = weighted_spread(points, weights);
    let factor = m_eff.powf(-1.0 / 6.0);
    let (hx, hy) = (sd[0] * factor, sd[1] * factor);
    (hx > 0.0 && hy > 0.0).then_some((hx, hy))
}

/// A cell's density on the shared grid, with its contour lines.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub cell: CellKey,
    pub grid: GridSpec,
    /// Row-major, `values[j * nx + i]` at node `(i, j)`.
    pub values: Vec<f64>,
    pub bandwidth: (f64, f64),
    pub contours: Vec<ContourLevel>,
}

impl DensityField {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.nx + i]
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Riemann sum `Σ f · dx · dy` over the lattice nodes.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx * self.grid.dy
    }

    /// Replaces the contours with highest-density-region lines enclosing
    /// each fraction of `masses`.
    pub fn contour_by_mass(&mut self, masses: &[f64]) -> Result<(), LandscapeError> {
        let mut contours = Vec::with_capacity(masses.len());
        for (mass, level) in hdr_levels(self, masses)? {
            let mut c = extract_contours(self, &[level])?.remove(0);
            c.mass = Some(mass);
            contours.push(c);
        }
        self.contours = contours;
        Ok(())
    }

    pub fn contour_for_mass(&self, mass: f64) -> Option<&ContourLevel> {
        self.contours
            .iter()
            .find(|c| c.mass.is_some_and(|m| (m - mass).abs() < 1e-12))
    }
}

/// Shared lattice for a landscape: the bounding box of all scores padded by
/// [`PADDING_BANDWIDTHS`] times the largest bandwidth on each axis, with
/// `resolution` nodes per axis.
pub fn shared_grid(
    projection: &LandscapeProjection,
    resolution: usize,
    bandwidth: Option<(f64, f64)>,
) -> Result<GridSpec, LandscapeError> {
    if resolution < 2 {
        return Err(LandscapeError::Grid(format!(
            "resolution {resolution} is below 2"
        )));
    }
    let mut h_max = (0.0f64, 0.0f64);
    match bandwidth {
        Some((hx, hy)) => {
            check_bandwidth(hx, hy)?;
            h_max = (hx, hy);
        }
        None => {
            for col in 0..projection.cells().len() {
                if let Some((hx, hy)) =
                    scott_bandwidth(projection.scores(), projection.weights(col))
                {
                    h_max = (h_max.0.max(hx), h_max.1.max(hy));
                }
            }
        }
    }
    if h_max.0 <= 0.0 || h_max.1 <= 0.0 {
        return Err(LandscapeError::Degenerate(
            "no cell has a defined bandwidth".into(),
        ));
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in projection.scores() {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let pad = [PADDING_BANDWIDTHS * h_max.0, PADDING_BANDWIDTHS * h_max.1];
    let x0 = lo[0] - pad[0];
    let y0 = lo[1] - pad[1];
    let steps = (resolution - 1) as f64;
    Ok(GridSpec {
        x0,
        y0,
        dx: (hi[0] + pad[0] - x0) / steps,
        dy: (hi[1] + pad[1] - y0) / steps,
        nx: resolution,
        ny: resolution,
    })
}

fn check_bandwidth(hx: f64, hy: f64) -> Result<(), LandscapeError> {
    if !(hx.is_finite() && hy.is_finite() && hx > 0.0 && hy > 0.0) {
        return Err(LandscapeError::Bandwidth(hx, hy));
    }
    Ok(())
}

fn gaussian_row(center: f64, h: f64, origin: f64, step: f64, n: usize) -> Vec<f64> {
    let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * h);
    (0..n)
        .map(|i| {
            let z = (origin + i as f64 * step - center) / h;
            norm * (-0.5 * z * z).exp()
        })
        .collect()
}

/// Evaluates a cell's weighted density on `grid`.
pub fn density_on_grid(
    points: &[[f64; 2]],
    weights: &[f64],
    grid: &GridSpec,
    bandwidth: (f64, f64),
) -> Result<Vec<f64>, LandscapeError> {
    check_bandwidth(bandwidth.0, bandwidth.1)?;
    let total: f64 = weights.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(LandscapeError::Degenerate("zero total weight".into()));
    }
    let mut values = vec![0.0; grid.nx * grid.ny];
    for (p, &w) in points.iter().zip(weights) {
        if w <= 0.0 {
            continue;
        }
        let kx = gaussian_row(p[0], bandwidth.0, grid.x0, grid.dx, grid.nx);
        let ky = gaussian_row(p[1], bandwidth.1, grid.y0, grid.dy, grid.ny);
        let w = w / total;
        for (j, ky) in ky.iter().enumerate() {
            let a = w * ky;
            if a == 0.0 {
                continue;
            }
            let row = &mut values[j * grid.nx..(j + 1) * grid.nx];
            for (v, kx) in row.iter_mut().zip(&kx) {
                *v += a * kx;
            }
        }
    }
    Ok(values)
}

/// Density of `cell` on the landscape's shared grid. Contours are left
/// empty; see [`DensityField::contour_by_mass`].
pub fn estimate_density(
    projection: &LandscapeProjection,
    cell: &CellKey,
    grid_resolution: usize,
    bandwidth: Option<(f64, f64)>,
) -> Result<DensityField, LandscapeError> {
    let col = projection
        .cell_index(cell)
        .ok_or_else(|| LandscapeError::UnknownCell(cell.clone()))?;
    let grid = shared_grid(projection, grid_resolution, bandwidth)?;
    estimate_density_on(projection, col, grid, bandwidth)
}

pub(crate) fn estimate_density_on(
    projection: &LandscapeProjection,
    col: usize,
    grid: GridSpec,
    bandwidth: Option<(f64, f64)>,
) -> Result<DensityField, LandscapeError> {
    let cell = projection.cells()[col].clone();
    let weights = projection.weights(col);
    let bandwidth = match bandwidth {
        Some(h) => h,
        None => scott_bandwidth(projection.scores(), weights).ok_or_else(|| {
            LandscapeError::Degenerate(format!(
                "cell {cell} has fewer than two distinct selected constraints"
            ))
        })?,
    };
    let values = density_on_grid(projection.scores(), weights, &grid, bandwidth)?;
    Ok(DensityField {
        cell,
        grid,
        values,
        bandwidth,
        contours: Vec::new(),
    })
}
