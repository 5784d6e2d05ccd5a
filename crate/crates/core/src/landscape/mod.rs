//! Shared-space landscapes of constraint selection.
//!
//! Each constraint becomes a vector of its selection frequency in every
//! cell ([`FrequencyMatrix`]). A two-component PCA fitted jointly on all
//! cells places constraints in one plane ([`LandscapeProjection`]); each
//! cell then gets a weighted kernel density over those points
//! ([`DensityField`]) on a lattice shared by all cells, with contours at
//! fixed fractions of its mass.

pub mod contour;
pub mod density;
pub mod matrix;
pub mod pca;
pub mod render;

use std::path::Path;

use serde::Serialize;

use crate::harness::{CellKey, RunStore};
use crate::pool::{ConstraintId, ConstraintPool, Element};

pub use contour::{extract_contours, hdr_levels, isolines, ContourLevel, Polyline, DEFAULT_MASSES};
pub use density::{estimate_density, scott_bandwidth, DensityField, GridSpec, DEFAULT_GRID};
pub use matrix::{build_frequency_matrix, FrequencyMatrix};
pub use pca::{fit_pca, PcaModel};
pub use render::{render_landscape, render_landscape_styled, OutputFormat, PlotData, RenderStyle};

#[derive(Debug, thiserror::Error)]
pub enum LandscapeError {
    #[error("cell {0} has no valid runs")]
    EmptyCell(CellKey),
    #[error("cell {cell} selected id {id}, which is not in the pool")]
    ForeignId { cell: CellKey, id: ConstraintId },
    #[error("cell {0} is not part of this landscape")]
    UnknownCell(CellKey),
    #[error("pca: {0}")]
    Pca(String),
    #[error("grid: {0}")]
    Grid(String),
    #[error("degenerate density: {0}")]
    Degenerate(String),
    #[error("bandwidth must be positive, got ({0}, {1})")]
    Bandwidth(f64, f64),
    #[error("contour levels: {0}")]
    Levels(String),
    #[error("density fields do not share one grid")]
    MismatchedExtents,
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("plot data: {0}")]
    Json(#[from] serde_json::Error),
    #[error("style: {0}")]
    Style(String),
}

/// A labelled constraint position in the shared plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Landmark {
    pub id: ConstraintId,
    pub element: Element,
    pub x: f64,
    pub y: f64,
}

/// Constraint scores in the joint PCA plane plus each cell's weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeProjection {
    matrix: FrequencyMatrix,
    pca: PcaModel,
    scores: Vec<[f64; 2]>,
    weights: Vec<Vec<f64>>,
}

impl LandscapeProjection {
    /// Fits a two-component PCA on every column of `matrix` at once.
    pub fn fit(matrix: FrequencyMatrix) -> Result<Self, LandscapeError> {
        let pca = fit_pca(matrix.values(), matrix.rows(), matrix.cols(), 2)?;
        let scores = pca
            .transform(matrix.values(), matrix.cols())
            .into_iter()
            .map(|s| [s[0], s[1]])
            .collect();
        let weights = (0..matrix.cols()).map(|c| matrix.column(c)).collect();
        Ok(Self {
            matrix,
            pca,
            scores,
            weights,
        })
    }

    pub fn matrix(&self) -> &FrequencyMatrix {
        &self.matrix
    }

    pub fn pca(&self) -> &PcaModel {
        &self.pca
    }

    pub fn scores(&self) -> &[[f64; 2]] {
        &self.scores
    }

    pub fn cells(&self) -> &[CellKey] {
        self.matrix.cells()
    }

    pub fn cell_index(&self, cell: &CellKey) -> Option<usize> {
        self.cells().iter().position(|c| c == cell)
    }

    /// The frequency column of cell `col`.
    pub fn weights(&self, col: usize) -> &[f64] {
        &self.weights[col]
    }

    pub fn landmarks(&self) -> Vec<Landmark> {
        self.matrix
            .ids()
            .iter()
            .zip(self.matrix.elements())
            .zip(&self.scores)
            .map(|((&id, &element), s)| Landmark {
                id,
                element,
                x: s[0],
                y: s[1],
            })
            .collect()
    }
}

/// Tuning for [`build_landscape`].
#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeOptions {
    /// Lattice nodes per axis.
    pub grid: usize,
    /// Fixed `(h_x, h_y)` for every cell instead of the per-cell default.
    pub bandwidth: Option<(f64, f64)>,
    /// Fractions of each cell's mass to draw contours around.
    pub masses: Vec<f64>,
}

impl Default for LandscapeOptions {
    fn default() -> Self {
        Self {
            grid: DEFAULT_GRID,
            bandwidth: None,
            masses: DEFAULT_MASSES.to_vec(),
        }
    }
}

/// A projection with contoured density fields on one shared grid.
#[derive(Debug, Clone)]
pub struct Landscape {
    pub projection: LandscapeProjection,
    /// Fields for every non-degenerate cell, in projection column order.
    pub fields: Vec<DensityField>,
    /// Cells whose density is undefined; drawn as landmarks only.
    pub degenerate: Vec<CellKey>,
}

impl Landscape {
    pub fn field(&self, cell: &CellKey) -> Option<&DensityField> {
        self.fields.iter().find(|f| &f.cell == cell)
    }
}

/// Estimates and contours every cell of `projection` on a shared grid.
/// Cells are independent and are processed on scoped threads.
pub fn build_landscape(
    projection: LandscapeProjection,
    options: &LandscapeOptions,
) -> Result<Landscape, LandscapeError> {
    let grid = match density::shared_grid(&projection, options.grid, options.bandwidth) {
        Ok(grid) => grid,
        Err(LandscapeError::Degenerate(reason)) => {
            log::warn!("{reason}; drawing landmarks only");
            let degenerate = projection.cells().to_vec();
            return Ok(Landscape {
                projection,
                fields: Vec::new(),
                degenerate,
            });
        }
        Err(e) => return Err(e),
    };
    let results: Vec<Result<DensityField, LandscapeError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..projection.cells().len())
            .map(|col| {
                let projection = &projection;
                scope.spawn(move || {
                    let mut field =
                        density::estimate_density_on(projection, col, grid, options.bandwidth)?;
                    field.contour_by_mass(&options.masses)?;
                    Ok(field)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("density worker panicked"))
            .collect()
    });
    let mut fields = Vec::new();
    let mut degenerate = Vec::new();
    for (cell, result) in projection.cells().iter().zip(results) {
        match result {
            Ok(field) => fields.push(field),
            Err(LandscapeError::Degenerate(reason)) => {
                log::warn!("{reason}; drawing landmarks only");
                degenerate.push(cell.clone());
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Landscape {
        projection,
        fields,
        degenerate,
    })
}

/// Store-to-landscape pipeline: tallies `cells`, fits the joint PCA and
/// contours each cell.
pub fn landscape_from_store(
    store: &RunStore,
    pool: &ConstraintPool,
    cells: &[CellKey],
    options: &LandscapeOptions,
) -> Result<Landscape, LandscapeError> {
    let matrix = build_frequency_matrix(store, pool, cells)?;
    build_landscape(LandscapeProjection::fit(matrix)?, options)
}

/// Writes a built landscape.
pub fn write_landscape(
    landscape: &Landscape,
    out: &Path,
    format: OutputFormat,
    style: &RenderStyle,
) -> Result<(), LandscapeError> {
    render_landscape_styled(&landscape.projection, &landscape.fields, out, format, style)
}
