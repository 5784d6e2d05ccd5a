use crate::harness::{CellKey, RunRecord, RunStore};
use crate::pool::{ConstraintId, ConstraintPool, Element};

use super::LandscapeError;

/// Selection frequency of every pool constraint (rows) in each cell
/// (columns). Each column holds `count / total selections` and sums to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyMatrix {
    ids: Vec<ConstraintId>,
    elements: Vec<Element>,
    cells: Vec<CellKey>,
    // row-major, rows × cells
    values: Vec<f64>,
}

impl FrequencyMatrix {
    /// Tallies valid records per cell. Rows follow pool id order.
    pub fn from_records(
        pool: &ConstraintPool,
        cells: &[(CellKey, Vec<RunRecord>)],
    ) -> Result<Self, LandscapeError> {
        let n = pool.len();
        let ids: Vec<ConstraintId> = (1..=n as ConstraintId).collect();
        let elements = ids
            .iter()
            .map(|&id| pool.get(id).expect("contiguous ids").element)
            .collect();
        let mut values = vec![0.0; n * cells.len()];
        for (col, (cell, records)) in cells.iter().enumerate() {
            let mut counts = vec![0u64; n];
            let mut total = 0u64;
            for r in records.iter().filter(|r| r.is_valid()) {
                for &id in &r.selected {
                    if !pool.contains(id) {
                        return Err(LandscapeError::ForeignId {
                            cell: cell.clone(),
                            id,
                        });
                    }
                    counts[id as usize - 1] += 1;
                    total += 1;
                }
            }
            if total == 0 {
                return Err(LandscapeError::EmptyCell(cell.clone()));
            }
            for (row, &c) in counts.iter().enumerate() {
                values[row * cells.len() + col] = c as f64 / total as f64;
            }
        }
        Ok(Self {
            ids,
            elements,
            cells: cells.iter().map(|(c, _)| c.clone()).collect(),
            values,
        })
    }

    /// Builds the matrix over `cells` from a run store.
    pub fn from_store(
        store: &RunStore,
        pool: &ConstraintPool,
        cells: &[CellKey],
    ) -> Result<Self, LandscapeError> {
        let loaded = cells
            .iter()
            .map(|c| {
                store
                    .load_cell(c)
                    .map(|records| (c.clone(), records))
                    .map_err(|_| LandscapeError::EmptyCell(c.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_records(pool, &loaded)
    }

    /// Direct construction from a row-major table.
    pub fn from_rows(
        ids: Vec<ConstraintId>,
        elements: Vec<Element>,
        cells: Vec<CellKey>,
        values: Vec<f64>,
    ) -> Self {
        assert_eq!(ids.len(), elements.len());
        assert_eq!(values.len(), ids.len() * cells.len());
        Self {
            ids,
            elements,
            cells,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.ids.len()
    }

    pub fn cols(&self) -> usize {
        self.cells.len()
    }

    pub fn ids(&self) -> &[ConstraintId] {
        &self.ids
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn cells(&self) -> &[CellKey] {
        &self.cells
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols() + col]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows()).map(|r| self.get(r, col)).collect()
    }

    pub fn column_of(&self, cell: &CellKey) -> Option<Vec<f64>> {
        let col = self.cells.iter().position(|c| c == cell)?;
        Some(self.column(col))
    }
}

/// Tallies `store` for `cells`; convenience wrapper over
/// [`FrequencyMatrix::from_store`].
pub fn build_frequency_matrix(
    store: &RunStore,
    pool: &ConstraintPool,
    cells: &[CellKey],
) -> Result<FrequencyMatrix, LandscapeError> {
    FrequencyMatrix::from_store(store, pool, cells)
}
