//! The multi-row array the diffusion models operate on: a dense `rows x T`
//! matrix of features plus a per-cell layout marking which cells are fixed
//! conditions (observations, recommendation rows, zero padding) and which
//! hold the action encoding being denoised.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Role of a grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellKind {
    /// Start/goal observation features; fixed by projection.
    Observation,
    /// Recommendation-distribution entries; fixed by projection.
    Recommendation,
    /// Action-encoding entries; the only cells the model actually denoises.
    Action,
    /// Structural padding; fixed at exactly zero.
    ZeroPad,
}

impl CellKind {
    pub fn is_condition(self) -> bool {
        !matches!(self, CellKind::Action)
    }
}

/// Dense row-major `rows x cols` matrix of f64 features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {rows}x{cols} grid",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }
}

/// Per-cell roles for one grid shape, plus the contiguous block of rows that
/// carry the action encoding (loss weighting applies there column-wise).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridLayout {
    rows: usize,
    cols: usize,
    kinds: Vec<CellKind>,
    action_row_start: usize,
    action_row_end: usize,
}

impl GridLayout {
    pub fn new(
        rows: usize,
        cols: usize,
        kinds: Vec<CellKind>,
        action_rows: std::ops::Range<usize>,
    ) -> Result<Self> {
        if kinds.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} cell kinds for a {rows}x{cols} layout",
                kinds.len()
            )));
        }
        if action_rows.end > rows || action_rows.start >= action_rows.end {
            return Err(Error::ShapeMismatch(
                "action row range out of bounds".to_string(),
            ));
        }
        Ok(Self {
            rows,
            cols,
            kinds,
            action_row_start: action_rows.start,
            action_row_end: action_rows.end,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn kind(&self, row: usize, col: usize) -> CellKind {
        self.kinds[row * self.cols + col]
    }

    pub fn kinds(&self) -> &[CellKind] {
        &self.kinds
    }

    pub fn action_rows(&self) -> std::ops::Range<usize> {
        self.action_row_start..self.action_row_end
    }

    pub fn is_action_row(&self, row: usize) -> bool {
        row >= self.action_row_start && row < self.action_row_end
    }

    pub fn num_action_rows(&self) -> usize {
        self.action_row_end - self.action_row_start
    }

    pub fn matches(&self, grid: &Grid) -> bool {
        self.rows == grid.rows() && self.cols == grid.cols()
    }
}

/// A grid paired with its layout. Condition cells carry their fixed values
/// (observations at the first/last column, recommendation entries, zeros);
/// action cells carry the clean targets for training samples or zeros for a
/// pure inference template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionMatrix {
    layout: GridLayout,
    values: Grid,
}

impl ConditionMatrix {
    pub fn new(layout: GridLayout, values: Grid) -> Result<Self> {
        if !layout.matches(&values) {
            return Err(Error::ShapeMismatch(format!(
                "layout {}x{} vs grid {}x{}",
                layout.rows(),
                layout.cols(),
                values.rows(),
                values.cols()
            )));
        }
        for row in 0..layout.rows() {
            for col in 0..layout.cols() {
                if layout.kind(row, col) == CellKind::ZeroPad && values.get(row, col) != 0.0 {
                    return Err(Error::InvalidConfig(format!(
                        "zero-pad cell ({row}, {col}) holds {}",
                        values.get(row, col)
                    )));
                }
            }
        }
        Ok(Self { layout, values })
    }

    pub fn layout(&self) -> &GridLayout {
        &self.layout
    }

    pub fn values(&self) -> &Grid {
        &self.values
    }

    /// The clean grid, for use as a training target.
    pub fn target(&self) -> Grid {
        self.values.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_indexing_is_row_major() {
        let g = Grid::from_vec(2, 3, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(g.get(0, 2), 2.0);
        assert_eq!(g.get(1, 0), 3.0);
    }

    #[test]
    fn from_vec_rejects_wrong_size() {
        assert!(Grid::from_vec(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn condition_matrix_rejects_nonzero_padding() {
        let layout = GridLayout::new(
            1,
            2,
            vec![CellKind::ZeroPad, CellKind::Action],
            0..1,
        )
        .unwrap();
        let mut grid = Grid::zeros(1, 2);
        grid.set(0, 0, 0.5);
        assert!(ConditionMatrix::new(layout, grid).is_err());
    }
}
