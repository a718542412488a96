//! Elevation rasters and the grid analyses the siting model depends on.
//!
//! Cells are addressed `(row, col)` with row 0 at the top (north) edge, the
//! same order ESRI ASCII grids store their values in.

mod candidates;
mod components;
mod distance;
pub mod io;
mod resample;

pub use candidates::{candidate_sets, CandidateSets};
pub use components::{connected_components, Adjacency};
pub use distance::{distance_field, distance_field_with, DistanceField, DistanceMetric};
pub use resample::{aggregate, clip, default_clip_margin, window_grid, Window};

use crate::error::{Error, Result};
use crate::num::Scalar;

/// Grid cell coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Cell { row, col }
    }

    /// Up, down, left, right neighbours that exist on a `rows x cols` grid.
    pub fn neighbors4(self, rows: usize, cols: usize) -> impl Iterator<Item = Cell> {
        self.offsets(rows, cols, &OFFSETS4)
    }

    /// All eight surrounding cells that exist on a `rows x cols` grid.
    pub fn neighbors8(self, rows: usize, cols: usize) -> impl Iterator<Item = Cell> {
        self.offsets(rows, cols, &OFFSETS8)
    }

    /// The four orthogonal neighbours in fixed order up, down, left, right;
    /// `None` where the neighbour falls off the grid.
    pub fn sides(self, rows: usize, cols: usize) -> [Option<Cell>; 4] {
        let mut out = [None; 4];
        for (slot, (dr, dc)) in out.iter_mut().zip(OFFSETS4) {
            *slot = self.shifted(dr, dc, rows, cols);
        }
        out
    }

    fn shifted(self, dr: isize, dc: isize, rows: usize, cols: usize) -> Option<Cell> {
        let r = self.row.checked_add_signed(dr)?;
        let c = self.col.checked_add_signed(dc)?;
        (r < rows && c < cols).then_some(Cell::new(r, c))
    }

    fn offsets(
        self,
        rows: usize,
        cols: usize,
        table: &'static [(isize, isize)],
    ) -> impl Iterator<Item = Cell> {
        table
            .iter()
            .filter_map(move |&(dr, dc)| self.shifted(dr, dc, rows, cols))
    }

    pub fn is_diagonal_to(self, other: Cell) -> bool {
        self.row.abs_diff(other.row) == 1 && self.col.abs_diff(other.col) == 1
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

const OFFSETS4: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];
const OFFSETS8: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// Boolean raster over a `rows x cols` grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(rows: usize, cols: usize) -> Self {
        Mask {
            rows,
            cols,
            bits: vec![false; rows * cols],
        }
    }

    pub fn from_cells(rows: usize, cols: usize, cells: impl IntoIterator<Item = Cell>) -> Self {
        let mut m = Mask::new(rows, cols);
        for c in cells {
            m.set(c, true);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(Cell) -> bool) -> Self {
        let mut bits = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                bits.push(f(Cell::new(r, c)));
            }
        }
        Mask { rows, cols, bits }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.row < self.rows && cell.col < self.cols && self.bits[cell.row * self.cols + cell.col]
    }

    pub fn set(&mut self, cell: Cell, value: bool) {
        assert!(cell.row < self.rows && cell.col < self.cols, "cell {cell} off grid");
        self.bits[cell.row * self.cols + cell.col] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    /// Set cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(move |(i, _)| Cell::new(i / self.cols, i % self.cols))
    }

    pub fn union(&self, other: &Mask) -> Mask {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn difference(&self, other: &Mask) -> Mask {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
    }

    fn zip_with(&self, other: &Mask, f: impl Fn(bool, bool) -> bool) -> Mask {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mask {
            rows: self.rows,
            cols: self.cols,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    /// Row/column bounding box `(min_row, min_col, max_row, max_col)`, inclusive.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        self.cells().fold(None, |acc, c| {
            Some(match acc {
                None => (c.row, c.col, c.row, c.col),
                Some((r0, c0, r1, c1)) => (r0.min(c.row), c0.min(c.col), r1.max(c.row), c1.max(c.col)),
            })
        })
    }
}

/// Lower-left corner of the raster in map units, carried through for output.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GeoRef {
    pub xll: f64,
    pub yll: f64,
}

/// Elevation raster with the existing lower water body marked.
#[derive(Debug, Clone, PartialEq)]
pub struct TerrainGrid<T> {
    rows: usize,
    cols: usize,
    cell_length: T,
    elevations: Vec<T>,
    lower: Mask,
    nodata: Mask,
    lower_elevation: T,
    georef: GeoRef,
}

impl<T: Scalar> TerrainGrid<T> {
    /// Builds a grid from row-major elevations. NODATA cells may hold any value;
    /// it is replaced by NaN.
    pub fn new(
        rows: usize,
        cols: usize,
        cell_length: T,
        mut elevations: Vec<T>,
        lower: Mask,
        nodata: Mask,
        lower_elevation: T,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidGrid("grid has no cells".into()));
        }
        if !(cell_length > T::zero()) || !cell_length.is_finite() {
            return Err(Error::InvalidGrid(format!("cell length {cell_length} must be positive")));
        }
        if elevations.len() != rows * cols {
            return Err(Error::InvalidGrid(format!(
                "{} elevations for a {rows}x{cols} grid",
                elevations.len()
            )));
        }
        for m in [&lower, &nodata] {
            if (m.rows(), m.cols()) != (rows, cols) {
                return Err(Error::InvalidGrid("mask shape does not match grid".into()));
            }
        }
        for (i, h) in elevations.iter_mut().enumerate() {
            let cell = Cell::new(i / cols, i % cols);
            if nodata.contains(cell) {
                *h = T::nan();
            } else if !h.is_finite() {
                return Err(Error::InvalidGrid(format!("non-finite elevation at {cell}")));
            }
        }
        Ok(TerrainGrid {
            rows,
            cols,
            cell_length,
            elevations,
            lower: lower.difference(&nodata),
            nodata,
            lower_elevation,
            georef: GeoRef::default(),
        })
    }

    /// Convenience constructor: lower body = cells within `tolerance` of `lower_elevation`.
    pub fn from_rows(
        cell_length: T,
        rows: &[Vec<T>],
        lower_elevation: T,
        tolerance: T,
    ) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::InvalidGrid("ragged rows".into()));
        }
        let elevations: Vec<T> = rows.iter().flatten().copied().collect();
        let lower = Mask::from_fn(nrows, ncols, |c| {
            (elevations[c.row * ncols + c.col] - lower_elevation).abs() <= tolerance
        });
        TerrainGrid::new(
            nrows,
            ncols,
            cell_length,
            elevations,
            lower,
            Mask::new(nrows, ncols),
            lower_elevation,
        )
    }

    pub fn with_georef(mut self, georef: GeoRef) -> Self {
        self.georef = georef;
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_length(&self) -> T {
        self.cell_length
    }

    pub fn cell_area(&self) -> T {
        self.cell_length * self.cell_length
    }

    pub fn lower_elevation(&self) -> T {
        self.lower_elevation
    }

    pub fn georef(&self) -> GeoRef {
        self.georef
    }

    /// Elevation of `cell`; NaN on NODATA cells.
    pub fn elevation(&self, cell: Cell) -> T {
        self.elevations[cell.row * self.cols + cell.col]
    }

    pub fn elevations(&self) -> &[T] {
        &self.elevations
    }

    pub fn is_lower(&self, cell: Cell) -> bool {
        self.lower.contains(cell)
    }

    pub fn is_nodata(&self, cell: Cell) -> bool {
        self.nodata.contains(cell)
    }

    pub fn lower_mask(&self) -> &Mask {
        &self.lower
    }

    pub fn nodata_mask(&self) -> &Mask {
        &self.nodata
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.row < self.rows && cell.col < self.cols
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> {
        let cols = self.cols;
        (0..self.rows * cols).map(move |i| Cell::new(i / cols, i % cols))
    }

    /// Lowest elevation among valid cells.
    pub fn min_elevation(&self) -> Option<T> {
        self.elevations
            .iter()
            .copied()
            .filter(|h| !h.is_nan())
            .fold(None, |acc, h| Some(acc.map_or(h, |a: T| a.min(h))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neighbors_clip_at_edges() {
        let corner: Vec<Cell> = Cell::new(0, 0).neighbors4(3, 3).collect();
        assert_eq!(corner, vec![Cell::new(1, 0), Cell::new(0, 1)]);
        assert_eq!(Cell::new(1, 1).neighbors8(3, 3).count(), 8);
        assert_eq!(Cell::new(2, 2).neighbors8(3, 3).count(), 3);
        assert_eq!(Cell::new(0, 1).sides(3, 3), [None, Some(Cell::new(1, 1)), Some(Cell::new(0, 0)), Some(Cell::new(0, 2))]);
    }

    #[test]
    fn nodata_cells_become_nan_and_leave_lower_mask() {
        let mut nodata = Mask::new(1, 3);
        nodata.set(Cell::new(0, 2), true);
        let lower = Mask::from_cells(1, 3, [Cell::new(0, 0), Cell::new(0, 2)]);
        let g = TerrainGrid::<f64>::new(1, 3, 10.0, vec![1.0, 2.0, -9999.0], lower, nodata, 1.0).unwrap();
        assert!(g.elevation(Cell::new(0, 2)).is_nan());
        assert_eq!(g.lower_mask().count(), 1);
        assert_eq!(g.min_elevation(), Some(1.0));
    }

    #[test]
    fn rejects_bad_cell_length_and_shape() {
        let m = Mask::new(1, 1);
        assert!(TerrainGrid::new(1, 1, 0.0, vec![1.0], m.clone(), m.clone(), 0.0).is_err());
        assert!(TerrainGrid::new(1, 1, 1.0, vec![1.0, 2.0], m.clone(), m, 0.0).is_err());
    }

    #[test]
    fn mask_bounding_box() {
        let m = Mask::from_cells(5, 5, [Cell::new(1, 3), Cell::new(3, 1)]);
        assert_eq!(m.bounding_box(), Some((1, 1, 3, 3)));
        assert_eq!(Mask::new(2, 2).bounding_box(), None);
    }
}
