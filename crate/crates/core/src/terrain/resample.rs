use super::{Cell, GeoRef, Mask, TerrainGrid};
use crate::error::{Error, Result};
use crate::num::Scalar;

/// Rectangular sub-region of a grid; `row0, col0` is the offset of the
/// window's top-left cell in the parent grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub row0: usize,
    pub col0: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Window {
    pub fn full(rows: usize, cols: usize) -> Self {
        Window {
            row0: 0,
            col0: 0,
            rows,
            cols,
        }
    }

    pub fn contains(&self, cell: Cell) -> bool {
        (self.row0..self.row0 + self.rows).contains(&cell.row)
            && (self.col0..self.col0 + self.cols).contains(&cell.col)
    }

    pub fn to_global(&self, cell: Cell) -> Cell {
        Cell::new(cell.row + self.row0, cell.col + self.col0)
    }

    pub fn to_local(&self, cell: Cell) -> Option<Cell> {
        self.contains(cell)
            .then(|| Cell::new(cell.row - self.row0, cell.col - self.col0))
    }

    /// Cells of a `mask`-shaped parent raster that fall inside the window.
    pub fn crop_mask(&self, mask: &Mask) -> Mask {
        Mask::from_fn(self.rows, self.cols, |c| mask.contains(self.to_global(c)))
    }
}

/// Default clip margin in cells for a refinement step of the given factor.
pub fn default_clip_margin(factor: usize) -> usize {
    4.max(2 * factor)
}

/// Aggregates `factor x factor` blocks into super-cells.
///
/// Grids whose size is not a multiple of `factor` are padded with NODATA on the
/// bottom and right. A super-cell's elevation is the mean of its valid
/// children, it belongs to the lower body when a strict majority of its
/// in-grid children do, and it is NODATA only when every child is. A lower
/// body too thin to win any majority is kept by marking every super-cell that
/// touches it.
pub fn aggregate<T: Scalar>(grid: &TerrainGrid<T>, factor: usize) -> Result<TerrainGrid<T>> {
    if factor < 1 {
        return Err(Error::param("factor", "aggregation factor must be at least 1"));
    }
    if factor == 1 {
        return Ok(grid.clone());
    }
    let rows = grid.rows().div_ceil(factor);
    let cols = grid.cols().div_ceil(factor);
    let mut elevations = Vec::with_capacity(rows * cols);
    let mut lower = Mask::new(rows, cols);
    let mut nodata = Mask::new(rows, cols);
    let mut touched = Mask::new(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let super_cell = Cell::new(r, c);
            let (mut sum, mut valid, mut in_grid, mut lower_count) = (T::zero(), 0usize, 0usize, 0usize);
            for rr in r * factor..((r + 1) * factor).min(grid.rows()) {
                for cc in c * factor..((c + 1) * factor).min(grid.cols()) {
                    let child = Cell::new(rr, cc);
                    in_grid += 1;
                    if grid.is_lower(child) {
                        lower_count += 1;
                    }
                    if !grid.is_nodata(child) {
                        sum = sum + grid.elevation(child);
                        valid += 1;
                    }
                }
            }
            if valid == 0 {
                nodata.set(super_cell, true);
                elevations.push(T::nan());
            } else {
                elevations.push(sum / T::lit(valid as f64));
            }
            if 2 * lower_count > in_grid {
                lower.set(super_cell, true);
            }
            if lower_count > 0 {
                touched.set(super_cell, true);
            }
        }
    }
    if lower.is_empty() {
        lower = touched;
    }
    let cell_length = grid.cell_length() * T::lit(factor as f64);
    let g = grid.georef();
    let yll = g.yll + grid.rows() as f64 * grid.cell_length().f64() - rows as f64 * cell_length.f64();
    Ok(
        TerrainGrid::new(rows, cols, cell_length, elevations, lower, nodata, grid.lower_elevation())?
            .with_georef(GeoRef { xll: g.xll, yll }),
    )
}

/// Sub-grid covering the bounding box of `solution` grown by `margin` cells on
/// every side, truncated at the grid boundary.
pub fn clip<T: Scalar>(
    grid: &TerrainGrid<T>,
    solution: &Mask,
    margin: usize,
) -> Result<(TerrainGrid<T>, Window)> {
    let (r0, c0, r1, c1) = solution
        .bounding_box()
        .ok_or_else(|| Error::param("solution_mask", "cannot clip around an empty mask"))?;
    let window = Window {
        row0: r0.saturating_sub(margin),
        col0: c0.saturating_sub(margin),
        rows: (r1 + margin).min(grid.rows() - 1) + 1 - r0.saturating_sub(margin),
        cols: (c1 + margin).min(grid.cols() - 1) + 1 - c0.saturating_sub(margin),
    };
    Ok((window_grid(grid, &window)?, window))
}

/// Extracts `window` from `grid`.
pub fn window_grid<T: Scalar>(grid: &TerrainGrid<T>, window: &Window) -> Result<TerrainGrid<T>> {
    if window.row0 + window.rows > grid.rows() || window.col0 + window.cols > grid.cols() {
        return Err(Error::param("window", "window exceeds grid extent"));
    }
    let elevations = (0..window.rows * window.cols)
        .map(|i| grid.elevation(window.to_global(Cell::new(i / window.cols, i % window.cols))))
        .collect();
    let lc = grid.cell_length().f64();
    let g = grid.georef();
    let georef = GeoRef {
        xll: g.xll + window.col0 as f64 * lc,
        yll: g.yll + (grid.rows() - window.row0 - window.rows) as f64 * lc,
    };
    Ok(TerrainGrid::new(
        window.rows,
        window.cols,
        grid.cell_length(),
        elevations,
        window.crop_mask(grid.lower_mask()),
        window.crop_mask(grid.nodata_mask()),
        grid.lower_elevation(),
    )?
    .with_georef(georef))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> TerrainGrid<f64> {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|r| (0..n).map(|c| (r * n + c) as f64).collect())
            .collect();
        TerrainGrid::from_rows(10.0, &rows, 0.0, 0.1).unwrap()
    }

    #[test]
    fn factor_one_is_identity() {
        let g = ramp(5);
        assert_eq!(aggregate(&g, 1).unwrap(), g);
        assert!(aggregate(&g, 0).is_err());
    }

    #[test]
    fn block_mean_elevation() {
        let rows = vec![
            vec![100.0, 100.0, 0.0, 0.0],
            vec![200.0, 200.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0],
        ];
        let g = TerrainGrid::from_rows(34.0, &rows, -1.0, 0.1).unwrap();
        let a = aggregate(&g, 2).unwrap();
        assert_eq!(a.elevation(Cell::new(0, 0)), 150.0);
        assert_eq!(a.cell_length(), 68.0);
        assert_eq!((a.rows(), a.cols()), (2, 2));
    }

    #[test]
    fn lower_mask_by_strict_majority() {
        let three = TerrainGrid::from_rows(1.0, &[vec![5.0, 5.0], vec![5.0, 9.0]], 5.0, 0.1).unwrap();
        assert!(aggregate(&three, 2).unwrap().is_lower(Cell::new(0, 0)));
        let two = TerrainGrid::from_rows(1.0, &[vec![5.0, 5.0, 5.0, 5.0], vec![9.0, 9.0, 5.0, 9.0]], 5.0, 0.1).unwrap();
        let a = aggregate(&two, 2).unwrap();
        assert!(!a.is_lower(Cell::new(0, 0)));
        assert!(a.is_lower(Cell::new(0, 1)));
    }

    #[test]
    fn thin_lower_body_survives() {
        let mut rows = vec![vec![50.0; 8]; 8];
        for row in rows.iter_mut() {
            row[0] = 5.0;
        }
        let g = TerrainGrid::from_rows(1.0, &rows, 5.0, 0.1).unwrap();
        let a = aggregate(&g, 4).unwrap();
        assert_eq!(a.lower_mask().cells().collect::<Vec<_>>(), vec![Cell::new(0, 0), Cell::new(1, 0)]);
    }

    #[test]
    fn padding_and_nodata_blocks() {
        let g = ramp(5);
        let a = aggregate(&g, 2).unwrap();
        assert_eq!((a.rows(), a.cols()), (3, 3));
        // Bottom-right super-cell has one in-grid child.
        assert_eq!(a.elevation(Cell::new(2, 2)), 24.0);
        let mut nd = Mask::new(2, 2);
        for c in [Cell::new(0, 0), Cell::new(0, 1), Cell::new(1, 0), Cell::new(1, 1)] {
            nd.set(c, true);
        }
        let g = TerrainGrid::new(2, 2, 1.0, vec![0.0; 4], Mask::new(2, 2), nd, 0.0).unwrap();
        assert!(aggregate(&g, 2).unwrap().is_nodata(Cell::new(0, 0)));
    }

    #[test]
    fn nested_aggregation_matches_direct() {
        let g = ramp(16);
        let nested = aggregate(&aggregate(&g, 2).unwrap(), 4).unwrap();
        let direct = aggregate(&g, 8).unwrap();
        assert_eq!(nested.rows(), direct.rows());
        assert_eq!(nested.elevations(), direct.elevations());
    }

    #[test]
    fn clip_single_cell_margin_two() {
        let g = ramp(20);
        let m = Mask::from_cells(20, 20, [Cell::new(5, 5)]);
        let (sub, w) = clip(&g, &m, 2).unwrap();
        assert_eq!((sub.rows(), sub.cols()), (5, 5));
        assert_eq!((w.row0, w.col0), (3, 3));
        assert_eq!(sub.elevation(Cell::new(2, 2)), g.elevation(Cell::new(5, 5)));
    }

    #[test]
    fn clip_truncates_at_boundary() {
        let g = ramp(20);
        let m = Mask::from_cells(20, 20, [Cell::new(0, 18), Cell::new(1, 19)]);
        let (sub, w) = clip(&g, &m, 3).unwrap();
        assert_eq!((w.row0, w.col0), (0, 15));
        assert_eq!((sub.rows(), sub.cols()), (5, 5));
    }

    #[test]
    fn clip_box_arithmetic() {
        let g = ramp(40);
        let m = Mask::from_cells(40, 40, [Cell::new(10, 10), Cell::new(19, 15)]);
        let (sub, _) = clip(&g, &m, 4).unwrap();
        assert_eq!((sub.rows(), sub.cols()), (18, 14));
        assert!(clip(&g, &Mask::new(40, 40), 4).is_err());
    }

    #[test]
    fn default_margin_rule() {
        assert_eq!(default_clip_margin(1), 4);
        assert_eq!(default_clip_margin(8), 16);
    }
}
