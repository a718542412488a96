use super::{Cell, TerrainGrid, Window};
use crate::error::{Error, Result};
use crate::num::Scalar;

/// How conveyance length is measured from a cell to the lower body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceMetric {
    /// Center-to-center distance in the horizontal plane.
    #[default]
    Horizontal,
    /// Horizontal distance combined with the drop from the cell's ground
    /// elevation to the lower water level.
    Slant,
}

/// Distance in meters from every cell to the nearest lower-body cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField<T> {
    rows: usize,
    cols: usize,
    values: Vec<T>,
}

impl<T: Scalar> DistanceField<T> {
    pub fn get(&self, cell: Cell) -> T {
        self.values[cell.row * self.cols + cell.col]
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn window(&self, w: &Window) -> DistanceField<T> {
        DistanceField {
            rows: w.rows,
            cols: w.cols,
            values: (0..w.rows * w.cols)
                .map(|i| self.get(w.to_global(Cell::new(i / w.cols, i % w.cols))))
                .collect(),
        }
    }
}

/// Horizontal Euclidean distance field; see [`distance_field_with`].
pub fn distance_field<T: Scalar>(grid: &TerrainGrid<T>) -> Result<DistanceField<T>> {
    distance_field_with(grid, DistanceMetric::Horizontal)
}

/// Exact Euclidean distance transform seeded at every lower-body cell.
///
/// Squared distances are computed in integer cell units with the separable
/// lower-envelope algorithm (one pass per column, one per row), so the result
/// is exact up to the final square root.
pub fn distance_field_with<T: Scalar>(
    grid: &TerrainGrid<T>,
    metric: DistanceMetric,
) -> Result<DistanceField<T>> {
    if grid.lower_mask().is_empty() {
        return Err(Error::EmptyLowerMask);
    }
    let (rows, cols) = (grid.rows(), grid.cols());
    let inf = f64::INFINITY;
    let mut sq: Vec<f64> = grid
        .cells()
        .map(|c| if grid.is_lower(c) { 0.0 } else { inf })
        .collect();

    let mut line = Vec::new();
    let mut out = Vec::new();
    for c in 0..cols {
        line.clear();
        line.extend((0..rows).map(|r| sq[r * cols + c]));
        edt_1d(&line, &mut out);
        for r in 0..rows {
            sq[r * cols + c] = out[r];
        }
    }
    for r in 0..rows {
        line.clear();
        line.extend_from_slice(&sq[r * cols..(r + 1) * cols]);
        edt_1d(&line, &mut out);
        sq[r * cols..(r + 1) * cols].copy_from_slice(&out);
    }

    let lc = grid.cell_length().f64();
    let lower = grid.lower_elevation().f64();
    let values = grid
        .cells()
        .zip(&sq)
        .map(|(cell, d2)| {
            let horizontal = d2.sqrt() * lc;
            let d = match metric {
                DistanceMetric::Slant if !grid.is_nodata(cell) && !grid.is_lower(cell) => {
                    let drop = grid.elevation(cell).f64() - lower;
                    horizontal.hypot(drop)
                }
                _ => horizontal,
            };
            T::lit(d)
        })
        .collect();
    Ok(DistanceField { rows, cols, values })
}

/// One-dimensional squared distance transform of sampled function `f`
/// (Felzenszwalb & Huttenlocher lower envelope of parabolas).
fn edt_1d(f: &[f64], out: &mut Vec<f64>) {
    let n = f.len();
    out.clear();
    out.resize(n, f64::INFINITY);
    let mut v = vec![0usize; n];
    let mut z = vec![0f64; n + 1];
    let mut k: isize = -1;
    for q in 0..n {
        if f[q].is_infinite() {
            continue;
        }
        loop {
            if k < 0 {
                k = 0;
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                break;
            }
            let p = v[k as usize];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k as usize] {
                k -= 1;
            } else {
                k += 1;
                v[k as usize] = q;
                z[k as usize] = s;
                z[k as usize + 1] = f64::INFINITY;
                break;
            }
        }
    }
    if k < 0 {
        return;
    }
    let mut j = 0usize;
    for (q, slot) in out.iter_mut().enumerate() {
        while z[j + 1] < q as f64 {
            j += 1;
        }
        let p = v[j];
        let d = q as f64 - p as f64;
        *slot = d * d + f[p];
    }
}
