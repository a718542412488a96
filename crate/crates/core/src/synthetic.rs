//! Small synthetic terrains with known structure, for tests and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::costing::CostParams;
use crate::error::Result;
use crate::model::SitingInstance;
use crate::sizing::{SitingSpec, DEFAULT_EFFICIENCY};
use crate::terrain::{distance_field, Cell, Mask, TerrainGrid};

pub const LOWER_ELEVATION: f64 = 100.0;
pub const HEAD: f64 = 450.0;
pub const WATER_ELEVATION: f64 = LOWER_ELEVATION + HEAD;
pub const CELL_LENGTH: f64 = 34.0;

/// A terrain plus the plant to site on it.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub grid: TerrainGrid<f64>,
    pub spec: SitingSpec<f64>,
    pub excluded: Mask,
}

impl Scenario {
    pub fn instance(&self) -> Result<SitingInstance<f64>> {
        let dist = distance_field(&self.grid)?;
        SitingInstance::new(self.grid.clone(), dist, self.spec, CostParams::default(), &self.excluded)
    }
}

fn spec_for(vol_min: f64, operation_h: f64) -> SitingSpec<f64> {
    SitingSpec::new(10.0, HEAD, operation_h, DEFAULT_EFFICIENCY, LOWER_ELEVATION)
        .and_then(|s| s.with_storage(vol_min))
        .expect("valid synthetic plant")
}

fn scenario(name: &str, rows: Vec<Vec<f64>>, vol_min: f64, operation_h: f64, excluded: &[(usize, usize)]) -> Scenario {
    let grid = TerrainGrid::from_rows(CELL_LENGTH, &rows, LOWER_ELEVATION, 0.5).expect("valid synthetic grid");
    let excluded = Mask::from_cells(grid.rows(), grid.cols(), excluded.iter().map(|&(r, c)| Cell::new(r, c)));
    Scenario {
        name: name.into(),
        grid,
        spec: spec_for(vol_min, operation_h),
        excluded,
    }
}

/// Cell volume at `depth` meters below the water level.
fn cell_volume(depth: f64) -> f64 {
    depth * CELL_LENGTH * CELL_LENGTH
}

const SHELF_DEPTH: f64 = 4.0;
const PIT_DEPTH: f64 = 60.0;
const SHELF_HOURS: f64 = 1000.0;

/// Flat shelf 4 m below water with deep pits at `pits` and the lower body in
/// the bottom-left corner. Every perimeter cell costs the same embankment, and
/// the long operating period keeps the flow, and so the tunnel cost per meter,
/// small next to it.
fn shelf(rows: usize, cols: usize, pits: &[(usize, usize)]) -> Vec<Vec<f64>> {
    let mut e = vec![vec![WATER_ELEVATION - SHELF_DEPTH; cols]; rows];
    e[rows - 1][0] = LOWER_ELEVATION;
    for &(r, c) in pits {
        e[r][c] = WATER_ELEVATION - PIT_DEPTH;
    }
    e
}

/// 5x5 ridge with one deep pit in the middle.
pub fn pit() -> Scenario {
    let mut rows = vec![vec![600.0; 5]; 5];
    rows[2][2] = 500.0;
    rows[4][0] = LOWER_ELEVATION;
    scenario("pit", rows, 20_000.0, 1.0, &[])
}

/// Two deep pits in different rows and columns of a shallow shelf. Storing
/// the target takes both pits, and two separate ponds need far less
/// embankment than one reservoir holding both.
pub fn two_basins() -> Scenario {
    let rows = shelf(9, 11, &[(2, 2), (6, 8)]);
    scenario("two_basins", rows, 1.9 * cell_volume(PIT_DEPTH), SHELF_HOURS, &[])
}

/// Two L-shaped deep pits that occupy adjacent rows and columns but are
/// separated along the main diagonal by two excluded cells. Their separate
/// ponds pass every horizontal and vertical plane.
pub fn diagonal_blobs() -> Scenario {
    let pits = [(2, 2), (2, 3), (3, 2), (4, 5), (5, 4), (5, 5)];
    let rows = shelf(8, 8, &pits);
    scenario("diagonal_blobs", rows, 5.95 * cell_volume(PIT_DEPTH), SHELF_HOURS, &[(3, 4), (4, 3)])
}

/// Random micro terrain with at most `rows·cols − 1` reservoir candidates.
///
/// Elevations are drawn within ±30 m of the water level, the lower body is
/// the bottom-left cell and the storage target is a random share of what the
/// cells that can be interior would hold.
pub fn random_micro(rows: usize, cols: usize, seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e = vec![vec![0.0; cols]; rows];
    for row in e.iter_mut() {
        for v in row.iter_mut() {
            *v = WATER_ELEVATION + rng.gen_range(-30.0..20.0);
        }
    }
    e[rows - 1][0] = LOWER_ELEVATION;
    let capacity: f64 = (1..rows.saturating_sub(1))
        .flat_map(|r| (1..cols.saturating_sub(1)).map(move |c| (r, c)))
        .map(|(r, c)| (WATER_ELEVATION - e[r][c]).max(0.0))
        .map(cell_volume)
        .sum();
    let share = rng.gen_range(0.15..0.7);
    scenario(&format!("micro_{rows}x{cols}_{seed}"), e, (share * capacity).max(1000.0), 1.0, &[])
}

/// Smooth hills and valleys from a sum of Gaussian bumps, with a lower body
/// along the left edge.
pub fn rolling_hills(rows: usize, cols: usize, seed: u64, vol_min: f64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bumps: Vec<(f64, f64, f64, f64)> = (0..(rows * cols / 150).max(4))
        .map(|_| {
            (
                rng.gen_range(0.0..rows as f64),
                rng.gen_range(0.0..cols as f64),
                rng.gen_range(3.0..(rows.min(cols) as f64 / 4.0).max(4.0)),
                rng.gen_range(-60.0..60.0),
            )
        })
        .collect();
    let mut e = vec![vec![0.0; cols]; rows];
    for (r, row) in e.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            let h: f64 = bumps
                .iter()
                .map(|&(br, bc, w, a)| {
                    let d2 = (r as f64 - br).powi(2) + (c as f64 - bc).powi(2);
                    a * (-d2 / (2.0 * w * w)).exp()
                })
                .sum();
            *v = WATER_ELEVATION + 5.0 + h + 0.2 * c as f64;
        }
    }
    for row in e.iter_mut() {
        row[..3.min(cols)].fill(LOWER_ELEVATION);
    }
    scenario(&format!("hills_{rows}x{cols}_{seed}"), e, vol_min, 6.0, &[])
}

/// Cells of `mask` as `(row, col)` pairs, for compact assertions.
pub fn cell_pairs(mask: &Mask) -> Vec<(usize, usize)> {
    mask.cells().map(|Cell { row, col }| (row, col)).collect()
}
