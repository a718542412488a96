use super::{Cell, Mask, TerrainGrid};
use crate::error::{Error, Result};
use crate::num::Scalar;

/// Cells eligible for each reservoir role.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSets {
    /// Cells that may hold water: below the water elevation, not part of the
    /// lower body, not NODATA and not excluded.
    pub interior: Mask,
    /// Cells that may close the reservoir: at least one 4-neighbour is an
    /// interior candidate.
    pub perimeter: Mask,
    /// `interior ∪ perimeter`.
    pub reservoir: Mask,
    pub excluded: Mask,
}

impl CandidateSets {
    pub fn rows(&self) -> usize {
        self.reservoir.rows()
    }

    pub fn cols(&self) -> usize {
        self.reservoir.cols()
    }

    pub fn is_interior(&self, c: Cell) -> bool {
        self.interior.contains(c)
    }

    pub fn is_perimeter(&self, c: Cell) -> bool {
        self.perimeter.contains(c)
    }

    pub fn is_reservoir(&self, c: Cell) -> bool {
        self.reservoir.contains(c)
    }
}

/// Eligibility sets for water surface elevation `water_elevation`.
pub fn candidate_sets<T: Scalar>(
    grid: &TerrainGrid<T>,
    water_elevation: T,
    excluded: &Mask,
) -> Result<CandidateSets> {
    if !(water_elevation > grid.lower_elevation()) {
        return Err(Error::param(
            "water_elevation",
            format!(
                "water elevation {water_elevation} must exceed the lower body level {}",
                grid.lower_elevation()
            ),
        ));
    }
    if (excluded.rows(), excluded.cols()) != (grid.rows(), grid.cols()) {
        return Err(Error::param("excluded", "exclusion mask shape does not match grid"));
    }
    let usable = |c: Cell| !grid.is_lower(c) && !grid.is_nodata(c) && !excluded.contains(c);
    let interior = Mask::from_fn(grid.rows(), grid.cols(), |c| {
        usable(c) && grid.elevation(c) < water_elevation
    });
    if interior.is_empty() {
        return Err(Error::EmptyInterior {
            water_elevation: water_elevation.f64(),
        });
    }
    let perimeter = Mask::from_fn(grid.rows(), grid.cols(), |c| {
        usable(c) && c.neighbors4(grid.rows(), grid.cols()).any(|n| interior.contains(n))
    });
    Ok(CandidateSets {
        reservoir: interior.union(&perimeter),
        interior,
        perimeter,
        excluded: excluded.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pit() -> TerrainGrid<f64> {
        let mut rows = vec![vec![600.0; 5]; 5];
        rows[2][2] = 500.0;
        rows[4][0] = 100.0;
        TerrainGrid::from_rows(34.0, &rows, 100.0, 0.5).unwrap()
    }

    #[test]
    fn single_pit_candidates() {
        let g = pit();
        let cs = candidate_sets(&g, 550.0, &Mask::new(5, 5)).unwrap();
        assert_eq!(cs.interior.cells().collect::<Vec<_>>(), vec![Cell::new(2, 2)]);
        assert_eq!(
            cs.perimeter.cells().collect::<Vec<_>>(),
            vec![Cell::new(1, 2), Cell::new(2, 1), Cell::new(2, 3), Cell::new(3, 2)]
        );
        assert_eq!(cs.reservoir.count(), 5);
    }

    #[test]
    fn flat_high_grid_has_no_interior() {
        let mut rows = vec![vec![600.0; 4]; 4];
        rows[0][0] = 100.0;
        let g = TerrainGrid::from_rows(34.0, &rows, 100.0, 0.5).unwrap();
        assert!(matches!(
            candidate_sets(&g, 550.0, &Mask::new(4, 4)),
            Err(Error::EmptyInterior { .. })
        ));
    }

    #[test]
    fn excluding_the_pit_empties_interior() {
        let g = pit();
        let ex = Mask::from_cells(5, 5, [Cell::new(2, 2)]);
        assert!(matches!(candidate_sets(&g, 550.0, &ex), Err(Error::EmptyInterior { .. })));
    }

    #[test]
    fn water_level_must_exceed_lower_body() {
        assert!(candidate_sets(&pit(), 100.0, &Mask::new(5, 5)).is_err());
    }

    proptest! {
        #[test]
        fn exclusion_is_monotone(
            elev in prop::collection::vec(0.0f64..10.0, 36),
            ex_a in prop::collection::vec(any::<bool>(), 36),
            extra in prop::collection::vec(any::<bool>(), 36),
        ) {
            let mut elev = elev;
            elev[0] = -5.0;
            let rows: Vec<Vec<f64>> = elev.chunks(6).map(|r| r.to_vec()).collect();
            let g = TerrainGrid::from_rows(1.0, &rows, -5.0, 0.1).unwrap();
            let small = Mask::from_fn(6, 6, |c| ex_a[c.row * 6 + c.col]);
            let large = Mask::from_fn(6, 6, |c| ex_a[c.row * 6 + c.col] || extra[c.row * 6 + c.col]);
            let a = candidate_sets(&g, 5.0, &small);
            let b = candidate_sets(&g, 5.0, &large);
            if let Ok(b) = b {
                let a = a.expect("smaller exclusion cannot be infeasible when larger is not");
                prop_assert!(b.interior.is_subset_of(&a.interior));
                prop_assert!(b.perimeter.is_subset_of(&a.perimeter));
                prop_assert!(b.reservoir.is_subset_of(&a.reservoir));
            }
            if let Ok(a) = candidate_sets(&g, 5.0, &small) {
                for c in a.perimeter.cells() {
                    prop_assert!(c.neighbors4(6, 6).any(|n| a.interior.contains(n)));
                }
                for c in a.interior.cells() {
                    prop_assert!(g.elevation(c) < 5.0 && !g.is_lower(c));
                }
            }
        }
    }
}
