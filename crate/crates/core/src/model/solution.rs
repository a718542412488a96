use crate::connectivity::ConnectivityLevel;
use crate::costing::{conveyance_cost, embankment_cell_cost, equipment_cost, CostBreakdown};
use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::strategy::TraceEntry;
use crate::terrain::{connected_components, Adjacency, Cell, Mask};

use super::{MipProblem, ModelOptions, SitingInstance, VarKey};

/// Binary values farther than this from 0 or 1 are rejected.
pub const INTEGRALITY_TOLERANCE: f64 = 1e-6;

/// Physical properties recomputed from the cell masks.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReservoirMetrics {
    pub storage_m3: f64,
    pub area_ha: f64,
    /// Perimeter cells below the water level.
    pub embankment_cells: usize,
    pub embankment_length_m: f64,
    /// Length with diagonal-only steps between embankment cells counted as
    /// `√2·Lc` instead of `Lc`.
    pub embankment_length_diagonal_m: f64,
    pub embankment_volume_m3: f64,
    /// Conveyance length at the link cell.
    pub distance_m: f64,
}

impl ReservoirMetrics {
    pub fn compute<T: Scalar>(inst: &SitingInstance<T>, perimeter: &Mask, interior: &Mask, link: Cell) -> Self {
        let lc = inst.cell_length();
        let storage_m3 = interior.cells().map(|c| inst.cell_volume(c)).sum();
        let area_ha = interior.count() as f64 * lc * lc / 1e4;
        let emb = Mask::from_fn(perimeter.rows(), perimeter.cols(), |c| {
            perimeter.contains(c) && inst.depth(c) > 0.0
        });
        let embankment_volume_m3 = emb
            .cells()
            .map(|c| {
                embankment_cell_cost(inst.grid.cell_length(), inst.spec.water_elevation, inst.grid.elevation(c), &inst.params)
                    .volume
                    .f64()
            })
            .sum();
        let n = emb.count();
        let embankment_length_m = lc * n as f64;
        let diagonal_links = diagonal_only_links(&emb);
        ReservoirMetrics {
            storage_m3,
            area_ha,
            embankment_cells: n,
            embankment_length_m,
            embankment_length_diagonal_m: embankment_length_m + (std::f64::consts::SQRT_2 - 1.0) * lc * diagonal_links as f64,
            embankment_volume_m3,
            distance_m: inst.dist.get(link).f64(),
        }
    }
}

/// Pairs of diagonally touching cells of `mask` with no cell of `mask` at
/// either shared orthogonal corner.
fn diagonal_only_links(mask: &Mask) -> usize {
    let mut n = 0;
    for a in mask.cells() {
        for b in a.neighbors8(mask.rows(), mask.cols()) {
            if b > a && mask.contains(b) && a.is_diagonal_to(b) {
                let c1 = Cell::new(a.row, b.col);
                let c2 = Cell::new(b.row, a.col);
                if !mask.contains(c1) && !mask.contains(c2) {
                    n += 1;
                }
            }
        }
    }
    n
}

/// One upper reservoir with its metrics, costs and solve record.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirSolution {
    pub perimeter: Vec<Cell>,
    pub interior: Vec<Cell>,
    pub reservoir: Vec<Cell>,
    pub link: Cell,
    pub metrics: ReservoirMetrics,
    /// Costs recomputed from the masks.
    pub costs: CostBreakdown<f64>,
    /// Objective reported by the solver, constant included.
    pub objective: f64,
    /// Relative optimality gap `(incumbent − bound) / incumbent`, if known.
    pub gap: Option<f64>,
    pub wall_time_s: f64,
    pub level: ConnectivityLevel,
    /// 4-connected components of the reservoir.
    pub components: usize,
    /// Single component and all shape and volume rules hold.
    pub valid: bool,
    /// Cell length the masks refer to, m.
    pub cell_length: f64,
    /// Size of the largest model solved on the way to this answer.
    pub num_vars: usize,
    pub num_rows: usize,
    pub trace: Vec<TraceEntry>,
}

impl ReservoirSolution {
    /// Rebuilds a solution from masks on `inst`, recomputing every metric and
    /// cost. The solve record fields are left at neutral values.
    pub fn from_masks<T: Scalar>(inst: &SitingInstance<T>, perimeter: &Mask, interior: &Mask, link: Cell) -> Result<Self> {
        if !perimeter.contains(link) {
            return Err(Error::InvalidIncumbent(format!("link cell {link} is not a perimeter cell")));
        }
        let metrics = ReservoirMetrics::compute(inst, perimeter, interior, link);
        let embankment = perimeter
            .cells()
            .map(|c| {
                embankment_cell_cost(inst.grid.cell_length(), inst.spec.water_elevation, inst.grid.elevation(c), &inst.params)
                    .cost
                    .f64()
            })
            .sum::<f64>();
        let conveyance = conveyance_cost(inst.spec.flow, inst.dist.get(link), &inst.params)?;
        let conveyance = crate::costing::ConveyanceCost {
            excavation: conveyance.excavation.f64(),
            lining: conveyance.lining.f64(),
        };
        let equipment = equipment_cost(inst.spec.head, inst.spec.power_mw, &inst.params)?.f64();
        let costs = CostBreakdown::new(embankment, conveyance, equipment);
        let reservoir = perimeter.union(interior);
        let components = connected_components(&reservoir, Adjacency::Four).len();
        let rules_hold = check_reservoir_masks(perimeter, interior).is_ok()
            && metrics.storage_m3 >= inst.spec.vol_min.f64() * (1.0 - 1e-6);
        Ok(ReservoirSolution {
            perimeter: perimeter.cells().collect(),
            interior: interior.cells().collect(),
            reservoir: reservoir.cells().collect(),
            link,
            metrics,
            objective: costs.total,
            costs,
            gap: None,
            wall_time_s: 0.0,
            level: ConnectivityLevel::None,
            components,
            valid: rules_hold && components == 1,
            cell_length: inst.cell_length(),
            num_vars: 0,
            num_rows: 0,
            trace: Vec::new(),
        })
    }

    pub fn perimeter_mask(&self, rows: usize, cols: usize) -> Mask {
        Mask::from_cells(rows, cols, self.perimeter.iter().copied())
    }

    pub fn interior_mask(&self, rows: usize, cols: usize) -> Mask {
        Mask::from_cells(rows, cols, self.interior.iter().copied())
    }

    pub fn reservoir_mask(&self, rows: usize, cols: usize) -> Mask {
        Mask::from_cells(rows, cols, self.reservoir.iter().copied())
    }

    /// Moves every cell through `f`, e.g. from window to grid coordinates.
    pub fn map_cells(mut self, f: impl Fn(Cell) -> Cell) -> Self {
        for v in [&mut self.perimeter, &mut self.interior, &mut self.reservoir] {
            for c in v.iter_mut() {
                *c = f(*c);
            }
            v.sort_unstable();
        }
        self.link = f(self.link);
        self
    }

    /// Checks the masks against the candidate sets, shape rules and storage
    /// target of `inst`, independently of any solver.
    pub fn check_on<T: Scalar>(&self, inst: &SitingInstance<T>, opts: &ModelOptions) -> std::result::Result<(), String> {
        let (rows, cols) = (inst.grid.rows(), inst.grid.cols());
        if let Some(c) = self.interior.iter().find(|c| !inst.cands.is_interior(**c)) {
            return Err(format!("interior cell {c} is not an interior candidate"));
        }
        if let Some(c) = self.perimeter.iter().find(|c| !inst.cands.is_perimeter(**c)) {
            return Err(format!("perimeter cell {c} is not a perimeter candidate"));
        }
        let perimeter = self.perimeter_mask(rows, cols);
        let interior = self.interior_mask(rows, cols);
        check_reservoir_masks(&perimeter, &interior)?;
        let z = perimeter.union(&interior);
        let m = opts.perimeter_min_neighbors as usize;
        if let Some(c) = perimeter.cells().find(|c| c.neighbors4(rows, cols).filter(|n| z.contains(*n)).count() < m) {
            return Err(format!("perimeter cell {c} has fewer than {m} reservoir neighbours"));
        }
        if !perimeter.contains(self.link) {
            return Err(format!("link cell {} is not on the perimeter", self.link));
        }
        let storage: f64 = interior.cells().map(|c| inst.cell_volume(c)).sum();
        let required = inst.spec.vol_min.f64();
        if storage < required * (1.0 - 1e-6) {
            return Err(format!("storage {storage:.1} m3 below target {required:.1} m3"));
        }
        Ok(())
    }

    pub fn storage_hm3(&self) -> f64 {
        self.metrics.storage_m3 / 1e6
    }
}

/// Shape rules on masks: perimeter and interior are disjoint, every perimeter
/// cell has a reservoir 4-neighbour and every interior cell has reservoir
/// cells on all four sides.
pub fn check_reservoir_masks(perimeter: &Mask, interior: &Mask) -> std::result::Result<(), String> {
    let (rows, cols) = (perimeter.rows(), perimeter.cols());
    let z = perimeter.union(interior);
    if let Some(c) = perimeter.cells().find(|c| interior.contains(*c)) {
        return Err(format!("cell {c} is both perimeter and interior"));
    }
    if let Some(c) = perimeter.cells().find(|c| !c.neighbors4(rows, cols).any(|n| z.contains(n))) {
        return Err(format!("perimeter cell {c} has no reservoir neighbour"));
    }
    if let Some(c) = interior
        .cells()
        .find(|c| !c.sides(rows, cols).iter().all(|n| n.is_some_and(|n| z.contains(n))))
    {
        return Err(format!("interior cell {c} is not enclosed"));
    }
    Ok(())
}

/// Reads the masks out of a solver assignment and rebuilds the reservoir.
///
/// Every integral variable must lie within [`INTEGRALITY_TOLERANCE`] of an
/// integer; the result must satisfy the shape rules and the storage target.
pub fn extract_solution<T: Scalar>(problem: &MipProblem, values: &[f64], inst: &SitingInstance<T>) -> Result<ReservoirSolution> {
    if values.len() != problem.num_vars() {
        return Err(Error::InvalidIncumbent(format!(
            "assignment has {} values for {} variables",
            values.len(),
            problem.num_vars()
        )));
    }
    for (v, val) in problem.variables().iter().zip(values) {
        if v.is_integral() && (val - val.round()).abs() > INTEGRALITY_TOLERANCE {
            return Err(Error::IntegralityViolation {
                name: v.name.clone(),
                value: *val,
            });
        }
    }
    let (rows, cols) = (inst.grid.rows(), inst.grid.cols());
    let mut perimeter = Mask::new(rows, cols);
    let mut interior = Mask::new(rows, cols);
    let mut links = Vec::new();
    for (key, id) in problem.keys() {
        if values[id.0].round() != 1.0 {
            continue;
        }
        match key {
            VarKey::X(c) => perimeter.set(c, true),
            VarKey::Y(c) => interior.set(c, true),
            VarKey::L(c) => links.push(c),
            _ => {}
        }
    }
    links.sort_unstable();
    let link = match links.as_slice() {
        [one] => *one,
        _ => return Err(Error::InvalidIncumbent(format!("expected one link cell, found {}", links.len()))),
    };
    check_reservoir_masks(&perimeter, &interior).map_err(Error::InvalidIncumbent)?;
    let mut sol = ReservoirSolution::from_masks(inst, &perimeter, &interior, link)?;
    let required = inst.spec.vol_min.f64();
    if sol.metrics.storage_m3 < required * (1.0 - 1e-6) {
        return Err(Error::InvalidIncumbent(format!(
            "storage {:.1} m3 below target {required:.1} m3",
            sol.metrics.storage_m3
        )));
    }
    sol.objective = problem.objective().evaluate(values);
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::pit_instance;
    use crate::model::{build_model, ModelOptions};
    use approx::assert_relative_eq;

    fn pit_values(p: &MipProblem, link: Cell) -> Vec<f64> {
        let mut v = vec![0.0; p.num_vars()];
        let centre = Cell::new(2, 2);
        v[p.var(VarKey::Y(centre)).unwrap().0] = 1.0;
        v[p.var(VarKey::Z(centre)).unwrap().0] = 1.0;
        for c in centre.neighbors4(5, 5) {
            v[p.var(VarKey::X(c)).unwrap().0] = 1.0;
            v[p.var(VarKey::Z(c)).unwrap().0] = 1.0;
        }
        v[p.var(VarKey::L(link)).unwrap().0] = 1.0;
        v
    }

    #[test]
    fn pit_extraction_recomputes_objective() {
        let inst = pit_instance(20_000.0);
        let p = build_model(&inst, ConnectivityLevel::None, &ModelOptions::default()).unwrap();
        let link = Cell::new(3, 2);
        let v = pit_values(&p, link);
        assert_eq!(p.max_violation(&v).amount, 0.0);
        let s = extract_solution(&p, &v, &inst).unwrap();
        assert_eq!(s.interior, vec![Cell::new(2, 2)]);
        assert_eq!(s.perimeter.len(), 4);
        assert_eq!(s.link, link);
        assert_eq!(s.components, 1);
        assert!(s.valid);
        assert_eq!(s.metrics.storage_m3, 50.0 * 34.0 * 34.0);
        assert_relative_eq!(s.metrics.area_ha, 0.1156, max_relative = 1e-12);
        assert_eq!(s.metrics.embankment_cells, 0);
        assert_relative_eq!(s.objective, s.costs.total, max_relative = 1e-12);
        assert_relative_eq!(s.metrics.distance_m, 34.0 * (2.0f64.powi(2) + 1.0).sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn rejects_fractional_and_empty() {
        let inst = pit_instance(20_000.0);
        let p = build_model(&inst, ConnectivityLevel::None, &ModelOptions::default()).unwrap();
        let mut v = pit_values(&p, Cell::new(3, 2));
        v[p.var(VarKey::Y(Cell::new(2, 2))).unwrap().0] = 0.5;
        assert!(matches!(extract_solution(&p, &v, &inst), Err(Error::IntegralityViolation { .. })));
        let mut empty = vec![0.0; p.num_vars()];
        let l = Cell::new(1, 2);
        empty[p.var(VarKey::L(l)).unwrap().0] = 1.0;
        empty[p.var(VarKey::X(l)).unwrap().0] = 1.0;
        empty[p.var(VarKey::Z(l)).unwrap().0] = 1.0;
        assert!(extract_solution(&p, &empty, &inst).is_err());
        // Within tolerance is accepted.
        let mut near = pit_values(&p, Cell::new(3, 2));
        near[p.var(VarKey::Y(Cell::new(2, 2))).unwrap().0] = 1.0 - 1e-8;
        assert!(extract_solution(&p, &near, &inst).is_ok());
    }

    #[test]
    fn diagonal_correction() {
        // An L-free staircase: (0,0) (1,1) (2,2) has two diagonal-only links.
        let m = Mask::from_cells(3, 3, [Cell::new(0, 0), Cell::new(1, 1), Cell::new(2, 2)]);
        assert_eq!(diagonal_only_links(&m), 2);
        let filled = Mask::from_cells(3, 3, [Cell::new(0, 0), Cell::new(0, 1), Cell::new(1, 1)]);
        assert_eq!(diagonal_only_links(&filled), 0);
    }

    #[test]
    fn mask_rules() {
        let p = Mask::from_cells(3, 3, [Cell::new(0, 1), Cell::new(1, 0), Cell::new(1, 2), Cell::new(2, 1)]);
        let i = Mask::from_cells(3, 3, [Cell::new(1, 1)]);
        assert!(check_reservoir_masks(&p, &i).is_ok());
        let edge = Mask::from_cells(3, 3, [Cell::new(0, 1)]);
        assert!(check_reservoir_masks(&p, &edge).is_err());
        let lonely = Mask::from_cells(3, 3, [Cell::new(0, 0)]);
        assert!(check_reservoir_masks(&lonely, &Mask::new(3, 3)).is_err());
    }
}
