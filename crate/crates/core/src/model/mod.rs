//! The reservoir integer program: cell-role variables, shape rules, storage
//! target, conveyance link and cost objective.
//!
//! Every candidate cell carries binaries `x` (perimeter), `y` (interior) and
//! `z` (reservoir = perimeter or interior). A neighbour variable that does not
//! exist, because the neighbour is off-grid or not a candidate for that role,
//! is identically zero.

pub mod problem;
mod solution;

pub use problem::{
    Constraint, MipProblem, Objective, PlaneAxis, PlaneSide, ProblemBuilder, RowSense, VarId, VarKey, VarKind,
    Variable, Violation,
};
pub use solution::{check_reservoir_masks, extract_solution, ReservoirMetrics, ReservoirSolution};

use crate::connectivity::{self, ConnectivityLevel};
use crate::costing::{conveyance_cost, embankment_cell_cost, equipment_cost, CostParams};
use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::sizing::SitingSpec;
use crate::terrain::{candidate_sets, CandidateSets, Cell, DistanceField, Mask, TerrainGrid};

/// Everything needed to build and evaluate one siting model.
#[derive(Debug, Clone)]
pub struct SitingInstance<T> {
    pub grid: TerrainGrid<T>,
    pub dist: DistanceField<T>,
    pub cands: CandidateSets,
    pub spec: SitingSpec<T>,
    pub params: CostParams<T>,
}

impl<T: Scalar> SitingInstance<T> {
    /// `dist` must cover `grid` cell for cell; pass a window of a larger
    /// field when `grid` is a clip, since the lower body may lie outside it.
    pub fn new(
        grid: TerrainGrid<T>,
        dist: DistanceField<T>,
        spec: SitingSpec<T>,
        params: CostParams<T>,
        excluded: &Mask,
    ) -> Result<Self> {
        if (dist.rows(), dist.cols()) != (grid.rows(), grid.cols()) {
            return Err(Error::param("dist", "distance field shape does not match grid"));
        }
        params.validate()?;
        let cands = candidate_sets(&grid, spec.water_elevation, excluded)?;
        Ok(SitingInstance {
            grid,
            dist,
            cands,
            spec,
            params,
        })
    }

    /// Water depth above the ground of `cell`; negative above water.
    pub fn depth(&self, cell: Cell) -> f64 {
        (self.spec.water_elevation - self.grid.elevation(cell)).f64()
    }

    /// Stored volume contributed by `cell` as an interior cell, m³.
    pub fn cell_volume(&self, cell: Cell) -> f64 {
        self.depth(cell) * self.grid.cell_area().f64()
    }

    pub fn cell_length(&self) -> f64 {
        self.grid.cell_length().f64()
    }
}

/// Formulation switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelOptions {
    /// Minimum number of reservoir 4-neighbours of a perimeter cell (1 or 3).
    pub perimeter_min_neighbors: u8,
    /// Bound tour order by `u ≤ x` instead of `u ≤ (S-1)·x`.
    pub literal_u_bound: bool,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions {
            perimeter_min_neighbors: 1,
            literal_u_bound: false,
        }
    }
}

/// Declares `x` and `l` on perimeter candidates, `y` on interior candidates and
/// `z` on reservoir candidates.
pub fn declare_cell_variables(b: &mut ProblemBuilder, cands: &CandidateSets) {
    for c in cands.reservoir.cells() {
        if cands.is_perimeter(c) {
            b.binary(VarKey::X(c));
        }
        if cands.is_interior(c) {
            b.binary(VarKey::Y(c));
        }
        b.binary(VarKey::Z(c));
    }
    for c in cands.perimeter.cells() {
        b.binary(VarKey::L(c));
    }
}

const SIDE_TAGS: [&str; 4] = ["u", "d", "l", "r"];

fn side_z(b: &ProblemBuilder, cands: &CandidateSets, c: Cell) -> [Option<VarId>; 4] {
    c.sides(cands.rows(), cands.cols())
        .map(|n| n.and_then(|n| b.get(VarKey::Z(n))))
}

/// Shape rules:
/// * a reservoir cell is perimeter or has a reservoir cell on each side,
/// * a perimeter cell touches `perimeter_min_neighbors` reservoir cells,
/// * `z = x + y`,
/// * an interior cell has a reservoir cell on each side.
pub fn build_shape_constraints(b: &mut ProblemBuilder, cands: &CandidateSets, perimeter_min_neighbors: u8) {
    declare_cell_variables(b, cands);
    for c in cands.reservoir.cells() {
        let z = b.binary(VarKey::Z(c));
        let x = b.get(VarKey::X(c));
        let y = b.get(VarKey::Y(c));
        let sides = side_z(b, cands, c);
        for (tag, nz) in SIDE_TAGS.iter().zip(sides) {
            let terms = [Some((z, 1.0)), x.map(|x| (x, -1.0)), nz.map(|n| (n, -1.0))];
            b.add_row(
                format!("a{tag}_{}_{}", c.row, c.col),
                terms.into_iter().flatten(),
                RowSense::Le,
                0.0,
            );
        }
        if let Some(x) = x {
            let terms = std::iter::once((x, perimeter_min_neighbors as f64))
                .chain(sides.iter().flatten().map(|n| (*n, -1.0)));
            b.add_row(format!("p_{}_{}", c.row, c.col), terms, RowSense::Le, 0.0);
        }
        let terms = [Some((z, 1.0)), x.map(|x| (x, -1.0)), y.map(|y| (y, -1.0))];
        b.add_row(
            format!("zxy_{}_{}", c.row, c.col),
            terms.into_iter().flatten(),
            RowSense::Eq,
            0.0,
        );
        if let Some(y) = y {
            for (tag, nz) in SIDE_TAGS.iter().zip(sides) {
                let terms = [Some((y, 1.0)), nz.map(|n| (n, -1.0))];
                b.add_row(
                    format!("b{tag}_{}_{}", c.row, c.col),
                    terms.into_iter().flatten(),
                    RowSense::Le,
                    0.0,
                );
            }
        }
    }
}

/// Σ y·(H − h)·Lc² ≥ VolMin, failing fast when even flooding every interior
/// candidate cannot reach the target.
pub fn build_volume_constraint<T: Scalar>(b: &mut ProblemBuilder, inst: &SitingInstance<T>) -> Result<()> {
    let required = inst.spec.vol_min.f64();
    let mut capacity = 0.0;
    let mut terms = Vec::new();
    for c in inst.cands.interior.cells() {
        let coef = inst.cell_volume(c);
        capacity += coef;
        terms.push((b.binary(VarKey::Y(c)), coef));
    }
    if capacity < required {
        return Err(Error::VolumeInfeasible { required, capacity });
    }
    b.add_row("vol", terms, RowSense::Ge, required);
    Ok(())
}

/// One link cell, chosen among selected perimeter cells.
pub fn build_link_constraints(b: &mut ProblemBuilder, cands: &CandidateSets) -> Result<()> {
    if cands.perimeter.is_empty() {
        return Err(Error::EmptyPerimeter);
    }
    let mut all = Vec::new();
    for c in cands.perimeter.cells() {
        let l = b.binary(VarKey::L(c));
        let x = b.binary(VarKey::X(c));
        b.add_row(format!("lk_{}_{}", c.row, c.col), [(l, 1.0), (x, -1.0)], RowSense::Le, 0.0);
        all.push((l, 1.0));
    }
    b.add_row("onelink", all, RowSense::Eq, 1.0);
    Ok(())
}

/// Embankment cost on perimeter cells below water, conveyance cost on the
/// link cell and the equipment cost as a constant.
pub fn build_objective<T: Scalar>(b: &mut ProblemBuilder, inst: &SitingInstance<T>) -> Result<()> {
    let (grid, spec, params) = (&inst.grid, &inst.spec, &inst.params);
    let mut terms = Vec::new();
    for c in inst.cands.perimeter.cells() {
        let h = grid.elevation(c);
        if spec.water_elevation > h {
            let cost = embankment_cell_cost(grid.cell_length(), spec.water_elevation, h, params).cost;
            terms.push((b.binary(VarKey::X(c)), cost.f64()));
        }
        let conveyance = conveyance_cost(spec.flow, inst.dist.get(c), params)?;
        terms.push((b.binary(VarKey::L(c)), conveyance.total().f64()));
    }
    let equipment = equipment_cost(spec.head, spec.power_mw, params)?;
    b.set_objective(terms, equipment.f64());
    Ok(())
}

/// Full model at the given connectivity level.
pub fn build_model<T: Scalar>(
    inst: &SitingInstance<T>,
    level: ConnectivityLevel,
    opts: &ModelOptions,
) -> Result<MipProblem> {
    let mut b = build_base(inst, opts)?;
    connectivity::add_level(&mut b, &inst.cands, level, opts)?;
    Ok(b.finish())
}

/// Model without any anti-fragmentation constraints.
pub fn build_base<T: Scalar>(inst: &SitingInstance<T>, opts: &ModelOptions) -> Result<ProblemBuilder> {
    if !matches!(opts.perimeter_min_neighbors, 1 | 3) {
        return Err(Error::param("perimeter_min_neighbors", "must be 1 or 3"));
    }
    let mut b = ProblemBuilder::new("phs_siting");
    build_shape_constraints(&mut b, &inst.cands, opts.perimeter_min_neighbors);
    build_volume_constraint(&mut b, inst)?;
    build_link_constraints(&mut b, &inst.cands)?;
    build_objective(&mut b, inst)?;
    Ok(b)
}
