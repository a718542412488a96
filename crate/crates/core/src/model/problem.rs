//! Solver-agnostic linear integer program.

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::terrain::Cell;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Binary,
    Integer,
    Continuous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

impl Variable {
    pub fn is_integral(&self) -> bool {
        !matches!(self.kind, VarKind::Continuous)
    }
}

/// Slice direction of a separating plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PlaneAxis {
    /// Slices are grid rows.
    Row,
    /// Slices are grid columns.
    Col,
    /// Slices are anti-diagonals `row + col = index`.
    Diag,
    /// Slices are diagonals `row - col + cols - 1 = index`.
    AntiDiag,
}

impl PlaneAxis {
    pub const ALL: [PlaneAxis; 4] = [PlaneAxis::Row, PlaneAxis::Col, PlaneAxis::Diag, PlaneAxis::AntiDiag];

    /// Slice index of `cell` on a grid with `cols` columns.
    pub fn slice_of(self, cell: Cell, cols: usize) -> usize {
        match self {
            PlaneAxis::Row => cell.row,
            PlaneAxis::Col => cell.col,
            PlaneAxis::Diag => cell.row + cell.col,
            PlaneAxis::AntiDiag => cell.row + cols - 1 - cell.col,
        }
    }

    fn names(self) -> (&'static str, &'static str) {
        match self {
            PlaneAxis::Row => ("up", "down"),
            PlaneAxis::Col => ("left", "right"),
            PlaneAxis::Diag => ("dlo", "dhi"),
            PlaneAxis::AntiDiag => ("alo", "ahi"),
        }
    }
}

/// Which side of a slice a plane binary certifies as empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PlaneSide {
    /// No interior cell in slices with a smaller index (`up`, `left`, ...).
    Lower,
    /// No interior cell in slices with a larger index (`down`, `right`, ...).
    Upper,
}

/// Semantic key of a model variable. Its [`fmt::Display`] form is the stable
/// variable name used in exported files: `x_i_j`, `y_i_j`, `z_i_j`, `l_i_j`,
/// `w_i_j_h_k`, `u_i_j`, and `up_i`/`down_i`, `left_j`/`right_j`,
/// `dlo_d`/`dhi_d`, `alo_e`/`ahi_e` for planes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKey {
    /// Perimeter cell.
    X(Cell),
    /// Interior cell.
    Y(Cell),
    /// Reservoir cell.
    Z(Cell),
    /// Conveyance link cell.
    L(Cell),
    /// Tour arc between two perimeter cells.
    W(Cell, Cell),
    /// Tour order of a perimeter cell.
    U(Cell),
    Plane { axis: PlaneAxis, side: PlaneSide, index: usize },
}

impl fmt::Display for VarKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            VarKey::X(c) => write!(f, "x_{}_{}", c.row, c.col),
            VarKey::Y(c) => write!(f, "y_{}_{}", c.row, c.col),
            VarKey::Z(c) => write!(f, "z_{}_{}", c.row, c.col),
            VarKey::L(c) => write!(f, "l_{}_{}", c.row, c.col),
            VarKey::U(c) => write!(f, "u_{}_{}", c.row, c.col),
            VarKey::W(a, b) => write!(f, "w_{}_{}_{}_{}", a.row, a.col, b.row, b.col),
            VarKey::Plane { axis, side, index } => {
                let (lo, hi) = axis.names();
                let prefix = if side == PlaneSide::Lower { lo } else { hi };
                write!(f, "{prefix}_{index}")
            }
        }
    }
}

impl VarKey {
    /// Inverse of the display form.
    pub fn parse(name: &str) -> Option<VarKey> {
        let (prefix, rest) = name.split_once('_')?;
        let nums: Vec<usize> = rest.split('_').map(str::parse).collect::<Result<_, _>>().ok()?;
        let cell = |i: usize| Cell::new(nums[i], nums[i + 1]);
        let plane = |axis, side| (nums.len() == 1).then(|| VarKey::Plane { axis, side, index: nums[0] });
        match (prefix, nums.len()) {
            ("x", 2) => Some(VarKey::X(cell(0))),
            ("y", 2) => Some(VarKey::Y(cell(0))),
            ("z", 2) => Some(VarKey::Z(cell(0))),
            ("l", 2) => Some(VarKey::L(cell(0))),
            ("u", 2) => Some(VarKey::U(cell(0))),
            ("w", 4) => Some(VarKey::W(cell(0), cell(2))),
            ("up", _) => plane(PlaneAxis::Row, PlaneSide::Lower),
            ("down", _) => plane(PlaneAxis::Row, PlaneSide::Upper),
            ("left", _) => plane(PlaneAxis::Col, PlaneSide::Lower),
            ("right", _) => plane(PlaneAxis::Col, PlaneSide::Upper),
            ("dlo", _) => plane(PlaneAxis::Diag, PlaneSide::Lower),
            ("dhi", _) => plane(PlaneAxis::Diag, PlaneSide::Upper),
            ("alo", _) => plane(PlaneAxis::AntiDiag, PlaneSide::Lower),
            ("ahi", _) => plane(PlaneAxis::AntiDiag, PlaneSide::Upper),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowSense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    /// Sorted by variable, no duplicates, no zero coefficients.
    pub terms: Vec<(VarId, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|(v, a)| a * values[v.0]).sum()
    }

    /// Amount by which `values` violate the row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            RowSense::Le => (lhs - self.rhs).max(0.0),
            RowSense::Ge => (self.rhs - lhs).max(0.0),
            RowSense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// Minimisation objective `Σ c·v + constant`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Objective {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl Objective {
    pub fn evaluate(&self, values: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|(v, c)| c * values[v.0]).sum::<f64>()
    }
}

/// Linear integer program. Immutable once built; use [`MipProblem::into_builder`]
/// to derive an extended copy.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MipProblem {
    name: String,
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Objective,
    keys: HashMap<VarKey, VarId>,
}

impl MipProblem {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_rows(&self) -> usize {
        self.constraints.len()
    }

    pub fn var(&self, key: VarKey) -> Option<VarId> {
        self.keys.get(&key).copied()
    }

    pub fn keys(&self) -> impl Iterator<Item = (VarKey, VarId)> + '_ {
        self.keys.iter().map(|(k, v)| (*k, *v))
    }

    pub fn value(&self, values: &[f64], key: VarKey) -> f64 {
        self.var(key).map_or(0.0, |v| values[v.0])
    }

    pub fn into_builder(self) -> ProblemBuilder {
        let row_names = self.constraints.iter().map(|c| c.name.clone()).collect();
        ProblemBuilder {
            problem: self,
            row_names,
        }
    }

    /// Largest bound, integrality or row violation of `values`.
    pub fn max_violation(&self, values: &[f64]) -> Violation {
        let mut worst = Violation::default();
        for (i, v) in self.variables.iter().enumerate() {
            let x = values[i];
            let bound = (v.lower - x).max(x - v.upper).max(0.0);
            worst.consider(bound, || format!("bounds of {}", v.name));
            if v.is_integral() {
                worst.consider((x - x.round()).abs(), || format!("integrality of {}", v.name));
            }
        }
        for c in &self.constraints {
            let scale = 1.0f64.max(c.rhs.abs());
            worst.consider(c.violation(values) / scale, || format!("row {}", c.name));
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Violation {
    /// Scaled violation; row violations are divided by `max(1, |rhs|)`.
    pub amount: f64,
    pub location: Option<String>,
}

impl Violation {
    fn consider(&mut self, amount: f64, location: impl FnOnce() -> String) {
        if amount > self.amount {
            self.amount = amount;
            self.location = Some(location());
        }
    }
}

/// Incrementally assembles a [`MipProblem`].
#[derive(Debug, Clone, Default)]
pub struct ProblemBuilder {
    problem: MipProblem,
    row_names: HashSet<String>,
}

impl ProblemBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        ProblemBuilder {
            problem: MipProblem {
                name: name.into(),
                ..Default::default()
            },
            row_names: HashSet::new(),
        }
    }

    /// Returns the variable for `key`, declaring it on first use.
    pub fn var(&mut self, key: VarKey, kind: VarKind, lower: f64, upper: f64) -> VarId {
        if let Some(id) = self.problem.keys.get(&key) {
            return *id;
        }
        let id = self.add_var(key.to_string(), kind, lower, upper);
        self.problem.keys.insert(key, id);
        id
    }

    pub fn binary(&mut self, key: VarKey) -> VarId {
        self.var(key, VarKind::Binary, 0.0, 1.0)
    }

    /// Declares an anonymous (unkeyed) variable.
    pub fn add_var(&mut self, name: String, kind: VarKind, lower: f64, upper: f64) -> VarId {
        let id = VarId(self.problem.variables.len());
        self.problem.variables.push(Variable {
            name,
            kind,
            lower,
            upper,
        });
        id
    }

    pub fn get(&self, key: VarKey) -> Option<VarId> {
        self.problem.var(key)
    }

    pub fn set_bounds(&mut self, id: VarId, lower: f64, upper: f64) {
        let v = &mut self.problem.variables[id.0];
        v.lower = lower;
        v.upper = upper;
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.problem.variables[id.0]
    }

    pub fn set_kind(&mut self, id: VarId, kind: VarKind) {
        self.problem.variables[id.0].kind = kind;
    }

    pub fn has_row(&self, name: &str) -> bool {
        self.row_names.contains(name)
    }

    /// Adds a row; duplicate variables are merged and zero coefficients
    /// dropped. Row names must be unique.
    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        sense: RowSense,
        rhs: f64,
    ) {
        let name = name.into();
        assert!(self.row_names.insert(name.clone()), "duplicate row name {name}");
        self.problem.constraints.push(Constraint {
            name,
            terms: normalize(terms),
            sense,
            rhs,
        });
    }

    pub fn set_objective(&mut self, terms: impl IntoIterator<Item = (VarId, f64)>, constant: f64) {
        self.problem.objective = Objective {
            terms: normalize(terms),
            constant,
        };
    }

    pub fn add_objective_terms(&mut self, terms: impl IntoIterator<Item = (VarId, f64)>) {
        let mut all = std::mem::take(&mut self.problem.objective.terms);
        all.extend(terms);
        self.problem.objective.terms = normalize(all);
    }

    pub fn add_objective_constant(&mut self, constant: f64) {
        self.problem.objective.constant += constant;
    }

    pub fn num_vars(&self) -> usize {
        self.problem.variables.len()
    }

    pub fn num_rows(&self) -> usize {
        self.problem.constraints.len()
    }

    pub fn finish(self) -> MipProblem {
        self.problem
    }
}

fn normalize(terms: impl IntoIterator<Item = (VarId, f64)>) -> Vec<(VarId, f64)> {
    let mut v: Vec<(VarId, f64)> = terms.into_iter().collect();
    v.sort_by_key(|(id, _)| *id);
    let mut out: Vec<(VarId, f64)> = Vec::with_capacity(v.len());
    for (id, a) in v {
        match out.last_mut() {
            Some((last, acc)) if *last == id => *acc += a,
            _ => out.push((id, a)),
        }
    }
    out.retain(|(_, a)| *a != 0.0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        let keys = [
            VarKey::X(Cell::new(3, 14)),
            VarKey::Y(Cell::new(0, 0)),
            VarKey::Z(Cell::new(1, 2)),
            VarKey::L(Cell::new(9, 9)),
            VarKey::U(Cell::new(4, 5)),
            VarKey::W(Cell::new(1, 2), Cell::new(2, 3)),
            VarKey::Plane { axis: PlaneAxis::Row, side: PlaneSide::Lower, index: 7 },
            VarKey::Plane { axis: PlaneAxis::AntiDiag, side: PlaneSide::Upper, index: 12 },
        ];
        for k in keys {
            assert_eq!(VarKey::parse(&k.to_string()), Some(k), "{k}");
        }
        assert_eq!(VarKey::X(Cell::new(3, 14)).to_string(), "x_3_14");
        assert_eq!(VarKey::parse("q_1_2"), None);
        assert_eq!(VarKey::parse("x_1"), None);
    }

    #[test]
    fn builder_merges_terms_and_reuses_keys() {
        let mut b = ProblemBuilder::new("t");
        let a = b.binary(VarKey::X(Cell::new(0, 0)));
        let again = b.binary(VarKey::X(Cell::new(0, 0)));
        assert_eq!(a, again);
        let c = b.binary(VarKey::Y(Cell::new(0, 1)));
        b.add_row("r", [(c, 1.0), (a, 2.0), (a, -2.0), (c, 1.0)], RowSense::Le, 1.0);
        let p = b.finish();
        assert_eq!(p.constraints()[0].terms, vec![(c, 2.0)]);
        assert_eq!(p.max_violation(&[0.0, 1.0]).amount, 1.0);
        assert_eq!(p.max_violation(&[0.0, 0.5]).amount, 0.5);
    }

    #[test]
    #[should_panic(expected = "duplicate row name")]
    fn duplicate_rows_rejected() {
        let mut b = ProblemBuilder::new("t");
        b.add_row("r", [], RowSense::Le, 0.0);
        b.add_row("r", [], RowSense::Le, 0.0);
    }
}
