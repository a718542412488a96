//! Anti-fragmentation constraints: separating planes over rows, columns and
//! diagonals, and a rooted Miller–Tucker–Zemlin tour through the perimeter.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{ModelOptions, PlaneAxis, PlaneSide, ProblemBuilder, RowSense, VarId, VarKey, VarKind};
use crate::terrain::{connected_components, Adjacency, CandidateSets, Cell, Mask};

/// Rungs of the defense ladder. Each level contains all constraints of the
/// levels below it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum ConnectivityLevel {
    #[default]
    None,
    HvPlanes,
    HvDiagPlanes,
    Tsp,
}

impl ConnectivityLevel {
    pub const ALL: [ConnectivityLevel; 4] = [
        ConnectivityLevel::None,
        ConnectivityLevel::HvPlanes,
        ConnectivityLevel::HvDiagPlanes,
        ConnectivityLevel::Tsp,
    ];

    /// Report code: 0 none, 1 HV planes, 2 HV + diagonal planes, 3 TSP.
    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            ConnectivityLevel::None => "none",
            ConnectivityLevel::HvPlanes => "hv_planes",
            ConnectivityLevel::HvDiagPlanes => "hv_diag_planes",
            ConnectivityLevel::Tsp => "tsp",
        }
    }

    pub fn plane_axes(self) -> &'static [PlaneAxis] {
        match self {
            ConnectivityLevel::None => &[],
            ConnectivityLevel::HvPlanes => &PlaneAxis::ALL[..2],
            ConnectivityLevel::HvDiagPlanes | ConnectivityLevel::Tsp => &PlaneAxis::ALL,
        }
    }

    pub fn uses_tour(self) -> bool {
        self == ConnectivityLevel::Tsp
    }
}

impl fmt::Display for ConnectivityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConnectivityLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ConnectivityLevel::ALL
            .into_iter()
            .find(|l| l.name() == s || l.index().to_string() == s)
            .ok_or_else(|| Error::param("level", format!("unknown level {s:?}; expected none, hv_planes, hv_diag_planes or tsp")))
    }
}

/// Adds the constraints of `level` to a model holding the cell variables.
pub fn add_level(b: &mut ProblemBuilder, cands: &CandidateSets, level: ConnectivityLevel, opts: &ModelOptions) -> Result<()> {
    for &axis in level.plane_axes() {
        add_plane_axis(b, cands, axis);
    }
    if level.uses_tour() {
        build_tsp_constraints(b, cands, opts.literal_u_bound)?;
    }
    Ok(())
}

/// Planes over rows and columns, and over both diagonal directions when
/// `include_diagonals` is set.
pub fn build_separating_planes(b: &mut ProblemBuilder, cands: &CandidateSets, include_diagonals: bool) {
    let axes = if include_diagonals { &PlaneAxis::ALL[..] } else { &PlaneAxis::ALL[..2] };
    for &axis in axes {
        add_plane_axis(b, cands, axis);
    }
}

pub fn slice_count(axis: PlaneAxis, rows: usize, cols: usize) -> usize {
    match axis {
        PlaneAxis::Row => rows,
        PlaneAxis::Col => cols,
        PlaneAxis::Diag | PlaneAxis::AntiDiag => rows + cols - 1,
    }
}

fn axis_tag(axis: PlaneAxis) -> char {
    match axis {
        PlaneAxis::Row => 'r',
        PlaneAxis::Col => 'c',
        PlaneAxis::Diag => 'd',
        PlaneAxis::AntiDiag => 'a',
    }
}

fn y_by_slice(b: &mut ProblemBuilder, cands: &CandidateSets, axis: PlaneAxis) -> Vec<Vec<VarId>> {
    let mut slices = vec![Vec::new(); slice_count(axis, cands.rows(), cands.cols())];
    for c in cands.interior.cells() {
        slices[axis.slice_of(c, cands.cols())].push(b.binary(VarKey::Y(c)));
    }
    slices
}

/// Slice range spanned by interior candidates; slices outside it can never
/// separate two occupied slices.
fn active_range(slices: &[Vec<VarId>]) -> Option<(usize, usize)> {
    let first = slices.iter().position(|s| !s.is_empty())?;
    let last = slices.iter().rposition(|s| !s.is_empty())?;
    Some((first, last))
}

fn add_plane_axis(b: &mut ProblemBuilder, cands: &CandidateSets, axis: PlaneAxis) {
    let slices = y_by_slice(b, cands, axis);
    if let Some((first, last)) = active_range(&slices) {
        for s in first..=last {
            add_plane_slice_rows(b, &slices, axis, s, cands.interior.count() as f64);
        }
    }
}

/// For slice `s`: it is occupied, or every interior cell lies on one side.
///
/// ```text
/// Σ_{slice s} y + lo_s + hi_s ≥ 1
/// Σ_{slices < s} y ≤ M (1 − lo_s)
/// Σ_{slices > s} y ≤ M (1 − hi_s)
/// ```
fn add_plane_slice_rows(b: &mut ProblemBuilder, slices: &[Vec<VarId>], axis: PlaneAxis, s: usize, big_m: f64) {
    let tag = axis_tag(axis);
    if b.has_row(&format!("{tag}occ_{s}")) {
        return;
    }
    let lo = b.binary(VarKey::Plane { axis, side: PlaneSide::Lower, index: s });
    let hi = b.binary(VarKey::Plane { axis, side: PlaneSide::Upper, index: s });
    let occ = slices[s].iter().map(|y| (*y, 1.0)).chain([(lo, 1.0), (hi, 1.0)]);
    b.add_row(format!("{tag}occ_{s}"), occ, RowSense::Ge, 1.0);
    let below: Vec<_> = slices[..s].iter().flatten().map(|y| (*y, 1.0)).collect();
    if !below.is_empty() {
        b.add_row(format!("{tag}lo_{s}"), below.into_iter().chain([(lo, big_m)]), RowSense::Le, big_m);
    }
    let above: Vec<_> = slices[s + 1..].iter().flatten().map(|y| (*y, 1.0)).collect();
    if !above.is_empty() {
        b.add_row(format!("{tag}hi_{s}"), above.into_iter().chain([(hi, big_m)]), RowSense::Le, big_m);
    }
}

/// Adds the plane rows of the given slices only. Used to grow a model lazily
/// from the slices an incumbent violates.
pub fn add_plane_slices(b: &mut ProblemBuilder, cands: &CandidateSets, slices: &[(PlaneAxis, usize)]) {
    let big_m = cands.interior.count() as f64;
    for &axis in &PlaneAxis::ALL {
        if !slices.iter().any(|(a, _)| *a == axis) {
            continue;
        }
        let by_slice = y_by_slice(b, cands, axis);
        for &(_, s) in slices.iter().filter(|(a, _)| *a == axis) {
            add_plane_slice_rows(b, &by_slice, axis, s, big_m);
        }
    }
}

/// Empty slices lying strictly between occupied slices of `interior`.
pub fn violated_slices(interior: &Mask, axes: &[PlaneAxis]) -> Vec<(PlaneAxis, usize)> {
    let mut out = Vec::new();
    for &axis in axes {
        let occupied = slice_occupancy(interior, axis);
        if let (Some(first), Some(last)) = (
            occupied.iter().position(|&n| n > 0),
            occupied.iter().rposition(|&n| n > 0),
        ) {
            out.extend((first..=last).filter(|&s| occupied[s] == 0).map(|s| (axis, s)));
        }
    }
    out
}

/// Number of cells of `mask` in each slice of `axis`.
pub fn slice_occupancy(mask: &Mask, axis: PlaneAxis) -> Vec<usize> {
    let mut occ = vec![0; slice_count(axis, mask.rows(), mask.cols())];
    for c in mask.cells() {
        occ[axis.slice_of(c, mask.cols())] += 1;
    }
    occ
}

/// True when the occupied slices of `mask` along `axis` form one interval,
/// the exact condition under which the plane rows admit a witness.
pub fn planes_admit(mask: &Mask, axis: PlaneAxis) -> bool {
    violated_slices(mask, &[axis]).is_empty()
}

/// Rooted MTZ tour over 8-adjacent perimeter cells: every selected perimeter
/// cell has one outgoing and one incoming arc, and the order variables `u`
/// increase along every arc except those entering the link cell, so all
/// selected perimeter cells form a single cycle through the link cell.
///
/// With `S = |perimeter candidates|`:
///
/// ```text
/// Σ_h w_ch = x_c,  Σ_h w_hc = x_c
/// u_a − u_h + S·w_ah ≤ S − 1 + S·l_h
/// 0 ≤ u_c ≤ (S − 1)·x_c,  u_c ≤ (S − 1)(1 − l_c)
/// ```
///
/// `literal_u_bound` replaces `(S − 1)·x_c` by `x_c`.
pub fn build_tsp_constraints(b: &mut ProblemBuilder, cands: &CandidateSets, literal_u_bound: bool) -> Result<()> {
    let n = cands.perimeter.count();
    if n < 3 {
        return Err(Error::TourTooSmall { found: n });
    }
    let s = n as f64;
    let (rows, cols) = (cands.rows(), cands.cols());
    let arcs_from = |c: Cell| c.neighbors8(rows, cols).filter(|h| cands.is_perimeter(*h));
    for c in cands.perimeter.cells() {
        let x = b.binary(VarKey::X(c));
        let l = b.binary(VarKey::L(c));
        let u = b.var(VarKey::U(c), VarKind::Integer, 0.0, s - 1.0);
        let out: Vec<_> = arcs_from(c).map(|h| (b.binary(VarKey::W(c, h)), 1.0)).collect();
        let inc: Vec<_> = arcs_from(c).map(|h| (b.binary(VarKey::W(h, c)), 1.0)).collect();
        b.add_row(format!("tout_{}_{}", c.row, c.col), out.into_iter().chain([(x, -1.0)]), RowSense::Eq, 0.0);
        b.add_row(format!("tin_{}_{}", c.row, c.col), inc.into_iter().chain([(x, -1.0)]), RowSense::Eq, 0.0);
        let ub = if literal_u_bound { 1.0 } else { s - 1.0 };
        b.add_row(format!("tub_{}_{}", c.row, c.col), [(u, 1.0), (x, -ub)], RowSense::Le, 0.0);
        b.add_row(format!("troot_{}_{}", c.row, c.col), [(u, 1.0), (l, s - 1.0)], RowSense::Le, s - 1.0);
    }
    for a in cands.perimeter.cells() {
        for h in arcs_from(a) {
            let ua = b.get(VarKey::U(a)).expect("order variable declared");
            let uh = b.get(VarKey::U(h)).expect("order variable declared");
            let w = b.binary(VarKey::W(a, h));
            let lh = b.binary(VarKey::L(h));
            b.add_row(
                format!("mtz_{}_{}_{}_{}", a.row, a.col, h.row, h.col),
                [(ua, 1.0), (uh, -1.0), (w, s), (lh, -s)],
                RowSense::Le,
                s - 1.0,
            );
        }
    }
    Ok(())
}

/// Flood-fill verdict on a reservoir.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Connected,
    /// Components largest first.
    Fragmented(Vec<Vec<Cell>>),
}

impl Verdict {
    pub fn is_connected(&self) -> bool {
        matches!(self, Verdict::Connected)
    }
}

/// 4-connectivity verdict on a reservoir mask. Holes are allowed.
pub fn check_and_escalate(reservoir: &Mask) -> Verdict {
    let comps = connected_components(reservoir, Adjacency::Four);
    if comps.len() <= 1 {
        Verdict::Connected
    } else {
        Verdict::Fragmented(comps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MipProblem;
    use proptest::prelude::*;

    fn cands_from(interior: &Mask) -> CandidateSets {
        let (rows, cols) = (interior.rows(), interior.cols());
        let perimeter = Mask::from_fn(rows, cols, |c| c.neighbors4(rows, cols).any(|n| interior.contains(n)));
        CandidateSets {
            reservoir: interior.union(&perimeter),
            interior: interior.clone(),
            perimeter,
            excluded: Mask::new(rows, cols),
        }
    }

    /// Decides by enumeration whether the plane rows admit a witness for a
    /// fixed interior selection.
    fn plane_witness_exists(p: &MipProblem, interior: &Mask) -> bool {
        let planes: Vec<VarId> = p
            .keys()
            .filter(|(k, _)| matches!(k, VarKey::Plane { .. }))
            .map(|(_, v)| v)
            .collect();
        let mut base = vec![0.0; p.num_vars()];
        for c in interior.cells() {
            base[p.var(VarKey::Y(c)).unwrap().0] = 1.0;
        }
        // Rows only couple planes of the same slice, so check each slice pair
        // independently.
        let mut pairs: std::collections::BTreeMap<(PlaneAxis, usize), Vec<VarId>> = Default::default();
        for id in planes {
            if let Some(VarKey::Plane { axis, index, .. }) = VarKey::parse(&p.variables()[id.0].name) {
                pairs.entry((axis, index)).or_default().push(id);
            }
        }
        let rows_of = |ids: &[VarId]| -> Vec<usize> {
            (0..p.num_rows())
                .filter(|&r| p.constraints()[r].terms.iter().any(|(v, _)| ids.contains(v)))
                .collect()
        };
        pairs.values().all(|ids| {
            let rows = rows_of(ids);
            (0..4u8).any(|bits| {
                let mut v = base.clone();
                for (k, id) in ids.iter().enumerate() {
                    v[id.0] = (bits >> k & 1) as f64;
                }
                rows.iter().all(|&r| p.constraints()[r].violation(&v) <= 1e-9)
            })
        })
    }

    #[test]
    fn row_gap_is_cut() {
        let cands = cands_from(&Mask::from_fn(8, 8, |c| c.row > 0 && c.row < 7 && c.col > 0 && c.col < 7));
        let mut b = ProblemBuilder::new("t");
        build_separating_planes(&mut b, &cands, false);
        let p = b.finish();
        let mut gap = Mask::new(8, 8);
        for r in [2, 3, 4, 6] {
            gap.set(Cell::new(r, 3), true);
        }
        assert!(!plane_witness_exists(&p, &gap));
        assert_eq!(violated_slices(&gap, &[PlaneAxis::Row]), vec![(PlaneAxis::Row, 5)]);
        let band = Mask::from_fn(8, 8, |c| (2..5).contains(&c.row) && (2..4).contains(&c.col));
        assert!(plane_witness_exists(&p, &band));
    }

    #[test]
    fn diagonal_blobs_pass_hv_but_not_diagonals() {
        let blobs = Mask::from_cells(
            8,
            8,
            [Cell::new(2, 2), Cell::new(2, 3), Cell::new(3, 2), Cell::new(4, 5), Cell::new(5, 4), Cell::new(5, 5)],
        );
        assert_eq!(connected_components(&blobs, Adjacency::Four).len(), 2);
        let cands = cands_from(&Mask::from_fn(8, 8, |c| (1..7).contains(&c.row) && (1..7).contains(&c.col)));
        let mut hv = ProblemBuilder::new("hv");
        build_separating_planes(&mut hv, &cands, false);
        assert!(plane_witness_exists(&hv.finish(), &blobs));
        let mut all = ProblemBuilder::new("all");
        build_separating_planes(&mut all, &cands, true);
        assert!(!plane_witness_exists(&all.finish(), &blobs));
    }

    proptest! {
        #[test]
        fn plane_rows_match_contiguity(bits in proptest::collection::vec(any::<bool>(), 25), diag in any::<bool>()) {
            let interior_cands = Mask::from_fn(7, 7, |c| (1..6).contains(&c.row) && (1..6).contains(&c.col));
            let cands = cands_from(&interior_cands);
            let mut b = ProblemBuilder::new("t");
            build_separating_planes(&mut b, &cands, diag);
            let p = b.finish();
            let sel = Mask::from_cells(7, 7, interior_cands.cells().zip(&bits).filter(|(_, b)| **b).map(|(c, _)| c));
            let axes = if diag { &PlaneAxis::ALL[..] } else { &PlaneAxis::ALL[..2] };
            let contiguous = axes.iter().all(|a| planes_admit(&sel, *a));
            prop_assert_eq!(plane_witness_exists(&p, &sel), contiguous);
        }
    }

    #[test]
    fn connected_selection_always_admits_planes() {
        // A 4-connected set has contiguous occupancy along every axis.
        let ring = Mask::from_fn(7, 7, |c| (1..6).contains(&c.row) && (1..6).contains(&c.col) && !(c.row == 3 && c.col == 3));
        for axis in PlaneAxis::ALL {
            assert!(planes_admit(&ring, axis));
        }
        assert!(check_and_escalate(&ring).is_connected());
    }

    #[test]
    fn verdicts() {
        let one = Mask::from_cells(4, 4, [Cell::new(0, 0), Cell::new(0, 1)]);
        assert_eq!(check_and_escalate(&one), Verdict::Connected);
        let two = Mask::from_cells(4, 4, [Cell::new(0, 0), Cell::new(3, 3)]);
        match check_and_escalate(&two) {
            Verdict::Fragmented(c) => assert_eq!(c.len(), 2),
            v => panic!("{v:?}"),
        }
    }

    fn tour_problem(perimeter: &Mask) -> MipProblem {
        let rows = perimeter.rows();
        let cols = perimeter.cols();
        let cands = CandidateSets {
            interior: Mask::new(rows, cols),
            perimeter: perimeter.clone(),
            reservoir: perimeter.clone(),
            excluded: Mask::new(rows, cols),
        };
        let mut b = ProblemBuilder::new("tour");
        build_tsp_constraints(&mut b, &cands, false).unwrap();
        b.finish()
    }

    /// Sets x, l, w along the closed walk `cycle` and u as the walk position.
    fn tour_values(p: &MipProblem, cycle: &[Cell]) -> Vec<f64> {
        let mut v = vec![0.0; p.num_vars()];
        for (i, c) in cycle.iter().enumerate() {
            v[p.var(VarKey::X(*c)).unwrap().0] = 1.0;
            v[p.var(VarKey::U(*c)).unwrap().0] = i as f64;
            let next = cycle[(i + 1) % cycle.len()];
            v[p.var(VarKey::W(*c, next)).unwrap().0] = 1.0;
        }
        v[p.var(VarKey::L(cycle[0])).unwrap().0] = 1.0;
        v
    }

    fn ring8(r: usize, c: usize) -> Vec<Cell> {
        vec![
            Cell::new(r, c),
            Cell::new(r, c + 1),
            Cell::new(r, c + 2),
            Cell::new(r + 1, c + 2),
            Cell::new(r + 2, c + 2),
            Cell::new(r + 2, c + 1),
            Cell::new(r + 2, c),
            Cell::new(r + 1, c),
        ]
    }

    #[test]
    fn single_ring_tour_is_feasible() {
        let ring = ring8(0, 0);
        let p = tour_problem(&Mask::from_cells(3, 3, ring.iter().copied()));
        assert_eq!(p.max_violation(&tour_values(&p, &ring)).amount, 0.0);
        assert_eq!(p.max_violation(&vec![0.0; p.num_vars()]).amount, 0.0);
    }

    #[test]
    fn literal_bound_forbids_long_tours() {
        let ring = ring8(0, 0);
        let mask = Mask::from_cells(3, 3, ring.iter().copied());
        let cands = CandidateSets {
            interior: Mask::new(3, 3),
            perimeter: mask.clone(),
            reservoir: mask,
            excluded: Mask::new(3, 3),
        };
        let mut b = ProblemBuilder::new("lit");
        build_tsp_constraints(&mut b, &cands, true).unwrap();
        let p = b.finish();
        assert!(p.max_violation(&tour_values(&p, &ring)).amount > 0.0);
    }

    #[test]
    fn two_disjoint_cycles_have_no_order() {
        // Two 4-cycles (2x2 blocks) far apart: the one without the link cell
        // needs u to increase around a cycle, impossible for any u in range.
        let a = [Cell::new(0, 0), Cell::new(0, 1), Cell::new(1, 1), Cell::new(1, 0)];
        let b = [Cell::new(0, 4), Cell::new(0, 5), Cell::new(1, 5), Cell::new(1, 4)];
        let p = tour_problem(&Mask::from_cells(2, 6, a.iter().chain(&b).copied()));
        let base = {
            let mut v = tour_values(&p, &a);
            let w = tour_values(&p, &b);
            for (k, id) in p.keys() {
                if matches!(k, VarKey::X(c) | VarKey::W(c, _) if b.contains(&c)) {
                    v[id.0] = w[id.0];
                }
            }
            v
        };
        // Only the order values on the second cycle can matter.
        let us: Vec<VarId> = b.iter().map(|c| p.var(VarKey::U(*c)).unwrap()).collect();
        let s = 8;
        let mut feasible = false;
        let mut idx = vec![0usize; us.len()];
        'outer: loop {
            let mut v = base.clone();
            for (i, id) in us.iter().enumerate() {
                v[id.0] = idx[i] as f64;
            }
            if p.max_violation(&v).amount <= 1e-9 {
                feasible = true;
                break;
            }
            for i in 0..us.len() {
                idx[i] += 1;
                if idx[i] < s {
                    continue 'outer;
                }
                idx[i] = 0;
            }
            break;
        }
        assert!(!feasible);
    }

    #[test]
    fn tiny_perimeter_rejected() {
        let p = Mask::from_cells(2, 2, [Cell::new(0, 0), Cell::new(0, 1)]);
        let cands = CandidateSets {
            interior: Mask::new(2, 2),
            perimeter: p.clone(),
            reservoir: p,
            excluded: Mask::new(2, 2),
        };
        assert!(matches!(
            build_tsp_constraints(&mut ProblemBuilder::new("t"), &cands, false),
            Err(Error::TourTooSmall { found: 2 })
        ));
    }

    #[test]
    fn level_parsing() {
        for l in ConnectivityLevel::ALL {
            assert_eq!(l.name().parse::<ConnectivityLevel>().unwrap(), l);
        }
        assert!("3".parse::<ConnectivityLevel>().unwrap().uses_tour());
        assert!("bogus".parse::<ConnectivityLevel>().is_err());
    }
}
