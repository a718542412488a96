//! Exhaustive search over reservoir shapes on micro instances.
//!
//! Works on masks and the cost functions directly, never on the integer
//! program, so it can serve as an independent check of the model and solver.

use std::collections::HashMap;

use crate::connectivity::{planes_admit, ConnectivityLevel};
use crate::costing::{conveyance_cost, embankment_cell_cost, equipment_cost};
use crate::error::{Error, Result};
use crate::model::SitingInstance;
use crate::num::Scalar;
use crate::terrain::{Cell, Mask};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleOptions {
    /// Refuse instances with more reservoir candidates than this.
    pub max_cells: usize,
    /// Connectivity rules applied on top of shape and volume: planes on the
    /// interior cells and, at `Tsp`, one closed 8-connected tour through all
    /// perimeter cells.
    pub level: ConnectivityLevel,
    /// Only consider 4-connected reservoirs. Off by default, since the
    /// integer program at the tour level does not imply it either.
    pub require_connected: bool,
    pub perimeter_min_neighbors: u8,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            max_cells: 18,
            level: ConnectivityLevel::Tsp,
            require_connected: false,
            perimeter_min_neighbors: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleBest {
    pub perimeter: Mask,
    pub interior: Mask,
    pub link: Cell,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub best: Option<OracleBest>,
    /// Perimeter/interior splits examined.
    pub configurations: u64,
    /// Splits meeting every rule.
    pub feasible: u64,
}

struct Tables {
    cells: Vec<Cell>,
    /// 4-neighbours inside the candidate list.
    nb4: Vec<u32>,
    /// 8-neighbours among perimeter candidates.
    nb8: Vec<u32>,
    /// Cells with all four sides inside the candidate list, as the mask of
    /// those sides; `None` when a side is off-grid or not a candidate.
    sides: Vec<Option<u32>>,
    perimeter_ok: u32,
    interior_ok: u32,
    volume: Vec<f64>,
    embankment: Vec<f64>,
    conveyance: Vec<f64>,
}

fn bits(mut m: u32) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let i = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(i)
        }
    })
}

fn connected(set: u32, nb: &[u32]) -> bool {
    if set == 0 {
        return true;
    }
    let mut seen = 1u32 << set.trailing_zeros();
    let mut frontier = seen;
    while frontier != 0 {
        let mut next = 0;
        for i in bits(frontier) {
            next |= nb[i] & set;
        }
        frontier = next & !seen;
        seen |= next;
    }
    seen == set
}

/// Whether the cells of `set` admit one closed walk visiting each exactly
/// once along `nb` edges. Two adjacent cells form a closed walk there and
/// back; a single cell does not.
fn hamiltonian_cycle(set: u32, nb: &[u32]) -> bool {
    let n = set.count_ones();
    if n < 2 {
        return false;
    }
    let start = set.trailing_zeros() as usize;
    if n == 2 {
        return nb[start] & set != 0;
    }
    if bits(set).any(|i| (nb[i] & set).count_ones() < 2) {
        return false;
    }
    fn extend(cur: usize, visited: u32, set: u32, start: usize, nb: &[u32]) -> bool {
        if visited == set {
            return nb[cur] & (1 << start) != 0;
        }
        let remaining = set & !visited;
        // Every unvisited cell needs an unvisited-or-endpoint neighbour to continue.
        for i in bits(remaining) {
            let free = nb[i] & (remaining | (1 << cur) | (1 << start));
            if free.count_ones() < 2 && !(free.count_ones() == 1 && remaining.count_ones() == 1) {
                return false;
            }
        }
        for next in bits(nb[cur] & remaining) {
            if extend(next, visited | (1 << next), set, start, nb) {
                return true;
            }
        }
        false
    }
    extend(start, 1 << start, set, start, nb)
}

/// Minimum-cost reservoir by enumeration of every candidate subset and every
/// perimeter/interior split of it.
///
/// A split is feasible when interior cells have all four sides in the
/// reservoir, perimeter cells are perimeter candidates touching at least
/// `perimeter_min_neighbors` reservoir cells, the stored volume meets the
/// target and the connectivity rules of `opts.level` hold. The cost uses the
/// cheapest perimeter cell as link.
pub fn oracle_enumerate<T: Scalar>(inst: &SitingInstance<T>, opts: &OracleOptions) -> Result<OracleResult> {
    let cands = &inst.cands;
    let cells: Vec<Cell> = cands.reservoir.cells().collect();
    let n = cells.len();
    if n > opts.max_cells || n > 30 {
        return Err(Error::SearchSpaceTooLarge {
            cells: n,
            limit: opts.max_cells.min(30),
        });
    }
    let (rows, cols) = (cands.rows(), cands.cols());
    let index: HashMap<Cell, usize> = cells.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let mask_of = |it: &mut dyn Iterator<Item = Cell>| it.filter_map(|c| index.get(&c)).fold(0u32, |m, i| m | 1 << i);
    let mut t = Tables {
        nb4: Vec::with_capacity(n),
        nb8: Vec::with_capacity(n),
        sides: Vec::with_capacity(n),
        perimeter_ok: 0,
        interior_ok: 0,
        volume: Vec::with_capacity(n),
        embankment: Vec::with_capacity(n),
        conveyance: Vec::with_capacity(n),
        cells: cells.clone(),
    };
    for (i, &c) in cells.iter().enumerate() {
        t.nb4.push(mask_of(&mut c.neighbors4(rows, cols)));
        t.nb8.push(mask_of(&mut c.neighbors8(rows, cols).filter(|h| cands.is_perimeter(*h))));
        let s = c.sides(rows, cols);
        t.sides.push(if s.iter().all(|n| n.is_some_and(|n| index.contains_key(&n))) {
            Some(mask_of(&mut s.into_iter().flatten()))
        } else {
            None
        });
        if cands.is_perimeter(c) {
            t.perimeter_ok |= 1 << i;
        }
        if cands.is_interior(c) {
            t.interior_ok |= 1 << i;
        }
        t.volume.push(if cands.is_interior(c) { inst.cell_volume(c) } else { 0.0 });
        t.embankment.push(
            embankment_cell_cost(inst.grid.cell_length(), inst.spec.water_elevation, inst.grid.elevation(c), &inst.params)
                .cost
                .f64(),
        );
        t.conveyance.push(if cands.is_perimeter(c) {
            conveyance_cost(inst.spec.flow, inst.dist.get(c), &inst.params)?.total().f64()
        } else {
            f64::INFINITY
        });
    }
    let equipment = equipment_cost(inst.spec.head, inst.spec.power_mw, &inst.params)?.f64();
    let vol_min = inst.spec.vol_min.f64();
    let axes = opts.level.plane_axes();
    let min_nb = opts.perimeter_min_neighbors as u32;

    let mut result = OracleResult {
        best: None,
        configurations: 0,
        feasible: 0,
    };
    let mut best_bits: Option<(u32, u32, usize, f64)> = None;
    let mut tour_cache: HashMap<u32, bool> = HashMap::new();

    let full: u64 = 1 << n;
    for z in 1..full {
        let z = z as u32;
        if opts.require_connected && !connected(z, &t.nb4) {
            continue;
        }
        // Cells that may be interior: interior candidates with all sides in z.
        let ymax = bits(z & t.interior_ok)
            .filter(|&i| t.sides[i].is_some_and(|s| s & z == s))
            .fold(0u32, |m, i| m | 1 << i);
        // Cells that cannot be perimeter must be interior.
        let forced = z & !t.perimeter_ok;
        if forced & !ymax != 0 {
            continue;
        }
        let free = ymax & !forced;
        let capacity: f64 = bits(ymax).map(|i| t.volume[i]).sum();
        if capacity < vol_min {
            continue;
        }
        // Enumerate subsets of `free` via the standard submask walk.
        let mut sub = free;
        loop {
            let y = sub | forced;
            let x = z & !y;
            result.configurations += 1;
            if let Some(cost) = evaluate(&t, z, x, y, vol_min, min_nb, axes, opts.level, rows, cols, &mut tour_cache) {
                result.feasible += 1;
                let (link, conv) = bits(x)
                    .map(|i| (i, t.conveyance[i]))
                    .fold((usize::MAX, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
                let total = cost + conv + equipment;
                if best_bits.is_none_or(|b| total < b.3) {
                    best_bits = Some((x, y, link, total));
                }
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & free;
        }
    }
    if let Some((x, y, link, cost)) = best_bits {
        result.best = Some(OracleBest {
            perimeter: Mask::from_cells(rows, cols, bits(x).map(|i| t.cells[i])),
            interior: Mask::from_cells(rows, cols, bits(y).map(|i| t.cells[i])),
            link: t.cells[link],
            cost,
        });
    }
    Ok(result)
}

/// Embankment cost of a feasible split, or `None`.
#[allow(clippy::too_many_arguments)]
fn evaluate(
    t: &Tables,
    z: u32,
    x: u32,
    y: u32,
    vol_min: f64,
    min_nb: u32,
    axes: &[crate::model::PlaneAxis],
    level: ConnectivityLevel,
    rows: usize,
    cols: usize,
    tour_cache: &mut HashMap<u32, bool>,
) -> Option<f64> {
    if x == 0 {
        return None;
    }
    if bits(x).any(|i| (t.nb4[i] & z).count_ones() < min_nb) {
        return None;
    }
    let volume: f64 = bits(y).map(|i| t.volume[i]).sum();
    if volume < vol_min {
        return None;
    }
    if !axes.is_empty() {
        let interior = Mask::from_cells(rows, cols, bits(y).map(|i| t.cells[i]));
        if !axes.iter().all(|a| planes_admit(&interior, *a)) {
            return None;
        }
    }
    if level.uses_tour() && !*tour_cache.entry(x).or_insert_with(|| hamiltonian_cycle(x, &t.nb8)) {
        return None;
    }
    Some(bits(x).map(|i| t.embankment[i]).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::pit_instance;

    #[test]
    fn pit_optimum_is_pit_with_ring() {
        let inst = pit_instance(20_000.0);
        let r = oracle_enumerate(&inst, &OracleOptions { level: ConnectivityLevel::None, ..Default::default() }).unwrap();
        let best = r.best.unwrap();
        assert_eq!(best.interior.cells().collect::<Vec<_>>(), vec![Cell::new(2, 2)]);
        assert_eq!(best.perimeter.count(), 4);
        // Conveyance is cheapest at the ring cell nearest the lower corner.
        assert!([Cell::new(3, 2), Cell::new(2, 1)].contains(&best.link));
        assert!(r.configurations > 0);
    }

    #[test]
    fn pit_ring_admits_tour() {
        // The four ring cells are diagonal neighbours in turn around the pit.
        let inst = pit_instance(20_000.0);
        let r = oracle_enumerate(&inst, &OracleOptions::default()).unwrap();
        assert!(r.best.is_some());
    }

    #[test]
    fn over_capacity_has_no_solution() {
        let inst = pit_instance(1e9);
        let r = oracle_enumerate(&inst, &OracleOptions::default()).unwrap();
        assert!(r.best.is_none());
    }

    #[test]
    fn refuses_large_instances() {
        let inst = pit_instance(20_000.0);
        let opts = OracleOptions { max_cells: 3, ..Default::default() };
        assert!(matches!(oracle_enumerate(&inst, &opts), Err(Error::SearchSpaceTooLarge { .. })));
    }

    #[test]
    fn cycle_detection() {
        // Eight cells in a cycle, adjacency by index.
        let ring8 = |i: usize| (1u32 << ((i + 1) % 8)) | (1u32 << ((i + 7) % 8));
        let nb: Vec<u32> = (0..8).map(ring8).collect();
        assert!(hamiltonian_cycle(0xff, &nb));
        assert!(!hamiltonian_cycle(0x7f, &nb));
        assert!(!hamiltonian_cycle(0x01, &nb));
        assert!(hamiltonian_cycle(0x03, &nb));
        assert!(!hamiltonian_cycle(0x05, &nb));
        assert!(connected(0x07, &nb));
        assert!(!connected(0x05, &nb));
    }
}
