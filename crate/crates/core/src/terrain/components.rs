use std::collections::VecDeque;

use super::{Cell, Mask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Adjacency {
    #[default]
    Four,
    Eight,
}

/// Maximal connected components of `mask`, largest first; ties are broken by
/// the component's first cell in row-major order. Cells inside each component
/// are sorted row-major.
pub fn connected_components(mask: &Mask, adjacency: Adjacency) -> Vec<Vec<Cell>> {
    let (rows, cols) = (mask.rows(), mask.cols());
    let mut seen = Mask::new(rows, cols);
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in mask.cells() {
        if seen.contains(start) {
            continue;
        }
        seen.set(start, true);
        queue.push_back(start);
        let mut comp = Vec::new();
        while let Some(c) = queue.pop_front() {
            comp.push(c);
            let mut visit = |n: Cell| {
                if mask.contains(n) && !seen.contains(n) {
                    seen.set(n, true);
                    queue.push_back(n);
                }
            };
            match adjacency {
                Adjacency::Four => c.neighbors4(rows, cols).for_each(&mut visit),
                Adjacency::Eight => c.neighbors8(rows, cols).for_each(&mut visit),
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a[0].cmp(&b[0])));
    out
}
