//! Walkable grid over the floor and 8-connected A* pathfinding.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::geom::Vec2;
use crate::scene::{FloorSpec, ObjectRole, SceneObject};
use crate::Scalar;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NavError {
    #[error("{which} cell {cell:?} is not walkable")]
    NotWalkable { which: &'static str, cell: (usize, usize) },
    #[error("cell {0:?} outside the grid")]
    OutOfBounds((usize, usize)),
}

/// Boolean occupancy grid over the floor extent.
#[derive(Debug, Clone, PartialEq)]
pub struct NavGrid {
    pub cell_size: Scalar,
    /// World (x, z) of the grid's minimum corner.
    pub origin: Vec2<Scalar>,
    pub nx: usize,
    pub nz: usize,
    walkable: Vec<bool>,
}

impl NavGrid {
    /// Marks cells blocked when any collidable, non-floor object's bounding
    /// box (inflated by the agent radius) covers the cell center within the
    /// agent's standing height band.
    pub fn build(
        floor: FloorSpec,
        objects: &[SceneObject],
        cell_size: Scalar,
        agent_radius: Scalar,
        agent_height: Scalar,
    ) -> NavGrid {
        let nx = ((floor.size[0] / cell_size).round() as usize).max(1);
        let nz = ((floor.size[1] / cell_size).round() as usize).max(1);
        let origin = Vec2::new(-floor.size[0] / 2.0, -floor.size[1] / 2.0);
        let y_lo = floor.height + 0.01;
        let y_hi = floor.height + agent_height;
        let boxes: Vec<_> = objects
            .iter()
            .filter(|o| o.collidable && o.role != ObjectRole::Floor)
            .map(|o| o.world_aabb())
            .collect();
        let mut walkable = vec![true; nx * nz];
        for iz in 0..nz {
            for ix in 0..nx {
                let cx = origin.x + (ix as Scalar + 0.5) * cell_size;
                let cz = origin.y + (iz as Scalar + 0.5) * cell_size;
                if boxes.iter().any(|b| b.blocks_circle(cx, cz, agent_radius, y_lo, y_hi)) {
                    walkable[iz * nx + ix] = false;
                }
            }
        }
        NavGrid { cell_size, origin, nx, nz, walkable }
    }

    /// Grid with explicit occupancy, for tests and synthetic maps.
    pub fn from_cells(cell_size: Scalar, origin: Vec2<Scalar>, nx: usize, nz: usize, walkable: Vec<bool>) -> Self {
        assert_eq!(walkable.len(), nx * nz);
        NavGrid { cell_size, origin, nx, nz, walkable }
    }

    #[inline]
    fn idx(&self, ix: usize, iz: usize) -> usize {
        iz * self.nx + ix
    }

    pub fn is_walkable(&self, ix: usize, iz: usize) -> bool {
        ix < self.nx && iz < self.nz && self.walkable[self.idx(ix, iz)]
    }

    pub fn walkable_count(&self) -> usize {
        self.walkable.iter().filter(|w| **w).count()
    }

    pub fn walkable_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.nz).flat_map(move |iz| (0..self.nx).map(move |ix| (ix, iz)))
            .filter(move |&(ix, iz)| self.walkable[self.idx(ix, iz)])
    }

    /// World (x, z) of a cell center.
    pub fn cell_center(&self, ix: usize, iz: usize) -> Vec2<Scalar> {
        Vec2::new(
            self.origin.x + (ix as Scalar + 0.5) * self.cell_size,
            self.origin.y + (iz as Scalar + 0.5) * self.cell_size,
        )
    }

    /// Cell containing a world position, if inside the grid.
    pub fn cell_of(&self, pos: Vec2<Scalar>) -> Option<(usize, usize)> {
        let fx = (pos.x - self.origin.x) / self.cell_size;
        let fz = (pos.y - self.origin.y) / self.cell_size;
        if fx < 0.0 || fz < 0.0 {
            return None;
        }
        let (ix, iz) = (fx as usize, fz as usize);
        if ix < self.nx && iz < self.nz {
            Some((ix, iz))
        } else {
            None
        }
    }

    pub fn is_walkable_pos(&self, pos: Vec2<Scalar>) -> bool {
        self.cell_of(pos).map(|(ix, iz)| self.is_walkable(ix, iz)).unwrap_or(false)
    }

    /// Nearest walkable cell center to `pos` within `radius` (Euclidean,
    /// deterministic tie-break on cell index).
    pub fn nearest_walkable(&self, pos: Vec2<Scalar>, radius: Scalar) -> Option<(usize, usize)> {
        let r_cells = (radius / self.cell_size).ceil() as i64 + 1;
        let cx = ((pos.x - self.origin.x) / self.cell_size).floor() as i64;
        let cz = ((pos.y - self.origin.y) / self.cell_size).floor() as i64;
        let mut best: Option<(Scalar, usize, usize)> = None;
        for dz in -r_cells..=r_cells {
            for dx in -r_cells..=r_cells {
                let (ix, iz) = (cx + dx, cz + dz);
                if ix < 0 || iz < 0 || ix as usize >= self.nx || iz as usize >= self.nz {
                    continue;
                }
                let (ix, iz) = (ix as usize, iz as usize);
                if !self.walkable[self.idx(ix, iz)] {
                    continue;
                }
                let c = self.cell_center(ix, iz);
                let d = (c - pos).length();
                if d > radius {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bd, bx, bz)) => {
                        d < bd - 1e-9 || ((d - bd).abs() <= 1e-9 && (iz, ix) < (bz, bx))
                    }
                };
                if better {
                    best = Some((d, ix, iz));
                }
            }
        }
        best.map(|(_, ix, iz)| (ix, iz))
    }
}

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(PartialEq)]
struct Open {
    f: f64,
    idx: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (f, idx) through BinaryHeap's max semantics
        other
            .f
            .partial_cmp(&self.f)
            .unwrap()
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Optimal 8-connected path under Euclidean step costs (no corner cutting).
/// `Ok(empty)` means the target is unreachable; unwalkable endpoints are an
/// error. The result includes both endpoints; `from == to` yields one cell.
pub fn shortest_path(
    grid: &NavGrid,
    from: (usize, usize),
    to: (usize, usize),
) -> Result<Vec<(usize, usize)>, NavError> {
    for (which, cell) in [("start", from), ("goal", to)] {
        if cell.0 >= grid.nx || cell.1 >= grid.nz {
            return Err(NavError::OutOfBounds(cell));
        }
        if !grid.is_walkable(cell.0, cell.1) {
            return Err(NavError::NotWalkable { which, cell });
        }
    }
    if from == to {
        return Ok(vec![from]);
    }
    let n = grid.nx * grid.nz;
    let start = from.1 * grid.nx + from.0;
    let goal = to.1 * grid.nx + to.0;
    let cell = |i: usize| ((i % grid.nx) as i64, (i / grid.nx) as i64);
    let h = |i: usize| {
        let (ax, az) = cell(i);
        let (bx, bz) = cell(goal);
        let (dx, dz) = ((ax - bx) as f64, (az - bz) as f64);
        (dx * dx + dz * dz).sqrt() * grid.cell_size as f64
    };

    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    g[start] = 0.0;
    open.push(Open { f: h(start), idx: start });

    while let Some(Open { idx, .. }) = open.pop() {
        if closed[idx] {
            continue;
        }
        closed[idx] = true;
        if idx == goal {
            let mut path = Vec::new();
            let mut cur = goal;
            while cur != usize::MAX {
                path.push(((cur % grid.nx), (cur / grid.nx)));
                cur = parent[cur];
            }
            path.reverse();
            return Ok(path);
        }
        let (cx, cz) = cell(idx);
        for dz in -1i64..=1 {
            for dx in -1i64..=1 {
                if dx == 0 && dz == 0 {
                    continue;
                }
                let (nx, nz) = (cx + dx, cz + dz);
                if nx < 0 || nz < 0 || nx as usize >= grid.nx || nz as usize >= grid.nz {
                    continue;
                }
                if !grid.is_walkable(nx as usize, nz as usize) {
                    continue;
                }
                // diagonal moves must not cut blocked corners
                if dx != 0 && dz != 0 {
                    if !grid.is_walkable(nx as usize, cz as usize)
                        || !grid.is_walkable(cx as usize, nz as usize)
                    {
                        continue;
                    }
                }
                let step = if dx != 0 && dz != 0 { SQRT2 } else { 1.0 } * grid.cell_size as f64;
                let ni = nz as usize * grid.nx + nx as usize;
                let cand = g[idx] + step;
                if cand < g[ni] {
                    g[ni] = cand;
                    parent[ni] = idx;
                    open.push(Open { f: cand + h(ni), idx: ni });
                }
            }
        }
    }
    Ok(Vec::new())
}

/// Total Euclidean cost of a cell path.
pub fn path_cost(grid: &NavGrid, path: &[(usize, usize)]) -> f64 {
    path.windows(2)
        .map(|w| {
            let dx = (w[1].0 as i64 - w[0].0 as i64).abs();
            let dz = (w[1].1 as i64 - w[0].1 as i64).abs();
            debug_assert!(dx <= 1 && dz <= 1);
            if dx + dz == 2 { SQRT2 } else { 1.0 }
        })
        .sum::<f64>()
        * grid.cell_size as f64
}
