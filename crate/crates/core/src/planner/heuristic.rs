use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::planner::scenario::{point_blocked, Scenario};

/// Grid distance-to-goal over the scenario boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicField {
    pub origin_x: f64,
    pub origin_y: f64,
    pub cell: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row-major (`iy * nx + ix`) distances in meters; infinite where the
    /// cell center is blocked or unreachable.
    pub dist: Vec<f64>,
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then_with(|| o.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl HeuristicField {
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fx = ((x - self.origin_x) / self.cell).floor();
        let fy = ((y - self.origin_y) / self.cell).floor();
        if fx < 0.0 || fy < 0.0 || fx >= self.nx as f64 || fy >= self.ny as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    pub fn center(&self, ix: usize, iy: usize) -> (f64, f64) {
        (self.origin_x + (ix as f64 + 0.5) * self.cell, self.origin_y + (iy as f64 + 0.5) * self.cell)
    }

    /// Distance of the cell containing `(x, y)`; infinite outside the grid.
    pub fn lookup(&self, x: f64, y: f64) -> f64 {
        match self.cell_of(x, y) {
            Some((ix, iy)) => self.dist[iy * self.nx + ix],
            None => f64::INFINITY,
        }
    }
}

/// 8-connected Dijkstra from the goal cell. Cells whose centers collide
/// are impassable.
pub fn build_heuristic(scenario: &Scenario, cell: f64) -> Result<HeuristicField> {
    if !(cell > 0.0) {
        return Err(Error::InvalidArgument("heuristic cell size must be positive".into()));
    }
    let b = &scenario.boundary;
    let nx = (b.width() / cell).ceil().max(1.0) as usize;
    let ny = (b.height() / cell).ceil().max(1.0) as usize;
    let mut field =
        HeuristicField { origin_x: b.min_x, origin_y: b.min_y, cell, nx, ny, dist: vec![f64::INFINITY; nx * ny] };
    let blocked: Vec<bool> = (0..nx * ny)
        .map(|k| {
            let (x, y) = field.center(k % nx, k / nx);
            point_blocked(x, y, scenario)
        })
        .collect();
    let (gx, gy) = field
        .cell_of(scenario.goal.x, scenario.goal.y)
        .ok_or_else(|| Error::InvalidArgument("goal outside the heuristic grid".into()))?;
    let goal = gy * nx + gx;
    if blocked[goal] {
        return Err(Error::GoalBlocked);
    }
    let diag = cell * std::f64::consts::SQRT_2;
    let mut heap = BinaryHeap::new();
    field.dist[goal] = 0.0;
    heap.push(Entry(0.0, goal));
    while let Some(Entry(d, k)) = heap.pop() {
        if d > field.dist[k] {
            continue;
        }
        let (ix, iy) = ((k % nx) as i64, (k / nx) as i64);
        for dy in -1..=1i64 {
            for dx in -1..=1i64 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (jx, jy) = (ix + dx, iy + dy);
                if jx < 0 || jy < 0 || jx >= nx as i64 || jy >= ny as i64 {
                    continue;
                }
                let j = jy as usize * nx + jx as usize;
                if blocked[j] {
                    continue;
                }
                let nd = d + if dx != 0 && dy != 0 { diag } else { cell };
                if nd < field.dist[j] {
                    field.dist[j] = nd;
                    heap.push(Entry(nd, j));
                }
            }
        }
    }
    Ok(field)
}
