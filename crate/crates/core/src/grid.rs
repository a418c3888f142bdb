//! Virtual grid partition of the deployment area.
//!
//! Cells are squares of side `r = R / √5`. Any two points in edge-adjacent
//! cells lie within `r·√5 = R` of each other, so one awake node per cell keeps
//! the grid connected along 4-adjacency. Diagonal neighbours can be up to
//! `r·√8 > R` apart and are not considered adjacent.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Vec2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellIndex {
    pub ix: u32,
    pub iy: u32,
}

impl CellIndex {
    pub const fn new(ix: u32, iy: u32) -> Self {
        CellIndex { ix, iy }
    }

    /// Hop distance along 4-adjacency. Cells at the same distance from a
    /// source cell form one "level" of the grid.
    pub fn grid_distance(self, other: CellIndex) -> u32 {
        self.ix.abs_diff(other.ix) + self.iy.abs_diff(other.iy)
    }
}

impl fmt::Display for CellIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.ix, self.iy)
    }
}

/// Cell side for radio range `radio_range`: `R / √5`.
pub fn cell_size(radio_range: f64) -> Result<f64> {
    if !(radio_range.is_finite() && radio_range > 0.0) {
        return Err(Error::Domain("radio range must be positive"));
    }
    Ok(radio_range / 5f64.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridLayout {
    pub r: f64,
    pub cols: u32,
    pub rows: u32,
    pub area_w: f64,
    pub area_h: f64,
}

impl GridLayout {
    /// Layout with the largest legal cells for `radio_range`.
    pub fn new(radio_range: f64, area_w: f64, area_h: f64) -> Result<Self> {
        Self::with_cell_side(cell_size(radio_range)?, area_w, area_h)
    }

    pub fn with_cell_side(r: f64, area_w: f64, area_h: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::Domain("cell side must be positive"));
        }
        if !(area_w > 0.0 && area_h > 0.0) {
            return Err(Error::Domain("area must have positive extent"));
        }
        // Partial cells at the far edges are kept.
        let cols = (area_w / r).ceil().max(1.0) as u32;
        let rows = (area_h / r).ceil().max(1.0) as u32;
        Ok(GridLayout { r, cols, rows, area_w, area_h })
    }

    pub fn contains(&self, c: CellIndex) -> bool {
        c.ix < self.cols && c.iy < self.rows
    }

    pub fn cell_count(&self) -> usize {
        self.cols as usize * self.rows as usize
    }

    /// All cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        (0..self.rows).flat_map(move |iy| (0..self.cols).map(move |ix| CellIndex::new(ix, iy)))
    }

    fn axis_index(&self, v: f64, n: u32) -> u32 {
        let mut i = (v / self.r).floor();
        // Keep `i·r <= v < (i+1)·r` exact under the same products the
        // bounds use, regardless of rounding in the division.
        if i * self.r > v {
            i -= 1.0;
        } else if (i + 1.0) * self.r <= v {
            i += 1.0;
        }
        (i.max(0.0) as u32).min(n - 1)
    }

    /// Cell containing `pos`; boundaries belong to the higher-index cell.
    pub fn cell_of(&self, pos: Vec2) -> Result<CellIndex> {
        let inside = pos.x >= 0.0 && pos.x < self.area_w && pos.y >= 0.0 && pos.y < self.area_h;
        if !inside {
            return Err(Error::OutOfArea { x: pos.x, y: pos.y });
        }
        Ok(self.cell_of_clamped(pos))
    }

    /// Like [`cell_of`](Self::cell_of), but maps points on or past the far
    /// edges into the last row/column.
    pub fn cell_of_clamped(&self, pos: Vec2) -> CellIndex {
        let x = pos.x.clamp(0.0, self.area_w);
        let y = pos.y.clamp(0.0, self.area_h);
        CellIndex::new(self.axis_index(x, self.cols), self.axis_index(y, self.rows))
    }

    /// `[x0, x1) × [y0, y1)` covered by `c`, unclipped by the area.
    pub fn bounds(&self, c: CellIndex) -> (Vec2, Vec2) {
        let lo = Vec2::new(c.ix as f64 * self.r, c.iy as f64 * self.r);
        let hi = Vec2::new((c.ix as f64 + 1.0) * self.r, (c.iy as f64 + 1.0) * self.r);
        (lo, hi)
    }

    /// Edge-adjacent cells of `c` that exist in the layout.
    pub fn neighbor_cells(&self, c: CellIndex) -> Vec<CellIndex> {
        let mut out = Vec::with_capacity(4);
        if c.ix > 0 {
            out.push(CellIndex::new(c.ix - 1, c.iy));
        }
        if c.ix + 1 < self.cols {
            out.push(CellIndex::new(c.ix + 1, c.iy));
        }
        if c.iy > 0 {
            out.push(CellIndex::new(c.ix, c.iy - 1));
        }
        if c.iy + 1 < self.rows {
            out.push(CellIndex::new(c.ix, c.iy + 1));
        }
        out.retain(|n| self.contains(*n));
        out
    }

    /// Supremum distance between points of two edge-adjacent cells.
    pub fn adjacency_bound(&self) -> f64 {
        self.r * 5f64.sqrt()
    }
}
