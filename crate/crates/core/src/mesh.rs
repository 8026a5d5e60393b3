//! Uniform Cartesian grids and rectangular sub-boxes.
//!
//! Cells are numbered row-major (`id = j * nx + i`). Edges are numbered with
//! all x-normal ("vertical") edges first, row-major over `(nx + 1) x ny`, then
//! all y-normal ("horizontal") edges, row-major over `nx x (ny + 1)`.
//!
//! Edge fluxes throughout the crate are stored *axis-aligned*: the value on an
//! edge is `u . e_axis` with `e_axis` the +x or +y unit vector. On interior
//! edges this is exactly the global normal `ň`; on the outer boundary `ň` is the
//! exterior normal and differs from `e_axis` by [`EdgeRef::normal_sign`].

use crate::error::MeshError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    /// Edge with normal along x (a vertical segment).
    X,
    /// Edge with normal along y (a horizontal segment).
    Y,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    /// Sign of the exterior normal relative to the edge axis.
    pub fn outward_sign(self) -> f64 {
        match self {
            Side::Left | Side::Bottom => -1.0,
            Side::Right | Side::Top => 1.0,
        }
    }

    pub fn axis(self) -> Axis {
        match self {
            Side::Left | Side::Right => Axis::X,
            Side::Bottom | Side::Top => Axis::Y,
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
            Side::Bottom => Side::Top,
            Side::Top => Side::Bottom,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    h: f64,
    origin: [f64; 2],
}

/// Topological and geometric view of one edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeRef {
    pub id: usize,
    pub axis: Axis,
    /// Adjacent cells as (low side, high side) along the axis.
    pub cells: [Option<usize>; 2],
    /// `ň . e_axis`: +1 on interior edges and on right/top boundary edges.
    pub normal_sign: f64,
}

impl EdgeRef {
    pub fn is_boundary(&self) -> bool {
        self.cells[0].is_none() || self.cells[1].is_none()
    }

    /// The single adjacent cell of a boundary edge.
    pub fn inner_cell(&self) -> Option<usize> {
        match self.cells {
            [Some(c), None] | [None, Some(c)] => Some(c),
            _ => None,
        }
    }
}

/// One edge of a boundary side, with the arclength of its midpoint measured
/// from the start of the side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SideEdge {
    pub edge: usize,
    pub s: f64,
}

pub fn build_grid(nx: usize, ny: usize, h: f64, origin: [f64; 2]) -> Result<Grid, MeshError> {
    Grid::new(nx, ny, h, origin)
}

impl Grid {
    pub fn new(nx: usize, ny: usize, h: f64, origin: [f64; 2]) -> Result<Self, MeshError> {
        if nx == 0 || ny == 0 {
            return Err(MeshError::InvalidArgument(format!("cell counts must be positive, got {nx}x{ny}")));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(MeshError::InvalidArgument(format!("cell size must be positive, got {h}")));
        }
        Ok(Self { nx, ny, h, origin })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn num_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn num_x_edges(&self) -> usize {
        (self.nx + 1) * self.ny
    }

    pub fn num_y_edges(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    pub fn num_edges(&self) -> usize {
        self.num_x_edges() + self.num_y_edges()
    }

    #[inline]
    pub fn cell_id(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        j * self.nx + i
    }

    #[inline]
    pub fn cell_ij(&self, c: usize) -> (usize, usize) {
        (c % self.nx, c / self.nx)
    }

    /// Id of the x-normal edge at vertex column `i` (0..=nx), cell row `j`.
    #[inline]
    pub fn x_edge(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= self.nx && j < self.ny);
        j * (self.nx + 1) + i
    }

    /// Id of the y-normal edge at cell column `i`, vertex row `j` (0..=ny).
    #[inline]
    pub fn y_edge(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j <= self.ny);
        self.num_x_edges() + j * self.nx + i
    }

    /// Axis and the `(i, j)` index pair of an edge.
    #[inline]
    pub fn edge_ij(&self, e: usize) -> (Axis, usize, usize) {
        let nxe = self.num_x_edges();
        if e < nxe {
            (Axis::X, e % (self.nx + 1), e / (self.nx + 1))
        } else {
            let r = e - nxe;
            (Axis::Y, r % self.nx, r / self.nx)
        }
    }

    pub fn edge(&self, e: usize) -> EdgeRef {
        let (axis, i, j) = self.edge_ij(e);
        let (lo, hi) = match axis {
            Axis::X => ((i > 0).then(|| self.cell_id(i - 1, j)), (i < self.nx).then(|| self.cell_id(i, j))),
            Axis::Y => ((j > 0).then(|| self.cell_id(i, j - 1)), (j < self.ny).then(|| self.cell_id(i, j))),
        };
        let along = if axis == Axis::X { i } else { j };
        let normal_sign = if along == 0 { -1.0 } else { 1.0 };
        EdgeRef { id: e, axis, cells: [lo, hi], normal_sign }
    }

    /// The four edges of a cell in the order left, right, bottom, top.
    #[inline]
    pub fn cell_edges(&self, c: usize) -> [usize; 4] {
        let (i, j) = self.cell_ij(c);
        [self.x_edge(i, j), self.x_edge(i + 1, j), self.y_edge(i, j), self.y_edge(i, j + 1)]
    }

    pub fn cell_center(&self, c: usize) -> [f64; 2] {
        let (i, j) = self.cell_ij(c);
        [self.origin[0] + (i as f64 + 0.5) * self.h, self.origin[1] + (j as f64 + 0.5) * self.h]
    }

    pub fn edge_midpoint(&self, e: usize) -> [f64; 2] {
        let (axis, i, j) = self.edge_ij(e);
        match axis {
            Axis::X => [self.origin[0] + i as f64 * self.h, self.origin[1] + (j as f64 + 0.5) * self.h],
            Axis::Y => [self.origin[0] + (i as f64 + 0.5) * self.h, self.origin[1] + j as f64 * self.h],
        }
    }

    /// Edges on one side of the grid, ordered by increasing tangential coordinate.
    pub fn side_edges(&self, side: Side) -> Vec<SideEdge> {
        let h = self.h;
        let mk = |k: usize, e: usize| SideEdge { edge: e, s: (k as f64 + 0.5) * h };
        match side {
            Side::Left => (0..self.ny).map(|j| mk(j, self.x_edge(0, j))).collect(),
            Side::Right => (0..self.ny).map(|j| mk(j, self.x_edge(self.nx, j))).collect(),
            Side::Bottom => (0..self.nx).map(|i| mk(i, self.y_edge(i, 0))).collect(),
            Side::Top => (0..self.nx).map(|i| mk(i, self.y_edge(i, self.ny))).collect(),
        }
    }

    /// All boundary edges, side by side in the order of [`Side::ALL`].
    pub fn boundary_edges(&self) -> Vec<(Side, usize)> {
        Side::ALL
            .iter()
            .flat_map(|&s| self.side_edges(s).into_iter().map(move |se| (s, se.edge)))
            .collect()
    }

    /// Side of a boundary edge, `None` for interior edges.
    pub fn boundary_side(&self, e: usize) -> Option<Side> {
        let (axis, i, j) = self.edge_ij(e);
        match axis {
            Axis::X if i == 0 => Some(Side::Left),
            Axis::X if i == self.nx => Some(Side::Right),
            Axis::Y if j == 0 => Some(Side::Bottom),
            Axis::Y if j == self.ny => Some(Side::Top),
            _ => None,
        }
    }

    pub fn side_length(&self, side: Side) -> f64 {
        match side.axis() {
            Axis::X => self.ny as f64 * self.h,
            Axis::Y => self.nx as f64 * self.h,
        }
    }
}

/// Rectangular block of cells `[i0, i0 + w) x [j0, j0 + hgt)` of a parent grid.
///
/// The box carries its own local [`Grid`] (same `h`, shifted origin) so the
/// single-grid solver can run on it unchanged.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxRegion {
    pub i0: usize,
    pub j0: usize,
    pub w: usize,
    pub hgt: usize,
    parent_nx: usize,
    parent_ny: usize,
    local: Grid,
}

pub fn extract_box(grid: &Grid, i0: usize, j0: usize, w: usize, hgt: usize) -> Result<BoxRegion, MeshError> {
    BoxRegion::new(grid, i0, j0, w, hgt)
}

impl BoxRegion {
    pub fn new(grid: &Grid, i0: usize, j0: usize, w: usize, hgt: usize) -> Result<Self, MeshError> {
        if w == 0 || hgt == 0 || i0 + w > grid.nx || j0 + hgt > grid.ny {
            return Err(MeshError::InvalidArgument(format!(
                "box ({i0},{j0},{w},{hgt}) outside {}x{} grid",
                grid.nx, grid.ny
            )));
        }
        let o = grid.origin;
        let local = Grid::new(w, hgt, grid.h, [o[0] + i0 as f64 * grid.h, o[1] + j0 as f64 * grid.h])?;
        Ok(Self { i0, j0, w, hgt, parent_nx: grid.nx, parent_ny: grid.ny, local })
    }

    pub fn grid(&self) -> &Grid {
        &self.local
    }

    pub fn num_cells(&self) -> usize {
        self.w * self.hgt
    }

    pub fn contains_cell(&self, gi: usize, gj: usize) -> bool {
        gi >= self.i0 && gi < self.i0 + self.w && gj >= self.j0 && gj < self.j0 + self.hgt
    }

    pub fn local_to_global_cell(&self, c: usize) -> usize {
        let (i, j) = self.local.cell_ij(c);
        (self.j0 + j) * self.parent_nx + self.i0 + i
    }

    pub fn global_to_local_cell(&self, gc: usize) -> Option<usize> {
        let (gi, gj) = (gc % self.parent_nx, gc / self.parent_nx);
        self.contains_cell(gi, gj).then(|| self.local.cell_id(gi - self.i0, gj - self.j0))
    }

    pub fn local_to_global_edge(&self, e: usize) -> usize {
        let (axis, i, j) = self.local.edge_ij(e);
        let (gi, gj) = (self.i0 + i, self.j0 + j);
        match axis {
            Axis::X => gj * (self.parent_nx + 1) + gi,
            Axis::Y => (self.parent_nx + 1) * self.parent_ny + gj * self.parent_nx + gi,
        }
    }

    pub fn global_to_local_edge(&self, ge: usize) -> Option<usize> {
        let nxe = (self.parent_nx + 1) * self.parent_ny;
        if ge < nxe {
            let (gi, gj) = (ge % (self.parent_nx + 1), ge / (self.parent_nx + 1));
            let inside = gi >= self.i0 && gi <= self.i0 + self.w && gj >= self.j0 && gj < self.j0 + self.hgt;
            inside.then(|| self.local.x_edge(gi - self.i0, gj - self.j0))
        } else {
            let r = ge - nxe;
            let (gi, gj) = (r % self.parent_nx, r / self.parent_nx);
            let inside = gi >= self.i0 && gi < self.i0 + self.w && gj >= self.j0 && gj <= self.j0 + self.hgt;
            inside.then(|| self.local.y_edge(gi - self.i0, gj - self.j0))
        }
    }

    /// Whether a side of the box lies on the boundary of the parent grid.
    pub fn side_on_parent_boundary(&self, side: Side) -> bool {
        match side {
            Side::Left => self.i0 == 0,
            Side::Right => self.i0 + self.w == self.parent_nx,
            Side::Bottom => self.j0 == 0,
            Side::Top => self.j0 + self.hgt == self.parent_ny,
        }
    }

    /// Local boundary edges of one side, see [`Grid::side_edges`].
    pub fn side_edges(&self, side: Side) -> Vec<SideEdge> {
        self.local.side_edges(side)
    }

    /// Local boundary edges grouped by side.
    pub fn boundary_edges(&self) -> Vec<(Side, usize)> {
        self.local.boundary_edges()
    }

    /// Exclusive upper cell indices `(i1, j1)` in the parent grid.
    pub fn upper(&self) -> (usize, usize) {
        (self.i0 + self.w, self.j0 + self.hgt)
    }
}

pub fn side_edges(region: &BoxRegion, side: Side) -> Vec<SideEdge> {
    region.side_edges(side)
}
