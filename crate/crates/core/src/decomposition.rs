//! Structured non-overlapping partitions, their skeleton, and the oversampled
//! (overlapping) boxes used for basis construction and smoothing.

use crate::error::DecompositionError;
use crate::mesh::{Axis, BoxRegion, Grid, Side};

/// Interface between two adjacent subdomains.
///
/// `lo` is the smaller subdomain index; it sits left of (or below) `hi`, so the
/// global normal `ň` points from `lo` into `hi` and coincides with `e_axis`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoarseFace {
    pub id: usize,
    pub axis: Axis,
    pub lo: usize,
    pub hi: usize,
    /// Global fine edges ordered by increasing tangential coordinate.
    pub edges: Vec<usize>,
}

impl CoarseFace {
    /// Side of subdomain `sub` on which this face lies.
    pub fn side_of(&self, sub: usize) -> Option<Side> {
        match (self.axis, sub) {
            (Axis::X, s) if s == self.lo => Some(Side::Right),
            (Axis::X, s) if s == self.hi => Some(Side::Left),
            (Axis::Y, s) if s == self.lo => Some(Side::Top),
            (Axis::Y, s) if s == self.hi => Some(Side::Bottom),
            _ => None,
        }
    }

    /// `ň^i . ň` for subdomain `sub`: +1 for the smaller index, -1 for the other.
    pub fn sign_for(&self, sub: usize) -> f64 {
        if sub == self.lo {
            1.0
        } else {
            -1.0
        }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct Partition {
    grid: Grid,
    mx: usize,
    my: usize,
    n_loc: (usize, usize),
    subdomains: Vec<BoxRegion>,
    faces: Vec<CoarseFace>,
    /// Faces of each subdomain's interface, ascending face id.
    faces_of: Vec<Vec<usize>>,
    /// Owning subdomain of every global cell.
    owner: Vec<usize>,
    /// Face id per global edge for skeleton edges.
    face_of_edge: Vec<Option<usize>>,
}

pub fn build_partition(grid: &Grid, mx: usize, my: usize) -> Result<Partition, DecompositionError> {
    Partition::new(grid, mx, my)
}

impl Partition {
    pub fn new(grid: &Grid, mx: usize, my: usize) -> Result<Self, DecompositionError> {
        if mx == 0 || grid.nx() % mx != 0 {
            return Err(DecompositionError::NotDivisible { axis: 'x', n: grid.nx(), m: mx });
        }
        if my == 0 || grid.ny() % my != 0 {
            return Err(DecompositionError::NotDivisible { axis: 'y', n: grid.ny(), m: my });
        }
        let (wx, wy) = (grid.nx() / mx, grid.ny() / my);
        let mut subdomains = Vec::with_capacity(mx * my);
        for bj in 0..my {
            for bi in 0..mx {
                subdomains.push(BoxRegion::new(grid, bi * wx, bj * wy, wx, wy)?);
            }
        }
        let mut faces = Vec::new();
        for bj in 0..my {
            for bi in 0..mx.saturating_sub(1) {
                let i = (bi + 1) * wx;
                let edges = (0..wy).map(|k| grid.x_edge(i, bj * wy + k)).collect();
                faces.push(CoarseFace { id: faces.len(), axis: Axis::X, lo: bj * mx + bi, hi: bj * mx + bi + 1, edges });
            }
        }
        for bj in 0..my.saturating_sub(1) {
            for bi in 0..mx {
                let j = (bj + 1) * wy;
                let edges = (0..wx).map(|k| grid.y_edge(bi * wx + k, j)).collect();
                faces.push(CoarseFace { id: faces.len(), axis: Axis::Y, lo: bj * mx + bi, hi: (bj + 1) * mx + bi, edges });
            }
        }
        let mut faces_of = vec![Vec::new(); mx * my];
        let mut face_of_edge = vec![None; grid.num_edges()];
        for f in &faces {
            faces_of[f.lo].push(f.id);
            faces_of[f.hi].push(f.id);
            for &e in &f.edges {
                face_of_edge[e] = Some(f.id);
            }
        }
        for list in &mut faces_of {
            list.sort_unstable();
        }
        let owner = (0..grid.num_cells())
            .map(|c| {
                let (i, j) = grid.cell_ij(c);
                (j / wy) * mx + i / wx
            })
            .collect();
        Ok(Self { grid: grid.clone(), mx, my, n_loc: (wx, wy), subdomains, faces, faces_of, owner, face_of_edge })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn counts(&self) -> (usize, usize) {
        (self.mx, self.my)
    }

    /// Cells per subdomain along x and y.
    pub fn local_size(&self) -> (usize, usize) {
        self.n_loc
    }

    /// Subdomain size `H` (length of the longer subdomain side).
    pub fn coarse_h(&self) -> f64 {
        self.n_loc.0.max(self.n_loc.1) as f64 * self.grid.h()
    }

    pub fn len(&self) -> usize {
        self.subdomains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subdomains.is_empty()
    }

    pub fn subdomain(&self, i: usize) -> &BoxRegion {
        &self.subdomains[i]
    }

    pub fn subdomains(&self) -> &[BoxRegion] {
        &self.subdomains
    }

    pub fn block_index(&self, i: usize) -> (usize, usize) {
        (i % self.mx, i / self.mx)
    }

    pub fn faces(&self) -> &[CoarseFace] {
        &self.faces
    }

    pub fn face(&self, f: usize) -> &CoarseFace {
        &self.faces[f]
    }

    /// Faces forming `Γ_i`, ascending.
    pub fn faces_of(&self, i: usize) -> &[usize] {
        &self.faces_of[i]
    }

    pub fn owner_of_cell(&self, c: usize) -> usize {
        self.owner[c]
    }

    pub fn face_of_edge(&self, e: usize) -> Option<usize> {
        self.face_of_edge[e]
    }

    /// All skeleton fine edges, face by face.
    pub fn skeleton(&self) -> Vec<usize> {
        self.faces.iter().flat_map(|f| f.edges.iter().copied()).collect()
    }

    /// Fine edges of `Γ_i`, face by face.
    pub fn gamma_edges(&self, i: usize) -> Vec<usize> {
        self.faces_of[i].iter().flat_map(|&f| self.faces[f].edges.iter().copied()).collect()
    }
}

#[derive(Clone, Debug)]
pub struct OversampledPartition {
    base: Partition,
    l: usize,
    hats: Vec<BoxRegion>,
    colors: Vec<usize>,
}

pub fn oversample(p: &Partition, l: usize) -> Result<OversampledPartition, DecompositionError> {
    OversampledPartition::new(p.clone(), l)
}

impl OversampledPartition {
    pub fn new(base: Partition, l: usize) -> Result<Self, DecompositionError> {
        let (wx, wy) = base.local_size();
        let n = wx.min(wy);
        if l > 0 && 2 * l >= n {
            return Err(DecompositionError::OversamplingTooLarge { l, n });
        }
        let g = base.grid().clone();
        let hats = base
            .subdomains()
            .iter()
            .map(|b| {
                let i0 = b.i0.saturating_sub(l);
                let j0 = b.j0.saturating_sub(l);
                let i1 = (b.i0 + b.w + l).min(g.nx());
                let j1 = (b.j0 + b.hgt + l).min(g.ny());
                BoxRegion::new(&g, i0, j0, i1 - i0, j1 - j0)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let colors = (0..base.len())
            .map(|i| {
                let (bi, bj) = base.block_index(i);
                2 * (bi % 2) + (bj % 2)
            })
            .collect();
        let op = Self { base, l, hats, colors };
        op.check_coloring()?;
        Ok(op)
    }

    /// Same-colored boxes must have disjoint closures.
    fn check_coloring(&self) -> Result<(), DecompositionError> {
        for a in 0..self.hats.len() {
            for b in a + 1..self.hats.len() {
                if self.colors[a] != self.colors[b] {
                    continue;
                }
                let (ha, hb) = (&self.hats[a], &self.hats[b]);
                let (a1, b1) = (ha.upper(), hb.upper());
                let apart_x = a1.0 < hb.i0 || b1.0 < ha.i0;
                let apart_y = a1.1 < hb.j0 || b1.1 < ha.j0;
                if !(apart_x || apart_y) {
                    return Err(DecompositionError::Coloring(a, b));
                }
            }
        }
        Ok(())
    }

    pub fn base(&self) -> &Partition {
        &self.base
    }

    pub fn oversampling(&self) -> usize {
        self.l
    }

    pub fn hat(&self, i: usize) -> &BoxRegion {
        &self.hats[i]
    }

    pub fn color(&self, i: usize) -> usize {
        self.colors[i]
    }

    pub fn num_colors(&self) -> usize {
        self.colors.iter().copied().max().map_or(0, |c| c + 1)
    }

    /// Subdomains of one color, ascending.
    pub fn color_class(&self, color: usize) -> Vec<usize> {
        (0..self.colors.len()).filter(|&i| self.colors[i] == color).collect()
    }

    /// All `j != i` whose subdomain overlaps `Ω̂_i` in cells or along a face.
    pub fn neighbors_under_overlap(&self, i: usize) -> Result<Vec<usize>, DecompositionError> {
        if i >= self.hats.len() {
            return Err(DecompositionError::Index(i));
        }
        let hat = &self.hats[i];
        let (h1x, h1y) = hat.upper();
        Ok((0..self.base.len())
            .filter(|&j| j != i)
            .filter(|&j| {
                let s = self.base.subdomain(j);
                let (s1x, s1y) = s.upper();
                let ox = h1x.min(s1x) as i64 - hat.i0.max(s.i0) as i64;
                let oy = h1y.min(s1y) as i64 - hat.j0.max(s.j0) as i64;
                ox >= 0 && oy >= 0 && (ox > 0 || oy > 0)
            })
            .collect())
    }
}
