//! Cell-centered two-point flux kernel on a single grid.
//!
//! Unknowns are cell pressures. Every cell row states the flux balance
//! `sum_e h (u . n_out)_e = f h^2`. Interior edges use the transmissibility
//! `K_H` (harmonic mean); boundary edges carry one of three closures:
//!
//! * Robin `-beta u.n + pi = g_R`, giving `u.n = (p_c - g_R) / (beta + h / (2 K_c))`,
//! * Dirichlet, which is the Robin closure with `beta = 0`,
//! * Neumann `u.n = z`, moved to the right-hand side.

use crate::error::SolverError;
use crate::mesh::{Axis, Grid, Side};
use crate::problem::{BoundaryCondition, DarcyProblem};

/// Boundary closure of one region boundary edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Closure {
    Dirichlet,
    Neumann,
    Robin { beta: f64 },
}

impl Closure {
    fn beta(self) -> Option<f64> {
        match self {
            Closure::Dirichlet => Some(0.0),
            Closure::Robin { beta } => Some(beta),
            Closure::Neumann => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryEdge {
    pub edge: usize,
    pub cell: usize,
    pub side: Side,
    pub closure: Closure,
    /// `h / (beta + h / (2 K_c))` for Dirichlet/Robin, zero for Neumann.
    pub coef: f64,
}

/// Symmetric TPFA matrix of one region together with its closure data.
#[derive(Clone, Debug)]
pub struct AssembledSystem {
    grid: Grid,
    k_cell: Vec<f64>,
    k_edge: Vec<f64>,
    diag: Vec<f64>,
    boundary: Vec<BoundaryEdge>,
    /// Position of each local edge in `boundary`, if it is a boundary edge.
    boundary_slot: Vec<Option<usize>>,
    nullspace: bool,
}

/// Assembles the pressure system of `grid`.
///
/// `k_cell` holds one permeability per cell, `k_edge` the harmonic value per
/// edge (only interior entries are read) and `closures` one closure per
/// boundary edge in the order of [`Grid::boundary_edges`].
pub fn assemble(grid: &Grid, k_cell: &[f64], k_edge: &[f64], closures: &[Closure]) -> Result<AssembledSystem, SolverError> {
    let bedges = grid.boundary_edges();
    if closures.len() != bedges.len() {
        return Err(SolverError::ClosureCount { got: closures.len(), expected: bedges.len() });
    }
    if k_cell.len() != grid.num_cells() {
        return Err(SolverError::Length { got: k_cell.len(), expected: grid.num_cells() });
    }
    if k_edge.len() != grid.num_edges() {
        return Err(SolverError::Length { got: k_edge.len(), expected: grid.num_edges() });
    }
    let h = grid.h();
    let mut diag = vec![0.0; grid.num_cells()];
    for e in 0..grid.num_edges() {
        if let [Some(a), Some(b)] = grid.edge(e).cells {
            diag[a] += k_edge[e];
            diag[b] += k_edge[e];
        }
    }
    let mut boundary = Vec::with_capacity(bedges.len());
    let mut boundary_slot = vec![None; grid.num_edges()];
    let mut nullspace = true;
    for (slot, (&(side, e), &closure)) in bedges.iter().zip(closures).enumerate() {
        let cell = grid.edge(e).inner_cell().expect("boundary edge has one cell");
        let coef = match closure.beta() {
            Some(beta) => {
                if !(beta >= 0.0) || !beta.is_finite() {
                    return Err(SolverError::BadClosure { edge: e, reason: format!("beta = {beta}") });
                }
                nullspace = false;
                h / (beta + h / (2.0 * k_cell[cell]))
            }
            None => 0.0,
        };
        diag[cell] += coef;
        boundary.push(BoundaryEdge { edge: e, cell, side, closure, coef });
        boundary_slot[e] = Some(slot);
    }
    Ok(AssembledSystem {
        grid: grid.clone(),
        k_cell: k_cell.to_vec(),
        k_edge: k_edge.to_vec(),
        diag,
        boundary,
        boundary_slot,
        nullspace,
    })
}

impl AssembledSystem {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn size(&self) -> usize {
        self.diag.len()
    }

    pub fn has_nullspace(&self) -> bool {
        self.nullspace
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn boundary(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    pub fn boundary_slot(&self, e: usize) -> Option<usize> {
        self.boundary_slot[e]
    }

    pub fn k_cell(&self) -> &[f64] {
        &self.k_cell
    }

    /// Off-diagonal couplings `(a, b, -K_H)` over interior edges.
    fn couplings(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.grid.num_edges()).filter_map(move |e| match self.grid.edge(e).cells {
            [Some(a), Some(b)] => Some((a, b, -self.k_edge[e])),
            _ => None,
        })
    }

    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self.diag.iter().zip(p).map(|(d, x)| d * x).collect();
        for (a, b, v) in self.couplings() {
            out[a] += v * p[b];
            out[b] += v * p[a];
        }
        out
    }

    /// Right-hand side for source `f` and boundary data aligned with
    /// [`AssembledSystem::boundary`]: `g` (Dirichlet), `g_R` (Robin) or the
    /// outward normal velocity `z` (Neumann).
    pub fn rhs(&self, source: &[f64], data: &[f64]) -> Result<Vec<f64>, SolverError> {
        if source.len() != self.size() {
            return Err(SolverError::Length { got: source.len(), expected: self.size() });
        }
        if data.len() != self.boundary.len() {
            return Err(SolverError::Length { got: data.len(), expected: self.boundary.len() });
        }
        let h = self.grid.h();
        let mut b: Vec<f64> = source.iter().map(|f| f * h * h).collect();
        for (be, &v) in self.boundary.iter().zip(data) {
            match be.closure {
                Closure::Neumann => b[be.cell] -= h * v,
                _ => b[be.cell] += be.coef * v,
            }
        }
        Ok(b)
    }

    /// Axis-aligned edge velocities from a pressure solution.
    pub fn recover_fluxes(&self, p: &[f64], data: &[f64]) -> Vec<f64> {
        let h = self.grid.h();
        let mut u = vec![0.0; self.grid.num_edges()];
        for (e, ue) in u.iter_mut().enumerate() {
            if let [Some(a), Some(b)] = self.grid.edge(e).cells {
                *ue = -self.k_edge[e] * (p[b] - p[a]) / h;
            }
        }
        for (be, &v) in self.boundary.iter().zip(data) {
            let outward = match be.closure {
                Closure::Neumann => v,
                _ => be.coef / h * (p[be.cell] - v),
            };
            u[be.edge] = outward * be.side.outward_sign();
        }
        u
    }

    /// Pressure trace on an edge.
    ///
    /// Interior edges use the permeability-weighted average of the two cells,
    /// which coincides with the half-cell reconstruction `p_c - (u.n_c) h / (2 K_c)`
    /// from either side. Dirichlet edges return `g`, Robin edges `g_R + beta u.n`.
    pub fn edge_pressure_trace(&self, p: &[f64], u: &[f64], data: &[f64], e: usize) -> Result<f64, SolverError> {
        match self.grid.edge(e).cells {
            [Some(a), Some(b)] => Ok(weighted_trace(self.k_cell[a], p[a], self.k_cell[b], p[b])),
            _ => {
                let slot = self.boundary_slot[e].expect("boundary edge registered");
                let be = &self.boundary[slot];
                let outward = u[e] * be.side.outward_sign();
                match be.closure {
                    Closure::Dirichlet => Ok(data[slot]),
                    Closure::Robin { beta } => Ok(data[slot] + beta * outward),
                    Closure::Neumann => Err(SolverError::NeumannTrace(e)),
                }
            }
        }
    }

    pub fn factorize(&self) -> Result<Factorization, SolverError> {
        Factorization::new(self, self.nullspace)
    }
}

#[inline]
pub fn weighted_trace(k_l: f64, p_l: f64, k_r: f64, p_r: f64) -> f64 {
    (k_l * p_l + k_r * p_r) / (k_l + k_r)
}

/// Half-cell pressure reconstruction at an edge of cell `c` given the
/// velocity leaving `c` through that edge.
#[inline]
pub fn one_sided_trace(p_c: f64, k_c: f64, outward: f64, h: f64) -> f64 {
    p_c - outward * h / (2.0 * k_c)
}

/// Banded `L D L^T` factorization of an [`AssembledSystem`].
///
/// Cells are reordered along the shorter grid axis so the half-bandwidth is
/// `min(nx, ny)`. For singular pure-Neumann systems one dof is pinned to zero
/// and solutions are shifted to zero mean.
#[derive(Clone, Debug)]
pub struct Factorization {
    n: usize,
    bw: usize,
    /// `order[cell]` is the position of `cell` in the banded ordering.
    order: Vec<usize>,
    lower: Vec<f64>,
    d: Vec<f64>,
    pinned: Option<usize>,
}

pub fn factorize(sys: &AssembledSystem) -> Result<Factorization, SolverError> {
    sys.factorize()
}

impl Factorization {
    /// Factorizes `sys`; with `constrain` the first dof is pinned.
    pub fn new(sys: &AssembledSystem, constrain: bool) -> Result<Self, SolverError> {
        let g = &sys.grid;
        let (nx, ny) = (g.nx(), g.ny());
        let n = sys.size();
        let (bw, order): (usize, Vec<usize>) = if nx <= ny {
            (nx, (0..n).collect())
        } else {
            (ny, (0..n).map(|c| (c % nx) * ny + c / nx).collect())
        };
        let pinned = constrain.then_some(0usize);
        let mut lower = vec![0.0; n * bw];
        let mut d = vec![0.0; n];
        for c in 0..n {
            d[order[c]] = sys.diag[c];
        }
        for (a, b, v) in sys.couplings() {
            let (ra, rb) = (order[a], order[b]);
            if pinned.is_some_and(|p| p == ra || p == rb) {
                continue;
            }
            let (r, col) = if ra > rb { (ra, rb) } else { (rb, ra) };
            lower[r * bw + (col + bw - r)] = v;
        }
        if let Some(p) = pinned {
            d[p] = 1.0;
        }
        let scale: Vec<f64> = d.clone();
        let mut w = vec![0.0; bw];
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            // L[i][j] = (A[i][j] - sum_k L[i][k] D[k] L[j][k]) / D[j]
            for j in j0..i {
                let k0 = j0.max(j.saturating_sub(bw));
                let mut s = lower[i * bw + (j + bw - i)];
                for k in k0..j {
                    s -= w[k + bw - i] * lower[j * bw + (k + bw - j)];
                }
                w[j + bw - i] = s;
                lower[i * bw + (j + bw - i)] = s / d[j];
            }
            let mut dii = d[i];
            for j in j0..i {
                dii -= w[j + bw - i] * lower[i * bw + (j + bw - i)];
            }
            if !(dii > 1e-12 * scale[i].abs()) {
                let row = order.iter().position(|&o| o == i).unwrap_or(i);
                return Err(SolverError::Pivot { row, pivot: dii });
            }
            d[i] = dii;
        }
        Ok(Self { n, bw, order, lower, d, pinned })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, SolverError> {
        if rhs.len() != self.n {
            return Err(SolverError::Length { got: rhs.len(), expected: self.n });
        }
        let (n, bw) = (self.n, self.bw);
        let mut y = vec![0.0; n];
        for (c, &b) in rhs.iter().enumerate() {
            y[self.order[c]] = b;
        }
        if let Some(p) = self.pinned {
            y[p] = 0.0;
        }
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            let row = &self.lower[i * bw..(i + 1) * bw];
            let mut s = y[i];
            for j in j0..i {
                s -= row[j + bw - i] * y[j];
            }
            y[i] = s;
        }
        for (yi, di) in y.iter_mut().zip(&self.d) {
            *yi /= di;
        }
        for i in (0..n).rev() {
            let yi = y[i];
            let j0 = i.saturating_sub(bw);
            let row = &self.lower[i * bw..(i + 1) * bw];
            for j in j0..i {
                y[j] -= row[j + bw - i] * yi;
            }
        }
        let mut x: Vec<f64> = self.order.iter().map(|&o| y[o]).collect();
        if self.pinned.is_some() {
            let mean = x.iter().sum::<f64>() / n as f64;
            x.iter_mut().for_each(|v| *v -= mean);
        }
        Ok(x)
    }
}

pub fn solve(fact: &Factorization, rhs: &[f64]) -> Result<Vec<f64>, SolverError> {
    fact.solve(rhs)
}

/// Cell pressures and axis-aligned edge velocities on one grid or box.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalFields {
    pub pressure: Vec<f64>,
    pub flux: Vec<f64>,
}

/// Fine-grid reference solve of a whole problem.
pub fn solve_fine(problem: &DarcyProblem) -> Result<LocalFields, SolverError> {
    let grid = &problem.grid;
    let mut closures = Vec::new();
    let mut data = Vec::new();
    for (_, e) in grid.boundary_edges() {
        match problem.bc.get(e).expect("validated boundary spec") {
            BoundaryCondition::Dirichlet(g) => {
                closures.push(Closure::Dirichlet);
                data.push(g);
            }
            BoundaryCondition::Neumann(z) => {
                closures.push(Closure::Neumann);
                data.push(z);
            }
        }
    }
    let sys = assemble(grid, problem.perm.values(), &problem.k_h, &closures)?;
    let fact = sys.factorize()?;
    let pressure = fact.solve(&sys.rhs(&problem.source, &data)?)?;
    let flux = sys.recover_fluxes(&pressure, &data);
    Ok(LocalFields { pressure, flux })
}

/// Signed flux balance `sum_e h (u . n_out)_e - f h^2` of every cell.
pub fn cell_residuals(grid: &Grid, flux: &[f64], source: &[f64]) -> Vec<f64> {
    let h = grid.h();
    (0..grid.num_cells())
        .map(|c| {
            let [l, r, b, t] = grid.cell_edges(c);
            h * (flux[r] - flux[l] + flux[t] - flux[b]) - source[c] * h * h
        })
        .collect()
}

/// Axis of the normal of local edge `e`.
pub fn edge_axis(grid: &Grid, e: usize) -> Axis {
    grid.edge(e).axis
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{make_homogeneous_problem, BoundarySpec, PermField};
    use proptest::prelude::*;

    fn closures_for(grid: &Grid, f: impl Fn(Side) -> Closure) -> Vec<Closure> {
        grid.boundary_edges().into_iter().map(|(s, _)| f(s)).collect()
    }

    fn two_cell_system() -> (AssembledSystem, Vec<f64>) {
        let g = Grid::new(2, 1, 0.5, [0.0; 2]).unwrap();
        let k = vec![1.0; 2];
        let ke = vec![1.0; g.num_edges()];
        let cl = closures_for(&g, |s| match s {
            Side::Left | Side::Right => Closure::Dirichlet,
            _ => Closure::Neumann,
        });
        let data: Vec<f64> = g
            .boundary_edges()
            .into_iter()
            .map(|(s, _)| if s == Side::Left { 1.0 } else { 0.0 })
            .collect();
        (assemble(&g, &k, &ke, &cl).unwrap(), data)
    }

    #[test]
    fn single_cell_zero_dirichlet() {
        let g = Grid::new(1, 1, 1.0, [0.0; 2]).unwrap();
        let sys = assemble(&g, &[1.0], &[1.0; 4], &[Closure::Dirichlet; 4]).unwrap();
        // four half-cell conductances 2K/h scaled by h
        assert!((sys.diag()[0] - 8.0).abs() < 1e-15);
        let p = sys.factorize().unwrap().solve(&sys.rhs(&[0.0], &[0.0; 4]).unwrap()).unwrap();
        assert_eq!(p, vec![0.0]);
    }

    #[test]
    fn two_cell_hand_oracle() {
        // rows: 2(p0 - 1) + (p0 - p1) = 0 and (p1 - p0) + 2 p1 = 0
        let (sys, data) = two_cell_system();
        let p = sys.factorize().unwrap().solve(&sys.rhs(&[0.0; 2], &data).unwrap()).unwrap();
        assert!((p[0] - 0.75).abs() < 1e-14 && (p[1] - 0.25).abs() < 1e-14);
        let u = sys.recover_fluxes(&p, &data);
        let g = sys.grid();
        for i in 0..=2 {
            assert!((u[g.x_edge(i, 0)] - 1.0).abs() < 1e-14, "edge {i}: {}", u[g.x_edge(i, 0)]);
        }
        let pi = sys.edge_pressure_trace(&p, &u, &data, g.x_edge(1, 0)).unwrap();
        assert!((pi - 0.5).abs() < 1e-14);
        assert_eq!(sys.edge_pressure_trace(&p, &u, &data, g.x_edge(0, 0)).unwrap(), 1.0);
        assert!(matches!(
            sys.edge_pressure_trace(&p, &u, &data, g.y_edge(0, 0)),
            Err(SolverError::NeumannTrace(_))
        ));
    }

    #[test]
    fn pure_neumann_flag_and_constraint() {
        let g = Grid::new(3, 3, 1.0 / 3.0, [0.0; 2]).unwrap();
        let sys = assemble(&g, &[1.0; 9], &vec![1.0; g.num_edges()], &vec![Closure::Neumann; 12]).unwrap();
        assert!(sys.has_nullspace());
        assert!(sys.apply(&[1.0; 9]).iter().all(|v| v.abs() < 1e-14));
        assert!(matches!(Factorization::new(&sys, false), Err(SolverError::Pivot { .. })));
        let fact = sys.factorize().unwrap();
        let mut f = vec![0.0; 9];
        f[0] = 1.0;
        f[8] = -1.0;
        let p = fact.solve(&sys.rhs(&f, &[0.0; 12]).unwrap()).unwrap();
        assert!(p.iter().sum::<f64>().abs() < 1e-13);
        let zero = fact.solve(&sys.rhs(&[0.0; 9], &[0.0; 12]).unwrap()).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn robin_beta_zero_is_dirichlet_bitwise() {
        let g = Grid::new(3, 2, 0.25, [0.0; 2]).unwrap();
        let perm = PermField::random_log_uniform(3, 2, 1e-2, 1e2, 3).unwrap();
        let ke = crate::problem::harmonic_edge_coefficients(&g, &perm);
        let a = assemble(&g, perm.values(), &ke, &closures_for(&g, |_| Closure::Dirichlet)).unwrap();
        let b = assemble(&g, perm.values(), &ke, &closures_for(&g, |_| Closure::Robin { beta: 0.0 })).unwrap();
        assert_eq!(a.diag().iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.diag().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        for (x, y) in a.boundary().iter().zip(b.boundary()) {
            assert_eq!(x.coef.to_bits(), y.coef.to_bits());
        }
    }

    #[test]
    fn factorization_consistency_and_reuse() {
        let g = Grid::new(24, 24, 1.0 / 24.0, [0.0; 2]).unwrap();
        let perm = PermField::random_log_uniform(24, 24, 1e-3, 1e3, 11).unwrap();
        let ke = crate::problem::harmonic_edge_coefficients(&g, &perm);
        let cl = closures_for(&g, |_| Closure::Robin { beta: 0.3 });
        let sys = assemble(&g, perm.values(), &ke, &cl).unwrap();
        let fact = sys.factorize().unwrap();
        let x: Vec<f64> = (1..=g.num_cells()).map(|v| v as f64).collect();
        let back = fact.solve(&sys.apply(&x)).unwrap();
        let err = x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err / g.num_cells() as f64 <= 1e-12, "err {err}");

        // eight right-hand sides through one factorization versus fresh cycles
        for k in 0..8 {
            let data: Vec<f64> = (0..cl.len()).map(|i| ((i * (k + 1)) % 7) as f64 - 3.0).collect();
            let rhs = sys.rhs(&vec![0.0; g.num_cells()], &data).unwrap();
            let reused = fact.solve(&rhs).unwrap();
            let fresh_sys = assemble(&g, perm.values(), &ke, &cl).unwrap();
            let fresh = fresh_sys.factorize().unwrap().solve(&fresh_sys.rhs(&vec![0.0; g.num_cells()], &data).unwrap()).unwrap();
            for (a, b) in reused.iter().zip(&fresh) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn wide_grid_ordering() {
        // nx > ny exercises the column-major band ordering
        let g = Grid::new(9, 3, 0.1, [0.0; 2]).unwrap();
        let perm = PermField::random_log_uniform(9, 3, 0.1, 10.0, 5).unwrap();
        let ke = crate::problem::harmonic_edge_coefficients(&g, &perm);
        let cl = closures_for(&g, |s| if s == Side::Top { Closure::Neumann } else { Closure::Robin { beta: 1.0 } });
        let sys = assemble(&g, perm.values(), &ke, &cl).unwrap();
        let x: Vec<f64> = (0..27).map(|v| (v as f64).sin()).collect();
        let back = sys.factorize().unwrap().solve(&sys.apply(&x)).unwrap();
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn closure_count_checked() {
        let g = Grid::new(2, 2, 0.5, [0.0; 2]).unwrap();
        assert!(matches!(
            assemble(&g, &[1.0; 4], &vec![1.0; g.num_edges()], &[Closure::Neumann; 3]),
            Err(SolverError::ClosureCount { .. })
        ));
        let mut cl = vec![Closure::Neumann; 8];
        cl[0] = Closure::Robin { beta: -1.0 };
        assert!(matches!(assemble(&g, &[1.0; 4], &vec![1.0; g.num_edges()], &cl), Err(SolverError::BadClosure { .. })));
    }

    #[test]
    fn constant_pressure_zero_interior_flux() {
        let g = Grid::new(4, 3, 0.25, [0.0; 2]).unwrap();
        let perm = PermField::random_log_uniform(4, 3, 1e-2, 1e2, 9).unwrap();
        let ke = crate::problem::harmonic_edge_coefficients(&g, &perm);
        let cl = closures_for(&g, |_| Closure::Dirichlet);
        let sys = assemble(&g, perm.values(), &ke, &cl).unwrap();
        let u = sys.recover_fluxes(&[2.5; 12], &vec![2.5; cl.len()]);
        assert!(u.iter().all(|v| v.abs() < 1e-14));
        let i = sys.factorize().unwrap();
        assert!(i.solve(&[0.0; 3]).is_err());
    }

    #[test]
    fn trace_limits() {
        assert!((weighted_trace(1.0, 3.0, 1.0, 3.0) - 3.0).abs() < 1e-15);
        assert!((weighted_trace(1.0, 1.0, 1e12, 5.0) - 5.0).abs() < 1e-10);
    }

    #[test]
    fn fine_solve_conservation_and_trace_consistency() {
        let g = Grid::new(12, 8, 1.0 / 12.0, [0.0; 2]).unwrap();
        let perm = PermField::random_log_uniform(12, 8, 1e-3, 1e3, 21).unwrap();
        let source: Vec<f64> = (0..96).map(|c| ((c * 37) % 11) as f64 - 5.0).collect();
        let bc = BoundarySpec::left_right_dirichlet(&g, 1.0, -2.0);
        let prob = DarcyProblem::new(g.clone(), perm.clone(), source.clone(), bc).unwrap();
        let sol = solve_fine(&prob).unwrap();
        let scale = source.iter().map(|f| f.abs()).fold(1.0, f64::max) * g.h() * g.h();
        for r in cell_residuals(&g, &sol.flux, &source) {
            assert!(r.abs() <= 1e-12 * scale.max(1.0) * 10.0, "residual {r}");
        }
        let h = g.h();
        for e in 0..g.num_edges() {
            if let [Some(a), Some(b)] = g.edge(e).cells {
                let u = sol.flux[e];
                let left = one_sided_trace(sol.pressure[a], perm.get(a), u, h);
                let right = one_sided_trace(sol.pressure[b], perm.get(b), -u, h);
                assert!((left - right).abs() <= 1e-12 * (1.0 + left.abs()));
            }
        }
    }

    #[test]
    fn manufactured_convergence() {
        let mut pairs = Vec::new();
        for m in [2usize, 4, 8] {
            let prob = make_homogeneous_problem(m, 10).unwrap();
            let sol = solve_fine(&prob).unwrap();
            let ex = prob.exact.unwrap();
            let pe = ex.pressure_at_cells(&prob.grid);
            let mp = pe.iter().sum::<f64>() / pe.len() as f64;
            let h = prob.grid.h();
            let ep = pe.iter().zip(&sol.pressure).map(|(a, b)| (a - mp - b).powi(2)).sum::<f64>().sqrt() * h;
            let ue = ex.flux_at_edges(&prob.grid);
            let eu = ue.iter().zip(&sol.flux).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() * h;
            pairs.push((h, ep, eu));
        }
        for w in pairs.windows(2) {
            let sp = (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln();
            let su = (w[0].2 / w[1].2).ln() / (w[0].0 / w[1].0).ln();
            assert!(sp >= 1.8, "pressure slope {sp}");
            assert!(su >= 1.8, "flux slope {su}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn solve_inverts_apply(nx in 1usize..7, ny in 1usize..7, seed in 0u64..1000, beta in 0.0f64..5.0) {
            let g = Grid::new(nx, ny, 0.5, [0.0; 2]).unwrap();
            let perm = PermField::random_log_uniform(nx, ny, 1e-2, 1e2, seed).unwrap();
            let ke = crate::problem::harmonic_edge_coefficients(&g, &perm);
            let cl = closures_for(&g, |s| if s == Side::Bottom { Closure::Neumann } else { Closure::Robin { beta } });
            let sys = assemble(&g, perm.values(), &ke, &cl).unwrap();
            let x: Vec<f64> = (0..g.num_cells()).map(|c| (c as f64 * 0.7).cos()).collect();
            let back = sys.factorize().unwrap().solve(&sys.apply(&x)).unwrap();
            for (a, b) in x.iter().zip(&back) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
