//! Box solvers with Robin closures on the parts of the box boundary that lie
//! inside the domain.
//!
//! A [`RegionSolver`] is assembled and factorized once for a box (a subdomain
//! or an oversampled box) and a Robin parameter `alpha`; every further solve
//! is a pair of triangular sweeps.

use crate::darcy::{assemble, AssembledSystem, Closure, Factorization, LocalFields};
use crate::error::SolverError;
use crate::mesh::BoxRegion;
use crate::problem::{BoundaryCondition, DarcyProblem};

#[derive(Clone, Debug)]
pub struct RegionSolver {
    region: BoxRegion,
    alpha: f64,
    sys: AssembledSystem,
    fact: Factorization,
    source: Vec<f64>,
    zeros: Vec<f64>,
    /// Global boundary data (`g` or `z`) per boundary slot, zero on Robin slots.
    global_data: Vec<f64>,
    /// Boundary slots carrying a Robin closure, in slot order.
    robin_slots: Vec<usize>,
    robin_index: Vec<Option<usize>>,
    robin_beta: Vec<f64>,
}

impl RegionSolver {
    /// Robin parameter on an inner box edge is `alpha * coarse_h / K_H`.
    pub fn new(problem: &DarcyProblem, region: &BoxRegion, coarse_h: f64, alpha: f64) -> Result<Self, SolverError> {
        let grid = region.grid();
        let k_cell: Vec<f64> =
            (0..grid.num_cells()).map(|c| problem.perm.get(region.local_to_global_cell(c))).collect();
        let k_edge: Vec<f64> =
            (0..grid.num_edges()).map(|e| problem.k_h[region.local_to_global_edge(e)]).collect();
        let source: Vec<f64> =
            (0..grid.num_cells()).map(|c| problem.source[region.local_to_global_cell(c)]).collect();
        let bedges = grid.boundary_edges();
        let mut closures = Vec::with_capacity(bedges.len());
        let mut global_data = Vec::with_capacity(bedges.len());
        let mut robin_slots = Vec::new();
        let mut robin_index = vec![None; bedges.len()];
        let mut robin_beta = Vec::new();
        for (slot, &(_, le)) in bedges.iter().enumerate() {
            let ge = region.local_to_global_edge(le);
            if problem.grid.edge(ge).is_boundary() {
                match problem.bc.get(ge).expect("validated boundary spec") {
                    BoundaryCondition::Dirichlet(g) => {
                        closures.push(Closure::Dirichlet);
                        global_data.push(g);
                    }
                    BoundaryCondition::Neumann(z) => {
                        closures.push(Closure::Neumann);
                        global_data.push(z);
                    }
                }
            } else {
                let beta = alpha * coarse_h / problem.k_h[ge];
                closures.push(Closure::Robin { beta });
                global_data.push(0.0);
                robin_index[slot] = Some(robin_slots.len());
                robin_slots.push(slot);
                robin_beta.push(beta);
            }
        }
        let sys = assemble(grid, &k_cell, &k_edge, &closures)?;
        let fact = sys.factorize()?;
        Ok(Self {
            region: region.clone(),
            alpha,
            sys,
            fact,
            source,
            zeros: vec![0.0; grid.num_cells()],
            global_data,
            robin_slots,
            robin_index,
            robin_beta,
        })
    }

    pub fn region(&self) -> &BoxRegion {
        &self.region
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn system(&self) -> &AssembledSystem {
        &self.sys
    }

    pub fn num_robin(&self) -> usize {
        self.robin_slots.len()
    }

    /// Boundary slot of every Robin edge, in the order expected by `robin` data.
    pub fn robin_slots(&self) -> &[usize] {
        &self.robin_slots
    }

    pub fn robin_beta(&self) -> &[f64] {
        &self.robin_beta
    }

    /// Position in the Robin data vector of the local box edge `le`.
    pub fn robin_position(&self, le: usize) -> Option<usize> {
        self.sys.boundary_slot(le).and_then(|s| self.robin_index[s])
    }

    /// Full boundary data vector: Robin values from `robin`, global data only if `forced`.
    pub fn boundary_data(&self, robin: &[f64], forced: bool) -> Result<Vec<f64>, SolverError> {
        if robin.len() != self.robin_slots.len() {
            return Err(SolverError::Length { got: robin.len(), expected: self.robin_slots.len() });
        }
        let mut data = if forced { self.global_data.clone() } else { vec![0.0; self.global_data.len()] };
        for (&slot, &v) in self.robin_slots.iter().zip(robin) {
            data[slot] = v;
        }
        Ok(data)
    }

    /// Solves with Robin data `robin`. With `forced` the global source and
    /// boundary data are active, otherwise they are zero. Returns the fields
    /// and the full boundary data used.
    pub fn solve(&self, robin: &[f64], forced: bool) -> Result<(LocalFields, Vec<f64>), SolverError> {
        let data = self.boundary_data(robin, forced)?;
        let source = if forced { &self.source } else { &self.zeros };
        let pressure = self.fact.solve(&self.sys.rhs(source, &data)?)?;
        let flux = self.sys.recover_fluxes(&pressure, &data);
        Ok((LocalFields { pressure, flux }, data))
    }

    pub fn solve_homogeneous(&self, robin: &[f64]) -> Result<LocalFields, SolverError> {
        Ok(self.solve(robin, false)?.0)
    }

    pub fn solve_forced(&self, robin: &[f64]) -> Result<LocalFields, SolverError> {
        Ok(self.solve(robin, true)?.0)
    }

    /// Restriction of box fields to a sub-box of the same parent grid.
    pub fn restrict(&self, fields: &LocalFields, target: &BoxRegion) -> LocalFields {
        restrict(&self.region, fields, target)
    }
}

/// Copies fields living on `from` onto the smaller box `to`.
///
/// # Panics
/// If `to` is not contained in `from`.
pub fn restrict(from: &BoxRegion, fields: &LocalFields, to: &BoxRegion) -> LocalFields {
    let tg = to.grid();
    let pressure = (0..tg.num_cells())
        .map(|c| {
            let lc = from.global_to_local_cell(to.local_to_global_cell(c)).expect("target box inside source box");
            fields.pressure[lc]
        })
        .collect();
    let flux = (0..tg.num_edges())
        .map(|e| {
            let le = from.global_to_local_edge(to.local_to_global_edge(e)).expect("target box inside source box");
            fields.flux[le]
        })
        .collect();
    LocalFields { pressure, flux }
}
