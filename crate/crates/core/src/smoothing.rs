//! Overlapping Robin smoothing of a subdomain-wise solution.
//!
//! One sweep visits the four colors in order. Every subdomain of a color is
//! re-solved on its oversampled box with Robin data read off the current
//! solution just outside the box, and the new fields restricted to `Ω_i`
//! replace the old ones once the whole color is done.

use std::sync::Arc;

use rayon::prelude::*;

use crate::darcy::{one_sided_trace, weighted_trace, LocalFields};
use crate::decomposition::OversampledPartition;
use crate::error::{MrcmError, Result};
use crate::local::RegionSolver;
use crate::mrcm::MultiscaleSolution;
use crate::problem::DarcyProblem;

/// Default smoothing Robin parameter.
pub const DEFAULT_SMOOTHING_ALPHA: f64 = 1.0;

pub struct Smoother<'a> {
    problem: &'a DarcyProblem,
    opart: &'a OversampledPartition,
    solvers: Vec<Arc<RegionSolver>>,
}

impl<'a> Smoother<'a> {
    /// Factorizes the oversampled-box solvers for Robin parameter `alpha`.
    pub fn new(problem: &'a DarcyProblem, opart: &'a OversampledPartition, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(MrcmError::InvalidArgument(format!("smoothing alpha must be positive, got {alpha}")));
        }
        let h_c = opart.base().coarse_h();
        let solvers = (0..opart.base().len())
            .into_par_iter()
            .map(|i| RegionSolver::new(problem, opart.hat(i), h_c, alpha).map(Arc::new))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self { problem, opart, solvers })
    }

    /// Reuses already factorized box solvers, e.g. those of the basis construction.
    pub fn with_solvers(problem: &'a DarcyProblem, opart: &'a OversampledPartition, solvers: Vec<Arc<RegionSolver>>) -> Result<Self> {
        if solvers.len() != opart.base().len() {
            return Err(MrcmError::InvalidArgument(format!(
                "{} box solvers for {} subdomains",
                solvers.len(),
                opart.base().len()
            )));
        }
        for (i, s) in solvers.iter().enumerate() {
            if s.region() != opart.hat(i) {
                return Err(MrcmError::InvalidArgument(format!("solver {i} built on another box")));
            }
        }
        Ok(Self { problem, opart, solvers })
    }

    pub fn alpha(&self) -> f64 {
        self.solvers.first().map_or(DEFAULT_SMOOTHING_ALPHA, |s| s.alpha())
    }

    /// Robin data `-β u.n + π` on the inner boundary of `Ω̂_i`, read from the
    /// subdomain that owns the cell just outside each edge.
    pub fn gather_robin_data(&self, state: &[LocalFields], i: usize) -> Result<Vec<f64>> {
        let partition = self.opart.base();
        let grid = &self.problem.grid;
        let h = grid.h();
        let solver = &self.solvers[i];
        let hat = solver.region();
        let sys = solver.system();
        solver
            .robin_slots()
            .iter()
            .zip(solver.robin_beta())
            .map(|(&slot, &beta)| {
                let be = &sys.boundary()[slot];
                let ge = hat.local_to_global_edge(be.edge);
                let sigma = be.side.outward_sign();
                let outside = grid
                    .edge(ge)
                    .cells
                    .iter()
                    .flatten()
                    .copied()
                    .find(|&c| hat.global_to_local_cell(c).is_none())
                    .ok_or(MrcmError::Uncovered(ge))?;
                let j = partition.owner_of_cell(outside);
                let sub = partition.subdomain(j);
                let fields = &state[j];
                let le = sub.global_to_local_edge(ge).ok_or(MrcmError::Uncovered(ge))?;
                let u_axis = fields.flux[le];
                let pi = match sub.grid().edge(le).cells {
                    [Some(a), Some(b)] => {
                        let ka = self.problem.perm.get(sub.local_to_global_cell(a));
                        let kb = self.problem.perm.get(sub.local_to_global_cell(b));
                        weighted_trace(ka, fields.pressure[a], kb, fields.pressure[b])
                    }
                    _ => {
                        // skeleton edge: reconstruct from the outside cell, whose
                        // outward normal is opposite to the box normal
                        let c = sub.global_to_local_cell(outside).expect("owned cell");
                        one_sided_trace(fields.pressure[c], self.problem.perm.get(outside), -sigma * u_axis, h)
                    }
                };
                Ok(-beta * sigma * u_axis + pi)
            })
            .collect()
    }

    /// One four-color sweep in place.
    pub fn sweep(&self, state: &mut [LocalFields]) -> Result<()> {
        let partition = self.opart.base();
        for color in 0..self.opart.num_colors() {
            let class = self.opart.color_class(color);
            let updates = class
                .par_iter()
                .map(|&i| {
                    let robin = self.gather_robin_data(state, i)?;
                    let solver = &self.solvers[i];
                    let fields = solver.solve_forced(&robin)?;
                    Ok((i, solver.restrict(&fields, partition.subdomain(i))))
                })
                .collect::<Result<Vec<_>>>()?;
            for (i, f) in updates {
                state[i] = f;
            }
        }
        Ok(())
    }

    /// Applies `steps` sweeps, returning the solution after each one
    /// (index 0 is the input).
    pub fn smooth_history(&self, sol: &MultiscaleSolution, steps: usize) -> Result<Vec<MultiscaleSolution>> {
        let mut out = Vec::with_capacity(steps + 1);
        let mut state = sol.clone();
        out.push(state.clone());
        for _ in 0..steps {
            self.sweep(&mut state.fields)?;
            self.normalize(&mut state);
            out.push(state.clone());
        }
        Ok(out)
    }

    pub fn smooth(&self, sol: &MultiscaleSolution, steps: usize) -> Result<MultiscaleSolution> {
        let mut state = sol.clone();
        for _ in 0..steps {
            self.sweep(&mut state.fields)?;
            self.normalize(&mut state);
        }
        Ok(state)
    }

    fn normalize(&self, sol: &mut MultiscaleSolution) {
        if self.problem.is_pure_neumann() {
            let mean = sol.mean_pressure();
            for f in &mut sol.fields {
                for p in &mut f.pressure {
                    *p -= mean;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::darcy::solve_fine;
    use crate::decomposition::{build_partition, oversample};
    use crate::mesh::Grid;
    use crate::mrcm::{conservation_defect, solve_mrcm, MultiplierKind};
    use crate::problem::{make_homogeneous_problem, BoundarySpec, PermField};
    use crate::spaces::TraceFamily;

    fn random_problem(n: usize, seed: u64) -> DarcyProblem {
        let g = Grid::new(n, n, 1.0 / n as f64, [0.0; 2]).unwrap();
        let perm = PermField::random_log_uniform(n, n, 1e-2, 1e2, seed).unwrap();
        let bc = BoundarySpec::left_right_dirichlet(&g, 1.0, 0.0);
        DarcyProblem::new(g, perm, vec![0.0; n * n], bc).unwrap()
    }

    fn max_diff(a: &MultiscaleSolution, b: &MultiscaleSolution) -> f64 {
        a.fields
            .iter()
            .zip(&b.fields)
            .flat_map(|(x, y)| x.pressure.iter().zip(&y.pressure))
            .fold(0.0, |m, (p, q)| m.max((p - q).abs()))
    }

    #[test]
    fn fine_solution_is_a_fixed_point() {
        for l in [0, 1, 2] {
            let prob = random_problem(18, 7);
            let op = oversample(&build_partition(&prob.grid, 3, 3).unwrap(), l).unwrap();
            let fine = MultiscaleSolution::from_global(op.base(), &solve_fine(&prob).unwrap());
            let sm = Smoother::new(&prob, &op, 1.0).unwrap();
            let after = sm.smooth(&fine, 1).unwrap();
            assert!(max_diff(&after, &fine) <= 1e-10 * fine.max_abs_pressure(), "l = {l}");
        }
        let prob = make_homogeneous_problem(3, 6).unwrap();
        let op = oversample(&build_partition(&prob.grid, 3, 3).unwrap(), 2).unwrap();
        let fine = MultiscaleSolution::from_global(op.base(), &solve_fine(&prob).unwrap());
        let after = Smoother::new(&prob, &op, 1.0).unwrap().smooth(&fine, 2).unwrap();
        assert!(max_diff(&after, &fine) <= 1e-10 * fine.max_abs_pressure());
    }

    #[test]
    fn zero_steps_is_identity() {
        let prob = random_problem(12, 1);
        let op = oversample(&build_partition(&prob.grid, 2, 2).unwrap(), 1).unwrap();
        let out = solve_mrcm(&prob, &op, TraceFamily::Constant, 1.0, MultiplierKind::Informed).unwrap();
        let sm = Smoother::new(&prob, &op, 1.0).unwrap();
        assert_eq!(sm.smooth(&out.solution, 0).unwrap(), out.solution);
    }

    #[test]
    fn smoothed_solutions_stay_conservative() {
        let prob = random_problem(18, 3);
        let op = oversample(&build_partition(&prob.grid, 3, 3).unwrap(), 2).unwrap();
        let out = solve_mrcm(&prob, &op, TraceFamily::Linear, 1.0, MultiplierKind::Informed).unwrap();
        let sm = Smoother::with_solvers(&prob, &op, out.hat_solvers.clone()).unwrap();
        for s in sm.smooth_history(&out.solution, 3).unwrap() {
            let (d, sc) = conservation_defect(&prob, op.base(), &s);
            assert!(d <= 1e-10 * sc);
        }
    }

    #[test]
    fn sweep_does_not_depend_on_order_within_a_color() {
        let prob = random_problem(24, 5);
        let op = oversample(&build_partition(&prob.grid, 4, 4).unwrap(), 2).unwrap();
        let out = solve_mrcm(&prob, &op, TraceFamily::Constant, 1.0, MultiplierKind::Informed).unwrap();
        let sm = Smoother::new(&prob, &op, 1.0).unwrap();
        let mut a = out.solution.fields.clone();
        sm.sweep(&mut a).unwrap();
        // sequential, reversed order within every color
        let mut b = out.solution.fields.clone();
        for color in 0..op.num_colors() {
            for &i in op.color_class(color).iter().rev() {
                let robin = sm.gather_robin_data(&b, i).unwrap();
                let f = sm.solvers[i].solve_forced(&robin).unwrap();
                b[i] = sm.solvers[i].restrict(&f, op.base().subdomain(i));
            }
        }
        assert_eq!(a, b);
    }

    #[test]
    fn smoothing_reduces_error() {
        let prob = random_problem(24, 8);
        let op = oversample(&build_partition(&prob.grid, 4, 4).unwrap(), 2).unwrap();
        let fine = solve_fine(&prob).unwrap();
        let out = solve_mrcm(&prob, &op, TraceFamily::Constant, 1.0, MultiplierKind::Classical).unwrap();
        let sm = Smoother::new(&prob, &op, 1.0).unwrap();
        let err = |s: &MultiscaleSolution| {
            s.global_pressure(op.base()).iter().zip(&fine.pressure).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
        };
        let hist = sm.smooth_history(&out.solution, 4).unwrap();
        assert!(err(&hist[4]) < err(&hist[0]));
    }

    #[test]
    fn rejects_mismatched_solvers() {
        let prob = random_problem(12, 1);
        let op = oversample(&build_partition(&prob.grid, 2, 2).unwrap(), 1).unwrap();
        assert!(Smoother::with_solvers(&prob, &op, vec![]).is_err());
        assert!(Smoother::new(&prob, &op, 0.0).is_err());
    }
}
