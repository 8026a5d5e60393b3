//! Robin coupling of subdomain solutions through the interface spaces.
//!
//! Each subdomain solution is `ū_i + Σ_k x_k Φ_k`, where `ū_i` carries the
//! source and global boundary data with zero Robin data on `Γ_i` and `Φ_k`
//! are the multiscale basis functions. The coefficients solve the square
//! system formed by weak flux continuity against `M_H` and weak pressure
//! continuity against `V_H`.

use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::darcy::{cell_residuals, one_sided_trace, LocalFields};
use crate::decomposition::{oversample, OversampledPartition, Partition};
use crate::error::{MrcmError, Result};
use crate::local::RegionSolver;
use crate::problem::DarcyProblem;
use crate::spaces::{build_face_spaces, build_informed_space, build_polynomial_space, gamma_to_robin, FaceSpace, SubdomainSpace, TraceFamily};

/// Relative singular value threshold used to detect rank deficiency.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MultiplierKind {
    /// Polynomials on `Γ_i` (no oversampling).
    Classical,
    /// Traces of oversampled solves.
    Informed,
}

/// Subdomain-wise fields of a multiscale solution.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiscaleSolution {
    pub fields: Vec<LocalFields>,
}

impl MultiscaleSolution {
    /// Restriction of a global solution to the subdomains.
    pub fn from_global(partition: &Partition, global: &LocalFields) -> Self {
        let whole = crate::mesh::BoxRegion::new(partition.grid(), 0, 0, partition.grid().nx(), partition.grid().ny())
            .expect("full box");
        let fields = partition.subdomains().iter().map(|s| crate::local::restrict(&whole, global, s)).collect();
        Self { fields }
    }

    /// Cell pressures on the global grid.
    pub fn global_pressure(&self, partition: &Partition) -> Vec<f64> {
        let mut p = vec![0.0; partition.grid().num_cells()];
        for (s, f) in partition.subdomains().iter().zip(&self.fields) {
            for (c, &v) in f.pressure.iter().enumerate() {
                p[s.local_to_global_cell(c)] = v;
            }
        }
        p
    }

    /// Axis-aligned flux on a global edge from each subdomain that touches it:
    /// one value inside a subdomain or on the domain boundary, two on the skeleton.
    pub fn edge_fluxes(&self, partition: &Partition, ge: usize) -> Vec<f64> {
        let grid = partition.grid();
        let mut owners: Vec<usize> =
            grid.edge(ge).cells.iter().flatten().map(|&c| partition.owner_of_cell(c)).collect();
        owners.dedup();
        owners
            .into_iter()
            .map(|i| {
                let le = partition.subdomain(i).global_to_local_edge(ge).expect("edge of an owned cell");
                self.fields[i].flux[le]
            })
            .collect()
    }

    pub fn max_abs_pressure(&self) -> f64 {
        self.fields.iter().flat_map(|f| &f.pressure).fold(0.0, |m, v| m.max(v.abs()))
    }

    fn shift_pressure(&mut self, delta: f64) {
        for f in &mut self.fields {
            for p in &mut f.pressure {
                *p += delta;
            }
        }
    }

    pub fn mean_pressure(&self) -> f64 {
        let (s, n) = self
            .fields
            .iter()
            .fold((0.0, 0usize), |(s, n), f| (s + f.pressure.iter().sum::<f64>(), n + f.pressure.len()));
        s / n as f64
    }
}

/// Dense interface system: rows are `M_H` then `V_H` functionals, columns
/// the basis functions of all subdomains in order.
#[derive(Clone, Debug)]
pub struct InterfaceSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    /// `(subdomain, basis index)` of every column.
    pub columns: Vec<(usize, usize)>,
    pub m_dim: usize,
    pub v_dim: usize,
}

/// Forced solution `ū_i`: global data active, zero Robin data on `Γ_i`.
pub fn compute_bar(sub: &RegionSolver) -> Result<LocalFields> {
    Ok(sub.solve_forced(&vec![0.0; sub.num_robin()])?)
}

/// Applies the continuity functionals of one subdomain to its fields.
///
/// `trace` is the multiplier on `Γ_i` (`None` for zero). Entries are added into `m_out`
/// and `v_out` scaled by `weight`.
fn apply_functionals(
    space: &SubdomainSpace,
    fields: &LocalFields,
    trace: Option<&[f64]>,
    mh: &FaceSpace,
    vh: &FaceSpace,
    h: f64,
    weight: f64,
    m_out: &mut [f64],
    v_out: &mut [f64],
) {
    for (k, g) in space.gamma.iter().enumerate() {
        let u_out = g.sign * fields.flux[g.local];
        let lam = trace.map_or(0.0, |t| t[k]);
        for mode in 0..mh.num_modes(g.face) {
            m_out[mh.index(g.face, mode)] += weight * u_out * mh.value(g.face, mode, g.pos) * h;
        }
        for mode in 0..vh.num_modes(g.face) {
            v_out[vh.index(g.face, mode)] += weight * (g.beta * u_out + lam) * vh.value(g.face, mode, g.pos) * g.sign * h;
        }
    }
}

pub fn assemble_interface(
    partition: &Partition,
    spaces: &[SubdomainSpace],
    bars: &[LocalFields],
    mh: &FaceSpace,
    vh: &FaceSpace,
) -> Result<InterfaceSystem> {
    let (m_dim, v_dim) = (mh.dim(), vh.dim());
    let n: usize = spaces.iter().map(|s| s.dim()).sum();
    if n != m_dim + v_dim {
        return Err(MrcmError::Dimension { lambda: n, m: m_dim, v: v_dim });
    }
    let h = partition.grid().h();
    let mut matrix = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    let mut columns = Vec::with_capacity(n);
    let mut m_buf = vec![0.0; m_dim];
    let mut v_buf = vec![0.0; v_dim];
    for (space, bar) in spaces.iter().zip(bars) {
        for (k, b) in space.basis.iter().enumerate() {
            m_buf.fill(0.0);
            v_buf.fill(0.0);
            apply_functionals(space, &b.fields, Some(&b.trace), mh, vh, h, 1.0, &mut m_buf, &mut v_buf);
            let col = columns.len();
            for (r, v) in m_buf.iter().chain(&v_buf).enumerate() {
                matrix[(r, col)] = *v;
            }
            columns.push((space.sub, k));
        }
        m_buf.fill(0.0);
        v_buf.fill(0.0);
        apply_functionals(space, bar, None, mh, vh, h, -1.0, &mut m_buf, &mut v_buf);
        for (r, v) in m_buf.iter().chain(&v_buf).enumerate() {
            rhs[r] += *v;
        }
    }
    Ok(InterfaceSystem { matrix, rhs, columns, m_dim, v_dim })
}

/// Result of the interface solve.
#[derive(Clone, Debug)]
pub struct InterfaceSolution {
    pub x: Vec<f64>,
    /// Number of singular directions removed (pure-Neumann problems only).
    pub deflated: usize,
}

fn equilibrate(a: &DMatrix<f64>, b: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>, Vec<f64>) {
    let (n, m) = a.shape();
    let mut a = a.clone();
    let mut b = b.clone();
    for r in 0..n {
        let s = a.row(r).amax();
        if s > 0.0 {
            a.row_mut(r).scale_mut(1.0 / s);
            b[r] /= s;
        }
    }
    let mut col_scale = vec![1.0; m];
    for (c, cs) in col_scale.iter_mut().enumerate() {
        let s = a.column(c).amax();
        if s > 0.0 {
            *cs = 1.0 / s;
            a.column_mut(c).scale_mut(*cs);
        }
    }
    (a, b, col_scale)
}

/// Minimum norm solution discarding the `drop` smallest singular directions.
fn svd_solve(a: DMatrix<f64>, b: &DVector<f64>, drop: usize) -> DVector<f64> {
    let svd = a.svd(true, true);
    let (u, vt) = (svd.u.as_ref().expect("u requested"), svd.v_t.as_ref().expect("v requested"));
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let keep = order.len().saturating_sub(drop);
    let mut x = DVector::zeros(vt.ncols());
    for &k in &order[..keep] {
        let coef = u.column(k).dot(b) / svd.singular_values[k];
        x += vt.row(k).transpose() * coef;
    }
    x
}

/// Number of singular values below `RANK_TOL` times the largest.
pub fn nullity(a: &DMatrix<f64>) -> usize {
    let sv = a.clone().singular_values();
    let smax = sv.max();
    sv.iter().filter(|&&s| s <= RANK_TOL * smax).count()
}

fn pivots_ok(u_diag: &DVector<f64>) -> bool {
    let (dmin, dmax) = u_diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d.abs()), hi.max(d.abs())));
    dmin > RANK_TOL * dmax
}

/// Minimum norm solution of a consistent system with a one-dimensional
/// kernel, from one LU factorization of the bordered matrix `[A w; v^T 0]`.
///
/// With generic `v, w` the bordered matrix is regular exactly when the
/// kernel is one-dimensional; solving with `(b, 0)` gives a particular
/// solution and with `(0, 1)` a kernel vector, which is then projected out.
fn bordered_min_norm(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let n = a.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d72_636d);
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(a);
    for i in 0..n {
        m[(i, n)] = rng.gen_range(-1.0..1.0);
        m[(n, i)] = rng.gen_range(-1.0..1.0);
    }
    let lu = m.lu();
    if !pivots_ok(&lu.u().diagonal()) {
        return None;
    }
    let mut rhs = DVector::zeros(n + 1);
    rhs.rows_mut(0, n).copy_from(b);
    let xp = lu.solve(&rhs)?.rows(0, n).into_owned();
    let mut e = DVector::zeros(n + 1);
    e[n] = 1.0;
    let z = lu.solve(&e)?.rows(0, n).into_owned();
    let zz = z.dot(&z);
    Some(if zz > 0.0 { &xp - &z * (z.dot(&xp) / zz) } else { xp })
}

/// Solves the interface system after row and column equilibration.
///
/// For pure-Neumann problems the constant multiplier mode is a kernel
/// direction and the minimum norm solution is returned; a kernel of
/// dimension above one is reported as ill-posed. Other problems must yield
/// a regular system (pivots above `RANK_TOL` relative to the largest).
pub fn solve_interface(sys: &InterfaceSystem, pure_neumann: bool) -> Result<InterfaceSolution> {
    let (a, b, col_scale) = equilibrate(&sys.matrix, &sys.rhs);
    let (y, deflated) = if pure_neumann {
        match bordered_min_norm(&a, &b) {
            Some(y) => (y, 1),
            None => return Err(MrcmError::IllPosedSpaces(nullity(&a).max(2))),
        }
    } else {
        let lu = a.clone().lu();
        if pivots_ok(&lu.u().diagonal()) {
            (lu.solve(&b).ok_or(MrcmError::IllPosedSpaces(1))?, 0)
        } else {
            let k = nullity(&a);
            if k > 0 {
                return Err(MrcmError::IllPosedSpaces(k));
            }
            (svd_solve(a, &b, 0), 0)
        }
    };
    let x = y.iter().zip(&col_scale).map(|(v, s)| v * s).collect();
    Ok(InterfaceSolution { x, deflated })
}

/// Subdomain solutions for interface coefficients `x`.
///
/// By linearity `ū_i + Σ_k x_k Φ_k` is the local solution whose Robin data on
/// `Γ_i` is `Σ_k x_k φ_k`. Solving for it directly keeps cell balances exact
/// even when the coefficients are large (they grow like `β`). The constant
/// part of that data is then lost to cancellation, so the pressure level is
/// taken from the basis combination instead; shifting Robin data by a constant
/// shifts the pressure and leaves the flux untouched.
pub fn reconstruct(
    subs: &[Arc<RegionSolver>],
    spaces: &[SubdomainSpace],
    bars: &[LocalFields],
    x: &[f64],
    pure_neumann: bool,
) -> Result<MultiscaleSolution> {
    let mut offsets = Vec::with_capacity(spaces.len());
    let mut offset = 0;
    for space in spaces {
        offsets.push(offset);
        offset += space.dim();
    }
    let fields = subs
        .par_iter()
        .zip(spaces)
        .zip(bars)
        .zip(offsets)
        .map(|(((sub, space), bar), offset)| {
            let mean = |p: &[f64]| p.iter().sum::<f64>() / p.len() as f64;
            let mut lambda = vec![0.0; space.gamma.len()];
            let mut level = mean(&bar.pressure);
            for (b, &c) in space.basis.iter().zip(&x[offset..]) {
                for (l, t) in lambda.iter_mut().zip(&b.trace) {
                    *l += c * t;
                }
                level += c * mean(&b.fields.pressure);
            }
            let mut f = sub.solve_forced(&gamma_to_robin(sub, &space.gamma, &lambda))?;
            let shift = level - mean(&f.pressure);
            f.pressure.iter_mut().for_each(|p| *p += shift);
            Ok(f)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sol = MultiscaleSolution { fields };
    if pure_neumann {
        let mean = sol.mean_pressure();
        sol.shift_pressure(-mean);
    }
    Ok(sol)
}

/// Wall-clock split of one multiscale solve.
#[derive(Clone, Copy, Debug, Default)]
pub struct MrcmTimings {
    /// Factorizations, basis functions and forced solutions.
    pub local: Duration,
    /// Interface assembly and solve plus reconstruction.
    pub coupling: Duration,
}

#[derive(Clone, Debug)]
pub struct MrcmOutput {
    pub solution: MultiscaleSolution,
    pub spaces: Vec<SubdomainSpace>,
    pub bars: Vec<LocalFields>,
    pub subdomain_solvers: Vec<Arc<RegionSolver>>,
    /// Factorized oversampled-box solvers (informed spaces only); reusable for smoothing.
    pub hat_solvers: Vec<Arc<RegionSolver>>,
    pub interface_size: usize,
    pub deflated: usize,
    pub timings: MrcmTimings,
}

/// Solves `problem` with the given multiplier spaces.
///
/// Informed spaces use the oversampled boxes of `opart`; classical spaces
/// ignore the oversampling.
pub fn solve_mrcm(
    problem: &DarcyProblem,
    opart: &OversampledPartition,
    family: TraceFamily,
    alpha: f64,
    kind: MultiplierKind,
) -> Result<MrcmOutput> {
    if problem.grid != *opart.base().grid() {
        return Err(MrcmError::GridMismatch("partition built for another grid".into()));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(MrcmError::InvalidArgument(format!("alpha must be positive and finite, got {alpha}")));
    }
    let partition = opart.base();
    let coarse_h = partition.coarse_h();
    let t0 = Instant::now();
    type Local = (Arc<RegionSolver>, Option<Arc<RegionSolver>>, SubdomainSpace, LocalFields);
    let locals: Vec<Local> = (0..partition.len())
        .into_par_iter()
        .map(|i| -> Result<Local> {
            let sub = Arc::new(RegionSolver::new(problem, partition.subdomain(i), coarse_h, alpha)?);
            let (hat, space) = match kind {
                MultiplierKind::Classical => (None, build_polynomial_space(problem, partition, i, family, &sub)?),
                MultiplierKind::Informed => {
                    let hat = if opart.oversampling() == 0 {
                        sub.clone()
                    } else {
                        Arc::new(RegionSolver::new(problem, opart.hat(i), coarse_h, alpha)?)
                    };
                    let space = build_informed_space(problem, opart, i, family, &hat)?;
                    (Some(hat), space)
                }
            };
            let bar = compute_bar(&sub)?;
            Ok((sub, hat, space, bar))
        })
        .collect::<Result<Vec<_>>>()?;
    let local = t0.elapsed();
    let t1 = Instant::now();
    let mut subdomain_solvers = Vec::with_capacity(locals.len());
    let mut hat_solvers = Vec::new();
    let mut spaces = Vec::with_capacity(locals.len());
    let mut bars = Vec::with_capacity(locals.len());
    for (sub, hat, space, bar) in locals {
        subdomain_solvers.push(sub);
        hat_solvers.extend(hat);
        spaces.push(space);
        bars.push(bar);
    }
    let (mh, vh) = build_face_spaces(partition, family);
    let sys = assemble_interface(partition, &spaces, &bars, &mh, &vh)?;
    let pure_neumann = problem.is_pure_neumann();
    let sol = solve_interface(&sys, pure_neumann)?;
    let solution = reconstruct(&subdomain_solvers, &spaces, &bars, &sol.x, pure_neumann)?;
    let coupling = t1.elapsed();
    Ok(MrcmOutput {
        solution,
        spaces,
        bars,
        subdomain_solvers,
        hat_solvers,
        interface_size: sys.rhs.len(),
        deflated: sol.deflated,
        timings: MrcmTimings { local, coupling },
    })
}

/// Classical coupling with one multiplier per skeleton edge; reproduces the
/// global fine-scale solution for any `alpha`.
pub fn solve_mrcm_full_fine(problem: &DarcyProblem, partition: &Partition, alpha: f64) -> Result<MrcmOutput> {
    let opart = oversample(partition, 0)?;
    solve_mrcm(problem, &opart, TraceFamily::Fine, alpha, MultiplierKind::Classical)
}

/// Largest cell flux-balance residual over all subdomains and the matching scale
/// `max_c (sum_e h |u_e| + |f_c| h^2)`.
pub fn conservation_defect(problem: &DarcyProblem, partition: &Partition, sol: &MultiscaleSolution) -> (f64, f64) {
    let h = partition.grid().h();
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for (s, f) in partition.subdomains().iter().zip(&sol.fields) {
        let g = s.grid();
        let source: Vec<f64> = (0..g.num_cells()).map(|c| problem.source[s.local_to_global_cell(c)]).collect();
        for (c, r) in cell_residuals(g, &f.flux, &source).into_iter().enumerate() {
            worst = worst.max(r.abs());
            let ce = g.cell_edges(c);
            let sc = ce.iter().map(|&e| h * f.flux[e].abs()).sum::<f64>() + source[c].abs() * h * h;
            scale = scale.max(sc);
        }
    }
    (worst, scale)
}

/// Residuals of weak flux and pressure continuity across the skeleton.
#[derive(Clone, Debug)]
pub struct ContinuityReport {
    /// `Σ_i (u.n_i, μ)` for every basis function `μ` of `M_H`.
    pub flux: Vec<f64>,
    /// `Σ_i (π_i, v ň^i.ň)` for every basis function `v` of `V_H`.
    pub pressure: Vec<f64>,
    pub flux_scale: f64,
    pub pressure_scale: f64,
}

impl ContinuityReport {
    pub fn max_flux(&self) -> f64 {
        self.flux.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_pressure(&self) -> f64 {
        self.pressure.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Weak continuity residuals of subdomain solutions.
///
/// Pressure traces are the half-cell reconstructions from each side, which on
/// a Robin edge equal `β u.n_i + λ_i`.
pub fn weak_continuity(problem: &DarcyProblem, partition: &Partition, sol: &MultiscaleSolution, mh: &FaceSpace, vh: &FaceSpace) -> ContinuityReport {
    let h = partition.grid().h();
    let mut flux = vec![0.0; mh.dim()];
    let mut pressure = vec![0.0; vh.dim()];
    let mut fs = vec![0.0; mh.dim()];
    let mut ps = vec![0.0; vh.dim()];
    for face in partition.faces() {
        for sub in [face.lo, face.hi] {
            let region = partition.subdomain(sub);
            let f = &sol.fields[sub];
            let sign = face.sign_for(sub);
            for (pos, &ge) in face.edges.iter().enumerate() {
                let le = region.global_to_local_edge(ge).expect("face on subdomain boundary");
                let u_out = sign * f.flux[le];
                let c = region.grid().edge(le).inner_cell().expect("face edge on box boundary");
                let k_c = problem.perm.get(region.local_to_global_cell(c));
                let pi = one_sided_trace(f.pressure[c], k_c, u_out, h);
                for mode in 0..mh.num_modes(face.id) {
                    let w = mh.value(face.id, mode, pos) * h;
                    flux[mh.index(face.id, mode)] += u_out * w;
                    fs[mh.index(face.id, mode)] += (u_out * w).abs();
                }
                for mode in 0..vh.num_modes(face.id) {
                    let w = vh.value(face.id, mode, pos) * h;
                    pressure[vh.index(face.id, mode)] += pi * w * sign;
                    ps[vh.index(face.id, mode)] += (pi * w).abs();
                }
            }
        }
    }
    let max = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(*x));
    ContinuityReport { flux, pressure, flux_scale: max(&fs), pressure_scale: max(&ps) }
}
