//! Discrete error norms, flux jumps across the skeleton and convergence rates.

use crate::darcy::LocalFields;
use crate::decomposition::Partition;
use crate::error::{MrcmError, Result};
use crate::mesh::{Axis, Grid};
use crate::mrcm::MultiscaleSolution;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorNorm {
    pub abs: f64,
    /// `abs` divided by the norm of the reference.
    pub rel: f64,
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        a
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// `sqrt(Σ_c (p - p_ref)^2 h^2)`. With `mean_adjusted` both fields are
/// compared up to their means (pure-Neumann problems).
pub fn l2_pressure_error(grid: &Grid, p: &[f64], p_ref: &[f64], mean_adjusted: bool) -> Result<ErrorNorm> {
    let n = grid.num_cells();
    if p.len() != n || p_ref.len() != n {
        return Err(MrcmError::GridMismatch(format!("pressure arrays of length {} and {}, grid has {n} cells", p.len(), p_ref.len())));
    }
    let (dm, rm) = if mean_adjusted { (mean(p) - mean(p_ref), mean(p_ref)) } else { (0.0, 0.0) };
    let h2 = grid.h() * grid.h();
    let err: f64 = p.iter().zip(p_ref).map(|(a, b)| (a - b - dm).powi(2) * h2).sum::<f64>().sqrt();
    let norm: f64 = p_ref.iter().map(|b| (b - rm).powi(2) * h2).sum::<f64>().sqrt();
    Ok(ErrorNorm { abs: err, rel: ratio(err, norm) })
}

/// Flux error of a subdomain-wise solution against a global edge field.
///
/// Every edge carries weight `h^2`; skeleton edges are seen from both sides
/// with weight `h^2 / 2` each.
pub fn l2_flux_error(partition: &Partition, sol: &MultiscaleSolution, u_ref: &[f64]) -> Result<ErrorNorm> {
    let grid = partition.grid();
    if u_ref.len() != grid.num_edges() {
        return Err(MrcmError::GridMismatch(format!("flux array of length {}, grid has {} edges", u_ref.len(), grid.num_edges())));
    }
    let h2 = grid.h() * grid.h();
    let mut err = 0.0;
    for (s, f) in partition.subdomains().iter().zip(&sol.fields) {
        for (le, &u) in f.flux.iter().enumerate() {
            let ge = s.local_to_global_edge(le);
            let w = if partition.face_of_edge(ge).is_some() { 0.5 * h2 } else { h2 };
            err += w * (u - u_ref[ge]).powi(2);
        }
    }
    let norm: f64 = u_ref.iter().map(|u| u * u * h2).sum::<f64>().sqrt();
    let err = err.sqrt();
    Ok(ErrorNorm { abs: err, rel: ratio(err, norm) })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorReport {
    pub pressure: ErrorNorm,
    pub flux: ErrorNorm,
}

/// Pressure and flux errors against reference cell pressures and edge fluxes.
pub fn error_report(partition: &Partition, sol: &MultiscaleSolution, reference: &LocalFields, mean_adjusted: bool) -> Result<ErrorReport> {
    let p = sol.global_pressure(partition);
    Ok(ErrorReport {
        pressure: l2_pressure_error(partition.grid(), &p, &reference.pressure, mean_adjusted)?,
        flux: l2_flux_error(partition, sol, &reference.flux)?,
    })
}

/// Flux jump on one skeleton edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpSample {
    pub edge: usize,
    /// Coordinate of the edge midpoint along the line.
    pub s: f64,
    /// `u_lo . ň - u_hi . ň`.
    pub jump: f64,
}

/// Flux jumps along a straight connected chain of collinear coarse faces.
pub fn flux_jump_profile(partition: &Partition, sol: &MultiscaleSolution, faces: &[usize]) -> Result<Vec<JumpSample>> {
    let grid = partition.grid();
    let first = faces.first().ok_or_else(|| MrcmError::FacePath("empty".into()))?;
    let axis = partition.face(*first).axis;
    let mut out = Vec::new();
    let mut prev: Option<(usize, usize, usize)> = None;
    for &f in faces {
        if f >= partition.faces().len() {
            return Err(MrcmError::FacePath(format!("face {f} does not exist")));
        }
        let face = partition.face(f);
        if face.axis != axis {
            return Err(MrcmError::FacePath(format!("face {f} has a different orientation")));
        }
        for &ge in &face.edges {
            let (_, i, j) = grid.edge_ij(ge);
            // (line coordinate, position along the line)
            let (line, along) = match axis {
                Axis::X => (i, j),
                Axis::Y => (j, i),
            };
            if let Some((pl, pa, _)) = prev {
                if line != pl || along != pa + 1 {
                    return Err(MrcmError::FacePath(format!("edge {ge} of face {f} does not continue the line")));
                }
            }
            prev = Some((line, along, ge));
            let lo = partition.subdomain(face.lo).global_to_local_edge(ge).expect("face edge");
            let hi = partition.subdomain(face.hi).global_to_local_edge(ge).expect("face edge");
            let mid = grid.edge_midpoint(ge);
            let s = match axis {
                Axis::X => mid[1],
                Axis::Y => mid[0],
            };
            out.push(JumpSample { edge: ge, s, jump: sol.fields[face.lo].flux[lo] - sol.fields[face.hi].flux[hi] });
        }
    }
    Ok(out)
}

/// Horizontal faces between block rows `row` and `row + 1`, left to right.
pub fn horizontal_line(partition: &Partition, row: usize) -> Result<Vec<usize>> {
    let (mx, my) = partition.counts();
    if row + 1 >= my {
        return Err(MrcmError::FacePath(format!("no horizontal skeleton line above block row {row} of {my}")));
    }
    Ok(partition
        .faces()
        .iter()
        .filter(|f| f.axis == Axis::Y && f.lo / mx == row)
        .map(|f| f.id)
        .collect())
}

/// Vertical faces between block columns `col` and `col + 1`, bottom to top.
pub fn vertical_line(partition: &Partition, col: usize) -> Result<Vec<usize>> {
    let (mx, _) = partition.counts();
    if col + 1 >= mx {
        return Err(MrcmError::FacePath(format!("no vertical skeleton line right of block column {col} of {mx}")));
    }
    Ok(partition
        .faces()
        .iter()
        .filter(|f| f.axis == Axis::X && f.lo % mx == col)
        .map(|f| f.id)
        .collect())
}

/// The horizontal skeleton line closest to the middle of the domain.
pub fn default_jump_line(partition: &Partition) -> Result<Vec<usize>> {
    let (_, my) = partition.counts();
    horizontal_line(partition, (my / 2).max(1) - 1)
}

/// Least squares slope of `log err` against `log h`.
pub fn convergence_slope(h: &[f64], err: &[f64]) -> Result<f64> {
    if h.len() != err.len() || h.len() < 2 {
        return Err(MrcmError::InvalidArgument(format!("need at least two (h, err) pairs, got {} and {}", h.len(), err.len())));
    }
    if h.iter().chain(err).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(MrcmError::InvalidArgument("mesh sizes and errors must be positive".into()));
    }
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let (mx, my) = (mean(&x), mean(&y));
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(MrcmError::InvalidArgument("mesh sizes must differ".into()));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(sxy / sxx)
}
