//! Interface spaces on the skeleton and the multiscale basis functions of
//! each subdomain.
//!
//! Every coarse face carries the same polynomial family for the flux space
//! `M_H` and the pressure space `V_H`. Multiplier spaces are either the same
//! polynomials on `Γ_i` (classical method) or the traces
//! `φ = -β u.n_i + π` of homogeneous solves on oversampled boxes driven by
//! polynomial Robin data on the box side facing each face (informed method).

use crate::darcy::LocalFields;
use crate::decomposition::{OversampledPartition, Partition};
use crate::error::{MrcmError, Result};
use crate::local::RegionSolver;
use crate::problem::DarcyProblem;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TraceFamily {
    /// Piecewise constant per coarse face.
    Constant,
    /// Piecewise linear (constant plus a zero-mean slope) per coarse face.
    Linear,
    /// One indicator per fine edge; only meaningful without oversampling.
    Fine,
}

impl TraceFamily {
    pub fn from_degree(d: usize) -> Option<Self> {
        match d {
            1 => Some(Self::Constant),
            2 => Some(Self::Linear),
            _ => None,
        }
    }

    /// Number of functions per face with `n_edges` fine edges.
    pub fn modes(self, n_edges: usize) -> usize {
        match self {
            Self::Constant => 1,
            Self::Linear => 2,
            Self::Fine => n_edges,
        }
    }

    /// Value of mode `mode` on edge `k` of a line of `n` equal edges.
    ///
    /// The slope mode is `(s - L/2) / (L/2)` evaluated at edge midpoints.
    pub fn value(self, mode: usize, k: usize, n: usize) -> f64 {
        match (self, mode) {
            (Self::Fine, m) => (m == k) as u8 as f64,
            (_, 0) => 1.0,
            (Self::Linear, 1) => (2.0 * k as f64 + 1.0 - n as f64) / n as f64,
            _ => panic!("mode {mode} out of range for {self:?}"),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Constant => "constant",
            Self::Linear => "linear",
            Self::Fine => "fine",
        }
    }
}

/// Polynomial space on the skeleton, one block of modes per coarse face.
#[derive(Clone, Debug)]
pub struct FaceSpace {
    family: TraceFamily,
    offsets: Vec<usize>,
    face_len: Vec<usize>,
}

impl FaceSpace {
    pub fn new(partition: &Partition, family: TraceFamily) -> Self {
        let mut offsets = Vec::with_capacity(partition.faces().len() + 1);
        let mut face_len = Vec::with_capacity(partition.faces().len());
        offsets.push(0);
        for f in partition.faces() {
            face_len.push(f.len());
            offsets.push(offsets.last().unwrap() + family.modes(f.len()));
        }
        Self { family, offsets, face_len }
    }

    pub fn family(&self) -> TraceFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn num_modes(&self, face: usize) -> usize {
        self.offsets[face + 1] - self.offsets[face]
    }

    /// Global index of mode `mode` on `face`.
    pub fn index(&self, face: usize, mode: usize) -> usize {
        self.offsets[face] + mode
    }

    /// Value of a mode on the `pos`-th edge of `face`.
    pub fn value(&self, face: usize, mode: usize, pos: usize) -> f64 {
        self.family.value(mode, pos, self.face_len[face])
    }
}

/// The flux space `M_H` and the pressure space `V_H`, sharing one family.
pub fn build_face_spaces(partition: &Partition, family: TraceFamily) -> (FaceSpace, FaceSpace) {
    (FaceSpace::new(partition, family), FaceSpace::new(partition, family))
}

/// A fine edge of `Γ_i` seen from subdomain `i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaEdge {
    pub global: usize,
    /// Edge index in the subdomain box.
    pub local: usize,
    pub face: usize,
    /// Position along the face.
    pub pos: usize,
    /// `ň^i . ň`. Axis-aligned fluxes times `sign` are outward fluxes of `Ω_i`.
    pub sign: f64,
    /// Robin parameter `alpha H / K_H` on this edge.
    pub beta: f64,
}

/// Edges of `Γ_i`, face by face in ascending face order.
pub fn gamma_edges(problem: &DarcyProblem, partition: &Partition, i: usize, alpha: f64) -> Vec<GammaEdge> {
    let sub = partition.subdomain(i);
    let coarse_h = partition.coarse_h();
    partition
        .faces_of(i)
        .iter()
        .flat_map(|&f| {
            let face = partition.face(f);
            let sign = face.sign_for(i);
            face.edges.iter().enumerate().map(move |(pos, &ge)| GammaEdge {
                global: ge,
                local: sub.global_to_local_edge(ge).expect("face edge on subdomain boundary"),
                face: f,
                pos,
                sign,
                beta: alpha * coarse_h / problem.k_h[ge],
            })
        })
        .collect()
}

/// One multiscale basis function: its multiplier on `Γ_i` and the fields it
/// induces on `Ω_i`.
#[derive(Clone, Debug)]
pub struct BasisFunction {
    pub face: usize,
    pub mode: usize,
    /// `φ` on the edges of [`SubdomainSpace::gamma`].
    pub trace: Vec<f64>,
    pub fields: LocalFields,
}

#[derive(Clone, Debug)]
pub struct SubdomainSpace {
    pub sub: usize,
    pub alpha: f64,
    pub family: TraceFamily,
    /// Oversampling layers, `None` for the classical polynomial space.
    pub oversampling: Option<usize>,
    pub gamma: Vec<GammaEdge>,
    pub basis: Vec<BasisFunction>,
}

impl SubdomainSpace {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

/// Robin data on the sides of `Ω̂_i` for mode `mode` of `face`, aligned with
/// the Robin edges of `hat`.
///
/// The polynomial lives on the whole side of the box that faces the coarse
/// face, so with oversampling it extends past the face ends.
pub fn lambda_data(
    hat: &RegionSolver,
    partition: &Partition,
    i: usize,
    face: usize,
    mode: usize,
    family: TraceFamily,
) -> Result<Vec<f64>> {
    let cf = partition.face(face);
    let side = cf.side_of(i).ok_or(MrcmError::FaceNotOnInterface { face, sub: i })?;
    let edges = hat.region().side_edges(side);
    let n = edges.len();
    if family == TraceFamily::Fine && n != cf.len() {
        return Err(MrcmError::UnsupportedFamily("fine"));
    }
    let mut data = vec![0.0; hat.num_robin()];
    for (k, se) in edges.iter().enumerate() {
        let pos = hat.robin_position(se.edge).expect("box side facing an inner face is inside the domain");
        data[pos] = family.value(mode, k, n);
    }
    Ok(data)
}

/// Informed space of subdomain `i` built from solves on its oversampled box.
pub fn build_informed_space(
    problem: &DarcyProblem,
    opart: &OversampledPartition,
    i: usize,
    family: TraceFamily,
    hat: &RegionSolver,
) -> Result<SubdomainSpace> {
    let partition = opart.base();
    let alpha = hat.alpha();
    if family == TraceFamily::Fine && opart.oversampling() > 0 {
        return Err(MrcmError::UnsupportedFamily("fine"));
    }
    let gamma = gamma_edges(problem, partition, i, alpha);
    let region = hat.region();
    let hat_edges: Vec<usize> = gamma
        .iter()
        .map(|g| region.global_to_local_edge(g.global).expect("Γ_i inside the oversampled box"))
        .collect();
    let mut basis = Vec::new();
    for &f in partition.faces_of(i) {
        for mode in 0..family.modes(partition.face(f).len()) {
            let lambda = lambda_data(hat, partition, i, f, mode, family)?;
            let (fields, data) = hat.solve(&lambda, false)?;
            let trace = gamma
                .iter()
                .zip(&hat_edges)
                .map(|(g, &le)| {
                    let u_out = g.sign * fields.flux[le];
                    let pi = hat.system().edge_pressure_trace(&fields.pressure, &fields.flux, &data, le)?;
                    Ok(-g.beta * u_out + pi)
                })
                .collect::<Result<Vec<_>>>()?;
            let fields = hat.restrict(&fields, partition.subdomain(i));
            basis.push(BasisFunction { face: f, mode, trace, fields });
        }
    }
    Ok(SubdomainSpace { sub: i, alpha, family, oversampling: Some(opart.oversampling()), gamma, basis })
}

/// Classical space: the polynomial multipliers themselves, solved on `Ω_i`.
pub fn build_polynomial_space(
    problem: &DarcyProblem,
    partition: &Partition,
    i: usize,
    family: TraceFamily,
    sub: &RegionSolver,
) -> Result<SubdomainSpace> {
    let alpha = sub.alpha();
    let gamma = gamma_edges(problem, partition, i, alpha);
    let positions: Vec<usize> = gamma
        .iter()
        .map(|g| sub.robin_position(g.local).expect("Γ_i edges carry Robin closures"))
        .collect();
    let mut basis = Vec::new();
    for &f in partition.faces_of(i) {
        let n = partition.face(f).len();
        for mode in 0..family.modes(n) {
            let trace: Vec<f64> =
                gamma.iter().map(|g| if g.face == f { family.value(mode, g.pos, n) } else { 0.0 }).collect();
            let mut robin = vec![0.0; sub.num_robin()];
            for (&p, &v) in positions.iter().zip(&trace) {
                robin[p] = v;
            }
            let fields = sub.solve_homogeneous(&robin)?;
            basis.push(BasisFunction { face: f, mode, trace, fields });
        }
    }
    Ok(SubdomainSpace { sub: i, alpha, family, oversampling: None, gamma, basis })
}

/// Robin data vector of a subdomain solver from multiplier values on `Γ_i`.
pub fn gamma_to_robin(sub: &RegionSolver, gamma: &[GammaEdge], values: &[f64]) -> Vec<f64> {
    let mut robin = vec![0.0; sub.num_robin()];
    for (g, &v) in gamma.iter().zip(values) {
        robin[sub.robin_position(g.local).expect("Γ_i edges carry Robin closures")] = v;
    }
    robin
}
