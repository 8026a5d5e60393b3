//! Darcy problem definitions: permeability, boundary data, sources and the
//! two benchmark configurations (manufactured cosine solution, SPE10 layer).

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::ProblemError;
use crate::mesh::{Axis, Grid, Side};

pub const SPE10_NX: usize = 60;
pub const SPE10_NY: usize = 220;
pub const SPE10_NZ: usize = 85;
/// Width and height of a 2D SPE10 layer as laid out here (long axis along x).
pub const SPE10_LAYER_SHAPE: (usize, usize) = (SPE10_NY, SPE10_NX);

/// Cell-centered scalar permeability on an `nx x ny` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PermField {
    nx: usize,
    ny: usize,
    values: Vec<f64>,
}

impl PermField {
    pub fn new(nx: usize, ny: usize, values: Vec<f64>) -> Result<Self, ProblemError> {
        if values.len() != nx * ny {
            return Err(ProblemError::InvalidArgument(format!(
                "{} permeability values for a {nx}x{ny} grid",
                values.len()
            )));
        }
        if let Some(c) = values.iter().position(|&k| !(k > 0.0 && k.is_finite())) {
            return Err(ProblemError::InvalidArgument(format!("permeability {} at cell {c} is not positive", values[c])));
        }
        Ok(Self { nx, ny, values })
    }

    pub fn constant(nx: usize, ny: usize, k: f64) -> Result<Self, ProblemError> {
        Self::new(nx, ny, vec![k; nx * ny])
    }

    /// Seeded field with `log10 K` uniform in `[log10 lo, log10 hi]`.
    pub fn random_log_uniform(nx: usize, ny: usize, lo: f64, hi: f64, seed: u64) -> Result<Self, ProblemError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (lo.log10(), hi.log10());
        let values = (0..nx * ny).map(|_| 10f64.powf(rng.gen_range(a..=b))).collect();
        Self::new(nx, ny, values)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, c: usize) -> f64 {
        self.values[c]
    }
}

/// Harmonic edge permeability `K_H`: `2 K_L K_R / (K_L + K_R)` across interior
/// edges and the adjacent cell value on the outer boundary.
pub fn harmonic_edge_coefficients(grid: &Grid, perm: &PermField) -> Vec<f64> {
    (0..grid.num_edges())
        .map(|e| match grid.edge(e).cells {
            [Some(l), Some(r)] => harmonic(perm.get(l), perm.get(r)),
            [Some(c), None] | [None, Some(c)] => perm.get(c),
            [None, None] => unreachable!("edge without cells"),
        })
        .collect()
}

#[inline]
pub fn harmonic(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundaryCondition {
    /// Prescribed pressure `g`.
    Dirichlet(f64),
    /// Prescribed outward normal velocity `z`.
    Neumann(f64),
}

/// One condition per outer boundary edge, indexed by global edge id.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundarySpec {
    conds: Vec<Option<BoundaryCondition>>,
}

impl BoundarySpec {
    /// Assigns each side a condition built from the edge midpoint.
    pub fn from_fn(grid: &Grid, mut f: impl FnMut(Side, [f64; 2]) -> BoundaryCondition) -> Self {
        let mut conds = vec![None; grid.num_edges()];
        for (side, e) in grid.boundary_edges() {
            conds[e] = Some(f(side, grid.edge_midpoint(e)));
        }
        Self { conds }
    }

    pub fn zero_neumann(grid: &Grid) -> Self {
        Self::from_fn(grid, |_, _| BoundaryCondition::Neumann(0.0))
    }

    /// Pressure `left` on the left side, `right` on the right, no-flow elsewhere.
    pub fn left_right_dirichlet(grid: &Grid, left: f64, right: f64) -> Self {
        Self::from_fn(grid, |side, _| match side {
            Side::Left => BoundaryCondition::Dirichlet(left),
            Side::Right => BoundaryCondition::Dirichlet(right),
            _ => BoundaryCondition::Neumann(0.0),
        })
    }

    pub fn get(&self, e: usize) -> Option<BoundaryCondition> {
        self.conds.get(e).copied().flatten()
    }

    pub fn is_pure_neumann(&self) -> bool {
        !self.conds.iter().flatten().any(|c| matches!(c, BoundaryCondition::Dirichlet(_)))
    }

    fn validate(&self, grid: &Grid) -> Result<(), ProblemError> {
        if self.conds.len() != grid.num_edges() {
            return Err(ProblemError::InvalidArgument("boundary spec built for another grid".into()));
        }
        for e in 0..grid.num_edges() {
            match (grid.edge(e).is_boundary(), self.conds[e]) {
                (true, None) => {
                    return Err(ProblemError::InvalidArgument(format!("boundary edge {e} has no condition")))
                }
                (false, Some(_)) => {
                    return Err(ProblemError::InvalidArgument(format!("interior edge {e} carries a boundary condition")))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Closed-form solution attached to manufactured problems.
#[derive(Clone, Copy, Debug)]
pub struct ExactSolution {
    pub pressure: fn(f64, f64) -> f64,
    pub velocity: fn(f64, f64) -> [f64; 2],
}

impl ExactSolution {
    pub fn pressure_at_cells(&self, grid: &Grid) -> Vec<f64> {
        (0..grid.num_cells())
            .map(|c| {
                let [x, y] = grid.cell_center(c);
                (self.pressure)(x, y)
            })
            .collect()
    }

    /// Axis-aligned normal velocity at every edge midpoint.
    pub fn flux_at_edges(&self, grid: &Grid) -> Vec<f64> {
        (0..grid.num_edges())
            .map(|e| {
                let [x, y] = grid.edge_midpoint(e);
                let u = (self.velocity)(x, y);
                match grid.edge(e).axis {
                    Axis::X => u[0],
                    Axis::Y => u[1],
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct DarcyProblem {
    pub grid: Grid,
    pub perm: PermField,
    /// Harmonic edge permeability, one value per global edge.
    pub k_h: Vec<f64>,
    /// Cell-centered source `f`.
    pub source: Vec<f64>,
    pub bc: BoundarySpec,
    pub exact: Option<ExactSolution>,
}

impl DarcyProblem {
    pub fn new(grid: Grid, perm: PermField, source: Vec<f64>, bc: BoundarySpec) -> Result<Self, ProblemError> {
        if perm.shape() != (grid.nx(), grid.ny()) {
            return Err(ProblemError::Shape { got: perm.shape(), expected: (grid.nx(), grid.ny()) });
        }
        if source.len() != grid.num_cells() {
            return Err(ProblemError::InvalidArgument(format!(
                "source has {} values for {} cells",
                source.len(),
                grid.num_cells()
            )));
        }
        bc.validate(&grid)?;
        if bc.is_pure_neumann() {
            let h = grid.h();
            let source_total: f64 = source.iter().map(|f| f * h * h).sum();
            let mut outflow = 0.0;
            let mut scale = source.iter().map(|f| f.abs() * h * h).sum::<f64>();
            for (_, e) in grid.boundary_edges() {
                if let Some(BoundaryCondition::Neumann(z)) = bc.get(e) {
                    outflow += z * h;
                    scale += z.abs() * h;
                }
            }
            if (source_total - outflow).abs() > 1e-10 * scale.max(1.0) {
                return Err(ProblemError::Incompatible { source_total, outflow });
            }
        }
        let k_h = harmonic_edge_coefficients(&grid, &perm);
        Ok(Self { grid, perm, k_h, source, bc, exact: None })
    }

    pub fn with_exact(mut self, exact: ExactSolution) -> Self {
        self.exact = Some(exact);
        self
    }

    pub fn is_pure_neumann(&self) -> bool {
        self.bc.is_pure_neumann()
    }
}

fn cosine_pressure(x: f64, y: f64) -> f64 {
    (2.0 * PI * x).cos() * (2.0 * PI * y).cos()
}

fn cosine_velocity(x: f64, y: f64) -> [f64; 2] {
    let w = 2.0 * PI;
    [w * (w * x).sin() * (w * y).cos(), w * (w * x).cos() * (w * y).sin()]
}

fn cosine_source(x: f64, y: f64) -> f64 {
    8.0 * PI * PI * (2.0 * PI * x).cos() * (2.0 * PI * y).cos()
}

/// Unit square, `K = 1`, zero-flux boundary, exact `p = cos(2 pi x) cos(2 pi y)`,
/// on an `(m * n_loc)^2` grid.
pub fn make_homogeneous_problem(m: usize, n_loc: usize) -> Result<DarcyProblem, ProblemError> {
    if m == 0 || n_loc < 2 {
        return Err(ProblemError::InvalidArgument(format!("need m >= 1 and n_loc >= 2, got {m}, {n_loc}")));
    }
    let n = m * n_loc;
    let grid = Grid::new(n, n, 1.0 / n as f64, [0.0, 0.0])?;
    let source = (0..grid.num_cells())
        .map(|c| {
            let [x, y] = grid.cell_center(c);
            cosine_source(x, y)
        })
        .collect();
    let perm = PermField::constant(n, n, 1.0)?;
    let bc = BoundarySpec::zero_neumann(&grid);
    Ok(DarcyProblem::new(grid, perm, source, bc)?
        .with_exact(ExactSolution { pressure: cosine_pressure, velocity: cosine_velocity }))
}

/// SPE10 layer setup: `220 x 60` square cells of size `1/60`, pressure 1 on
/// the left, 0 on the right, no flow on top and bottom, no source.
pub fn make_spe10_problem(perm: PermField) -> Result<DarcyProblem, ProblemError> {
    let (nx, ny) = SPE10_LAYER_SHAPE;
    if perm.shape() != (nx, ny) {
        return Err(ProblemError::Shape { got: perm.shape(), expected: (nx, ny) });
    }
    let grid = Grid::new(nx, ny, 1.0 / ny as f64, [0.0, 0.0])?;
    let bc = BoundarySpec::left_right_dirichlet(&grid, 1.0, 0.0);
    DarcyProblem::new(grid, perm, vec![0.0; nx * ny], bc)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PermComponent {
    Kx,
    Ky,
    Kz,
}

impl PermComponent {
    fn index(self) -> usize {
        match self {
            PermComponent::Kx => 0,
            PermComponent::Ky => 1,
            PermComponent::Kz => 2,
        }
    }
}

impl fmt::Display for PermComponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PermComponent::Kx => "kx",
            PermComponent::Ky => "ky",
            PermComponent::Kz => "kz",
        })
    }
}

impl FromStr for PermComponent {
    type Err = ProblemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "kx" => Ok(PermComponent::Kx),
            "ky" => Ok(PermComponent::Ky),
            "kz" => Ok(PermComponent::Kz),
            _ => Err(ProblemError::InvalidArgument(format!("unknown permeability component '{s}'"))),
        }
    }
}

/// Extracts one layer of the SPE10 model-2 permeability file.
///
/// The file holds `60 x 220 x 85` values per component, components `kx, ky, kz`
/// in sequence, with the 60-cell index fastest, then the 220-cell index, then
/// the layer. The returned field lays the 220-cell direction along x.
pub fn load_spe10(path: &Path, layer: usize, component: PermComponent) -> Result<PermField, ProblemError> {
    let text = std::fs::read_to_string(path)
        .map_err(|err| ProblemError::Io { path: path.display().to_string(), err })?;
    parse_spe10(&text, layer, component)
}

pub fn parse_spe10(text: &str, layer: usize, component: PermComponent) -> Result<PermField, ProblemError> {
    if layer == 0 || layer > SPE10_NZ {
        return Err(ProblemError::LayerRange { layer, max: SPE10_NZ });
    }
    let per_layer = SPE10_NX * SPE10_NY;
    let start = component.index() * per_layer * SPE10_NZ + (layer - 1) * per_layer;
    let end = start + per_layer;
    let (nx, ny) = SPE10_LAYER_SHAPE;
    let mut values = vec![0.0; per_layer];
    let mut count = 0;
    for (offset, tok) in text.split_ascii_whitespace().enumerate().take(end) {
        count = offset + 1;
        let v: f64 = tok
            .parse()
            .map_err(|_| ProblemError::Parse { offset, message: format!("non-numeric token '{tok}'") })?;
        if offset < start {
            continue;
        }
        if !(v > 0.0 && v.is_finite()) {
            return Err(ProblemError::Parse { offset, message: format!("nonpositive permeability {v}") });
        }
        let r = offset - start;
        let (a, b) = (r % SPE10_NX, r / SPE10_NX);
        values[a * nx + b] = v;
    }
    if count < end {
        return Err(ProblemError::Parse { offset: count, message: format!("file ends after {count} values, need {end}") });
    }
    PermField::new(nx, ny, values)
}

const CACHE_TAG: &str = "spe10-layer";

/// Writes the layer cache: header `spe10-layer <layer> <component> 220 60`,
/// then the values in row-major cell order, one per line.
pub fn write_layer_cache(
    path: &Path,
    layer: usize,
    component: PermComponent,
    perm: &PermField,
) -> Result<(), ProblemError> {
    let io = |err| ProblemError::Io { path: path.display().to_string(), err };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    let (nx, ny) = perm.shape();
    writeln!(out, "{CACHE_TAG} {layer} {component} {nx} {ny}").map_err(io)?;
    for v in perm.values() {
        writeln!(out, "{v:?}").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Reads a layer cache written by [`write_layer_cache`].
pub fn read_layer_cache(path: &Path) -> Result<(usize, PermComponent, PermField), ProblemError> {
    let text = std::fs::read_to_string(path)
        .map_err(|err| ProblemError::Io { path: path.display().to_string(), err })?;
    let mut toks = text.split_ascii_whitespace().enumerate();
    let (_, tag) = next_token(&mut toks, "header")?;
    if tag != CACHE_TAG {
        return Err(ProblemError::Parse { offset: 0, message: format!("expected '{CACHE_TAG}', found '{tag}'") });
    }
    let layer: usize = parse_token(&mut toks, "layer")?;
    let (_, comp) = next_token(&mut toks, "component")?;
    let component: PermComponent = comp.parse()?;
    let nx: usize = parse_token(&mut toks, "nx")?;
    let ny: usize = parse_token(&mut toks, "ny")?;
    let mut values = Vec::with_capacity(nx * ny);
    for _ in 0..nx * ny {
        values.push(parse_token::<f64>(&mut toks, "value")?);
    }
    Ok((layer, component, PermField::new(nx, ny, values)?))
}

fn next_token<'a>(
    toks: &mut impl Iterator<Item = (usize, &'a str)>,
    what: &str,
) -> Result<(usize, &'a str), ProblemError> {
    toks.next().ok_or_else(|| ProblemError::Parse { offset: 0, message: format!("missing {what}") })
}

fn parse_token<'a, T: FromStr>(toks: &mut impl Iterator<Item = (usize, &'a str)>, what: &str) -> Result<T, ProblemError> {
    let (offset, t) = next_token(toks, what)?;
    t.parse().map_err(|_| ProblemError::Parse { offset, message: format!("bad {what} '{t}'") })
}

/// Loads either a layer cache or a raw SPE10 file (detected by the header tag).
pub fn load_spe10_any(path: &Path, layer: usize, component: PermComponent) -> Result<PermField, ProblemError> {
    let head = std::fs::read(path)
        .map_err(|err| ProblemError::Io { path: path.display().to_string(), err })?;
    if head.starts_with(CACHE_TAG.as_bytes()) {
        read_layer_cache(path).map(|(_, _, p)| p)
    } else {
        load_spe10(path, layer, component)
    }
}

/// Deterministic stand-in for an SPE10 fluvial layer on the `220 x 60` grid:
/// a smoothed log-normal background with meandering high-permeability channels,
/// spanning roughly seven orders of magnitude.
pub fn synthetic_channelized_field(seed: u64) -> PermField {
    let (nx, ny) = SPE10_LAYER_SHAPE;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise: Vec<f64> = (0..nx * ny).map(|_| rng.gen_range(-1.0..1.0)).collect();
    for _ in 0..3 {
        noise = box_blur(&noise, nx, ny, 2);
    }
    let mean = noise.iter().sum::<f64>() / noise.len() as f64;
    let var = noise.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / noise.len() as f64;
    let sd = var.sqrt().max(1e-12);
    let mut logk: Vec<f64> = noise.iter().map(|v| 1.1 * (v - mean) / sd).collect();

    let channels = 4;
    for ch in 0..channels {
        let y0 = (ch as f64 + 0.5) / channels as f64 * ny as f64 + rng.gen_range(-4.0..4.0);
        let amp = rng.gen_range(4.0..10.0);
        let wave = rng.gen_range(60.0..140.0);
        let phase = rng.gen_range(0.0..2.0 * PI);
        let half_width = rng.gen_range(2.0..3.5);
        let boost = rng.gen_range(2.5..3.5);
        for i in 0..nx {
            let yc = y0 + amp * (2.0 * PI * i as f64 / wave + phase).sin();
            for j in 0..ny {
                let d = (j as f64 + 0.5 - yc).abs();
                if d < half_width {
                    let c = j * nx + i;
                    logk[c] = logk[c].max(boost + 0.3 * (1.0 - d / half_width));
                }
            }
        }
    }
    let values = logk.iter().map(|l| 10f64.powf(l.clamp(-3.5, 4.0))).collect();
    PermField::new(nx, ny, values).expect("synthetic field is positive")
}

fn box_blur(v: &[f64], nx: usize, ny: usize, r: usize) -> Vec<f64> {
    let mut tmp = vec![0.0; v.len()];
    for j in 0..ny {
        for i in 0..nx {
            let (a, b) = (i.saturating_sub(r), (i + r).min(nx - 1));
            tmp[j * nx + i] = (a..=b).map(|k| v[j * nx + k]).sum::<f64>() / (b - a + 1) as f64;
        }
    }
    let mut out = vec![0.0; v.len()];
    for j in 0..ny {
        let (a, b) = (j.saturating_sub(r), (j + r).min(ny - 1));
        for i in 0..nx {
            out[j * nx + i] = (a..=b).map(|k| tmp[k * nx + i]).sum::<f64>() / (b - a + 1) as f64;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn homogeneous_setup() {
        let p = make_homogeneous_problem(8, 20).unwrap();
        assert_eq!((p.grid.nx(), p.grid.ny()), (160, 160));
        assert!(p.perm.values().iter().all(|&k| k == 1.0));
        assert!(p.is_pure_neumann());
        let ex = p.exact.unwrap();
        assert!(((ex.pressure)(0.0, 0.0) - 1.0).abs() < 1e-15);
        assert!((ex.pressure)(0.25, 0.0).abs() < 1e-15);
        let h = p.grid.h();
        let total: f64 = p.source.iter().map(|f| f * h * h).sum();
        assert!(total.abs() < 1e-10);
    }

    #[test]
    fn homogeneous_rejects_tiny_grids() {
        assert!(make_homogeneous_problem(0, 20).is_err());
        assert!(make_homogeneous_problem(2, 1).is_err());
    }

    #[test]
    fn harmonic_values() {
        let g = Grid::new(2, 1, 1.0, [0.0; 2]).unwrap();
        let perm = PermField::new(2, 1, vec![1.0, 3.0]).unwrap();
        let kh = harmonic_edge_coefficients(&g, &perm);
        assert!((kh[g.x_edge(1, 0)] - 1.5).abs() < 1e-15);
        assert_eq!(kh[g.x_edge(0, 0)], 1.0);
        assert_eq!(kh[g.x_edge(2, 0)], 3.0);
        let ones = PermField::constant(2, 1, 1.0).unwrap();
        assert_eq!(harmonic_edge_coefficients(&g, &ones)[g.x_edge(1, 0)], 1.0);
        let g1 = Grid::new(1, 1, 1.0, [0.0; 2]).unwrap();
        let seven = PermField::constant(1, 1, 7.0).unwrap();
        assert!(harmonic_edge_coefficients(&g1, &seven).iter().all(|&k| k == 7.0));
    }

    proptest! {
        #[test]
        fn harmonic_bounds(a in 1e-6f64..1e6, b in 1e-6f64..1e6) {
            let kh = harmonic(a, b);
            let m = a.min(b);
            prop_assert!(kh >= m * (1.0 - 1e-14));
            prop_assert!(kh <= 2.0 * m * (1.0 + 1e-14));
        }
    }

    #[test]
    fn spe10_boundaries() {
        let perm = PermField::constant(220, 60, 1.0).unwrap();
        let p = make_spe10_problem(perm).unwrap();
        for se in p.grid.side_edges(Side::Left) {
            assert_eq!(p.bc.get(se.edge), Some(BoundaryCondition::Dirichlet(1.0)));
        }
        for se in p.grid.side_edges(Side::Right) {
            assert_eq!(p.bc.get(se.edge), Some(BoundaryCondition::Dirichlet(0.0)));
        }
        for se in p.grid.side_edges(Side::Top) {
            assert_eq!(p.bc.get(se.edge), Some(BoundaryCondition::Neumann(0.0)));
        }
        assert!(p.source.iter().all(|&f| f == 0.0));
        assert!((p.grid.h() * 220.0 - 11.0 / 3.0).abs() < 1e-12);
        assert!(make_spe10_problem(PermField::constant(60, 220, 1.0).unwrap()).is_err());
    }

    #[test]
    fn rejects_nonpositive_perm() {
        assert!(PermField::new(1, 2, vec![1.0, 0.0]).is_err());
        assert!(PermField::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(PermField::new(1, 2, vec![1.0]).is_err());
    }

    #[test]
    fn incompatible_neumann_rejected() {
        let g = Grid::new(2, 2, 0.5, [0.0; 2]).unwrap();
        let perm = PermField::constant(2, 2, 1.0).unwrap();
        let bc = BoundarySpec::zero_neumann(&g);
        assert!(matches!(
            DarcyProblem::new(g.clone(), perm.clone(), vec![1.0; 4], bc.clone()),
            Err(ProblemError::Incompatible { .. })
        ));
        assert!(DarcyProblem::new(g, perm, vec![1.0, -1.0, 1.0, -1.0], bc).is_ok());
    }

    fn spe_text(fill: impl Fn(usize) -> String) -> String {
        let n = SPE10_NX * SPE10_NY * SPE10_NZ * 3;
        let mut s = String::with_capacity(n * 4);
        for k in 0..n {
            s.push_str(&fill(k));
            s.push(if k % 6 == 5 { '\n' } else { ' ' });
        }
        s
    }

    #[test]
    fn spe10_constant_file() {
        let text = spe_text(|_| "1.0".into());
        let perm = parse_spe10(&text, 40, PermComponent::Kx).unwrap();
        assert_eq!(perm.shape(), (220, 60));
        assert!(perm.values().iter().all(|&k| k == 1.0));
        assert!(matches!(parse_spe10(&text, 86, PermComponent::Kx), Err(ProblemError::LayerRange { .. })));
        assert!(matches!(parse_spe10(&text, 0, PermComponent::Kx), Err(ProblemError::LayerRange { .. })));
    }

    #[test]
    fn spe10_ordering() {
        // value encodes its own flat index so the placement can be checked
        let text = spe_text(|k| format!("{}", k + 1));
        let layer = 3;
        let perm = parse_spe10(&text, layer, PermComponent::Ky).unwrap();
        let per_layer = SPE10_NX * SPE10_NY;
        let base = per_layer * SPE10_NZ + (layer - 1) * per_layer;
        for (a, b) in [(0, 0), (59, 0), (0, 219), (17, 101)] {
            let expected = (base + b * SPE10_NX + a + 1) as f64;
            assert_eq!(perm.get(a * 220 + b), expected);
        }
    }

    #[test]
    fn spe10_errors() {
        let short = "1.0 2.0 3.0";
        assert!(matches!(
            parse_spe10(short, 1, PermComponent::Kx),
            Err(ProblemError::Parse { offset: 3, .. })
        ));
        let bad = "1.0 abc 3.0";
        assert!(matches!(parse_spe10(bad, 1, PermComponent::Kx), Err(ProblemError::Parse { offset: 1, .. })));
        let neg = "1.0 -2.0 3.0";
        assert!(matches!(parse_spe10(neg, 1, PermComponent::Kx), Err(ProblemError::Parse { offset: 1, .. })));
    }

    #[test]
    fn layer_cache_round_trip() {
        let perm = synthetic_channelized_field(7);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("layer.txt");
        write_layer_cache(&path, 40, PermComponent::Kx, &perm).unwrap();
        let (layer, comp, back) = read_layer_cache(&path).unwrap();
        assert_eq!((layer, comp), (40, PermComponent::Kx));
        assert_eq!(back.values(), perm.values());
        let first = std::fs::read_to_string(&path).unwrap();
        assert!(first.starts_with("spe10-layer 40 kx 220 60\n"));
        assert_eq!(load_spe10_any(&path, 1, PermComponent::Ky).unwrap().values(), perm.values());
    }

    #[test]
    fn synthetic_field_is_heterogeneous() {
        let perm = synthetic_channelized_field(40);
        let (lo, hi) = perm
            .values()
            .iter()
            .fold((f64::MAX, f64::MIN), |(lo, hi), &k| (lo.min(k), hi.max(k)));
        assert!(hi / lo > 1e5, "contrast {}", hi / lo);
        assert_eq!(perm.values(), synthetic_channelized_field(40).values());
    }

    #[test]
    fn manufactured_divergence_converges() {
        // central differences of the exact velocity at cell centers approach f
        let ex = ExactSolution { pressure: cosine_pressure, velocity: cosine_velocity };
        let mut errs = Vec::new();
        for n in [10usize, 20, 40, 80] {
            let h = 1.0 / n as f64;
            let mut worst: f64 = 0.0;
            for j in 0..n {
                for i in 0..n {
                    let (x, y) = ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
                    let div = ((ex.velocity)(x + h / 2.0, y)[0] - (ex.velocity)(x - h / 2.0, y)[0]) / h
                        + ((ex.velocity)(x, y + h / 2.0)[1] - (ex.velocity)(x, y - h / 2.0)[1]) / h;
                    worst = worst.max((div - cosine_source(x, y)).abs());
                }
            }
            errs.push((h, worst));
        }
        for w in errs.windows(2) {
            let slope = (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln();
            assert!(slope >= 1.8, "slope {slope}");
        }
    }
}
