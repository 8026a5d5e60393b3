//! CSV tables and field dumps.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use mrcm_core::decomposition::Partition;
use mrcm_core::mesh::Axis;
use mrcm_core::metrics::JumpSample;
use mrcm_core::mrcm::MultiscaleSolution;

/// Scientific notation with 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn ms(d: std::time::Duration) -> String {
    format!("{:.3}", d.as_secs_f64() * 1e3)
}

/// Header plus rows of already formatted cells.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush().with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating directory {}", dir.display()))
}

/// Directory-safe form of a method label (`OL-4,4S` -> `OL-4_4S`).
pub fn slug(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
}

/// Writes `pressure.csv`, `flux_x.csv`, `flux_y.csv` and `pressure.vtk`.
///
/// `pressure.csv` has one line per cell row from the bottom (`y` increasing).
/// Flux files list one line per edge with its index pair, midpoint and side:
/// `interior` inside a subdomain or on the domain boundary, `lo` / `hi` for
/// the two subdomain values on a skeleton edge.
pub fn dump_solution(partition: &Partition, sol: &MultiscaleSolution, dir: &Path) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let grid = partition.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let p = sol.global_pressure(partition);
    let mut written = Vec::new();

    let path = dir.join("pressure.csv");
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(&path).with_context(|| format!("creating {}", path.display()))?;
    for j in 0..ny {
        w.write_record((0..nx).map(|i| num(p[grid.cell_id(i, j)])))?;
    }
    w.flush()?;
    written.push(path);

    for (axis, name) in [(Axis::X, "flux_x.csv"), (Axis::Y, "flux_y.csv")] {
        let mut t = Table::new(&["i", "j", "x", "y", "side", "flux"]);
        for e in 0..grid.num_edges() {
            let (a, i, j) = grid.edge_ij(e);
            if a != axis {
                continue;
            }
            let [x, y] = grid.edge_midpoint(e);
            let vals = sol.edge_fluxes(partition, e);
            let sides: &[&str] = if vals.len() == 2 { &["lo", "hi"] } else { &["interior"] };
            for (v, side) in vals.iter().zip(sides) {
                t.push(vec![i.to_string(), j.to_string(), num(x), num(y), side.to_string(), num(*v)]);
            }
        }
        let path = dir.join(name);
        t.write(&path)?;
        written.push(path);
    }

    let path = dir.join("pressure.vtk");
    write_vtk(partition, sol, &p, &path)?;
    written.push(path);
    Ok(written)
}

/// Legacy ASCII structured-points file with cell pressure and the cell
/// velocity averaged from each cell's own subdomain fluxes.
pub fn write_vtk(partition: &Partition, sol: &MultiscaleSolution, p: &[f64], path: &Path) -> Result<()> {
    let grid = partition.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let h = grid.h();
    let [ox, oy] = grid.origin();
    let mut vel = vec![[0.0; 2]; grid.num_cells()];
    for (s, f) in partition.subdomains().iter().zip(&sol.fields) {
        let g = s.grid();
        for c in 0..g.num_cells() {
            let [w, e, so, n] = g.cell_edges(c);
            vel[s.local_to_global_cell(c)] = [0.5 * (f.flux[w] + f.flux[e]), 0.5 * (f.flux[so] + f.flux[n])];
        }
    }
    let mut out = std::io::BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "multiscale darcy solution")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET STRUCTURED_POINTS")?;
    writeln!(out, "DIMENSIONS {} {} 2", nx + 1, ny + 1)?;
    writeln!(out, "ORIGIN {} {} 0", num(ox), num(oy))?;
    writeln!(out, "SPACING {} {} {}", num(h), num(h), num(h))?;
    writeln!(out, "CELL_DATA {}", nx * ny)?;
    writeln!(out, "SCALARS pressure double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for v in p {
        writeln!(out, "{}", num(*v))?;
    }
    writeln!(out, "VECTORS velocity double")?;
    for [u, v] in &vel {
        writeln!(out, "{} {} {}", num(*u), num(*v), num(0.0))?;
    }
    out.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_jump_profile(samples: &[JumpSample], path: &Path) -> Result<()> {
    let mut t = Table::new(&["edge", "s", "jump"]);
    for s in samples {
        t.push(vec![s.edge.to_string(), num(s.s), num(s.jump)]);
    }
    t.write(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mrcm_core::darcy::LocalFields;
    use mrcm_core::decomposition::build_partition;
    use mrcm_core::mesh::Grid;

    #[test]
    fn numbers_carry_seventeen_digits() {
        assert_eq!(num(1.0), "1.0000000000000000e0");
        assert_eq!(num(-0.1), "-1.0000000000000001e-1");
        let v = 1.0 / 3.0;
        assert_eq!(num(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn slugs_are_path_safe() {
        assert_eq!(slug("OL-4,4S"), "OL-4_4S");
        assert_eq!(slug("MRCM"), "MRCM");
    }

    #[test]
    fn single_cell_dump() {
        let g = Grid::new(1, 1, 1.0, [0.0; 2]).unwrap();
        let part = build_partition(&g, 1, 1).unwrap();
        let sol = MultiscaleSolution { fields: vec![LocalFields { pressure: vec![2.5], flux: vec![1.0, 1.0, 0.0, 0.0] }] };
        let dir = tempfile::tempdir().unwrap();
        dump_solution(&part, &sol, dir.path()).unwrap();
        let p = fs::read_to_string(dir.path().join("pressure.csv")).unwrap();
        assert_eq!(p.trim(), num(2.5));
        let fx = fs::read_to_string(dir.path().join("flux_x.csv")).unwrap();
        assert_eq!(fx.lines().count(), 3);
        let vtk = fs::read_to_string(dir.path().join("pressure.vtk")).unwrap();
        assert!(vtk.contains("DIMENSIONS 2 2 2"));
        assert!(vtk.contains("CELL_DATA 1"));
    }
}
