//! The experiment drivers behind the subcommands. Each one computes its
//! tables, writes them under the configured output directory and returns them.

use std::path::Path;

use anyhow::{Context, Result};
use mrcm_core::darcy::{solve_fine, LocalFields};
use mrcm_core::decomposition::{build_partition, oversample, Partition};
use mrcm_core::metrics::{convergence_slope, error_report, flux_jump_profile};
use mrcm_core::mrcm::{solve_mrcm, MultiplierKind, MultiscaleSolution};
use mrcm_core::pipeline::{run_method, MethodRun};
use mrcm_core::problem::{
    load_spe10, load_spe10_any, make_homogeneous_problem, make_spe10_problem, synthetic_channelized_field,
    write_layer_cache, DarcyProblem, PermComponent, PermField,
};
use mrcm_core::smoothing::Smoother;

use crate::config::{resolve_jump_line, ExperimentConfig, MethodSpec, ProblemConfig, Purpose};
use crate::output::{create_dir, dump_solution, ms, num, slug, write_jump_profile, Table};

pub struct Setup {
    pub problem: DarcyProblem,
    pub partition: Partition,
    /// Where the permeability came from.
    pub source: String,
}

pub fn build_setup(cfg: &ExperimentConfig) -> Result<Setup> {
    match &cfg.problem {
        ProblemConfig::Homogeneous { m, n_loc } => {
            let problem = make_homogeneous_problem(*m, *n_loc)?;
            let partition = build_partition(&problem.grid, *m, *m)?;
            Ok(Setup { problem, partition, source: "homogeneous cosine problem".into() })
        }
        ProblemConfig::Spe10 { path, layer, component, subdomains } => {
            let (perm, source) = match path {
                Some(p) => (
                    load_spe10_any(p, *layer, (*component).into()).with_context(|| format!("loading {}", p.display()))?,
                    format!("SPE10 layer {layer} from {}", p.display()),
                ),
                None => (synthetic_channelized_field(cfg.seed), format!("synthetic channelized field, seed {}", cfg.seed)),
            };
            let problem = make_spe10_problem(perm)?;
            let partition = build_partition(&problem.grid, subdomains[0], subdomains[1])?;
            Ok(Setup { problem, partition, source })
        }
    }
}

fn mean_adjust(cfg: &ExperimentConfig, problem: &DarcyProblem) -> bool {
    cfg.mean_adjust.unwrap_or_else(|| problem.is_pure_neumann())
}

fn exact_fields(problem: &DarcyProblem) -> Option<LocalFields> {
    problem
        .exact
        .as_ref()
        .map(|e| LocalFields { pressure: e.pressure_at_cells(&problem.grid), flux: e.flux_at_edges(&problem.grid) })
}

/// `method, d, l, Ns, alpha` cells.
fn method_cells(spec: &MethodSpec, alpha: f64) -> Vec<String> {
    vec![
        spec.method().to_string(),
        spec.d.to_string(),
        spec.l.map_or(String::new(), |l| l.to_string()),
        spec.ns.to_string(),
        num(alpha),
    ]
}

fn prepare(cfg: &ExperimentConfig, purpose: Purpose) -> Result<()> {
    cfg.validate(purpose)?;
    create_dir(&cfg.outputs)?;
    std::fs::write(cfg.outputs.join("config.json"), cfg.to_json() + "\n")
        .with_context(|| format!("writing {}", cfg.outputs.join("config.json").display()))
}

fn dump_with_jumps(cfg: &ExperimentConfig, partition: &Partition, sol: &MultiscaleSolution, dir: &Path) -> Result<()> {
    dump_solution(partition, sol, dir)?;
    if partition.faces().is_empty() {
        return Ok(());
    }
    let (name, faces) = resolve_jump_line(cfg, partition)?;
    let samples = flux_jump_profile(partition, sol, &faces)?;
    write_jump_profile(&samples, &dir.join(format!("jump_{name}.csv")))
}

fn run_all(cfg: &ExperimentConfig, setup: &Setup, mut each: impl FnMut(&MethodSpec, f64, &MethodRun) -> Result<()>) -> Result<()> {
    for spec in &cfg.methods {
        for &alpha in &cfg.alphas {
            let run = run_method(&setup.problem, &setup.partition, spec.method(), alpha, cfg.smoothing_alpha)
                .with_context(|| format!("running {} at alpha {alpha:e}", spec.method()))?;
            each(spec, alpha, &run)?;
        }
    }
    Ok(())
}

pub struct SweepTables {
    pub errors: Table,
    pub timings: Table,
}

/// Relative errors against the fine solve for every (method, alpha).
/// Writes `alpha_sweep.csv` and `timings.csv`.
pub fn run_alpha_sweep(cfg: &ExperimentConfig) -> Result<SweepTables> {
    prepare(cfg, Purpose::AlphaSweep)?;
    let setup = build_setup(cfg)?;
    let fine = solve_fine(&setup.problem)?;
    let adjust = mean_adjust(cfg, &setup.problem);
    let mut errors = Table::new(&["method", "d", "l", "Ns", "alpha", "err_p_rel", "err_u_rel", "runtime_ms"]);
    let mut timings = Table::new(&[
        "method", "d", "l", "Ns", "alpha", "local_ms", "coupling_ms", "smoothing_ms", "total_ms", "interface_size", "deflated",
    ]);
    run_all(cfg, &setup, |spec, alpha, run| {
        let e = error_report(&setup.partition, &run.solution, &fine, adjust)?;
        let mut row = method_cells(spec, alpha);
        row.extend([num(e.pressure.rel), num(e.flux.rel), ms(run.timings.total())]);
        errors.push(row);
        let t = run.timings;
        let mut row = method_cells(spec, alpha);
        row.extend([
            ms(t.local),
            ms(t.coupling),
            ms(t.smoothing),
            ms(t.total()),
            run.interface_size.to_string(),
            run.deflated.to_string(),
        ]);
        timings.push(row);
        if cfg.dump_fields {
            let dir = cfg.outputs.join("fields").join(format!("{}_a{alpha:e}", slug(&spec.method().to_string())));
            dump_with_jumps(cfg, &setup.partition, &run.solution, &dir)?;
        }
        Ok(())
    })?;
    errors.write(&cfg.outputs.join("alpha_sweep.csv"))?;
    timings.write(&cfg.outputs.join("timings.csv"))?;
    Ok(SweepTables { errors, timings })
}

/// Solves every (method, alpha), dumping fields and jump profiles, plus the
/// fine reference. Writes `solve.csv` with errors against the fine solve and,
/// when the problem has one, against the exact solution.
pub fn run_solve(cfg: &ExperimentConfig) -> Result<Table> {
    prepare(cfg, Purpose::Solve)?;
    let setup = build_setup(cfg)?;
    let fine = solve_fine(&setup.problem)?;
    let exact = exact_fields(&setup.problem);
    let adjust = mean_adjust(cfg, &setup.problem);
    dump_solution(&setup.partition, &MultiscaleSolution::from_global(&setup.partition, &fine), &cfg.outputs.join("reference"))?;
    let mut table = Table::new(&[
        "method", "d", "l", "Ns", "alpha", "err_p_rel", "err_u_rel", "err_p_exact_rel", "err_u_exact_rel", "runtime_ms",
    ]);
    run_all(cfg, &setup, |spec, alpha, run| {
        let e = error_report(&setup.partition, &run.solution, &fine, adjust)?;
        let (ep, eu) = match &exact {
            Some(x) => {
                let r = error_report(&setup.partition, &run.solution, x, adjust)?;
                (num(r.pressure.rel), num(r.flux.rel))
            }
            None => (String::new(), String::new()),
        };
        let mut row = method_cells(spec, alpha);
        row.extend([num(e.pressure.rel), num(e.flux.rel), ep, eu, ms(run.timings.total())]);
        table.push(row);
        let dir = cfg.outputs.join(format!("{}_a{alpha:e}", slug(&spec.method().to_string())));
        dump_with_jumps(cfg, &setup.partition, &run.solution, &dir)
    })?;
    table.write(&cfg.outputs.join("solve.csv"))?;
    Ok(table)
}

pub struct RefineTables {
    pub errors: Table,
    pub slopes: Table,
}

/// Absolute errors against the exact solution over the configured subdomain
/// counts, with the fine solver as baseline. Writes `refine.csv` and
/// `refine_slopes.csv` (least squares slopes in log-log).
pub fn run_refinement(cfg: &ExperimentConfig) -> Result<RefineTables> {
    prepare(cfg, Purpose::Refine)?;
    let n_loc = match cfg.problem {
        ProblemConfig::Homogeneous { n_loc, .. } => n_loc,
        ProblemConfig::Spe10 { .. } => unreachable!("validated"),
    };
    let mut errors = Table::new(&["method", "d", "l", "Ns", "alpha", "M", "h", "err_p_abs", "err_u_abs", "runtime_ms"]);
    // (label cells, h, err_p, err_u) per series
    let mut series: Vec<(Vec<String>, Vec<f64>, Vec<f64>, Vec<f64>)> = Vec::new();
    let mut record = |cells: Vec<String>, h: f64, ep: f64, eu: f64| {
        match series.iter_mut().find(|s| s.0 == cells) {
            Some(s) => {
                s.1.push(h);
                s.2.push(ep);
                s.3.push(eu);
            }
            None => series.push((cells, vec![h], vec![ep], vec![eu])),
        }
    };
    for &m in &cfg.refine_m {
        let problem = make_homogeneous_problem(m, n_loc)?;
        let partition = build_partition(&problem.grid, m, m)?;
        let exact = exact_fields(&problem).expect("manufactured problem");
        let adjust = mean_adjust(cfg, &problem);
        let h = problem.grid.h();
        let t = std::time::Instant::now();
        let fine = solve_fine(&problem)?;
        let elapsed = t.elapsed();
        let e = error_report(&partition, &MultiscaleSolution::from_global(&partition, &fine), &exact, adjust)?;
        let cells = vec!["fine".to_string(), String::new(), String::new(), String::new(), String::new()];
        let mut row = cells.clone();
        row.extend([m.to_string(), num(h), num(e.pressure.abs), num(e.flux.abs), ms(elapsed)]);
        errors.push(row);
        record(cells, h, e.pressure.abs, e.flux.abs);
        let setup = Setup { problem, partition, source: String::new() };
        run_all(cfg, &setup, |spec, alpha, run| {
            let e = error_report(&setup.partition, &run.solution, &exact, adjust)?;
            let cells = method_cells(spec, alpha);
            let mut row = cells.clone();
            row.extend([m.to_string(), num(h), num(e.pressure.abs), num(e.flux.abs), ms(run.timings.total())]);
            errors.push(row);
            record(cells, h, e.pressure.abs, e.flux.abs);
            Ok(())
        })?;
    }
    let mut slopes = Table::new(&["method", "d", "l", "Ns", "alpha", "slope_p", "slope_u"]);
    for (cells, h, ep, eu) in series {
        let slope = |e: &[f64]| convergence_slope(&h, e).map(num).unwrap_or_else(|_| "nan".into());
        let mut row = cells;
        row.extend([slope(&ep), slope(&eu)]);
        slopes.push(row);
    }
    errors.write(&cfg.outputs.join("refine.csv"))?;
    slopes.write(&cfg.outputs.join("refine_slopes.csv"))?;
    Ok(RefineTables { errors, slopes })
}

/// Errors against the fine solve after `0..=max_smoothing_steps` sweeps for
/// every oversampled method and alpha (the configured sweep count is ignored).
/// Writes `smooth_study.csv`.
pub fn run_smoothing_study(cfg: &ExperimentConfig) -> Result<Table> {
    prepare(cfg, Purpose::SmoothStudy)?;
    let setup = build_setup(cfg)?;
    let fine = solve_fine(&setup.problem)?;
    let adjust = mean_adjust(cfg, &setup.problem);
    let mut table = Table::new(&["method", "d", "l", "alpha", "Ns", "err_p_abs", "err_u_abs", "err_p_rel", "err_u_rel"]);
    for spec in cfg.methods.iter().filter(|m| m.l.is_some()) {
        let base = MethodSpec { ns: 0, ..*spec };
        let l = base.l.expect("filtered");
        let opart = oversample(&setup.partition, l)?;
        for &alpha in &cfg.alphas {
            let out = solve_mrcm(&setup.problem, &opart, base.method().family, alpha, MultiplierKind::Informed)?;
            let smoother = if alpha == cfg.smoothing_alpha {
                Smoother::with_solvers(&setup.problem, &opart, out.hat_solvers.clone())?
            } else {
                Smoother::new(&setup.problem, &opart, cfg.smoothing_alpha)?
            };
            for (k, sol) in smoother.smooth_history(&out.solution, cfg.max_smoothing_steps)?.iter().enumerate() {
                let e = error_report(&setup.partition, sol, &fine, adjust)?;
                table.push(vec![
                    base.method().to_string(),
                    base.d.to_string(),
                    l.to_string(),
                    num(alpha),
                    k.to_string(),
                    num(e.pressure.abs),
                    num(e.flux.abs),
                    num(e.pressure.rel),
                    num(e.flux.rel),
                ]);
            }
        }
    }
    table.write(&cfg.outputs.join("smooth_study.csv"))?;
    Ok(table)
}

/// Extracts one layer of a raw SPE10 permeability file into a layer cache.
pub fn spe10_import(input: &Path, layer: usize, component: PermComponent, output: &Path) -> Result<PermField> {
    let perm = load_spe10(input, layer, component).with_context(|| format!("reading {}", input.display()))?;
    write_layer_cache(output, layer, component, &perm)?;
    Ok(perm)
}
