//! Experiment runner for the multiscale Darcy solvers: configuration,
//! method matrix, reference solves and CSV / field outputs.

pub mod config;
pub mod experiments;
pub mod output;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(name = "mrcm", version, about = "Multiscale Robin coupled Darcy experiments")]
pub struct Cli {
    /// JSON experiment configuration; missing fields take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `outputs`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for local solves.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Override a configuration leaf, e.g. `--set problem.m=4 --set alphas=[1e-8,1,1e8]`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve each configured method and alpha; dump fields and jump profiles.
    Solve,
    /// Relative errors against the fine solve over the alpha list.
    AlphaSweep,
    /// Mesh refinement study of the homogeneous problem.
    Refine,
    /// Errors against the number of smoothing sweeps.
    SmoothStudy,
    /// Extract one layer of the raw SPE10 permeability file into a cache file.
    Spe10Import {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 40)]
        layer: usize,
        #[arg(long, default_value = "kx")]
        component: String,
        #[arg(long)]
        output: PathBuf,
    },
}

/// Configuration file plus `--out` and `--set` overrides.
pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let base = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let mut cfg = base.with_overrides(&cli.set)?;
    if let Some(out) = &cli.out {
        cfg.outputs = out.clone();
    }
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    if let Command::Spe10Import { input, layer, component, output } = &cli.command {
        let perm = experiments::spe10_import(input, *layer, component.parse()?, output)?;
        let (nx, ny) = perm.shape();
        let (lo, hi) = perm.values().iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        println!("wrote {} ({nx} x {ny}, k in [{lo:e}, {hi:e}])", output.display());
        return Ok(());
    }
    let cfg = resolve_config(&cli)?;
    let out = cfg.outputs.display().to_string();
    match cli.command {
        Command::Solve => {
            let t = experiments::run_solve(&cfg)?;
            println!("{} runs, fields under {out}", t.rows.len());
        }
        Command::AlphaSweep => {
            let t = experiments::run_alpha_sweep(&cfg)?;
            println!("{} rows written to {out}/alpha_sweep.csv", t.errors.rows.len());
        }
        Command::Refine => {
            let t = experiments::run_refinement(&cfg)?;
            for r in &t.slopes.rows {
                println!("{:<10} alpha {:<24} slope p {:<24} u {}", r[0], r[4], r[5], r[6]);
            }
        }
        Command::SmoothStudy => {
            let t = experiments::run_smoothing_study(&cfg)?;
            println!("{} rows written to {out}/smooth_study.csv", t.rows.len());
        }
        Command::Spe10Import { .. } => unreachable!(),
    }
    Ok(())
}
