use std::fs;
use std::path::Path;
use std::process::Command;

use mrcm_cli::config::{ExperimentConfig, MethodSpec, ProblemConfig};
use mrcm_cli::experiments::{run_alpha_sweep, run_refinement, run_smoothing_study, run_solve, spe10_import};
use mrcm_core::problem::{read_layer_cache, PermComponent};

fn small(dir: &Path) -> ExperimentConfig {
    ExperimentConfig {
        problem: ProblemConfig::Homogeneous { m: 2, n_loc: 8 },
        methods: vec![MethodSpec { d: 2, l: None, ns: 0 }, MethodSpec { d: 2, l: Some(2), ns: 2 }],
        alphas: vec![1e-2, 1.0, 1e2],
        outputs: dir.to_path_buf(),
        ..Default::default()
    }
}

/// CSV records without the named column.
fn drop_column(path: &Path, name: &str) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let k = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().enumerate().filter(|(i, _)| *i != k).map(|(_, c)| c.to_string()).collect())
        .collect()
}

#[test]
fn alpha_sweep_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let t = run_alpha_sweep(&small(a.path())).unwrap();
    run_alpha_sweep(&small(b.path())).unwrap();
    assert_eq!(t.errors.header, ["method", "d", "l", "Ns", "alpha", "err_p_rel", "err_u_rel", "runtime_ms"]);
    assert_eq!(t.errors.rows.len(), 6);
    assert_eq!(t.errors.rows[4][0], "OL-2,2S");
    let read = |d: &Path| drop_column(&d.join("alpha_sweep.csv"), "runtime_ms");
    assert_eq!(read(a.path()), read(b.path()));
    assert!(a.path().join("timings.csv").exists());
    let cfg = ExperimentConfig::load(&a.path().join("config.json")).unwrap();
    assert_eq!(cfg, small(a.path()));
}

#[test]
fn solve_dumps_fields_and_jump_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.alphas = vec![1.0];
    let t = run_solve(&cfg).unwrap();
    assert_eq!(t.rows.len(), 2);
    let run = dir.path().join("OL-2_2S_a1e0");
    let p = fs::read_to_string(run.join("pressure.csv")).unwrap();
    assert_eq!(p.lines().count(), 16);
    assert!(p.lines().all(|l| l.split(',').count() == 16));
    // 17 x 16 x-edges plus one extra row per skeleton edge on the vertical line
    let fx = fs::read_to_string(run.join("flux_x.csv")).unwrap();
    assert_eq!(fx.lines().count(), 1 + 17 * 16 + 16);
    let jump = fs::read_to_string(run.join("jump_row0.csv")).unwrap();
    assert_eq!(jump.lines().count(), 1 + 16);
    assert!(dir.path().join("reference/pressure.vtk").exists());
    assert!(!t.rows[0][7].is_empty());
}

#[test]
fn spe10_solution_has_the_layer_shape() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        problem: ProblemConfig::Spe10 { path: None, layer: 40, component: Default::default(), subdomains: [11, 3] },
        methods: vec![MethodSpec { d: 1, l: None, ns: 0 }],
        outputs: dir.path().to_path_buf(),
        ..Default::default()
    };
    run_solve(&cfg).unwrap();
    let p = fs::read_to_string(dir.path().join("MRCM_a1e0/pressure.csv")).unwrap();
    assert_eq!(p.lines().count(), 60);
    assert!(p.lines().all(|l| l.split(',').count() == 220));
}

#[test]
fn refinement_reports_fine_slope_near_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.problem = ProblemConfig::Homogeneous { m: 2, n_loc: 10 };
    cfg.refine_m = vec![2, 4, 8];
    cfg.alphas = vec![1.0];
    let t = run_refinement(&cfg).unwrap();
    assert_eq!(t.errors.rows.len(), 9);
    let fine = t.slopes.rows.iter().find(|r| r[0] == "fine").unwrap();
    let slope: f64 = fine[5].parse().unwrap();
    assert!((1.8..=2.2).contains(&slope), "{slope}");
    assert_eq!(t.slopes.rows.len(), 3);
}

#[test]
fn smoothing_study_starts_from_plain_oversampling() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.alphas = vec![1.0];
    cfg.max_smoothing_steps = 3;
    let t = run_smoothing_study(&cfg).unwrap();
    assert_eq!(t.rows.len(), 4);
    assert!(t.rows.iter().all(|r| r[0] == "OL-2"));

    let sweep_dir = tempfile::tempdir().unwrap();
    let mut plain = small(sweep_dir.path());
    plain.methods = vec![MethodSpec { d: 2, l: Some(2), ns: 0 }];
    plain.alphas = vec![1.0];
    let s = run_alpha_sweep(&plain).unwrap();
    // N_s = 0 relative errors match the unsmoothed run
    assert_eq!(t.rows[0][7], s.errors.rows[0][5]);
    assert_eq!(t.rows[0][8], s.errors.rows[0][6]);
}

#[test]
fn spe10_import_writes_a_readable_cache() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("spe_perm.dat");
    let values: Vec<String> = (0..60 * 220).map(|k| format!("{}", 1.0 + k as f64)).collect();
    fs::write(&raw, values.join("\n")).unwrap();
    let cache = dir.path().join("layer1.txt");
    let perm = spe10_import(&raw, 1, PermComponent::Kx, &cache).unwrap();
    let (layer, comp, back) = read_layer_cache(&cache).unwrap();
    assert_eq!((layer, comp), (1, PermComponent::Kx));
    assert_eq!(back, perm);
    assert_eq!(back.shape(), (220, 60));
    assert!(spe10_import(&raw, 2, PermComponent::Kx, &cache).is_err());
}

fn mrcm(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_mrcm")).args(args).output().unwrap()
}

#[test]
fn binary_applies_overrides_and_reports_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let ok = mrcm(&[
        "alpha-sweep",
        "--out",
        out,
        "--threads",
        "2",
        "--set",
        "problem.m=2",
        "--set",
        "problem.n_loc=6",
        "--set",
        "alphas=[1e-8,1e8]",
    ]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    let csv = fs::read_to_string(dir.path().join("alpha_sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.contains("1.0000000000000000e-8"));

    let bad = mrcm(&["alpha-sweep", "--out", out, "--set", "methods.1.l=5", "--set", "problem.n_loc=6", "--set", "alphas=[0]"]);
    assert!(!bad.status.success());
    let err = String::from_utf8_lossy(&bad.stderr);
    assert!(err.contains("methods[1].l"), "{err}");
    assert!(err.contains("alphas[0]"), "{err}");

    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"problem": {"kind": "homogeneous", "m": 2, "n_loc": 6}, "methods": [{"d": 1, "l": 1, "ns": 1}]}"#).unwrap();
    let ok = mrcm(&["smooth-study", "--config", cfg.to_str().unwrap(), "--out", out, "--set", "max_smoothing_steps=2"]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    let csv = fs::read_to_string(dir.path().join("smooth_study.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}
