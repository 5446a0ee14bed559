use std::fs;
use std::path::Path;
use std::process::Command;

use roughvol::cli::{execute, run, Command as Cmd, StudyKind, EXIT_CONFIG, EXIT_OK};
use roughvol::config::{Format, RunConfig};
use roughvol::experiments::{convergence_study_with, ConvergenceOptions};
use roughvol::pricing::{corrected_price, Payoff};
use roughvol::report::config_from_sidecar;
use roughvol::{group_params, ModelParams, VolFunction};

fn small_config(dir: &Path) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.mc.n_paths = 2_000;
    cfg.study.eps_grid = vec![0.1, 0.05, 0.025, 0.0125];
    cfg.output.dir = dir.to_path_buf();
    cfg.output.formats = vec![Format::Csv, Format::Json];
    cfg
}

/// Column names and data rows of a CSV written by the report layer.
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let columns = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    (columns, rows)
}

fn column(cols: &[String], row: &[String], name: &str) -> f64 {
    let j = cols
        .iter()
        .position(|c| c == name)
        .unwrap_or_else(|| panic!("no column {name}"));
    row[j].parse().unwrap()
}

#[test]
fn same_config_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let names = ["price.csv", "price.json", "paths.csv"];
    let mut runs = Vec::new();
    for _ in 0..2 {
        let cfg = small_config(dir.path());
        execute(&Cmd::Price, &cfg).unwrap();
        let mut sim = cfg.clone();
        sim.mc.n_paths = 4;
        execute(&Cmd::Simulate, &sim).unwrap();
        runs.push(names.map(|n| fs::read(dir.path().join(n)).unwrap()));
    }
    for (k, name) in names.iter().enumerate() {
        assert_eq!(runs[0][k], runs[1][k], "{name}");
    }
}

#[test]
fn constant_volatility_has_no_correction() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.model.vol_fn = VolFunction::constant(0.2).unwrap();
    execute(&Cmd::Params, &cfg).unwrap();
    let (cols, rows) = read_csv(&dir.path().join("params.csv"));
    let value = |k: &str| {
        let r = rows.iter().find(|r| r[0] == k).unwrap();
        column(&cols, r, "value")
    };
    assert_eq!(value("d_bar"), 0.0);
    assert!((value("sigma_bar") - 0.2).abs() < 1e-14);
    assert!((value("tau_bar") - 50.0).abs() < 1e-9);
}

#[test]
fn zero_correlation_gives_leading_order_price() {
    let mp = ModelParams::new(0.3, 0.05, 0.0, VolFunction::bounded_sigmoid(0.1, 0.3, 1.0).unwrap()).unwrap();
    let gp = group_params(&mp).unwrap();
    let r = corrected_price(&mp, &gp, &Payoff::call(105.0).unwrap(), 0.0).unwrap();
    assert_eq!(r.q_eps, r.q0);
}

#[test]
fn price_at_maturity_is_the_payoff() {
    let mp = ModelParams::new(0.3, 0.05, -0.5, VolFunction::bounded_sigmoid(0.1, 0.3, 1.0).unwrap()).unwrap();
    let gp = group_params(&mp).unwrap();
    let payoff = Payoff::smooth_call(95.0, 0.05).unwrap();
    let r = corrected_price(&mp, &gp, &payoff, mp.maturity).unwrap();
    assert_eq!(r.q_eps, payoff.value(mp.x0));
}

#[test]
fn constant_volatility_convergence_errors_are_noise() {
    let mp = ModelParams::new(0.3, 0.1, -0.5, VolFunction::constant(0.25).unwrap()).unwrap();
    let opts = ConvergenceOptions {
        interior: false,
        ..Default::default()
    };
    let r = convergence_study_with(
        &mp,
        &[0.1, 0.05, 0.025, 0.0125],
        &Payoff::call(100.0).unwrap(),
        4_000,
        3,
        &opts,
    )
    .unwrap();
    for p in &r.points {
        assert!(
            p.error.abs() <= 4.0 * p.mc.std_error.max(1e-12),
            "eps {}: {} vs se {}",
            p.eps,
            p.error,
            p.mc.std_error
        );
    }
}

#[test]
fn sidecar_records_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    execute(
        &Cmd::Study {
            which: StudyKind::Termstructure,
        },
        &cfg,
    )
    .unwrap();
    let json = fs::read_to_string(dir.path().join("termstructure.json")).unwrap();
    assert_eq!(config_from_sidecar(&json).unwrap(), cfg);
    let csv = fs::read_to_string(dir.path().join("termstructure.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().contains(&cfg.hash()));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(run(["roughvol", "--out", out, "params"]), EXIT_OK);
    assert_eq!(run(["roughvol", "--out", out, "--hurst", "0.7", "params"]), EXIT_CONFIG);
    assert_eq!(run(["roughvol", "--out", out, "--rho", "1.5", "params"]), EXIT_CONFIG);
    assert_eq!(run(["roughvol", "--out", out, "nonsense"]), EXIT_CONFIG);

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "seed = 1\nunknown_key = 3\n").unwrap();
    assert_eq!(
        run(["roughvol", "--config", bad.to_str().unwrap(), "params"]),
        EXIT_CONFIG
    );

    let wild = dir.path().join("wild.toml");
    let text = small_config(dir.path()).to_toml_string().unwrap();
    let text = text.replace(
        "kind = \"bounded_sigmoid\"\nsigma_min = 0.1\nsigma_max = 0.3\nslope = 1.0",
        "kind = \"exponential\"\nlevel = 0.2\nscale = 0.5",
    );
    assert!(text.contains("exponential"), "{text}");
    fs::write(&wild, &text).unwrap();
    assert_eq!(
        run(["roughvol", "--config", wild.to_str().unwrap(), "params"]),
        EXIT_CONFIG
    );
    fs::write(&wild, text.replace("allow_unbounded = false", "allow_unbounded = true")).unwrap();
    assert_eq!(
        run(["roughvol", "--config", wild.to_str().unwrap(), "--out", out, "params"]),
        EXIT_OK
    );
}

#[test]
fn binary_runs_the_shipped_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("config/example.toml");
    let status = Command::new(env!("CARGO_BIN_EXE_roughvol"))
        .args([
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
            "--paths",
            "2000",
            "price",
        ])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let (cols, rows) = read_csv(&dir.path().join("price.csv"));
    let z = column(&cols, &rows[0], "mc_minus_q_eps_over_se");
    assert!(z.abs() < 5.0, "MC price is {z} standard errors from q_eps");
    let status = Command::new(env!("CARGO_BIN_EXE_roughvol"))
        .args(["--hurst", "0.9", "params"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(EXIT_CONFIG));
}
