//! End-to-end tests of the command-line binary: artifact layout, exit
//! codes, and reproducibility, all through the public interface.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_cfspring");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// The demo scenario: 1000 kg follower, 50 s at 10 Hz behind a lead car
/// easing up to 15 m/s, with the stock nine-hypothesis delay bank.
fn demo_config(dir: &Path) -> PathBuf {
    let text = "\
[model]
mass_kg = 1000
stiffness = 100
damping = 500
slope_s = 5
delay_tau = 0.5
v_low = 2
v_high = 30
x0_min = 10
x0_max = 150

[simulation]
horizon = 50
dt = 0.1
v0 = 5
dx0 = 20
lead = exp_approach 15 5 0.05
mode = linear
integrator = euler

[identification]
d_min = 2
d_max = 10
lambda = 0.95
delta = 10
eta_learn = 0.05
";
    let path = dir.join("run.ini");
    fs::write(&path, text).unwrap();
    path
}

fn line_count(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn simulate_writes_the_full_sampled_trajectory() {
    let dir = TempDir::new().unwrap();
    let cfg = demo_config(dir.path());
    let out = dir.path().join("out");

    let res = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "simulate failed: {}", stderr_of(&res));

    // 50 s at 0.1 s plus the initial sample, plus the header line.
    let traj = out.join("trajectory.csv");
    assert_eq!(line_count(&traj), 502);

    let svg = fs::read_to_string(out.join("speeds.svg")).unwrap();
    assert!(svg.starts_with("<svg"), "speed plot should be an SVG document");
}

#[test]
fn simulate_rejects_config_missing_mass_with_exit_2() {
    let dir = TempDir::new().unwrap();
    let cfg = demo_config(dir.path());
    let text = fs::read_to_string(&cfg).unwrap();
    let stripped: String =
        text.lines().filter(|l| !l.starts_with("mass_kg")).collect::<Vec<_>>().join("\n");
    fs::write(&cfg, stripped).unwrap();

    let out = dir.path().join("out");
    let res = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(
        stderr_of(&res).contains("mass_kg"),
        "error should name the missing key, got: {}",
        stderr_of(&res)
    );
}

#[test]
fn identify_rejects_empty_trajectory_with_exit_3() {
    let dir = TempDir::new().unwrap();
    let traj = dir.path().join("empty.csv");
    fs::write(&traj, "t,dx,v_ego,dv,a_ego,u_lead\n").unwrap();

    let out = dir.path().join("out");
    let res =
        run(&["identify", "--trajectory", traj.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(3), "stderr: {}", stderr_of(&res));
}

#[test]
fn commands_needing_a_config_fail_with_exit_2_without_one() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    for cmd in ["simulate", "stability", "study"] {
        let res = run(&[cmd, "--out", out.to_str().unwrap()]);
        assert_eq!(res.status.code(), Some(2), "{cmd} without --config should exit 2");
    }
}

#[test]
fn stability_grid_rows_scale_with_the_axes() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("grid.ini");
    fs::write(
        &cfg,
        "\
[stability]
alpha_min = 0.5
alpha_max = 1.5
alpha_steps = 2
beta_min = 1
beta_max = 3
beta_steps = 2
tau_min = 0.2
tau_max = 0.6
tau_steps = 3
slope_s = 5
poly_order = 12
quad_order = 17
",
    )
    .unwrap();

    let out = dir.path().join("out");
    let res =
        run(&["stability", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "stability failed: {}", stderr_of(&res));

    // 2 x 2 cells for each of the 3 delays, plus the header line.
    assert_eq!(line_count(&out.join("stability.csv")), 13);
    for ti in 0..3 {
        assert!(out.join(format!("stability_tau{ti}.svg")).exists(), "missing heatmap {ti}");
    }
}

#[test]
fn identify_recovers_the_scenario_parameters() {
    let dir = TempDir::new().unwrap();
    let cfg = demo_config(dir.path());
    let out = dir.path().join("out");

    let res = run(&["identify", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "identify failed: {}", stderr_of(&res));

    // Interface of record is the CSV; take the terminal estimate.
    let history = fs::read_to_string(out.join("ident_history.csv")).unwrap();
    let last = history.lines().last().unwrap();
    let fields: Vec<&str> = last.split(',').collect();
    assert_eq!(fields.len(), 6, "row layout k,d,alpha_id,beta_id,gamma_id,cost");
    let d: usize = fields[1].parse().unwrap();
    let est: Vec<f64> = fields[2..5].iter().map(|s| s.parse().unwrap()).collect();

    assert!(d == 4 || d == 5, "selected delay should bracket 0.5 s, got d = {d}");
    let truth = [0.1, -0.5, 0.5];
    for (e, t) in est.iter().zip(truth) {
        assert!(
            (e - t).abs() <= 0.01 * t.abs(),
            "estimate {e} misses {t} by more than 1%, row: {last}"
        );
    }
}

#[test]
fn identify_reports_are_reproducible_for_a_seed() {
    let dir = TempDir::new().unwrap();
    let cfg = demo_config(dir.path());

    let mut bundles = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let res = run(&[
            "identify",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--snr",
            "15",
            "--seed",
            "3",
        ]);
        assert!(res.status.success(), "identify failed: {}", stderr_of(&res));
        bundles.push((
            fs::read(out.join("ident_history.csv")).unwrap(),
            fs::read(out.join("cost_history.csv")).unwrap(),
        ));
    }
    assert_eq!(bundles[0].0, bundles[1].0, "same seed must give identical estimates");
    assert_eq!(bundles[0].1, bundles[1].1, "same seed must give identical cost curves");
}

#[test]
fn dde_integrator_with_zero_delay_runs_as_plain_ode() {
    let dir = TempDir::new().unwrap();
    let cfg = demo_config(dir.path());
    let text = fs::read_to_string(&cfg).unwrap().replace("delay_tau = 0.5", "delay_tau = 0");
    fs::write(&cfg, text).unwrap();

    let out = dir.path().join("out");
    let res = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--integrator",
        "dde",
    ]);
    assert!(res.status.success(), "zero-delay dde run failed: {}", stderr_of(&res));
    assert_eq!(line_count(&out.join("trajectory.csv")), 502);
}

#[test]
fn study_writes_summary_bundle() {
    let dir = TempDir::new().unwrap();
    let cfg = demo_config(dir.path());
    let text = fs::read_to_string(&cfg).unwrap().replace("horizon = 50", "horizon = 20")
        + "\n[noise]\nsnr_db = inf\nseeds = 2\n";
    fs::write(&cfg, text).unwrap();

    let out = dir.path().join("out");
    let res = run(&["study", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "study failed: {}", stderr_of(&res));

    // One level, two seeds: header + 1 mean row; header + 2 trial rows.
    assert_eq!(line_count(&out.join("study_means.csv")), 2);
    assert_eq!(line_count(&out.join("study_trials.csv")), 3);
    assert!(out.join("speeds.svg").exists());
    assert!(out.join("param_convergence_snrinf.svg").exists());
    assert!(out.join("cost_vs_delay.svg").exists());
}

#[test]
fn shipped_demo_config_drives_every_command() {
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/demo.ini");
    assert!(cfg.exists(), "repository demo config should exist");

    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let res = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "demo config simulate failed: {}", stderr_of(&res));
    assert_eq!(line_count(&out.join("trajectory.csv")), 502);
}
