//! Command-line driver for the car-following toolkit.
//!
//! The binary is a thin shell: it parses flags and an INI-style run
//! configuration, calls into the `cfspring` library, and writes CSV and SVG
//! artifacts into the output directory. No numerics live here.
//!
//! Exit codes: 0 success, 2 configuration problem, 3 data problem,
//! 4 numerical failure.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cfspring::dde::DdeError;
use cfspring::harness::{
    identification_study, noisy_trajectory, run_identification, HarnessError, IdentRun,
    ScenarioSpec,
};
use cfspring::ident::IdentError;
use cfspring::io::config::{ConfigError, Integrator, RunConfig, SimulationConfig};
use cfspring::io::csv::{self, CsvError};
use cfspring::io::svg::{line_plot, stability_heatmap, PlotOptions, Series};
use cfspring::sem::{stability_sweep, SemError};
use cfspring::{simulate_dde, simulate_euler, CFParams, CFState, History, Mode, Scalar, Trajectory};

#[derive(Parser)]
#[command(
    name = "cfspring",
    version,
    about = "Car-following mass-spring-damper toolkit: simulation, delay stability maps, online parameter identification"
)]
struct Cli {
    /// INI-style run configuration (see README for the format).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Directory artifacts are written into (created if missing).
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    /// Base seed for noise generation.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads for grid sweeps; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the model and write the trajectory (CSV + speed plot).
    Simulate(SimulateArgs),
    /// Sweep the stiffness/damping grid per delay and map spectral radii.
    Stability,
    /// Run the delay-bank estimator over a trajectory.
    Identify(IdentifyArgs),
    /// Full campaign: simulate, perturb at each noise level, identify across seeds.
    Study,
}

#[derive(Args)]
struct SimulateArgs {
    /// Override the configured acceleration law.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,

    /// Override the configured integration scheme.
    #[arg(long, value_enum)]
    integrator: Option<IntegratorArg>,
}

#[derive(Args)]
struct IdentifyArgs {
    /// Identify from a recorded trajectory CSV instead of simulating.
    #[arg(long, value_name = "CSV")]
    trajectory: Option<PathBuf>,

    /// Inject measurement noise at this SNR (dB) before identification.
    #[arg(long, value_name = "DB")]
    snr: Option<Scalar>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Linear,
    Nonlinear,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Linear => Mode::Linear,
            ModeArg::Nonlinear => Mode::Nonlinear,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum IntegratorArg {
    Euler,
    Dde,
}

impl From<IntegratorArg> for Integrator {
    fn from(i: IntegratorArg) -> Integrator {
        match i {
            IntegratorArg::Euler => Integrator::Euler,
            IntegratorArg::Dde => Integrator::Dde,
        }
    }
}

/// Command failure, classified by exit code.
#[derive(Debug)]
enum CliError {
    /// Bad flags or configuration (exit 2).
    Config(String),
    /// Unreadable, malformed, or insufficient data (exit 3).
    Data(String),
    /// Numerical failure inside a computation (exit 4).
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration: {m}"),
            CliError::Data(m) => write!(f, "data: {m}"),
            CliError::Numeric(m) => write!(f, "numeric: {m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<CsvError> for CliError {
    fn from(e: CsvError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<DdeError> for CliError {
    fn from(e: DdeError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<SemError> for CliError {
    fn from(e: SemError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<IdentError> for CliError {
    fn from(e: IdentError) -> Self {
        match &e {
            IdentError::InvalidConfig(_) => CliError::Config(e.to_string()),
            IdentError::NotReady { .. } | IdentError::InsufficientData { .. } => {
                CliError::Data(e.to_string())
            }
            IdentError::Linalg(_) => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::InvalidInput(_) | HarnessError::ZeroPowerSignal { .. } => {
                CliError::Data(e.to_string())
            }
            HarnessError::Dde(inner) => inner.into(),
            HarnessError::Ident(inner) => inner.into(),
            HarnessError::Model(inner) => CliError::Config(inner.to_string()),
        }
    }
}

fn main() -> ExitCode {
    // Rust ignores SIGPIPE by default, turning `cfspring ... | head` into a
    // panic on the first print after the pipe closes. Restore the usual Unix
    // behavior: die quietly when the reader goes away.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if cli.threads > 0 {
        // The global pool installs once per process; a repeat attempt is
        // harmless and not worth aborting over.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", cli.out.display())))?;
    match &cli.command {
        Command::Simulate(args) => cmd_simulate(cli, args),
        Command::Stability => cmd_stability(cli),
        Command::Identify(args) => cmd_identify(cli, args),
        Command::Study => cmd_study(cli),
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::parse(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        }
        None => Err(CliError::Config(
            "this command needs a configuration file; pass --config <path>".to_string(),
        )),
    }
}

/// Like `load_config`, but an absent `--config` falls back to defaults, so
/// `identify` can run on a recorded trajectory with the stock bank.
fn load_config_or_default(cli: &Cli) -> Result<RunConfig, CliError> {
    if cli.config.is_some() {
        load_config(cli)
    } else {
        Ok(RunConfig::parse("").expect("empty config parses to defaults"))
    }
}

fn write_artifact(out: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = out.join(name);
    fs::write(&path, contents)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Short human-readable number for titles and console lines.
fn fmt_num(v: Scalar) -> String {
    let mut s = format!("{v:.4}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

/// Label for SNR levels in file names: "15", "7.5", "inf".
fn snr_label(v: Scalar) -> String {
    if v.is_infinite() {
        if v > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        }
    } else {
        format!("{v}")
    }
}

fn integrate(
    params: &CFParams<Scalar>,
    sim: &SimulationConfig,
    mode: Mode,
    integrator: Integrator,
) -> Result<Trajectory<Scalar>, CliError> {
    let x0 = CFState { x1: sim.dx0, x2: sim.v0 };
    let traj = match integrator {
        Integrator::Euler => simulate_euler(params, &sim.lead, x0, sim.horizon, sim.dt, mode)?,
        Integrator::Dde => {
            simulate_dde(params, &sim.lead, &History::Constant(x0), sim.horizon, sim.dt, mode)?
        }
    };
    Ok(traj)
}

fn cmd_simulate(cli: &Cli, args: &SimulateArgs) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    let params = cfg.require_model()?;
    let sim = cfg.require_simulation()?;
    let mode = args.mode.map(Mode::from).unwrap_or(sim.mode);
    let integrator = args.integrator.map(Integrator::from).unwrap_or(sim.integrator);

    let traj = integrate(params, sim, mode, integrator)?;
    write_artifact(&cli.out, "trajectory.csv", &csv::write_trajectory(&traj))?;

    let times: Vec<Scalar> = (0..traj.len()).map(|k| traj.time(k)).collect();
    let svg = line_plot(
        &[
            Series { name: "ego speed", x: &times, y: &traj.v_ego },
            Series { name: "lead speed", x: &times, y: &traj.u_lead },
        ],
        &PlotOptions {
            title: "Vehicle speeds",
            x_label: "t [s]",
            y_label: "speed [m/s]",
            ..PlotOptions::default()
        },
    );
    write_artifact(&cli.out, "speeds.svg", &svg)?;

    if let Some(t) = traj.diverged_at {
        println!("integration diverged at t = {} s; trajectory truncated there", fmt_num(t));
    }
    println!("{} rows ({} s at dt = {} s)", traj.len(), fmt_num(sim.horizon), fmt_num(sim.dt));
    Ok(())
}

fn cmd_stability(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    let stab = cfg.require_stability()?;

    let grid = stability_sweep(
        &stab.alpha.values(),
        &stab.beta.values(),
        &stab.tau.values(),
        stab.slope_s,
        &stab.sem,
    );
    write_artifact(&cli.out, "stability.csv", &csv::write_stability_grid(&grid))?;

    let per_slice = grid.alpha_values.len() * grid.beta_values.len();
    for (ti, &tau) in grid.tau_values.clone().iter().enumerate() {
        let title = format!("Spectral radius map, delay {} s", fmt_num(tau));
        let svg = stability_heatmap(&grid, ti, &title);
        write_artifact(&cli.out, &format!("stability_tau{ti}.svg"), &svg)?;
        println!("tau = {:>7}: {} of {} cells stable", fmt_num(tau), grid.stable_count(ti), per_slice);
    }

    let errors = grid.error_count();
    if errors > 0 {
        eprintln!("warning: {errors} cells failed numerically (stable=error rows in the CSV)");
    }
    Ok(())
}

/// Writes the CSV/SVG report bundle of one identification run. `suffix`
/// distinguishes per-level bundles in studies ("" for plain identify).
fn report_ident(cli: &Cli, run: &IdentRun<Scalar>, suffix: &str) -> Result<(), CliError> {
    write_artifact(
        &cli.out,
        &format!("ident_history{suffix}.csv"),
        &csv::write_ident_history(&run.steps),
    )?;
    write_artifact(
        &cli.out,
        &format!("cost_history{suffix}.csv"),
        &csv::write_cost_history(&run.delays, &run.cost_rows),
    )?;
    write_artifact(
        &cli.out,
        &format!("bank_checkpoint{suffix}.csv"),
        &csv::write_bank_checkpoint(&csv::checkpoint_rows(&run.bank)),
    )?;

    let ks: Vec<Scalar> = run.steps.iter().map(|s| s.k as Scalar).collect();
    let p1: Vec<Scalar> = run.steps.iter().map(|s| s.params[0]).collect();
    let p2: Vec<Scalar> = run.steps.iter().map(|s| s.params[1]).collect();
    let p3: Vec<Scalar> = run.steps.iter().map(|s| s.params[2]).collect();
    let svg = line_plot(
        &[
            Series { name: "alpha_id", x: &ks, y: &p1 },
            Series { name: "beta_id", x: &ks, y: &p2 },
            Series { name: "gamma_id", x: &ks, y: &p3 },
        ],
        &PlotOptions {
            title: "Parameter estimates of the selected delay hypothesis",
            x_label: "sample k",
            y_label: "estimate",
            ..PlotOptions::default()
        },
    );
    write_artifact(&cli.out, &format!("param_convergence{suffix}.svg"), &svg)?;

    let cost_x: Vec<Scalar> = run.cost_rows.iter().map(|(k, _)| *k as Scalar).collect();
    let cost_cols: Vec<Vec<Scalar>> = (0..run.delays.len())
        .map(|i| run.cost_rows.iter().map(|(_, costs)| costs[i]).collect())
        .collect();
    let names: Vec<String> = run.delays.iter().map(|d| format!("d = {d}")).collect();
    let series: Vec<Series<Scalar>> = names
        .iter()
        .zip(&cost_cols)
        .map(|(name, col)| Series { name: name.as_str(), x: &cost_x, y: col.as_slice() })
        .collect();
    let svg = line_plot(
        &series,
        &PlotOptions {
            title: "Smoothed prediction-error cost per delay hypothesis",
            x_label: "sample k",
            y_label: "cost J",
            log_y: true,
            ..PlotOptions::default()
        },
    );
    write_artifact(&cli.out, &format!("cost_curves{suffix}.svg"), &svg)?;
    Ok(())
}

fn cmd_identify(cli: &Cli, args: &IdentifyArgs) -> Result<(), CliError> {
    // A recorded trajectory carries its own sampling; the config (and with
    // it the stock bank settings) is then optional.
    let cfg = if args.trajectory.is_some() {
        load_config_or_default(cli)?
    } else {
        load_config(cli)?
    };

    let mut traj = match &args.trajectory {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
            csv::read_trajectory(&text)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        }
        None => {
            let params = cfg.require_model()?;
            let sim = cfg.require_simulation()?;
            integrate(params, sim, sim.mode, sim.integrator)?
        }
    };
    if traj.len() < 2 {
        return Err(CliError::Data(format!(
            "trajectory holds {} samples; need at least 2",
            traj.len()
        )));
    }
    if let Some(snr) = args.snr {
        traj = noisy_trajectory(&traj, snr, cli.seed)?;
        println!("injected channel noise at {} dB (seed {})", fmt_num(snr), cli.seed);
    }

    let truth = cfg.model.as_ref().map(|m| m.ident_triple(0).as_array());
    let settings = &cfg.identification;
    let run = run_identification(&traj, &settings.bank, truth.as_ref(), settings.tol)?;
    report_ident(cli, &run, "")?;

    match run.final_step() {
        Some(last) => {
            println!(
                "selected delay d = {} ({} s at dt = {} s)",
                last.d,
                fmt_num(last.d as Scalar * traj.dt),
                fmt_num(traj.dt)
            );
            println!(
                "estimate: alpha_id = {}, beta_id = {}, gamma_id = {} (cost {})",
                fmt_num(last.params[0]),
                fmt_num(last.params[1]),
                fmt_num(last.params[2]),
                fmt_num(last.cost),
            );
            if last.params[0] != 0.0 {
                println!(
                    "implied spring-law slope s = {}",
                    fmt_num(-last.params[1] / last.params[0])
                );
            }
            if let Some(k) = run.convergence_step {
                println!("estimates settled within tolerance from step {k}");
            }
        }
        None => {
            return Err(CliError::Data(format!(
                "trajectory too short: no delay hypothesis completed the {}-sample warm-up",
                settings.bank.warmup
            )));
        }
    }
    Ok(())
}

fn cmd_study(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    let params = cfg.require_model()?;
    let sim = cfg.require_simulation()?;

    let spec = ScenarioSpec {
        params: params.clone(),
        lead: sim.lead.clone(),
        v0: sim.v0,
        dx0: sim.dx0,
        horizon: sim.horizon,
        dt: sim.dt,
        mode: sim.mode,
        noise_levels_db: cfg.noise.snr_db.clone(),
        seed: cli.seed,
    };
    let levels = identification_study(&spec, &cfg.identification.bank, cfg.noise.seeds)?;

    write_artifact(
        &cli.out,
        "study_trials.csv",
        &csv::write_study_trials(&csv::study_trial_rows(&levels)),
    )?;
    write_artifact(&cli.out, "study_means.csv", &csv::write_study_means(&levels))?;

    // Speed traces of the underlying clean scenario.
    let clean =
        simulate_euler(params, &sim.lead, spec.initial_state(), sim.horizon, sim.dt, sim.mode)?;
    let times: Vec<Scalar> = (0..clean.len()).map(|k| clean.time(k)).collect();
    let svg = line_plot(
        &[
            Series { name: "ego speed", x: &times, y: &clean.v_ego },
            Series { name: "lead speed", x: &times, y: &clean.u_lead },
        ],
        &PlotOptions {
            title: "Vehicle speeds (clean scenario)",
            x_label: "t [s]",
            y_label: "speed [m/s]",
            ..PlotOptions::default()
        },
    );
    write_artifact(&cli.out, "speeds.svg", &svg)?;

    // Per-level report bundles from the detailed first trial.
    for level in &levels {
        report_ident(cli, &level.detail, &format!("_snr{}", snr_label(level.snr_db)))?;
    }

    // Terminal cost across delay hypotheses, one curve per noise level.
    if let Some(first) = levels.first() {
        let delays: Vec<Scalar> = first.detail.delays.iter().map(|&d| d as Scalar).collect();
        let finals: Vec<(String, Vec<Scalar>)> = levels
            .iter()
            .filter_map(|level| {
                level
                    .detail
                    .cost_rows
                    .last()
                    .map(|(_, costs)| (format!("{} dB", snr_label(level.snr_db)), costs.clone()))
            })
            .collect();
        let series: Vec<Series<Scalar>> = finals
            .iter()
            .map(|(name, col)| Series { name: name.as_str(), x: &delays, y: col.as_slice() })
            .collect();
        let svg = line_plot(
            &series,
            &PlotOptions {
                title: "Terminal cost by delay hypothesis",
                x_label: "delay steps d",
                y_label: "cost J",
                log_y: true,
                ..PlotOptions::default()
            },
        );
        write_artifact(&cli.out, "cost_vs_delay.svg", &svg)?;
    }

    for level in &levels {
        let selected = level.detail.final_step().map(|s| s.d.to_string());
        println!(
            "snr {:>5} dB: mean relative error {:.4}% over {} seeds (first-trial d = {})",
            snr_label(level.snr_db),
            level.mean_rel_error * 100.0,
            level.trials.len(),
            selected.as_deref().unwrap_or("-"),
        );
    }
    Ok(())
}
