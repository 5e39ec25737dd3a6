//! Command-line front end: each subcommand maps onto one library
//! capability. All heavy lifting lives in the `optomech` library crate.

use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use optomech::config::load_config;
use optomech::effective::{effective_model, eigenmodes_closed_form, eigenmodes_numeric, locate_ep};
use optomech::error::Error;
use optomech::model::{adiabaticity_ratio, build_dynamics, ADIABATICITY_WARN_THRESHOLD};
use optomech::spectra::{default_grid, probe_psd};
use optomech::steady_state::{dark_mode_limit, phonon_report, reduced_lyapunov, solve_model};
use optomech::sweep::{
    builtin_scenario, builtin_scenarios, emit, run_sweep, EmitFormat, EmitMeta, Scenario,
    SweepOptions,
};
use optomech::trajectory::{
    estimate_occupations, reduced_system, simulate, InitialState, TrajectoryConfig, RNG_IDENTITY,
};

const TAU: f64 = std::f64::consts::TAU;

#[derive(Parser)]
#[command(
    name = "optomech",
    version,
    about = "Four-mode cavity optomechanics: dark modes, exceptional points, and two-cavity cooling sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Built-in sweep scenarios.
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
    /// Eigenmode report at one operating point.
    Eigen(PointArgs),
    /// Steady-state phonon numbers at one operating point.
    Cool {
        #[command(flatten)]
        point: PointArgs,
        /// Also solve the full 4-mode model.
        #[arg(long)]
        full_model: bool,
    },
    /// Probe power spectral density at one operating point.
    Psd {
        #[command(flatten)]
        point: PointArgs,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Dark-mode cooling limit for given damping and splitting.
    Limit {
        /// Mechanical amplitude decay rate, Hz.
        #[arg(long)]
        gamma_hz: f64,
        /// Mechanical frequency difference, Hz.
        #[arg(long)]
        delta_freq_hz: f64,
        /// Thermal occupation (defaults to the config default).
        #[arg(long, default_value_t = optomech::config::DEFAULT_N_TH)]
        n_th: f64,
    },
    /// Stochastic-trajectory cross-check at one operating point.
    Trajectory {
        #[command(flatten)]
        point: PointArgs,
        /// Step size, seconds.
        #[arg(long, default_value_t = 1e-4)]
        dt: f64,
        /// Total steps.
        #[arg(long, default_value_t = 200_000)]
        steps: usize,
        /// Burn-in steps.
        #[arg(long, default_value_t = 0)]
        burn_in: usize,
        /// Record every Nth step.
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the recorded trajectory to this CSV file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write run metadata (seed, generator, config) to this JSON file.
        #[arg(long)]
        metadata: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ScenarioAction {
    /// List the built-in scenarios.
    List,
    /// Run a sweep (built-in name or config file path) and emit files.
    Run {
        /// Built-in scenario name, a TOML config, or an emitted metadata.json.
        target: String,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// csv or json.
        #[arg(long, default_value = "csv")]
        format: String,
        /// Also solve the full 4-mode Lyapunov model per point.
        #[arg(long)]
        full_model: bool,
        /// Also synthesize a probe PSD per point.
        #[arg(long)]
        spectra: bool,
        /// Also run the stochastic-oracle cross-check per point.
        #[arg(long)]
        trajectory_check: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads (0 = OPTOMECH_THREADS env var, else 1).
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
}

#[derive(Args)]
struct PointArgs {
    /// Built-in scenario name or config file path.
    #[arg(long)]
    scenario: String,
    /// Control value (Hz) at which to evaluate, per the scenario's rule.
    #[arg(long)]
    control_hz: f64,
}

fn resolve_scenario(target: &str) -> Result<Scenario, Error> {
    if let Some(s) = builtin_scenario(target) {
        return Ok(s);
    }
    let path = std::path::Path::new(target);
    if path.exists() {
        return load_config(path);
    }
    Err(Error::Config {
        message: format!(
            "'{target}' is neither a built-in scenario ({}) nor an existing config file",
            builtin_scenarios()
                .iter()
                .map(|s| s.name.clone())
                .collect::<Vec<_>>()
                .join(", ")
        ),
    })
}

fn warn_adiabaticity(params: &optomech::model::SystemParams) {
    let ratio = adiabaticity_ratio(params);
    if ratio > ADIABATICITY_WARN_THRESHOLD {
        eprintln!(
            "warning: adiabaticity ratio max|G|/kappa = {ratio:.3} exceeds \
             {ADIABATICITY_WARN_THRESHOLD}; the reduced model is strained"
        );
    }
}

/// RFC-3339-ish timestamp; honors SOURCE_DATE_EPOCH for reproducible runs.
fn timestamp() -> String {
    let epoch = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse::<u64>().ok())
        .unwrap_or_else(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        });
    format!("{epoch} (unix seconds)")
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Config { .. }
        | Error::InvalidParameter { .. }
        | Error::InconsistentRule { .. }
        | Error::NonFinite { .. } => 1,
        _ => 2,
    }
}

fn run() -> Result<i32, Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Scenario { action } => match action {
            ScenarioAction::List => {
                for s in builtin_scenarios() {
                    let grid = &s.grid;
                    println!("{}", s.name);
                    println!("  {}", s.description);
                    println!(
                        "  control grid: {} points, {:?} over {}..{} Hz{}",
                        grid.values_hz().len(),
                        grid.kind,
                        grid.min_hz,
                        grid.max_hz,
                        if grid.insert_hz.is_empty() {
                            String::new()
                        } else {
                            format!(" (+ exact points {:?})", grid.insert_hz)
                        }
                    );
                }
                Ok(0)
            }
            ScenarioAction::Run {
                target,
                out_dir,
                format,
                full_model,
                spectra,
                trajectory_check,
                seed,
                threads,
            } => {
                let scenario = resolve_scenario(&target)?;
                let format = match format.as_str() {
                    "csv" => EmitFormat::Csv,
                    "json" => EmitFormat::Json,
                    other => {
                        return Err(Error::Config {
                            message: format!("unknown format '{other}' (use csv or json)"),
                        })
                    }
                };
                let options = SweepOptions {
                    with_full_model: full_model,
                    with_spectra: spectra,
                    with_trajectory_check: trajectory_check,
                    threads,
                    seed,
                };
                let result = run_sweep(&scenario, &options)?;
                if result.adiabaticity_max > ADIABATICITY_WARN_THRESHOLD {
                    eprintln!(
                        "warning: adiabaticity ratio reaches {:.3} on this grid",
                        result.adiabaticity_max
                    );
                }
                let meta = EmitMeta {
                    timestamp: Some(timestamp()),
                };
                let report = emit(&result, format, &out_dir, &meta)?;
                for f in &report.files {
                    println!("wrote {}", f.display());
                }
                if result.failed > 0 {
                    eprintln!(
                        "{} of {} grid points failed; see the sweep table for reasons",
                        result.failed,
                        result.rows.len()
                    );
                    return Ok(3);
                }
                Ok(0)
            }
        },
        Command::Eigen(point) => {
            let scenario = resolve_scenario(&point.scenario)?;
            let params = scenario.params_at(point.control_hz)?;
            warn_adiabaticity(&params);
            let eff = effective_model(&params)?;
            let numeric = eigenmodes_numeric(&eff)?;
            println!("regime: {}", numeric.regime);
            println!(
                "{:<10} {:>18} {:>16} {:>10}",
                "branch", "freq_hz", "linewidth_hz", "class"
            );
            for (label, m) in [("plus", &numeric.modes[0]), ("minus", &numeric.modes[1])] {
                println!(
                    "{label:<10} {:>18.9} {:>16.9} {:>10}",
                    m.omega / TAU,
                    m.gamma / TAU,
                    m.classification
                );
            }
            match eigenmodes_closed_form(&eff) {
                Ok(cf) => {
                    println!("closed form:");
                    for (label, m) in [("plus", &cf.modes[0]), ("minus", &cf.modes[1])] {
                        println!(
                            "{label:<10} {:>18.9} {:>16.9} {:>10}",
                            m.omega / TAU,
                            m.gamma / TAU,
                            m.classification
                        );
                    }
                }
                Err(e) => println!("closed form: {e}"),
            }
            if params.is_single_cavity() {
                let grid: Vec<f64> = scenario.grid.values_hz().iter().map(|h| TAU * h).collect();
                let ep = locate_ep(&scenario.base, &grid)?;
                println!(
                    "EP: analytic Gamma_1/2pi = {:.6} Hz, grid gap minimum at {:.6} Hz",
                    ep.analytic / TAU,
                    ep.grid_minimum / TAU
                );
            }
            Ok(0)
        }
        Command::Cool { point, full_model } => {
            let scenario = resolve_scenario(&point.scenario)?;
            let params = scenario.params_at(point.control_hz)?;
            warn_adiabaticity(&params);
            let eff = effective_model(&params)?;
            let n_th = [params.mech[0].n_th, params.mech[1].n_th];
            let rep = phonon_report(&reduced_lyapunov(&eff, n_th)?)?;
            let common = scenario.common_n_th();
            println!("n1 = {:.6e}  (n1/n_th = {:.6e})", rep.n1, rep.n1 / common);
            println!("n2 = {:.6e}  (n2/n_th = {:.6e})", rep.n2, rep.n2 / common);
            println!(
                "n_total = {:.6e}  (n_total/n_th = {:.6e})",
                rep.n_total,
                rep.n_total / common
            );
            if let Some(limit) = scenario.dark_limit_total() {
                println!(
                    "dark-mode limit (single cavity, this delta): n/n_th = {:.6e}",
                    limit / common
                );
            }
            if full_model {
                let full = phonon_report(&solve_model(&build_dynamics(&params)?)?)?;
                println!(
                    "full model: n_total = {:.6e} (n_total/n_th = {:.6e})",
                    full.n_total,
                    full.n_total / common
                );
            }
            Ok(0)
        }
        Command::Psd { point, out } => {
            let scenario = resolve_scenario(&point.scenario)?;
            let params = scenario.params_at(point.control_hz)?;
            warn_adiabaticity(&params);
            let model = build_dynamics(&params)?;
            let spec = probe_psd(&model, params.probe_weights, &default_grid(&params))?;
            let mut f = std::io::BufWriter::new(std::fs::File::create(&out)?);
            spec.write_csv(&mut f)?;
            println!(
                "wrote {} ({} samples, integrated occupation {:.6e})",
                out.display(),
                spec.len(),
                spec.integrate_occupation()
            );
            Ok(0)
        }
        Command::Limit {
            gamma_hz,
            delta_freq_hz,
            n_th,
        } => {
            let lim = dark_mode_limit(TAU * gamma_hz, TAU * delta_freq_hz, n_th)?;
            println!(
                "exact:  n = {:.6e}  (n/n_th = {:.6e})",
                lim.exact,
                lim.exact / n_th
            );
            println!(
                "approx: n = {:.6e}  (n/n_th = {:.6e})",
                lim.approx,
                lim.approx / n_th
            );
            Ok(0)
        }
        Command::Trajectory {
            point,
            dt,
            steps,
            burn_in,
            stride,
            seed,
            out,
            metadata,
        } => {
            let scenario = resolve_scenario(&point.scenario)?;
            let params = scenario.params_at(point.control_hz)?;
            warn_adiabaticity(&params);
            let eff = effective_model(&params)?;
            let n_th = [params.mech[0].n_th, params.mech[1].n_th];
            let (a, d) = reduced_system(&eff, n_th);
            let cfg = TrajectoryConfig {
                dt,
                n_steps: steps,
                n_burn_in: burn_in,
                record_stride: stride,
                seed,
                init: InitialState::Stationary,
            };
            let traj = simulate(&a, &d, &cfg)?;
            let est = estimate_occupations(&traj)?;
            let lyap = phonon_report(&reduced_lyapunov(&eff, n_th)?)?;
            println!(
                "trajectory: n1 = {:.6e} +- {:.2e}, n2 = {:.6e} +- {:.2e}",
                est.n[0], est.std_err[0], est.n[1], est.std_err[1]
            );
            println!(
                "lyapunov:   n1 = {:.6e},            n2 = {:.6e}",
                lyap.n1, lyap.n2
            );
            println!(
                "n_total: trajectory {:.6e} +- {:.2e} vs lyapunov {:.6e}",
                est.n_total, est.n_total_err, lyap.n_total
            );
            if let Some(path) = out {
                let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
                traj.write_csv(&mut f)?;
                println!("wrote {}", path.display());
            }
            if let Some(path) = metadata {
                let meta = serde_json::json!({
                    "tool": "optomech",
                    "version": env!("CARGO_PKG_VERSION"),
                    "rng": RNG_IDENTITY,
                    "seed": seed,
                    "dt_s": dt,
                    "n_steps": steps,
                    "n_burn_in": burn_in,
                    "record_stride": stride,
                    "scenario": optomech::config::ConfigFile::from_scenario(&scenario),
                    "control_hz": point.control_hz,
                    "timestamp": timestamp(),
                });
                std::fs::write(&path, serde_json::to_string_pretty(&meta)? + "\n")?;
                println!("wrote {}", path.display());
            }
            Ok(0)
        }
    }
}

fn main() {
    match run() {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit_code_for(&e));
        }
    }
}
