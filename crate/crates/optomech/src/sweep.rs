//! Built-in sweep scenarios, the parameter-sweep engine, and data emission.
//!
//! Each scenario sweeps one backaction control along a grid, applying a
//! derived-coupling rule to the base parameters at every point, and
//! records eigenmodes, phonon numbers, and the dark-mode reference floor.
//! Outputs are plot-ready CSV plus a JSON metadata echo that can be fed
//! back in for re-execution.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ConfigFile;
use crate::effective::{
    effective_model, eigenmodes_closed_form, eigenmodes_numeric, EigenmodeReport,
};
use crate::error::{Error, Result};
use crate::model::{
    adiabaticity_ratio, build_dynamics, CavityMode, CouplingMatrix, MechanicalMode, SystemParams,
};
use crate::spectra::{default_grid, probe_psd, Spectrum};
use crate::steady_state::{
    dark_mode_limit, phonon_report, reduced_lyapunov, solve_model, PhononReport,
};
use crate::trajectory::{
    estimate_occupations, reduced_system, simulate, InitialState, TrajectoryConfig,
    TrajectoryOccupations,
};

const TAU: f64 = std::f64::consts::TAU;

/// Thread-count override honored when `SweepOptions::threads` is zero.
pub const THREADS_ENV_VAR: &str = "OPTOMECH_THREADS";

/// Base parameters shared by the built-in scenarios: mean mechanical
/// frequency 1.2 MHz, gammas of 0.65 / 0.62 Hz, cavity amplitude decay
/// rates of 135 / 145 kHz, red-sideband drives, balanced probe weights,
/// no coupling yet.
pub fn builtin_base_params(delta_omega: f64) -> SystemParams {
    let omega_bar = TAU * 1.2e6;
    SystemParams {
        mech: [
            MechanicalMode {
                omega: omega_bar + 0.5 * delta_omega,
                gamma: TAU * 0.65,
                n_th: crate::config::DEFAULT_N_TH,
            },
            MechanicalMode {
                omega: omega_bar - 0.5 * delta_omega,
                gamma: TAU * 0.62,
                n_th: crate::config::DEFAULT_N_TH,
            },
        ],
        cav: [
            CavityMode {
                kappa: TAU * 135e3,
                detuning: -omega_bar,
                n_opt: 0.0,
            },
            CavityMode {
                kappa: TAU * 145e3,
                detuning: -omega_bar,
                n_opt: 0.0,
            },
        ],
        coupling: CouplingMatrix::zero(),
        probe_weights: [
            std::f64::consts::FRAC_1_SQRT_2,
            std::f64::consts::FRAC_1_SQRT_2,
        ],
    }
}

/// Derived-coupling rule applied at every grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlRule {
    /// Control is `Gamma_1 = |G_11 G_21| / kappa_1`: rescale the cavity-1
    /// column, leave cavity 2 at its base value.
    Cavity1Backaction,
    /// Control is the peak cavity-2 backaction `max_i G_i2^2 / kappa_2`:
    /// rescale the cavity-2 column, leave cavity 1 at its base value.
    Cavity2Backaction,
    /// Control is `Gamma_1`, with both columns rescaled together so the
    /// mediated rates cancel, `Gamma_2 = -Gamma_1`. Requires base columns
    /// with `G_11 G_21 > 0` and `G_12 G_22 < 0`.
    BalancedOpposed,
}

impl ControlRule {
    pub fn apply(&self, base: &SystemParams, control: f64) -> Result<SystemParams> {
        match self {
            ControlRule::Cavity1Backaction => base.with_mediated_backaction(0, control),
            ControlRule::Cavity2Backaction => base.with_peak_backaction(1, control),
            ControlRule::BalancedOpposed => {
                let p = base.with_mediated_backaction(0, control)?;
                p.with_mediated_backaction(1, control)
            }
        }
    }

    /// Verify the rule is consistent with the base coupling signs.
    pub fn validate(&self, base: &SystemParams, max_control: f64) -> Result<()> {
        if let ControlRule::BalancedOpposed = self {
            let prod2 = base.coupling.entry(0, 1) * base.coupling.entry(1, 1);
            if max_control > 0.0 && prod2 >= 0.0 {
                return Err(Error::InconsistentRule {
                    message: "balanced-opposed requires coupling.g_hz with opposite signs in \
                              the cavity-2 column (G_12 G_22 < 0) so that Gamma_2 = -Gamma_1"
                        .into(),
                });
            }
        }
        // surface direction problems (zero columns) before the sweep runs
        self.apply(base, max_control).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    Linear,
    Log,
}

/// Control grid in ordinary frequency (Hz), the config-facing unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub kind: GridKind,
    pub min_hz: f64,
    pub max_hz: f64,
    pub points: usize,
    pub insert_hz: Vec<f64>,
}

impl GridSpec {
    /// Sorted, deduplicated grid values in Hz, inserts included exactly.
    pub fn values_hz(&self) -> Vec<f64> {
        let n = self.points;
        let mut v: Vec<f64> = if n == 1 {
            vec![self.min_hz]
        } else {
            (0..n)
                .map(|k| {
                    let t = k as f64 / (n - 1) as f64;
                    match self.kind {
                        GridKind::Linear => self.min_hz + (self.max_hz - self.min_hz) * t,
                        GridKind::Log => self.min_hz * (self.max_hz / self.min_hz).powf(t),
                    }
                })
                .collect()
        };
        v.extend_from_slice(&self.insert_hz);
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(1e-300));
        v
    }

    pub fn validate(&self) -> Result<()> {
        if self.points == 0 {
            return Err(Error::Config {
                message: "sweep.points must be >= 1".into(),
            });
        }
        if !(self.min_hz.is_finite() && self.max_hz.is_finite()) || self.max_hz < self.min_hz {
            return Err(Error::Config {
                message: "sweep grid bounds must be finite with max_hz >= min_hz".into(),
            });
        }
        if self.min_hz < 0.0 {
            return Err(Error::Config {
                message: "sweep controls are backaction rates; min_hz must be >= 0".into(),
            });
        }
        if matches!(self.kind, GridKind::Log) && self.min_hz <= 0.0 {
            return Err(Error::Config {
                message: "log grids require min_hz > 0".into(),
            });
        }
        if self.insert_hz.iter().any(|&x| !x.is_finite() || x < 0.0) {
            return Err(Error::Config {
                message: "insert_hz values must be finite and >= 0".into(),
            });
        }
        Ok(())
    }
}

/// A named, fully resolved sweep definition.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub base: SystemParams,
    pub rule: ControlRule,
    pub grid: GridSpec,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        self.grid.validate()?;
        let max = self.grid.values_hz().last().copied().unwrap_or(0.0);
        self.rule.validate(&self.base, TAU * max)
    }

    /// Parameters at one control value (Hz).
    pub fn params_at(&self, control_hz: f64) -> Result<SystemParams> {
        self.rule.apply(&self.base, TAU * control_hz)
    }

    /// The dark-mode cooling floor of this scenario's detuning and mean
    /// damping, or `None` for degenerate modes.
    pub fn dark_limit_total(&self) -> Option<f64> {
        let gamma = 0.5 * (self.base.mech[0].gamma + self.base.mech[1].gamma);
        let n_th = self.common_n_th();
        dark_mode_limit(gamma, self.base.delta_omega(), n_th)
            .ok()
            .map(|l| l.exact)
    }

    /// Bath occupation used for normalized columns (the mean when the API
    /// built unequal baths; configs always carry a common value).
    pub fn common_n_th(&self) -> f64 {
        0.5 * (self.base.mech[0].n_th + self.base.mech[1].n_th)
    }
}

/// The three built-in sweeps.
///
/// `scenario-a1`: single cavity, `delta = 2pi x 80 Hz`, equal cavity-1
/// couplings, `Gamma_1` swept log over 0.5..1000 Hz with the exceptional
/// point at 40 Hz inserted exactly.
///
/// `scenario-a2`: same system held at `Gamma_1 / 2pi = 1000 Hz` while the
/// second cavity's damping of mode 1 (`Gamma_12`) ramps linearly 0..500 Hz,
/// breaking the dark mode.
///
/// `scenario-b`: `delta = 2pi x 60 Hz`, opposed coupling vectors
/// (`g_12 = -g_22`), both drives swept together holding
/// `Gamma_1 + Gamma_2 = 0`.
pub fn builtin_scenarios() -> Vec<Scenario> {
    let mut a1_base = builtin_base_params(TAU * 80.0);
    a1_base.coupling.set_column(0, [1.0, 1.0]);
    // representative operating point: the EP itself
    let a1_base = a1_base.with_mediated_backaction(0, TAU * 40.0).unwrap();
    let a1 = Scenario {
        name: "scenario-a1".into(),
        description: "dark-mode generation: single-cavity cooling swept through the \
                      exceptional point at Gamma_1/2pi = 40 Hz (delta = 2pi x 80 Hz)"
            .into(),
        base: a1_base,
        rule: ControlRule::Cavity1Backaction,
        grid: GridSpec {
            kind: GridKind::Log,
            min_hz: 0.5,
            max_hz: 1000.0,
            points: 101,
            insert_hz: vec![40.0],
        },
    };

    let mut a2_base = builtin_base_params(TAU * 80.0);
    a2_base.coupling.set_column(0, [1.0, 1.0]);
    a2_base.coupling.set_column(1, [1.0, 0.0]);
    let a2_base = a2_base
        .with_mediated_backaction(0, TAU * 1000.0)
        .unwrap()
        .with_peak_backaction(1, TAU * 250.0)
        .unwrap();
    let a2 = Scenario {
        name: "scenario-a2".into(),
        description: "dark-mode breaking: Gamma_1/2pi held at 1000 Hz while the \
                      second cavity's Gamma_12 ramps from zero"
            .into(),
        base: a2_base,
        rule: ControlRule::Cavity2Backaction,
        grid: GridSpec {
            kind: GridKind::Linear,
            min_hz: 0.0,
            max_hz: 500.0,
            points: 41,
            insert_hz: vec![],
        },
    };

    let mut b_base = builtin_base_params(TAU * 60.0);
    b_base.coupling.set_column(0, [1.0, 1.0]);
    b_base.coupling.set_column(1, [-1.0, 1.0]);
    let b_base = b_base
        .with_mediated_backaction(0, TAU * 30.0)
        .unwrap()
        .with_mediated_backaction(1, TAU * 30.0)
        .unwrap();
    let b = Scenario {
        name: "scenario-b".into(),
        description: "orthogonal-coupling cooling: opposed coupling vectors keep \
                      Gamma_1 + Gamma_2 = 0, so both modes cool without hybridizing \
                      (delta = 2pi x 60 Hz)"
            .into(),
        base: b_base,
        rule: ControlRule::BalancedOpposed,
        grid: GridSpec {
            kind: GridKind::Log,
            min_hz: 0.5,
            max_hz: 500.0,
            points: 41,
            insert_hz: vec![],
        },
    };

    vec![a1, a2, b]
}

/// Look a built-in scenario up by (case-insensitive) name.
pub fn builtin_scenario(name: &str) -> Option<Scenario> {
    builtin_scenarios()
        .into_iter()
        .find(|s| s.name.eq_ignore_ascii_case(name))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct SweepOptions {
    pub with_full_model: bool,
    pub with_spectra: bool,
    pub with_trajectory_check: bool,
    /// Worker threads; 0 means "take OPTOMECH_THREADS, else 1".
    pub threads: usize,
    pub seed: u64,
}

fn resolve_threads(requested: usize) -> usize {
    if requested > 0 {
        return requested;
    }
    if let Ok(v) = std::env::var(THREADS_ENV_VAR) {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n > 0 {
                return n;
            }
        }
    }
    1
}

/// One grid point's worth of results.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// Control value, Hz.
    pub control_hz: f64,
    /// Set when this point failed; all physics fields are then `None`.
    pub failure: Option<String>,
    pub numeric: Option<EigenmodeReport>,
    /// Present where the single-cavity closed form applies.
    pub closed_form: Option<EigenmodeReport>,
    /// Reduced-model phonon numbers.
    pub phonons: Option<PhononReport>,
    /// Full 4-mode phonon numbers, when requested.
    pub full_phonons: Option<PhononReport>,
    /// Probe PSD at this point, when requested.
    pub spectrum: Option<Spectrum>,
    /// Stochastic-oracle estimate, when requested.
    pub trajectory: Option<TrajectoryOccupations>,
    pub adiabaticity: f64,
}

/// All rows of a completed sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub scenario: Scenario,
    pub options: SweepOptions,
    pub rows: Vec<SweepRow>,
    pub failed: usize,
    /// Worst adiabaticity ratio across the grid.
    pub adiabaticity_max: f64,
}

fn compute_row(
    scenario: &Scenario,
    options: &SweepOptions,
    idx: usize,
    control_hz: f64,
) -> SweepRow {
    let mut row = SweepRow {
        control_hz,
        failure: None,
        numeric: None,
        closed_form: None,
        phonons: None,
        full_phonons: None,
        spectrum: None,
        trajectory: None,
        adiabaticity: 0.0,
    };
    let attempt = || -> Result<SweepRow> {
        let mut out = row.clone();
        let params = scenario.params_at(control_hz)?;
        out.adiabaticity = adiabaticity_ratio(&params);
        let eff = effective_model(&params)?;
        out.numeric = Some(eigenmodes_numeric(&eff)?);
        out.closed_form = eigenmodes_closed_form(&eff).ok();
        let n_th = [params.mech[0].n_th, params.mech[1].n_th];
        let moments = reduced_lyapunov(&eff, n_th)?;
        out.phonons = Some(phonon_report(&moments)?.normalized_against(scenario.common_n_th()));
        if options.with_full_model {
            let model = build_dynamics(&params)?;
            let m = solve_model(&model)?;
            out.full_phonons = Some(phonon_report(&m)?.normalized_against(scenario.common_n_th()));
        }
        if options.with_spectra {
            let model = build_dynamics(&params)?;
            out.spectrum = Some(probe_psd(
                &model,
                params.probe_weights,
                &default_grid(&params),
            )?);
        }
        if options.with_trajectory_check {
            let report = out.numeric.as_ref().unwrap();
            let gamma_min = report.modes[0].gamma.min(report.modes[1].gamma);
            let (a, d) = reduced_system(&eff, n_th);
            let cfg = TrajectoryConfig {
                dt: 0.25 / gamma_min,
                n_steps: 4000,
                n_burn_in: 0,
                record_stride: 1,
                seed: options.seed ^ idx as u64,
                init: InitialState::Stationary,
            };
            out.trajectory = Some(estimate_occupations(&simulate(&a, &d, &cfg)?)?);
        }
        Ok(out)
    };
    match attempt() {
        Ok(out) => out,
        Err(e) => {
            row.failure = Some(e.to_string());
            row
        }
    }
}

/// Run a sweep. Per-point failures are recorded as data; the sweep itself
/// fails only when more than half the grid points fail.
pub fn run_sweep(scenario: &Scenario, options: &SweepOptions) -> Result<SweepResult> {
    scenario.validate()?;
    let values = scenario.grid.values_hz();
    let threads = resolve_threads(options.threads).min(values.len().max(1));
    let mut rows: Vec<SweepRow> = Vec::with_capacity(values.len());
    if threads <= 1 {
        for (idx, &hz) in values.iter().enumerate() {
            rows.push(compute_row(scenario, options, idx, hz));
        }
    } else {
        let mut indexed: Vec<(usize, SweepRow)> = std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for worker in 0..threads {
                let values = &values;
                handles.push(scope.spawn(move || {
                    let mut out = Vec::new();
                    let mut idx = worker;
                    while idx < values.len() {
                        out.push((idx, compute_row(scenario, options, idx, values[idx])));
                        idx += threads;
                    }
                    out
                }));
            }
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("sweep worker panicked"))
                .collect()
        });
        indexed.sort_by_key(|(idx, _)| *idx);
        rows = indexed.into_iter().map(|(_, r)| r).collect();
    }

    let failed = rows.iter().filter(|r| r.failure.is_some()).count();
    if failed * 2 > rows.len() {
        return Err(Error::SweepFailed {
            failed,
            total: rows.len(),
        });
    }
    let adiabaticity_max = rows.iter().map(|r| r.adiabaticity).fold(0.0, f64::max);
    Ok(SweepResult {
        scenario: scenario.clone(),
        options: *options,
        rows,
        failed,
        adiabaticity_max,
    })
}

/// Output encoding of the sweep table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmitFormat {
    Csv,
    Json,
}

/// Caller-provided provenance for the metadata file. A `None` timestamp is
/// omitted from the output, keeping emission byte-deterministic; the CLI
/// fills it from the clock (or `SOURCE_DATE_EPOCH`).
#[derive(Debug, Clone, Default)]
pub struct EmitMeta {
    pub timestamp: Option<String>,
}

/// Files written by [`emit`].
#[derive(Debug, Clone, PartialEq)]
pub struct EmitReport {
    pub files: Vec<PathBuf>,
}

fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn row_cells(row: &SweepRow, result: &SweepResult, spectrum_file: Option<&str>) -> Vec<String> {
    let scenario = &result.scenario;
    let mut cells = vec![fmt_float(row.control_hz)];
    if let Some(reason) = &row.failure {
        cells.extend(std::iter::repeat_n(String::new(), 8));
        cells.push("failed".into());
        cells.push(reason.clone());
    } else {
        let numeric = row.numeric.as_ref().expect("successful row has eigenmodes");
        let phonons = row.phonons.as_ref().expect("successful row has phonons");
        let n_th = scenario.common_n_th();
        cells.push(fmt_float(numeric.modes[0].omega / TAU));
        cells.push(fmt_float(numeric.modes[1].omega / TAU));
        cells.push(fmt_float(numeric.modes[0].gamma / TAU));
        cells.push(fmt_float(numeric.modes[1].gamma / TAU));
        cells.push(fmt_float(phonons.n1 / n_th));
        cells.push(fmt_float(phonons.n2 / n_th));
        cells.push(fmt_float(phonons.n_total / n_th));
        cells.push(
            scenario
                .dark_limit_total()
                .map(|l| fmt_float(l / n_th))
                .unwrap_or_default(),
        );
        cells.push(numeric.regime.to_string());
        cells.push(format!(
            "{}/{}",
            numeric.modes[0].classification, numeric.modes[1].classification
        ));
    }
    if result.options.with_full_model {
        match (&row.failure, &row.full_phonons) {
            (None, Some(full)) => {
                let n_th = scenario.common_n_th();
                cells.push(fmt_float(full.n1 / n_th));
                cells.push(fmt_float(full.n2 / n_th));
                cells.push(fmt_float(full.n_total / n_th));
            }
            _ => cells.extend(std::iter::repeat_n(String::new(), 3)),
        }
    }
    if result.options.with_trajectory_check {
        match (&row.failure, &row.trajectory) {
            (None, Some(t)) => {
                let n_th = scenario.common_n_th();
                cells.push(fmt_float(t.n_total / n_th));
                cells.push(fmt_float(t.n_total_err / n_th));
            }
            _ => cells.extend(std::iter::repeat_n(String::new(), 2)),
        }
    }
    if result.options.with_spectra {
        cells.push(spectrum_file.unwrap_or_default().to_string());
    }
    cells
}

fn header_cells(result: &SweepResult) -> Vec<String> {
    let mut h: Vec<String> = [
        "control_hz",
        "omega_plus_hz",
        "omega_minus_hz",
        "gamma_plus_hz",
        "gamma_minus_hz",
        "n1_over_nth",
        "n2_over_nth",
        "ntotal_over_nth",
        "dark_limit_over_nth",
        "regime",
        "classification",
    ]
    .map(String::from)
    .to_vec();
    if result.options.with_full_model {
        h.extend(
            [
                "n1_full_over_nth",
                "n2_full_over_nth",
                "ntotal_full_over_nth",
            ]
            .map(String::from),
        );
    }
    if result.options.with_trajectory_check {
        h.extend(["ntotal_traj_over_nth", "ntotal_traj_err_over_nth"].map(String::from));
    }
    if result.options.with_spectra {
        h.push("spectrum_file".into());
    }
    h
}

/// Write the sweep table plus metadata (and per-point spectra when
/// present) into `out_dir`. Frequencies are emitted in ordinary Hz with 17
/// significant digits, RFC-4180-style quoting, LF endings.
pub fn emit(
    result: &SweepResult,
    format: EmitFormat,
    out_dir: &Path,
    meta: &EmitMeta,
) -> Result<EmitReport> {
    std::fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();

    // per-point spectra first so the table can reference the file names
    let mut spectrum_files: Vec<Option<String>> = vec![None; result.rows.len()];
    if result.options.with_spectra {
        for (idx, row) in result.rows.iter().enumerate() {
            if let Some(spec) = &row.spectrum {
                let name = format!("spectrum_{idx:03}.csv");
                let path = out_dir.join(&name);
                let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
                spec.write_csv(&mut f)?;
                f.flush()?;
                files.push(path);
                spectrum_files[idx] = Some(name);
            }
        }
    }

    let header = header_cells(result);
    match format {
        EmitFormat::Csv => {
            let path = out_dir.join("sweep.csv");
            let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
            writeln!(f, "{}", header.join(","))?;
            for (idx, row) in result.rows.iter().enumerate() {
                let cells = row_cells(row, result, spectrum_files[idx].as_deref());
                let quoted: Vec<String> = cells.iter().map(|c| csv_field(c)).collect();
                writeln!(f, "{}", quoted.join(","))?;
            }
            f.flush()?;
            files.push(path);
        }
        EmitFormat::Json => {
            let path = out_dir.join("sweep.json");
            let rows: Vec<serde_json::Value> = result
                .rows
                .iter()
                .enumerate()
                .map(|(idx, row)| {
                    let cells = row_cells(row, result, spectrum_files[idx].as_deref());
                    let map: serde_json::Map<String, serde_json::Value> = header
                        .iter()
                        .cloned()
                        .zip(cells.into_iter().map(serde_json::Value::String))
                        .collect();
                    serde_json::Value::Object(map)
                })
                .collect();
            let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
            serde_json::to_writer_pretty(&mut f, &rows)?;
            writeln!(f)?;
            f.flush()?;
            files.push(path);
        }
    }

    let metadata_path = out_dir.join("metadata.json");
    let mut metadata = serde_json::json!({
        "tool": "optomech",
        "version": env!("CARGO_PKG_VERSION"),
        "scenario": ConfigFile::from_scenario(&result.scenario),
        "options": result.options,
        "seed": result.options.seed,
        "rng": crate::trajectory::RNG_IDENTITY,
        "grid_points": result.rows.len(),
        "failed_points": result.failed,
        "adiabaticity_max": result.adiabaticity_max,
        "adiabaticity_warn_threshold": crate::model::ADIABATICITY_WARN_THRESHOLD,
        "files": files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect::<Vec<_>>(),
    });
    if let Some(ts) = &meta.timestamp {
        metadata["timestamp"] = serde_json::Value::String(ts.clone());
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(&metadata_path)?);
    serde_json::to_writer_pretty(&mut f, &metadata)?;
    writeln!(f)?;
    f.flush()?;
    files.push(metadata_path);

    Ok(EmitReport { files })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn a1_grid_contains_the_ep_exactly() {
        let a1 = builtin_scenario("scenario-a1").unwrap();
        let values = a1.grid.values_hz();
        assert!(values.contains(&40.0));
        assert_eq!(values.first().copied(), Some(0.5));
        assert_eq!(values.last().copied(), Some(1000.0));
    }

    #[test]
    fn a2_holds_gamma1_fixed() {
        let a2 = builtin_scenario("scenario-a2").unwrap();
        for &hz in &[0.0, 125.0, 500.0] {
            let p = a2.params_at(hz).unwrap();
            let eff = effective_model(&p).unwrap();
            assert_relative_eq!(eff.mediated[0], TAU * 1000.0, max_relative = 1e-12);
            assert_relative_eq!(eff.backaction[0][1], TAU * hz, max_relative = 1e-12);
            assert_eq!(eff.backaction[1][1], 0.0);
        }
    }

    #[test]
    fn b_cancels_mediated_rates_at_machine_precision() {
        let b = builtin_scenario("scenario-b").unwrap();
        for &hz in &b.grid.values_hz() {
            let p = b.params_at(hz).unwrap();
            let eff = effective_model(&p).unwrap();
            assert!(
                (eff.mediated[0] + eff.mediated[1]).abs()
                    <= 1e-12 * eff.mediated[0].abs().max(1e-300),
                "Gamma_1 + Gamma_2 != 0 at {hz} Hz"
            );
        }
    }

    #[test]
    fn balanced_rule_rejects_same_sign_columns() {
        let mut b = builtin_scenario("scenario-b").unwrap();
        let col = b.base.coupling.column(1);
        b.base.coupling.set_column(1, [col[0].abs(), col[1].abs()]);
        assert!(matches!(b.validate(), Err(Error::InconsistentRule { .. })));
    }

    #[test]
    fn a1_minimum_sits_at_the_ep_and_rises_after() {
        let a1 = builtin_scenario("scenario-a1").unwrap();
        let result = run_sweep(&a1, &SweepOptions::default()).unwrap();
        assert_eq!(result.failed, 0);
        let totals: Vec<f64> = result
            .rows
            .iter()
            .map(|r| r.phonons.as_ref().unwrap().n_total)
            .collect();
        let (min_idx, _) = totals
            .iter()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |acc, (i, &v)| {
                    if v < acc.1 {
                        (i, v)
                    } else {
                        acc
                    }
                },
            );
        let ep_hz = result.rows[min_idx].control_hz;
        assert!(
            (ep_hz - 40.0).abs() <= 4.0,
            "minimum at {ep_hz} Hz, expected near 40 Hz"
        );
        assert!(totals.last().unwrap() > &totals[min_idx]);
    }

    #[test]
    fn a2_total_decreases_below_the_dark_limit() {
        let a2 = builtin_scenario("scenario-a2").unwrap();
        let result = run_sweep(&a2, &SweepOptions::default()).unwrap();
        let totals: Vec<f64> = result
            .rows
            .iter()
            .map(|r| r.phonons.as_ref().unwrap().n_total)
            .collect();
        for pair in totals.windows(2) {
            assert!(pair[1] <= pair[0] * (1.0 + 1e-12));
        }
        let limit = a2.dark_limit_total().unwrap();
        assert!(totals.last().unwrap() <= &(0.1 * limit));
    }

    #[test]
    fn b_frequencies_fixed_linewidths_growing() {
        let b = builtin_scenario("scenario-b").unwrap();
        let result = run_sweep(&b, &SweepOptions::default()).unwrap();
        let rows = &result.rows;
        let f0 = rows[0].numeric.as_ref().unwrap().modes[0].omega;
        for pair in rows.windows(2) {
            let (a, b) = (
                pair[0].numeric.as_ref().unwrap(),
                pair[1].numeric.as_ref().unwrap(),
            );
            assert_relative_eq!(b.modes[0].omega, f0, max_relative = 1e-9);
            assert!(b.modes[0].gamma > a.modes[0].gamma);
            assert!(b.modes[1].gamma > a.modes[1].gamma);
        }
    }

    #[test]
    fn a1_csv_columns_show_ep_signatures() {
        let a1 = builtin_scenario("scenario-a1").unwrap();
        let result = run_sweep(&a1, &SweepOptions::default()).unwrap();
        let omega_bar = a1.base.omega_mean();
        let mut narrow_prev = f64::INFINITY;
        let mut end_split = f64::INFINITY;
        for row in &result.rows {
            let m = row.numeric.as_ref().unwrap();
            if row.control_hz >= 45.0 {
                // coalesced past the EP, up to the residual split the
                // gamma_1 != gamma_2 asymmetry leaves (~0.05 Hz near the
                // EP, decaying as 1/Gamma_1)
                end_split = (m.modes[0].omega - m.modes[1].omega).abs();
                assert!(
                    end_split <= 1e-7 * omega_bar,
                    "frequencies split at {} Hz",
                    row.control_hz
                );
            }
            if row.control_hz >= 100.0 {
                // narrow branch sheds linewidth toward the bare mode
                assert!(m.modes[0].gamma < narrow_prev);
                narrow_prev = m.modes[0].gamma;
            }
        }
        assert!(end_split <= 3e-9 * omega_bar);
        // at the end of the sweep the dark branch is nearly bare again
        assert!(narrow_prev < TAU * 1.5, "narrow branch at {narrow_prev}");
    }

    #[test]
    fn a2_dark_branch_linewidth_grows() {
        let a2 = builtin_scenario("scenario-a2").unwrap();
        let result = run_sweep(&a2, &SweepOptions::default()).unwrap();
        let mut last = 0.0;
        for row in &result.rows {
            let narrow = row.numeric.as_ref().unwrap().modes[0].gamma;
            assert!(
                narrow > last,
                "dark-branch linewidth should grow with Gamma_12"
            );
            last = narrow;
        }
    }

    #[test]
    fn parallel_and_serial_sweeps_agree() {
        let a1 = builtin_scenario("scenario-a1").unwrap();
        let serial = run_sweep(
            &a1,
            &SweepOptions {
                threads: 1,
                ..Default::default()
            },
        )
        .unwrap();
        let parallel = run_sweep(
            &a1,
            &SweepOptions {
                threads: 4,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(serial.rows, parallel.rows);
    }

    #[test]
    fn emit_writes_expected_files_and_is_deterministic() {
        let a1 = builtin_scenario("scenario-a1").unwrap();
        // shrink the grid to keep the test quick
        let mut small = a1.clone();
        small.grid.points = 9;
        let result = run_sweep(&small, &SweepOptions::default()).unwrap();
        let dir1 = std::env::temp_dir().join(format!("optomech_emit_{}_1", std::process::id()));
        let dir2 = std::env::temp_dir().join(format!("optomech_emit_{}_2", std::process::id()));
        let meta = EmitMeta { timestamp: None };
        let rep1 = emit(&result, EmitFormat::Csv, &dir1, &meta).unwrap();
        let rep2 = emit(&result, EmitFormat::Csv, &dir2, &meta).unwrap();
        assert_eq!(rep1.files.len(), 2); // sweep.csv + metadata.json
        for (f1, f2) in rep1.files.iter().zip(&rep2.files) {
            let b1 = std::fs::read(f1).unwrap();
            let b2 = std::fs::read(f2).unwrap();
            assert_eq!(b1, b2, "{} differs between runs", f1.display());
        }
        let csv = std::fs::read_to_string(&rep1.files[0]).unwrap();
        let header = csv.lines().next().unwrap();
        assert_eq!(
            header,
            "control_hz,omega_plus_hz,omega_minus_hz,gamma_plus_hz,gamma_minus_hz,\
             n1_over_nth,n2_over_nth,ntotal_over_nth,dark_limit_over_nth,regime,classification"
        );
        let _ = std::fs::remove_dir_all(&dir1);
        let _ = std::fs::remove_dir_all(&dir2);
    }

    #[test]
    fn emit_with_spectra_writes_one_file_per_point() {
        let a1 = builtin_scenario("scenario-a1").unwrap();
        let mut small = a1.clone();
        small.grid.points = 4;
        small.grid.insert_hz.clear();
        let options = SweepOptions {
            with_spectra: true,
            ..Default::default()
        };
        let result = run_sweep(&small, &options).unwrap();
        let dir = std::env::temp_dir().join(format!("optomech_spectra_{}", std::process::id()));
        let rep = emit(&result, EmitFormat::Csv, &dir, &EmitMeta::default()).unwrap();
        // 4 spectrum files + sweep.csv + metadata.json
        assert_eq!(rep.files.len(), 6);
        let csv = std::fs::read_to_string(dir.join("sweep.csv")).unwrap();
        assert!(csv.lines().next().unwrap().ends_with(",spectrum_file"));
        assert!(csv.contains("spectrum_000.csv"));
        let spectrum = std::fs::read_to_string(dir.join("spectrum_000.csv")).unwrap();
        assert!(spectrum.starts_with("freq_hz,psd\n"));
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn emitted_hz_values_round_trip_to_internal_units() {
        let a1 = builtin_scenario("scenario-a1").unwrap();
        let mut small = a1.clone();
        small.grid.points = 5;
        let result = run_sweep(&small, &SweepOptions::default()).unwrap();
        for row in &result.rows {
            let text = fmt_float(row.control_hz);
            let parsed: f64 = text.parse().unwrap();
            let internal = TAU * row.control_hz;
            assert!(
                (TAU * parsed - internal).abs() <= 1e-12 * internal.abs().max(1e-300),
                "unit round trip broke for {text}"
            );
        }
    }

    #[test]
    fn metadata_json_reloads_as_the_same_scenario() {
        let b = builtin_scenario("scenario-b").unwrap();
        let mut small = b.clone();
        small.grid.points = 3;
        let result = run_sweep(&small, &SweepOptions::default()).unwrap();
        let dir = std::env::temp_dir().join(format!("optomech_meta_{}", std::process::id()));
        let rep = emit(&result, EmitFormat::Json, &dir, &EmitMeta::default()).unwrap();
        let meta_path = rep
            .files
            .iter()
            .find(|p| p.ends_with("metadata.json"))
            .unwrap();
        let reloaded = crate::config::load_config(meta_path).unwrap();
        crate::test_support::assert_scenarios_match(&reloaded, &small);
        let _ = std::fs::remove_dir_all(&dir);
    }

    fn overflow_scenario(insert_hz: Vec<f64>, points: usize) -> Scenario {
        // grid points beyond ~1e301 Hz overflow the derived couplings; the
        // passive red-detuned model itself never destabilizes, so numeric
        // overflow is the per-point failure mode reachable from configs
        let mut base = builtin_base_params(TAU * 80.0);
        base.coupling.set_column(0, [1.0, 1.0]);
        let base = base.with_mediated_backaction(0, TAU * 10.0).unwrap();
        Scenario {
            name: "overflow".into(),
            description: String::new(),
            base,
            rule: ControlRule::Cavity1Backaction,
            grid: GridSpec {
                kind: GridKind::Linear,
                min_hz: 0.0,
                max_hz: 1e302,
                points,
                insert_hz,
            },
        }
    }

    #[test]
    fn failed_points_are_data_not_fatal() {
        // 2 grid points blow up, 8 small inserted points succeed
        let scenario = overflow_scenario(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0], 2);
        let result = run_sweep(&scenario, &SweepOptions::default()).unwrap();
        let failed = result.rows.iter().filter(|r| r.failure.is_some()).count();
        assert_eq!(failed, 1, "only the 1e302 Hz point should fail");
        assert_eq!(result.failed, failed);
        for row in &result.rows {
            if let Some(reason) = &row.failure {
                assert!(!reason.is_empty());
                assert!(row.phonons.is_none());
            } else {
                assert!(row.phonons.is_some());
            }
        }
    }

    #[test]
    fn majority_failures_abort_the_sweep() {
        let scenario = overflow_scenario(vec![], 9); // 8 of 9 points overflow
        assert!(matches!(
            run_sweep(&scenario, &SweepOptions::default()),
            Err(Error::SweepFailed { .. })
        ));
    }
}
