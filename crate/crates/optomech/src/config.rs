//! Configuration ingestion and emission.
//!
//! Configs are strict key/value documents (TOML on disk, the same schema
//! embedded in emitted JSON metadata). Every frequency-like key carries an
//! `_hz` suffix and is an ordinary frequency; conversion to internal
//! angular units happens here and nowhere else. Unknown keys are errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CavityMode, CouplingMatrix, MechanicalMode, SystemParams};
use crate::sweep::{ControlRule, GridKind, GridSpec, Scenario};

const TAU: f64 = std::f64::consts::TAU;

/// Thermal occupation used when a config does not pin one. The cooling
/// observables emitted by the sweeps are ratios against it, so its
/// absolute value only sets the scale of raw phonon numbers.
pub const DEFAULT_N_TH: f64 = 5.2e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub mechanics: MechanicsConfig,
    pub cavity1: CavityConfig,
    pub cavity2: CavityConfig,
    pub coupling: CouplingConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_weights: Option<[f64; 2]>,
    pub sweep: SweepConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanicsConfig {
    /// Mean mechanical frequency `(f1 + f2) / 2`, Hz.
    pub mean_freq_hz: f64,
    /// Frequency difference `f1 - f2`, Hz (signed).
    pub delta_freq_hz: f64,
    /// Amplitude decay rates, Hz (so `gamma = 2 pi x value`).
    pub gamma1_hz: f64,
    pub gamma2_hz: f64,
    /// Common thermal occupation of both baths.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_th: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityConfig {
    /// Amplitude decay rate, Hz. Exactly one of this and `linewidth_hz`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_hz: Option<f64>,
    /// Full energy linewidth, Hz; converts as `kappa = 2 pi x (value / 2)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linewidth_hz: Option<f64>,
    /// Drive-cavity detuning, Hz. Defaults to `-mean_freq_hz`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning_hz: Option<f64>,
    #[serde(default)]
    pub n_opt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    /// Multiphoton rates `G_ij / 2 pi`, Hz; row i = mechanical mode,
    /// column j = cavity. Exclusive with `g0_hz` + `photons`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_hz: Option<[[f64; 2]; 2]>,
    /// Single-photon rates, Hz, to be scaled by `sqrt(photons)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g0_hz: Option<[[f64; 2]; 2]>,
    /// Intracavity photon numbers per cavity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub photons: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Derived-coupling rule applied at each grid point.
    pub control: ControlRule,
    pub grid_kind: GridKind,
    pub min_hz: f64,
    pub max_hz: f64,
    pub points: usize,
    /// Extra exact grid points, Hz.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub insert_hz: Vec<f64>,
}

fn config_err(message: impl Into<String>) -> Error {
    Error::Config {
        message: message.into(),
    }
}

impl ConfigFile {
    /// Resolve defaults, convert units, and validate into a [`Scenario`].
    pub fn into_scenario(self) -> Result<Scenario> {
        if self.name.trim().is_empty() {
            return Err(config_err("name must not be empty"));
        }
        let mech_cfg = &self.mechanics;
        let omega_bar = TAU * mech_cfg.mean_freq_hz;
        let delta = TAU * mech_cfg.delta_freq_hz;
        let n_th = mech_cfg.n_th.unwrap_or(DEFAULT_N_TH);
        let mech = [
            MechanicalMode {
                omega: omega_bar + 0.5 * delta,
                gamma: TAU * mech_cfg.gamma1_hz,
                n_th,
            },
            MechanicalMode {
                omega: omega_bar - 0.5 * delta,
                gamma: TAU * mech_cfg.gamma2_hz,
                n_th,
            },
        ];
        let cav = [
            resolve_cavity(&self.cavity1, mech_cfg.mean_freq_hz, "cavity1")?,
            resolve_cavity(&self.cavity2, mech_cfg.mean_freq_hz, "cavity2")?,
        ];
        let coupling = resolve_coupling(&self.coupling)?;
        let probe_weights = self.probe_weights.unwrap_or([
            std::f64::consts::FRAC_1_SQRT_2,
            std::f64::consts::FRAC_1_SQRT_2,
        ]);
        let base = SystemParams {
            mech,
            cav,
            coupling,
            probe_weights,
        };
        base.validate()?;
        let grid = GridSpec {
            kind: self.sweep.grid_kind,
            min_hz: self.sweep.min_hz,
            max_hz: self.sweep.max_hz,
            points: self.sweep.points,
            insert_hz: self.sweep.insert_hz.clone(),
        };
        let scenario = Scenario {
            name: self.name,
            description: self.description,
            base,
            rule: self.sweep.control,
            grid,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Inverse of [`ConfigFile::into_scenario`] for round-tripping. The
    /// schema carries one common `n_th`, so unequal baths (only reachable
    /// through the API) serialize as the mode-1 value.
    pub fn from_scenario(s: &Scenario) -> ConfigFile {
        let base = &s.base;
        let entries = base.coupling.entries();
        ConfigFile {
            name: s.name.clone(),
            description: s.description.clone(),
            mechanics: MechanicsConfig {
                mean_freq_hz: base.omega_mean() / TAU,
                delta_freq_hz: base.delta_omega() / TAU,
                gamma1_hz: base.mech[0].gamma / TAU,
                gamma2_hz: base.mech[1].gamma / TAU,
                n_th: Some(base.mech[0].n_th),
            },
            cavity1: CavityConfig {
                kappa_hz: Some(base.cav[0].kappa / TAU),
                linewidth_hz: None,
                detuning_hz: Some(base.cav[0].detuning / TAU),
                n_opt: base.cav[0].n_opt,
            },
            cavity2: CavityConfig {
                kappa_hz: Some(base.cav[1].kappa / TAU),
                linewidth_hz: None,
                detuning_hz: Some(base.cav[1].detuning / TAU),
                n_opt: base.cav[1].n_opt,
            },
            coupling: CouplingConfig {
                g_hz: Some([
                    [entries[0][0] / TAU, entries[0][1] / TAU],
                    [entries[1][0] / TAU, entries[1][1] / TAU],
                ]),
                g0_hz: None,
                photons: None,
            },
            probe_weights: Some(base.probe_weights),
            sweep: SweepConfig {
                control: s.rule,
                grid_kind: s.grid.kind,
                min_hz: s.grid.min_hz,
                max_hz: s.grid.max_hz,
                points: s.grid.points,
                insert_hz: s.grid.insert_hz.clone(),
            },
        }
    }
}

fn resolve_cavity(cfg: &CavityConfig, mean_freq_hz: f64, which: &str) -> Result<CavityMode> {
    let kappa = match (cfg.kappa_hz, cfg.linewidth_hz) {
        (Some(_), Some(_)) => {
            return Err(config_err(format!(
                "{which}: kappa_hz and linewidth_hz are mutually exclusive"
            )))
        }
        (Some(k), None) => TAU * k,
        (None, Some(lw)) => TAU * (lw / 2.0),
        (None, None) => {
            return Err(config_err(format!(
                "{which}: one of kappa_hz or linewidth_hz is required"
            )))
        }
    };
    let detuning = TAU * cfg.detuning_hz.unwrap_or(-mean_freq_hz);
    Ok(CavityMode {
        kappa,
        detuning,
        n_opt: cfg.n_opt,
    })
}

fn resolve_coupling(cfg: &CouplingConfig) -> Result<CouplingMatrix> {
    match (&cfg.g_hz, &cfg.g0_hz, &cfg.photons) {
        (Some(_), Some(_), _) => Err(config_err(
            "coupling: g_hz and g0_hz are mutually exclusive",
        )),
        (Some(_), None, Some(_)) => Err(config_err(
            "coupling: photons only applies together with g0_hz",
        )),
        (Some(g), None, None) => CouplingMatrix::from_multiphoton([
            [TAU * g[0][0], TAU * g[0][1]],
            [TAU * g[1][0], TAU * g[1][1]],
        ]),
        (None, Some(g0), Some(photons)) => CouplingMatrix::from_single_photon(
            [
                [TAU * g0[0][0], TAU * g0[0][1]],
                [TAU * g0[1][0], TAU * g0[1][1]],
            ],
            *photons,
        ),
        (None, Some(_), None) => Err(config_err(
            "coupling: g0_hz requires photons to be given as well",
        )),
        (None, None, _) => Err(config_err(
            "coupling: one of g_hz or (g0_hz, photons) is required",
        )),
    }
}

/// Parse a scenario from TOML text.
pub fn scenario_from_toml(text: &str) -> Result<Scenario> {
    let cfg: ConfigFile = toml::from_str(text)?;
    cfg.into_scenario()
}

/// Serialize a scenario to TOML.
pub fn scenario_to_toml(s: &Scenario) -> Result<String> {
    toml::to_string(&ConfigFile::from_scenario(s)).map_err(|e| config_err(e.to_string()))
}

/// Load a scenario from a TOML config file, or from the `scenario` field
/// of an emitted JSON metadata file (enabling re-execution).
pub fn load_config(path: &std::path::Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().and_then(|e| e.to_str()) == Some("json") {
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let cfg_value = value.get("scenario").cloned().unwrap_or(value);
        let cfg: ConfigFile = serde_json::from_value(cfg_value)?;
        cfg.into_scenario()
    } else {
        scenario_from_toml(&text)
    }
}
