//! Physical parameters of the four-mode system and the linearized Langevin
//! drift/diffusion matrices built from them.
//!
//! The mode vector is ordered `v = (b1, b2, da1, da2)`: two mechanical
//! complex amplitudes followed by the two cavity fluctuation amplitudes.
//! All rates are amplitude decay rates in rad/s; all frequencies angular.
//! Unit conversions from ordinary frequency happen at the config boundary
//! only (see [`crate::config`]).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::C64;

/// Couplings with `max |G_ij| / kappa_j` above this make the adiabatic
/// elimination of the cavities questionable; callers should warn.
pub const ADIABATICITY_WARN_THRESHOLD: f64 = 0.1;

/// One mechanical resonator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechanicalMode {
    /// Angular frequency, rad/s.
    pub omega: f64,
    /// Amplitude decay rate, rad/s.
    pub gamma: f64,
    /// Mean thermal occupation of the mode's bath.
    pub n_th: f64,
}

impl MechanicalMode {
    pub fn validate(&self) -> Result<()> {
        for (v, what) in [
            (self.omega, "mechanical omega"),
            (self.gamma, "mechanical gamma"),
            (self.n_th, "mechanical n_th"),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFinite { what: what.into() });
            }
        }
        if self.omega <= 0.0 {
            return Err(Error::InvalidParameter {
                what: format!("mechanical omega must be > 0, got {}", self.omega),
            });
        }
        if self.gamma <= 0.0 {
            return Err(Error::InvalidParameter {
                what: format!("mechanical gamma must be > 0, got {}", self.gamma),
            });
        }
        if self.n_th < 0.0 {
            return Err(Error::InvalidParameter {
                what: format!("mechanical n_th must be >= 0, got {}", self.n_th),
            });
        }
        Ok(())
    }
}

/// One driven cavity mode, described in the frame rotating at its drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityMode {
    /// Amplitude decay rate, rad/s.
    pub kappa: f64,
    /// Drive-cavity detuning `Delta = omega_d - omega_c`, rad/s. Negative
    /// for red detuning.
    pub detuning: f64,
    /// Optical bath occupation (0 for the classical-thermal noise model).
    pub n_opt: f64,
}

impl CavityMode {
    pub fn validate(&self) -> Result<()> {
        for (v, what) in [
            (self.kappa, "cavity kappa"),
            (self.detuning, "cavity detuning"),
            (self.n_opt, "cavity n_opt"),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFinite { what: what.into() });
            }
        }
        if self.kappa <= 0.0 {
            return Err(Error::InvalidParameter {
                what: format!("cavity kappa must be > 0, got {}", self.kappa),
            });
        }
        if self.n_opt < 0.0 {
            return Err(Error::InvalidParameter {
                what: format!("cavity n_opt must be >= 0, got {}", self.n_opt),
            });
        }
        Ok(())
    }
}

/// Multiphoton coupling rates `G[i][j]` between mechanical mode `i` and
/// cavity mode `j`, rad/s. Entries are real and may carry either sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingMatrix {
    g: [[f64; 2]; 2],
}

impl CouplingMatrix {
    /// Build from the multiphoton rates directly.
    pub fn from_multiphoton(g: [[f64; 2]; 2]) -> Result<Self> {
        let m = CouplingMatrix { g };
        m.validate()?;
        Ok(m)
    }

    /// Build from single-photon rates `g0[i][j]` (rad/s, signed) and
    /// intracavity photon numbers, via `G_ij = g0_ij * sqrt(photons_j)`.
    pub fn from_single_photon(g0: [[f64; 2]; 2], photons: [f64; 2]) -> Result<Self> {
        for (j, &n) in photons.iter().enumerate() {
            if !n.is_finite() || n < 0.0 {
                return Err(Error::InvalidParameter {
                    what: format!("photon number for cavity {} must be finite and >= 0", j + 1),
                });
            }
        }
        let mut g = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                g[i][j] = g0[i][j] * photons[j].sqrt();
            }
        }
        Self::from_multiphoton(g)
    }

    pub fn zero() -> Self {
        CouplingMatrix { g: [[0.0; 2]; 2] }
    }

    /// `G[i][j]` with zero-based mode/cavity indices.
    pub fn entry(&self, mode: usize, cavity: usize) -> f64 {
        self.g[mode][cavity]
    }

    /// The coupling column of one cavity, `(G_1j, G_2j)`.
    pub fn column(&self, cavity: usize) -> [f64; 2] {
        [self.g[0][cavity], self.g[1][cavity]]
    }

    pub fn set_column(&mut self, cavity: usize, col: [f64; 2]) {
        self.g[0][cavity] = col[0];
        self.g[1][cavity] = col[1];
    }

    pub fn entries(&self) -> [[f64; 2]; 2] {
        self.g
    }

    pub fn validate(&self) -> Result<()> {
        if self.g.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "coupling matrix".into(),
            });
        }
        Ok(())
    }
}

/// Full physical description of the four-mode system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    pub mech: [MechanicalMode; 2],
    pub cav: [CavityMode; 2],
    pub coupling: CouplingMatrix,
    /// Weights `(c1, c2)` of the probed observable `c1 b1 + c2 b2`.
    pub probe_weights: [f64; 2],
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        for m in &self.mech {
            m.validate()?;
        }
        for c in &self.cav {
            c.validate()?;
        }
        self.coupling.validate()?;
        if self.probe_weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite {
                what: "probe weights".into(),
            });
        }
        if self.probe_weights == [0.0, 0.0] {
            return Err(Error::InvalidParameter {
                what: "probe weights must not both be zero".into(),
            });
        }
        Ok(())
    }

    /// Mean mechanical frequency `(omega_1 + omega_2) / 2`, rad/s.
    pub fn omega_mean(&self) -> f64 {
        0.5 * (self.mech[0].omega + self.mech[1].omega)
    }

    /// Mechanical frequency difference `omega_1 - omega_2`, rad/s.
    pub fn delta_omega(&self) -> f64 {
        self.mech[0].omega - self.mech[1].omega
    }

    /// True when cavity 2 is completely decoupled.
    pub fn is_single_cavity(&self) -> bool {
        self.coupling.entry(0, 1) == 0.0 && self.coupling.entry(1, 1) == 0.0
    }
}

/// Drift and diffusion of the linear Langevin system `dv = A v dt + noise`.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsModel {
    /// 4x4 complex drift matrix over `(b1, b2, da1, da2)`.
    pub drift: DMatrix<C64>,
    /// Diagonal of the 4x4 real diffusion matrix,
    /// `(2 gamma_1 n_th1, 2 gamma_2 n_th2, 2 kappa_1 n_opt1, 2 kappa_2 n_opt2)`.
    pub diffusion: DVector<f64>,
}

impl DynamicsModel {
    /// The diffusion diagonal as a complex matrix, for the solvers.
    pub fn diffusion_matrix(&self) -> DMatrix<C64> {
        DMatrix::from_fn(4, 4, |i, j| {
            if i == j {
                C64::new(self.diffusion[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }
}

/// Outcome of a stability check: sign of the spectral abscissa of the drift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stability {
    pub stable: bool,
    /// Largest real part over the drift eigenvalues, rad/s.
    pub abscissa: f64,
}

/// Assemble the drift and diffusion matrices from the physical parameters.
///
/// The construction rule, with `i` indexing mechanics and `j` cavities:
/// `A[b_i][b_i] = -(i omega_i + gamma_i)`, `A[a_j][a_j] = i Delta_j - kappa_j`,
/// `A[b_i][a_j] = A[a_j][b_i] = i G_ij`, everything else zero.
pub fn build_dynamics(params: &SystemParams) -> Result<DynamicsModel> {
    params.validate()?;
    let i = C64::i();
    let mut a = DMatrix::<C64>::zeros(4, 4);
    for m in 0..2 {
        a[(m, m)] = -(i * params.mech[m].omega + C64::new(params.mech[m].gamma, 0.0));
    }
    for c in 0..2 {
        a[(2 + c, 2 + c)] = i * params.cav[c].detuning - C64::new(params.cav[c].kappa, 0.0);
    }
    for m in 0..2 {
        for c in 0..2 {
            let g = i * params.coupling.entry(m, c);
            a[(m, 2 + c)] = g;
            a[(2 + c, m)] = g;
        }
    }
    let diffusion = DVector::from_vec(vec![
        2.0 * params.mech[0].gamma * params.mech[0].n_th,
        2.0 * params.mech[1].gamma * params.mech[1].n_th,
        2.0 * params.cav[0].kappa * params.cav[0].n_opt,
        2.0 * params.cav[1].kappa * params.cav[1].n_opt,
    ]);
    Ok(DynamicsModel {
        drift: a,
        diffusion,
    })
}

/// Check asymptotic stability of a drift matrix and report its abscissa.
pub fn stability_check(model: &DynamicsModel) -> Result<Stability> {
    drift_stability(&model.drift)
}

/// Stability of an arbitrary drift matrix (also used for the reduced model).
pub fn drift_stability(drift: &DMatrix<C64>) -> Result<Stability> {
    let abscissa = linalg::spectral_abscissa(drift)?;
    Ok(Stability {
        stable: abscissa < 0.0,
        abscissa,
    })
}

/// `max_ij |G_ij| / kappa_j`: the small parameter of the adiabatic
/// elimination. Values above [`ADIABATICITY_WARN_THRESHOLD`] deserve a
/// warning but are not an error.
pub fn adiabaticity_ratio(params: &SystemParams) -> f64 {
    let mut worst: f64 = 0.0;
    for m in 0..2 {
        for c in 0..2 {
            worst = worst.max(params.coupling.entry(m, c).abs() / params.cav[c].kappa);
        }
    }
    worst
}
