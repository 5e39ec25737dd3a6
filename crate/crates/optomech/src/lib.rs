//! Simulation and analysis of a four-mode cavity optomechanical system:
//! two near-degenerate mechanical modes dissipatively coupled through two
//! driven cavity modes.
//!
//! The crate models the linearized red-detuned dynamics in the rotating-wave
//! approximation and cross-validates four independent computations of the
//! same physics:
//!
//! * [`model`] builds the full 4-mode Langevin drift/diffusion matrices;
//! * [`effective`] eliminates the cavities to a 2x2 non-Hermitian
//!   Hamiltonian and analyzes its eigenmodes, dark/bright structure, and
//!   exceptional point;
//! * [`steady_state`] solves Lyapunov equations for stationary phonon
//!   numbers and carries the closed-form cooling expressions;
//! * [`spectra`] synthesizes probe power spectral densities and extracts
//!   eigenmode parameters by Lorentzian fitting;
//! * [`trajectory`] is an exactly discretized stochastic simulator used as
//!   an independent oracle for the steady-state results;
//! * [`sweep`] packages the built-in sweep scenarios, config ingestion, and
//!   CSV/JSON emission behind the `optomech` binary.
//!
//! See the crate examples for one runnable program per capability.

pub mod config;
pub mod effective;
pub mod error;
pub mod linalg;
pub mod model;
pub mod spectra;
pub mod steady_state;
pub mod sweep;
pub mod trajectory;

pub use error::{Error, Result};

/// Complex double, the scalar type of every dynamical quantity here.
pub type C64 = num_complex::Complex64;

#[cfg(test)]
pub(crate) mod test_support {
    pub const TAU: f64 = std::f64::consts::TAU;

    use crate::model::SystemParams;

    /// Single-cavity reference operating point: equal cavity-1 couplings scaled
    /// to a mediated backaction `gamma1` (rad/s), cavity 2 dark.
    pub fn single_cavity_point(gamma1: f64, delta_omega: f64) -> SystemParams {
        let mut p = crate::sweep::builtin_base_params(delta_omega);
        p.coupling.set_column(0, [1.0, 1.0]);
        p.with_mediated_backaction(0, gamma1).unwrap()
    }

    /// Two-cavity operating point with opposed coupling vectors, so the
    /// mediated rates cancel (`Gamma_2 = -Gamma_1`); `delta = 2pi x 60 Hz`.
    pub fn opposed_coupling_point(gamma1: f64) -> SystemParams {
        let mut p = crate::sweep::builtin_base_params(TAU * 60.0);
        p.coupling.set_column(0, [1.0, 1.0]);
        p.coupling.set_column(1, [-1.0, 1.0]);
        let p = p.with_mediated_backaction(0, gamma1).unwrap();
        p.with_mediated_backaction(1, gamma1).unwrap()
    }

    fn close(a: f64, b: f64, what: &str) {
        assert!(
            (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300),
            "{what}: {a} vs {b}"
        );
    }

    /// Scenario equality up to the one-ulp rounding of the Hz <-> rad/s
    /// unit conversions at the config boundary.
    pub fn assert_scenarios_match(a: &crate::sweep::Scenario, b: &crate::sweep::Scenario) {
        assert_eq!(a.name, b.name);
        assert_eq!(a.description, b.description);
        assert_eq!(a.rule, b.rule);
        assert_eq!(a.grid.kind, b.grid.kind);
        assert_eq!(a.grid.points, b.grid.points);
        close(a.grid.min_hz, b.grid.min_hz, "grid.min_hz");
        close(a.grid.max_hz, b.grid.max_hz, "grid.max_hz");
        assert_eq!(a.grid.insert_hz.len(), b.grid.insert_hz.len());
        for (x, y) in a.grid.insert_hz.iter().zip(&b.grid.insert_hz) {
            close(*x, *y, "grid.insert_hz");
        }
        for i in 0..2 {
            close(a.base.mech[i].omega, b.base.mech[i].omega, "mech.omega");
            close(a.base.mech[i].gamma, b.base.mech[i].gamma, "mech.gamma");
            close(a.base.mech[i].n_th, b.base.mech[i].n_th, "mech.n_th");
            close(a.base.cav[i].kappa, b.base.cav[i].kappa, "cav.kappa");
            close(
                a.base.cav[i].detuning,
                b.base.cav[i].detuning,
                "cav.detuning",
            );
            close(a.base.cav[i].n_opt, b.base.cav[i].n_opt, "cav.n_opt");
            close(
                a.base.probe_weights[i],
                b.base.probe_weights[i],
                "probe_weights",
            );
            for j in 0..2 {
                close(
                    a.base.coupling.entry(i, j),
                    b.base.coupling.entry(i, j),
                    "coupling",
                );
            }
        }
    }
}
