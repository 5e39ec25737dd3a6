//! Adiabatic elimination of the cavity modes: the 2x2 non-Hermitian
//! effective Hamiltonian, its eigenmodes, exceptional-point location, and
//! the dark/bright mode algebra.
//!
//! The cavity susceptibility is evaluated at resonance with the drive
//! sidebands, where it is purely dissipative: each cavity contributes
//! backaction damping `Gamma_ij = G_ij^2 / kappa_j` and a dissipative
//! inter-mode coupling `Gamma_j = G_1j G_2j / kappa_j` (signed). Optical
//! spring shifts are absent by construction in this evaluation.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::SystemParams;
use crate::C64;

/// `|G_1j G_2j| / kappa_j` must exceed this multiple of `|delta_omega| / 2`
/// for [`dark_mode_condition`] to declare the dark-mode regime.
pub const DARK_MODE_RATIO_THRESHOLD: f64 = 5.0;

/// Relative tolerance on `|disc|` below which the discriminant counts as
/// zero and the regime is reported as at the exceptional point.
pub const EP_REGIME_TOL: f64 = 1e-9;

/// Relative spread allowed between the two intrinsic gammas (and between
/// the two single-cavity backaction rates) for the closed-form eigenmodes.
pub const CLOSED_FORM_ASYMMETRY_TOL: f64 = 0.05;

/// Reduced description of the mechanical pair after cavity elimination.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveModel {
    /// 2x2 complex non-Hermitian Hamiltonian, rad/s.
    pub h_eff: DMatrix<C64>,
    /// Backaction damping rates `backaction[i][j] = Gamma_ij >= 0`, rad/s.
    pub backaction: [[f64; 2]; 2],
    /// Cavity-mediated coupling rates `(Gamma_1, Gamma_2)`, rad/s, signed.
    pub mediated: [f64; 2],
    /// Intrinsic mechanical decay rates `(gamma_1, gamma_2)`, rad/s.
    pub gamma_intrinsic: [f64; 2],
}

impl EffectiveModel {
    /// Bare mechanical frequencies `(omega_1, omega_2)` read off the diagonal.
    pub fn omegas(&self) -> [f64; 2] {
        [self.h_eff[(0, 0)].re, self.h_eff[(1, 1)].re]
    }

    /// Total damping of each mode, `gamma_i + Gamma_i1 + Gamma_i2`.
    pub fn total_damping(&self) -> [f64; 2] {
        [
            self.gamma_intrinsic[0] + self.backaction[0][0] + self.backaction[0][1],
            self.gamma_intrinsic[1] + self.backaction[1][0] + self.backaction[1][1],
        ]
    }

    /// Drift matrix `-i H_eff` of the reduced Langevin dynamics.
    pub fn drift(&self) -> DMatrix<C64> {
        self.h_eff.map(|z| -C64::i() * z)
    }

    /// True when cavity 2 contributes nothing (`Gamma_12 = Gamma_22 = Gamma_2 = 0`).
    pub fn is_single_cavity(&self) -> bool {
        self.backaction[0][1] == 0.0 && self.backaction[1][1] == 0.0 && self.mediated[1] == 0.0
    }
}

/// Label for an eigenmode's relation to the cavity-coupled direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeClass {
    Dark,
    Bright,
    Hybrid,
}

impl std::fmt::Display for ModeClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModeClass::Dark => write!(f, "dark"),
            ModeClass::Bright => write!(f, "bright"),
            ModeClass::Hybrid => write!(f, "hybrid"),
        }
    }
}

/// Position relative to the exceptional point of the coupled pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpRegime {
    PreEp,
    AtEp,
    PostEp,
    NotApplicable,
}

impl std::fmt::Display for EpRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EpRegime::PreEp => write!(f, "pre-EP"),
            EpRegime::AtEp => write!(f, "at-EP"),
            EpRegime::PostEp => write!(f, "post-EP"),
            EpRegime::NotApplicable => write!(f, "not-applicable"),
        }
    }
}

/// One eigenmode of the effective Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenmode {
    /// Eigenfrequency `Re(lambda)`, rad/s.
    pub omega: f64,
    /// Amplitude decay rate `-Im(lambda)`, rad/s.
    pub gamma: f64,
    pub classification: ModeClass,
}

/// Both eigenmodes plus the regime flag.
///
/// Modes are ordered "plus" first: descending eigenfrequency, with
/// frequency-degenerate pairs ordered narrow-linewidth first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenmodeReport {
    pub modes: [Eigenmode; 2],
    pub regime: EpRegime,
}

impl EigenmodeReport {
    pub fn plus(&self) -> &Eigenmode {
        &self.modes[0]
    }

    pub fn minus(&self) -> &Eigenmode {
        &self.modes[1]
    }
}

/// Orthonormal bright/dark directions of one cavity's coupling vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DarkBrightBasis {
    /// Unit vector along `(G_1j, G_2j)`: maximally coupled, strongly damped.
    pub bright: [f64; 2],
    /// Unit vector along `(G_2j, -G_1j)`: decoupled from the cavity.
    pub dark: [f64; 2],
}

/// Eliminate the cavities and assemble the effective Hamiltonian.
///
/// The backaction rates follow the resonant evaluation `Gamma_ij = G_ij^2 /
/// kappa_j`, `Gamma_j = G_1j G_2j / kappa_j`, which presumes red-detuned
/// drives near the mechanical sidebands. Check
/// [`crate::model::adiabaticity_ratio`] against
/// [`crate::model::ADIABATICITY_WARN_THRESHOLD`] before trusting the result
/// quantitatively; this function itself never fails on large couplings.
pub fn effective_model(params: &SystemParams) -> Result<EffectiveModel> {
    params.validate()?;
    let mut backaction = [[0.0; 2]; 2];
    for (i, row) in backaction.iter_mut().enumerate() {
        for (j, rate) in row.iter_mut().enumerate() {
            let g = params.coupling.entry(i, j);
            *rate = g * g / params.cav[j].kappa;
        }
    }
    let mediated = [
        params.coupling.entry(0, 0) * params.coupling.entry(1, 0) / params.cav[0].kappa,
        params.coupling.entry(0, 1) * params.coupling.entry(1, 1) / params.cav[1].kappa,
    ];
    let gamma_intrinsic = [params.mech[0].gamma, params.mech[1].gamma];
    let i = C64::i();
    let off = -i * (mediated[0] + mediated[1]);
    let mut h = DMatrix::<C64>::zeros(2, 2);
    h[(0, 0)] = C64::new(params.mech[0].omega, 0.0)
        - i * (gamma_intrinsic[0] + backaction[0][0] + backaction[0][1]);
    h[(1, 1)] = C64::new(params.mech[1].omega, 0.0)
        - i * (gamma_intrinsic[1] + backaction[1][0] + backaction[1][1]);
    h[(0, 1)] = off;
    h[(1, 0)] = off;
    Ok(EffectiveModel {
        h_eff: h,
        backaction,
        mediated,
        gamma_intrinsic,
    })
}

/// Discriminant of the characteristic polynomial, `(H00 - H11)^2 + 4 H01 H10`.
fn discriminant(h: &DMatrix<C64>) -> C64 {
    let d = h[(0, 0)] - h[(1, 1)];
    d * d + 4.0 * h[(0, 1)] * h[(1, 0)]
}

fn regime_of(h: &DMatrix<C64>) -> EpRegime {
    let off = h[(0, 1)] * h[(1, 0)];
    if off == C64::new(0.0, 0.0) {
        // uncoupled modes never coalesce
        return EpRegime::NotApplicable;
    }
    let disc = discriminant(h);
    let scale = (h[(0, 0)] - h[(1, 1)]).norm().max(2.0 * off.norm().sqrt());
    if disc.norm() <= EP_REGIME_TOL * scale * scale {
        EpRegime::AtEp
    } else if disc.re > 0.0 {
        EpRegime::PreEp
    } else {
        EpRegime::PostEp
    }
}

/// Classification basis reconstructed from the backaction rates of the
/// dominant cavity: bright along `(sqrt(Gamma_1j), sign(Gamma_j) sqrt(Gamma_2j))`.
fn classification_basis(eff: &EffectiveModel) -> Option<DarkBrightBasis> {
    for j in 0..2 {
        let b1 = eff.backaction[0][j];
        let b2 = eff.backaction[1][j];
        if b1 + b2 > 0.0 {
            let sign = if eff.mediated[j] < 0.0 { -1.0 } else { 1.0 };
            let v = [b1.sqrt(), sign * b2.sqrt()];
            let norm = (v[0] * v[0] + v[1] * v[1]).sqrt();
            return Some(DarkBrightBasis {
                bright: [v[0] / norm, v[1] / norm],
                dark: [v[1] / norm, -v[0] / norm],
            });
        }
    }
    None
}

fn classify(vec: [C64; 2], basis: Option<&DarkBrightBasis>) -> ModeClass {
    let Some(basis) = basis else {
        return ModeClass::Hybrid;
    };
    let norm_sqr = vec[0].norm_sqr() + vec[1].norm_sqr();
    if norm_sqr == 0.0 {
        return ModeClass::Hybrid;
    }
    let overlap = |b: [f64; 2]| -> f64 {
        let d = vec[0] * b[0] + vec[1] * b[1];
        d.norm_sqr() / norm_sqr
    };
    if overlap(basis.dark) > 0.9 {
        ModeClass::Dark
    } else if overlap(basis.bright) > 0.9 {
        ModeClass::Bright
    } else {
        ModeClass::Hybrid
    }
}

/// Eigenvector of the symmetric 2x2 `h` for eigenvalue `lambda`.
fn eigenvector(h: &DMatrix<C64>, lambda: C64) -> [C64; 2] {
    let e = h[(0, 1)];
    if e.norm() == 0.0 {
        // diagonal: pick the basis vector whose diagonal entry is closer
        if (h[(0, 0)] - lambda).norm() <= (h[(1, 1)] - lambda).norm() {
            [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]
        } else {
            [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]
        }
    } else {
        [e, lambda - h[(0, 0)]]
    }
}

fn order_modes(mut pair: [(C64, [C64; 2]); 2]) -> [(C64, [C64; 2]); 2] {
    let freq_gap = pair[0].0.re - pair[1].0.re;
    let gamma_gap = pair[1].0.im - pair[0].0.im;
    // frequency-split regime orders by descending frequency; past the EP
    // the linewidth splitting dominates and the narrow branch comes first
    let swap = if freq_gap.abs() >= gamma_gap.abs() {
        freq_gap < 0.0
    } else {
        gamma_gap > 0.0
    };
    if swap {
        pair.swap(0, 1);
    }
    pair
}

/// Eigenmodes of an arbitrary effective model by direct eigendecomposition.
pub fn eigenmodes_numeric(eff: &EffectiveModel) -> Result<EigenmodeReport> {
    let h = &eff.h_eff;
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite {
            what: "effective Hamiltonian".into(),
        });
    }
    let tr = h[(0, 0)] + h[(1, 1)];
    let sq = discriminant(h).sqrt();
    let lp = 0.5 * (tr + sq);
    let lm = 0.5 * (tr - sq);
    let pair = order_modes([(lp, eigenvector(h, lp)), (lm, eigenvector(h, lm))]);
    let basis = classification_basis(eff);
    let modes = pair.map(|(lambda, vec)| Eigenmode {
        omega: lambda.re,
        gamma: -lambda.im,
        classification: classify(vec, basis.as_ref()),
    });
    Ok(EigenmodeReport {
        modes,
        regime: regime_of(h),
    })
}

/// Closed-form eigenmodes of the single-cavity, near-symmetric case.
///
/// Valid when cavity 2 is inactive, the intrinsic gammas agree within
/// [`CLOSED_FORM_ASYMMETRY_TOL`], and the two cavity-1 backaction rates do
/// as well; the means are substituted. Below the EP the pair splits in
/// frequency, `omega_pm = omega_bar +- sqrt((delta/2)^2 - Gamma_1^2)`, with
/// a common linewidth `gamma + Gamma_1`; above it the frequencies lock and
/// the linewidths split, `gamma_pm = gamma + Gamma_1 -+ sqrt(Gamma_1^2 -
/// (delta/2)^2)`, the narrow branch being the dark mode.
pub fn eigenmodes_closed_form(eff: &EffectiveModel) -> Result<EigenmodeReport> {
    if !eff.is_single_cavity() {
        return Err(Error::ClosedFormInapplicable {
            reason: "cavity 2 is active".into(),
        });
    }
    let [g1, g2] = eff.gamma_intrinsic;
    let gamma_mean = 0.5 * (g1 + g2);
    if (g1 - g2).abs() > CLOSED_FORM_ASYMMETRY_TOL * gamma_mean {
        return Err(Error::ClosedFormInapplicable {
            reason: format!(
                "intrinsic gammas differ by more than {:.0}%",
                100.0 * CLOSED_FORM_ASYMMETRY_TOL
            ),
        });
    }
    let b1 = eff.backaction[0][0];
    let b2 = eff.backaction[1][0];
    let back_mean = 0.5 * (b1 + b2);
    if (b1 - b2).abs() > CLOSED_FORM_ASYMMETRY_TOL * back_mean && back_mean > 0.0 {
        return Err(Error::ClosedFormInapplicable {
            reason: "cavity-1 backaction rates are asymmetric".into(),
        });
    }
    let omegas = eff.omegas();
    let omega_bar = 0.5 * (omegas[0] + omegas[1]);
    let half_delta = 0.5 * (omegas[0] - omegas[1]);
    let coupling = eff.mediated[0].abs();
    let damping = gamma_mean + back_mean;
    let disc = half_delta * half_delta - coupling * coupling;

    // symmetric stand-in Hamiltonian used for regime and classification
    let i = C64::i();
    let mut h = DMatrix::<C64>::zeros(2, 2);
    h[(0, 0)] = C64::new(omega_bar + half_delta, 0.0) - i * damping;
    h[(1, 1)] = C64::new(omega_bar - half_delta, 0.0) - i * damping;
    h[(0, 1)] = -i * eff.mediated[0];
    h[(1, 0)] = -i * eff.mediated[0];
    let regime = regime_of(&h);
    let basis = classification_basis(eff);

    let modes = if disc >= 0.0 {
        let split = disc.sqrt();
        let classify_at = |lambda: C64| classify(eigenvector(&h, lambda), basis.as_ref());
        [
            Eigenmode {
                omega: omega_bar + split,
                gamma: damping,
                classification: classify_at(C64::new(omega_bar + split, -damping)),
            },
            Eigenmode {
                omega: omega_bar - split,
                gamma: damping,
                classification: classify_at(C64::new(omega_bar - split, -damping)),
            },
        ]
    } else {
        let split = (-disc).sqrt();
        [
            Eigenmode {
                omega: omega_bar,
                gamma: damping - split,
                classification: ModeClass::Dark,
            },
            Eigenmode {
                omega: omega_bar,
                gamma: damping + split,
                classification: ModeClass::Bright,
            },
        ]
    };
    Ok(EigenmodeReport { modes, regime })
}

/// Located exceptional point of a single-cavity sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpLocation {
    /// `Gamma_1 = |delta_omega| / 2`, rad/s.
    pub analytic: f64,
    /// Grid point minimizing the eigenvalue gap `|lambda_+ - lambda_-|`, rad/s.
    pub grid_minimum: f64,
    /// The gap at that grid point, rad/s.
    pub gap_at_minimum: f64,
}

/// Locate the EP analytically and confirm it on a `Gamma_1` grid.
///
/// Each grid value rescales the cavity-1 couplings of `params` so that
/// `|G_11 G_21| / kappa_1` hits the grid value; cavity 2 must be inactive.
pub fn locate_ep(params: &SystemParams, gamma1_grid: &[f64]) -> Result<EpLocation> {
    if !params.is_single_cavity() {
        return Err(Error::SecondCavityActive);
    }
    if gamma1_grid.is_empty() {
        return Err(Error::InvalidParameter {
            what: "empty Gamma_1 grid".into(),
        });
    }
    let analytic = 0.5 * params.delta_omega().abs();
    let mut best: Option<(f64, f64)> = None;
    for &g in gamma1_grid {
        let scaled = params.with_mediated_backaction(0, g)?;
        let eff = effective_model(&scaled)?;
        let report = eigenmodes_numeric(&eff)?;
        let gap = {
            let d_om = report.modes[0].omega - report.modes[1].omega;
            let d_ga = report.modes[0].gamma - report.modes[1].gamma;
            (d_om * d_om + d_ga * d_ga).sqrt()
        };
        if best.is_none_or(|(_, bg)| gap < bg) {
            best = Some((g, gap));
        }
    }
    let (grid_minimum, gap_at_minimum) = best.unwrap();
    Ok(EpLocation {
        analytic,
        grid_minimum,
        gap_at_minimum,
    })
}

/// Bright/dark directions of one cavity's coupling column (zero-based index).
pub fn dark_bright_basis(
    coupling: &crate::model::CouplingMatrix,
    cavity: usize,
) -> Result<DarkBrightBasis> {
    let col = coupling.column(cavity);
    let norm = (col[0] * col[0] + col[1] * col[1]).sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroCouplingVector { cavity: cavity + 1 });
    }
    Ok(DarkBrightBasis {
        bright: [col[0] / norm, col[1] / norm],
        dark: [col[1] / norm, -col[0] / norm],
    })
}

/// True when cavity 1 dominates the mechanical splitting strongly enough to
/// form a dark mode: `|G_11 G_21| / kappa_1 >= threshold * |delta_omega| / 2`
/// with the threshold of [`DARK_MODE_RATIO_THRESHOLD`]. Boundary counts as
/// inside the regime.
pub fn dark_mode_condition(params: &SystemParams) -> bool {
    let mediated =
        (params.coupling.entry(0, 0) * params.coupling.entry(1, 0)).abs() / params.cav[0].kappa;
    mediated >= DARK_MODE_RATIO_THRESHOLD * 0.5 * params.delta_omega().abs()
}

impl SystemParams {
    /// Rescale one cavity's coupling column, preserving its direction, so
    /// that `|G_1j G_2j| / kappa_j` equals `target`. Fails when the base
    /// column has a zero entry and `target > 0`.
    pub fn with_mediated_backaction(&self, cavity: usize, target: f64) -> Result<SystemParams> {
        if target < 0.0 || !target.is_finite() {
            return Err(Error::InvalidParameter {
                what: format!("mediated backaction target must be finite and >= 0, got {target}"),
            });
        }
        let col = self.coupling.column(cavity);
        let mut out = self.clone();
        if target == 0.0 {
            out.coupling.set_column(cavity, [0.0, 0.0]);
            return Ok(out);
        }
        let prod = (col[0] * col[1]).abs();
        if prod == 0.0 {
            return Err(Error::InconsistentRule {
                message: format!(
                    "cavity {} base coupling column {:?} cannot produce a mediated rate",
                    cavity + 1,
                    col
                ),
            });
        }
        let alpha = (target * self.cav[cavity].kappa / prod).sqrt();
        out.coupling
            .set_column(cavity, [alpha * col[0], alpha * col[1]]);
        Ok(out)
    }

    /// Rescale one cavity's coupling column, preserving its direction, so
    /// that `max_i G_ij^2 / kappa_j` equals `target`.
    pub fn with_peak_backaction(&self, cavity: usize, target: f64) -> Result<SystemParams> {
        if target < 0.0 || !target.is_finite() {
            return Err(Error::InvalidParameter {
                what: format!("peak backaction target must be finite and >= 0, got {target}"),
            });
        }
        let col = self.coupling.column(cavity);
        let mut out = self.clone();
        if target == 0.0 {
            out.coupling.set_column(cavity, [0.0, 0.0]);
            return Ok(out);
        }
        let peak = col[0].abs().max(col[1].abs());
        if peak == 0.0 {
            return Err(Error::InconsistentRule {
                message: format!("cavity {} base coupling column is zero", cavity + 1),
            });
        }
        let alpha = (target * self.cav[cavity].kappa).sqrt() / peak;
        out.coupling
            .set_column(cavity, [alpha * col[0], alpha * col[1]]);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CouplingMatrix;
    use crate::test_support::{opposed_coupling_point, single_cavity_point, TAU};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn decoupled_effective_model_is_bare() {
        let mut p = single_cavity_point(0.0, TAU * 80.0);
        p.coupling = CouplingMatrix::zero();
        let eff = effective_model(&p).unwrap();
        assert_eq!(eff.backaction, [[0.0; 2]; 2]);
        assert_eq!(eff.mediated, [0.0; 2]);
        assert_eq!(eff.h_eff[(0, 1)], C64::new(0.0, 0.0));
        assert_relative_eq!(eff.h_eff[(0, 0)].re, p.mech[0].omega);
        assert_relative_eq!(eff.h_eff[(0, 0)].im, -p.mech[0].gamma);
        assert_relative_eq!(eff.h_eff[(1, 1)].im, -p.mech[1].gamma);
    }

    #[test]
    fn ep_point_backaction_rates() {
        // G_11 = G_21 = sqrt(kappa_1 * 2pi x 40 Hz) puts every cavity-1 rate at 2pi x 40 Hz
        let p = single_cavity_point(TAU * 40.0, TAU * 80.0);
        let eff = effective_model(&p).unwrap();
        assert_relative_eq!(eff.backaction[0][0], TAU * 40.0, max_relative = 1e-12);
        assert_relative_eq!(eff.backaction[1][0], TAU * 40.0, max_relative = 1e-12);
        assert_relative_eq!(eff.mediated[0], TAU * 40.0, max_relative = 1e-12);
        assert_relative_eq!(eff.h_eff[(0, 1)].im, -TAU * 40.0, max_relative = 1e-12);
        assert_eq!(eff.h_eff[(0, 1)].re, 0.0);
    }

    #[test]
    fn opposed_mediated_rates_cancel_off_diagonal() {
        let p = opposed_coupling_point(TAU * 100.0);
        let eff = effective_model(&p).unwrap();
        assert_relative_eq!(eff.mediated[0], TAU * 100.0, max_relative = 1e-12);
        assert_relative_eq!(eff.mediated[1], -TAU * 100.0, max_relative = 1e-12);
        assert_eq!(eff.h_eff[(0, 1)], C64::new(0.0, 0.0));
        assert_eq!(eff.h_eff[(1, 0)], C64::new(0.0, 0.0));
    }

    #[test]
    fn closed_form_bare_limit() {
        let mut p = single_cavity_point(0.0, TAU * 80.0);
        // equal gammas so the closed form is exact
        p.mech[0].gamma = TAU * 0.635;
        p.mech[1].gamma = TAU * 0.635;
        let eff = effective_model(&p).unwrap();
        let r = eigenmodes_closed_form(&eff).unwrap();
        assert_relative_eq!(r.modes[0].omega, p.mech[0].omega, max_relative = 1e-15);
        assert_relative_eq!(r.modes[1].omega, p.mech[1].omega, max_relative = 1e-15);
        assert_relative_eq!(r.modes[0].gamma, TAU * 0.635, max_relative = 1e-15);
        assert_eq!(r.regime, EpRegime::NotApplicable);
    }

    #[test]
    fn closed_form_at_ep_coalesces() {
        let mut p = single_cavity_point(TAU * 40.0, TAU * 80.0);
        p.mech[0].gamma = TAU * 0.635;
        p.mech[1].gamma = TAU * 0.635;
        let eff = effective_model(&p).unwrap();
        let r = eigenmodes_closed_form(&eff).unwrap();
        let omega_bar = p.omega_mean();
        // exactly at the EP the square root amplifies the ~1e-12 relative
        // noise of the MHz-scale frequency subtraction into a ~2e-6 split
        assert_relative_eq!(r.modes[0].omega, omega_bar, max_relative = 1e-9);
        assert_relative_eq!(r.modes[1].omega, omega_bar, max_relative = 1e-9);
        assert_relative_eq!(r.modes[0].gamma, TAU * 40.635, max_relative = 1e-5);
        assert_relative_eq!(r.modes[1].gamma, TAU * 40.635, max_relative = 1e-5);
        assert_eq!(r.regime, EpRegime::AtEp);
    }

    #[test]
    fn closed_form_post_ep_linewidth_split() {
        // Gamma_1 = 2pi x 50 Hz, delta = 2pi x 80 Hz, gamma = 2pi x 0.635 Hz:
        // sqrt(50^2 - 40^2) = 30, so the linewidths are 2pi x (50.635 -+ 30)
        let mut p = single_cavity_point(TAU * 50.0, TAU * 80.0);
        p.mech[0].gamma = TAU * 0.635;
        p.mech[1].gamma = TAU * 0.635;
        let eff = effective_model(&p).unwrap();
        let r = eigenmodes_closed_form(&eff).unwrap();
        assert_eq!(r.regime, EpRegime::PostEp);
        assert_relative_eq!(r.modes[0].gamma, TAU * (50.635 - 30.0), max_relative = 1e-9);
        assert_relative_eq!(r.modes[1].gamma, TAU * (50.635 + 30.0), max_relative = 1e-9);
        assert_eq!(r.modes[0].classification, ModeClass::Dark);
        assert_eq!(r.modes[1].classification, ModeClass::Bright);
        // cross-check against the numeric eigendecomposition of the same model
        let n = eigenmodes_numeric(&eff).unwrap();
        assert_relative_eq!(n.modes[0].gamma, r.modes[0].gamma, max_relative = 1e-12);
        assert_relative_eq!(n.modes[1].gamma, r.modes[1].gamma, max_relative = 1e-12);
    }

    #[test]
    fn closed_form_rejects_two_cavity_models() {
        let p = opposed_coupling_point(TAU * 100.0);
        let eff = effective_model(&p).unwrap();
        assert!(matches!(
            eigenmodes_closed_form(&eff),
            Err(Error::ClosedFormInapplicable { .. })
        ));
    }

    #[test]
    fn closed_form_rejects_asymmetric_gammas() {
        let mut p = single_cavity_point(TAU * 40.0, TAU * 80.0);
        p.mech[0].gamma = TAU * 1.0;
        p.mech[1].gamma = TAU * 0.5;
        let eff = effective_model(&p).unwrap();
        assert!(eigenmodes_closed_form(&eff).is_err());
    }

    #[test]
    fn numeric_diagonal_returns_diagonal() {
        let mut p = single_cavity_point(0.0, TAU * 80.0);
        p.coupling = CouplingMatrix::zero();
        let eff = effective_model(&p).unwrap();
        let r = eigenmodes_numeric(&eff).unwrap();
        assert_relative_eq!(r.modes[0].omega, p.mech[0].omega, max_relative = 1e-15);
        assert_relative_eq!(r.modes[1].omega, p.mech[1].omega, max_relative = 1e-15);
        assert_relative_eq!(r.modes[0].gamma, p.mech[0].gamma, max_relative = 1e-15);
        assert_eq!(r.regime, EpRegime::NotApplicable);
    }

    #[test]
    fn numeric_matches_closed_form_on_grids() {
        for &gamma1_hz in &[1.0, 10.0, 25.0, 39.0, 41.0, 60.0, 200.0, 950.0] {
            let mut p = single_cavity_point(TAU * gamma1_hz, TAU * 80.0);
            p.mech[0].gamma = TAU * 0.635;
            p.mech[1].gamma = TAU * 0.635;
            let eff = effective_model(&p).unwrap();
            let cf = eigenmodes_closed_form(&eff).unwrap();
            let nu = eigenmodes_numeric(&eff).unwrap();
            for k in 0..2 {
                assert_relative_eq!(cf.modes[k].omega, nu.modes[k].omega, max_relative = 1e-12);
                assert_relative_eq!(cf.modes[k].gamma, nu.modes[k].gamma, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn opposed_couplings_leave_frequencies_unchanged() {
        for &gamma1_hz in &[1.0, 10.0, 100.0, 500.0] {
            let p = opposed_coupling_point(TAU * gamma1_hz);
            let eff = effective_model(&p).unwrap();
            let r = eigenmodes_numeric(&eff).unwrap();
            assert_relative_eq!(r.modes[0].omega, p.mech[0].omega, max_relative = 1e-12);
            assert_relative_eq!(r.modes[1].omega, p.mech[1].omega, max_relative = 1e-12);
        }
    }

    #[test]
    fn locate_ep_at_forty_hertz() {
        let p = single_cavity_point(TAU * 40.0, TAU * 80.0);
        let grid: Vec<f64> = (1..=100).map(|k| TAU * (k as f64)).collect();
        let ep = locate_ep(&p, &grid).unwrap();
        // delta_omega is reconstructed by subtracting MHz-scale frequencies,
        // which costs ~4 digits of the 80 Hz difference
        assert_relative_eq!(ep.analytic, TAU * 40.0, max_relative = 1e-11);
        assert_relative_eq!(ep.grid_minimum, TAU * 40.0, max_relative = 1e-12);
    }

    #[test]
    fn locate_ep_scales_with_delta() {
        let p = single_cavity_point(TAU * 30.0, TAU * 60.0);
        let grid: Vec<f64> = (1..=100).map(|k| TAU * (k as f64)).collect();
        let ep = locate_ep(&p, &grid).unwrap();
        assert_relative_eq!(ep.analytic, TAU * 30.0, max_relative = 1e-11);
    }

    #[test]
    fn locate_ep_degenerate_modes() {
        let p = single_cavity_point(TAU * 10.0, 0.0);
        let grid: Vec<f64> = (0..=20).map(|k| TAU * (k as f64)).collect();
        let ep = locate_ep(&p, &grid).unwrap();
        assert_eq!(ep.analytic, 0.0);
        assert_relative_eq!(ep.grid_minimum, 0.0);
    }

    #[test]
    fn locate_ep_rejects_active_second_cavity() {
        let p = opposed_coupling_point(TAU * 10.0);
        let grid = [TAU * 10.0];
        assert!(matches!(
            locate_ep(&p, &grid),
            Err(Error::SecondCavityActive)
        ));
    }

    #[test]
    fn basis_equal_couplings() {
        let c = CouplingMatrix::from_multiphoton([[TAU * 50.0, 0.0], [TAU * 50.0, 0.0]]).unwrap();
        let b = dark_bright_basis(&c, 0).unwrap();
        let s = 1.0 / 2.0f64.sqrt();
        assert_relative_eq!(b.bright[0], s, max_relative = 1e-15);
        assert_relative_eq!(b.bright[1], s, max_relative = 1e-15);
        assert_relative_eq!(b.dark[0], s, max_relative = 1e-15);
        assert_relative_eq!(b.dark[1], -s, max_relative = 1e-15);
    }

    #[test]
    fn basis_single_coupled_mode() {
        let c = CouplingMatrix::from_multiphoton([[TAU * 50.0, 0.0], [0.0, 0.0]]).unwrap();
        let b = dark_bright_basis(&c, 0).unwrap();
        assert_eq!(b.bright, [1.0, 0.0]);
        assert_eq!(b.dark, [0.0, -1.0]);
    }

    #[test]
    fn basis_zero_column_errors() {
        let c = CouplingMatrix::zero();
        assert!(matches!(
            dark_bright_basis(&c, 0),
            Err(Error::ZeroCouplingVector { cavity: 1 })
        ));
    }

    #[test]
    fn opposed_dark_of_one_cavity_is_bright_of_other() {
        let p = opposed_coupling_point(TAU * 100.0);
        let b1 = dark_bright_basis(&p.coupling, 0).unwrap();
        let b2 = dark_bright_basis(&p.coupling, 1).unwrap();
        let dot = (b1.dark[0] * b2.bright[0] + b1.dark[1] * b2.bright[1]).abs();
        assert_relative_eq!(dot, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn dark_mode_condition_cases() {
        // ratio 25: deep in the dark-mode regime
        let strong = single_cavity_point(TAU * 1000.0, TAU * 80.0);
        assert!(dark_mode_condition(&strong));
        // ratio far below one
        let weak = single_cavity_point(TAU * 1.0, TAU * 80.0);
        assert!(!dark_mode_condition(&weak));
        // ratio exactly at the threshold counts as true
        let boundary = single_cavity_point(TAU * 200.0, TAU * 80.0);
        assert!(dark_mode_condition(&boundary));
    }

    #[test]
    fn deep_post_ep_classification_is_dark_bright() {
        let p = single_cavity_point(TAU * 1000.0, TAU * 80.0);
        let eff = effective_model(&p).unwrap();
        let r = eigenmodes_numeric(&eff).unwrap();
        assert_eq!(r.modes[0].classification, ModeClass::Dark);
        assert_eq!(r.modes[1].classification, ModeClass::Bright);
        assert_eq!(r.regime, EpRegime::PostEp);
    }

    fn random_single_cavity(
        gamma_hz: f64,
        delta_hz: f64,
        gamma1_hz: f64,
        omega_hz: f64,
    ) -> EffectiveModel {
        let mut p = single_cavity_point(TAU * gamma1_hz, TAU * delta_hz);
        p.mech[0].omega = TAU * (omega_hz + delta_hz / 2.0);
        p.mech[1].omega = TAU * (omega_hz - delta_hz / 2.0);
        p.mech[0].gamma = TAU * gamma_hz;
        p.mech[1].gamma = TAU * gamma_hz;
        effective_model(&p).unwrap()
    }

    proptest! {
        #[test]
        fn closed_form_agrees_with_numeric(
            gamma_hz in 0.05f64..5.0,
            delta_hz in 5.0f64..500.0,
            gamma1_hz in 0.01f64..2000.0,
            omega_hz in 5.0e5f64..5.0e6,
        ) {
            let eff = random_single_cavity(gamma_hz, delta_hz, gamma1_hz, omega_hz);
            let cf = eigenmodes_closed_form(&eff).unwrap();
            let nu = eigenmodes_numeric(&eff).unwrap();
            for k in 0..2 {
                prop_assert!((cf.modes[k].omega - nu.modes[k].omega).abs()
                    <= 1e-10 * nu.modes[k].omega.abs());
                prop_assert!((cf.modes[k].gamma - nu.modes[k].gamma).abs()
                    <= 1e-10 * nu.modes[k].gamma.abs().max(TAU * gamma_hz));
            }
        }

        #[test]
        fn trace_is_conserved(
            gamma1_hz in 0.0f64..2000.0,
            gamma12_hz in 0.0f64..2000.0,
            delta_hz in -200.0f64..200.0,
        ) {
            let mut p = single_cavity_point(TAU * gamma1_hz, TAU * delta_hz);
            if gamma12_hz > 0.0 {
                p.coupling.set_column(1, [(TAU * gamma12_hz * p.cav[1].kappa).sqrt(), 0.0]);
            }
            let eff = effective_model(&p).unwrap();
            let r = eigenmodes_numeric(&eff).unwrap();
            let sum_omega = r.modes[0].omega + r.modes[1].omega;
            let sum_gamma = r.modes[0].gamma + r.modes[1].gamma;
            let want_omega = p.mech[0].omega + p.mech[1].omega;
            let want_gamma = p.mech[0].gamma + p.mech[1].gamma
                + eff.backaction.iter().flatten().sum::<f64>();
            prop_assert!((sum_omega - want_omega).abs() <= 1e-9 * want_omega.abs());
            prop_assert!((sum_gamma - want_gamma).abs() <= 1e-9 * want_gamma.abs().max(1e-12));
        }

        #[test]
        fn basis_is_orthonormal(
            g11 in -3.0e3f64..3.0e3,
            g21 in -3.0e3f64..3.0e3,
        ) {
            prop_assume!(g11 != 0.0 || g21 != 0.0);
            let c = CouplingMatrix::from_multiphoton([[TAU * g11, 0.0], [TAU * g21, 0.0]]).unwrap();
            let b = dark_bright_basis(&c, 0).unwrap();
            let norm_b = (b.bright[0].powi(2) + b.bright[1].powi(2)).sqrt();
            let norm_d = (b.dark[0].powi(2) + b.dark[1].powi(2)).sqrt();
            let dot = b.bright[0] * b.dark[0] + b.bright[1] * b.dark[1];
            prop_assert!((norm_b - 1.0).abs() < 1e-14);
            prop_assert!((norm_d - 1.0).abs() < 1e-14);
            prop_assert!(dot.abs() < 1e-14);
        }

        #[test]
        fn coupling_sign_flip_leaves_h_eff_unchanged(
            gamma1_hz in 0.1f64..2000.0,
        ) {
            let p = single_cavity_point(TAU * gamma1_hz, TAU * 80.0);
            let mut flipped = p.clone();
            let col = flipped.coupling.column(0);
            flipped.coupling.set_column(0, [-col[0], -col[1]]);
            let a = effective_model(&p).unwrap();
            let b = effective_model(&flipped).unwrap();
            prop_assert!(crate::linalg::frobenius(&(a.h_eff.clone() - b.h_eff.clone())) < 1e-12 * crate::linalg::frobenius(&a.h_eff));
        }

        #[test]
        fn discriminant_changes_sign_at_ep(
            delta_hz in 10.0f64..400.0,
        ) {
            let ep = delta_hz / 2.0;
            let below = random_single_cavity(0.635, delta_hz, ep * 0.99, 1.2e6);
            let above = random_single_cavity(0.635, delta_hz, ep * 1.01, 1.2e6);
            let disc_below = super::discriminant(&below.h_eff);
            let disc_above = super::discriminant(&above.h_eff);
            prop_assert!(disc_below.re > 0.0);
            prop_assert!(disc_above.re < 0.0);
        }
    }
}
