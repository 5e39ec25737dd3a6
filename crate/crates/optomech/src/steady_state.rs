//! Stationary second moments of the linear Langevin dynamics, phonon
//! numbers, and the closed-form single-cavity cooling expressions.
//!
//! The moment matrix convention is `M[p][q] = <v_p^dag v_q>` over the
//! ordered mode vector, so the stationary condition reads
//! `conj(A) M + M A^T + D = 0` for drift `A` and diffusion `D`. The
//! equation is solved exactly by Kronecker vectorization; the sizes here
//! are 2x2 and 4x4, so the dense solve is trivial.

use nalgebra::{DMatrix, DVector};

use crate::effective::EffectiveModel;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{drift_stability, DynamicsModel};
use crate::C64;

/// Relative floor (times `||M||_F`) below which a negative moment
/// eigenvalue is treated as numerical and clipped; anything lower errors.
pub const PSD_FLOOR_TOL: f64 = 1e-12;

/// Hermitian PSD matrix of stationary second moments.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentMatrix {
    m: DMatrix<C64>,
}

impl MomentMatrix {
    /// Dimension (2 for the reduced model, 4 for the full model).
    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    /// Stationary occupation of mode `p`, `<v_p^dag v_p>`.
    pub fn occupation(&self, p: usize) -> f64 {
        self.m[(p, p)].re
    }

    /// Real quadratic form `w^dag M w`.
    pub fn quadratic_form(&self, w: &DVector<C64>) -> f64 {
        let mut acc = C64::new(0.0, 0.0);
        for p in 0..self.dim() {
            for q in 0..self.dim() {
                acc += w[p].conj() * self.m[(p, q)] * w[q];
            }
        }
        acc.re
    }

    /// Residual `||conj(A) M + M A^T + D||_F` of the stationary condition.
    pub fn residual(&self, a: &DMatrix<C64>, d: &DMatrix<C64>) -> f64 {
        let r = linalg::conjugate(a) * &self.m + &self.m * a.transpose() + d;
        linalg::frobenius(&r)
    }
}

/// Per-mode and total phonon numbers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhononReport {
    pub n1: f64,
    pub n2: f64,
    pub n_total: f64,
    /// `n_total / n_th` when the two baths share a common occupation.
    pub n_total_over_nth: Option<f64>,
}

impl PhononReport {
    pub fn normalized_against(mut self, n_th: f64) -> Self {
        self.n_total_over_nth = Some(self.n_total / n_th);
        self
    }
}

/// Exact stationary moments of `dv = A v dt + noise` with diffusion `D`.
///
/// Fails when the drift is unstable, and when the solved moments violate
/// Hermiticity or positive semidefiniteness beyond numerical tolerance.
pub fn solve_lyapunov(a: &DMatrix<C64>, d: &DMatrix<C64>) -> Result<MomentMatrix> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n, "drift must be square");
    assert_eq!((d.nrows(), d.ncols()), (n, n), "diffusion must match drift");
    let stab = drift_stability(a)?;
    if !stab.stable {
        return Err(Error::Unstable {
            abscissa: stab.abscissa,
        });
    }
    // vec(conj(A) M + M A^T) = (I (x) conj(A) + A (x) I) vec(M)
    let eye = DMatrix::<C64>::identity(n, n);
    let k = linalg::kron(&eye, &linalg::conjugate(a)) + linalg::kron(a, &eye);
    let rhs = DMatrix::from_column_slice(n * n, 1, d.as_slice()).map(|z| -z);
    let x = linalg::solve(&k, &rhs)?;
    let m = DMatrix::from_column_slice(n, n, x.as_slice());

    let m = linalg::hermitian_part(&m);
    let scale = linalg::frobenius(&m).max(f64::MIN_POSITIVE);
    let (u, lam) = linalg::hermitian_psd_factor(&m, PSD_FLOOR_TOL * scale)?;
    let m =
        &u * DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(lam[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }) * u.adjoint();
    Ok(MomentMatrix { m })
}

/// Stationary moments of the full 4-mode model.
pub fn solve_model(model: &DynamicsModel) -> Result<MomentMatrix> {
    solve_lyapunov(&model.drift, &model.diffusion_matrix())
}

/// Stationary moments of the reduced 2-mode model.
///
/// Drift is `-i H_eff`; thermal noise enters only through the intrinsic
/// decay channels, `D = diag(2 gamma_1 n_th1, 2 gamma_2 n_th2)`. The
/// cavity-induced damping is noiseless here, which is exactly the
/// classical-thermal noise model behind the closed-form cooling formula.
pub fn reduced_lyapunov(eff: &EffectiveModel, n_th: [f64; 2]) -> Result<MomentMatrix> {
    let d = DMatrix::from_fn(2, 2, |i, j| {
        if i == j {
            C64::new(2.0 * eff.gamma_intrinsic[i] * n_th[i], 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    solve_lyapunov(&eff.drift(), &d)
}

/// Closed-form total phonon number of the symmetric single-cavity pair.
///
/// `n = 2 n_th gamma [4 (gamma + Gamma_1)^2 + delta^2]
///      / {(gamma + Gamma_1) [4 (gamma + Gamma_1)^2 + delta^2 - 4 Gamma_1^2]}`
pub fn phonon_closed_form(gamma: f64, gamma1: f64, delta_omega: f64, n_th: f64) -> f64 {
    assert!(gamma > 0.0, "gamma must be positive");
    assert!(gamma1 >= 0.0, "Gamma_1 must be nonnegative");
    let a = gamma + gamma1;
    let num = 2.0 * n_th * gamma * (4.0 * a * a + delta_omega * delta_omega);
    let den = a * (4.0 * a * a + delta_omega * delta_omega - 4.0 * gamma1 * gamma1);
    num / den
}

/// Large-drive approximation `n ~ 2 n_th gamma (4 Gamma_1^2 + delta^2) /
/// (Gamma_1 delta^2)`, valid for `Gamma_1 >> gamma` and
/// `delta^2 >> Gamma_1 gamma`.
pub fn phonon_closed_form_approx(gamma: f64, gamma1: f64, delta_omega: f64, n_th: f64) -> f64 {
    2.0 * n_th * gamma * (4.0 * gamma1 * gamma1 + delta_omega * delta_omega)
        / (gamma1 * delta_omega * delta_omega)
}

/// The cooling floor imposed by the dark mode with a single cavity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DarkModeLimit {
    /// Closed form evaluated at the EP, `Gamma_1 = |delta| / 2`.
    pub exact: f64,
    /// Minimum of the large-drive approximation, `8 n_th gamma / |delta|`.
    pub approx: f64,
}

/// Best total phonon number reachable with one cavity, attained at the EP.
pub fn dark_mode_limit(gamma: f64, delta_omega: f64, n_th: f64) -> Result<DarkModeLimit> {
    if delta_omega == 0.0 {
        return Err(Error::NoFiniteDarkModeLimit);
    }
    let at_ep = 0.5 * delta_omega.abs();
    Ok(DarkModeLimit {
        exact: phonon_closed_form(gamma, at_ep, delta_omega, n_th),
        approx: 8.0 * n_th * gamma / delta_omega.abs(),
    })
}

/// Extract per-mode phonon numbers from the mechanical block (the first
/// two diagonal entries) of a moment matrix.
pub fn phonon_report(m: &MomentMatrix) -> Result<PhononReport> {
    assert!(
        m.dim() >= 2,
        "moment matrix must contain the mechanical block"
    );
    let scale = linalg::frobenius(m.matrix()).max(f64::MIN_POSITIVE);
    let mut occ = [0.0; 2];
    for (i, o) in occ.iter_mut().enumerate() {
        let v = m.occupation(i);
        if v < -PSD_FLOOR_TOL * scale {
            return Err(Error::NegativeOccupation { value: v });
        }
        *o = v.max(0.0);
    }
    Ok(PhononReport {
        n1: occ[0],
        n2: occ[1],
        n_total: occ[0] + occ[1],
        n_total_over_nth: None,
    })
}
