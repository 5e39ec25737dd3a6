//! Exactly discretized stochastic simulator of the linear Langevin
//! dynamics, used as an independent time-domain oracle for the Lyapunov
//! steady states.
//!
//! One step of length `dt` maps the state `v` through the exact
//! distribution of the Ornstein-Uhlenbeck process: `v <- exp(A dt) v + xi`
//! with `xi` a circular complex Gaussian of covariance `Q(dt)`. The
//! discretization is exact, so `dt` is a recording choice rather than a
//! stability constraint, even for the stiff full model.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::drift_stability;
use crate::steady_state::solve_lyapunov;
use crate::C64;

/// Generator identity recorded in output metadata alongside the seed.
pub const RNG_IDENTITY: &str = "ChaCha8Rng (rand_chacha), seed_from_u64";

/// Relative floor for negative noise-covariance eigenvalues before the
/// factorization errors out.
pub const NOISE_PSD_TOL: f64 = 1e-12;

/// How the initial state is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialState {
    /// Sample from the stationary Gaussian (no burn-in needed).
    Stationary,
    /// Start from the origin.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryConfig {
    /// Step, seconds.
    pub dt: f64,
    /// Total steps taken.
    pub n_steps: usize,
    /// Steps discarded before recording starts.
    pub n_burn_in: usize,
    /// Record every this-many steps.
    pub record_stride: usize,
    pub seed: u64,
    pub init: InitialState,
}

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter {
                what: format!("dt must be positive and finite, got {}", self.dt),
            });
        }
        if self.n_steps <= self.n_burn_in {
            return Err(Error::InvalidParameter {
                what: "n_steps must exceed n_burn_in".into(),
            });
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidParameter {
                what: "record_stride must be >= 1".into(),
            });
        }
        Ok(())
    }
}

/// Exact one-step propagators of the discretized chain.
#[derive(Debug, Clone, PartialEq)]
pub struct StepPropagators {
    /// `Phi = exp(conj(A) dt)`, the step map in the moment convention of
    /// [`solve_lyapunov`]: the stationary moments satisfy
    /// `Phi M Phi^H + Q = M`.
    pub step_map: DMatrix<C64>,
    /// Step-noise covariance `Q = integral_0^dt exp(conj(A) s) D
    /// exp(conj(A) s)^H ds`, Hermitian PSD.
    pub noise_cov: DMatrix<C64>,
}

/// Build `(Phi, Q)` by the augmented-block matrix-exponential method: for
/// `B = [[-conj(A), D], [0, conj(A)^H]]`, the blocks of `exp(B dt)` give
/// `Phi = F22^H` and `Q = Phi F12`.
pub fn exact_propagators(a: &DMatrix<C64>, d: &DMatrix<C64>, dt: f64) -> Result<StepPropagators> {
    let stab = drift_stability(a)?;
    if !stab.stable {
        return Err(Error::Unstable {
            abscissa: stab.abscissa,
        });
    }
    let n = a.nrows();
    let at = linalg::conjugate(a);
    let mut block = DMatrix::<C64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            block[(i, j)] = -at[(i, j)] * dt;
            block[(i, n + j)] = d[(i, j)] * dt;
            block[(n + i, n + j)] = at[(j, i)].conj() * dt;
        }
    }
    let f = linalg::expm(&block);
    let f12 = f.view((0, n), (n, n)).into_owned();
    let f22 = f.view((n, n), (n, n)).into_owned();
    let phi = f22.adjoint();
    let q = linalg::hermitian_part(&(&phi * f12));
    Ok(StepPropagators {
        step_map: phi,
        noise_cov: q,
    })
}

/// Recorded sample path of the mode vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Row-per-sample flattened states, `states[k * dim + p]`.
    pub states: Vec<C64>,
    pub dim: usize,
}

impl Trajectory {
    pub fn n_samples(&self) -> usize {
        self.times.len()
    }

    pub fn state(&self, k: usize) -> &[C64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    /// Time series of `|v_p|^2`.
    pub fn mod_sqr_series(&self, p: usize) -> Vec<f64> {
        (0..self.n_samples())
            .map(|k| self.state(k)[p].norm_sqr())
            .collect()
    }

    /// CSV export: `time` then `re_p,im_p` per mode, LF endings.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        write!(out, "time_s")?;
        for p in 0..self.dim {
            write!(out, ",re_{p},im_{p}")?;
        }
        writeln!(out)?;
        for k in 0..self.n_samples() {
            write!(out, "{:.16e}", self.times[k])?;
            for z in self.state(k) {
                write!(out, ",{:.16e},{:.16e}", z.re, z.im)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// A sqrt-factor `w` such that complex noise `w z` (with `z` standard
/// circular) has covariance `<conj(xi_p) xi_q> = cov_pq`.
fn noise_factor(cov: &DMatrix<C64>, tol_scale: f64) -> Result<Option<DMatrix<C64>>> {
    let scale = linalg::frobenius(cov);
    if scale == 0.0 {
        return Ok(None);
    }
    let w = linalg::hermitian_sqrt_factor(cov, tol_scale * scale)?;
    Ok(Some(w.map(|z| z.conj())))
}

/// Run the chain. Fully reproducible from `cfg.seed`.
pub fn simulate(a: &DMatrix<C64>, d: &DMatrix<C64>, cfg: &TrajectoryConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let n = a.nrows();
    let props = exact_propagators(a, d, cfg.dt)?;
    // physical step map exp(A dt) = conj(Phi)
    let phi_phys: Vec<C64> = {
        let m = props.step_map.map(|z| z.conj());
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)])
            .collect()
    };
    let noise = noise_factor(&props.noise_cov, NOISE_PSD_TOL)?;
    let noise_flat: Option<Vec<C64>> = noise.as_ref().map(|w| {
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| w[(i, j)])
            .collect()
    });

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sqrt_half = std::f64::consts::FRAC_1_SQRT_2;
    let mut draw_circular = |out: &mut [C64]| {
        for z in out.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *z = C64::new(re * sqrt_half, im * sqrt_half);
        }
    };

    let mut v = vec![C64::new(0.0, 0.0); n];
    let mut z = vec![C64::new(0.0, 0.0); n];
    if cfg.init == InitialState::Stationary {
        let m = solve_lyapunov(a, d)?;
        if let Some(w0) = noise_factor(m.matrix(), NOISE_PSD_TOL)? {
            draw_circular(&mut z);
            for i in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..n {
                    acc += w0[(i, j)] * z[j];
                }
                v[i] = acc;
            }
        }
    }

    let n_recorded = (cfg.n_steps - cfg.n_burn_in) / cfg.record_stride + 1;
    let mut times = Vec::with_capacity(n_recorded);
    let mut states = Vec::with_capacity(n_recorded * n);
    let mut next = vec![C64::new(0.0, 0.0); n];
    for step in 0..=cfg.n_steps {
        if step >= cfg.n_burn_in && (step - cfg.n_burn_in).is_multiple_of(cfg.record_stride) {
            times.push(step as f64 * cfg.dt);
            states.extend_from_slice(&v);
        }
        if step == cfg.n_steps {
            break;
        }
        for (i, slot) in next.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..n {
                acc += phi_phys[i * n + j] * v[j];
            }
            *slot = acc;
        }
        if let Some(w) = &noise_flat {
            draw_circular(&mut z);
            for (i, slot) in next.iter_mut().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..n {
                    acc += w[i * n + j] * z[j];
                }
                *slot += acc;
            }
        }
        std::mem::swap(&mut v, &mut next);
    }
    for z in &states {
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::NonFinite {
                what: "trajectory state".into(),
            });
        }
    }
    Ok(Trajectory {
        times,
        states,
        dim: n,
    })
}

/// Occupation estimates with batch-means error bars.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryOccupations {
    /// Time-averaged `|b_i|^2` for the two mechanical modes.
    pub n: [f64; 2],
    /// One standard error per mode, from batch means.
    pub std_err: [f64; 2],
    pub n_total: f64,
    pub n_total_err: f64,
    pub n_batches: usize,
    /// Largest integrated autocorrelation time seen, in seconds.
    pub tau_autocorr: f64,
}

/// Integrated autocorrelation time of a series, in sample units, truncated
/// at the first lag whose normalized autocorrelation drops below 0.05.
fn integrated_autocorr_steps(series: &[f64]) -> f64 {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let var: f64 = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return 0.5;
    }
    let mut tau = 0.5;
    let max_lag = n / 4;
    for lag in 1..=max_lag {
        let mut c = 0.0;
        for k in 0..n - lag {
            c += (series[k] - mean) * (series[k + lag] - mean);
        }
        let rho = c / ((n - lag) as f64 * var);
        if rho < 0.05 {
            break;
        }
        tau += rho;
    }
    tau
}

fn batch_stats(series: &[f64], n_batches: usize) -> (f64, f64) {
    let per = series.len() / n_batches;
    let means: Vec<f64> = (0..n_batches)
        .map(|b| series[b * per..(b + 1) * per].iter().sum::<f64>() / per as f64)
        .collect();
    let mean = means.iter().sum::<f64>() / n_batches as f64;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n_batches as f64 - 1.0);
    (mean, (var / n_batches as f64).sqrt())
}

/// Time-averaged mechanical occupations of a recorded trajectory.
///
/// Requires the recorded span to cover at least 100 integrated
/// autocorrelation times of the slowest `|b_i|^2` series, and at least 20
/// batches' worth of samples.
pub fn estimate_occupations(traj: &Trajectory) -> Result<TrajectoryOccupations> {
    const N_BATCHES: usize = 20;
    const MIN_AUTOCORR_SPANS: f64 = 100.0;
    let n_samples = traj.n_samples();
    if n_samples < 2 * N_BATCHES {
        return Err(Error::InsufficientSamples {
            required: 2 * N_BATCHES,
            available: n_samples,
        });
    }
    let dt_rec = traj.times[1] - traj.times[0];
    let series: Vec<Vec<f64>> = (0..2).map(|p| traj.mod_sqr_series(p)).collect();
    let tau_steps = series
        .iter()
        .map(|s| integrated_autocorr_steps(s))
        .fold(0.0, f64::max);
    let required = (MIN_AUTOCORR_SPANS * tau_steps).ceil() as usize;
    if n_samples < required {
        return Err(Error::InsufficientSamples {
            required,
            available: n_samples,
        });
    }

    let (n1, e1) = batch_stats(&series[0], N_BATCHES);
    let (n2, e2) = batch_stats(&series[1], N_BATCHES);
    let total_series: Vec<f64> = series[0]
        .iter()
        .zip(&series[1])
        .map(|(a, b)| a + b)
        .collect();
    let (nt, et) = batch_stats(&total_series, N_BATCHES);
    Ok(TrajectoryOccupations {
        n: [n1, n2],
        std_err: [e1, e2],
        n_total: nt,
        n_total_err: et,
        n_batches: N_BATCHES,
        tau_autocorr: tau_steps * dt_rec,
    })
}

/// Reduced-model drift and diffusion for the trajectory oracle.
pub fn reduced_system(
    eff: &crate::effective::EffectiveModel,
    n_th: [f64; 2],
) -> (DMatrix<C64>, DMatrix<C64>) {
    let d = DMatrix::from_fn(2, 2, |i, j| {
        if i == j {
            C64::new(2.0 * eff.gamma_intrinsic[i] * n_th[i], 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    (eff.drift(), d)
}
