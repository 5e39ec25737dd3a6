//! Probe power spectral densities of the stationary dynamics and
//! Lorentzian peak extraction.
//!
//! The probe observable is the linear combination `c1 b1 + c2 b2` of the
//! mechanical amplitudes. Its one-sided-in-mode PSD is
//! `S(omega) = u^dag D u` with `(-i omega I - A^T) u = w`, a convention
//! fixed by the stationarity identity `integral S domega / 2pi = w^dag M w`
//! against the Lyapunov moment matrix; `S` is nonnegative pointwise by
//! construction.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{drift_stability, DynamicsModel, SystemParams};
use crate::steady_state::MomentMatrix;
use crate::C64;

const TAU: f64 = std::f64::consts::TAU;

/// A sampled PSD on an ascending angular-frequency grid.
///
/// Values are in occupation quanta per (rad/s): integrating over angular
/// frequency and dividing by 2 pi yields a phonon number.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub freq: Vec<f64>,
    pub values: Vec<f64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.freq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq.is_empty()
    }

    /// Integrated occupation: trapezoid over the stored grid plus an
    /// analytic `1/(omega - r)^2` tail estimate beyond each edge, all
    /// divided by 2 pi. The tail model is exact for a Lorentzian flank and
    /// keeps truncation error far below the quadrature target even for
    /// windows of a few tens of linewidths.
    pub fn integrate_occupation(&self) -> f64 {
        let n = self.len();
        if n < 2 {
            return 0.0;
        }
        let mut acc = 0.0;
        for k in 1..n {
            acc += 0.5 * (self.values[k] + self.values[k - 1]) * (self.freq[k] - self.freq[k - 1]);
        }
        acc += self.edge_tail(self.freq[1], self.values[1], self.freq[0], self.values[0]);
        acc += self.edge_tail(
            self.freq[n - 2],
            self.values[n - 2],
            self.freq[n - 1],
            self.values[n - 1],
        );
        acc / TAU
    }

    /// Tail mass beyond the edge sample `(w_edge, s_edge)`, extrapolating
    /// `S ~ C / (omega - r)^2` through the last two samples on that side.
    fn edge_tail(&self, w_in: f64, s_in: f64, w_edge: f64, s_edge: f64) -> f64 {
        if s_edge <= 0.0 || s_in <= 0.0 {
            return 0.0;
        }
        let q = (s_in / s_edge).sqrt();
        let denom = q - 1.0;
        if denom.abs() < 1e-9 {
            return 0.0;
        }
        // solve sqrt(s_in) (w_in - r) = +- sqrt(s_edge) (w_edge - r) for the
        // root placing r on the peak side of the window
        let r = (q * w_in - w_edge) / denom;
        let dist = (w_edge - r).abs();
        if !r.is_finite() || dist <= 0.0 {
            return 0.0;
        }
        s_edge * dist
    }

    /// Two-column CSV `freq_hz,psd` with LF endings.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "freq_hz,psd")?;
        for (f, v) in self.freq.iter().zip(&self.values) {
            writeln!(out, "{:.16e},{:.16e}", f / TAU, v)?;
        }
        Ok(())
    }
}

/// Embed probe weights `(c1, c2)` into a mode-space vector of length `dim`.
pub fn probe_vector(weights: [f64; 2], dim: usize) -> DVector<C64> {
    let mut w = DVector::from_element(dim, C64::new(0.0, 0.0));
    w[0] = C64::new(weights[0], 0.0);
    w[1] = C64::new(weights[1], 0.0);
    w
}

/// Probe-referred stationary occupation, `w^dag M w / (w^dag w)`.
pub fn probe_referred_occupation(m: &MomentMatrix, weights: [f64; 2]) -> f64 {
    let w = probe_vector(weights, m.dim());
    let norm: f64 = weights.iter().map(|c| c * c).sum();
    m.quadratic_form(&w) / norm
}

/// PSD of the observable `w^dag v` for arbitrary stable drift/diffusion.
pub fn psd(a: &DMatrix<C64>, d: &DMatrix<C64>, w: &DVector<C64>, grid: &[f64]) -> Result<Spectrum> {
    let stab = drift_stability(a)?;
    if !stab.stable {
        return Err(Error::Unstable {
            abscissa: stab.abscissa,
        });
    }
    if grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::InvalidParameter {
            what: "frequency grid must be strictly ascending".into(),
        });
    }
    let n = a.nrows();
    let at = a.transpose();
    let diag: Vec<f64> = (0..n).map(|p| d[(p, p)].re).collect();
    let mut values = Vec::with_capacity(grid.len());
    for &omega in grid {
        let mut sys = -&at;
        for p in 0..n {
            sys[(p, p)] -= C64::new(0.0, omega);
        }
        let u = sys
            .lu()
            .solve(&DMatrix::from_column_slice(n, 1, w.as_slice()))
            .ok_or(Error::SingularSolve)?;
        let s: f64 = (0..n).map(|p| diag[p] * u[(p, 0)].norm_sqr()).sum();
        values.push(s);
    }
    Ok(Spectrum {
        freq: grid.to_vec(),
        values,
    })
}

/// Probe PSD of the full model for weights `(c1, c2)`.
pub fn probe_psd(model: &DynamicsModel, weights: [f64; 2], grid: &[f64]) -> Result<Spectrum> {
    if weights == [0.0, 0.0] {
        return Err(Error::InvalidParameter {
            what: "probe weights must not both be zero".into(),
        });
    }
    psd(
        &model.drift,
        &model.diffusion_matrix(),
        &probe_vector(weights, 4),
        grid,
    )
}

/// Uniform 2001-point grid spanning `omega_bar +- 20 max(total damping,
/// |delta_omega|)`: wide enough for both the narrow dark branch and the
/// broad bright branch at the built-in operating points.
pub fn default_grid(params: &SystemParams) -> Vec<f64> {
    let eff = crate::effective::effective_model(params).expect("validated params");
    let damping = eff.total_damping();
    let scale = damping[0]
        .max(damping[1])
        .max(params.delta_omega().abs())
        .max(1e-6);
    let center = params.omega_mean();
    let half = 20.0 * scale;
    let n = 2001usize;
    (0..n)
        .map(|k| center - half + 2.0 * half * (k as f64) / ((n - 1) as f64))
        .collect()
}

/// Peak-adaptive grid for quadrature-grade integration: linear sampling at
/// a twelfth of a half-width near each mechanical resonance, geometric
/// ladders out to `window_halfwidths` half-widths, merged over peaks. The
/// mechanical resonances are identified as the two slowest-decaying
/// eigenvalues of the drift.
pub fn integration_grid(a: &DMatrix<C64>, window_halfwidths: f64) -> Result<Vec<f64>> {
    let eig = crate::linalg::eigenvalues(a)?;
    let mut modes: Vec<(f64, f64)> = eig.iter().map(|l| (-l.im, -l.re)).collect();
    modes.sort_by(|x, y| x.1.partial_cmp(&y.1).unwrap());
    modes.truncate(2);
    if modes.iter().any(|&(_, w)| w <= 0.0) {
        return Err(Error::Unstable {
            abscissa: modes
                .iter()
                .map(|&(_, w)| -w)
                .fold(f64::NEG_INFINITY, f64::max),
        });
    }
    let lo = modes
        .iter()
        .map(|&(c, w)| c - window_halfwidths * w)
        .fold(f64::INFINITY, f64::min);
    let hi = modes
        .iter()
        .map(|&(c, w)| c + window_halfwidths * w)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut points = vec![lo, hi];
    for &(c, w) in &modes {
        // linear core, +-10 half-widths
        let core = 10.0f64.min(window_halfwidths);
        let step = w / 12.0;
        let mut x = -core * w;
        while x <= core * w + 0.5 * step {
            let p = c + x;
            if p >= lo && p <= hi {
                points.push(p);
            }
            x += step;
        }
        // geometric ladders cover the rest of the window in both directions
        for sign in [-1.0, 1.0] {
            let mut offset = core * w;
            let reach = (hi - c).max(c - lo);
            while offset < reach {
                offset *= 1.03;
                let p = c + sign * offset;
                if p >= lo && p <= hi {
                    points.push(p);
                }
            }
        }
    }
    points.sort_by(|x, y| x.partial_cmp(y).unwrap());
    points.dedup_by(|x, y| (*x - *y).abs() < 1e-9);
    Ok(points)
}

/// One fitted Lorentzian component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzianPeak {
    /// Center, rad/s.
    pub center: f64,
    /// Half width at half maximum, rad/s (amplitude-decay convention).
    pub half_width: f64,
    /// Peak height above the offset.
    pub amplitude: f64,
    /// Integrated area `pi * amplitude * half_width` (in omega).
    pub area: f64,
}

/// Least-squares fit of one or two Lorentzians plus a flat offset.
#[derive(Debug, Clone, PartialEq)]
pub struct LorentzianFit {
    /// Peaks sorted by center frequency.
    pub peaks: Vec<LorentzianPeak>,
    pub offset: f64,
    /// Euclidean norm of the final residual vector.
    pub residual_norm: f64,
    pub iterations: usize,
}

fn lorentzian_sum(params: &[f64], omega: f64) -> f64 {
    let n_peaks = (params.len() - 1) / 3;
    let mut v = params[params.len() - 1];
    for k in 0..n_peaks {
        let (a, c, w) = (params[3 * k], params[3 * k + 1], params[3 * k + 2]);
        let u = omega - c;
        v += a * w * w / (u * u + w * w);
    }
    v
}

fn fill_jacobian_row(params: &[f64], omega: f64, row: &mut [f64]) {
    let n_peaks = (params.len() - 1) / 3;
    for k in 0..n_peaks {
        let (a, c, w) = (params[3 * k], params[3 * k + 1], params[3 * k + 2]);
        let u = omega - c;
        let den = u * u + w * w;
        row[3 * k] = w * w / den;
        row[3 * k + 1] = 2.0 * a * w * w * u / (den * den);
        row[3 * k + 2] = 2.0 * a * w * u * u / (den * den);
    }
    row[params.len() - 1] = 1.0;
}

/// Largest local maxima of a series, sorted by height.
fn local_maxima(values: &[f64]) -> Vec<(usize, f64)> {
    let n = values.len();
    let mut maxima: Vec<(usize, f64)> = Vec::new();
    for i in 1..n - 1 {
        if values[i] >= values[i - 1] && values[i] > values[i + 1] {
            maxima.push((i, values[i]));
        }
    }
    if maxima.is_empty() {
        let best = values
            .iter()
            .cloned()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, x| if x.1 > acc.1 { x } else { acc },
            );
        maxima.push(best);
    }
    maxima.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    maxima
}

/// Half width at half maximum of a peak at `idx` above `floor`.
fn hwhm_around(freq: &[f64], values: &[f64], idx: usize, floor: f64) -> f64 {
    let n = values.len();
    let half = floor + 0.5 * (values[idx] - floor);
    let mut right = freq[n - 1];
    for i in idx..n {
        if values[i] <= half {
            right = freq[i];
            break;
        }
    }
    let mut left = freq[0];
    for i in (0..=idx).rev() {
        if values[i] <= half {
            left = freq[i];
            break;
        }
    }
    (0.5 * (right - left)).max(1e-12 * freq[idx].abs().max(1.0))
}

struct LmOutcome {
    params: Vec<f64>,
    residual: f64,
    iterations: usize,
    hit_cap: bool,
}

/// Damped Gauss-Newton core. Terminates at the relative step tolerance, at
/// a numerical stationary point (no damping produces an improving step), or
/// at the iteration cap.
fn lm_optimize(spec: &Spectrum, mut params: Vec<f64>, max_iter: usize) -> LmOutcome {
    const STEP_TOL: f64 = 1e-10;
    let n = spec.len();
    let n_par = params.len();
    let n_peaks = (n_par - 1) / 3;
    let residual_of = |p: &[f64]| -> f64 {
        spec.freq
            .iter()
            .zip(&spec.values)
            .map(|(&w, &v)| {
                let r = lorentzian_sum(p, w) - v;
                r * r
            })
            .sum::<f64>()
            .sqrt()
    };

    let mut lambda = 1e-3;
    let mut res = residual_of(&params);
    let mut iterations = 0;
    let mut jt_j = DMatrix::<f64>::zeros(n_par, n_par);
    let mut jt_r = DVector::<f64>::zeros(n_par);
    let mut row = vec![0.0; n_par];

    while iterations < max_iter {
        iterations += 1;
        jt_j.fill(0.0);
        jt_r.fill(0.0);
        for i in 0..n {
            let omega = spec.freq[i];
            fill_jacobian_row(&params, omega, &mut row);
            let r = lorentzian_sum(&params, omega) - spec.values[i];
            for p in 0..n_par {
                jt_r[p] += row[p] * r;
                for q in p..n_par {
                    jt_j[(p, q)] += row[p] * row[q];
                }
            }
        }
        for p in 0..n_par {
            for q in 0..p {
                jt_j[(p, q)] = jt_j[(q, p)];
            }
        }

        let mut accepted = false;
        let mut small_step = false;
        for _ in 0..30 {
            let mut damped = jt_j.clone();
            for p in 0..n_par {
                damped[(p, p)] += lambda * jt_j[(p, p)].max(1e-300);
            }
            let Some(step) = damped.lu().solve(&(-&jt_r)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = params.iter().zip(step.iter()).map(|(p, s)| p + s).collect();
            let widths_ok = (0..n_peaks).all(|k| trial[3 * k + 2] > 0.0);
            if widths_ok {
                let trial_res = residual_of(&trial);
                if trial_res <= res {
                    small_step = step
                        .iter()
                        .zip(&params)
                        .map(|(s, p)| (s / p.abs().max(1e-300)).abs())
                        .fold(0.0f64, f64::max)
                        < STEP_TOL;
                    params = trial;
                    res = trial_res;
                    lambda = (lambda / 3.0).max(1e-14);
                    accepted = true;
                    break;
                }
            }
            lambda *= 4.0;
        }
        if small_step || !accepted {
            // either converged or at a stationary point the damping
            // cannot improve further
            return LmOutcome {
                params,
                residual: res,
                iterations,
                hit_cap: false,
            };
        }
    }
    LmOutcome {
        params,
        residual: res,
        iterations,
        hit_cap: true,
    }
}

fn outcome_to_fit(outcome: &LmOutcome, n_peaks: usize) -> LorentzianFit {
    let params = &outcome.params;
    let mut peaks: Vec<LorentzianPeak> = (0..n_peaks)
        .map(|k| {
            let (a, c, w) = (params[3 * k], params[3 * k + 1], params[3 * k + 2].abs());
            LorentzianPeak {
                center: c,
                half_width: w,
                amplitude: a,
                area: std::f64::consts::PI * a * w,
            }
        })
        .collect();
    peaks.sort_by(|x, y| x.center.partial_cmp(&y.center).unwrap());
    LorentzianFit {
        peaks,
        offset: params[params.len() - 1],
        residual_norm: outcome.residual,
        iterations: outcome.iterations,
    }
}

/// Least-squares fit of `n_peaks` Lorentzians plus a flat offset.
///
/// Initialization uses the two largest separated local maxima; when only
/// one shows (the co-centered narrow/broad case past the EP), a single
/// Lorentzian is fit first and the second component is seeded from the
/// residual. Non-convergence at the iteration cap errors with the best
/// parameters attached.
pub fn fit_lorentzians(spec: &Spectrum, n_peaks: usize) -> Result<LorentzianFit> {
    assert!(n_peaks == 1 || n_peaks == 2, "n_peaks must be 1 or 2");
    if spec.len() < 3 * n_peaks + 2 {
        return Err(Error::InvalidParameter {
            what: "spectrum too short to fit".into(),
        });
    }
    const MAX_ITER: usize = 200;
    let offset0 = spec.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let maxima = local_maxima(&spec.values);
    let (i0, v0) = maxima[0];
    let w0 = hwhm_around(&spec.freq, &spec.values, i0, offset0);

    let outcome = if n_peaks == 1 {
        lm_optimize(
            spec,
            vec![v0 - offset0, spec.freq[i0], w0, offset0],
            MAX_ITER,
        )
    } else {
        let distinct = maxima
            .iter()
            .skip(1)
            .find(|&&(i, _)| (spec.freq[i] - spec.freq[i0]).abs() > 2.0 * w0);
        let init = match distinct {
            Some(&(i1, v1)) => vec![
                v0 - offset0,
                spec.freq[i0],
                w0,
                v1 - offset0,
                spec.freq[i1],
                hwhm_around(&spec.freq, &spec.values, i1, offset0),
                offset0,
            ],
            None => {
                // co-centered pair: fit the dominant narrow component
                // first, then seed the second from what it leaves behind
                let stage1 = lm_optimize(
                    spec,
                    vec![v0 - offset0, spec.freq[i0], w0, offset0],
                    MAX_ITER / 2,
                );
                let leftover: Vec<f64> = spec
                    .freq
                    .iter()
                    .zip(&spec.values)
                    .map(|(&f, &v)| (v - lorentzian_sum(&stage1.params, f)).max(0.0))
                    .collect();
                let (j, res_peak) = local_maxima(&leftover)[0];
                let res_w = hwhm_around(&spec.freq, &leftover, j, 0.0);
                vec![
                    stage1.params[0],
                    stage1.params[1],
                    stage1.params[2],
                    res_peak.max(1e-300),
                    spec.freq[j],
                    res_w,
                    stage1.params[3],
                ]
            }
        };
        lm_optimize(spec, init, MAX_ITER)
    };

    let fit = outcome_to_fit(&outcome, n_peaks);
    if outcome.hit_cap {
        return Err(Error::FitDidNotConverge {
            iterations: outcome.iterations,
            residual: outcome.residual,
            best: Box::new(fit),
        });
    }
    Ok(fit)
}

/// Probe-referred occupation estimates from fitted peak areas.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermometryEstimate {
    /// One entry per fitted peak, sorted by center frequency.
    pub per_peak: Vec<f64>,
    pub total: f64,
}

/// Map fitted areas to occupations: `area / (2 pi)`, normalized by the
/// probe weight norm. These are probe-referred numbers (the probe sees a
/// linear combination of the two resonators, not each individually).
pub fn spectral_thermometry(fit: &LorentzianFit, weights: [f64; 2]) -> ThermometryEstimate {
    let norm: f64 = weights.iter().map(|c| c * c).sum();
    let per_peak: Vec<f64> = fit.peaks.iter().map(|p| p.area / TAU / norm).collect();
    let total = per_peak.iter().sum();
    ThermometryEstimate { per_peak, total }
}
