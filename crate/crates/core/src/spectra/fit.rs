//! Levenberg-Marquardt fit of a sum of damped cosines plus an offset:
//!
//! `y(t) = c + Σ_j e^{-γ_j t} (a_j cos 2πf_j t + b_j sin 2πf_j t)`,
//!
//! evaluated directly on the sample times. Because the model is only ever
//! evaluated on the grid, an undersampled record can be fitted with guesses
//! at the true (unfolded) frequencies.

use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

use super::{Peak, SpectraError};
use crate::protocols::Signal;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    /// Fit an exponential decay rate per tone; otherwise tones are undamped.
    pub decay: bool,
    pub max_iterations: usize,
    /// Stop once an accepted step lowers the cost by less than this fraction.
    pub rel_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { decay: true, max_iterations: 200, rel_tol: 1e-12 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToneFit {
    pub peak: Peak,
    /// Phase at t = 0, radians, for `A cos(2πft + phase)`.
    pub phase: f64,
    /// 1/s; zero when decay is not fitted.
    pub decay_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub tones: Vec<ToneFit>,
    pub offset: f64,
    /// Half the residual sum of squares before and after refinement.
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: usize,
}

impl FitResult {
    pub fn peaks(&self) -> Vec<Peak> {
        self.tones.iter().map(|t| t.peak).collect()
    }

    pub fn model(&self, t: f64) -> f64 {
        self.offset
            + self
                .tones
                .iter()
                .map(|tone| {
                    let a = tone.peak.amplitude;
                    a * (-tone.decay_rate * t).exp() * (2.0 * PI * tone.peak.freq * t + tone.phase).cos()
                })
                .sum::<f64>()
    }
}

/// Works in scaled time `s = t / span` so that all parameters are O(1)-ish.
struct Problem<'a> {
    s: Vec<f64>,
    y: &'a [f64],
    n_tones: usize,
    decay: bool,
}

impl Problem<'_> {
    fn per_tone(&self) -> usize {
        if self.decay {
            4
        } else {
            3
        }
    }

    fn n_params(&self) -> usize {
        1 + self.per_tone() * self.n_tones
    }

    fn tone(&self, p: &DVector<f64>, j: usize) -> (f64, f64, f64, f64) {
        let o = 1 + self.per_tone() * j;
        (p[o], p[o + 1], p[o + 2], if self.decay { p[o + 3] } else { 0.0 })
    }

    fn residuals(&self, p: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.s.len(),
            self.s.iter().zip(self.y).map(|(&s, &y)| {
                let mut m = p[0];
                for j in 0..self.n_tones {
                    let (a, b, nu, g) = self.tone(p, j);
                    let th = 2.0 * PI * nu * s;
                    m += (-g * s).exp() * (a * th.cos() + b * th.sin());
                }
                y - m
            }),
        )
    }

    fn jacobian(&self, p: &DVector<f64>) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(self.s.len(), self.n_params());
        for (i, &s) in self.s.iter().enumerate() {
            jac[(i, 0)] = 1.0;
            for j in 0..self.n_tones {
                let (a, b, nu, g) = self.tone(p, j);
                let o = 1 + self.per_tone() * j;
                let th = 2.0 * PI * nu * s;
                let (sn, cs) = th.sin_cos();
                let e = (-g * s).exp();
                jac[(i, o)] = e * cs;
                jac[(i, o + 1)] = e * sn;
                jac[(i, o + 2)] = e * 2.0 * PI * s * (b * cs - a * sn);
                if self.decay {
                    jac[(i, o + 3)] = -s * e * (a * cs + b * sn);
                }
            }
        }
        jac
    }

    fn cost(&self, p: &DVector<f64>) -> f64 {
        0.5 * self.residuals(p).norm_squared()
    }

    /// Offset and quadrature amplitudes by linear least squares with the
    /// frequencies held at their guesses.
    fn initial(&self, nus: &[f64]) -> Result<DVector<f64>, SpectraError> {
        let cols = 1 + 2 * nus.len();
        let mut design = DMatrix::zeros(self.s.len(), cols);
        for (i, &s) in self.s.iter().enumerate() {
            design[(i, 0)] = 1.0;
            for (j, nu) in nus.iter().enumerate() {
                let (sn, cs) = (2.0 * PI * nu * s).sin_cos();
                design[(i, 1 + 2 * j)] = cs;
                design[(i, 2 + 2 * j)] = sn;
            }
        }
        let lin = design
            .svd(true, true)
            .solve(&DVector::from_column_slice(self.y), 1e-12)
            .map_err(|e| SpectraError::Singular(e.to_string()))?;
        let mut p = DVector::zeros(self.n_params());
        p[0] = lin[0];
        for (j, nu) in nus.iter().enumerate() {
            let o = 1 + self.per_tone() * j;
            p[o] = lin[1 + 2 * j];
            p[o + 1] = lin[2 + 2 * j];
            p[o + 2] = *nu;
        }
        Ok(p)
    }
}

/// Fits `initial_freqs.len()` tones to samples at the given times.
pub fn fit_samples(
    times: &[f64],
    values: &[f64],
    initial_freqs: &[f64],
    options: &FitOptions,
) -> Result<FitResult, SpectraError> {
    if times.len() != values.len() {
        return Err(SpectraError::InvalidArgument("times and values differ in length".into()));
    }
    if initial_freqs.is_empty() || initial_freqs.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
        return Err(SpectraError::InvalidArgument(format!("initial frequencies {initial_freqs:?}")));
    }
    let span = times.iter().cloned().fold(0.0, f64::max);
    if !(span > 0.0) {
        return Err(SpectraError::InvalidArgument("record has no duration".into()));
    }
    let problem = Problem {
        s: times.iter().map(|t| t / span).collect(),
        y: values,
        n_tones: initial_freqs.len(),
        decay: options.decay,
    };
    let n_params = problem.n_params();
    if values.len() <= n_params {
        return Err(SpectraError::Singular(format!("{} samples for {n_params} parameters", values.len())));
    }

    let nus: Vec<f64> = initial_freqs.iter().map(|f| f * span).collect();
    let mut p = problem.initial(&nus)?;
    let initial_cost = problem.cost(&p);
    let mut cost = initial_cost;
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let floor = 1e-30 * values.len() as f64 * values.iter().map(|v| v * v).sum::<f64>().max(1e-300);

    let converged = loop {
        if cost <= floor {
            break true;
        }
        if iterations >= options.max_iterations {
            break false;
        }
        iterations += 1;
        let jac = problem.jacobian(&p);
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * problem.residuals(&p);
        let mut improved = false;
        while lambda < 1e16 {
            let mut damped = jtj.clone();
            for k in 0..n_params {
                damped[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(chol) = damped.cholesky() else {
                lambda *= 4.0;
                continue;
            };
            let candidate = &p + chol.solve(&grad);
            let c = problem.cost(&candidate);
            if c < cost {
                let gain = cost - c;
                p = candidate;
                cost = c;
                lambda = (lambda / 3.0).max(1e-15);
                improved = true;
                if gain <= options.rel_tol * cost {
                    return finish(&problem, &p, span, initial_cost, cost, iterations);
                }
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            // No descent direction left at working precision.
            break true;
        }
    };
    if !converged {
        return Err(SpectraError::NotConverged { iterations });
    }
    finish(&problem, &p, span, initial_cost, cost, iterations)
}

fn finish(
    problem: &Problem,
    p: &DVector<f64>,
    span: f64,
    initial_cost: f64,
    cost: f64,
    iterations: usize,
) -> Result<FitResult, SpectraError> {
    let jac = problem.jacobian(p);
    let dof = (problem.s.len() - problem.n_params()) as f64;
    let cov = (jac.transpose() * &jac)
        .try_inverse()
        .ok_or_else(|| SpectraError::Singular("normal matrix is not invertible".into()))?
        * (2.0 * cost / dof);
    let tones = (0..problem.n_tones)
        .map(|j| {
            let (a, b, nu, g) = problem.tone(p, j);
            let o = 1 + problem.per_tone() * j;
            ToneFit {
                peak: Peak {
                    freq: nu / span,
                    amplitude: a.hypot(b),
                    width: g.abs() / (PI * span),
                    fit_uncertainty: Some(cov[(o + 2, o + 2)].max(0.0).sqrt() / span),
                },
                phase: (-b).atan2(a),
                decay_rate: g / span,
            }
        })
        .collect();
    Ok(FitResult { tones, offset: p[0], initial_cost, final_cost: cost, iterations })
}

/// Fits tones to a uniformly sampled signal. Guesses should lie within one
/// FFT bin of the true tones.
pub fn fit_frequency(signal: &Signal, initial_freqs: &[f64], options: &FitOptions) -> Result<FitResult, SpectraError> {
    fit_samples(&signal.times(), &signal.values, initial_freqs, options)
}
