//! The column-shift motion model `y = B + A·sin(ω·u + φ)` and its robust
//! fitting.
//!
//! Fitting minimizes `Σ ρ(cᵢ)` where `cᵢ` is the model residual and `ρ` the
//! pseudo-Huber loss. Levenberg-Marquardt runs on the equivalent
//! least-squares problem with robustified residuals `r̃ᵢ = sign(cᵢ)·√(2ρ(cᵢ))`,
//! so `½‖r̃‖² = Σ ρ(cᵢ)` and `J̃ᵀr̃` is the exact gradient of the robust cost.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Smallest amplitude, in pixels, for which the phase is considered
/// identifiable.
pub const MIN_AMPLITUDE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SinusoidParams {
    /// Pixels, non-negative once canonical.
    pub amplitude: f64,
    /// Radians in `[-π, π)` once canonical.
    pub phase: f64,
    /// Pixels.
    pub offset: f64,
}

impl SinusoidParams {
    pub fn new(amplitude: f64, phase: f64, offset: f64) -> Self {
        Self {
            amplitude,
            phase,
            offset,
        }
    }

    pub fn eval(&self, omega: f64, u: f64) -> f64 {
        model_eval(self, omega, u)
    }

    /// Equivalent parameters with `A ≥ 0` and `φ ∈ [-π, π)`; the phase of a
    /// vanishing amplitude is pinned to zero.
    pub fn canonical(self) -> Self {
        let (mut a, mut phi) = (self.amplitude, self.phase);
        if a < 0.0 {
            a = -a;
            phi += PI;
        }
        if a < MIN_AMPLITUDE {
            phi = 0.0;
        }
        Self {
            amplitude: a,
            phase: wrap_angle(phi),
            offset: self.offset,
        }
    }

    fn to_array(self) -> [f64; 3] {
        [self.amplitude, self.phase, self.offset]
    }

    fn from_array(p: [f64; 3]) -> Self {
        Self::new(p[0], p[1], p[2])
    }
}

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(angle: f64) -> f64 {
    let a = (angle + PI).rem_euclid(2.0 * PI) - PI;
    if a >= PI {
        a - 2.0 * PI
    } else {
        a
    }
}

pub fn model_eval(params: &SinusoidParams, omega: f64, u: f64) -> f64 {
    params.offset + params.amplitude * (omega * u + params.phase).sin()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HuberForm {
    /// `δ·(√(1 + (c/δ)²) − 1)`.
    #[default]
    Paper,
    /// `δ²·(√(1 + (c/δ)²) − 1)`.
    Textbook,
}

impl std::str::FromStr for HuberForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Self::Paper),
            "textbook" => Ok(Self::Textbook),
            other => Err(Error::InvalidArgument(format!(
                "huber form must be paper or textbook, got {other:?}"
            ))),
        }
    }
}

/// Pseudo-Huber loss without the conventional `δ²` outer factor.
pub fn pseudo_huber(c: f64, delta: f64) -> f64 {
    pseudo_huber_with(c, delta, HuberForm::Paper)
}

pub fn pseudo_huber_with(c: f64, delta: f64, form: HuberForm) -> f64 {
    let x = c / delta;
    // √(1+x²) − 1 without cancellation
    let core = x * x / ((1.0 + x * x).sqrt() + 1.0);
    match form {
        HuberForm::Paper => delta * core,
        HuberForm::Textbook => delta * delta * core,
    }
}

/// `(r̃, dr̃/dc)` for one model residual.
fn robustify(c: f64, delta: f64, form: HuberForm) -> (f64, f64) {
    let x = c / delta;
    let s = (1.0 + x * x).sqrt();
    let k = (2.0 / delta).sqrt() / (s + 1.0).sqrt();
    let value = c * k;
    let slope = k * (1.0 - x * x / (2.0 * s * (s + 1.0)));
    match form {
        HuberForm::Paper => (value, slope),
        HuberForm::Textbook => {
            let f = delta.sqrt();
            (value * f, slope * f)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    /// Pseudo-Huber scale in pixels.
    pub delta: f64,
    pub max_iters: usize,
    /// Relative cost decrease below which the fit counts as converged.
    pub tol: f64,
    /// Initial Levenberg-Marquardt damping.
    pub lambda0: f64,
    pub huber_form: HuberForm,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            delta: 2.0,
            max_iters: 200,
            tol: 1e-10,
            lambda0: 1e-3,
            huber_form: HuberForm::Paper,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub params: SinusoidParams,
    pub iterations: usize,
    /// Robust cost `Σ ρ(cᵢ)` at the solution.
    pub final_cost: f64,
    /// RMS of the residuals with `|c| ≤ 3δ`.
    pub inlier_rmse: f64,
    pub converged: bool,
    /// Amplitude fell below [`MIN_AMPLITUDE`] and the phase was pinned.
    pub degenerate_amplitude: bool,
    /// Cost after the initial guess and after every accepted step.
    pub cost_history: Vec<f64>,
}

/// Model residuals `model(uᵢ) − yᵢ`.
pub fn residuals(params: &SinusoidParams, omega: f64, samples: &[(f64, f64)]) -> Result<Vec<f64>> {
    if samples.len() < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 samples, got {}",
            samples.len()
        )));
    }
    Ok(samples
        .iter()
        .map(|&(u, y)| model_eval(params, omega, u) - y)
        .collect())
}

/// Robust objective over a fixed sample set, with analytic derivatives.
#[derive(Debug, Clone)]
pub struct RobustObjective<'a> {
    samples: &'a [(f64, f64)],
    omega: f64,
    delta: f64,
    form: HuberForm,
}

impl<'a> RobustObjective<'a> {
    pub fn new(samples: &'a [(f64, f64)], omega: f64, delta: f64, form: HuberForm) -> Self {
        Self {
            samples,
            omega,
            delta,
            form,
        }
    }

    /// `Σ ρ(cᵢ)`.
    pub fn cost(&self, p: &SinusoidParams) -> f64 {
        self.samples
            .iter()
            .map(|&(u, y)| pseudo_huber_with(model_eval(p, self.omega, u) - y, self.delta, self.form))
            .sum()
    }

    /// Robustified residuals `r̃ᵢ`.
    pub fn robust_residuals(&self, p: &SinusoidParams) -> Vec<f64> {
        self.samples
            .iter()
            .map(|&(u, y)| robustify(model_eval(p, self.omega, u) - y, self.delta, self.form).0)
            .collect()
    }

    /// Rows `∂r̃ᵢ/∂(A, φ, B)`.
    pub fn jacobian(&self, p: &SinusoidParams) -> Vec<[f64; 3]> {
        self.samples
            .iter()
            .map(|&(u, y)| {
                let arg = self.omega * u + p.phase;
                let (s, c) = arg.sin_cos();
                let res = p.offset + p.amplitude * s - y;
                let (_, slope) = robustify(res, self.delta, self.form);
                [slope * s, slope * p.amplitude * c, slope]
            })
            .collect()
    }

    /// Gradient of [`cost`](Self::cost) with respect to `(A, φ, B)`.
    pub fn gradient(&self, p: &SinusoidParams) -> [f64; 3] {
        let r = self.robust_residuals(p);
        let j = self.jacobian(p);
        let mut g = [0.0; 3];
        for (ri, row) in r.iter().zip(&j) {
            for k in 0..3 {
                g[k] += row[k] * ri;
            }
        }
        g
    }
}

fn validate(samples: &[(f64, f64)], omega: f64) -> Result<()> {
    if samples.len() < 8 {
        return Err(Error::Fit(format!(
            "need at least 8 samples, got {}",
            samples.len()
        )));
    }
    if !omega.is_finite() || omega <= 0.0 {
        return Err(Error::Fit(format!("invalid angular frequency {omega}")));
    }
    if samples.iter().any(|(u, y)| !u.is_finite() || !y.is_finite()) {
        return Err(Error::Fit("non-finite sample".into()));
    }
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(u, _)| {
            (lo.min(u), hi.max(u))
        });
    if omega * (hi - lo) < PI {
        return Err(Error::Fit(format!(
            "samples span {:.3} rad, need at least half a period",
            omega * (hi - lo)
        )));
    }
    Ok(())
}

/// First-harmonic starting point: the samples are resampled on a uniform
/// grid over their span and projected onto `{1, sin ωu, cos ωu}`. On a grid
/// covering whole periods this is the discrete Fourier coefficient.
pub fn initial_guess(samples: &[(f64, f64)], omega: f64) -> SinusoidParams {
    let mut sorted: Vec<(f64, f64)> = samples.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = sorted.len();
    let (lo, hi) = (sorted[0].0, sorted[n - 1].0);
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    let mut j = 0;
    for i in 0..n {
        let u = if n > 1 {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        } else {
            lo
        };
        while j + 2 < n && sorted[j + 1].0 < u {
            j += 1;
        }
        let (u0, y0) = sorted[j];
        let (u1, y1) = sorted[(j + 1).min(n - 1)];
        let y = if u1 > u0 {
            y0 + (y1 - y0) * ((u - u0) / (u1 - u0)).clamp(0.0, 1.0)
        } else {
            y0
        };
        let (s, c) = (omega * u).sin_cos();
        let basis = [1.0, s, c];
        for r in 0..3 {
            atb[r] += basis[r] * y;
            for k in 0..3 {
                ata[r][k] += basis[r] * basis[k];
            }
        }
    }
    match solve3(ata, atb) {
        Some([b, a_sin, a_cos]) => SinusoidParams::new(a_sin.hypot(a_cos), a_cos.atan2(a_sin), b),
        None => {
            let mean = samples.iter().map(|s| s.1).sum::<f64>() / samples.len() as f64;
            SinusoidParams::new(0.0, 0.0, mean)
        }
    }
}

/// Ordinary least squares on `{1, sin ωu, cos ωu}`: the plain L2 fit, with
/// no robust loss.
pub fn fit_least_squares(samples: &[(f64, f64)], omega: f64) -> Result<SinusoidParams> {
    validate(samples, omega)?;
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for &(u, y) in samples {
        let (s, c) = (omega * u).sin_cos();
        let basis = [1.0, s, c];
        for r in 0..3 {
            atb[r] += basis[r] * y;
            for k in 0..3 {
                ata[r][k] += basis[r] * basis[k];
            }
        }
    }
    let [b, a_sin, a_cos] =
        solve3(ata, atb).ok_or_else(|| Error::Fit("singular least-squares system".into()))?;
    Ok(SinusoidParams::new(a_sin.hypot(a_cos), a_cos.atan2(a_sin), b).canonical())
}

/// Robust Levenberg-Marquardt fit of the motion model.
pub fn fit(samples: &[(f64, f64)], omega: f64, config: &FitConfig) -> Result<FitReport> {
    if !(config.delta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "delta must be positive, got {}",
            config.delta
        )));
    }
    validate(samples, omega)?;
    let init = initial_guess(samples, omega);
    fit_from(samples, omega, config, init)
}

/// Levenberg-Marquardt from an explicit starting point.
pub fn fit_from(
    samples: &[(f64, f64)],
    omega: f64,
    config: &FitConfig,
    init: SinusoidParams,
) -> Result<FitReport> {
    validate(samples, omega)?;
    let obj = RobustObjective::new(samples, omega, config.delta, config.huber_form);
    let mut p = init;
    let mut cost = obj.cost(&p);
    if !cost.is_finite() {
        return Err(Error::Fit("non-finite initial cost".into()));
    }
    let mut history = vec![cost];
    let mut lambda = config.lambda0;
    let mut converged = false;
    let mut iterations = 0;
    let floor = 1e-30 * samples.len() as f64;

    while iterations < config.max_iters {
        if cost <= floor {
            converged = true;
            break;
        }
        iterations += 1;
        let r = obj.robust_residuals(&p);
        let jac = obj.jacobian(&p);
        let mut jtj = [[0.0; 3]; 3];
        let mut g = [0.0; 3];
        for (ri, row) in r.iter().zip(&jac) {
            for a in 0..3 {
                g[a] += row[a] * ri;
                for b in 0..3 {
                    jtj[a][b] += row[a] * row[b];
                }
            }
        }
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm <= 1e-14 * (1.0 + cost) {
            converged = true;
            break;
        }

        // inner loop: raise damping until a step lowers the cost
        let mut accepted = false;
        while lambda <= 1e16 {
            let mut lhs = jtj;
            for d in 0..3 {
                lhs[d][d] += lambda * jtj[d][d].max(1e-12);
            }
            let Some(step) = solve3(lhs, [-g[0], -g[1], -g[2]]) else {
                lambda *= 10.0;
                continue;
            };
            let pa = p.to_array();
            let candidate =
                SinusoidParams::from_array([pa[0] + step[0], pa[1] + step[1], pa[2] + step[2]]);
            let new_cost = obj.cost(&candidate);
            if new_cost.is_finite() && new_cost < cost {
                let rel = (cost - new_cost) / cost;
                let step_small = step
                    .iter()
                    .zip(pa)
                    .all(|(s, v)| s.abs() <= 1e-13 * (v.abs() + 1e-9));
                p = candidate;
                cost = new_cost;
                history.push(cost);
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if rel < config.tol || step_small {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no descent direction left at machine precision: a minimum
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }

    let canonical = p.canonical();
    let degenerate_amplitude = p.amplitude.abs() < MIN_AMPLITUDE;
    let res = residuals(&canonical, omega, samples)?;
    let inliers: Vec<f64> = res
        .iter()
        .copied()
        .filter(|c| c.abs() <= 3.0 * config.delta)
        .collect();
    let inlier_rmse = if inliers.is_empty() {
        f64::NAN
    } else {
        (inliers.iter().map(|c| c * c).sum::<f64>() / inliers.len() as f64).sqrt()
    };
    Ok(FitReport {
        params: canonical,
        iterations,
        final_cost: obj.cost(&canonical),
        inlier_rmse,
        converged,
        degenerate_amplitude,
        cost_history: history,
    })
}

/// Gaussian elimination with partial pivoting on a 3x3 system.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-14 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut acc = b[row];
        for k in (row + 1)..3 {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}
