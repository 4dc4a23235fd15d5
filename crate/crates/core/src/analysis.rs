//! Norms, energy diagnostics, power-law fitting and the area-inequality
//! toolkit.
//!
//! The area inequality: if a Lipschitz `f >= 0` satisfies
//!
//! ```text
//! f'(t) <= C0 (1+t)^{-α}     and     ∫_0^t f <= C1 (1+t)^β ln^γ(1+t)
//! ```
//!
//! with `0 <= β < α`, `α + β < 2`, then for large `t`
//!
//! ```text
//! f(t) <= 2 sqrt(C0 C1) (1+t)^{(β-α)/2} ln^{γ/2}(1+t).
//! ```
//!
//! [`area_check`] tests sampled data against the premises and the
//! conclusion, [`area_witness`] builds the function showing that the
//! exponent `α/2` cannot be improved, and [`area_naive_bound`] gives the
//! classical `(1+t)^{1-α}` envelope for comparison.

use nalgebra::{DMatrix, DVector};

use crate::deterministic::Field;
use crate::error::{invalid, Error, Result};
use crate::quadrature::increasing_root;

/// Trapezoidal `(∫|v|^p dx)^{1/p}`; `p = ∞` gives `max |v_i|`.
pub fn lp_norm(v: &Field, p: f64) -> f64 {
    lp_norm_slice(v.values(), v.grid().dx(), p)
}

pub(crate) fn lp_norm_slice(v: &[f64], dx: f64, p: f64) -> f64 {
    if p.is_infinite() {
        return v.iter().fold(0.0, |m, a| m.max(a.abs()));
    }
    lp_power_slice(v, dx, p).powf(1.0 / p)
}

/// Trapezoidal `∫|v|^p dx`.
pub(crate) fn lp_power_slice(v: &[f64], dx: f64, p: f64) -> f64 {
    let n = v.len();
    let pow = |a: f64| if p == 2.0 { a * a } else { a.abs().powf(p) };
    let inner: f64 = v[1..n - 1].iter().map(|&a| pow(a)).sum();
    (inner + 0.5 * (pow(v[0]) + pow(v[n - 1]))) * dx
}

/// Instantaneous quantities whose time integrals make up the basic energy
/// estimate for `φ = u - ū`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyDiagnostics {
    /// `‖φ‖²`
    pub l2_sq: f64,
    /// `‖φ_x‖²` with forward differences
    pub h1_seed: f64,
    /// `∫ φ² ū_x dx`
    pub weighted_l2: f64,
}

pub fn energy_diagnostics(phi: &Field, ubar_slope: &Field) -> Result<EnergyDiagnostics> {
    if phi.grid() != ubar_slope.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(energy_slices(phi.values(), ubar_slope.values(), phi.grid().dx()))
}

pub(crate) fn energy_slices(phi: &[f64], slope: &[f64], dx: f64) -> EnergyDiagnostics {
    let weighted: Vec<f64> = phi.iter().zip(slope).map(|(p, s)| p * p * s).collect();
    let n = weighted.len();
    let weighted_l2 = (weighted[1..n - 1].iter().sum::<f64>() + 0.5 * (weighted[0] + weighted[n - 1])) * dx;
    EnergyDiagnostics {
        l2_sq: lp_power_slice(phi, dx, 2.0),
        h1_seed: phi.windows(2).map(|w| ((w[1] - w[0]) / dx).powi(2)).sum::<f64>() * dx,
        weighted_l2,
    }
}

/// A time series `f(t_i)` on strictly increasing nonnegative times.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(invalid(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.is_empty() {
            return Err(invalid("sampled function needs at least one sample"));
        }
        if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(invalid("sample times must be finite and nonnegative"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("sample times must be strictly increasing"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("sample values must be finite"));
        }
        Ok(Self { times, values })
    }

    pub fn from_fn(times: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = times.iter().map(|&t| f(t)).collect();
        Self::new(times, values)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied())
    }

    /// Trapezoidal `∫_{t_0}^{t_i} f` at every sample.
    pub fn cumulative_integral(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.len());
        out.push(0.0);
        for i in 1..self.len() {
            acc += 0.5 * (self.values[i] + self.values[i - 1]) * (self.times[i] - self.times[i - 1]);
            out.push(acc);
        }
        out
    }

    pub fn max_spacing(&self) -> f64 {
        self.times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// `max_{t ∈ [T, 2T]} f(t) t^q` for `T = t0, 2 t0, 4 t0, ...`.
    pub fn scaled_window_maxima(&self, q: f64, t0: f64, doublings: usize) -> Vec<f64> {
        (0..doublings)
            .map(|k| {
                let lo = t0 * 2f64.powi(k as i32);
                self.iter()
                    .filter(|&(t, _)| t >= lo && t <= 2.0 * lo)
                    .map(|(t, v)| v * t.powf(q))
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    /// Linear interpolation, constant beyond the ends.
    pub fn interpolate(&self, t: f64) -> f64 {
        let i = self.times.partition_point(|&s| s <= t);
        if i == 0 {
            return self.values[0];
        }
        if i == self.len() {
            return self.values[self.len() - 1];
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }
}

/// Constants and exponents of the two area-inequality premises.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaPremises {
    pub c0: f64,
    pub c1: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl AreaPremises {
    pub fn new(c0: f64, c1: f64, alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        if !(c0 > 0.0 && c1 > 0.0) {
            return Err(invalid(format!("C0 and C1 must be positive, got ({c0}, {c1})")));
        }
        if !(beta >= 0.0 && beta < alpha) {
            return Err(Error::Constraint {
                rule: "0 <= beta < alpha",
                detail: format!("alpha = {alpha}, beta = {beta}"),
            });
        }
        if !(alpha + beta < 2.0) {
            return Err(Error::Constraint {
                rule: "alpha + beta < 2",
                detail: format!("alpha + beta = {}", alpha + beta),
            });
        }
        if !(gamma >= 0.0) {
            return Err(invalid(format!("gamma must be nonnegative, got {gamma}")));
        }
        Ok(Self { c0, c1, alpha, beta, gamma })
    }

    /// Exponent `(β - α)/2` of the conclusion.
    pub fn decay_exponent(&self) -> f64 {
        0.5 * (self.beta - self.alpha)
    }

    fn log_term(&self, t: f64, power: f64) -> f64 {
        if power == 0.0 {
            1.0
        } else {
            (t.ln_1p()).max(1e-12).powf(power)
        }
    }

    pub fn derivative_bound(&self, t: f64) -> f64 {
        self.c0 * (1.0 + t).powf(-self.alpha)
    }

    pub fn integral_bound(&self, t: f64) -> f64 {
        self.c1 * (1.0 + t).powf(self.beta) * self.log_term(t, self.gamma)
    }

    /// `2 sqrt(C0 C1) (1+t)^{(β-α)/2} ln^{γ/2}(1+t)`.
    pub fn envelope(&self, t: f64) -> f64 {
        2.0 * (self.c0 * self.c1).sqrt() * (1.0 + t).powf(self.decay_exponent()) * self.log_term(t, 0.5 * self.gamma)
    }
}

/// Outcome of [`area_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct AreaReport {
    pub premise1_ok: bool,
    pub premise2_ok: bool,
    /// `None` when a premise fails and the conclusion is not applicable.
    pub conclusion_ok: Option<bool>,
    /// Smallest sample time from which the conclusion holds to the end.
    pub first_ok_time: Option<f64>,
    pub t_star: f64,
    /// Largest sample spacing: derivatives between samples are not certified.
    pub max_spacing: f64,
    /// Largest ratio of difference quotient to `C0 (1+t)^{-α}`.
    pub premise1_ratio: f64,
    /// Largest ratio of cumulative integral to its bound.
    pub premise2_ratio: f64,
    /// Largest ratio `f / envelope` over `t >= t_star`.
    pub conclusion_ratio: f64,
}

impl AreaReport {
    pub fn all_ok(&self) -> bool {
        self.premise1_ok && self.premise2_ok && self.conclusion_ok == Some(true)
    }
}

/// Default `t_star`: 20% into the sampled window.
pub fn default_t_star(f: &SampledFunction) -> f64 {
    let t = f.times();
    t[0] + 0.2 * (t[t.len() - 1] - t[0])
}

/// Check sampled `f` against the area-inequality premises and conclusion.
///
/// The cumulative integral starts at the first sample time.
pub fn area_check(f: &SampledFunction, prem: &AreaPremises, t_star: Option<f64>) -> AreaReport {
    let t_star = t_star.unwrap_or_else(|| default_t_star(f));
    let (t, v) = (f.times(), f.values());

    let mut premise1_ratio = 0.0f64;
    let mut premise1_ok = true;
    for i in 0..f.len().saturating_sub(1) {
        let q = (v[i + 1] - v[i]) / (t[i + 1] - t[i]);
        let bound = prem.derivative_bound(t[i]);
        premise1_ratio = premise1_ratio.max(q / bound);
        if q > bound + 1e-9 * (1.0 + v[i].abs()) {
            premise1_ok = false;
        }
    }

    let cumulative = f.cumulative_integral();
    let mut premise2_ratio = 0.0f64;
    let mut premise2_ok = true;
    for (i, &c) in cumulative.iter().enumerate() {
        let bound = prem.integral_bound(t[i]);
        if c > 0.0 {
            premise2_ratio = premise2_ratio.max(c / bound);
        }
        if c > bound + 1e-9 * (1.0 + c.abs()) {
            premise2_ok = false;
        }
    }

    let holds = |i: usize| v[i] <= prem.envelope(t[i]) * (1.0 + 1e-12);
    let first_ok = (0..f.len()).rev().take_while(|&i| holds(i)).last().map(|i| t[i]);
    let mut conclusion_ratio = 0.0f64;
    let mut conclusion = true;
    for i in (0..f.len()).filter(|&i| t[i] >= t_star) {
        conclusion_ratio = conclusion_ratio.max(v[i] / prem.envelope(t[i]));
        conclusion &= holds(i);
    }
    let applicable = premise1_ok && premise2_ok;
    AreaReport {
        premise1_ok,
        premise2_ok,
        conclusion_ok: applicable.then_some(conclusion),
        first_ok_time: if applicable { first_ok } else { None },
        t_star,
        max_spacing: f.max_spacing(),
        premise1_ratio,
        premise2_ratio,
        conclusion_ratio,
    }
}

/// Classical envelope `C (1+t)^{1-α}` obtained by integrating the derivative
/// premise against `1+t`.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveBound {
    pub exponent: f64,
    pub constant: f64,
    pub envelope: SampledFunction,
}

pub fn area_naive_bound(f: &SampledFunction, c0: f64, alpha: f64) -> Result<NaiveBound> {
    if !(c0 > 0.0) {
        return Err(invalid(format!("C0 must be positive, got {c0}")));
    }
    let exponent = 1.0 - alpha;
    let constant = f.iter().map(|(t, v)| v * (1.0 + t).powf(-exponent)).fold(0.0, f64::max);
    let envelope = SampledFunction::from_fn(f.times().to_vec(), |t| constant * (1.0 + t).powf(exponent))?;
    Ok(NaiveBound {
        exponent,
        constant,
        envelope,
    })
}

/// One bump of the optimality witness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessPeak {
    pub n: usize,
    /// Start of the rise, `e^n`.
    pub s_n: f64,
    /// Peak time.
    pub t_n: f64,
    /// End of the linear descent.
    pub z_n: f64,
    /// `g(t_n) = (1+t_n)^{-α/2-ε}`.
    pub peak: f64,
    /// `∫_{s_n}^{t_n} g`, exact.
    pub rise_integral: f64,
    /// `∫_{t_n}^{z_n} g`, exact.
    pub descent_integral: f64,
}

/// The optimality witness and its construction data.
#[derive(Debug, Clone, PartialEq)]
pub struct AreaWitness {
    pub alpha: f64,
    pub epsilon: f64,
    pub c0: f64,
    pub peaks: Vec<WitnessPeak>,
    pub samples: SampledFunction,
}

impl AreaWitness {
    pub fn total_integral(&self) -> f64 {
        self.peaks.iter().map(|p| p.rise_integral + p.descent_integral).sum()
    }

    /// Partial sums of the per-bump integrals.
    pub fn partial_integrals(&self) -> Vec<f64> {
        self.peaks
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p.rise_integral + p.descent_integral;
                Some(*acc)
            })
            .collect()
    }

    /// `g(t_n) t_n^q` for each bump.
    pub fn scaled_peaks(&self, q: f64) -> Vec<f64> {
        self.peaks.iter().map(|p| p.peak * p.t_n.powf(q)).collect()
    }

    /// Exact value of the witness at `t`.
    pub fn value(&self, t: f64) -> f64 {
        for p in &self.peaks {
            if t >= p.s_n && t <= p.t_n {
                return if t == p.t_n {
                    p.peak
                } else {
                    self.c0 * (antiderivative(self.alpha, t) - antiderivative(self.alpha, p.s_n))
                };
            }
            if t > p.t_n && t <= p.z_n {
                return p.peak * (p.z_n - t) / (p.z_n - p.t_n);
            }
        }
        0.0
    }
}

/// `∫ (1+τ)^{-α} dτ`.
fn antiderivative(alpha: f64, t: f64) -> f64 {
    if alpha == 1.0 {
        t.ln_1p()
    } else {
        (1.0 + t).powf(1.0 - alpha) / (1.0 - alpha)
    }
}

/// `∫ antiderivative(α, τ) dτ`.
fn second_antiderivative(alpha: f64, t: f64) -> f64 {
    let s = 1.0 + t;
    if alpha == 1.0 {
        s * s.ln() - s
    } else if alpha == 2.0 {
        -s.ln()
    } else {
        s.powf(2.0 - alpha) / ((1.0 - alpha) * (2.0 - alpha))
    }
}

const WITNESS_RISE_SAMPLES: usize = 64;
const WITNESS_GAP_SAMPLES: usize = 16;

/// Build the optimality witness `g` on `[0, e^{n_max+1}]`.
///
/// On `[s_n, t_n]` with `s_n = e^n`, `g' = C0 (1+t)^{-α}` from `g(s_n) = 0`,
/// and `t_n` is chosen so that `g(t_n) = (1+t_n)^{-α/2-ε}`. The bump then
/// descends linearly to zero at `z_n = t_n + min(2^{-n}/(1+g(t_n)),
/// (s_{n+1}-t_n)/2)`; `g` vanishes elsewhere.
pub fn area_witness(alpha: f64, epsilon: f64, c0: f64, n_max: usize) -> Result<AreaWitness> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(invalid(format!("alpha must lie in (0, 2], got {alpha}")));
    }
    if !(epsilon > 0.0) {
        return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(c0 > 0.0) {
        return Err(invalid(format!("C0 must be positive, got {c0}")));
    }
    if n_max < 2 {
        return Err(invalid(format!("n_max must be at least 2, got {n_max}")));
    }
    let decay = 0.5 * alpha + epsilon;
    let mut peaks = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let s_n = (n as f64).exp();
        let s_next = ((n + 1) as f64).exp();
        let g_s = antiderivative(alpha, s_n);
        let rise = |t: f64| c0 * (antiderivative(alpha, t) - g_s) - (1.0 + t).powf(-decay);
        let d_rise = |t: f64| c0 * (1.0 + t).powf(-alpha) + decay * (1.0 + t).powf(-decay - 1.0);
        let mut hi = s_n + 1.0;
        while rise(hi) < 0.0 {
            hi = s_n + 2.0 * (hi - s_n);
            if hi > 1e300 {
                return Err(Error::WitnessBreakdown { n, t_n: f64::INFINITY, s_next });
            }
        }
        let t_n = increasing_root(rise, d_rise, s_n, hi, 1e-12)?;
        if t_n >= s_next {
            return Err(Error::WitnessBreakdown { n, t_n, s_next });
        }
        let peak = (1.0 + t_n).powf(-decay);
        let z_n = t_n + (0.5f64.powi(n as i32) / (1.0 + peak)).min(0.5 * (s_next - t_n));
        let rise_integral = c0
            * (second_antiderivative(alpha, t_n) - second_antiderivative(alpha, s_n) - g_s * (t_n - s_n));
        peaks.push(WitnessPeak {
            n,
            s_n,
            t_n,
            z_n,
            peak,
            rise_integral,
            descent_integral: 0.5 * peak * (z_n - t_n),
        });
    }

    let mut witness = AreaWitness {
        alpha,
        epsilon,
        c0,
        peaks,
        samples: SampledFunction::new(vec![0.0], vec![0.0])?,
    };
    let horizon = ((n_max + 1) as f64).exp();
    let mut times = Vec::new();
    let gap = |from: f64, to: f64, times: &mut Vec<f64>| {
        for k in 0..WITNESS_GAP_SAMPLES {
            times.push(from + (to - from) * k as f64 / WITNESS_GAP_SAMPLES as f64);
        }
    };
    let mut cursor = 0.0;
    for p in &witness.peaks {
        gap(cursor, p.s_n, &mut times);
        for k in 0..WITNESS_RISE_SAMPLES {
            times.push(p.s_n + (p.t_n - p.s_n) * k as f64 / WITNESS_RISE_SAMPLES as f64);
        }
        times.push(p.t_n);
        times.push(0.5 * (p.t_n + p.z_n));
        cursor = p.z_n;
    }
    gap(cursor, horizon, &mut times);
    times.push(horizon);
    times.dedup();
    let values = times.iter().map(|&t| witness.value(t)).collect();
    witness.samples = SampledFunction::new(times, values)?;
    Ok(witness)
}

/// Least-squares model `value ≈ C (2+t)^exponent ln^q(2+t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub exponent: f64,
    pub log_factor_power: f64,
    pub constant: f64,
    pub window: (f64, f64),
    /// RMS residual in log space.
    pub residual: f64,
}

fn window_samples(series: &SampledFunction, window: (f64, f64)) -> Result<Vec<(f64, f64)>> {
    let (lo, hi) = window;
    if !(lo < hi) {
        return Err(invalid(format!("fit window needs t_lo < t_hi, got ({lo}, {hi})")));
    }
    let pts: Vec<(f64, f64)> = series.iter().filter(|&(t, _)| t >= lo && t <= hi).collect();
    if pts.len() < 10 {
        return Err(Error::Fit(format!(
            "{} samples in window [{lo}, {hi}], need at least 10",
            pts.len()
        )));
    }
    Ok(pts)
}

fn least_squares(design: DMatrix<f64>, rhs: DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let svd = design.clone().svd(true, true);
    let coef = svd
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::Fit(format!("least squares failed: {e}")))?;
    let resid = &design * &coef - rhs;
    let rms = (resid.norm_squared() / resid.len() as f64).sqrt();
    Ok((coef, rms))
}

/// Ordinary least squares of `ln value` on `ln(2+t)` (and `ln ln(2+t)`).
pub fn rate_fit(series: &SampledFunction, window: (f64, f64), with_log: bool) -> Result<RateFit> {
    let pts = window_samples(series, window)?;
    if let Some(&(t, v)) = pts.iter().find(|&&(_, v)| v <= 0.0) {
        return Err(Error::Fit(format!("nonpositive value {v} at t = {t}")));
    }
    let cols = if with_log { 3 } else { 2 };
    let design = DMatrix::from_fn(pts.len(), cols, |i, j| {
        let l = (2.0 + pts[i].0).ln();
        match j {
            0 => 1.0,
            1 => l,
            _ => l.ln(),
        }
    });
    let rhs = DVector::from_iterator(pts.len(), pts.iter().map(|&(_, v)| v.ln()));
    let (coef, residual) = least_squares(design, rhs)?;
    Ok(RateFit {
        exponent: coef[1],
        log_factor_power: if with_log { coef[2] } else { 0.0 },
        constant: coef[0].exp(),
        window,
        residual,
    })
}

/// Linear fit `value ≈ a + b ln(2+t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogGrowthFit {
    pub a: f64,
    pub b: f64,
    /// RMS residual.
    pub residual: f64,
    /// `max - min` of the fitted values in the window.
    pub range: f64,
}

pub fn log_growth_fit(series: &SampledFunction, window: (f64, f64)) -> Result<LogGrowthFit> {
    let pts = window_samples(series, window)?;
    let design = DMatrix::from_fn(pts.len(), 2, |i, j| if j == 0 { 1.0 } else { (2.0 + pts[i].0).ln() });
    let rhs = DVector::from_iterator(pts.len(), pts.iter().map(|&(_, v)| v));
    let (coef, residual) = least_squares(design, rhs)?;
    let (lo, hi) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &(_, v)| (a.min(v), b.max(v)));
    Ok(LogGrowthFit {
        a: coef[0],
        b: coef[1],
        residual,
        range: hi - lo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deterministic::Grid;
    use proptest::prelude::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn lp_norm_examples() {
        let g = Grid::new(-1.0, 1.0, 201).unwrap();
        assert_eq!(lp_norm(&Field::constant(g, 0.0), 3.0), 0.0);
        let boxed = Field::constant(g, 1.0);
        for p in [1.0, 2.0, 3.5] {
            assert!((lp_norm(&boxed, p) - 2f64.powf(1.0 / p)).abs() < 1e-13);
        }
        assert_eq!(lp_norm(&boxed, f64::INFINITY), 1.0);
        let g = Grid::new(-10.0, 10.0, 20001).unwrap();
        let gauss = Field::from_fn(g, |x| (-x * x).exp());
        assert!((lp_norm(&gauss, 2.0) - (PI / 2.0).powf(0.25)).abs() < 1e-6);
    }

    #[test]
    fn energy_examples() {
        let g = Grid::new(0.0, 1.0, 11).unwrap();
        let z = Field::constant(g, 0.0);
        let e = energy_diagnostics(&z, &Field::constant(g, 1.0)).unwrap();
        assert_eq!((e.l2_sq, e.h1_seed, e.weighted_l2), (0.0, 0.0, 0.0));
        let slope = Field::from_fn(g, |x| 1.0 / (1.0 + x * x));
        assert!(energy_diagnostics(&slope, &slope).unwrap().weighted_l2 > 0.0);

        let g = Grid::new(0.0, 2.0 * PI, 20001).unwrap();
        let phi = Field::from_fn(g, f64::sin);
        let e = energy_diagnostics(&phi, &Field::constant(g, 1.0)).unwrap();
        assert!((e.l2_sq - PI).abs() < 1e-10);
        assert!((e.weighted_l2 - PI).abs() < 1e-10);
        assert!((e.h1_seed - PI).abs() < 1e-6);

        let other = Grid::new(0.0, 1.0, 12).unwrap();
        assert!(energy_diagnostics(&phi, &Field::constant(other, 1.0)).is_err());
    }

    #[test]
    fn sampled_function_validation() {
        assert!(SampledFunction::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(SampledFunction::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(SampledFunction::new(vec![0.0, 1.0], vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn premises_validation() {
        assert!(AreaPremises::new(1.0, 1.0, 1.5, 0.0, 0.0).is_ok());
        assert!(AreaPremises::new(1.0, 1.0, 1.0, 1.0, 0.0).is_err());
        assert!(AreaPremises::new(1.0, 1.0, 1.5, 0.6, 0.0).is_err());
        assert!(AreaPremises::new(0.0, 1.0, 1.0, 0.0, 0.0).is_err());
    }

    fn geometric_times(hi: f64, n: usize) -> Vec<f64> {
        let mut t = vec![0.0];
        t.extend((0..n).map(|k| 0.01 * (hi / 0.01f64).powf(k as f64 / (n - 1) as f64)));
        t
    }

    #[test]
    fn area_check_power_law() {
        // f = a (1+t)^{-α}: f' < 0 and ∫_0^∞ f = a/(α-1), so C1 = a/(α-1)
        // works; the envelope 2 sqrt(C0 C1)(1+t)^{-α/2} dominates f once
        // (1+t)^{α/2} >= a / (2 sqrt(C0 C1)).
        let (alpha, a) = (1.5, 0.1);
        let f = SampledFunction::from_fn(geometric_times(1e4, 400), |t| a * (1.0 + t).powf(-alpha)).unwrap();
        let prem = AreaPremises::new(1.0, a / (alpha - 1.0), alpha, 0.0, 0.0).unwrap();
        let r = area_check(&f, &prem, None);
        assert!(r.all_ok(), "{r:?}");
        assert_eq!(r.first_ok_time, Some(0.0));
    }

    #[test]
    fn area_check_zero_function() {
        let f = SampledFunction::new(vec![0.0, 1.0, 2.0], vec![0.0; 3]).unwrap();
        let prem = AreaPremises::new(1.0, 1.0, 1.0, 0.0, 0.0).unwrap();
        let r = area_check(&f, &prem, None);
        assert!(r.all_ok());
        assert_eq!(r.first_ok_time, Some(0.0));
    }

    #[test]
    fn violated_premise_makes_conclusion_not_applicable() {
        let f = SampledFunction::new(vec![0.0, 1.0, 2.0], vec![0.0, 5.0, 0.0]).unwrap();
        let prem = AreaPremises::new(1.0, 100.0, 1.0, 0.0, 0.0).unwrap();
        let r = area_check(&f, &prem, None);
        assert!(!r.premise1_ok);
        assert_eq!(r.conclusion_ok, None);
        let prem = AreaPremises::new(10.0, 0.1, 1.0, 0.0, 0.0).unwrap();
        let r = area_check(&f, &prem, None);
        assert!(r.premise1_ok && !r.premise2_ok);
    }

    #[test]
    fn naive_bound_examples() {
        let f = SampledFunction::from_fn(geometric_times(1e3, 100), |t| (1.0 + t).powf(-1.5)).unwrap();
        let nb = area_naive_bound(&f, 1.0, 1.5).unwrap();
        assert_eq!(nb.exponent, -0.5);
        assert!(nb.envelope.iter().zip(f.iter()).all(|((_, e), (_, v))| e >= v));
        let prem = AreaPremises::new(1.0, 2.0, 1.5, 0.0, 0.0).unwrap();
        assert_eq!(prem.decay_exponent(), -0.75);
        assert_eq!(area_naive_bound(&f, 1.0, 1.0).unwrap().exponent, 0.0);
        assert_eq!(area_naive_bound(&f, 1.0, 0.5).unwrap().exponent, 0.5);
        assert_eq!(AreaPremises::new(1.0, 1.0, 0.5, 0.0, 0.0).unwrap().decay_exponent(), -0.25);
    }

    #[test]
    fn witness_peaks_are_pinned() {
        let w = area_witness(1.0, 0.1, 1.0, 6).unwrap();
        assert_eq!(w.peaks.len(), 6);
        for p in &w.peaks {
            assert!(p.s_n < p.t_n && p.t_n < p.z_n && p.z_n < ((p.n + 1) as f64).exp());
            assert!((p.peak * (1.0 + p.t_n).powf(0.6) - 1.0).abs() < 1e-12);
            // the rising branch reaches the pinned peak
            let rise = antiderivative(1.0, p.t_n) - antiderivative(1.0, p.s_n);
            assert!((rise - p.peak).abs() < 1e-9);
        }
    }

    #[test]
    fn witness_segment_integrals_are_exact() {
        for alpha in [0.5, 1.0, 1.5, 2.0] {
            let w = area_witness(alpha, 0.1, 1.0, 4).unwrap();
            for p in &w.peaks {
                let q = crate::quadrature::adaptive_simpson(|t| w.value(t), p.s_n, p.t_n, 1e-13).unwrap();
                assert!((q - p.rise_integral).abs() < 1e-9, "alpha={alpha} n={}", p.n);
            }
        }
    }

    #[test]
    fn witness_satisfies_premises() {
        for alpha in [0.5, 1.0, 1.5, 2.0] {
            let w = area_witness(alpha, 0.1, 1.0, 6).unwrap();
            let c1 = w.total_integral() * (1.0 + 1e-9);
            // β = γ = 0 requires α + 0 < 2
            let beta_ok = alpha < 2.0;
            if beta_ok {
                let prem = AreaPremises::new(1.0, c1, alpha, 0.0, 0.0).unwrap();
                let r = area_check(&w.samples, &prem, None);
                assert!(r.premise1_ok && r.premise2_ok, "alpha={alpha}: {r:?}");
            }
        }
    }

    #[test]
    fn witness_breakdown_is_reported() {
        // a tiny C0 makes the rise too slow to reach the pinned peak before e^{n+1}
        let err = area_witness(1.0, 0.1, 1e-3, 3).unwrap_err();
        assert!(matches!(err, Error::WitnessBreakdown { n: 1, .. }));
    }

    #[test]
    fn rate_fit_exact_models() {
        let times: Vec<f64> = (0..200).map(|k| 10.0 * 100f64.powf(k as f64 / 199.0)).collect();
        let f = SampledFunction::from_fn(times.clone(), |t| (2.0 + t).powf(-0.25)).unwrap();
        let fit = rate_fit(&f, (10.0, 1000.0), false).unwrap();
        assert!((fit.exponent + 0.25).abs() < 1e-10);
        let f = SampledFunction::from_fn(times, |t| (2.0 + t).powf(-0.5) * (2.0 + t).ln()).unwrap();
        let fit = rate_fit(&f, (10.0, 1000.0), true).unwrap();
        assert!((fit.exponent + 0.5).abs() < 1e-6);
        assert!((fit.log_factor_power - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rate_fit_noisy_power_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let times: Vec<f64> = (0..100).map(|k| 10.0 * 100f64.powf(k as f64 / 99.0)).collect();
        let values = times
            .iter()
            .map(|t| (2.0 + t).powf(-0.4) * (1.0 + 0.05 * rng.random_range(-1.0..1.0)))
            .collect();
        let fit = rate_fit(&SampledFunction::new(times, values).unwrap(), (10.0, 1000.0), false).unwrap();
        assert!((fit.exponent + 0.4).abs() < 0.03);
    }

    #[test]
    fn rate_fit_errors() {
        let times: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let f = SampledFunction::from_fn(times.clone(), |t| t - 5.0).unwrap();
        assert!(rate_fit(&f, (0.0, 19.0), false).is_err());
        let f = SampledFunction::from_fn(times, |t| 1.0 + t).unwrap();
        assert!(rate_fit(&f, (0.0, 5.0), false).is_err());
    }

    #[test]
    fn log_growth_fit_recovers_coefficients() {
        let times: Vec<f64> = (0..50).map(|k| k as f64 * 4.0).collect();
        let f = SampledFunction::from_fn(times, |t| 0.3 + 0.2 * (2.0 + t).ln()).unwrap();
        let fit = log_growth_fit(&f, (0.0, 200.0)).unwrap();
        assert!((fit.a - 0.3).abs() < 1e-10 && (fit.b - 0.2).abs() < 1e-10);
        assert!(fit.residual < 1e-10);
    }

    proptest! {
        #[test]
        fn lp_norm_is_homogeneous(c in -5.0f64..5.0, p in 1.0f64..8.0, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = Grid::new(0.0, 1.0, 33).unwrap();
            let v = Field::new(g, (0..g.n()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let lhs = lp_norm(&v.scaled(c), p);
            let rhs = c.abs() * lp_norm(&v, p);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
        }
    }
}
