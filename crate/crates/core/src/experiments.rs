//! Monte Carlo ensembles and quadratures: rarefaction stability under
//! transport noise, the instability of the viscous shock, and the
//! Euler–Maruyama versus shift-scheme comparison.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::analysis::{
    energy_slices, log_growth_fit, lp_norm_slice, lp_power_slice, rate_fit, LogGrowthFit, RateFit, SampledFunction,
};
use crate::deterministic::{Field, Grid};
use crate::error::{invalid, Error, Result};
use crate::quadrature::PanelRule;
use crate::spde::{record_steps, run_with_path, sample_brownian, validate_record_times, NoiseParams, PathSpec, Scheme};
use crate::waves::{fan_value, riemann_step, ApproxRarefaction, RiemannData, ShockProfileParams};

/// Ensemble description shared by the Monte Carlo experiments. Path `k`
/// uses seed `base_seed + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub paths: usize,
    pub base_seed: u64,
    pub noise: NoiseParams,
    pub riemann: RiemannData,
    pub grid: Grid,
    pub dt: f64,
    pub t_end: f64,
    pub record_times: Vec<f64>,
    /// Norm exponents in `[2, ∞]`.
    pub p_list: Vec<f64>,
    pub epsilon: f64,
    /// Amplitude `a` of the initial perturbation `a exp(-x²)`.
    pub amplitude: f64,
    pub scheme: Scheme,
    /// Window of the decay fits; `None` means `[T/10, T]`.
    pub fit_window: Option<(f64, f64)>,
    /// Width of the band at each pinned end left out of the norms: the
    /// far-field states differ there from the truncated profile.
    pub boundary_margin: f64,
}

impl EnsembleConfig {
    /// Defaults: 64 paths, Euler–Maruyama, `ε = 0.05`, `p ∈ {2, 4, 6, ∞}`,
    /// amplitude `(u+ - u-)/2` and 80 geometric record times on `[1, T]`.
    pub fn new(noise: NoiseParams, riemann: RiemannData, grid: Grid, t_end: f64, dt: f64) -> Self {
        Self {
            paths: 64,
            base_seed: 0,
            noise,
            riemann,
            grid,
            dt,
            t_end,
            record_times: geometric_times(1.0, t_end, 80),
            p_list: vec![2.0, 4.0, 6.0, f64::INFINITY],
            epsilon: 0.05,
            amplitude: 0.5 * (riemann.u_plus() - riemann.u_minus()),
            scheme: Scheme::EulerMaruyama,
            fit_window: None,
            boundary_margin: 10.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths == 0 {
            return Err(invalid("ensemble needs at least one path"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("dt must be positive, got {}", self.dt)));
        }
        validate_record_times(&self.record_times, self.t_end)?;
        if self.record_times.is_empty() {
            return Err(invalid("ensemble needs at least one record time"));
        }
        if self.p_list.is_empty() || self.p_list.iter().any(|&p| !(p >= 2.0)) {
            return Err(invalid(format!("p_list must be a nonempty subset of [2, inf], got {:?}", self.p_list)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.25) {
            return Err(invalid(format!("epsilon must lie in (0, 1/4), got {}", self.epsilon)));
        }
        if !self.amplitude.is_finite() {
            return Err(invalid("perturbation amplitude must be finite"));
        }
        if !(self.boundary_margin >= 0.0 && 2.0 * self.boundary_margin < self.grid.x_max() - self.grid.x_min()) {
            return Err(invalid(format!(
                "boundary margin {} leaves no interior",
                self.boundary_margin
            )));
        }
        if let Some((lo, hi)) = self.fit_window {
            if !(lo < hi) {
                return Err(invalid(format!("fit window needs lo < hi, got ({lo}, {hi})")));
            }
        }
        Ok(())
    }

    pub fn seed(&self, k: usize) -> u64 {
        self.base_seed.wrapping_add(k as u64)
    }

    /// Node range `lo..hi` measured by the diagnostics.
    pub fn interior(&self) -> std::ops::Range<usize> {
        let m = ((self.boundary_margin / self.grid.dx()) * (1.0 - 1e-12)).ceil() as usize;
        m..self.grid.n() - m
    }

    pub fn fit_window(&self) -> (f64, f64) {
        self.fit_window.unwrap_or((0.1 * self.t_end, self.t_end))
    }

    fn spec(&self, scheme: Scheme, k: usize, dt: f64) -> PathSpec {
        PathSpec {
            noise: self.noise,
            riemann: self.riemann,
            scheme,
            t_end: self.t_end,
            dt,
            seed: self.seed(k),
        }
    }

    /// `ū(0, ·) + a exp(-x²)` on the configured grid.
    pub fn initial_field(&self) -> Result<Field> {
        let profile = ApproxRarefaction::new(self.riemann)?;
        Ok(self.initial_on(&profile, self.grid))
    }

    fn initial_on(&self, profile: &ApproxRarefaction, grid: Grid) -> Field {
        Field::from_fn(grid, |x| profile.initial(x) + self.amplitude * (-x * x).exp())
    }
}

/// `n` geometrically spaced times from `lo` to `hi` (just `[hi]` when
/// `hi <= lo`).
pub fn geometric_times(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if hi <= lo || n < 2 {
        return vec![hi.max(0.0)];
    }
    let mut t: Vec<f64> = (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect();
    t[n - 1] = hi;
    t
}

/// Sample mean and standard error per record time.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanSeries {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl MeanSeries {
    fn from_rows<'a>(rows: impl Iterator<Item = &'a [f64]> + Clone, len: usize) -> Self {
        let mut mean = Vec::with_capacity(len);
        let mut stderr = Vec::with_capacity(len);
        for j in 0..len {
            let (m, s) = mean_stderr(rows.clone().map(|r| r[j]));
            mean.push(m);
            stderr.push(s);
        }
        Self { mean, stderr }
    }
}

/// Mean and standard error (`n - 1` normalisation; zero for one sample).
pub fn mean_stderr(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// A [`MeanSeries`] for one norm exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct NormSeries {
    pub p: f64,
    pub series: MeanSeries,
}

/// Per-time ensemble statistics of a rarefaction-stability run.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    /// Step times actually recorded (first step at or after each request).
    pub times: Vec<f64>,
    pub samples: usize,
    /// Failed paths, each as [`Error::PathFailed`].
    pub failures: Vec<Error>,
    /// `‖u - u^r‖_p` per `p`.
    pub headline: Vec<NormSeries>,
    /// `‖φ‖_p = ‖u - ū‖_p` per `p`.
    pub internal: Vec<NormSeries>,
    /// `‖φ‖_p^p` per finite `p`.
    pub phi_power: Vec<NormSeries>,
    pub phi_l2_sq: MeanSeries,
    pub phi_x_l2_sq: MeanSeries,
    /// `∫ φ² ū_x`.
    pub phi_weighted_l2: MeanSeries,
    /// Per-path `max_t (2+t)^{1/4-ε} ‖φ(t)‖_∞`, in path order.
    pub as_statistic: Vec<f64>,
    /// The same statistic with `u - u^r` in place of `φ`.
    pub as_statistic_headline: Vec<f64>,
}

impl EnsembleStats {
    pub fn series(&self, values: &[f64]) -> Result<SampledFunction> {
        SampledFunction::new(self.times.clone(), values.to_vec())
    }

    fn norm(list: &[NormSeries], p: f64) -> Option<&MeanSeries> {
        list.iter().find(|s| s.p == p).map(|s| &s.series)
    }

    pub fn headline_norm(&self, p: f64) -> Option<&MeanSeries> {
        Self::norm(&self.headline, p)
    }

    pub fn internal_norm(&self, p: f64) -> Option<&MeanSeries> {
        Self::norm(&self.internal, p)
    }

    pub fn phi_power_norm(&self, p: f64) -> Option<&MeanSeries> {
        Self::norm(&self.phi_power, p)
    }
}

/// Statistics plus decay fits of the mean norms on the fit window.
#[derive(Debug, Clone, PartialEq)]
pub struct RarefactionReport {
    pub stats: EnsembleStats,
    /// Fit of mean `‖u - u^r‖_p`, in `p_list` order; `None` when the fit failed.
    pub headline_fits: Vec<(f64, Option<RateFit>)>,
    pub internal_fits: Vec<(f64, Option<RateFit>)>,
    /// Fit of `E‖φ‖²` against `a + b ln(2+t)`.
    pub energy_growth: Option<LogGrowthFit>,
}

impl RarefactionReport {
    /// `max` of `E‖φ‖_p^p (2+t)^{(p-2)/4} / ln^p(2+t)` over `t > T/2`
    /// divided by its `max` over `t <= T/2`.
    pub fn normalized_moment_ratio(&self, p: f64) -> Option<f64> {
        let m = self.stats.phi_power_norm(p)?;
        let t_end = *self.stats.times.last()?;
        let (mut first, mut second) = (0.0f64, 0.0f64);
        for (&t, &v) in self.stats.times.iter().zip(&m.mean) {
            let x = v * (2.0 + t).powf(0.25 * (p - 2.0)) / (2.0 + t).ln().powf(p);
            if t <= 0.5 * t_end {
                first = first.max(x);
            } else {
                second = second.max(x);
            }
        }
        (first > 0.0).then(|| second / first)
    }

    /// `|m2(M) / m2(M/2) - 1|` for the empirical second moment `m2` of the
    /// a.s. statistic over the first `M` paths.
    pub fn as_moment_drift(&self) -> Option<f64> {
        let s = &self.stats.as_statistic;
        let m = s.len();
        if m < 2 {
            return None;
        }
        let m2 = |k: usize| s[..k].iter().map(|v| v * v).sum::<f64>() / k as f64;
        let half = m2(m / 2);
        (half > 0.0).then(|| (m2(m) / half - 1.0).abs())
    }

    /// Power-law fit of `E‖φ‖²` on the fit window and its RMS residual in
    /// linear scale, for comparison with [`Self::energy_growth`].
    pub fn energy_power_fit(&self, window: (f64, f64)) -> Option<(RateFit, f64)> {
        let series = self.stats.series(&self.stats.phi_l2_sq.mean).ok()?;
        let fit = rate_fit(&series, window, false).ok()?;
        let resid: Vec<f64> = series
            .iter()
            .filter(|&(t, _)| t >= window.0 && t <= window.1)
            .map(|(t, v)| v - fit.constant * (2.0 + t).powf(fit.exponent))
            .collect();
        let rms = (resid.iter().map(|r| r * r).sum::<f64>() / resid.len() as f64).sqrt();
        Some((fit, rms))
    }

    pub fn headline_fit(&self, p: f64) -> Option<RateFit> {
        self.headline_fits.iter().find(|(q, _)| *q == p).and_then(|(_, f)| *f)
    }
}

/// `max_i (2+t_i)^{1/4-ε} norms_i`: the empirical a.s. constant of one path.
pub fn as_rate_statistic(times: &[f64], sup_norms: &[f64], epsilon: f64) -> Result<f64> {
    if times.len() != sup_norms.len() {
        return Err(invalid(format!("{} times but {} norms", times.len(), sup_norms.len())));
    }
    if times.len() < 20 {
        return Err(invalid(format!("a.s. statistic needs at least 20 record times, got {}", times.len())));
    }
    Ok(as_statistic_unchecked(times, sup_norms, epsilon))
}

fn as_statistic_unchecked(times: &[f64], sup_norms: &[f64], epsilon: f64) -> f64 {
    times
        .iter()
        .zip(sup_norms)
        .map(|(&t, &n)| (2.0 + t).powf(0.25 - epsilon) * n)
        .fold(0.0, f64::max)
}

/// Reference profiles at the recorded times.
struct References {
    steps: Vec<usize>,
    times: Vec<f64>,
    ubar: Vec<Vec<f64>>,
    slope: Vec<Vec<f64>>,
    fan: Vec<Vec<f64>>,
}

impl References {
    fn new(cfg: &EnsembleConfig, profile: &ApproxRarefaction, steps: usize, dt: f64) -> Result<Self> {
        let wanted = record_steps(&cfg.record_times, dt, steps);
        let times: Vec<f64> = wanted.iter().map(|&k| k as f64 * dt).collect();
        let grid = cfg.grid;
        let r = cfg.riemann;
        let evaluated: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = times
            .par_iter()
            .map(|&t| {
                let mut ubar = Vec::with_capacity(grid.n());
                let mut slope = Vec::with_capacity(grid.n());
                let mut fan = Vec::with_capacity(grid.n());
                for x in grid.nodes() {
                    let (v, s) = profile.evaluate(t, x)?;
                    ubar.push(v);
                    slope.push(s);
                    fan.push(if t > 0.0 { fan_value(&r, t, x) } else { riemann_step(&r, x) });
                }
                Ok((ubar, slope, fan))
            })
            .collect::<Result<_>>()?;
        let mut refs = Self {
            steps: wanted,
            times,
            ubar: Vec::new(),
            slope: Vec::new(),
            fan: Vec::new(),
        };
        for (u, s, f) in evaluated {
            refs.ubar.push(u);
            refs.slope.push(s);
            refs.fan.push(f);
        }
        Ok(refs)
    }
}

/// Per-path measurements, indexed `[p][time]` or `[time]`.
struct PathOutcome {
    headline: Vec<Vec<f64>>,
    internal: Vec<Vec<f64>>,
    power: Vec<Vec<f64>>,
    l2: Vec<f64>,
    h1: Vec<f64>,
    weighted: Vec<f64>,
    phi_sup: Vec<f64>,
    head_sup: Vec<f64>,
}

fn run_rarefaction_path(cfg: &EnsembleConfig, refs: &References, u0: &Field, k: usize) -> Result<PathOutcome> {
    let spec = cfg.spec(cfg.scheme, k, cfg.dt);
    let steps = spec.steps();
    let dt = spec.effective_dt();
    let path = sample_brownian(spec.seed, dt, steps)?;
    let dx = cfg.grid.dx();
    let np = cfg.p_list.len();
    let nt = refs.times.len();
    let mut out = PathOutcome {
        headline: vec![Vec::with_capacity(nt); np],
        internal: vec![Vec::with_capacity(nt); np],
        power: vec![Vec::with_capacity(nt); np],
        l2: Vec::with_capacity(nt),
        h1: Vec::with_capacity(nt),
        weighted: Vec::with_capacity(nt),
        phi_sup: Vec::with_capacity(nt),
        head_sup: Vec::with_capacity(nt),
    };
    let inner = cfg.interior();
    let mut phi = vec![0.0; inner.len()];
    let mut head = vec![0.0; inner.len()];
    let mut next = 0;
    run_with_path(u0, &spec, &path, |step, _, u| {
        while next < nt && refs.steps[next] == step {
            for (j, i) in inner.clone().enumerate() {
                phi[j] = u[i] - refs.ubar[next][i];
                head[j] = u[i] - refs.fan[next][i];
            }
            for (j, &p) in cfg.p_list.iter().enumerate() {
                out.headline[j].push(lp_norm_slice(&head, dx, p));
                out.internal[j].push(lp_norm_slice(&phi, dx, p));
                out.power[j].push(if p.is_finite() { lp_power_slice(&phi, dx, p) } else { f64::NAN });
            }
            let e = energy_slices(&phi, &refs.slope[next][inner.clone()], dx);
            out.l2.push(e.l2_sq);
            out.h1.push(e.h1_seed);
            out.weighted.push(e.weighted_l2);
            out.phi_sup.push(lp_norm_slice(&phi, dx, f64::INFINITY));
            out.head_sup.push(lp_norm_slice(&head, dx, f64::INFINITY));
            next += 1;
        }
        Ok(())
    })?;
    Ok(out)
}

/// Split per-path results into successes and failures; fail the experiment
/// when more than 1% of the paths failed.
fn partition_outcomes<T>(cfg: &EnsembleConfig, results: Vec<Result<T>>) -> Result<(Vec<T>, Vec<Error>)> {
    let total = results.len();
    let mut ok = Vec::with_capacity(total);
    let mut failures = Vec::new();
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => failures.push(Error::PathFailed {
                seed: cfg.seed(k),
                source: Box::new(e),
            }),
        }
    }
    if failures.len() * 100 > total || ok.is_empty() {
        let failed = failures.len();
        return Err(Error::TooManyFailures {
            failed,
            total,
            first: Box::new(failures.swap_remove(0)),
        });
    }
    Ok((ok, failures))
}

/// Ensemble run from `ū(0, ·) + a exp(-x²)`: per-time statistics of
/// `‖u - u^r‖_p`, `‖φ‖_p`, `‖φ‖_p^p`, `‖φ‖²`, `‖φ_x‖²` and the per-path
/// a.s. statistic, plus decay fits on the fit window.
pub fn rarefaction_stability(cfg: &EnsembleConfig) -> Result<RarefactionReport> {
    cfg.validate()?;
    cfg.riemann.require_rarefaction()?;
    let profile = ApproxRarefaction::new(cfg.riemann)?;
    let u0 = cfg.initial_field()?;
    let probe = cfg.spec(cfg.scheme, 0, cfg.dt);
    let refs = References::new(cfg, &profile, probe.steps(), probe.effective_dt())?;

    let results: Vec<Result<PathOutcome>> = (0..cfg.paths)
        .into_par_iter()
        .map(|k| run_rarefaction_path(cfg, &refs, &u0, k))
        .collect();
    let (outcomes, failures) = partition_outcomes(cfg, results)?;

    let nt = refs.times.len();
    let by_p = |pick: fn(&PathOutcome) -> &Vec<Vec<f64>>, finite_only: bool| -> Vec<NormSeries> {
        cfg.p_list
            .iter()
            .enumerate()
            .filter(|(_, p)| !finite_only || p.is_finite())
            .map(|(j, &p)| NormSeries {
                p,
                series: MeanSeries::from_rows(outcomes.iter().map(|o| pick(o)[j].as_slice()), nt),
            })
            .collect()
    };
    let stats = EnsembleStats {
        times: refs.times.clone(),
        samples: outcomes.len(),
        headline: by_p(|o| &o.headline, false),
        internal: by_p(|o| &o.internal, false),
        phi_power: by_p(|o| &o.power, true),
        phi_l2_sq: MeanSeries::from_rows(outcomes.iter().map(|o| o.l2.as_slice()), nt),
        phi_x_l2_sq: MeanSeries::from_rows(outcomes.iter().map(|o| o.h1.as_slice()), nt),
        phi_weighted_l2: MeanSeries::from_rows(outcomes.iter().map(|o| o.weighted.as_slice()), nt),
        as_statistic: outcomes
            .iter()
            .map(|o| as_statistic_unchecked(&refs.times, &o.phi_sup, cfg.epsilon))
            .collect(),
        as_statistic_headline: outcomes
            .iter()
            .map(|o| as_statistic_unchecked(&refs.times, &o.head_sup, cfg.epsilon))
            .collect(),
        failures,
    };

    let window = cfg.fit_window();
    let fits = |list: &[NormSeries]| -> Vec<(f64, Option<RateFit>)> {
        list.iter()
            .map(|s| {
                let fit = stats
                    .series(&s.series.mean)
                    .and_then(|f| rate_fit(&f, window, false))
                    .ok();
                (s.p, fit)
            })
            .collect()
    };
    let headline_fits = fits(&stats.headline);
    let internal_fits = fits(&stats.internal);
    let energy_growth = stats
        .series(&stats.phi_l2_sq.mean)
        .and_then(|f| log_growth_fit(&f, window))
        .ok();
    Ok(RarefactionReport {
        stats,
        headline_fits,
        internal_fits,
        energy_growth,
    })
}

const SHOCK_Z_MAX: f64 = 12.0;

/// Panel breakpoints on `[0, z_max]`: geometric from `1e-8` to 1 (resolving
/// the tanh front at every `t`), then uniform.
fn shock_breaks() -> Vec<f64> {
    let mut b = vec![0.0];
    let mut z = 1e-8;
    while z < 1.0 {
        b.push(z);
        z *= 2.0;
    }
    b.extend((1..=(4.0 * SHOCK_Z_MAX) as usize).map(|k| 0.25 * k as f64));
    b
}

/// `d(t) = E sup_x |ũ(x) - ũ(x + σB(t))| = 2∫_0^∞ S(σ√t z) φ(z) dz` with
/// `S(a) = 2u tanh(u|a|/(4ν))`, by composite Gauss–Legendre panels of order
/// `quad_nodes` on fixed breakpoints (so `d` is exactly monotone in `t`).
pub fn shock_instability_quadrature(
    p: &ShockProfileParams,
    sigma: f64,
    times: &[f64],
    quad_nodes: usize,
) -> Result<SampledFunction> {
    check_shock_inputs(p, sigma, times)?;
    if quad_nodes < 64 {
        return Err(invalid(format!("quadrature needs at least 64 nodes per panel, got {quad_nodes}")));
    }
    // Gaussian tail beyond z_max, relative to the limit u- - u+
    let tail = (-0.5 * SHOCK_Z_MAX * SHOCK_Z_MAX).exp() / SHOCK_Z_MAX;
    if tail > 1e-12 {
        return Err(Error::Quadrature(format!("tail truncation {tail:e} exceeds 1e-12")));
    }
    let rule = PanelRule::new(quad_nodes);
    let breaks = shock_breaks();
    let norm = (2.0 * std::f64::consts::PI).sqrt().recip();
    let values = times
        .iter()
        .map(|&t| {
            let scale = sigma * t.sqrt();
            2.0 * rule.integrate_panels(&breaks, |z| p.sup_displacement(scale * z) * norm * (-0.5 * z * z).exp())
        })
        .collect();
    SampledFunction::new(times.to_vec(), values)
}

fn check_shock_inputs(p: &ShockProfileParams, sigma: f64, times: &[f64]) -> Result<()> {
    if p.c() != 1.0 {
        return Err(invalid(format!("closed-form sup displacement needs c = 1, got {}", p.c())));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("sigma must be finite and nonnegative, got {sigma}")));
    }
    if times.is_empty() {
        return Err(invalid("need at least one time"));
    }
    Ok(())
}

/// Monte Carlo estimate of `d(t)` with its standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloEstimate {
    pub d: SampledFunction,
    pub stderr: Vec<f64>,
    pub paths: usize,
}

/// `d(t)` by sampling `B(t) = √t Z_k`, one standard normal per path drawn
/// from seed `base_seed + k`, shared across times.
pub fn shock_instability_monte_carlo(
    p: &ShockProfileParams,
    sigma: f64,
    times: &[f64],
    paths: usize,
    base_seed: u64,
) -> Result<MonteCarloEstimate> {
    check_shock_inputs(p, sigma, times)?;
    if paths < 2 {
        return Err(invalid(format!("Monte Carlo needs at least 2 paths, got {paths}")));
    }
    let normals: Vec<f64> = (0..paths)
        .map(|k| StandardNormal.sample(&mut ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(k as u64))))
        .collect();
    let (mean, stderr): (Vec<f64>, Vec<f64>) = times
        .iter()
        .map(|&t| {
            let scale = sigma * t.sqrt();
            mean_stderr(normals.iter().map(|&z| p.sup_displacement(scale * z)))
        })
        .unzip();
    Ok(MonteCarloEstimate {
        d: SampledFunction::new(times.to_vec(), mean)?,
        stderr,
        paths,
    })
}

/// Mean and variance of `u(T, x)` at one probe point for one scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeMoments {
    pub mean: f64,
    pub mean_stderr: f64,
    pub variance: f64,
    pub variance_stderr: f64,
}

impl ProbeMoments {
    fn from_samples(v: &[f64]) -> Self {
        let n = v.len() as f64;
        let (mean, mean_stderr) = mean_stderr(v.iter().copied());
        let variance = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let m4 = v.iter().map(|a| (a - mean).powi(4)).sum::<f64>() / n;
        let variance_stderr = ((m4 - variance * variance).max(0.0) / n).sqrt();
        Self {
            mean,
            mean_stderr,
            variance,
            variance_stderr,
        }
    }
}

/// Distributional comparison of the two schemes at one probe point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeComparison {
    pub x: f64,
    pub em: ProbeMoments,
    pub shift: ProbeMoments,
}

impl ProbeComparison {
    /// `|Δmean| / sqrt(se_em² + se_shift²)`.
    pub fn mean_z(&self) -> f64 {
        z_score(self.em.mean - self.shift.mean, self.em.mean_stderr, self.shift.mean_stderr)
    }

    pub fn variance_z(&self) -> f64 {
        z_score(
            self.em.variance - self.shift.variance,
            self.em.variance_stderr,
            self.shift.variance_stderr,
        )
    }
}

fn z_score(diff: f64, a: f64, b: f64) -> f64 {
    let se = a.hypot(b);
    if se == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff.abs() / se
    }
}

/// One refinement level of the scheme comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct GapLevel {
    pub grid: Grid,
    pub dt: f64,
    /// Per record time: mean and stderr over paths of `‖u_em - u_shift‖_{L²}`.
    pub gap: MeanSeries,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidationReport {
    pub times: Vec<f64>,
    pub levels: Vec<GapLevel>,
    /// `log2(gap_l / gap_{l+1})` of the final-time mean gap; `None` when a
    /// gap vanishes.
    pub slopes: Vec<Option<f64>>,
    /// Probe comparison at the finest level and final time.
    pub probes: Vec<ProbeComparison>,
    pub samples: usize,
    pub failures: Vec<Error>,
}

impl CrossValidationReport {
    pub fn min_slope(&self) -> Option<f64> {
        self.slopes.iter().try_fold(f64::INFINITY, |m, s| s.map(|s| m.min(s)))
    }
}

/// Number of grid halvings in [`scheme_cross_validation`].
pub const CROSS_VALIDATION_HALVINGS: usize = 2;

struct PairOutcome {
    /// `[level][time]`
    gaps: Vec<Vec<f64>>,
    em_probe: Vec<f64>,
    shift_probe: Vec<f64>,
}

fn linear_probe(u: &[f64], grid: &Grid, x: f64) -> f64 {
    let s = ((x - grid.x_min()) / grid.dx()).clamp(0.0, (grid.n() - 1) as f64);
    let i = (s.floor() as usize).min(grid.n() - 2);
    let f = s - i as f64;
    u[i] * (1.0 - f) + u[i + 1] * f
}

/// Matched-seed Euler–Maruyama and shift trajectories on nested Brownian
/// paths over `CROSS_VALIDATION_HALVINGS + 1` levels, each halving `dx` and
/// quartering `dt`.
pub fn scheme_cross_validation(cfg: &EnsembleConfig) -> Result<CrossValidationReport> {
    cfg.validate()?;
    let profile = ApproxRarefaction::new(cfg.riemann)?;
    let levels = CROSS_VALIDATION_HALVINGS + 1;
    let mut grids = vec![cfg.grid];
    for l in 1..levels {
        grids.push(grids[l - 1].refined());
    }
    let base = cfg.spec(Scheme::EulerMaruyama, 0, cfg.dt);
    let base_steps = base.steps();
    let base_dt = base.effective_dt();
    let factor = |l: usize| 4usize.pow(l as u32);
    let finest = levels - 1;
    let level_dt: Vec<f64> = (0..levels).map(|l| base_dt / factor(l) as f64).collect();
    let level_steps: Vec<Vec<usize>> = (0..levels)
        .map(|l| record_steps(&cfg.record_times, level_dt[l], base_steps * factor(l)))
        .collect();
    let times: Vec<f64> = level_steps[0].iter().map(|&k| k as f64 * level_dt[0]).collect();
    let initials: Vec<Field> = grids.iter().map(|&g| cfg.initial_on(&profile, g)).collect();
    let span = (cfg.riemann.max_speed() * cfg.t_end).max(1.0);
    let probe_x: Vec<f64> = [-1.0, -0.5, 0.0, 0.5, 1.0].iter().map(|f| f * span).collect();

    let run_pair = |k: usize| -> Result<PairOutcome> {
        let fine_path = sample_brownian(cfg.seed(k), level_dt[finest], base_steps * factor(finest))?;
        let mut gaps = Vec::with_capacity(levels);
        let mut finals = (Vec::new(), Vec::new());
        for l in 0..levels {
            let path = fine_path.coarsen(factor(finest - l))?;
            let grid = grids[l];
            let mut snaps = [Vec::new(), Vec::new()];
            for (s, scheme) in [Scheme::EulerMaruyama, Scheme::Shift].into_iter().enumerate() {
                let spec = cfg.spec(scheme, k, level_dt[l]);
                let wanted = &level_steps[l];
                let mut next = 0;
                let last = run_with_path(&initials[l], &spec, &path, |step, _, u| {
                    while next < wanted.len() && wanted[next] == step {
                        snaps[s].push(u.to_vec());
                        next += 1;
                    }
                    Ok(())
                })?;
                if l == finest {
                    if s == 0 {
                        finals.0 = last;
                    } else {
                        finals.1 = last;
                    }
                }
            }
            gaps.push(
                snaps[0]
                    .iter()
                    .zip(&snaps[1])
                    .map(|(a, b)| {
                        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                        lp_norm_slice(&d, grid.dx(), 2.0)
                    })
                    .collect(),
            );
        }
        Ok(PairOutcome {
            gaps,
            em_probe: probe_x.iter().map(|&x| linear_probe(&finals.0, &grids[finest], x)).collect(),
            shift_probe: probe_x.iter().map(|&x| linear_probe(&finals.1, &grids[finest], x)).collect(),
        })
    };
    let results: Vec<Result<PairOutcome>> = (0..cfg.paths).into_par_iter().map(run_pair).collect();
    let (outcomes, failures) = partition_outcomes(cfg, results)?;

    let nt = times.len();
    let level_reports: Vec<GapLevel> = (0..levels)
        .map(|l| GapLevel {
            grid: grids[l],
            dt: level_dt[l],
            gap: MeanSeries::from_rows(outcomes.iter().map(|o| o.gaps[l].as_slice()), nt),
        })
        .collect();
    let slopes = level_reports
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0].gap.mean[nt - 1], w[1].gap.mean[nt - 1]);
            (a > 0.0 && b > 0.0).then(|| (a / b).log2())
        })
        .collect();
    let probes = probe_x
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            let em: Vec<f64> = outcomes.iter().map(|o| o.em_probe[j]).collect();
            let sh: Vec<f64> = outcomes.iter().map(|o| o.shift_probe[j]).collect();
            ProbeComparison {
                x,
                em: ProbeMoments::from_samples(&em),
                shift: ProbeMoments::from_samples(&sh),
            }
        })
        .collect();
    Ok(CrossValidationReport {
        times,
        levels: level_reports,
        slopes,
        probes,
        samples: outcomes.len(),
        failures,
    })
}
