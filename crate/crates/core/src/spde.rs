//! Pathwise simulation of `du + u u_x dt = μ u_xx dt + σ u_x dB(t)`.
//!
//! Two schemes share the Brownian path:
//!
//! * [`em_step`]: Itô Euler–Maruyama, with the noise term `σ u_x dB` in
//!   central differences next to the explicit convection and full `μ`
//!   diffusion.
//! * [`shift_step`]: a deterministic viscous step with `ν = μ - σ²/2`
//!   followed by a translation of the field by `σ dB`. If `v` solves the
//!   deterministic equation then `v(t, x + σB(t))` solves the stochastic one.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::deterministic::{advective_dt_limit, blowup_bound, check_blowup, Field, Grid, SplitStepper};
use crate::error::{invalid, Error, Result};
use crate::waves::RiemannData;

/// Brownian increments on a uniform time mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    dt: f64,
    increments: Vec<f64>,
    seed: u64,
}

impl BrownianPath {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn steps(&self) -> usize {
        self.increments.len()
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.increments.len() as f64
    }

    /// `B(t_k)` for `k = 0..=steps`.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut b = Vec::with_capacity(self.increments.len() + 1);
        b.push(0.0);
        let mut acc = 0.0;
        for db in &self.increments {
            acc += db;
            b.push(acc);
        }
        b
    }

    pub fn quadratic_variation(&self) -> f64 {
        self.increments.iter().map(|d| d * d).sum()
    }

    /// The same path on a mesh `factor` times coarser (increments summed).
    pub fn coarsen(&self, factor: usize) -> Result<BrownianPath> {
        if factor == 0 || !self.increments.len().is_multiple_of(factor) {
            return Err(invalid(format!(
                "cannot coarsen {} steps by a factor of {factor}",
                self.increments.len()
            )));
        }
        Ok(BrownianPath {
            dt: self.dt * factor as f64,
            increments: self.increments.chunks(factor).map(|c| c.iter().sum()).collect(),
            seed: self.seed,
        })
    }
}

/// I.i.d. `N(0, dt)` increments from a ChaCha8 stream keyed by `seed`.
pub fn sample_brownian(seed: u64, dt: f64, steps: usize) -> Result<BrownianPath> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid(format!("Brownian dt must be positive, got {dt}")));
    }
    if steps == 0 {
        return Err(invalid("Brownian path needs at least one step"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = dt.sqrt();
    let increments = (0..steps)
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Ok(BrownianPath { dt, increments, seed })
}

/// Diffusion `μ` and noise strength `σ`, with `σ² < 2μ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    mu: f64,
    sigma: f64,
}

impl NoiseParams {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(invalid(format!("mu must be positive, got {mu}")));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(invalid(format!("sigma must be nonnegative, got {sigma}")));
        }
        if !(sigma * sigma < 2.0 * mu) {
            return Err(Error::Constraint {
                rule: "sigma^2 < 2*mu",
                detail: format!("sigma^2 = {} but 2*mu = {}", sigma * sigma, 2.0 * mu),
            });
        }
        Ok(Self { mu, sigma })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Deterministic viscosity `ν = μ - σ²/2`.
    pub fn nu_eff(&self) -> f64 {
        self.mu - 0.5 * self.sigma * self.sigma
    }

    /// Largest Euler–Maruyama step, `(dx / 3σ)²`, for mesh width `dx`.
    pub fn noise_dt_limit(&self, dx: f64) -> f64 {
        if self.sigma == 0.0 {
            f64::INFINITY
        } else {
            (dx / (3.0 * self.sigma)).powi(2)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    EulerMaruyama,
    Shift,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::EulerMaruyama => "euler_maruyama",
            Scheme::Shift => "shift",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler_maruyama" | "em" => Ok(Scheme::EulerMaruyama),
            "shift" => Ok(Scheme::Shift),
            other => Err(invalid(format!("unknown scheme '{other}' (expected euler_maruyama or shift)"))),
        }
    }
}

/// Radius of the H¹ ball used by [`cutoff_project`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffParam {
    m: f64,
}

impl CutoffParam {
    pub fn new(m: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(invalid(format!("cut-off radius must be positive, got {m}")));
        }
        Ok(Self { m })
    }

    pub fn m(&self) -> f64 {
        self.m
    }
}

/// `(Σ (v_i² + ((v_{i+1} - v_i)/dx)²) dx)^{1/2}`; the last node has no
/// forward difference and contributes `v_{n-1}²` only.
pub fn discrete_h1_norm(v: &Field) -> f64 {
    let dx = v.grid().dx();
    let u = v.values();
    let mut s: f64 = u.iter().map(|a| a * a).sum();
    s += u.windows(2).map(|w| ((w[1] - w[0]) / dx).powi(2)).sum::<f64>();
    (s * dx).sqrt()
}

/// Radial projection onto the H¹ ball of radius `m`.
pub fn cutoff_project(v: &Field, m: CutoffParam) -> Field {
    let norm = discrete_h1_norm(v);
    if norm <= m.m() || norm == 0.0 {
        v.clone()
    } else {
        v.scaled(m.m() / norm)
    }
}

fn check_step(u: &Field, dt: f64) -> Result<()> {
    if !(dt > 0.0) {
        return Err(invalid(format!("dt must be positive, got {dt}")));
    }
    let limit = advective_dt_limit(u);
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::StepTooLarge { dt, limit });
    }
    Ok(())
}

/// One Itô Euler–Maruyama step.
pub fn em_step(u: &Field, noise: NoiseParams, db: f64, dt: f64) -> Result<Field> {
    check_step(u, dt)?;
    let limit = noise.noise_dt_limit(u.grid().dx());
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::StepTooLarge { dt, limit });
    }
    let mut out = u.values().to_vec();
    let n = out.len();
    let bound = blowup_bound(out[0], out[n - 1]);
    SplitStepper::new(u.grid()).step(&mut out, u.grid().dx(), dt, noise.mu(), noise.sigma() * db);
    check_blowup(&out, bound, dt)?;
    Field::new(*u.grid(), out)
}

/// One step of the shift representation.
pub fn shift_step(u: &Field, noise: NoiseParams, db: f64, dt: f64) -> Result<Field> {
    check_step(u, dt)?;
    let mut out = u.values().to_vec();
    let n = out.len();
    let bound = blowup_bound(out[0], out[n - 1]);
    let mut scratch = vec![0.0; n];
    SplitStepper::new(u.grid()).step(&mut out, u.grid().dx(), dt, noise.nu_eff(), 0.0);
    shift_into(&out, u.grid(), noise.sigma() * db, &mut scratch);
    check_blowup(&scratch, bound, dt)?;
    Field::new(*u.grid(), scratch)
}

/// `out(x_i) = u(x_i + shift)` by 4-point Lagrange interpolation, with
/// constant extension beyond the ends.
///
/// The interpolant is clamped to the range of the two bracketing nodes,
/// widened by `min(|Δ²u|)/8` when both neighbouring second differences have
/// the same sign, so that smooth extrema are not flattened.
pub fn shift_into(u: &[f64], grid: &Grid, shift: f64, out: &mut [f64]) {
    let n = u.len();
    let dx = grid.dx();
    let s = shift / dx;
    let base = s.floor();
    let frac = s - base;
    let base = base as i64;
    let at = |j: i64| -> f64 {
        if j < 0 {
            u[0]
        } else if j as usize >= n {
            u[n - 1]
        } else {
            u[j as usize]
        }
    };
    // Lagrange weights on offsets -1, 0, 1, 2
    let f = frac;
    let w = [
        -f * (f - 1.0) * (f - 2.0) / 6.0,
        (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0,
        -(f + 1.0) * f * (f - 2.0) / 2.0,
        (f + 1.0) * f * (f - 1.0) / 6.0,
    ];
    for (i, o) in out.iter_mut().enumerate() {
        let j = i as i64 + base;
        let p = [at(j - 1), at(j), at(j + 1), at(j + 2)];
        if frac == 0.0 {
            *o = p[1];
            continue;
        }
        let v = w[0] * p[0] + w[1] * p[1] + w[2] * p[2] + w[3] * p[3];
        // smooth extrema keep their curvature-sized overshoot; jumps are clamped
        let (c0, c1) = (p[0] - 2.0 * p[1] + p[2], p[1] - 2.0 * p[2] + p[3]);
        let slack = if c0 * c1 > 0.0 { c0.abs().min(c1.abs()) / 8.0 } else { 0.0 };
        let (lo, hi) = if p[1] < p[2] { (p[1], p[2]) } else { (p[2], p[1]) };
        *o = v.clamp(lo - slack, hi + slack);
    }
    // boundary nodes stay pinned to the far-field states
    out[0] = u[0];
    out[n - 1] = u[n - 1];
}

/// One recorded state of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// Step time at which the state was recorded.
    pub time: f64,
    /// Requested record time.
    pub requested: f64,
    pub field: Field,
}

/// Everything [`simulate_path`] needs besides the initial field.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSpec {
    pub noise: NoiseParams,
    pub riemann: RiemannData,
    pub scheme: Scheme,
    pub t_end: f64,
    pub dt: f64,
    pub seed: u64,
}

impl PathSpec {
    /// Number of steps; `dt` is reduced so that `t_end` is a whole number of steps.
    pub fn steps(&self) -> usize {
        if self.t_end == 0.0 {
            0
        } else {
            (self.t_end / self.dt * (1.0 - 1e-12)).ceil() as usize
        }
    }

    pub fn effective_dt(&self) -> f64 {
        match self.steps() {
            0 => self.dt,
            k => self.t_end / k as f64,
        }
    }
}

/// Run a trajectory on an explicit Brownian path, calling `observe(k, time,
/// values)` after every step `k` (and once for `k = 0`). Boundary nodes are
/// pinned to the Riemann states.
pub fn run_with_path<F>(u0: &Field, spec: &PathSpec, path: &BrownianPath, mut observe: F) -> Result<Vec<f64>>
where
    F: FnMut(usize, f64, &[f64]) -> Result<()>,
{
    let grid = *u0.grid();
    let dt = path.dt();
    let n = grid.n();
    let mut u = u0.values().to_vec();
    u[0] = spec.riemann.u_minus();
    u[n - 1] = spec.riemann.u_plus();
    let bound = blowup_bound(u[0], u[n - 1]).max(2.0 * u0.max_abs() + 1.0);
    let noise = spec.noise;
    let adv_limit = 0.4 * grid.dx() / u.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    if dt > adv_limit * (1.0 + 1e-12) {
        return Err(Error::StepTooLarge { dt, limit: adv_limit });
    }
    if spec.scheme == Scheme::EulerMaruyama {
        let limit = noise.noise_dt_limit(grid.dx());
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::StepTooLarge { dt, limit });
        }
    }
    let mut stepper = SplitStepper::new(&grid);
    let mut scratch = vec![0.0; n];
    observe(0, 0.0, &u)?;
    for (k, &db) in path.increments().iter().enumerate() {
        let time = (k + 1) as f64 * dt;
        match spec.scheme {
            Scheme::EulerMaruyama => {
                stepper.step(&mut u, grid.dx(), dt, noise.mu(), noise.sigma() * db);
            }
            Scheme::Shift => {
                stepper.step(&mut u, grid.dx(), dt, noise.nu_eff(), 0.0);
                if noise.sigma() != 0.0 {
                    shift_into(&u, &grid, noise.sigma() * db, &mut scratch);
                    std::mem::swap(&mut u, &mut scratch);
                }
            }
        }
        check_blowup(&u, bound, time)?;
        observe(k + 1, time, &u)?;
    }
    Ok(u)
}

/// Step indices (on a mesh of `dt`) at which `record_times` are captured:
/// the first step time at or after each request.
pub fn record_steps(record_times: &[f64], dt: f64, steps: usize) -> Vec<usize> {
    record_times
        .iter()
        .map(|&t| ((t / dt * (1.0 - 1e-12)).ceil() as usize).min(steps))
        .collect()
}

/// Simulate one trajectory from `u0` and return snapshots at `record_times`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_path(
    u0: &Field,
    noise: NoiseParams,
    riemann: RiemannData,
    scheme: Scheme,
    t_end: f64,
    dt: f64,
    seed: u64,
    record_times: &[f64],
) -> Result<Vec<Snapshot>> {
    let spec = PathSpec {
        noise,
        riemann,
        scheme,
        t_end,
        dt,
        seed,
    };
    simulate(u0, &spec, record_times)
}

pub fn simulate(u0: &Field, spec: &PathSpec, record_times: &[f64]) -> Result<Vec<Snapshot>> {
    validate_record_times(record_times, spec.t_end)?;
    if !(spec.dt > 0.0) {
        return Err(invalid(format!("dt must be positive, got {}", spec.dt)));
    }
    if spec.t_end == 0.0 {
        return Ok(record_times
            .iter()
            .map(|&t| Snapshot {
                time: 0.0,
                requested: t,
                field: u0.clone(),
            })
            .collect());
    }
    let steps = spec.steps();
    let dt = spec.effective_dt();
    let path = sample_brownian(spec.seed, dt, steps)?;
    let wanted = record_steps(record_times, dt, steps);
    let mut out = Vec::with_capacity(record_times.len());
    let grid = *u0.grid();
    run_with_path(u0, spec, &path, |k, time, u| {
        for (j, &s) in wanted.iter().enumerate() {
            if s == k {
                out.push(Snapshot {
                    time,
                    requested: record_times[j],
                    field: Field::new(grid, u.to_vec())?,
                });
            }
        }
        Ok(())
    })?;
    Ok(out)
}

pub(crate) fn validate_record_times(record_times: &[f64], t_end: f64) -> Result<()> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(invalid(format!("horizon must be finite and nonnegative, got {t_end}")));
    }
    if record_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("record times must be sorted"));
    }
    if record_times.iter().any(|&t| !(0.0..=t_end).contains(&t)) {
        return Err(invalid(format!("record times must lie in [0, {t_end}]")));
    }
    Ok(())
}
