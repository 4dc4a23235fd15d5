//! Deterministic viscous Burgers equation `u_t + u u_x = ν u_xx`.
//!
//! Two independent solvers are provided so that each can check the other:
//! [`cole_hopf_solve`] evaluates the exact Cole–Hopf representation by
//! quadrature, and [`fd_viscous_solve`] marches a conservative
//! finite-difference scheme (explicit local Lax–Friedrichs convection,
//! Crank–Nicolson diffusion) on a truncated domain.

use crate::error::{invalid, Error, Result};
use crate::quadrature::PanelRule;
use crate::waves::{ApproxRarefaction, ShockProfileParams};

/// Uniform mesh on `[x_min, x_max]` with `n` nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n: usize,
    dx: f64,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(invalid(format!("grid needs x_min < x_max, got [{x_min}, {x_max}]")));
        }
        if n < 3 {
            return Err(invalid(format!("grid needs at least 3 nodes, got {n}")));
        }
        Ok(Self {
            x_min,
            x_max,
            n,
            dx: (x_max - x_min) / (n - 1) as f64,
        })
    }

    /// `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, n: usize) -> Result<Self> {
        Self::new(-half_width, half_width, n)
    }

    /// Same interval with `dx` halved (`2n - 1` nodes).
    pub fn refined(&self) -> Self {
        Self::new(self.x_min, self.x_max, 2 * self.n - 1).expect("refining a valid grid")
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.x(i))
    }
}

/// Domain half-width that keeps the far-field boundaries out of reach of
/// waves moving at speed at most `max_speed` up to `t_end`.
pub fn padded_half_width(max_speed: f64, t_end: f64) -> f64 {
    max_speed * t_end + 20.0
}

/// Real values sampled on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(invalid(format!(
                "field has {} values for a grid of {} nodes",
                values.len(),
                grid.n()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite field value at node {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().map(f).collect();
        Self { grid, values }
    }

    pub fn try_from_fn(grid: Grid, f: impl Fn(f64) -> Result<f64>) -> Result<Self> {
        let values = grid.nodes().map(f).collect::<Result<Vec<_>>>()?;
        Self::new(grid, values)
    }

    pub fn constant(grid: Grid, a: f64) -> Self {
        Self {
            grid,
            values: vec![a; grid.n()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Field {
            grid: self.grid,
            values,
        })
    }

    pub fn scaled(&self, c: f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViscousParams {
    nu: f64,
}

impl ViscousParams {
    pub fn new(nu: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(invalid(format!("viscosity must be positive, got {nu}")));
        }
        Ok(Self { nu })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }
}

/// Bounded initial data with a closed-form primitive, as needed by the
/// Cole–Hopf representation.
pub trait InitialProfile {
    fn value(&self, x: f64) -> f64;

    /// `∫_0^y u_0(s) ds`.
    fn primitive(&self, y: f64) -> f64;

    /// `sup |u_0|`.
    fn bound(&self) -> f64;
}

impl InitialProfile for ApproxRarefaction {
    fn value(&self, x: f64) -> f64 {
        self.initial(x)
    }

    fn primitive(&self, y: f64) -> f64 {
        self.initial_primitive(y)
    }

    fn bound(&self) -> f64 {
        self.riemann().max_speed()
    }
}

impl InitialProfile for ShockProfileParams {
    fn value(&self, x: f64) -> f64 {
        ShockProfileParams::value(self, x)
    }

    fn primitive(&self, y: f64) -> f64 {
        ShockProfileParams::primitive(self, y)
    }

    fn bound(&self) -> f64 {
        self.u_minus()
    }
}

/// Constant initial data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantProfile(pub f64);

impl InitialProfile for ConstantProfile {
    fn value(&self, _x: f64) -> f64 {
        self.0
    }

    fn primitive(&self, y: f64) -> f64 {
        self.0 * y
    }

    fn bound(&self) -> f64 {
        self.0.abs()
    }
}

const CH_PANEL_ORDER: usize = 16;
const CH_MIN_PANELS: usize = 16;
const CH_TOL: f64 = 1e-10;
// integrand is dropped where it is below exp(-CH_CUT) of its peak
const CH_CUT: f64 = 60.0;

/// Cole–Hopf evaluation of the viscous Burgers solution at `(t, x)`:
///
/// ```text
/// u(t,x) = ∫ (x-y)/t K dy / ∫ K dy,   K = exp(-(x-y)²/(4νt) - Φ(y)/(2ν)),
/// ```
///
/// with `Φ` the primitive of the initial data. The exponent is maximised on a
/// scan around the characteristic cone, the integration window is cut where
/// `K` drops below `e^{-60}` of its peak, and composite Gauss–Legendre panels
/// are doubled until the value changes by less than `1e-10`.
pub fn cole_hopf_solve<P: InitialProfile + ?Sized>(initial: &P, nu: f64, t: f64, x: f64) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(invalid(format!("viscosity must be positive, got {nu}")));
    }
    if !(t > 0.0) {
        return Err(invalid(format!("Cole-Hopf evaluation needs t > 0, got {t}")));
    }
    let exponent = |y: f64| -(x - y) * (x - y) / (4.0 * nu * t) - initial.primitive(y) / (2.0 * nu);
    let width = (4.0 * nu * t).sqrt();
    let reach = t * initial.bound();
    let h = (width.min(2.0 * nu / initial.bound().max(1e-12))) / 4.0;

    // scan the characteristic cone for the peak of the exponent
    let lo = x - reach - 8.0 * width;
    let hi = x + reach + 8.0 * width;
    let steps = (((hi - lo) / h).ceil() as usize).clamp(64, 2_000_000);
    let dy = (hi - lo) / steps as f64;
    let scan: Vec<f64> = (0..=steps).map(|k| exponent(lo + k as f64 * dy)).collect();
    let (arg, mut peak) = scan
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(i, m), (k, &e)| if e > m { (k, e) } else { (i, m) });
    {
        let (mut a, mut b) = (lo + (arg as f64 - 1.0) * dy, lo + (arg as f64 + 1.0) * dy);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if exponent(c) > exponent(d) {
                b = d;
            } else {
                a = c;
            }
        }
        peak = peak.max(exponent(0.5 * (a + b)));
    }
    // window where the integrand is above e^{-CH_CUT} of its peak
    let first = scan.iter().position(|&e| e > peak - CH_CUT).unwrap_or(arg);
    let last = scan.iter().rposition(|&e| e > peak - CH_CUT).unwrap_or(arg);
    let mut a = lo + first.saturating_sub(1) as f64 * dy;
    let mut b = lo + (last + 1) as f64 * dy;
    let mut guard = 0;
    while exponent(a) > peak - CH_CUT || exponent(b) > peak - CH_CUT {
        if exponent(a) > peak - CH_CUT {
            a -= width;
        }
        if exponent(b) > peak - CH_CUT {
            b += width;
        }
        guard += 1;
        if guard > 100_000 {
            return Err(Error::Quadrature("Cole-Hopf window did not close".into()));
        }
    }
    let (lo, hi) = (a, b);

    let rule = PanelRule::new(CH_PANEL_ORDER);
    let ratio = |panels: usize| {
        let dp = (hi - lo) / panels as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for j in 0..panels {
            let a = lo + j as f64 * dp;
            for (y, w) in rule.mapped(a, a + dp) {
                let k = (exponent(y) - peak).exp();
                num += w * k * (x - y) / t;
                den += w * k;
            }
        }
        num / den
    };
    let mut panels = CH_MIN_PANELS;
    let mut prev = ratio(panels);
    for _ in 0..16 {
        panels *= 2;
        let next = ratio(panels);
        if (next - prev).abs() < CH_TOL {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Quadrature(format!(
        "Cole-Hopf quadrature at (t={t}, x={x}) did not converge"
    )))
}

/// Evaluate [`cole_hopf_solve`] at every node of `grid`.
pub fn cole_hopf_field<P: InitialProfile + Sync + ?Sized>(initial: &P, nu: f64, t: f64, grid: Grid) -> Result<Field> {
    use rayon::prelude::*;
    let values = (0..grid.n())
        .into_par_iter()
        .map(|i| cole_hopf_solve(initial, nu, t, grid.x(i)))
        .collect::<Result<Vec<_>>>()?;
    Field::new(grid, values)
}

/// Thomas algorithm for `a_i x_{i-1} + b_i x_i + c_i x_{i+1} = d_i`.
///
/// `sub[0]` and `sup[n-1]` are ignored. `scratch` must have the length of `rhs`.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64], scratch: &mut [f64]) {
    let n = rhs.len();
    debug_assert!(sub.len() == n && diag.len() == n && sup.len() == n && scratch.len() == n);
    if n == 0 {
        return;
    }
    scratch[0] = sup[0] / diag[0];
    rhs[0] /= diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i] * scratch[i - 1];
        scratch[i] = sup[i] / m;
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i] * rhs[i + 1];
    }
}

/// Local Lax–Friedrichs flux for `f(u) = u²/2`.
#[inline]
pub fn llf_flux(ul: f64, ur: f64) -> f64 {
    let lambda = ul.abs().max(ur.abs());
    0.25 * (ul * ul + ur * ur) - 0.5 * lambda * (ur - ul)
}

/// Advective step limit `0.4 dx / max|u|`.
pub fn advective_dt_limit(u: &Field) -> f64 {
    let m = u.max_abs();
    if m == 0.0 {
        f64::INFINITY
    } else {
        0.4 * u.grid().dx() / m
    }
}

/// Reusable workspace for one step of the split scheme
///
/// ```text
/// (I - ½ dt κ D2) u^{n+1} = u^n - dt/dx (F_{i+½} - F_{i-½}) + extra + ½ dt κ D2 u^n
/// ```
///
/// on interior nodes, with both boundary nodes pinned.
#[derive(Debug, Clone)]
pub struct SplitStepper {
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
    rhs: Vec<f64>,
    scratch: Vec<f64>,
    flux: Vec<f64>,
}

impl SplitStepper {
    pub fn new(grid: &Grid) -> Self {
        let m = grid.n() - 2;
        Self {
            sub: vec![0.0; m],
            diag: vec![0.0; m],
            sup: vec![0.0; m],
            rhs: vec![0.0; m],
            scratch: vec![0.0; m],
            flux: vec![0.0; grid.n() - 1],
        }
    }

    /// Advance `u` in place by `dt` with diffusion coefficient `kappa`.
    ///
    /// `transport` adds `coef * (u_{i+1} - u_{i-1}) / (2 dx)` to the explicit
    /// part (the Euler–Maruyama noise term); pass `0.0` to disable it.
    pub fn step(&mut self, u: &mut [f64], dx: f64, dt: f64, kappa: f64, transport: f64) {
        let n = u.len();
        for i in 0..n - 1 {
            self.flux[i] = llf_flux(u[i], u[i + 1]);
        }
        let r = 0.5 * kappa * dt / (dx * dx);
        let c = transport / (2.0 * dx);
        for i in 1..n - 1 {
            let k = i - 1;
            let conv = -(dt / dx) * (self.flux[i] - self.flux[i - 1]);
            let diff = r * (u[i + 1] - 2.0 * u[i] + u[i - 1]);
            let noise = c * (u[i + 1] - u[i - 1]);
            self.rhs[k] = u[i] + conv + diff + noise;
            self.sub[k] = -r;
            self.diag[k] = 1.0 + 2.0 * r;
            self.sup[k] = -r;
        }
        // pinned boundary values enter the implicit part as known data
        let m = n - 2;
        self.rhs[0] += r * u[0];
        self.rhs[m - 1] += r * u[n - 1];
        solve_tridiagonal(&self.sub, &self.diag, &self.sup, &mut self.rhs, &mut self.scratch);
        u[1..n - 1].copy_from_slice(&self.rhs);
    }
}

pub(crate) fn blowup_bound(u_left: f64, u_right: f64) -> f64 {
    2.0 * u_left.abs().max(u_right.abs()) + 1.0
}

pub(crate) fn check_blowup(u: &[f64], bound: f64, time: f64) -> Result<()> {
    let max_abs = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(max_abs <= bound) {
        return Err(Error::Blowup { time, max_abs, bound });
    }
    Ok(())
}

/// March `u0` to `t_end` with steps of `dt`; the last step is shortened so
/// that the final time is exactly `t_end`. Boundary nodes stay at the values
/// of `u0`.
pub fn fd_viscous_solve(u0: &Field, params: ViscousParams, t_end: f64, dt: f64) -> Result<Field> {
    if !(t_end >= 0.0) {
        return Err(invalid(format!("t_end must be nonnegative, got {t_end}")));
    }
    if !(dt > 0.0) {
        return Err(invalid(format!("dt must be positive, got {dt}")));
    }
    let limit = advective_dt_limit(u0);
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::StepTooLarge { dt, limit });
    }
    let grid = *u0.grid();
    let mut u = u0.values().to_vec();
    let bound = blowup_bound(u[0], u[grid.n() - 1]);
    let mut stepper = SplitStepper::new(&grid);
    let full = (t_end / dt * (1.0 + 1e-12)).floor() as usize;
    for k in 0..full {
        stepper.step(&mut u, grid.dx(), dt, params.nu(), 0.0);
        check_blowup(&u, bound, (k + 1) as f64 * dt)?;
    }
    let rem = t_end - full as f64 * dt;
    if rem > 1e-12 * dt {
        stepper.step(&mut u, grid.dx(), rem, params.nu(), 0.0);
        check_blowup(&u, bound, t_end)?;
    }
    Field::new(grid, u)
}
