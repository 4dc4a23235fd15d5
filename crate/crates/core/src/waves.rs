//! Deterministic wave patterns of the Burgers equation.
//!
//! * the exact centred rarefaction fan `u^r(x/t)`,
//! * the smooth approximate rarefaction `ū(t, x)`: the inviscid solution
//!   launched from an arctan-smoothed step, evaluated along characteristics,
//! * the viscous shock profile `ũ(ξ)` of zero speed.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{invalid, Error, Result};
use crate::quadrature::{adaptive_simpson, increasing_root};

/// `k = (∫_0^∞ (1+ξ²)^{-1} dξ)^{-1}`.
pub const ARCTAN_NORMALISER: f64 = 2.0 / PI;

const ROOT_TOL: f64 = 1e-12;

/// Far-field states of a Riemann problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiemannData {
    u_minus: f64,
    u_plus: f64,
}

impl RiemannData {
    pub fn new(u_minus: f64, u_plus: f64) -> Result<Self> {
        if !(u_minus.is_finite() && u_plus.is_finite()) {
            return Err(invalid("Riemann states must be finite"));
        }
        if u_minus == u_plus {
            return Err(invalid("degenerate Riemann data: u_minus == u_plus"));
        }
        Ok(Self { u_minus, u_plus })
    }

    /// Riemann data for a rarefaction (`u_minus < u_plus`).
    pub fn rarefaction(u_minus: f64, u_plus: f64) -> Result<Self> {
        let r = Self::new(u_minus, u_plus)?;
        r.require_rarefaction()?;
        Ok(r)
    }

    pub fn u_minus(&self) -> f64 {
        self.u_minus
    }

    pub fn u_plus(&self) -> f64 {
        self.u_plus
    }

    pub fn is_rarefaction(&self) -> bool {
        self.u_minus < self.u_plus
    }

    pub fn is_shock(&self) -> bool {
        self.u_minus > self.u_plus
    }

    /// `d = u_+ - u_-`.
    pub fn strength(&self) -> f64 {
        self.u_plus - self.u_minus
    }

    pub fn max_speed(&self) -> f64 {
        self.u_minus.abs().max(self.u_plus.abs())
    }

    pub(crate) fn require_rarefaction(&self) -> Result<()> {
        if self.is_rarefaction() {
            Ok(())
        } else {
            Err(Error::Constraint {
                rule: "u_minus < u_plus",
                detail: format!("rarefaction needs u_minus < u_plus, got ({}, {})", self.u_minus, self.u_plus),
            })
        }
    }
}

pub fn rankine_hugoniot_speed(r: &RiemannData) -> f64 {
    0.5 * (r.u_minus + r.u_plus)
}

/// Centred rarefaction fan at time `t > 0`.
pub fn exact_rarefaction(r: &RiemannData, t: f64, x: f64) -> Result<f64> {
    r.require_rarefaction()?;
    if !(t > 0.0) {
        return Err(invalid(format!("rarefaction fan needs t > 0, got {t}")));
    }
    Ok(fan_value(r, t, x))
}

#[inline]
pub(crate) fn fan_value(r: &RiemannData, t: f64, x: f64) -> f64 {
    if x < r.u_minus * t {
        r.u_minus
    } else if x > r.u_plus * t {
        r.u_plus
    } else {
        x / t
    }
}

/// The `t -> 0` limit of the fan: the Riemann step itself.
#[inline]
pub(crate) fn riemann_step(r: &RiemannData, x: f64) -> f64 {
    if x < 0.0 {
        r.u_minus
    } else if x > 0.0 {
        r.u_plus
    } else {
        0.5 * (r.u_minus + r.u_plus)
    }
}

/// Smooth approximate rarefaction wave.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxRarefaction {
    riemann: RiemannData,
    mid: f64,
    half: f64,
}

impl ApproxRarefaction {
    pub fn new(riemann: RiemannData) -> Result<Self> {
        riemann.require_rarefaction()?;
        Ok(Self {
            riemann,
            mid: 0.5 * (riemann.u_plus + riemann.u_minus),
            half: 0.5 * (riemann.u_plus - riemann.u_minus),
        })
    }

    pub fn riemann(&self) -> &RiemannData {
        &self.riemann
    }

    /// Initial profile `w(x)`.
    #[inline]
    pub fn initial(&self, x: f64) -> f64 {
        self.mid + self.half * ARCTAN_NORMALISER * x.atan()
    }

    #[inline]
    pub fn initial_slope(&self, x: f64) -> f64 {
        self.half * ARCTAN_NORMALISER / (1.0 + x * x)
    }

    /// `∫_0^y w(s) ds`.
    pub fn initial_primitive(&self, y: f64) -> f64 {
        self.mid * y + self.half * ARCTAN_NORMALISER * (y * y.atan() - 0.5 * (y * y).ln_1p())
    }

    /// Foot `x0` of the characteristic through `(t, x)`: `x = x0 + t w(x0)`.
    pub fn characteristic_foot(&self, t: f64, x: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(invalid(format!("approximate rarefaction needs t >= 0, got {t}")));
        }
        if t == 0.0 {
            return Ok(x);
        }
        let reach = t * self.riemann.max_speed();
        let f = |x0: f64| x0 + t * self.initial(x0) - x;
        let df = |x0: f64| 1.0 + t * self.initial_slope(x0);
        match increasing_root(f, df, x - reach, x + reach, ROOT_TOL) {
            Ok(r) => Ok(r),
            Err(_) => {
                let (lo, hi) = crate::quadrature::expand_bracket(f, x, reach)?;
                increasing_root(f, df, lo, hi, ROOT_TOL)
            }
        }
    }

    /// `(ū(t, x), ū_x(t, x))`.
    pub fn evaluate(&self, t: f64, x: f64) -> Result<(f64, f64)> {
        let x0 = self.characteristic_foot(t, x)?;
        let slope0 = self.initial_slope(x0);
        Ok((self.initial(x0), slope0 / (1.0 + t * slope0)))
    }

    /// `‖ū_x(t, ·)‖_{L^p}` for `p >= 1` (`f64::INFINITY` allowed).
    ///
    /// Integrates in the characteristic variable `x0 = tan θ`, where
    /// `∫|ū_x|^p dx = k a ∫_{-π/2}^{π/2} (w'/(1 + t w'))^{p-1} dθ` with
    /// `w' = k a cos²θ`; the integrand is bounded and smooth, so there is no
    /// truncation tail.
    pub fn slope_norm(&self, t: f64, p: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(invalid(format!("slope norm needs t >= 0, got {t}")));
        }
        if !(p >= 1.0) {
            return Err(invalid(format!("L^p norm needs p >= 1, got {p}")));
        }
        let ka = self.half * ARCTAN_NORMALISER;
        let peak = ka / (1.0 + t * ka);
        if p.is_infinite() {
            return Ok(peak);
        }
        let integrand = |theta: f64| {
            let c = theta.cos();
            let s = ka * c * c;
            ka * (s / (1.0 + t * s) / peak).powf(p - 1.0)
        };
        // scaled by peak^{p-1} so the tolerance is relative
        let coarse = adaptive_simpson(integrand, -FRAC_PI_2, FRAC_PI_2, 1e-6)?;
        let fine = adaptive_simpson(integrand, -FRAC_PI_2, FRAC_PI_2, 1e-13 * coarse.max(1e-300))?;
        Ok(peak.powf((p - 1.0) / p) * fine.powf(1.0 / p))
    }

    /// `‖ū(t, ·) - u^r(t, ·)‖_{L^p}` for `p >= 2` (`f64::INFINITY` allowed), `t > 0`.
    pub fn fan_gap_norm(&self, t: f64, p: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(invalid(format!("fan gap needs t > 0, got {t}")));
        }
        if !(p >= 2.0) {
            return Err(invalid(format!("fan gap norm is implemented for p >= 2, got {p}")));
        }
        let r = self.riemann;
        // characteristic feet of the two fan corners
        let left = self.characteristic_foot(t, r.u_minus * t)?;
        let right = self.characteristic_foot(t, r.u_plus * t)?;
        if p.is_infinite() {
            return Ok(left.abs().max(right.abs()) / t);
        }
        let ka = self.half * ARCTAN_NORMALISER;
        let (th_l, th_r) = (left.atan(), right.atan());
        let gap = |theta: f64| {
            if theta < th_l {
                ka * (theta + FRAC_PI_2)
            } else if theta > th_r {
                ka * (theta - FRAC_PI_2)
            } else {
                -theta.tan() / t
            }
        };
        let scale = (left.abs().max(right.abs()) / t).max(1e-300);
        let integrand = |theta: f64| {
            let c = theta.cos();
            if c <= 0.0 {
                // endpoint limits of |gap|^p sec²θ
                return if p == 2.0 { (ka / scale).powi(2) } else { 0.0 };
            }
            (gap(theta).abs() / scale).powf(p) * (1.0 / (c * c) + t * ka)
        };
        let mut total = 0.0;
        for (a, b) in [(-FRAC_PI_2, th_l), (th_l, th_r), (th_r, FRAC_PI_2)] {
            let coarse = adaptive_simpson(integrand, a, b, 1e-6)?;
            total += adaptive_simpson(integrand, a, b, 1e-12 * coarse.abs().max(1e-200))?;
        }
        Ok(scale * total.powf(1.0 / p))
    }
}

pub fn approx_rarefaction_initial(r: &RiemannData, x: f64) -> Result<f64> {
    Ok(ApproxRarefaction::new(*r)?.initial(x))
}

pub fn approx_rarefaction(r: &RiemannData, t: f64, x: f64) -> Result<(f64, f64)> {
    ApproxRarefaction::new(*r)?.evaluate(t, x)
}

pub fn profile_derivative_norms(r: &RiemannData, t: f64, p: f64) -> Result<f64> {
    ApproxRarefaction::new(*r)?.slope_norm(t, p)
}

/// Zero-speed viscous shock `ũ(ξ) = -u_- + 2 u_- c / (e^{hξ} + c)`, `h = u_-/ν`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShockProfileParams {
    riemann: RiemannData,
    nu: f64,
    c: f64,
}

impl ShockProfileParams {
    pub fn new(u_minus: f64, nu: f64, c: f64) -> Result<Self> {
        if !(u_minus > 0.0 && u_minus.is_finite()) {
            return Err(invalid(format!("viscous shock needs u_minus > 0, got {u_minus}")));
        }
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(invalid(format!("viscosity must be positive, got {nu}")));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(invalid(format!("shift constant must be positive, got {c}")));
        }
        Ok(Self {
            riemann: RiemannData::new(u_minus, -u_minus)?,
            nu,
            c,
        })
    }

    pub fn from_riemann(riemann: RiemannData, nu: f64, c: f64) -> Result<Self> {
        if riemann.u_minus != -riemann.u_plus {
            return Err(Error::Constraint {
                rule: "u_minus = -u_plus",
                detail: "zero-speed normalisation required".into(),
            });
        }
        Self::new(riemann.u_minus, nu, c)
    }

    pub fn riemann(&self) -> &RiemannData {
        &self.riemann
    }

    pub fn u_minus(&self) -> f64 {
        self.riemann.u_minus
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn h(&self) -> f64 {
        self.riemann.u_minus / self.nu
    }

    pub fn with_nu(&self, nu: f64) -> Result<Self> {
        Self::new(self.u_minus(), nu, self.c)
    }

    pub fn value(&self, xi: f64) -> f64 {
        viscous_shock(self, xi)
    }

    pub fn slope(&self, xi: f64) -> f64 {
        let u = self.u_minus();
        let z = self.h() * xi - self.c.ln();
        if z.abs() > 700.0 {
            return 0.0;
        }
        // d/dξ [-u tanh(z/2)]
        let sech = 1.0 / (0.5 * z).cosh();
        -0.5 * u * self.h() * sech * sech
    }

    /// `∫_0^ξ ũ`.
    pub fn primitive(&self, xi: f64) -> f64 {
        let u = self.u_minus();
        let h = self.h();
        let lc = self.c.ln();
        u * xi - 2.0 * u / h * (log_add_exp(h * xi, lc) - log_add_exp(0.0, lc))
    }

    /// `sup_x |ũ(x) - ũ(x + a)| = 2 u_- tanh(u_- |a| / (4ν))`.
    pub fn sup_displacement(&self, a: f64) -> f64 {
        let u = self.u_minus();
        2.0 * u * (u * a.abs() / (4.0 * self.nu)).tanh()
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + (-(a - b).abs()).exp().ln_1p()
}

pub fn viscous_shock(p: &ShockProfileParams, xi: f64) -> f64 {
    let u = p.u_minus();
    let z = p.h() * xi;
    if z > 700.0 {
        return -u;
    }
    -u + 2.0 * u * p.c / (z.exp() + p.c)
}
