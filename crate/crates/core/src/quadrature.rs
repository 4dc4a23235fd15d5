//! Small numerical building blocks shared by the solvers: adaptive Simpson
//! integration, composite Gauss–Legendre panels and safeguarded root finding.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

use crate::error::{Error, Result};

const MAX_SIMPSON_DEPTH: u32 = 60;

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut failed = false;
    let value = simpson_step(&f, a, b, fa, fm, fb, whole, tol, MAX_SIMPSON_DEPTH, &mut failed);
    if failed || !value.is_finite() {
        return Err(Error::Quadrature(format!(
            "adaptive Simpson on [{a}, {b}] did not reach tolerance {tol}"
        )));
    }
    Ok(value)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    failed: &mut bool,
) -> f64
where
    F: Fn(f64) -> f64,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    if depth == 0 {
        *failed = true;
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, failed)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, failed)
}

/// Fixed-order Gauss–Legendre rule applied on arbitrary panels.
#[derive(Debug, Clone)]
pub struct PanelRule {
    nodes: Vec<(f64, f64)>,
}

impl PanelRule {
    pub fn new(order: usize) -> Self {
        let order = NonZeroUsize::new(order.max(1)).unwrap();
        let rule = GaussLegendre::new(order);
        Self {
            nodes: rule.as_node_weight_pairs().to_vec(),
        }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().map(move |&(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Sum of the rule over the consecutive panels delimited by `breaks`.
    pub fn integrate_panels<F: FnMut(f64) -> f64>(&self, breaks: &[f64], mut f: F) -> f64 {
        breaks
            .windows(2)
            .map(|p| self.integrate(p[0], p[1], &mut f))
            .sum()
    }
}

/// Root of an increasing function `f` inside `[lo, hi]` (requires
/// `f(lo) <= 0 <= f(hi)`), by bisection safeguarded Newton steps.
pub fn increasing_root<F, D>(f: F, df: D, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let flo = f(lo);
    let fhi = f(hi);
    if flo > 0.0 || fhi < 0.0 || !(flo.is_finite() && fhi.is_finite()) {
        return Err(Error::Bracket(format!(
            "no sign change on [{lo}, {hi}]: f = ({flo}, {fhi})"
        )));
    }
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    let mut x = 0.5 * (lo + hi);
    let mut f_prev = f64::INFINITY;
    for _ in 0..400 {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let slope = df(x);
        let newton = x - fx / slope;
        // Newton only while |f| keeps halving; otherwise it can ping-pong
        let next = if slope > 0.0 && newton > lo && newton < hi && fx.abs() <= 0.5 * f_prev {
            newton
        } else {
            0.5 * (lo + hi)
        };
        f_prev = fx.abs();
        let scale = tol * x.abs().max(1.0);
        if (next - x).abs() <= scale || hi - lo <= scale {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::Bracket(format!(
        "root iteration did not converge on [{lo}, {hi}]"
    )))
}

/// Expand `[x - w, x + w]` geometrically until the increasing function `f`
/// changes sign across it.
pub fn expand_bracket<F>(f: F, x: f64, mut width: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    width = width.max(1.0);
    for _ in 0..200 {
        let (lo, hi) = (x - width, x + width);
        if f(lo) <= 0.0 && f(hi) >= 0.0 {
            return Ok((lo, hi));
        }
        width *= 2.0;
    }
    Err(Error::Bracket(format!("could not bracket a root around {x}")))
}
