//! Experiment dispatch: compute, write CSV (and SVG) files, report checks.

use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use wavelab_core::analysis::{area_check, area_witness, SampledFunction};
use wavelab_core::deterministic::{cole_hopf_field, fd_viscous_solve, Field, ViscousParams};
use wavelab_core::experiments::{
    rarefaction_stability, shock_instability_monte_carlo, shock_instability_quadrature, MeanSeries,
};
use wavelab_core::spde::{simulate, PathSpec};
use wavelab_core::waves::{ApproxRarefaction, RiemannData, ShockProfileParams};

use crate::config::{
    AreaCheckParams, AreaWitnessParams, ConfigError, OracleParams, Params, RarefactionParams, RunConfig, ShockParams,
    SimulateParams,
};
use crate::output::{fmt_float, p_label, read_series, write_svg, Series, Table};

/// Largest accepted `|d_mc - d_quadrature| / stderr`.
pub const SHOCK_Z_MAX: f64 = 4.0;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] wavelab_core::Error),
    #[error("{path}: {message}")]
    Output { path: PathBuf, message: String },
    #[error("{0}")]
    Input(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            pass,
            detail,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    /// Summary lines besides the checks.
    pub summary: Vec<String>,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

struct Writer<'a> {
    dir: &'a Path,
    svg: bool,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn table(&mut self, name: &str, table: &Table) -> Result<(), RunError> {
        let path = self.dir.join(name);
        table.write(&path).map_err(|e| RunError::Output {
            path: path.clone(),
            message: e.to_string(),
        })?;
        self.files.push(path);
        Ok(())
    }

    fn plot(&mut self, name: &str, title: &str, series: &[Series], log_x: bool, log_y: bool) -> Result<(), RunError> {
        if !self.svg {
            return Ok(());
        }
        let path = self.dir.join(name);
        write_svg(&path, title, series, log_x, log_y).map_err(|e| RunError::Output {
            path: path.clone(),
            message: e.to_string(),
        })?;
        self.files.push(path);
        Ok(())
    }
}

/// Validate, run the experiment and write its outputs into `cfg.output_dir`.
pub fn run(cfg: &RunConfig) -> Result<Outcome, RunError> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| RunError::Output {
        path: cfg.output_dir.clone(),
        message: e.to_string(),
    })?;
    let mut w = Writer {
        dir: &cfg.output_dir,
        svg: cfg.emit_svg,
        files: Vec::new(),
    };
    let mut out = match &cfg.params {
        Params::Rarefaction(p) => rarefaction(p, &mut w)?,
        Params::Shock(p) => shock(p, &mut w)?,
        Params::AreaCheck(p) => area(p, &mut w)?,
        Params::AreaWitness(p) => witness(p, &mut w)?,
        Params::Oracle(p) => oracle(p, &mut w)?,
        Params::Simulate(p) => simulate_run(p, &mut w)?,
    };
    out.files = w.files;
    Ok(out)
}

fn push_mean(header: &mut Vec<String>, cols: &mut Vec<Vec<f64>>, name: &str, s: &MeanSeries) {
    header.push(format!("{name}_mean"));
    header.push(format!("{name}_stderr"));
    cols.push(s.mean.clone());
    cols.push(s.stderr.clone());
}

fn columns(header: Vec<String>, times: &[f64], cols: &[Vec<f64>]) -> Table {
    let mut t = Table::new(header);
    for (i, &time) in times.iter().enumerate() {
        t.push_floats(std::iter::once(time).chain(cols.iter().map(|c| c[i])));
    }
    t
}

fn rarefaction(p: &RarefactionParams, w: &mut Writer) -> Result<Outcome, RunError> {
    let cfg = p.ensemble()?;
    let report = rarefaction_stability(&cfg)?;
    let stats = &report.stats;

    let mut header = vec!["t".to_string()];
    let mut cols = Vec::new();
    for s in &stats.headline {
        push_mean(&mut header, &mut cols, &format!("lp{}", p_label(s.p)), &s.series);
    }
    for s in &stats.internal {
        push_mean(&mut header, &mut cols, &format!("phi_lp{}", p_label(s.p)), &s.series);
    }
    push_mean(&mut header, &mut cols, "phi_l2_sq", &stats.phi_l2_sq);
    push_mean(&mut header, &mut cols, "phi_x_l2_sq", &stats.phi_x_l2_sq);
    push_mean(&mut header, &mut cols, "phi_weighted_l2", &stats.phi_weighted_l2);
    w.table("rarefaction.csv", &columns(header, &stats.times, &cols))?;

    let mut as_table = Table::new(["path", "seed", "statistic", "statistic_headline"]);
    for (k, (a, b)) in stats.as_statistic.iter().zip(&stats.as_statistic_headline).enumerate() {
        as_table.push(vec![k.to_string(), cfg.seed(k).to_string(), fmt_float(*a), fmt_float(*b)]);
    }
    w.table("as_statistic.csv", &as_table)?;

    let labels: Vec<String> = stats.headline.iter().map(|s| format!("p = {}", p_label(s.p))).collect();
    let series: Vec<Series> = stats
        .headline
        .iter()
        .zip(&labels)
        .map(|(s, l)| Series {
            name: l,
            x: &stats.times,
            y: &s.series.mean,
        })
        .collect();
    w.plot("rarefaction.svg", "E||u - u^r||_p", &series, true, true)?;

    let mut out = Outcome::default();
    out.summary.push(format!(
        "{} paths ({} failed), fit window {:?}",
        stats.samples,
        stats.failures.len(),
        cfg.fit_window()
    ));
    for (q, fit) in &report.headline_fits {
        match fit {
            Some(f) => out
                .summary
                .push(format!("E||u - u^r||_{}: exponent {:.4}", p_label(*q), f.exponent)),
            None => out.summary.push(format!("E||u - u^r||_{}: fit failed", p_label(*q))),
        }
    }
    if let Some(g) = &report.energy_growth {
        out.summary
            .push(format!("E||phi||^2 ~ {:.4e} + {:.4e} ln(2+t)", g.a, g.b));
    }
    if let Some(d) = report.as_moment_drift() {
        out.summary.push(format!("a.s. statistic second-moment drift {d:.4}"));
    }
    let check = match report.headline_fit(f64::INFINITY) {
        Some(f) => Check::new(
            "sup-norm decay",
            f.exponent <= p.exponent_max,
            format!("fitted exponent {:.4} <= {}", f.exponent, p.exponent_max),
        ),
        None => Check::new("sup-norm decay", false, "no sup-norm fit (add inf to p_list)".into()),
    };
    out.checks.push(check);
    Ok(out)
}

fn shock(p: &ShockParams, w: &mut Writer) -> Result<Outcome, RunError> {
    let profile = p.profile()?;
    let times = p.times()?;
    let quad = shock_instability_quadrature(&profile, p.sigma, &times, p.quad_nodes)?;
    let mc = shock_instability_monte_carlo(&profile, p.sigma, &times, p.paths, p.seed)?;
    let (dq, dm) = (quad.values(), mc.d.values());

    let mut table = Table::new(["t", "d_quadrature", "d_mc", "stderr"]);
    for i in 0..times.len() {
        table.push_floats([times[i], dq[i], dm[i], mc.stderr[i]]);
    }
    w.table("shock_instability.csv", &table)?;
    w.plot(
        "shock_instability.svg",
        "d(t)",
        &[
            Series {
                name: "quadrature",
                x: &times,
                y: dq,
            },
            Series {
                name: "Monte Carlo",
                x: &times,
                y: dm,
            },
        ],
        true,
        false,
    )?;

    let monotone = dq.windows(2).all(|x| x[1] >= x[0]);
    let z = (0..times.len())
        .filter(|&i| mc.stderr[i] > 0.0)
        .map(|i| (dm[i] - dq[i]).abs() / mc.stderr[i])
        .fold(0.0, f64::max);
    let limit = profile.u_minus() - profile.riemann().u_plus();
    let mut out = Outcome::default();
    out.summary.push(format!(
        "d({}) = {:.6} (limit u- - u+ = {limit})",
        times[times.len() - 1],
        dq[dq.len() - 1]
    ));
    out.checks.push(Check::new(
        "d(t) nondecreasing",
        monotone,
        format!("{} times", times.len()),
    ));
    out.checks.push(Check::new(
        "Monte Carlo agrees with quadrature",
        z <= SHOCK_Z_MAX,
        format!("max z {z:.3} <= {SHOCK_Z_MAX}"),
    ));
    Ok(out)
}

fn area(p: &AreaCheckParams, w: &mut Writer) -> Result<Outcome, RunError> {
    let (t, v) = read_series(Path::new(&p.input)).map_err(RunError::Input)?;
    let f = SampledFunction::new(t, v)?;
    let prem = p.premises()?;
    let r = area_check(&f, &prem, p.t_star);

    let cumulative = f.cumulative_integral();
    let mut table = Table::new(["t", "value", "envelope", "cumulative"]);
    for ((t, v), c) in f.iter().zip(&cumulative) {
        table.push_floats([t, v, prem.envelope(t), *c]);
    }
    w.table("area_check.csv", &table)?;
    let env: Vec<f64> = f.times().iter().map(|&t| prem.envelope(t)).collect();
    w.plot(
        "area_check.svg",
        "f and envelope",
        &[
            Series {
                name: "f",
                x: f.times(),
                y: f.values(),
            },
            Series {
                name: "envelope",
                x: f.times(),
                y: &env,
            },
        ],
        true,
        true,
    )?;

    let mut out = Outcome::default();
    out.summary.push(format!(
        "envelope exponent {:.4}, t* = {}, max sample spacing {:.4e}",
        prem.decay_exponent(),
        r.t_star,
        r.max_spacing
    ));
    out.checks.push(Check::new(
        "premise 1 (derivative bound)",
        r.premise1_ok,
        format!("max ratio {:.4}", r.premise1_ratio),
    ));
    out.checks.push(Check::new(
        "premise 2 (integral bound)",
        r.premise2_ok,
        format!("max ratio {:.4}", r.premise2_ratio),
    ));
    out.checks.push(Check::new(
        "conclusion",
        r.conclusion_ok == Some(true),
        format!(
            "max ratio {:.4} for t >= {}, holds from t = {:?}",
            r.conclusion_ratio, r.t_star, r.first_ok_time
        ),
    ));
    Ok(out)
}

fn witness(p: &AreaWitnessParams, w: &mut Writer) -> Result<Outcome, RunError> {
    let wt = area_witness(p.alpha, p.epsilon, p.c0, p.n_max)?;
    let mut table = Table::new(["t", "g"]);
    for (t, g) in wt.samples.iter() {
        table.push_floats([t, g]);
    }
    w.table("area_witness.csv", &table)?;

    let q = 0.5 * p.alpha;
    let scaled = wt.scaled_peaks(q);
    let mut peaks = Table::new([
        "n",
        "s_n",
        "t_n",
        "z_n",
        "g_t_n",
        "rise_integral",
        "descent_integral",
        "g_t_n_scaled",
    ]);
    for (pk, s) in wt.peaks.iter().zip(&scaled) {
        let mut row = vec![pk.n.to_string()];
        row.extend(
            [pk.s_n, pk.t_n, pk.z_n, pk.peak, pk.rise_integral, pk.descent_integral, *s]
                .into_iter()
                .map(fmt_float),
        );
        peaks.push(row);
    }
    w.table("area_witness_peaks.csv", &peaks)?;
    w.plot(
        "area_witness.svg",
        "witness g(t)",
        &[Series {
            name: "g",
            x: wt.samples.times(),
            y: wt.samples.values(),
        }],
        true,
        true,
    )?;

    let prem = wavelab_core::AreaPremises::new(p.c0, wt.total_integral() * (1.0 + 1e-9), p.alpha, 0.0, 0.0)?;
    let r = area_check(&wt.samples, &prem, None);
    let beyond = wt.scaled_peaks(q + 2.0 * p.epsilon);
    let unbounded = beyond.windows(2).all(|x| x[1] > x[0]);
    let partial = wt.partial_integrals();

    let mut out = Outcome::default();
    out.summary
        .push(format!("integral {:.6e}, partial sums {:?}", wt.total_integral(), partial.iter().map(|v| format!("{v:.4e}")).collect::<Vec<_>>()));
    out.summary
        .push(format!("g(t_n) t_n^{:.3}: {:?}", q + 2.0 * p.epsilon, beyond.iter().map(|v| format!("{v:.4e}")).collect::<Vec<_>>()));
    out.checks.push(Check::new(
        "witness premises",
        r.premise1_ok && r.premise2_ok,
        format!("ratios {:.4}, {:.4}", r.premise1_ratio, r.premise2_ratio),
    ));
    out.checks.push(Check::new(
        "peaks beyond alpha/2 grow",
        unbounded,
        format!("exponent {:.3}", q + 2.0 * p.epsilon),
    ));
    Ok(out)
}

fn oracle(p: &OracleParams, w: &mut Writer) -> Result<Outcome, RunError> {
    let grid = p.grid()?;
    let profile = ApproxRarefaction::new(RiemannData::rarefaction(p.u_minus, p.u_plus)?)?;
    let u0 = Field::from_fn(grid, |x| profile.initial(x));
    let fd = fd_viscous_solve(&u0, ViscousParams::new(p.nu)?, p.t_end, p.step(&grid))?;
    let exact = cole_hopf_field(&profile, p.nu, p.t_end, grid)?;

    let half_lo = grid.x_min() + p.margin;
    let half_hi = grid.x_max() - p.margin;
    let mut table = Table::new(["x", "fd", "cole_hopf", "gap"]);
    let mut gap = 0.0f64;
    for ((x, &a), &b) in grid.nodes().zip(fd.values()).zip(exact.values()) {
        table.push_floats([x, a, b, a - b]);
        if x >= half_lo && x <= half_hi {
            gap = gap.max((a - b).abs());
        }
    }
    w.table("oracle_compare.csv", &table)?;
    let xs: Vec<f64> = grid.nodes().collect();
    w.plot(
        "oracle_compare.svg",
        "finite differences vs Cole-Hopf",
        &[
            Series {
                name: "fd",
                x: &xs,
                y: fd.values(),
            },
            Series {
                name: "cole_hopf",
                x: &xs,
                y: exact.values(),
            },
        ],
        false,
        false,
    )?;

    let mut out = Outcome::default();
    out.summary
        .push(format!("grid {} points, dx {:.4e}, t = {}", grid.n(), grid.dx(), p.t_end));
    out.checks.push(Check::new(
        "oracle agreement",
        gap <= p.tolerance,
        format!("interior L-inf gap {gap:.4e} <= {}", p.tolerance),
    ));
    Ok(out)
}

fn simulate_run(p: &SimulateParams, w: &mut Writer) -> Result<Outcome, RunError> {
    let noise = p.noise()?;
    let riemann = p.riemann()?;
    let grid = p.grid()?;
    let a = p.amplitude();
    let u0 = if riemann.is_rarefaction() {
        let profile = ApproxRarefaction::new(riemann)?;
        Field::from_fn(grid, |x| profile.initial(x) + a * (-x * x).exp())
    } else {
        let profile = ShockProfileParams::from_riemann(riemann, noise.nu_eff(), 1.0)?;
        Field::from_fn(grid, |x| profile.value(x) + a * (-x * x).exp())
    };
    let spec = PathSpec {
        noise,
        riemann,
        scheme: p.scheme()?,
        t_end: p.t_end,
        dt: p.step()?,
        seed: p.seed,
    };
    let snaps = simulate(&u0, &spec, &p.record_times())?;

    let mut table = Table::new(["t", "x", "u"]);
    for s in &snaps {
        for (x, &u) in grid.nodes().zip(s.field.values()) {
            table.push_floats([s.time, x, u]);
        }
    }
    w.table("simulate.csv", &table)?;
    let xs: Vec<f64> = grid.nodes().collect();
    let labels: Vec<String> = snaps.iter().map(|s| format!("t = {:.3}", s.time)).collect();
    let series: Vec<Series> = snaps
        .iter()
        .zip(&labels)
        .map(|(s, l)| Series {
            name: l,
            x: &xs,
            y: s.field.values(),
        })
        .collect();
    w.plot("simulate.svg", "u(t, x)", &series, false, false)?;

    let mut out = Outcome::default();
    out.summary.push(format!(
        "{} snapshots, scheme {}, dt {:.4e}",
        snaps.len(),
        spec.scheme.name(),
        spec.effective_dt()
    ));
    Ok(out)
}
