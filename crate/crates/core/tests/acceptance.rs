//! Acceptance suite: one test per criterion, each printing a single
//! PASS/FAIL line. Run with `cargo test -p wavelab-core --test acceptance --
//! --nocapture` to see the lines.

use std::sync::OnceLock;
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wavelab_core::analysis::{area_check, area_witness, lp_norm, rate_fit, AreaPremises, SampledFunction};
use wavelab_core::deterministic::{cole_hopf_field, fd_viscous_solve, padded_half_width, Field, Grid, ViscousParams};
use wavelab_core::experiments::{
    geometric_times, rarefaction_stability, scheme_cross_validation, shock_instability_monte_carlo,
    shock_instability_quadrature, EnsembleConfig, RarefactionReport,
};
use wavelab_core::spde::{cutoff_project, discrete_h1_norm, CutoffParam, NoiseParams};
use wavelab_core::waves::{ApproxRarefaction, RiemannData, ShockProfileParams};

fn verdict(id: &str, name: &str, pass: bool, detail: String) {
    println!("criterion {id} {name}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} {name} failed: {detail}");
}

fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

const ORACLE_GAP_TOL: f64 = 5e-3;
const ORACLE_RATIO_MIN: f64 = 1.8;
const ORACLE_MARGIN: f64 = 2.0;

#[test]
fn criterion_1_oracle_agreement() {
    let start = Instant::now();
    let nu = 0.05;
    let profile = ApproxRarefaction::new(RiemannData::new(-1.0, 1.0).unwrap()).unwrap();
    let half = padded_half_width(1.0, 1.0);
    let gap = |n: usize| {
        let grid = Grid::symmetric(half, n).unwrap();
        let u0 = Field::from_fn(grid, |x| profile.initial(x));
        let u = fd_viscous_solve(&u0, ViscousParams::new(nu).unwrap(), 1.0, 0.2 * grid.dx()).unwrap();
        let exact = cole_hopf_field(&profile, nu, 1.0, grid).unwrap();
        // the pinned ends are not part of the full-line problem
        grid.nodes()
            .zip(u.values().iter().zip(exact.values()))
            .filter(|(x, _)| x.abs() <= half - ORACLE_MARGIN)
            .map(|(_, (a, b))| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let fine = gap(8192);
    let coarse = gap(4096);
    let ratio = coarse / fine;
    verdict(
        "1",
        "oracle agreement",
        fine <= ORACLE_GAP_TOL && ratio >= ORACLE_RATIO_MIN,
        format!(
            "L-inf gap {fine:.3e} <= {ORACLE_GAP_TOL:e}, refinement ratio {ratio:.3} >= {ORACLE_RATIO_MIN}, {:.1}s",
            start.elapsed().as_secs_f64()
        ),
    );
}

const STANDING_SHOCK_TOL: f64 = 1e-2;

#[test]
fn criterion_2_standing_shock() {
    let p = ShockProfileParams::new(1.0, 0.1, 1.0).unwrap();
    let grid = Grid::symmetric(10.0, 4096).unwrap();
    let u0 = Field::from_fn(grid, |x| p.value(x));
    let u = fd_viscous_solve(&u0, ViscousParams::new(p.nu()).unwrap(), 1.0, 0.2 * grid.dx()).unwrap();
    let drift = lp_norm(&u.sub(&u0).unwrap(), f64::INFINITY);
    verdict(
        "2",
        "standing shock",
        drift <= STANDING_SHOCK_TOL,
        format!("L-inf drift {drift:.3e} <= {STANDING_SHOCK_TOL:e}"),
    );
}

const LAW_SLOPE_MIN: f64 = 0.8;
const LAW_Z_MAX: f64 = 3.0;

#[test]
fn criterion_3_shift_representation_law() {
    let start = Instant::now();
    let noise = NoiseParams::new(0.2, 0.3).unwrap();
    let riemann = RiemannData::new(-1.0, 1.0).unwrap();
    let grid = Grid::symmetric(padded_half_width(1.0, 1.0), 257).unwrap();
    let dt = noise.noise_dt_limit(grid.dx()).min(0.25 * grid.dx());
    let mut cfg = EnsembleConfig::new(noise, riemann, grid, 1.0, dt);
    cfg.paths = 200;
    cfg.base_seed = 3000;
    cfg.record_times = vec![0.25, 0.5, 0.75, 1.0];
    let r = scheme_cross_validation(&cfg).unwrap();
    let slopes: Vec<f64> = r.slopes.iter().map(|s| s.unwrap_or(f64::NAN)).collect();
    let z_max = r
        .probes
        .iter()
        .map(|p| p.mean_z().max(p.variance_z()))
        .fold(0.0, f64::max);
    let gaps: Vec<String> = r.levels.iter().map(|l| format!("{:.3e}", l.gap.mean.last().unwrap())).collect();
    let pass = slopes.iter().all(|&s| s >= LAW_SLOPE_MIN) && z_max <= LAW_Z_MAX && r.failures.is_empty();
    verdict(
        "3",
        "shift-representation law",
        pass,
        format!(
            "mean L2 gaps {gaps:?}, slopes {slopes:.3?} >= {LAW_SLOPE_MIN}, max probe z {z_max:.2} <= {LAW_Z_MAX}, {} paths, {:.1}s",
            r.samples,
            start.elapsed().as_secs_f64()
        ),
    );
}

/// Shared by criteria 4 and 5(b).
fn rarefaction_run() -> &'static (RarefactionReport, f64) {
    static RUN: OnceLock<(RarefactionReport, f64)> = OnceLock::new();
    RUN.get_or_init(|| {
        let start = Instant::now();
        let noise = NoiseParams::new(0.2, 0.3).unwrap();
        let riemann = RiemannData::new(-1.0, 1.0).unwrap();
        let t_end = 200.0;
        let grid = Grid::symmetric(padded_half_width(1.0, t_end), 4096).unwrap();
        let dt = noise.noise_dt_limit(grid.dx()).min(0.25 * grid.dx());
        let mut cfg = EnsembleConfig::new(noise, riemann, grid, t_end, dt);
        cfg.paths = 64;
        cfg.base_seed = 1000;
        cfg.fit_window = Some((10.0, t_end));
        let report = rarefaction_stability(&cfg).unwrap();
        (report, start.elapsed().as_secs_f64())
    })
}

const RAREFACTION_EXPONENT_MAX: f64 = -0.15;
const NORMALIZED_GROWTH_MAX: f64 = 2.0;
const LOG_FIT_RESIDUAL_FRACTION: f64 = 0.2;
const POWER_EXPONENT_LIMIT: f64 = 0.1;
const MOMENT_DRIFT_MAX: f64 = 0.25;

#[test]
fn criterion_4_rarefaction_stability() {
    let (report, secs) = rarefaction_run();
    let stats = &report.stats;
    let t_end = *stats.times.last().unwrap();

    // (a) decay of the mean sup-norm of u - u^r
    let fit = report
        .headline_fits
        .iter()
        .find(|(p, _)| p.is_infinite())
        .and_then(|(_, f)| *f)
        .expect("L-inf fit");
    let a_ok = fit.exponent <= RAREFACTION_EXPONENT_MAX;

    // (b) normalised L^p moments stay bounded
    let mut b_ok = true;
    let mut b_ratios = Vec::new();
    for p in [4.0, 6.0] {
        let m = stats.phi_power_norm(p).expect("p in p_list");
        let normalized: Vec<(f64, f64)> = stats
            .times
            .iter()
            .zip(&m.mean)
            .map(|(&t, &v)| (t, v * (2.0 + t).powf((p - 2.0) / 4.0) / (2.0 + t).ln().powf(p)))
            .collect();
        let first = normalized.iter().filter(|(t, _)| *t <= 0.5 * t_end).map(|x| x.1).fold(0.0, f64::max);
        let second = normalized.iter().filter(|(t, _)| *t > 0.5 * t_end).map(|x| x.1).fold(0.0, f64::max);
        b_ratios.push(second / first);
        b_ok &= second <= NORMALIZED_GROWTH_MAX * first;
    }

    // (c) E‖φ‖² grows at most logarithmically
    let growth = report.energy_growth.expect("log-growth fit");
    let l2 = stats.series(&stats.phi_l2_sq.mean).unwrap();
    let power = rate_fit(&l2, (10.0, t_end), false).unwrap();
    let power_rms = {
        let r: Vec<f64> = l2
            .iter()
            .filter(|&(t, _)| (10.0..=t_end).contains(&t))
            .map(|(t, v)| v - power.constant * (2.0 + t).powf(power.exponent))
            .collect();
        (r.iter().map(|x| x * x).sum::<f64>() / r.len() as f64).sqrt()
    };
    let c_ok = growth.residual <= LOG_FIT_RESIDUAL_FRACTION * growth.range
        && !(power.exponent > POWER_EXPONENT_LIMIT && power_rms < growth.residual);

    // (d) second moment of the a.s. statistic is stable under doubling M
    let m2 = |k: usize| stats.as_statistic[..k].iter().map(|s| s * s).sum::<f64>() / k as f64;
    let drift = (m2(64) / m2(32) - 1.0).abs();
    let d_ok = drift <= MOMENT_DRIFT_MAX;

    verdict(
        "4",
        "rarefaction stability",
        a_ok && b_ok && c_ok && d_ok && stats.samples == 64,
        format!(
            "(a) L-inf exponent {:.3} <= {RAREFACTION_EXPONENT_MAX}; (b) normalised growth {b_ratios:.3?} <= {NORMALIZED_GROWTH_MAX}; \
             (c) log-fit residual {:.2e} <= {LOG_FIT_RESIDUAL_FRACTION} x range {:.2e}, power exponent {:.3}; \
             (d) second-moment drift {drift:.3} <= {MOMENT_DRIFT_MAX}; {} paths, {secs:.0}s",
            fit.exponent, growth.residual, growth.range, power.exponent, stats.samples
        ),
    );
}

/// Random premise-satisfying function: a weighted witness plus a decaying
/// power law, with the constants that certify both premises.
fn synthetic(rng: &mut ChaCha8Rng) -> (SampledFunction, AreaPremises) {
    let alpha = rng.random_range(0.6..1.8);
    let epsilon = rng.random_range(0.05..0.3);
    let c0 = rng.random_range(0.5..2.0);
    let w = area_witness(alpha, epsilon, c0, 6).unwrap();
    let weight = rng.random_range(0.0..1.0);
    let amp = rng.random_range(0.0..1.0);
    let q = alpha.max(1.1) + rng.random_range(0.0..0.5);
    let f = SampledFunction::from_fn(w.samples.times().to_vec(), |t| {
        weight * w.value(t) + amp * (1.0 + t).powf(-q)
    })
    .unwrap();
    let c0_mix = (weight * c0).max(1e-3);
    let c1 = (weight * w.total_integral() + amp / (q - 1.0)) * 1.05 + 1e-12;
    (f, AreaPremises::new(c0_mix, c1, alpha, 0.0, 0.0).unwrap())
}

const AREA_EXPONENT_TOL: f64 = 0.1;

#[test]
fn criterion_5_area_inequality() {
    // (a) synthetic premise-satisfying functions
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut a_fail = 0;
    for _ in 0..100 {
        let (f, prem) = synthetic(&mut rng);
        let r = area_check(&f, &prem, None);
        if !(r.all_ok() && r.first_ok_time.is_some()) {
            a_fail += 1;
        }
    }

    // (b) E‖φ_x‖² from the rarefaction ensemble
    let (report, _) = rarefaction_run();
    let stats = &report.stats;
    let epsilon = 0.05;
    let alpha = 1.0 - 2.0 * epsilon;
    let h1 = stats.series(&stats.phi_x_l2_sq.mean).unwrap();
    let (t, v) = (h1.times(), h1.values());
    // Lipschitz constant of the samples
    let c0 = (0..t.len() - 1)
        .map(|i| ((v[i + 1] - v[i]) / (t[i + 1] - t[i])).abs() * (1.0 + t[i]).powf(alpha))
        .fold(1e-12, f64::max);
    let cumulative = h1.cumulative_integral();
    let c1 = t
        .iter()
        .zip(&cumulative)
        .map(|(&t, &c)| c / t.ln_1p())
        .fold(1e-12, f64::max);
    let prem = AreaPremises::new(c0, c1, alpha, 0.0, 1.0).unwrap();
    let r = area_check(&h1, &prem, None);
    let t_end = *t.last().unwrap();
    let decay = rate_fit(&h1, (0.1 * t_end, t_end), false).unwrap().exponent;
    let target = prem.decay_exponent();
    let b_ok = r.all_ok() && decay <= target + AREA_EXPONENT_TOL;

    // (c) the optimality witness
    let w = area_witness(1.0, 0.1, 1.0, 6).unwrap();
    let wprem = AreaPremises::new(1.0, w.total_integral() * (1.0 + 1e-9), 1.0, 0.0, 0.0).unwrap();
    let wr = area_check(&w.samples, &wprem, None);
    let increments: Vec<f64> = w.peaks.iter().map(|p| p.rise_integral + p.descent_integral).collect();
    let geometric = increments.windows(2).all(|x| x[1] <= 0.9 * x[0]);
    // g(t_n) t_n^{α/2 + δ} for δ = 2ε > ε blows up, so no exponent beyond α/2 works
    let beyond = w.scaled_peaks(0.5 + 0.2);
    let unbounded = beyond.windows(2).all(|x| x[1] > x[0]);
    // the literal product g(t_n) t_n^{α/2} tends to zero for this construction
    let literal = w.scaled_peaks(0.5);
    let literal_decays = literal.windows(2).skip(1).all(|x| x[1] < x[0]);
    let c_ok = wr.premise1_ok && wr.premise2_ok && geometric && unbounded && literal_decays;

    verdict(
        "5",
        "area inequality",
        a_fail == 0 && b_ok && c_ok,
        format!(
            "(a) {a_fail}/100 synthetic failures; (b) conclusion holds {:?} from t = {:?}, fitted exponent {decay:.3} <= {target:.3} + {AREA_EXPONENT_TOL}; \
             (c) premises ({}, {}), increment ratios <= 0.9: {geometric}, g(t_n) t_n^0.7 {beyond:.3?}, g(t_n) t_n^0.5 {literal:.3?}",
            r.conclusion_ok, r.first_ok_time, wr.premise1_ok, wr.premise2_ok
        ),
    );
}

const SUP_DISPLACEMENT_TOL: f64 = 1e-8;

/// `max_x |ũ(x) - ũ(x+a)|` by grid scan and golden-section refinement.
fn brute_sup(p: &ShockProfileParams, a: f64) -> f64 {
    let g = |x: f64| (p.value(x) - p.value(x + a)).abs();
    let h = 1e-3;
    let lo = -20.0 - a.abs();
    let n = (2.0 * (20.0 + a.abs()) / h) as usize;
    let best = (0..=n).map(|i| lo + i as f64 * h).fold(lo, |b, x| if g(x) > g(b) { x } else { b });
    let (mut l, mut r) = (best - h, best + h);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let m1 = r - phi * (r - l);
        let m2 = l + phi * (r - l);
        if g(m1) < g(m2) {
            l = m1;
        } else {
            r = m2;
        }
    }
    g(0.5 * (l + r))
}

const SHOCK_LIMIT_FRACTION: f64 = 0.99;
const MC_Z_MAX: f64 = 3.0;

#[test]
fn criterion_6_shock_instability() {
    let p = ShockProfileParams::new(1.0, 0.1, 1.0).unwrap();
    let times = geometric_times(1e-2, 1e4, 50);
    let d = shock_instability_quadrature(&p, 1.0, &times, 64).unwrap();
    let monotone = d.values().windows(2).all(|w| w[1] >= w[0]);
    let limit = *d.values().last().unwrap();
    let mc = shock_instability_monte_carlo(&p, 1.0, &times, 10_000, 606).unwrap();
    let z_max = (0..times.len())
        .map(|i| {
            let diff = (mc.d.values()[i] - d.values()[i]).abs();
            if mc.stderr[i] == 0.0 {
                if diff == 0.0 { 0.0 } else { f64::INFINITY }
            } else {
                diff / mc.stderr[i]
            }
        })
        .fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let sup_err = (0..20)
        .map(|_| {
            let a = rng.random_range(-3.0..3.0);
            (brute_sup(&p, a) - p.sup_displacement(a)).abs()
        })
        .fold(0.0, f64::max);
    let target = SHOCK_LIMIT_FRACTION * 2.0;
    verdict(
        "6",
        "shock instability",
        monotone && limit >= target && z_max <= MC_Z_MAX && sup_err <= SUP_DISPLACEMENT_TOL,
        format!(
            "monotone {monotone}, d(1e4) = {limit:.6} >= {target}, max MC z {z_max:.2} <= {MC_Z_MAX}, sup-displacement error {sup_err:.1e} <= {SUP_DISPLACEMENT_TOL:e}"
        ),
    );
}

const CUTOFF_SLACK: f64 = 1e-12;

#[test]
fn criterion_7_cutoff_nonexpansive() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut branches = [0usize; 3];
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let n = rng.random_range(3..40);
        let grid = Grid::new(0.0, rng.random_range(0.5..5.0), n).unwrap();
        let scale = rng.random_range(0.01..3.0);
        let v = Field::new(grid, (0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect()).unwrap();
        let w = Field::new(grid, (0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect()).unwrap();
        let (nv, nw) = (discrete_h1_norm(&v), discrete_h1_norm(&w));
        // radius drawn around the norms so that every branch occurs
        let m = rng.random_range(0.2..1.5) * 0.5 * (nv + nw);
        let cut = CutoffParam::new(m).unwrap();
        branches[(nv > m) as usize + (nw > m) as usize] += 1;
        let lhs = discrete_h1_norm(&cutoff_project(&v, cut).sub(&cutoff_project(&w, cut)).unwrap());
        let rhs = discrete_h1_norm(&v.sub(&w).unwrap());
        worst = worst.max(lhs - rhs);
    }
    verdict(
        "7",
        "cut-off nonexpansiveness",
        worst <= CUTOFF_SLACK && branches.iter().all(|&b| b > 0),
        format!("max excess {worst:.2e} <= {CUTOFF_SLACK:e}, branches (inside, mixed, outside) {branches:?}"),
    );
}

const L1_TOL: f64 = 1e-8;
const PROFILE_SLOPE_TOL: f64 = 0.05;

#[test]
fn criterion_8_profile_bounds() {
    let r = RiemannData::new(-1.0, 1.0).unwrap();
    let w = ApproxRarefaction::new(r).unwrap();
    let l1_err = [0.0, 1.0, 10.0, 100.0]
        .iter()
        .map(|&t| (w.slope_norm(t, 1.0).unwrap() - r.strength()).abs())
        .fold(0.0, f64::max);
    let times = geometric_times(1e2, 1e4, 9);
    let mut worst = 0.0f64;
    let mut slopes = Vec::new();
    for p in [2.0, 4.0] {
        let norms: Vec<f64> = times.iter().map(|&t| w.slope_norm(t, p).unwrap()).collect();
        let s = loglog_slope(&times, &norms);
        worst = worst.max((s - (-1.0 + 1.0 / p)).abs());
        slopes.push(s);
        let gaps: Vec<f64> = times.iter().map(|&t| w.fan_gap_norm(t, p).unwrap()).collect();
        let s = loglog_slope(&times, &gaps);
        worst = worst.max((s + (p - 1.0) / (2.0 * p)).abs());
        slopes.push(s);
    }
    verdict(
        "8",
        "profile bounds",
        l1_err <= L1_TOL && worst <= PROFILE_SLOPE_TOL,
        format!(
            "L1 error {l1_err:.1e} <= {L1_TOL:e}, slopes (slope p=2, gap p=2, slope p=4, gap p=4) {slopes:.4?}, max deviation {worst:.4} <= {PROFILE_SLOPE_TOL}"
        ),
    );
}
