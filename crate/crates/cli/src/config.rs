//! Flat `key = value` run configuration (a TOML subset).

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use wavelab_core::deterministic::{padded_half_width, Grid};
use wavelab_core::experiments::{geometric_times, EnsembleConfig};
use wavelab_core::{AreaPremises, NoiseParams, RiemannData, Scheme, ShockProfileParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    RarefactionStability,
    ShockInstability,
    AreaCheck,
    AreaWitness,
    OracleCompare,
    Simulate,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::RarefactionStability => "rarefaction-stability",
            Experiment::ShockInstability => "shock-instability",
            Experiment::AreaCheck => "area-check",
            Experiment::AreaWitness => "area-witness",
            Experiment::OracleCompare => "oracle-compare",
            Experiment::Simulate => "simulate",
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Key(String),
    #[error("{0}")]
    Invalid(#[from] wavelab_core::Error),
    #[error("could not read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(wavelab_core::Error::InvalidParameter(msg.into()))
}

fn default_p_list() -> Vec<f64> {
    vec![2.0, 4.0, 6.0, f64::INFINITY]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RarefactionParams {
    pub u_minus: f64,
    pub u_plus: f64,
    pub mu: f64,
    pub sigma: f64,
    pub grid_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    pub t_end: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub paths: usize,
    pub seed: u64,
    pub record_start: f64,
    pub record_points: usize,
    pub p_list: Vec<f64>,
    pub epsilon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    pub scheme: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_end: Option<f64>,
    /// Band at each pinned end left out of the norms.
    pub boundary_margin: f64,
    /// Largest accepted fitted exponent of the mean `‖u - u^r‖_∞`.
    pub exponent_max: f64,
}

impl Default for RarefactionParams {
    fn default() -> Self {
        Self {
            u_minus: -1.0,
            u_plus: 1.0,
            mu: 0.2,
            sigma: 0.3,
            grid_points: 4096,
            half_width: None,
            t_end: 200.0,
            dt: None,
            paths: 64,
            seed: 0,
            record_start: 1.0,
            record_points: 80,
            p_list: default_p_list(),
            epsilon: 0.05,
            amplitude: None,
            scheme: "euler_maruyama".into(),
            fit_start: None,
            fit_end: None,
            boundary_margin: 10.0,
            exponent_max: -0.15,
        }
    }
}

/// Stable step for a field bounded by `bound`: advective CFL and, for
/// Euler–Maruyama, the noise restriction.
fn auto_dt(noise: NoiseParams, scheme: Scheme, dx: f64, bound: f64) -> f64 {
    let adv = 0.4 * dx / bound.max(1e-12);
    match scheme {
        Scheme::EulerMaruyama => adv.min(noise.noise_dt_limit(dx)),
        Scheme::Shift => adv,
    }
}

fn grid_for(half_width: Option<f64>, speed: f64, t_end: f64, n: usize) -> Result<Grid, ConfigError> {
    let half = half_width.unwrap_or_else(|| padded_half_width(speed, t_end));
    Ok(Grid::symmetric(half, n)?)
}

impl RarefactionParams {
    pub fn ensemble(&self) -> Result<EnsembleConfig, ConfigError> {
        let riemann = RiemannData::rarefaction(self.u_minus, self.u_plus)?;
        let noise = NoiseParams::new(self.mu, self.sigma)?;
        let scheme: Scheme = self.scheme.parse()?;
        let grid = grid_for(self.half_width, riemann.max_speed(), self.t_end, self.grid_points)?;
        let amplitude = self.amplitude.unwrap_or(0.5 * (self.u_plus - self.u_minus));
        let dt = self
            .dt
            .unwrap_or_else(|| auto_dt(noise, scheme, grid.dx(), riemann.max_speed() + amplitude.abs()));
        if self.record_points < 2 {
            return Err(invalid("record_points must be at least 2"));
        }
        if !(self.record_start > 0.0 && self.record_start < self.t_end) {
            return Err(invalid(format!(
                "record_start must lie in (0, t_end), got {}",
                self.record_start
            )));
        }
        let mut cfg = EnsembleConfig::new(noise, riemann, grid, self.t_end, dt);
        cfg.paths = self.paths;
        cfg.base_seed = self.seed;
        cfg.record_times = geometric_times(self.record_start, self.t_end, self.record_points);
        cfg.p_list = self.p_list.clone();
        cfg.epsilon = self.epsilon;
        cfg.amplitude = amplitude;
        cfg.scheme = scheme;
        cfg.boundary_margin = self.boundary_margin;
        cfg.fit_window = Some((
            self.fit_start.unwrap_or(0.1 * self.t_end),
            self.fit_end.unwrap_or(self.t_end),
        ));
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShockParams {
    pub u_minus: f64,
    pub nu: f64,
    pub sigma: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub time_points: usize,
    pub quad_nodes: usize,
    pub paths: usize,
    pub seed: u64,
}

impl Default for ShockParams {
    fn default() -> Self {
        Self {
            u_minus: 1.0,
            nu: 0.1,
            sigma: 1.0,
            t_min: 1e-2,
            t_max: 1e4,
            time_points: 50,
            quad_nodes: 64,
            paths: 10_000,
            seed: 0,
        }
    }
}

impl ShockParams {
    pub fn profile(&self) -> Result<ShockProfileParams, ConfigError> {
        Ok(ShockProfileParams::new(self.u_minus, self.nu, 1.0)?)
    }

    pub fn times(&self) -> Result<Vec<f64>, ConfigError> {
        if !(self.t_min > 0.0 && self.t_min < self.t_max) || self.time_points < 2 {
            return Err(invalid("shock times need 0 < t_min < t_max and time_points >= 2"));
        }
        Ok(geometric_times(self.t_min, self.t_max, self.time_points))
    }

    fn validate(&self) -> Result<(), ConfigError> {
        self.profile()?;
        self.times()?;
        if !(self.sigma >= 0.0) {
            return Err(invalid(format!("sigma must be nonnegative, got {}", self.sigma)));
        }
        if self.quad_nodes < 64 {
            return Err(invalid(format!("quad_nodes must be at least 64, got {}", self.quad_nodes)));
        }
        if self.paths < 2 {
            return Err(invalid("shock Monte Carlo needs at least 2 paths"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AreaCheckParams {
    /// CSV with header and columns `t,value`.
    pub input: String,
    pub c0: f64,
    pub c1: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_star: Option<f64>,
}

impl Default for AreaCheckParams {
    fn default() -> Self {
        Self {
            input: String::new(),
            c0: 1.0,
            c1: 1.0,
            alpha: 1.0,
            beta: 0.0,
            gamma: 0.0,
            t_star: None,
        }
    }
}

impl AreaCheckParams {
    pub fn premises(&self) -> Result<AreaPremises, ConfigError> {
        Ok(AreaPremises::new(self.c0, self.c1, self.alpha, self.beta, self.gamma)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AreaWitnessParams {
    pub alpha: f64,
    pub epsilon: f64,
    pub c0: f64,
    pub n_max: usize,
}

impl Default for AreaWitnessParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            epsilon: 0.1,
            c0: 1.0,
            n_max: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleParams {
    pub u_minus: f64,
    pub u_plus: f64,
    pub nu: f64,
    pub t_end: f64,
    pub grid_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Distance from the pinned ends excluded from the comparison.
    pub margin: f64,
    pub tolerance: f64,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self {
            u_minus: -1.0,
            u_plus: 1.0,
            nu: 0.05,
            t_end: 1.0,
            grid_points: 8192,
            half_width: None,
            dt: None,
            margin: 2.0,
            tolerance: 5e-3,
        }
    }
}

impl OracleParams {
    pub fn grid(&self) -> Result<Grid, ConfigError> {
        let r = RiemannData::rarefaction(self.u_minus, self.u_plus)?;
        let g = grid_for(self.half_width, r.max_speed(), self.t_end, self.grid_points)?;
        if !(self.margin >= 0.0 && 2.0 * self.margin < g.x_max() - g.x_min()) {
            return Err(invalid(format!("margin {} leaves no interior", self.margin)));
        }
        Ok(g)
    }

    pub fn step(&self, grid: &Grid) -> f64 {
        self.dt
            .unwrap_or(0.2 * grid.dx() / self.u_minus.abs().max(self.u_plus.abs()).max(1e-12))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateParams {
    pub u_minus: f64,
    pub u_plus: f64,
    pub mu: f64,
    pub sigma: f64,
    pub grid_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    pub t_end: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub seed: u64,
    pub scheme: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_times: Option<Vec<f64>>,
    /// Amplitude of `a exp(-x²)` added to rarefaction data.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
}

impl Default for SimulateParams {
    fn default() -> Self {
        Self {
            u_minus: -1.0,
            u_plus: 1.0,
            mu: 0.2,
            sigma: 0.3,
            grid_points: 1024,
            half_width: None,
            t_end: 10.0,
            dt: None,
            seed: 0,
            scheme: "shift".into(),
            record_times: None,
            amplitude: None,
        }
    }
}

impl SimulateParams {
    pub fn noise(&self) -> Result<NoiseParams, ConfigError> {
        Ok(NoiseParams::new(self.mu, self.sigma)?)
    }

    pub fn riemann(&self) -> Result<RiemannData, ConfigError> {
        let r = RiemannData::new(self.u_minus, self.u_plus)?;
        if r.is_shock() && self.u_plus != -self.u_minus {
            return Err(invalid("shock data must be standing: u_plus = -u_minus"));
        }
        Ok(r)
    }

    pub fn scheme(&self) -> Result<Scheme, ConfigError> {
        Ok(self.scheme.parse()?)
    }

    pub fn grid(&self) -> Result<Grid, ConfigError> {
        grid_for(self.half_width, self.riemann()?.max_speed(), self.t_end, self.grid_points)
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
            .unwrap_or(if self.u_minus < self.u_plus { 0.5 * (self.u_plus - self.u_minus) } else { 0.0 })
    }

    pub fn step(&self) -> Result<f64, ConfigError> {
        let bound = self.u_minus.abs().max(self.u_plus.abs()) + self.amplitude().abs();
        Ok(self
            .dt
            .unwrap_or(auto_dt(self.noise()?, self.scheme()?, self.grid()?.dx(), bound)))
    }

    pub fn record_times(&self) -> Vec<f64> {
        self.record_times.clone().unwrap_or_else(|| vec![self.t_end])
    }

    fn validate(&self) -> Result<(), ConfigError> {
        self.noise()?;
        self.riemann()?;
        self.scheme()?;
        self.grid()?;
        if !(self.t_end >= 0.0) {
            return Err(invalid(format!("t_end must be nonnegative, got {}", self.t_end)));
        }
        let times = self.record_times();
        if times.windows(2).any(|w| w[1] < w[0]) || times.iter().any(|&t| !(0.0..=self.t_end).contains(&t)) {
            return Err(invalid("record_times must be sorted and lie in [0, t_end]"));
        }
        if !(self.step()? > 0.0) {
            return Err(invalid("dt must be positive"));
        }
        Ok(())
    }
}

/// Experiment-specific parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    Rarefaction(RarefactionParams),
    Shock(ShockParams),
    AreaCheck(AreaCheckParams),
    AreaWitness(AreaWitnessParams),
    Oracle(OracleParams),
    Simulate(SimulateParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub output_dir: PathBuf,
    pub emit_svg: bool,
    pub params: Params,
}

const DEFAULT_OUTPUT_DIR: &str = "wavelab-out";

fn key_error(e: toml::de::Error, experiment: Experiment) -> ConfigError {
    ConfigError::Key(format!("{}: {}", experiment.name(), e.message()))
}

impl RunConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let params = match experiment {
            Experiment::RarefactionStability => Params::Rarefaction(Default::default()),
            Experiment::ShockInstability => Params::Shock(Default::default()),
            Experiment::AreaCheck => Params::AreaCheck(Default::default()),
            Experiment::AreaWitness => Params::AreaWitness(Default::default()),
            Experiment::OracleCompare => Params::Oracle(Default::default()),
            Experiment::Simulate => Params::Simulate(Default::default()),
        };
        Self {
            experiment,
            output_dir: DEFAULT_OUTPUT_DIR.into(),
            emit_svg: false,
            params,
        }
    }

    /// Parse config text. `experiment` comes from the command line; a
    /// `experiment` key in the file must agree with it.
    pub fn parse(text: &str, experiment: Option<Experiment>) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        let from_file = match table.remove("experiment") {
            Some(v) => Some(
                v.try_into::<Experiment>()
                    .map_err(|e| ConfigError::Key(format!("experiment: {}", e.message())))?,
            ),
            None => None,
        };
        let experiment = match (experiment, from_file) {
            (Some(a), Some(b)) if a != b => {
                return Err(ConfigError::Key(format!(
                    "config is for '{}' but '{}' was requested",
                    b.name(),
                    a.name()
                )))
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return Err(ConfigError::Key("no experiment selected".into())),
        };
        let output_dir = match table.remove("output_dir") {
            Some(toml::Value::String(s)) => PathBuf::from(s),
            Some(_) => return Err(ConfigError::Key("output_dir must be a string".into())),
            None => DEFAULT_OUTPUT_DIR.into(),
        };
        let emit_svg = match table.remove("emit_svg") {
            Some(toml::Value::Boolean(b)) => b,
            Some(_) => return Err(ConfigError::Key("emit_svg must be a boolean".into())),
            None => false,
        };
        let rest = toml::Value::Table(table);
        let params = match experiment {
            Experiment::RarefactionStability => Params::Rarefaction(rest.try_into().map_err(|e| key_error(e, experiment))?),
            Experiment::ShockInstability => Params::Shock(rest.try_into().map_err(|e| key_error(e, experiment))?),
            Experiment::AreaCheck => Params::AreaCheck(rest.try_into().map_err(|e| key_error(e, experiment))?),
            Experiment::AreaWitness => Params::AreaWitness(rest.try_into().map_err(|e| key_error(e, experiment))?),
            Experiment::OracleCompare => Params::Oracle(rest.try_into().map_err(|e| key_error(e, experiment))?),
            Experiment::Simulate => Params::Simulate(rest.try_into().map_err(|e| key_error(e, experiment))?),
        };
        Ok(Self {
            experiment,
            output_dir,
            emit_svg,
            params,
        })
    }

    pub fn load(path: &std::path::Path, experiment: Option<Experiment>) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, experiment)
    }

    /// Flat text that [`RunConfig::parse`] maps back to `self`.
    pub fn to_toml(&self) -> String {
        let mut table = toml::Table::new();
        table.insert("experiment".into(), self.experiment.name().into());
        table.insert("output_dir".into(), self.output_dir.to_string_lossy().into_owned().into());
        table.insert("emit_svg".into(), self.emit_svg.into());
        let params = match &self.params {
            Params::Rarefaction(p) => toml::Table::try_from(p),
            Params::Shock(p) => toml::Table::try_from(p),
            Params::AreaCheck(p) => toml::Table::try_from(p),
            Params::AreaWitness(p) => toml::Table::try_from(p),
            Params::Oracle(p) => toml::Table::try_from(p),
            Params::Simulate(p) => toml::Table::try_from(p),
        }
        .expect("parameter records serialise to flat tables");
        table.extend(params);
        toml::to_string(&table).expect("flat table serialises")
    }

    pub fn set_seed(&mut self, seed: u64) -> Result<(), ConfigError> {
        match &mut self.params {
            Params::Rarefaction(p) => p.seed = seed,
            Params::Shock(p) => p.seed = seed,
            Params::Simulate(p) => p.seed = seed,
            _ => return Err(invalid(format!("--seed does not apply to {}", self.experiment.name()))),
        }
        Ok(())
    }

    pub fn set_paths(&mut self, paths: usize) -> Result<(), ConfigError> {
        match &mut self.params {
            Params::Rarefaction(p) => p.paths = paths,
            Params::Shock(p) => p.paths = paths,
            _ => return Err(invalid(format!("--paths does not apply to {}", self.experiment.name()))),
        }
        Ok(())
    }

    /// Check every module-level invariant before any computation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        match &self.params {
            Params::Rarefaction(p) => p.ensemble().map(|_| ()),
            Params::Shock(p) => p.validate(),
            Params::AreaCheck(p) => {
                if p.input.is_empty() {
                    return Err(invalid("area-check needs an input CSV path"));
                }
                p.premises().map(|_| ())
            }
            Params::AreaWitness(p) => {
                if !(p.alpha > 0.0 && p.alpha <= 2.0 && p.epsilon > 0.0 && p.c0 > 0.0 && p.n_max >= 2) {
                    return Err(invalid("area-witness needs 0 < alpha <= 2, epsilon > 0, c0 > 0, n_max >= 2"));
                }
                Ok(())
            }
            Params::Oracle(p) => {
                wavelab_core::ViscousParams::new(p.nu)?;
                p.grid().map(|_| ())
            }
            Params::Simulate(p) => p.validate(),
        }
    }
}
