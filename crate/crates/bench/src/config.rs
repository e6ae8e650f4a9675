//! Run configuration: defaults, an optional `key = value` file, and CLI
//! overrides, in increasing precedence.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clipper_core::geometry::SyntheticParams;
use clipper_core::sdp::SdpParams;
use clipper_core::{ScoreParams, SolverParams};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("unknown method {0:?} (expected clipper, sm, mc, dewc*, msrc*, sdr, ds*, gt)")]
    UnknownMethod(String),
    #[error("cannot read config file {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config file: {0}")]
    Parse(#[from] toml::de::Error),
}

/// Selection method. Starred names are exact (exponential or polynomial)
/// oracles; `gt` selects the true inliers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Clipper,
    Sm,
    Mc,
    Dewc,
    Msrc,
    Sdr,
    Ds,
    Gt,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Clipper,
        Method::Sm,
        Method::Mc,
        Method::Dewc,
        Method::Msrc,
        Method::Sdr,
        Method::Ds,
        Method::Gt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Clipper => "clipper",
            Method::Sm => "sm",
            Method::Mc => "mc",
            Method::Dewc => "dewc*",
            Method::Msrc => "msrc*",
            Method::Sdr => "sdr",
            Method::Ds => "ds*",
            Method::Gt => "gt",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase();
        Ok(match key.trim_end_matches('*') {
            "clipper" => Method::Clipper,
            "sm" => Method::Sm,
            "mc" => Method::Mc,
            "dewc" => Method::Dewc,
            "msrc" => Method::Msrc,
            "sdr" | "msrc-sdr" => Method::Sdr,
            "ds" => Method::Ds,
            "gt" => Method::Gt,
            _ => return Err(ConfigError::UnknownMethod(s.to_string())),
        })
    }
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses a comma-separated list.
pub fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<T>()
                .map_err(|e| ConfigError::Invalid(format!("bad list item {t:?}: {e}")))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub methods: Vec<Method>,
    pub outlier_rates: Vec<f64>,
    pub trials: usize,
    /// Putative-association counts for the scalability sweep.
    pub m_grid: Vec<usize>,
    /// Instance template; `outlier_rate` and `seed` are set per trial, and
    /// `seed` here is the base seed.
    pub synthetic: SyntheticParams,
    /// Defaults to `2 beta`.
    pub epsilon: Option<f64>,
    /// Defaults to `epsilon / 3`.
    pub sigma: Option<f64>,
    pub solver: SolverParams,
    pub sdp: SdpParams,
    /// Size cap for `dewc*` and `msrc*`; each oracle's own default when unset.
    pub oracle_cap: Option<usize>,
    /// Size cap for `ds*`.
    pub ds_cap: usize,
    pub mc_threshold: f64,
    /// Per-instance time limit for `mc`, seconds.
    pub mc_timeout: f64,
    pub out: PathBuf,
    /// Run trials one at a time so solver timings are not contended.
    pub timing: bool,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            methods: vec![Method::Clipper, Method::Sm, Method::Mc, Method::Gt],
            outlier_rates: vec![0.8, 0.85, 0.9, 0.92, 0.95],
            trials: 30,
            m_grid: vec![50, 100, 250, 500, 1000, 2000],
            synthetic: SyntheticParams::default(),
            epsilon: None,
            sigma: None,
            solver: SolverParams::default(),
            sdp: SdpParams::default(),
            oracle_cap: None,
            ds_cap: 500,
            mc_threshold: 0.0,
            mc_timeout: 10.0,
            out: PathBuf::from("results"),
            timing: false,
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: &str| Err(ConfigError::Invalid(msg.to_string()));
        if self.methods.is_empty() {
            return bad("at least one method is required");
        }
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.outlier_rates.is_empty() {
            return bad("outlier-rate grid is empty");
        }
        if let Some(r) = self.outlier_rates.iter().find(|r| !(0.0..1.0).contains(*r)) {
            return Err(ConfigError::Invalid(format!("outlier rate {r} outside [0, 1)")));
        }
        if self.m_grid.contains(&0) {
            return bad("m grid values must be positive");
        }
        if !(0.0..=1.0).contains(&self.mc_threshold) {
            return bad("mc threshold must be in [0, 1]");
        }
        if !(self.mc_timeout > 0.0) {
            return bad("mc timeout must be positive");
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1");
        }
        let mut probe = self.synthetic;
        probe.outlier_rate = self.outlier_rates[0];
        probe
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.score_params()?;
        self.solver
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.sdp
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn score_params(&self) -> Result<ScoreParams, ConfigError> {
        let eps = self.epsilon.unwrap_or(2.0 * self.synthetic.beta());
        let sigma = self.sigma.unwrap_or(eps / 3.0);
        ScoreParams::new(eps, sigma).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Seed of trial `t`: `base + t`. Instances for different outlier rates
    /// share the seed, hence the same cloud, noise, and transform.
    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.synthetic.seed.wrapping_add(trial as u64)
    }

    /// Worker threads for the trial pool; 1 in timing mode.
    pub fn worker_threads(&self) -> Option<usize> {
        if self.timing {
            Some(1)
        } else {
            self.threads
        }
    }

    pub fn apply_file(&mut self, file: &FileConfig) -> Result<(), ConfigError> {
        if let Some(v) = &file.method {
            self.methods = v.items()?;
        }
        if let Some(v) = &file.outlier_rates {
            self.outlier_rates = v.items()?;
        }
        if let Some(v) = &file.m_grid {
            self.m_grid = v.items()?;
        }
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = file.$field { $target = v; })*
            };
        }
        set!(
            trials => self.trials,
            m => self.synthetic.m_putative,
            n_points => self.synthetic.n_points,
            gamma => self.synthetic.gamma,
            beta_factor => self.synthetic.beta_factor,
            seed => self.synthetic.seed,
            ds_cap => self.ds_cap,
            mc_threshold => self.mc_threshold,
            mc_timeout => self.mc_timeout,
            timing => self.timing,
            sdp_tol => self.sdp.tol,
            sdp_max_iters => self.sdp.max_iters,
        );
        if file.epsilon.is_some() {
            self.epsilon = file.epsilon;
        }
        if file.sigma.is_some() {
            self.sigma = file.sigma;
        }
        if file.oracle_cap.is_some() {
            self.oracle_cap = file.oracle_cap;
        }
        if file.threads.is_some() {
            self.threads = file.threads;
        }
        if let Some(out) = &file.out {
            self.out = out.clone();
        }
        Ok(())
    }
}

/// A list given either as a comma-separated string or as an array.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ListValue {
    Text(String),
    Array(Vec<toml::Value>),
}

impl ListValue {
    pub fn items<T: FromStr>(&self) -> Result<Vec<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self {
            ListValue::Text(s) => parse_list(s),
            ListValue::Array(vals) => vals
                .iter()
                .map(|v| {
                    let s = match v {
                        toml::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    };
                    s.parse::<T>()
                        .map_err(|e| ConfigError::Invalid(format!("bad list item {s:?}: {e}")))
                })
                .collect(),
        }
    }
}

/// Contents of a `key = value` config file. Keys mirror the CLI flags with
/// underscores.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub method: Option<ListValue>,
    pub outlier_rates: Option<ListValue>,
    pub m_grid: Option<ListValue>,
    pub trials: Option<usize>,
    pub m: Option<usize>,
    pub n_points: Option<usize>,
    pub gamma: Option<f64>,
    pub beta_factor: Option<f64>,
    pub seed: Option<u64>,
    pub epsilon: Option<f64>,
    pub sigma: Option<f64>,
    pub oracle_cap: Option<usize>,
    pub ds_cap: Option<usize>,
    pub mc_threshold: Option<f64>,
    pub mc_timeout: Option<f64>,
    pub sdp_tol: Option<f64>,
    pub sdp_max_iters: Option<usize>,
    pub out: Option<PathBuf>,
    pub timing: Option<bool>,
    pub threads: Option<usize>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }
}
