//! Run configuration: command-line flags merged over an optional
//! `key=value` file. Flags win; unknown file keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use kinex_core::grid::WealthGrid;
use kinex_core::kinetics::preset_grid;
use kinex_core::ModelParams;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelName {
    Pure,
    Saving,
    Angle,
}

impl fmt::Display for ModelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelName::Pure => "pure",
            ModelName::Saving => "saving",
            ModelName::Angle => "angle",
        })
    }
}

impl FromStr for ModelName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <Self as ValueEnum>::from_str(s, false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GridPreset {
    Uniform,
    Loghead,
}

impl fmt::Display for GridPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GridPreset::Uniform => "uniform",
            GridPreset::Loghead => "loghead",
        })
    }
}

impl FromStr for GridPreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <Self as ValueEnum>::from_str(s, false)
    }
}

/// A comma-separated list of numbers, e.g. `0.1,0.5,0.9`.
#[derive(Debug, Clone, PartialEq)]
pub struct NumberList(pub Vec<f64>);

impl FromStr for NumberList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let values: Result<Vec<f64>, _> = s.split(',').map(|part| part.trim().parse::<f64>()).collect();
        match values {
            Ok(v) if !v.is_empty() && v.iter().all(|x| x.is_finite()) => Ok(Self(v)),
            _ => Err(format!("expected a comma-separated list of numbers, got `{s}`")),
        }
    }
}

impl fmt::Display for NumberList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|x| x.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// Settings shared by all subcommands. Every field is optional so a config
/// file can fill what the flags leave out.
#[derive(Debug, Clone, Default, Args)]
pub struct Settings {
    /// Read further settings from a `key=value` file; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub model: Option<ModelName>,
    /// Saving fraction; a comma-separated list for `sweep`.
    #[arg(long, global = true)]
    pub lambda: Option<NumberList>,
    /// Exchange fraction; a comma-separated list for `sweep` and `residual`.
    #[arg(long, global = true)]
    pub omega: Option<NumberList>,
    #[arg(long, global = true)]
    pub mean_wealth: Option<f64>,
    #[arg(long, global = true)]
    pub agents: Option<usize>,
    #[arg(long, global = true)]
    pub steps: Option<u64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub replicas: Option<usize>,
    #[arg(long, global = true)]
    pub grid: Option<GridPreset>,
    /// Number of histogram bins on `[0, 10 <u>]`.
    #[arg(long, global = true)]
    pub bins: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Fixed-point tolerance on `sup |f - K[f]|`.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    /// Time step of `evolve`, in exchange steps.
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Monte Carlo pdf CSV compared against by `steady`.
    #[arg(long, global = true)]
    pub mc_hist: Option<PathBuf>,
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> CliResult<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e: T::Err| CliError::Config(format!("{key}: {e}")))
}

impl Settings {
    /// Parses a config file. Blank lines and lines starting with `#` are
    /// skipped; keys may use `-` or `_`.
    pub fn parse_file(text: &str) -> CliResult<Self> {
        let mut s = Settings::default();
        for (number, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("config line {}: expected key=value", number + 1)))?;
            let key = key.trim().replace('_', "-");
            let value = value.trim();
            match key.as_str() {
                "model" => s.model = Some(parse_value(&key, value)?),
                "lambda" => s.lambda = Some(parse_value(&key, value)?),
                "omega" => s.omega = Some(parse_value(&key, value)?),
                "mean-wealth" => s.mean_wealth = Some(parse_value(&key, value)?),
                "agents" => s.agents = Some(parse_value(&key, value)?),
                "steps" => s.steps = Some(parse_value(&key, value)?),
                "seed" => s.seed = Some(parse_value(&key, value)?),
                "replicas" => s.replicas = Some(parse_value(&key, value)?),
                "grid" => s.grid = Some(parse_value(&key, value)?),
                "bins" => s.bins = Some(parse_value(&key, value)?),
                "out" => s.out = Some(PathBuf::from(value)),
                "jobs" => s.jobs = Some(parse_value(&key, value)?),
                "tol" => s.tol = Some(parse_value(&key, value)?),
                "max-iter" => s.max_iter = Some(parse_value(&key, value)?),
                "dt" => s.dt = Some(parse_value(&key, value)?),
                "mc-hist" => s.mc_hist = Some(PathBuf::from(value)),
                _ => return Err(CliError::Config(format!("unknown config key `{key}`"))),
            }
        }
        Ok(s)
    }

    /// `self` with gaps filled from `file`.
    pub fn over(self, file: Settings) -> Settings {
        Settings {
            config: self.config,
            model: self.model.or(file.model),
            lambda: self.lambda.or(file.lambda),
            omega: self.omega.or(file.omega),
            mean_wealth: self.mean_wealth.or(file.mean_wealth),
            agents: self.agents.or(file.agents),
            steps: self.steps.or(file.steps),
            seed: self.seed.or(file.seed),
            replicas: self.replicas.or(file.replicas),
            grid: self.grid.or(file.grid),
            bins: self.bins.or(file.bins),
            out: self.out.or(file.out),
            jobs: self.jobs.or(file.jobs),
            tol: self.tol.or(file.tol),
            max_iter: self.max_iter.or(file.max_iter),
            dt: self.dt.or(file.dt),
            mc_hist: self.mc_hist.or(file.mc_hist),
        }
    }

    /// Reads the config file, if one was named, and merges it under the flags.
    pub fn resolve(self) -> CliResult<Settings> {
        match &self.config {
            None => Ok(self),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("config: cannot read {}: {e}", path.display())))?;
                let file = Settings::parse_file(&text)?;
                Ok(self.over(file))
            }
        }
    }

    /// `key=value` lines for every setting that is present.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut push = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                out.push((key.to_string(), v));
            }
        };
        push("model", self.model.map(|m| m.to_string()));
        push("lambda", self.lambda.as_ref().map(|l| l.to_string()));
        push("omega", self.omega.as_ref().map(|l| l.to_string()));
        push("mean-wealth", self.mean_wealth.map(|x| x.to_string()));
        push("agents", self.agents.map(|x| x.to_string()));
        push("steps", self.steps.map(|x| x.to_string()));
        push("seed", self.seed.map(|x| x.to_string()));
        push("replicas", self.replicas.map(|x| x.to_string()));
        push("grid", self.grid.map(|g| g.to_string()));
        push("bins", self.bins.map(|x| x.to_string()));
        push("out", self.out.as_ref().map(|p| p.display().to_string()));
        push("jobs", self.jobs.map(|x| x.to_string()));
        push("tol", self.tol.map(|x| x.to_string()));
        push("max-iter", self.max_iter.map(|x| x.to_string()));
        push("dt", self.dt.map(|x| x.to_string()));
        push("mc-hist", self.mc_hist.as_ref().map(|p| p.display().to_string()));
        out
    }

    pub fn model_name(&self) -> CliResult<ModelName> {
        self.model
            .ok_or_else(|| CliError::Config("model: required (pure, saving or angle)".into()))
    }

    pub fn mean_wealth(&self) -> f64 {
        self.mean_wealth.unwrap_or(1.0)
    }

    /// Every model the settings describe: one per listed parameter value.
    pub fn models(&self) -> CliResult<Vec<ModelParams>> {
        let mean = self.mean_wealth();
        let name = self.model_name()?;
        let (key, list) = match name {
            ModelName::Pure => {
                if self.lambda.is_some() || self.omega.is_some() {
                    return Err(CliError::Config(
                        "lambda/omega: the pure model takes no parameter".into(),
                    ));
                }
                return Ok(vec![config_model(ModelParams::pure(mean), "mean-wealth")?]);
            }
            ModelName::Saving => {
                if self.omega.is_some() {
                    return Err(CliError::Config("omega: the saving model takes lambda".into()));
                }
                ("lambda", &self.lambda)
            }
            ModelName::Angle => {
                if self.lambda.is_some() {
                    return Err(CliError::Config("lambda: the angle model takes omega".into()));
                }
                ("omega", &self.omega)
            }
        };
        let values = list
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("{key}: required for the {name} model")))?;
        values
            .0
            .iter()
            .map(|&v| {
                let model = match name {
                    ModelName::Saving => ModelParams::saving(v, mean),
                    _ => ModelParams::angle(v, mean),
                };
                config_model(model, key)
            })
            .collect()
    }

    /// The single model of a non-sweep command.
    pub fn model(&self) -> CliResult<ModelParams> {
        let mut models = self.models()?;
        if models.len() != 1 {
            let key = if self.model == Some(ModelName::Saving) {
                "lambda"
            } else {
                "omega"
            };
            return Err(CliError::Config(format!("{key}: this command takes a single value")));
        }
        Ok(models.remove(0))
    }

    pub fn grid_for(&self, model: &ModelParams) -> CliResult<WealthGrid> {
        let grid = match self.grid {
            None => preset_grid(model),
            Some(GridPreset::Uniform) => WealthGrid::default_for(model.mean_wealth()),
            Some(GridPreset::Loghead) => WealthGrid::log_head_for(model.mean_wealth()),
        };
        grid.map_err(|e| CliError::Config(format!("grid: {e}")))
    }

    pub fn out_dir(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| Path::new(default).to_path_buf())
    }

    pub fn positive_tol(&self, default: f64) -> CliResult<f64> {
        let tol = self.tol.unwrap_or(default);
        if tol > 0.0 && tol.is_finite() {
            Ok(tol)
        } else {
            Err(CliError::Config(format!("tol: must be positive, got {tol}")))
        }
    }
}

/// Model validation errors are configuration errors; the message names the key.
fn config_model(model: kinex_core::Result<ModelParams>, key: &str) -> CliResult<ModelParams> {
    model.map_err(|e| match e {
        kinex_core::Error::Domain(message) => CliError::Config(message),
        other => CliError::Config(format!("{key}: {other}")),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_fills_gaps_and_flags_win() {
        let file = Settings::parse_file("# comment\nmodel = saving\nlambda=0.5\nagents=100\nmax_iter=3\n").unwrap();
        let flags = Settings {
            agents: Some(200),
            ..Settings::default()
        };
        let merged = flags.over(file);
        assert_eq!(merged.model, Some(ModelName::Saving));
        assert_eq!(merged.agents, Some(200));
        assert_eq!(merged.max_iter, Some(3));
        assert_eq!(merged.model().unwrap(), ModelParams::saving(0.5, 1.0).unwrap());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = Settings::parse_file("lamda=0.5").unwrap_err();
        assert!(err.to_string().contains("lamda"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn invalid_lambda_message() {
        let s = Settings {
            model: Some(ModelName::Saving),
            lambda: Some(NumberList(vec![1.2])),
            ..Settings::default()
        };
        let err = s.model().unwrap_err();
        assert!(err.to_string().contains("lambda must be in [0,1)"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn lists_expand_to_models() {
        let s = Settings {
            model: Some(ModelName::Angle),
            omega: Some("1, 0.5,0.3".parse().unwrap()),
            ..Settings::default()
        };
        assert_eq!(s.models().unwrap().len(), 3);
        assert!(s.model().is_err());
        assert!("0.1,,0.2".parse::<NumberList>().is_err());
    }
}
