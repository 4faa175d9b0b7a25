//! Run configuration: command-line flags merged over an optional JSON file.

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use spectral_core::profiles::{KindName, Profile, ProfileSpec};
use spectral_core::{Complex64, SignConvention};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("ConfigError: {0}")]
pub struct ConfigError(pub String);

fn config_err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Portrait,
    Graph,
    Predict,
    Compare,
    Stokes,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Portrait => "portrait",
            Command::Graph => "graph",
            Command::Predict => "predict",
            Command::Compare => "compare",
            Command::Stokes => "stokes",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

/// Numerical parameters; `None` where a command does not use one.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameters {
    pub eps: Option<f64>,
    pub alpha: Option<f64>,
    #[serde(alias = "R")]
    pub reynolds: Option<f64>,
    pub sigma: Option<f64>,
    pub n: Option<usize>,
    pub depth: Option<f64>,
    pub tau: Option<f64>,
    pub delta: Option<f64>,
    /// `[re, im]`, for `stokes`.
    pub lambda: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    pub formats: Option<Vec<Format>>,
}

/// Layout of a JSON configuration document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub command: Option<Command>,
    pub profile: Option<ProfileSpec>,
    #[serde(default)]
    pub parameters: Parameters,
    #[serde(default)]
    pub output: OutputSpec,
    pub sign_convention: Option<SignConvention>,
}

fn parse_sign(s: &str) -> Result<SignConvention, String> {
    match s {
        "plus_i" => Ok(SignConvention::PlusI),
        "minus_i" => Ok(SignConvention::MinusI),
        other => Err(format!("expected plus_i or minus_i, got '{other}'")),
    }
}

fn parse_complex(s: &str) -> Result<[f64; 2], String> {
    let (re, im) = s.split_once(',').ok_or_else(|| format!("expected 're,im', got '{s}'"))?;
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}"));
    Ok([p(re)?, p(im)?])
}

/// Spectral portraits, limit graphs and eigenvalue predictions for
/// `iεy'' + q(x)y = λy` and the Orr–Sommerfeld problem.
#[derive(Debug, Clone, Default, Parser)]
#[command(name = "spectral-portrait", version)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Option<Command>,
    /// JSON configuration file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// linear, quadratic, shifted_square or half_sine.
    #[arg(long)]
    pub profile: Option<KindName>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    /// Quadratic reduction `q = scale·(x-β)² + shift`.
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub shift: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub reynolds: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Default 0.5.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Default 0.05.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Default 6.
    #[arg(long)]
    pub depth: Option<f64>,
    /// Radius of the neighbourhoods of endpoints and knots left without
    /// predictions. Default 0.1.
    #[arg(long)]
    pub delta: Option<f64>,
    /// `re,im`, for `stokes`.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub lambda: Option<[f64; 2]>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub format: Option<Vec<Format>>,
    /// plus_i (default) or minus_i.
    #[arg(long, value_parser = parse_sign)]
    pub sign_convention: Option<SignConvention>,
}

/// Which operator a run discretizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Operator {
    /// `iε y'' + q y`, `ε` as given on the command line.
    Model { eps: f64 },
    OrrSommerfeld { alpha: f64, reynolds: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub profile: Profile,
    pub operator: Option<Operator>,
    pub n: Option<usize>,
    pub sigma: f64,
    pub depth: f64,
    pub tau: f64,
    pub delta: f64,
    pub lambda: Option<Complex64>,
    pub out: PathBuf,
    pub formats: Vec<Format>,
    pub sign_convention: SignConvention,
}

impl RunConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

pub const DEFAULT_SIGMA: f64 = 0.5;
pub const DEFAULT_TAU: f64 = 0.05;
pub const DEFAULT_DEPTH: f64 = 6.0;
pub const DEFAULT_DELTA: f64 = 0.1;

pub fn load_file(path: &Path) -> Result<ConfigFile, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

impl Cli {
    /// Merge the flags over the configuration file, if any, and validate.
    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let file = match &self.config {
            Some(p) => load_file(p)?,
            None => ConfigFile::default(),
        };
        self.merge(file).validate()
    }

    fn merge(&self, mut f: ConfigFile) -> ConfigFile {
        if self.command.is_some() {
            f.command = self.command;
        }
        if let Some(kind) = self.profile {
            f.profile = Some(ProfileSpec { kind, beta: None, scale: None, shift: None });
        }
        if self.beta.is_some() || self.scale.is_some() || self.shift.is_some() {
            let spec = f.profile.get_or_insert(ProfileSpec { kind: KindName::Quadratic, beta: None, scale: None, shift: None });
            spec.beta = self.beta.or(spec.beta);
            spec.scale = self.scale.or(spec.scale);
            spec.shift = self.shift.or(spec.shift);
        }
        let p = &mut f.parameters;
        p.eps = self.eps.or(p.eps);
        p.alpha = self.alpha.or(p.alpha);
        p.reynolds = self.reynolds.or(p.reynolds);
        p.sigma = self.sigma.or(p.sigma);
        p.n = self.n.or(p.n);
        p.depth = self.depth.or(p.depth);
        p.tau = self.tau.or(p.tau);
        p.delta = self.delta.or(p.delta);
        p.lambda = self.lambda.or(p.lambda);
        if self.out.is_some() {
            f.output.dir = self.out.clone();
        }
        if self.format.is_some() {
            f.output.formats = self.format.clone();
        }
        if self.sign_convention.is_some() {
            f.sign_convention = self.sign_convention;
        }
        f
    }
}

impl ConfigFile {
    pub fn validate(self) -> Result<RunConfig, ConfigError> {
        let command = self.command.ok_or_else(|| config_err("missing field: command"))?;
        let spec = self.profile.ok_or_else(|| config_err("missing field: profile"))?;
        let profile = Profile::try_from(spec).map_err(|e| config_err(format!("profile: {e}")))?;
        let p = self.parameters;
        let name = command.as_str();
        let unexpected = |field: &str, present: bool| {
            if present {
                Err(config_err(format!("field '{field}' is not used by {name}")))
            } else {
                Ok(())
            }
        };
        let operator = match (p.eps, p.alpha, p.reynolds) {
            (None, None, None) => None,
            (Some(eps), None, None) => Some(Operator::Model { eps }),
            (None, Some(alpha), Some(reynolds)) => Some(Operator::OrrSommerfeld { alpha, reynolds }),
            (Some(_), _, _) => return Err(config_err("fields 'eps' and 'alpha'/'reynolds' exclude each other")),
            (None, Some(_), None) => return Err(config_err("missing field: reynolds")),
            (None, None, Some(_)) => return Err(config_err("missing field: alpha")),
        };
        match command {
            Command::Portrait | Command::Compare => {
                if operator.is_none() {
                    return Err(config_err("missing field: eps (or alpha and reynolds)"));
                }
                if p.n.is_none() {
                    return Err(config_err("missing field: n"));
                }
                unexpected("lambda", p.lambda.is_some())?;
            }
            Command::Predict => {
                if operator.is_none() {
                    return Err(config_err("missing field: eps (or alpha and reynolds)"));
                }
                unexpected("n", p.n.is_some())?;
                unexpected("lambda", p.lambda.is_some())?;
            }
            Command::Graph => {
                unexpected("eps", p.eps.is_some())?;
                unexpected("n", p.n.is_some())?;
                unexpected("lambda", p.lambda.is_some())?;
            }
            Command::Stokes => {
                if p.lambda.is_none() {
                    return Err(config_err("missing field: lambda"));
                }
                unexpected("eps", p.eps.is_some())?;
                unexpected("alpha", p.alpha.is_some())?;
                unexpected("reynolds", p.reynolds.is_some())?;
                unexpected("n", p.n.is_some())?;
            }
        }
        if let Some(op) = operator {
            match op {
                Operator::Model { eps } if !(eps > 0.0 && eps < 1.0) => {
                    return Err(config_err(format!("eps = {eps} must lie in (0, 1)")));
                }
                Operator::OrrSommerfeld { alpha, reynolds } if !(alpha > 0.0 && reynolds > 0.0) => {
                    return Err(config_err(format!("alpha = {alpha} and reynolds = {reynolds} must be positive")));
                }
                _ => {}
            }
        }
        if let Some(n) = p.n {
            if !(4..=2048).contains(&n) {
                return Err(config_err(format!("n = {n} outside 4..=2048")));
            }
        }
        let sigma = p.sigma.unwrap_or(DEFAULT_SIGMA);
        let depth = p.depth.unwrap_or(DEFAULT_DEPTH);
        let tau = p.tau.unwrap_or(DEFAULT_TAU);
        let delta = p.delta.unwrap_or(DEFAULT_DELTA);
        if !(sigma >= 0.5) {
            return Err(config_err(format!("sigma = {sigma} below 0.5")));
        }
        for (field, v) in [("depth", depth), ("tau", tau), ("delta", delta)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(config_err(format!("{field} = {v} must be positive")));
            }
        }
        let mut formats = self.output.formats.unwrap_or_else(|| vec![Format::Csv, Format::Json, Format::Svg]);
        formats.sort();
        formats.dedup();
        Ok(RunConfig {
            command,
            profile,
            operator,
            n: p.n,
            sigma,
            depth,
            tau,
            delta,
            lambda: p.lambda.map(|[re, im]| Complex64::new(re, im)),
            out: self.output.dir.unwrap_or_else(|| PathBuf::from(".")),
            formats,
            sign_convention: self.sign_convention.unwrap_or_default(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(args: &[&str]) -> Cli {
        Cli::parse_from(std::iter::once("spectral-portrait").chain(args.iter().copied()))
    }

    #[test]
    fn flags_resolve() {
        let c = cli(&["portrait", "--profile", "linear", "--eps", "1e-3", "--n", "100"]).resolve().unwrap();
        assert_eq!(c.command, Command::Portrait);
        assert_eq!(c.operator, Some(Operator::Model { eps: 1e-3 }));
        assert_eq!((c.sigma, c.tau, c.depth), (0.5, 0.05, 6.0));
        assert_eq!(c.sign_convention, SignConvention::PlusI);
        assert_eq!(c.formats, vec![Format::Csv, Format::Json, Format::Svg]);
    }

    #[test]
    fn missing_and_unexpected_fields_are_named() {
        let e = cli(&["portrait", "--profile", "linear", "--eps", "1e-3"]).resolve().unwrap_err();
        assert!(e.0.contains("n"), "{e}");
        let e = cli(&["compare", "--profile", "linear", "--alpha", "1", "--n", "50"]).resolve().unwrap_err();
        assert!(e.0.contains("reynolds"), "{e}");
        let e = cli(&["graph", "--profile", "linear", "--eps", "0.1"]).resolve().unwrap_err();
        assert!(e.0.contains("eps"), "{e}");
        let e = cli(&["stokes", "--profile", "linear"]).resolve().unwrap_err();
        assert!(e.0.contains("lambda"), "{e}");
        assert!(cli(&["graph"]).resolve().unwrap_err().0.contains("profile"));
    }

    #[test]
    fn command_line_wins_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(
            &path,
            r#"{"command": "predict", "profile": {"kind": "quadratic", "beta": 0.25},
                "parameters": {"eps": 0.02, "sigma": 0.7}, "output": {"formats": ["json"]},
                "sign_convention": "minus_i"}"#,
        )
        .unwrap();
        let mut c = cli(&["--eps", "0.01"]);
        c.config = Some(path);
        let r = c.resolve().unwrap();
        assert_eq!(r.command, Command::Predict);
        assert_eq!(r.operator, Some(Operator::Model { eps: 0.01 }));
        assert_eq!(r.sigma, 0.7);
        assert_eq!(r.formats, vec![Format::Json]);
        assert_eq!(r.sign_convention, SignConvention::MinusI);
    }

    #[test]
    fn lambda_and_signs_parse() {
        let c = cli(&["stokes", "--profile", "linear", "--lambda", "-0.2,-0.3", "--sign-convention", "minus_i"]);
        let r = c.resolve().unwrap();
        assert_eq!(r.lambda, Some(Complex64::new(-0.2, -0.3)));
        assert_eq!(r.sign_convention, SignConvention::MinusI);
        assert!(Cli::try_parse_from(["x", "graph", "--sign-convention", "up"]).is_err());
    }
}
