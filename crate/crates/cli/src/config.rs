use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "lgadmm", version, about = "Multi-block linearized generalized ADMM on the correlation calibration benchmark")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandArgs,
}

#[derive(Debug, Subcommand)]
pub enum CommandArgs {
    /// Solve one calibration instance.
    Solve(RunArgs),
    /// Iteration counts and timings across a grid of relaxation factors.
    GammaSweep(RunArgs),
    /// Relaxation factor 1 against 1.9 on a shared instance.
    BaselineCompare(RunArgs),
    /// Strict-theory run followed by every trajectory certificate.
    Certify(RunArgs),
}

impl CommandArgs {
    pub fn split(self) -> (Command, RunArgs) {
        match self {
            CommandArgs::Solve(a) => (Command::Solve, a),
            CommandArgs::GammaSweep(a) => (Command::GammaSweep, a),
            CommandArgs::BaselineCompare(a) => (Command::BaselineCompare, a),
            CommandArgs::Certify(a) => (Command::Certify, a),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    GammaSweep,
    BaselineCompare,
    Certify,
}

/// Raw flags. Anything left unset falls back to the `--config` file, then to
/// the per-command default.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// key=value file; explicit flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Matrix order of the calibration instance.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Comma list (`0.5,1,1.5`) or range `start:stop:step`.
    #[arg(long)]
    pub gamma_grid: Option<String>,
    /// Proximal weight: every block uses `sigma·I`.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Reject configurations outside the convergence theory.
    #[arg(long)]
    pub strict: bool,
    /// Seeds per grid point in a sweep.
    #[arg(long)]
    pub repeat: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Corrupt the recorded trajectory before certification.
    #[arg(long)]
    pub negative_control: bool,
}

/// Fully resolved settings for one command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub n: usize,
    pub seed: u64,
    pub rho: f64,
    pub gamma: f64,
    pub gamma_grid: Vec<f64>,
    pub sigma: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub strict: bool,
    pub repeat: usize,
    pub out: PathBuf,
    pub negative_control: bool,
}

pub fn default_grid() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 5.0).collect()
}

impl RunConfig {
    pub fn defaults(command: Command) -> Self {
        let base = RunConfig {
            command,
            n: 50,
            seed: 0,
            rho: 1.0,
            gamma: 1.9,
            gamma_grid: default_grid(),
            sigma: lgadmm::calibration::DEFAULT_SIGMA,
            tolerance: 1e-6,
            max_iterations: 10_000,
            strict: false,
            repeat: 5,
            out: PathBuf::from("lgadmm-out"),
            negative_control: false,
        };
        match command {
            Command::Solve | Command::GammaSweep => base,
            Command::BaselineCompare => RunConfig { n: 100, ..base },
            Command::Certify => RunConfig {
                n: 20,
                gamma: 1.5,
                sigma: 4.0,
                tolerance: 1e-8,
                max_iterations: 20_000,
                strict: true,
                ..base
            },
        }
    }

    pub fn resolve(command: Command, args: &RunArgs) -> CliResult<Self> {
        let file = match &args.config {
            Some(path) => parse_config_file(path)?,
            None => BTreeMap::new(),
        };
        let d = Self::defaults(command);
        let grid = match args.gamma_grid.clone().or_else(|| file.get("gamma-grid").cloned()) {
            Some(text) => parse_grid(&text)?,
            None => d.gamma_grid.clone(),
        };
        let cfg = RunConfig {
            command,
            n: pick(args.n, &file, "n", d.n)?,
            seed: pick(args.seed, &file, "seed", d.seed)?,
            rho: pick(args.rho, &file, "rho", d.rho)?,
            gamma: pick(args.gamma, &file, "gamma", d.gamma)?,
            gamma_grid: grid,
            sigma: pick(args.sigma, &file, "sigma", d.sigma)?,
            tolerance: pick(args.tol, &file, "tol", d.tolerance)?,
            max_iterations: pick(args.max_iter, &file, "max-iter", d.max_iterations)?,
            strict: d.strict || args.strict || pick(None, &file, "strict", false)?,
            repeat: pick(args.repeat, &file, "repeat", d.repeat)?,
            out: pick(args.out.clone(), &file, "out", d.out)?,
            negative_control: args.negative_control || pick(None, &file, "negative-control", false)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let in_range = |g: f64| g > 0.0 && g < 2.0;
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return bad(format!("rho must be positive, got {}", self.rho));
        }
        if !in_range(self.gamma) {
            return bad(format!("gamma must lie in (0, 2), got {}", self.gamma));
        }
        if self.gamma_grid.is_empty() {
            return bad("gamma grid is empty".into());
        }
        if let Some(g) = self.gamma_grid.iter().find(|&&g| !in_range(g)) {
            return bad(format!("gamma grid value {g} outside (0, 2)"));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return bad(format!("sigma must be non-negative, got {}", self.sigma));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tolerance));
        }
        if self.max_iterations == 0 {
            return bad("max-iter must be at least 1".into());
        }
        if self.repeat == 0 {
            return bad("repeat must be at least 1".into());
        }
        Ok(())
    }
}

const KEYS: [&str; 12] = [
    "n", "seed", "rho", "gamma", "gamma-grid", "sigma", "tol", "max-iter", "strict", "repeat", "out", "negative-control",
];

/// `key = value` per line; `#` starts a comment. Underscores in keys are
/// accepted in place of dashes.
pub fn parse_config_file(path: &Path) -> CliResult<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config_text(&text)
}

pub fn parse_config_text(text: &str) -> CliResult<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected key=value", lineno + 1)))?;
        let key = key.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Config(format!("line {}: unknown key '{key}'", lineno + 1)));
        }
        out.insert(key, value.trim().to_string());
    }
    Ok(out)
}

fn pick<V: std::str::FromStr>(flag: Option<V>, file: &BTreeMap<String, String>, key: &str, default: V) -> CliResult<V> {
    if let Some(v) = flag {
        return Ok(v);
    }
    match file.get(key) {
        Some(text) => text
            .parse()
            .map_err(|_| CliError::Config(format!("cannot parse {key} = '{text}'"))),
        None => Ok(default),
    }
}

pub fn parse_grid(text: &str) -> CliResult<Vec<f64>> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| CliError::Config(format!("bad gamma grid entry '{s}'")))
    };
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if step.is_nan() || step <= 0.0 || stop < start {
            return Err(CliError::Config(format!("bad gamma range '{text}'")));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        // Rounded to 12 digits so 0.2:1.8:0.2 yields 0.6 rather than 0.6000000000000001.
        return Ok((0..count)
            .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
            .collect());
    }
    if parts.len() != 1 {
        return Err(CliError::Config(format!("bad gamma grid '{text}'")));
    }
    text.split(',').filter(|s| !s.trim().is_empty()).map(num).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_grid_matches_default() {
        assert_eq!(parse_grid("0.2:1.8:0.2").unwrap(), default_grid());
        assert_eq!(parse_grid("1, 1.5").unwrap(), vec![1.0, 1.5]);
        assert!(parse_grid("1:0:0.1").is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "# sweep\nn = 12\ngamma = 1.2\nmax_iter = 30\nstrict = true\n").unwrap();
        let args = RunArgs {
            config: Some(path),
            gamma: Some(0.7),
            ..RunArgs::default()
        };
        let cfg = RunConfig::resolve(Command::Solve, &args).unwrap();
        assert_eq!((cfg.n, cfg.gamma, cfg.max_iterations, cfg.strict), (12, 0.7, 30, true));
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let args = RunArgs { gamma: Some(2.5), ..RunArgs::default() };
        assert_eq!(RunConfig::resolve(Command::Solve, &args).unwrap_err().exit_code(), 2);
        let args = RunArgs { repeat: Some(0), ..RunArgs::default() };
        assert!(RunConfig::resolve(Command::GammaSweep, &args).is_err());
        let args = RunArgs { gamma_grid: Some("0.5,2.0".into()), ..RunArgs::default() };
        assert!(RunConfig::resolve(Command::GammaSweep, &args).is_err());
        assert!(parse_config_text("colour = blue").is_err());
    }

    #[test]
    fn certify_defaults_are_strict() {
        let cfg = RunConfig::defaults(Command::Certify);
        assert!(cfg.strict);
        assert_eq!((cfg.n, cfg.sigma, cfg.gamma), (20, 4.0, 1.5));
    }
}
