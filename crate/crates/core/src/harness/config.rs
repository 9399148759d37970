//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Calibrate,
    Flow,
    Scan,
    Bubble,
    Variational,
    Wente,
    Accept,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Calibrate,
        Command::Flow,
        Command::Scan,
        Command::Bubble,
        Command::Variational,
        Command::Wente,
        Command::Accept,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Calibrate => "calibrate",
            Command::Flow => "flow",
            Command::Scan => "scan",
            Command::Bubble => "bubble",
            Command::Variational => "variational",
            Command::Wente => "wente",
            Command::Accept => "accept",
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown command `{s}`")))
    }
}

use Command::*;

/// One documented key: name, default, commands it applies to, description.
pub struct KeySpec {
    pub key: &'static str,
    pub default: &'static str,
    pub commands: &'static [Command],
    pub help: &'static str,
}

const GRID: &[Command] = &[Calibrate, Flow, Variational, Wente, Accept];
const INIT: &[Command] = &[Flow, Variational];
const FLOW: &[Command] = &[Flow];
const ALL: &[Command] = &Command::ALL;

pub const SCHEMA: &[KeySpec] = &[
    KeySpec { key: "seed", default: "0", commands: ALL, help: "RNG seed; overridden by --seed" },
    KeySpec { key: "M", default: "256", commands: GRID, help: "circle grid size (even, >= 8); for accept, values below 128 select reduced mode" },
    KeySpec { key: "n", default: "3", commands: INIT, help: "target sphere S^{n-1} dimension n" },
    KeySpec { key: "initial", default: "perturbed_constant", commands: INIT, help: "constant | great_circle | bubble_pullback | bandlimited_noise | perturbed_constant" },
    KeySpec { key: "initial_k", default: "1", commands: INIT, help: "great_circle winding number" },
    KeySpec { key: "initial_lambda", default: "0.1", commands: INIT, help: "bubble_pullback concentration" },
    KeySpec { key: "initial_x0", default: "0", commands: INIT, help: "bubble_pullback center" },
    KeySpec { key: "initial_amplitude", default: "0.1", commands: INIT, help: "noise amplitude" },
    KeySpec { key: "initial_max_mode", default: "3", commands: INIT, help: "bandlimited_noise highest mode" },
    KeySpec { key: "dt", default: "1e-3", commands: FLOW, help: "time step" },
    KeySpec { key: "t_end", default: "1", commands: FLOW, help: "final time" },
    KeySpec { key: "integrator", default: "exp_euler", commands: FLOW, help: "exp_euler | picard" },
    KeySpec { key: "slab_length", default: "0.1", commands: FLOW, help: "Picard slab length" },
    KeySpec { key: "picard_max_iters", default: "20", commands: FLOW, help: "Picard iteration cap" },
    KeySpec { key: "picard_tol", default: "1e-8", commands: FLOW, help: "Picard convergence tolerance" },
    KeySpec { key: "reproject", default: "true", commands: FLOW, help: "renormalize to the sphere after each step" },
    KeySpec { key: "nonlinear", default: "true", commands: FLOW, help: "false runs the linear half-heat flow" },
    KeySpec { key: "snapshot_stride", default: "10", commands: FLOW, help: "steps between snapshots" },
    KeySpec { key: "eps1", default: "0.05", commands: &[Flow, Scan], help: "concentration threshold" },
    KeySpec { key: "eps0", default: "0.5", commands: FLOW, help: "minimal bubble energy (restart budget)" },
    KeySpec { key: "sphere_tol", default: "1e-8", commands: FLOW, help: "sphere constraint tolerance" },
    KeySpec { key: "quad_tol", default: "1e-6", commands: FLOW, help: "quadrature tolerance (junction energy drops)" },
    KeySpec { key: "scan_radii", default: "0.01,0.02,0.04", commands: FLOW, help: "radii watched during the flow" },
    KeySpec { key: "glue", default: "false", commands: FLOW, help: "continue past concentration by restarting" },
    KeySpec { key: "trace", default: "", commands: &[Scan, Bubble], help: "flow output directory; overridden by --trace" },
    KeySpec { key: "radii", default: "0.01,0.02,0.04", commands: &[Scan], help: "scan radii; overridden by --radii" },
    KeySpec { key: "report_radius", default: "0.25", commands: &[Scan], help: "radius of the L4 and H1 ratio reports" },
    KeySpec { key: "at", default: "", commands: &[Bubble], help: "t,x,R concentration point; overridden by --at" },
    KeySpec { key: "L", default: "50", commands: &[Bubble], help: "line half-width" },
    KeySpec { key: "line_M", default: "2048", commands: &[Bubble], help: "line grid size" },
    KeySpec { key: "N", default: "0", commands: &[Bubble], help: "linear-zone exponent of phi_R" },
    KeySpec { key: "gamma", default: "1", commands: &[Bubble], help: "look-back factor: needs t - gamma R^2 inside the trace" },
    KeySpec { key: "eps", default: "0.1", commands: &[Variational], help: "weight parameter" },
    KeySpec { key: "s", default: "0.5", commands: &[Variational], help: "fractional order" },
    KeySpec { key: "p", default: "2", commands: &[Variational], help: "integrability exponent (>= 2)" },
    KeySpec { key: "max_iters", default: "400", commands: &[Variational], help: "descent iteration cap" },
    KeySpec { key: "tol", default: "1e-8", commands: &[Variational], help: "relative energy decrease stopping tolerance" },
    KeySpec { key: "horizon", default: "10", commands: &[Variational], help: "time horizon in units of eps" },
    KeySpec { key: "steps_per_eps", default: "20", commands: &[Variational], help: "time steps per unit eps" },
    KeySpec { key: "sweep", default: "0.2,0.1,0.05,0.025", commands: &[Variational], help: "eps values of the sweep; empty disables it" },
    KeySpec { key: "pairs", default: "100", commands: &[Wente], help: "number of random divergence-free pairs" },
    KeySpec { key: "max_mode", default: "4", commands: &[Wente], help: "highest mode of the random fields" },
    KeySpec { key: "delta", default: "0.1", commands: &[Wente], help: "diagonal cutoff of the correction" },
    KeySpec { key: "criteria", default: "all", commands: &[Accept], help: "comma-separated criterion numbers, or all" },
    KeySpec { key: "c_half_factor", default: "1", commands: &[Accept], help: "multiplies the calibrated C_half (fault injection)" },
];

/// A parsed and fully resolved configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub seed: u64,
    pub out: PathBuf,
    values: BTreeMap<String, String>,
}

fn spec(key: &str) -> Option<&'static KeySpec> {
    SCHEMA.iter().find(|k| k.key == key)
}

impl ExperimentConfig {
    /// Parses `key = value` lines; `#` starts a comment. Keys that are not
    /// documented for `command` are rejected, as are duplicates.
    pub fn parse(command: Command, text: &str) -> Result<Self> {
        let mut given = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`, got `{line}`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            match spec(key) {
                Some(s) if s.commands.contains(&command) => {}
                Some(_) => {
                    return Err(Error::Config(format!(
                        "line {}: key `{key}` does not apply to `{}`",
                        lineno + 1,
                        command.name()
                    )))
                }
                None => return Err(Error::Config(format!("line {}: unknown key `{key}`", lineno + 1))),
            }
            if given.insert(key.to_string(), value.to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
        }
        let mut values = BTreeMap::new();
        for s in SCHEMA.iter().filter(|s| s.commands.contains(&command)) {
            let v = given.remove(s.key).unwrap_or_else(|| s.default.to_string());
            values.insert(s.key.to_string(), v);
        }
        let mut cfg = Self { command, seed: 0, out: PathBuf::from("out"), values };
        cfg.seed = cfg.get("seed")?;
        Ok(cfg)
    }

    pub fn load(command: Command, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(command, &text)
    }

    pub fn defaults(command: Command) -> Self {
        Self::parse(command, "").expect("schema defaults parse")
    }

    /// Overrides a documented key, as the command-line flags do.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !self.values.contains_key(key) {
            return Err(Error::Config(format!("key `{key}` does not apply to `{}`", self.command.name())));
        }
        self.values.insert(key.to_string(), value.into());
        if key == "seed" {
            self.seed = self.get("seed")?;
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.values.insert("seed".into(), seed.to_string());
        self
    }

    pub fn with_out(mut self, out: impl Into<PathBuf>) -> Self {
        self.out = out.into();
        self
    }

    pub fn raw(&self, key: &str) -> Result<&str> {
        self.values
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Config(format!("key `{key}` does not apply to `{}`", self.command.name())))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.raw(key)?;
        raw.parse()
            .map_err(|_| Error::Config(format!("cannot parse `{key} = {raw}`")))
    }

    /// Comma-separated numbers; empty gives an empty list.
    pub fn list(&self, key: &str) -> Result<Vec<f64>> {
        let raw = self.raw(key)?;
        if raw.is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|p| {
                p.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("cannot parse `{key} = {raw}` as a list of numbers")))
            })
            .collect()
    }

    /// The resolved configuration in the input format, keys sorted.
    pub fn resolved(&self) -> String {
        let mut s = format!("# resolved configuration for `{}`\n", self.command.name());
        for (k, v) in &self.values {
            writeln!(s, "{k} = {v}").unwrap();
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_defaults() {
        let cfg = ExperimentConfig::parse(Flow, "# a comment\n dt = 5e-4 # trailing\n\nM=64\n").unwrap();
        assert_eq!(cfg.get::<f64>("dt").unwrap(), 5e-4);
        assert_eq!(cfg.get::<usize>("M").unwrap(), 64);
        assert_eq!(cfg.get::<f64>("t_end").unwrap(), 1.0);
        assert_eq!(cfg.list("scan_radii").unwrap(), vec![0.01, 0.02, 0.04]);
    }

    #[test]
    fn rejects_unknown_misplaced_and_duplicate_keys() {
        assert!(matches!(ExperimentConfig::parse(Flow, "bogus = 1"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::parse(Flow, "eps = 0.1"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::parse(Flow, "dt = 1\ndt = 2"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::parse(Flow, "just words"), Err(Error::Config(_))));
    }

    #[test]
    fn resolved_round_trips() {
        let cfg = ExperimentConfig::parse(Variational, "eps = 0.05\nseed = 7").unwrap();
        assert_eq!(cfg.seed, 7);
        let again = ExperimentConfig::parse(Variational, &cfg.resolved()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn every_command_has_defaults() {
        for c in Command::ALL {
            let cfg = ExperimentConfig::defaults(c);
            assert_eq!(cfg.command, c);
            assert_eq!(c.name().parse::<Command>().unwrap(), c);
        }
    }

    #[test]
    fn bad_values_are_config_errors() {
        let cfg = ExperimentConfig::parse(Flow, "dt = fast").unwrap();
        assert!(matches!(cfg.get::<f64>("dt"), Err(Error::Config(_))));
    }
}
