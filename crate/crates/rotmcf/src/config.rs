//! Experiment configuration: defaults, then a flat `key = value` file, then
//! `ROTMCF_*` environment variables, then explicit overrides.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rotmcf_core::flow::FlowParams;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Prefix of environment overrides: `ROTMCF_FLOW_NODES=128` sets `flow_nodes`.
pub const ENV_PREFIX: &str = "ROTMCF_";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaChoice {
    /// `λ = (n − 1)/2`
    Half,
    /// `λ = n − 1`
    Full,
}

impl LambdaChoice {
    pub fn lambda(self, n: u32) -> f64 {
        let k = (n - 1) as f64;
        match self {
            Self::Half => 0.5 * k,
            Self::Full => k,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Self::Half => "half",
            Self::Full => "full",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: u32,
    pub lambda_choice: LambdaChoice,
    pub catenoid_nodes: usize,
    pub angenent_nodes: usize,
    pub flow_nodes: usize,
    /// Time step safety factor.
    pub cfl: f64,
    pub theta_pinch: f64,
    pub theta_collapse: f64,
    pub stitch_tol: f64,
    /// Closure tolerance of the Angenent shooting.
    pub closure_tol: f64,
    pub c1_tol: f64,
    pub t_max: f64,
    pub bracket_tol: f64,
    pub monitor_interval: f64,
    pub snapshot_interval: f64,
    pub barrier_interval: f64,
    /// Points of the concurrent scan that precedes bisection.
    pub coarse_points: usize,
    /// Upper bound on worker threads.
    pub workers: usize,
    pub output_dir: PathBuf,
    /// Only used to sample random test cases.
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 2,
            lambda_choice: LambdaChoice::Half,
            catenoid_nodes: 801,
            angenent_nodes: 401,
            flow_nodes: 256,
            cfl: 0.25,
            theta_pinch: 0.02,
            theta_collapse: 0.02,
            stitch_tol: 1e-3,
            closure_tol: 1e-9,
            c1_tol: 1e-10,
            t_max: 50.0,
            bracket_tol: 1e-4,
            monitor_interval: 0.01,
            snapshot_interval: 0.5,
            barrier_interval: 0.05,
            coarse_points: 4,
            workers: 4,
            output_dir: PathBuf::from("out"),
            seed: 1,
        }
    }
}

/// Every accepted key, in file order.
pub const KEYS: &[&str] = &[
    "n",
    "lambda_choice",
    "catenoid_nodes",
    "angenent_nodes",
    "flow_nodes",
    "cfl",
    "theta_pinch",
    "theta_collapse",
    "stitch_tol",
    "closure_tol",
    "c1_tol",
    "t_max",
    "bracket_tol",
    "monitor_interval",
    "snapshot_interval",
    "barrier_interval",
    "coarse_points",
    "workers",
    "output_dir",
    "seed",
];

fn bad(key: &str, value: &str, why: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key} = {value:?}: {why}"))
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| bad(key, value, e))
}

impl ExperimentConfig {
    pub fn lambda(&self) -> f64 {
        self.lambda_choice.lambda(self.n)
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        match key {
            "n" => self.n = parse(key, v)?,
            "lambda_choice" => {
                self.lambda_choice = match v {
                    "half" => LambdaChoice::Half,
                    "full" => LambdaChoice::Full,
                    _ => return Err(bad(key, v, "expected half or full")),
                }
            }
            "catenoid_nodes" => self.catenoid_nodes = parse(key, v)?,
            "angenent_nodes" => self.angenent_nodes = parse(key, v)?,
            "flow_nodes" => self.flow_nodes = parse(key, v)?,
            "cfl" => self.cfl = parse(key, v)?,
            "theta_pinch" => self.theta_pinch = parse(key, v)?,
            "theta_collapse" => self.theta_collapse = parse(key, v)?,
            "stitch_tol" => self.stitch_tol = parse(key, v)?,
            "closure_tol" => self.closure_tol = parse(key, v)?,
            "c1_tol" => self.c1_tol = parse(key, v)?,
            "t_max" => self.t_max = parse(key, v)?,
            "bracket_tol" => self.bracket_tol = parse(key, v)?,
            "monitor_interval" => self.monitor_interval = parse(key, v)?,
            "snapshot_interval" => self.snapshot_interval = parse(key, v)?,
            "barrier_interval" => self.barrier_interval = parse(key, v)?,
            "coarse_points" => self.coarse_points = parse(key, v)?,
            "workers" => self.workers = parse(key, v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "seed" => self.seed = parse(key, v)?,
            _ => return Err(CliError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Reads `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::Config(format!("{origin}:{}: expected key = value", no + 1)));
            };
            self.set(k.trim(), v).map_err(|e| CliError::Config(format!("{origin}:{}: {e}", no + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Applies `ROTMCF_<KEY>` variables from `vars`.
    pub fn apply_env<I: IntoIterator<Item = (String, String)>>(&mut self, vars: I) -> Result<(), CliError> {
        let wanted: BTreeMap<String, &str> =
            KEYS.iter().map(|k| (format!("{ENV_PREFIX}{}", k.to_uppercase()), *k)).collect();
        let mut found: Vec<(&str, String)> =
            vars.into_iter().filter_map(|(name, v)| wanted.get(&name).map(|k| (*k, v))).collect();
        found.sort();
        for (k, v) in found {
            self.set(k, &v).map_err(|e| CliError::Config(format!("environment: {e}")))?;
        }
        Ok(())
    }

    /// Defaults, then `file`, then the process environment, then `overrides`.
    pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let mut c = Self::default();
        if let Some(f) = file {
            c.apply_file(f)?;
        }
        c.apply_env(std::env::vars())?;
        for (k, v) in overrides {
            c.set(k, v)?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.n < 2 {
            return Err(CliError::Config(format!("n must be at least 2, got {}", self.n)));
        }
        let positive = [
            ("cfl", self.cfl),
            ("theta_pinch", self.theta_pinch),
            ("theta_collapse", self.theta_collapse),
            ("stitch_tol", self.stitch_tol),
            ("closure_tol", self.closure_tol),
            ("c1_tol", self.c1_tol),
            ("t_max", self.t_max),
            ("bracket_tol", self.bracket_tol),
            ("monitor_interval", self.monitor_interval),
            ("snapshot_interval", self.snapshot_interval),
            ("barrier_interval", self.barrier_interval),
        ];
        if let Some((k, v)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(CliError::Config(format!("{k} must be positive and finite, got {v}")));
        }
        if self.workers == 0 {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    /// The configuration as `key = value` lines in [`KEYS`] order. Floats
    /// print in shortest round-trip form, so the text reloads exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("n", self.n.to_string()),
            ("lambda_choice", self.lambda_choice.name().into()),
            ("catenoid_nodes", self.catenoid_nodes.to_string()),
            ("angenent_nodes", self.angenent_nodes.to_string()),
            ("flow_nodes", self.flow_nodes.to_string()),
            ("cfl", self.cfl.to_string()),
            ("theta_pinch", self.theta_pinch.to_string()),
            ("theta_collapse", self.theta_collapse.to_string()),
            ("stitch_tol", self.stitch_tol.to_string()),
            ("closure_tol", self.closure_tol.to_string()),
            ("c1_tol", self.c1_tol.to_string()),
            ("t_max", self.t_max.to_string()),
            ("bracket_tol", self.bracket_tol.to_string()),
            ("monitor_interval", self.monitor_interval.to_string()),
            ("snapshot_interval", self.snapshot_interval.to_string()),
            ("barrier_interval", self.barrier_interval.to_string()),
            ("coarse_points", self.coarse_points.to_string()),
            ("workers", self.workers.to_string()),
            ("output_dir", self.output_dir.display().to_string()),
            ("seed", self.seed.to_string()),
        ]
    }

    /// SHA-256 of the keys that affect results (not `output_dir` or
    /// `workers`), hex encoded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.entries() {
            if k != "output_dir" && k != "workers" {
                h.update(format!("{k}={v}\n"));
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn flow_params(&self) -> FlowParams {
        FlowParams {
            n: self.n,
            nodes: self.flow_nodes,
            cfl: self.cfl,
            theta_pinch: self.theta_pinch,
            theta_collapse: self.theta_collapse,
            stitch_tol: self.stitch_tol,
            monitor_interval: self.monitor_interval,
            snapshot_interval: Some(self.snapshot_interval),
            ..FlowParams::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trips() {
        let mut c = ExperimentConfig { n: 3, cfl: 0.1 + 0.2, lambda_choice: LambdaChoice::Full, ..Default::default() };
        c.output_dir = "some/dir".into();
        let mut d = ExperimentConfig::default();
        d.apply_text(&c.to_text(), "test").unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn comments_blank_lines_and_spaces() {
        let mut c = ExperimentConfig::default();
        c.apply_text("# header\n\n  flow_nodes =  64  # coarse\nt_max=2\n", "test").unwrap();
        assert_eq!((c.flow_nodes, c.t_max), (64, 2.0));
    }

    #[test]
    fn unknown_keys_and_bad_values_are_errors() {
        let mut c = ExperimentConfig::default();
        assert!(c.apply_text("nodes = 3", "x").is_err());
        assert!(c.apply_text("n = two", "x").is_err());
        assert!(c.apply_text("lambda_choice = third", "x").is_err());
        assert!(c.apply_text("just words", "x").is_err());
    }

    #[test]
    fn environment_overrides_file_values() {
        let mut c = ExperimentConfig::default();
        c.apply_text("flow_nodes = 64", "x").unwrap();
        let env = vec![("ROTMCF_FLOW_NODES".to_string(), "96".to_string()), ("OTHER".into(), "1".into())];
        c.apply_env(env).unwrap();
        assert_eq!(c.flow_nodes, 96);
    }

    #[test]
    fn validation() {
        assert!(ExperimentConfig { n: 1, ..Default::default() }.validate().is_err());
        assert!(ExperimentConfig { bracket_tol: 0.0, ..Default::default() }.validate().is_err());
        assert!(ExperimentConfig::default().validate().is_ok());
    }

    #[test]
    fn hash_ignores_output_location() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig { output_dir: "elsewhere".into(), workers: 9, ..Default::default() };
        let c = ExperimentConfig { flow_nodes: 128, ..Default::default() };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn lambda_choices() {
        assert_eq!(LambdaChoice::Half.lambda(3), 1.0);
        assert_eq!(LambdaChoice::Full.lambda(3), 2.0);
    }
}
