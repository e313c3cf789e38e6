use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rotmcf::commands::{self, InitialSpec, ScanSpec};
use rotmcf::{CliError, ExperimentConfig};

/// Rotationally symmetric mean curvature flow in the round sphere.
///
/// Settings come from the defaults, then `--config`, then `ROTMCF_<KEY>`
/// environment variables, then command-line flags and `--set`.
#[derive(Debug, Parser)]
#[command(name = "rotmcf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    keys: KeyFlags,
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Any configuration key as `key=value`; may repeat.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

/// One flag per configuration key, taken as text and parsed with the rest.
#[derive(Debug, Args)]
struct KeyFlags {
    #[arg(long, global = true)]
    n: Option<String>,
    #[arg(long, global = true)]
    lambda_choice: Option<String>,
    #[arg(long, global = true)]
    catenoid_nodes: Option<String>,
    #[arg(long, global = true)]
    angenent_nodes: Option<String>,
    #[arg(long, global = true)]
    flow_nodes: Option<String>,
    #[arg(long, global = true)]
    cfl: Option<String>,
    #[arg(long, global = true)]
    theta_pinch: Option<String>,
    #[arg(long, global = true)]
    theta_collapse: Option<String>,
    #[arg(long, global = true)]
    stitch_tol: Option<String>,
    #[arg(long, global = true)]
    closure_tol: Option<String>,
    #[arg(long, global = true)]
    c1_tol: Option<String>,
    #[arg(long, global = true)]
    t_max: Option<String>,
    #[arg(long, global = true)]
    bracket_tol: Option<String>,
    #[arg(long, global = true)]
    monitor_interval: Option<String>,
    #[arg(long, global = true)]
    snapshot_interval: Option<String>,
    #[arg(long, global = true)]
    barrier_interval: Option<String>,
    #[arg(long, global = true)]
    coarse_points: Option<String>,
    #[arg(long, global = true)]
    workers: Option<String>,
    #[arg(long, global = true)]
    output_dir: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
}

impl KeyFlags {
    fn pairs(&self) -> Vec<(String, String)> {
        let all = [
            ("n", &self.n),
            ("lambda_choice", &self.lambda_choice),
            ("catenoid_nodes", &self.catenoid_nodes),
            ("angenent_nodes", &self.angenent_nodes),
            ("flow_nodes", &self.flow_nodes),
            ("cfl", &self.cfl),
            ("theta_pinch", &self.theta_pinch),
            ("theta_collapse", &self.theta_collapse),
            ("stitch_tol", &self.stitch_tol),
            ("closure_tol", &self.closure_tol),
            ("c1_tol", &self.c1_tol),
            ("t_max", &self.t_max),
            ("bracket_tol", &self.bracket_tol),
            ("monitor_interval", &self.monitor_interval),
            ("snapshot_interval", &self.snapshot_interval),
            ("barrier_interval", &self.barrier_interval),
            ("coarse_points", &self.coarse_points),
            ("workers", &self.workers),
            ("output_dir", &self.output_dir),
            ("seed", &self.seed),
        ];
        all.into_iter().filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone()))).collect()
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Catenoid half-periods and the root C1.
    Catenoid {
        /// Solve for C1 (the default when no scan is given).
        #[arg(long)]
        find_c1: bool,
        /// Tabulate the half-period on `from:to:count`.
        #[arg(long)]
        scan: Option<ScanSpec>,
    },
    /// The closed geodesic of the shrinker metric.
    Angenent {
        /// Overrides the configured lambda.
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Evolve one initial curve.
    Flow {
        /// family:δ, ellipse:δ:H, constant:u0, slice:c or sphere.
        #[arg(long)]
        initial: InitialSpec,
        /// Defaults to t_max.
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Bisect for the critical parameter and check the near-critical flow.
    Bisect,
    /// Run the acceptance suite.
    Verify {
        /// Comma-separated criteria; all by default.
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
    },
    /// Print the effective configuration.
    Config,
}

fn overrides(cli: &Cli) -> Result<Vec<(String, String)>, CliError> {
    let mut v = cli.keys.pairs();
    for s in &cli.set {
        let Some((k, val)) = s.split_once('=') else {
            return Err(CliError::Config(format!("--set expects key=value, got {s:?}")));
        };
        v.push((k.trim().to_string(), val.trim().to_string()));
    }
    Ok(v)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(cli.config.as_deref(), &overrides(&cli)?)?;
    let summary = match cli.command {
        Command::Catenoid { find_c1, scan } => commands::cmd_catenoid(&cfg, find_c1, scan)?,
        Command::Angenent { lambda } => commands::cmd_angenent(&cfg, lambda)?,
        Command::Flow { initial, horizon } => commands::cmd_flow(&cfg, initial, horizon)?,
        Command::Bisect => commands::cmd_bisect(&cfg)?,
        Command::Verify { only } => {
            let ids: Vec<usize> = if only.is_empty() { (1..=rotmcf::acceptance::COUNT).collect() } else { only };
            commands::cmd_verify(&cfg, &ids)?
        }
        Command::Config => {
            print!("{}", cfg.to_text());
            return Ok(());
        }
    };
    print!("{}", rotmcf::output::to_json_text(&summary));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rotmcf: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
