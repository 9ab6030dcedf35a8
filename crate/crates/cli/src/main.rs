use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use offtrack_cli::commands::{self, Command};
use offtrack_cli::config::{FilterConfig, ScenarioConfig, SolverConfig};
use offtrack_cli::error::CliError;
use offtrack_cli::scenarios;

#[derive(Parser)]
#[command(name = "offtrack", version, about = "Off-policy output-feedback tracking experiments")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Check the standing assumptions and augmented structure.
    Check(Common),
    /// Model-based optimal gain and kernels.
    Oracle(Common),
    /// Learn the tracking gain from one behavior log.
    Learn(Common),
    /// Learn (or use `deploy_gain`) and deploy on the plant.
    Track(Common),
    /// Kernel solution error against the pre-collection length.
    #[command(name = "sweep-k0")]
    SweepK0 {
        #[command(flatten)]
        common: Common,
        /// Comma-separated k0 values.
        #[arg(long, value_delimiter = ',')]
        k0_list: Option<Vec<usize>>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Direct,
    Gradient,
}

#[derive(Args)]
struct Common {
    /// Scenario JSON file.
    #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
    config: Option<PathBuf>,
    /// Bundled scenario name.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    /// Place every filter root at this radius instead of the origin.
    #[arg(long)]
    filter_radius: Option<f64>,
}

impl Common {
    fn load(&self) -> Result<ScenarioConfig, CliError> {
        let mut cfg = match (&self.config, &self.scenario) {
            (Some(path), _) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                ScenarioConfig::from_json(&text)?
            }
            (None, Some(name)) => scenarios::load(name)?,
            (None, None) => return Err(CliError::Config("--config or --scenario is required".into())),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        match self.solver {
            Some(SolverArg::Direct) => cfg.solver = SolverConfig::Direct,
            Some(SolverArg::Gradient) if !matches!(cfg.solver, SolverConfig::Gradient { .. }) => {
                cfg.solver = SolverConfig::gradient_default()
            }
            _ => {}
        }
        if let Some(radius) = self.filter_radius {
            cfg.filter = FilterConfig::Radius { radius };
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Sub::Check(c) => (Command::Check, c),
        Sub::Oracle(c) => (Command::Oracle, c),
        Sub::Learn(c) => (Command::Learn, c),
        Sub::Track(c) => (Command::Track, c),
        Sub::SweepK0 { common, k0_list } => (Command::SweepK0 { k0_list }, common),
    };
    let cfg = match common.load() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let report = commands::run(&command, cfg, &common.out);
    match &report.error {
        Some(e) => eprintln!("{}: {e}", report.status),
        None => println!("{} {}: ok ({})", report.command, report.scenario, common.out.display()),
    }
    ExitCode::from(report.exit_code as u8)
}
