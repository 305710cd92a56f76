use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wavesim_core::{preset, EngineKind, Error, ScenarioConfig, PRESET_NAMES};

mod compare;
mod config;
mod output;
mod run;

const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(
    version,
    about = "Quantum, classical and interpolated wave-packet simulations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write CSV outputs plus a manifest
    Run(RunArgs),
    /// Report deviations between two run directories
    Compare {
        dir_a: PathBuf,
        dir_b: PathBuf,
        /// Print the report as JSON
        #[arg(long)]
        json: bool,
    },
    /// Check that every file listed in a run manifest still matches its digest
    Verify { dir: PathBuf },
    /// List the shipped presets
    Presets,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Shipped scenario name
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,
    /// TOML scenario file
    #[arg(long)]
    config: Option<PathBuf>,
    /// quantum, classical or epsilon
    #[arg(long)]
    engine: Option<EngineKind>,
    /// Degree of quantumness for the epsilon engine
    #[arg(long)]
    eps: Option<f64>,
    /// Number of trajectories per family
    #[arg(long)]
    trajectories: Option<usize>,
    #[arg(long, default_value = "run")]
    out: PathBuf,
    /// Write every grid point instead of at most 512 per snapshot
    #[arg(long)]
    full_density: bool,
}

impl RunArgs {
    fn scenario(&self) -> wavesim_core::Result<ScenarioConfig> {
        let mut cfg = match (&self.preset, &self.config) {
            (Some(name), _) => preset(name)?,
            (None, Some(path)) => config::load(path)?,
            (None, None) => return Err(Error::Config("give --preset or --config".into())),
        };
        if let Some(engine) = self.engine {
            cfg.engine = engine;
        }
        if let Some(eps) = self.eps {
            if cfg.engine != EngineKind::Epsilon {
                return Err(Error::Config(format!(
                    "--eps needs the epsilon engine, got {}",
                    cfg.engine
                )));
            }
            cfg.epsilon = eps;
        }
        if let Some(n) = self.trajectories {
            if cfg.seeds.is_some() {
                return Err(Error::Config(format!(
                    "{} uses fixed seeds; --trajectories does not apply",
                    cfg.name
                )));
            }
            cfg.n_traj = n;
        }
        Ok(cfg)
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Diverged { .. }) => EXIT_DIVERGED,
        Some(_) => EXIT_CONFIG,
        None => 1,
    }
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.scenario()?;
            run::run(
                &cfg,
                &args.out,
                run::RunOptions {
                    full_density: args.full_density,
                },
            )?;
        }
        Command::Compare { dir_a, dir_b, json } => {
            let report = compare::compare(&dir_a, &dir_b)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{report}");
            }
        }
        Command::Verify { dir } => {
            let manifest = output::Manifest::read(&dir)?;
            for entry in &manifest.files {
                let digest = output::sha256_file(&dir.join(&entry.name))?;
                if digest != entry.sha256 {
                    return Err(Error::Mismatch(format!(
                        "{} does not match its manifest digest",
                        entry.name
                    ))
                    .into());
                }
            }
            println!("{} files verified", manifest.files.len());
        }
        Command::Presets => {
            for name in PRESET_NAMES {
                println!("{name}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_error_kind() {
        let diverged = anyhow::Error::from(Error::Diverged {
            step: 3,
            time: 0.003,
            mode: "classical".into(),
        });
        assert_eq!(exit_code(&diverged), EXIT_DIVERGED);
        assert_eq!(exit_code(&Error::Config("x".into()).into()), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::Mismatch("x".into()).into()), EXIT_CONFIG);
        assert_eq!(exit_code(&anyhow::anyhow!("disk full")), 1);
    }

    #[test]
    fn engine_override_and_eps() {
        let cli = Cli::parse_from([
            "wavesim",
            "run",
            "--preset",
            "free_gauss",
            "--engine",
            "epsilon",
            "--eps",
            "0.3",
        ]);
        let Command::Run(args) = cli.command else {
            panic!()
        };
        let cfg = args.scenario().unwrap();
        assert_eq!((cfg.engine, cfg.epsilon), (EngineKind::Epsilon, 0.3));

        let cli = Cli::parse_from(["wavesim", "run", "--preset", "free_gauss", "--eps", "0.3"]);
        let Command::Run(args) = cli.command else {
            panic!()
        };
        assert!(matches!(args.scenario(), Err(Error::Config(_))));
    }

    #[test]
    fn preset_and_config_are_exclusive() {
        assert!(Cli::try_parse_from(["wavesim", "run", "--preset", "a", "--config", "b"]).is_err());
        assert!(Cli::try_parse_from(["wavesim", "run"]).is_err());
    }
}
