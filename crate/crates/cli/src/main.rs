//! Command-line front end: scenario runs with CSV telemetry, run comparison,
//! and the lockstep plant/controller processes.

mod config;
mod csv;

use std::fs::File;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use config::{load_config, RunConfig};
use twip_core::hil::{controller_client, plant_serve};
use twip_core::scenario::{compare_runs, compute_metrics, run_scenario};
use twip_core::{ScenarioKind, Trajectory, WireMessage};

#[derive(Parser)]
#[command(
    name = "twip",
    about = "Closed-loop simulator of a two-wheeled self-balancing vehicle",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioName {
    /// No controller; the raw rider lean.
    Uncontrolled,
    /// Predictive torque control with ideal actuation.
    Mpc,
    /// Predictive torque control through the actuator delay line.
    MpcDelay,
    /// Torque-to-voltage cascade through the delayed motor chain.
    Hierarchical,
}

impl From<ScenarioName> for ScenarioKind {
    fn from(name: ScenarioName) -> Self {
        match name {
            ScenarioName::Uncontrolled => ScenarioKind::Uncontrolled,
            ScenarioName::Mpc => ScenarioKind::MpcIdeal,
            ScenarioName::MpcDelay => ScenarioKind::MpcDelayed,
            ScenarioName::Hierarchical => ScenarioKind::Hierarchical,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its telemetry as CSV.
    Simulate {
        /// Which scenario to run.
        #[arg(long, value_enum)]
        scenario: ScenarioName,
        /// Configuration file (`key = value` lines).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Override the configured run length (s).
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Compare two telemetry files and print improvement percentages.
    Compare {
        /// Baseline CSV.
        #[arg(long)]
        base: PathBuf,
        /// Improved CSV.
        #[arg(long)]
        improved: PathBuf,
    },
    /// Lockstep plant/controller processes.
    Hil {
        #[command(subcommand)]
        role: HilRole,
    },
}

#[derive(Subcommand)]
enum HilRole {
    /// Serve the plant side: gyro out, voltage in, telemetry CSV out.
    Plant {
        /// Address to listen on (`host:port`).
        #[arg(long)]
        listen: String,
        /// Configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Override the configured run length (s).
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Run the controller side against a plant endpoint.
    Control {
        /// Plant address to connect to (`host:port`).
        #[arg(long)]
        connect: String,
        /// Configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            scenario,
            config,
            out,
            duration,
        } => {
            let cfg = resolve_config(config, duration)?;
            let scenario_cfg = cfg.scenario(scenario.into());
            let traj = run_scenario(&scenario_cfg)?;
            write_csv(&out, &traj)?;
            print_summary(scenario_label(scenario), &traj)?;
            Ok(())
        }
        Command::Compare { base, improved } => {
            let base_traj = read_csv(&base)?;
            let improved_traj = read_csv(&improved)?;
            let base_metrics = compute_metrics(&base_traj)?;
            let improved_metrics = compute_metrics(&improved_traj)?;
            let cmp = compare_runs(&base_metrics, &improved_metrics)?;
            println!(
                "displacement_reduction: {:.2}%",
                cmp.displacement_reduction * 100.0
            );
            println!("torque_reduction: {:.2}%", cmp.torque_reduction * 100.0);
            println!(
                "stability_increase: {:.2}%",
                cmp.stability_increase * 100.0
            );
            Ok(())
        }
        Command::Hil { role } => match role {
            HilRole::Plant {
                listen,
                config,
                out,
                duration,
            } => {
                let cfg = resolve_config(config, duration)?;
                let session = cfg.session(listen);
                let scenario_cfg = cfg.scenario(ScenarioKind::Hierarchical);
                let traj = plant_serve(&session, &scenario_cfg)?;
                write_csv(&out, &traj)?;
                print_summary("hierarchical (plant process)", &traj)?;
                Ok(())
            }
            HilRole::Control { connect, config } => {
                let cfg = resolve_config(config, None)?;
                let session = cfg.session(connect);
                let log = controller_client(&session, cfg.robot, cfg.motor)?;
                let volts = log
                    .iter()
                    .filter(|m| matches!(m, WireMessage::Volt { .. }))
                    .count();
                let desynced = log
                    .iter()
                    .filter(|m| match m {
                        WireMessage::Sync {
                            speed_diff,
                            phase_diff,
                            ..
                        } => {
                            speed_diff.abs() > cfg.speed_threshold
                                || phase_diff.abs() > cfg.phase_threshold
                        }
                        _ => false,
                    })
                    .count();
                println!("session complete: {volts} voltage commands sent");
                println!("out-of-sync ticks: {desynced}");
                Ok(())
            }
        },
    }
}

fn resolve_config(path: Option<PathBuf>, duration: Option<f64>) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => load_config(&p).with_context(|| format!("loading {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(d) = duration {
        cfg.duration = d;
    }
    Ok(cfg)
}

fn scenario_label(name: ScenarioName) -> &'static str {
    match name {
        ScenarioName::Uncontrolled => "uncontrolled",
        ScenarioName::Mpc => "mpc",
        ScenarioName::MpcDelay => "mpc-delay",
        ScenarioName::Hierarchical => "hierarchical",
    }
}

fn print_summary(label: &str, traj: &Trajectory) -> Result<()> {
    let m = compute_metrics(traj)?;
    println!("scenario: {label}");
    println!("samples: {}", traj.len());
    println!("max|phi|: {:.6e} rad", m.max_abs_phi);
    println!("max|tau|: {:.6e} N*m", m.max_abs_tau);
    println!("rms(phi): {:.6e} rad", m.rms_phi);
    Ok(())
}

fn write_csv(path: &PathBuf, traj: &Trajectory) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    csv::write_trajectory(file, traj).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn read_csv(path: &PathBuf) -> Result<Trajectory> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let traj =
        csv::read_trajectory(file).with_context(|| format!("parsing {}", path.display()))?;
    Ok(traj)
}
