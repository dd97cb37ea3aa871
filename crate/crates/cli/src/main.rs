use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gdmp_cli::commands::{self, PhaseInput, StabilityGrid};
use gdmp_cli::{CliError, PipelineConfig};

#[derive(Parser)]
#[command(name = "gdmp", version, about = "Geometric DMP pipeline")]
struct Cli {
    /// Pipeline config JSON; defaults apply to missing sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Resample a demonstration CSV at constant spatial period.
    Resample {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides sampling.delta.
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Fit the arc-length curve of a resampled path.
    Fit {
        path: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Integrate the system under a phase profile.
    Rollout {
        system: PathBuf,
        /// `original` or a profile CSV (t,s,sd,sdd).
        #[arg(long)]
        phase: String,
        /// timing_law.json, required with `--phase original`.
        #[arg(long)]
        timing_law: Option<PathBuf>,
        /// Demonstration CSV to report the tracking RMS against.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Minimum-time phase under the configured constraints.
    Optimize {
        system: PathBuf,
        /// Joint curve JSON for joint-space bounds.
        #[arg(long)]
        joint_curve: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Human-in-the-loop simulation.
    Simulate {
        system: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        t0: Option<f64>,
        #[arg(long)]
        m: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Phase-margin map over (m, b).
    Stability(StabilityArgs),
    /// resample, fit, rollout, optimize, stability and simulate in one go.
    Pipeline {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

#[derive(Args)]
struct StabilityArgs {
    #[arg(long, default_value_t = 0.0)]
    t0: f64,
    #[arg(long, num_args = 3, value_names = ["MIN", "MAX", "N"], default_values = ["0.2", "4", "20"])]
    m_range: Vec<String>,
    #[arg(long, num_args = 3, value_names = ["MIN", "MAX", "N"], default_values = ["1.7", "34", "20"])]
    b_range: Vec<String>,
    /// Also integrate the linearized delayed loop per cell.
    #[arg(long)]
    time_domain: bool,
    #[arg(long, default_value_t = 10.0)]
    horizon: f64,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

fn range(v: &[String], name: &str) -> Result<(f64, f64, usize), CliError> {
    let bad = || CliError::input(format!("--{name}-range expects MIN MAX N"));
    Ok((v[0].parse().map_err(|_| bad())?, v[1].parse().map_err(|_| bad())?, v[2].parse().map_err(|_| bad())?))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Resample { input, out, delta } => {
            if let Some(d) = delta {
                cfg.sampling.delta = d;
            }
            commands::resample(&cfg, &input, &out)
        }
        Command::Fit { path, out } => commands::fit(&cfg, &path, &out),
        Command::Rollout { system, phase, timing_law, reference, out } => {
            let phase = if phase == "original" {
                PhaseInput::Original(
                    timing_law.ok_or_else(|| CliError::input("--phase original needs --timing-law"))?,
                )
            } else {
                PhaseInput::Profile(PathBuf::from(phase))
            };
            commands::rollout_cmd(&cfg, &system, &phase, reference.as_deref(), &out)
        }
        Command::Optimize { system, joint_curve, out } => commands::optimize(&cfg, &system, joint_curve.as_deref(), &out),
        Command::Simulate { system, seed, t0, m, b, out } => {
            if let Some(s) = seed {
                cfg.hil.human.seed = s;
            }
            if let Some(v) = t0 {
                cfg.hil.t0 = v;
            }
            if let Some(v) = m {
                cfg.hil.m = v;
            }
            if let Some(v) = b {
                cfg.hil.b = v;
            }
            commands::simulate_cmd(&cfg, &system, &out)
        }
        Command::Stability(a) => {
            let grid = StabilityGrid {
                m: range(&a.m_range, "m")?,
                b: range(&a.b_range, "b")?,
                t0: a.t0,
                time_domain: a.time_domain,
                horizon: a.horizon,
            };
            cfg.hil.t0 = a.t0;
            commands::stability(&cfg, &grid, a.jobs, &a.out)
        }
        Command::Pipeline { input, out, seed, jobs } => {
            if let Some(s) = seed {
                cfg.hil.human.seed = s;
            }
            commands::pipeline(&cfg, &input, &out, jobs)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GDMP_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
