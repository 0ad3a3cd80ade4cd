use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use linflow::jordan::TimeKind;
use linflow::TolerancePolicy;
use linflow_cli::canonical::to_canonical_string;
use linflow_cli::commands::{
    self, exit_code, AnalyzeOptions, ChainOptions, FloquetOptions, TrajectoryRow,
    EXIT_SIMULATION_MISMATCH,
};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "linflow",
    version,
    about = "Jordan decompositions and Morse dynamics of linear flows"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Elliptic, hyperbolic and nilpotent (unipotent) parts of a matrix.
    Decompose {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Time::Continuous)]
        time: Time,
        #[command(flatten)]
        common: Common,
    },
    /// Morse components on a flag manifold, with an optional simulation check.
    Analyze {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Time::Continuous)]
        time: Time,
        /// Flag signature, e.g. `1` (projective space) or `1,2`.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        flag: Vec<usize>,
        /// Number of random starts simulated in both time directions.
        #[arg(long, default_value_t = 0)]
        simulate: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write simulated trajectories to this CSV file.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        /// Samples per direction in the trajectory file.
        #[arg(long, default_value_t = 64)]
        trajectory_samples: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Grid approximation of the chain recurrent set on a projective line or plane.
    ChainOracle {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Time::Continuous)]
        time: Time,
        #[arg(long, default_value_t = 1000)]
        resolution: usize,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        #[arg(long, default_value_t = 1.0)]
        min_time: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Monodromy, Floquet generator and skew-product Morse census of a periodic system.
    Floquet {
        input: PathBuf,
        #[arg(long, default_value_t = 1024)]
        steps: usize,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        flag: Vec<usize>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = TolerancePolicy::default().cluster_tol)]
    cluster_tol: f64,
    #[arg(long, default_value_t = TolerancePolicy::default().residual_tol)]
    residual_tol: f64,
    #[arg(long, default_value_t = TolerancePolicy::default().sim_tol)]
    sim_tol: f64,
    /// Write the report here instead of standard output.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

impl Common {
    fn policy(&self) -> TolerancePolicy {
        TolerancePolicy {
            cluster_tol: self.cluster_tol,
            residual_tol: self.residual_tol,
            sim_tol: self.sim_tol,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Time {
    Continuous,
    Discrete,
}

impl From<Time> for TimeKind {
    fn from(t: Time) -> Self {
        match t {
            Time::Continuous => TimeKind::Continuous,
            Time::Discrete => TimeKind::Discrete,
        }
    }
}

fn fail(code: i32, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code as u8)
}

fn read(path: &Path) -> Result<String, ExitCode> {
    fs::read_to_string(path).map_err(|e| fail(1, format!("cannot read {}: {e}", path.display())))
}

fn emit<T: Serialize>(report: &T, output: &Option<PathBuf>) -> Result<(), ExitCode> {
    let text = to_canonical_string(report).map_err(|e| fail(1, e))?;
    match output {
        Some(p) => {
            fs::write(p, text).map_err(|e| fail(1, format!("cannot write {}: {e}", p.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_trajectory(path: &Path, rows: &[TrajectoryRow]) -> Result<(), ExitCode> {
    let io_fail = |e: csv::Error| fail(1, format!("cannot write {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io_fail)?;
    let width = rows.first().map_or(0, |r| r.basis.len());
    let mut header = vec![
        "start".to_string(),
        "time".into(),
        "nearest".into(),
        "distance".into(),
    ];
    header.extend((0..width).map(|i| format!("b{i}")));
    w.write_record(&header).map_err(io_fail)?;
    for r in rows {
        let mut rec = vec![
            r.start.to_string(),
            format!("{:.16e}", r.time),
            r.nearest.to_string(),
            format!("{:.16e}", r.distance),
        ];
        rec.extend(r.basis.iter().map(|v| format!("{v:.16e}")));
        w.write_record(&rec).map_err(io_fail)?;
    }
    w.flush().map_err(|e| fail(1, e))
}

fn run(cli: Cli) -> Result<(), ExitCode> {
    let lib = |e: linflow::Error| fail(exit_code(&e), e);
    match cli.command {
        Command::Decompose {
            input,
            time,
            common,
        } => {
            let report =
                commands::decompose(&read(&input)?, time.into(), &common.policy()).map_err(lib)?;
            emit(&report, &common.output)
        }
        Command::Analyze {
            input,
            time,
            flag,
            simulate,
            seed,
            trajectory,
            trajectory_samples,
            common,
        } => {
            let opts = AnalyzeOptions {
                time: time.into(),
                flag_dims: flag,
                simulate,
                seed,
                trajectory_samples: if trajectory.is_some() {
                    trajectory_samples.max(1)
                } else {
                    0
                },
            };
            let (report, rows) =
                commands::analyze(&read(&input)?, &opts, &common.policy()).map_err(lib)?;
            emit(&report, &common.output)?;
            if let Some(path) = &trajectory {
                write_trajectory(path, &rows)?;
            }
            match &report.result.simulation {
                Some(s) if !s.passed() => Err(fail(
                    EXIT_SIMULATION_MISMATCH,
                    format!(
                        "simulation contradicts the prediction: {}/{} forward, {}/{} backward",
                        s.forward_matches, s.starts, s.backward_matches, s.starts
                    ),
                )),
                _ => Ok(()),
            }
        }
        Command::ChainOracle {
            input,
            time,
            resolution,
            eps,
            min_time,
            common,
        } => {
            let opts = ChainOptions {
                time: time.into(),
                resolution,
                eps,
                min_time,
            };
            let report = commands::chain(&read(&input)?, &opts, &common.policy()).map_err(lib)?;
            emit(&report, &common.output)
        }
        Command::Floquet {
            input,
            steps,
            flag,
            common,
        } => {
            let opts = FloquetOptions {
                steps,
                flag_dims: flag,
            };
            let report = commands::floquet(&read(&input)?, &opts, &common.policy()).map_err(lib)?;
            emit(&report, &common.output)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}
