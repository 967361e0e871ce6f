use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use scobul_cli::config::{parse_phase_lengths, Arm, Config};
use scobul_cli::error::{CliError, Result};
use scobul_cli::{cmd_experiment, cmd_optimize, cmd_report, cmd_signal};

#[derive(Parser)]
#[command(name = "scobul", version, about = "Spiking WTA network experiments")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args)]
struct RunArgs {
    /// TOML config, or a `manifest.json` from an earlier run.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the phase lengths: `train,rf,test`.
    #[arg(long, value_name = "TRAIN,RF,TEST")]
    phase_lengths: Option<String>,
}

#[derive(Subcommand)]
enum Verb {
    /// Generate a signal and its ground truth.
    Signal(RunArgs),
    /// Train, measure receptive fields and score one network.
    Experiment {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum)]
        arm: Option<Arm>,
    },
    /// Genetic-algorithm hyperparameter search.
    Optimize {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum)]
        arm: Option<Arm>,
        /// Not supported; reported as an error.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Compare metrics or history files.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(run: &RunArgs) -> Result<Config> {
    let mut config = Config::load(&run.config)?;
    if let Some(seed) = run.seed {
        config.seed = seed;
    }
    if let Some(p) = &run.phase_lengths {
        let (train, rf, test) = parse_phase_lengths(p)?;
        config.phases.train = train;
        config.phases.rf = rf;
        config.phases.test = test;
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    match cli.verb {
        Verb::Signal(run) => {
            let config = load(&run)?;
            cmd_signal(&config, &run.out)?;
        }
        Verb::Experiment { run, arm } => {
            let config = load(&run)?;
            let m = cmd_experiment(&config, arm.unwrap_or(config.arm), &run.out)?;
            match m.score() {
                Some(s) => println!("{} {} score {s}", m.kind, m.arm.name()),
                None => println!("{} {} no predictions", m.kind, m.arm.name()),
            }
        }
        Verb::Optimize { run, arm, resume } => {
            let config = load(&run)?;
            let r = cmd_optimize(&config, arm.unwrap_or(config.arm), &run.out, resume.is_some())?;
            println!("best fitness {} after {} generations", r.best_fitness, r.history.len());
        }
        Verb::Report { inputs, out } => {
            print!("{}", cmd_report(&inputs, &out)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            let err = CliError::Usage(first.to_string());
            eprintln!("{}", err.one_line());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.one_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
