use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use flightsynth::pipeline::{cmd_fidelity, cmd_fit_generate, cmd_prepare, cmd_report, cmd_utility, RunConfig};
use flightsynth::Result;

#[derive(Parser)]
#[command(name = "flightsynth", version, about = "Synthetic flight data generation and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `out_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replaces every seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Label records and write the train/test split.
    Prepare(Common),
    /// Fit the copula on train.csv and sample synthetic.csv.
    FitGenerate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_synthetic: Option<usize>,
    },
    /// Score synthetic.csv against train.csv.
    Fidelity(Common),
    /// Train-on-real versus train-on-synthetic utility.
    Utility(Common),
    /// Merge fidelity and utility outputs into a scorecard.
    Report(Common),
}

fn load(common: &Common) -> Result<(RunConfig, PathBuf)> {
    let mut config = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        config = config.with_seed(seed);
    }
    let out = common.out.clone().unwrap_or_else(|| config.out_dir.clone());
    Ok((config, out))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prepare(c) => {
            let (config, out) = load(&c)?;
            let s = cmd_prepare(&config, &out)?;
            println!("prepared {} train / {} test rows ({} rejected)", s.train, s.test, s.rejected);
        }
        Command::FitGenerate { common, n_synthetic } => {
            let (mut config, out) = load(&common)?;
            if n_synthetic.is_some() {
                config.generate.n_synthetic = n_synthetic;
            }
            let n = cmd_fit_generate(&config, &out)?;
            println!("sampled {n} synthetic rows");
        }
        Command::Fidelity(c) => {
            let (config, out) = load(&c)?;
            for (name, v) in cmd_fidelity(&config, &out)?.entries() {
                println!("{name:<26} {}", v.map_or_else(|| "n/a".into(), |x| format!("{x:.4}")));
            }
        }
        Command::Utility(c) => {
            let (config, out) = load(&c)?;
            for g in cmd_utility(&config, &out)?.generators {
                println!("{}: u_generator {:.4}", g.generator, g.u_generator_mean);
            }
        }
        Command::Report(c) => {
            let (_, out) = load(&c)?;
            cmd_report(&out)?;
            println!("wrote scorecard to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_user_error() { 2 } else { 1 })
        }
    }
}
