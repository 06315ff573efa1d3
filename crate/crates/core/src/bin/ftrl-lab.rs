use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ftrl_lab::config::{
    cmd_experiment, cmd_run, cmd_solve, default_out, exit_code, parse_candidate,
    parse_experiment, parse_game, read_text, Overrides,
};
use ftrl_lab::output::to_json_pretty;
use ftrl_lab::Result;

/// FTRL learning dynamics in finite games.
///
/// The worker pool is capped by the FTRL_LAB_WORKERS environment variable.
#[derive(Parser)]
#[command(name = "ftrl-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List pure Nash equilibria and classify candidate profiles.
    Solve {
        #[arg(long)]
        game: PathBuf,
        /// Candidate profile, e.g. "p1:0.5,0.5;p2:0.5,0.5" (repeatable).
        #[arg(long)]
        candidate: Vec<String>,
        /// Also write solve.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate one run; writes trajectory.csv and run.json.
    Run(RunArgs),
    /// Run the replicated stability experiment; writes report.json.
    Experiment(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Game file replacing the config's `game` field.
    #[arg(long)]
    game: Option<PathBuf>,
    #[arg(long, default_value_os_t = default_out())]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<u64>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    stride: Option<u64>,
}

impl RunArgs {
    fn load(&self) -> Result<ftrl_lab::experiment::ExperimentConfig> {
        let game = match &self.game {
            Some(path) => Some(parse_game(&read_text(path)?)?),
            None => None,
        };
        let overrides = Overrides {
            seed: self.seed,
            horizon: self.horizon,
            replicas: self.replicas,
            stride: self.stride,
        };
        parse_experiment(&read_text(&self.config)?, game.as_ref(), &overrides)
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve { game, candidate, out } => {
            let game = parse_game(&read_text(&game)?)?;
            let candidates = candidate
                .iter()
                .map(|c| parse_candidate(c))
                .collect::<Result<Vec<_>>>()?;
            let report = cmd_solve(&game, &candidates)?;
            print!("{}", report.render());
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("solve.json"), to_json_pretty(&report)?)?;
            }
        }
        Command::Run(args) => {
            let summary = cmd_run(&args.load()?, &args.out)?;
            println!("config digest: {}", summary.config_digest);
            println!("final strategies: {:?}", summary.final_state.strategies.strategies);
            println!("regret: {:?}", summary.regret);
            println!("final Fenchel coupling: {}", summary.final_fenchel);
            println!("wrote {}", args.out.display());
        }
        Command::Experiment(args) => {
            let output = cmd_experiment(&args.load()?, &args.out)?;
            let r = &output.report;
            println!("config digest: {}", r.config_digest);
            println!("stay fraction: {}", r.stay_fraction);
            println!("converge fraction: {}", r.converge_fraction);
            println!("aborted: {}", r.aborted);
            println!("wrote {}", args.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
