mod args;
mod commands;
mod inputs;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use inputs::UsageError;

fn run(cli: &Cli) -> anyhow::Result<()> {
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global()?;
    }
    let (seed, jobs) = (cli.seed, cli.jobs);
    match &cli.command {
        Command::GenData(a) => commands::gen_data(a, seed, jobs),
        Command::Discover(a) => commands::discover_cmd(a, seed, jobs),
        Command::Refine(a) => commands::refine_cmd(a, seed, jobs),
        Command::Prior(a) => commands::prior_cmd(a, seed, jobs),
        Command::Memtest(a) => commands::memtest_cmd(a, seed, jobs),
        Command::Evaluate(a) => commands::evaluate_cmd(a, seed, jobs),
        Command::Stats(a) => commands::stats_cmd(a),
        Command::Bench(a) => commands::bench_cmd(a, seed, jobs),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                eprintln!("\nrun `llmpc {} --help` for usage", subcommand_name(&cli.command));
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::GenData(_) => "gen-data",
        Command::Discover(_) => "discover",
        Command::Refine(_) => "refine",
        Command::Prior(_) => "prior",
        Command::Memtest(_) => "memtest",
        Command::Evaluate(_) => "evaluate",
        Command::Stats(_) => "stats",
        Command::Bench(_) => "bench",
    }
}
