mod bench;
mod commands;
mod error;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::error::CliResult;

#[derive(Parser, Debug)]
#[command(
    name = "hclocal",
    version,
    about = "Hierarchical clustering by interchange local search"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Gaussian similarity matrix from a delimited data file.
    Kernel(commands::KernelArgs),
    /// Agglomerative linkage tree.
    Build(commands::BuildArgs),
    /// Uniformly random agglomeration.
    RandomTree(commands::RandomTreeArgs),
    /// Interchange local search.
    Search(commands::SearchArgs),
    /// Revenue, cost and normalized revenue of a tree.
    Eval(commands::EvalArgs),
    /// Local-optimality certificate of a tree.
    Check(commands::CheckArgs),
    /// Run a table-reproduction config.
    Bench(bench::BenchArgs),
    #[command(subcommand, hide = true)]
    Oracle(commands::OracleCommand),
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Kernel(a) => commands::kernel(&a),
        Command::Build(a) => commands::build(&a),
        Command::RandomTree(a) => commands::random_tree(&a),
        Command::Search(a) => commands::search_cmd(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Check(a) => commands::check(&a),
        Command::Bench(a) => bench::bench(&a),
        Command::Oracle(c) => commands::oracle_cmd(&c),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
