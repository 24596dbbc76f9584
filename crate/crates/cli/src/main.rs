//! Command-line front end for treegm.

mod commands;
mod common;
mod experiment;
mod ledger;

use clap::{Parser, Subcommand};

use common::CliResult;

#[derive(Parser, Debug)]
#[command(name = "treegm", version, about = "Bayesian structure learning for Gaussian graphical models on forests and trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a dataset from a star, chain, G(p, M) or given graph.
    GenData(commands::GenDataArgs),
    /// Maximum-likelihood tree from Gaussian mutual information.
    ChowLiu(commands::ChowLiuArgs),
    /// Exact MAP forest or tree under a factored prior.
    MapForest(commands::MapArgs),
    /// Exact spanning-tree posterior summary.
    MttSummary(commands::MttArgs),
    /// Shotgun stochastic search over forests or trees.
    Sss(commands::SssArgs),
    /// Reversible-jump MCMC over forests or trees.
    Mcmc(commands::McmcArgs),
    /// Triangulate by elimination, then thin the fill to a minimal set.
    Thin(commands::ThinArgs),
    /// Cycle counts in random graphs against their Poisson limits.
    CountCycles(commands::CountCyclesArgs),
    /// Exhaustive posterior over all forests or trees, or decomposable graph counts.
    Enumerate(commands::EnumerateArgs),
    /// Confusion counts, rates and expected metrics of a ledger against a truth graph.
    Eval(commands::EvalArgs),
    /// Replicated runs with per-group medians and quartiles.
    Experiment(experiment::ExperimentArgs),
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::GenData(a) => commands::gen_data(&a),
        Command::ChowLiu(a) => commands::chow_liu(&a),
        Command::MapForest(a) => commands::map_forest(&a),
        Command::MttSummary(a) => commands::mtt_summary(&a),
        Command::Sss(a) => commands::sss(&a),
        Command::Mcmc(a) => commands::mcmc(&a),
        Command::Thin(a) => commands::thin(&a),
        Command::CountCycles(a) => commands::count_cycles(&a),
        Command::Enumerate(a) => commands::enumerate(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Experiment(a) => experiment::run(&a),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
