use std::path::PathBuf;
use std::process::ExitCode;

use aam_cli::commands;
use aam_cli::{Result, RunSpec};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aam", about = "Train, evaluate and compare fleet rebalancing policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct SpecArgs {
    /// Run spec JSON; built-in defaults when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// `key=value` overrides, dotted keys for nested fields (env.k_d=3).
    overrides: Vec<String>,
}

impl SpecArgs {
    fn resolve(&self) -> Result<RunSpec> {
        RunSpec::from_env(self.spec.as_deref(), &self.overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a learned policy and write checkpoints and the learning curve.
    Train(SpecArgs),
    /// Evaluate a policy over the run spec's episodes.
    Eval(SpecArgs),
    /// Evaluate several specs on identical episodes.
    Compare {
        /// One run spec per policy; at least two.
        #[arg(long = "spec", required = true)]
        specs: Vec<PathBuf>,
        /// Directory for the comparison table.
        #[arg(long, default_value = "out/compare")]
        out: PathBuf,
        /// Overrides applied to every spec.
        overrides: Vec<String>,
    },
    /// Evaluate the assignment oracle and dump its matchings.
    Oracle(SpecArgs),
    /// Run one episode and write its event log and grid snapshots.
    Trace(SpecArgs),
    /// Print the structure of the selected network.
    PolicyInfo(SpecArgs),
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => {
            let spec = args.resolve()?;
            let report = commands::train(&spec)?;
            if let Some(last) = report.curve.last() {
                println!(
                    "trained {} for {} steps, last batch reward {:.3}",
                    spec.policy, last.active_timesteps, last.mean_fleet_reward
                );
            }
            println!("checkpoint {}", report.checkpoint.display());
        }
        Command::Eval(args) => {
            let spec = args.resolve()?;
            let report = commands::eval(&spec)?;
            print_summary(&report.summary);
        }
        Command::Compare { specs, out, overrides } => {
            let specs = specs
                .iter()
                .map(|p| RunSpec::from_env(Some(p), &overrides))
                .collect::<Result<Vec<_>>>()?;
            std::fs::create_dir_all(&out)?;
            for row in commands::compare(&specs, &out)? {
                println!(
                    "{:<16} reward {:>9.3} ± {:<8.3} fulfillment {:.4} ± {:.4}",
                    row.label, row.fleet_reward.mean, row.fleet_reward.std, row.fulfillment_ratio.mean, row.fulfillment_ratio.std
                );
            }
        }
        Command::Oracle(args) => {
            let spec = args.resolve()?;
            let report = commands::oracle(&spec)?;
            print_summary(&report.summary);
        }
        Command::Trace(args) => {
            let spec = args.resolve()?;
            let report = commands::trace(&spec)?;
            println!(
                "{} events, fleet reward {:.3}, written to {}",
                report.world.events().len(),
                report.world.fleet_reward(),
                spec.out_dir.display()
            );
        }
        Command::PolicyInfo(args) => {
            let spec = args.resolve()?;
            let info = commands::policy_info(&spec)?;
            println!("{}", serde_json::to_string_pretty(&info)?);
        }
    }
    Ok(())
}

fn print_summary(summary: &aam_cli::report::Summary) {
    println!("{} over {} episodes", summary.policy, summary.episodes);
    for (name, stat) in &summary.columns {
        println!("  {name:<18} {:>10.4} ± {:.4}", stat.mean, stat.std);
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
