//! Command line front end: clear, compare, validate.

use anyhow::Context;
use clap::{Parser, Subcommand};
use p2p_market::clearing::PerspectiveChoice;
use p2p_market::io::{self, LoadOutcome};
use p2p_market::mechanisms::Mechanism;
use p2p_market::orderbook::Order;
use p2p_market::runner;
use p2p_market::{MarketConfig, Rational};
use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "p2p-market",
    version,
    about = "Deterministic market clearing for peer-to-peer energy auctions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clear one slot and write trades.csv plus report.json
    Clear {
        /// Order file (.csv or .json)
        #[arg(long)]
        input: PathBuf,
        /// Payment mechanism, overriding the configured default
        #[arg(long, value_parser = parse_mechanism)]
        mechanism: Option<Mechanism>,
        /// Allocation perspective, overriding the configured one
        #[arg(long, value_parser = parse_perspective)]
        perspective: Option<PerspectiveChoice>,
        /// Market config JSON
        #[arg(long)]
        config: Option<PathBuf>,
        /// Slot label carried into the report
        #[arg(long, default_value = "slot-0")]
        slot: String,
        /// Directory for the emitted files
        #[arg(long)]
        output: PathBuf,
    },
    /// Settle the same orders under every mechanism and tabulate the result
    Compare {
        /// Order file (.csv or .json)
        #[arg(long)]
        input: PathBuf,
        /// Market config JSON
        #[arg(long)]
        config: Option<PathBuf>,
        /// Table format
        #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
        format: String,
        /// Directory for comparison.csv or comparison.json
        #[arg(long, default_value = ".")]
        output: PathBuf,
    },
    /// Check an order file and print a diagnostic per problem record
    Validate {
        /// Order file (.csv or .json)
        #[arg(long)]
        input: PathBuf,
    },
}

fn parse_mechanism(text: &str) -> Result<Mechanism, String> {
    Mechanism::from_name(text).ok_or_else(|| {
        let names: Vec<&str> = Mechanism::ALL.iter().map(|m| m.name()).collect();
        format!("unknown mechanism (expected one of: {})", names.join(", "))
    })
}

fn parse_perspective(text: &str) -> Result<PerspectiveChoice, String> {
    match text {
        "auto" => Ok(PerspectiveChoice::Auto),
        "buyer" => Ok(PerspectiveChoice::Buyer),
        "seller" => Ok(PerspectiveChoice::Seller),
        _ => Err("expected auto, buyer or seller".to_string()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Clear { input, mechanism, perspective, config, slot, output } => {
            let mut config = load_config(config.as_deref())?;
            if let Some(choice) = perspective {
                config.perspective_override = choice;
            }
            let Some(orders) = load_orders_strict(&input)? else {
                return Ok(ExitCode::from(1));
            };
            let result = runner::run_slot(orders, &config, mechanism, &slot)?;
            report_notices(&result.warnings, &result.rejections);

            std::fs::create_dir_all(&output)
                .with_context(|| format!("cannot create {}", output.display()))?;
            let trades_path = output.join("trades.csv");
            io::write_trades_csv_file(
                &trades_path,
                result.blocks.values().map(|b| &b.settlement),
            )?;
            let report_path = output.join("report.json");
            let blocks: Vec<_> = result
                .blocks
                .iter()
                .map(|(name, b)| {
                    io::block_report(&result.slot, name, &b.determination, &b.settlement, &b.indices)
                })
                .collect();
            io::write_report_json(&report_path, blocks)?;

            let trades: usize = result.blocks.values().map(|b| b.settlement.trades.len()).sum();
            println!(
                "cleared {} under {}: {} block(s), {} trade(s)",
                result.slot,
                result.mechanism,
                result.blocks.len(),
                trades,
            );
            println!("wrote {}", trades_path.display());
            println!("wrote {}", report_path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare { input, config, format, output } => {
            let config = load_config(config.as_deref())?;
            let Some(orders) = load_orders_strict(&input)? else {
                return Ok(ExitCode::from(1));
            };
            let comparison = runner::compare_mechanisms(orders, &config)?;
            report_notices(&comparison.warnings, &comparison.rejections);

            std::fs::create_dir_all(&output)
                .with_context(|| format!("cannot create {}", output.display()))?;
            let path = match format.as_str() {
                "json" => {
                    let path = output.join("comparison.json");
                    io::write_pretty_json(&path, &io::comparison_json(&comparison.rows))?;
                    path
                }
                _ => {
                    let path = output.join("comparison.csv");
                    let file = File::create(&path)
                        .with_context(|| format!("cannot create {}", path.display()))?;
                    io::write_comparison_csv(file, &comparison.rows)
                        .with_context(|| format!("cannot write {}", path.display()))?;
                    path
                }
            };
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { input } => {
            let outcome: LoadOutcome<Rational> = io::load_orders(&input)?;
            for diagnostic in &outcome.diagnostics {
                println!("{}: {}", input.display(), diagnostic);
            }
            if outcome.diagnostics.is_empty() {
                println!("ok: {} valid order(s)", outcome.orders.len());
                Ok(ExitCode::SUCCESS)
            } else {
                println!(
                    "{} invalid record(s), {} valid",
                    outcome.diagnostics.len(),
                    outcome.orders.len(),
                );
                Ok(ExitCode::from(1))
            }
        }
    }
}

fn load_config(path: Option<&Path>) -> anyhow::Result<MarketConfig> {
    match path {
        None => Ok(MarketConfig::default()),
        Some(path) => Ok(runner::load_config(path)?),
    }
}

/// Loads an order file for clearing; any bad record refuses the whole run.
fn load_orders_strict(path: &Path) -> anyhow::Result<Option<Vec<Order<Rational>>>> {
    let outcome: LoadOutcome<Rational> = io::load_orders(path)?;
    if outcome.diagnostics.is_empty() {
        return Ok(Some(outcome.orders));
    }
    for diagnostic in &outcome.diagnostics {
        eprintln!("{}: {}", path.display(), diagnostic);
    }
    eprintln!(
        "{}: {} invalid record(s), refusing to run",
        path.display(),
        outcome.diagnostics.len(),
    );
    Ok(None)
}

fn report_notices(warnings: &[String], rejections: &[runner::Rejection]) {
    for warning in warnings {
        eprintln!("warning: {warning}");
    }
    for rejection in rejections {
        eprintln!(
            "warning: {} order {} left out: {}",
            rejection.side, rejection.id, rejection.reason,
        );
    }
}
