use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use menulab::cli::{self, DensitySpec};
use menulab::distributions::{check_condition, ProductDistribution};
use menulab::error::Error;
use menulab::lp_solver::{discretize, solve_optimal};
use menulab::menu_analysis::extract_menu;
use menulab::numerics::ToleranceConfig;

#[derive(Parser)]
#[command(
    name = "menulab",
    version,
    about = "Optimal two-item mechanism laboratory"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment declared in a scenario config.
    Run {
        config: PathBuf,
        /// Process scenarios concurrently (artifacts still written in
        /// declaration order).
        #[arg(long)]
        parallel: bool,
    },
    /// Solve one instance and print the extracted menu.
    Solve {
        /// Marginal density for item 1, e.g. '{"kind":"uniform","support":[0,1]}'.
        #[arg(long)]
        dx: String,
        /// Marginal density for item 2.
        #[arg(long)]
        dy: String,
        /// Grid resolution per axis.
        #[arg(long, short)]
        n: usize,
        #[arg(long)]
        unit_demand: bool,
    },
    /// Solve one instance and audit the approximation ratios.
    Audit {
        #[arg(long)]
        dx: String,
        #[arg(long)]
        dy: String,
        #[arg(long, short)]
        n: usize,
        #[arg(long, default_value = "cli")]
        id: String,
    },
    /// Evaluate the five power-rate conditions on a distribution pair.
    CheckConditions {
        #[arg(long)]
        dx: String,
        #[arg(long)]
        dy: String,
        #[arg(long, default_value_t = 48)]
        grid_n: usize,
    },
}

fn parse_density(text: &str) -> Result<DensitySpec, Error> {
    serde_json::from_str(text).map_err(|e| Error::Config {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

fn product(dx: &str, dy: &str) -> Result<ProductDistribution, Error> {
    ProductDistribution::new(parse_density(dx)?.build()?, parse_density(dy)?.build()?)
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config { .. } | Error::Invalid { .. } | Error::Io(_) => 2,
        _ => 3,
    }
}

fn dispatch(args: Args) -> Result<bool, Error> {
    let tol = ToleranceConfig::default();
    match args.command {
        Command::Run { config, parallel } => {
            let report = cli::run_with_options(&config, parallel)?;
            for outcome in &report.outcomes {
                let status = match outcome.passed {
                    Some(true) => "pass",
                    Some(false) => "FAIL",
                    None => "report",
                };
                println!(
                    "{} {} {} ({:.2?})",
                    outcome.scenario, outcome.experiment, status, outcome.duration
                );
            }
            println!("artifacts in {}", report.out_dir.display());
            Ok(report.all_passed())
        }
        Command::Solve {
            dx,
            dy,
            n,
            unit_demand,
        } => {
            let d = product(&dx, &dy)?;
            let inst = discretize(&d, n)?;
            let gm = solve_optimal(&inst, unit_demand)?;
            println!("revenue {}", menulab::csvio::sig12(gm.expected_revenue()));
            print!("{}", extract_menu(&gm, tol.clustering_tol).to_csv());
            Ok(true)
        }
        Command::Audit { dx, dy, n, id } => {
            let d = product(&dx, &dy)?;
            let report = menulab::baselines::audit_ratios(&id, &d, n, &tol)?;
            println!("{}", menulab::baselines::BaselineReport::csv_header());
            println!("{}", report.to_csv_row());
            for line in &report.audit_outcomes {
                println!("# {line}");
            }
            Ok(report.all_applicable_pass)
        }
        Command::CheckConditions { dx, dy, grid_n } => {
            let d = product(&dx, &dy)?;
            println!("condition,holds,worst_margin");
            for id in 1..=5u8 {
                let rep = check_condition(&d, id, grid_n, &tol)?;
                println!(
                    "{},{},{}",
                    id,
                    rep.holds,
                    menulab::csvio::sig12(rep.worst_margin)
                );
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match dispatch(args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
