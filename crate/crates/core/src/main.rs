use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gsfde::coefficients::{verify_a1, A1_TOLERANCE};
use gsfde::harness::{summary, CheckRow, Config, Harness, Verdict, EXPERIMENTS};

#[derive(Parser)]
#[command(name = "gsfde", version, about = "Simulate G-Brownian functional SDEs with infinite delay and check their moment bounds")]
struct Cli {
    /// TOML configuration; the bundled default when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Paths per scenario for the statistical experiments.
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "gsfde-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the bound report and the feasibility of every theorem.
    Feasibility,
    /// Run one experiment.
    Run {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(EXPERIMENTS))]
        experiment: String,
    },
    /// Run every enabled experiment and write the report bundle.
    RunAll,
    /// Pathwise lemma checks and the A1 certificate check.
    LemmaCheck,
}

fn load(cli: &Cli) -> gsfde::Result<Harness> {
    let mut config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::bundled(),
    };
    if let Some(s) = cli.seed {
        config.experiments.seed = s;
    }
    if let Some(n) = cli.paths {
        config.experiments.paths = n;
        config.experiments.markov_paths = n;
    }
    Harness::new(config)
}

fn write_verdicts(cli: &Cli, h: &Harness, verdicts: &[Verdict]) -> gsfde::Result<()> {
    std::fs::create_dir_all(&cli.out)?;
    for v in verdicts {
        v.save_csv(&cli.out)?;
    }
    std::fs::write(cli.out.join("summary.txt"), summary(&h.report.to_text(), verdicts))?;
    Ok(())
}

fn execute(cli: &Cli) -> gsfde::Result<bool> {
    let h = load(cli)?;
    match &cli.command {
        Command::Feasibility => {
            print!("{}", h.report.to_text());
            Ok(h.report.mean_square.window.feasible
                && h.report.map_bound.window.feasible
                && h.report.map_convergence.window.feasible)
        }
        Command::Run { experiment } => {
            let v = h.run(experiment)?;
            print!("{}", v.to_text());
            write_verdicts(cli, &h, std::slice::from_ref(&v))?;
            Ok(v.pass())
        }
        Command::RunAll => {
            let verdicts = h.run_all(Some(&cli.out))?;
            for v in &verdicts {
                println!("{}", v.summary_line());
            }
            let pass = verdicts.iter().all(Verdict::pass);
            println!("OVERALL {}", if pass { "PASS" } else { "FAIL" });
            Ok(pass)
        }
        Command::LemmaCheck => {
            let mut lemmas = h.run_lemmas()?;
            let a1 = verify_a1(&h.set, h.config.space.q, 10_000, h.config.experiments.seed)?;
            for (name, v) in ["c1", "c2", "c3"].iter().zip(a1.max_violation) {
                lemmas.rows.push(CheckRow::exact(0.0, v, A1_TOLERANCE, format!("a1_{name}_max_violation")));
            }
            print!("{}", lemmas.to_text());
            write_verdicts(cli, &h, std::slice::from_ref(&lemmas))?;
            Ok(lemmas.pass())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
