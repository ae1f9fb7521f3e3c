use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use ttcirc::commands;
use ttcirc::{Command, ExperimentConfig, Overrides, Result};

#[derive(Parser)]
#[command(name = "ttcirc", version, about = "Tensor-train operators compiled to post-selected circuits")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Fit a unitary MPO to a named matrix and compile its circuit
    Encode(Overrides),
    /// Check an encode output directory against dense references
    Verify {
        /// Directory written by `encode`
        artifacts: PathBuf,
        #[command(flatten)]
        flags: Overrides,
    },
    /// Fit over a grid of qubit counts, ranks and seeds
    Sweep(Overrides),
    /// Time-evolution operator ranks and errors against Trotter formulas
    Evolution(Overrides),
    /// Explicit heat-equation stepping in TT form
    Heat(Overrides),
    /// Power method for the largest entry of a tensor
    Power(Overrides),
    /// MPS tomography of random-circuit states
    Tomo(Overrides),
}

fn run(sub: Sub) -> Result<serde_json::Value> {
    let (cmd, flags) = match &sub {
        Sub::Encode(f) => (Command::Encode, f),
        Sub::Verify { flags, .. } => (Command::Verify, flags),
        Sub::Sweep(f) => (Command::Sweep, f),
        Sub::Evolution(f) => (Command::Evolution, f),
        Sub::Heat(f) => (Command::Heat, f),
        Sub::Power(f) => (Command::Power, f),
        Sub::Tomo(f) => (Command::Tomo, f),
    };
    let cfg = ExperimentConfig::resolve(cmd, flags)?;
    let out = cfg.out_dir();
    Ok(match sub {
        Sub::Encode(_) => {
            let r = commands::encode::run(&cfg)?;
            json!({ "epsilon": r.report.epsilon, "c": r.report.c, "avg_success": r.report.avg_success, "out": r.dir })
        }
        Sub::Verify { artifacts, .. } => serde_json::to_value(commands::verify::run(&cfg, &artifacts)?)?,
        Sub::Sweep(_) => json!({ "rows": commands::sweep::run(&cfg)?.len(), "out": out }),
        Sub::Evolution(_) => {
            let r = commands::evolution::run(&cfg)?;
            json!({ "dts": r.ranks.len(), "fits": r.errors.len(), "out": out })
        }
        Sub::Heat(_) => {
            let r = commands::heat::run(&cfg)?;
            json!({ "final_norm": r.norms.last(), "ratio": r.grid.ratio, "out": out })
        }
        Sub::Power(_) => {
            let r = commands::power::run(&cfg)?;
            json!({ "argmax": r.argmax, "iterations": r.iterations, "out": out })
        }
        Sub::Tomo(_) => {
            let r = commands::tomo::run(&cfg)?;
            let n_min: Vec<_> = r.iter().map(|c| json!({ "seed": c.seed, "n_min": c.n_min })).collect();
            json!({ "sample_complexity": n_min, "out": out })
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
