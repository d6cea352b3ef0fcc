mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{Failure, Output, Verdict};
use config::Params;

#[derive(Parser)]
#[command(name = "mincon", version, about = "Verification suites for volume functionals on line-bundle connections")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// `key = value` file; flags and --set override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for reports, CSVs and snapshots.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Extra parameter, repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Randomized pointwise-algebra, exterior and G2 invariants.
    VerifyAlgebra {
        #[arg(long)]
        samples_per_dim: Option<usize>,
    },
    /// G2 normal-form point report or bounds scan.
    G2 {
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        range: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        c1: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        c2: Option<f64>,
    },
    /// Descent-guarded mean-curvature flow on a torus.
    Flow {
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        max_steps: Option<usize>,
        #[arg(long)]
        order: Option<u32>,
        #[arg(long)]
        start: Option<String>,
    },
    /// Radius-normalized ball-integral profiles and audits.
    Monotonicity {
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        field: Option<String>,
        #[arg(long)]
        weight: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        kappa: Option<f64>,
        #[arg(long)]
        dim: Option<usize>,
    },
    /// Graph/connection correspondence identities.
    Fm {
        #[arg(long)]
        graph: Option<String>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Truncation constants of the lattice stencils.
    Calibrate {
        #[arg(long)]
        order: Option<u32>,
    },
}

fn s<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(ToString::to_string)
}

fn run(cli: Cli) -> Verdict {
    let c = &cli.common;
    if let Some(t) = c.threads {
        if t == 0 {
            return Err(Failure("threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure(e.to_string()))?;
    }
    let seed = ("seed", s(&c.seed));
    let resolve = |keys: &[&str], flags: Vec<(&str, Option<String>)>| {
        Params::resolve(keys, c.config.as_deref(), &c.set, flags).map_err(Failure::from)
    };
    let out = Output::new(c.out.clone())?;
    match &cli.command {
        Command::VerifyAlgebra { samples_per_dim } => {
            let p = resolve(commands::VERIFY_KEYS, vec![seed, ("samples_per_dim", s(samples_per_dim))])?;
            commands::verify(&p, &out)
        }
        Command::G2 { samples, range, c1, c2 } => {
            let p = resolve(
                commands::G2_KEYS,
                vec![seed, ("samples", s(samples)), ("range", s(range)), ("c1", s(c1)), ("c2", s(c2))],
            )?;
            commands::g2(&p, &out)
        }
        Command::Flow {
            points,
            tau,
            radius,
            max_steps,
            order,
            start,
        } => {
            let p = resolve(
                commands::FLOW_KEYS,
                vec![
                    seed,
                    ("points", s(points)),
                    ("tau", s(tau)),
                    ("radius", s(radius)),
                    ("max_steps", s(max_steps)),
                    ("order", s(order)),
                    ("start", s(start)),
                ],
            )?;
            commands::flow(&p, &out)
        }
        Command::Monotonicity {
            mode,
            field,
            weight,
            kappa,
            dim,
        } => {
            let p = resolve(
                commands::MONOTONICITY_KEYS,
                vec![
                    seed,
                    ("mode", s(mode)),
                    ("field", s(field)),
                    ("weight", s(weight)),
                    ("kappa", s(kappa)),
                    ("dim", s(dim)),
                ],
            )?;
            commands::monotonicity(&p, &out)
        }
        Command::Fm { graph, points } => {
            let p = resolve(commands::FM_KEYS, vec![seed, ("graph", s(graph)), ("points", s(points))])?;
            commands::fm(&p, &out)
        }
        Command::Calibrate { order } => {
            if c.seed.is_some() {
                return Err(Failure("calibrate takes no seed".into()));
            }
            let p = resolve(commands::CALIBRATE_KEYS, vec![("order", s(order))])?;
            commands::calibrate_cmd(&p, &out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
