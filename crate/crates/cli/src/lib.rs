//! `cdpath` command-line driver: parse a TOML experiment config, run one
//! subcommand over its (N, ℓ, τ) cells, write CSV tables plus
//! `manifest.json` to the output directory.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Numerical(#[from] cdpath::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::MissingKey(_) | CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numerical(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "cdpath", version, about = "Counterdiabatic annealing experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for independent cells.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Seed for random optimizer restarts.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Single evolution per cell.
    Run,
    /// Optimize control amplitudes per cell.
    Optimize,
    /// Fidelity over a grid of two control amplitudes.
    Scan,
    /// Iterated approximate-ground-state weighting.
    Iterate {
        #[arg(long)]
        ell: Option<usize>,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        conv_tol: Option<f64>,
    },
    /// Six-pulse Floquet realization against the target Hamiltonian.
    FloquetCheck {
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Excitation data and the fitted AGP frequency curve.
    Spectrum {
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Naive against optimized-augmented fidelity over N and ℓ.
    Sweep,
}

impl Cmd {
    fn name(&self) -> &'static str {
        match self {
            Cmd::Run => "run",
            Cmd::Optimize => "optimize",
            Cmd::Scan => "scan",
            Cmd::Iterate { .. } => "iterate",
            Cmd::FloquetCheck { .. } => "floquet-check",
            Cmd::Spectrum { .. } => "spectrum",
            Cmd::Sweep => "sweep",
        }
    }
}

fn execute(cli: Cli) -> Result<PathBuf, CliError> {
    let path = cli.common.config.ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut cfg = config::parse(&text)?;
    let mut lambda = None;
    match &cli.command {
        Cmd::Iterate { ell, max_iters, conv_tol } => {
            if let Some(l) = ell {
                cfg.protocol.ell = config::OneOrMany::One(*l);
            }
            if let Some(m) = max_iters {
                cfg.iterate.max_iters = *m;
            }
            if let Some(t) = conv_tol {
                cfg.iterate.conv_tol = *t;
            }
            cfg.validate()?;
        }
        Cmd::FloquetCheck { lambda: l } | Cmd::Spectrum { lambda: l } => {
            if let Some(l) = l {
                if !(0.0..=1.0).contains(l) {
                    return Err(CliError::Config(format!("--lambda {l} is outside [0, 1]")));
                }
            }
            lambda = *l;
        }
        _ => {}
    }
    if cli.common.threads == 0 {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    let dir =
        cli.common.out.or_else(|| cfg.output.dir.clone().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.common.threads)
        .build()
        .map_err(|e| CliError::Io(e.to_string()))?;
    let ctx = commands::Context {
        cfg: &cfg,
        seed: cli.common.seed,
        hash: output::config_hash(&cfg, cli.common.seed),
        pool,
        lambda,
    };
    let started = chrono::Local::now().to_rfc3339();
    let (tables, rows) = match cli.command {
        Cmd::Run => commands::run(&ctx),
        Cmd::Optimize => commands::optimize(&ctx),
        Cmd::Scan => commands::scan(&ctx),
        Cmd::Iterate { .. } => commands::iterate(&ctx),
        Cmd::FloquetCheck { .. } => commands::floquet_check(&ctx),
        Cmd::Spectrum { .. } => commands::spectrum(&ctx),
        Cmd::Sweep => commands::sweep(&ctx),
    }?;
    for t in &tables {
        t.write(&dir)?;
    }
    let finished = chrono::Local::now().to_rfc3339();
    output::write_manifest(&dir, &cfg, &started, &finished, &rows)?;
    Ok(dir)
}

/// Parse `args` and run; returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let name = cli.command.name();
    match execute(cli) {
        Ok(dir) => {
            eprintln!("{name}: wrote {}", dir.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
