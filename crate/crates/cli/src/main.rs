//! `dynwin`: run window-scheme simulations of a local quench in the infinite
//! spin-1 Heisenberg chain, compare datasets, and produce exact references.

mod cache;
mod compare;
mod config;
mod oracle;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Mode, RunConfig, Track};
use dynwin::Error;

#[derive(Parser)]
#[command(name = "dynwin", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a quenched window and write the profile dataset.
    Run(RunArgs),
    /// Compare two profile datasets at given positions.
    Compare(compare::CompareArgs),
    /// Exact evolution of a small open chain, written as a profile dataset.
    Oracle(oracle::OracleArgs),
    /// Compute (or load) the uniform ground state and print its summary.
    Groundstate(GroundstateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML file with run settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    chi: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    tmax: Option<f64>,
    #[arg(long)]
    order: Option<u32>,
    #[arg(long)]
    window_size: Option<usize>,
    /// Fidelity below which the window moves.
    #[arg(long)]
    threshold: Option<f64>,
    /// Unit cells added or shifted per event.
    #[arg(long)]
    cells: Option<usize>,
    /// Moving window: which front to follow.
    #[arg(long, value_enum)]
    track: Option<Track>,
    #[arg(long)]
    quench_op: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    quench_site: Option<i64>,
    /// Outside-window sites reported on each side.
    #[arg(long)]
    halo: Option<usize>,
    #[arg(long)]
    energy_every: Option<usize>,
    #[arg(long)]
    checkpoint_every: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "DYNWIN_CACHE")]
    ground_state_cache: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(self) -> dynwin::Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {$( if let Some(v) = self.$flag { c.$field = v; } )*};
        }
        set!(mode => mode, chi => chi, dt => dt, tmax => t_max, order => trotter_order, window_size => window_size,
             threshold => threshold, cells => cells, track => track, quench_op => quench_operator, halo => halo,
             energy_every => energy_every, checkpoint_every => checkpoint_every, out => out);
        if self.quench_site.is_some() {
            c.quench_site = self.quench_site;
        }
        if self.ground_state_cache.is_some() {
            c.ground_state_cache = self.ground_state_cache;
        }
        Ok(c)
    }
}

#[derive(Args)]
struct GroundstateArgs {
    #[arg(long, default_value_t = 200)]
    chi: usize,
    #[arg(long, default_value_t = 1e-9)]
    conv_tol: f64,
    #[arg(long, env = "DYNWIN_CACHE")]
    ground_state_cache: Option<PathBuf>,
}

fn groundstate(args: GroundstateArgs) -> dynwin::Result<()> {
    if args.chi > config::MAX_CHI {
        return Err(Error::ResourceGuard(format!("chi {} exceeds {}", args.chi, config::MAX_CHI)));
    }
    let (u, cached) = cache::ground_state(args.ground_state_cache.as_deref(), args.chi, args.conv_tol)?;
    let summary = serde_json::json!({
        "model": cache::MODEL_KEY,
        "chi": u.chi,
        "conv_tol": args.conv_tol,
        "e0": u.e0,
        "bond_energy": u.bond_energy,
        "canonical_residual": u.canonical_residual(),
        "cached": cached,
        "path": args.ground_state_cache.map(|d| cache::cache_path(&d, args.chi, args.conv_tol)),
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("json"));
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Invalid(_) | Error::OutsideWindow { .. } | Error::Incomparable(_) | Error::WindowTooSmall { .. } => 2,
        Error::Numerical { .. }
        | Error::NoConvergence { .. }
        | Error::RankDeficient { .. }
        | Error::NotHermitian { .. }
        | Error::Poisoned { .. }
        | Error::Dimension(_) => 3,
        Error::ResourceGuard(_) => 4,
        Error::Format(_) | Error::Io(_) | Error::Csv(_) => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => args.resolve().and_then(|c| run::run(&c)),
        Command::Compare(args) => compare::compare(&args),
        Command::Oracle(args) => oracle::oracle(&args),
        Command::Groundstate(args) => groundstate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dynwin: {e}");
            if let Error::Poisoned { checkpoint: Some(path), .. } = &e {
                eprintln!("dynwin: last good checkpoint: {}", path.display());
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
