//! Command-line front end: run experiments from a config file, demo the
//! budget composition arithmetic, and run brute-force sanity oracles.

use std::collections::BTreeMap;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dpsumm_core::harness::{run_experiment, ExperimentConfig, Mode};
use dpsumm_core::privacy::compose_events;

mod oracle;

#[derive(Parser)]
#[command(
    name = "dpsumm",
    about = "Differentially private distributed data summarization: experiment runner and budget tools",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Theory,
    Practical,
    NoiseOff,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Theory => Mode::Theory,
            ModeArg::Practical => Mode::Practical,
            ModeArg::NoiseOff => Mode::NoiseOff,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run(RunArgs),
    /// Compose an epsilon stream and print every bound.
    Compose(ComposeArgs),
    /// Brute-force sanity checks on small random instances.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the TOML experiment config.
    #[arg(long)]
    config: String,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<String>,
    /// Override the config's mode.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Also write full ledger event dumps as JSON.
    #[arg(long)]
    dump_ledgers: bool,
}

#[derive(Args)]
struct ComposeArgs {
    /// Per-event epsilon of a homogeneous stream.
    #[arg(long, conflicts_with = "summary_channel")]
    eps: Option<f64>,
    /// Number of release iterations.
    #[arg(long, requires = "eps")]
    iters: Option<usize>,
    /// Ledger entries per iteration (1 or 2).
    #[arg(long, default_value_t = 1)]
    events_per_iter: u8,
    /// Composition slack.
    #[arg(long)]
    delta: f64,
    /// Compose the per-epoch summary stream instead: p * t-subs events at
    /// eps-base / sqrt(p * t-subs).
    #[arg(long)]
    summary_channel: bool,
    /// Summary size p for --summary-channel.
    #[arg(long, default_value_t = 100)]
    p: usize,
    /// Iterations per epoch for --summary-channel.
    #[arg(long, default_value_t = 5)]
    t_subs: usize,
    /// Epsilon numerator for --summary-channel.
    #[arg(long, default_value_t = 0.01)]
    eps_base: f64,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum OracleCheck {
    Submod,
    Greedy,
    Auction,
    All,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Instances per check.
    #[arg(long, default_value_t = 10)]
    instances: usize,
    #[arg(long, value_enum, default_value_t = OracleCheck::All)]
    check: OracleCheck,
}

fn cmd_run(args: &RunArgs) -> Result<(), String> {
    let mut config =
        ExperimentConfig::from_path(&args.config).map_err(|e| format!("config: {e}"))?;
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(out) = &args.out {
        config.out_dir = out.clone();
    }
    if let Some(mode) = args.mode {
        config.mode = mode.into();
    }
    if args.dump_ledgers {
        config.dump_ledgers = true;
    }
    let report = run_experiment(&config).map_err(|e| format!("run: {e}"))?;

    // Per-algorithm means over successful rows.
    let mut by_alg: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for row in &report.rows {
        if let Some(m) = row.mmd_sq {
            by_alg.entry(row.alg).or_default().push(m);
        }
    }
    println!(
        "wrote {} rows to {}/metrics.csv",
        report.rows.len(),
        config.out_dir
    );
    for (alg, vals) in by_alg {
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        println!("  {alg:8} mean MMD^2 = {mean:.6} over {} runs", vals.len());
    }
    if !report.failures.is_empty() {
        println!("{} sub-run failure(s):", report.failures.len());
        for f in &report.failures {
            println!("  {f}");
        }
    }
    Ok(())
}

fn cmd_compose(args: &ComposeArgs) -> Result<(), String> {
    let (events, label): (Vec<(f64, f64)>, String) = if args.summary_channel {
        let k = args.t_subs * args.p;
        let eps = args.eps_base / (k as f64).sqrt();
        (
            vec![(eps, 0.0); k],
            format!(
                "summary channel: {k} events at eps = {eps:.6} \
                 ({} epochs x {} iterations, base {})",
                args.p, args.t_subs, args.eps_base
            ),
        )
    } else {
        let eps = args.eps.ok_or("either --eps or --summary-channel required")?;
        let iters = args.iters.ok_or("--iters required with --eps")?;
        if !matches!(args.events_per_iter, 1 | 2) {
            return Err("--events-per-iter must be 1 or 2".into());
        }
        let k = iters * args.events_per_iter as usize;
        (
            vec![(eps, 0.0); k],
            format!(
                "{iters} iterations at eps = {eps} (x{} events per iteration)",
                args.events_per_iter
            ),
        )
    };
    let n = events.len();
    let composition =
        compose_events(events.iter().copied(), args.delta).map_err(|e| e.to_string())?;
    // Classic strong-composition figure for the same stream, as a reference
    // point: k*eps*(e^eps - 1) + eps*sqrt(2k ln(1/delta)).
    let eps0 = events[0].0;
    let strong = n as f64 * eps0 * (eps0.exp() - 1.0)
        + eps0 * (2.0 * n as f64 * (1.0 / args.delta).ln()).sqrt();

    println!("{label}, slack delta = {}", args.delta);
    println!("  sum bound:                  {:.6}", composition.eps_sum);
    println!("  sqrt-log bound:             {:.6}", composition.eps_sqrt_log);
    println!("  sqrt-exp bound:             {:.6}", composition.eps_sqrt_exp);
    println!("  composed eps (minimum):     {:.6}", composition.eps_total);
    println!("  composed delta:             {:.6}", composition.delta_total);
    println!("  strong-composition figure:  {strong:.6}");
    Ok(())
}

fn cmd_oracle(args: &OracleArgs) -> Result<bool, String> {
    let mut all_ok = true;
    if matches!(args.check, OracleCheck::Submod | OracleCheck::All) {
        all_ok &= oracle::check_submodularity(args.seed, args.instances)?;
    }
    if matches!(args.check, OracleCheck::Greedy | OracleCheck::All) {
        all_ok &= oracle::check_greedy_vs_bruteforce(args.seed, args.instances)?;
    }
    if matches!(args.check, OracleCheck::Auction | OracleCheck::All) {
        all_ok &= oracle::check_auction_rate(args.seed)?;
    }
    Ok(all_ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => cmd_run(args).map(|()| true),
        Command::Compose(args) => cmd_compose(args).map(|()| true),
        Command::Oracle(args) => cmd_oracle(args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
