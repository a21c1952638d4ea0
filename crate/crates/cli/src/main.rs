use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use poset_mcmc::chain::{self, RunConfig, RunOptions, MANIFEST_FILE};
use poset_mcmc::enumeration::{self, ExactObservable};
use poset_mcmc::moves::MoveMix;
use poset_mcmc::pipeline::{self, AnalyzeOptions, ValidationOptions};

/// Uniform sampling of naturally labeled partial orders.
///
/// Every option can also be set through an environment variable named
/// `POSET_MCMC_<OPTION>` (for example `POSET_MCMC_SEED`). Command-line flags
/// win over the environment, which wins over `--config` files.
#[derive(Parser)]
#[command(name = "poset-mcmc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded chains from the standard starts, writing traces and checkpoints.
    Run(RunArgs),
    /// Exact distribution of an observable over all n-orders.
    Enumerate(EnumerateArgs),
    /// Compare chain histograms of R and height with exact enumeration.
    Validate(ValidateArgs),
    /// Thermalization, autocorrelation, histograms and plot data from run directories.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Key-value config file (`key = value` per line, manifest keys).
    #[arg(long, env = "POSET_MCMC_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, env = "POSET_MCMC_N")]
    n: Option<usize>,
    #[arg(long, env = "POSET_MCMC_SEED")]
    seed: Option<String>,
    #[arg(long, env = "POSET_MCMC_SWEEPS")]
    sweeps: Option<u64>,
    /// Attempted moves per sweep [default: 2n³].
    #[arg(long, env = "POSET_MCMC_MOVES_PER_SWEEP")]
    moves_per_sweep: Option<u64>,
    /// Comma-separated subset of chain,antichain,bipartite,random_kr, or `all`.
    #[arg(long, env = "POSET_MCMC_STARTS")]
    starts: Option<String>,
    #[arg(long, env = "POSET_MCMC_RECORD_INTERVAL")]
    record_interval: Option<u64>,
    /// Record the interval-size histogram in every trace row.
    #[arg(long, env = "POSET_MCMC_INTERVALS")]
    intervals: Option<Option<bool>>,
    /// Level cutoff for the layeredness check [default: 7 for 13 ≤ n ≤ 24, else 6].
    #[arg(long, env = "POSET_MCMC_H0")]
    h0: Option<usize>,
    /// Independent replicas per start.
    #[arg(long, env = "POSET_MCMC_CHAINS")]
    chains: Option<usize>,
    #[arg(long, env = "POSET_MCMC_CHECKPOINT_EVERY")]
    checkpoint_every: Option<u64>,
    /// mixed, relation, link, or faulty-link (a negative control).
    #[arg(long, env = "POSET_MCMC_MIX")]
    mix: Option<String>,
    #[arg(long, env = "POSET_MCMC_OUT")]
    out: Option<PathBuf>,
    /// Resume the run in this directory (or the directory of this checkpoint).
    #[arg(long, env = "POSET_MCMC_RESUME")]
    resume: Option<PathBuf>,
    /// Stop every chain after this many sweeps, leaving a resumable run.
    #[arg(long)]
    stop_after: Option<u64>,
}

#[derive(Args)]
struct EnumerateArgs {
    #[arg(long, env = "POSET_MCMC_N")]
    n: usize,
    /// height, R, N_min, N_max or chi.
    #[arg(long, default_value = "height")]
    observable: String,
    /// Output CSV [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, env = "POSET_MCMC_N")]
    n: usize,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, env = "POSET_MCMC_SEED", default_value = "1")]
    seed: String,
    #[arg(long, default_value_t = 100)]
    burn_in: u64,
    #[arg(long, env = "POSET_MCMC_MOVES_PER_SWEEP")]
    moves_per_sweep: Option<u64>,
    #[arg(long, env = "POSET_MCMC_MIX", default_value = "mixed")]
    mix: String,
    /// Write the report here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Run directories written by `run`.
    #[arg(required = true)]
    dirs: Vec<PathBuf>,
    #[arg(long, env = "POSET_MCMC_OUT", default_value = "analysis")]
    out: PathBuf,
    /// Discard this many sweeps instead of estimating the thermalization time.
    #[arg(long)]
    therm: Option<u64>,
    /// Autocorrelation time in sweeps, instead of fitting it.
    #[arg(long)]
    tau: Option<f64>,
    /// Thermalization window as a fraction of the trace length.
    #[arg(long, default_value_t = 0.1)]
    window_fraction: f64,
    /// Agreement tolerance in combined standard errors.
    #[arg(long, default_value_t = 3.0)]
    k: f64,
    #[arg(long, default_value_t = 0.005)]
    r_bin_width: f64,
    /// Also write a gnuplot script.
    #[arg(long)]
    gnuplot: bool,
}

fn parse_seed(s: &str) -> Result<u64> {
    chain::parse_seed(s).with_context(|| format!("seed: `{s}` is not a number"))
}

fn run_config(args: &RunArgs) -> Result<RunConfig> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        pairs = chain::parse_key_values(&text).with_context(|| format!("in {}", path.display()))?;
    }
    let n_from_file = pairs.iter().find(|(k, _)| k == "n").map(|(_, v)| v.parse::<usize>());
    let n = match (args.n, n_from_file) {
        (Some(n), _) => n,
        (None, Some(Ok(n))) => n,
        (None, Some(Err(_))) => bail!("n: bad value in config file"),
        (None, None) => bail!("n: required (flag --n, POSET_MCMC_N, or config file)"),
    };
    let mut c = RunConfig::new(n, 0, 1);
    for (k, v) in &pairs {
        if k != "n" {
            c.set(k, v)
                .with_context(|| format!("in {}", args.config.as_ref().unwrap().display()))?;
        }
    }
    if args.moves_per_sweep.is_none() && !pairs.iter().any(|(k, _)| k == "moves_per_sweep") {
        c.moves_per_sweep = poset_mcmc::moves::default_moves_per_sweep(n);
    }
    if args.h0.is_none() && !pairs.iter().any(|(k, _)| k == "h0") {
        c.h0 = poset_mcmc::observables::default_h0(n);
    }
    apply_flags(&mut c, args)?;
    Ok(c)
}

fn apply_flags(c: &mut RunConfig, args: &RunArgs) -> Result<()> {
    if let Some(s) = &args.seed {
        c.seed = parse_seed(s)?;
    }
    if let Some(v) = args.sweeps {
        c.sweeps = v;
    }
    if let Some(v) = args.moves_per_sweep {
        c.moves_per_sweep = v;
    }
    if let Some(s) = &args.starts {
        c.starts = chain::parse_starts(s).context("starts")?;
    }
    if let Some(v) = args.record_interval {
        c.record_interval = v;
    }
    if let Some(v) = args.intervals {
        c.intervals = v.unwrap_or(true);
    }
    if let Some(v) = args.h0 {
        c.h0 = v;
    }
    if let Some(v) = args.chains {
        c.chains = v;
    }
    if let Some(v) = args.checkpoint_every {
        c.checkpoint_every = v;
    }
    if let Some(s) = &args.mix {
        c.mix = s.parse().context("mix")?;
    }
    if let Some(v) = &args.out {
        c.out_dir = v.clone();
    }
    Ok(())
}

fn resume_dir(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.to_path_buf()
    } else {
        path.parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let (config, resume) = match &args.resume {
        Some(path) => {
            let dir = resume_dir(path);
            let text = fs::read_to_string(dir.join(MANIFEST_FILE))
                .with_context(|| format!("no manifest in {}", dir.display()))?;
            let mut c = RunConfig::from_manifest(&text, &dir)?;
            apply_flags(&mut c, &args)?;
            c.out_dir = dir;
            (c, true)
        }
        None => (run_config(&args)?, false),
    };
    if let (Some(n), Some(_)) = (args.n, &args.resume) {
        if n != config.n {
            bail!("n: --n {n} conflicts with the resumed run (n = {})", config.n);
        }
    }
    let summary = chain::run(
        &config,
        RunOptions {
            resume,
            stop_after: args.stop_after,
        },
    )?;
    println!(
        "n = {}, moves_per_sweep = {}, out = {}",
        config.n,
        config.moves_per_sweep,
        config.out_dir.display()
    );
    for c in &summary.chains {
        let from = c.resumed_from.map(|s| format!(" (resumed at {s})")).unwrap_or_default();
        println!(
            "{:<14} sweeps = {}{from}, acceptance = {:.4}",
            c.label,
            c.sweeps,
            c.stats.acceptance_rate()
        );
    }
    Ok(())
}

fn cmd_enumerate(args: EnumerateArgs) -> Result<()> {
    let obs = ExactObservable::parse(&args.observable, args.n)?;
    let d = enumeration::exact_distribution(args.n, obs)?;
    match &args.out {
        Some(path) => {
            fs::write(path, d.to_csv()).with_context(|| format!("writing {}", path.display()))?;
            println!("n = {}, total = {}, written to {}", args.n, d.total, path.display());
        }
        None => print!("{}", d.to_csv()),
    }
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<bool> {
    let mut o = ValidationOptions::new(args.n, args.samples, parse_seed(&args.seed)?);
    o.burn_in = args.burn_in;
    o.mix = args.mix.parse::<MoveMix>().context("mix")?;
    if let Some(m) = args.moves_per_sweep {
        o.moves_per_sweep = m;
    }
    let report = pipeline::validate(&o)?;
    let text = report.to_string();
    println!("{text}");
    if let Some(path) = &args.out {
        fs::write(path, format!("{text}\n")).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(report.passed())
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<()> {
    let options = AnalyzeOptions {
        window_fraction: args.window_fraction,
        k: args.k,
        therm_override: args.therm,
        tau_override: args.tau,
        r_bin_width: args.r_bin_width,
        ..AnalyzeOptions::default()
    };
    let results = pipeline::analyze_dirs(&args.dirs, &args.out, &options, args.gnuplot)?;
    for a in &results {
        print!("{}", a.report());
    }
    println!("plot data written to {}", args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a).map(|_| true),
        Command::Enumerate(a) => cmd_enumerate(a).map(|_| true),
        Command::Validate(a) => cmd_validate(a),
        Command::Analyze(a) => cmd_analyze(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
