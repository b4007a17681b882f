mod config;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use corrnet::market_data::write_sectors;
use corrnet::pipeline::{run_dfa_file, run_pipeline};
use corrnet::synthetic::generate_panel;
use corrnet::{DfaOptions, Error, ErrorClass, MarketSpec, Result, RunConfig, SeriesName, ThresholdSelection};

use config::{parse_multipliers, parse_pair, parse_regime, parse_window, FileConfig};

#[derive(Parser)]
#[command(name = "corrnet", version, about = "Threshold networks from stock return cross-correlations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full analysis over a threshold sweep.
    Analyze(AnalyzeArgs),
    /// Generate a synthetic price panel and sector map.
    Synth(SynthArgs),
    /// Detrended fluctuation analysis of one series.
    Dfa(DfaArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// TOML file with run settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    prices: Option<PathBuf>,
    #[arg(long)]
    sectors: Option<PathBuf>,
    /// static, dynamic or both.
    #[arg(long)]
    threshold: Option<String>,
    /// Comma-separated threshold multipliers.
    #[arg(long)]
    multipliers: Option<String>,
    /// Day window a:b for windowed mean degree; repeatable.
    #[arg(long = "window")]
    windows: Vec<String>,
    /// Comma-separated subset of clustering,degree,assortativity.
    #[arg(long)]
    dfa_series: Option<String>,
    /// DFA fit range lo:hi in scale units.
    #[arg(long)]
    fit_range: Option<String>,
    #[arg(long)]
    no_crossover: bool,
    /// Eigenvectors to report.
    #[arg(long)]
    top_m: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long, alias = "parallelism")]
    jobs: Option<usize>,
    #[arg(long)]
    overwrite: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 50)]
    n_stocks: usize,
    /// Number of returns; the panel has one more date.
    #[arg(long, default_value_t = 2000)]
    n_days: usize,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    #[arg(long, default_value_t = 1)]
    sectors: usize,
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    /// Volatility regime start:end:multiplier; repeatable.
    #[arg(long = "regime")]
    regimes: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for prices.csv and sectors.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DfaArgs {
    #[arg(long)]
    input: PathBuf,
    /// Column name in a headed CSV; otherwise the file must have one column.
    #[arg(long)]
    column: Option<String>,
    #[arg(long)]
    fit_range: Option<String>,
    #[arg(long)]
    crossover: bool,
    #[arg(long)]
    out: PathBuf,
}

fn run_config(args: AnalyzeArgs) -> Result<RunConfig> {
    let file = match &args.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let prices = args.prices.or(file.prices).ok_or_else(|| Error::Config("--prices is required".into()))?;
    let out = args.out.or(file.out).ok_or_else(|| Error::Config("--out is required".into()))?;
    let mut c = RunConfig::new(prices, out);
    c.input_sectors = args.sectors.or(file.sectors);
    if let Some(t) = args.threshold.as_deref().map(str::parse::<ThresholdSelection>).transpose()?.or(file.threshold) {
        c.threshold = t;
    }
    if let Some(m) = args.multipliers.as_deref().map(parse_multipliers).transpose()?.or(file.multipliers) {
        c.multipliers = m;
    }
    let series = args
        .dfa_series
        .as_deref()
        .map(|s| s.split(',').map(|x| x.trim().parse::<SeriesName>()).collect::<Result<Vec<_>>>())
        .transpose()?;
    if let Some(mut s) = series.or(file.dfa_series) {
        s.sort();
        s.dedup();
        c.dfa_series = s;
    }
    let windows = if args.windows.is_empty() { file.windows.unwrap_or_default() } else { args.windows };
    c.windows = windows.iter().map(|w| parse_window(w)).collect::<Result<_>>()?;
    c.dfa_fit_range = args.fit_range.or(file.fit_range).as_deref().map(parse_pair).transpose()?;
    c.crossover = !args.no_crossover && file.crossover.unwrap_or(true);
    if let Some(m) = args.top_m.or(file.top_m) {
        c.top_m = m;
    }
    c.parallelism = args.jobs.or(file.parallelism);
    c.overwrite = args.overwrite || file.overwrite.unwrap_or(false);
    c.validate()?;
    Ok(c)
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let config = run_config(args)?;
    let manifest = run_pipeline(&config)?;
    println!("wrote {} artifacts to {}", manifest.artifacts.len(), config.output_dir.display());
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let spec = MarketSpec {
        n_stocks: args.n_stocks,
        n_days: args.n_days,
        market_beta: args.beta,
        n_sectors: args.sectors,
        sector_gamma: args.gamma,
        noise_sigma: args.noise,
        regimes: args.regimes.iter().map(|r| parse_regime(r)).collect::<Result<_>>()?,
        seed: args.seed,
    };
    let panel = generate_panel(&spec)?;
    fs::create_dir_all(&args.out).map_err(|e| Error::Io { path: args.out.clone(), source: e })?;
    let write = |name: &str, f: &dyn Fn(&mut Vec<u8>) -> std::io::Result<()>| -> Result<()> {
        let path = args.out.join(name);
        let mut buf = Vec::new();
        f(&mut buf).and_then(|_| fs::write(&path, &buf)).map_err(|e| Error::Io { path, source: e })
    };
    write("prices.csv", &|b| panel.write_csv(b))?;
    write("sectors.csv", &|b| write_sectors(panel.sectors().expect("generated panels carry sectors"), b))?;
    println!("wrote {} stocks x {} days to {}", spec.n_stocks, spec.n_days + 1, args.out.display());
    Ok(())
}

fn dfa(args: DfaArgs) -> Result<()> {
    let opts = DfaOptions {
        scales: None,
        fit_range: args.fit_range.as_deref().map(parse_pair).transpose()?,
        crossover: args.crossover,
    };
    let r = run_dfa_file(&args.input, args.column.as_deref(), &opts, &args.out)?;
    println!("theta = {}", r.theta);
    if let Some(c) = r.crossover {
        println!("crossover at {}: {} below, {} above (gain {})", c.t_c, c.theta_below, c.theta_above, c.sse_gain);
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Input => 2,
        ErrorClass::Numerical => 3,
        ErrorClass::Io => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Synth(a) => synth(a),
        Command::Dfa(a) => dfa(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::debug!("{e:?}");
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
