//! Command-line front end: file-based, deterministic runs of the ensemble
//! analysis library.
//!
//! Exit codes: 0 success, 1 usage or configuration problem, 2 numerical
//! failure, 3 non-convergence where a converged answer was required.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use metexit::{
    asymptotic_efficiency, combined_cn_density, combined_vn_density, channel_vector,
    ebn0_db_to_sigma, find_threshold, ga_threshold, gexit_chart, parse_ensemble,
    per_edge_gexit_chart, run_de, run_ga_de, shannon_sigma, sigma_to_ebn0_db, DeOptions, DeTrace,
    EnsembleSpec, Error, GexitChart, GridSpec, QuantizerSpec, ThresholdResult,
};

const EXIT_CONFIG: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_NO_CONVERGENCE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "metexit",
    version,
    about = "Asymptotic analysis of multi-edge-type LDPC ensembles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse an ensemble file and report socket balance and design rate.
    Validate(ValidateArgs),
    /// Locate the decoding threshold by bisection.
    Threshold(ThresholdArgs),
    /// Emit decoding-trajectory chart CSVs at one noise level.
    Gexit(GexitArgs),
    /// Emit the multilevel rate allocation over an SNR sweep.
    Rates(RatesArgs),
    /// Run at a fixed noise level and dump density snapshots.
    Trace(TraceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    /// Exact density evolution.
    De,
    /// Gaussian-projected variable-node messages.
    Ga,
}

#[derive(Args)]
struct GridArgs {
    /// Half-width of the log-likelihood grid.
    #[arg(long = "grid-llr-max", default_value_t = 30.0)]
    llr_max: f64,
    /// Number of grid bins (odd, so a bin center sits at zero).
    #[arg(long = "grid-bins", default_value_t = 4097)]
    n_bins: usize,
}

impl GridArgs {
    fn build(&self) -> Result<GridSpec> {
        Ok(GridSpec::new(self.llr_max, self.n_bins)?)
    }
}

#[derive(Args)]
struct ChannelArgs {
    /// Noise standard deviation of the binary-input AWGN channel.
    #[arg(long, group = "channel", required = true)]
    sigma: Option<f64>,
    /// Eb/N0 in dB; converted through the ensemble's design rate.
    #[arg(long = "ebn0-db", group = "channel")]
    ebn0_db: Option<f64>,
}

impl ChannelArgs {
    fn sigma_for(&self, spec: &EnsembleSpec) -> Result<f64> {
        match (self.sigma, self.ebn0_db) {
            (Some(s), None) => Ok(s),
            (None, Some(db)) => Ok(ebn0_db_to_sigma(db, spec.nominal_rate())?),
            _ => Err(anyhow!("give exactly one of --sigma and --ebn0-db")),
        }
    }
}

#[derive(Args)]
struct ValidateArgs {
    /// Ensemble description (JSON).
    #[arg(long)]
    ensemble: PathBuf,
}

#[derive(Args)]
struct ThresholdArgs {
    /// Ensemble description (JSON).
    #[arg(long)]
    ensemble: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::De)]
    method: Method,
    #[command(flatten)]
    grid: GridArgs,
    /// Bisection bracket and tolerance as LO:HI:TOL (noise deviations).
    /// Defaults to a bracket derived from the Shannon limit of the rate.
    #[arg(long)]
    sweep: Option<String>,
    /// Write the full result as JSON here as well.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GexitArgs {
    /// Ensemble description (JSON).
    #[arg(long)]
    ensemble: PathBuf,
    #[command(flatten)]
    channel: ChannelArgs,
    #[arg(long, value_enum, default_value_t = Method::De)]
    method: Method,
    #[command(flatten)]
    grid: GridArgs,
    /// Emit only the chart of this edge type (0-based) instead of the
    /// combined chart plus every per-edge chart.
    #[arg(long)]
    edge: Option<usize>,
    /// Output directory for the CSV files and the metadata sidecar.
    #[arg(long, default_value = "gexit-out")]
    out: PathBuf,
}

#[derive(Args)]
struct RatesArgs {
    /// Label width of the scalar quantizer, in bits.
    #[arg(long, default_value_t = 4)]
    levels: u32,
    /// Quantizer step size in normalized source units.
    #[arg(long, default_value_t = 0.32)]
    delta: f64,
    /// SNR sweep in dB as LO:HI:STEP.
    #[arg(long, default_value = "-20:20:1")]
    sweep: String,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TraceArgs {
    /// Ensemble description (JSON).
    #[arg(long)]
    ensemble: PathBuf,
    #[command(flatten)]
    channel: ChannelArgs,
    #[arg(long, value_enum, default_value_t = Method::De)]
    method: Method,
    #[command(flatten)]
    grid: GridArgs,
    /// Record the aggregate densities every this many iterations.
    #[arg(long = "snapshot-every", default_value_t = 10)]
    snapshot_every: usize,
    /// Output directory for the snapshot CSVs and the run summary.
    #[arg(long, default_value = "trace-out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Keep clap's rendering but claim the usage exit code.
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    if let Err(e) = init_thread_pool() {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_CONFIG);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(classify(&e))
        }
    }
}

/// Honors METEXIT_THREADS as a cap on the worker pool.
fn init_thread_pool() -> Result<()> {
    if let Ok(raw) = std::env::var("METEXIT_THREADS") {
        let n: usize = raw
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| anyhow!("METEXIT_THREADS must be a positive integer, got {raw:?}"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("worker pool was already initialized")?;
    }
    Ok(())
}

/// Maps failures onto the documented exit codes. Anything that is not a
/// library error is a configuration problem (bad paths, bad flag syntax).
fn classify(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::InvalidBracket(_)) => EXIT_NO_CONVERGENCE,
        Some(
            Error::Json(_)
            | Error::InvalidEnsemble(_)
            | Error::InvalidGrid(_)
            | Error::NonpositiveSigma(_)
            | Error::RateOutOfRange(_)
            | Error::InvalidQuantizer(_)
            | Error::InvalidSource(_)
            | Error::ZeroSockets { .. },
        ) => EXIT_CONFIG,
        Some(_) => EXIT_NUMERICAL,
        None => EXIT_CONFIG,
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Validate(args) => cmd_validate(&args),
        Command::Threshold(args) => cmd_threshold(&args),
        Command::Gexit(args) => cmd_gexit(&args),
        Command::Rates(args) => cmd_rates(&args),
        Command::Trace(args) => cmd_trace(&args),
    }
}

fn load_ensemble(path: &Path) -> Result<EnsembleSpec> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read ensemble file {}", path.display()))?;
    Ok(parse_ensemble(&text)?)
}

/// Writes through a temp file plus rename so readers never see a torn file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).with_context(|| format!("cannot write {}", tmp.display()))?;
    fs::rename(&tmp, path)
        .with_context(|| format!("cannot move {} into place", path.display()))?;
    Ok(())
}

fn parse_triple(raw: &str, what: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<&str> = raw.split(':').collect();
    if parts.len() != 3 {
        return Err(anyhow!("{what} must be LO:HI:STEP, got {raw:?}"));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.parse::<f64>().map_err(|_| anyhow!("{what}: {p:?} is not a number")))
        .collect::<Result<_>>()?;
    Ok((nums[0], nums[1], nums[2]))
}

fn cmd_validate(args: &ValidateArgs) -> Result<()> {
    let spec = load_ensemble(&args.ensemble)?;
    let report = spec.validate_sockets();
    println!("edge types     {}", spec.n_edge_types);
    println!("channel slots  {}", spec.n_channels);
    println!("design rate    {:.11e}", spec.nominal_rate());
    println!("punctured      {:.11e}", spec.punctured_fraction());
    for b in &report.per_edge {
        println!(
            "edge {}: variable sockets {:.11e}, check sockets {:.11e}, rel dev {:.3e}",
            b.edge, b.variable, b.check, b.rel_dev
        );
    }
    if !report.balanced {
        return Err(Error::InvalidEnsemble("socket counts are unbalanced".into()).into());
    }
    println!("balanced       yes");
    Ok(())
}

/// Bracket enclosing any plausible threshold: decoding cannot succeed past
/// the Shannon noise level, and no code here sits below 60% of it.
fn default_bracket(spec: &EnsembleSpec, grid: GridSpec) -> Result<(f64, f64, f64)> {
    let sh = shannon_sigma(spec.nominal_rate(), grid)?;
    Ok((0.6 * sh, 1.02 * sh, 1e-3))
}

fn cmd_threshold(args: &ThresholdArgs) -> Result<()> {
    let spec = load_ensemble(&args.ensemble)?;
    let grid = args.grid.build()?;
    let (lo, hi, tol) = match &args.sweep {
        Some(raw) => parse_triple(raw, "--sweep")?,
        None => default_bracket(&spec, grid)?,
    };
    let opts = DeOptions::default();
    let started = std::time::Instant::now();
    let result: ThresholdResult = match args.method {
        Method::De => find_threshold(&spec, grid, lo, hi, tol, &opts)?,
        Method::Ga => ga_threshold(&spec, grid, lo, hi, tol, &opts)?,
    };
    let elapsed = started.elapsed().as_secs_f64();
    let rate = spec.nominal_rate();
    let sigma_star = result.sigma_star;
    let ebn0 = sigma_to_ebn0_db(sigma_star, rate)?;
    let eff = asymptotic_efficiency(rate, sigma_star, grid)?;
    println!("sigma_star              {sigma_star:.11e}");
    println!("ebn0_db_star            {ebn0:.11e}");
    println!("iterations_at_threshold {}", result.iterations_at_threshold);
    println!("efficiency              {eff:.11e}");
    println!("probes                  {}", result.probes.len());
    println!("seconds                 {elapsed:.1}");
    if let Some(out) = &args.out {
        let doc = serde_json::json!({
            "method": match args.method { Method::De => "de", Method::Ga => "ga" },
            "rate": rate,
            "grid": { "llr_max": grid.llr_max, "n_bins": grid.n_bins },
            "bracket": { "lo": lo, "hi": hi, "tol": tol },
            "sigma_star": sigma_star,
            "ebn0_db_star": ebn0,
            "iterations_at_threshold": result.iterations_at_threshold,
            "efficiency": eff,
            "seconds": elapsed,
            "probes": result.probes.iter().map(|p| serde_json::json!({
                "sigma": p.sigma,
                "converged": p.converged,
                "iterations": p.iterations,
            })).collect::<Vec<_>>(),
        });
        write_atomic(out, format!("{doc:#}\n").as_bytes())?;
    }
    Ok(())
}

fn run_method(
    spec: &EnsembleSpec,
    sigma: f64,
    grid: GridSpec,
    method: Method,
    opts: &DeOptions,
) -> Result<DeTrace> {
    Ok(match method {
        Method::De => run_de(spec, sigma, grid, opts)?,
        Method::Ga => run_ga_de(spec, sigma, grid, opts)?,
    })
}

fn chart_csv(chart: &GexitChart) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    chart.write_csv(&mut buf)?;
    Ok(buf)
}

fn cmd_gexit(args: &GexitArgs) -> Result<()> {
    let spec = load_ensemble(&args.ensemble)?;
    let grid = args.grid.build()?;
    let sigma = args.channel.sigma_for(&spec)?;
    if let Some(edge) = args.edge {
        if edge >= spec.n_edge_types {
            return Err(anyhow!(
                "edge {edge} is out of range; the ensemble has {} edge types",
                spec.n_edge_types
            ));
        }
    }
    let opts = DeOptions { snapshot_every: Some(1), ..DeOptions::default() };
    let trace = run_method(&spec, sigma, grid, args.method, &opts)?;

    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    let mut charts = Vec::new();
    let edges: Vec<Option<usize>> = match args.edge {
        Some(e) => vec![Some(e)],
        None => std::iter::once(None).chain((0..spec.n_edge_types).map(Some)).collect(),
    };
    for selector in edges {
        let (name, chart) = match selector {
            None => ("combined.csv".to_string(), gexit_chart(&spec, sigma, &trace)?),
            Some(e) => (format!("edge_{e}.csv"), per_edge_gexit_chart(&spec, sigma, &trace, e)?),
        };
        write_atomic(&args.out.join(&name), &chart_csv(&chart)?)?;
        println!("{name}: crossed {}", chart.crossed);
        charts.push(serde_json::json!({ "file": name, "crossed": chart.crossed }));
    }
    let meta = serde_json::json!({
        "sigma": sigma,
        "ebn0_db": sigma_to_ebn0_db(sigma, spec.nominal_rate())?,
        "method": match args.method { Method::De => "de", Method::Ga => "ga" },
        "grid": { "llr_max": grid.llr_max, "n_bins": grid.n_bins },
        "converged": trace.converged,
        "iterations": trace.iterations,
        "charts": charts,
    });
    write_atomic(&args.out.join("metadata.json"), format!("{meta:#}\n").as_bytes())?;
    Ok(())
}

fn cmd_rates(args: &RatesArgs) -> Result<()> {
    let q = QuantizerSpec::new(args.levels, args.delta)?;
    let (lo, hi, step) = parse_triple(&args.sweep, "--sweep")?;
    if !(step > 0.0 && hi >= lo) {
        return Err(anyhow!("--sweep needs LO <= HI and STEP > 0"));
    }
    let mut points = Vec::new();
    let mut db = lo;
    while db <= hi + 1e-9 {
        points.push(db);
        db += step;
    }
    let rows = metexit::rate_sweep(&points, &q)?;
    let mut buf = Vec::new();
    writeln!(buf, "snr_db,level,mi,source_rate,channel_rate,sum_mi,analytic_mi")?;
    for (db, rates) in &rows {
        for (i, lv) in rates.levels.iter().enumerate() {
            writeln!(
                buf,
                "{db:.11e},{i},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e}",
                lv.mi, lv.source_rate, lv.channel_rate, rates.sum_mi, rates.analytic_mi
            )?;
        }
    }
    match &args.out {
        Some(path) => write_atomic(path, &buf)?,
        None => std::io::stdout().write_all(&buf)?,
    }
    Ok(())
}

fn cmd_trace(args: &TraceArgs) -> Result<()> {
    if args.snapshot_every == 0 {
        return Err(anyhow!("--snapshot-every must be at least 1"));
    }
    let spec = load_ensemble(&args.ensemble)?;
    let grid = args.grid.build()?;
    let sigma = args.channel.sigma_for(&spec)?;
    let opts = DeOptions { snapshot_every: Some(args.snapshot_every), ..DeOptions::default() };
    let trace = run_method(&spec, sigma, grid, args.method, &opts)?;
    let channel = channel_vector(&spec, sigma, grid)?;

    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    let mut files = Vec::new();
    for snap in &trace.snapshots {
        let vn = combined_vn_density(&spec, &channel, &snap.cn)?;
        let cn = combined_cn_density(&spec, &snap.vn)?;
        let mut buf = Vec::new();
        writeln!(buf, "llr,vn_mass,cn_mass")?;
        for (k, (v, c)) in vn.mass().iter().zip(cn.mass()).enumerate() {
            writeln!(buf, "{:.11e},{v:.11e},{c:.11e}", grid.center(k))?;
        }
        let name = format!("iter_{:04}.csv", snap.iteration);
        write_atomic(&args.out.join(&name), &buf)?;
        files.push(name);
    }
    let mut pe_csv = Vec::new();
    trace.write_csv(&mut pe_csv)?;
    write_atomic(&args.out.join("pe.csv"), &pe_csv)?;
    let meta = serde_json::json!({
        "sigma": sigma,
        "method": match args.method { Method::De => "de", Method::Ga => "ga" },
        "grid": { "llr_max": grid.llr_max, "n_bins": grid.n_bins },
        "converged": trace.converged,
        "iterations": trace.iterations,
        "snapshots": files,
    });
    write_atomic(&args.out.join("summary.json"), format!("{meta:#}\n").as_bytes())?;
    println!(
        "{} snapshots, converged {}, iterations {}",
        trace.snapshots.len(),
        trace.converged,
        trace.iterations
    );
    Ok(())
}
