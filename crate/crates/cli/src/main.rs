//! `roughvol` command-line interface.
//!
//! Exit status: 0 on success, 1 on usage errors (bad flags, missing input
//! files), 2 on data or numerical errors. Outputs are written only after a
//! run has succeeded. Every artifact written with `--out` gets a sidecar
//! `<out>.config.json` echoing the resolved configuration.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use roughvol::ingest::{self, DayFilterConfig, RawTickFile, Session};
use roughvol::io;
use roughvol::model::{default_delta_n, EtaScheme, SimScenario, TuningSpec};
use roughvol::montecarlo::{self, McPlan};
use roughvol::roughtest::{self, DEFAULT_ALPHAS};
use roughvol::{rng_stream, simulate};

#[derive(Parser, Debug)]
#[command(name = "roughvol", version, about = "Test for rough spot volatility in high-frequency prices")]
struct Cli {
    /// Base random seed.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Log level: error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "info")]
    log_level: String,
    /// Output file. Without it results go to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a price panel and write it as CSV.
    Simulate(SimulateArgs),
    /// Run the roughness test on a price-path CSV.
    Test(TestArgs),
    /// Run size/power replications and report rejection rates.
    Montecarlo(McArgs),
    /// Resample a tick file to a regular grid and apply the day filters.
    Ingest(IngestArgs),
    /// Autocorrelations of the differenced log spot variances.
    Acf(AcfArgs),
    /// Noise scale from a fine/coarse realized-variance ratio.
    CalibrateNoise(CalibrateArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Calibrated scenario label (V1-J1 ... V3-J2).
    #[arg(long, default_value = "V3-J1", conflicts_with = "config")]
    scenario: String,
    /// Scenario JSON file instead of a label.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of days.
    #[arg(long, default_value_t = 7)]
    days: usize,
    /// Replication index of the random stream.
    #[arg(long, default_value_t = 0)]
    replication: u32,
    /// Block index of the random stream.
    #[arg(long, default_value_t = 0)]
    block: u32,
    /// Override simulated steps per day.
    #[arg(long)]
    steps_per_day: Option<usize>,
    /// Override returns dropped at the start of each day.
    #[arg(long)]
    drop_first: Option<usize>,
    /// Also write the latent variance column.
    #[arg(long)]
    latent: bool,
}

/// `timeofday`, `timeofday:<days>` or `lagged:<l1>,<l2>`.
fn parse_eta_scheme(s: &str) -> Result<EtaScheme, String> {
    let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
    match kind {
        "timeofday" => {
            let lookback_days = if arg.is_empty() {
                5
            } else {
                arg.parse().map_err(|_| format!("bad look-back {arg:?}"))?
            };
            Ok(EtaScheme::SameTimeOfDay { lookback_days })
        }
        "lagged" => {
            let (a, b) = arg
                .split_once(',')
                .ok_or_else(|| "lagged needs two lags, e.g. lagged:3,12".to_string())?;
            let l1 = a.trim().parse().map_err(|_| format!("bad lag {a:?}"))?;
            let l2 = b.trim().parse().map_err(|_| format!("bad lag {b:?}"))?;
            Ok(EtaScheme::LaggedBlocks { l1, l2 })
        }
        _ => Err(format!("unknown scheme {s:?}; use timeofday[:days] or lagged:l1,l2")),
    }
}

#[derive(Args, Debug, Clone)]
struct TuningArgs {
    /// Returns per block.
    #[arg(long = "pn", default_value_t = 60)]
    p_n: usize,
    /// Returns used per block.
    #[arg(long = "kn", default_value_t = 48)]
    k_n: usize,
    /// Target modulus of the empirical characteristic function, in (0,1).
    #[arg(long = "frakL", default_value_t = 0.75)]
    frak_l: f64,
    /// Exponent scale: `timeofday[:days]` (same time of day on previous
    /// days, default 5) or `lagged:l1,l2` (bipower on lagged blocks).
    #[arg(long, default_value = "timeofday", value_parser = parse_eta_scheme)]
    eta_scheme: EtaScheme,
    /// Grid spacing in years when the input has no sidecar.
    #[arg(long)]
    delta_n: Option<f64>,
}

impl TuningArgs {
    fn tuning(&self) -> roughvol::Result<TuningSpec> {
        TuningSpec::new(self.frak_l, self.eta_scheme)
    }
}

#[derive(Args, Debug)]
struct TestArgs {
    /// Price-path CSV (`day,step,log_price`).
    input: PathBuf,
    #[command(flatten)]
    tuning: TuningArgs,
    /// Significance levels.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_ALPHAS.to_vec())]
    alpha: Vec<f64>,
    /// Also write the differenced series as CSV.
    #[arg(long)]
    diff_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct McArgs {
    /// Plan JSON; defaults to the six calibrated scenarios.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Restrict to these scenario labels.
    #[arg(long, value_delimiter = ',')]
    scenarios: Vec<String>,
    /// Replications per scenario.
    #[arg(long)]
    reps: Option<usize>,
    /// Days per replication (a multiple of the block length).
    #[arg(long)]
    days: Option<usize>,
    /// Modulus targets.
    #[arg(long = "frakL", value_delimiter = ',')]
    frak_l: Vec<f64>,
    /// Nominal size.
    #[arg(long)]
    alpha: Option<f64>,
    /// 250 blocks (product days) per replication and 1000 replications.
    #[arg(long)]
    full_scale: bool,
}

#[derive(Args, Debug)]
struct IngestArgs {
    /// Tick CSV with header `timestamp,price`.
    input: PathBuf,
    /// Session window, `HH:MM-HH:MM`.
    #[arg(long, default_value = "09:35-16:00")]
    session: String,
    /// Grid step in seconds.
    #[arg(long, default_value_t = 5)]
    step: u32,
    /// Maximum fraction of zero five-minute returns.
    #[arg(long, default_value_t = 0.2)]
    threshold: f64,
    /// File of dates to exclude, one ISO date per line.
    #[arg(long)]
    exclude_file: Option<PathBuf>,
    /// Exchange clock offset from UTC in minutes (e.g. -300).
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    utc_offset_minutes: i32,
}

#[derive(Args, Debug)]
struct AcfArgs {
    /// Price-path CSV.
    input: PathBuf,
    #[command(flatten)]
    tuning: TuningArgs,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    /// Ratio of daily realized variance at the fine to the coarse frequency.
    ratio: f64,
}

enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<roughvol::Error> for Failure {
    fn from(e: roughvol::Error) -> Self {
        Failure::Data(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .init();
    let workers = cli
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
        .max(1);
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global() {
        log::debug!("worker pool already initialised: {e}");
    }
    match run(&cli, workers) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn require_file(p: &Path) -> Outcome {
    if p.is_file() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("input file {} does not exist", p.display())))
    }
}

fn config_sidecar(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".config.json");
    PathBuf::from(s)
}

/// Writes `body` to `--out` (with a config sidecar) or prints it.
fn emit(out: Option<&Path>, body: &str, config: &serde_json::Value) -> anyhow::Result<()> {
    match out {
        Some(p) => {
            fs::write(p, body).with_context(|| format!("writing {}", p.display()))?;
            fs::write(config_sidecar(p), serde_json::to_string_pretty(config)?)?;
        }
        None => print!("{body}"),
    }
    Ok(())
}

fn run(cli: &Cli, workers: usize) -> Outcome {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(cli, a),
        Command::Test(a) => cmd_test(cli, a, out),
        Command::Montecarlo(a) => cmd_montecarlo(cli, a, out, workers),
        Command::Ingest(a) => cmd_ingest(a, out),
        Command::Acf(a) => cmd_acf(a, out),
        Command::CalibrateNoise(a) => cmd_calibrate(a, out),
    }
}

fn cmd_simulate(cli: &Cli, a: &SimulateArgs) -> Outcome {
    let mut scenario = match &a.config {
        Some(p) => {
            require_file(p)?;
            let text = fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            serde_json::from_str::<SimScenario>(&text)
                .map_err(|e| Failure::Usage(format!("{}: invalid scenario: {e}", p.display())))?
        }
        None => SimScenario::calibrated(&a.scenario).map_err(|e| Failure::Usage(e.to_string()))?,
    };
    if let Some(s) = a.steps_per_day {
        scenario.grid.steps_per_day = s;
    }
    if let Some(d) = a.drop_first {
        scenario.grid.drop_first = d;
    }
    scenario.seed = cli.seed;
    let stream = rng_stream(cli.seed, a.replication, a.block);
    let sim = simulate(&scenario, a.days, &stream)?;
    let config = json!({
        "command": "simulate",
        "seed": cli.seed,
        "replication": a.replication,
        "block": a.block,
        "days": a.days,
        "scenario": scenario,
    });
    let latent = a.latent.then_some(sim.latent_variance.as_slice());
    match &cli.out {
        Some(p) => {
            io::write_price_path_with_config(p, &sim.prices, latent, Some(config.clone()))?;
            fs::write(config_sidecar(p), serde_json::to_string_pretty(&config).map_err(anyhow::Error::from)?)
                .map_err(anyhow::Error::from)?;
        }
        None => print!("{}", io::price_path_csv(&sim.prices, latent)?),
    }
    log::info!("simulated {} days, {} returns per day", a.days, scenario.grid.observed_returns());
    Ok(())
}

fn read_path(input: &Path, t: &TuningArgs) -> Result<roughvol::PricePath, Failure> {
    require_file(input)?;
    Ok(io::read_price_path(input, t.delta_n.unwrap_or_else(default_delta_n))?)
}

fn cmd_test(cli: &Cli, a: &TestArgs, out: Option<&Path>) -> Outcome {
    let tuning = a.tuning.tuning().map_err(|e| Failure::Usage(e.to_string()))?;
    let path = read_path(&a.input, &a.tuning)?;
    let grid = roughtest::build_block_grid(&path, a.tuning.p_n, a.tuning.k_n)?;
    let diff = roughtest::compute_diff_panel(&path, &grid, &tuning)?;
    let report = roughtest::test_statistic(&diff, &a.alpha)?;
    let config = json!({
        "command": "test",
        "input": a.input,
        "seed": cli.seed,
        "p_n": a.tuning.p_n,
        "k_n": a.tuning.k_n,
        "tuning": tuning,
        "alpha": a.alpha,
        "delta_n": path.delta_n,
        "n_days": path.n_days(),
    });
    let body = serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)? + "\n";
    if let Some(d) = &a.diff_out {
        fs::write(d, diff.to_csv()).map_err(anyhow::Error::from)?;
    }
    emit(out, &body, &config)?;
    log::info!(
        "statistic {:.4} over {} summands ({} dropped)",
        report.statistic,
        report.n_summands,
        report.n_dropped
    );
    Ok(())
}

fn cmd_montecarlo(cli: &Cli, a: &McArgs, out: Option<&Path>, workers: usize) -> Outcome {
    let mut plan = match &a.plan {
        Some(p) => {
            require_file(p)?;
            let text = fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            serde_json::from_str::<McPlan>(&text)
                .map_err(|e| Failure::Usage(format!("{}: invalid plan: {e}", p.display())))?
        }
        None => McPlan::calibrated_default()?,
    };
    if !a.scenarios.is_empty() {
        let keep: Vec<_> = plan
            .scenarios
            .iter()
            .filter(|s| a.scenarios.contains(&s.label))
            .cloned()
            .collect();
        if keep.len() != a.scenarios.len() {
            return Err(Failure::Usage(format!("unknown scenario in {:?}", a.scenarios)));
        }
        plan.scenarios = keep;
    }
    if a.full_scale {
        log::warn!("full scale requested: 1750 simulated days per replication, expect hours per scenario");
        plan.n_days = 250 * 7;
        plan.n_reps = 1000;
    }
    if let Some(r) = a.reps {
        plan.n_reps = r;
    }
    if let Some(d) = a.days {
        plan.n_days = d;
    }
    if !a.frak_l.is_empty() {
        plan.frak_l_grid = a.frak_l.clone();
    }
    if let Some(al) = a.alpha {
        plan.alpha = al;
    }
    if a.plan.is_none() {
        plan.base_seed = cli.seed;
    }
    plan.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let (report, meta) = montecarlo::run_plan_timed(&plan, workers)?;
    for c in &report.cells {
        if c.n_failed > 0 {
            log::warn!("{} L={}: {} of {} replications failed", c.label, c.frak_l, c.n_failed, c.n_reps);
        }
    }
    let config = json!({ "command": "montecarlo", "plan": plan, "run": meta });
    let as_json = out.is_some_and(|p| p.extension().is_some_and(|e| e == "json"));
    let body = if as_json {
        serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)? + "\n"
    } else {
        report.table_csv()
    };
    emit(out, &body, &config)?;
    log::info!("finished in {:.1}s", meta.runtime_seconds);
    Ok(())
}

fn cmd_ingest(a: &IngestArgs, out: Option<&Path>) -> Outcome {
    require_file(&a.input)?;
    let session = Session::parse(&a.session).map_err(|e| Failure::Usage(e.to_string()))?;
    let exclusion_dates = match &a.exclude_file {
        Some(p) => {
            require_file(p)?;
            ingest::read_exclusion_dates(p)?
        }
        None => Vec::new(),
    };
    let config = DayFilterConfig {
        zero_return_threshold: a.threshold,
        exclusion_dates,
        session,
    };
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let Some(out) = out else {
        return Err(Failure::Usage("ingest needs --out for the price-path CSV".into()));
    };
    let raw = RawTickFile::read_csv(&a.input, a.utc_offset_minutes * 60)?;
    let grids = ingest::resample(&raw, session, a.step)?;
    let outcome = ingest::filter_days(&grids, &config)?;
    let resolved = json!({
        "command": "ingest",
        "input": a.input,
        "timestamp_format": raw.format,
        "step_seconds": a.step,
        "utc_offset_minutes": a.utc_offset_minutes,
        "filter": config,
    });
    io::write_price_path_with_config(out, &outcome.path, None, Some(resolved.clone()))?;
    let log_body = json!({ "resample_dropped": grids.dropped, "filter": outcome.log });
    let mut log_file = out.as_os_str().to_owned();
    log_file.push(".filter.json");
    fs::write(PathBuf::from(log_file), serde_json::to_string_pretty(&log_body).map_err(anyhow::Error::from)?)
        .map_err(anyhow::Error::from)?;
    fs::write(config_sidecar(out), serde_json::to_string_pretty(&resolved).map_err(anyhow::Error::from)?)
        .map_err(anyhow::Error::from)?;
    let kept = outcome.log.iter().filter(|e| e.kept).count();
    log::info!("kept {kept} of {} days", outcome.log.len());
    Ok(())
}

fn cmd_acf(a: &AcfArgs, out: Option<&Path>) -> Outcome {
    let tuning = a.tuning.tuning().map_err(|e| Failure::Usage(e.to_string()))?;
    let path = read_path(&a.input, &a.tuning)?;
    let report = roughvol::run_test(&path, a.tuning.p_n, a.tuning.k_n, &tuning, &DEFAULT_ALPHAS)?;
    let mut body = String::from("lag,autocovariance,autocorrelation\n");
    for (i, (c, r)) in report.lag_acov.iter().zip(&report.lag_acf).enumerate() {
        body.push_str(&format!("{},{c},{r}\n", i + 1));
    }
    let config = json!({
        "command": "acf",
        "input": a.input,
        "p_n": a.tuning.p_n,
        "k_n": a.tuning.k_n,
        "tuning": tuning,
    });
    emit(out, &body, &config)?;
    Ok(())
}

/// `2.40e-08` style: two decimals and a signed two-digit exponent.
fn sci(x: f64) -> String {
    let s = format!("{x:.2e}");
    match s.split_once('e') {
        Some((m, e)) => {
            let exp: i32 = e.parse().unwrap_or(0);
            let sign = if exp < 0 { '-' } else { '+' };
            format!("{m}e{sign}{:02}", exp.abs())
        }
        None => s,
    }
}

fn cmd_calibrate(a: &CalibrateArgs, out: Option<&Path>) -> Outcome {
    let c = montecarlo::calibrate_noise(a.ratio)?;
    let mut body = format!("variance {}\nsigma {}\n", sci(c.variance), sci(c.sigma));
    if let Some(n) = &c.note {
        body.push_str(&format!("note {n}\n"));
    }
    let config = json!({ "command": "calibrate-noise", "ratio": a.ratio, "result": c });
    emit(out, &body, &config)?;
    Ok(())
}
