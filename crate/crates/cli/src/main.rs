use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use timeshift::evidence::{EvidenceStatistic, StatisticParams};
use timeshift::harness::{
    cdf_csv, default_alpha_grid, emit_results, empirical_cdf, run_experiment, ExperimentConfig,
    Mode, OutputPaths, Source, DESK_TRIALS, FULL_SCALE_TRIALS,
};
use timeshift::ingest::{
    geometric_random_walk, read_series_csv, to_returns, to_volatility, write_series_csv,
    SubsampleMode,
};
use timeshift::rng::seeded;
use timeshift::series::{MixingProfile, PValueReport, StabilityProfile, StabilityProvenance};
use timeshift::simgen::{mixing_profile, sample_stream, GeneratorParams};
use timeshift::sync::{estimate_gamma_profile, GeneratorSource};
use timeshift::verification::{run_counting_suite, run_lemma_suite};
use timeshift::{
    event_pvalue, event_pvalue_additive_fast, event_pvalues_bonferroni, sync_pvalue,
    sync_pvalue_auto, sync_pvalue_spectral, thm1_bound, thm2_bound, thm3_bound, BoundReport,
};

#[derive(Parser)]
#[command(name = "timeshift", version, about = "Time-shifted coincidence tests for paired time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one stream from the reset Markov chain generator.
    Simulate(SimulateArgs),
    /// P-value for an apparent event at one time or a set of times.
    DetectEvent(DetectEventArgs),
    /// P-value for synchronicity over whole streams.
    DetectSync(DetectSyncArgs),
    /// Monte Carlo calibration run summarized by an empirical CDF.
    Experiment(ExperimentArgs),
    /// Evaluate the false-positive bounds.
    Bounds {
        #[command(subcommand)]
        which: BoundsCommand,
    },
    /// Convert a price series to returns or volatility.
    Ingest(IngestArgs),
    /// Exhaustive checks of the combinatorial identities.
    Verify {
        #[command(subcommand)]
        which: VerifyCommand,
    },
}

#[derive(Args)]
struct StatArgs {
    /// sum | crosscorr | unitary | offset | quadrature | gap | altwindow | correlation
    #[arg(long)]
    stat: String,
    /// Window width for altwindow.
    #[arg(long)]
    w: Option<usize>,
    /// Lower offset for offset.
    #[arg(long)]
    a: Option<usize>,
    /// Upper offset for offset.
    #[arg(long)]
    b: Option<usize>,
    /// Coincidence tolerance for crosscorr.
    #[arg(long)]
    lag: Option<usize>,
}

impl StatArgs {
    fn build(&self) -> Result<EvidenceStatistic> {
        let params = StatisticParams {
            w: self.w,
            a: self.a,
            b: self.b,
            lag: self.lag,
        };
        Ok(EvidenceStatistic::from_name(&self.stat, &params)?)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 100)]
    t: usize,
    #[arg(long)]
    rho: f64,
    #[arg(long, default_value_t = 0.75)]
    q: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DetectEventArgs {
    #[arg(long)]
    x: PathBuf,
    #[arg(long)]
    y: PathBuf,
    #[command(flatten)]
    stat: StatArgs,
    #[arg(long, default_value_t = 0)]
    delta: usize,
    /// Candidate time (1-based).
    #[arg(long, required_unless_present = "t_set")]
    t: Option<usize>,
    /// Comma-separated candidate times, tested jointly at level alpha / |set|.
    #[arg(long, value_delimiter = ',', conflicts_with = "t")]
    t_set: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SyncMethod {
    Auto,
    Naive,
    Spectral,
}

#[derive(Args)]
struct DetectSyncArgs {
    #[arg(long)]
    x: PathBuf,
    #[arg(long)]
    y: PathBuf,
    #[command(flatten)]
    stat: StatArgs,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long, value_enum, default_value_t = SyncMethod::Auto)]
    method: SyncMethod,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExperimentKind {
    Event,
    Sync,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SourceKind {
    /// Independent generator streams.
    Sim,
    /// Y = X + N(0, 1) from one generator stream.
    Coupled,
    /// Windows of two synthetic price walks (or --prices-x/--prices-y files).
    Prices,
    /// Returns of the same price walks.
    Returns,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliSubsample {
    Null,
    Alternative,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, value_enum)]
    kind: ExperimentKind,
    #[arg(long, value_enum, default_value_t = SourceKind::Sim)]
    source: SourceKind,
    /// Stream length of every trial.
    #[arg(long, default_value_t = 100)]
    t: usize,
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    #[arg(long, default_value_t = 0.75)]
    q: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[command(flatten)]
    stat: StatArgs,
    /// Event time; defaults to the midpoint.
    #[arg(long)]
    at: Option<usize>,
    #[arg(long, value_delimiter = ',', conflicts_with = "at")]
    t_set: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0)]
    delta: usize,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long)]
    trials: Option<usize>,
    /// Use the full-scale trial count.
    #[arg(long, conflicts_with = "trials")]
    full_scale: bool,
    #[arg(long)]
    seed: u64,
    /// Price files for the price and return sources.
    #[arg(long, requires = "prices_y")]
    prices_x: Option<PathBuf>,
    #[arg(long, requires = "prices_x")]
    prices_y: Option<PathBuf>,
    /// Length of each synthetic price walk.
    #[arg(long, default_value_t = 5000)]
    walk_len: usize,
    #[arg(long, value_enum, default_value_t = CliSubsample::Null)]
    subsample: CliSubsample,
    /// CDF table; printed to stdout when omitted.
    #[arg(long)]
    out_cdf: Option<PathBuf>,
    #[arg(long)]
    out_raw: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BoundsCommand {
    /// Event bounds under stationarity alone and with geometric mixing.
    Event(EventBoundArgs),
    /// Synchronicity bound.
    Sync(SyncBoundArgs),
}

#[derive(Args)]
struct MixingArgs {
    /// Reset probability of X; the mixing profile is scale * (1 - rho)^(tau + 1).
    #[arg(long)]
    rho: f64,
    /// Reset probability of Y (defaults to --rho).
    #[arg(long)]
    rho_y: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    beta_scale: f64,
}

impl MixingArgs {
    fn profiles(&self, tau_max: usize) -> Result<(MixingProfile, MixingProfile)> {
        let bx = mixing_profile(self.rho, tau_max, self.beta_scale)?;
        let by = mixing_profile(self.rho_y.unwrap_or(self.rho), tau_max, self.beta_scale)?;
        Ok((bx, by))
    }
}

#[derive(Args)]
struct EventBoundArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    t: usize,
    #[arg(long, default_value_t = 0)]
    delta: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    t_set: Vec<usize>,
    #[command(flatten)]
    mixing: MixingArgs,
}

#[derive(Args)]
struct SyncBoundArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    tau_max: usize,
    #[command(flatten)]
    mixing: MixingArgs,
    /// CSV (`value` column) of gamma on lags 0..=tau_max.
    #[arg(long, conflicts_with = "estimate_gamma")]
    gamma_file: Option<PathBuf>,
    /// Estimate gamma by perturbing generator draws of length --t.
    #[arg(long, requires = "stat")]
    estimate_gamma: bool,
    #[arg(long)]
    stat: Option<String>,
    #[arg(long)]
    w: Option<usize>,
    #[arg(long, default_value_t = 100)]
    t: usize,
    #[arg(long, default_value_t = 0.75)]
    q: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Accept an estimated gamma (a lower bound, not a certificate).
    #[arg(long)]
    allow_empirical: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Transform {
    None,
    Returns,
    Volatility,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    prices: PathBuf,
    #[arg(long, value_enum)]
    transform: Transform,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum VerifyCommand {
    /// Coverage identity of the index sets for every T up to --t-max.
    Counting {
        #[arg(long, default_value_t = 40)]
        t_max: usize,
    },
    /// Counting lemma on random instances.
    Lemma {
        #[arg(long, default_value_t = 500)]
        instances: usize,
        #[arg(long)]
        seed: u64,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(a) => simulate(a),
        Command::DetectEvent(a) => detect_event(a),
        Command::DetectSync(a) => detect_sync(a),
        Command::Experiment(a) => experiment(a),
        Command::Bounds { which } => bounds(which),
        Command::Ingest(a) => ingest(a),
        Command::Verify { which } => verify(which),
    }
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let params = GeneratorParams::new(a.rho, a.q, a.sigma, a.t)?;
    let stream = sample_stream(&params, &mut seeded(a.seed))?;
    write_series_csv(&a.out, &stream)?;
    Ok(())
}

fn event_row(t: usize, r: &PValueReport) -> String {
    format!("{t},{},{},{},{}", r.p, r.statistic_value, r.ties, r.control_count)
}

fn detect_event(a: DetectEventArgs) -> Result<()> {
    let x = read_series_csv(&a.x)?;
    let y = read_series_csv(&a.y)?;
    let stat = a.stat.build()?;
    println!("t,p,psi,ties,control_count");
    if let Some(times) = a.t_set {
        let family = event_pvalues_bonferroni(&x, &y, &stat, a.delta, &times, a.alpha)?;
        for (t, r) in &family.reports {
            println!("{}", event_row(*t, r));
        }
        let rejected: Vec<String> = family.rejected.iter().map(usize::to_string).collect();
        eprintln!(
            "per-time threshold {}; rejected: {}",
            family.threshold,
            if rejected.is_empty() { "none".to_string() } else { rejected.join(",") }
        );
        return Ok(());
    }
    let t = a.t.context("--t is required")?;
    let r = if a.delta == 0 && stat.flags().additive {
        event_pvalue_additive_fast(&x, &y, &stat, t)?
    } else {
        event_pvalue(&x, &y, &stat, a.delta, t)?
    };
    println!("{}", event_row(t, &r));
    Ok(())
}

fn detect_sync(a: DetectSyncArgs) -> Result<()> {
    let x = read_series_csv(&a.x)?;
    let y = read_series_csv(&a.y)?;
    let stat = a.stat.build()?;
    let r = match a.method {
        SyncMethod::Auto => sync_pvalue_auto(&x, &y, &stat, a.epsilon)?,
        SyncMethod::Naive => sync_pvalue(&x, &y, &stat, a.epsilon)?,
        SyncMethod::Spectral => sync_pvalue_spectral(&x, &y, &stat, a.epsilon)?,
    };
    println!("p,psi,epsilon,ties,control_count");
    println!("{},{},{},{},{}", r.p, r.statistic_value, r.epsilon, r.ties, r.control_count);
    Ok(())
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let params = GeneratorParams::new(a.rho, a.q, a.sigma, a.t)?;
    let source = match a.source {
        SourceKind::Sim => Source::Simulated { x: params, y: params },
        SourceKind::Coupled => Source::Coupled {
            x: params,
            noise_sigma: 1.0,
        },
        SourceKind::Prices | SourceKind::Returns => {
            let (pa, pb) = match (&a.prices_x, &a.prices_y) {
                (Some(px), Some(py)) => (read_series_csv(px)?, read_series_csv(py)?),
                _ => {
                    let mut rng = seeded(a.seed ^ 0x5052_4943_4553);
                    (
                        geometric_random_walk(a.walk_len, 100.0, 0.02, &mut rng)?,
                        geometric_random_walk(a.walk_len, 100.0, 0.02, &mut rng)?,
                    )
                }
            };
            let (sa, sb) = if a.source == SourceKind::Returns {
                (to_returns(&pa)?, to_returns(&pb)?)
            } else {
                (pa, pb)
            };
            Source::Ingested {
                a: Arc::new(sa),
                b: Arc::new(sb),
                len: a.t,
                mode: match a.subsample {
                    CliSubsample::Null => SubsampleMode::Null,
                    CliSubsample::Alternative => SubsampleMode::Alternative,
                },
            }
        }
    };
    let mode = match a.kind {
        ExperimentKind::Event => Mode::Event {
            times: a.t_set.clone().unwrap_or_else(|| vec![a.at.unwrap_or(a.t / 2).max(1)]),
            delta: a.delta,
        },
        ExperimentKind::Sync => Mode::Sync { epsilon: a.epsilon },
    };
    let n_trials = if a.full_scale {
        FULL_SCALE_TRIALS
    } else {
        a.trials.unwrap_or(DESK_TRIALS)
    };
    let config = ExperimentConfig {
        source,
        mode,
        statistic: a.stat.build()?,
        n_trials,
        master_seed: a.seed,
        alpha_grid: default_alpha_grid(),
    };
    let pvalues = run_experiment(&config)?;
    let cdf = empirical_cdf(&pvalues, &config.alpha_grid)?;
    let paths = OutputPaths {
        cdf: a.out_cdf,
        raw: a.out_raw,
        svg: a.svg,
    };
    if paths.cdf.is_none() {
        print!("{}", cdf_csv(&cdf, pvalues.len()));
    }
    emit_results(&cdf, &pvalues, &paths)?;
    Ok(())
}

fn bound_row(name: &str, r: &BoundReport) -> String {
    let tau = r.tau.map_or(String::new(), |t| t.to_string());
    format!("{name},{},{},{tau},{},{}", r.value, r.raw, r.vacuous, r.grid_capped)
}

fn bounds(which: BoundsCommand) -> Result<()> {
    println!("bound,value,raw,tau,vacuous,grid_capped");
    match which {
        BoundsCommand::Event(a) => {
            if a.delta >= a.t {
                bail!("--delta must be smaller than --t");
            }
            let stationary = thm1_bound(a.alpha, &a.t_set, a.t, a.delta)?;
            let (bx, by) = a.mixing.profiles(a.t - a.delta - 1)?;
            let mixing = thm2_bound(a.alpha, a.t_set.len(), a.t, a.delta, &bx, &by, None)?;
            println!("{}", bound_row("stationary", &stationary));
            println!("{}", bound_row("mixing", &mixing));
        }
        BoundsCommand::Sync(a) => {
            let (bx, by) = a.mixing.profiles(a.tau_max)?;
            let gamma = if let Some(path) = &a.gamma_file {
                StabilityProfile::new(read_series_csv(path)?.into_values(), StabilityProvenance::Analytic)?
            } else if a.estimate_gamma {
                let params = GeneratorParams::new(a.mixing.rho, a.q, a.sigma, a.t)?;
                let params_y = GeneratorParams {
                    rho: a.mixing.rho_y.unwrap_or(a.mixing.rho),
                    ..params
                };
                let stat = EvidenceStatistic::from_name(
                    a.stat.as_deref().unwrap_or_default(),
                    &StatisticParams {
                        w: a.w,
                        ..Default::default()
                    },
                )?;
                let source = GeneratorSource { x: params, y: params_y };
                estimate_gamma_profile(&stat, &source, a.tau_max, a.trials, a.seed)?
            } else {
                StabilityProfile::zero(a.tau_max)
            };
            let r = thm3_bound(a.alpha, a.epsilon, &bx, &by, &gamma, None, a.allow_empirical)?;
            println!("{}", bound_row("stability", &r));
        }
    }
    Ok(())
}

fn ingest(a: IngestArgs) -> Result<()> {
    let prices = read_series_csv(&a.prices)?;
    let out = match a.transform {
        Transform::None => prices,
        Transform::Returns => to_returns(&prices)?,
        Transform::Volatility => to_volatility(&to_returns(&prices)?),
    };
    write_series_csv(&a.out, &out)?;
    Ok(())
}

fn verify(which: VerifyCommand) -> Result<()> {
    let (label, summary) = match which {
        VerifyCommand::Counting { t_max } => ("counting identity", run_counting_suite(t_max)),
        VerifyCommand::Lemma { instances, seed } => ("counting lemma", run_lemma_suite(instances, seed)?),
    };
    for failure in &summary.failures {
        println!("FAIL {failure}");
    }
    let status = if summary.passed() { "PASS" } else { "FAIL" };
    println!(
        "{status} {label}: {} checked, {} failed",
        summary.checked,
        summary.failures.len()
    );
    if !summary.passed() {
        bail!("{label} check failed");
    }
    Ok(())
}
