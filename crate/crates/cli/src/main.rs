//! `ebgev` command-line front end.
//!
//! Exit codes: 0 success, 2 input or parse error, 3 numerical or chain
//! failure, 4 configuration error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ebgev::config::{InputFormat, RunConfig, StudyConfig};
use ebgev::ingest::{annual_maxima, parse_hurdat, DEFAULT_YEAR_RANGE};
use ebgev::output::{write_csv, write_json};
use ebgev::pipeline::{fit_series, predict, read_draws, PREDICT_COLUMNS};
use ebgev::prior::{LocationKernel, ScaleKernel, ShapeKernel};
use ebgev::simstudy::tables::write_study;
use ebgev::simstudy::{generate_block_maxima, replication_rng, run_scenario, TrueParams};
use ebgev::{AnnualMaxSeries, Error, Result, TrueModel};

const OUTPUT_ENV: &str = "EBGEV_OUTPUT_DIR";
const DEFAULT_OUTPUT: &str = "ebgev-out";

#[derive(Debug, Parser)]
#[command(
    name = "ebgev",
    version,
    about = "Empirical-Bayes inference for block maxima"
)]
struct Cli {
    /// Output directory [default: $EBGEV_OUTPUT_DIR, then ./ebgev-out]
    #[arg(long, short, global = true)]
    output_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the posterior to a series of block maxima
    Fit(FitArgs),
    /// Draw synthetic block maxima from one of the study models
    Simulate(SimulateArgs),
    /// Run the simulation study and write the concentration and coverage tables
    Coverage(CoverageArgs),
    /// Predictive return levels from saved posterior draws
    Predict(PredictArgs),
    /// HURDAT2 best-track utilities
    Hurdat {
        #[command(subcommand)]
        command: HurdatCommand,
    },
}

#[derive(Debug, Subcommand)]
enum HurdatCommand {
    /// Extract annual maximum winds
    Extract(ExtractArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Hurdat,
}

#[derive(Debug, Args, Default)]
struct ChainArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Total MCMC steps
    #[arg(long)]
    n_iter: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    /// Decay the scale adaptation after step 100
    #[arg(long)]
    rm_decay: bool,
    /// Stop adapting once burn-in ends
    #[arg(long)]
    freeze_after_burn_in: bool,
}

#[derive(Debug, Args, Default)]
struct PriorArgs {
    /// Degrees of freedom of the truncated Student-t shape prior
    #[arg(long, conflicts_with = "shape_uniform")]
    shape_nu: Option<f64>,
    /// Uniform shape prior on LO,HI
    #[arg(long, value_delimiter = ',', num_args = 2)]
    shape_uniform: Option<Vec<f64>>,
    /// Student-t location kernel with this many degrees of freedom
    #[arg(long)]
    location_nu: Option<f64>,
    /// Gamma scale kernel shape
    #[arg(long)]
    scale_shape: Option<f64>,
    /// Gamma scale kernel rate
    #[arg(long)]
    scale_rate: Option<f64>,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Series of maxima (CSV) or HURDAT2 file
    input: Option<PathBuf>,
    /// TOML run configuration; flags override it
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Observations per block
    #[arg(long, short)]
    m: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Return periods, comma separated
    #[arg(long, value_delimiter = ',')]
    return_periods: Option<Vec<f64>>,
    /// Tail probabilities of extreme quantiles, comma separated
    #[arg(long, value_delimiter = ',')]
    quantile_levels: Option<Vec<f64>>,
    #[arg(long)]
    year_start: Option<i32>,
    #[arg(long)]
    year_end: Option<i32>,
    #[command(flatten)]
    chain: ChainArgs,
    #[command(flatten)]
    prior: PriorArgs,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, default_value = "half-cauchy")]
    model: TrueModel,
    #[arg(long, short, default_value_t = 40)]
    m: usize,
    #[arg(long, short, default_value_t = 20)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug, Args)]
struct CoverageArgs {
    /// TOML study configuration; flags override it
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Models, comma separated
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<TrueModel>>,
    /// (m, k) pairs as MxK, comma separated
    #[arg(long, value_delimiter = ',')]
    pairs: Option<Vec<String>>,
    /// Replications per scenario
    #[arg(long, short = 'M')]
    replications: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[command(flatten)]
    chain: ChainArgs,
    #[command(flatten)]
    prior: PriorArgs,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// posterior_draws.csv written by `fit`
    draws: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "2,5,10,15,50,100")]
    return_periods: Vec<f64>,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_YEAR_RANGE.0)]
    year_start: i32,
    #[arg(long, default_value_t = DEFAULT_YEAR_RANGE.1)]
    year_end: i32,
    /// Keep winds in knots
    #[arg(long)]
    knots: bool,
}

fn output_dir(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    flag.or(config)
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT))
}

fn apply_chain(c: &ChainArgs, chain: &mut ebgev::ChainConfig, seed: &mut u64) {
    if let Some(s) = c.seed {
        *seed = s;
    }
    if let Some(n) = c.n_iter {
        chain.n_iter = n;
    }
    if let Some(b) = c.burn_in {
        chain.burn_in = b;
    }
    if let Some(t) = c.thin {
        chain.thin = t;
    }
    chain.rm_decay |= c.rm_decay;
    chain.freeze_after_burn_in |= c.freeze_after_burn_in;
}

fn apply_prior(p: &PriorArgs, kernels: &mut ebgev::PriorKernels) {
    if let Some(nu) = p.shape_nu {
        kernels.shape = ShapeKernel::TruncatedStudentT { nu };
    }
    if let Some(v) = &p.shape_uniform {
        kernels.shape = ShapeKernel::Uniform {
            lower: v[0],
            upper: v[1],
        };
    }
    if let Some(nu) = p.location_nu {
        kernels.location = LocationKernel::StudentT { nu };
    }
    if p.scale_shape.is_some() || p.scale_rate.is_some() {
        let ScaleKernel::Gamma { shape, rate } = kernels.scale;
        kernels.scale = ScaleKernel::Gamma {
            shape: p.scale_shape.unwrap_or(shape),
            rate: p.scale_rate.unwrap_or(rate),
        };
    }
}

fn fit(args: FitArgs, out_flag: Option<&Path>) -> Result<()> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(i) = args.input {
        cfg.data.input = Some(i);
    }
    if let Some(f) = args.format {
        cfg.data.format = match f {
            Format::Csv => InputFormat::Csv,
            Format::Hurdat => InputFormat::Hurdat,
        };
    }
    if let Some(m) = args.m {
        cfg.data.block_size = m;
    }
    if let Some(y) = args.year_start {
        cfg.data.year_start = y;
    }
    if let Some(y) = args.year_end {
        cfg.data.year_end = y;
    }
    if let Some(a) = args.alpha {
        cfg.output.alpha = a;
    }
    if let Some(t) = args.return_periods {
        cfg.output.return_periods = t;
    }
    if let Some(q) = args.quantile_levels {
        cfg.output.quantile_levels = q;
    }
    apply_chain(&args.chain, &mut cfg.chain, &mut cfg.seed);
    apply_prior(&args.prior, &mut cfg.prior);
    cfg.validate()?;
    if cfg.data.input.is_none() {
        return Err(Error::Config("fit needs an input file".into()));
    }

    let series = cfg.data.load_series()?;
    if !series.missing_years.is_empty() {
        eprintln!("warning: no data for years {:?}", series.missing_years);
    }
    let out = fit_series(&series, &cfg)?;
    let dir = output_dir(out_flag, cfg.output.dir.as_deref());
    let files = out.write(&dir)?;

    let s = &out.summary;
    println!(
        "k = {}, {:?} fit ({}), acceptance {:.3}",
        s.k,
        s.estimator,
        if s.estimator_converged {
            "converged"
        } else {
            "not converged"
        },
        s.accept_rate
    );
    println!(
        "{:<28} {:>10} {:>10} {:>22} {:>10}",
        "", "estimate", "post.mean", "A-interval", "PPQ"
    );
    for q in s
        .parameters
        .iter()
        .chain(s.return_levels.iter().map(|r| &r.summary))
        .chain(s.extreme_quantiles.iter().map(|r| &r.summary))
    {
        println!(
            "{:<28} {:>10.4} {:>10.4} [{:>9.4}, {:>9.4}] {:>10}",
            q.name,
            q.mle.unwrap_or(f64::NAN),
            q.mean,
            q.a_ci.lower,
            q.a_ci.upper,
            q.ppq.map(|v| format!("{v:.4}")).unwrap_or_default()
        );
    }
    println!("wrote {}", files.summary.parent().unwrap_or(&dir).display());
    Ok(())
}

fn simulate(args: SimulateArgs, out_flag: Option<&Path>) -> Result<()> {
    let mut rng = replication_rng(args.seed, 0);
    let sample = generate_block_maxima(args.model, args.m, args.k, &mut rng)?;
    let series = AnnualMaxSeries::new(
        (1..=sample.len() as i32).collect(),
        sample.maxima().to_vec(),
        sample.label(),
    )?;
    let dir = output_dir(out_flag, None);
    let path = dir.join(format!("{}_m{}_k{}.csv", args.model, args.m, args.k));
    series.write_csv(&path)?;
    if args.m >= 2 {
        write_json(
            &path.with_extension("truth.json"),
            &TrueParams::for_model(args.model, args.m)?,
        )?;
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn parse_pair(s: &str) -> Result<(usize, usize)> {
    let (m, k) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::Config(format!("pair '{s}' is not of the form MxK")))?;
    let p = |v: &str| {
        v.trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad number in pair '{s}'")))
    };
    Ok((p(m)?, p(k)?))
}

fn coverage(args: CoverageArgs, out_flag: Option<&Path>) -> Result<()> {
    let mut cfg = match &args.config {
        Some(p) => StudyConfig::load(p)?,
        None => StudyConfig::default(),
    };
    if let Some(m) = args.models {
        cfg.models = m;
    }
    if let Some(p) = &args.pairs {
        cfg.grid.pairs = p.iter().map(|s| parse_pair(s)).collect::<Result<_>>()?;
    }
    if let Some(r) = args.replications {
        cfg.grid.replications = r;
    }
    if let Some(a) = args.alpha {
        cfg.grid.alpha = a;
    }
    apply_chain(&args.chain, &mut cfg.grid.chain, &mut cfg.grid.master_seed);
    apply_prior(&args.prior, &mut cfg.grid.kernels);
    cfg.validate()?;

    let started = Instant::now();
    let mut results = Vec::new();
    for &model in &cfg.models {
        for &(m, k) in &cfg.grid.pairs {
            let r = run_scenario(model, m, k, &cfg.grid);
            match &r {
                Ok(s) => eprintln!(
                    "{model} m={m} k={k}: {} replications, {} failed, {:.1}s",
                    s.replications, s.failures, s.seconds
                ),
                Err(e) => eprintln!("{model} m={m} k={k}: {e}"),
            }
            results.push((model, m, k, r));
        }
    }
    let dir = output_dir(out_flag, cfg.output_dir.as_deref());
    let files = write_study(
        &dir,
        &cfg.grid,
        &cfg.models,
        &results,
        started.elapsed().as_secs_f64(),
    )?;
    println!(
        "wrote {}",
        files.coverage.parent().unwrap_or(&dir).display()
    );
    if let Some((model, m, k, Err(e))) = results.into_iter().find(|r| r.3.is_err()) {
        return Err(Error::Scenario {
            scenario: format!("{model} m={m} k={k}"),
            message: e.to_string(),
        });
    }
    Ok(())
}

fn predict_cmd(args: PredictArgs, out_flag: Option<&Path>) -> Result<()> {
    let draws = read_draws(&args.draws, 1)?;
    let rows = predict(&draws, &args.return_periods)?;
    let path = output_dir(out_flag, None).join("predict.csv");
    write_csv(&path, &PREDICT_COLUMNS, &rows)?;
    for r in &rows {
        println!(
            "T = {:>8.2}  predictive level {:.4}",
            r.period, r.predictive_quantile
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn extract(args: ExtractArgs, out_flag: Option<&Path>) -> Result<()> {
    let parsed = parse_hurdat(&args.input, !args.knots)?;
    let series = annual_maxima(&parsed.records, (args.year_start, args.year_end))?;
    let path = output_dir(out_flag, None).join("annual_maxima.csv");
    series.write_csv(&path)?;
    println!(
        "{} storms, {} records, {} missing winds skipped; {} annual maxima in {}..={}",
        parsed.storms,
        parsed.records.len(),
        parsed.missing_wind,
        series.len(),
        args.year_start,
        args.year_end
    );
    if !series.missing_years.is_empty() {
        println!("years without records: {:?}", series.missing_years);
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.output_dir.as_deref();
    let res = match cli.command {
        Command::Fit(a) => fit(a, out),
        Command::Simulate(a) => simulate(a, out),
        Command::Coverage(a) => coverage(a, out),
        Command::Predict(a) => predict_cmd(a, out),
        Command::Hurdat {
            command: HurdatCommand::Extract(a),
        } => extract(a, out),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
