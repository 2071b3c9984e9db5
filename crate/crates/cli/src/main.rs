mod settings;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adagain::adagain::AdaGainConfig;
use adagain::harness::{
    default_threshold, format_f64, parse_schedule, run, run_nexting, schedule_optimal_mse, sweep, write_curves,
    write_series, write_sweep, AlgorithmId, ExperimentConfig, Grid, NextingConfig, ProblemId, Score,
};
use adagain::problems::{load_series_csv, optimal_constant_stepsize, Segment, SeriesOptions};
use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use settings::Settings;

#[derive(Parser)]
#[command(name = "adagain", version, about = "Step-size adaptation experiments, sweeps and oracles")]
struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Directory for CSV output and config dumps.
    #[arg(long, global = true, env = "ADAGAIN_OUT_DIR", default_value = "adagain-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimise the Rosenbrock function from random starts.
    Rosenbrock(RunArgs),
    /// Track a drifting mean with LMS.
    Tracking(RunArgs),
    /// Off-policy TD on Baird's seven-state star.
    Baird(RunArgs),
    /// Discounted predictions of every sensor in a CSV time series.
    Series(SeriesArgs),
    /// Grid sweep over meta-parameters.
    Sweep(SweepArgs),
    /// Closed-form reference values.
    #[command(subcommand)]
    Oracle(Oracle),
}

#[derive(Args)]
struct RunArgs {
    /// key=value config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Algorithm id, e.g. adagain-lin, idbd, adam.
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    runs: Option<u64>,
    /// Base seed; run i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    /// Record every N steps; 0 disables curves.
    #[arg(long)]
    log_every: Option<u64>,
    /// Divergence threshold on the running error.
    #[arg(long)]
    threshold: Option<f64>,
    /// Error reported for diverged sweep cells.
    #[arg(long)]
    ceiling: Option<f64>,
    /// mean or final.
    #[arg(long)]
    score: Option<String>,
    /// Steps averaged by the divergence detector.
    #[arg(long)]
    window: Option<u64>,
    #[arg(long)]
    alpha0: Option<f64>,
    #[arg(long)]
    meta_step: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    precond_rho: Option<f64>,
    /// Any other parameter, e.g. --set positivity=threshold.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct SweepArgs {
    /// rosenbrock, tracking or baird.
    #[arg(long)]
    problem: Option<String>,
    /// One axis per flag; axes run in name order.
    #[arg(long, value_name = "KEY=V1,V2,...")]
    grid: Vec<String>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct SeriesArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV with a header row of sensor names.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// First column holds timestamps.
    #[arg(long)]
    timestamp_column: bool,
    /// Skip min-max normalisation of the sensors.
    #[arg(long)]
    raw: bool,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    alpha0: Option<f64>,
    #[arg(long)]
    meta_step: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// RMSProp decay for the TD update; 0 disables it.
    #[arg(long)]
    precond_rho: Option<f64>,
    /// Steps per SMAPE bin.
    #[arg(long)]
    bin: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Report 2|P-T|/(|P|+|T|).
    #[arg(long)]
    smape_doubled: bool,
}

#[derive(Subcommand)]
enum Oracle {
    /// Best constant LMS step size for a random-walk target.
    OptimalStep {
        #[arg(long)]
        sigma_y: f64,
        #[arg(long)]
        sigma_z: f64,
    },
    /// MSE of the per-segment optimal constant step over a schedule.
    ScheduleMse {
        /// duration:sigma_y:sigma_z,... (default: the built-in schedule)
        #[arg(long)]
        schedule: Option<String>,
    },
}

enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

type Outcome<T> = std::result::Result<T, Failure>;

fn usage<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Usage(e.into())
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Runtime(e.into())
}

/// Bad parameters are the caller's fault; anything else is a runtime failure.
fn classify(e: adagain::Error) -> Failure {
    match e {
        adagain::Error::InvalidParameter(_) => usage(e),
        other => runtime(other),
    }
}

fn base_settings(config: &Option<PathBuf>) -> Outcome<Settings> {
    match config {
        Some(p) => Settings::load(p).map_err(usage),
        None => Ok(Settings::default()),
    }
}

fn run_settings(args: &RunArgs) -> Outcome<Settings> {
    let mut s = base_settings(&args.config)?;
    s.set_opt("algorithm", args.algo.as_ref());
    s.set_opt("steps", args.steps);
    s.set_opt("runs", args.runs);
    s.set_opt("seed", args.seed);
    s.set_opt("log_every", args.log_every);
    s.set_opt("threshold", args.threshold);
    s.set_opt("ceiling", args.ceiling);
    s.set_opt("score", args.score.as_ref());
    s.set_opt("divergence_window", args.window);
    s.set_opt("alpha0", args.alpha0);
    s.set_opt("meta_step", args.meta_step);
    s.set_opt("beta", args.beta);
    s.set_opt("eta", args.eta);
    s.set_opt("precond_rho", args.precond_rho);
    s.set_pairs(&args.set).map_err(usage)?;
    Ok(s)
}

fn experiment(problem: ProblemId, mut s: Settings) -> anyhow::Result<ExperimentConfig> {
    s.require(&["algorithm", "steps"])?;
    if let Some(p) = s.take("problem") {
        let p: ProblemId = p.parse()?;
        if p != problem {
            return Err(anyhow!("config is for {p}, not {problem}"));
        }
    }
    let algorithm: AlgorithmId = s.take_parsed("algorithm")?.expect("required");
    let mut cfg = ExperimentConfig::new(problem, algorithm, s.take_parsed("steps")?.expect("required"));
    if let Some(r) = s.take_parsed("runs")? {
        cfg.runs = r;
    }
    if let Some(seed) = s.take_parsed("seed")? {
        cfg.base_seed = seed;
    }
    cfg.log_every = s.take_parsed("log_every")?;
    cfg.threshold = s.take_parsed("threshold")?;
    cfg.ceiling = s.take_parsed("ceiling")?;
    cfg.score = s.take_parsed::<Score>("score")?;
    if let Some(w) = s.take_parsed("divergence_window")? {
        cfg.divergence_window = w;
    }
    for (k, v) in s.drain() {
        let k = k.strip_prefix("param.").unwrap_or(&k).to_owned();
        cfg.params.insert(k, v);
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Every effective setting, in the config-file format.
fn dump(cfg: &ExperimentConfig) -> anyhow::Result<String> {
    let threshold = match cfg.threshold {
        Some(t) => t,
        None => default_threshold(cfg)?,
    };
    let mut out = format!("# adagain {} effective configuration\n", env!("CARGO_PKG_VERSION"));
    writeln!(out, "problem={}", cfg.problem)?;
    writeln!(out, "algorithm={}", cfg.algorithm)?;
    writeln!(out, "steps={}", cfg.steps)?;
    writeln!(out, "runs={}", cfg.runs)?;
    writeln!(out, "seed={}", cfg.base_seed)?;
    writeln!(out, "log_every={}", cfg.effective_log_every())?;
    writeln!(out, "threshold={}", format_f64(threshold))?;
    if let Some(c) = cfg.ceiling {
        writeln!(out, "ceiling={}", format_f64(c))?;
    }
    writeln!(out, "score={}", cfg.effective_score())?;
    writeln!(out, "divergence_window={}", cfg.divergence_window)?;
    for (k, v) in &cfg.params {
        writeln!(out, "{k}={v}")?;
    }
    Ok(out)
}

fn create_out(out: &Path) -> Outcome<()> {
    fs::create_dir_all(out)
        .with_context(|| format!("cannot create output directory {}", out.display()))
        .map_err(runtime)
}

fn create_file(path: &Path) -> Outcome<std::io::BufWriter<fs::File>> {
    fs::File::create(path)
        .map(std::io::BufWriter::new)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(runtime)
}

fn cmd_run(problem: ProblemId, args: &RunArgs, out: &Path) -> Outcome<()> {
    let cfg = experiment(problem, run_settings(args)?).map_err(usage)?;
    let config_text = dump(&cfg).map_err(usage)?;
    let result = run(&cfg).map_err(classify)?;
    create_out(out)?;
    let stem = format!("{}-{}-{}", cfg.problem, cfg.algorithm, cfg.config_hash());
    fs::write(out.join(format!("{stem}-config.txt")), config_text).map_err(runtime)?;
    let curves = out.join(format!("{stem}-curves.csv"));
    write_curves(create_file(&curves)?, &result.records).map_err(classify)?;

    let mut runs = String::from("seed,final_error,mean_error,diverged,divergence_step\n");
    for s in &result.summaries {
        let step = s.divergence_step.map_or_else(String::new, |d| d.to_string());
        let _ = writeln!(
            runs,
            "{},{},{},{},{step}",
            s.seed,
            format_f64(s.final_error),
            format_f64(s.mean_error),
            s.diverged
        );
    }
    fs::write(out.join(format!("{stem}-runs.csv")), runs).map_err(runtime)?;

    let score = cfg.effective_score();
    let n = result.summaries.len();
    let diverged = result.summaries.iter().filter(|s| s.diverged).count();
    let mean_score = result.summaries.iter().map(|s| s.score(score)).sum::<f64>() / n as f64;
    let final_error = result.summaries.iter().map(|s| s.final_error).sum::<f64>() / n as f64;
    println!(
        "{} {}: {score} error {mean_score:.6e}, final error {final_error:.6e}, diverged {diverged}/{n}, curves {}",
        cfg.problem,
        cfg.algorithm,
        curves.display()
    );
    Ok(())
}

fn cmd_sweep(args: &SweepArgs, jobs: usize, out: &Path) -> Outcome<()> {
    let mut s = run_settings(&args.run)?;
    s.set_opt("problem", args.problem.as_ref());
    for g in &args.grid {
        let (k, v) = g
            .split_once('=')
            .ok_or_else(|| usage(anyhow!("--grid expects KEY=V1,V2,..., got {g:?}")))?;
        s.set(&format!("grid.{}", k.trim()), v.trim());
    }
    let mut missing: Vec<&str> = ["problem", "algorithm", "steps"]
        .into_iter()
        .filter(|k| s.get(k).is_none())
        .collect();
    let axes: Vec<(String, String)> = s
        .clone()
        .drain()
        .filter_map(|(k, v)| k.strip_prefix("grid.").map(|a| (a.to_owned(), v)))
        .collect();
    if axes.is_empty() {
        missing.push("grid");
    }
    if !missing.is_empty() {
        return Err(usage(anyhow!(
            "missing required setting(s): {} (give them as flags or in --config)",
            missing.join(", ")
        )));
    }
    for (a, _) in &axes {
        s.take(&format!("grid.{a}"));
    }
    let problem: ProblemId = s.get("problem").unwrap_or_default().parse().map_err(usage)?;
    let template = experiment(problem, s).map_err(usage)?;
    let mut grid = Grid::new();
    for (k, v) in &axes {
        let values: Vec<&str> = v.split(',').map(str::trim).filter(|x| !x.is_empty()).collect();
        grid = grid.axis(k, values).map_err(usage)?;
    }
    let mut named = template.clone();
    for (k, v) in &axes {
        named.params.insert(format!("grid.{k}"), v.clone());
    }
    // surface bad grid values before any work starts
    for cell in grid.cells() {
        let mut c = template.clone();
        c.params.extend(cell);
        c.validate().map_err(usage)?;
    }
    let result = sweep(&template, &grid, jobs).map_err(classify)?;
    create_out(out)?;
    let stem = format!("sweep-{}-{}-{}", template.problem, template.algorithm, named.config_hash());
    let mut config_text = dump(&template).map_err(usage)?;
    for (k, v) in &axes {
        let _ = writeln!(config_text, "grid.{k}={v}");
    }
    fs::write(out.join(format!("{stem}-config.txt")), config_text).map_err(runtime)?;
    let path = out.join(format!("{stem}.csv"));
    write_sweep(create_file(&path)?, &result).map_err(classify)?;
    let diverged = result.rows.iter().filter(|r| r.diverged).count();
    let best = match result.best() {
        Some(b) => {
            let p: Vec<String> = b.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            format!("best {:.6e} at {}", b.mean_error, p.join(" "))
        }
        None => "no configuration stayed finite".to_owned(),
    };
    println!(
        "sweep {} {}: {} configs, {diverged} diverged, {best}, table {}",
        template.problem,
        template.algorithm,
        result.rows.len(),
        path.display()
    );
    Ok(())
}

fn cmd_series(args: &SeriesArgs, out: &Path) -> Outcome<()> {
    let mut s = base_settings(&args.config)?;
    s.set_opt("csv", args.csv.as_ref().map(|p| p.display().to_string()));
    if args.timestamp_column {
        s.set("timestamp_column", true);
    }
    if args.raw {
        s.set("normalize", false);
    }
    if args.smape_doubled {
        s.set("smape_doubled", true);
    }
    s.set_opt("gamma", args.gamma);
    s.set_opt("lambda", args.lambda);
    s.set_opt("alpha0", args.alpha0);
    s.set_opt("meta_step", args.meta_step);
    s.set_opt("beta", args.beta);
    s.set_opt("precond_rho", args.precond_rho);
    s.set_opt("bin", args.bin);
    s.set_opt("max_steps", args.max_steps);
    s.require(&["csv"]).map_err(usage)?;

    let parse = |s: &mut Settings| -> anyhow::Result<(PathBuf, SeriesOptions, NextingConfig)> {
        let csv = PathBuf::from(s.take("csv").expect("required"));
        let opts = SeriesOptions {
            timestamp_column: s.take_parsed("timestamp_column")?.unwrap_or(false),
            normalize: s.take_parsed("normalize")?.unwrap_or(true),
        };
        let d = NextingConfig::default();
        let rho: f64 = s.take_parsed("precond_rho")?.unwrap_or(d.precond_rho.unwrap_or(0.0));
        let cfg = NextingConfig {
            adagain: AdaGainConfig {
                alpha0: s.take_parsed("alpha0")?.unwrap_or(d.adagain.alpha0),
                meta_step: s.take_parsed("meta_step")?.unwrap_or(d.adagain.meta_step),
                beta: s.take_parsed("beta")?.unwrap_or(d.adagain.beta),
                ..d.adagain
            },
            gamma: s.take_parsed("gamma")?.unwrap_or(d.gamma),
            lambda: s.take_parsed("lambda")?.unwrap_or(d.lambda),
            precond_rho: (rho > 0.0).then_some(rho),
            return_tol: s.take_parsed("return_tol")?.unwrap_or(d.return_tol),
            bin: s.take_parsed("bin")?.unwrap_or(d.bin),
            smape_doubled: s.take_parsed("smape_doubled")?.unwrap_or(d.smape_doubled),
            max_steps: s.take_parsed("max_steps")?.or(d.max_steps),
        };
        let rest: Vec<String> = s.drain().map(|(k, _)| k).collect();
        if !rest.is_empty() {
            return Err(anyhow!("unknown series setting(s): {}", rest.join(", ")));
        }
        Ok((csv, opts, cfg))
    };
    let (csv, opts, cfg) = parse(&mut s).map_err(usage)?;
    let series = load_series_csv(&csv, opts).map_err(classify)?;
    let result = run_nexting(&series, &cfg).map_err(classify)?;

    create_out(out)?;
    let mut config_text = format!("# adagain {} effective configuration\n", env!("CARGO_PKG_VERSION"));
    let _ = write!(
        config_text,
        "csv={}\ntimestamp_column={}\nnormalize={}\ngamma={}\nlambda={}\nalpha0={}\nmeta_step={}\nbeta={}\nprecond_rho={}\nreturn_tol={}\nbin={}\nsmape_doubled={}\n",
        csv.display(),
        opts.timestamp_column,
        opts.normalize,
        format_f64(cfg.gamma),
        format_f64(cfg.lambda),
        format_f64(cfg.adagain.alpha0),
        format_f64(cfg.adagain.meta_step),
        format_f64(cfg.adagain.beta),
        format_f64(cfg.precond_rho.unwrap_or(0.0)),
        format_f64(cfg.return_tol),
        cfg.bin,
        cfg.smape_doubled,
    );
    if let Some(m) = cfg.max_steps {
        let _ = writeln!(config_text, "max_steps={m}");
    }
    fs::write(out.join("series-config.txt"), config_text).map_err(runtime)?;
    let path = out.join("series-median-smape.csv");
    write_series(create_file(&path)?, "median_smape", &result.bin_ends, &result.median_curve).map_err(classify)?;
    let mut sensors = String::from("sensor,mean_smape\n");
    for r in &result.sensors {
        let name = if r.name.contains([',', '"', '\n']) {
            format!("\"{}\"", r.name.replace('"', "\"\""))
        } else {
            r.name.clone()
        };
        let _ = writeln!(sensors, "{name},{}", format_f64(r.mean_smape));
    }
    fs::write(out.join("series-sensors.csv"), sensors).map_err(runtime)?;
    println!(
        "series: {} sensors, {} steps, final median SMAPE {:.4}, curve {}",
        result.sensors.len(),
        result.bin_ends.last().copied().unwrap_or(0),
        result.median_curve.last().copied().unwrap_or(f64::NAN),
        path.display()
    );
    Ok(())
}

fn cmd_oracle(o: &Oracle) -> Outcome<()> {
    match o {
        Oracle::OptimalStep { sigma_y, sigma_z } => {
            let k = optimal_constant_stepsize(*sigma_y, *sigma_z).map_err(classify)?;
            println!("{k:.6}");
        }
        Oracle::ScheduleMse { schedule } => {
            let segs = match schedule {
                Some(text) => parse_schedule(text).map_err(classify)?,
                None => Segment::default_schedule(),
            };
            println!("{:.6}", schedule_optimal_mse(&segs).map_err(classify)?);
        }
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Outcome<()> {
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .map_err(runtime)?;
    }
    match &cli.command {
        Command::Rosenbrock(a) => cmd_run(ProblemId::Rosenbrock, a, &cli.out),
        Command::Tracking(a) => cmd_run(ProblemId::Tracking, a, &cli.out),
        Command::Baird(a) => cmd_run(ProblemId::Baird, a, &cli.out),
        Command::Series(a) => cmd_series(a, &cli.out),
        Command::Sweep(a) => cmd_sweep(a, cli.jobs, &cli.out),
        Command::Oracle(o) => cmd_oracle(o),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            eprintln!("run `adagain --help` for usage");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
