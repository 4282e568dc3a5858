use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use imlca_core::{AlphaPolicy, Variant};
use imlca_experiments::{
    aggregate, brute_force_optimum, generate_instance, io, report, run_batch, ExperimentConfig, ExperimentError,
    Result, SeedRange, TraceMode,
};

#[derive(Parser)]
#[command(name = "imlca", version, about = "Interval-bid combinatorial auction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run variants over a range of seeded instances.
    Run(RunArgs),
    /// Exhaustive optimum of one instance.
    Optimum(OptimumArgs),
    /// Aggregate tables of a finished run.
    Report(ReportArgs),
}

#[derive(Args)]
struct InstanceArgs {
    /// TOML config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "synthetic")]
    domain: String,
    #[arg(long)]
    bidders: Option<usize>,
    #[arg(long)]
    items: Option<usize>,
    #[arg(long)]
    interest_size: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long)]
    qinit: Option<usize>,
    #[arg(long)]
    qmax: Option<usize>,
    #[arg(long)]
    qround: Option<usize>,
    #[arg(long)]
    mu: Option<f64>,
    /// A number in [0, 1], or `anneal`.
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    omega_stop: Option<f64>,
    #[arg(long)]
    max_refine_rounds: Option<usize>,
    /// Repeat or separate with commas.
    #[arg(long, value_delimiter = ',')]
    variant: Vec<Variant>,
    /// Inclusive, `A..B`.
    #[arg(long)]
    seeds: Option<SeedRange>,
    #[arg(long)]
    master_seed: Option<u64>,
    #[arg(long)]
    trace: Option<TraceMode>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OptimumArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long)]
    instance_seed: u64,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Print the aggregate as JSON instead of a table.
    #[arg(long)]
    json: bool,
}

fn base_config(args: &InstanceArgs) -> Result<ExperimentConfig> {
    if args.domain != "synthetic" {
        return Err(ExperimentError::Config(format!("unknown domain {:?}", args.domain)));
    }
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(n) = args.bidders {
        cfg.domain.num_bidders = n;
    }
    if let Some(m) = args.items {
        cfg.domain.num_items = m;
    }
    if let Some(k) = args.interest_size {
        cfg.domain.interest_size = k;
    }
    Ok(cfg)
}

fn parse_alpha(s: &str) -> Result<AlphaPolicy> {
    if s == "anneal" {
        return Ok(AlphaPolicy::Anneal);
    }
    s.parse()
        .map(|alpha| AlphaPolicy::Fixed { alpha })
        .map_err(|_| ExperimentError::Config(format!("alpha {s:?} is neither a number nor `anneal`")))
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let mut cfg = base_config(&args.instance)?;
    let m = &mut cfg.mechanism;
    if let Some(v) = args.qinit {
        m.q_init = v;
    }
    if let Some(v) = args.qmax {
        m.q_max = v;
    }
    if let Some(v) = args.qround {
        m.q_round = v;
    }
    if let Some(v) = args.omega_stop {
        m.omega_stop = v;
    }
    if let Some(v) = args.max_refine_rounds {
        m.max_refine_rounds = v;
    }
    if let Some(a) = &args.alpha {
        m.alpha = parse_alpha(a)?;
    }
    if let Some(v) = args.mu {
        cfg.mu = v;
    }
    if !args.variant.is_empty() {
        cfg.variants = args.variant;
    }
    if let Some(s) = args.seeds {
        cfg.seeds = s;
    }
    if let Some(s) = args.master_seed {
        cfg.master_seed = s;
    }
    if let Some(t) = args.trace {
        cfg.trace = t;
    }
    cfg.validate()?;

    let batch = run_batch(&cfg)?;
    io::write_batch(&args.out, &cfg, &batch)?;
    print!("{}", report::render_table(&aggregate(&batch.rows())));
    for r in batch.rows().iter().filter(|r| r.is_error()) {
        eprintln!("seed {} {}: {}", r.seed, r.variant.name(), r.error.as_deref().unwrap_or(""));
    }
    Ok(if batch.has_errors() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}

fn optimum(args: OptimumArgs) -> Result<ExitCode> {
    let cfg = base_config(&args.instance)?;
    let instance = generate_instance(&cfg.domain, args.instance_seed)?;
    let (a, value) = brute_force_optimum(&instance.values)?;
    let bundles: Vec<Vec<usize>> = a.bundles().iter().map(|b| b.items().collect()).collect();
    let out = serde_json::json!({
        "instance_seed": args.instance_seed,
        "value": value,
        "allocation": bundles,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(ExitCode::SUCCESS)
}

fn report_cmd(args: ReportArgs) -> Result<ExitCode> {
    let rows = io::read_results(&args.input)?;
    let agg = aggregate(&rows);
    if args.json {
        print!("{}", io::aggregate_json(&agg)?);
    } else {
        print!("{}", report::render_table(&agg));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Optimum(a) => optimum(a),
        Command::Report(a) => report_cmd(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
