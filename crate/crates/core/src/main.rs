use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use llm_offload::harness::{
    emit, oracle_check, run_experiment, DelayScope, ExperimentConfig, OracleCheckConfig, OutputFormat,
};
use llm_offload::solver::{Algorithm, ObjectiveMode};
use llm_offload::uncertainty::{synth_trace, validate_trace_text, SyntheticParams, UncertaintyMetric};

#[derive(Parser)]
#[command(version, about = "Uncertainty-aware LLM offloading simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo sweep and write per-iteration rows plus a summary.
    Run(RunArgs),
    /// Compare every solver against exhaustive search on small instances.
    OracleCheck(OracleArgs),
    /// Lint an uncertainty trace file.
    ValidateTrace {
        path: PathBuf,
    },
    /// Write a synthetic uncertainty trace.
    SynthTrace {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment config; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    n_users: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    tau: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    metric: Option<UncertaintyMetric>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, value_delimiter = ',')]
    algorithms: Option<Vec<Algorithm>>,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
    /// Count the local term once per server, as the literal double sum does.
    #[arg(long)]
    strict_eq10: bool,
    #[arg(long, value_enum)]
    delay_over: Option<DelayScope>,
    /// Run iterations on one thread.
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    threads: Option<usize>,
    /// Write solver_time_ms as 0 for byte-reproducible output.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 200)]
    instances: usize,
    #[arg(long, default_value_t = 2)]
    min_users: usize,
    #[arg(long, default_value_t = 6)]
    max_users: usize,
    #[arg(long, default_value_t = 0.6)]
    tau: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn run(args: RunArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = args.n_users {
        cfg.n_users_sweep = v;
    }
    if let Some(v) = args.tau {
        cfg.tau_sweep = v;
    }
    if let Some(v) = args.metric {
        cfg.metric = v;
    }
    if let Some(v) = args.iterations {
        cfg.iterations = v;
    }
    if let Some(v) = args.seed {
        cfg.master_seed = v;
    }
    if let Some(v) = args.algorithms {
        cfg.algorithms = v;
    }
    if let Some(v) = args.trace {
        cfg.trace_path = Some(v);
    }
    if let Some(v) = args.out {
        cfg.output_dir = Some(v);
    }
    if let Some(v) = args.delay_over {
        cfg.delay_scope = v;
    }
    if let Some(v) = args.threads {
        cfg.threads = Some(v);
    }
    if args.strict_eq10 {
        cfg.objective_mode = ObjectiveMode::StrictDoubleSum;
    }
    if args.sequential {
        cfg.parallel = false;
    }
    if args.no_timing {
        cfg.record_solver_time = false;
    }
    let out = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("results"));
    cfg.output_dir = Some(out.clone());

    let started = std::time::Instant::now();
    let result = run_experiment(&cfg)?;
    log::info!("{} rows in {:.2?}", result.rows.len(), started.elapsed());
    for path in emit(&result, &out, args.format)? {
        println!("wrote {}", path.display());
    }
    println!(
        "{:<10} {:>6} {:>6} {:>12} {:>10} {:>10} {:>10}",
        "algorithm", "N", "tau", "delay_ms", "accuracy", "offloaded", "solve_ms"
    );
    for g in &result.summary {
        println!(
            "{:<10} {:>6} {:>6.2} {:>12.3} {:>10.4} {:>10.2} {:>10.3}",
            g.algorithm.name(),
            g.n_users,
            g.tau,
            g.mean_delay_ms.mean,
            g.accuracy.mean,
            g.offload_count.mean,
            g.solver_time_ms.mean
        );
    }
    Ok(())
}

fn oracle(args: OracleArgs) -> Result<bool> {
    if args.min_users > args.max_users {
        bail!("--min-users must not exceed --max-users");
    }
    let cfg = OracleCheckConfig {
        instances: args.instances,
        min_users: args.min_users,
        max_users: args.max_users,
        tau: args.tau,
        master_seed: args.seed,
        ..Default::default()
    };
    let check = oracle_check(&cfg)?;
    for v in &check.violations {
        println!(
            "VIOLATION instance {}: {} objective {} below oracle {}",
            v.instance, v.algorithm, v.value, v.oracle
        );
    }
    let s = check.gap_summary();
    println!("instances: {}", check.instances);
    println!("oracle dominance violations: {}", check.violations.len());
    println!(
        "goa relative gap: min {:.4} median {:.4} p90 {:.4} max {:.4} mean {:.4}; optimal on {:.1}%",
        s.min,
        s.median,
        s.p90,
        s.max,
        s.mean,
        s.optimal_fraction * 100.0
    );
    Ok(check.violations.is_empty())
}

fn validate_trace(path: PathBuf) -> Result<bool> {
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let (ok, issues) = validate_trace_text(&text);
    for issue in &issues {
        println!("{}: {issue}", path.display());
    }
    let errors = issues
        .iter()
        .filter(|i| i.severity == llm_offload::uncertainty::Severity::Error)
        .count();
    println!("{ok} valid records, {errors} errors, {} warnings", issues.len() - errors);
    Ok(errors == 0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run(args).map(|_| true),
        Command::OracleCheck(args) => oracle(args),
        Command::ValidateTrace { path } => validate_trace(path),
        Command::SynthTrace { n, seed, out } => (|| {
            let trace = synth_trace(&SyntheticParams { n, ..Default::default() }, seed)?;
            let f = std::fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            trace.write_jsonl(std::io::BufWriter::new(f))?;
            println!("wrote {} records to {}", trace.len(), out.display());
            Ok(true)
        })(),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
