//! Command line front end: conjecture verification batches, resource
//! reports for stored states, the EOF-maximizing pipeline, and the
//! special-state constructor.
//!
//! Exit codes: 0 when every sample resolves OK, 1 on usage or input
//! errors, 2 when any sample ends UNRESOLVED or DCC_FAILED.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use entpot::harness::{
    run_batch, write_results, GeneratorConfig, Status, Stratification, Summary,
};
use entpot::io::{load_state, save_state, save_trace, state_to_string};
use entpot::maxeof::maximize_eof_checked;
use entpot::resources::resource_report;
use entpot::special::{make_special, separability_window, SpecialStateParams};
use entpot::{Cov64, Error};

#[derive(Parser)]
#[command(name = "entpot", version, about = "Two-mode Gaussian resource calculus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo batch checking the saturation identity
    VerifyConjecture(VerifyArgs),
    /// Print the resource report for a stored state
    Resources(ResourcesArgs),
    /// Run the EOF-maximizing pipeline on a stored state
    MaximizeEof(MaximizeArgs),
    /// Construct a state from the six-parameter special family
    MakeSpecial(MakeSpecialArgs),
    /// Run a small deterministic batch as a smoke test
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct VerifyArgs {
    /// Master seed for the sample stream
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Number of samples
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Upper bound for the symplectic eigenvalues of generated states
    #[arg(long, default_value_t = 5.0)]
    nu_max: f64,
    /// Upper bound for the squeezing parameters of generated states
    #[arg(long, default_value_t = 2.0)]
    r_max: f64,
    /// Sampling stratification: uniform, near-pure, or high-squeeze
    #[arg(long, default_value = "uniform")]
    strata: Stratification,
    /// Write per-sample results to this CSV file
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct ResourcesArgs {
    /// Path to a state JSON file
    state: PathBuf,
    /// Seed for the variational optimizers
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct MaximizeArgs {
    /// Path to a state JSON file
    state: PathBuf,
    /// Seed for the variational optimizers
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write the full pipeline trace to this JSON file
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the output state to this JSON file
    #[arg(long)]
    out_state: Option<PathBuf>,
}

#[derive(Args)]
struct MakeSpecialArgs {
    #[arg(long)]
    r1: f64,
    #[arg(long)]
    r2: f64,
    #[arg(long = "l1")]
    lambda1: f64,
    #[arg(long = "l2")]
    lambda2: f64,
    /// Cross-mode noise ratio; defaults to the largest admissible value
    /// exp(-r1-r2)
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    /// Write the state to this JSON file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 21)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    samples: usize,
}

fn print_summary(summary: &Summary) {
    println!(
        "samples {}  ok {}  unresolved {}  dcc_failed {}",
        summary.n_samples, summary.ok, summary.unresolved, summary.dcc_failed
    );
    println!(
        "|error|  mean {:.3e}  max {:.3e}",
        summary.mean_abs_error, summary.max_abs_error
    );
}

fn batch_exit(summary: &Summary) -> ExitCode {
    if summary.all_ok() {
        println!("verdict: OK");
        ExitCode::SUCCESS
    } else {
        println!("verdict: UNRESOLVED");
        ExitCode::from(2)
    }
}

fn verify(args: &VerifyArgs) -> Result<ExitCode, Error> {
    let cfg = GeneratorConfig {
        seed: args.seed,
        nu_max: args.nu_max,
        r_max: args.r_max,
        n_samples: args.samples,
        stratification: args.strata,
    };
    let (records, summary) = run_batch(&cfg)?;
    for r in &records {
        if r.status != Status::Ok {
            println!(
                "sample {}  seed {}  status {}  error {:+.3e}  dcc {:.3e}",
                r.sample_id, r.seed, r.status, r.error, r.dcc_residual
            );
        }
    }
    if let Some(path) = &args.out {
        write_results(&records, path)?;
        println!("wrote {}", path.display());
    }
    print_summary(&summary);
    Ok(batch_exit(&summary))
}

fn resources(args: &ResourcesArgs) -> Result<ExitCode, Error> {
    let sigma = load_state(&args.state)?;
    let report = resource_report(&sigma, args.seed)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(ExitCode::SUCCESS)
}

fn maximize(args: &MaximizeArgs) -> Result<ExitCode, Error> {
    let sigma = load_state(&args.state)?;
    let (sigma_out, trace, check) = maximize_eof_checked(&sigma, args.seed)?;
    println!("sof_in   {:.12}", check.sof_in);
    println!("sof_out  {:.12}", check.sof_out);
    println!("eof_out  {:.12}", check.eof_out);
    println!("h0(sof)  {:.12}", check.h0_sof);
    println!("gap      {:+.3e}", check.gap);
    println!(
        "tau {:.6} on mode {}  dcc residual {:.3e}",
        trace.tau_star,
        trace.j_star + 1,
        trace.dcc_residual
    );
    if let Some(path) = &args.out {
        save_trace(&trace, &check, path)?;
        println!("wrote {}", path.display());
    }
    if let Some(path) = &args.out_state {
        save_state(&sigma_out, path)?;
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn make_special_cmd(args: &MakeSpecialArgs) -> Result<ExitCode, Error> {
    let alpha = args
        .alpha
        .unwrap_or_else(|| (-args.r1 - args.r2).exp());
    let params = SpecialStateParams::new(
        args.r1, args.r2, args.lambda1, args.lambda2, alpha, args.theta,
    )?;
    let sigma: Cov64 = make_special(&params);
    match separability_window(&params) {
        Ok((lo, hi)) => eprintln!("separability window: [{lo:.6}, {hi:.6}]"),
        Err(_) => eprintln!("separability window: empty"),
    }
    if let Some(path) = &args.out {
        save_state(&sigma, path)?;
        eprintln!("wrote {}", path.display());
    } else {
        println!("{}", state_to_string(&sigma)?);
    }
    Ok(ExitCode::SUCCESS)
}

fn selftest(args: &SelftestArgs) -> Result<ExitCode, Error> {
    let cfg = GeneratorConfig {
        seed: args.seed,
        n_samples: args.samples,
        ..GeneratorConfig::default()
    };
    let (_, summary) = run_batch(&cfg)?;
    print_summary(&summary);
    Ok(batch_exit(&summary))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let jobs = match &cli.command {
        Command::VerifyConjecture(a) => a.jobs,
        _ => None,
    };
    if let Some(n) = jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = match &cli.command {
        Command::VerifyConjecture(a) => verify(a),
        Command::Resources(a) => resources(a),
        Command::MaximizeEof(a) => maximize(a),
        Command::MakeSpecial(a) => make_special_cmd(a),
        Command::Selftest(a) => selftest(a),
    };
    match result {
        Ok(code) => code,
        Err(Error::ConjectureGap(report)) => {
            eprintln!("UNRESOLVED: gap {:+.3e} after {} restarts", report.gap, report.restarts_used);
            ExitCode::from(2)
        }
        Err(Error::DccFailed { residual }) => {
            eprintln!("DCC_FAILED: residual {residual:.3e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
