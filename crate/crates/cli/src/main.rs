use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use onebit::bench::{
    exhaustive_rows, run_trials_with, scaling_report, summarize, write_csv, ScalingReport, SignalSpec, TrialRow,
};
use onebit::group_testing::DRule;
use onebit::schemes::{ForeachScheme, SchemeConfig, SchemeKind, SharedDesign};
use onebit::sensing::{read_matrix, write_matrix, StoredMatrix};
use onebit::Error;

/// Seeded one-bit compressed sensing trials.
#[derive(Parser, Debug)]
#[command(name = "onebit", version)]
struct Args {
    #[arg(long)]
    scheme: SchemeKind,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    /// Additive slack of the error guarantee, in (0, 1].
    #[arg(long, default_value_t = 0.25)]
    delta: f64,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// Trial i uses seed SEED + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// onehot, planted, random-sparse or file:PATH
    #[arg(long, default_value = "random-sparse")]
    signal: SignalSpec,
    /// CSV destination; rows are only summarised when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides such as c1=32 or c_g=16.
    #[arg(long, num_args = 1.., value_name = "KEY=VAL")]
    constants: Vec<String>,
    /// Write the group-testing matrix of the run to PATH.
    #[arg(long, value_name = "PATH")]
    dump_matrix: Option<PathBuf>,
    /// Use the group-testing matrix stored at PATH (forall, support).
    #[arg(long, value_name = "PATH")]
    load_matrix: Option<PathBuf>,
    /// Every k-subset (and sign pattern, for forall) on one matrix draw.
    #[arg(long)]
    exhaustive: bool,
    /// Report decode time against these sizes instead of running trials.
    #[arg(long, value_delimiter = ',', value_name = "N,N,...")]
    scaling_ns: Vec<usize>,
    /// Zero the timing columns so that the CSV depends only on the inputs.
    #[arg(long)]
    no_timing: bool,
}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Error::InvalidConfig(msg.into()).into()
}

fn parse_value<T: std::str::FromStr>(key: &str, val: &str) -> anyhow::Result<T> {
    val.parse()
        .map_err(|_| invalid(format!("bad value {val:?} for constant {key}")))
}

fn apply_constant(cfg: &mut SchemeConfig, kv: &str) -> anyhow::Result<()> {
    let (key, val) = kv
        .split_once('=')
        .ok_or_else(|| invalid(format!("constant {kv:?} is not KEY=VAL")))?;
    let s = &mut cfg.sketch;
    match key {
        "c_minus1" => s.c_minus1 = parse_value(key, val)?,
        "c0" => s.c0 = parse_value(key, val)?,
        "c1" => s.c1 = parse_value(key, val)?,
        "c2" => s.c2 = parse_value(key, val)?,
        "c_cap" => s.c_cap = parse_value(key, val)?,
        "delta_prime" => s.delta_prime = Some(parse_value(key, val)?),
        "c_g" => cfg.c_g = parse_value(key, val)?,
        "c_bound" => cfg.c_bound = parse_value(key, val)?,
        "c_d" => {
            cfg.d_rule = DRule::ProofConsistent {
                c_d: parse_value(key, val)?,
            }
        }
        "d" => cfg.d_rule = DRule::Fixed(parse_value(key, val)?),
        "forall_failure_bits" => cfg.forall_failure_bits = parse_value(key, val)?,
        "zero_tol" => cfg.zero_tol = parse_value(key, val)?,
        "solver_tol" => cfg.solver_tol = parse_value(key, val)?,
        "oracle_budget" => cfg.oracle_budget = parse_value(key, val)?,
        "design_seed" => cfg.design_seed = parse_value(key, val)?,
        _ => return Err(invalid(format!("unknown constant {key:?}"))),
    }
    Ok(())
}

fn shared_design(cfg: &SchemeConfig, load: Option<&PathBuf>) -> anyhow::Result<SharedDesign> {
    let Some(path) = load else {
        return Ok(SharedDesign::build(cfg)?);
    };
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    match read_matrix(BufReader::new(file))? {
        StoredMatrix::Binary { matrix, .. } => Ok(SharedDesign::from_matrix(cfg, matrix)?),
        StoredMatrix::Real(_) => Err(invalid("--load-matrix expects a binary matrix")),
    }
}

fn dump_matrix(cfg: &SchemeConfig, shared: &SharedDesign, path: &PathBuf) -> anyhow::Result<()> {
    let matrix = match cfg.scheme {
        SchemeKind::Forall => shared.forall.as_ref().map(|d| d.matrix().clone()),
        SchemeKind::Support => shared.support.as_ref().map(|m| (**m).clone()),
        SchemeKind::Foreach => Some(ForeachScheme::build(cfg)?.matrix().to_binary()?),
        SchemeKind::L2l2 => None,
    }
    .ok_or_else(|| invalid(format!("scheme {} has no group-testing matrix to dump", cfg.scheme)))?;
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    write_matrix(&mut w, &StoredMatrix::Binary { matrix, seed: cfg.seed })?;
    w.flush()?;
    Ok(())
}

fn print_scaling(report: &ScalingReport) {
    println!("scaling: scheme={} k={}", report.scheme, report.k);
    println!(
        "{:>12} {:>14} {:>18} {:>18}",
        "n", "measurements", "decode_ms", "baseline_ms"
    );
    for r in &report.rows {
        let baseline = r.median_baseline_ms.map_or("-".to_owned(), |b| format!("{b:.4}"));
        println!(
            "{:>12} {:>14} {:>18.4} {:>18}",
            r.n, r.measurements, r.median_decode_ms, baseline
        );
    }
    println!("fitted exponent: {:.3}", report.exponent);
    if let Some(b) = report.baseline_exponent {
        println!("baseline exponent: {b:.3}");
    }
    println!("sublinear: {}", if report.sublinear() { "yes" } else { "no" });
}

fn run(args: Args) -> anyhow::Result<()> {
    let mut cfg = SchemeConfig::new(args.scheme, args.n, args.k, args.delta).with_seed(args.seed);
    for kv in &args.constants {
        apply_constant(&mut cfg, kv)?;
    }
    cfg.validate()?;

    if !args.scaling_ns.is_empty() {
        let report = scaling_report(&cfg, &args.scaling_ns, args.trials.max(1), args.seed)?;
        print_scaling(&report);
        return Ok(());
    }

    let shared = shared_design(&cfg, args.load_matrix.as_ref())?;
    if let Some(d) = shared.forall.as_ref() {
        match d.verified() {
            Some(true) => {}
            Some(false) => eprintln!("warning: for-all matrix failed the list-disjunct check"),
            None => eprintln!("warning: for-all matrix is unverified-disjunct (check over budget)"),
        }
    }
    if let Some(path) = &args.dump_matrix {
        dump_matrix(&cfg, &shared, path)?;
    }

    let rows: Vec<TrialRow> = if args.exhaustive {
        exhaustive_rows(&cfg, &shared, !args.no_timing)?
    } else {
        let source = args.signal.load(cfg.n, cfg.k)?;
        run_trials_with(&cfg, &shared, &source, args.trials, args.seed, !args.no_timing)?
    };

    if let Some(path) = &args.out {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_csv(BufWriter::new(file), &rows)?;
    }
    let s = summarize(&rows);
    println!(
        "scheme={} n={} k={} delta={} trials={} success_rate={:.4} mean_error={:.6e} median_decode_ms={:.4}",
        cfg.scheme, cfg.n, cfg.k, cfg.delta, s.trials, s.success_rate, s.mean_error, s.median_decode_ms
    );
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Io(_)) | Some(Error::Csv(_)) | None => 1,
        Some(_) => 2,
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
