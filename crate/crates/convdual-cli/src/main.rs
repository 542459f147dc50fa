use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use convdual::channel_sim::{self, DecoderKind, SimConfig};
use convdual::combine::{self, ProfileCode, WeightProfile};
use convdual::dualsiso;
use convdual::CodeSpec;

/// Codes exercised by `equiv --code all`.
const EQUIV_SUITE: [&str; 8] = ["1/7", "1/13", "5", "7", "17", "15", "5/7", "15/13"];

const SUBCOMMANDS: [&str; 4] = ["ber", "equiv", "weights-verify", "bench"];

/// Dual-encoder SISO decoding of rate-1 convolutional codes.
///
/// Any subcommand accepts `--config FILE` with one `key = value` per line,
/// keys named like the long flags. Flags on the command line win.
#[derive(Debug, Parser)]
#[command(name = "convdual", version)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte-Carlo bit error rate over BPSK/AWGN.
    Ber(BerArgs),
    /// Compare dual decoders against the BCJR oracle.
    Equiv(EquivArgs),
    /// Verify combining weights against bidirectional BCJR.
    WeightsVerify(WeightsArgs),
    /// Time BCJR against forward dual decoding on FBC codes.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct BerArgs {
    /// Code as octal `num/den`, `num`, or `1/den`.
    #[arg(long)]
    code: String,
    /// bcjr-bidir, dual-forward, dual-sum or dual-combined.
    #[arg(long)]
    decoder: String,
    #[arg(long, default_value_t = 128)]
    frame_len: usize,
    #[arg(long, default_value_t = 1000)]
    frames: u64,
    /// Comma-separated Eb/N0 points in dB.
    #[arg(
        long,
        value_delimiter = ',',
        required = true,
        allow_negative_numbers = true
    )]
    ebn0: Vec<f64>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct EquivArgs {
    /// Code text, or `all` for the built-in suite.
    #[arg(long, default_value = "all")]
    code: String,
    #[arg(long, default_value_t = 32)]
    frame_len: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Variant {
    Printed,
    Amended,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct WeightsArgs {
    /// Profile id (for example `GC_5_7`), code text, or `all`.
    #[arg(long, default_value = "all")]
    code: String,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 16)]
    frame_len: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Variant::Amended)]
    variant: Variant,
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct BenchArgs {
    /// Comma-separated memory orders (1 to 16).
    #[arg(long, value_delimiter = ',', default_value = "2,4,6,8")]
    orders: Vec<usize>,
    #[arg(long, default_value_t = 4096)]
    frame_len: usize,
    #[arg(long, default_value_t = 11)]
    reps: usize,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Turns `key = value` lines into `--key value` arguments.
fn config_args(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let mut args = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}:{}: expected key = value", path.display(), n + 1);
        };
        args.push(format!("--{}", key.trim().replace('_', "-")));
        args.push(value.trim().to_string());
    }
    Ok(args)
}

/// Splices config-file arguments in right after the subcommand so that
/// later command-line flags override them.
fn expand_config(raw: Vec<String>) -> Result<Vec<String>> {
    let mut rest = Vec::with_capacity(raw.len());
    let mut config = None;
    let mut it = raw.into_iter();
    while let Some(arg) = it.next() {
        if arg == "--config" {
            config = Some(it.next().context("--config needs a path")?);
        } else if let Some(path) = arg.strip_prefix("--config=") {
            config = Some(path.to_string());
        } else {
            rest.push(arg);
        }
    }
    let Some(config) = config else {
        return Ok(rest);
    };
    let subcommand = rest
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.as_str()))
        .map(|i| i + 1)
        .context("--config needs a subcommand")?;
    let mut out: Vec<String> = rest[..subcommand].to_vec();
    out.extend(config_args(Path::new(&config))?);
    out.extend_from_slice(&rest[subcommand..]);
    Ok(out)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn run_ber(args: &BerArgs) -> Result<bool> {
    let config = SimConfig {
        code: CodeSpec::parse(&args.code)?,
        decoder: args.decoder.parse::<DecoderKind>()?,
        frame_len: args.frame_len,
        frames: args.frames,
        ebn0_list: args.ebn0.clone(),
        seed: args.seed,
    };
    let records = channel_sim::run_ber(&config)?;
    channel_sim::write_ber_csv(&records, output(args.out.as_deref())?)?;
    Ok(true)
}

fn run_equiv(args: &EquivArgs) -> Result<bool> {
    let codes: Vec<&str> = if args.code == "all" {
        EQUIV_SUITE.to_vec()
    } else {
        vec![args.code.as_str()]
    };
    let mut ok = true;
    for text in codes {
        let spec = CodeSpec::parse(text)?;
        let report = dualsiso::check_equivalence(&spec, args.frame_len, args.trials, args.seed)?;
        let pass = report.passes(args.tolerance);
        ok &= pass;
        println!("{} {report}", if pass { "PASS" } else { "FAIL" });
    }
    Ok(ok)
}

fn run_weights(args: &WeightsArgs) -> Result<bool> {
    let codes: Vec<ProfileCode> = if args.code == "all" {
        ProfileCode::ALL.to_vec()
    } else {
        vec![ProfileCode::parse(&args.code)?]
    };
    let mut ok = true;
    for code in codes {
        let profile = match args.variant {
            Variant::Printed => WeightProfile::printed(code),
            Variant::Amended => WeightProfile::amended(code),
        };
        let report = combine::verify_weights(
            &code.spec(),
            profile,
            args.trials,
            args.frame_len,
            args.seed,
        )?;
        let pass = report.passes(args.tolerance);
        ok &= pass;
        println!("{} {report}", if pass { "PASS" } else { "FAIL" });
    }
    Ok(ok)
}

fn run_bench(args: &BenchArgs) -> Result<bool> {
    let rows = channel_sim::benchmark_complexity(&args.orders, args.frame_len, args.reps)?;
    channel_sim::write_bench_csv(&rows, output(args.out.as_deref())?)?;
    Ok(true)
}

fn run() -> Result<bool> {
    let cli = Cli::parse_from(expand_config(std::env::args().collect())?);
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match &cli.command {
        Command::Ber(a) => run_ber(a),
        Command::Equiv(a) => run_equiv(a),
        Command::WeightsVerify(a) => run_weights(a),
        Command::Bench(a) => run_bench(a),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
