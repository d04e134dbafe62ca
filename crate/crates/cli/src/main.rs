//! `stackfit` command-line front-end.

use std::fs::{self, File};
use std::io::{self, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use stackfit::characterize::characterize_with_diagnostics;
use stackfit::predict::compare as compare_rows;
use stackfit::stackdist::cold_stats;
use stackfit::trace::{detect_format, gen_cyclic, gen_from_distance_model, gen_random_uniform};
use stackfit::{
    compute_distances, divergence, miss_ratio, monte_carlo_outline, outline, sample_distances,
    simulate_lru, sweep, to_line_addresses, AccessKind, AccessSequence, AnalysisConfig,
    CacheConfig, Characterization, Error, FamilySelection, SampleSet, TraceFormat,
};

#[derive(Parser)]
#[command(
    name = "stackfit",
    version,
    about = "Stack-distance characterization and cache miss-ratio prediction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic trace.
    Generate(GenerateArgs),
    /// Compute stack distances of a trace and write the sampled values as CSV.
    Distances(DistancesArgs),
    /// Fit a characterization to a sample CSV.
    Fit(FitArgs),
    /// Predict capacity miss ratios from a characterization.
    Predict(PredictArgs),
    /// Replay a trace through a fully-associative LRU cache.
    Simulate(SimulateArgs),
    /// Emit the outline (samples sorted descending) as CSV.
    Outline(OutlineArgs),
    /// Compare the predictions of two characterizations.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Pattern {
    Cyclic,
    Uniform,
    FromModel,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Binary,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Data,
    Instruction,
}

#[derive(clap::Args)]
struct Output {
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overwrite an existing output file.
    #[arg(long)]
    force: bool,
}

#[derive(clap::Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    pattern: Pattern,
    /// Distinct lines (cyclic, uniform).
    #[arg(long)]
    lines: Option<u64>,
    #[arg(long)]
    accesses: usize,
    #[arg(long, default_value = "64", value_parser = parse_size)]
    line_size: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Characterization JSON (from-model).
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "data")]
    kind: KindArg,
    #[arg(long, value_enum, default_value = "binary")]
    format: FormatArg,
    #[command(flatten)]
    output: Output,
}

#[derive(clap::Args)]
struct DistancesArgs {
    /// Binary or text trace; the format is detected from its first bytes.
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, default_value = "64", value_parser = parse_size)]
    line_size: u64,
    /// Keep one distance every `interval` accesses.
    #[arg(long, default_value_t = 1)]
    interval: u64,
    #[arg(long, default_value_t = 0)]
    offset: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(clap::Args)]
struct FitArgs {
    #[arg(long)]
    samples: PathBuf,
    /// Smallest cache size predictions will be asked for.
    #[arg(long, default_value = "64", value_parser = parse_size)]
    min_cache: u64,
    #[arg(long, value_parser = parse_size)]
    line_size: Option<u64>,
    #[arg(long, default_value_t = 3)]
    refinements: usize,
    /// "auto" or a comma-separated list of uniform, gamma, gpd, half_normal.
    #[arg(long, default_value = "auto")]
    families: String,
    #[arg(long, default_value_t = 0.01)]
    atom_threshold: f64,
    /// Fraction of accesses that were cold, as reported by `distances`.
    #[arg(long, default_value_t = 0.0)]
    cold_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(clap::Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_parser = parse_size, conflicts_with = "sweep")]
    cache_size: Option<u64>,
    /// Power-of-two cache sizes in `min:max`, as CSV.
    #[arg(long, value_parser = parse_range)]
    sweep: Option<(u64, u64)>,
    /// Must match the model's line size when given.
    #[arg(long, value_parser = parse_size)]
    line_size: Option<u64>,
}

#[derive(clap::Args)]
struct SimulateArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, value_parser = parse_size)]
    cache_size: u64,
    #[arg(long, default_value = "64", value_parser = parse_size)]
    line_size: u64,
}

#[derive(clap::Args)]
struct OutlineArgs {
    #[arg(long)]
    samples: PathBuf,
    /// Adds a column of Monte Carlo draws from this characterization.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(clap::Args)]
struct CompareArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long, value_parser = parse_range)]
    sweep: (u64, u64),
    #[command(flatten)]
    output: Output,
}

/// Byte count with an optional K/M/G suffix (powers of 1024).
fn parse_size(text: &str) -> Result<u64, String> {
    let text = text.trim();
    let (digits, shift) = match text.chars().last().map(|c| c.to_ascii_uppercase()) {
        Some('K') => (&text[..text.len() - 1], 10),
        Some('M') => (&text[..text.len() - 1], 20),
        Some('G') => (&text[..text.len() - 1], 30),
        _ => (text, 0),
    };
    let n: u64 = digits
        .parse()
        .map_err(|_| format!("invalid size {text:?}"))?;
    n.checked_mul(1 << shift)
        .ok_or_else(|| format!("size {text:?} overflows"))
}

fn parse_range(text: &str) -> Result<(u64, u64), String> {
    let (lo, hi) = text
        .split_once(':')
        .ok_or_else(|| format!("expected min:max, got {text:?}"))?;
    Ok((parse_size(lo)?, parse_size(hi)?))
}

fn emit(output: &Output, bytes: &[u8]) -> Result<()> {
    match &output.out {
        None => io::stdout()
            .lock()
            .write_all(bytes)
            .context("writing standard output"),
        Some(path) => {
            if path.exists() && !output.force {
                bail!("{} exists; pass --force to overwrite", path.display());
            }
            fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn load_trace(path: &Path) -> Result<AccessSequence> {
    let mut bytes = Vec::new();
    open(path)?.read_to_end(&mut bytes)?;
    let format = detect_format(&bytes);
    stackfit::trace::read_trace(&bytes[..], format)
        .with_context(|| format!("reading trace {}", path.display()))
}

fn load_samples(path: &Path) -> Result<SampleSet> {
    SampleSet::read_csv(open(path)?).with_context(|| format!("reading samples {}", path.display()))
}

fn load_model(path: &Path) -> Result<Characterization> {
    let text = fs::read_to_string(path).with_context(|| format!("opening {}", path.display()))?;
    Characterization::from_json(&text).with_context(|| format!("reading model {}", path.display()))
}

fn generate(args: GenerateArgs) -> Result<()> {
    if !args.line_size.is_power_of_two() {
        return Err(Error::LineSizeNotPowerOfTwo(args.line_size).into());
    }
    let lines = || args.lines.context("--lines is required for this pattern");
    let mut seq = match args.pattern {
        Pattern::Cyclic => gen_cyclic(nonzero(lines()?)?, args.accesses, args.line_size),
        Pattern::Uniform => {
            gen_random_uniform(nonzero(lines()?)?, args.accesses, args.line_size, args.seed)
        }
        Pattern::FromModel => {
            let path = args
                .model
                .as_deref()
                .context("--model is required for from-model")?;
            let model = load_model(path)?;
            if model.line_size != args.line_size {
                return Err(Error::LineSizeMismatch {
                    left: model.line_size,
                    right: args.line_size,
                }
                .into());
            }
            gen_from_distance_model(&model, args.accesses, args.seed)
        }
    };
    seq.kind = match args.kind {
        KindArg::Data => AccessKind::Data,
        KindArg::Instruction => AccessKind::Instruction,
    };
    let format = match args.format {
        FormatArg::Binary => TraceFormat::Binary,
        FormatArg::Text => TraceFormat::Text,
    };
    let mut buf = Vec::new();
    stackfit::trace::write_trace(&seq, format, &mut buf)?;
    emit(&args.output, &buf)
}

fn nonzero(lines: u64) -> Result<u64> {
    if lines == 0 {
        bail!("--lines must be at least 1");
    }
    Ok(lines)
}

fn distances(args: DistancesArgs) -> Result<()> {
    let seq = load_trace(&args.trace)?;
    let d = compute_distances(&to_line_addresses(&seq, args.line_size)?);
    let s = sample_distances(&d, args.interval, args.offset, args.line_size)?;
    let (cold, total) = cold_stats(&d);
    emit(&args.output, s.to_csv().as_bytes())?;
    eprintln!("cold={cold} total={total} samples={}", s.len());
    Ok(())
}

fn fit(args: FitArgs) -> Result<()> {
    let samples = load_samples(&args.samples)?;
    let config = AnalysisConfig {
        min_cache_size: args.min_cache,
        line_size: args.line_size.unwrap_or(samples.line_size),
        refinement_rounds: args.refinements,
        atom_threshold: args.atom_threshold,
        families: FamilySelection::parse(&args.families)?,
        seed: args.seed,
    };
    let (c, diag) = match characterize_with_diagnostics(&samples, args.cold_fraction, &config) {
        Err(e @ Error::Empty(_)) => {
            return Err(anyhow::Error::new(e)
                .context("no finite distances to fit; use a longer trace or a smaller --interval"))
        }
        r => r?,
    };
    emit(&args.output, c.to_json().as_bytes())?;
    for r in &diag.rounds {
        eprintln!(
            "round={} family={} eps_up={:.6e} eps_down={:.6e} biased={}",
            r.round,
            r.family.name(),
            r.eps_up,
            r.eps_down,
            r.biased
        );
    }
    match &c.continuous {
        Some(m) => eprintln!(
            "atoms={} continuous={m} weight={} fit_error={:.6e}",
            c.discrete.atoms.len(),
            c.continuous_weight,
            c.fit_error
        ),
        None => eprintln!("atoms={} continuous=none", c.discrete.atoms.len()),
    }
    if c.continuous.as_ref().is_some_and(|m| m.infinite_variance()) {
        eprintln!("warning: fitted model has infinite variance");
    }
    Ok(())
}

fn predict(args: PredictArgs) -> Result<()> {
    let c = load_model(&args.model)?;
    if let Some(ls) = args.line_size {
        if ls != c.line_size {
            return Err(Error::LineSizeMismatch {
                left: c.line_size,
                right: ls,
            }
            .into());
        }
    }
    let mut out = io::stdout().lock();
    match (args.cache_size, args.sweep) {
        (Some(cs), None) => {
            let r = miss_ratio(&c, &CacheConfig::new(cs, c.line_size)?)?;
            if r.below_threshold {
                eprintln!(
                    "warning: {} lines is below the {}-line threshold the model was refined for",
                    r.capacity_lines, c.threshold_lines
                );
            }
            writeln!(out, "{}", r.capacity_miss_ratio)?;
        }
        (None, Some((lo, hi))) => {
            writeln!(out, "cache_size,miss_ratio")?;
            for (cs, r) in sweep(&c, lo, hi)? {
                writeln!(out, "{cs},{r}")?;
            }
        }
        _ => bail!("give exactly one of --cache-size or --sweep"),
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let seq = load_trace(&args.trace)?;
    let r = simulate_lru(&seq, &CacheConfig::new(args.cache_size, args.line_size)?)?;
    println!(
        "accesses={} hits={} compulsory_misses={} capacity_misses={} capacity_miss_ratio={}",
        r.accesses,
        r.hits,
        r.compulsory_misses,
        r.capacity_misses,
        r.capacity_miss_ratio()
    );
    Ok(())
}

fn outline_cmd(args: OutlineArgs) -> Result<()> {
    let s = load_samples(&args.samples)?;
    let empirical = outline(&s).values;
    let model = match &args.model {
        Some(path) => {
            Some(monte_carlo_outline(&load_model(path)?, empirical.len(), args.seed).values)
        }
        None => None,
    };
    let mut csv = String::from(if model.is_some() {
        "rank,distance,model\n"
    } else {
        "rank,distance\n"
    });
    for (i, v) in empirical.iter().enumerate() {
        match &model {
            Some(m) => csv.push_str(&format!("{},{v},{}\n", i + 1, m[i])),
            None => csv.push_str(&format!("{},{v}\n", i + 1)),
        }
    }
    emit(&args.output, csv.as_bytes())
}

fn compare(args: CompareArgs) -> Result<()> {
    let (a, b) = (load_model(&args.a)?, load_model(&args.b)?);
    let (lo, hi) = args.sweep;
    let mut csv = String::from("cache_size,a,b\n");
    for (cs, x, y) in compare_rows(&a, &b, lo, hi)? {
        csv.push_str(&format!("{cs},{x},{y}\n"));
    }
    emit(&args.output, csv.as_bytes())?;
    eprintln!("divergence={}", divergence(&a, &b, lo, hi)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Distances(a) => distances(a),
        Command::Fit(a) => fit(a),
        Command::Predict(a) => predict(a),
        Command::Simulate(a) => simulate(a),
        Command::Outline(a) => outline_cmd(a),
        Command::Compare(a) => compare(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
