//! Command line front end for `lgs_core`: build level presentations of
//! subshifts, estimate growth rates, and produce one-step equivalence
//! certificates.
//!
//! Every run is one command in one process.  Reports go to stdout in the
//! format selected by `--report`; artifacts are written only when `--out`
//! names a directory, and identical invocations produce byte-identical
//! files.  Exit codes: 0 on success, 2 when an input or a built system
//! fails validation, 3 when a certificate fails verification, 4 when a
//! build is refused by the resource guard.  A failing run prints a single
//! JSON object describing the error on stderr.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use lgs_core::builders::{
    build_canonical_lgs, build_pair_lgs, build_pair_word_lgs, build_word_lgs, BuildError,
    BuilderConfig,
};
use lgs_core::doc::load_shift;
use lgs_core::entropy::{lambda_entropy, report_csv, volume_entropy, EntropyError, EntropyReport};
use lgs_core::fixtures::{builtin, BUILTIN_NAMES};
use lgs_core::lgs::{validate_lgs, LambdaGraphSystem};
use lgs_core::shannon::oracle::Oracle;
use lgs_core::sse::{
    build_sse_witness, two_block_split, validate_specification, verify_sse, SseError,
    WitnessInputs,
};
use lgs_core::subshift::Subshift;

/// Level presentations of subshifts: builders, growth rates, and one-step
/// equivalence certificates.
#[derive(Parser)]
#[command(name = "lgs", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build and validate the follower-class presentation of a shift.
    Canonical {
        /// Builtin name or path to a shift document.
        shift: String,
        #[command(flatten)]
        opts: BuildOpts,
    },
    /// Build and validate the admissible-word presentation of a shift.
    Word {
        /// Builtin name or path to a shift document.
        shift: String,
        #[command(flatten)]
        opts: BuildOpts,
    },
    /// Build and validate the presentation of a subsystem relative to an
    /// ambient shift.
    ///
    /// A single argument names a builtin and selects its subsystem and
    /// ambient shift; two arguments are resolved independently, subsystem
    /// first.
    Pair {
        /// Builtin name, or the subsystem's builtin name / document path.
        sub: String,
        /// Ambient shift (builtin name or document path).
        sup: Option<String>,
        #[command(flatten)]
        opts: BuildOpts,
    },
    /// Build the word-and-class refinement of the follower presentation
    /// and check it counts label paths exactly.
    Pairword {
        /// Builtin name or path to a shift document.
        shift: String,
        #[command(flatten)]
        opts: BuildOpts,
    },
    /// Estimate the vertex growth rate of the follower presentation.
    Entropy {
        /// Builtin name or path to a shift document.
        shift: String,
        #[command(flatten)]
        opts: BuildOpts,
    },
    /// Estimate the path growth rate of the follower presentation.
    Volume {
        /// Builtin name or path to a shift document.
        shift: String,
        #[command(flatten)]
        opts: BuildOpts,
    },
    /// Estimate the vertex growth rate of a subsystem presentation,
    /// which bounds how fast the ambient shift separates subsystem orbits.
    Separation {
        /// Builtin name, or the subsystem's builtin name / document path.
        sub: String,
        /// Ambient shift (builtin name or document path).
        sup: Option<String>,
        #[command(flatten)]
        opts: BuildOpts,
    },
    /// Recode a finite-state shift through its 2-block splitting and
    /// verify the resulting one-step equivalence certificate.
    SseSplit {
        /// Builtin name or path to a shift document.
        shift: String,
        #[command(flatten)]
        opts: BuildOpts,
    },
    /// Run a named builtin end to end: plain shifts get the follower
    /// presentation and its growth rate, coded subsystems the relative
    /// presentation inside their ambient shift.
    Example {
        /// One of the builtin names.
        name: String,
        #[command(flatten)]
        opts: BuildOpts,
    },
}

#[derive(Args)]
struct BuildOpts {
    /// Depth of the level structure (defaults to the builtin's usual
    /// depth, or 6 for shift documents).
    #[arg(long)]
    levels: Option<usize>,
    /// Extra look-ahead levels used to certify vertex survival in
    /// approximate mode (defaults to the depth).
    #[arg(long)]
    buffer: Option<usize>,
    /// Longest context word the word-enumeration engine may examine
    /// (defaults to twice the depth plus two).
    #[arg(long)]
    context_bound: Option<usize>,
    /// Exact key-based construction, or word enumeration with finite
    /// look-ahead.
    #[arg(long, value_enum, default_value_t = Mode::Exact)]
    mode: Mode,
    /// Directory for artifacts; nothing is written without it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format printed to stdout (and written under --out).
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    report: ReportFormat,
    /// Also export the built system as a graph file (requires --out).
    #[arg(long, value_enum)]
    export: Option<ExportFormat>,
    /// Refuse the build if the predicted candidate count, estimated from
    /// the alphabet and the depth, exceeds this ceiling.  The builders
    /// enforce their own fixed ceiling regardless.
    #[arg(long)]
    budget: Option<u128>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Exact,
    Approx,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Text,
    Csv,
    Json,
}

impl ReportFormat {
    fn extension(self) -> &'static str {
        match self {
            ReportFormat::Text => "txt",
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExportFormat {
    Dot,
    Json,
}

/// A run that did not succeed, tagged with the exit code it maps to.
enum Failure {
    /// Bad input, or a built system that does not satisfy its invariants.
    Validation(String),
    /// A certificate was produced but its identities do not hold.
    Verification(String),
    /// The predicted working set exceeds the configured ceiling.
    Resource(String),
    /// Artifacts could not be written.
    Io(String),
}

impl Failure {
    fn kind(&self) -> &'static str {
        match self {
            Failure::Validation(_) => "validation",
            Failure::Verification(_) => "verification",
            Failure::Resource(_) => "resource",
            Failure::Io(_) => "io",
        }
    }

    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) | Failure::Io(_) => 2,
            Failure::Verification(_) => 3,
            Failure::Resource(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m)
            | Failure::Verification(m)
            | Failure::Resource(m)
            | Failure::Io(m) => m,
        }
    }
}

impl From<BuildError> for Failure {
    fn from(e: BuildError) -> Self {
        match e {
            BuildError::ResourceLimit(_) => Failure::Resource(e.to_string()),
            other => Failure::Validation(other.to_string()),
        }
    }
}

impl From<EntropyError> for Failure {
    fn from(e: EntropyError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<SseError> for Failure {
    fn from(e: SseError) -> Self {
        Failure::Validation(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let error = json!({
                "error": { "kind": failure.kind(), "message": failure.message() }
            });
            eprintln!("{error}");
            ExitCode::from(failure.code())
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Canonical { shift, opts } => {
            let (shift, depth) = resolve_shift(&shift)?;
            run_canonical(&shift, depth, &opts, RateKind::Vertices)
        }
        Command::Entropy { shift, opts } => {
            let (shift, depth) = resolve_shift(&shift)?;
            run_canonical(&shift, depth, &opts, RateKind::Vertices)
        }
        Command::Volume { shift, opts } => {
            let (shift, depth) = resolve_shift(&shift)?;
            run_canonical(&shift, depth, &opts, RateKind::Paths)
        }
        Command::Word { shift, opts } => {
            let (shift, depth) = resolve_shift(&shift)?;
            let levels = opts.levels.unwrap_or(depth);
            guard_words(&shift, levels, &opts)?;
            let system = validated(build_word_lgs(&shift, levels)?)?;
            let report = lambda_entropy(&system)?;
            emit(&system, &report, &opts)
        }
        Command::Pairword { shift, opts } => {
            let (shift, depth) = resolve_shift(&shift)?;
            let levels = opts.levels.unwrap_or(depth);
            guard_words(&shift, levels, &opts)?;
            let built = build_pair_word_lgs(&shift, levels)?;
            let system = validated(built.system)?;
            let base = validated(built.canonical)?;
            let refined = system.vertex_counts();
            for (n, &paths) in base.path_counts().iter().enumerate() {
                if refined[n] as u128 != paths {
                    return Err(Failure::Validation(format!(
                        "level {n}: {} refined vertices but {paths} label paths; \
                         the refinement must count paths exactly",
                        refined[n]
                    )));
                }
            }
            let report = lambda_entropy(&system)?;
            emit(&system, &report, &opts)
        }
        Command::Pair { sub, sup, opts } | Command::Separation { sub, sup, opts } => {
            let (sub, sup, depth) = resolve_pair(&sub, sup.as_deref())?;
            run_pair(&sub, &sup, depth, &opts)
        }
        Command::SseSplit { shift, opts } => {
            let (shift, depth) = resolve_shift(&shift)?;
            run_sse_split(&shift, depth, &opts)
        }
        Command::Example { name, opts } => {
            let b = builtin(&name).ok_or_else(|| unknown_builtin(&name))?;
            if b.sub.name() == b.sup.name() {
                run_canonical(&b.shift, b.default_levels, &opts, RateKind::Vertices)
            } else {
                run_pair(&b.sub, &b.sup, b.default_levels, &opts)
            }
        }
    }
}

/// Which counting function the report quotes.
#[derive(Clone, Copy)]
enum RateKind {
    Vertices,
    Paths,
}

fn run_canonical(
    shift: &Subshift,
    default_levels: usize,
    opts: &BuildOpts,
    rate: RateKind,
) -> Result<(), Failure> {
    let cfg = config(opts, default_levels);
    guard_keys(shift, cfg.levels, opts)?;
    let system = validated(build_canonical_lgs(shift, &cfg)?)?;
    let report = match rate {
        RateKind::Vertices => lambda_entropy(&system)?,
        RateKind::Paths => volume_entropy(&system)?,
    };
    emit(&system, &report, opts)
}

fn run_pair(
    sub: &Subshift,
    sup: &Subshift,
    default_levels: usize,
    opts: &BuildOpts,
) -> Result<(), Failure> {
    let cfg = config(opts, default_levels);
    guard_pair_keys(sub, sup, cfg.levels, opts)?;
    let pair = build_pair_lgs(sub, sup, &cfg)?;
    let system = validated(pair.system)?;
    let report = lambda_entropy(&system)?;
    emit(&system, &report, opts)
}

fn run_sse_split(shift: &Subshift, default_levels: usize, opts: &BuildOpts) -> Result<(), Failure> {
    let levels = opts.levels.unwrap_or(default_levels);
    let (partner_shift, spec) = two_block_split(shift)?;
    let check = validate_specification(&spec, shift, &partner_shift, (levels + 1).min(8));
    if !check.passed() {
        return Err(Failure::Validation(format!(
            "recoding specification for {} is invalid: {}",
            shift.name(),
            check.failures.join("; ")
        )));
    }
    let cfg = config(opts, levels);
    guard_keys(shift, cfg.levels, opts)?;
    guard_keys(&partner_shift, cfg.levels, opts)?;
    let plain = validated(build_canonical_lgs(shift, &cfg)?)?;
    let partner = validated(build_canonical_lgs(&partner_shift, &cfg)?)?;
    let inputs = WitnessInputs::Canonical {
        system: &plain,
        partner: &partner,
    };
    let witness = build_sse_witness(&inputs, &spec, levels)?;
    let report = verify_sse(&witness, &plain, &partner, &spec)?;
    let text = match opts.report {
        ReportFormat::Text => report.render(),
        ReportFormat::Csv => format!(
            "levels,equations_checked,failures\n{},{},{}\n",
            report.levels,
            report.equations_checked,
            report.failures.len()
        ),
        ReportFormat::Json => pretty(&report.to_json()),
    };
    print!("{text}");
    if let Some(dir) = &opts.out {
        let stem = slug(&plain.name);
        write_artifact(dir, &format!("{stem}-sse-report.{}", opts.report.extension()), &text)?;
        write_artifact(
            dir,
            &format!("{stem}-witness.json"),
            &pretty(&witness.to_json(&spec)?),
        )?;
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Verification(format!(
            "{} of {} identity checks failed for {}",
            report.failures.len(),
            report.equations_checked,
            shift.name()
        )))
    }
}

/// Resolve a shift argument: builtin names take precedence, anything else
/// is read as a document path.  Returns the shift and its default depth.
fn resolve_shift(arg: &str) -> Result<(Subshift, usize), Failure> {
    if let Some(b) = builtin(arg) {
        return Ok((b.shift, b.default_levels));
    }
    let path = Path::new(arg);
    if path.exists() {
        let shift = load_shift(path).map_err(|e| Failure::Validation(e.to_string()))?;
        return Ok((shift, 6));
    }
    Err(unknown_builtin(arg))
}

/// Resolve the subsystem / ambient pair for `pair` and `separation`.
fn resolve_pair(sub: &str, sup: Option<&str>) -> Result<(Subshift, Subshift, usize), Failure> {
    match sup {
        Some(sup) => {
            let (sub, d1) = resolve_shift(sub)?;
            let (sup, d2) = resolve_shift(sup)?;
            Ok((sub, sup, d1.min(d2)))
        }
        None => {
            let b = builtin(sub).ok_or_else(|| unknown_builtin(sub))?;
            Ok((b.sub, b.sup, b.default_levels))
        }
    }
}

fn unknown_builtin(arg: &str) -> Failure {
    Failure::Validation(format!(
        "{arg} is neither a builtin example ({}) nor a readable file",
        BUILTIN_NAMES.join(", ")
    ))
}

fn config(opts: &BuildOpts, default_levels: usize) -> BuilderConfig {
    let mut cfg = BuilderConfig::for_levels(opts.levels.unwrap_or(default_levels));
    if let Some(buffer) = opts.buffer {
        cfg.buffer = buffer;
    }
    if let Some(bound) = opts.context_bound {
        cfg.context_bound = bound;
    }
    cfg.exact = opts.mode == Mode::Exact;
    cfg
}

/// Predicted context-key count of a single-shift build, refused against
/// `--budget` before anything is allocated.
fn guard_keys(shift: &Subshift, levels: usize, opts: &BuildOpts) -> Result<(), Failure> {
    let Some(budget) = opts.budget else {
        return Ok(());
    };
    let oracle = Oracle::from_subshift(shift).map_err(|e| Failure::Validation(e.to_string()))?;
    let mut predicted: u128 = 0;
    for n in 0..=levels {
        predicted = predicted.saturating_add(oracle.estimate_keys(n));
    }
    check_budget(predicted, budget, shift.name())
}

/// Predicted candidate count of a subsystem build: per level, the product
/// of the two sides' key estimates.
fn guard_pair_keys(
    sub: &Subshift,
    sup: &Subshift,
    levels: usize,
    opts: &BuildOpts,
) -> Result<(), Failure> {
    let Some(budget) = opts.budget else {
        return Ok(());
    };
    let os = Oracle::from_subshift(sub).map_err(|e| Failure::Validation(e.to_string()))?;
    let oa = Oracle::from_subshift(sup).map_err(|e| Failure::Validation(e.to_string()))?;
    let mut predicted: u128 = 0;
    for n in 0..=levels {
        let product = os.estimate_keys(n).saturating_mul(oa.estimate_keys(n));
        predicted = predicted.saturating_add(product);
    }
    check_budget(predicted, budget, sub.name())
}

/// Predicted word count of a word-enumeration build: the alphabet power
/// sum up to the requested depth.
fn guard_words(shift: &Subshift, levels: usize, opts: &BuildOpts) -> Result<(), Failure> {
    let Some(budget) = opts.budget else {
        return Ok(());
    };
    let base = shift.alphabet().len() as u128;
    let mut predicted: u128 = 0;
    let mut power: u128 = 1;
    for _ in 0..=levels {
        predicted = predicted.saturating_add(power);
        power = power.saturating_mul(base);
    }
    check_budget(predicted, budget, shift.name())
}

fn check_budget(predicted: u128, budget: u128, name: &str) -> Result<(), Failure> {
    if predicted > budget {
        return Err(Failure::Resource(format!(
            "predicted candidate count {predicted} for {name} exceeds the budget of {budget}"
        )));
    }
    Ok(())
}

/// Hand the system back only if it satisfies every structural invariant.
fn validated(system: LambdaGraphSystem) -> Result<LambdaGraphSystem, Failure> {
    match validate_lgs(&system) {
        Ok(()) => Ok(system),
        Err(errors) => {
            let shown: Vec<String> = errors.iter().take(5).map(|e| e.to_string()).collect();
            Err(Failure::Validation(format!(
                "{} failed validation: {}",
                system.name,
                shown.join("; ")
            )))
        }
    }
}

/// Print the report and, under `--out`, write it and any requested graph
/// export.  Stdout and the report artifact carry identical bytes.
fn emit(
    system: &LambdaGraphSystem,
    report: &EntropyReport,
    opts: &BuildOpts,
) -> Result<(), Failure> {
    if opts.export.is_some() && opts.out.is_none() {
        return Err(Failure::Validation(
            "--export writes files and therefore requires --out".into(),
        ));
    }
    let text = match opts.report {
        ReportFormat::Text => report.summary(),
        ReportFormat::Csv => report_csv(system, report),
        ReportFormat::Json => pretty(&json!({
            "system": system.name,
            "report": report,
        })),
    };
    print!("{text}");
    if let Some(dir) = &opts.out {
        let stem = slug(&system.name);
        write_artifact(dir, &format!("{stem}-report.{}", opts.report.extension()), &text)?;
        match opts.export {
            Some(ExportFormat::Dot) => {
                write_artifact(dir, &format!("{stem}.dot"), &system.to_dot(system.top_level()))?
            }
            Some(ExportFormat::Json) => {
                write_artifact(dir, &format!("{stem}.json"), &pretty(&system.to_json()))?
            }
            None => {}
        }
    }
    Ok(())
}

fn pretty(value: &serde_json::Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    text
}

/// File-name-safe version of a system name.
fn slug(name: &str) -> String {
    let mut out = String::new();
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.is_empty() && !out.ends_with('-') {
            out.push('-');
        }
    }
    out.trim_end_matches('-').to_string()
}

fn write_artifact(dir: &Path, file: &str, contents: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(file);
    fs::write(&path, contents).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}
