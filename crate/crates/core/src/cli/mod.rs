//! Command-line front end.

mod config;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use normgap::harness::{
    estimate_cn, oracle_instance, oracle_suite, ratio_report, OracleSummary, TupleSequence, WordSelection,
};
use normgap::rng::{derive_seed, domain};
use normgap::superop::pair_norm;
use normgap::linalg::UNITARY_TOL;
use normgap::tuple_io::{load_tuple, save_json, save_utpl};
use normgap::words::{convergence_report_from_tables, moment_table, sampled_moment_table, MomentTable};
use normgap::{check_unitary, Error, Result};

use config::{resolve_ensemble, CommonArgs, EnsembleArgs, Format, RunConfig, Settings};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_UNCONVERGED: u8 = 3;
pub const EXIT_ORACLE: u8 = 4;

/// Largest accepted gap between the iterative and dense norms.
const ORACLE_TOL: f64 = 1e-8;

#[derive(Parser, Debug)]
#[command(name = "normgap", version, about = "Min tensor norms of unitary tuples and their moment statistics")]
pub struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample tuples and write them as .utpl files into --out (a directory)
    Sample(SampleArgs),
    /// Min norm of sum_i u_i ⊗ conj(v_i) for two tuple files
    Norm(NormArgs),
    /// Sup of pair norms over distinct members of a sequence
    Cn(SequenceArgs),
    /// Moment tables and distribution-convergence report
    Moments(MomentsArgs),
    /// Direct-sum min norm and min/max ratio report
    Ratio(RatioArgs),
    /// Compare the iterative solver with dense SVD on small random instances
    OracleCheck(OracleArgs),
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[command(flatten)]
    ensemble: EnsembleArgs,
    /// Also write a JSON mirror next to each .utpl file
    #[arg(long)]
    mirror_json: bool,
}

#[derive(Args, Debug)]
struct NormArgs {
    left: PathBuf,
    right: PathBuf,
}

#[derive(Args, Debug)]
struct SequenceArgs {
    #[command(flatten)]
    ensemble: EnsembleArgs,
    /// Tuple files; when absent the sequence is sampled
    inputs: Vec<PathBuf>,
}

#[derive(Args, Debug)]
struct MomentsArgs {
    #[command(flatten)]
    seq: SequenceArgs,
    /// Use this many uniformly sampled reduced words instead of all of them
    #[arg(long)]
    sample_words: Option<usize>,
    /// Distance bound for the greedy convergent subsequence [default: 0.1]
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Args, Debug)]
struct RatioArgs {
    #[command(flatten)]
    seq: SequenceArgs,
    /// Number of leading tuples in the first direct sum [default: half]
    #[arg(long)]
    split: Option<usize>,
    #[arg(long)]
    sample_words: Option<usize>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// Number of random instances [default: 50]
    #[arg(long)]
    instances: Option<usize>,
    /// Extra tuple files, each checked against itself
    inputs: Vec<PathBuf>,
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code() as u8
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    let cfg = match &cli.common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let s = Settings::resolve(&cli.common, &cfg)?;
    match cli.command {
        Command::Sample(a) => sample(&s, &cfg, &a),
        Command::Norm(a) => norm(&s, &a),
        Command::Cn(a) => cn(&s, &cfg, &a),
        Command::Moments(a) => moments(&s, &cfg, &a),
        Command::Ratio(a) => ratio(&s, &cfg, &a),
        Command::OracleCheck(a) => oracle(&s, &cfg, &a),
    }
}

fn write_text(s: &Settings, text: &str) -> Result<()> {
    match &s.out {
        Some(path) => fs::write(path, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn emit_json(s: &Settings, value: impl Serialize) -> Result<()> {
    let mut value = serde_json::to_value(value)?;
    if s.timestamp {
        if let Value::Object(map) = &mut value {
            let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
            map.insert("timestamp".into(), json!(secs));
        }
    }
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    write_text(s, &text)
}

fn emit_csv(s: &Settings, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::Invalid(format!("csv: {e}"));
    w.write_record(header).map_err(to_err)?;
    for row in rows {
        w.write_record(&row).map_err(to_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Invalid(format!("csv: {e}")))?;
    write_text(s, &String::from_utf8_lossy(&bytes))
}

fn inputs<'a>(args: &'a SequenceArgs, cfg: &'a RunConfig) -> &'a [PathBuf] {
    if args.inputs.is_empty() {
        cfg.inputs.as_deref().unwrap_or(&[])
    } else {
        &args.inputs
    }
}

/// Loads the positional files, or samples from the ensemble flags.
fn sequence(
    s: &Settings,
    cfg: &RunConfig,
    args: &SequenceArgs,
    default_count: usize,
) -> Result<(TupleSequence, Value)> {
    let files = inputs(args, cfg);
    if !files.is_empty() {
        return Ok((TupleSequence::load(files)?, json!({ "files": files })));
    }
    let e = resolve_ensemble(&args.ensemble, cfg, default_count)?;
    let seq = TupleSequence::sample(e.kind, e.n, &e.dims, s.seed)?;
    Ok((seq, json!({ "sampled": e, "seed": s.seed })))
}

fn sample(s: &Settings, cfg: &RunConfig, a: &SampleArgs) -> Result<u8> {
    let e = resolve_ensemble(&a.ensemble, cfg, 1)?;
    let seq = TupleSequence::sample(e.kind, e.n, &e.dims, s.seed)?;
    let dir = s.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    let mut stdout = io::stdout().lock();
    for (m, t) in seq.tuples().iter().enumerate() {
        let path = dir.join(format!("tuple_{m:03}.utpl"));
        save_utpl(t, &path)?;
        if a.mirror_json {
            save_json(t, path.with_extension("json"))?;
        }
        let defect = check_unitary(t, UNITARY_TOL).max_defect;
        writeln!(stdout, "{}\t{}\tdefect={defect:.3e}", path.display(), t.label())?;
    }
    Ok(EXIT_OK)
}

fn norm(s: &Settings, a: &NormArgs) -> Result<u8> {
    let u = load_tuple(&a.left)?;
    let v = load_tuple(&a.right)?;
    let est = pair_norm(&u, &v, &s.solver())?;
    match s.format {
        Format::Json => emit_json(s, est)?,
        Format::Csv => emit_csv(
            s,
            &["value", "residual", "iterations", "restarts", "converged"],
            [vec![
                est.value.to_string(),
                est.residual.to_string(),
                est.iterations.to_string(),
                est.restarts.to_string(),
                est.converged.to_string(),
            ]],
        )?,
    }
    Ok(if est.converged { EXIT_OK } else { EXIT_UNCONVERGED })
}

fn cn(s: &Settings, cfg: &RunConfig, a: &SequenceArgs) -> Result<u8> {
    let (seq, source) = sequence(s, cfg, a, 4)?;
    let est = estimate_cn(&seq, &s.solver(), s.jobs)?;
    match s.format {
        Format::Json => emit_json(s, json!({ "config": s, "source": source, "result": est }))?,
        Format::Csv => {
            let mut buf = Vec::new();
            est.write_pair_csv(&mut buf)?;
            write_text(s, &String::from_utf8_lossy(&buf))?;
        }
    }
    Ok(if est.unconverged == 0 { EXIT_OK } else { EXIT_UNCONVERGED })
}

fn word_selection(s: &Settings, count: Option<usize>) -> WordSelection {
    match count {
        Some(count) => WordSelection::Sampled { count, seed: derive_seed(s.seed, domain::WORD_SAMPLE, 0) },
        None => WordSelection::All,
    }
}

fn moments(s: &Settings, cfg: &RunConfig, a: &MomentsArgs) -> Result<u8> {
    let (seq, source) = sequence(s, cfg, &a.seq, 1)?;
    let words = word_selection(s, a.sample_words.or(cfg.sample_words));
    let threshold = a.threshold.or(cfg.threshold).unwrap_or(0.1);
    if !(threshold.is_finite() && threshold >= 0.0) {
        return Err(Error::Invalid(format!("threshold must be finite and nonnegative, got {threshold}")));
    }
    let tables = seq
        .tuples()
        .iter()
        .map(|t| match words {
            WordSelection::All => moment_table(t, s.degree),
            WordSelection::Sampled { count, seed } => sampled_moment_table(t, s.degree, count, seed),
        })
        .collect::<Result<Vec<MomentTable>>>()?;
    match s.format {
        Format::Json => {
            let report = if tables.len() >= 2 { Some(convergence_report_from_tables(&tables, threshold)?) } else { None };
            let to_ref = tables
                .iter()
                .map(|t| normgap::words::distance(t, &t.free_haar_reference()))
                .collect::<Result<Vec<_>>>()?;
            emit_json(
                s,
                json!({
                    "config": s,
                    "source": source,
                    "tables": tables,
                    "distance_to_free_haar": to_ref,
                    "convergence": report,
                }),
            )?;
        }
        Format::Csv => {
            let rows = tables.iter().enumerate().flat_map(|(m, t)| {
                t.iter().map(move |(w, z)| vec![m.to_string(), w.to_string(), z.re.to_string(), z.im.to_string()])
            });
            emit_csv(s, &["tuple", "word", "re", "im"], rows)?;
        }
    }
    Ok(EXIT_OK)
}

fn ratio(s: &Settings, cfg: &RunConfig, a: &RatioArgs) -> Result<u8> {
    let (seq, source) = sequence(s, cfg, &a.seq, 8)?;
    let split = a.split.or(cfg.split).unwrap_or(seq.len() / 2);
    let (left, right) = seq.split(split)?;
    let words = word_selection(s, a.sample_words.or(cfg.sample_words));
    let r = ratio_report(&left, &right, s.degree, words, &s.solver(), s.jobs)?;
    match s.format {
        Format::Json => emit_json(s, json!({ "config": s, "source": source, "split": split, "result": r }))?,
        Format::Csv => {
            let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
            emit_csv(
                s,
                &[
                    "n",
                    "c_emp",
                    "witness_m",
                    "witness_m_prime",
                    "ratio_lower_bound",
                    "known_ratio_lower",
                    "known_ratio_upper",
                    "distribution_gap",
                    "unconverged",
                ],
                [vec![
                    r.n.to_string(),
                    r.c_emp.to_string(),
                    r.witness.0.to_string(),
                    r.witness.1.to_string(),
                    opt(r.ratio_lower_bound),
                    opt(r.known_ratio_lower),
                    r.known_ratio_upper.to_string(),
                    r.distribution_gap.value.to_string(),
                    r.unconverged.to_string(),
                ]],
            )?
        }
    }
    Ok(if r.unconverged == 0 { EXIT_OK } else { EXIT_UNCONVERGED })
}

fn oracle(s: &Settings, cfg: &RunConfig, a: &OracleArgs) -> Result<u8> {
    let count = a.instances.or(cfg.instances).unwrap_or(50);
    // Load every file first so a bad input fails before any work is done.
    let files: Vec<(&Path, _)> =
        a.inputs.iter().map(|p| Ok((p.as_path(), load_tuple(p)?))).collect::<Result<_>>()?;
    let mut summary = oracle_suite(count, s.seed, &s.solver())?;
    if !files.is_empty() {
        let mut all = summary.instances;
        for (path, t) in &files {
            all.push(oracle_instance(t, t, &s.solver(), path.display().to_string())?);
        }
        summary = OracleSummary::from_instances(all);
    }
    let passed = summary.max_discrepancy <= ORACLE_TOL;
    eprintln!(
        "oracle-check: {} instances, max discrepancy {:.3e} ({})",
        summary.instances.len(),
        summary.max_discrepancy,
        if passed { "ok" } else { "FAILED" }
    );
    match s.format {
        Format::Json => emit_json(
            s,
            json!({ "config": s, "tolerance": ORACLE_TOL, "passed": passed, "result": summary }),
        )?,
        Format::Csv => {
            let rows = summary.instances.iter().map(|i| {
                vec![
                    i.label.clone(),
                    i.n.to_string(),
                    i.left_dim.to_string(),
                    i.right_dim.to_string(),
                    i.iterative.to_string(),
                    i.dense.to_string(),
                    i.discrepancy.to_string(),
                    i.converged.to_string(),
                ]
            });
            emit_csv(s, &["label", "n", "left_dim", "right_dim", "iterative", "dense", "discrepancy", "converged"], rows)?;
        }
    }
    Ok(if !passed {
        EXIT_ORACLE
    } else if summary.unconverged > 0 {
        EXIT_UNCONVERGED
    } else {
        EXIT_OK
    })
}
