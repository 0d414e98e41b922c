//! Command-line front end. Every command produces rows of named fields,
//! written as JSON or CSV to stdout and to an output file.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ghz_amp::adversary::{
    alternating_superset_source, appendix_binomial_bias, bias_bound, build_alternating_tree,
    build_resend_tree, build_risking_tree, cheat_probability_bound, cheatable_mass, guess_success,
    r_h, resend_bias_bruteforce, resend_bias_closed_form, zero_error_attack, AttackTree,
    Thresholds, MAX_BRUTEFORCE_ROUNDS,
};
use ghz_amp::engine::{self, sample_transcripts, write_transcripts_csv, Mode, ProtocolConfig, Source};
use ghz_amp::extractor::flat_family_check;
use ghz_amp::game::classical_win_value;
use ghz_amp::Execution;
use num_rational::Ratio;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

const OUT_DIR_ENV: &str = "GHZ_AMP_OUT_DIR";

type Row = Map<String, Value>;

#[derive(Parser)]
#[command(name = "ghz-amp", version, about = "Randomness amplification with GHZ-game rounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct OutputArgs {
    /// RNG seed, echoed in every report.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file. Defaults to `<out-dir>/<command>.<format>`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Directory for the default output file.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = "results")]
    out_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the rate thresholds.
    Thresholds,
    /// Cheating-probability and bias bounds over a grid of (n, ε).
    BiasCurve {
        /// Round counts, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        /// Rate excesses over R_H, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        epsilon: Vec<f64>,
    },
    /// Run one experiment.
    Run {
        #[arg(value_enum)]
        kind: Kind,
        #[command(flatten)]
        params: RunParams,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Thresholds,
    ClassicalBound,
    HonestRun,
    ResendAttack,
    RiskingAttack,
    ExtractorBound,
    AppendixBias,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Thresholds => "thresholds",
            Kind::ClassicalBound => "classical-bound",
            Kind::HonestRun => "honest-run",
            Kind::ResendAttack => "resend-attack",
            Kind::RiskingAttack => "risking-attack",
            Kind::ExtractorBound => "extractor-bound",
            Kind::AppendixBias => "appendix-bias",
        }
    }
}

#[derive(Args)]
struct RunParams {
    /// Number of rounds (max string length for extractor-bound).
    #[arg(long)]
    n: Option<usize>,
    /// Target rate excess for risking-attack.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Rounds of the appendix bias.
    #[arg(long)]
    k: Option<usize>,
    /// Size of the re-sent set for appendix-bias.
    #[arg(long)]
    s: Option<usize>,
    /// Monte Carlo trials (cases for extractor-bound).
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Also write Monte Carlo transcripts as CSV.
    #[arg(long)]
    transcripts: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Exact,
    Mc,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exact => Mode::Exact,
            ModeArg::Mc => Mode::MonteCarlo,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let seed = cli.output.seed;
    let (name, rows, single) = match &cli.command {
        Command::Thresholds => ("thresholds", vec![thresholds(seed)], true),
        Command::BiasCurve { n, epsilon } => ("bias-curve", bias_curve(n, epsilon, seed)?, false),
        Command::Run { kind, params } => {
            let row = run_kind(*kind, params, seed)
                .with_context(|| format!("run {}", kind.name()))?;
            (kind.name(), vec![row], true)
        }
    };
    let text = match cli.output.format {
        Format::Json => {
            let value = if single {
                Value::Object(rows.into_iter().next().unwrap_or_default())
            } else {
                Value::Array(rows.into_iter().map(Value::Object).collect())
            };
            serde_json::to_string_pretty(&value)? + "\n"
        }
        Format::Csv => to_csv(&rows)?,
    };
    let path = match &cli.output.out {
        Some(p) => p.clone(),
        None => cli.output.out_dir.join(format!("{name}.{}", cli.output.format.extension())),
    };
    write_file(&path, text.as_bytes())?;
    std::io::stdout().write_all(text.as_bytes())?;
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cli::output: creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("cli::output: writing {}", path.display()))
}

/// Header is the key order of the first row; nested values become JSON text.
fn to_csv(rows: &[Row]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let Some(first) = rows.first() else {
        return Ok(String::new());
    };
    let header: Vec<&String> = first.keys().collect();
    w.write_record(&header)?;
    for row in rows {
        w.write_record(header.iter().map(|k| match row.get(*k) {
            None | Some(Value::Null) => String::new(),
            Some(Value::String(s)) => s.clone(),
            Some(v) => v.to_string(),
        }))?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn object(value: Value) -> Row {
    match value {
        Value::Object(m) => m,
        _ => unreachable!("rows are built from json objects"),
    }
}

fn ratio_text<T: std::fmt::Display>(r: &Ratio<T>) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

fn require<T: Copy>(value: Option<T>, flag: &str) -> Result<T> {
    value.with_context(|| format!("cli::run: --{flag} is required"))
}

fn thresholds(seed: u64) -> Row {
    let t = Thresholds::compute();
    object(json!({
        "r_trivial": t.r_trivial,
        "r_max": t.r_max,
        "r_h": t.r_h,
        "seed": seed,
        "generator": "adversary::Thresholds::compute",
    }))
}

const EXACT_CURVE_MAX_N: usize = 10;

fn bias_curve(ns: &[usize], epsilons: &[f64], seed: u64) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    for &n in ns {
        if n == 0 {
            bail!("adversary::bias_bound: n must be positive");
        }
        for &eps in epsilons {
            if eps.is_nan() || eps < 0.0 {
                bail!("adversary::bias_bound: epsilon must be non-negative, got {eps}");
            }
            let stream = rows.len() as u64;
            let exact = if n % 2 == 0 && n <= EXACT_CURVE_MAX_N {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(stream);
                match alternating_superset_source(n, eps, &mut rng) {
                    Ok(src) => {
                        let attack = zero_error_attack(&src).context("adversary::zero_error_attack")?;
                        let report = engine::run_exact(&attack.config()?, Execution::default())
                            .context("engine::run_exact")?;
                        Some((src.min_entropy_rate()?, cheatable_mass(&src), report.bias))
                    }
                    Err(_) => None,
                }
            } else {
                None
            };
            rows.push(object(json!({
                "n": n,
                "epsilon": eps,
                "p_cheat_bound": cheat_probability_bound(eps, n),
                "bias_bound": bias_bound(eps, n),
                "source_rate": exact.map(|e| e.0),
                "cheatable_mass": exact.map(|e| e.1),
                "exact_bias": exact.and_then(|e| e.2),
                "seed": seed,
                "generator": "adversary::bias_bound",
            })));
        }
    }
    Ok(rows)
}

fn run_kind(kind: Kind, p: &RunParams, seed: u64) -> Result<Row> {
    match kind {
        Kind::Thresholds => Ok(thresholds(seed)),
        Kind::ClassicalBound => {
            let v = classical_win_value();
            Ok(object(json!({
                "value": ratio_text(&v.max),
                "value_f64": *v.max.numer() as f64 / *v.max.denom() as f64,
                "maximizers": v.maximizers.len(),
                "strategies": v.scored,
                "seed": seed,
                "generator": "game::classical_win_value",
            })))
        }
        Kind::HonestRun => {
            let n = require(p.n, "n")?;
            let cfg = ProtocolConfig::honest(Source::uniform(n)).context("engine::ProtocolConfig::honest")?;
            protocol_run(&cfg, p, seed, Row::new())
        }
        Kind::ResendAttack => {
            let n = require(p.n, "n")?;
            let tree = build_resend_tree(n).context("adversary::build_resend_tree")?;
            let extra = attack_fields(&tree)?;
            protocol_run(&tree.config()?, p, seed, extra)
        }
        Kind::RiskingAttack => {
            let n = require(p.n, "n")?;
            let base = build_alternating_tree(n).context("adversary::build_alternating_tree")?;
            let tree = risking_for(&base, n, p.epsilon)?;
            let mut extra = attack_fields(&tree)?;
            let rate = tree.tree().min_entropy_rate()?;
            let eps = rate - r_h();
            extra.insert("abort_leaves".into(), json!(tree.abort_leaf_count()));
            extra.insert("induced_epsilon".into(), json!(eps));
            extra.insert(
                "p_guess".into(),
                json!(guess_success(rate, n).context("adversary::guess_success")?),
            );
            extra.insert("bias_bound".into(), json!(bias_bound(eps.max(0.0), n)));
            protocol_run(&tree.config()?, p, seed, extra)
        }
        Kind::ExtractorBound => {
            let max_n = require(p.n, "n")?;
            let cases = require(p.trials, "trials")?;
            let r = flat_family_check(cases, max_n, seed, Execution::default())
                .context("extractor::flat_family_check")?;
            Ok(object(json!({
                "cases": r.cases,
                "max_n": r.max_n,
                "violations": r.violations,
                "worst_ratio": r.worst_ratio,
                "worst_excess": r.worst_excess,
                "holds": r.violations == 0,
                "seed": seed,
                "generator": "extractor::flat_family_check",
            })))
        }
        Kind::AppendixBias => {
            let k = require(p.k, "k")?;
            let s = require(p.s, "s")?;
            let closed = resend_bias_closed_form(k, s).context("adversary::resend_bias_closed_form")?;
            let binomial = appendix_binomial_bias(k, s).context("adversary::appendix_binomial_bias")?;
            let brute = if k <= MAX_BRUTEFORCE_ROUNDS {
                let set: Vec<usize> = (0..s).collect();
                Some(
                    resend_bias_bruteforce(k, &set, Execution::default())
                        .context("adversary::resend_bias_bruteforce")?,
                )
            } else {
                None
            };
            let same = |r: (u128, u128)| r == (*closed.numer() as u128, *closed.denom() as u128);
            let agree = same((*binomial.numer(), *binomial.denom()))
                && brute.is_none_or(|b| same((*b.numer() as u128, *b.denom() as u128)));
            Ok(object(json!({
                "k": k,
                "s": s,
                "closed_form": ratio_text(&closed),
                "bruteforce": brute.map(|b| ratio_text(&b)),
                "binomial_sum": ratio_text(&binomial),
                "bias": *closed.numer() as f64 / *closed.denom() as f64,
                "agree": agree,
                "seed": seed,
                "generator": "adversary::appendix_binomial_bias",
            })))
        }
    }
}

fn attack_fields(tree: &AttackTree) -> Result<Row> {
    let mut row = Row::new();
    row.insert("leaves".into(), json!(tree.leaf_count()));
    row.insert("source_rate".into(), json!(tree.tree().min_entropy_rate()?));
    Ok(row)
}

/// With no target every dishonest vertex is augmented. Otherwise the
/// deepest vertices go first until the rate reaches `R_H + ε`.
fn risking_for(base: &AttackTree, n: usize, epsilon: Option<f64>) -> Result<AttackTree> {
    let mut targets = base.augmentable();
    targets.sort_by_key(|&v| std::cmp::Reverse(base.tree().depth(v)));
    let build = |m: usize| build_risking_tree(base, &targets[..m]).context("adversary::build_risking_tree");
    let Some(eps) = epsilon else {
        return build(targets.len());
    };
    if eps.is_nan() || eps < 0.0 {
        bail!("adversary::build_risking_tree: epsilon must be non-negative, got {eps}");
    }
    let rate = |t: &AttackTree| t.tree().min_entropy_rate();
    let full = build(targets.len())?;
    if rate(&full)? < r_h() + eps - 1e-12 {
        bail!(
            "adversary::build_risking_tree: n = {n} cannot reach rate R_H + {eps} (max {:.6})",
            rate(&full)?
        );
    }
    let (mut lo, mut hi) = (0, targets.len());
    while lo < hi {
        let mid = (lo + hi) / 2;
        if rate(&build(mid)?)? >= r_h() + eps - 1e-12 {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    build(lo)
}

fn protocol_run(cfg: &ProtocolConfig, p: &RunParams, seed: u64, extra: Row) -> Result<Row> {
    let mode: Mode = require(p.mode, "mode")?.into();
    let trials = match mode {
        Mode::Exact => 0,
        Mode::MonteCarlo => require(p.trials, "trials")?,
    };
    let mut report = engine::run(cfg, mode, trials, seed, Execution::default()).context(match mode {
        Mode::Exact => "engine::run_exact",
        Mode::MonteCarlo => "engine::run_montecarlo",
    })?;
    report.seed = Some(seed);
    let mut row = object(serde_json::to_value(&report)?);
    let generator = row.remove("generator");
    row.extend(extra);
    row.insert("generator".into(), generator.unwrap_or(Value::Null));
    if let Some(path) = &p.transcripts {
        if mode != Mode::MonteCarlo {
            bail!("cli::run: --transcripts needs --mode mc");
        }
        let ts = sample_transcripts(cfg, trials, seed).context("engine::sample_transcripts")?;
        let mut buf = Vec::new();
        write_transcripts_csv(&mut buf, &ts).context("engine::write_transcripts_csv")?;
        write_file(path, &buf)?;
    }
    Ok(row)
}
