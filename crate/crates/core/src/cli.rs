//! Command-line front end.
//!
//! Every subcommand writes its primary output (CSV, JSON or a single line)
//! and a manifest recording the subcommand, its parameters, the seed, the
//! tool version and the output paths. Exit codes: 0 success, 1 a checked
//! property was violated, 2 input error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::accessible_info::lemma_accy_corpus;
use crate::boxes::{classify, max_chsh, BipartiteBox};
use crate::coding::{code_experiment, ClassicalChannel, Decoder};
use crate::error::{invalid, Result};
use crate::gbit::emit_boundary;
use crate::rac::{ic_threshold_scan, j_monte_carlo, RacConfig, RacResource};
use crate::rng::derive_seed;

/// Slack below which `lemma-accy` reports a violation.
pub const LEMMA_SLACK_TOL: f64 = -1e-9;

#[derive(Debug, Parser)]
#[command(name = "infocausal", version, about = "No-signalling boxes, information causality and coding experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// CHSH value and classification of a box read from JSON.
    Chsh(ChshArgs),
    /// Smallest pyramid depth at which J exceeds 1, over a grid of E.
    IcScan(IcScanArgs),
    /// Chain-rule and qubit boundaries of the one-gbit bias region as CSV.
    GbitBoundary(GbitArgs),
    /// Random-code error probabilities over a discrete memoryless channel.
    CodeSim(CodeSimArgs),
    /// Minimum slack of I_acc(X:S,Y) ≤ H(Y) over random no-signalling systems.
    LemmaAccy(LemmaArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct ChshArgs {
    /// Box file: {"nx":2,"ny":2,"na":2,"nb":2,"p":[x][y][a][b]}.
    pub input: PathBuf,
    /// Manifest path [default: chsh.manifest.json].
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct IcScanArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub emin: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub emax: f64,
    /// Number of grid points, endpoints included.
    #[arg(long)]
    pub steps: usize,
    /// Deepest pyramid tried.
    #[arg(long)]
    pub kmax: u32,
    /// Monte-Carlo trials per row; closed form when absent.
    #[arg(long, requires = "seed")]
    pub trials: Option<u64>,
    /// Master seed for Monte-Carlo rows.
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV path [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Manifest path [default: <out>.manifest.json or ic-scan.manifest.json].
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct GbitArgs {
    /// Number of α grid points, endpoints included.
    #[arg(long)]
    pub steps: usize,
    /// CSV path [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Manifest path [default: <out>.manifest.json or gbit-boundary.manifest.json].
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CodeSimArgs {
    /// bsc:<p>, bec:<p> or a JSON row-stochastic matrix.
    #[arg(long)]
    pub channel: String,
    /// Target rate; N = round(2^{lR}).
    #[arg(long)]
    pub rate: f64,
    /// Comma-separated blocklengths.
    #[arg(long, value_delimiter = ',', required = true)]
    pub lengths: Vec<usize>,
    /// Random codebooks per blocklength.
    #[arg(long)]
    pub codebooks: usize,
    #[arg(long)]
    pub seed: u64,
    /// Monte-Carlo trials per codebook.
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    /// ml or typical.
    #[arg(long, default_value = "ml")]
    pub decoder: String,
    /// CSV path [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Manifest path [default: <out>.manifest.json or code-sim.manifest.json].
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct LemmaArgs {
    /// Number of random systems.
    #[arg(long)]
    pub trials: u64,
    #[arg(long)]
    pub seed: u64,
    /// Manifest path [default: lemma-accy.manifest.json].
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

/// Everything needed to rerun a command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub parameters: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
struct ChshReport {
    chsh: f64,
    max_chsh: f64,
    signalling: bool,
    local: bool,
    tsirelson_compatible: bool,
}

enum Status {
    Ok,
    Violation,
}

/// Parses `args` and runs the command, writing stdout-bound output to
/// `stdout`. Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli.command, stdout) {
        Ok(Status::Ok) => 0,
        Ok(Status::Violation) => 1,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            2
        }
    }
}

fn execute(command: Command, stdout: &mut dyn Write) -> Result<Status> {
    match command {
        Command::Chsh(a) => chsh(&a, stdout),
        Command::IcScan(a) => ic_scan(&a, stdout),
        Command::GbitBoundary(a) => gbit_boundary(&a, stdout),
        Command::CodeSim(a) => code_sim(&a, stdout),
        Command::LemmaAccy(a) => lemma_accy(&a, stdout),
    }
}

/// `--manifest`, else `<out>.manifest.json`, else `<subcommand>.manifest.json`.
fn manifest_path(explicit: &Option<PathBuf>, out: &Option<PathBuf>, subcommand: &str) -> PathBuf {
    match (explicit, out) {
        (Some(m), _) => m.clone(),
        (None, Some(o)) => {
            let mut s = o.as_os_str().to_owned();
            s.push(".manifest.json");
            PathBuf::from(s)
        }
        (None, None) => PathBuf::from(format!("{subcommand}.manifest.json")),
    }
}

fn write_manifest<P: Serialize>(
    subcommand: &str,
    params: &P,
    seed: Option<u64>,
    out: &Option<PathBuf>,
    explicit: &Option<PathBuf>,
) -> Result<()> {
    let path = manifest_path(explicit, out, subcommand);
    let manifest = RunManifest {
        subcommand: subcommand.into(),
        parameters: serde_json::to_value(params)?,
        seed,
        version: env!("CARGO_PKG_VERSION").into(),
        outputs: vec![out.as_deref().map_or_else(|| "-".into(), |p| p.display().to_string())],
    };
    let mut f = BufWriter::new(File::create(&path)?);
    serde_json::to_writer_pretty(&mut f, &manifest)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

/// Runs `body` against the file at `out`, or against `stdout`.
fn with_output<T>(
    out: &Option<PathBuf>,
    stdout: &mut dyn Write,
    body: impl FnOnce(&mut dyn Write) -> Result<T>,
) -> Result<T> {
    match out {
        Some(path) => {
            let mut f = BufWriter::new(File::create(path)?);
            let v = body(&mut f)?;
            f.flush()?;
            Ok(v)
        }
        None => body(stdout),
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

fn chsh(a: &ChshArgs, stdout: &mut dyn Write) -> Result<Status> {
    let bx = BipartiteBox::from_json(&read_to_string(&a.input)?)?;
    let v = classify(&bx)?;
    let report = ChshReport {
        chsh: v.chsh,
        max_chsh: max_chsh(&bx)?,
        signalling: v.signalling,
        local: v.local,
        tsirelson_compatible: v.tsirelson_compatible,
    };
    writeln!(stdout, "{}", serde_json::to_string(&report)?)?;
    write_manifest("chsh", a, None, &None, &a.manifest)?;
    Ok(Status::Ok)
}

fn ic_scan(a: &IcScanArgs, stdout: &mut dyn Write) -> Result<Status> {
    let rows = ic_threshold_scan(a.emin, a.emax, a.steps, a.kmax)?;
    let mut lines = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let k = row.depth.map_or_else(|| "none".to_string(), |d| d.to_string());
        let (result, seed) = match (a.trials, a.seed) {
            (Some(trials), Some(seed)) => {
                let row_seed = derive_seed(seed, i as u64);
                let cfg = RacConfig {
                    depth: row.result.depth,
                    resource: RacResource::Isotropic(row.e),
                    trials,
                    seed: row_seed,
                };
                (j_monte_carlo(&cfg)?, row_seed.to_string())
            }
            _ => (row.result, String::new()),
        };
        lines.push(format!(
            "{},{k},{},{},{},{},{seed}",
            row.e, result.j, result.delta_ic, result.per_bit_success, result.trials
        ));
    }
    with_output(&a.out, stdout, |w| {
        writeln!(w, "E,k,J,delta_ic,per_bit_success,trials,seed")?;
        for l in &lines {
            writeln!(w, "{l}")?;
        }
        Ok(())
    })?;
    write_manifest("ic-scan", a, a.seed, &a.out, &a.manifest)?;
    Ok(Status::Ok)
}

fn gbit_boundary(a: &GbitArgs, stdout: &mut dyn Write) -> Result<Status> {
    if a.steps < 2 {
        return Err(invalid("--steps must be at least 2"));
    }
    with_output(&a.out, stdout, |w| emit_boundary(a.steps, w).map(|_| ()))?;
    write_manifest("gbit-boundary", a, None, &a.out, &a.manifest)?;
    Ok(Status::Ok)
}

fn code_sim(a: &CodeSimArgs, stdout: &mut dyn Write) -> Result<Status> {
    let channel = ClassicalChannel::parse(&a.channel)?;
    let decoder = Decoder::parse(&a.decoder)?;
    if a.codebooks == 0 {
        return Err(invalid("--codebooks must be at least 1"));
    }
    let mut rows = Vec::new();
    for &l in &a.lengths {
        rows.extend(code_experiment(&channel, a.rate, l, a.codebooks, a.trials, decoder, a.seed)?);
    }
    with_output(&a.out, stdout, |w| {
        writeln!(w, "l,N,rate,pe,pe_stderr,tolerance,decoder,seed")?;
        for r in &rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.blocklength, r.n_messages, r.stats.rate, r.stats.pe, r.stats.pe_stderr, r.stats.tolerance, r.decoder, r.seed
            )?;
        }
        Ok(())
    })?;
    write_manifest("code-sim", a, Some(a.seed), &a.out, &a.manifest)?;
    Ok(Status::Ok)
}

fn lemma_accy(a: &LemmaArgs, stdout: &mut dyn Write) -> Result<Status> {
    if a.trials == 0 {
        return Err(invalid("--trials must be at least 1"));
    }
    let s = lemma_accy_corpus(a.trials, a.seed)?;
    writeln!(stdout, "min_slack={:e} systems={} worst={} max_i_acc={:e}", s.min_slack, s.systems, s.worst, s.max_i_acc)?;
    write_manifest("lemma-accy", a, Some(a.seed), &None, &a.manifest)?;
    Ok(if s.min_slack < LEMMA_SLACK_TOL { Status::Violation } else { Status::Ok })
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(args, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn manifest_locations() {
        let out = Some(PathBuf::from("dir/curve.csv"));
        assert_eq!(manifest_path(&None, &out, "x"), PathBuf::from("dir/curve.csv.manifest.json"));
        assert_eq!(manifest_path(&None, &None, "ic-scan"), PathBuf::from("ic-scan.manifest.json"));
        let m = Some(PathBuf::from("m.json"));
        assert_eq!(manifest_path(&m, &out, "x"), PathBuf::from("m.json"));
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run_args(&["infocausal", "ic-scan", "--emin", "0.6"]).0, 2);
        assert_eq!(run_args(&["infocausal", "frobnicate"]).0, 2);
        // trials without a seed
        let (code, _, err) = run_args(&[
            "infocausal", "ic-scan", "--emin", "0.7", "--emax", "0.8", "--steps", "2", "--kmax", "3", "--trials", "10",
        ]);
        assert_eq!(code, 2);
        assert!(err.contains("--seed"));
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = run_args(&["infocausal", "code-sim", "--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("--lengths"));
    }
}
