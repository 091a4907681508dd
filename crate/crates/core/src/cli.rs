//! The `relbc` command line: `validate`, `run`, `attack`, `tables`.
//!
//! Every command is a pure function of the config file, its flags and the
//! seed. Results go to stdout as CSV, or to `--out` (a CSV plus a JSON run
//! record next to it). Relative output paths are resolved under
//! `$RELBC_OUT_DIR` when it is set.
//!
//! Exit codes: 0 success, 1 domain failure (validation or a rejected
//! configuration), 2 usage or I/O error.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::attacks::{run_delay_attack, run_early_measurement, run_parity_flip, AttackSpec};
use crate::channel::validate_channel;
use crate::coding::{
    block_error, brute_force_parity_count, cheat_probability, count_parity_strings, early_guess_bound, parity_error,
    shannon_info, MAX_BRUTE_FORCE_BITS,
};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::protocol::run_honest;
use crate::stats::Tally;

pub const OUT_DIR_ENV: &str = "RELBC_OUT_DIR";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "relbc", version, about = "Relativistic quantum bit commitment simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the configured channel against the causality and localization requirements.
    Validate { config: PathBuf },
    /// Honest protocol runs.
    Run {
        config: PathBuf,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cheating strategies and their detection rates.
    Attack {
        config: PathBuf,
        #[arg(long, value_enum)]
        kind: AttackKind,
        /// Delay, in tau units or as a multiple of tau0 (`tau0`, `2tau0`).
        #[arg(long, value_parser = parse_delay)]
        s: Option<Delay>,
        #[arg(long, default_value_t = 0)]
        block: usize,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulated combinatorics of the block code.
    Tables {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long, default_value_t = 10)]
        n_max: usize,
        #[arg(long, default_value_t = 10)]
        k_max: usize,
        /// Largest `N k` for the counting table.
        #[arg(long, default_value_t = 20)]
        max_bits: usize,
        /// Probability values, comma separated.
        #[arg(long, value_delimiter = ',')]
        p: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AttackKind {
    Early,
    Delay,
    Flip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Eq22,
    Eq25,
    Eq28,
    Eq34,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Delay {
    Absolute(f64),
    Tau0(f64),
}

impl Delay {
    fn resolve(self, tau0: f64) -> f64 {
        match self {
            Delay::Absolute(s) => s,
            Delay::Tau0(m) => m * tau0,
        }
    }
}

fn parse_delay(s: &str) -> std::result::Result<Delay, String> {
    let s = s.trim();
    if let Some(m) = s.strip_suffix("tau0") {
        let m = m.trim_end_matches('*');
        return if m.is_empty() {
            Ok(Delay::Tau0(1.0))
        } else {
            m.parse().map(Delay::Tau0).map_err(|_| format!("bad delay `{s}`"))
        };
    }
    s.parse().map(Delay::Absolute).map_err(|_| format!("bad delay `{s}`"))
}

/// One analytic-vs-empirical comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub name: String,
    pub analytic: Option<f64>,
    pub empirical: f64,
    pub trials: u64,
    pub std_error: f64,
}

impl ExperimentResult {
    fn from_tally(name: &str, analytic: Option<f64>, t: Tally) -> Self {
        Self { name: name.into(), analytic, empirical: t.rate(), trials: t.trials, std_error: t.std_error() }
    }
}

/// Self-describing record written next to each output CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub trials: u64,
    pub attack: Option<AttackSpec>,
    pub config: Config,
    pub results: Vec<ExperimentResult>,
}

/// Parses `args` (program name first) and runs the command.
pub fn execute<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let out: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(out, "{}", e.render());
            return code;
        }
    };
    let out_dir = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    match dispatch(cli.command, out_dir.as_deref(), stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Io(_) => 2,
        _ => 1,
    }
}

fn dispatch(command: Command, out_dir: Option<&Path>, stdout: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Validate { config } => cmd_validate(&config, stdout),
        Command::Run { config, trials, seed, out } => {
            let mut cfg = Config::load(&config)?;
            override_run(&mut cfg, trials, seed);
            let (csv, record) = cmd_run(&cfg)?;
            emit(&csv, &record, resolve_out(out, out_dir, "run.csv").as_deref(), stdout)?;
            Ok(0)
        }
        Command::Attack { config, kind, s, block, trials, seed, out } => {
            let mut cfg = Config::load(&config)?;
            override_run(&mut cfg, trials, seed);
            let attack = match kind {
                AttackKind::Early => AttackSpec::EarlyMeasure,
                AttackKind::Delay => {
                    AttackSpec::Delay { shift: s.unwrap_or(Delay::Tau0(1.0)).resolve(cfg.wavepacket.tau0), block }
                }
                AttackKind::Flip => AttackSpec::ParityFlip { block },
            };
            let (csv, record) = cmd_attack(&cfg, attack)?;
            emit(&csv, &record, resolve_out(out, out_dir, "attack.csv").as_deref(), stdout)?;
            Ok(0)
        }
        Command::Tables { family, n_max, k_max, max_bits, p, out } => {
            let csv = cmd_tables(family, n_max, k_max, max_bits, &p)?;
            match resolve_out(out, out_dir, "tables.csv") {
                Some(path) => write_file(&path, csv.as_bytes())?,
                None => stdout.write_all(csv.as_bytes())?,
            }
            Ok(0)
        }
    }
}

fn override_run(cfg: &mut Config, trials: Option<u64>, seed: Option<u64>) {
    if let Some(t) = trials {
        cfg.run.trials = t;
    }
    if let Some(s) = seed {
        cfg.run.seed = s;
    }
}

/// `--out` wins; a relative path lands under the output directory. Without
/// `--out`, the output directory (if any) receives `default_name`.
pub fn resolve_out(out: Option<PathBuf>, out_dir: Option<&Path>, default_name: &str) -> Option<PathBuf> {
    match (out, out_dir) {
        (Some(p), Some(dir)) if p.is_relative() => Some(dir.join(p)),
        (Some(p), _) => Some(p),
        (None, Some(dir)) => Some(dir.join(default_name)),
        (None, None) => None,
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::Io(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn emit(csv: &str, record: &RunRecord, path: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => {
            write_file(p, csv.as_bytes())?;
            let json = serde_json::to_string_pretty(record).expect("record serializes");
            write_file(&p.with_extension("json"), json.as_bytes())?;
            for r in &record.results {
                writeln!(stdout, "{}", summary_line(r))?;
            }
            writeln!(stdout, "wrote {}", p.display())?;
        }
        None => stdout.write_all(csv.as_bytes())?,
    }
    Ok(())
}

/// Prints the validation report; exit 0 iff every check passes.
pub fn cmd_validate(path: &Path, stdout: &mut dyn Write) -> Result<i32> {
    let cfg = Config::load(path)?;
    let spec = cfg.spec()?;
    let model = cfg.channel_model()?;
    let report = validate_channel(&model, &spec);
    writeln!(stdout, "{report}")?;
    Ok(if report.all_passed() { 0 } else { 1 })
}

fn header(command: &str, cfg: &Config) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# relbc {VERSION}");
    let _ = writeln!(s, "# command: {command}");
    let _ = writeln!(s, "# seed: {}", cfg.run.seed);
    let _ = writeln!(s, "# trials: {}", cfg.run.trials);
    let _ = writeln!(s, "# channel: {}", cfg.channel.name);
    let _ = writeln!(s, "# code: N={} k={}", cfg.code.n_blocks, cfg.code.block_len);
    s
}

fn summary_line(r: &ExperimentResult) -> String {
    let analytic = r.analytic.map_or_else(|| "NA".to_string(), |a| format!("{a}"));
    format!(
        "# summary {} empirical={} analytic={} trials={} std_error={}",
        r.name, r.empirical, analytic, r.trials, r.std_error
    )
}

fn csv_body<S: Serialize>(rows: impl IntoIterator<Item = S>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| Error::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn finish(mut csv: String, results: &[ExperimentResult]) -> String {
    for r in results {
        csv.push_str(&summary_line(r));
        csv.push('\n');
    }
    csv
}

fn record(command: &str, cfg: &Config, attack: Option<AttackSpec>, results: Vec<ExperimentResult>) -> RunRecord {
    RunRecord {
        tool: "relbc".into(),
        version: VERSION.into(),
        command: command.into(),
        seed: cfg.run.seed,
        trials: cfg.run.trials,
        attack,
        config: cfg.clone(),
        results,
    }
}

#[derive(Serialize)]
struct RunRow {
    trial: u64,
    committed_bit: u8,
    recovered_bit: u8,
    accepted: u8,
    n_perp: usize,
    n_noclick: usize,
}

/// Honest runs as CSV plus the run record.
pub fn cmd_run(cfg: &Config) -> Result<(String, RunRecord)> {
    let pc = cfg.protocol_config()?;
    let (records, stats) = run_honest(&pc, cfg.run.trials, cfg.run.seed)?;
    let rows = records.iter().map(|r| RunRow {
        trial: r.trial,
        committed_bit: r.committed_bit.into(),
        recovered_bit: r.recovered_bit.into(),
        accepted: r.accepted.into(),
        n_perp: r.n_perp,
        n_noclick: r.n_noclick,
    });
    let results = vec![
        ExperimentResult::from_tally("recovery", Some(stats.analytic_recovery), stats.recovery),
        ExperimentResult::from_tally("acceptance", Some(stats.analytic_acceptance), stats.acceptance),
        ExperimentResult::from_tally("bit_error", Some(stats.p_bit), stats.bit_errors),
    ];
    let csv = finish(header("run", cfg) + &csv_body(rows)?, &results);
    Ok((csv, record("run", cfg, None, results)))
}

#[derive(Serialize)]
struct EarlyRow {
    trial: u64,
    committed_bit: u8,
    guessed_parity: u8,
    parity_correct: u8,
    bit_errors: usize,
    per_bit_error: f64,
}

#[derive(Serialize)]
struct CheatRow {
    trial: u64,
    committed_bit: u8,
    accepted: u8,
    detected: u8,
    n_perp: usize,
    n_noclick: usize,
}

/// Attack runs as CSV plus the run record.
pub fn cmd_attack(cfg: &Config, attack: AttackSpec) -> Result<(String, RunRecord)> {
    let pc = cfg.protocol_config()?;
    let (trials, seed) = (cfg.run.trials, cfg.run.seed);
    let mut csv = header("attack", cfg);
    let results = match attack {
        AttackSpec::EarlyMeasure => {
            let stats = run_early_measurement(&pc, trials, seed)?;
            let n_bits = pc.code.n_bits() as f64;
            csv.push_str("# attack: early\n");
            csv += &csv_body(stats.records.iter().map(|r| EarlyRow {
                trial: r.trial,
                committed_bit: r.committed_bit.into(),
                guessed_parity: r.guessed_parity.into(),
                parity_correct: (r.guessed_parity == r.committed_bit).into(),
                bit_errors: r.bit_errors,
                per_bit_error: r.bit_errors as f64 / n_bits,
            }))?;
            vec![
                ExperimentResult::from_tally("per_bit_error", Some(stats.analytic_bit_error), stats.bit_errors),
                ExperimentResult::from_tally("parity_success", Some(stats.bound), stats.parity_success),
            ]
        }
        AttackSpec::Delay { shift, block } => {
            let stats = run_delay_attack(&pc, shift, block, trials, seed)?;
            let _ = writeln!(csv, "# attack: delay s={shift} block={block} p_perp={}", stats.p_perp);
            csv += &csv_body(stats.records.iter().map(cheat_row))?;
            vec![
                ExperimentResult::from_tally("undetected", Some(stats.analytic_undetected), stats.undetected),
                ExperimentResult::from_tally(
                    "control_perp",
                    Some(0.0),
                    Tally::new(stats.control_perp, stats.control_trials * pc.code.n_bits() as u64),
                ),
            ]
        }
        AttackSpec::ParityFlip { block } => {
            let stats = run_parity_flip(&pc, block, trials, seed)?;
            let _ = writeln!(csv, "# attack: flip block={block}");
            csv += &csv_body(stats.records.iter().map(cheat_row))?;
            vec![
                ExperimentResult::from_tally("detected", Some(stats.analytic_detection), stats.detected),
                ExperimentResult::from_tally("target_detected", Some(stats.analytic_detection), stats.target_detected),
            ]
        }
    };
    let csv = finish(csv, &results);
    Ok((csv, record("attack", cfg, Some(attack), results)))
}

fn cheat_row(r: &crate::protocol::TrialRecord) -> CheatRow {
    CheatRow {
        trial: r.trial,
        committed_bit: r.committed_bit.into(),
        accepted: r.accepted.into(),
        detected: (!r.accepted).into(),
        n_perp: r.n_perp,
        n_noclick: r.n_noclick,
    }
}

#[derive(Serialize)]
struct CountRow {
    n_blocks: usize,
    block_len: usize,
    n_bits: usize,
    exact: String,
    trig: f64,
    approx: f64,
    brute_force: Option<u64>,
    info_bits: f64,
    eta: f64,
    bound: f64,
}

#[derive(Serialize)]
struct BlockRow {
    p: f64,
    k: usize,
    exact: f64,
    asymptotic: f64,
    ratio: f64,
}

#[derive(Serialize)]
struct ParityRow {
    p_block: f64,
    n_blocks: usize,
    closed: f64,
    direct: f64,
}

#[derive(Serialize)]
struct CheatTableRow {
    p_perp: f64,
    k: usize,
    undetected: f64,
}

fn or_default(p: &[f64], default: Vec<f64>) -> Vec<f64> {
    if p.is_empty() {
        default
    } else {
        p.to_vec()
    }
}

/// One row per parameter point with every available evaluation.
pub fn cmd_tables(family: Family, n_max: usize, k_max: usize, max_bits: usize, p: &[f64]) -> Result<String> {
    let mut csv = String::new();
    let _ = writeln!(csv, "# relbc {VERSION}");
    let _ = writeln!(csv, "# table: {}", family.to_possible_value().expect("named").get_name());
    let body = match family {
        Family::Eq22 => {
            let mut rows = Vec::new();
            for n in (2..=n_max).step_by(2) {
                for k in (1..=k_max).take_while(|k| n * k <= max_bits) {
                    let count = count_parity_strings(n, k)?;
                    let (info_bits, eta) = shannon_info(n, k)?;
                    let brute_force =
                        (n * k <= MAX_BRUTE_FORCE_BITS).then(|| brute_force_parity_count(n * k, k)).transpose()?;
                    rows.push(CountRow {
                        n_blocks: n,
                        block_len: k,
                        n_bits: n * k,
                        exact: count.exact.to_string(),
                        trig: count.trig,
                        approx: count.approx,
                        brute_force,
                        info_bits,
                        eta,
                        bound: early_guess_bound(n, k)?,
                    });
                }
            }
            csv_body(rows)?
        }
        Family::Eq25 => {
            let ps = or_default(p, vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3]);
            let mut rows = Vec::new();
            for &p in &ps {
                for k in 1..=k_max {
                    let e = block_error(p, k)?;
                    let ratio = if e.exact > 0.0 { e.asymptotic / e.exact } else { f64::NAN };
                    rows.push(BlockRow { p, k, exact: e.exact, asymptotic: e.asymptotic, ratio });
                }
            }
            csv_body(rows)?
        }
        Family::Eq28 => {
            let ps = or_default(p, (0..=10).map(|i| i as f64 * 0.05).collect());
            let mut rows = Vec::new();
            for &p in &ps {
                for n in (2..=n_max).step_by(2) {
                    let e = parity_error(p, n)?;
                    rows.push(ParityRow { p_block: p, n_blocks: n, closed: e.closed, direct: e.direct });
                }
            }
            csv_body(rows)?
        }
        Family::Eq34 => {
            let ps = or_default(p, vec![0.25, 0.5, 0.75]);
            let mut rows = Vec::new();
            for &p in &ps {
                for k in 1..=k_max {
                    rows.push(CheatTableRow { p_perp: p, k, undetected: cheat_probability(p, k)? });
                }
            }
            csv_body(rows)?
        }
    };
    Ok(csv + &body)
}
