use std::fs::{self, File, OpenOptions};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use coderate_core::channel::{read_frames, write_frames};
use coderate_core::codes::LinearCode;
use coderate_core::estimator::{recover, Correction, ParamMode, RecoveryReport, REPORT_CSV_HEADER};
use coderate_core::filter::FilterParams;
use coderate_core::optimize::{
    contour_grid, optimize_constrained, optimize_unconstrained, write_contour_csv, DEFAULT_STEP, DEFAULT_TOLERANCE,
};
use coderate_core::simulate::{generate_frames, run_trial, sigma2_from_snr_db, verify_theorem1, SimulationSetup, TRIAL_CSV_HEADER};
use coderate_core::text::real;
use coderate_core::theory::{metrics, TheoryInputs};
use coderate_core::Error;
use rayon::prelude::*;

mod config;

use config::{Config, SnrList};

const SIMULATE_HELP: &str = "\
CSV columns:
  snr_db,trial,k_prime,e_c_theory,c_observed,rho_naive,rho_corrected,frames_consumed

e_c_theory is the expected number of erroneous word-matrix columns at the true
noise level; c_observed counts the columns that actually hold an error.
Without --t1/--t2 the thresholds are chosen automatically per trial.";

const OPTIMIZE_HELP: &str = "\
Contour CSV columns (--contour):
  t1,t2,algorithmic_error,f_value

One row per (t1, t2) grid point, t2 = 0..n; f_value is the acceptance
probability F(t2; n, p_u).";

const RECOVER_HELP: &str = "\
Frame file: one frame per line, n real symbols separated by whitespace.

CSV columns (--csv, appended; header written to a new file):
  n,m_s,frames_consumed,k_prime,e_c,rho_naive,rho_corrected,sigma2_hat,snr_db_hat,p_e_hat,t1,t2,correction,degenerate,clamped";

#[derive(Parser, Debug)]
#[command(name = "coderate", version, about = "Blind code-rate recovery from noisy BPSK frames")]
struct Cli {
    /// Base random seed
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output file (default: stdout)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Flat key = value file; command-line flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo trials over an SNR sweep
    #[command(after_help = SIMULATE_HELP)]
    Simulate(SimulateArgs),
    /// Closed-form filter metrics for one setting
    Theory(TheoryArgs),
    /// Threshold search, optionally under a frame budget
    #[command(after_help = OPTIMIZE_HELP)]
    Optimize(OptimizeArgs),
    /// Estimate the code rate from a frame file
    #[command(after_help = RECOVER_HELP)]
    Recover(RecoverArgs),
    /// Rank-increase experiment on the toy model
    #[command(name = "verify-theorem1")]
    VerifyTheorem1(VerifyArgs),
}

#[derive(Args, Debug)]
struct FilterArgs {
    /// Reliability threshold in [0, 1]
    #[arg(long)]
    t1: Option<f64>,
    /// Maximum unreliable symbols per suitable frame
    #[arg(long)]
    t2: Option<usize>,
    /// Word-matrix rows (default n)
    #[arg(long = "m-s")]
    m_s: Option<usize>,
    /// Choose t1, t2 automatically
    #[arg(long)]
    auto: bool,
    /// Expected-column-error figure: exact, observed or full
    #[arg(long)]
    correction: Option<Correction>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Code length of a random code
    #[arg(long)]
    n: Option<usize>,
    /// Dimension of a random code
    #[arg(long)]
    k: Option<usize>,
    /// Parity-check matrix in alist format, instead of --n/--k
    #[arg(long)]
    alist: Option<PathBuf>,
    /// SNRs in dB: a,b,c or lo:hi or lo:hi:step
    #[arg(long = "snr-db")]
    snr_db: Option<SnrList>,
    /// Frames transmitted per trial
    #[arg(long)]
    messages: Option<usize>,
    /// Trials per SNR
    #[arg(long)]
    trials: Option<usize>,
    /// Directory for the received frames of every trial
    #[arg(long = "dump-frames")]
    dump_frames: Option<PathBuf>,
    #[command(flatten)]
    filter: FilterArgs,
}

#[derive(Args, Debug)]
struct TheoryArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "snr-db", allow_negative_numbers = true)]
    snr_db: Option<f64>,
    #[arg(long)]
    t1: Option<f64>,
    #[arg(long)]
    t2: Option<usize>,
    /// Word-matrix rows (default n)
    #[arg(long = "m-s")]
    m_s: Option<usize>,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "snr-db", allow_negative_numbers = true)]
    snr_db: Option<f64>,
    /// Frame budget M; enables the constrained search
    #[arg(long)]
    budget: Option<usize>,
    /// t1 grid step
    #[arg(long)]
    step: Option<f64>,
    /// Relative width of the acceptance band
    #[arg(long)]
    tolerance: Option<f64>,
    /// Write the full (t1, t2) grid as CSV
    #[arg(long)]
    contour: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RecoverArgs {
    /// Frame file
    #[arg(long)]
    frames: Option<PathBuf>,
    /// Expected code length (default: length of the first frame)
    #[arg(long)]
    n: Option<usize>,
    /// Append the report as a CSV row
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    filter: FilterArgs,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Message columns
    #[arg(long)]
    d: Option<usize>,
    /// Column length
    #[arg(long = "m-s")]
    m_s: Option<usize>,
    /// Bit-flip probability
    #[arg(long = "p-e-prime")]
    p_e_prime: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
}

const COMMON_KEYS: [&str; 2] = ["seed", "out"];
const FILTER_KEYS: [&str; 5] = ["t1", "t2", "m-s", "auto", "correction"];

struct Common {
    seed: u64,
    out: Option<PathBuf>,
}

fn allowed(extra: &[&'static str], with_filter: bool) -> Vec<&'static str> {
    let mut keys: Vec<&str> = COMMON_KEYS.to_vec();
    keys.extend_from_slice(extra);
    if with_filter {
        keys.extend_from_slice(&FILTER_KEYS);
    }
    keys
}

fn required<T>(value: Option<T>, key: &str) -> Result<T> {
    value.with_context(|| format!("missing --{key} (flag or config key)"))
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn explain(e: Error) -> anyhow::Error {
    match e {
        Error::InsufficientData { collected, required } => anyhow::anyhow!(
            "only {collected} suitable frames found, {required} required; supply more frames, lower --t1 or raise --t2"
        ),
        other => other.into(),
    }
}

/// Explicit thresholds when both t1 and t2 are known, automatic otherwise.
fn param_mode(cfg: &Config, f: &FilterArgs, n: usize) -> Result<(ParamMode, Correction)> {
    let t1 = cfg.pick(f.t1, "t1")?;
    let t2 = cfg.pick(f.t2, "t2")?;
    let m_s = cfg.pick(f.m_s, "m-s")?;
    let auto = cfg.switch(f.auto, "auto")?;
    let correction = cfg.pick(f.correction, "correction")?.unwrap_or_default();
    let mode = match (auto, t1, t2) {
        (false, Some(t1), Some(t2)) => ParamMode::Explicit(FilterParams::new(t1, t2, m_s.unwrap_or(n))?),
        (false, Some(_), None) | (false, None, Some(_)) => bail!("give both --t1 and --t2, or --auto"),
        (true, Some(_), _) | (true, _, Some(_)) => bail!("--auto conflicts with --t1/--t2"),
        _ => ParamMode::Auto { m_s, step: DEFAULT_STEP, tolerance: DEFAULT_TOLERANCE },
    };
    Ok((mode, correction))
}

fn simulate(cfg: &Config, common: &Common, a: &SimulateArgs) -> Result<()> {
    cfg.check_keys(&allowed(&["n", "k", "alist", "snr-db", "messages", "trials", "dump-frames"], true))?;
    let alist: Option<PathBuf> = cfg.pick(a.alist.clone(), "alist")?;
    let code = match alist {
        Some(path) => {
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            LinearCode::from_alist(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => {
            let n = required(cfg.pick(a.n, "n")?, "n")?;
            let k = required(cfg.pick(a.k, "k")?, "k")?;
            LinearCode::random(n, k, common.seed)?
        }
    };
    let snrs = required(cfg.pick(a.snr_db.clone(), "snr-db")?, "snr-db")?.0;
    let messages = cfg.pick(a.messages, "messages")?.unwrap_or(1000);
    let trials = cfg.pick(a.trials, "trials")?.unwrap_or(1);
    if trials == 0 {
        bail!("--trials must be at least 1");
    }
    let dump: Option<PathBuf> = cfg.pick(a.dump_frames.clone(), "dump-frames")?;
    let (mode, correction) = param_mode(cfg, &a.filter, code.n())?;
    let setup = SimulationSetup { messages, mode, correction, seed: common.seed };

    if let Some(dir) = &dump {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let jobs: Vec<(usize, usize)> = (0..snrs.len()).flat_map(|s| (0..trials).map(move |t| (s, t))).collect();
    let rows: Vec<Result<String>> = jobs
        .into_par_iter()
        .map(|(s, t)| {
            if let Some(dir) = &dump {
                let (_, frames) = generate_frames(&code, messages, snrs[s], common.seed, s as u64, t as u64)?;
                let path = dir.join(format!("snr{}_trial{t}.txt", snrs[s]));
                write_frames(BufWriter::new(File::create(&path)?), &frames)?;
            }
            run_trial(&code, snrs[s], s, t, &setup)
                .map(|r| r.csv_row())
                .map_err(|e| explain(e).context(format!("snr {} dB, trial {t}", snrs[s])))
        })
        .collect();

    let mut out = output(&common.out)?;
    writeln!(out, "{TRIAL_CSV_HEADER}")?;
    let mut failed = 0;
    for row in rows {
        match row {
            Ok(line) => writeln!(out, "{line}")?,
            Err(e) => {
                failed += 1;
                eprintln!("warning: {e:#}");
            }
        }
    }
    out.flush()?;
    if failed > 0 {
        eprintln!("warning: {failed} trial(s) produced no row");
    }
    Ok(())
}

fn theory(cfg: &Config, common: &Common, a: &TheoryArgs) -> Result<()> {
    cfg.check_keys(&allowed(&["n", "snr-db", "t1", "t2", "m-s"], false))?;
    let n = required(cfg.pick(a.n, "n")?, "n")?;
    let snr = required(cfg.pick(a.snr_db, "snr-db")?, "snr-db")?;
    let inputs = TheoryInputs {
        n,
        m_s: cfg.pick(a.m_s, "m-s")?.unwrap_or(n),
        sigma: sigma2_from_snr_db(snr).sqrt(),
        t1: required(cfg.pick(a.t1, "t1")?, "t1")?,
        t2: required(cfg.pick(a.t2, "t2")?, "t2")?,
    };
    let m = metrics(&inputs)?;
    let mut out = output(&common.out)?;
    writeln!(out, "p_u={}", real(m.p_u))?;
    writeln!(out, "p_e={}", real(m.p_e))?;
    match m.p_eu {
        Some(p) => writeln!(out, "p_eu={}", real(p))?,
        None => writeln!(out, "p_eu=undefined")?,
    }
    writeln!(out, "p_er={}", real(m.p_er))?;
    writeln!(out, "e_c_exact={}", real(m.e_c_exact))?;
    writeln!(out, "e_c_approx={}", real(m.e_c_approx))?;
    writeln!(out, "e_c_full={}", real(m.e_c_full))?;
    writeln!(out, "e_m={}", real(m.e_m))?;
    writeln!(out, "acceptance={}", real(m.acceptance))?;
    writeln!(out, "algorithmic_error={}", real(m.algorithmic_error))?;
    writeln!(out, "ambient_error={}", real(m.ambient_error))?;
    out.flush()?;
    Ok(())
}

fn optimize(cfg: &Config, common: &Common, a: &OptimizeArgs) -> Result<()> {
    cfg.check_keys(&allowed(&["n", "snr-db", "budget", "step", "tolerance", "contour"], false))?;
    let n = required(cfg.pick(a.n, "n")?, "n")?;
    let sigma = sigma2_from_snr_db(required(cfg.pick(a.snr_db, "snr-db")?, "snr-db")?).sqrt();
    let step = cfg.pick(a.step, "step")?.unwrap_or(DEFAULT_STEP);
    let tolerance = cfg.pick(a.tolerance, "tolerance")?.unwrap_or(DEFAULT_TOLERANCE);
    let contour: Option<PathBuf> = cfg.pick(a.contour.clone(), "contour")?;
    let r = match cfg.pick(a.budget, "budget")? {
        Some(m) => optimize_constrained(n, sigma, m, step, tolerance)?,
        None => optimize_unconstrained(n, sigma, step)?,
    };
    if let Some(path) = contour {
        let grid = contour_grid(n, sigma, step)?;
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        write_contour_csv(&mut w, &grid)?;
        w.flush()?;
    }
    let mut out = output(&common.out)?;
    writeln!(out, "t1_star={}", real(r.t1_star))?;
    writeln!(out, "t2_star={}", r.t2_star)?;
    writeln!(out, "objective={}", real(r.objective))?;
    writeln!(out, "algorithmic_error={}", real(r.algorithmic_error))?;
    if let Some(f) = r.constraint_value {
        writeln!(out, "constraint_value={}", real(f))?;
    }
    writeln!(out, "grid_resolution={}", real(r.grid_resolution))?;
    out.flush()?;
    Ok(())
}

fn append_csv(path: &Path, report: &RecoveryReport) -> Result<()> {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    if fresh {
        writeln!(f, "{REPORT_CSV_HEADER}")?;
    }
    writeln!(f, "{}", report.csv_row())?;
    Ok(())
}

fn recover_cmd(cfg: &Config, common: &Common, a: &RecoverArgs) -> Result<()> {
    cfg.check_keys(&allowed(&["frames", "n", "csv"], true))?;
    let path: PathBuf = required(cfg.pick(a.frames.clone(), "frames")?, "frames")?;
    let n = cfg.pick(a.n, "n")?;
    let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    let frames = read_frames(BufReader::new(file), n).with_context(|| format!("reading {}", path.display()))?;
    let Some(first) = frames.first() else {
        bail!("{} holds no frames", path.display());
    };
    let n = first.len();
    let (mode, correction) = param_mode(cfg, &a.filter, n)?;
    let report = recover(&frames, n, &mode, correction).map_err(explain)?;
    let mut out = output(&common.out)?;
    writeln!(out, "{report}")?;
    out.flush()?;
    if let Some(csv) = cfg.pick(a.csv.clone(), "csv")? {
        append_csv(&csv, &report)?;
    }
    Ok(())
}

fn verify(cfg: &Config, common: &Common, a: &VerifyArgs) -> Result<()> {
    cfg.check_keys(&allowed(&["d", "m-s", "p-e-prime", "trials"], false))?;
    let d = required(cfg.pick(a.d, "d")?, "d")?;
    let m_s = required(cfg.pick(a.m_s, "m-s")?, "m-s")?;
    let p = required(cfg.pick(a.p_e_prime, "p-e-prime")?, "p-e-prime")?;
    let trials = cfg.pick(a.trials, "trials")?.unwrap_or(10_000);
    let r = verify_theorem1(d, m_s, p, trials, common.seed)?;
    let mut out = output(&common.out)?;
    writeln!(out, "d={}", r.d)?;
    writeln!(out, "m_s={}", r.m_s)?;
    writeln!(out, "p_e_prime={}", real(r.p_e_prime))?;
    writeln!(out, "trials={}", r.trials)?;
    writeln!(out, "conditioned_trials={}", r.conditioned)?;
    writeln!(out, "rank_increases={}", r.rank_increases)?;
    match (r.observed, r.standard_error) {
        (Some(f), Some(se)) => {
            writeln!(out, "observed={}", real(f))?;
            writeln!(out, "standard_error={}", real(se))?;
        }
        _ => writeln!(out, "observed=none (no trial had a bit error)")?,
    }
    match r.bound {
        Some(b) => {
            writeln!(out, "bound={}", real(b.bound))?;
            writeln!(out, "simplified_bound={}", real(b.simplified))?;
            writeln!(out, "min_distance_bound={}", real(b.min_distance))?;
        }
        None => writeln!(out, "bound=none")?,
    }
    let verdict = match r.pass {
        Some(true) => "pass",
        Some(false) => "fail",
        None => "n/a",
    };
    writeln!(out, "result={verdict}")?;
    out.flush()?;
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let common = Common {
        seed: cfg.pick(cli.seed, "seed")?.unwrap_or(1),
        out: cfg.pick(cli.out.clone(), "out")?,
    };
    match &cli.command {
        Command::Simulate(a) => simulate(&cfg, &common, a),
        Command::Theory(a) => theory(&cfg, &common, a),
        Command::Optimize(a) => optimize(&cfg, &common, a),
        Command::Recover(a) => recover_cmd(&cfg, &common, a),
        Command::VerifyTheorem1(a) => verify(&cfg, &common, a),
    }
}
