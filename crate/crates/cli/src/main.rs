#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use xprecode::channel::{reference_ofdm_taps, ChannelDecomposition, ChannelFile, PairChannel};
use xprecode::constellation::{product, QamOrder};
use xprecode::pair::{build_table, f_slice, optimize_pair, table_file_name, theta_slice, LookupTable, DEFAULT_BETA_BINS};
use xprecode::pairing::{plan, PairSolver, PlanOptions, Strategy};
use xprecode::precoder::build_from_plan;
use xprecode::sweep::{parse_schemes, parse_snr_grid, run_sweep, Scenario, SweepSpec, CSV_SCHEMA};
use xprecode::{db_to_linear, Error, Result};

#[derive(Parser)]
#[command(
    name = "xprecode",
    version,
    about = "Subchannel-pairing precoders for MIMO channels with QAM inputs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal rotation and power split for one subchannel pair.
    OptimizePair(OptimizePairArgs),
    /// Precompute per-pair lookup tables.
    BuildTables(BuildTablesArgs),
    /// Mutual information versus SNR for several schemes, as CSV.
    Sweep(SweepArgs),
    /// Pairing, powers, angles and precoder for one channel, as JSON.
    Plan(PlanArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value = "16", value_parser = parse_qam)]
    qam: QamOrder,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OptimizePairArgs {
    /// Condition number lambda_strong / lambda_weak.
    #[arg(long)]
    beta: f64,
    /// Pair power gain lambda_strong^2 + lambda_weak^2.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Single value or a:b:step.
    #[arg(long = "snr-db")]
    snr_db: String,
    /// Step of the reported angle slice, degrees.
    #[arg(long, default_value_t = 1.0)]
    theta_step: f64,
    /// Step of the reported power-fraction slice.
    #[arg(long, default_value_t = 0.02)]
    f_step: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct BuildTablesArgs {
    /// Comma separated constellation orders.
    #[arg(long, default_value = "4,16")]
    qam: String,
    #[arg(long, default_value = "1,1.5,2,4,8")]
    beta_bins: String,
    #[arg(long = "snr-db", default_value = "-5:35:1")]
    snr_db: String,
    #[arg(long = "table-dir", env = "XPRECODE_TABLE_DIR")]
    table_dir: PathBuf,
}

#[derive(Args)]
struct ChannelArgs {
    /// JSON channel file: {"matrix": ...}, {"diagonal": ...} or
    /// {"impulse_response": ..., "n": ...}.
    #[arg(long, group = "source")]
    channel: Option<PathBuf>,
    /// Two-subchannel pair with this condition number (use with --alpha).
    #[arg(long, group = "source")]
    beta: Option<f64>,
    #[arg(long, default_value_t = 1.0, requires = "beta")]
    alpha: f64,
    /// Built-in five-tap OFDM channel with this many subcarriers.
    #[arg(long, group = "source")]
    ofdm_reference: Option<usize>,
}

impl ChannelArgs {
    fn decomposition(&self) -> Result<Option<ChannelDecomposition>> {
        if let Some(path) = &self.channel {
            let file = ChannelFile::load(path).map_err(|e| e.context(format!("reading {}", path.display())))?;
            return file.decompose().map(Some);
        }
        if let Some(beta) = self.beta {
            let pc = PairChannel::from_beta(beta, self.alpha)?;
            return ChannelDecomposition::parallel(&[pc.strong(), pc.weak()], &[0, 1]).map(Some);
        }
        if let Some(n) = self.ofdm_reference {
            return xprecode::channel::ofdm_gains(&reference_ofdm_taps(), n)?
                .decomposition()
                .map(Some);
        }
        Ok(None)
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    channel: ChannelArgs,
    /// Average over i.i.d. Rayleigh channels of this shape, e.g. 4x4.
    #[arg(long, group = "source")]
    ergodic: Option<String>,
    #[arg(long, default_value_t = 200)]
    realizations: usize,
    #[arg(long = "snr-db")]
    snr_db: String,
    /// Comma separated list of schemes.
    #[arg(long, default_value = "gaussian-wf,wf-discrete,mercury-wf,xcode-x")]
    strategy: String,
    #[arg(long = "table-dir", env = "XPRECODE_TABLE_DIR")]
    table_dir: Option<PathBuf>,
    /// Monte Carlo samples for full-system estimates.
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    channel: ChannelArgs,
    #[arg(long = "snr-db")]
    snr_db: f64,
    #[arg(long, default_value = "exhaustive")]
    strategy: String,
    #[arg(long = "table-dir", env = "XPRECODE_TABLE_DIR")]
    table_dir: Option<PathBuf>,
    /// Random pairings tried by the random strategy.
    #[arg(long, default_value_t = 50)]
    samples: usize,
    #[command(flatten)]
    common: Common,
}

fn parse_qam(s: &str) -> std::result::Result<QamOrder, String> {
    s.parse::<QamOrder>().map_err(|e| e.to_string())
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::from(e).context(format!("writing {}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_table(dir: Option<&Path>, qam: QamOrder) -> Result<Option<LookupTable>> {
    let Some(dir) = dir else { return Ok(None) };
    let path = dir.join(table_file_name(qam, &DEFAULT_BETA_BINS));
    LookupTable::load(&path)
        .map(Some)
        .map_err(|e| e.context(format!("loading table {}", path.display())))
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number `{x}` in `{s}`")))
        })
        .collect()
}

#[derive(Serialize)]
struct PairReport {
    beta: f64,
    alpha: f64,
    snr_db: f64,
    qam: QamOrder,
    theta_deg: f64,
    f: f64,
    mi_bits: f64,
    mi_stderr: f64,
    theta_slice: Vec<(f64, f64)>,
    f_slice: Vec<(f64, f64)>,
}

fn cmd_optimize_pair(a: &OptimizePairArgs) -> Result<()> {
    let grid = parse_snr_grid(&a.snr_db)?;
    if !(a.theta_step > 0.0) || !(a.f_step > 0.0 && a.f_step <= 1.0) {
        return Err(Error::Config("slice steps must be positive".into()));
    }
    let pc = PairChannel::from_beta(a.beta, a.alpha)?;
    let q = a.common.qam.constellation();
    let pa = product(&q, &q);
    let reports = grid
        .iter()
        .map(|&db| {
            let p = db_to_linear(db);
            let opt = optimize_pair(&pc, p, &pa)?;
            Ok(PairReport {
                beta: a.beta,
                alpha: a.alpha,
                snr_db: db,
                qam: a.common.qam,
                theta_deg: opt.theta_deg(),
                f: opt.f,
                mi_bits: opt.mi.value,
                mi_stderr: opt.mi.std_error,
                theta_slice: theta_slice(&pc, p, opt.f, &pa, a.theta_step)?,
                f_slice: f_slice(&pc, p, opt.theta, &pa, a.f_step)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let text = if reports.len() == 1 {
        serde_json::to_string_pretty(&reports[0])?
    } else {
        serde_json::to_string_pretty(&reports)?
    };
    emit(a.common.out.as_deref(), &(text + "\n"))
}

fn cmd_build_tables(a: &BuildTablesArgs) -> Result<()> {
    let orders = a
        .qam
        .split(',')
        .map(|s| s.trim().parse::<QamOrder>())
        .collect::<Result<Vec<_>>>()?;
    let bins = parse_list(&a.beta_bins)?;
    let snr = parse_snr_grid(&a.snr_db)?;
    if !a.table_dir.is_dir() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("table directory {} does not exist", a.table_dir.display()),
        )));
    }
    for qam in orders {
        let table = build_table(&bins, &snr, qam)?;
        let path = a.table_dir.join(table.file_name());
        table
            .save(&path)
            .map_err(|e| e.context(format!("writing {}", path.display())))?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let scenario = match (&a.ergodic, a.channel.decomposition()?) {
        (Some(shape), None) => {
            let (r, t) = shape
                .split_once('x')
                .ok_or_else(|| Error::Config(format!("bad shape `{shape}`, expected RxT")))?;
            let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::Config(format!("bad shape `{shape}`")));
            Scenario::Ergodic {
                n_r: parse(r)?,
                n_t: parse(t)?,
                realizations: a.realizations,
            }
        }
        (None, Some(dec)) => Scenario::Fixed(dec),
        _ => {
            return Err(Error::Config(
                "give exactly one of --channel, --beta, --ofdm-reference, --ergodic".into(),
            ))
        }
    };
    let spec = SweepSpec {
        scenario,
        alphabet: a.common.qam,
        schemes: parse_schemes(&a.strategy)?,
        snr_db: parse_snr_grid(&a.snr_db)?,
        samples: a.samples,
        seed: a.common.seed,
    };
    spec.validate()?;
    let table = load_table(a.table_dir.as_deref(), a.common.qam)?;
    let rows = run_sweep(&spec, table.as_ref())?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &rows {
        w.serialize(row).map_err(|e| Error::Config(e.to_string()))?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| Error::Config(e.to_string()))?).expect("csv output is UTF-8");
    emit(a.common.out.as_deref(), &format!("{CSV_SCHEMA}\n{body}"))
}

#[derive(Serialize)]
struct PlanReport<'a> {
    snr_db: f64,
    qam: QamOrder,
    strategy: &'a str,
    gains: &'a [f64],
    pairing: &'a xprecode::pairing::Pairing,
    pairs: Vec<xprecode::pairing::PairReport>,
    mi_bits: f64,
    mi_stderr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    random_mean_bits: Option<f64>,
    precoder: serde_json::Value,
}

fn cmd_plan(a: &PlanArgs) -> Result<()> {
    let dec = a
        .channel
        .decomposition()?
        .ok_or_else(|| Error::Config("give one of --channel, --beta, --ofdm-reference".into()))?;
    let strategy: Strategy = a.strategy.parse()?;
    let table = load_table(a.table_dir.as_deref(), a.common.qam)?;
    let opts = PlanOptions {
        solver: if table.is_some() {
            PairSolver::Lookup
        } else {
            PairSolver::Optimize
        },
        random_count: a.samples,
        seed: a.common.seed,
        ..PlanOptions::default()
    };
    let q = a.common.qam.constellation();
    let p = plan(dec.gains(), db_to_linear(a.snr_db), &q, table.as_ref(), strategy, &opts)?;
    let precoder = build_from_plan(&dec, &p)?;
    let report = PlanReport {
        snr_db: a.snr_db,
        qam: a.common.qam,
        strategy: strategy.name(),
        gains: dec.gains(),
        pairing: &p.pairing,
        pairs: p.report(),
        mi_bits: p.total.value,
        mi_stderr: p.total.std_error,
        random_mean_bits: p.random_mean,
        precoder: serde_json::from_str(&precoder.to_json()?)?,
    };
    emit(a.common.out.as_deref(), &(serde_json::to_string_pretty(&report)? + "\n"))
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::NonConvergence { .. } => 3,
        Error::Io(_) | Error::Json(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::OptimizePair(a) => cmd_optimize_pair(a),
        Command::BuildTables(a) => cmd_build_tables(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Plan(a) => cmd_plan(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
