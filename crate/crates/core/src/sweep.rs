//! MI-versus-SNR sweeps over several precoding schemes, and the SNR at
//! which a scheme reaches a target mutual information.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::{discrete_waterfill_mi, fixed_point_precoder, gaussian_waterfill, mercury_waterfill, FixedPointOptions};
use crate::channel::{random_mimo, svd, ChannelDecomposition};
use crate::constellation::{Constellation, ProductAlphabet, QamOrder};
use crate::db_to_linear;
use crate::error::{Error, Result};
use crate::mi::{Method, MiEstimate};
use crate::pair::LookupTable;
use crate::pairing::{plan, PairSolver, PlanOptions, Strategy};
use crate::precoder::build_from_plan;

/// First line of every sweep CSV.
pub const CSV_SCHEMA: &str = "# schema: xprecode-sweep/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    GaussianWf,
    DiscreteWf,
    MercuryWf,
    XCode(Strategy),
    FixedPoint,
}

impl Scheme {
    pub fn all() -> Vec<Scheme> {
        let mut v = vec![Scheme::GaussianWf, Scheme::DiscreteWf, Scheme::MercuryWf];
        v.extend(Strategy::ALL.into_iter().map(Scheme::XCode));
        v.push(Scheme::FixedPoint);
        v
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::GaussianWf => f.write_str("gaussian-wf"),
            Scheme::DiscreteWf => f.write_str("wf-discrete"),
            Scheme::MercuryWf => f.write_str("mercury-wf"),
            Scheme::XCode(s) => write!(f, "xcode-{}", s.name()),
            Scheme::FixedPoint => f.write_str("fixed-point"),
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::all()
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy `{s}`")))
    }
}

/// Parses a comma separated list of scheme names.
pub fn parse_schemes(list: &str) -> Result<Vec<Scheme>> {
    list.split(',').map(|s| s.trim().parse()).collect()
}

#[derive(Debug, Clone)]
pub enum Scenario {
    /// One known channel.
    Fixed(ChannelDecomposition),
    /// Mutual information averaged over i.i.d. Rayleigh channels.
    Ergodic { n_t: usize, n_r: usize, realizations: usize },
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub scenario: Scenario,
    pub alphabet: QamOrder,
    pub schemes: Vec<Scheme>,
    pub snr_db: Vec<f64>,
    /// Monte Carlo samples for full-system estimates.
    pub samples: usize,
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.schemes.is_empty() {
            return Err(Error::Config("at least one strategy is required".into()));
        }
        if self.snr_db.is_empty() || self.snr_db.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("SNR grid must be nonempty and strictly increasing".into()));
        }
        if let Scenario::Ergodic { realizations: 0, .. } = self.scenario {
            return Err(Error::Config("ergodic sweep needs at least one realization".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub snr_db: f64,
    pub strategy: String,
    pub mi_bits: f64,
    pub mi_stderr: f64,
    /// Scheme-specific details, such as the chosen pairing.
    pub detail: String,
}

/// Grid from `a:b:step` in dB, inclusive of `b` when it lands on the grid.
pub fn parse_snr_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let nums = parts
        .iter()
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad SNR grid `{spec}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    match nums[..] {
        [a] => Ok(vec![a]),
        [a, b, step] if step > 0.0 && b >= a => {
            let n = ((b - a) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|k| a + k as f64 * step).collect())
        }
        _ => Err(Error::Config(format!("bad SNR grid `{spec}`, expected a:b:step"))),
    }
}

/// Evaluates one scheme on one channel at total power `p_t`.
pub fn evaluate_scheme(
    scheme: Scheme,
    dec: &ChannelDecomposition,
    p_t: f64,
    qam: &Constellation,
    table: Option<&LookupTable>,
    samples: usize,
    seed: u64,
) -> Result<(MiEstimate, String)> {
    let gains = dec.gains();
    let n = gains.len();
    let plan_opts = || PlanOptions {
        solver: if table.is_some() {
            PairSolver::Lookup
        } else {
            PairSolver::Optimize
        },
        seed,
        ..PlanOptions::default()
    };
    match scheme {
        Scheme::GaussianWf => {
            let (_, c) = gaussian_waterfill(gains, p_t)?;
            Ok((MiEstimate::exact(c, Method::Quadrature), String::new()))
        }
        Scheme::DiscreteWf => Ok((discrete_waterfill_mi(gains, p_t, qam)?, String::new())),
        Scheme::MercuryWf => Ok((mercury_waterfill(gains, p_t, qam)?.1, String::new())),
        Scheme::XCode(strategy) => {
            let p = plan(gains, p_t, qam, table, strategy, &plan_opts())?;
            let detail = match p.random_mean {
                Some(mean) => format!("{} random_mean={mean:.6}", p.pairing),
                None => p.pairing.to_string(),
            };
            Ok((p.total, detail))
        }
        Scheme::FixedPoint => {
            let h = dec.channel();
            let alph = ProductAlphabet::uniform(qam, n);
            let mut opts = FixedPointOptions {
                seed,
                mi_samples: samples,
                ..FixedPointOptions::default()
            };
            if n.is_multiple_of(2) {
                let p = plan(gains, p_t, qam, table, Strategy::Exhaustive, &plan_opts())?;
                opts.warm_starts.push(build_from_plan(dec, &p)?.matrix().clone());
            }
            let r = fixed_point_precoder(&h, &alph, p_t, &opts)?;
            let detail = format!("converged={} iterations={} start={}", r.converged, r.iterations, r.start);
            Ok((r.mi, detail))
        }
    }
}

/// Runs every (SNR, scheme) point; rows come back ordered by SNR, then by
/// scheme in the order given.
pub fn run_sweep(spec: &SweepSpec, table: Option<&LookupTable>) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let qam = spec.alphabet.constellation();
    let channels: Vec<ChannelDecomposition> = match &spec.scenario {
        Scenario::Fixed(dec) => vec![dec.clone()],
        Scenario::Ergodic { n_t, n_r, realizations } => (0..*realizations)
            .map(|k| {
                svd(&random_mimo(*n_t, *n_r, spec.seed.wrapping_add(k as u64))).map_err(|e| e.context(format!("realization {k}")))
            })
            .collect::<Result<_>>()?,
    };
    let n_channels = channels.len();
    let jobs: Vec<(f64, Scheme, usize)> = spec
        .snr_db
        .iter()
        .flat_map(|&db| {
            spec.schemes
                .iter()
                .flat_map(move |&s| (0..n_channels).map(move |k| (db, s, k)))
        })
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(db, scheme, k)| {
            evaluate_scheme(scheme, &channels[k], db_to_linear(db), &qam, table, spec.samples, spec.seed)
                .map_err(|e| e.context(format!("{scheme} at {db} dB, channel {k}")))
        })
        .collect::<Result<Vec<_>>>()?;

    let per_point = channels.len();
    Ok(jobs
        .chunks(per_point)
        .zip(results.chunks(per_point))
        .map(|(job, res)| {
            let (db, scheme, _) = job[0];
            let m = per_point as f64;
            let mean = res.iter().map(|r| r.0.value).sum::<f64>() / m;
            let (stderr, detail) = if per_point == 1 {
                (res[0].0.std_error, res[0].1.clone())
            } else {
                let var = res.iter().map(|r| (r.0.value - mean).powi(2)).sum::<f64>() / (m - 1.0);
                ((var / m).sqrt(), format!("realizations={per_point}"))
            };
            SweepRow {
                snr_db: db,
                strategy: scheme.to_string(),
                mi_bits: mean,
                mi_stderr: stderr,
                detail,
            }
        })
        .collect())
}

/// SNR in dB at which the nondecreasing `mi_of_db` reaches `target`,
/// by bisection on `[lo_db, hi_db]` to within `tol_db`.
pub fn snr_at_target(
    mut mi_of_db: impl FnMut(f64) -> Result<f64>,
    target: f64,
    lo_db: f64,
    hi_db: f64,
    tol_db: f64,
) -> Result<f64> {
    let (mut lo, mut hi) = (lo_db, hi_db);
    if mi_of_db(lo)? > target || mi_of_db(hi)? < target {
        return Err(Error::Domain(format!(
            "target {target} bits is not bracketed by [{lo_db}, {hi_db}] dB"
        )));
    }
    while hi - lo > tol_db {
        let mid = 0.5 * (lo + hi);
        if mi_of_db(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
