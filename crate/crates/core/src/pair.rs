//! Per-pair rotation and power-split optimization, and the offline lookup
//! tables indexed by condition number and effective SNR.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::PairChannel;
use crate::constellation::{product, ProductAlphabet, QamOrder};
use crate::error::{Error, Result};
use crate::mi::{pair_mi, MiBudget, MiEstimate};
use crate::{db_to_linear, linear_to_db};

/// Scores closer than this are ties, resolved toward smaller angle, then
/// smaller fraction.
const TIE_TOL: f64 = 1e-6;

/// Condition numbers covered by the default tables.
pub const DEFAULT_BETA_BINS: [f64; 5] = [1.0, 1.5, 2.0, 4.0, 8.0];

/// Default table SNR grid, -5 to 35 dB in 1 dB steps.
pub fn default_snr_grid() -> Vec<f64> {
    (-5..=35).map(f64::from).collect()
}

/// Grid search settings for [`optimize_pair`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub theta_step_deg: f64,
    pub f_step: f64,
    pub refine_rounds: usize,
    /// Each refinement round divides both steps by this factor and searches
    /// within one old step of the incumbent.
    pub shrink: usize,
    /// Nodes per real axis used to score grid points.
    pub search_nodes: usize,
    /// Budget for the reported value at the optimum.
    pub final_budget: MiBudget,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            theta_step_deg: 1.0,
            f_step: 0.02,
            refine_rounds: 2,
            shrink: 5,
            search_nodes: 32,
            final_budget: MiBudget::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairOptimum {
    /// Radians.
    pub theta: f64,
    pub f: f64,
    pub mi: MiEstimate,
}

impl PairOptimum {
    pub fn theta_deg(&self) -> f64 {
        self.theta.to_degrees()
    }
}

#[derive(Clone, Copy)]
struct Point {
    theta_deg: f64,
    f: f64,
    score: f64,
}

// Among points within TIE_TOL of the best score, prefer the smaller angle,
// then the split nearest to even, then the smaller f.
fn select(points: &[Point]) -> Point {
    let top = points.iter().map(|p| p.score).fold(f64::NEG_INFINITY, f64::max);
    *points
        .iter()
        .filter(|p| p.score >= top - TIE_TOL)
        .min_by(|a, b| {
            a.theta_deg
                .total_cmp(&b.theta_deg)
                .then((a.f - 0.5).abs().total_cmp(&(b.f - 0.5).abs()))
                .then(a.f.total_cmp(&b.f))
        })
        .expect("nonempty search grid")
}

/// Maximize a pair's mutual information over rotation and power split.
///
/// `p_t` is the power delivered to the pair. The search runs on the
/// unit-gain pair with condition number `beta` at effective power
/// `p_t * alpha`, which is the same problem. Angles are searched over
/// `[0, 90)` degrees; with identical alphabets on both subchannels
/// `theta` and `90 - theta` give the same mixture up to relabeling, so
/// only `[0, 45]` is scored.
pub fn optimize_pair(pc: &PairChannel, p_t: f64, alph: &ProductAlphabet) -> Result<PairOptimum> {
    optimize_pair_with(pc, p_t, alph, &OptimizerConfig::default())
}

pub fn optimize_pair_with(pc: &PairChannel, p_t: f64, alph: &ProductAlphabet, cfg: &OptimizerConfig) -> Result<PairOptimum> {
    if !(p_t > 0.0) || !p_t.is_finite() {
        return Err(Error::Domain(format!("pair power must be positive, got {p_t}")));
    }
    let unit = pc.normalized();
    let p_eff = p_t * pc.alpha();
    let search = MiBudget::fixed_nodes(cfg.search_nodes);
    let score = |theta_deg: f64, f: f64| -> Result<f64> {
        Ok(pair_mi(&unit, p_eff, 1.0, f, theta_deg.to_radians(), alph, &search)?.value)
    };
    let theta_max = if alph.is_homogeneous() { 45.0 } else { 90.0 };
    let theta_open = theta_max >= 90.0;

    let n_theta = (theta_max / cfg.theta_step_deg).round() as usize;
    let n_f = (1.0 / cfg.f_step).round() as usize;
    let mut points = Vec::with_capacity((n_theta + 1) * (n_f + 1));
    for it in 0..=n_theta {
        let theta_deg = it as f64 * cfg.theta_step_deg;
        if theta_open && theta_deg >= 90.0 {
            break;
        }
        for jf in 0..=n_f {
            let f = jf as f64 / n_f as f64;
            points.push(Point {
                theta_deg,
                f,
                score: score(theta_deg, f)?,
            });
        }
    }
    let mut best = select(&points);

    let (mut dt, mut df) = (cfg.theta_step_deg, cfg.f_step);
    let span = cfg.shrink as i64;
    for _ in 0..cfg.refine_rounds {
        dt /= cfg.shrink as f64;
        df /= cfg.shrink as f64;
        points.clear();
        points.push(best);
        for a in -span..=span {
            let theta_deg = best.theta_deg + a as f64 * dt;
            if theta_deg < 0.0 || theta_deg > theta_max || (theta_open && theta_deg >= 90.0) {
                continue;
            }
            for b in -span..=span {
                let f = best.f + b as f64 * df;
                if !(0.0..=1.0).contains(&f) || (a == 0 && b == 0) {
                    continue;
                }
                points.push(Point {
                    theta_deg,
                    f,
                    score: score(theta_deg, f)?,
                });
            }
        }
        best = select(&points);
    }

    let theta = best.theta_deg.to_radians();
    let mi = pair_mi(&unit, p_eff, 1.0, best.f, theta, alph, &cfg.final_budget)?;
    Ok(PairOptimum { theta, f: best.f, mi })
}

/// Mutual information along a rotation-angle slice at fixed `f`.
pub fn theta_slice(pc: &PairChannel, p_t: f64, f: f64, alph: &ProductAlphabet, step_deg: f64) -> Result<Vec<(f64, f64)>> {
    let n = (90.0 / step_deg).round() as usize;
    let b = MiBudget::default();
    (0..n)
        .map(|k| {
            let deg = k as f64 * step_deg;
            Ok((deg, pair_mi(pc, p_t, 1.0, f, deg.to_radians(), alph, &b)?.value))
        })
        .collect()
}

/// Mutual information along a power-fraction slice at fixed angle.
pub fn f_slice(pc: &PairChannel, p_t: f64, theta: f64, alph: &ProductAlphabet, step: f64) -> Result<Vec<(f64, f64)>> {
    let n = (1.0 / step).round() as usize;
    let b = MiBudget::default();
    (0..=n)
        .map(|k| {
            let f = k as f64 / n as f64;
            Ok((f, pair_mi(pc, p_t, 1.0, f, theta, alph, &b)?.value))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableCell {
    pub theta_deg: f64,
    pub f: f64,
    pub mi_bits: f64,
}

/// Optimal `(theta, f, MI)` per condition-number bin and effective SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookupTable {
    pub alphabet: QamOrder,
    pub beta_bins: Vec<f64>,
    #[serde(rename = "snr_dB")]
    pub snr_db: Vec<f64>,
    /// `cells[b][s]` for bin `b` and SNR point `s`.
    pub cells: Vec<Vec<TableCell>>,
}

/// Result of a table query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LookupResult {
    /// Radians.
    pub theta: f64,
    pub f: f64,
    pub mi_bits: f64,
    pub beta_bin: f64,
}

/// Round to nine significant digits, the precision tables are stored with.
fn nine_digits(v: f64) -> f64 {
    format!("{v:.8e}").parse().expect("formatted float parses")
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

/// Build a table by optimizing every `(beta, SNR)` cell independently.
/// Cells run in parallel; the result does not depend on scheduling.
pub fn build_table(beta_bins: &[f64], snr_grid_db: &[f64], alphabet: QamOrder) -> Result<LookupTable> {
    build_table_with(beta_bins, snr_grid_db, alphabet, &OptimizerConfig::default())
}

pub fn build_table_with(
    beta_bins: &[f64],
    snr_grid_db: &[f64],
    alphabet: QamOrder,
    cfg: &OptimizerConfig,
) -> Result<LookupTable> {
    if beta_bins.is_empty() || snr_grid_db.is_empty() {
        return Err(Error::Config("table grids must be non-empty".into()));
    }
    if !strictly_increasing(beta_bins) || !strictly_increasing(snr_grid_db) {
        return Err(Error::Config("table grids must be strictly increasing".into()));
    }
    if beta_bins[0] < 1.0 {
        return Err(Error::Config("condition numbers must be >= 1".into()));
    }
    let c = alphabet.constellation();
    let alph = product(&c, &c);
    let jobs: Vec<(usize, usize)> = (0..beta_bins.len())
        .flat_map(|b| (0..snr_grid_db.len()).map(move |s| (b, s)))
        .collect();
    let flat = jobs
        .par_iter()
        .map(|&(b, s)| {
            let pc = PairChannel::from_beta(beta_bins[b], 1.0)?;
            let opt = optimize_pair_with(&pc, db_to_linear(snr_grid_db[s]), &alph, cfg)?;
            Ok(TableCell {
                theta_deg: nine_digits(opt.theta_deg()),
                f: nine_digits(opt.f),
                mi_bits: nine_digits(opt.mi.value),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let cells = flat.chunks(snr_grid_db.len()).map(<[TableCell]>::to_vec).collect();
    Ok(LookupTable {
        alphabet,
        beta_bins: beta_bins.to_vec(),
        snr_db: snr_grid_db.to_vec(),
        cells,
    })
}

impl LookupTable {
    pub fn validate(&self) -> Result<()> {
        if self.beta_bins.is_empty() || self.snr_db.is_empty() {
            return Err(Error::Config("lookup table is empty".into()));
        }
        if !strictly_increasing(&self.beta_bins) || !strictly_increasing(&self.snr_db) {
            return Err(Error::Config("lookup table grids must be strictly increasing".into()));
        }
        if self.cells.len() != self.beta_bins.len() || self.cells.iter().any(|r| r.len() != self.snr_db.len()) {
            return Err(Error::Config("lookup table cells do not match its grids".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let table: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        table.validate()?;
        Ok(table)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Conventional file name: alphabet plus the bin set.
    pub fn file_name(&self) -> String {
        table_file_name(self.alphabet, &self.beta_bins)
    }

    /// Index of the bin closest to `beta`; ties go to the smaller bin.
    pub fn nearest_bin(&self, beta: f64) -> usize {
        let mut best = 0;
        for (k, b) in self.beta_bins.iter().enumerate() {
            if (beta - b).abs() < (beta - self.beta_bins[best]).abs() {
                best = k;
            }
        }
        if beta.is_infinite() {
            best = self.beta_bins.len() - 1;
        }
        best
    }

    /// Query for a pair with power gain `alpha`, condition number `beta`,
    /// and power `p_t` delivered to it.
    ///
    /// SNR is interpolated linearly in dB and clamped at the top of the
    /// grid. Below the grid angle and fraction are held at the first
    /// column while MI is scaled down linearly in power, so a pair given
    /// no power reports no information.
    pub fn lookup(&self, alpha: f64, beta: f64, p_t: f64) -> LookupResult {
        let b = self.nearest_bin(beta);
        let row = &self.cells[b];
        let beta_bin = self.beta_bins[b];
        let p_eff = p_t * alpha;
        let first = row[0];
        let lo_db = self.snr_db[0];
        if !(p_eff > 0.0) {
            return LookupResult {
                theta: first.theta_deg.to_radians(),
                f: first.f,
                mi_bits: 0.0,
                beta_bin,
            };
        }
        let x = linear_to_db(p_eff);
        if x <= lo_db {
            return LookupResult {
                theta: first.theta_deg.to_radians(),
                f: first.f,
                mi_bits: first.mi_bits * p_eff / db_to_linear(lo_db),
                beta_bin,
            };
        }
        let last = self.snr_db.len() - 1;
        if x >= self.snr_db[last] {
            let c = row[last];
            return LookupResult {
                theta: c.theta_deg.to_radians(),
                f: c.f,
                mi_bits: c.mi_bits,
                beta_bin,
            };
        }
        let k = self.snr_db.partition_point(|&s| s <= x) - 1;
        let t = (x - self.snr_db[k]) / (self.snr_db[k + 1] - self.snr_db[k]);
        let (a, c) = (row[k], row[k + 1]);
        let lerp = |p: f64, q: f64| p + t * (q - p);
        LookupResult {
            theta: lerp(a.theta_deg, c.theta_deg).to_radians(),
            f: lerp(a.f, c.f),
            mi_bits: lerp(a.mi_bits, c.mi_bits),
            beta_bin,
        }
    }
}

pub fn table_file_name(alphabet: QamOrder, beta_bins: &[f64]) -> String {
    let bins: Vec<String> = beta_bins.iter().map(|b| format!("{b}")).collect();
    format!("{alphabet}_beta-{}.json", bins.join("_"))
}
