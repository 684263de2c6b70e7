//! Subchannel pairings and the planner that picks a pairing, splits power
//! between pairs and sets each pair's rotation and power fraction.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::baselines::waterfill;
use crate::channel::PairChannel;
use crate::constellation::{product, Constellation};
use crate::error::{Error, Result};
use crate::hungarian::max_value_assignment;
use crate::mi::{pair_mi, MiBudget, MiEstimate, PairParams};
use crate::pair::{optimize_pair, LookupTable};

/// Largest `n` for which all pairings are enumerated (945 at n = 10).
pub const MAX_ENUMERATION_N: usize = 10;

/// A perfect matching of subchannels `0..n` into pairs `(i, j)` with
/// `i < j`, ordered by `i`. Displayed and serialized 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pairing {
    n: usize,
    pairs: Vec<(usize, usize)>,
}

impl Pairing {
    pub fn new(n: usize, pairs: Vec<(usize, usize)>) -> Result<Self> {
        let mut pairs: Vec<(usize, usize)> = pairs.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
        pairs.sort_unstable();
        let mut seen = vec![false; n];
        for &(i, j) in &pairs {
            if i == j || j >= n || seen[i] || seen[j] {
                return Err(Error::Config(format!(
                    "pairs {pairs:?} are not a perfect matching of {n} subchannels"
                )));
            }
            seen[i] = true;
            seen[j] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Config(format!("pairs {pairs:?} leave subchannels of {n} unpaired")));
        }
        Ok(Self { n, pairs })
    }

    /// From 1-based index pairs.
    pub fn from_one_based(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        if pairs.iter().any(|&(a, b)| a == 0 || b == 0) {
            return Err(Error::Config("1-based subchannel indices start at 1".into()));
        }
        Self::new(n, pairs.iter().map(|&(a, b)| (a - 1, b - 1)).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn one_based(&self) -> Vec<[usize; 2]> {
        self.pairs.iter().map(|&(i, j)| [i + 1, j + 1]).collect()
    }
}

impl fmt::Display for Pairing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.pairs.iter().map(|(i, j)| format!("({},{})", i + 1, j + 1)).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

impl Serialize for Pairing {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.one_based().serialize(s)
    }
}

fn require_even(n: usize) -> Result<()> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::Unsupported(format!(
            "pairing needs an even number of subchannels, got {n}"
        )));
    }
    Ok(())
}

/// All `(n-1)(n-3)...1` perfect matchings, in lexicographic order.
pub fn enumerate_pairings(n: usize) -> Result<Vec<Pairing>> {
    require_even(n)?;
    if n > MAX_ENUMERATION_N {
        return Err(Error::TooLarge(format!(
            "enumerating pairings is limited to n <= {MAX_ENUMERATION_N}, got {n}"
        )));
    }
    fn rec(free: &mut Vec<usize>, acc: &mut Vec<(usize, usize)>, n: usize, out: &mut Vec<Pairing>) {
        if free.is_empty() {
            out.push(Pairing { n, pairs: acc.clone() });
            return;
        }
        let first = free.remove(0);
        for k in 0..free.len() {
            let partner = free.remove(k);
            acc.push((first, partner));
            rec(free, acc, n, out);
            acc.pop();
            free.insert(k, partner);
        }
        free.insert(0, first);
    }
    let mut out = Vec::new();
    rec(&mut (0..n).collect(), &mut Vec::new(), n, &mut out);
    Ok(out)
}

/// k-th strongest with the k-th weakest.
pub fn x_pairing(n: usize) -> Result<Pairing> {
    require_even(n)?;
    Pairing::new(n, (0..n / 2).map(|k| (k, n - 1 - k)).collect())
}

/// k-th strongest with the (n/2 + k)-th.
pub fn conjectured_pairing(n: usize) -> Result<Pairing> {
    require_even(n)?;
    Pairing::new(n, (0..n / 2).map(|k| (k, n / 2 + k)).collect())
}

fn check_sorted(gains: &[f64]) -> Result<()> {
    if gains.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::Config("subchannel gains must be sorted in descending order".into()));
    }
    if gains.iter().any(|g| !(*g >= 0.0)) {
        return Err(Error::Domain("subchannel gains must be nonnegative".into()));
    }
    Ok(())
}

/// Table value of pairing the i-th weaker-half subchannel (worker) with
/// the j-th stronger-half subchannel (job), each pair at uniform power
/// `2 P_T / n`.
pub fn hungarian_costs(gains: &[f64], p_t: f64, table: &LookupTable) -> Result<Vec<Vec<f64>>> {
    let n = gains.len();
    require_even(n)?;
    check_sorted(gains)?;
    table.validate()?;
    let half = n / 2;
    let pair_power = 2.0 * p_t / n as f64;
    Ok((0..half)
        .map(|i| {
            let weak = gains[half + i];
            (0..half)
                .map(|j| {
                    let strong = gains[j];
                    let alpha = strong * strong + weak * weak;
                    table.lookup(alpha, strong / weak, pair_power).mi_bits
                })
                .collect()
        })
        .collect())
}

/// Stronger half against weaker half, matched to maximize the summed
/// table mutual information.
pub fn hungarian_pairing(gains: &[f64], p_t: f64, table: &LookupTable) -> Result<Pairing> {
    let costs = hungarian_costs(gains, p_t, table)?;
    let half = gains.len() / 2;
    let assignment = max_value_assignment(&costs)?;
    Pairing::new(
        gains.len(),
        assignment.iter().enumerate().map(|(i, &j)| (j, half + i)).collect(),
    )
}

/// Uniformly random perfect matchings, reproducible from `seed`.
pub fn random_pairings(n: usize, count: usize, seed: u64) -> Result<Vec<Pairing>> {
    require_even(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    (0..count)
        .map(|_| {
            perm.sort_unstable();
            perm.shuffle(&mut rng);
            Pairing::new(n, perm.chunks_exact(2).map(|c| (c[0], c[1])).collect())
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerMode {
    Uniform,
    /// Waterfilling with pair k seen as one channel of power gain
    /// `lambda_i^2 + lambda_j^2`.
    WaterfillAlpha,
    /// Grid over the single split of a two-pair system, scored by table.
    Exhaustive,
}

/// Share of the total power per pair, on the simplex.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairPowerAllocation {
    pub pbar2: Vec<f64>,
}

fn pair_channel(gains: &[f64], (i, j): (usize, usize)) -> Result<PairChannel> {
    PairChannel::new(gains[i], gains[j])
}

pub fn allocate_power_pairs(
    pairing: &Pairing,
    gains: &[f64],
    p_t: f64,
    mode: PowerMode,
    table: Option<&LookupTable>,
) -> Result<PairPowerAllocation> {
    if pairing.n() != gains.len() {
        return Err(Error::Config(format!(
            "pairing covers {} subchannels, {} gains given",
            pairing.n(),
            gains.len()
        )));
    }
    let k = pairing.pairs().len();
    let pbar2 = match mode {
        PowerMode::Uniform => vec![1.0 / k as f64; k],
        PowerMode::WaterfillAlpha => {
            let alpha: Vec<f64> = pairing
                .pairs()
                .iter()
                .map(|&(i, j)| gains[i] * gains[i] + gains[j] * gains[j])
                .collect();
            waterfill(&alpha, p_t)?.0
        }
        PowerMode::Exhaustive => {
            if k != 2 {
                return Err(Error::Unsupported(format!(
                    "exhaustive pair power is offered for n = 4 only, got n = {}",
                    pairing.n()
                )));
            }
            let table = table.ok_or_else(|| Error::Config("exhaustive pair power needs a lookup table".into()))?;
            let pcs = [
                pair_channel(gains, pairing.pairs()[0])?,
                pair_channel(gains, pairing.pairs()[1])?,
            ];
            let score = |s: f64| {
                table.lookup(pcs[0].alpha(), pcs[0].beta(), s * p_t).mi_bits
                    + table.lookup(pcs[1].alpha(), pcs[1].beta(), (1.0 - s) * p_t).mi_bits
            };
            let mut best = (0.0, f64::NEG_INFINITY);
            for step in 0..=100 {
                let s = step as f64 / 100.0;
                let v = score(s);
                if v > best.1 {
                    best = (s, v);
                }
            }
            let center = best.0;
            for step in -10i32..=10 {
                let s = center + step as f64 / 1000.0;
                if (0.0..=1.0).contains(&s) {
                    let v = score(s);
                    if v > best.1 {
                        best = (s, v);
                    }
                }
            }
            vec![best.0, 1.0 - best.0]
        }
    };
    Ok(PairPowerAllocation { pbar2 })
}

/// How each pair's rotation and power fraction are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSolver {
    /// Nearest-bin table entry, evaluated on the actual pair gains.
    Lookup,
    /// Full grid optimization on the actual pair gains.
    Optimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Exhaustive,
    X,
    Conjectured,
    Hungarian,
    Random,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Exhaustive,
        Strategy::X,
        Strategy::Conjectured,
        Strategy::Hungarian,
        Strategy::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Exhaustive => "exhaustive",
            Strategy::X => "x",
            Strategy::Conjectured => "conjectured",
            Strategy::Hungarian => "hungarian",
            Strategy::Random => "random",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown pairing strategy `{s}`")))
    }
}

#[derive(Debug, Clone)]
pub struct PlanOptions {
    /// Pair power mode; `None` picks exhaustive for the two-pair
    /// exhaustive search when a table is available and alpha-waterfilling
    /// otherwise.
    pub power: Option<PowerMode>,
    pub solver: PairSolver,
    pub random_count: usize,
    pub seed: u64,
    pub budget: MiBudget,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self {
            power: None,
            solver: PairSolver::Lookup,
            random_count: 50,
            seed: 0,
            budget: MiBudget::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PairReport {
    pub pair: [usize; 2],
    pub theta_deg: f64,
    pub f: f64,
    pub pbar2: f64,
    pub mi_bits: f64,
}

/// A complete X-Code configuration and its mutual information.
#[derive(Debug, Clone)]
pub struct Plan {
    pub strategy: Strategy,
    pub p_t: f64,
    pub pairing: Pairing,
    pub power: PairPowerAllocation,
    pub params: Vec<PairParams>,
    pub pair_mi: Vec<MiEstimate>,
    pub total: MiEstimate,
    /// Mean total over all random pairings, for the random strategy.
    pub random_mean: Option<f64>,
}

impl Plan {
    pub fn report(&self) -> Vec<PairReport> {
        self.pairing
            .pairs()
            .iter()
            .zip(&self.params)
            .zip(&self.pair_mi)
            .map(|((&(i, j), p), mi)| PairReport {
                pair: [i + 1, j + 1],
                theta_deg: p.theta.to_degrees(),
                f: p.f,
                pbar2: p.pbar2,
                mi_bits: mi.value,
            })
            .collect()
    }
}

/// Per-pair parameters and mutual information for a fixed pairing and
/// power split.
#[allow(clippy::too_many_arguments)]
pub fn solve_pairs(
    pairing: &Pairing,
    power: &PairPowerAllocation,
    gains: &[f64],
    p_t: f64,
    alph: &Constellation,
    table: Option<&LookupTable>,
    solver: PairSolver,
    budget: &MiBudget,
) -> Result<(Vec<PairParams>, Vec<MiEstimate>)> {
    let pa = product(alph, alph);
    let mut params = Vec::with_capacity(power.pbar2.len());
    let mut mis = Vec::with_capacity(power.pbar2.len());
    for (&pair, &pbar2) in pairing.pairs().iter().zip(&power.pbar2) {
        let pc = pair_channel(gains, pair)?;
        if pbar2 <= 0.0 {
            params.push(PairParams {
                theta: 0.0,
                f: 1.0,
                pbar2: 0.0,
            });
            mis.push(MiEstimate::exact(0.0, budget.method));
            continue;
        }
        let (theta, f, mi) = match solver {
            PairSolver::Lookup => {
                let table = table.ok_or_else(|| Error::Config("lookup solver needs a table".into()))?;
                let r = table.lookup(pc.alpha(), pc.beta(), p_t * pbar2);
                (r.theta, r.f, pair_mi(&pc, p_t, pbar2, r.f, r.theta, &pa, budget)?)
            }
            PairSolver::Optimize => {
                let opt = optimize_pair(&pc, p_t * pbar2, &pa)?;
                (opt.theta, opt.f, opt.mi)
            }
        };
        params.push(PairParams { theta, f, pbar2 });
        mis.push(mi);
    }
    Ok((params, mis))
}

/// Choose a pairing by `strategy`, split power between pairs and solve
/// each pair. `gains` must be sorted in descending order.
pub fn plan(
    gains: &[f64],
    p_t: f64,
    alph: &Constellation,
    table: Option<&LookupTable>,
    strategy: Strategy,
    opts: &PlanOptions,
) -> Result<Plan> {
    let n = gains.len();
    require_even(n)?;
    check_sorted(gains)?;
    if !(p_t > 0.0) {
        return Err(Error::Domain(format!("total power must be positive, got {p_t}")));
    }
    let candidates = match strategy {
        Strategy::Exhaustive => {
            if n > 6 {
                return Err(Error::TooLarge(format!("exhaustive planning is limited to n <= 6, got {n}")));
            }
            enumerate_pairings(n)?
        }
        Strategy::X => vec![x_pairing(n)?],
        Strategy::Conjectured => vec![conjectured_pairing(n)?],
        Strategy::Hungarian => {
            let table = table.ok_or_else(|| Error::Config("hungarian pairing needs a lookup table".into()))?;
            vec![hungarian_pairing(gains, p_t, table)?]
        }
        Strategy::Random => random_pairings(n, opts.random_count.max(1), opts.seed)?,
    };
    let mode = opts
        .power
        .unwrap_or(if strategy == Strategy::Exhaustive && n == 4 && table.is_some() {
            PowerMode::Exhaustive
        } else {
            PowerMode::WaterfillAlpha
        });

    let evaluated = candidates
        .into_par_iter()
        .map(|pairing| {
            let power = allocate_power_pairs(&pairing, gains, p_t, mode, table)?;
            let (params, pair_mi) = solve_pairs(&pairing, &power, gains, p_t, alph, table, opts.solver, &opts.budget)?;
            let total = MiEstimate::sum(pair_mi.iter().copied(), opts.budget.method);
            Ok(Plan {
                strategy,
                p_t,
                pairing,
                power,
                params,
                pair_mi,
                total,
                random_mean: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mean = evaluated.iter().map(|p| p.total.value).sum::<f64>() / evaluated.len() as f64;
    let mut best: Option<Plan> = None;
    for p in evaluated {
        if best.as_ref().is_none_or(|b| p.total.value > b.total.value) {
            best = Some(p);
        }
    }
    let mut best = best.expect("at least one candidate pairing");
    if strategy == Strategy::Random {
        best.random_mean = Some(mean);
    }
    Ok(best)
}
