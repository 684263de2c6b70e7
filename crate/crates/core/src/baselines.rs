//! Reference schemes: Gaussian-input waterfilling, waterfilling with a
//! discrete alphabet, Mercury/waterfilling, and the fixed-point optimal
//! precoder.

use num_complex::Complex64;

use crate::channel::{svd, ChannelMatrix};
use crate::constellation::{Constellation, ProductAlphabet};
use crate::error::{Error, Result};
use crate::linalg::{frobenius, real_diag, CMat};
use crate::mi::{mmse_matrix, precoded_mi, scalar_mi, Method, MiBudget, MiEstimate};

/// Squared per-subchannel amplitudes `p_i^2`, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalPowerAllocation {
    pub powers: Vec<f64>,
}

/// Waterfilling over channels with power gains `power_gains` (for example
/// `lambda_i^2`) and total power `p_t`: `p_i = max(0, mu - 1/(g_i P_T))`
/// with `sum p_i = 1`. Returns the powers and the water level `mu`.
pub fn waterfill(power_gains: &[f64], p_t: f64) -> Result<(Vec<f64>, f64)> {
    if power_gains.is_empty() {
        return Err(Error::Config("waterfilling needs at least one channel".into()));
    }
    if power_gains.iter().any(|g| !(*g > 0.0)) || !(p_t > 0.0) {
        return Err(Error::Domain("waterfilling needs positive gains and power".into()));
    }
    let inv: Vec<f64> = power_gains.iter().map(|g| 1.0 / (g * p_t)).collect();
    let mut sorted = inv.clone();
    sorted.sort_by(f64::total_cmp);
    let mut mu = 0.0;
    let mut acc = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        acc += v;
        let level = (1.0 + acc) / (k + 1) as f64;
        if k + 1 < sorted.len() && level <= sorted[k + 1] {
            mu = level;
            break;
        }
        mu = level;
    }
    let powers = inv.iter().map(|v| (mu - v).max(0.0)).collect();
    Ok((powers, mu))
}

/// Gaussian-input capacity `sum log2(1 + lambda_i^2 p_i^2 P_T)` under
/// waterfilling.
pub fn gaussian_waterfill(gains: &[f64], p_t: f64) -> Result<(DiagonalPowerAllocation, f64)> {
    let g2: Vec<f64> = gains.iter().map(|g| g * g).collect();
    let (powers, _) = waterfill(&g2, p_t)?;
    let capacity = g2.iter().zip(&powers).map(|(g, p)| (1.0 + g * p * p_t).log2()).sum();
    Ok((DiagonalPowerAllocation { powers }, capacity))
}

fn sum_scalar_mi(gains: &[f64], powers: &[f64], p_t: f64, c: &Constellation, budget: &MiBudget) -> Result<MiEstimate> {
    let parts = gains
        .iter()
        .zip(powers)
        .map(|(g, p)| scalar_mi(c, g * g * p * p_t, budget))
        .collect::<Result<Vec<_>>>()?;
    Ok(MiEstimate::sum(parts, Method::Quadrature))
}

/// Gaussian waterfilling powers, evaluated with the discrete alphabet on
/// every subchannel and no coding across them.
pub fn discrete_waterfill_mi(gains: &[f64], p_t: f64, alph: &Constellation) -> Result<MiEstimate> {
    let (alloc, _) = gaussian_waterfill(gains, p_t)?;
    sum_scalar_mi(gains, &alloc.powers, p_t, alph, &MiBudget::default())
}

const MERCURY_MAX_SWEEPS: usize = 10_000;
const MERCURY_MOVE_TOL: f64 = 1e-6;
/// Fixed rule for the objective inside the ascent, so that it is a smooth
/// function of the powers.
const MERCURY_NODES: usize = 128;

/// Optimal diagonal power allocation for a discrete alphabet on parallel
/// channels (Mercury/waterfilling), by coordinate ascent on the simplex.
///
/// Each step moves power from the active subchannel with the smallest
/// marginal mutual information to the one with the largest, with an exact
/// line search; the objective is concave in the powers so this reaches
/// the global optimum.
pub fn mercury_waterfill(gains: &[f64], p_t: f64, alph: &Constellation) -> Result<(DiagonalPowerAllocation, MiEstimate)> {
    let n = gains.len();
    let (init, _) = gaussian_waterfill(gains, p_t)?;
    let budget = MiBudget::fixed_nodes(MERCURY_NODES);
    let g2: Vec<f64> = gains.iter().map(|g| g * g * p_t).collect();
    let value = |i: usize, p: f64| -> Result<f64> { Ok(scalar_mi(alph, g2[i] * p.max(0.0), &budget)?.value) };
    let slope = |i: usize, p: f64| -> Result<f64> {
        let h = 1e-6;
        if p > h {
            Ok((value(i, p + h)? - value(i, p - h)?) / (2.0 * h))
        } else {
            Ok((value(i, p + h)? - value(i, p)?) / h)
        }
    };

    let mut p = init.powers;
    if n > 1 {
        let mut converged = false;
        for _ in 0..MERCURY_MAX_SWEEPS {
            let before = p.clone();
            for _ in 0..n {
                let d: Vec<f64> = (0..n).map(|i| slope(i, p[i])).collect::<Result<_>>()?;
                let up = (0..n).max_by(|&a, &b| d[a].total_cmp(&d[b])).expect("n > 1");
                let down = (0..n)
                    .filter(|&i| p[i] > 0.0)
                    .min_by(|&a, &b| d[a].total_cmp(&d[b]))
                    .expect("powers sum to one");
                if up == down || d[up] - d[down] <= 1e-12 * d[up].abs().max(1e-12) {
                    break;
                }
                let (pu, pd) = (p[up], p[down]);
                let gain = |delta: f64| -> Result<f64> { Ok(value(up, pu + delta)? + value(down, pd - delta)?) };
                let delta = golden_max(gain, 0.0, pd, 1e-12)?;
                p[up] = pu + delta;
                p[down] = (pd - delta).max(0.0);
                if p[down] < 1e-15 {
                    p[up] += p[down];
                    p[down] = 0.0;
                }
            }
            let moved = p.iter().zip(&before).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if moved < MERCURY_MOVE_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NonConvergence {
                iterations: MERCURY_MAX_SWEEPS,
                detail: format!("Mercury/waterfilling powers still moving: {p:?}"),
            });
        }
    }
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= s);
    let mi = sum_scalar_mi(gains, &p, p_t, alph, &MiBudget::default())?;
    Ok((DiagonalPowerAllocation { powers: p }, mi))
}

/// Golden-section maximization of a unimodal function on `[lo, hi]`.
pub(crate) fn golden_max<F: Fn(f64) -> Result<f64>>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut a = hi - INV_PHI * (hi - lo);
    let mut b = lo + INV_PHI * (hi - lo);
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    while hi - lo > tol {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + INV_PHI * (hi - lo);
            fb = f(b)?;
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - INV_PHI * (hi - lo);
            fa = f(a)?;
        }
    }
    let mid = 0.5 * (lo + hi);
    // The ends are candidates too; the optimum is often on the boundary.
    let (f_lo, f_mid, f_hi) = (f(lo)?, f(mid)?, f(hi)?);
    Ok(if f_lo >= f_mid && f_lo >= f_hi {
        lo
    } else if f_hi >= f_mid {
        hi
    } else {
        mid
    })
}

/// An `n_t x n` linear precoder with unit Frobenius norm.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderMatrix(CMat);

impl PrecoderMatrix {
    pub fn new(t: CMat) -> Result<Self> {
        let norm = frobenius(&t);
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Domain("precoder must be nonzero and finite".into()));
        }
        Ok(Self(t / Complex64::new(norm, 0.0)))
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }
}

#[derive(Debug, Clone)]
pub struct FixedPointOptions {
    pub max_iter: usize,
    /// Stop when successive iterates differ by less than this (Frobenius).
    pub tol: f64,
    pub seed: u64,
    pub damping: f64,
    pub mmse_samples: usize,
    /// Samples used to rank iterates (shared across iterates).
    pub tracking_samples: usize,
    /// Samples for the reported mutual information of the chosen iterate.
    pub mi_samples: usize,
    /// Extra starting points besides the waterfilling beamformer.
    pub warm_starts: Vec<CMat>,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            max_iter: 30,
            tol: 1e-3,
            seed: 0,
            damping: 0.5,
            mmse_samples: 20_000,
            tracking_samples: 20_000,
            mi_samples: 100_000,
            warm_starts: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FixedPointResult {
    pub precoder: PrecoderMatrix,
    pub mi: MiEstimate,
    pub converged: bool,
    pub iterations: usize,
    /// Index of the start that produced the result: 0 is the waterfilling
    /// beamformer, `k > 0` is `warm_starts[k - 1]`.
    pub start: usize,
}

/// Damped iteration of `T <- H†H T E / ||H†H T E||_F`, with `E` the
/// Monte Carlo MMSE matrix at the current precoder.
///
/// Runs from `V† P` (waterfilling powers) and from each warm start, ranks
/// all iterates with common random numbers and returns the best. The
/// `converged` flag reports whether the winning run met `tol`.
pub fn fixed_point_precoder(
    h: &ChannelMatrix,
    alph: &ProductAlphabet,
    p_t: f64,
    opts: &FixedPointOptions,
) -> Result<FixedPointResult> {
    let dec = svd(h)?;
    let n = dec.n();
    if n > 4 || alph.cardinality() > 256 {
        return Err(Error::TooLarge(format!(
            "fixed-point precoder limited to n <= 4 and 256 input tuples, got n = {n}, {} tuples",
            alph.cardinality()
        )));
    }
    if alph.dim() != n {
        return Err(Error::Config(format!(
            "alphabet has {} components, channel has {n}",
            alph.dim()
        )));
    }
    let (alloc, _) = gaussian_waterfill(dec.gains(), p_t)?;
    let amps: Vec<f64> = alloc.powers.iter().map(|p| p.sqrt()).collect();
    let mut starts = vec![dec.v().adjoint() * real_diag(&amps)];
    for w in &opts.warm_starts {
        if w.shape() != (h.n_t(), n) {
            return Err(Error::Config(format!(
                "warm start is {:?}, expected {:?}",
                w.shape(),
                (h.n_t(), n)
            )));
        }
        starts.push(w.clone());
    }

    let hh = h.matrix().adjoint() * h.matrix();
    let track = |t: &CMat| precoded_mi(h, t, p_t, alph, opts.tracking_samples, opts.seed);
    let mut best: Option<(PrecoderMatrix, f64, bool, usize, usize)> = None;
    for (s, t0) in starts.into_iter().enumerate() {
        let mut t = PrecoderMatrix::new(t0)?;
        let mut score = track(t.matrix())?.value;
        let mut run_best = (t.clone(), score, 0usize);
        let mut converged = false;
        let mut iterations = 0;
        for it in 0..opts.max_iter {
            iterations = it + 1;
            let stream = opts.seed.wrapping_add(1 + it as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let e = mmse_matrix(t.matrix(), h, alph, p_t, opts.mmse_samples, stream)?;
            let g = &hh * t.matrix() * e;
            let gn = frobenius(&g);
            if !(gn > 0.0) {
                break;
            }
            let step = t.matrix() * Complex64::new(1.0 - opts.damping, 0.0) + g * Complex64::new(opts.damping / gn, 0.0);
            let next = PrecoderMatrix::new(step)?;
            let moved = frobenius(&(next.matrix() - t.matrix()));
            t = next;
            score = track(t.matrix())?.value;
            if score > run_best.1 {
                run_best = (t.clone(), score, iterations);
            }
            if moved < opts.tol {
                converged = true;
                break;
            }
        }
        if best.as_ref().is_none_or(|b| run_best.1 > b.1) {
            best = Some((run_best.0, run_best.1, converged, iterations, s));
        }
    }
    let (precoder, _, converged, iterations, start) = best.expect("at least one start");
    let mi = precoded_mi(h, precoder.matrix(), p_t, alph, opts.mi_samples, opts.seed ^ 0x5DEE_CE66)?;
    Ok(FixedPointResult {
        precoder,
        mi,
        converged,
        iterations,
        start,
    })
}
