//! Mutual information of discrete-input Gaussian vector channels.
//!
//! Every channel here is `y = m(u) + w` with `u` uniform over a finite
//! alphabet and `w` circularly-symmetric complex Gaussian with identity
//! covariance. The mixture is stored in real coordinates, where each real
//! axis carries noise of variance 1/2, so a `d`-dimensional complex channel
//! becomes a `2d`-dimensional real one with the same mutual information.
//!
//! Both estimators work with
//!
//! ```text
//! I = log2 M - (1/M) sum_x E_z[ log2 sum_x' exp(-|m_x - m_x' + z|^2 + |z|^2) ]
//! ```
//!
//! which is `h(y) - h(w)` with the conditional entropy term integrated in
//! closed form. Gauss-Hermite tensor rules integrate over `z` for up to four
//! real dimensions; Monte Carlo handles everything else.

use std::collections::HashMap;
use std::f64::consts::LN_2;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelDecomposition, ChannelMatrix, PairChannel};
use crate::constellation::{Constellation, ProductAlphabet};
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::pairing::Pairing;
use crate::quadrature::gauss_hermite;

/// Exponents this far below the running maximum are dropped from a
/// log-sum-exp; `exp(-40)` is below double precision relative to 1.
const LSE_CUTOFF: f64 = 40.0;
/// Tensor-grid nodes whose weight falls below this fraction of the total
/// are skipped.
const WEIGHT_PRUNE: f64 = 1e-16;
/// Upper bound on tensor-grid size during adaptive refinement.
const MAX_GRID_POINTS: usize = 1 << 20;
const MAX_NODES_PER_AXIS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MonteCarlo,
    Quadrature,
}

/// A mutual-information value in bits with its uncertainty.
///
/// For Monte Carlo `std_error` is the sample standard error; for
/// quadrature it is the change seen at the last node doubling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiEstimate {
    pub value: f64,
    pub std_error: f64,
    pub method: Method,
    pub samples_used: usize,
}

impl MiEstimate {
    pub fn exact(value: f64, method: Method) -> Self {
        Self {
            value,
            std_error: 0.0,
            method,
            samples_used: 0,
        }
    }

    fn scaled(self, k: f64) -> Self {
        Self {
            value: self.value * k,
            std_error: self.std_error * k.abs(),
            ..self
        }
    }

    /// Sum of independent estimates; errors combine in quadrature.
    pub fn sum<I: IntoIterator<Item = MiEstimate>>(parts: I, method: Method) -> Self {
        let (mut value, mut var, mut samples) = (0.0, 0.0, 0);
        for p in parts {
            value += p.value;
            var += p.std_error * p.std_error;
            samples += p.samples_used;
        }
        Self {
            value,
            std_error: var.sqrt(),
            method,
            samples_used: samples,
        }
    }
}

/// How to evaluate mutual information.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiBudget {
    pub method: Method,
    pub mc_samples: usize,
    pub seed: u64,
    /// Stop refining once doubling the nodes moves the result by less.
    pub quad_tol: f64,
    /// Fixed nodes per axis; disables refinement when set.
    pub quad_nodes: Option<usize>,
}

impl Default for MiBudget {
    fn default() -> Self {
        Self {
            method: Method::Quadrature,
            mc_samples: 100_000,
            seed: 0,
            quad_tol: 1e-4,
            quad_nodes: None,
        }
    }
}

impl MiBudget {
    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        Self {
            method: Method::MonteCarlo,
            mc_samples: samples,
            seed,
            ..Self::default()
        }
    }

    /// Quadrature with a fixed rule and no refinement.
    pub fn fixed_nodes(nodes: usize) -> Self {
        Self {
            quad_nodes: Some(nodes),
            ..Self::default()
        }
    }
}

/// Uniform mixture of unit-noise Gaussians, in real coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureChannel {
    dim: usize,
    means: Vec<f64>,
    /// Whether `means[M-1-x] == -means[x]` for all `x`.
    antipodal: bool,
}

impl MixtureChannel {
    /// Means given directly in real coordinates (noise variance 1/2 per axis).
    pub fn from_real(dim: usize, means: Vec<f64>) -> Result<Self> {
        if dim == 0 || means.is_empty() || !means.len().is_multiple_of(dim) {
            return Err(Error::Config(
                "mixture means must be a non-empty multiple of the dimension".into(),
            ));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::Domain("mixture means must be finite".into()));
        }
        let antipodal = detect_antipodal(dim, &means);
        Ok(Self { dim, means, antipodal })
    }

    /// Complex means, one vector per alphabet point.
    pub fn from_complex(means: &[Vec<Complex64>]) -> Result<Self> {
        let d = means.first().map_or(0, Vec::len);
        if means.iter().any(|m| m.len() != d) {
            return Err(Error::Config("complex means must share a dimension".into()));
        }
        let flat = means.iter().flat_map(|m| m.iter().flat_map(|z| [z.re, z.im])).collect();
        Self::from_real(2 * d, flat)
    }

    /// Means `map * u` for every tuple `u` of the alphabet.
    pub fn linear(map: &CMat, alphabet: &ProductAlphabet) -> Result<Self> {
        if map.ncols() != alphabet.dim() {
            return Err(Error::Config(format!(
                "map has {} columns but the alphabet has {} dimensions",
                map.ncols(),
                alphabet.dim()
            )));
        }
        let means: Vec<Vec<Complex64>> = alphabet
            .tuples()
            .into_iter()
            .map(|u| {
                let u = nalgebra::DVector::from_vec(u);
                (map * u).iter().copied().collect()
            })
            .collect();
        Self::from_complex(&means)
    }

    pub fn real_dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.means.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    fn mean(&self, x: usize) -> &[f64] {
        &self.means[x * self.dim..(x + 1) * self.dim]
    }

    /// `-(|m_x - m_x' + z|^2 - |z|^2)` for every `x'`, written into `out`.
    fn exponents(&self, diffs: &[f64], sq: &[f64], z: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for (k, e) in out.iter_mut().enumerate() {
            let dk = &diffs[k * d..(k + 1) * d];
            let mut dot = 0.0;
            for i in 0..d {
                dot += dk[i] * z[i];
            }
            *e = -sq[k] - 2.0 * dot;
        }
    }
}

fn detect_antipodal(dim: usize, means: &[f64]) -> bool {
    let m = means.len() / dim;
    let scale = means.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1e-300);
    (0..m).all(|x| {
        let a = &means[x * dim..(x + 1) * dim];
        let b = &means[(m - 1 - x) * dim..(m - x) * dim];
        a.iter().zip(b).all(|(p, q)| (p + q).abs() <= 1e-12 * scale)
    })
}

fn log_sum_exp(e: &[f64]) -> f64 {
    let max = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for &v in e {
        let t = v - max;
        if t > -LSE_CUTOFF {
            s += t.exp();
        }
    }
    max + s.ln()
}

/// Differences `m_x - m_x'` and their squared norms for a fixed `x`.
fn differences(ch: &MixtureChannel, x: usize) -> (Vec<f64>, Vec<f64>) {
    let d = ch.dim;
    let m = ch.len();
    let mx = ch.mean(x);
    let mut diffs = Vec::with_capacity(m * d);
    let mut sq = Vec::with_capacity(m);
    for k in 0..m {
        let mk = ch.mean(k);
        let mut s = 0.0;
        for i in 0..d {
            let v = mx[i] - mk[i];
            diffs.push(v);
            s += v * v;
        }
        sq.push(s);
    }
    (diffs, sq)
}

/// Tensor Gauss-Hermite grid for `E[f(z)]`, `z ~ N(0, I/2)`, with
/// negligible-weight nodes removed. Weights sum to 1.
struct TensorGrid {
    points: Vec<f64>,
    weights: Vec<f64>,
}

type GridCache = Mutex<HashMap<(usize, usize), Arc<TensorGrid>>>;

fn tensor_grid(nodes: usize, dim: usize) -> Arc<TensorGrid> {
    static CACHE: OnceLock<GridCache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(g) = cache.lock().expect("grid cache").get(&(nodes, dim)) {
        return g.clone();
    }
    let rule = gauss_hermite(nodes);
    let norm = std::f64::consts::PI.sqrt().recip();
    let w1: Vec<f64> = rule.weights.iter().map(|w| w * norm).collect();
    let wmax = w1.iter().copied().fold(0.0, f64::max).powi(dim as i32);
    let total = nodes.pow(dim as u32);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let mut idx = vec![0usize; dim];
    for _ in 0..total {
        let w: f64 = idx.iter().map(|&i| w1[i]).product();
        if w >= WEIGHT_PRUNE * wmax {
            points.extend(idx.iter().map(|&i| rule.nodes[i]));
            weights.push(w);
        }
        for slot in idx.iter_mut().rev() {
            *slot += 1;
            if *slot < nodes {
                break;
            }
            *slot = 0;
        }
    }
    let s: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= s;
    }
    let g = Arc::new(TensorGrid { points, weights });
    cache.lock().expect("grid cache").insert((nodes, dim), g.clone());
    g
}

/// Quadrature estimate with a fixed number of nodes per real axis.
fn quad_fixed(ch: &MixtureChannel, nodes: usize) -> f64 {
    let m = ch.len();
    if m == 1 {
        return 0.0;
    }
    let grid = tensor_grid(nodes, ch.dim);
    let mut buf = vec![0.0; m];
    let mut acc = 0.0;
    for x in 0..m {
        let mult = if ch.antipodal {
            let mirror = m - 1 - x;
            match x.cmp(&mirror) {
                std::cmp::Ordering::Less => 2.0,
                std::cmp::Ordering::Equal => 1.0,
                std::cmp::Ordering::Greater => continue,
            }
        } else {
            1.0
        };
        let (diffs, sq) = differences(ch, x);
        let mut inner = 0.0;
        for (z, w) in grid.points.chunks_exact(ch.dim).zip(&grid.weights) {
            ch.exponents(&diffs, &sq, z, &mut buf);
            inner += w * log_sum_exp(&buf);
        }
        acc += mult * inner;
    }
    ((m as f64).ln() - acc / m as f64) / LN_2
}

fn default_start_nodes(dim: usize) -> usize {
    if dim <= 2 {
        32
    } else {
        16
    }
}

fn grid_allows(nodes: usize, dim: usize) -> bool {
    nodes <= MAX_NODES_PER_AXIS && nodes.checked_pow(dim as u32).is_some_and(|n| n <= MAX_GRID_POINTS)
}

/// Gauss-Hermite estimate for mixtures of at most two complex (four real)
/// dimensions, doubling the node count until successive results agree to
/// within `tol` bits.
pub fn mi_mixture_quad(ch: &MixtureChannel) -> Result<MiEstimate> {
    mi_mixture_quad_with(ch, &MiBudget::default())
}

pub fn mi_mixture_quad_with(ch: &MixtureChannel, budget: &MiBudget) -> Result<MiEstimate> {
    if ch.dim > 4 {
        return Err(Error::UnsupportedDimension(format!(
            "quadrature supports at most 4 real dimensions, got {}; use Monte Carlo",
            ch.dim
        )));
    }
    if let Some(n) = budget.quad_nodes {
        return Ok(MiEstimate {
            value: quad_fixed(ch, n),
            std_error: 0.0,
            method: Method::Quadrature,
            samples_used: n.pow(ch.dim as u32),
        });
    }
    let mut nodes = default_start_nodes(ch.dim);
    let mut value = quad_fixed(ch, nodes);
    let mut delta = f64::INFINITY;
    while grid_allows(nodes * 2, ch.dim) {
        nodes *= 2;
        let next = quad_fixed(ch, nodes);
        delta = (next - value).abs();
        value = next;
        if delta < budget.quad_tol {
            break;
        }
    }
    Ok(MiEstimate {
        value,
        std_error: delta,
        method: Method::Quadrature,
        samples_used: nodes.pow(ch.dim as u32),
    })
}

/// Monte Carlo estimate with a reproducible sample stream.
///
/// The stream depends only on `(seed, alphabet size, dimension)`, so
/// evaluating different geometries with one seed uses common random numbers.
pub fn mi_mixture_mc(ch: &MixtureChannel, n_samples: usize, seed: u64) -> Result<MiEstimate> {
    if n_samples < 1000 {
        return Err(Error::Domain(format!(
            "Monte Carlo needs at least 1000 samples, got {n_samples}"
        )));
    }
    let m = ch.len();
    if m == 1 {
        return Ok(MiEstimate {
            samples_used: n_samples,
            ..MiEstimate::exact(0.0, Method::MonteCarlo)
        });
    }
    let d = ch.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid sigma");
    let log_m = (m as f64).ln();
    let mut z = vec![0.0; d];
    let mut buf = vec![0.0; m];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n_samples {
        let x = rng.random_range(0..m);
        for v in z.iter_mut() {
            *v = normal.sample(&mut rng);
        }
        let mx = ch.mean(x);
        for (k, e) in buf.iter_mut().enumerate() {
            let mk = ch.mean(k);
            let mut s = 0.0;
            for i in 0..d {
                let diff = mx[i] - mk[i];
                s += diff * diff + 2.0 * diff * z[i];
            }
            *e = -s;
        }
        let sample = (log_m - log_sum_exp(&buf)) / LN_2;
        sum += sample;
        sum_sq += sample * sample;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let var = ((sum_sq / n - mean * mean) * n / (n - 1.0)).max(0.0);
    Ok(MiEstimate {
        value: mean,
        std_error: (var / n).sqrt(),
        method: Method::MonteCarlo,
        samples_used: n_samples,
    })
}

fn estimate(ch: &MixtureChannel, budget: &MiBudget) -> Result<MiEstimate> {
    match budget.method {
        Method::Quadrature if ch.dim <= 4 => mi_mixture_quad_with(ch, budget),
        _ => mi_mixture_mc(ch, budget.mc_samples, budget.seed),
    }
}

/// The 2x2 rotation `[[cos, sin], [-sin, cos]]` coupling a pair.
pub fn rotation(theta: f64) -> [[f64; 2]; 2] {
    let (s, c) = theta.sin_cos();
    [[c, s], [-s, c]]
}

/// Real 2x2 map `sqrt(P_T * pbar2) * diag(l1, l2) * diag(sqrt f, sqrt(1-f)) * A(theta)`.
pub fn pair_map(pc: &PairChannel, p_t: f64, pbar2: f64, f: f64, theta: f64) -> [[f64; 2]; 2] {
    let amp = (p_t * pbar2).sqrt();
    let rows = [amp * pc.strong() * f.sqrt(), amp * pc.weak() * (1.0 - f).sqrt()];
    let a = rotation(theta);
    [[rows[0] * a[0][0], rows[0] * a[0][1]], [rows[1] * a[1][0], rows[1] * a[1][1]]]
}

/// Mixture of one pair's received signal, in full complex form.
pub fn pair_mixture(
    pc: &PairChannel,
    p_t: f64,
    pbar2: f64,
    f: f64,
    theta: f64,
    alph: &ProductAlphabet,
) -> Result<MixtureChannel> {
    let m = pair_map(pc, p_t, pbar2, f, theta);
    let map = CMat::from_fn(2, 2, |i, j| Complex64::new(m[i][j], 0.0));
    MixtureChannel::linear(&map, alph)
}

/// In-phase half of a real-mapped pair with square-QAM inputs: the PAM
/// product pushed through the real map. The quadrature half is identical
/// and independent, so the pair's mutual information is twice this one's.
fn pair_real_half(m: &[[f64; 2]; 2], levels: (&[f64], &[f64])) -> Result<MixtureChannel> {
    let mut means = Vec::with_capacity(levels.0.len() * levels.1.len() * 2);
    for &a in levels.0 {
        for &b in levels.1 {
            means.push(m[0][0] * a + m[0][1] * b);
            means.push(m[1][0] * a + m[1][1] * b);
        }
    }
    MixtureChannel::from_real(2, means)
}

/// Mutual information of one subchannel pair with power share `pbar2`,
/// fraction `f` on the stronger subchannel and rotation `theta` (radians).
pub fn pair_mi(
    pc: &PairChannel,
    p_t: f64,
    pbar2: f64,
    f: f64,
    theta: f64,
    alph: &ProductAlphabet,
    budget: &MiBudget,
) -> Result<MiEstimate> {
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::Domain(format!("power fraction {f} outside [0, 1]")));
    }
    if !(pbar2 >= 0.0) || !(p_t >= 0.0) {
        return Err(Error::Domain(format!(
            "powers must be nonnegative, got P_T={p_t}, pbar2={pbar2}"
        )));
    }
    if alph.dim() != 2 {
        return Err(Error::Config(format!(
            "pair alphabet must have 2 components, got {}",
            alph.dim()
        )));
    }
    if pbar2 == 0.0 || p_t == 0.0 {
        return Ok(MiEstimate::exact(0.0, budget.method));
    }
    if budget.method == Method::Quadrature {
        if let Some(pam) = alph.pam_components() {
            let m = pair_map(pc, p_t, pbar2, f, theta);
            let half = pair_real_half(&m, (pam[0], pam[1]))?;
            return Ok(mi_mixture_quad_with(&half, budget)?.scaled(2.0));
        }
    }
    estimate(&pair_mixture(pc, p_t, pbar2, f, theta, alph)?, budget)
}

/// Mutual information of a scalar square-QAM channel at SNR `snr` (linear).
pub fn qam_mi(levels: &[f64], snr: f64, budget: &MiBudget) -> Result<MiEstimate> {
    if !(snr >= 0.0) {
        return Err(Error::Domain(format!("SNR must be nonnegative, got {snr}")));
    }
    if snr == 0.0 {
        return Ok(MiEstimate::exact(0.0, Method::Quadrature));
    }
    let amp = snr.sqrt();
    let half = MixtureChannel::from_real(1, levels.iter().map(|l| l * amp).collect())?;
    Ok(mi_mixture_quad_with(&half, budget)?.scaled(2.0))
}

/// Mutual information of a scalar channel carrying `c` at SNR `snr`.
pub fn scalar_mi(c: &Constellation, snr: f64, budget: &MiBudget) -> Result<MiEstimate> {
    if let Some(levels) = c.pam_levels() {
        return qam_mi(levels, snr, budget);
    }
    if !(snr >= 0.0) {
        return Err(Error::Domain(format!("SNR must be nonnegative, got {snr}")));
    }
    let means: Vec<Vec<Complex64>> = c.points().iter().map(|p| vec![p * snr.sqrt()]).collect();
    estimate(&MixtureChannel::from_complex(&means)?, budget)
}

/// Per-pair parameters of an X-Code precoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairParams {
    /// Rotation angle in radians.
    pub theta: f64,
    /// Share of the pair's power on its stronger subchannel.
    pub f: f64,
    /// Share of the total power given to the pair.
    pub pbar2: f64,
}

/// Sum of the per-pair mutual informations of an X-Code precoded channel.
pub fn system_mi(
    dec: &ChannelDecomposition,
    pairing: &Pairing,
    params: &[PairParams],
    p_t: f64,
    alph: &ProductAlphabet,
    budget: &MiBudget,
) -> Result<MiEstimate> {
    let n = dec.n();
    if pairing.n() != n {
        return Err(Error::Config(format!(
            "pairing covers {} subchannels, channel has {n}",
            pairing.n()
        )));
    }
    if params.len() != pairing.pairs().len() {
        return Err(Error::Config("one parameter set per pair required".into()));
    }
    if alph.dim() != n {
        return Err(Error::Config(format!(
            "alphabet has {} components, channel has {n}",
            alph.dim()
        )));
    }
    let total: f64 = params.iter().map(|p| p.pbar2).sum();
    if (total - 1.0).abs() > 1e-9 || params.iter().any(|p| p.pbar2 < 0.0) {
        return Err(Error::Constraint(format!(
            "pair powers must lie on the simplex, sum is {total}"
        )));
    }
    let g = dec.gains();
    let parts = pairing
        .pairs()
        .iter()
        .zip(params)
        .map(|(&(i, j), p)| {
            let pc = PairChannel::new(g[i], g[j])?;
            let sub = ProductAlphabet::new(vec![alph.components()[i].clone(), alph.components()[j].clone()]);
            pair_mi(&pc, p_t, p.pbar2, p.f, p.theta, &sub, budget)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MiEstimate::sum(parts, budget.method))
}

/// Monte Carlo mutual information of `y = sqrt(P_T) H T u + w` for an
/// arbitrary precoder.
pub fn precoded_mi(
    h: &ChannelMatrix,
    t: &CMat,
    p_t: f64,
    alph: &ProductAlphabet,
    samples: usize,
    seed: u64,
) -> Result<MiEstimate> {
    let map = h.matrix() * t * Complex64::new(p_t.sqrt(), 0.0);
    mi_mixture_mc(&MixtureChannel::linear(&map, alph)?, samples, seed)
}

/// Monte Carlo MMSE matrix `E[(u - E[u|y])(u - E[u|y])†]` for
/// `y = sqrt(P_T) H T u + w`, symmetrized to be Hermitian.
pub fn mmse_matrix(t: &CMat, h: &ChannelMatrix, alph: &ProductAlphabet, p_t: f64, n_samples: usize, seed: u64) -> Result<CMat> {
    if t.nrows() != h.n_t() || t.ncols() != alph.dim() {
        return Err(Error::Config(format!(
            "precoder is {}x{}, expected {}x{}",
            t.nrows(),
            t.ncols(),
            h.n_t(),
            alph.dim()
        )));
    }
    if n_samples == 0 {
        return Err(Error::Domain("MMSE estimation needs at least one sample".into()));
    }
    let n = alph.dim();
    let tuples = alph.tuples();
    let map = h.matrix() * t * Complex64::new(p_t.sqrt(), 0.0);
    let means: Vec<Vec<Complex64>> = tuples
        .iter()
        .map(|u| (&map * nalgebra::DVector::from_column_slice(u)).iter().copied().collect())
        .collect();
    let n_r = h.n_r();
    let m = tuples.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid sigma");
    let mut acc = DMatrix::<Complex64>::zeros(n, n);
    let mut logw = vec![0.0; m];
    let mut y = vec![Complex64::new(0.0, 0.0); n_r];
    let mut err = vec![Complex64::new(0.0, 0.0); n];
    for _ in 0..n_samples {
        let x = rng.random_range(0..m);
        for (k, yk) in y.iter_mut().enumerate() {
            *yk = means[x][k] + Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
        }
        let mut max = f64::NEG_INFINITY;
        for (k, lw) in logw.iter_mut().enumerate() {
            let d: f64 = y.iter().zip(&means[k]).map(|(a, b)| (a - b).norm_sqr()).sum();
            *lw = -d;
            max = max.max(-d);
        }
        let mut norm = 0.0;
        err.iter_mut().for_each(|e| *e = Complex64::new(0.0, 0.0));
        for (k, lw) in logw.iter().enumerate() {
            let w = (lw - max).exp();
            norm += w;
            for (e, u) in err.iter_mut().zip(&tuples[k]) {
                *e += u * w;
            }
        }
        for (e, u) in err.iter_mut().zip(&tuples[x]) {
            *e = u - *e / norm;
        }
        for i in 0..n {
            for j in 0..n {
                acc[(i, j)] += err[i] * err[j].conj();
            }
        }
    }
    acc /= Complex64::new(n_samples as f64, 0.0);
    let herm = (&acc + acc.adjoint()) * Complex64::new(0.5, 0.0);
    Ok(herm)
}
