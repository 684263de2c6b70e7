//! Channel matrices, their SVD, and the channel scenarios used in experiments
//! (explicit matrices, parallel/diagonal channels, OFDM, i.i.d. Rayleigh).

use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

/// Smallest singular value must exceed this fraction of the largest.
pub const RANK_TOL: f64 = 1e-10;

/// An `n_r x n_t` complex channel `H` in `y = sqrt(P_T) H x + w`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    h: CMat,
}

impl ChannelMatrix {
    pub fn new(h: CMat) -> Self {
        Self { h }
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n_r = rows.len();
        let n_t = rows.first().map_or(0, Vec::len);
        if n_r == 0 || n_t == 0 || rows.iter().any(|r| r.len() != n_t) {
            return Err(Error::Config("channel matrix rows must be non-empty and equally long".into()));
        }
        Ok(Self::new(CMat::from_fn(n_r, n_t, |i, j| rows[i][j])))
    }

    pub fn diagonal(d: &[f64]) -> Self {
        Self::new(linalg::real_diag(d))
    }

    pub fn matrix(&self) -> &CMat {
        &self.h
    }

    pub fn n_r(&self) -> usize {
        self.h.nrows()
    }

    pub fn n_t(&self) -> usize {
        self.h.ncols()
    }
}

/// `H = U diag(gains) V` with `U†U = V V† = I_n`, gains sorted descending.
#[derive(Debug, Clone)]
pub struct ChannelDecomposition {
    u: CMat,
    gains: Vec<f64>,
    v: CMat,
}

impl ChannelDecomposition {
    /// Parallel channel given directly by its subchannel gains. `order[k]`
    /// names the physical subchannel carrying the k-th strongest gain.
    pub fn parallel(sorted_gains: &[f64], order: &[usize]) -> Result<Self> {
        let n = sorted_gains.len();
        if order.len() != n {
            return Err(Error::Config("gain/permutation length mismatch".into()));
        }
        check_rank(sorted_gains)?;
        let mut u = CMat::zeros(n, n);
        for (k, &phys) in order.iter().enumerate() {
            u[(phys, k)] = Complex64::new(1.0, 0.0);
        }
        let v = u.adjoint();
        Ok(Self {
            u,
            gains: sorted_gains.to_vec(),
            v,
        })
    }

    pub fn u(&self) -> &CMat {
        &self.u
    }

    pub fn v(&self) -> &CMat {
        &self.v
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn n(&self) -> usize {
        self.gains.len()
    }

    pub fn n_r(&self) -> usize {
        self.u.nrows()
    }

    pub fn n_t(&self) -> usize {
        self.v.ncols()
    }

    pub fn reconstruct(&self) -> CMat {
        &self.u * linalg::real_diag(&self.gains) * &self.v
    }

    pub fn channel(&self) -> ChannelMatrix {
        ChannelMatrix::new(self.reconstruct())
    }
}

fn check_rank(sorted_gains: &[f64]) -> Result<()> {
    let largest = sorted_gains.first().copied().unwrap_or(0.0);
    let smallest = sorted_gains.last().copied().unwrap_or(0.0);
    if !(largest > 0.0) || !(smallest > RANK_TOL * largest) {
        return Err(Error::DegenerateChannel { smallest, largest });
    }
    Ok(())
}

/// Singular value decomposition of a full-rank channel with `n_r <= n_t`.
///
/// Ties between equal singular values keep their original column order.
pub fn svd(h: &ChannelMatrix) -> Result<ChannelDecomposition> {
    let (n_r, n_t) = (h.n_r(), h.n_t());
    if n_r > n_t {
        return Err(Error::UnsupportedShape { n_r, n_t });
    }
    // H† = Q diag(s) W†  =>  H = W diag(s) Q†.
    let (q, s, w) = linalg::jacobi_tall(&h.matrix().adjoint());
    let mut idx: Vec<usize> = (0..n_r).collect();
    idx.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let gains: Vec<f64> = idx.iter().map(|&k| s[k]).collect();
    check_rank(&gains)?;
    let u = CMat::from_fn(n_r, n_r, |r, c| w[(r, idx[c])]);
    let v = CMat::from_fn(n_r, n_t, |r, c| q[(c, idx[r])].conj());
    Ok(ChannelDecomposition { u, gains, v })
}

/// Condition number and power gain of one subchannel pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairChannel {
    strong: f64,
    weak: f64,
}

impl PairChannel {
    pub fn new(strong: f64, weak: f64) -> Result<Self> {
        if !(weak >= 0.0) || !(strong >= weak) || !(strong > 0.0) || !strong.is_finite() {
            return Err(Error::Domain(format!(
                "pair gains must satisfy strong >= weak >= 0 and strong > 0, got ({strong}, {weak})"
            )));
        }
        Ok(Self { strong, weak })
    }

    /// Pair with power gain `alpha` and condition number `beta >= 1`.
    pub fn from_beta(beta: f64, alpha: f64) -> Result<Self> {
        if !(beta >= 1.0) || !(alpha > 0.0) {
            return Err(Error::Domain(format!("need beta >= 1 and alpha > 0, got ({beta}, {alpha})")));
        }
        let norm = alpha.sqrt() / (1.0 + beta * beta).sqrt();
        Self::new(beta * norm, norm)
    }

    pub fn strong(&self) -> f64 {
        self.strong
    }

    pub fn weak(&self) -> f64 {
        self.weak
    }

    /// `lambda_strong^2 + lambda_weak^2`.
    pub fn alpha(&self) -> f64 {
        self.strong * self.strong + self.weak * self.weak
    }

    /// `lambda_strong / lambda_weak`; infinite for a dead weak subchannel.
    pub fn beta(&self) -> f64 {
        self.strong / self.weak
    }

    /// The same pair scaled to unit power gain.
    pub fn normalized(&self) -> Self {
        let s = self.alpha().sqrt();
        Self {
            strong: self.strong / s,
            weak: self.weak / s,
        }
    }
}

/// Per-subcarrier gain magnitudes sorted descending, with `order[k]` the
/// subcarrier index holding the k-th largest gain.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmGains {
    pub gains: Vec<f64>,
    pub order: Vec<usize>,
}

impl OfdmGains {
    pub fn decomposition(&self) -> Result<ChannelDecomposition> {
        ChannelDecomposition::parallel(&self.gains, &self.order)
    }
}

/// Magnitudes of the unnormalized `n`-point DFT of the zero-padded impulse
/// response.
pub fn ofdm_gains(impulse_response: &[Complex64], n: usize) -> Result<OfdmGains> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::Config(format!("OFDM size {n} is not a power of two")));
    }
    if impulse_response.len() > n {
        return Err(Error::Config(format!(
            "impulse response has {} taps, more than {n} subcarriers",
            impulse_response.len()
        )));
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    buf[..impulse_response.len()].copy_from_slice(impulse_response);
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mags: Vec<f64> = buf.iter().map(|z| z.norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| mags[b].total_cmp(&mags[a]));
    Ok(OfdmGains {
        gains: order.iter().map(|&k| mags[k]).collect(),
        order,
    })
}

/// I.i.d. circularly-symmetric complex Gaussian entries of unit variance.
pub fn random_mimo(n_t: usize, n_r: usize, seed: u64) -> ChannelMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid sigma");
    // Fill row by row so the stream order does not depend on storage layout.
    let mut entries = Vec::with_capacity(n_r * n_t);
    for _ in 0..n_r * n_t {
        entries.push(Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)));
    }
    ChannelMatrix::new(CMat::from_row_slice(n_r, n_t, &entries))
}

/// The three accepted shapes of a channel input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChannelFile {
    Matrix { matrix: Vec<Vec<[f64; 2]>> },
    Diagonal { diagonal: Vec<f64> },
    Impulse { impulse_response: Vec<[f64; 2]>, n: usize },
}

impl ChannelFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn decompose(&self) -> Result<ChannelDecomposition> {
        match self {
            ChannelFile::Matrix { matrix } => {
                let rows: Vec<Vec<Complex64>> = matrix
                    .iter()
                    .map(|r| r.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
                    .collect();
                svd(&ChannelMatrix::from_rows(&rows)?)
            }
            ChannelFile::Diagonal { diagonal } => svd(&ChannelMatrix::diagonal(diagonal)),
            ChannelFile::Impulse { impulse_response, n } => {
                let taps: Vec<Complex64> = impulse_response.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
                ofdm_gains(&taps, *n)?.decomposition()
            }
        }
    }
}

/// The five-tap impulse response of the 32-carrier OFDM experiment.
pub fn reference_ofdm_taps() -> Vec<Complex64> {
    vec![
        Complex64::new(-0.454, 0.145),
        Complex64::new(-0.258, 0.198),
        Complex64::new(0.0783, 0.069),
        Complex64::new(-0.408, -0.396),
        Complex64::new(-0.532, -0.224),
    ]
}
