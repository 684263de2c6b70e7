//! Assembles the full precoder `T = V† P G` from a pairing and per-pair
//! rotations and powers.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::channel::{ChannelDecomposition, ChannelMatrix};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::mi::{rotation, PairParams};
use crate::pairing::{Pairing, Plan};

/// Real orthogonal `n x n` matrix holding each pair's rotation at the
/// rows and columns of its two subchannels.
#[derive(Debug, Clone)]
pub struct XCodeGenerator {
    g: DMatrix<f64>,
}

impl XCodeGenerator {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn n(&self) -> usize {
        self.g.nrows()
    }
}

/// `angles` are in radians, one per pair in pairing order.
pub fn build_generator(pairing: &Pairing, angles: &[f64]) -> Result<XCodeGenerator> {
    if angles.len() != pairing.pairs().len() {
        return Err(Error::Config(format!(
            "{} angles given for {} pairs",
            angles.len(),
            pairing.pairs().len()
        )));
    }
    let mut g = DMatrix::zeros(pairing.n(), pairing.n());
    for (&(i, j), &theta) in pairing.pairs().iter().zip(angles) {
        let a = rotation(theta);
        g[(i, i)] = a[0][0];
        g[(i, j)] = a[0][1];
        g[(j, i)] = a[1][0];
        g[(j, j)] = a[1][1];
    }
    Ok(XCodeGenerator { g })
}

#[derive(Debug, Clone)]
pub struct FullPrecoder {
    t: CMat,
    /// Per-subchannel power shares `p_k^2`, summing to one.
    powers: Vec<f64>,
    generator: XCodeGenerator,
    pairing: Pairing,
    params: Vec<PairParams>,
}

impl FullPrecoder {
    /// The `n_t x n` precoder.
    pub fn matrix(&self) -> &CMat {
        &self.t
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn generator(&self) -> &XCodeGenerator {
        &self.generator
    }

    /// `P G`, the precoder seen in the SVD domain.
    pub fn equivalent(&self) -> CMat {
        let n = self.generator.n();
        CMat::from_fn(n, n, |r, c| {
            Complex64::new(self.powers[r].sqrt() * self.generator.g[(r, c)], 0.0)
        })
    }

    /// Largest entry of `|U† H T - diag(gains) P G|`.
    pub fn diagonalization_error(&self, dec: &ChannelDecomposition, h: &ChannelMatrix) -> f64 {
        let lhs = dec.u().adjoint() * h.matrix() * &self.t;
        let rhs = linalg::real_diag(dec.gains()) * self.equivalent();
        (lhs - rhs).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Entry {
            re: f64,
            im: f64,
        }
        #[derive(Serialize)]
        struct Dump<'a> {
            rows: usize,
            cols: usize,
            matrix: Vec<Vec<Entry>>,
            pairing: &'a Pairing,
            theta_deg: Vec<f64>,
            f: Vec<f64>,
            pbar2: Vec<f64>,
            powers: &'a [f64],
        }
        let dump = Dump {
            rows: self.t.nrows(),
            cols: self.t.ncols(),
            matrix: (0..self.t.nrows())
                .map(|r| {
                    (0..self.t.ncols())
                        .map(|c| Entry {
                            re: self.t[(r, c)].re,
                            im: self.t[(r, c)].im,
                        })
                        .collect()
                })
                .collect(),
            pairing: &self.pairing,
            theta_deg: self.params.iter().map(|p| p.theta.to_degrees()).collect(),
            f: self.params.iter().map(|p| p.f).collect(),
            pbar2: self.params.iter().map(|p| p.pbar2).collect(),
            powers: &self.powers,
        };
        Ok(serde_json::to_string_pretty(&dump)?)
    }
}

pub fn build_precoder(dec: &ChannelDecomposition, pairing: &Pairing, params: &[PairParams]) -> Result<FullPrecoder> {
    let n = dec.n();
    if pairing.n() != n {
        return Err(Error::Config(format!(
            "pairing covers {} subchannels, channel has {n}",
            pairing.n()
        )));
    }
    let angles: Vec<f64> = params.iter().map(|p| p.theta).collect();
    let generator = build_generator(pairing, &angles)?;
    let mut powers = vec![0.0; n];
    for (&(i, j), p) in pairing.pairs().iter().zip(params) {
        if !(0.0..=1.0).contains(&p.f) || p.pbar2 < 0.0 {
            return Err(Error::Domain(format!("invalid pair parameters {p:?}")));
        }
        powers[i] = p.pbar2 * p.f;
        powers[j] = p.pbar2 * (1.0 - p.f);
    }
    let total: f64 = powers.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Constraint(format!("precoder power must sum to 1, got {total}")));
    }
    let pg = CMat::from_fn(n, n, |r, c| Complex64::new(powers[r].sqrt() * generator.g[(r, c)], 0.0));
    let t = dec.v().adjoint() * pg;
    Ok(FullPrecoder {
        t,
        powers,
        generator,
        pairing: pairing.clone(),
        params: params.to_vec(),
    })
}

pub fn build_from_plan(dec: &ChannelDecomposition, plan: &Plan) -> Result<FullPrecoder> {
    build_precoder(dec, &plan.pairing, &plan.params)
}
