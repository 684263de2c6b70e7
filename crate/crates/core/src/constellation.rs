//! Square QAM alphabets and their Cartesian products.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite complex signal set with unit average energy.
///
/// Square QAM constellations also keep their per-axis PAM levels so that
/// real-valued precoders can split the in-phase and quadrature parts.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    points: Vec<Complex64>,
    pam: Option<Vec<f64>>,
    name: String,
}

/// Identifier used in file formats (`qam4`, `qam16`, ...).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct QamOrder(usize);

impl QamOrder {
    pub fn new(order: usize) -> Result<Self> {
        match order {
            4 | 16 | 64 | 256 => Ok(Self(order)),
            other => Err(Error::InvalidOrder(other)),
        }
    }

    pub fn order(self) -> usize {
        self.0
    }

    pub fn constellation(self) -> Constellation {
        make_qam(self.0).expect("validated order")
    }
}

impl std::fmt::Display for QamOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "qam{}", self.0)
    }
}

impl std::str::FromStr for QamOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digits = s.trim().trim_start_matches("qam").trim_start_matches("QAM");
        let order = digits
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("unrecognized alphabet `{s}`")))?;
        Self::new(order)
    }
}

impl TryFrom<String> for QamOrder {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<QamOrder> for String {
    fn from(q: QamOrder) -> String {
        q.to_string()
    }
}

/// Square M-QAM built from two sqrt(M)-PAM alphabets in quadrature, scaled
/// to unit mean power.
///
/// Points are enumerated with the in-phase level as the slow index and the
/// quadrature level as the fast index, both ascending.
pub fn make_qam(order: usize) -> Result<Constellation> {
    QamOrder::new(order)?;
    let side = (order as f64).sqrt().round() as usize;
    // Mean energy of the odd-integer grid {±1, ±3, ...}^2 is 2 (side^2 - 1) / 3.
    let scale = (2.0 * (order as f64 - 1.0) / 3.0).sqrt().recip();
    let pam: Vec<f64> = (0..side).map(|k| (2.0 * k as f64 - (side as f64 - 1.0)) * scale).collect();
    let points = pam
        .iter()
        .flat_map(|&re| pam.iter().map(move |&im| Complex64::new(re, im)))
        .collect();
    Ok(Constellation {
        points,
        pam: Some(pam),
        name: format!("qam{order}"),
    })
}

impl Constellation {
    /// Arbitrary signal set. No normalization is applied.
    pub fn from_points(name: impl Into<String>, points: Vec<Complex64>) -> Self {
        Self {
            points,
            pam: None,
            name: name.into(),
        }
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Per-axis PAM levels when the set is a square QAM grid.
    pub fn pam_levels(&self) -> Option<&[f64]> {
        self.pam.as_deref()
    }

    pub fn mean_power(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.order() as f64
    }

    pub fn mean(&self) -> Complex64 {
        self.points.iter().sum::<Complex64>() / self.order() as f64
    }

    pub fn min_distance_sqr(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                best = best.min((a - b).norm_sqr());
            }
        }
        best
    }
}

/// Cartesian product of per-dimension alphabets.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductAlphabet {
    components: Vec<Constellation>,
}

/// Two-component products, one per subchannel pair.
pub fn product(a: &Constellation, b: &Constellation) -> ProductAlphabet {
    ProductAlphabet::new(vec![a.clone(), b.clone()])
}

impl ProductAlphabet {
    pub fn new(components: Vec<Constellation>) -> Self {
        Self { components }
    }

    /// The same alphabet on every one of `n` dimensions.
    pub fn uniform(c: &Constellation, n: usize) -> Self {
        Self::new(vec![c.clone(); n])
    }

    pub fn components(&self) -> &[Constellation] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn cardinality(&self) -> usize {
        self.components.iter().map(Constellation::order).product()
    }

    /// All tuples in lexicographic order, last component varying fastest.
    pub fn tuples(&self) -> Vec<Vec<Complex64>> {
        let mut out = Vec::with_capacity(self.cardinality());
        let mut idx = vec![0usize; self.dim()];
        if self.components.iter().any(|c| c.order() == 0) {
            return out;
        }
        loop {
            out.push(idx.iter().zip(&self.components).map(|(&i, c)| c.points[i]).collect());
            let mut d = self.dim();
            loop {
                if d == 0 {
                    return out;
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < self.components[d].order() {
                    break;
                }
                idx[d] = 0;
            }
        }
    }

    /// Per-dimension PAM level sets, if every component is a square QAM.
    pub(crate) fn pam_components(&self) -> Option<Vec<&[f64]>> {
        self.components.iter().map(|c| c.pam_levels()).collect()
    }

    /// True when every component is the same signal set.
    pub fn is_homogeneous(&self) -> bool {
        self.components.windows(2).all(|w| w[0].points == w[1].points)
    }

    pub fn name(&self) -> String {
        if self.is_homogeneous() && !self.components.is_empty() {
            self.components[0].name.clone()
        } else {
            self.components.iter().map(|c| c.name.as_str()).collect::<Vec<_>>().join("x")
        }
    }
}
