//! Small dense complex linear algebra: one-sided Jacobi SVD and helpers.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;

/// Off-diagonal decay threshold, relative to the column norms.
const JACOBI_TOL: f64 = 1e-15;
const MAX_SWEEPS: usize = 80;

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn real_diag(d: &[f64]) -> CMat {
    CMat::from_fn(d.len(), d.len(), |i, j| {
        if i == j {
            Complex64::new(d[i], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Thin SVD `A = W diag(s) Q†` of a matrix with at least as many rows as
/// columns, by Hestenes one-sided Jacobi rotations on the columns.
///
/// Returns `(Q, s, W)` with `Q` (rows x cols) having orthonormal columns
/// and `W` (cols x cols) unitary. Singular values come back in column
/// order, unsorted. Zero columns yield a zero singular value and a zero
/// column in `Q`.
pub(crate) fn jacobi_tall(a: &CMat) -> (CMat, Vec<f64>, CMat) {
    let (rows, cols) = a.shape();
    assert!(rows >= cols, "jacobi_tall expects rows >= cols");
    let mut x = a.clone();
    let mut w = identity(cols);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let (mut alpha, mut beta) = (0.0, 0.0);
                let mut gamma = Complex64::new(0.0, 0.0);
                for r in 0..rows {
                    let xp = x[(r, p)];
                    let xq = x[(r, q)];
                    alpha += xp.norm_sqr();
                    beta += xq.norm_sqr();
                    gamma += xp.conj() * xq;
                }
                let g = gamma.norm();
                if g <= JACOBI_TOL * (alpha * beta).sqrt() || g == 0.0 {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = (1.0 + t * t).sqrt().recip();
                let s = c * t;
                // Column update by the unitary [[c, s], [-s e^{-i phi}, c e^{-i phi}]].
                let pc = phase.conj();
                for r in 0..rows {
                    let xp = x[(r, p)];
                    let xq = x[(r, q)] * pc;
                    x[(r, p)] = xp * c - xq * s;
                    x[(r, q)] = xp * s + xq * c;
                }
                for r in 0..cols {
                    let wp = w[(r, p)];
                    let wq = w[(r, q)] * pc;
                    w[(r, p)] = wp * c - wq * s;
                    w[(r, q)] = wp * s + wq * c;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sv = Vec::with_capacity(cols);
    for j in 0..cols {
        let norm = x.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        sv.push(norm);
        if norm > 0.0 {
            let inv = norm.recip();
            for r in 0..rows {
                x[(r, j)] *= inv;
            }
        }
    }
    (x, sv, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CMat::from_fn(rows, cols, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    #[test]
    fn tall_factorization_reconstructs() {
        for (rows, cols, seed) in [(3, 2, 1), (5, 5, 2), (8, 3, 3), (1, 1, 4)] {
            let a = random(rows, cols, seed);
            let (q, s, w) = jacobi_tall(&a);
            let rebuilt = &q * real_diag(&s) * w.adjoint();
            assert!(frobenius(&(rebuilt - &a)) < 1e-12 * frobenius(&a).max(1.0));
            let qtq = q.adjoint() * &q;
            assert!(frobenius(&(qtq - identity(cols))) < 1e-12);
            let wtw = w.adjoint() * &w;
            assert!(frobenius(&(wtw - identity(cols))) < 1e-12);
        }
    }

    #[test]
    fn agrees_with_nalgebra_singular_values() {
        let a = random(6, 4, 11);
        let (_, mut s, _) = jacobi_tall(&a);
        s.sort_by(|x, y| y.total_cmp(x));
        let mut reference: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
        reference.sort_by(|x, y| y.total_cmp(x));
        for (x, y) in s.iter().zip(&reference) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
    }
}
