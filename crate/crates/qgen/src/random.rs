//! Seeded random operators for tests and generated instances.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::qmat::{
    hermitian_eigen, from_spectrum, CMatrix, DensityOperator, EffectOperator,
    HermitianObservable, Operator, SubsystemShape,
};

pub type QRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> QRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

pub fn ginibre(rng: &mut impl Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// GUE-like Hermitian matrix with entries of size about `scale`.
pub fn random_hermitian(rng: &mut impl Rng, shape: SubsystemShape, scale: f64) -> HermitianObservable {
    let d = shape.total_dim();
    let g = ginibre(rng, d, d);
    let h = (&g + g.adjoint()).scale(0.5 * scale / (d as f64).sqrt().max(1.0));
    HermitianObservable::new(h, shape).expect("symmetrized matrix is Hermitian")
}

/// Hermitian matrix whose spectrum is rescaled onto [lo, hi].
pub fn random_hermitian_in_range(
    rng: &mut impl Rng,
    shape: SubsystemShape,
    lo: f64,
    hi: f64,
) -> HermitianObservable {
    let h = random_hermitian(rng, shape.clone(), 1.0);
    let (values, vectors) = hermitian_eigen(h.matrix());
    let min = values[0];
    let max = values[values.len() - 1];
    let spread = max - min;
    let mapped: Vec<f64> = values
        .iter()
        .map(|&v| {
            if spread > 1e-12 {
                lo + (hi - lo) * (v - min) / spread
            } else {
                lo
            }
        })
        .collect();
    HermitianObservable::new(from_spectrum(&mapped, &vectors), shape).expect("Hermitian")
}

/// Mixed state of the given rank from the induced (Ginibre) measure.
pub fn random_density(rng: &mut impl Rng, shape: SubsystemShape, rank: usize) -> DensityOperator {
    let d = shape.total_dim();
    let g = ginibre(rng, d, rank.max(1));
    DensityOperator::from_unnormalized(&g * g.adjoint(), shape).expect("Wishart matrix is PSD")
}

pub fn random_pure(rng: &mut impl Rng, shape: SubsystemShape) -> DensityOperator {
    random_density(rng, shape, 1)
}

/// Haar-random unitary via QR with phase correction.
pub fn random_unitary(rng: &mut impl Rng, d: usize) -> CMatrix {
    random_isometry(rng, d, d)
}

/// Matrix with `cols` orthonormal columns in dimension `rows`.
pub fn random_isometry(rng: &mut impl Rng, rows: usize, cols: usize) -> CMatrix {
    assert!(rows >= cols, "isometry needs rows >= cols");
    let g = ginibre(rng, rows, cols);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for c in 0..cols {
        let diag = r[(c, c)];
        let phase = if diag.norm() > 0.0 { diag / diag.norm() } else { Complex64::new(1.0, 0.0) };
        for row in 0..rows {
            q[(row, c)] *= phase;
        }
    }
    q
}

/// Random `k`-outcome POVM: E_k = S^{-1/2} A_k S^{-1/2} with Wishart A_k.
pub fn random_povm(rng: &mut impl Rng, shape: SubsystemShape, k: usize) -> Vec<EffectOperator> {
    let d = shape.total_dim();
    let parts: Vec<CMatrix> = (0..k)
        .map(|_| {
            let g = ginibre(rng, d, d);
            &g * g.adjoint()
        })
        .collect();
    let sum = parts.iter().fold(CMatrix::zeros(d, d), |acc, p| acc + p);
    let (values, vectors) = hermitian_eigen(&sum);
    let inv_sqrt: Vec<f64> = values.iter().map(|v| 1.0 / v.sqrt()).collect();
    let s = from_spectrum(&inv_sqrt, &vectors);
    parts
        .iter()
        .map(|p| {
            let m = &s * p * &s;
            EffectOperator::new(m, shape.clone()).expect("normalized Wishart effect")
        })
        .collect()
}

/// Kraus operators of a random channel from a Stinespring isometry.
pub fn random_channel_kraus(rng: &mut impl Rng, din: usize, dout: usize, n_kraus: usize) -> Vec<CMatrix> {
    let n = n_kraus.max(din.div_ceil(dout)).max(1);
    let v = random_isometry(rng, dout * n, din);
    (0..n).map(|j| v.rows(j * dout, dout).into_owned()).collect()
}

/// Probability vector from normalized exponential draws.
pub fn random_probs(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::trace_re;

    #[test]
    fn povm_sums_to_identity() {
        let mut rng = rng_from_seed(1);
        let shape = SubsystemShape::single("a", 3).unwrap();
        let povm = random_povm(&mut rng, shape, 4);
        let sum = povm.iter().fold(CMatrix::zeros(3, 3), |acc, e| acc + e.matrix());
        assert!((sum - CMatrix::identity(3, 3)).norm() < 1e-10);
    }

    #[test]
    fn kraus_is_trace_preserving() {
        let mut rng = rng_from_seed(2);
        let ks = random_channel_kraus(&mut rng, 4, 2, 3);
        let sum = ks.iter().fold(CMatrix::zeros(4, 4), |acc, k| acc + k.adjoint() * k);
        assert!((sum - CMatrix::identity(4, 4)).norm() < 1e-10);
    }

    #[test]
    fn densities_are_normalized() {
        let mut rng = rng_from_seed(3);
        let rho = random_density(&mut rng, SubsystemShape::single("a", 5).unwrap(), 2);
        assert!((trace_re(rho.matrix()) - 1.0).abs() < 1e-12);
    }
}
