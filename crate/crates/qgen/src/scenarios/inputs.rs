//! Config-level descriptions of states and effects.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmat::{CMatrix, DensityOperator, EffectOperator, SubsystemShape};
use crate::random::{random_density, random_povm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateSpec {
    /// Computational basis state |k>.
    Basis(usize),
    /// Qubit state with the given Bloch vector (norm at most 1).
    Bloch([f64; 3]),
    /// Pure state from [re, im] amplitudes, normalized on use.
    Ket(Vec<[f64; 2]>),
    /// Diagonal state with the given probabilities.
    Diag(Vec<f64>),
    Mixed,
    /// Seeded random state of the given rank.
    Random(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectSpec {
    /// Projector onto |k>.
    Basis(usize),
    /// Projector onto the pure qubit state along this Bloch direction.
    Bloch([f64; 3]),
    Ket(Vec<[f64; 2]>),
    /// Diagonal effect with entries in [0, 1].
    Diag(Vec<f64>),
    Zero,
    Identity,
    /// First element of a seeded random two-outcome POVM.
    Random,
}

fn ket(amps: &[[f64; 2]], d: usize) -> Result<Vec<Complex64>> {
    if amps.len() != d {
        return Err(Error::InvalidConfig(format!("ket has {} amplitudes, expected {d}", amps.len())));
    }
    Ok(amps.iter().map(|a| Complex64::new(a[0], a[1])).collect())
}

fn bloch_matrix(v: [f64; 3]) -> CMatrix {
    let half = 0.5;
    CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(half * (1.0 + v[2]), 0.0),
            Complex64::new(half * v[0], -half * v[1]),
            Complex64::new(half * v[0], half * v[1]),
            Complex64::new(half * (1.0 - v[2]), 0.0),
        ],
    )
}

fn need_qubit(d: usize) -> Result<()> {
    if d != 2 {
        return Err(Error::InvalidConfig("Bloch vectors describe qubits only".into()));
    }
    Ok(())
}

impl StateSpec {
    pub fn build(&self, shape: SubsystemShape, rng: &mut impl Rng) -> Result<DensityOperator> {
        let d = shape.total_dim();
        match self {
            StateSpec::Basis(k) => {
                if *k >= d {
                    return Err(Error::InvalidConfig(format!("basis index {k} out of range for dimension {d}")));
                }
                DensityOperator::basis(*k, shape)
            }
            StateSpec::Bloch(v) => {
                need_qubit(d)?;
                let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                if n > 1.0 + 1e-12 {
                    return Err(Error::InvalidConfig(format!("Bloch vector has norm {n} > 1")));
                }
                DensityOperator::new(bloch_matrix(*v), shape)
            }
            StateSpec::Ket(a) => DensityOperator::from_ket(&ket(a, d)?, shape),
            StateSpec::Diag(p) => {
                if p.len() != d {
                    return Err(Error::InvalidConfig(format!("diagonal has {} entries, expected {d}", p.len())));
                }
                DensityOperator::diagonal(p, shape)
            }
            StateSpec::Mixed => Ok(DensityOperator::maximally_mixed(shape)),
            StateSpec::Random(rank) => {
                if *rank == 0 || *rank > d {
                    return Err(Error::InvalidConfig(format!("rank {rank} invalid for dimension {d}")));
                }
                Ok(random_density(rng, shape, *rank))
            }
        }
    }
}

impl EffectSpec {
    pub fn build(&self, shape: SubsystemShape, rng: &mut impl Rng) -> Result<EffectOperator> {
        let d = shape.total_dim();
        match self {
            EffectSpec::Basis(k) => {
                if *k >= d {
                    return Err(Error::InvalidConfig(format!("basis index {k} out of range for dimension {d}")));
                }
                let mut m = CMatrix::zeros(d, d);
                m[(*k, *k)] = Complex64::new(1.0, 0.0);
                EffectOperator::new(m, shape)
            }
            EffectSpec::Bloch(v) => {
                need_qubit(d)?;
                let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                if n <= 1e-12 {
                    return Err(Error::InvalidConfig("Bloch direction must be nonzero".into()));
                }
                EffectOperator::new(bloch_matrix([v[0] / n, v[1] / n, v[2] / n]), shape)
            }
            EffectSpec::Ket(a) => EffectOperator::projector(&ket(a, d)?, shape),
            EffectSpec::Diag(e) => {
                if e.len() != d {
                    return Err(Error::InvalidConfig(format!("diagonal has {} entries, expected {d}", e.len())));
                }
                let m = CMatrix::from_fn(d, d, |i, j| Complex64::new(if i == j { e[i] } else { 0.0 }, 0.0));
                EffectOperator::new(m, shape)
            }
            EffectSpec::Zero => Ok(EffectOperator::zero(shape)),
            EffectSpec::Identity => Ok(EffectOperator::identity(shape)),
            EffectSpec::Random => Ok(random_povm(rng, shape, 2).remove(0)),
        }
    }
}

/// Projector onto cos(t)|0> + sin(t)|1> in dimension d.
pub fn angle_projector(theta: f64, shape: SubsystemShape) -> Result<EffectOperator> {
    let d = shape.total_dim();
    if d < 2 {
        return Err(Error::InvalidConfig("angle families need dimension at least 2".into()));
    }
    let mut v = vec![Complex64::new(0.0, 0.0); d];
    v[0] = Complex64::new(theta.cos(), 0.0);
    v[1] = Complex64::new(theta.sin(), 0.0);
    EffectOperator::projector(&v, shape)
}

/// `n` points spread over the unit sphere (Fibonacci lattice), deterministic.
pub fn sphere_points(n: usize) -> Vec<[f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let z = if n == 1 { 1.0 } else { 1.0 - 2.0 * k as f64 / (n - 1) as f64 };
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * k as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

pub fn check_probs(p: &[f64], what: &str) -> Result<()> {
    let total: f64 = p.iter().sum();
    if p.is_empty() || p.iter().any(|x| !(*x >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!("{what} must be a probability vector (sum {total})")));
    }
    Ok(())
}
