//! Von Neumann entropy, relative entropy, mutual informations and the Holevo quantity.

use crate::cqdata::JointDistribution;
use crate::error::{Error, Result};
use crate::qmat::{hermitian_eigen, hermitian_eigenvalues, log_matrix, trace_product_re, DensityOperator, HermitianObservable, Operator};

/// Eigenvalues at or below this are treated as outside the support.
pub const SUP_TOL: f64 = 1e-10;
/// Largest squared weight of a support vector allowed outside the other support.
const LEAK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RelEntropy {
    Finite(f64),
    Infinite,
}

impl RelEntropy {
    pub fn is_finite(&self) -> bool {
        matches!(self, RelEntropy::Finite(_))
    }

    /// Value as a float, with `f64::INFINITY` for the infinite case.
    pub fn value(&self) -> f64 {
        match self {
            RelEntropy::Finite(v) => *v,
            RelEntropy::Infinite => f64::INFINITY,
        }
    }
}

fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// Shannon entropy of a probability vector, in nats.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    -p.iter().map(|&x| xlogx(x)).sum::<f64>()
}

pub fn binary_entropy(p: f64) -> f64 {
    shannon_entropy(&[p, 1.0 - p])
}

pub fn von_neumann_entropy(rho: &DensityOperator) -> f64 {
    shannon_entropy(&rho.eigenvalues()).max(0.0)
}

pub fn relative_entropy(rho: &DensityOperator, sigma: &DensityOperator) -> Result<RelEntropy> {
    if rho.shape().dims() != sigma.shape().dims() {
        return Err(Error::ShapeMismatch("relative entropy of states on different shapes".into()));
    }
    let (a, u) = hermitian_eigen(rho.matrix());
    let (b, v) = hermitian_eigen(sigma.matrix());
    // overlap[i][j] = |<u_i|v_j>|^2
    let ov = u.adjoint() * &v;
    let mut cross = 0.0;
    for (i, &ai) in a.iter().enumerate() {
        if ai <= SUP_TOL {
            continue;
        }
        let mut leak = 0.0;
        for (j, &bj) in b.iter().enumerate() {
            let w = ov[(i, j)].norm_sqr();
            if bj > SUP_TOL {
                cross += ai * w * bj.ln();
            } else {
                leak += w;
            }
        }
        if leak > LEAK_TOL {
            return Ok(RelEntropy::Infinite);
        }
    }
    let own: f64 = a.iter().map(|&x| xlogx(x)).sum();
    Ok(RelEntropy::Finite((own - cross).max(0.0)))
}

/// I(A;B) across the cut `A = cut`, `B` = all other factors.
pub fn qmi<S: AsRef<str>>(rho: &DensityOperator, cut: &[S]) -> Result<f64> {
    for l in cut {
        rho.shape().position(l.as_ref())?;
    }
    let rest = rho.shape().complement(cut)?;
    if cut.is_empty() || rest.is_empty() {
        return Err(Error::ShapeMismatch("mutual information needs a proper nonempty cut".into()));
    }
    let ha = von_neumann_entropy(&rho.marginal(cut)?);
    let hb = von_neumann_entropy(&rho.marginal(&rest)?);
    let hab = von_neumann_entropy(rho);
    Ok((ha + hb - hab).max(0.0))
}

/// Finite ensemble {p(x), rho(x)} on a shared shape.
#[derive(Debug, Clone)]
pub struct EnsembleOfStates {
    items: Vec<(f64, DensityOperator)>,
}

impl EnsembleOfStates {
    pub fn new(items: Vec<(f64, DensityOperator)>) -> Result<Self> {
        let Some((_, first)) = items.first() else {
            return Err(Error::InvalidProbability("empty ensemble".into()));
        };
        let dims = first.shape().dims().to_vec();
        let mut total = 0.0;
        for (p, rho) in &items {
            if !(*p >= 0.0) {
                return Err(Error::InvalidProbability(format!("weight {p}")));
            }
            if rho.shape().dims() != dims.as_slice() {
                return Err(Error::ShapeMismatch("ensemble states on different shapes".into()));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidProbability(format!("weights sum to {total}")));
        }
        Ok(Self { items })
    }

    pub fn items(&self) -> &[(f64, DensityOperator)] {
        &self.items
    }

    pub fn average(&self) -> Result<DensityOperator> {
        let refs: Vec<(f64, &DensityOperator)> = self.items.iter().map(|(p, r)| (*p, r)).collect();
        DensityOperator::mixture(&refs)
    }
}

/// chi = H(sum p rho) - sum p H(rho).
pub fn holevo_information(ens: &EnsembleOfStates) -> Result<f64> {
    let avg = ens.average()?;
    let inner: f64 = ens.items().iter().map(|(p, r)| p * von_neumann_entropy(r)).sum();
    Ok((von_neumann_entropy(&avg) - inner).max(0.0))
}

/// Holevo quantity from weights and unnormalized-free states; zero-weight states are ignored.
pub fn holevo_of_weighted(weights: &[f64], states: &[Option<DensityOperator>]) -> Result<f64> {
    let items: Vec<(f64, DensityOperator)> = weights
        .iter()
        .zip(states)
        .filter_map(|(w, s)| s.as_ref().filter(|_| *w > 0.0).map(|s| (*w, s.clone())))
        .collect();
    if items.len() <= 1 {
        return Ok(0.0);
    }
    let total: f64 = items.iter().map(|(w, _)| w).sum();
    let items = items.into_iter().map(|(w, s)| (w / total, s)).collect();
    holevo_information(&EnsembleOfStates::new(items)?)
}

pub fn classical_mi(joint: &JointDistribution) -> f64 {
    let ps = joint.marginal_s();
    let pw = joint.marginal_w();
    let mut acc = 0.0;
    for (s, &p_s) in ps.iter().enumerate() {
        for (w, &p_w) in pw.iter().enumerate() {
            let p = joint.get(s, w);
            if p > 0.0 {
                acc += p * (p / (p_s * p_w)).ln();
            }
        }
    }
    acc.max(0.0)
}

/// Variational lower bound tr[s1 H] - log tr exp(log s2 + H) on D(s1 || s2).
pub fn petz_certificate(s1: &DensityOperator, s2: &DensityOperator, h: &HermitianObservable) -> Result<f64> {
    if s1.shape().dims() != s2.shape().dims() || h.shape().dims() != s1.shape().dims() {
        return Err(Error::ShapeMismatch("certificate operands on different shapes".into()));
    }
    let log2 = log_matrix(s2.matrix())?;
    let eig = hermitian_eigenvalues(&(log2 + h.matrix()));
    Ok(trace_product_re(s1.matrix(), h.matrix()) - log_sum_exp(&eig))
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cqdata::{apply_channel, Channel};
    use crate::qmat::{exp_matrix, real_to_complex, SubsystemShape};
    use crate::random::{random_channel_kraus, random_density, random_hermitian, rng_from_seed};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{LN_2, PI};

    fn qubit(l: &str) -> SubsystemShape {
        SubsystemShape::single(l, 2).unwrap()
    }

    fn two_qubits() -> SubsystemShape {
        SubsystemShape::new([("a", 2), ("b", 2)]).unwrap()
    }

    #[test]
    fn entropy_examples() {
        let pure = DensityOperator::basis(1, qubit("a")).unwrap();
        assert_abs_diff_eq!(von_neumann_entropy(&pure), 0.0, epsilon = 1e-14);
        let mixed = DensityOperator::maximally_mixed(SubsystemShape::single("a", 5).unwrap());
        assert_abs_diff_eq!(von_neumann_entropy(&mixed), 5f64.ln(), epsilon = 1e-12);
        let diag = DensityOperator::diagonal(&[0.25, 0.75], qubit("a")).unwrap();
        let expected = 0.25 * 4f64.ln() + 0.75 * (4.0f64 / 3.0).ln();
        assert_abs_diff_eq!(von_neumann_entropy(&diag), expected, epsilon = 1e-14);
    }

    #[test]
    fn relative_entropy_examples() {
        let mut rng = rng_from_seed(1);
        let rho = random_density(&mut rng, qubit("a"), 2);
        assert_abs_diff_eq!(relative_entropy(&rho, &rho).unwrap().value(), 0.0, epsilon = 1e-12);
        let zero = DensityOperator::basis(0, qubit("a")).unwrap();
        let one = DensityOperator::basis(1, qubit("a")).unwrap();
        let mixed = DensityOperator::maximally_mixed(qubit("a"));
        assert_abs_diff_eq!(relative_entropy(&zero, &mixed).unwrap().value(), LN_2, epsilon = 1e-14);
        assert_eq!(relative_entropy(&zero, &one).unwrap(), RelEntropy::Infinite);
        assert!(relative_entropy(&mixed, &zero).unwrap() == RelEntropy::Infinite);
        assert!(relative_entropy(&zero, &zero).unwrap().is_finite());
    }

    #[test]
    fn qmi_examples() {
        let mut rng = rng_from_seed(2);
        let prod = crate::qmat::tensor_product(
            &random_density(&mut rng, qubit("a"), 2),
            &random_density(&mut rng, qubit("b"), 2),
        )
        .unwrap();
        assert_abs_diff_eq!(qmi(&prod, &["a"]).unwrap(), 0.0, epsilon = 1e-12);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let c = real_to_complex;
        let bell = DensityOperator::from_ket(&[c(h), c(0.0), c(0.0), c(h)], two_qubits()).unwrap();
        assert_abs_diff_eq!(qmi(&bell, &["a"]).unwrap(), 2.0 * LN_2, epsilon = 1e-12);
        let cc = DensityOperator::diagonal(&[0.5, 0.0, 0.0, 0.5], two_qubits()).unwrap();
        assert_abs_diff_eq!(qmi(&cc, &["b"]).unwrap(), LN_2, epsilon = 1e-12);
        assert!(matches!(qmi(&cc, &["x"]), Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn holevo_examples() {
        let mut rng = rng_from_seed(3);
        let rho = random_density(&mut rng, qubit("a"), 2);
        let same = EnsembleOfStates::new(vec![(0.3, rho.clone()), (0.7, rho)]).unwrap();
        assert_abs_diff_eq!(holevo_information(&same).unwrap(), 0.0, epsilon = 1e-12);
        let zero = DensityOperator::basis(0, qubit("a")).unwrap();
        let one = DensityOperator::basis(1, qubit("a")).unwrap();
        let orth = EnsembleOfStates::new(vec![(0.5, zero.clone()), (0.5, one)]).unwrap();
        assert_abs_diff_eq!(holevo_information(&orth).unwrap(), LN_2, epsilon = 1e-12);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = DensityOperator::from_ket(&[real_to_complex(h), real_to_complex(h)], qubit("a")).unwrap();
        let mixed = EnsembleOfStates::new(vec![(0.5, zero), (0.5, plus)]).unwrap();
        let expected = binary_entropy((PI / 8.0).sin().powi(2));
        assert_abs_diff_eq!(holevo_information(&mixed).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn classical_mi_examples() {
        let indep = JointDistribution::new(2, 2, vec![0.12, 0.28, 0.18, 0.42]).unwrap();
        assert_abs_diff_eq!(classical_mi(&indep), 0.0, epsilon = 1e-14);
        let corr = JointDistribution::new(2, 2, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert_abs_diff_eq!(classical_mi(&corr), LN_2, epsilon = 1e-14);
        let bsc = JointDistribution::new(2, 2, vec![0.45, 0.05, 0.05, 0.45]).unwrap();
        assert_abs_diff_eq!(classical_mi(&bsc), LN_2 - binary_entropy(0.1), epsilon = 1e-14);
    }

    #[test]
    fn petz_examples() {
        let mut rng = rng_from_seed(4);
        let s1 = random_density(&mut rng, qubit("a"), 2);
        let s2 = random_density(&mut rng, qubit("a"), 2);
        let zero = HermitianObservable::zeros(qubit("a"));
        assert_abs_diff_eq!(petz_certificate(&s1, &s2, &zero).unwrap(), 0.0, epsilon = 1e-12);
        let h = HermitianObservable::new(
            log_matrix(s1.matrix()).unwrap() - log_matrix(s2.matrix()).unwrap(),
            qubit("a"),
        )
        .unwrap();
        let d = relative_entropy(&s1, &s2).unwrap().value();
        assert_abs_diff_eq!(petz_certificate(&s1, &s2, &h).unwrap(), d, epsilon = 1e-10);
        let singular = DensityOperator::basis(0, qubit("a")).unwrap();
        assert!(matches!(
            petz_certificate(&s1, &singular, &zero),
            Err(Error::SingularLog { .. })
        ));
    }

    #[test]
    fn petz_never_exceeds_relative_entropy() {
        let mut rng = rng_from_seed(5);
        for k in 0..1000 {
            let shape = SubsystemShape::single("a", 2 + k % 3).unwrap();
            let s1 = random_density(&mut rng, shape.clone(), 1 + k % 3);
            let s2 = random_density(&mut rng, shape.clone(), shape.total_dim());
            let h = random_hermitian(&mut rng, shape, 2.0);
            let cert = petz_certificate(&s1, &s2, &h).unwrap();
            let d = relative_entropy(&s1, &s2).unwrap().value();
            assert!(cert <= d + 1e-8, "certificate {cert} above {d}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn qmi_matches_relative_entropy_form(seed in any::<u64>(), rank in 1usize..5) {
            let mut rng = rng_from_seed(seed);
            let rho = random_density(&mut rng, two_qubits(), rank);
            let prod = crate::qmat::tensor_product(&rho.marginal(&["a"]).unwrap(), &rho.marginal(&["b"]).unwrap()).unwrap();
            let i = qmi(&rho, &["a"]).unwrap();
            let d = relative_entropy(&rho, &prod).unwrap().value();
            prop_assert!((i - d).abs() < 1e-8);
        }

        #[test]
        fn holevo_matches_average_divergence(seed in any::<u64>(), n in 1usize..5) {
            let mut rng = rng_from_seed(seed);
            let probs = crate::random::random_probs(&mut rng, n);
            let items: Vec<_> = probs.iter().map(|p| (*p, random_density(&mut rng, qubit("a"), 1 + n % 2))).collect();
            let ens = EnsembleOfStates::new(items).unwrap();
            let avg = ens.average().unwrap();
            let alt: f64 = ens.items().iter().map(|(p, r)| p * relative_entropy(r, &avg).unwrap().value()).sum();
            prop_assert!((holevo_information(&ens).unwrap() - alt).abs() < 1e-8);
        }

        #[test]
        fn data_processing(seed in any::<u64>()) {
            let mut rng = rng_from_seed(seed);
            let rho = random_density(&mut rng, qubit("a"), 2);
            let sigma = random_density(&mut rng, qubit("a"), 2);
            let ch = Channel::new(random_channel_kraus(&mut rng, 2, 3, 2), qubit("a"), SubsystemShape::single("b", 3).unwrap()).unwrap();
            let before = relative_entropy(&rho, &sigma).unwrap().value();
            let after = relative_entropy(&apply_channel(&rho, &ch, &["a"]).unwrap(), &apply_channel(&sigma, &ch, &["a"]).unwrap()).unwrap().value();
            prop_assert!(after <= before + 1e-8);
        }

        #[test]
        fn golden_thompson(seed in any::<u64>(), d in 2usize..5) {
            let mut rng = rng_from_seed(seed);
            let shape = SubsystemShape::single("a", d).unwrap();
            let a = random_hermitian(&mut rng, shape.clone(), 2.0);
            let b = random_hermitian(&mut rng, shape, 2.0);
            let lhs = crate::qmat::trace_re(&exp_matrix(&(a.matrix() + b.matrix())));
            let rhs = trace_product_re(&exp_matrix(a.matrix()), &exp_matrix(b.matrix()));
            prop_assert!(lhs <= rhs + 1e-8);
        }

        #[test]
        fn entropy_in_range(seed in any::<u64>(), d in 1usize..6) {
            let mut rng = rng_from_seed(seed);
            let rho = random_density(&mut rng, SubsystemShape::single("a", d).unwrap(), d);
            let h = von_neumann_entropy(&rho);
            prop_assert!(h >= 0.0 && h <= (d as f64).ln() + 1e-12);
        }
    }
}
