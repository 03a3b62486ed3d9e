//! Quantum Wasserstein-1 distance, Lipschitz constants and the product-state MGF check.
//!
//! Both programs are posed over Hermitian blocks; each complex n x n block is
//! handled by the solver as a real symmetric 2n x 2n block.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::qmat::{
    embed_matrix, exp_matrix, log_matrix, tensor_product_all, trace_product_re, trace_re, CMatrix, DensityOperator,
    HermitianObservable, Operator, SubsystemShape,
};
use crate::sdp::{solve, BlockSdp};

pub const W1_DIM_CAP: usize = 64;
/// Slack allowed in the product-state MGF comparison.
pub const MGF_CHECK_TOL: f64 = 1e-8;

/// One term c (rho - sigma) of a transport decomposition, with tr_site rho = tr_site sigma.
#[derive(Debug, Clone)]
pub struct TransportTerm {
    pub weight: f64,
    pub site: usize,
    pub rho: DensityOperator,
    pub sigma: DensityOperator,
}

#[derive(Debug, Clone)]
pub struct W1Result {
    pub value: f64,
    pub primal_witness: Option<Vec<TransportTerm>>,
    /// Observable with Lipschitz constant at most 1 (up to solver tolerance).
    pub dual_witness: Option<HermitianObservable>,
    /// tr[H (rho - sigma)] for the dual witness.
    pub dual_value: Option<f64>,
}

/// Orthonormal basis of n x n Hermitian matrices under the trace inner product.
pub fn hermitian_basis(n: usize) -> Vec<CMatrix> {
    let mut out = Vec::with_capacity(n * n);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..n {
        for j in i..n {
            let mut m = CMatrix::zeros(n, n);
            if i == j {
                m[(i, i)] = Complex64::new(1.0, 0.0);
                out.push(m);
            } else {
                m[(i, j)] = Complex64::new(r, 0.0);
                m[(j, i)] = Complex64::new(r, 0.0);
                out.push(m);
                let mut m = CMatrix::zeros(n, n);
                m[(i, j)] = Complex64::new(0.0, -r);
                m[(j, i)] = Complex64::new(0.0, r);
                out.push(m);
            }
        }
    }
    out
}

/// [[Re, -Im], [Im, Re]] / 2, so that <realify(A), embed(X)> = Re tr[A X].
fn realify(a: &CMatrix) -> DMatrix<f64> {
    let n = a.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let (bi, bj) = (i / n, j / n);
        let z = a[(i % n, j % n)];
        0.5 * match (bi, bj) {
            (0, 0) | (1, 1) => z.re,
            (0, 1) => -z.im,
            _ => z.im,
        }
    })
}

/// Hermitian matrix represented by a real symmetric block (projected onto the embedding).
fn complexify(y: &DMatrix<f64>) -> CMatrix {
    let n = y.nrows() / 2;
    CMatrix::from_fn(n, n, |i, j| {
        Complex64::new(
            0.5 * (y[(i, j)] + y[(n + i, n + j)]),
            0.5 * (y[(n + i, j)] - y[(i, n + j)]),
        )
    })
}

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(Error::DimensionCap { dim: n, cap });
    }
    Ok(())
}

/// Operators I_site (x) F for F in a basis of the complement of `site`.
fn complement_lifts(shape: &SubsystemShape, site: usize) -> Result<Vec<CMatrix>> {
    let label = &shape.labels()[site];
    let rest = shape.complement(&[label])?;
    let n = shape.total_dim();
    if rest.is_empty() {
        return Ok(vec![CMatrix::identity(n, n)]);
    }
    let rest_dim = n / shape.dims()[site];
    hermitian_basis(rest_dim)
        .iter()
        .map(|f| embed_matrix(f, &rest, shape))
        .collect()
}

fn normalized(m: &CMatrix, shape: &SubsystemShape) -> Option<(f64, DensityOperator)> {
    let c = trace_re(m);
    if c <= 1e-12 {
        return None;
    }
    let h = (m + m.adjoint()).map(|z| z * 0.5);
    // interior-point iterates are strictly positive, so only the trace is rescaled
    DensityOperator::from_unnormalized(h, shape.clone()).ok().map(|d| (c, d))
}

pub fn wasserstein1(rho: &DensityOperator, sigma: &DensityOperator, sites: &SubsystemShape) -> Result<W1Result> {
    wasserstein1_with_cap(rho, sigma, sites, W1_DIM_CAP)
}

/// `sites` lists the sites as factors; both states must live on exactly this shape.
pub fn wasserstein1_with_cap(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    sites: &SubsystemShape,
    cap: usize,
) -> Result<W1Result> {
    if rho.shape() != sites || sigma.shape() != sites {
        return Err(Error::ShapeMismatch("states must live on the site shape".into()));
    }
    let n = sites.total_dim();
    check_cap(n, cap)?;
    let m = sites.len();
    let x = rho.matrix() - sigma.matrix();
    let eye = CMatrix::identity(n, n);
    let zero = DMatrix::<f64>::zeros(2 * n, 2 * n);

    let mut c = Vec::with_capacity(2 * m);
    for _ in 0..m {
        c.push(realify(&eye));
        c.push(zero.clone());
    }
    let basis = hermitian_basis(n);
    let mut rows = Vec::new();
    let mut b = Vec::new();
    for e in &basis {
        let re = realify(e);
        let mut row = Vec::with_capacity(2 * m);
        for i in 0..m {
            row.push((2 * i, re.clone()));
            row.push((2 * i + 1, -&re));
        }
        rows.push(row);
        b.push(trace_product_re(e, &x));
    }
    for i in 0..m {
        for g in complement_lifts(sites, i)? {
            let rg = realify(&g);
            rows.push(vec![(2 * i, rg.clone()), (2 * i + 1, -rg)]);
            b.push(0.0);
        }
    }
    let sol = solve(&BlockSdp {
        sizes: vec![2 * n; 2 * m],
        c,
        rows,
        b,
    })?;

    let mut terms = Vec::new();
    let mut value = 0.0;
    for i in 0..m {
        let p = complexify(&sol.x[2 * i]);
        let q = complexify(&sol.x[2 * i + 1]);
        value += trace_re(&p);
        if let (Some((cp, r)), Some((_, s))) = (normalized(&p, sites), normalized(&q, sites)) {
            terms.push(TransportTerm {
                weight: cp,
                site: i,
                rho: r,
                sigma: s,
            });
        }
    }
    let mut h = CMatrix::zeros(n, n);
    for (e, yk) in basis.iter().zip(&sol.y) {
        h += e.map(|z| z * *yk);
    }
    let h = HermitianObservable::new((&h + h.adjoint()).map(|z| z * 0.5), sites.clone())?;
    let dual_value = trace_product_re(h.matrix(), &x);
    Ok(W1Result {
        value: value.max(0.0),
        primal_witness: Some(terms),
        dual_witness: Some(h),
        dual_value: Some(dual_value),
    })
}

/// Largest tr[H (rho - sigma)] over states with tr_site rho = tr_site sigma.
fn site_lipschitz(h: &HermitianObservable, sites: &SubsystemShape, i: usize) -> Result<(f64, TransportTerm)> {
    let n = sites.total_dim();
    let hr = realify(h.matrix());
    let mut rows = vec![vec![(0, realify(&CMatrix::identity(n, n)))]];
    let mut b = vec![1.0];
    for g in complement_lifts(sites, i)? {
        let rg = realify(&g);
        rows.push(vec![(0, rg.clone()), (1, -rg)]);
        b.push(0.0);
    }
    let sol = solve(&BlockSdp {
        sizes: vec![2 * n, 2 * n],
        c: vec![-&hr, hr],
        rows,
        b,
    })?;
    let p = complexify(&sol.x[0]);
    let q = complexify(&sol.x[1]);
    let rho = normalized(&p, sites).map(|x| x.1).unwrap_or_else(|| DensityOperator::maximally_mixed(sites.clone()));
    let sigma = normalized(&q, sites).map(|x| x.1).unwrap_or_else(|| rho.clone());
    let value = trace_product_re(h.matrix(), rho.matrix()) - trace_product_re(h.matrix(), sigma.matrix());
    Ok((
        (-sol.primal).max(value).max(0.0),
        TransportTerm {
            weight: 1.0,
            site: i,
            rho,
            sigma,
        },
    ))
}

pub fn lipschitz_constant(h: &HermitianObservable, sites: &SubsystemShape) -> Result<W1Result> {
    lipschitz_constant_with_cap(h, sites, W1_DIM_CAP)
}

pub fn lipschitz_constant_with_cap(h: &HermitianObservable, sites: &SubsystemShape, cap: usize) -> Result<W1Result> {
    if h.shape().dims() != sites.dims() {
        return Err(Error::ShapeMismatch("observable must live on the site shape".into()));
    }
    check_cap(sites.total_dim(), cap)?;
    let h = h.relabeled(sites.clone())?;
    let mut best: Option<(f64, TransportTerm)> = None;
    for i in 0..sites.len() {
        let (v, t) = site_lipschitz(&h, sites, i)?;
        if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
            best = Some((v, t));
        }
    }
    let (value, term) = best.ok_or_else(|| Error::ShapeMismatch("site shape has no sites".into()))?;
    Ok(W1Result {
        value,
        primal_witness: Some(vec![term]),
        dual_witness: None,
        dual_value: None,
    })
}

/// 2 max_i ||L_i|| / m, an upper bound on the Lipschitz constant of (1/m) sum_i L_i.
pub fn local_loss_lipschitz_bound(local_norms: &[f64], m: usize) -> f64 {
    let max = local_norms.iter().cloned().fold(0.0, f64::max);
    2.0 * max / m as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductMgfCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub lipschitz: f64,
    pub holds: bool,
}

/// tr exp(log rho + lambda (H - tr[rho H])) against exp(lambda^2 m Lip(H)^2 / 2) for product rho.
pub fn product_mgf_check(rhos: &[DensityOperator], h: &HermitianObservable, lambda: f64) -> Result<ProductMgfCheck> {
    let rho = tensor_product_all(rhos)?.ok_or_else(|| Error::ShapeMismatch("need at least one site".into()))?;
    let lip = lipschitz_constant(h, rho.shape())?.value;
    product_mgf_check_with(rhos, h, lambda, lip)
}

/// As `product_mgf_check` with a precomputed Lipschitz constant.
pub fn product_mgf_check_with(
    rhos: &[DensityOperator],
    h: &HermitianObservable,
    lambda: f64,
    lipschitz: f64,
) -> Result<ProductMgfCheck> {
    let rho = tensor_product_all(rhos)?.ok_or_else(|| Error::ShapeMismatch("need at least one site".into()))?;
    let shape = rho.shape().clone();
    if h.shape().dims() != shape.dims() {
        return Err(Error::ShapeMismatch("observable must live on the product shape".into()));
    }
    let n = shape.total_dim();
    let mut log_rho = CMatrix::zeros(n, n);
    for r in rhos {
        let labels: Vec<&str> = r.shape().labels().iter().map(String::as_str).collect();
        log_rho += embed_matrix(&log_matrix(r.matrix())?, &labels, &shape)?;
    }
    let center = trace_product_re(h.matrix(), rho.matrix());
    let shifted = h.matrix() - CMatrix::identity(n, n).map(|z| z * center);
    let lhs = trace_re(&exp_matrix(&(log_rho + shifted.map(|z| z * lambda))));
    let m = rhos.len() as f64;
    let rhs = (lambda * lambda * m * lipschitz * lipschitz / 2.0).exp();
    Ok(ProductMgfCheck {
        lhs,
        rhs,
        lipschitz,
        holds: lhs <= rhs + MGF_CHECK_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::{tensor_product, trace_norm};
    use crate::random::{random_density, random_hermitian, rng_from_seed};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn qubits(m: usize) -> SubsystemShape {
        SubsystemShape::new((0..m).map(|i| (format!("q{i}"), 2))).unwrap()
    }

    fn pauli_z(shape: &SubsystemShape, site: usize) -> HermitianObservable {
        let z = HermitianObservable::diagonal(&[1.0, -1.0], SubsystemShape::single(shape.labels()[site].clone(), 2).unwrap()).unwrap();
        z.embed(shape).unwrap()
    }

    #[test]
    fn basis_is_orthonormal() {
        let b = hermitian_basis(3);
        assert_eq!(b.len(), 9);
        for (i, x) in b.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                let ip = trace_product_re(x, y);
                assert_abs_diff_eq!(ip, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn equal_states_are_at_distance_zero() {
        let mut rng = rng_from_seed(1);
        let s = qubits(2);
        let r = random_density(&mut rng, s.clone(), 4);
        let w = wasserstein1(&r, &r, &s).unwrap();
        assert!(w.value < 1e-6);
    }

    #[test]
    fn single_site_is_half_trace_distance() {
        let mut rng = rng_from_seed(2);
        for d in [2, 3] {
            let s = SubsystemShape::single("a", d).unwrap();
            for _ in 0..10 {
                let r = random_density(&mut rng, s.clone(), d);
                let t = random_density(&mut rng, s.clone(), d);
                let w = wasserstein1(&r, &t, &s).unwrap();
                let diff = HermitianObservable::new(r.matrix() - t.matrix(), s.clone()).unwrap();
                assert_abs_diff_eq!(w.value, trace_norm(&diff) / 2.0, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn two_site_duality_gap_is_small() {
        let mut rng = rng_from_seed(3);
        let s = qubits(2);
        for _ in 0..5 {
            let r = random_density(&mut rng, s.clone(), 4);
            let t = random_density(&mut rng, s.clone(), 4);
            let w = wasserstein1(&r, &t, &s).unwrap();
            let dual = w.dual_value.unwrap();
            let total: f64 = w.primal_witness.as_ref().unwrap().iter().map(|t| t.weight).sum();
            assert!(dual <= w.value + 1e-6 && w.value <= total + 1e-6);
            assert!(w.value - dual <= 1e-5, "gap {}", w.value - dual);
            let lip = lipschitz_constant(w.dual_witness.as_ref().unwrap(), &s).unwrap().value;
            assert!(lip <= 1.0 + 1e-6, "{lip}");
        }
    }

    #[test]
    fn lipschitz_examples() {
        let s = qubits(3);
        let c = HermitianObservable::scalar(2.5, s.clone());
        assert!(lipschitz_constant(&c, &s).unwrap().value < 1e-6);
        let z1 = pauli_z(&s, 1);
        assert_abs_diff_eq!(lipschitz_constant(&z1, &s).unwrap().value, 2.0, epsilon = 1e-6);
        let mut avg = HermitianObservable::zeros(s.clone());
        for i in 0..3 {
            avg = avg.add(&pauli_z(&s, i)).unwrap();
        }
        let avg = avg.scale(1.0 / 3.0);
        let lip = lipschitz_constant(&avg, &s).unwrap().value;
        assert_abs_diff_eq!(lip, 2.0 / 3.0, epsilon = 1e-6);
        assert!(local_loss_lipschitz_bound(&[1.0; 3], 3) >= lip - 1e-9);
    }

    #[test]
    fn local_bound_formula() {
        assert_eq!(local_loss_lipschitz_bound(&[1.0; 4], 4), 0.5);
        assert_eq!(local_loss_lipschitz_bound(&[0.7], 1), 1.4);
    }

    #[test]
    fn local_bound_dominates_random_local_losses() {
        let mut rng = rng_from_seed(5);
        let s = qubits(2);
        for _ in 0..10 {
            let mut total = HermitianObservable::zeros(s.clone());
            let mut norms = Vec::new();
            for i in 0..2 {
                let site = SubsystemShape::single(s.labels()[i].clone(), 2).unwrap();
                let l = random_hermitian(&mut rng, site, 1.0);
                norms.push(crate::qmat::operator_norm(&l));
                total = total.add(&l.embed(&s).unwrap()).unwrap();
            }
            let total = total.scale(0.5);
            let lip = lipschitz_constant(&total, &s).unwrap().value;
            assert!(local_loss_lipschitz_bound(&norms, 2) >= lip - 1e-6);
        }
    }

    #[test]
    fn ancilla_invariance() {
        let mut rng = rng_from_seed(6);
        let s = qubits(2);
        let a = SubsystemShape::single("anc", 2).unwrap();
        let r = random_density(&mut rng, s.clone(), 4);
        let t = random_density(&mut rng, s.clone(), 4);
        let tau = random_density(&mut rng, a, 2);
        let big = s.concat(tau.shape()).unwrap();
        let w0 = wasserstein1(&r, &t, &s).unwrap().value;
        let w1 = wasserstein1(&tensor_product(&r, &tau).unwrap(), &tensor_product(&t, &tau).unwrap(), &big)
            .unwrap()
            .value;
        assert_abs_diff_eq!(w0, w1, epsilon = 1e-5);
    }

    #[test]
    fn dimension_cap_is_enforced() {
        let s = qubits(3);
        let r = DensityOperator::maximally_mixed(s.clone());
        assert!(matches!(wasserstein1_with_cap(&r, &r, &s, 4), Err(Error::DimensionCap { .. })));
    }

    #[test]
    fn product_mgf_examples() {
        let mut rng = rng_from_seed(7);
        let rhos: Vec<DensityOperator> = (0..2)
            .map(|i| random_density(&mut rng, SubsystemShape::single(format!("q{i}"), 2).unwrap(), 2))
            .collect();
        let s = qubits(2);
        let h = random_hermitian(&mut rng, s.clone(), 1.0);
        let zero = product_mgf_check(&rhos, &h, 0.0).unwrap();
        assert_abs_diff_eq!(zero.lhs, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(zero.rhs, 1.0, epsilon = 1e-15);
        let hz = HermitianObservable::zeros(s);
        let c = product_mgf_check(&rhos, &hz, 1.3).unwrap();
        assert_abs_diff_eq!(c.lhs, 1.0, epsilon = 1e-10);
        assert!(c.holds);
        for _ in 0..10 {
            let lambda = rng.random_range(-3.0..3.0);
            assert!(product_mgf_check(&rhos, &h, lambda).unwrap().holds);
        }
    }
}
