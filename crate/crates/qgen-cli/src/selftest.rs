//! Quick invariant checks run by `qgen selftest`.

use qgen::bounds::{certify_cor22, certify_general, evaluate, EvalOptions, MgfSides, ENUM_CAP, HOLDS_TOL};
use qgen::entropy::{petz_certificate, relative_entropy};
use qgen::mgf::{quantum_log_mgf, quantum_log_mgf_gt};
use qgen::qmat::{trace_norm, DensityOperator, HermitianObservable, Operator, SubsystemShape};
use qgen::random::{random_density, random_hermitian, rng_from_seed};
use qgen::scenarios::random::{build_random, RandomConfig};
use qgen::w1::wasserstein1;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> qgen::Result<(bool, String)>) -> Check {
    match f() {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn certificates(n: u64) -> qgen::Result<(bool, String)> {
    let mut worst = f64::INFINITY;
    let mut worst_identity = 0.0f64;
    for seed in 0..n {
        let (t, _) = build_random(&RandomConfig::default(), seed)?;
        let e = evaluate(&t.ens, &t.lr, &t.loss, EvalOptions { enum_cap: ENUM_CAP, relent: true })?;
        worst = worst.min(certify_general(&e, &MgfSides::measured(&e))?.slack);
        worst = worst.min(certify_cor22(&e, None, None)?.slack);
        if let Some(r) = e.expected_relent {
            worst_identity = worst_identity.max((r - e.qmi - e.holevo).abs());
        }
    }
    Ok((
        worst >= -HOLDS_TOL && worst_identity <= 1e-8,
        format!("{n} instances, min slack {worst:.3e}, relative-entropy identity gap {worst_identity:.3e}"),
    ))
}

fn proof_steps(n: u64) -> qgen::Result<(bool, String)> {
    let mut rng = rng_from_seed(0x5e1f);
    let mut worst_gt = f64::NEG_INFINITY;
    let mut worst_petz = f64::NEG_INFINITY;
    for k in 0..n {
        let d = 2 + (k % 3) as usize;
        let shape = SubsystemShape::single("a", d)?;
        let rho = random_density(&mut rng, shape.clone(), d);
        let sigma = random_density(&mut rng, shape.clone(), d);
        let h = random_hermitian(&mut rng, shape, 1.0);
        let lambda = (k as f64 / n as f64 - 0.5) * 4.0;
        worst_gt = worst_gt.max(quantum_log_mgf_gt(&rho, &h, lambda)? - quantum_log_mgf(&rho, &h, lambda)?);
        worst_petz = worst_petz.max(petz_certificate(&rho, &sigma, &h)? - relative_entropy(&rho, &sigma)?.value());
    }
    Ok((
        worst_gt <= 1e-8 && worst_petz <= 1e-8,
        format!("{n} instances, max trace-exponential excess {worst_gt:.3e}, max variational excess {worst_petz:.3e}"),
    ))
}

fn single_site_transport(n: u64) -> qgen::Result<(bool, String)> {
    let mut rng = rng_from_seed(0x3a1);
    let mut worst = 0.0f64;
    for _ in 0..n {
        let shape = SubsystemShape::single("site_0", 2)?;
        let rho = random_density(&mut rng, shape.clone(), 2);
        let sigma = random_density(&mut rng, shape.clone(), 2);
        let w = wasserstein1(&rho, &sigma, &shape)?.value;
        let diff = trace_distance(&rho, &sigma);
        worst = worst.max((w - 0.5 * diff).abs());
    }
    Ok((worst <= 1e-6, format!("{n} pairs, max deviation {worst:.3e}")))
}

fn trace_distance(a: &DensityOperator, b: &DensityOperator) -> f64 {
    let h = HermitianObservable::new(a.matrix() - b.matrix(), a.shape().clone()).expect("difference of states");
    trace_norm(&h)
}

/// Runs every suite; `quick` shrinks the instance counts.
pub fn run(quick: bool) -> Vec<Check> {
    let scale = if quick { 1 } else { 5 };
    vec![
        check("certificates hold on random instances", || certificates(10 * scale)),
        check("proof-step inequalities", || proof_steps(50 * scale)),
        check("single-site transport equals half trace distance", || single_site_transport(10 * scale)),
    ]
}
