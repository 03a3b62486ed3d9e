//! Exact risks, information terms and generalization-bound certificates.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cqdata::{
    hyp_state, learner_joint, learner_output_state, CQEnsemble, JointDistribution, Learner, MASS_TOL, P_FLOOR,
};
use crate::entropy::{classical_mi, holevo_of_weighted, qmi, relative_entropy};
use crate::error::{Error, Result};
use crate::loss::LossFamily;
use crate::mgf::{
    certifies, compose_local_subgaussian, default_grid, fit_subgaussian, lambda_grid, spectral_law, DiscreteLaw,
    FitMode, LogMgfProfile, MgfBound, PairMgf, ScalarFn,
};
use crate::qmat::{tensor_product, trace_product_re, DensityOperator, EffectOperator, Operator};

pub const ENUM_CAP: u128 = 2_000_000;
/// A certificate holds when its slack is at least minus this.
pub const HOLDS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskReport {
    pub empirical: f64,
    #[serde(rename = "true")]
    pub true_risk: f64,
    pub gen: f64,
}

impl RiskReport {
    pub fn new(empirical: f64, true_risk: f64) -> Self {
        Self {
            empirical,
            true_risk,
            gen: true_risk - empirical,
        }
    }
}

/// Everything the certificates need, computed once by exact enumeration.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub risks: RiskReport,
    pub joint: Option<JointDistribution>,
    /// E over P^A of I(test; hyp) in sigma(S, W).
    pub qmi: f64,
    /// E over P^A of sum_i I(test_i; hyp_i), when the loss is local.
    pub local_qmi: Option<f64>,
    /// E over S of the Holevo quantity of {P(w|S), rho_test(S, w)}.
    pub holevo: f64,
    /// I(S; W).
    pub mi: f64,
    /// E over P^A of D(sigma || tau).
    pub expected_relent: Option<f64>,
    /// Log-MGFs of L(s, w) in tau(s, w) for pairs with positive mass.
    pub quantum: Arc<Vec<PairMgf>>,
    /// Per hypothesis with positive marginal: law of tr[L(S, w) tau(S, w)] over S.
    pub classical: Arc<Vec<DiscreteLaw>>,
    pub skipped_mass: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    pub enum_cap: u128,
    pub relent: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            enum_cap: ENUM_CAP,
            relent: true,
        }
    }
}

struct SampleEval {
    empirical: f64,
    qmi: f64,
    local_qmi: f64,
    holevo: f64,
    relent: f64,
    values: Vec<Option<f64>>,
    laws: Vec<PairMgf>,
}

pub fn check_enumeration(n_s: usize, n_w: usize, cap: u128) -> Result<()> {
    let pairs = n_s as u128 * n_w as u128;
    if pairs > cap {
        return Err(Error::EnumerationCap { pairs, cap });
    }
    Ok(())
}

fn output_labels(ens: &CQEnsemble, lr: &Learner) -> Vec<String> {
    ens.test_labels().iter().chain(lr.hyp_shape().labels()).cloned().collect()
}

/// Exact evaluation by enumerating every (s, w).
pub fn evaluate(ens: &CQEnsemble, lr: &Learner, loss: &LossFamily, opts: EvalOptions) -> Result<Evaluation> {
    check_enumeration(ens.len(), lr.n_hyp(), opts.enum_cap)?;
    let labels = output_labels(ens, lr);
    if loss.shape().labels() != labels.as_slice() {
        return Err(Error::ShapeMismatch(format!(
            "loss acts on {:?}, learner outputs live on {:?}",
            loss.shape().labels(),
            labels
        )));
    }
    let joint = learner_joint(ens, lr)?;
    let n_w = lr.n_hyp();
    let test_labels = ens.test_labels().to_vec();
    let trivial_hyp = lr.has_trivial_hyp();
    let local = loss.local();

    let per_sample: Vec<SampleEval> = (0..ens.len())
        .into_par_iter()
        .map(|idx| -> Result<SampleEval> {
            let entry = &ens.entries()[idx];
            let q = joint.conditional(idx);
            let rho_test = ens.test_state(idx)?;
            let mut out = SampleEval {
                empirical: 0.0,
                qmi: 0.0,
                local_qmi: 0.0,
                holevo: 0.0,
                relent: 0.0,
                values: vec![None; n_w],
                laws: Vec::new(),
            };
            let mut test_posts: Vec<Option<DensityOperator>> = vec![None; n_w];
            for w in 0..n_w {
                let l = loss.observable(&entry.record, w)?;
                if q[w] > P_FLOOR {
                    let sigma = learner_output_state(ens, lr, idx, w)?;
                    let sigma = sigma.relabeled(loss.shape().clone())?;
                    out.empirical += q[w] * l.expectation(&sigma)?;
                    let hyp = if trivial_hyp {
                        DensityOperator::maximally_mixed(lr.hyp_shape().clone())
                    } else {
                        sigma.marginal(lr.hyp_shape().labels())?
                    };
                    let tau = tensor_product(&rho_test, &hyp)?.relabeled(loss.shape().clone())?;
                    if !trivial_hyp {
                        out.qmi += q[w] * qmi(&sigma, &test_labels)?;
                        if let Some(local) = local {
                            let mut acc = 0.0;
                            for i in 0..local.n_sites() {
                                if local.hyp[i].is_empty() {
                                    continue;
                                }
                                let part = sigma.marginal(&local.site_labels(i))?;
                                acc += qmi(&part, &local.test[i])?;
                            }
                            out.local_qmi += q[w] * acc;
                        }
                    }
                    if opts.relent {
                        out.relent += q[w] * relative_entropy(&sigma, &tau)?.value();
                    }
                    test_posts[w] = Some(sigma.marginal(&test_labels)?);
                    out.values[w] = Some(l.expectation(&tau)?);
                    out.laws.push(PairMgf::Spectrum(spectral_law(&tau, &l)?));
                } else if let Some(hyp) = hyp_state(ens, lr, idx, w)? {
                    let tau = tensor_product(&rho_test, &hyp)?.relabeled(loss.shape().clone())?;
                    out.values[w] = Some(l.expectation(&tau)?);
                }
            }
            out.holevo = holevo_of_weighted(&q, &test_posts)?;
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;

    let p_s: Vec<f64> = ens.entries().iter().map(|e| e.prob).collect();
    let p_w = joint.marginal_w();
    let mut empirical = 0.0;
    let mut qmi_sum = 0.0;
    let mut local_sum = 0.0;
    let mut holevo = 0.0;
    let mut relent = 0.0;
    let mut quantum = Vec::new();
    for (ev, ps) in per_sample.iter().zip(&p_s) {
        empirical += ps * ev.empirical;
        qmi_sum += ps * ev.qmi;
        local_sum += ps * ev.local_qmi;
        holevo += ps * ev.holevo;
        relent += ps * ev.relent;
        quantum.extend(ev.laws.iter().cloned());
    }
    let mut true_risk = 0.0;
    let mut skipped = 0.0;
    let mut classical = Vec::new();
    for w in 0..n_w {
        let mut vals = Vec::new();
        let mut probs = Vec::new();
        for (ev, ps) in per_sample.iter().zip(&p_s) {
            match ev.values[w] {
                Some(v) => {
                    true_risk += ps * p_w[w] * v;
                    if *ps > 0.0 {
                        vals.push(v);
                        probs.push(*ps);
                    }
                }
                None => skipped += ps * p_w[w],
            }
        }
        if p_w[w] > 0.0 && !vals.is_empty() {
            let total: f64 = probs.iter().sum();
            classical.push(DiscreteLaw::new(vals, probs.iter().map(|p| p / total).collect())?);
        }
    }
    if skipped > MASS_TOL {
        return Err(Error::MassDeficit { deficit: skipped });
    }
    let mi = classical_mi(&joint);
    Ok(Evaluation {
        risks: RiskReport::new(empirical, true_risk),
        joint: Some(joint),
        qmi: qmi_sum,
        local_qmi: local.map(|_| local_sum),
        holevo,
        mi,
        expected_relent: opts.relent.then_some(relent),
        quantum: Arc::new(quantum),
        classical: Arc::new(classical),
        skipped_mass: skipped,
    })
}

pub fn expected_empirical_risk(ens: &CQEnsemble, lr: &Learner, loss: &LossFamily) -> Result<f64> {
    Ok(generalization_error(ens, lr, loss)?.empirical)
}

pub fn expected_true_risk(ens: &CQEnsemble, lr: &Learner, loss: &LossFamily) -> Result<f64> {
    Ok(generalization_error(ens, lr, loss)?.true_risk)
}

pub fn generalization_error(ens: &CQEnsemble, lr: &Learner, loss: &LossFamily) -> Result<RiskReport> {
    let opts = EvalOptions {
        relent: false,
        ..EvalOptions::default()
    };
    Ok(evaluate(ens, lr, loss, opts)?.risks)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundName {
    Thm21,
    Cor22,
    Cor24,
    Cor26,
}

impl BoundName {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "thm21" => Some(Self::Thm21),
            "cor22" => Some(Self::Cor22),
            "cor24" => Some(Self::Cor24),
            "cor26" => Some(Self::Cor26),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Thm21 => "thm21",
            Self::Cor22 => "cor22",
            Self::Cor24 => "cor24",
            Self::Cor26 => "cor26",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BoundCertificate {
    pub bound_name: BoundName,
    pub gen: f64,
    pub gen_abs: f64,
    pub qmi_term: f64,
    pub holevo_term: f64,
    pub mi_term: f64,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    /// Bound on +gen.
    pub rhs_plus: f64,
    /// Bound on -gen.
    pub rhs_minus: f64,
    pub rhs: f64,
    pub holds: bool,
    pub slack: f64,
}

#[allow(clippy::too_many_arguments)]
fn finish(
    bound: BoundName,
    eval: &Evaluation,
    qmi_term: f64,
    alpha: Option<f64>,
    beta: Option<f64>,
    rhs_plus: f64,
    rhs_minus: f64,
) -> BoundCertificate {
    let gen = eval.risks.gen;
    let rhs = if gen >= 0.0 { rhs_plus } else { rhs_minus };
    let slack = rhs - gen.abs();
    BoundCertificate {
        bound_name: bound,
        gen,
        gen_abs: gen.abs(),
        qmi_term,
        holevo_term: eval.holevo,
        mi_term: eval.mi,
        alpha,
        beta,
        rhs_plus,
        rhs_minus,
        rhs,
        holds: slack >= -HOLDS_TOL,
        slack,
    }
}

fn envelope_fn(pairs: Arc<Vec<PairMgf>>) -> ScalarFn {
    Arc::new(move |l| pairs.iter().map(|p| p.log_mgf(l)).fold(0.0, f64::max))
}

fn laws_as_pairs(laws: &[DiscreteLaw]) -> Arc<Vec<PairMgf>> {
    Arc::new(laws.iter().cloned().map(PairMgf::Spectrum).collect())
}

/// Checks the measured envelope against a two-sided bound on the validation grid.
fn validate_sides(pairs: &Arc<Vec<PairMgf>>, plus: &MgfBound, minus: &MgfBound, what: &str) -> Result<()> {
    let env = envelope_fn(pairs.clone());
    for l in lambda_grid(610) {
        let v = env(l);
        let b = if l >= 0.0 { plus.eval(l) } else { minus.eval(-l) };
        if v > b + 1e-9 * (1.0 + b.abs()) {
            return Err(Error::InvalidMgfBound(format!(
                "{what} log-MGF {v:.6e} exceeds the supplied bound {b:.6e} at lambda = {l:.4e}"
            )));
        }
    }
    Ok(())
}

fn validate_alpha(pairs: &Arc<Vec<PairMgf>>, alpha: f64, what: &str) -> Result<()> {
    if !(alpha >= 0.0) {
        return Err(Error::InvalidMgfBound(format!("{what} parameter {alpha} is negative")));
    }
    let profile = LogMgfProfile::envelope(pairs.clone());
    if certifies(&profile, alpha) {
        Ok(())
    } else {
        let fit = fit_subgaussian(&profile, FitMode::Quantum);
        Err(Error::InvalidMgfBound(format!(
            "{what} parameter {alpha} is below the measured value {:.6e}",
            fit.alpha
        )))
    }
}

/// Smallest validated sub-gaussian parameters for the quantum and classical families.
pub fn fit_global(eval: &Evaluation) -> (f64, f64) {
    let a = fit_subgaussian(&LogMgfProfile::envelope(eval.quantum.clone()), FitMode::Quantum).alpha;
    let b = fit_subgaussian(&LogMgfProfile::envelope(laws_as_pairs(&eval.classical)), FitMode::Classical).alpha;
    (a, b)
}

/// Upper and lower side bounds for the quantum (psi) and classical (phi) log-MGFs.
#[derive(Debug, Clone)]
pub struct MgfSides {
    pub psi_plus: MgfBound,
    pub psi_minus: MgfBound,
    pub phi_plus: MgfBound,
    pub phi_minus: MgfBound,
}

impl MgfSides {
    pub fn quadratic(alpha: f64, beta: f64) -> Self {
        Self {
            psi_plus: MgfBound::Quadratic { alpha },
            psi_minus: MgfBound::Quadratic { alpha },
            phi_plus: MgfBound::Quadratic { alpha: beta },
            phi_minus: MgfBound::Quadratic { alpha: beta },
        }
    }

    /// The measured envelopes themselves, tabulated; the tightest admissible choice.
    pub fn measured(eval: &Evaluation) -> Self {
        let q = eval.quantum.clone();
        let c = laws_as_pairs(&eval.classical);
        Self {
            psi_plus: tabulate_side(q.clone(), 1.0),
            psi_minus: tabulate_side(q, -1.0),
            phi_plus: tabulate_side(c.clone(), 1.0),
            phi_minus: tabulate_side(c, -1.0),
        }
    }

    /// Bennett-type bounds from the largest variance and one-sided ranges.
    pub fn bennett(eval: &Evaluation) -> Self {
        let side = |pairs: &[PairMgf], up: bool| {
            let v = pairs.iter().map(PairMgf::variance).fold(0.0, f64::max);
            let c = pairs
                .iter()
                .map(|p| if up { p.upper_range() } else { p.lower_range() })
                .fold(0.0, f64::max);
            if v <= 0.0 {
                MgfBound::Zero
            } else {
                MgfBound::Bennett { variance: v, range: c }
            }
        };
        let c = laws_as_pairs(&eval.classical);
        Self {
            psi_plus: side(&eval.quantum, true),
            psi_minus: side(&eval.quantum, false),
            phi_plus: side(&c, true),
            phi_minus: side(&c, false),
        }
    }
}

fn tabulate_side(pairs: Arc<Vec<PairMgf>>, sign: f64) -> MgfBound {
    let env = envelope_fn(pairs);
    let probe = [1e-3, 1e-1, 1.0, 10.0, 1e2, 1e3];
    if probe.iter().all(|&m| env(sign * m) == 0.0) {
        return MgfBound::Zero;
    }
    MgfBound::tabulated(Arc::new(move |m| env(sign * m)))
}

/// General certificate with caller-supplied side bounds.
pub fn certify_general(eval: &Evaluation, sides: &MgfSides) -> Result<BoundCertificate> {
    validate_sides(&eval.quantum, &sides.psi_plus, &sides.psi_minus, "quantum")?;
    let c = laws_as_pairs(&eval.classical);
    validate_sides(&c, &sides.phi_plus, &sides.phi_minus, "classical")?;
    let info = eval.qmi + eval.holevo;
    let rhs_plus = sides.psi_minus.dual_inverse(info)? + sides.phi_minus.dual_inverse(eval.mi)?;
    let rhs_minus = sides.psi_plus.dual_inverse(info)? + sides.phi_plus.dual_inverse(eval.mi)?;
    Ok(finish(BoundName::Thm21, eval, eval.qmi, None, None, rhs_plus, rhs_minus))
}

/// sqrt(2 alpha^2 (QMI + chi)) + sqrt(2 beta^2 I(S;W)).
pub fn certify_cor22(eval: &Evaluation, alpha: Option<f64>, beta: Option<f64>) -> Result<BoundCertificate> {
    let c = laws_as_pairs(&eval.classical);
    let (fa, fb) = fit_global(eval);
    let alpha = match alpha {
        Some(a) => {
            validate_alpha(&eval.quantum, a, "quantum")?;
            a
        }
        None => fa,
    };
    let beta = match beta {
        Some(b) => {
            validate_alpha(&c, b, "classical")?;
            b
        }
        None => fb,
    };
    let rhs = cor22_rhs(alpha, beta, eval.qmi + eval.holevo, eval.mi);
    Ok(finish(BoundName::Cor22, eval, eval.qmi, Some(alpha), Some(beta), rhs, rhs))
}

pub fn cor22_rhs(alpha: f64, beta: f64, info: f64, mi: f64) -> f64 {
    (2.0 * alpha * alpha * info.max(0.0)).sqrt() + (2.0 * beta * beta * mi.max(0.0)).sqrt()
}

/// Per-site log-MGF data for the local composition bound.
#[derive(Debug, Clone)]
pub struct LocalProfiles {
    /// Site -> laws of L_i(z, w) in tau_i(z, w).
    pub quantum: Vec<Vec<DiscreteLaw>>,
    /// Site -> per hypothesis, law of tr[L_i(Z_i, w) tau_i(Z_i, w)] over Z_i.
    pub classical: Vec<Vec<DiscreteLaw>>,
}

impl LocalProfiles {
    pub fn n_sites(&self) -> usize {
        self.quantum.len()
    }

    pub fn fit(&self) -> (Vec<f64>, Vec<f64>) {
        let fit = |laws: &Vec<DiscreteLaw>, mode| {
            fit_subgaussian(&LogMgfProfile::envelope(laws_as_pairs(laws)), mode).alpha
        };
        (
            self.quantum.iter().map(|l| fit(l, FitMode::Quantum)).collect(),
            self.classical.iter().map(|l| fit(l, FitMode::Classical)).collect(),
        )
    }
}

/// Local states tau_i(z, w) and loss terms from the declared site structures.
pub fn local_profiles(ens: &CQEnsemble, lr: &Learner, loss: &LossFamily) -> Result<LocalProfiles> {
    let local = loss
        .local()
        .ok_or_else(|| Error::NotFactorized("loss has no local structure".into()))?;
    let sites = ens
        .sites()
        .ok_or_else(|| Error::NotFactorized("data carry no per-site product structure".into()))?;
    let m = local.n_sites();
    if sites.n_sites() != m {
        return Err(Error::NotFactorized("loss and data have different site counts".into()));
    }
    let factorization = if lr.has_trivial_hyp() {
        None
    } else {
        Some(lr.factorization().ok_or_else(|| {
            Error::NotFactorized("quantum hypotheses need a declared learner factorization".into())
        })?)
    };
    let n_w = lr.n_hyp();
    let mut quantum = Vec::with_capacity(m);
    let mut classical = Vec::with_capacity(m);
    for i in 0..m {
        let alphabet = sites.probs[i].len();
        let mut q_laws = Vec::new();
        let mut c_laws = Vec::new();
        for w in 0..n_w {
            let mut vals = Vec::new();
            let mut probs = Vec::new();
            for z in 0..alphabet {
                let pz = sites.probs[i][z];
                let test = sites.test_state(i, z)?.permuted(&local.test[i])?;
                let tau = match factorization {
                    None => test,
                    Some(f) => {
                        let e: EffectOperator = (f.effect)(i, z, w)?;
                        let train = sites.states[i][z].marginal(&sites.train[i])?;
                        let sq = e.sqrt();
                        let unnorm = &sq * train.matrix() * &sq;
                        let prob = crate::qmat::trace_re(&unnorm);
                        if prob <= P_FLOOR {
                            continue;
                        }
                        let post = DensityOperator::from_unnormalized(unnorm, train.shape().clone())?;
                        let ch = (f.channel)(i, z, w)?;
                        let labels: Vec<&str> = train.shape().labels().iter().map(String::as_str).collect();
                        let hyp = crate::cqdata::apply_channel(&post, &ch, &labels)?;
                        let hyp_shape = crate::qmat::SubsystemShape::new(
                            f.hyp[i].iter().cloned().zip(hyp.shape().dims().iter().cloned()),
                        )?;
                        let hyp = hyp.relabeled(hyp_shape)?;
                        tensor_product(&test, &hyp)?.permuted(&local.site_labels(i))?
                    }
                };
                let l = (local.term)(i, z, w)?.relabeled(tau.shape().clone())?;
                if pz > 0.0 {
                    q_laws.push(spectral_law(&tau, &l)?);
                    vals.push(trace_product_re(l.matrix(), tau.matrix()));
                    probs.push(pz);
                }
            }
            if !vals.is_empty() {
                let total: f64 = probs.iter().sum();
                c_laws.push(DiscreteLaw::new(vals, probs.iter().map(|p| p / total).collect())?);
            }
        }
        quantum.push(q_laws);
        classical.push(c_laws);
    }
    Ok(LocalProfiles { quantum, classical })
}

/// Composition bound from local parameters; fitted when not supplied, validated otherwise.
pub fn certify_cor24(
    eval: &Evaluation,
    local: &LocalProfiles,
    alphas: Option<&[f64]>,
    betas: Option<&[f64]>,
) -> Result<BoundCertificate> {
    let m = local.n_sites();
    let (fa, fb) = local.fit();
    let pick = |given: Option<&[f64]>, fitted: Vec<f64>, laws: &[Vec<DiscreteLaw>], what: &str| -> Result<Vec<f64>> {
        match given {
            None => Ok(fitted),
            Some(v) => {
                if v.len() != m {
                    return Err(Error::InvalidMgfBound(format!("{what} needs {m} local parameters")));
                }
                for (i, a) in v.iter().enumerate() {
                    validate_alpha(&laws_as_pairs(&laws[i]), *a, what)?;
                }
                Ok(v.to_vec())
            }
        }
    };
    let alphas = pick(alphas, fa, &local.quantum, "local quantum")?;
    let betas = pick(betas, fb, &local.classical, "local classical")?;
    let alpha = compose_local_subgaussian(&alphas, m);
    let beta = compose_local_subgaussian(&betas, m);
    let qmi_term = eval.local_qmi.unwrap_or(eval.qmi);
    let rhs = cor22_rhs(alpha, beta, qmi_term + eval.holevo, eval.mi);
    Ok(finish(BoundName::Cor24, eval, qmi_term, Some(alpha), Some(beta), rhs, rhs))
}

/// (2 sqrt 2 M / sqrt m)(sqrt(C1 (QMI + chi)) + sqrt((1 + C1 (1 + C2)) I(S;W))).
pub fn certify_cor26(eval: &Evaluation, m: usize, c1: f64, c2: f64, max_norm: f64) -> Result<BoundCertificate> {
    if !(c1 >= 0.0 && c2 >= 0.0 && max_norm >= 0.0) || m == 0 {
        return Err(Error::InvalidConfig("channel norms and loss norm must be nonnegative".into()));
    }
    let info = eval.qmi + eval.holevo;
    let rhs = cor26_rhs(m, c1, c2, max_norm, info, eval.mi);
    Ok(finish(BoundName::Cor26, eval, eval.qmi, None, None, rhs, rhs))
}

pub fn cor26_rhs(m: usize, c1: f64, c2: f64, max_norm: f64, info: f64, mi: f64) -> f64 {
    let pref = 2.0 * 2f64.sqrt() * max_norm / (m as f64).sqrt();
    pref * ((c1 * info.max(0.0)).sqrt() + ((1.0 + c1 * (1.0 + c2)) * mi.max(0.0)).sqrt())
}

pub fn bound_general(ens: &CQEnsemble, lr: &Learner, loss: &LossFamily, sides: &MgfSides) -> Result<BoundCertificate> {
    certify_general(&evaluate(ens, lr, loss, EvalOptions::default())?, sides)
}

pub fn bound_cor22(ens: &CQEnsemble, lr: &Learner, loss: &LossFamily, alpha: f64, beta: f64) -> Result<BoundCertificate> {
    certify_cor22(&evaluate(ens, lr, loss, EvalOptions::default())?, Some(alpha), Some(beta))
}

pub fn bound_cor24(
    ens: &CQEnsemble,
    lr: &Learner,
    loss: &LossFamily,
    alphas: Option<&[f64]>,
    betas: Option<&[f64]>,
) -> Result<BoundCertificate> {
    let local = local_profiles(ens, lr, loss)?;
    certify_cor24(&evaluate(ens, lr, loss, EvalOptions::default())?, &local, alphas, betas)
}

pub fn bound_cor26(
    ens: &CQEnsemble,
    lr: &Learner,
    loss: &LossFamily,
    c1: f64,
    c2: f64,
    max_norm: Option<f64>,
) -> Result<BoundCertificate> {
    let local = loss
        .local()
        .ok_or_else(|| Error::NotFactorized("loss has no local structure".into()))?;
    if ens.sites().is_none() {
        return Err(Error::NotFactorized("data carry no per-site product structure".into()));
    }
    if !lr.has_trivial_hyp() && lr.factorization().is_none() {
        return Err(Error::NotFactorized("learner POVMs are not declared factorized".into()));
    }
    let norm = match max_norm {
        Some(n) => n,
        None => local.max_norm()?,
    };
    certify_cor26(&evaluate(ens, lr, loss, EvalOptions::default())?, local.n_sites(), c1, c2, norm)
}

/// Inputs selecting one certificate.
#[derive(Debug, Clone)]
pub enum BoundInputs {
    General(MgfSides),
    /// Fitted when `None`.
    Cor22 { alpha: Option<f64>, beta: Option<f64> },
    Cor24 { alphas: Option<Vec<f64>>, betas: Option<Vec<f64>> },
    Cor26 { c1: f64, c2: f64, max_norm: Option<f64> },
}

pub fn certify(ens: &CQEnsemble, lr: &Learner, loss: &LossFamily, inputs: &BoundInputs) -> Result<BoundCertificate> {
    match inputs {
        BoundInputs::General(sides) => bound_general(ens, lr, loss, sides),
        BoundInputs::Cor22 { alpha, beta } => {
            certify_cor22(&evaluate(ens, lr, loss, EvalOptions::default())?, *alpha, *beta)
        }
        BoundInputs::Cor24 { alphas, betas } => bound_cor24(ens, lr, loss, alphas.as_deref(), betas.as_deref()),
        BoundInputs::Cor26 { c1, c2, max_norm } => bound_cor26(ens, lr, loss, *c1, *c2, *max_norm),
    }
}

/// Grid used when a caller wants the measured quantum envelope sampled for reporting.
pub fn sampled_envelope(eval: &Evaluation) -> Vec<(f64, f64)> {
    let env = envelope_fn(eval.quantum.clone());
    default_grid().into_iter().map(|l| (l, env(l))).collect()
}
