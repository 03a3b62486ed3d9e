//! Classifying weighted pairs of states with a learned two-outcome POVM.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::inputs::{angle_projector, check_probs, EffectSpec, StateSpec};
use super::{binomial_pmf, Instance, Source, Triple, GENERIC_DIM_CAP};
use crate::bounds::{check_enumeration, Evaluation, LocalProfiles, RiskReport};
use crate::cqdata::{CQEnsemble, Learner, Povm, PovmRule, PovmTable, SiteStructure, P_FLOOR};
use crate::error::{Error, Result};
use crate::loss::{LocalLoss, LossFamily};
use crate::mgf::{spectral_law, DiscreteLaw, PairMgf};
use crate::qmat::{
    kron, operator_norm, CMatrix, DensityOperator, EffectOperator, Operator, SubsystemShape,
};
use crate::random::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatePair {
    pub prob: f64,
    pub sigma0: StateSpec,
    pub sigma1: StateSpec,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassificationLearner {
    /// Copy i tests hypothesis i mod K; lowest error rate wins, ties to the lower index.
    #[default]
    RoundRobinErm,
    /// Always outputs hypothesis 0.
    Constant,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalPath {
    #[default]
    Auto,
    Generic,
    Reduced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassificationConfig {
    pub d: usize,
    pub m: usize,
    /// Size of the default angle family; ignored when `hypotheses` is given.
    pub n_hyp: usize,
    /// Rows (pi_0, probability) of the weight distribution.
    pub weights: Vec<[f64; 2]>,
    pub pairs: Vec<StatePair>,
    /// Effects F(w) for "guess label 0".
    pub hypotheses: Option<Vec<EffectSpec>>,
    pub learner: ClassificationLearner,
    pub path: EvalPath,
    /// Depolarizing strength applied to every state.
    pub noise: f64,
}

impl Default for ClassificationConfig {
    fn default() -> Self {
        Self {
            d: 2,
            m: 4,
            n_hyp: 4,
            weights: vec![[0.5, 1.0]],
            pairs: vec![StatePair {
                prob: 1.0,
                sigma0: StateSpec::Bloch([0.0, 0.0, 1.0]),
                sigma1: StateSpec::Bloch([1.0, 0.0, 0.0]),
            }],
            hypotheses: None,
            learner: ClassificationLearner::RoundRobinErm,
            path: EvalPath::Auto,
            noise: 0.0,
        }
    }
}

impl ClassificationConfig {
    fn n_hyp(&self) -> usize {
        self.hypotheses.as_ref().map_or(self.n_hyp, Vec::len)
    }

    fn use_reduced(&self) -> bool {
        match self.path {
            EvalPath::Reduced => true,
            EvalPath::Generic => false,
            EvalPath::Auto => self.pairs.len() == 1 && self.learner == ClassificationLearner::RoundRobinErm,
        }
    }
}

fn group_sizes(m: usize, k: usize) -> Vec<usize> {
    let kp = k.min(m);
    (0..kp).map(|g| (0..m).filter(|i| i % kp == g).count()).collect()
}

fn reduced_states(m: usize, k: usize) -> u128 {
    group_sizes(m, k).iter().map(|n| *n as u128 + 1).product()
}

pub(crate) fn validate(cfg: &ClassificationConfig, cap: u128) -> Result<()> {
    if cfg.d < 2 || cfg.m == 0 || cfg.n_hyp() == 0 {
        return Err(Error::InvalidConfig("classification needs d >= 2, m >= 1 and at least one hypothesis".into()));
    }
    if !(0.0..=1.0).contains(&cfg.noise) {
        return Err(Error::InvalidConfig(format!("noise {} outside [0, 1]", cfg.noise)));
    }
    check_probs(&cfg.weights.iter().map(|w| w[1]).collect::<Vec<_>>(), "weight table")?;
    if cfg.weights.iter().any(|w| !(0.0..=1.0).contains(&w[0])) {
        return Err(Error::InvalidConfig("weights pi_0 must lie in [0, 1]".into()));
    }
    check_probs(&cfg.pairs.iter().map(|p| p.prob).collect::<Vec<_>>(), "pair table")?;
    let k = cfg.n_hyp();
    if cfg.use_reduced() {
        if cfg.pairs.len() != 1 || cfg.learner != ClassificationLearner::RoundRobinErm {
            return Err(Error::InvalidConfig(
                "the reduced path needs a single state pair and the round-robin learner".into(),
            ));
        }
        check_enumeration(reduced_states(cfg.m, k) as usize, k, cap)
    } else {
        let n_s = 2u128.checked_pow(cfg.m as u32).unwrap_or(u128::MAX);
        let pairs = n_s.saturating_mul(k as u128);
        if pairs > cap {
            return Err(Error::EnumerationCap { pairs, cap });
        }
        let dim = (cfg.d as f64).powi(2 * cfg.m as i32);
        if dim > GENERIC_DIM_CAP as f64 {
            return Err(Error::DimensionCap {
                dim: dim.min(usize::MAX as f64) as usize,
                cap: GENERIC_DIM_CAP,
            });
        }
        Ok(())
    }
}

struct Model {
    m: usize,
    k: usize,
    p: [f64; 2],
    /// (probability, [sigma_0, sigma_1]) on a single copy.
    pairs: Vec<(f64, [DensityOperator; 2])>,
    /// Err(w, z) on a single copy.
    err: Vec<[EffectOperator; 2]>,
    learner: ClassificationLearner,
}

fn copy_shape(d: usize) -> SubsystemShape {
    SubsystemShape::single("x", d).expect("d >= 1")
}

fn model(cfg: &ClassificationConfig, seed: u64) -> Result<Model> {
    let mut rng = rng_from_seed(seed);
    let shape = copy_shape(cfg.d);
    let mixed = DensityOperator::maximally_mixed(shape.clone());
    let noisy = |s: DensityOperator| -> Result<DensityOperator> {
        if cfg.noise == 0.0 {
            return Ok(s);
        }
        DensityOperator::mixture(&[(1.0 - cfg.noise, &s), (cfg.noise, &mixed)])
    };
    let mut pairs = Vec::new();
    for pair in &cfg.pairs {
        let s0 = noisy(pair.sigma0.build(shape.clone(), &mut rng)?)?;
        let s1 = noisy(pair.sigma1.build(shape.clone(), &mut rng)?)?;
        pairs.push((pair.prob, [s0, s1]));
    }
    let effects: Vec<EffectOperator> = match &cfg.hypotheses {
        Some(list) => list.iter().map(|e| e.build(shape.clone(), &mut rng)).collect::<Result<_>>()?,
        None => (0..cfg.n_hyp)
            .map(|w| angle_projector(std::f64::consts::PI * w as f64 / cfg.n_hyp as f64, shape.clone()))
            .collect::<Result<_>>()?,
    };
    let p0: f64 = cfg.weights.iter().map(|w| w[0] * w[1]).sum();
    Ok(Model {
        m: cfg.m,
        k: effects.len(),
        p: [p0, 1.0 - p0],
        pairs,
        err: effects.iter().map(|f| [f.complement(), f.clone()]).collect(),
        learner: cfg.learner,
    })
}

/// Lowest error rate e_k / n_k; ties go to the lower index.
pub(crate) fn erm_pick(errors: &[usize], sizes: &[usize]) -> usize {
    let mut best = 0;
    for k in 1..errors.len() {
        if errors[k] * sizes[best] < errors[best] * sizes[k] {
            best = k;
        }
    }
    best
}

impl Model {
    /// Average single-copy state for label z.
    fn mean_state(&self, z: usize) -> Result<DensityOperator> {
        let items: Vec<(f64, &DensityOperator)> = self.pairs.iter().map(|(p, s)| (*p, &s[z])).collect();
        DensityOperator::mixture(&items)
    }

    fn site_state(&self, i: usize, z: usize) -> Result<DensityOperator> {
        let d = self.pairs[0].1[0].dim();
        let shape = SubsystemShape::new([(format!("test_{i}"), d), (format!("train_{i}"), d)])?;
        let mut acc = CMatrix::zeros(d * d, d * d);
        for (p, s) in &self.pairs {
            acc += kron(s[z].matrix(), s[z].matrix()).scale(*p);
        }
        DensityOperator::new(acc, shape)
    }

    fn povm_rule(&self, train: SubsystemShape) -> PovmRule {
        let m = self.m;
        let sizes = group_sizes(m, self.k);
        let kp = sizes.len();
        let err: Vec<[CMatrix; 2]> = self.err.iter().map(|e| [e[0].matrix().clone(), e[1].matrix().clone()]).collect();
        let ok: Vec<[CMatrix; 2]> = self
            .err
            .iter()
            .map(|e| [e[0].complement().matrix().clone(), e[1].complement().matrix().clone()])
            .collect();
        Arc::new(move |s| {
            let mut acc: Vec<Option<CMatrix>> = vec![None; kp];
            for o in 0..(1usize << m) {
                let mut errors = vec![0usize; kp];
                let mut mat = CMatrix::identity(1, 1);
                for i in 0..m {
                    let g = i % kp;
                    let bit = (o >> i) & 1;
                    errors[g] += bit;
                    let e = if bit == 1 { &err[g][s[i]] } else { &ok[g][s[i]] };
                    mat = kron(&mat, e);
                }
                let w = erm_pick(&errors, &sizes);
                match &mut acc[w] {
                    Some(a) => *a += mat,
                    slot => *slot = Some(mat),
                }
            }
            let outcomes = acc
                .into_iter()
                .enumerate()
                .filter_map(|(w, a)| a.map(|a| (w, a)))
                .map(|(w, a)| Ok((w, EffectOperator::new(a, train.clone())?)))
                .collect::<Result<Vec<_>>>()?;
            Povm::new(outcomes)
        })
    }

    fn triple(&self) -> Result<Triple> {
        let m = self.m;
        let mut states = Vec::with_capacity(m);
        for i in 0..m {
            states.push(vec![self.site_state(i, 0)?, self.site_state(i, 1)?]);
        }
        let sites = SiteStructure {
            test: (0..m).map(|i| vec![format!("test_{i}")]).collect(),
            train: (0..m).map(|i| vec![format!("train_{i}")]).collect(),
            probs: vec![self.p.to_vec(); m],
            states,
        };
        let ens = CQEnsemble::from_sites(sites)?;
        let train = ens.train_shape()?;
        let povm = match self.learner {
            ClassificationLearner::RoundRobinErm => PovmTable::Rule(self.povm_rule(train.clone())),
            ClassificationLearner::Constant => PovmTable::Shared(Povm::trivial(train.clone(), 0)),
        };
        let lr = Learner::classical(povm, train, self.k)?;
        let err = self.err.clone();
        let local = LocalLoss {
            test: (0..m).map(|i| vec![format!("test_{i}")]).collect(),
            hyp: vec![Vec::new(); m],
            term: Arc::new(move |_, z, w| Ok(err[w][z].to_observable())),
            alphabet: vec![2; m],
            n_hyp: self.k,
        };
        let loss = LossFamily::from_local(ens.test_shape()?, local)?;
        Ok(Triple { ens, lr, loss })
    }

    fn local_profiles(&self) -> Result<(LocalProfiles, f64)> {
        let sigma = [self.mean_state(0)?, self.mean_state(1)?];
        let mut q = Vec::new();
        let mut c = Vec::new();
        let mut norm = 0.0f64;
        for w in 0..self.k {
            let mut vals = Vec::new();
            let mut probs = Vec::new();
            for z in 0..2 {
                let l = self.err[w][z].to_observable();
                norm = norm.max(operator_norm(&l));
                if self.p[z] > 0.0 {
                    q.push(spectral_law(&sigma[z], &l)?);
                    vals.push(self.err[w][z].probability(&sigma[z])?);
                    probs.push(self.p[z]);
                }
            }
            let total: f64 = probs.iter().sum();
            c.push(DiscreteLaw::new(vals, probs.iter().map(|p| p / total).collect())?);
        }
        let profiles = LocalProfiles {
            quantum: vec![q; self.m],
            classical: vec![c; self.m],
        };
        Ok((profiles, norm))
    }

    /// Exact evaluation through the per-group counts of label-0 copies.
    fn reduced(&self) -> Result<Evaluation> {
        if self.pairs.len() != 1 || self.learner != ClassificationLearner::RoundRobinErm {
            return Err(Error::InvalidConfig("reduced path needs one pair and the round-robin learner".into()));
        }
        let m = self.m;
        let sigma = &self.pairs[0].1;
        let sizes = group_sizes(m, self.k);
        let kp = sizes.len();
        // a[w][z]: error probability of hypothesis w on one copy labelled z.
        let a: Vec<[f64; 2]> = self
            .err
            .iter()
            .map(|e| Ok([e[0].probability(&sigma[0])?, e[1].probability(&sigma[1])?]))
            .collect::<Result<_>>()?;
        // pmf[g][c]: error-count law of group g given c copies labelled 0.
        let mut pmf: Vec<Vec<Vec<f64>>> = Vec::with_capacity(kp);
        for (g, &n) in sizes.iter().enumerate() {
            let mut per = Vec::with_capacity(n + 1);
            for c in 0..=n {
                let b0 = binomial_pmf(c, a[g][0]);
                let b1 = binomial_pmf(n - c, a[g][1]);
                let mut conv = vec![0.0; n + 1];
                for (i, x) in b0.iter().enumerate() {
                    for (j, y) in b1.iter().enumerate() {
                        conv[i + j] += x * y;
                    }
                }
                per.push(conv);
            }
            pmf.push(per);
        }
        let group_prob: Vec<Vec<f64>> = sizes.iter().map(|&n| binomial_pmf(n, self.p[0])).collect();

        let n_t: usize = sizes.iter().map(|n| n + 1).product();
        let mut t = vec![0usize; kp];
        let mut p_t = Vec::with_capacity(n_t);
        let mut cond = Vec::with_capacity(n_t);
        let mut zeros = Vec::with_capacity(n_t);
        for _ in 0..n_t {
            let laws: Vec<&Vec<f64>> = (0..kp).map(|g| &pmf[g][t[g]]).collect();
            // tail[g][e] = P(e_g >= e)
            let tails: Vec<Vec<f64>> = laws
                .iter()
                .map(|l| {
                    let mut tail = vec![0.0; l.len() + 1];
                    for e in (0..l.len()).rev() {
                        tail[e] = tail[e + 1] + l[e];
                    }
                    tail
                })
                .collect();
            let mut q = vec![0.0; self.k];
            for w in 0..kp {
                let nw = sizes[w];
                for (v, pv) in laws[w].iter().enumerate() {
                    if *pv == 0.0 {
                        continue;
                    }
                    let mut prod = *pv;
                    for g in 0..kp {
                        if g == w {
                            continue;
                        }
                        let ng = sizes[g];
                        // g < w must be strictly worse, g > w at least as bad.
                        let need = if g < w { v * ng / nw + 1 } else { (v * ng).div_ceil(nw) };
                        prod *= tails[g].get(need).copied().unwrap_or(0.0);
                    }
                    q[w] += prod;
                }
            }
            p_t.push((0..kp).map(|g| group_prob[g][t[g]]).product::<f64>());
            zeros.push(t.iter().sum::<usize>());
            cond.push(q);
            for g in 0..kp {
                t[g] += 1;
                if t[g] <= sizes[g] {
                    break;
                }
                t[g] = 0;
            }
        }

        let mut p_w = vec![0.0; self.k];
        let mut empirical = 0.0;
        let mut seen: BTreeSet<(usize, usize)> = BTreeSet::new();
        for ((pt, q), n0) in p_t.iter().zip(&cond).zip(&zeros) {
            for w in 0..self.k {
                p_w[w] += pt * q[w];
                empirical += pt * q[w] * (*n0 as f64 * a[w][0] + (m - n0) as f64 * a[w][1]) / m as f64;
                if q[w] > P_FLOOR {
                    seen.insert((*n0, w));
                }
            }
        }
        let mut mi = 0.0;
        for (pt, q) in p_t.iter().zip(&cond) {
            for w in 0..self.k {
                if q[w] > 0.0 && p_w[w] > 0.0 && *pt > 0.0 {
                    mi += pt * q[w] * (q[w] / p_w[w]).ln();
                }
            }
        }
        let true_risk: f64 = (0..self.k).map(|w| p_w[w] * (self.p[0] * a[w][0] + self.p[1] * a[w][1])).sum();

        let laws: Vec<[DiscreteLaw; 2]> = (0..self.k)
            .map(|w| Ok([spectral_law(&sigma[0], &self.err[w][0].to_observable())?, spectral_law(&sigma[1], &self.err[w][1].to_observable())?]))
            .collect::<Result<_>>()?;
        let quantum: Vec<PairMgf> = seen
            .iter()
            .map(|&(n0, w)| {
                let factors = [(n0, laws[w][0].clone()), (m - n0, laws[w][1].clone())]
                    .into_iter()
                    .filter(|(c, _)| *c > 0)
                    .collect();
                PairMgf::ProductSum {
                    factors,
                    scale: 1.0 / m as f64,
                }
            })
            .collect();
        let counts = binomial_pmf(m, self.p[0]);
        let classical = (0..self.k)
            .filter(|w| p_w[*w] > 0.0)
            .map(|w| {
                let vals = (0..=m)
                    .map(|j| (j as f64 * a[w][0] + (m - j) as f64 * a[w][1]) / m as f64)
                    .collect();
                DiscreteLaw::new(vals, counts.clone())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Evaluation {
            risks: RiskReport::new(empirical, true_risk),
            joint: None,
            qmi: 0.0,
            local_qmi: Some(0.0),
            holevo: 0.0,
            mi: mi.max(0.0),
            expected_relent: Some(0.0),
            quantum: Arc::new(quantum),
            classical: Arc::new(classical),
            skipped_mass: 0.0,
        })
    }
}

/// Generic (ensemble, learner, loss) for the configured classification task.
pub fn build_state_classification(cfg: &ClassificationConfig, seed: u64) -> Result<Triple> {
    model(cfg, seed)?.triple()
}

/// Exact evaluation via sufficient statistics; any m, single state pair only.
pub fn reduced_evaluation(cfg: &ClassificationConfig, seed: u64) -> Result<Evaluation> {
    model(cfg, seed)?.reduced()
}

pub(crate) fn instance(cfg: &ClassificationConfig, seed: u64, _cap: u128) -> Result<Instance> {
    let model = model(cfg, seed)?;
    let m = cfg.m as f64;
    let k = model.k as f64;
    let mut notes = BTreeMap::new();
    notes.insert("m".into(), m);
    notes.insert("logHypotheses".into(), k.ln());
    // Rate envelope sqrt(log|W| / (2m)) that upper-bounds the declared rhs.
    notes.insert("rateEnvelope".into(), (k.ln() / (2.0 * m)).sqrt());
    let source = if cfg.use_reduced() {
        let (local, norm) = model.local_profiles()?;
        Source::Reduced {
            eval: Box::new(model.reduced()?),
            local: Some(local),
            max_norm: Some(norm),
        }
    } else {
        Source::Generic(model.triple()?)
    };
    // Losses lie in [0, 1] and are averaged over m independent copies.
    let declared = 1.0 / (2.0 * m.sqrt());
    Ok(Instance {
        source,
        m: cfg.m,
        trivial_hyp: true,
        declared_alpha: Some(declared),
        declared_beta: Some(declared),
        notes,
        rate_note: Some(("declaredRhs", 1.0)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{certify_cor22, certify_general, evaluate, EvalOptions, MgfSides};
    use approx::assert_abs_diff_eq;

    fn eval_generic(cfg: &ClassificationConfig) -> Evaluation {
        let t = build_state_classification(cfg, 1).unwrap();
        evaluate(&t.ens, &t.lr, &t.loss, EvalOptions::default()).unwrap()
    }

    #[test]
    fn reduced_matches_generic() {
        for m in 1..=4 {
            for k in [2, 3, 4] {
                let cfg = ClassificationConfig {
                    m,
                    n_hyp: k,
                    weights: vec![[0.3, 0.5], [0.8, 0.5]],
                    noise: 0.1,
                    ..Default::default()
                };
                let g = eval_generic(&cfg);
                let r = reduced_evaluation(&cfg, 1).unwrap();
                assert_abs_diff_eq!(g.risks.empirical, r.risks.empirical, epsilon = 1e-12);
                assert_abs_diff_eq!(g.risks.true_risk, r.risks.true_risk, epsilon = 1e-12);
                assert_abs_diff_eq!(g.mi, r.mi, epsilon = 1e-10);
                assert_abs_diff_eq!(g.holevo, 0.0, epsilon = 1e-10);
                let (ga, gb) = crate::bounds::fit_global(&g);
                let (ra, rb) = crate::bounds::fit_global(&r);
                assert_abs_diff_eq!(ga, ra, epsilon = 1e-8);
                assert_abs_diff_eq!(gb, rb, epsilon = 1e-8);
                let gc = certify_general(&g, &MgfSides::measured(&g)).unwrap();
                let rc = certify_general(&r, &MgfSides::measured(&r)).unwrap();
                assert_abs_diff_eq!(gc.rhs, rc.rhs, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn orthogonal_deterministic_pair_has_zero_gen() {
        let cfg = ClassificationConfig {
            m: 3,
            n_hyp: 2,
            pairs: vec![StatePair {
                prob: 1.0,
                sigma0: StateSpec::Basis(0),
                sigma1: StateSpec::Basis(1),
            }],
            hypotheses: Some(vec![EffectSpec::Basis(0), EffectSpec::Basis(1)]),
            path: EvalPath::Generic,
            ..Default::default()
        };
        let e = eval_generic(&cfg);
        assert_abs_diff_eq!(e.risks.gen, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.mi, 0.0, epsilon = 1e-12);
        let c = certify_cor22(&e, None, None).unwrap();
        assert!(c.rhs >= 0.0 && c.holds);
    }

    #[test]
    fn mutual_information_is_at_most_log_hypotheses() {
        for k in [2, 3, 5] {
            let cfg = ClassificationConfig {
                m: 12,
                n_hyp: k,
                ..Default::default()
            };
            let e = reduced_evaluation(&cfg, 1).unwrap();
            assert!(e.mi <= (k as f64).ln() + 1e-12, "k = {k}: {}", e.mi);
        }
    }

    #[test]
    fn several_pairs_correlate_test_and_train() {
        let cfg = ClassificationConfig {
            m: 2,
            pairs: vec![
                StatePair {
                    prob: 0.5,
                    sigma0: StateSpec::Basis(0),
                    sigma1: StateSpec::Basis(1),
                },
                StatePair {
                    prob: 0.5,
                    sigma0: StateSpec::Bloch([1.0, 0.0, 0.0]),
                    sigma1: StateSpec::Bloch([-1.0, 0.0, 0.0]),
                },
            ],
            ..Default::default()
        };
        let e = eval_generic(&cfg);
        assert!(e.holevo > 1e-6);
        assert!(certify_general(&e, &MgfSides::measured(&e)).unwrap().holds);
    }

    #[test]
    fn declared_parameters_give_the_square_root_rate() {
        let cfg = ClassificationConfig {
            m: 16,
            ..Default::default()
        };
        let inst = instance(&cfg, 1, u128::MAX).unwrap();
        let Source::Reduced { eval, .. } = &inst.source else { panic!("expected reduced path") };
        let c = certify_cor22(eval, inst.declared_alpha, inst.declared_beta).unwrap();
        assert_abs_diff_eq!(c.rhs, (eval.mi / 32.0).sqrt(), epsilon = 1e-14);
        assert!(c.holds);
    }

    #[test]
    fn erm_ties_go_low() {
        assert_eq!(erm_pick(&[1, 1, 0], &[2, 2, 1]), 2);
        assert_eq!(erm_pick(&[1, 2, 1], &[2, 4, 2]), 0);
    }
}
