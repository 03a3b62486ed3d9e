//! Estimating a parameter encoded in copies of a state with a learned estimator POVM.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::inputs::{check_probs, StateSpec};
use super::{Instance, Source, Triple, GENERIC_DIM_CAP};
use crate::bounds::check_enumeration;
use crate::cqdata::{records_of, CQEnsemble, Learner, Povm, PovmTable, SiteStructure};
use crate::error::{Error, Result};
use crate::loss::{LocalLoss, LossFamily};
use crate::qmat::{
    kron, real_to_complex, tensor_product_all, trace_product_re, CMatrix, DensityOperator, EffectOperator,
    HermitianObservable, Operator, SubsystemShape,
};
use crate::random::rng_from_seed;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisFamily {
    /// Basis rotated by pi w / K, outcome k read as min(k, |grid| - 1), plurality vote over copies.
    #[default]
    RotatedBases,
    /// F_w(z) = I when z = w mod |grid|, regardless of the state.
    Uninformative,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimationLearner {
    /// Reads the labels and picks the lowest expected risk; ignores the quantum data.
    LabelsErm,
    /// Site i's training copies test hypothesis i mod K; lowest mean error wins.
    #[default]
    HoldoutErm,
    /// Always hypothesis 0.
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimationConfig {
    pub d: usize,
    pub m: usize,
    pub m_train: usize,
    pub m_test: usize,
    /// Parameter grid; every point has the same length.
    pub thetas: Vec<Vec<f64>>,
    /// Prior over the grid; uniform when absent.
    pub probs: Option<Vec<f64>>,
    pub p_norm: f64,
    /// State per grid point; real rotations in the first two levels when absent.
    pub states: Option<Vec<StateSpec>>,
    pub family: HypothesisFamily,
    pub n_hyp: usize,
    pub learner: EstimationLearner,
    /// Depolarizing strength applied to every state.
    pub noise: f64,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            d: 2,
            m: 2,
            m_train: 1,
            m_test: 1,
            thetas: vec![vec![0.0], vec![1.0]],
            probs: None,
            p_norm: 2.0,
            states: None,
            family: HypothesisFamily::RotatedBases,
            n_hyp: 4,
            learner: EstimationLearner::HoldoutErm,
            noise: 0.0,
        }
    }
}

impl EstimationConfig {
    fn data_dim(&self) -> f64 {
        (self.d as f64).powi((self.m * (self.m_train + self.m_test)) as i32)
    }
}

pub(crate) fn validate(cfg: &EstimationConfig, cap: u128) -> Result<()> {
    if cfg.d < 2 || cfg.m == 0 || cfg.m_train == 0 || cfg.m_test == 0 || cfg.n_hyp == 0 {
        return Err(Error::InvalidConfig(
            "estimation needs d >= 2 and positive m, m_train, m_test, n_hyp".into(),
        ));
    }
    let n = cfg.thetas.len();
    if n == 0 {
        return Err(Error::InvalidConfig("parameter grid is empty".into()));
    }
    let dim = cfg.thetas[0].len();
    if dim == 0 || cfg.thetas.iter().any(|t| t.len() != dim || t.iter().any(|x| !x.is_finite())) {
        return Err(Error::InvalidConfig("grid points need equal, nonzero length and finite entries".into()));
    }
    if !(cfg.p_norm >= 1.0) {
        return Err(Error::InvalidConfig(format!("p_norm must be at least 1, got {}", cfg.p_norm)));
    }
    if !(0.0..=1.0).contains(&cfg.noise) {
        return Err(Error::InvalidConfig(format!("noise must lie in [0, 1], got {}", cfg.noise)));
    }
    if let Some(p) = &cfg.probs {
        if p.len() != n {
            return Err(Error::InvalidConfig(format!("{} prior weights for {n} grid points", p.len())));
        }
        check_probs(p, "parameter prior")?;
    }
    if let Some(s) = &cfg.states {
        if s.len() != n {
            return Err(Error::InvalidConfig(format!("{} states for {n} grid points", s.len())));
        }
    }
    if cfg.data_dim() > GENERIC_DIM_CAP as f64 {
        return Err(Error::DimensionCap {
            dim: cfg.data_dim().min(usize::MAX as f64) as usize,
            cap: GENERIC_DIM_CAP,
        });
    }
    check_enumeration(n.pow(cfg.m as u32), cfg.n_hyp, cap)
}

fn p_dist(a: &[f64], b: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs().powf(p)).sum::<f64>().powf(1.0 / p)
}

/// Diameter of the grid in the p-norm.
pub fn diameter(thetas: &[Vec<f64>], p: f64) -> f64 {
    let mut best = 0.0f64;
    for a in thetas {
        for b in thetas {
            best = best.max(p_dist(a, b, p));
        }
    }
    best
}

/// Plurality of per-copy estimates, ties to the lowest index.
fn plurality(votes: &[usize], n: usize) -> usize {
    let mut counts = vec![0usize; n];
    for &v in votes {
        counts[v] += 1;
    }
    (0..n).fold(0, |b, k| if counts[k] > counts[b] { k } else { b })
}

/// Built instance tables.
#[derive(Debug, Clone)]
pub struct EstimationModel {
    pub m: usize,
    pub m_train: usize,
    pub m_test: usize,
    pub probs: Vec<f64>,
    /// dist[z][zh] = |theta_z - theta_zh|_p.
    pub dist: Vec<Vec<f64>>,
    pub b_p: f64,
    /// Single-copy state per grid point.
    pub states: Vec<DensityOperator>,
    family: HypothesisFamily,
    learner: EstimationLearner,
    n_hyp: usize,
    d: usize,
}

pub fn model(cfg: &EstimationConfig, seed: u64) -> Result<EstimationModel> {
    validate(cfg, u128::MAX)?;
    let n = cfg.thetas.len();
    let mut rng = rng_from_seed(seed);
    let shape = SubsystemShape::single("x", cfg.d)?;
    let pure: Vec<DensityOperator> = match &cfg.states {
        Some(list) => list.iter().map(|s| s.build(shape.clone(), &mut rng)).collect::<Result<_>>()?,
        None => (0..n)
            .map(|k| {
                let phi = std::f64::consts::PI * k as f64 / (2.0 * n as f64);
                let mut ket = vec![real_to_complex(0.0); cfg.d];
                ket[0] = real_to_complex(phi.cos());
                ket[1] = real_to_complex(phi.sin());
                DensityOperator::from_ket(&ket, shape.clone())
            })
            .collect::<Result<_>>()?,
    };
    let mixed = DensityOperator::maximally_mixed(shape.clone());
    let states = pure
        .iter()
        .map(|r| DensityOperator::mixture(&[(1.0 - cfg.noise, r), (cfg.noise, &mixed)]))
        .collect::<Result<Vec<_>>>()?;
    let dist = cfg
        .thetas
        .iter()
        .map(|a| cfg.thetas.iter().map(|b| p_dist(a, b, cfg.p_norm)).collect())
        .collect();
    Ok(EstimationModel {
        m: cfg.m,
        m_train: cfg.m_train,
        m_test: cfg.m_test,
        probs: cfg.probs.clone().unwrap_or_else(|| vec![1.0 / n as f64; n]),
        dist,
        b_p: diameter(&cfg.thetas, cfg.p_norm),
        states,
        family: cfg.family,
        learner: cfg.learner,
        n_hyp: cfg.n_hyp,
        d: cfg.d,
    })
}

impl EstimationModel {
    fn n_theta(&self) -> usize {
        self.probs.len()
    }

    /// Single-copy estimate effects G_w(zh) for the rotated family.
    fn single_copy(&self, w: usize) -> Vec<CMatrix> {
        let d = self.d;
        let n = self.n_theta();
        let a = std::f64::consts::PI * w as f64 / self.n_hyp as f64;
        let mut out = vec![CMatrix::zeros(d, d); n];
        for k in 0..d {
            let mut v = vec![real_to_complex(0.0); d];
            match k {
                0 => {
                    v[0] = real_to_complex(a.cos());
                    v[1] = real_to_complex(a.sin());
                }
                1 => {
                    v[0] = real_to_complex(-a.sin());
                    v[1] = real_to_complex(a.cos());
                }
                _ => v[k] = real_to_complex(1.0),
            }
            let col = CMatrix::from_column_slice(d, 1, &v);
            out[k.min(n - 1)] += &col * col.adjoint();
        }
        out
    }

    /// Estimator effects F_w(zh) on `copies` copies, indexed by zh.
    pub fn estimator(&self, w: usize, copies: usize) -> Vec<CMatrix> {
        let n = self.n_theta();
        let dim = self.d.pow(copies as u32);
        match self.family {
            HypothesisFamily::Uninformative => (0..n)
                .map(|zh| {
                    if zh == w % n {
                        CMatrix::identity(dim, dim)
                    } else {
                        CMatrix::zeros(dim, dim)
                    }
                })
                .collect(),
            HypothesisFamily::RotatedBases => {
                let g = self.single_copy(w);
                let mut out = vec![CMatrix::zeros(dim, dim); n];
                for votes in records_of(&vec![n; copies]) {
                    let mut mat = CMatrix::identity(1, 1);
                    for &v in &votes {
                        mat = kron(&mat, &g[v]);
                    }
                    out[plurality(&votes, n)] += mat;
                }
                out
            }
        }
    }

    fn copies_state(&self, z: usize, copies: usize, prefix: &str) -> Result<DensityOperator> {
        let parts: Vec<DensityOperator> = (0..copies)
            .map(|c| {
                self.states[z].relabeled(SubsystemShape::single(format!("{prefix}_{c}"), self.d)?)
            })
            .collect::<Result<_>>()?;
        Ok(tensor_product_all(&parts)?.expect("copies >= 1"))
    }

    /// r[w][z]: expected loss of hypothesis w on one test block of symbol z.
    pub fn test_risk_table(&self) -> Result<Vec<Vec<f64>>> {
        let n = self.n_theta();
        (0..self.n_hyp)
            .map(|w| {
                let f = self.estimator(w, self.m_test);
                (0..n)
                    .map(|z| {
                        let rho = self.copies_state(z, self.m_test, "c")?;
                        Ok((0..n).map(|zh| self.dist[z][zh] * trace_product_re(&f[zh], rho.matrix())).sum())
                    })
                    .collect()
            })
            .collect()
    }

    fn povm_table(&self, train: SubsystemShape) -> Result<PovmTable> {
        let m = self.m;
        let n = self.n_theta();
        let k = self.n_hyp;
        match self.learner {
            EstimationLearner::Constant => Ok(PovmTable::Shared(Povm::trivial(train, 0))),
            EstimationLearner::LabelsErm => {
                let r = self.test_risk_table()?;
                Ok(PovmTable::Rule(Arc::new(move |s| {
                    let risk = |w: usize| s.iter().map(|&z| r[w][z]).sum::<f64>();
                    let best = (0..k).fold(0, |b, w| if risk(w) < risk(b) - 1e-12 { w } else { b });
                    Ok(Povm::trivial(train.clone(), best))
                })))
            }
            EstimationLearner::HoldoutErm => {
                let kp = k.min(m);
                let blocks: Vec<Vec<CMatrix>> = (0..kp).map(|w| self.estimator(w, self.m_train)).collect();
                let dist = self.dist.clone();
                let mut sizes = vec![0usize; kp];
                for i in 0..m {
                    sizes[i % kp] += 1;
                }
                Ok(PovmTable::Rule(Arc::new(move |s| {
                    let mut acc: Vec<Option<CMatrix>> = vec![None; kp];
                    for est in records_of(&vec![n; m]) {
                        let mut err = vec![0.0; kp];
                        let mut mat = CMatrix::identity(1, 1);
                        for i in 0..m {
                            err[i % kp] += dist[s[i]][est[i]];
                            mat = kron(&mat, &blocks[i % kp][est[i]]);
                        }
                        let mean = |g: usize| err[g] / sizes[g] as f64;
                        let best = (0..kp).fold(0, |b, g| if mean(g) < mean(b) - 1e-12 { g } else { b });
                        acc[best] = Some(match acc[best].take() {
                            None => mat,
                            Some(a) => a + mat,
                        });
                    }
                    let outcomes = acc
                        .into_iter()
                        .enumerate()
                        .filter_map(|(w, e)| e.map(|e| (w, e)))
                        .map(|(w, e)| Ok((w, EffectOperator::new(e, train.clone())?)))
                        .collect::<Result<Vec<_>>>()?;
                    Povm::new(outcomes)
                })))
            }
        }
    }

    fn triple(&self) -> Result<Triple> {
        let m = self.m;
        let n = self.n_theta();
        let test: Vec<Vec<String>> =
            (0..m).map(|i| (0..self.m_test).map(|c| format!("test_{i}_{c}")).collect()).collect();
        let train: Vec<Vec<String>> =
            (0..m).map(|i| (0..self.m_train).map(|c| format!("train_{i}_{c}")).collect()).collect();
        let mut states = Vec::with_capacity(m);
        for i in 0..m {
            let mut per = Vec::with_capacity(n);
            for z in 0..n {
                let t = self.copies_state(z, self.m_test, &format!("test_{i}"))?;
                let r = self.copies_state(z, self.m_train, &format!("train_{i}"))?;
                per.push(crate::qmat::tensor_product(&t, &r)?);
            }
            states.push(per);
        }
        let sites = SiteStructure {
            test: test.clone(),
            train,
            probs: vec![self.probs.clone(); m],
            states,
        };
        let ens = CQEnsemble::from_sites(sites)?;
        let train_shape = ens.train_shape()?;
        let lr = Learner::classical(self.povm_table(train_shape)?, ens.train_shape()?, self.n_hyp)?;
        let terms: Vec<Vec<HermitianObservable>> = (0..self.n_hyp)
            .map(|w| {
                let f = self.estimator(w, self.m_test);
                let shape = SubsystemShape::new((0..self.m_test).map(|c| (format!("c_{c}"), self.d)))?;
                (0..n)
                    .map(|z| {
                        let mut acc = CMatrix::zeros(f[0].nrows(), f[0].ncols());
                        for (zh, e) in f.iter().enumerate() {
                            acc += e.scale(self.dist[z][zh]);
                        }
                        HermitianObservable::new(acc, shape.clone())
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let local = LocalLoss {
            test,
            hyp: vec![Vec::new(); m],
            term: Arc::new(move |_, z, w| Ok(terms[w][z].clone())),
            alphabet: vec![n; m],
            n_hyp: self.n_hyp,
        };
        let loss = LossFamily::from_local(ens.test_shape()?, local)?;
        Ok(Triple { ens, lr, loss })
    }
}

pub fn build_parameter_estimation(cfg: &EstimationConfig, seed: u64) -> Result<(Triple, EstimationModel)> {
    let md = model(cfg, seed)?;
    Ok((md.triple()?, md))
}

pub(crate) fn instance(cfg: &EstimationConfig, seed: u64) -> Result<Instance> {
    let (triple, md) = build_parameter_estimation(cfg, seed)?;
    let declared = md.b_p / (2.0 * (cfg.m as f64).sqrt());
    let mut notes = BTreeMap::new();
    notes.insert("m".into(), cfg.m as f64);
    notes.insert("bP".into(), md.b_p);
    Ok(Instance {
        source: Source::Generic(triple),
        m: cfg.m,
        trivial_hyp: true,
        declared_alpha: Some(declared),
        declared_beta: Some(declared),
        notes,
        rate_note: Some(("paperConventionRhs", md.b_p)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{certify_cor22, evaluate, EvalOptions, Evaluation, ENUM_CAP};
    use rand::Rng;

    fn eval(cfg: &EstimationConfig, seed: u64) -> Evaluation {
        let (t, _) = build_parameter_estimation(cfg, seed).unwrap();
        evaluate(&t.ens, &t.lr, &t.loss, EvalOptions { enum_cap: ENUM_CAP, relent: false }).unwrap()
    }

    #[test]
    fn estimators_are_povms() {
        for family in [HypothesisFamily::RotatedBases, HypothesisFamily::Uninformative] {
            let cfg = EstimationConfig {
                d: 3,
                thetas: vec![vec![0.0], vec![0.5], vec![2.0]],
                family,
                ..Default::default()
            };
            let md = model(&cfg, 1).unwrap();
            for w in 0..cfg.n_hyp {
                let f = md.estimator(w, 2);
                let sum = f.iter().fold(CMatrix::zeros(9, 9), |a, b| a + b);
                assert!((sum - CMatrix::identity(9, 9)).camax() < 1e-12);
            }
        }
    }

    #[test]
    fn single_point_grid_has_zero_gap_and_bound() {
        let cfg = EstimationConfig {
            thetas: vec![vec![0.3]],
            ..Default::default()
        };
        let e = eval(&cfg, 0);
        assert_eq!(e.risks.gen, 0.0);
        let c = certify_cor22(&e, Some(0.0), Some(0.0)).unwrap();
        assert_eq!(c.rhs, 0.0);
        assert!(c.holds);
    }

    #[test]
    fn informative_learner_carries_more_information() {
        let base = EstimationConfig {
            m: 3,
            ..Default::default()
        };
        let informative = eval(&base, 0);
        let constant = eval(
            &EstimationConfig {
                learner: EstimationLearner::Constant,
                ..base
            },
            0,
        );
        assert!(constant.mi.abs() < 1e-12);
        assert!(informative.mi > constant.mi + 1e-3, "{}", informative.mi);
    }

    #[test]
    fn bound_holds_on_random_configs() {
        let mut rng = rng_from_seed(77);
        for seed in 0..50 {
            let n = rng.random_range(1..=3);
            let d = rng.random_range(2..=3);
            let cfg = EstimationConfig {
                d,
                m: rng.random_range(1..=if d == 2 { 3 } else { 2 }),
                thetas: (0..n).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect(),
                p_norm: [1.0, 2.0, f64::INFINITY][rng.random_range(0..3)],
                states: Some((0..n).map(|_| StateSpec::Random(1)).collect()),
                n_hyp: rng.random_range(1..=4),
                learner: [EstimationLearner::LabelsErm, EstimationLearner::HoldoutErm][rng.random_range(0..2)],
                noise: rng.random_range(0.0..0.5),
                ..Default::default()
            };
            let inst = instance(&cfg, seed).unwrap();
            let e = eval(&cfg, seed);
            let c = certify_cor22(&e, inst.declared_alpha, inst.declared_beta).unwrap();
            assert!(c.holds, "seed {seed}: gen {} rhs {}", c.gen, c.rhs);
        }
    }
}
