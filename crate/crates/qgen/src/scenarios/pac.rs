//! Learning to predict effect expectations of an unknown state: covering net, then ERM.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::inputs::{check_probs, sphere_points, EffectSpec, StateSpec};
use super::{binomial_pmf, Instance, Source, Triple, GENERIC_DIM_CAP};
use crate::cqdata::{CQEnsemble, Learner, Povm, PovmRule, PovmTable, SiteStructure};
use crate::error::{Error, Result};
use crate::loss::{LocalLoss, LossFamily};
use crate::qmat::{kron, CMatrix, DensityOperator, EffectOperator, HermitianObservable, Operator, SubsystemShape};
use crate::random::{random_pure, rng_from_seed};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacMethod {
    /// Exact when the outcome tree fits the enumeration cap, Monte Carlo otherwise.
    #[default]
    Auto,
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PacConfig {
    pub d: usize,
    pub m: usize,
    pub m_train: usize,
    pub m_test: usize,
    /// Covering radius of the empirical net.
    pub epsilon: f64,
    /// Size of the default hypothesis family; ignored when `hypotheses` is given.
    pub n_hyp: usize,
    /// Unknown state; hypothesis 0 when absent.
    pub target: Option<StateSpec>,
    pub hypotheses: Option<Vec<StateSpec>>,
    pub effects: Option<Vec<EffectSpec>>,
    /// Distribution over effects; uniform when absent.
    pub probs: Option<Vec<f64>>,
    pub replicates: usize,
    pub method: PacMethod,
}

impl Default for PacConfig {
    fn default() -> Self {
        Self {
            d: 2,
            m: 16,
            m_train: 16,
            m_test: 16,
            epsilon: 0.1,
            n_hyp: 64,
            target: None,
            hypotheses: None,
            effects: None,
            probs: None,
            replicates: 4000,
            method: PacMethod::Auto,
        }
    }
}

impl PacConfig {
    fn n_hyp(&self) -> usize {
        self.hypotheses.as_ref().map_or(self.n_hyp, Vec::len)
    }

    fn n_effects(&self) -> usize {
        self.effects.as_ref().map_or(self.d * self.d + self.d * (self.d - 1), Vec::len)
    }

    /// Leaves of the exact outcome tree: both symbol halves and all count vectors.
    fn tree_size(&self) -> f64 {
        let z = self.n_effects() as f64;
        z.powi(2 * self.m as i32) * ((self.m_train + 1) as f64).powi(self.m as i32)
    }

    fn generic_dim(&self) -> f64 {
        (self.d as f64).powi((self.m * (self.m_train + self.m_test)) as i32)
    }
}

pub(crate) fn validate(cfg: &PacConfig, cap: u128) -> Result<()> {
    if cfg.d < 2 || cfg.m == 0 || cfg.m_train == 0 || cfg.m_test == 0 || cfg.n_hyp() == 0 {
        return Err(Error::InvalidConfig("pac needs d >= 2 and positive m, m_train, m_test, hypotheses".into()));
    }
    if !(cfg.epsilon > 0.0) {
        return Err(Error::InvalidConfig(format!("epsilon must be positive, got {}", cfg.epsilon)));
    }
    if cfg.replicates == 0 {
        return Err(Error::InvalidConfig("replicates must be positive".into()));
    }
    if let Some(p) = &cfg.probs {
        if p.len() != cfg.n_effects() {
            return Err(Error::InvalidConfig(format!("{} effect probabilities for {} effects", p.len(), cfg.n_effects())));
        }
        check_probs(p, "effect distribution")?;
    }
    if cfg.n_hyp() as u128 > cap {
        return Err(Error::NetTooLarge {
            size: cfg.n_hyp(),
            cap: cap.min(usize::MAX as u128) as usize,
        });
    }
    if cfg.method == PacMethod::Exact && cfg.tree_size() > cap as f64 {
        return Err(Error::EnumerationCap {
            pairs: cfg.tree_size().min(u128::MAX as f64) as u128,
            cap,
        });
    }
    Ok(())
}

/// Excess prediction error estimate with its standard error (zero when exact).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ExcessEstimate {
    pub excess: f64,
    pub std_err: f64,
    pub mean_net_size: f64,
    pub mean_log_net_size: f64,
    pub optimal_error: f64,
    pub exact: bool,
}

/// Expectation tables of a configured instance.
#[derive(Debug, Clone)]
pub struct PacModel {
    pub m: usize,
    pub m_train: usize,
    pub m_test: usize,
    pub epsilon: f64,
    /// P(z) over effects.
    pub probs: Vec<f64>,
    /// a[z][w] = tr[E(z) rho(w)].
    pub a: Vec<Vec<f64>>,
    /// t[z] = tr[E(z) rho_0].
    pub target: Vec<f64>,
    effects: Vec<EffectOperator>,
    rho0: DensityOperator,
}

fn default_effects(d: usize) -> Result<Vec<EffectOperator>> {
    let shape = SubsystemShape::single("x", d)?;
    let mut out = Vec::new();
    let one = Complex64::new(1.0, 0.0);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for k in 0..d {
        let mut v = vec![Complex64::new(0.0, 0.0); d];
        v[k] = one;
        out.push(EffectOperator::projector(&v, shape.clone())?);
    }
    for j in 0..d {
        for k in (j + 1)..d {
            for phase in [
                Complex64::new(1.0, 0.0),
                Complex64::new(-1.0, 0.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(0.0, -1.0),
            ] {
                let mut v = vec![Complex64::new(0.0, 0.0); d];
                v[j] = Complex64::new(s, 0.0);
                v[k] = phase * s;
                out.push(EffectOperator::projector(&v, shape.clone())?);
            }
        }
    }
    Ok(out)
}

pub fn model(cfg: &PacConfig, seed: u64) -> Result<PacModel> {
    let mut rng = rng_from_seed(seed);
    let shape = SubsystemShape::single("x", cfg.d)?;
    let hyps: Vec<DensityOperator> = match &cfg.hypotheses {
        Some(list) => list.iter().map(|s| s.build(shape.clone(), &mut rng)).collect::<Result<_>>()?,
        None if cfg.d == 2 => sphere_points(cfg.n_hyp)
            .into_iter()
            .map(|v| StateSpec::Bloch(v).build(shape.clone(), &mut rng))
            .collect::<Result<_>>()?,
        None => (0..cfg.n_hyp).map(|_| random_pure(&mut rng, shape.clone())).collect(),
    };
    let rho0 = match &cfg.target {
        Some(s) => s.build(shape.clone(), &mut rng)?,
        None => hyps[0].clone(),
    };
    let effects = match &cfg.effects {
        Some(list) => list.iter().map(|e| e.build(shape.clone(), &mut rng)).collect::<Result<_>>()?,
        None => default_effects(cfg.d)?,
    };
    let probs = match &cfg.probs {
        Some(p) => p.clone(),
        None => vec![1.0 / effects.len() as f64; effects.len()],
    };
    let a = effects
        .iter()
        .map(|e| hyps.iter().map(|h| e.probability(h)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let target = effects.iter().map(|e| e.probability(&rho0)).collect::<Result<Vec<_>>>()?;
    Ok(PacModel {
        m: cfg.m,
        m_train: cfg.m_train,
        m_test: cfg.m_test,
        epsilon: cfg.epsilon,
        probs,
        a,
        target,
        effects,
        rho0,
    })
}

impl PacModel {
    pub fn n_hyp(&self) -> usize {
        self.a[0].len()
    }

    pub fn n_effects(&self) -> usize {
        self.a.len()
    }

    /// Squared empirical seminorm distance between hypotheses, given symbol counts.
    fn dist2(&self, counts: &[usize], u: usize, v: usize) -> f64 {
        let n: usize = counts.iter().sum();
        counts
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0)
            .map(|(z, c)| *c as f64 * (self.a[z][u] - self.a[z][v]).powi(2))
            .sum::<f64>()
            / n as f64
    }

    /// Greedy farthest-point net from hypothesis 0 until the covering radius is at most epsilon.
    pub fn net(&self, counts: &[usize]) -> Vec<usize> {
        let n = self.n_hyp();
        let eps2 = self.epsilon * self.epsilon;
        let mut net = vec![0];
        let mut nearest: Vec<f64> = (0..n).map(|w| self.dist2(counts, w, 0)).collect();
        loop {
            let mut far = 0;
            for w in 1..n {
                if nearest[w] > nearest[far] {
                    far = w;
                }
            }
            if nearest[far] <= eps2 {
                return net;
            }
            net.push(far);
            for w in 0..n {
                nearest[w] = nearest[w].min(self.dist2(counts, w, far));
            }
        }
    }

    /// Net member minimizing the training risk; ties go to the earlier net entry.
    pub fn erm(&self, net: &[usize], train: &[(usize, usize)]) -> usize {
        let mt = self.m_train as f64;
        let risk = |w: usize| train.iter().map(|&(z, c)| (self.a[z][w] - c as f64 / mt).abs()).sum::<f64>();
        let mut best = net[0];
        let mut best_risk = risk(best);
        for &w in &net[1..] {
            let r = risk(w);
            if r < best_risk {
                best = w;
                best_risk = r;
            }
        }
        best
    }

    pub fn prediction_error(&self, w: usize) -> f64 {
        (0..self.n_effects()).map(|z| self.probs[z] * (self.target[z] - self.a[z][w]).abs()).sum()
    }

    pub fn optimal_error(&self) -> f64 {
        (0..self.n_hyp()).map(|w| self.prediction_error(w)).fold(f64::INFINITY, f64::min)
    }

    fn counts_of(&self, symbols: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_effects()];
        for &z in symbols {
            c[z] += 1;
        }
        c
    }

    fn sample_symbol(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (z, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return z;
            }
        }
        self.probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
    }

    /// Excess prediction error over seeded replicates; each replicate draws from its own stream.
    pub fn monte_carlo(&self, seed: u64, replicates: usize) -> Result<ExcessEstimate> {
        let opt = self.optimal_error();
        let binomials: Vec<Binomial> = self
            .target
            .iter()
            .map(|t| Binomial::new(self.m_train as u64, t.clamp(0.0, 1.0)))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidConfig(format!("binomial model: {e}")))?;
        let draws: Vec<(f64, f64)> = (0..replicates)
            .into_par_iter()
            .map(|r| {
                let mut rng = rng_from_seed(seed);
                rng.set_stream(r as u64 + 1);
                let first: Vec<usize> = (0..self.m).map(|_| self.sample_symbol(&mut rng)).collect();
                let train: Vec<(usize, usize)> = (0..self.m)
                    .map(|_| {
                        let z = self.sample_symbol(&mut rng);
                        (z, binomials[z].sample(&mut rng) as usize)
                    })
                    .collect();
                let net = self.net(&self.counts_of(&first));
                let w = self.erm(&net, &train);
                (self.prediction_error(w) - opt, net.len() as f64)
            })
            .collect();
        let n = replicates as f64;
        let mean = draws.iter().map(|d| d.0).sum::<f64>() / n;
        let var = if replicates > 1 {
            draws.iter().map(|d| (d.0 - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Ok(ExcessEstimate {
            excess: mean,
            std_err: (var / n).sqrt(),
            mean_net_size: draws.iter().map(|d| d.1).sum::<f64>() / n,
            mean_log_net_size: draws.iter().map(|d| d.1.ln()).sum::<f64>() / n,
            optimal_error: opt,
            exact: false,
        })
    }

    /// Excess prediction error by enumerating every symbol sequence and count vector.
    pub fn exact(&self) -> Result<ExcessEstimate> {
        let opt = self.optimal_error();
        let nz = self.n_effects();
        let m = self.m;
        let count_laws: Vec<Vec<f64>> = self.target.iter().map(|t| binomial_pmf(self.m_train, *t)).collect();
        let seqs = crate::cqdata::records_of(&vec![nz; m]);
        let seq_prob = |s: &[usize]| s.iter().map(|z| self.probs[*z]).product::<f64>();
        let mut excess = 0.0;
        let mut net_size = 0.0;
        let mut log_net = 0.0;
        for first in &seqs {
            let pf = seq_prob(first);
            if pf == 0.0 {
                continue;
            }
            let net = self.net(&self.counts_of(first));
            net_size += pf * net.len() as f64;
            log_net += pf * (net.len() as f64).ln();
            for second in &seqs {
                let ps = seq_prob(second);
                if ps == 0.0 {
                    continue;
                }
                for counts in crate::cqdata::records_of(&vec![self.m_train + 1; m]) {
                    let pc: f64 = (0..m).map(|i| count_laws[second[i]][counts[i]]).product();
                    if pc == 0.0 {
                        continue;
                    }
                    let train: Vec<(usize, usize)> = second.iter().cloned().zip(counts.iter().cloned()).collect();
                    let w = self.erm(&net, &train);
                    excess += pf * ps * pc * (self.prediction_error(w) - opt);
                }
            }
        }
        Ok(ExcessEstimate {
            excess,
            std_err: 0.0,
            mean_net_size: net_size,
            mean_log_net_size: log_net,
            optimal_error: opt,
            exact: true,
        })
    }

    /// Sum over outcome strings with `c` ones of the product of E(z) / (1 - E(z)) factors.
    fn count_effect(&self, z: usize, copies: usize, c: usize) -> CMatrix {
        let e = self.effects[z].matrix();
        let d = e.nrows();
        let not_e = CMatrix::identity(d, d) - e;
        let mut acc = CMatrix::zeros(d.pow(copies as u32), d.pow(copies as u32));
        for b in 0..(1usize << copies) {
            if b.count_ones() as usize != c {
                continue;
            }
            let mut mat = CMatrix::identity(1, 1);
            for l in 0..copies {
                mat = kron(&mat, if (b >> l) & 1 == 1 { e } else { &not_e });
            }
            acc += mat;
        }
        acc
    }

    /// Local loss on one test block: sum_c |a(z, w) - mean(c)| times the product effect of c.
    fn test_loss(&self, z: usize, w: usize) -> CMatrix {
        let e = self.effects[z].matrix();
        let d = e.nrows();
        let not_e = CMatrix::identity(d, d) - e;
        let n = self.m_test;
        let dim = d.pow(n as u32);
        let mut acc = CMatrix::zeros(dim, dim);
        for b in 0..(1usize << n) {
            let mean = b.count_ones() as f64 / n as f64;
            let mut mat = CMatrix::identity(1, 1);
            for l in 0..n {
                mat = kron(&mat, if (b >> l) & 1 == 1 { e } else { &not_e });
            }
            acc += mat.scale((self.a[z][w] - mean).abs());
        }
        acc
    }

    fn power(&self, copies: usize) -> CMatrix {
        let mut mat = CMatrix::identity(1, 1);
        for _ in 0..copies {
            mat = kron(&mat, self.rho0.matrix());
        }
        mat
    }

    /// Generic pipeline; site symbols are pairs (net symbol, training symbol).
    pub fn triple(&self) -> Result<Triple> {
        let m = self.m;
        let nz = self.n_effects();
        let d = self.rho0.dim();
        let dt = d.pow(self.m_test as u32);
        let dr = d.pow(self.m_train as u32);
        let block = kron(&self.power(self.m_test), &self.power(self.m_train));
        let mut states = Vec::with_capacity(m);
        for i in 0..m {
            let shape = SubsystemShape::new([(format!("test_{i}"), dt), (format!("train_{i}"), dr)])?;
            let st = DensityOperator::new(block.clone(), shape)?;
            states.push(vec![st; nz * nz]);
        }
        let pair_probs: Vec<f64> = (0..nz * nz).map(|u| self.probs[u / nz] * self.probs[u % nz]).collect();
        let sites = SiteStructure {
            test: (0..m).map(|i| vec![format!("test_{i}")]).collect(),
            train: (0..m).map(|i| vec![format!("train_{i}")]).collect(),
            probs: vec![pair_probs; m],
            states,
        };
        let ens = CQEnsemble::from_sites(sites)?;
        let train_shape = ens.train_shape()?;
        let blocks: Vec<Vec<CMatrix>> = (0..nz)
            .map(|z| (0..=self.m_train).map(|c| self.count_effect(z, self.m_train, c)).collect())
            .collect();
        let me = self.clone();
        let shape = train_shape.clone();
        let rule: PovmRule = Arc::new(move |s| {
            let first: Vec<usize> = s.iter().map(|u| u / nz).collect();
            let second: Vec<usize> = s.iter().map(|u| u % nz).collect();
            let net = me.net(&me.counts_of(&first));
            let mut acc: Vec<Option<CMatrix>> = vec![None; me.n_hyp()];
            for counts in crate::cqdata::records_of(&vec![me.m_train + 1; me.m]) {
                let train: Vec<(usize, usize)> = second.iter().cloned().zip(counts.iter().cloned()).collect();
                let w = me.erm(&net, &train);
                let mut mat = CMatrix::identity(1, 1);
                for i in 0..me.m {
                    mat = kron(&mat, &blocks[second[i]][counts[i]]);
                }
                match &mut acc[w] {
                    Some(a) => *a += mat,
                    slot => *slot = Some(mat),
                }
            }
            let outcomes = acc
                .into_iter()
                .enumerate()
                .filter_map(|(w, a)| a.map(|a| (w, a)))
                .map(|(w, a)| Ok((w, EffectOperator::new(a, shape.clone())?)))
                .collect::<Result<Vec<_>>>()?;
            Povm::new(outcomes)
        });
        let lr = Learner::classical(PovmTable::Rule(rule), train_shape, self.n_hyp())?;
        let me = self.clone();
        let block_shape = SubsystemShape::single("x", dt)?;
        let local = LocalLoss {
            test: (0..m).map(|i| vec![format!("test_{i}")]).collect(),
            hyp: vec![Vec::new(); m],
            term: Arc::new(move |_, u, w| HermitianObservable::new(me.test_loss(u % nz, w), block_shape.clone())),
            alphabet: vec![nz * nz; m],
            n_hyp: self.n_hyp(),
        };
        let loss = LossFamily::from_local(ens.test_shape()?, local)?;
        Ok(Triple { ens, lr, loss })
    }
}

/// Generic (ensemble, learner, loss) plus the model exposing nets, ERM and excess risk.
pub fn build_pac_state_learning(cfg: &PacConfig, seed: u64) -> Result<(Triple, PacModel)> {
    if cfg.generic_dim() > GENERIC_DIM_CAP as f64 {
        return Err(Error::DimensionCap {
            dim: cfg.generic_dim().min(usize::MAX as f64) as usize,
            cap: GENERIC_DIM_CAP,
        });
    }
    let model = model(cfg, seed)?;
    Ok((model.triple()?, model))
}

pub fn excess(cfg: &PacConfig, seed: u64, cap: u128) -> Result<ExcessEstimate> {
    let model = model(cfg, seed)?;
    let exact = match cfg.method {
        PacMethod::Exact => true,
        PacMethod::MonteCarlo => false,
        PacMethod::Auto => cfg.tree_size() <= cap as f64,
    };
    if exact {
        model.exact()
    } else {
        model.monte_carlo(seed, cfg.replicates)
    }
}

pub(crate) fn instance(cfg: &PacConfig, seed: u64, cap: u128) -> Result<Instance> {
    let est = excess(cfg, seed, cap)?;
    let mut notes = BTreeMap::new();
    notes.insert("excess".into(), est.excess);
    notes.insert("excessStdErr".into(), est.std_err);
    notes.insert("meanNetSize".into(), est.mean_net_size);
    notes.insert("meanLogNetSize".into(), est.mean_log_net_size);
    notes.insert("optimalError".into(), est.optimal_error);
    notes.insert("epsilon".into(), cfg.epsilon);
    notes.insert("exact".into(), if est.exact { 1.0 } else { 0.0 });
    let nz = cfg.n_effects() as f64;
    let pairs = nz.powi(2 * cfg.m as i32) * cfg.n_hyp() as f64;
    let source = if cfg.generic_dim() <= GENERIC_DIM_CAP as f64 && pairs <= cap as f64 {
        Source::Generic(model(cfg, seed)?.triple()?)
    } else {
        Source::Uncertified
    };
    let declared = 1.0 / (2.0 * (cfg.m as f64).sqrt());
    Ok(Instance {
        source,
        m: cfg.m,
        trivial_hyp: true,
        declared_alpha: Some(declared),
        declared_beta: Some(declared),
        notes,
        rate_note: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{certify_cor22, evaluate, EvalOptions};
    use proptest::prelude::*;

    #[test]
    fn default_effects_are_the_pauli_projectors() {
        let e = default_effects(2).unwrap();
        assert_eq!(e.len(), 6);
        let rho = DensityOperator::basis(0, SubsystemShape::single("x", 2).unwrap()).unwrap();
        let p: Vec<f64> = e.iter().map(|e| e.probability(&rho).unwrap()).collect();
        for (got, want) in p.iter().zip([1.0, 0.0, 0.5, 0.5, 0.5, 0.5]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn net_covers_every_hypothesis(seed in 0u64..500, eps in 0.05f64..0.5, m in 1usize..12) {
            let cfg = PacConfig { epsilon: eps, m, n_hyp: 40, ..Default::default() };
            let model = model(&cfg, seed).unwrap();
            let mut rng = rng_from_seed(seed);
            let symbols: Vec<usize> = (0..m).map(|_| model.sample_symbol(&mut rng)).collect();
            let counts = model.counts_of(&symbols);
            let net = model.net(&counts);
            for w in 0..model.n_hyp() {
                let best = net.iter().map(|&u| model.dist2(&counts, w, u)).fold(f64::INFINITY, f64::min);
                prop_assert!(best.sqrt() <= eps + 1e-12);
            }
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = PacConfig {
            replicates: 200,
            ..Default::default()
        };
        let a = excess(&cfg, 5, 0).unwrap();
        let b = excess(&cfg, 5, 0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn monte_carlo_agrees_with_exact() {
        let cfg = PacConfig {
            m: 2,
            m_train: 2,
            n_hyp: 12,
            epsilon: 0.2,
            replicates: 40_000,
            ..Default::default()
        };
        let model = model(&cfg, 2).unwrap();
        let ex = model.exact().unwrap();
        let mc = model.monte_carlo(2, cfg.replicates).unwrap();
        assert!((ex.excess - mc.excess).abs() < 4.0 * mc.std_err + 1e-12, "{ex:?} vs {mc:?}");
    }

    #[test]
    fn noiseless_limit_is_within_epsilon() {
        // Large training and test budgets with the target in the family.
        let cfg = PacConfig {
            m: 32,
            m_train: 4096,
            epsilon: 0.1,
            replicates: 300,
            method: PacMethod::MonteCarlo,
            ..Default::default()
        };
        let est = excess(&cfg, 3, 0).unwrap();
        assert!(est.excess <= cfg.epsilon, "{est:?}");
    }

    #[test]
    fn tiny_generic_instance_matches_enumeration() {
        let cfg = PacConfig {
            m: 1,
            m_train: 2,
            m_test: 1,
            n_hyp: 8,
            epsilon: 0.2,
            ..Default::default()
        };
        let (t, model) = build_pac_state_learning(&cfg, 1).unwrap();
        let e = evaluate(&t.ens, &t.lr, &t.loss, EvalOptions::default()).unwrap();
        // Expected test loss of the chosen hypothesis, recomputed classically.
        let mut emp = 0.0;
        let nz = model.n_effects();
        for u in 0..nz * nz {
            let (f, z) = (u / nz, u % nz);
            let net = model.net(&model.counts_of(&[f]));
            for c in 0..=2 {
                let pc = binomial_pmf(2, model.target[z])[c];
                let w = model.erm(&net, &[(z, c)]);
                let t = model.target[z];
                let test = (1.0 - t) * model.a[z][w] + t * (1.0 - model.a[z][w]);
                emp += model.probs[f] * model.probs[z] * pc * test;
            }
        }
        assert!((e.risks.empirical - emp).abs() < 1e-10);
        assert!(certify_cor22(&e, None, None).unwrap().holds);
    }
}
