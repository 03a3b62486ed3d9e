//! Application scenarios: config types, instance builders and sweeps.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    certify_cor22, certify_cor24, certify_cor26, certify_general, evaluate, local_profiles, BoundCertificate,
    BoundName, EvalOptions, Evaluation, LocalProfiles, MgfSides, RiskReport, ENUM_CAP,
};
use crate::cqdata::{CQEnsemble, Learner};
use crate::error::{Error, Result};
use crate::loss::LossFamily;

pub mod classification;
pub mod entangled;
pub mod estimation;
pub mod inputs;
pub mod pac;
pub mod random;

pub use classification::{build_state_classification, ClassificationConfig};
pub use entangled::{build_entangled_pac, EntangledConfig};
pub use estimation::{build_parameter_estimation, EstimationConfig};
pub use inputs::{EffectSpec, StateSpec};
pub use pac::{build_pac_state_learning, PacConfig};
pub use random::RandomConfig;

/// Largest total data dimension the dense generic pipeline accepts.
pub const GENERIC_DIM_CAP: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    #[serde(alias = "stateClassification")]
    StateClassification,
    #[serde(alias = "pacStateLearning")]
    PacStateLearning,
    #[serde(alias = "entangledPac")]
    EntangledPac,
    #[serde(alias = "parameterEstimation")]
    ParameterEstimation,
    Random,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::StateClassification,
        ScenarioKind::PacStateLearning,
        ScenarioKind::EntangledPac,
        ScenarioKind::ParameterEstimation,
        ScenarioKind::Random,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioKind::StateClassification => "state_classification",
            ScenarioKind::PacStateLearning => "pac_state_learning",
            ScenarioKind::EntangledPac => "entangled_pac",
            ScenarioKind::ParameterEstimation => "parameter_estimation",
            ScenarioKind::Random => "random",
        }
    }

    pub fn description(&self) -> &'static str {
        match self {
            ScenarioKind::StateClassification => "learn a two-outcome POVM separating weighted pairs of states",
            ScenarioKind::PacStateLearning => "predict effect expectations of an unknown state via a covering net and ERM",
            ScenarioKind::EntangledPac => "learn a Boolean function from purified (entangled) example states",
            ScenarioKind::ParameterEstimation => "learn an estimator POVM for a parameter encoded in a state",
            ScenarioKind::Random => "seeded random classical-quantum instance (bound stress test)",
        }
    }

    /// Sweep axes this kind understands.
    pub fn axes(&self) -> &'static [&'static str] {
        match self {
            ScenarioKind::StateClassification => &["m", "d", "n_hyp", "noise"],
            ScenarioKind::PacStateLearning => &["m", "m_train", "m_test", "epsilon", "n_hyp"],
            ScenarioKind::EntangledPac => &["m", "noise", "temperature"],
            ScenarioKind::ParameterEstimation => &["m", "m_train", "m_test", "noise", "n_hyp"],
            ScenarioKind::Random => &["m", "n_hyp"],
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MgfChoice {
    /// Tabulated measured log-MGF envelopes.
    #[default]
    Measured,
    Bennett,
    /// Quadratic bounds from `alpha` and `beta`.
    Quadratic,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundConfig {
    /// Used when no bound is selected on the command line.
    pub name: Option<BoundName>,
    pub mgf: MgfChoice,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub alphas: Option<Vec<f64>>,
    pub betas: Option<Vec<f64>>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub max_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: String,
    pub values: Vec<f64>,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub enum_cap: Option<u64>,
    #[serde(default)]
    pub classification: Option<ClassificationConfig>,
    #[serde(default)]
    pub pac: Option<PacConfig>,
    #[serde(default)]
    pub entangled: Option<EntangledConfig>,
    #[serde(default)]
    pub estimation: Option<EstimationConfig>,
    #[serde(default)]
    pub random: Option<RandomConfig>,
    #[serde(default)]
    pub bound: BoundConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

impl ScenarioConfig {
    pub fn new(kind: ScenarioKind, seed: u64) -> Self {
        Self {
            kind,
            seed,
            enum_cap: None,
            classification: None,
            pac: None,
            entangled: None,
            estimation: None,
            random: None,
            bound: BoundConfig::default(),
            sweep: None,
        }
    }

    pub fn enum_cap(&self) -> u128 {
        self.enum_cap.map(u128::from).unwrap_or(ENUM_CAP)
    }

    /// Fills in the section for `kind` and rejects sections for other kinds.
    pub fn with_defaults(mut self) -> Result<Self> {
        let present = [
            (ScenarioKind::StateClassification, self.classification.is_some(), "classification"),
            (ScenarioKind::PacStateLearning, self.pac.is_some(), "pac"),
            (ScenarioKind::EntangledPac, self.entangled.is_some(), "entangled"),
            (ScenarioKind::ParameterEstimation, self.estimation.is_some(), "estimation"),
            (ScenarioKind::Random, self.random.is_some(), "random"),
        ];
        for (kind, is_set, name) in present {
            if is_set && kind != self.kind {
                return Err(Error::InvalidConfig(format!(
                    "section [{name}] does not apply to kind `{}`",
                    self.kind.as_str()
                )));
            }
        }
        match self.kind {
            ScenarioKind::StateClassification => {
                self.classification.get_or_insert_with(Default::default);
            }
            ScenarioKind::PacStateLearning => {
                self.pac.get_or_insert_with(Default::default);
            }
            ScenarioKind::EntangledPac => {
                self.entangled.get_or_insert_with(Default::default);
            }
            ScenarioKind::ParameterEstimation => {
                self.estimation.get_or_insert_with(Default::default);
            }
            ScenarioKind::Random => {
                self.random.get_or_insert_with(Default::default);
            }
        }
        Ok(self)
    }

    /// Table and size checks, including the enumeration cap.
    pub fn validate(&self) -> Result<()> {
        let cap = self.enum_cap();
        match self.kind {
            ScenarioKind::StateClassification => classification::validate(&section(&self.classification)?, cap),
            ScenarioKind::PacStateLearning => pac::validate(&section(&self.pac)?, cap),
            ScenarioKind::EntangledPac => entangled::validate(&section(&self.entangled)?, cap),
            ScenarioKind::ParameterEstimation => estimation::validate(&section(&self.estimation)?, cap),
            ScenarioKind::Random => random::validate(&section(&self.random)?, cap),
        }?;
        if let Some(sw) = &self.sweep {
            if sw.values.is_empty() {
                return Err(Error::InvalidConfig("sweep needs at least one value".into()));
            }
            for v in &sw.values {
                apply_axis(self, &sw.axis, *v)?.validate_point()?;
            }
        }
        Ok(())
    }

    fn validate_point(&self) -> Result<()> {
        Self { sweep: None, ..self.clone() }.validate()
    }
}

fn section<T: Clone + Default>(s: &Option<T>) -> Result<T> {
    Ok(s.clone().unwrap_or_default())
}

/// Ensemble, learner and loss of a scenario.
#[derive(Debug, Clone)]
pub struct Triple {
    pub ens: CQEnsemble,
    pub lr: Learner,
    pub loss: LossFamily,
}

#[derive(Debug, Clone)]
pub enum Source {
    /// Evaluated by the generic enumeration pipeline.
    Generic(Triple),
    /// Evaluated in closed form by a scenario-specific path.
    Reduced {
        eval: Box<Evaluation>,
        local: Option<LocalProfiles>,
        max_norm: Option<f64>,
    },
    /// Too large for exact evaluation; only scenario analytics are reported.
    Uncertified,
}

/// A built scenario plus the sub-gaussian parameters it declares analytically.
#[derive(Debug, Clone)]
pub struct Instance {
    pub source: Source,
    pub m: usize,
    pub trivial_hyp: bool,
    pub declared_alpha: Option<f64>,
    pub declared_beta: Option<f64>,
    pub notes: BTreeMap<String, f64>,
    /// Note name and scale c for the closed-form rate sqrt(c I / (2m)), I the total information.
    pub rate_note: Option<(&'static str, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PointResult {
    pub value: Option<f64>,
    pub seed: u64,
    pub risks: Option<RiskReport>,
    pub certificate: Option<BoundCertificate>,
    pub notes: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepResult {
    pub axis: String,
    pub points: Vec<PointResult>,
}

pub fn build(cfg: &ScenarioConfig) -> Result<Instance> {
    let cfg = cfg.clone().with_defaults()?;
    cfg.validate()?;
    let cap = cfg.enum_cap();
    match cfg.kind {
        ScenarioKind::StateClassification => {
            classification::instance(cfg.classification.as_ref().expect("defaulted"), cfg.seed, cap)
        }
        ScenarioKind::PacStateLearning => pac::instance(cfg.pac.as_ref().expect("defaulted"), cfg.seed, cap),
        ScenarioKind::EntangledPac => entangled::instance(cfg.entangled.as_ref().expect("defaulted"), cfg.seed),
        ScenarioKind::ParameterEstimation => {
            estimation::instance(cfg.estimation.as_ref().expect("defaulted"), cfg.seed)
        }
        ScenarioKind::Random => random::instance(cfg.random.as_ref().expect("defaulted"), cfg.seed),
    }
}

/// Exact evaluation of an instance, when it has one.
pub fn evaluation(inst: &Instance, enum_cap: u128) -> Result<Option<Evaluation>> {
    match &inst.source {
        Source::Generic(t) => Ok(Some(evaluate(
            &t.ens,
            &t.lr,
            &t.loss,
            EvalOptions {
                enum_cap,
                relent: true,
            },
        )?)),
        Source::Reduced { eval, .. } => Ok(Some((**eval).clone())),
        Source::Uncertified => Ok(None),
    }
}

fn local_of(inst: &Instance) -> Result<LocalProfiles> {
    match &inst.source {
        Source::Generic(t) => local_profiles(&t.ens, &t.lr, &t.loss),
        Source::Reduced { local: Some(l), .. } => Ok(l.clone()),
        _ => Err(Error::NotFactorized("scenario exposes no per-site structure".into())),
    }
}

fn max_norm_of(inst: &Instance) -> Result<f64> {
    match &inst.source {
        Source::Generic(t) => {
            let local = t
                .loss
                .local()
                .ok_or_else(|| Error::NotFactorized("loss has no local structure".into()))?;
            if t.ens.sites().is_none() {
                return Err(Error::NotFactorized("data carry no per-site product structure".into()));
            }
            if !t.lr.has_trivial_hyp() && t.lr.factorization().is_none() {
                return Err(Error::NotFactorized("learner POVMs are not declared factorized".into()));
            }
            local.max_norm()
        }
        Source::Reduced { max_norm: Some(n), .. } => Ok(*n),
        _ => Err(Error::NotFactorized("scenario exposes no local loss norm".into())),
    }
}

/// Certificate for `bound` on an evaluated instance.
pub fn certify_evaluation(
    inst: &Instance,
    eval: &Evaluation,
    bound: BoundName,
    bc: &BoundConfig,
) -> Result<BoundCertificate> {
    match bound {
        BoundName::Thm21 => {
            let sides = match bc.mgf {
                MgfChoice::Measured => MgfSides::measured(eval),
                MgfChoice::Bennett => MgfSides::bennett(eval),
                MgfChoice::Quadratic => {
                    let (a, b) = crate::bounds::fit_global(eval);
                    MgfSides::quadratic(
                        bc.alpha.or(inst.declared_alpha).unwrap_or(a),
                        bc.beta.or(inst.declared_beta).unwrap_or(b),
                    )
                }
            };
            certify_general(eval, &sides)
        }
        BoundName::Cor22 => certify_cor22(eval, bc.alpha.or(inst.declared_alpha), bc.beta.or(inst.declared_beta)),
        BoundName::Cor24 => certify_cor24(eval, &local_of(inst)?, bc.alphas.as_deref(), bc.betas.as_deref()),
        BoundName::Cor26 => {
            let (c1, c2) = match (bc.c1, bc.c2) {
                (Some(a), Some(b)) => (a, b),
                (a, b) if inst.trivial_hyp => (a.unwrap_or(0.0), b.unwrap_or(0.0)),
                _ => {
                    return Err(Error::InvalidConfig(
                        "cor26 with a quantum hypothesis needs c1 and c2 in [bound]".into(),
                    ))
                }
            };
            let norm = match bc.max_norm {
                Some(n) => n,
                None => max_norm_of(inst)?,
            };
            certify_cor26(eval, inst.m, c1, c2, norm)
        }
    }
}

/// Builds, evaluates and certifies one configuration.
pub fn run_point(cfg: &ScenarioConfig, bound: BoundName) -> Result<PointResult> {
    let inst = build(cfg)?;
    let eval = evaluation(&inst, cfg.enum_cap())?;
    let mut notes = inst.notes.clone();
    let (risks, certificate) = match &eval {
        Some(e) => {
            if let Some(r) = e.expected_relent {
                notes.insert("expectedRelEntropy".into(), r);
            }
            notes.insert("skippedMass".into(), e.skipped_mass);
            if let Some((name, scale)) = inst.rate_note {
                let info = e.qmi + e.holevo + e.mi;
                notes.insert(name.into(), (scale * info.max(0.0) / (2.0 * inst.m as f64)).sqrt());
            }
            (Some(e.risks), Some(certify_evaluation(&inst, e, bound, &cfg.bound)?))
        }
        None => (None, None),
    };
    Ok(PointResult {
        value: None,
        seed: cfg.seed,
        risks,
        certificate,
        notes,
    })
}

fn as_count(axis: &str, v: f64) -> Result<usize> {
    if v.fract() != 0.0 || v < 1.0 || v > 1e9 {
        return Err(Error::InvalidConfig(format!("axis `{axis}` needs positive integers, got {v}")));
    }
    Ok(v as usize)
}

/// Copy of `cfg` with one parameter replaced.
pub fn apply_axis(cfg: &ScenarioConfig, axis: &str, v: f64) -> Result<ScenarioConfig> {
    let mut out = cfg.clone().with_defaults()?;
    if !out.kind.axes().contains(&axis) {
        return Err(Error::InvalidConfig(format!(
            "unknown sweep axis `{axis}` for kind `{}` (expected one of {:?})",
            out.kind.as_str(),
            out.kind.axes()
        )));
    }
    match out.kind {
        ScenarioKind::StateClassification => {
            let c = out.classification.as_mut().expect("defaulted");
            match axis {
                "m" => c.m = as_count(axis, v)?,
                "d" => c.d = as_count(axis, v)?,
                "n_hyp" => {
                    c.n_hyp = as_count(axis, v)?;
                    c.hypotheses = None;
                }
                _ => c.noise = v,
            }
        }
        ScenarioKind::PacStateLearning => {
            let c = out.pac.as_mut().expect("defaulted");
            match axis {
                "m" => c.m = as_count(axis, v)?,
                "m_train" => c.m_train = as_count(axis, v)?,
                "m_test" => c.m_test = as_count(axis, v)?,
                "n_hyp" => c.n_hyp = as_count(axis, v)?,
                _ => c.epsilon = v,
            }
        }
        ScenarioKind::EntangledPac => {
            let c = out.entangled.as_mut().expect("defaulted");
            match axis {
                "m" => c.m = as_count(axis, v)?,
                "noise" => c.noise = v,
                _ => c.temperature = v,
            }
        }
        ScenarioKind::ParameterEstimation => {
            let c = out.estimation.as_mut().expect("defaulted");
            match axis {
                "m" => c.m = as_count(axis, v)?,
                "m_train" => c.m_train = as_count(axis, v)?,
                "m_test" => c.m_test = as_count(axis, v)?,
                "n_hyp" => c.n_hyp = as_count(axis, v)?,
                _ => c.noise = v,
            }
        }
        ScenarioKind::Random => {
            let c = out.random.as_mut().expect("defaulted");
            match axis {
                "m" => c.m = Some(as_count(axis, v)?),
                _ => c.n_hyp = Some(as_count(axis, v)?),
            }
        }
    }
    Ok(out)
}

/// One point per (value, seed), ordered by value and then seed.
pub fn run_sweep(
    cfg: &ScenarioConfig,
    axis: &str,
    values: &[f64],
    seeds: &[u64],
    bound: BoundName,
) -> Result<SweepResult> {
    let mut grid: Vec<(f64, u64)> = Vec::with_capacity(values.len() * seeds.len());
    for &v in values {
        for &s in seeds {
            grid.push((v, s));
        }
    }
    grid.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    grid.dedup();
    let points = grid
        .par_iter()
        .map(|&(v, s)| {
            let mut point_cfg = apply_axis(cfg, axis, v)?;
            point_cfg.seed = s;
            point_cfg.sweep = None;
            let mut p = run_point(&point_cfg, bound)?;
            p.value = Some(v);
            Ok(p)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        axis: axis.to_string(),
        points,
    })
}

/// Binomial probability mass C(n, k) p^k (1 - p)^(n - k).
pub(crate) fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    let mut c = 1.0f64;
    for k in 0..=n {
        if k > 0 {
            c = c * (n - k + 1) as f64 / k as f64;
        }
        out[k] = c * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_sums_to_one() {
        for n in [0, 1, 5, 64] {
            let s: f64 = binomial_pmf(n, 0.3).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert_eq!(binomial_pmf(3, 0.0), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn foreign_sections_are_rejected() {
        let mut cfg = ScenarioConfig::new(ScenarioKind::StateClassification, 1);
        cfg.pac = Some(PacConfig::default());
        assert!(matches!(cfg.with_defaults(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn unknown_axis_is_rejected() {
        let cfg = ScenarioConfig::new(ScenarioKind::EntangledPac, 1);
        assert!(apply_axis(&cfg, "epsilon", 0.1).is_err());
        assert!(apply_axis(&cfg, "m", 2.5).is_err());
        assert_eq!(apply_axis(&cfg, "m", 3.0).unwrap().entangled.unwrap().m, 3);
    }

    #[test]
    fn single_point_sweep_is_a_singleton() {
        let cfg = ScenarioConfig::new(ScenarioKind::StateClassification, 3);
        let r = run_sweep(&cfg, "m", &[2.0], &[3], BoundName::Cor22).unwrap();
        assert_eq!(r.points.len(), 1);
        assert_eq!(r.points[0].value, Some(2.0));
    }
}
