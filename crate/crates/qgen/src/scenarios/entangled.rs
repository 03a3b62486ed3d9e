//! Boolean function learning from purified example states.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::inputs::check_probs;
use super::{Instance, Source, Triple, GENERIC_DIM_CAP};
use crate::cqdata::{records_of, CQEnsemble, Channel, ChannelTable, Learner, Povm, PovmTable, SiteStructure};
use crate::error::{Error, Result};
use crate::loss::{LocalLoss, LossFamily};
use crate::qmat::{real_to_complex, CMatrix, DensityOperator, HermitianObservable, SubsystemShape};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntangledLearner {
    /// Lowest empirical error, ties to the lower truth table.
    Erm,
    /// P(w|s) proportional to exp(-m * empirical error / temperature).
    #[default]
    Gibbs,
    /// Rows of `table`, one per training sequence.
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntangledConfig {
    /// Input bits; X = {0,1}^n.
    pub n: usize,
    pub m: usize,
    /// Label flip probability.
    pub noise: f64,
    /// Target truth table as a bit mask over x; first input bit when absent.
    pub target: Option<u64>,
    /// Input marginal; uniform when absent.
    pub marginal: Option<Vec<f64>>,
    pub learner: EntangledLearner,
    pub temperature: f64,
    /// P(w|s), one row per training sequence in row-major order.
    pub table: Option<Vec<Vec<f64>>>,
}

impl Default for EntangledConfig {
    fn default() -> Self {
        Self {
            n: 1,
            m: 2,
            noise: 0.1,
            target: None,
            marginal: None,
            learner: EntangledLearner::Gibbs,
            temperature: 1.0,
            table: None,
        }
    }
}

impl EntangledConfig {
    fn n_x(&self) -> usize {
        1 << self.n
    }

    fn n_z(&self) -> usize {
        2 * self.n_x()
    }

    fn n_w(&self) -> usize {
        1 << self.n_x()
    }

    fn data_dim(&self) -> f64 {
        (self.n_z() as f64).powi(2 * self.m as i32) * self.n_w() as f64
    }
}

pub(crate) fn validate(cfg: &EntangledConfig, _cap: u128) -> Result<()> {
    if cfg.m == 0 {
        return Err(Error::InvalidConfig("entangled needs m >= 1".into()));
    }
    if cfg.n > 3 {
        return Err(Error::InvalidConfig(format!("entangled supports at most 3 input bits, got {}", cfg.n)));
    }
    if !(0.0..=1.0).contains(&cfg.noise) {
        return Err(Error::InvalidConfig(format!("noise must lie in [0, 1], got {}", cfg.noise)));
    }
    if cfg.learner == EntangledLearner::Gibbs && !(cfg.temperature > 0.0) {
        return Err(Error::InvalidConfig(format!("temperature must be positive, got {}", cfg.temperature)));
    }
    if let Some(t) = cfg.target {
        if t >= cfg.n_w() as u64 {
            return Err(Error::InvalidConfig(format!("target mask {t} has bits beyond {} inputs", cfg.n_x())));
        }
    }
    if let Some(p) = &cfg.marginal {
        if p.len() != cfg.n_x() {
            return Err(Error::InvalidConfig(format!("marginal has {} entries, expected {}", p.len(), cfg.n_x())));
        }
        check_probs(p, "input marginal")?;
    }
    if cfg.data_dim() > GENERIC_DIM_CAP as f64 {
        return Err(Error::DimensionCap {
            dim: cfg.data_dim().min(usize::MAX as f64) as usize,
            cap: GENERIC_DIM_CAP,
        });
    }
    let n_s = cfg.n_z().pow(cfg.m as u32);
    match (&cfg.table, cfg.learner) {
        (None, EntangledLearner::Table) => Err(Error::InvalidConfig("learner `table` needs a table".into())),
        (Some(rows), _) => {
            if rows.len() != n_s || rows.iter().any(|r| r.len() != cfg.n_w()) {
                return Err(Error::InvalidConfig(format!(
                    "table must have {n_s} rows of {} probabilities",
                    cfg.n_w()
                )));
            }
            for r in rows {
                check_probs(r, "learner table row")?;
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

/// Classical description: symbol law, loss table and learner conditional.
#[derive(Debug, Clone)]
pub struct EntangledModel {
    pub m: usize,
    /// P(z) with z = 2x + y.
    pub pz: Vec<f64>,
    /// loss[w][z] = [w(x) != y].
    pub loss: Vec<Vec<f64>>,
    /// cond[s][w] = P(w | s), s row-major over Z^m.
    pub cond: Vec<Vec<f64>>,
}

pub fn model(cfg: &EntangledConfig) -> Result<EntangledModel> {
    validate(cfg, u128::MAX)?;
    let n_x = cfg.n_x();
    let n_z = cfg.n_z();
    let n_w = cfg.n_w();
    let px = cfg.marginal.clone().unwrap_or_else(|| vec![1.0 / n_x as f64; n_x]);
    let target = cfg.target.unwrap_or_else(|| {
        // f(x) = first input bit, the most significant one.
        if cfg.n == 0 {
            0
        } else {
            (0..n_x).filter(|x| (x >> (cfg.n - 1)) & 1 == 1).map(|x| 1u64 << x).sum()
        }
    });
    let mut pz = vec![0.0; n_z];
    for x in 0..n_x {
        let fx = ((target >> x) & 1) as usize;
        pz[2 * x + fx] += px[x] * (1.0 - cfg.noise);
        pz[2 * x + 1 - fx] += px[x] * cfg.noise;
    }
    let loss: Vec<Vec<f64>> = (0..n_w)
        .map(|w| (0..n_z).map(|z| if (w >> (z / 2)) & 1 != z % 2 { 1.0 } else { 0.0 }).collect())
        .collect();
    let records = records_of(&vec![n_z; cfg.m]);
    let cond = match &cfg.table {
        Some(rows) => rows.clone(),
        None => records
            .iter()
            .map(|s| {
                let emp: Vec<f64> = (0..n_w)
                    .map(|w| s.iter().map(|&z| loss[w][z]).sum::<f64>() / cfg.m as f64)
                    .collect();
                match cfg.learner {
                    EntangledLearner::Erm => {
                        let best = (0..n_w).fold(0, |b, w| if emp[w] < emp[b] { w } else { b });
                        (0..n_w).map(|w| if w == best { 1.0 } else { 0.0 }).collect()
                    }
                    _ => {
                        let lo = emp.iter().cloned().fold(f64::INFINITY, f64::min);
                        let g: Vec<f64> = emp
                            .iter()
                            .map(|e| (-(cfg.m as f64) * (e - lo) / cfg.temperature).exp())
                            .collect();
                        let total: f64 = g.iter().sum();
                        g.into_iter().map(|v| v / total).collect()
                    }
                }
            })
            .collect(),
    };
    Ok(EntangledModel {
        m: cfg.m,
        pz,
        loss,
        cond,
    })
}

impl EntangledModel {
    fn n_z(&self) -> usize {
        self.pz.len()
    }

    fn n_w(&self) -> usize {
        self.loss.len()
    }

    fn triple(&self) -> Result<Triple> {
        let m = self.m;
        let n_z = self.n_z();
        let n_w = self.n_w();
        let mut states = Vec::with_capacity(m);
        for i in 0..m {
            let shape = SubsystemShape::new([(format!("test_{i}"), n_z), (format!("train_{i}"), n_z)])?;
            let mut ket = vec![real_to_complex(0.0); n_z * n_z];
            for z in 0..n_z {
                ket[z * n_z + z] = real_to_complex(self.pz[z].sqrt());
            }
            states.push(vec![DensityOperator::from_ket(&ket, shape)?]);
        }
        let sites = SiteStructure {
            test: (0..m).map(|i| vec![format!("test_{i}")]).collect(),
            train: (0..m).map(|i| vec![format!("train_{i}")]).collect(),
            probs: vec![vec![1.0]; m],
            states,
        };
        let ens = CQEnsemble::from_sites(sites)?;
        let train = ens.train_shape()?;
        let hyp = SubsystemShape::single("h", n_w)?;
        let n_s = train.total_dim();
        let mut kraus = Vec::new();
        for (s, row) in self.cond.iter().enumerate() {
            for (w, &p) in row.iter().enumerate() {
                if p > 0.0 {
                    let mut k = CMatrix::zeros(n_w, n_s);
                    k[(w, s)] = real_to_complex(p.sqrt());
                    kraus.push(k);
                }
            }
        }
        let channel = Channel::new(kraus, train.clone(), hyp.clone())?;
        let lr = Learner::new(
            PovmTable::Shared(Povm::trivial(train, 0)),
            ChannelTable::Shared(channel),
            hyp,
            1,
        )?;
        let table = self.loss.clone();
        let local = LocalLoss {
            test: (0..m).map(|i| vec![format!("test_{i}")]).collect(),
            hyp: vec![vec!["h".to_string()]; m],
            term: Arc::new(move |_, _, _| {
                let mut diag = Vec::with_capacity(n_z * n_w);
                for z in 0..n_z {
                    for row in &table {
                        diag.push(row[z]);
                    }
                }
                HermitianObservable::diagonal(&diag, SubsystemShape::new([("z", n_z), ("w", n_w)])?)
            }),
            alphabet: vec![1; m],
            n_hyp: 1,
        };
        let out = ens.test_shape()?.concat(lr.hyp_shape())?;
        let loss = LossFamily::from_local(out, local)?;
        Ok(Triple { ens, lr, loss })
    }
}

pub fn build_entangled_pac(cfg: &EntangledConfig) -> Result<Triple> {
    model(cfg)?.triple()
}

pub(crate) fn instance(cfg: &EntangledConfig, _seed: u64) -> Result<Instance> {
    let triple = build_entangled_pac(cfg)?;
    let mut notes = BTreeMap::new();
    notes.insert("m".into(), cfg.m as f64);
    Ok(Instance {
        source: Source::Generic(triple),
        m: cfg.m,
        trivial_hyp: false,
        // The hypothesis register carries the spread over w, so the bounded-loss
        // constant 1/(2 sqrt m) does not dominate; the fitted value is used.
        declared_alpha: None,
        declared_beta: None,
        notes,
        rate_note: Some(("declaredRhs", 1.0)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{certify_cor22, evaluate, EvalOptions, ENUM_CAP};

    /// Risks and I(S;W) recomputed from the classical tables alone.
    fn classical(md: &EntangledModel) -> (f64, f64, f64) {
        let n_w = md.n_w();
        let records = records_of(&vec![md.n_z(); md.m]);
        let ps: Vec<f64> = records.iter().map(|s| s.iter().map(|&z| md.pz[z]).product()).collect();
        let mut pw = vec![0.0; n_w];
        let mut emp = 0.0;
        for (k, s) in records.iter().enumerate() {
            for w in 0..n_w {
                let q = ps[k] * md.cond[k][w];
                pw[w] += q;
                emp += q * s.iter().map(|&z| md.loss[w][z]).sum::<f64>() / md.m as f64;
            }
        }
        let true_risk: f64 = (0..n_w)
            .map(|w| pw[w] * (0..md.n_z()).map(|z| md.pz[z] * md.loss[w][z]).sum::<f64>())
            .sum();
        let mut mi = 0.0;
        for k in 0..records.len() {
            for w in 0..n_w {
                let q = ps[k] * md.cond[k][w];
                if q > 0.0 {
                    mi += q * (md.cond[k][w] / pw[w]).ln();
                }
            }
        }
        (emp, true_risk, mi)
    }

    #[test]
    fn quantum_pipeline_matches_classical_tables() {
        for (n, m, learner) in [
            (0, 1, EntangledLearner::Erm),
            (0, 3, EntangledLearner::Gibbs),
            (1, 1, EntangledLearner::Gibbs),
            (1, 2, EntangledLearner::Erm),
        ] {
            let cfg = EntangledConfig {
                n,
                m,
                learner,
                noise: 0.2,
                ..Default::default()
            };
            let md = model(&cfg).unwrap();
            let t = md.triple().unwrap();
            let e = evaluate(&t.ens, &t.lr, &t.loss, EvalOptions { enum_cap: ENUM_CAP, relent: true }).unwrap();
            let (emp, tr, mi) = classical(&md);
            assert!((e.risks.empirical - emp).abs() < 1e-10, "{n} {m}");
            assert!((e.risks.true_risk - tr).abs() < 1e-10);
            assert!((e.qmi - mi).abs() < 1e-10, "qmi {} vs {mi}", e.qmi);
            assert!(e.holevo.abs() < 1e-12 && e.mi.abs() < 1e-12);
            let c = certify_cor22(&e, None, None).unwrap();
            let a = c.alpha.unwrap();
            assert!((c.rhs - (2.0 * a * a * mi).sqrt()).abs() < 1e-10);
            assert!(c.holds);
        }
    }

    #[test]
    fn default_target_is_first_bit() {
        let md = model(&EntangledConfig {
            noise: 0.0,
            ..Default::default()
        })
        .unwrap();
        // x = 0 -> y = 0, x = 1 -> y = 1.
        assert_eq!(md.pz, vec![0.5, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn table_rows_are_checked() {
        let cfg = EntangledConfig {
            n: 0,
            m: 1,
            learner: EntangledLearner::Table,
            table: Some(vec![vec![1.0, 0.0]]),
            ..Default::default()
        };
        assert!(validate(&cfg, ENUM_CAP).is_err());
        let cfg = EntangledConfig {
            table: Some(vec![vec![1.0, 0.0], vec![0.5, 0.5]]),
            ..cfg
        };
        assert!(validate(&cfg, ENUM_CAP).is_ok());
    }
}
