//! Seeded random classical-quantum instances with random learners and losses.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Instance, Source, Triple};
use crate::bounds::check_enumeration;
use crate::cqdata::{records_of, CQEntry, CQEnsemble, Channel, ChannelTable, Learner, Povm, PovmTable};
use crate::error::{Error, Result};
use crate::loss::LossFamily;
use crate::qmat::{HermitianObservable, SubsystemShape};
use crate::random::{
    random_channel_kraus, random_density, random_hermitian_in_range, random_povm, random_probs, rng_from_seed,
};

/// Any field left out is drawn from the seed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomConfig {
    pub m: Option<usize>,
    pub alphabet: Option<usize>,
    pub d_test: Option<usize>,
    pub d_train: Option<usize>,
    pub n_hyp: Option<usize>,
    /// Route training data through random channels onto a qubit hypothesis register.
    pub quantum_hyp: Option<bool>,
}

pub(crate) fn validate(cfg: &RandomConfig, cap: u128) -> Result<()> {
    let check = |v: Option<usize>, lo: usize, hi: usize, what: &str| match v {
        Some(x) if x < lo || x > hi => Err(Error::InvalidConfig(format!("{what} must lie in {lo}..={hi}, got {x}"))),
        _ => Ok(()),
    };
    check(cfg.m, 1, 4, "m")?;
    check(cfg.alphabet, 1, 3, "alphabet")?;
    check(cfg.d_test, 2, 4, "d_test")?;
    check(cfg.d_train, 2, 4, "d_train")?;
    check(cfg.n_hyp, 1, 8, "n_hyp")?;
    let n_s = cfg.alphabet.unwrap_or(3).pow(cfg.m.unwrap_or(4) as u32);
    check_enumeration(n_s, cfg.n_hyp.unwrap_or(8), cap)
}

/// Resolved sizes of a random instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomSizes {
    pub m: usize,
    pub alphabet: usize,
    pub d_test: usize,
    pub d_train: usize,
    pub n_hyp: usize,
    pub quantum_hyp: bool,
}

pub fn build_random(cfg: &RandomConfig, seed: u64) -> Result<(Triple, RandomSizes)> {
    let mut rng = rng_from_seed(seed);
    let sizes = RandomSizes {
        m: cfg.m.unwrap_or_else(|| rng.random_range(1..=4)),
        alphabet: cfg.alphabet.unwrap_or_else(|| rng.random_range(1..=3)),
        d_test: cfg.d_test.unwrap_or_else(|| rng.random_range(2..=4)),
        d_train: cfg.d_train.unwrap_or_else(|| rng.random_range(2..=4)),
        n_hyp: cfg.n_hyp.unwrap_or_else(|| rng.random_range(1..=8)),
        quantum_hyp: cfg.quantum_hyp.unwrap_or_else(|| rng.random_bool(0.5)),
    };
    let shape = SubsystemShape::new([("test", sizes.d_test), ("train", sizes.d_train)])?;
    let records = records_of(&vec![sizes.alphabet; sizes.m]);
    let probs = random_probs(&mut rng, records.len());
    let entries = records
        .iter()
        .zip(&probs)
        .map(|(r, &p)| {
            let rank = rng.random_range(1..=shape.total_dim());
            CQEntry {
                record: r.clone(),
                prob: p,
                state: random_density(&mut rng, shape.clone(), rank),
            }
        })
        .collect();
    let ens = CQEnsemble::new(entries, vec!["test".into()], vec!["train".into()])?;
    let train = ens.train_shape()?;
    let povms = (0..records.len())
        .map(|_| {
            let effects = random_povm(&mut rng, train.clone(), sizes.n_hyp);
            Povm::new(effects.into_iter().enumerate().collect())
        })
        .collect::<Result<Vec<_>>>()?;
    let lr = if sizes.quantum_hyp {
        let hyp = SubsystemShape::single("hyp", 2)?;
        let channels = (0..sizes.n_hyp)
            .map(|_| {
                let n_kraus = rng.random_range(1..=3);
                Channel::new(random_channel_kraus(&mut rng, sizes.d_train, 2, n_kraus), train.clone(), hyp.clone())
            })
            .collect::<Result<Vec<_>>>()?;
        Learner::new(PovmTable::PerSample(povms), ChannelTable::PerHypothesis(channels), hyp, sizes.n_hyp)?
    } else {
        Learner::classical(PovmTable::PerSample(povms), train, sizes.n_hyp)?
    };
    let out = ens.test_shape()?.concat(lr.hyp_shape())?;
    let table: Vec<Vec<HermitianObservable>> = (0..records.len())
        .map(|_| {
            (0..sizes.n_hyp)
                .map(|_| random_hermitian_in_range(&mut rng, out.clone(), -1.0, 1.0))
                .collect()
        })
        .collect();
    let index: BTreeMap<Vec<usize>, usize> = records.into_iter().enumerate().map(|(k, r)| (r, k)).collect();
    let loss = LossFamily::new(
        out,
        Arc::new(move |s, w| {
            let k = index
                .get(s)
                .ok_or_else(|| Error::ShapeMismatch(format!("unknown record {s:?}")))?;
            Ok(table[*k][w].clone())
        }),
    );
    Ok((Triple { ens, lr, loss }, sizes))
}

pub(crate) fn instance(cfg: &RandomConfig, seed: u64) -> Result<Instance> {
    let (triple, sizes) = build_random(cfg, seed)?;
    let mut notes = BTreeMap::new();
    notes.insert("m".into(), sizes.m as f64);
    notes.insert("alphabet".into(), sizes.alphabet as f64);
    notes.insert("dTest".into(), sizes.d_test as f64);
    notes.insert("dTrain".into(), sizes.d_train as f64);
    notes.insert("nHyp".into(), sizes.n_hyp as f64);
    Ok(Instance {
        source: Source::Generic(triple),
        m: sizes.m,
        trivial_hyp: !sizes.quantum_hyp,
        declared_alpha: None,
        declared_beta: None,
        notes,
        rate_note: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{certify_cor22, evaluate, EvalOptions, ENUM_CAP};

    #[test]
    fn random_instances_are_valid_and_certified() {
        for seed in 0..6 {
            let (t, sizes) = build_random(&RandomConfig::default(), seed).unwrap();
            assert_eq!(t.ens.len(), sizes.alphabet.pow(sizes.m as u32));
            let e = evaluate(&t.ens, &t.lr, &t.loss, EvalOptions { enum_cap: ENUM_CAP, relent: true }).unwrap();
            assert!(certify_cor22(&e, None, None).unwrap().holds);
        }
    }

    #[test]
    fn sizes_are_range_checked() {
        let cfg = RandomConfig {
            n_hyp: Some(9),
            ..Default::default()
        };
        assert!(validate(&cfg, ENUM_CAP).is_err());
    }

    #[test]
    fn fixed_sizes_are_respected() {
        let cfg = RandomConfig {
            m: Some(2),
            alphabet: Some(3),
            d_test: Some(2),
            d_train: Some(3),
            n_hyp: Some(5),
            quantum_hyp: Some(true),
        };
        let (t, _) = build_random(&cfg, 4).unwrap();
        assert_eq!(t.ens.len(), 9);
        assert_eq!(t.lr.n_hyp(), 5);
        assert_eq!(t.lr.hyp_shape().total_dim(), 2);
    }
}
