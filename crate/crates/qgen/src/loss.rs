//! Loss observables L(s, w) on test (x) hyp.

use std::fmt;
use std::sync::Arc;

use crate::cqdata::Record;
use crate::error::{Error, Result};
use crate::qmat::{operator_norm, HermitianObservable, Operator, SubsystemShape};

pub type GlobalLoss = Arc<dyn Fn(&Record, usize) -> Result<HermitianObservable> + Send + Sync>;
pub type LocalTerm = Arc<dyn Fn(usize, usize, usize) -> Result<HermitianObservable> + Send + Sync>;

/// Local structure L(s, w) = (1/m) sum_i L_i(z_i, w), where L_i acts on test_i (x) hyp_i.
#[derive(Clone)]
pub struct LocalLoss {
    pub test: Vec<Vec<String>>,
    /// Hypothesis factors seen by each term; empty for a trivial hypothesis space.
    pub hyp: Vec<Vec<String>>,
    /// (site, z_i, w) -> L_i(z_i, w) on the labels test[i] ++ hyp[i].
    pub term: LocalTerm,
    /// Number of symbols per site, used to enumerate local norms.
    pub alphabet: Vec<usize>,
    pub n_hyp: usize,
}

impl LocalLoss {
    pub fn n_sites(&self) -> usize {
        self.test.len()
    }

    pub fn site_labels(&self, i: usize) -> Vec<String> {
        self.test[i].iter().chain(self.hyp[i].iter()).cloned().collect()
    }

    /// max over (i, z, w) of the operator norm of L_i(z, w).
    pub fn max_norm(&self) -> Result<f64> {
        let mut best = 0.0f64;
        for i in 0..self.n_sites() {
            for z in 0..self.alphabet[i] {
                for w in 0..self.n_hyp {
                    best = best.max(operator_norm(&(self.term)(i, z, w)?));
                }
            }
        }
        Ok(best)
    }
}

#[derive(Clone)]
pub struct LossFamily {
    shape: SubsystemShape,
    global: GlobalLoss,
    local: Option<LocalLoss>,
}

impl fmt::Debug for LossFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LossFamily")
            .field("shape", &self.shape.labels())
            .field("local", &self.local.is_some())
            .finish()
    }
}

impl LossFamily {
    /// `shape` is test ++ hyp in the order used for learner output states.
    pub fn new(shape: SubsystemShape, global: GlobalLoss) -> Self {
        Self {
            shape,
            global,
            local: None,
        }
    }

    /// Loss assembled as (1/m) sum of embedded local terms.
    pub fn from_local(shape: SubsystemShape, local: LocalLoss) -> Result<Self> {
        let m = local.n_sites();
        if m == 0 || local.hyp.len() != m || local.alphabet.len() != m {
            return Err(Error::ShapeMismatch("local loss needs one entry per site".into()));
        }
        for i in 0..m {
            for l in local.site_labels(i) {
                shape.position(&l)?;
            }
        }
        let term = local.term.clone();
        let sites: Vec<SubsystemShape> = (0..m)
            .map(|i| shape.restrict(&local.site_labels(i)))
            .collect::<Result<_>>()?;
        let full = shape.clone();
        let global: GlobalLoss = Arc::new(move |s: &Record, w| {
            let mut acc = HermitianObservable::zeros(full.clone());
            for (i, site) in sites.iter().enumerate() {
                let z = *s
                    .get(i)
                    .ok_or_else(|| Error::ShapeMismatch(format!("record too short for site {i}")))?;
                let t = term(i, z, w)?;
                if t.shape().dims() != site.dims() {
                    return Err(Error::ShapeMismatch(format!("local term {i} has wrong dimensions")));
                }
                let t = t.relabeled(site.clone())?;
                acc = acc.add(&t.embed(&full)?)?;
            }
            Ok(acc.scale(1.0 / sites.len() as f64))
        });
        Ok(Self {
            shape,
            global,
            local: Some(local),
        })
    }

    /// Classical loss l(s, w) times the identity.
    pub fn classical(shape: SubsystemShape, ell: Arc<dyn Fn(&Record, usize) -> f64 + Send + Sync>) -> Self {
        let sh = shape.clone();
        Self::new(shape, Arc::new(move |s, w| Ok(HermitianObservable::scalar(ell(s, w), sh.clone()))))
    }

    pub fn shape(&self) -> &SubsystemShape {
        &self.shape
    }

    pub fn local(&self) -> Option<&LocalLoss> {
        self.local.as_ref()
    }

    pub fn observable(&self, s: &Record, w: usize) -> Result<HermitianObservable> {
        let l = (self.global)(s, w)?;
        if l.shape().dims() != self.shape.dims() {
            return Err(Error::ShapeMismatch("loss observable has wrong dimensions".into()));
        }
        l.relabeled(self.shape.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn local_assembly_averages_terms() {
        let shape = SubsystemShape::new([("t0", 2), ("t1", 2)]).unwrap();
        let local = LocalLoss {
            test: vec![vec!["t0".into()], vec!["t1".into()]],
            hyp: vec![vec![], vec![]],
            term: Arc::new(|_, z, _| {
                HermitianObservable::diagonal(&[z as f64, 1.0], SubsystemShape::single("x", 2).unwrap())
            }),
            alphabet: vec![2, 2],
            n_hyp: 1,
        };
        let loss = LossFamily::from_local(shape, local).unwrap();
        let l = loss.observable(&vec![0, 1], 0).unwrap();
        let diag: Vec<f64> = (0..4).map(|k| l.matrix()[(k, k)].re).collect();
        // (diag(0,1) (x) I + I (x) diag(1,1)) / 2
        assert_eq!(diag, vec![0.5, 0.5, 1.0, 1.0]);
        assert_eq!(loss.local().unwrap().max_norm().unwrap(), 1.0);
    }

    #[test]
    fn classical_loss_is_scalar() {
        let shape = SubsystemShape::single("t", 3).unwrap();
        let loss = LossFamily::classical(shape, Arc::new(|s, w| (s[0] + w) as f64));
        let l = loss.observable(&vec![2], 1).unwrap();
        assert!((l.matrix() - crate::qmat::CMatrix::identity(3, 3).scale(3.0)).camax() < 1e-15);
    }
}
