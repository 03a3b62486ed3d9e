//! CQ ensembles, POVMs, channels and the measure-then-process learner model.

use std::borrow::Cow;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::qmat::{
    apply_local_kraus, embed_matrix, kron, partial_trace_matrix, permute_matrix, trace_re,
    CMatrix, DensityOperator, EffectOperator, HermitianObservable, Operator, SubsystemShape,
};

/// Outcomes at or below this probability have no post-measurement state.
pub const P_FLOOR: f64 = 1e-12;
pub const TOL_POVM: f64 = 1e-9;
/// Largest tolerated probability mass dropped from enumerations.
pub const MASS_TOL: f64 = 1e-9;

/// Classical data record s = (z_1, ..., z_n).
pub type Record = Vec<usize>;

#[derive(Debug, Clone)]
pub struct CQEntry {
    pub record: Record,
    pub prob: f64,
    pub state: DensityOperator,
}

/// Per-site product structure of an ensemble: rho(s) = (x)_i rho_i(z_i).
#[derive(Debug, Clone)]
pub struct SiteStructure {
    pub test: Vec<Vec<String>>,
    pub train: Vec<Vec<String>>,
    pub probs: Vec<Vec<f64>>,
    pub states: Vec<Vec<DensityOperator>>,
}

impl SiteStructure {
    pub fn n_sites(&self) -> usize {
        self.test.len()
    }

    /// Test marginal of the site-`i` state for symbol `z`.
    pub fn test_state(&self, i: usize, z: usize) -> Result<DensityOperator> {
        self.states[i][z].marginal(&self.test[i])
    }
}

#[derive(Debug, Clone)]
pub struct CQEnsemble {
    entries: Vec<CQEntry>,
    shape: SubsystemShape,
    test_labels: Vec<String>,
    train_labels: Vec<String>,
    sites: Option<SiteStructure>,
}

impl CQEnsemble {
    pub fn new(
        entries: Vec<CQEntry>,
        test_labels: Vec<String>,
        train_labels: Vec<String>,
    ) -> Result<Self> {
        let Some(first) = entries.first() else {
            return Err(Error::InvalidProbability("ensemble has no entries".into()));
        };
        let shape = first.state.shape().clone();
        let mut total = 0.0;
        for e in &entries {
            if !(e.prob >= 0.0) || !e.prob.is_finite() {
                return Err(Error::InvalidProbability(format!("probability {}", e.prob)));
            }
            if e.state.shape() != &shape {
                return Err(Error::ShapeMismatch("ensemble states have different shapes".into()));
            }
            total += e.prob;
        }
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidProbability(format!("probabilities sum to {total}")));
        }
        let mut all: Vec<&String> = test_labels.iter().chain(train_labels.iter()).collect();
        all.sort();
        let mut expected: Vec<&String> = shape.labels().iter().collect();
        expected.sort();
        if all != expected {
            return Err(Error::ShapeMismatch(
                "test and train labels must partition the state shape".into(),
            ));
        }
        Ok(Self {
            entries,
            shape,
            test_labels,
            train_labels,
            sites: None,
        })
    }

    /// Product ensemble over all records in Z^m from per-site data.
    pub fn from_sites(sites: SiteStructure) -> Result<Self> {
        let m = sites.n_sites();
        if m == 0 || sites.train.len() != m || sites.probs.len() != m || sites.states.len() != m {
            return Err(Error::ShapeMismatch("inconsistent site structure".into()));
        }
        let alphabet: Vec<usize> = sites.probs.iter().map(Vec::len).collect();
        for i in 0..m {
            if sites.states[i].len() != alphabet[i] {
                return Err(Error::ShapeMismatch(format!("site {i} has mismatched tables")));
            }
            let total: f64 = sites.probs[i].iter().sum();
            if (total - 1.0).abs() > 1e-10 || sites.probs[i].iter().any(|p| *p < 0.0) {
                return Err(Error::InvalidProbability(format!("site {i} probabilities")));
            }
        }
        let mut test_labels = Vec::new();
        let mut train_labels = Vec::new();
        for i in 0..m {
            test_labels.extend(sites.test[i].iter().cloned());
            train_labels.extend(sites.train[i].iter().cloned());
        }
        let mut entries = Vec::new();
        for record in records_of(&alphabet) {
            let mut prob = 1.0;
            let mut state: Option<DensityOperator> = None;
            for (i, &z) in record.iter().enumerate() {
                prob *= sites.probs[i][z];
                let local = sites.states[i][z].permuted(
                    &sites.test[i]
                        .iter()
                        .chain(sites.train[i].iter())
                        .map(String::as_str)
                        .collect::<Vec<_>>(),
                )?;
                state = Some(match state {
                    None => local,
                    Some(acc) => crate::qmat::tensor_product(&acc, &local)?,
                });
            }
            let state = state.expect("m >= 1");
            entries.push(CQEntry { record, prob, state });
        }
        let mut ens = Self::new(entries, test_labels, train_labels)?;
        ens.sites = Some(sites);
        Ok(ens)
    }

    /// Attaches a site structure after checking it reproduces every entry.
    pub fn with_sites(mut self, sites: SiteStructure) -> Result<Self> {
        let rebuilt = Self::from_sites(sites.clone())?;
        for e in &self.entries {
            let Some(r) = rebuilt.entries.iter().find(|r| r.record == e.record) else {
                return Err(Error::NotFactorized(format!("record {:?} not in product", e.record)));
            };
            if (r.prob - e.prob).abs() > 1e-10 {
                return Err(Error::NotFactorized(format!("record {:?} probability", e.record)));
            }
            let order: Vec<&str> = e.state.shape().labels().iter().map(String::as_str).collect();
            let rs = r.state.permuted(&order)?;
            let dev = (rs.matrix() - e.state.matrix()).camax();
            if dev > 1e-10 {
                return Err(Error::NotFactorized(format!(
                    "record {:?} state deviates by {dev:.3e}",
                    e.record
                )));
            }
        }
        self.sites = Some(sites);
        Ok(self)
    }

    pub fn entries(&self) -> &[CQEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn shape(&self) -> &SubsystemShape {
        &self.shape
    }

    pub fn test_labels(&self) -> &[String] {
        &self.test_labels
    }

    pub fn train_labels(&self) -> &[String] {
        &self.train_labels
    }

    pub fn test_shape(&self) -> Result<SubsystemShape> {
        self.shape.restrict(&self.test_labels)
    }

    pub fn train_shape(&self) -> Result<SubsystemShape> {
        self.shape.restrict(&self.train_labels)
    }

    pub fn sites(&self) -> Option<&SiteStructure> {
        self.sites.as_ref()
    }

    pub fn test_state(&self, idx: usize) -> Result<DensityOperator> {
        self.entries[idx].state.marginal(&self.test_labels)
    }

    pub fn train_state(&self, idx: usize) -> Result<DensityOperator> {
        self.entries[idx].state.marginal(&self.train_labels)
    }
}

/// All records of a mixed-radix alphabet in lexicographic order.
pub fn records_of(alphabet: &[usize]) -> Vec<Record> {
    let total: usize = alphabet.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut digits = vec![0usize; alphabet.len()];
    for _ in 0..total {
        out.push(digits.clone());
        for k in (0..digits.len()).rev() {
            digits[k] += 1;
            if digits[k] < alphabet[k] {
                break;
            }
            digits[k] = 0;
        }
    }
    out
}

/// Finite POVM with hypothesis-indexed outcomes.
#[derive(Debug, Clone)]
pub struct Povm {
    outcomes: Vec<(usize, EffectOperator)>,
    shape: SubsystemShape,
}

impl Povm {
    /// Merges repeated outcome indices and checks completeness.
    pub fn new(outcomes: Vec<(usize, EffectOperator)>) -> Result<Self> {
        let Some((_, first)) = outcomes.first() else {
            return Err(Error::PovmIncomplete { deviation: 1.0 });
        };
        let shape = first.shape().clone();
        let d = shape.total_dim();
        let mut merged: Vec<(usize, CMatrix)> = Vec::new();
        let mut sum = CMatrix::zeros(d, d);
        for (w, e) in &outcomes {
            if e.shape() != &shape {
                return Err(Error::ShapeMismatch("POVM effects on different shapes".into()));
            }
            sum += e.matrix();
            match merged.iter_mut().find(|(v, _)| v == w) {
                Some((_, m)) => *m += e.matrix(),
                None => merged.push((*w, e.matrix().clone())),
            }
        }
        let deviation = (sum - CMatrix::identity(d, d)).camax();
        if deviation > TOL_POVM {
            return Err(Error::PovmIncomplete { deviation });
        }
        merged.sort_by_key(|(w, _)| *w);
        let outcomes = merged
            .into_iter()
            .map(|(w, m)| Ok((w, EffectOperator::new(m, shape.clone())?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { outcomes, shape })
    }

    /// Single outcome `w` with effect I.
    pub fn trivial(shape: SubsystemShape, w: usize) -> Self {
        Self {
            outcomes: vec![(w, EffectOperator::identity(shape.clone()))],
            shape,
        }
    }

    /// Projective measurement in the computational basis, outcome b -> w = b.
    pub fn computational(shape: SubsystemShape) -> Self {
        let d = shape.total_dim();
        let outcomes = (0..d)
            .map(|b| {
                let mut m = CMatrix::zeros(d, d);
                m[(b, b)] = crate::qmat::real_to_complex(1.0);
                (b, EffectOperator::new(m, shape.clone()).expect("projector"))
            })
            .collect();
        Self { outcomes, shape }
    }

    pub fn outcomes(&self) -> &[(usize, EffectOperator)] {
        &self.outcomes
    }

    pub fn shape(&self) -> &SubsystemShape {
        &self.shape
    }

    /// Effect of outcome `w`; `None` means the zero effect.
    pub fn effect(&self, w: usize) -> Option<&EffectOperator> {
        self.outcomes.iter().find(|(v, _)| *v == w).map(|(_, e)| e)
    }
}

/// Kraus representation of a CPTP map.
#[derive(Clone)]
pub struct Channel {
    kraus: Vec<CMatrix>,
    in_shape: SubsystemShape,
    out_shape: SubsystemShape,
    full_trace: bool,
}

impl fmt::Debug for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Channel")
            .field("kraus", &self.kraus.len())
            .field("in", &self.in_shape.labels())
            .field("out", &self.out_shape.labels())
            .finish()
    }
}

impl Channel {
    pub fn new(kraus: Vec<CMatrix>, in_shape: SubsystemShape, out_shape: SubsystemShape) -> Result<Self> {
        let din = in_shape.total_dim();
        let dout = out_shape.total_dim();
        let mut sum = CMatrix::zeros(din, din);
        for k in &kraus {
            if k.nrows() != dout || k.ncols() != din {
                return Err(Error::ShapeMismatch(format!(
                    "Kraus operator is {}x{}, expected {dout}x{din}",
                    k.nrows(),
                    k.ncols()
                )));
            }
            sum += k.adjoint() * k;
        }
        let deviation = (sum - CMatrix::identity(din, din)).camax();
        if deviation > TOL_POVM {
            return Err(Error::NotTracePreserving { deviation });
        }
        Ok(Self {
            kraus,
            in_shape,
            out_shape,
            full_trace: false,
        })
    }

    pub fn identity(shape: SubsystemShape) -> Self {
        let d = shape.total_dim();
        Self {
            kraus: vec![CMatrix::identity(d, d)],
            in_shape: shape.clone(),
            out_shape: shape,
            full_trace: false,
        }
    }

    /// Discards the input entirely (output space is one-dimensional).
    pub fn trace_out(in_shape: SubsystemShape) -> Self {
        let d = in_shape.total_dim();
        let kraus = (0..d)
            .map(|i| {
                let mut k = CMatrix::zeros(1, d);
                k[(0, i)] = crate::qmat::real_to_complex(1.0);
                k
            })
            .collect();
        Self {
            kraus,
            in_shape,
            out_shape: SubsystemShape::trivial(),
            full_trace: true,
        }
    }

    /// Replaces the input by I/d using the d^2 Weyl-type Kraus operators.
    pub fn fully_depolarizing(shape: SubsystemShape) -> Self {
        let d = shape.total_dim();
        let scale = 1.0 / (d as f64).sqrt();
        let mut kraus = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let mut k = CMatrix::zeros(d, d);
                k[(i, j)] = crate::qmat::real_to_complex(scale);
                kraus.push(k);
            }
        }
        Self {
            kraus,
            in_shape: shape.clone(),
            out_shape: shape,
            full_trace: false,
        }
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn in_shape(&self) -> &SubsystemShape {
        &self.in_shape
    }

    pub fn out_shape(&self) -> &SubsystemShape {
        &self.out_shape
    }

    /// Kronecker product of two channels on disjoint factors.
    pub fn tensor(&self, other: &Channel) -> Result<Channel> {
        let mut kraus = Vec::with_capacity(self.kraus.len() * other.kraus.len());
        for a in &self.kraus {
            for b in &other.kraus {
                kraus.push(kron(a, b));
            }
        }
        Ok(Channel {
            kraus,
            in_shape: self.in_shape.concat(&other.in_shape)?,
            out_shape: self.out_shape.concat(&other.out_shape)?,
            full_trace: self.full_trace && other.full_trace,
        })
    }

    /// Superoperator sum_k K (x) conj(K) with input and output factors put in the given orders.
    pub fn superoperator<S: AsRef<str>>(&self, in_order: &[S], out_order: &[S]) -> Result<CMatrix> {
        let (ip, _) = permute_indices(&self.in_shape, in_order)?;
        let (op, _) = permute_indices(&self.out_shape, out_order)?;
        let din = self.in_shape.total_dim();
        let dout = self.out_shape.total_dim();
        let mut sup = CMatrix::zeros(dout * dout, din * din);
        for k in &self.kraus {
            let kp = CMatrix::from_fn(dout, din, |r, c| k[(op[r], ip[c])]);
            sup += kron(&kp, &kp.map(|z| z.conj()));
        }
        Ok(sup)
    }
}

fn permute_indices<S: AsRef<str>>(shape: &SubsystemShape, order: &[S]) -> Result<(Vec<usize>, SubsystemShape)> {
    let d = shape.total_dim();
    let diag = CMatrix::from_fn(d, d, |i, j| {
        if i == j {
            crate::qmat::real_to_complex(i as f64)
        } else {
            crate::qmat::real_to_complex(0.0)
        }
    });
    let (p, s) = permute_matrix(&diag, shape, order)?;
    Ok(((0..d).map(|i| p[(i, i)].re.round() as usize).collect(), s))
}

/// One branch of a measurement.
#[derive(Debug, Clone)]
pub struct Branch {
    pub outcome: usize,
    pub prob: f64,
    /// Lüders post-measurement state; `None` when `prob <= P_FLOOR`.
    pub post: Option<DensityOperator>,
}

/// Measures `povm` on the factors `on` of `state`.
pub fn measure_povm<S: AsRef<str>>(state: &DensityOperator, povm: &Povm, on: &[S]) -> Result<Vec<Branch>> {
    let local = state.shape().reorder(on)?;
    if local.dims() != povm.shape().dims() {
        return Err(Error::ShapeMismatch("POVM does not act on the measured factors".into()));
    }
    povm.outcomes()
        .iter()
        .map(|(w, e)| {
            let sqrt_e = embed_matrix(&e.sqrt(), on, state.shape())?;
            let unnorm = &sqrt_e * state.matrix() * &sqrt_e;
            let prob = trace_re(&unnorm);
            let post = if prob > P_FLOOR {
                Some(DensityOperator::from_unnormalized(unnorm, state.shape().clone())?)
            } else {
                None
            };
            Ok(Branch {
                outcome: *w,
                prob,
                post,
            })
        })
        .collect()
}

/// Applies `ch` to the factors `on`; output factors follow the untouched ones.
pub fn apply_channel<S: AsRef<str>>(state: &DensityOperator, ch: &Channel, on: &[S]) -> Result<DensityOperator> {
    let local = state.shape().reorder(on)?;
    if local.dims() != ch.in_shape.dims() {
        return Err(Error::ShapeMismatch(format!(
            "channel input dims {:?} vs factors {:?}",
            ch.in_shape.dims(),
            local.dims()
        )));
    }
    if ch.full_trace {
        let keep = state.shape().complement(on)?;
        let (m, s) = partial_trace_matrix(state.matrix(), state.shape(), &keep)?;
        return DensityOperator::new(m, s);
    }
    let (m, s) = apply_local_kraus(state.matrix(), state.shape(), on, &ch.kraus, &ch.out_shape)?;
    DensityOperator::new(m, s)
}

/// Heisenberg-picture map sum_k K^dagger O K.
pub fn heisenberg_dual(ch: &Channel, obs: &HermitianObservable) -> Result<HermitianObservable> {
    if obs.shape().dims() != ch.out_shape.dims() {
        return Err(Error::ShapeMismatch("observable does not live on the channel output".into()));
    }
    let din = ch.in_shape.total_dim();
    let mut acc = CMatrix::zeros(din, din);
    for k in &ch.kraus {
        acc += k.adjoint() * obs.matrix() * k;
    }
    HermitianObservable::new(acc, ch.in_shape.clone())
}

pub type PovmRule = Arc<dyn Fn(&Record) -> Result<Povm> + Send + Sync>;
pub type ChannelRule = Arc<dyn Fn(&Record, usize) -> Result<Channel> + Send + Sync>;
pub type LocalEffectRule = Arc<dyn Fn(usize, usize, usize) -> Result<EffectOperator> + Send + Sync>;
pub type LocalChannelRule = Arc<dyn Fn(usize, usize, usize) -> Result<Channel> + Send + Sync>;

#[derive(Clone)]
pub enum PovmTable {
    Shared(Povm),
    /// One POVM per ensemble entry, in entry order.
    PerSample(Vec<Povm>),
    Rule(PovmRule),
}

#[derive(Clone)]
pub enum ChannelTable {
    Shared(Channel),
    PerHypothesis(Vec<Channel>),
    Rule(ChannelRule),
}

/// Declared per-site learner structure: E_s(w) = (x)_i E_i(z_i, w) and likewise for channels.
#[derive(Clone)]
pub struct Factorization {
    pub train: Vec<Vec<String>>,
    pub hyp: Vec<Vec<String>>,
    pub effect: LocalEffectRule,
    pub channel: LocalChannelRule,
}

#[derive(Clone)]
pub struct Learner {
    povm: PovmTable,
    channel: ChannelTable,
    hyp_shape: SubsystemShape,
    n_hyp: usize,
    factorization: Option<Factorization>,
}

impl fmt::Debug for Learner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Learner")
            .field("hyp", &self.hyp_shape.labels())
            .field("n_hyp", &self.n_hyp)
            .field("factorized", &self.factorization.is_some())
            .finish()
    }
}

impl Learner {
    pub fn new(povm: PovmTable, channel: ChannelTable, hyp_shape: SubsystemShape, n_hyp: usize) -> Result<Self> {
        if n_hyp == 0 {
            return Err(Error::InvalidDimension {
                label: "hypotheses".into(),
                dim: 0,
            });
        }
        Ok(Self {
            povm,
            channel,
            hyp_shape,
            n_hyp,
            factorization: None,
        })
    }

    /// Learner whose hypothesis is purely classical (hyp space trivial).
    pub fn classical(povm: PovmTable, train_shape: SubsystemShape, n_hyp: usize) -> Result<Self> {
        Self::new(
            povm,
            ChannelTable::Shared(Channel::trace_out(train_shape)),
            SubsystemShape::trivial(),
            n_hyp,
        )
    }

    /// Attaches a factorization after checking it against every record and hypothesis.
    pub fn with_factorization(mut self, ens: &CQEnsemble, f: Factorization) -> Result<Self> {
        self.factorization = Some(f);
        self.verify_factorization(ens)?;
        Ok(self)
    }

    pub fn factorization(&self) -> Option<&Factorization> {
        self.factorization.as_ref()
    }

    pub fn hyp_shape(&self) -> &SubsystemShape {
        &self.hyp_shape
    }

    pub fn n_hyp(&self) -> usize {
        self.n_hyp
    }

    pub fn has_trivial_hyp(&self) -> bool {
        self.hyp_shape.total_dim() == 1
    }

    pub fn povm_for(&self, idx: usize, record: &Record) -> Result<Cow<'_, Povm>> {
        match &self.povm {
            PovmTable::Shared(p) => Ok(Cow::Borrowed(p)),
            PovmTable::PerSample(v) => v
                .get(idx)
                .map(Cow::Borrowed)
                .ok_or_else(|| Error::ShapeMismatch(format!("no POVM for sample {idx}"))),
            PovmTable::Rule(f) => Ok(Cow::Owned(f(record)?)),
        }
    }

    pub fn channel_for(&self, record: &Record, w: usize) -> Result<Cow<'_, Channel>> {
        match &self.channel {
            ChannelTable::Shared(c) => Ok(Cow::Borrowed(c)),
            ChannelTable::PerHypothesis(v) => v
                .get(w)
                .map(Cow::Borrowed)
                .ok_or_else(|| Error::ShapeMismatch(format!("no channel for hypothesis {w}"))),
            ChannelTable::Rule(f) => Ok(Cow::Owned(f(record, w)?)),
        }
    }

    fn verify_factorization(&self, ens: &CQEnsemble) -> Result<()> {
        let f = self.factorization.as_ref().expect("set by caller");
        let train_order: Vec<&str> = f.train.iter().flatten().map(String::as_str).collect();
        let hyp_order: Vec<&str> = f.hyp.iter().flatten().map(String::as_str).collect();
        for (idx, entry) in ens.entries().iter().enumerate() {
            let s = &entry.record;
            if s.len() != f.train.len() {
                return Err(Error::NotFactorized("record length differs from site count".into()));
            }
            let povm = self.povm_for(idx, s)?;
            for w in 0..self.n_hyp {
                let mut local: Option<EffectOperator> = None;
                let mut local_ch: Option<Channel> = None;
                for (i, &z) in s.iter().enumerate() {
                    let e = (f.effect)(i, z, w)?;
                    let c = (f.channel)(i, z, w)?;
                    local = Some(match local {
                        None => e,
                        Some(acc) => crate::qmat::tensor_product(&acc, &e)?,
                    });
                    local_ch = Some(match local_ch {
                        None => c,
                        Some(acc) => acc.tensor(&c)?,
                    });
                }
                let local = local.expect("m >= 1");
                let global = match povm.effect(w) {
                    Some(e) => e.permuted(&train_order)?,
                    None => EffectOperator::zero(povm.shape().reorder(&train_order)?),
                };
                let dev = (global.matrix() - local.matrix()).camax();
                if dev > 1e-10 {
                    return Err(Error::NotFactorized(format!(
                        "effect ({s:?}, {w}) deviates from the local product by {dev:.3e}"
                    )));
                }
                let ch = self.channel_for(s, w)?;
                let local_ch = local_ch.expect("m >= 1");
                let a = ch.superoperator(&train_order, &hyp_order)?;
                let b = local_ch.superoperator(&train_order, &hyp_order)?;
                let dev = (a - b).camax();
                if dev > 1e-10 {
                    return Err(Error::NotFactorized(format!(
                        "channel ({s:?}, {w}) deviates from the local product by {dev:.3e}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// P^A(s, w) = p(s) tr[E_s(w) rho_train(s)], stored row-major over (entry, w).
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    n_s: usize,
    n_w: usize,
    mass: Vec<f64>,
}

impl JointDistribution {
    pub fn new(n_s: usize, n_w: usize, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != n_s * n_w {
            return Err(Error::ShapeMismatch("joint table size".into()));
        }
        if mass.iter().any(|m| !(*m >= -1e-15) || !m.is_finite()) {
            return Err(Error::InvalidProbability("negative joint mass".into()));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::MassDeficit {
                deficit: (1.0 - total).abs(),
            });
        }
        Ok(Self {
            n_s,
            n_w,
            mass: mass.into_iter().map(|m| m.max(0.0)).collect(),
        })
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn n_w(&self) -> usize {
        self.n_w
    }

    pub fn get(&self, s: usize, w: usize) -> f64 {
        self.mass[s * self.n_w + w]
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn marginal_s(&self) -> Vec<f64> {
        (0..self.n_s)
            .map(|s| (0..self.n_w).map(|w| self.get(s, w)).sum())
            .collect()
    }

    pub fn marginal_w(&self) -> Vec<f64> {
        (0..self.n_w)
            .map(|w| (0..self.n_s).map(|s| self.get(s, w)).sum())
            .collect()
    }

    /// P(w | s); zero row when p(s) = 0.
    pub fn conditional(&self, s: usize) -> Vec<f64> {
        let ps: f64 = (0..self.n_w).map(|w| self.get(s, w)).sum();
        (0..self.n_w)
            .map(|w| if ps > 0.0 { self.get(s, w) / ps } else { 0.0 })
            .collect()
    }
}

/// Outcome probabilities tr[E_s(w) rho_train(s)] for one entry.
pub fn outcome_probs(ens: &CQEnsemble, lr: &Learner, idx: usize) -> Result<Vec<f64>> {
    let entry = &ens.entries()[idx];
    let povm = lr.povm_for(idx, &entry.record)?;
    let train = ens.train_state(idx)?;
    let train = train.permuted(&povm_order(ens, &povm)?)?;
    let mut out = vec![0.0; lr.n_hyp()];
    for (w, e) in povm.outcomes() {
        if *w >= lr.n_hyp() {
            return Err(Error::ShapeMismatch(format!("outcome {w} beyond hypothesis count")));
        }
        out[*w] = crate::qmat::trace_product_re(e.matrix(), train.matrix());
    }
    Ok(out)
}

/// Train labels in the order the POVM's effects use.
fn povm_order(ens: &CQEnsemble, povm: &Povm) -> Result<Vec<String>> {
    let labels = povm.shape().labels();
    if labels.iter().all(|l| ens.train_labels().contains(l)) && labels.len() == ens.train_labels().len() {
        Ok(labels.to_vec())
    } else if povm.shape().dims() == ens.train_shape()?.dims() {
        Ok(ens.train_shape()?.labels().to_vec())
    } else {
        Err(Error::ShapeMismatch("POVM does not act on the train factors".into()))
    }
}

pub fn learner_joint(ens: &CQEnsemble, lr: &Learner) -> Result<JointDistribution> {
    let mut mass = Vec::with_capacity(ens.len() * lr.n_hyp());
    for (idx, entry) in ens.entries().iter().enumerate() {
        let q = outcome_probs(ens, lr, idx)?;
        let total: f64 = q.iter().sum();
        if (total - 1.0).abs() > TOL_POVM {
            return Err(Error::PovmIncomplete {
                deviation: (total - 1.0).abs(),
            });
        }
        mass.extend(q.iter().map(|x| x.max(0.0) * entry.prob));
    }
    JointDistribution::new(ens.len(), lr.n_hyp(), mass)
}

/// Unnormalized post-measurement state sqrt(E) rho sqrt(E) on test (x) train and its trace.
pub fn post_measurement(ens: &CQEnsemble, lr: &Learner, idx: usize, w: usize) -> Result<(CMatrix, f64)> {
    let entry = &ens.entries()[idx];
    let povm = lr.povm_for(idx, &entry.record)?;
    let order = povm_order(ens, &povm)?;
    let d = ens.shape().total_dim();
    let Some(e) = povm.effect(w) else {
        return Ok((CMatrix::zeros(d, d), 0.0));
    };
    let sqrt_e = embed_matrix(&e.sqrt(), &order, ens.shape())?;
    let unnorm = &sqrt_e * entry.state.matrix() * &sqrt_e;
    let prob = trace_re(&unnorm);
    Ok((unnorm, prob))
}

/// sigma^A(s, w) on test (x) hyp, for an outcome with probability above `P_FLOOR`.
pub fn learner_output_state(ens: &CQEnsemble, lr: &Learner, idx: usize, w: usize) -> Result<DensityOperator> {
    let (unnorm, prob) = post_measurement(ens, lr, idx, w)?;
    if prob <= P_FLOOR {
        return Err(Error::ZeroProbabilityOutcome {
            sample: idx,
            hypothesis: w,
            prob,
        });
    }
    let post = DensityOperator::from_unnormalized(unnorm, ens.shape().clone())?;
    let ch = lr.channel_for(&ens.entries()[idx].record, w)?;
    let out = apply_channel(&post, &ch, ens.train_labels())?;
    order_test_hyp(out, ens, lr)
}

fn order_test_hyp(out: DensityOperator, ens: &CQEnsemble, lr: &Learner) -> Result<DensityOperator> {
    let mut order: Vec<String> = ens.test_shape()?.labels().to_vec();
    order.extend(lr.hyp_shape().labels().iter().cloned());
    let out = out.relabeled(ens.test_shape()?.concat(lr.hyp_shape())?)?;
    out.permuted(&order)
}

/// sigma^A_hyp(s, w); for a trivial hypothesis space this is defined even when the outcome has zero probability.
pub fn hyp_state(ens: &CQEnsemble, lr: &Learner, idx: usize, w: usize) -> Result<Option<DensityOperator>> {
    if lr.has_trivial_hyp() {
        return Ok(Some(DensityOperator::maximally_mixed(lr.hyp_shape().clone())));
    }
    let (unnorm, prob) = post_measurement(ens, lr, idx, w)?;
    if prob <= P_FLOOR {
        return Ok(None);
    }
    let (train_m, train_s) = partial_trace_matrix(&unnorm, ens.shape(), ens.train_labels())?;
    let post = DensityOperator::from_unnormalized(train_m, train_s)?;
    let ch = lr.channel_for(&ens.entries()[idx].record, w)?;
    let out = apply_channel(&post, &ch, ens.train_labels())?;
    Ok(Some(out.relabeled(lr.hyp_shape().clone())?))
}

/// tau^A(s, w) = rho_test(s) (x) sigma^A_hyp(s, w).
pub fn decoupled_state(ens: &CQEnsemble, lr: &Learner, idx: usize, w: usize) -> Result<DensityOperator> {
    let Some(hyp) = hyp_state(ens, lr, idx, w)? else {
        return Err(Error::ZeroProbabilityOutcome {
            sample: idx,
            hypothesis: w,
            prob: 0.0,
        });
    };
    let test = ens.test_state(idx)?;
    crate::qmat::tensor_product(&test, &hyp)
}
