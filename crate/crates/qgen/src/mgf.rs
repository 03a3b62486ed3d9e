//! Log-moment-generating functions, sub-gaussian fits and Legendre duals.

use std::fmt;
use std::sync::Arc;

use crate::entropy::log_sum_exp;
use crate::error::{Error, Result};
use crate::qmat::{hermitian_eigen, hermitian_eigenvalues, log_matrix, CMatrix, DensityOperator, HermitianObservable, Operator};

pub const LAMBDA_MAX: f64 = 1e3;
pub const T_MAX: f64 = 1e4;
pub const INVERSE_TOL: f64 = 1e-10;
const GRID_MIN: f64 = 1e-3;
const GRID_MAX: f64 = 1e2;
const GRID_PER_SIDE: usize = 61;
const FINE_FACTOR: usize = 10;

/// Finite real-valued random variable.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLaw {
    values: Vec<f64>,
    probs: Vec<f64>,
    mean: f64,
}

impl DiscreteLaw {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.len() != probs.len() || values.is_empty() {
            return Err(Error::ShapeMismatch("law needs equally many values and weights".into()));
        }
        if probs.iter().any(|p| !(*p >= -1e-12)) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidProbability("negative weight or non-finite value".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidProbability(format!("weights sum to {total}")));
        }
        let probs: Vec<f64> = probs.iter().map(|p| p.max(0.0) / total).collect();
        let mean = values.iter().zip(&probs).map(|(v, p)| v * p).sum();
        Ok(Self { values, probs, mean })
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|p| p.1).collect(), pairs.iter().map(|p| p.0).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.probs)
            .map(|(v, p)| p * (v - self.mean).powi(2))
            .sum()
    }

    /// Largest upward deviation from the mean over the support.
    pub fn upper_range(&self) -> f64 {
        self.support().map(|v| v - self.mean).fold(0.0, f64::max)
    }

    pub fn lower_range(&self) -> f64 {
        self.support().map(|v| self.mean - v).fold(0.0, f64::max)
    }

    fn support(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().zip(&self.probs).filter(|(_, p)| **p > 0.0).map(|(v, _)| *v)
    }

    /// log E exp(lambda (X - E X)).
    pub fn log_mgf(&self, lambda: f64) -> f64 {
        if lambda == 0.0 {
            return 0.0;
        }
        let xs: Vec<f64> = self.values.iter().map(|v| lambda * (v - self.mean)).collect();
        let big = xs.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if big < 1.0 {
            let s: f64 = xs.iter().zip(&self.probs).map(|(x, p)| p * x.exp_m1()).sum();
            s.ln_1p()
        } else {
            let terms: Vec<f64> = xs
                .iter()
                .zip(&self.probs)
                .filter(|(_, p)| **p > 0.0)
                .map(|(x, p)| x + p.ln())
                .collect();
            log_sum_exp(&terms)
        }
    }
}

/// Law of the spectral measurement of `l` in the state `tau`; its log-MGF equals the quantum one.
pub fn spectral_law(tau: &DensityOperator, l: &HermitianObservable) -> Result<DiscreteLaw> {
    if tau.shape().dims() != l.shape().dims() {
        return Err(Error::ShapeMismatch("state and observable on different shapes".into()));
    }
    let (vals, vecs) = hermitian_eigen(l.matrix());
    let rotated = vecs.adjoint() * tau.matrix() * &vecs;
    let probs: Vec<f64> = (0..vals.len()).map(|k| rotated[(k, k)].re.max(0.0)).collect();
    let total: f64 = probs.iter().sum();
    DiscreteLaw::new(vals, probs.iter().map(|p| p / total).collect())
}

/// log tr[tau exp(lambda (L - tr[L tau]))].
pub fn quantum_log_mgf(tau: &DensityOperator, l: &HermitianObservable, lambda: f64) -> Result<f64> {
    Ok(spectral_law(tau, l)?.log_mgf(lambda))
}

/// log tr exp(log tau + lambda (L - tr[L tau])).
pub fn quantum_log_mgf_gt(tau: &DensityOperator, l: &HermitianObservable, lambda: f64) -> Result<f64> {
    if tau.shape().dims() != l.shape().dims() {
        return Err(Error::ShapeMismatch("state and observable on different shapes".into()));
    }
    let log_tau = log_matrix(tau.matrix())?;
    let mean = crate::qmat::trace_product_re(l.matrix(), tau.matrix());
    let d = tau.dim();
    let centered = l.matrix() - CMatrix::identity(d, d).scale(mean);
    let eig = hermitian_eigenvalues(&(log_tau + centered.scale(lambda)));
    Ok(log_sum_exp(&eig))
}

/// Centered classical log-MGF of a list of (probability, value) pairs.
pub fn classical_log_mgf(samples: &[(f64, f64)], lambda: f64) -> Result<f64> {
    Ok(DiscreteLaw::from_pairs(samples)?.log_mgf(lambda))
}

/// Log-MGF of one (sample, hypothesis) pair, kept in a form cheap to evaluate.
#[derive(Debug, Clone, PartialEq)]
pub enum PairMgf {
    Spectrum(DiscreteLaw),
    /// Independent sum: psi(lambda) = sum_f mult_f psi_f(lambda * scale).
    ProductSum {
        factors: Vec<(usize, DiscreteLaw)>,
        scale: f64,
    },
}

impl PairMgf {
    pub fn log_mgf(&self, lambda: f64) -> f64 {
        match self {
            PairMgf::Spectrum(law) => law.log_mgf(lambda),
            PairMgf::ProductSum { factors, scale } => factors
                .iter()
                .map(|(k, law)| *k as f64 * law.log_mgf(lambda * scale))
                .sum(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            PairMgf::Spectrum(law) => law.variance(),
            PairMgf::ProductSum { factors, scale } => {
                factors.iter().map(|(k, law)| *k as f64 * law.variance()).sum::<f64>() * scale * scale
            }
        }
    }

    /// Per-summand deviation bound usable in a Bennett-type bound for the upper tail.
    pub fn upper_range(&self) -> f64 {
        match self {
            PairMgf::Spectrum(law) => law.upper_range(),
            PairMgf::ProductSum { factors, scale } => {
                factors.iter().map(|(_, l)| l.upper_range() * scale.abs()).fold(0.0, f64::max)
            }
        }
    }

    pub fn lower_range(&self) -> f64 {
        match self {
            PairMgf::Spectrum(law) => law.lower_range(),
            PairMgf::ProductSum { factors, scale } => {
                factors.iter().map(|(_, l)| l.lower_range() * scale.abs()).fold(0.0, f64::max)
            }
        }
    }
}

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Symmetric log-spaced grid over `[GRID_MIN, GRID_MAX]` magnitudes with `per_side` points per side, plus 0.
pub fn lambda_grid(per_side: usize) -> Vec<f64> {
    let ratio = (GRID_MAX / GRID_MIN).ln();
    let pos: Vec<f64> = (0..per_side)
        .map(|k| GRID_MIN * (ratio * k as f64 / (per_side - 1) as f64).exp())
        .collect();
    let mut grid: Vec<f64> = pos.iter().rev().map(|x| -x).collect();
    grid.push(0.0);
    grid.extend(pos);
    grid
}

pub fn default_grid() -> Vec<f64> {
    lambda_grid(GRID_PER_SIDE)
}

fn fine_grid() -> Vec<f64> {
    lambda_grid(GRID_PER_SIDE * FINE_FACTOR)
}

/// A log-MGF sampled on the default grid, with an evaluator for off-grid points.
#[derive(Clone)]
pub struct LogMgfProfile {
    grid: Vec<f64>,
    values: Vec<f64>,
    eval: ScalarFn,
}

impl fmt::Debug for LogMgfProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LogMgfProfile")
            .field("points", &self.grid.len())
            .finish()
    }
}

impl LogMgfProfile {
    pub fn from_fn(eval: ScalarFn) -> Self {
        let grid = default_grid();
        let values = grid.iter().map(|&l| eval(l)).collect();
        Self { grid, values, eval }
    }

    pub fn from_law(law: DiscreteLaw) -> Self {
        Self::from_fn(Arc::new(move |l| law.log_mgf(l)))
    }

    pub fn from_pair(pair: PairMgf) -> Self {
        Self::from_fn(Arc::new(move |l| pair.log_mgf(l)))
    }

    /// Pointwise maximum of a family of log-MGFs.
    pub fn envelope(pairs: Arc<Vec<PairMgf>>) -> Self {
        Self::from_fn(Arc::new(move |l| {
            pairs.iter().map(|p| p.log_mgf(l)).fold(0.0, f64::max)
        }))
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        (self.eval)(lambda)
    }

    pub fn evaluator(&self) -> ScalarFn {
        self.eval.clone()
    }

    /// Upper side psi_+(mu) = psi(mu), mu >= 0.
    pub fn upper_side(&self) -> ScalarFn {
        let f = self.eval.clone();
        Arc::new(move |mu| f(mu))
    }

    /// Lower side psi_-(mu) = psi(-mu), mu >= 0.
    pub fn lower_side(&self) -> ScalarFn {
        let f = self.eval.clone();
        Arc::new(move |mu| f(-mu))
    }

    /// Midpoint convexity on consecutive grid triples, up to 1e-8.
    pub fn is_convex(&self) -> bool {
        self.grid.windows(3).zip(self.values.windows(3)).all(|(g, v)| {
            let t = (g[1] - g[0]) / (g[2] - g[0]);
            v[1] <= (1.0 - t) * v[0] + t * v[2] + 1e-8
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    Quantum,
    QuantumGt,
    Classical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubGaussianFit {
    pub alpha: f64,
    pub attained_at: f64,
    pub mode: FitMode,
    /// False if the sampled profile failed the convexity check.
    pub convex: bool,
}

fn ratio(psi: &dyn Fn(f64) -> f64, l: f64) -> f64 {
    2.0 * psi(l) / (l * l)
}

/// Golden-section maximization of a unimodal function on [a, b].
fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

const EXTEND_STEP: f64 = 1.25;
const EXTEND_MAX: f64 = 1e8;

/// Steps from `start` away from zero until the ratio stops increasing; returns (best, ratio, previous point).
fn extend_outward(psi: &dyn Fn(f64) -> f64, start: f64, start_ratio: f64) -> (f64, f64, f64) {
    let (mut best, mut r, mut prev) = (start, start_ratio, start / EXTEND_STEP);
    while best.abs() * EXTEND_STEP <= EXTEND_MAX {
        let next = best * EXTEND_STEP;
        let rn = ratio(psi, next);
        if !(rn > r) {
            break;
        }
        (prev, best, r) = (best, next, rn);
    }
    (best, r, prev)
}

/// Smallest alpha with psi(lambda) <= alpha^2 lambda^2 / 2 on the grid, refined and validated.
pub fn fit_subgaussian(profile: &LogMgfProfile, mode: FitMode) -> SubGaussianFit {
    let psi = profile.evaluator();
    let grid = profile.grid();
    let mut best = (0.0, 0.0);
    let mut best_idx = None;
    for (k, (&l, &v)) in grid.iter().zip(profile.values()).enumerate() {
        if l == 0.0 {
            continue;
        }
        let r = 2.0 * v / (l * l);
        if r > best.1 {
            best = (l, r);
            best_idx = Some(k);
        }
    }
    if let Some(k) = best_idx {
        let mut lo = grid[k.saturating_sub(1)];
        let mut hi = grid[(k + 1).min(grid.len() - 1)];
        if k == 0 || k + 1 == grid.len() {
            // Maximum on the window edge: follow the ratio outward while it still grows.
            let (l, r, prev) = extend_outward(psi.as_ref(), grid[k], best.1);
            best = (l, r);
            (lo, hi) = if l < 0.0 { (l * EXTEND_STEP, prev) } else { (prev, l * EXTEND_STEP) };
        }
        let (lo, hi) = if lo == 0.0 {
            (grid[k] * 0.5, hi)
        } else if hi == 0.0 {
            (lo, grid[k] * 0.5)
        } else {
            (lo, hi)
        };
        let (l, r) = golden_max(|x| ratio(psi.as_ref(), x), lo, hi, 60);
        if r > best.1 {
            best = (l, r);
        }
    }
    for l in fine_grid() {
        if l == 0.0 {
            continue;
        }
        let r = ratio(psi.as_ref(), l);
        if r > best.1 {
            best = (l, r);
        }
    }
    SubGaussianFit {
        alpha: best.1.max(0.0).sqrt(),
        attained_at: best.0,
        mode,
        convex: profile.is_convex(),
    }
}

/// Checks psi(lambda) <= alpha^2 lambda^2 / 2 + 1e-9 on the validation grid.
pub fn certifies(profile: &LogMgfProfile, alpha: f64) -> bool {
    let a2 = alpha * alpha;
    fine_grid()
        .into_iter()
        .all(|l| profile.eval(l) <= a2 * l * l / 2.0 + 1e-9)
}

/// sqrt(sum alpha_i^2) / m.
pub fn compose_local_subgaussian(alphas: &[f64], m: usize) -> f64 {
    alphas.iter().map(|a| a * a).sum::<f64>().sqrt() / m as f64
}

/// Dual value sup over lambda in [lo, hi] of lambda t - psi(lambda), with a flag for boundary attainment.
fn dual_on(psi: &dyn Fn(f64) -> f64, t: f64, lo: f64, hi: f64) -> (f64, bool) {
    let obj = |l: f64| l * t - psi(l);
    let mut pts: Vec<f64> = Vec::new();
    let n = 200;
    let min_mag = 1e-6;
    let ratio = (hi.max(lo.abs()) / min_mag).ln();
    if lo < 0.0 {
        for k in (0..n).rev() {
            let x = -min_mag * (ratio * k as f64 / (n - 1) as f64).exp();
            if x >= lo {
                pts.push(x);
            }
        }
        if pts.first() != Some(&lo) {
            pts.insert(0, lo);
        }
    }
    pts.push(0.0);
    for k in 0..n {
        let x = min_mag * (ratio * k as f64 / (n - 1) as f64).exp();
        if x <= hi {
            pts.push(x);
        }
    }
    if pts.last() != Some(&hi) {
        pts.push(hi);
    }
    let vals: Vec<f64> = pts.iter().map(|&l| obj(l)).collect();
    // ties resolve towards lambda = 0
    let zero = pts.iter().position(|x| *x == 0.0).expect("grid contains 0");
    let mut k = zero;
    for (i, v) in vals.iter().enumerate() {
        if *v > vals[k] || (*v == vals[k] && pts[i].abs() < pts[k].abs()) {
            k = i;
        }
    }
    let v = vals[k];
    let boundary = (k == pts.len() - 1 && hi > 0.0) || (k == 0 && lo < 0.0);
    if boundary {
        return (v, true);
    }
    let a = pts[k.saturating_sub(1)];
    let b = pts[(k + 1).min(pts.len() - 1)];
    let (_, refined) = golden_max(obj, a, b, 80);
    (v.max(refined), false)
}

/// psi*(t) = sup over lambda in [-LAMBDA_MAX, LAMBDA_MAX] of lambda t - psi(lambda).
pub fn legendre_dual(psi: &dyn Fn(f64) -> f64, t: f64) -> Result<f64> {
    let (v, boundary) = dual_on(psi, t, -LAMBDA_MAX, LAMBDA_MAX);
    if boundary {
        return Err(Error::RangeExhausted(format!(
            "dual at t = {t} is attained at |lambda| = {LAMBDA_MAX}"
        )));
    }
    Ok(v)
}

/// inf{t >= 0 : psi*(t) > s} by bisection on [0, T_MAX].
pub fn legendre_dual_inverse(psi: &dyn Fn(f64) -> f64, s: f64) -> Result<f64> {
    inverse_with(psi, -LAMBDA_MAX, s)
}

/// Same as `legendre_dual_inverse` for a one-sided function of mu >= 0.
pub fn one_sided_dual_inverse(psi: &dyn Fn(f64) -> f64, s: f64) -> Result<f64> {
    inverse_with(psi, 0.0, s)
}

/// Probes lambda beyond the search box; any lambda gives the lower bound lambda t - psi(lambda).
fn exceeds_beyond(psi: &dyn Fn(f64) -> f64, t: f64, s: f64) -> bool {
    let mut l = LAMBDA_MAX;
    let mut prev = l * t - psi(l);
    for _ in 0..300 {
        l *= 10.0;
        let v = l * t - psi(l);
        if v > s {
            return true;
        }
        if !v.is_finite() || v <= prev {
            return false;
        }
        prev = v;
    }
    false
}

fn inverse_with(psi: &dyn Fn(f64) -> f64, lo_lambda: f64, s: f64) -> Result<f64> {
    // A boundary-attained value is a lower bound on the dual, so it still decides `> s` when it exceeds s.
    let exceeds = |t: f64| -> Result<bool> {
        let (v, boundary) = dual_on(psi, t, lo_lambda, LAMBDA_MAX);
        if v > s {
            Ok(true)
        } else if !boundary {
            Ok(false)
        } else if t > 0.0 && exceeds_beyond(psi, t, s) {
            Ok(true)
        } else {
            Err(Error::RangeExhausted(format!(
                "dual at t = {t} reached |lambda| = {LAMBDA_MAX} without exceeding {s}"
            )))
        }
    };
    bisect_inverse(exceeds, s)
}

fn bisect_inverse(exceeds: impl Fn(f64) -> Result<bool>, s: f64) -> Result<f64> {
    if exceeds(0.0)? {
        return Ok(0.0);
    }
    if !exceeds(T_MAX)? {
        return Err(Error::RangeExhausted(format!("dual stays below {s} up to t = {T_MAX}")));
    }
    let (mut lo, mut hi) = (0.0, T_MAX);
    while hi - lo > INVERSE_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if exceeds(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// One side of a log-MGF bound, as a function of mu = |lambda| >= 0.
#[derive(Clone)]
pub enum MgfBound {
    Zero,
    Quadratic { alpha: f64 },
    /// (v / c^2)(e^{mu c} - 1 - mu c) for deviations at most c with variance v.
    Bennett { variance: f64, range: f64 },
    Custom(ScalarFn),
}

impl fmt::Debug for MgfBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MgfBound::Zero => write!(f, "Zero"),
            MgfBound::Quadratic { alpha } => write!(f, "Quadratic({alpha})"),
            MgfBound::Bennett { variance, range } => write!(f, "Bennett({variance}, {range})"),
            MgfBound::Custom(_) => write!(f, "Custom"),
        }
    }
}

fn bennett_h(u: f64) -> f64 {
    (1.0 + u) * u.ln_1p() - u
}

impl MgfBound {
    pub fn eval(&self, mu: f64) -> f64 {
        match self {
            MgfBound::Zero => 0.0,
            MgfBound::Quadratic { alpha } => alpha * alpha * mu * mu / 2.0,
            MgfBound::Bennett { variance, range } => {
                if *range <= 1e-300 {
                    variance * mu * mu / 2.0
                } else {
                    let x = mu * range;
                    variance / (range * range) * (x.exp_m1() - x)
                }
            }
            MgfBound::Custom(f) => f(mu),
        }
    }

    /// Piecewise-linear interpolant of `f` on a log grid over [0, LAMBDA_MAX]; dominates convex `f`.
    pub fn tabulated(f: ScalarFn) -> Self {
        let n = 1500;
        let lo: f64 = 1e-6;
        let ratio = (LAMBDA_MAX / lo).ln();
        let mut xs = vec![0.0];
        xs.extend((0..n).map(|k| lo * (ratio * k as f64 / (n - 1) as f64).exp()));
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let table: Arc<(Vec<f64>, Vec<f64>)> = Arc::new((xs, ys));
        MgfBound::Custom(Arc::new(move |mu| {
            let (xs, ys) = &*table;
            if mu <= 0.0 {
                return ys[0];
            }
            let k = xs.partition_point(|x| *x < mu);
            if k >= xs.len() {
                let n = xs.len();
                let slope = (ys[n - 1] - ys[n - 2]) / (xs[n - 1] - xs[n - 2]);
                return ys[n - 1] + slope * (mu - xs[n - 1]);
            }
            if k == 0 {
                return ys[0];
            }
            let t = (mu - xs[k - 1]) / (xs[k] - xs[k - 1]);
            (1.0 - t) * ys[k - 1] + t * ys[k]
        }))
    }

    pub fn dual(&self, t: f64) -> Result<f64> {
        match self {
            MgfBound::Zero => Ok(if t > 0.0 { f64::INFINITY } else { 0.0 }),
            MgfBound::Quadratic { alpha } => {
                if *alpha == 0.0 {
                    MgfBound::Zero.dual(t)
                } else {
                    Ok(t.max(0.0).powi(2) / (2.0 * alpha * alpha))
                }
            }
            MgfBound::Bennett { variance, range } => {
                if *variance <= 0.0 {
                    MgfBound::Zero.dual(t)
                } else if *range <= 1e-300 {
                    MgfBound::Quadratic { alpha: variance.sqrt() }.dual(t)
                } else {
                    let t = t.max(0.0);
                    Ok(variance / (range * range) * bennett_h(range * t / variance))
                }
            }
            MgfBound::Custom(f) => {
                let (v, boundary) = dual_on(f.as_ref(), t, 0.0, LAMBDA_MAX);
                if boundary {
                    Err(Error::RangeExhausted(format!("dual at t = {t} hits mu = {LAMBDA_MAX}")))
                } else {
                    Ok(v)
                }
            }
        }
    }

    /// inf{t >= 0 : psi*(t) > s}.
    pub fn dual_inverse(&self, s: f64) -> Result<f64> {
        let s = s.max(0.0);
        match self {
            MgfBound::Zero => Ok(0.0),
            MgfBound::Quadratic { alpha } => Ok((2.0 * alpha * alpha * s).sqrt()),
            MgfBound::Bennett { .. } => bisect_inverse(|t| Ok(self.dual(t)? > s), s),
            MgfBound::Custom(f) => one_sided_dual_inverse(f.as_ref(), s),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::{real_to_complex, tensor_product, SubsystemShape};
    use crate::random::{random_density, random_hermitian, random_probs, rng_from_seed};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn qubit(l: &str) -> SubsystemShape {
        SubsystemShape::single(l, 2).unwrap()
    }

    fn pauli_z(l: &str) -> HermitianObservable {
        HermitianObservable::diagonal(&[1.0, -1.0], qubit(l)).unwrap()
    }

    #[test]
    fn quantum_mgf_examples() {
        let mut rng = rng_from_seed(1);
        let tau = random_density(&mut rng, qubit("a"), 2);
        let l = random_hermitian(&mut rng, qubit("a"), 1.0);
        assert_eq!(quantum_log_mgf(&tau, &l, 0.0).unwrap(), 0.0);
        let scalar = HermitianObservable::scalar(3.0, qubit("a"));
        for lambda in [-5.0, 0.3, 7.0] {
            assert_abs_diff_eq!(quantum_log_mgf(&tau, &scalar, lambda).unwrap(), 0.0, epsilon = 1e-12);
        }
        let mixed = DensityOperator::maximally_mixed(qubit("a"));
        assert_abs_diff_eq!(quantum_log_mgf(&mixed, &pauli_z("a"), 1.0).unwrap(), 1f64.cosh().ln(), epsilon = 1e-14);
    }

    #[test]
    fn gt_form_examples() {
        let mut rng = rng_from_seed(2);
        let tau = random_density(&mut rng, qubit("a"), 2);
        let l = random_hermitian(&mut rng, qubit("a"), 1.0);
        assert_abs_diff_eq!(quantum_log_mgf_gt(&tau, &l, 0.0).unwrap(), 0.0, epsilon = 1e-12);
        let diag_tau = DensityOperator::diagonal(&[0.2, 0.8], qubit("a")).unwrap();
        let diag_l = HermitianObservable::diagonal(&[0.5, -1.5], qubit("a")).unwrap();
        for lambda in [-2.0, 0.7, 3.0] {
            let a = quantum_log_mgf(&diag_tau, &diag_l, lambda).unwrap();
            let b = quantum_log_mgf_gt(&diag_tau, &diag_l, lambda).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        let pure = DensityOperator::basis(0, qubit("a")).unwrap();
        assert!(matches!(quantum_log_mgf_gt(&pure, &l, 1.0), Err(Error::SingularLog { .. })));
    }

    #[test]
    fn classical_mgf_examples() {
        assert_abs_diff_eq!(classical_log_mgf(&[(0.4, 2.0), (0.6, 2.0)], 3.0).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(classical_log_mgf(&[(0.5, 1.0), (0.5, -1.0)], 1.0).unwrap(), 1f64.cosh().ln(), epsilon = 1e-15);
        let expected = (0.7 * (-0.6f64).exp() + 0.3 * 1.4f64.exp()).ln();
        assert_abs_diff_eq!(classical_log_mgf(&[(0.7, 0.0), (0.3, 1.0)], 2.0).unwrap(), expected, epsilon = 1e-14);
    }

    #[test]
    fn fit_follows_a_maximum_past_the_window() {
        // ratio 2 psi / lambda^2 peaks at lambda = -1000 with value 1, outside the grid
        let bump = |l: f64| l * l / 2.0 * (-(l.abs() / 1000.0).ln().powi(2)).exp();
        let profile = LogMgfProfile::from_fn(Arc::new(move |l: f64| if l < 0.0 { bump(l) } else { 0.0 }));
        let fit = fit_subgaussian(&profile, FitMode::Classical);
        assert_abs_diff_eq!(fit.alpha, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.attained_at, -1000.0, epsilon = 1e-2);
        let right = LogMgfProfile::from_fn(Arc::new(move |l: f64| if l > 0.0 { bump(-l) } else { 0.0 }));
        assert_abs_diff_eq!(fit_subgaussian(&right, FitMode::Classical).alpha, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn fit_examples() {
        for p in [0.01, 0.2, 0.5, 0.9] {
            let law = DiscreteLaw::new(vec![0.0, 1.0], vec![1.0 - p, p]).unwrap();
            let fit = fit_subgaussian(&LogMgfProfile::from_law(law), FitMode::Classical);
            assert!(fit.alpha <= 0.5 + 1e-9, "alpha {} for p {p}", fit.alpha);
            assert!(fit.convex);
        }
        let constant = DiscreteLaw::new(vec![0.3, 0.3], vec![0.5, 0.5]).unwrap();
        assert_eq!(fit_subgaussian(&LogMgfProfile::from_law(constant), FitMode::Classical).alpha, 0.0);
        let mixed = DensityOperator::maximally_mixed(qubit("a"));
        let law = spectral_law(&mixed, &pauli_z("a")).unwrap();
        let profile = LogMgfProfile::from_law(law);
        let fit = fit_subgaussian(&profile, FitMode::Quantum);
        let grid_sup = profile
            .grid()
            .iter()
            .filter(|l| **l != 0.0)
            .map(|l| 2.0 * l.cosh().ln() / (l * l))
            .fold(0.0, f64::max);
        assert!(fit.alpha >= grid_sup.sqrt() - 1e-12);
        assert_abs_diff_eq!(fit.alpha, 1.0, epsilon = 1e-6);
        assert!(certifies(&profile, fit.alpha));
    }

    #[test]
    fn dual_examples() {
        let alpha: f64 = 0.7;
        let quad = move |l: f64| alpha * alpha * l * l / 2.0;
        for t in [0.0, 0.1, 1.3] {
            assert_abs_diff_eq!(legendre_dual(&quad, t).unwrap(), t * t / (2.0 * alpha * alpha), epsilon = 1e-9);
        }
        for s in [0.0, 0.05, 2.0] {
            assert_abs_diff_eq!(legendre_dual_inverse(&quad, s).unwrap(), (2.0 * alpha * alpha * s).sqrt(), epsilon = 1e-7);
            assert_abs_diff_eq!(
                MgfBound::Quadratic { alpha }.dual_inverse(s).unwrap(),
                (2.0 * alpha * alpha * s).sqrt(),
                epsilon = 1e-15
            );
        }
        let zero = |_l: f64| 0.0;
        for s in [0.0, 0.3, 10.0] {
            assert!(legendre_dual_inverse(&zero, s).unwrap() <= INVERSE_TOL);
            assert_eq!(MgfBound::Zero.dual_inverse(s).unwrap(), 0.0);
        }
        assert!(matches!(legendre_dual(&zero, 1.0), Err(Error::RangeExhausted(_))));
        let cosh = |l: f64| l.cosh().ln();
        assert!(legendre_dual_inverse(&cosh, 0.0).unwrap() <= INVERSE_TOL);
    }

    #[test]
    fn custom_and_tabulated_bounds_match_closed_forms() {
        let alpha: f64 = 0.4;
        let f: ScalarFn = Arc::new(move |m| alpha * alpha * m * m / 2.0);
        let custom = MgfBound::Custom(f.clone());
        let tab = MgfBound::tabulated(f);
        for s in [0.01, 0.5, 3.0] {
            let exact = (2.0 * alpha * alpha * s).sqrt();
            assert_abs_diff_eq!(custom.dual_inverse(s).unwrap(), exact, epsilon = 1e-7);
            let t = tab.dual_inverse(s).unwrap();
            // interpolation overestimates psi, so the inverse can only grow
            assert!(t >= exact - 1e-9 && t <= exact * 1.001 + 1e-6);
        }
        let b = MgfBound::Bennett { variance: 0.2, range: 0.6 };
        let fb: ScalarFn = {
            let b = b.clone();
            Arc::new(move |m| b.eval(m))
        };
        for s in [0.01, 0.4] {
            let closed = b.dual_inverse(s).unwrap();
            let numeric = one_sided_dual_inverse(fb.as_ref(), s).unwrap();
            assert_abs_diff_eq!(closed, numeric, epsilon = 1e-7);
        }
    }

    #[test]
    fn bennett_dominates_bounded_laws() {
        let mut rng = rng_from_seed(7);
        for _ in 0..200 {
            let probs = random_probs(&mut rng, 4);
            let values: Vec<f64> = (0..4).map(|_| rand::Rng::random::<f64>(&mut rng) * 3.0 - 1.0).collect();
            let law = DiscreteLaw::new(values, probs).unwrap();
            let up = MgfBound::Bennett { variance: law.variance(), range: law.upper_range() };
            let down = MgfBound::Bennett { variance: law.variance(), range: law.lower_range() };
            for &l in &default_grid() {
                let psi = law.log_mgf(l);
                let b = if l >= 0.0 { up.eval(l) } else { down.eval(-l) };
                assert!(psi <= b * (1.0 + 1e-12) + 1e-12, "psi {psi} > {b} at {l}");
            }
        }
    }

    #[test]
    fn composition_examples() {
        assert_abs_diff_eq!(compose_local_subgaussian(&[0.5; 4], 4), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(compose_local_subgaussian(&[0.3], 1), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn product_law_is_additive() {
        let mut rng = rng_from_seed(9);
        for _ in 0..20 {
            let t0 = random_density(&mut rng, qubit("a"), 2);
            let t1 = random_density(&mut rng, qubit("b"), 2);
            let l0 = random_hermitian(&mut rng, qubit("a"), 1.0);
            let l1 = random_hermitian(&mut rng, qubit("b"), 1.0);
            let tau = tensor_product(&t0, &t1).unwrap();
            let shape = tau.shape().clone();
            let global = l0.embed(&shape).unwrap().add(&l1.embed(&shape).unwrap()).unwrap().scale(0.5);
            let pair = PairMgf::ProductSum {
                factors: vec![(1, spectral_law(&t0, &l0).unwrap()), (1, spectral_law(&t1, &l1).unwrap())],
                scale: 0.5,
            };
            for lambda in [-4.0, -0.2, 0.5, 6.0] {
                let direct = quantum_log_mgf(&tau, &global, lambda).unwrap();
                assert_abs_diff_eq!(direct, pair.log_mgf(lambda), epsilon = 1e-8);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn quantum_mgf_convex_and_flat_at_zero(seed in any::<u64>()) {
            let mut rng = rng_from_seed(seed);
            let tau = random_density(&mut rng, SubsystemShape::single("a", 3).unwrap(), 2);
            let l = random_hermitian(&mut rng, SubsystemShape::single("a", 3).unwrap(), 1.0);
            let law = spectral_law(&tau, &l).unwrap();
            let h = 1e-5;
            let deriv = (law.log_mgf(h) - law.log_mgf(-h)) / (2.0 * h);
            prop_assert!(deriv.abs() < 1e-6);
            prop_assert!(LogMgfProfile::from_law(law).is_convex());
        }

        #[test]
        fn gt_form_never_exceeds_standard(seed in any::<u64>(), lambda in -4.0f64..4.0) {
            let mut rng = rng_from_seed(seed);
            let tau = random_density(&mut rng, SubsystemShape::single("a", 3).unwrap(), 3);
            let l = random_hermitian(&mut rng, SubsystemShape::single("a", 3).unwrap(), 1.0);
            let gt = quantum_log_mgf_gt(&tau, &l, lambda).unwrap();
            let std = quantum_log_mgf(&tau, &l, lambda).unwrap();
            prop_assert!(gt <= std + 1e-8);
        }

        #[test]
        fn fitted_alpha_certifies(seed in any::<u64>()) {
            let mut rng = rng_from_seed(seed);
            let tau = random_density(&mut rng, SubsystemShape::single("a", 4).unwrap(), 2);
            let l = random_hermitian(&mut rng, SubsystemShape::single("a", 4).unwrap(), 2.0);
            let profile = LogMgfProfile::from_law(spectral_law(&tau, &l).unwrap());
            let fit = fit_subgaussian(&profile, FitMode::Quantum);
            prop_assert!(certifies(&profile, fit.alpha));
        }

        #[test]
        fn spectral_law_matches_matrix_exponential(seed in any::<u64>(), lambda in -3.0f64..3.0) {
            let mut rng = rng_from_seed(seed);
            let tau = random_density(&mut rng, qubit("a"), 2);
            let l = random_hermitian(&mut rng, qubit("a"), 1.0);
            let mean = l.expectation(&tau).unwrap();
            let centered = l.matrix() - CMatrix::identity(2, 2).scale(mean);
            let e = crate::qmat::exp_matrix(&centered.scale(lambda));
            let direct = crate::qmat::trace_product_re(tau.matrix(), &e).ln();
            prop_assert!((direct - quantum_log_mgf(&tau, &l, lambda).unwrap()).abs() < 1e-10);
            let _ = real_to_complex(0.0);
        }
    }
}
