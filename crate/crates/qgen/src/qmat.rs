//! Dense operator algebra on labelled tensor-product spaces.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub const TOL_HERM: f64 = 1e-10;
pub const TOL_TRACE: f64 = 1e-10;
pub const TOL_PSD: f64 = 1e-10;
pub const EIG_FLOOR: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Ordered list of named tensor factors.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct SubsystemShape {
    labels: Vec<String>,
    dims: Vec<usize>,
}

impl SubsystemShape {
    pub fn new<S: Into<String>>(factors: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let mut labels = Vec::new();
        let mut dims = Vec::new();
        for (label, dim) in factors {
            let label = label.into();
            if dim == 0 {
                return Err(Error::InvalidDimension { label, dim });
            }
            if labels.contains(&label) {
                return Err(Error::DuplicateLabel(label));
            }
            labels.push(label);
            dims.push(dim);
        }
        Ok(Self { labels, dims })
    }

    pub fn single(label: impl Into<String>, dim: usize) -> Result<Self> {
        Self::new([(label.into(), dim)])
    }

    /// Shape of the one-dimensional space (no factors).
    pub fn trivial() -> Self {
        Self::default()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        Ok(self.dims[self.position(label)?])
    }

    pub fn concat(&self, other: &SubsystemShape) -> Result<Self> {
        Self::new(
            self.labels
                .iter()
                .chain(other.labels.iter())
                .cloned()
                .zip(self.dims.iter().chain(other.dims.iter()).copied()),
        )
    }

    /// Sub-shape of the given labels, kept in this shape's order.
    pub fn restrict<S: AsRef<str>>(&self, keep: &[S]) -> Result<Self> {
        let positions = self.positions(keep)?;
        let mut sorted = positions;
        sorted.sort_unstable();
        Ok(self.from_positions(&sorted))
    }

    /// Sub-shape of the given labels in the order given.
    pub fn reorder<S: AsRef<str>>(&self, order: &[S]) -> Result<Self> {
        let positions = self.positions(order)?;
        Ok(self.from_positions(&positions))
    }

    /// Labels not in `drop`, in this shape's order.
    pub fn complement<S: AsRef<str>>(&self, drop: &[S]) -> Result<Vec<String>> {
        self.positions(drop)?;
        Ok(self
            .labels
            .iter()
            .filter(|l| !drop.iter().any(|d| d.as_ref() == l.as_str()))
            .cloned()
            .collect())
    }

    fn positions<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(labels.len());
        for l in labels {
            let p = self.position(l.as_ref())?;
            if out.contains(&p) {
                return Err(Error::DuplicateLabel(l.as_ref().to_string()));
            }
            out.push(p);
        }
        Ok(out)
    }

    fn from_positions(&self, positions: &[usize]) -> Self {
        Self {
            labels: positions.iter().map(|&p| self.labels[p].clone()).collect(),
            dims: positions.iter().map(|&p| self.dims[p]).collect(),
        }
    }
}

/// Map from flat indices of the reordered space to flat indices of `shape`.
fn permutation_indices(shape: &SubsystemShape, order: &[usize]) -> Vec<usize> {
    let n = shape.len();
    let mut strides = vec![1usize; n];
    for k in (0..n.saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * shape.dims[k + 1];
    }
    let new_dims: Vec<usize> = order.iter().map(|&p| shape.dims[p]).collect();
    let total = shape.total_dim();
    let mut out = Vec::with_capacity(total);
    let mut digits = vec![0usize; n];
    for _ in 0..total {
        out.push(
            digits
                .iter()
                .zip(order)
                .map(|(&d, &p)| d * strides[p])
                .sum(),
        );
        for k in (0..n).rev() {
            digits[k] += 1;
            if digits[k] < new_dims[k] {
                break;
            }
            digits[k] = 0;
        }
    }
    out
}

fn check_square(m: &CMatrix, shape: &SubsystemShape) -> Result<()> {
    let d = shape.total_dim();
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::ShapeMismatch(format!(
            "matrix is {}x{} but shape has dimension {d}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Reorders the tensor factors of `m` (on `shape`) into `order`.
pub fn permute_matrix<S: AsRef<str>>(
    m: &CMatrix,
    shape: &SubsystemShape,
    order: &[S],
) -> Result<(CMatrix, SubsystemShape)> {
    check_square(m, shape)?;
    if order.len() != shape.len() {
        return Err(Error::ShapeMismatch("permutation must list every label".into()));
    }
    let positions = shape.positions(order)?;
    let new_shape = shape.from_positions(&positions);
    if positions.iter().enumerate().all(|(i, &p)| i == p) {
        return Ok((m.clone(), new_shape));
    }
    let idx = permutation_indices(shape, &positions);
    let d = idx.len();
    Ok((CMatrix::from_fn(d, d, |i, j| m[(idx[i], idx[j])]), new_shape))
}

/// Partial trace keeping `keep` (returned in the original factor order).
pub fn partial_trace_matrix<S: AsRef<str>>(
    m: &CMatrix,
    shape: &SubsystemShape,
    keep: &[S],
) -> Result<(CMatrix, SubsystemShape)> {
    check_square(m, shape)?;
    let kept = shape.restrict(keep)?;
    let traced = shape.complement(keep)?;
    let order: Vec<&str> = kept
        .labels
        .iter()
        .chain(traced.iter())
        .map(String::as_str)
        .collect();
    let (p, _) = permute_matrix(m, shape, &order)?;
    let dk = kept.total_dim();
    let dt = shape.total_dim() / dk;
    let out = CMatrix::from_fn(dk, dk, |a, b| {
        let mut acc = ZERO;
        for t in 0..dt {
            acc += p[(a * dt + t, b * dt + t)];
        }
        acc
    });
    Ok((out, kept))
}

/// Lifts `op`, acting on `op_labels` in that order, to all of `shape`.
pub fn embed_matrix<S: AsRef<str>>(
    op: &CMatrix,
    op_labels: &[S],
    shape: &SubsystemShape,
) -> Result<CMatrix> {
    let local = shape.reorder(op_labels)?;
    check_square(op, &local)?;
    let rest = shape.complement(op_labels)?;
    let rest_dim = shape.total_dim() / local.total_dim();
    let full = op.kronecker(&CMatrix::identity(rest_dim, rest_dim));
    let mut order: Vec<String> = local.labels.clone();
    order.extend(rest.iter().cloned());
    let staged = shape.reorder(&order)?;
    let back: Vec<&str> = shape.labels.iter().map(String::as_str).collect();
    Ok(permute_matrix(&full, &staged, &back)?.0)
}

/// Applies a Kraus map on the factors `on`; output factors are placed last.
pub fn apply_local_kraus<S: AsRef<str>>(
    m: &CMatrix,
    shape: &SubsystemShape,
    on: &[S],
    kraus: &[CMatrix],
    out_shape: &SubsystemShape,
) -> Result<(CMatrix, SubsystemShape)> {
    check_square(m, shape)?;
    let local = shape.reorder(on)?;
    let rest = shape.complement(on)?;
    let mut order = rest.clone();
    order.extend(local.labels.iter().cloned());
    let (p, _) = permute_matrix(m, shape, &order)?;
    let rest_shape = shape.restrict(&rest)?;
    let rest_dim = rest_shape.total_dim();
    let din = local.total_dim();
    let dout = out_shape.total_dim();
    let dim_out = rest_dim * dout;
    let mut out = CMatrix::zeros(dim_out, dim_out);
    for k in kraus {
        if k.nrows() != dout || k.ncols() != din {
            return Err(Error::ShapeMismatch(format!(
                "Kraus operator is {}x{}, expected {dout}x{din}",
                k.nrows(),
                k.ncols()
            )));
        }
        let lifted = CMatrix::identity(rest_dim, rest_dim).kronecker(k);
        out += &lifted * &p * lifted.adjoint();
    }
    Ok((out, rest_shape.concat(out_shape)?))
}

fn hermitian_deviation(m: &CMatrix) -> f64 {
    let mut dev = 0.0f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |a, z| a.max(z.norm()))
}

fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

fn check_hermitian(m: &CMatrix) -> Result<()> {
    let dev = hermitian_deviation(m);
    if dev > TOL_HERM * max_abs(m).max(1.0) {
        return Err(Error::NotHermitian { deviation: dev });
    }
    Ok(())
}

/// Eigenvalues (ascending) and matching eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, idx[c])]);
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut v: Vec<f64> = symmetrize(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

/// V diag(values) V^dagger.
pub fn from_spectrum(values: &[f64], vectors: &CMatrix) -> CMatrix {
    let d = DVector::from_iterator(values.len(), values.iter().map(|&x| Complex64::new(x, 0.0)));
    let mut scaled = vectors.clone();
    for (c, mut col) in scaled.column_iter_mut().enumerate() {
        col *= d[c];
    }
    scaled * vectors.adjoint()
}

/// Applies `f` to the spectrum of the Hermitian part of `m`.
pub fn hermitian_fn_matrix(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (values, vectors) = hermitian_eigen(m);
    let mapped: Vec<f64> = values.into_iter().map(f).collect();
    from_spectrum(&mapped, &vectors)
}

pub fn exp_matrix(m: &CMatrix) -> CMatrix {
    hermitian_fn_matrix(m, f64::exp)
}

/// Matrix logarithm; fails if any eigenvalue is at or below `EIG_FLOOR`.
pub fn log_matrix(m: &CMatrix) -> Result<CMatrix> {
    let (values, vectors) = hermitian_eigen(m);
    if let Some(&bad) = values.iter().find(|&&v| v <= EIG_FLOOR) {
        return Err(Error::SingularLog { eigenvalue: bad });
    }
    let logs: Vec<f64> = values.into_iter().map(f64::ln).collect();
    Ok(from_spectrum(&logs, &vectors))
}

pub fn trace_re(m: &CMatrix) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// Re tr[A B] without forming the product.
pub fn trace_product_re(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..n {
            let x = a[(i, k)] * b[(k, i)];
            acc += x.re;
        }
    }
    acc
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn real_to_complex(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

/// Common read access for validated operators.
pub trait Operator: Clone {
    fn matrix(&self) -> &CMatrix;
    fn shape(&self) -> &SubsystemShape;
    #[doc(hidden)]
    fn from_parts_unchecked(matrix: CMatrix, shape: SubsystemShape) -> Self;

    fn dim(&self) -> usize {
        self.shape().total_dim()
    }

    fn trace(&self) -> f64 {
        trace_re(self.matrix())
    }

    fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(self.matrix())
    }

    fn to_observable(&self) -> HermitianObservable {
        HermitianObservable {
            matrix: self.matrix().clone(),
            shape: self.shape().clone(),
        }
    }

    /// Same operator with its factors reordered.
    fn permuted<S: AsRef<str>>(&self, order: &[S]) -> Result<Self> {
        let (m, s) = permute_matrix(self.matrix(), self.shape(), order)?;
        Ok(Self::from_parts_unchecked(m, s))
    }

    /// Same matrix with new factor labels (dimensions must agree).
    fn relabeled(&self, shape: SubsystemShape) -> Result<Self> {
        if shape.dims() != self.shape().dims() {
            return Err(Error::ShapeMismatch("relabel must keep dimensions".into()));
        }
        Ok(Self::from_parts_unchecked(self.matrix().clone(), shape))
    }
}

/// Operators whose class is closed under partial trace.
pub trait TraceClosed: Operator {}

/// Kronecker product with concatenated shapes.
pub fn tensor_product<T: Operator>(a: &T, b: &T) -> Result<T> {
    let shape = a.shape().concat(b.shape())?;
    Ok(T::from_parts_unchecked(kron(a.matrix(), b.matrix()), shape))
}

pub fn tensor_product_all<T: Operator>(ops: &[T]) -> Result<Option<T>> {
    let mut iter = ops.iter();
    let Some(first) = iter.next() else {
        return Ok(None);
    };
    let mut acc = first.clone();
    for op in iter {
        acc = tensor_product(&acc, op)?;
    }
    Ok(Some(acc))
}

pub fn partial_trace<T: TraceClosed, S: AsRef<str>>(op: &T, keep: &[S]) -> Result<T> {
    let (m, s) = partial_trace_matrix(op.matrix(), op.shape(), keep)?;
    Ok(T::from_parts_unchecked(m, s))
}

/// Largest absolute eigenvalue.
pub fn operator_norm<T: Operator>(op: &T) -> f64 {
    op.eigenvalues().iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

/// Sum of absolute eigenvalues.
pub fn trace_norm<T: Operator>(op: &T) -> f64 {
    op.eigenvalues().iter().map(|v| v.abs()).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HermitianObservable {
    matrix: CMatrix,
    shape: SubsystemShape,
}

impl Operator for HermitianObservable {
    fn matrix(&self) -> &CMatrix {
        &self.matrix
    }
    fn shape(&self) -> &SubsystemShape {
        &self.shape
    }
    fn from_parts_unchecked(matrix: CMatrix, shape: SubsystemShape) -> Self {
        Self { matrix, shape }
    }
}

impl TraceClosed for HermitianObservable {}

impl HermitianObservable {
    pub fn new(matrix: CMatrix, shape: SubsystemShape) -> Result<Self> {
        check_square(&matrix, &shape)?;
        check_hermitian(&matrix)?;
        Ok(Self {
            matrix: symmetrize(&matrix),
            shape,
        })
    }

    pub fn identity(shape: SubsystemShape) -> Self {
        Self::scalar(1.0, shape)
    }

    pub fn scalar(c: f64, shape: SubsystemShape) -> Self {
        let d = shape.total_dim();
        Self {
            matrix: CMatrix::identity(d, d).scale(c),
            shape,
        }
    }

    pub fn zeros(shape: SubsystemShape) -> Self {
        Self::scalar(0.0, shape)
    }

    pub fn diagonal(values: &[f64], shape: SubsystemShape) -> Result<Self> {
        let d = shape.total_dim();
        if values.len() != d {
            return Err(Error::ShapeMismatch(format!(
                "{} diagonal entries for dimension {d}",
                values.len()
            )));
        }
        let diag = DVector::from_iterator(d, values.iter().map(|&v| real_to_complex(v)));
        Ok(Self {
            matrix: CMatrix::from_diagonal(&diag),
            shape,
        })
    }

    pub fn eigen(&self) -> (Vec<f64>, CMatrix) {
        hermitian_eigen(&self.matrix)
    }

    /// tr[H rho] for a state on the same shape.
    pub fn expectation(&self, rho: &DensityOperator) -> Result<f64> {
        if rho.shape != self.shape {
            return Err(Error::ShapeMismatch(format!(
                "observable on {:?}, state on {:?}",
                self.shape.labels, rho.shape.labels
            )));
        }
        Ok(trace_product_re(&self.matrix, &rho.matrix))
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            matrix: self.matrix.scale(c),
            shape: self.shape.clone(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch("sum of observables on different shapes".into()));
        }
        Ok(Self {
            matrix: &self.matrix + &other.matrix,
            shape: self.shape.clone(),
        })
    }

    /// Lifts this observable to `shape`, which must contain all of its labels.
    pub fn embed(&self, shape: &SubsystemShape) -> Result<Self> {
        let m = embed_matrix(&self.matrix, self.shape.labels(), shape)?;
        Ok(Self {
            matrix: m,
            shape: shape.clone(),
        })
    }
}

pub fn hermitian_fn(h: &HermitianObservable, f: impl Fn(f64) -> f64) -> HermitianObservable {
    HermitianObservable {
        matrix: hermitian_fn_matrix(&h.matrix, f),
        shape: h.shape.clone(),
    }
}

pub fn exp_observable(h: &HermitianObservable) -> HermitianObservable {
    hermitian_fn(h, f64::exp)
}

pub fn log_observable(h: &HermitianObservable) -> Result<HermitianObservable> {
    Ok(HermitianObservable {
        matrix: log_matrix(&h.matrix)?,
        shape: h.shape.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: CMatrix,
    shape: SubsystemShape,
}

impl Operator for DensityOperator {
    fn matrix(&self) -> &CMatrix {
        &self.matrix
    }
    fn shape(&self) -> &SubsystemShape {
        &self.shape
    }
    fn from_parts_unchecked(matrix: CMatrix, shape: SubsystemShape) -> Self {
        Self { matrix, shape }
    }
}

impl TraceClosed for DensityOperator {}

impl DensityOperator {
    /// Validates and, when tiny negative eigenvalues occur, clips and renormalizes.
    pub fn new(matrix: CMatrix, shape: SubsystemShape) -> Result<Self> {
        check_square(&matrix, &shape)?;
        check_hermitian(&matrix)?;
        let matrix = symmetrize(&matrix);
        let trace = trace_re(&matrix);
        if (trace - 1.0).abs() > TOL_TRACE {
            return Err(Error::NotNormalized { trace });
        }
        let (values, vectors) = hermitian_eigen(&matrix);
        let min = values.first().copied().unwrap_or(0.0);
        if min < -TOL_PSD {
            return Err(Error::NotPositive { min_eigenvalue: min });
        }
        if min < 0.0 {
            let clipped: Vec<f64> = values.iter().map(|&v| v.max(0.0)).collect();
            let total: f64 = clipped.iter().sum();
            let normalized: Vec<f64> = clipped.iter().map(|v| v / total).collect();
            return Ok(Self {
                matrix: from_spectrum(&normalized, &vectors),
                shape,
            });
        }
        Ok(Self { matrix, shape })
    }

    /// Normalizes a positive matrix with trace above `EIG_FLOOR` before validation.
    pub fn from_unnormalized(matrix: CMatrix, shape: SubsystemShape) -> Result<Self> {
        let t = trace_re(&matrix);
        if t <= EIG_FLOOR {
            return Err(Error::NotNormalized { trace: t });
        }
        Self::new(matrix.unscale(t), shape)
    }

    /// |psi><psi| for a nonzero vector (normalized here).
    pub fn from_ket(ket: &[Complex64], shape: SubsystemShape) -> Result<Self> {
        let v = DVector::from_column_slice(ket);
        let n = v.norm();
        if n <= EIG_FLOOR {
            return Err(Error::NotNormalized { trace: n * n });
        }
        let v = v.unscale(n);
        let m = &v * v.adjoint();
        check_square(&m, &shape)?;
        Ok(Self { matrix: m, shape })
    }

    pub fn basis(index: usize, shape: SubsystemShape) -> Result<Self> {
        let d = shape.total_dim();
        if index >= d {
            return Err(Error::ShapeMismatch(format!("basis index {index} >= {d}")));
        }
        let mut m = CMatrix::zeros(d, d);
        m[(index, index)] = ONE;
        Ok(Self { matrix: m, shape })
    }

    pub fn maximally_mixed(shape: SubsystemShape) -> Self {
        let d = shape.total_dim();
        Self {
            matrix: CMatrix::identity(d, d).unscale(d as f64),
            shape,
        }
    }

    /// Diagonal state from probabilities.
    pub fn diagonal(probs: &[f64], shape: SubsystemShape) -> Result<Self> {
        let obs = HermitianObservable::diagonal(probs, shape)?;
        Self::new(obs.matrix, obs.shape)
    }

    /// Convex combination of states on one shape.
    pub fn mixture(items: &[(f64, &DensityOperator)]) -> Result<Self> {
        let Some((_, first)) = items.first() else {
            return Err(Error::InvalidProbability("empty mixture".into()));
        };
        let d = first.dim();
        let mut m = CMatrix::zeros(d, d);
        for (p, rho) in items {
            if rho.shape != first.shape {
                return Err(Error::ShapeMismatch("mixture of states on different shapes".into()));
            }
            m += rho.matrix.scale(*p);
        }
        Self::new(m, first.shape.clone())
    }

    pub fn marginal<S: AsRef<str>>(&self, keep: &[S]) -> Result<Self> {
        partial_trace(self, keep)
    }

    pub fn spectrum(&self) -> Vec<f64> {
        self.eigenvalues()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectOperator {
    matrix: CMatrix,
    shape: SubsystemShape,
}

impl Operator for EffectOperator {
    fn matrix(&self) -> &CMatrix {
        &self.matrix
    }
    fn shape(&self) -> &SubsystemShape {
        &self.shape
    }
    fn from_parts_unchecked(matrix: CMatrix, shape: SubsystemShape) -> Self {
        Self { matrix, shape }
    }
}

impl EffectOperator {
    pub fn new(matrix: CMatrix, shape: SubsystemShape) -> Result<Self> {
        check_square(&matrix, &shape)?;
        check_hermitian(&matrix)?;
        let matrix = symmetrize(&matrix);
        let values = hermitian_eigenvalues(&matrix);
        let min = values.first().copied().unwrap_or(0.0);
        let max = values.last().copied().unwrap_or(0.0);
        if min < -TOL_PSD || max > 1.0 + TOL_PSD {
            return Err(Error::EffectOutOfRange { min, max });
        }
        Ok(Self { matrix, shape })
    }

    pub fn identity(shape: SubsystemShape) -> Self {
        let d = shape.total_dim();
        Self {
            matrix: CMatrix::identity(d, d),
            shape,
        }
    }

    pub fn zero(shape: SubsystemShape) -> Self {
        let d = shape.total_dim();
        Self {
            matrix: CMatrix::zeros(d, d),
            shape,
        }
    }

    /// Projector onto a normalized copy of `ket`.
    pub fn projector(ket: &[Complex64], shape: SubsystemShape) -> Result<Self> {
        let rho = DensityOperator::from_ket(ket, shape)?;
        Ok(Self {
            matrix: rho.matrix,
            shape: rho.shape,
        })
    }

    /// I - E.
    pub fn complement(&self) -> Self {
        let d = self.dim();
        Self {
            matrix: CMatrix::identity(d, d) - &self.matrix,
            shape: self.shape.clone(),
        }
    }

    pub fn probability(&self, rho: &DensityOperator) -> Result<f64> {
        self.to_observable().expectation(rho)
    }

    /// Principal square root.
    pub fn sqrt(&self) -> CMatrix {
        hermitian_fn_matrix(&self.matrix, |v| v.max(0.0).sqrt())
    }
}
