use std::collections::BTreeSet;
use std::fmt;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::matrix::CMatrix;
use super::{QmathError, HERMITIAN_FLAG_TOL};

/// Ordered tensor-product space of named subsystems, kept in lexicographic label order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Space {
    labels: Vec<String>,
    dims: Vec<usize>,
}

impl Space {
    pub fn new<S: AsRef<str>>(labels: &[S], dims: &[usize]) -> Result<Self, QmathError> {
        Ok(Self::canonicalize(labels, dims)?.0)
    }

    pub fn qubits<S: AsRef<str>>(labels: &[S]) -> Result<Self, QmathError> {
        Self::new(labels, &vec![2; labels.len()])
    }

    pub fn empty() -> Self {
        Self { labels: Vec::new(), dims: Vec::new() }
    }

    /// Returns the canonical space and, for every canonical axis, the index of the
    /// corresponding axis in the given order.
    fn canonicalize<S: AsRef<str>>(labels: &[S], dims: &[usize]) -> Result<(Self, Vec<usize>), QmathError> {
        if labels.len() != dims.len() {
            return Err(QmathError::ShapeMismatch { expected: labels.len(), got: dims.len() });
        }
        let mut seen = BTreeSet::new();
        for (l, &d) in labels.iter().zip(dims) {
            let l = l.as_ref();
            if !seen.insert(l) {
                return Err(QmathError::DuplicateLabel(l.to_string()));
            }
            if d == 0 {
                return Err(QmathError::ZeroDimension(l.to_string()));
            }
        }
        let mut order: Vec<usize> = (0..labels.len()).collect();
        order.sort_by(|&a, &b| labels[a].as_ref().cmp(labels[b].as_ref()));
        let space = Self {
            labels: order.iter().map(|&i| labels[i].as_ref().to_string()).collect(),
            dims: order.iter().map(|&i| dims[i]).collect(),
        };
        Ok((space, order))
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

    pub fn position(&self, label: &str) -> Option<usize> {
        self.labels.binary_search_by(|l| l.as_str().cmp(label)).ok()
    }

    pub fn dim_of(&self, label: &str) -> Option<usize> {
        self.position(label).map(|i| self.dims[i])
    }

    pub fn contains(&self, label: &str) -> bool {
        self.position(label).is_some()
    }

    /// Sub-space made of the given labels, which must all be present.
    pub fn subspace<S: AsRef<str>>(&self, keep: &[S]) -> Result<Self, QmathError> {
        let mut dims = Vec::with_capacity(keep.len());
        for l in keep {
            let d = self.dim_of(l.as_ref()).ok_or_else(|| QmathError::UnknownLabel(l.as_ref().to_string()))?;
            dims.push(d);
        }
        Self::new(keep, &dims)
    }

    /// Disjoint union of two spaces.
    pub fn join(&self, other: &Self) -> Result<Self, QmathError> {
        let labels: Vec<&str> = self.labels.iter().chain(&other.labels).map(String::as_str).collect();
        let dims: Vec<usize> = self.dims.iter().chain(&other.dims).copied().collect();
        Self::new(&labels, &dims)
    }

    /// Labels of `self` that are not in `other`.
    pub fn complement(&self, other: &Self) -> Self {
        let (labels, dims) = self
            .labels
            .iter()
            .zip(&self.dims)
            .filter(|(l, _)| !other.contains(l))
            .map(|(l, &d)| (l.clone(), d))
            .unzip();
        Self { labels, dims }
    }

    /// Maps canonical linear indices to linear indices of the same tensor
    /// stored with axes in `order` (a permutation of the labels).
    fn index_map<S: AsRef<str>>(&self, order: &[S]) -> Result<Vec<usize>, QmathError> {
        if order.len() != self.len() {
            return Err(QmathError::LabelSetMismatch(
                self.labels.clone(),
                order.iter().map(|s| s.as_ref().to_string()).collect(),
            ));
        }
        let mut axes = Vec::with_capacity(order.len());
        for l in order {
            let p = self.position(l.as_ref()).ok_or_else(|| QmathError::UnknownLabel(l.as_ref().to_string()))?;
            axes.push(p);
        }
        // stride of canonical axis k inside the `order` layout
        let mut stride = vec![0usize; self.len()];
        let mut s = 1;
        for &ax in axes.iter().rev() {
            stride[ax] = s;
            s *= self.dims[ax];
        }
        Ok(linear_map(&self.dims, &stride))
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.labels.iter().zip(&self.dims).map(|(l, d)| format!("{l}:{d}")).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

/// For each linear index over `dims` (row-major), the linear index under the given strides.
fn linear_map(dims: &[usize], stride: &[usize]) -> Vec<usize> {
    let total: usize = dims.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut digits = vec![0usize; dims.len()];
    let mut cur = 0usize;
    for _ in 0..total {
        out.push(cur);
        for k in (0..dims.len()).rev() {
            digits[k] += 1;
            cur += stride[k];
            if digits[k] < dims[k] {
                break;
            }
            cur -= stride[k] * dims[k];
            digits[k] = 0;
        }
    }
    out
}

/// Map from canonical indices of `space` to indices laid out with axes in the given input order.
fn canonical_from_input<S: AsRef<str>>(space: &Space, input_order: &[S]) -> Result<Vec<usize>, QmathError> {
    space.index_map(input_order)
}

/// Ket over a labeled tensor-product space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledVector {
    space: Space,
    amps: Vec<C64>,
}

impl LabeledVector {
    /// Amplitudes are given in the row-major order of `labels` as passed.
    pub fn new<S: AsRef<str>>(labels: &[S], dims: &[usize], amps: Vec<C64>) -> Result<Self, QmathError> {
        let (space, _) = Space::canonicalize(labels, dims)?;
        let total = space.total_dim();
        if amps.len() != total {
            return Err(QmathError::ShapeMismatch { expected: total, got: amps.len() });
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(QmathError::NonFinite);
        }
        let map = canonical_from_input(&space, labels)?;
        let amps = map.iter().map(|&i| amps[i]).collect();
        Ok(Self { space, amps })
    }

    pub fn from_space(space: Space, amps: Vec<C64>) -> Result<Self, QmathError> {
        if amps.len() != space.total_dim() {
            return Err(QmathError::ShapeMismatch { expected: space.total_dim(), got: amps.len() });
        }
        Ok(Self { space, amps })
    }

    /// Single-qubit ket with the given amplitudes on |0⟩, |1⟩.
    pub fn qubit(label: &str, amps: [C64; 2]) -> Self {
        Self::new(&[label], &[2], amps.to_vec()).expect("qubit ket is well formed")
    }

    pub fn basis(label: &str, dim: usize, k: usize) -> Result<Self, QmathError> {
        if k >= dim {
            return Err(QmathError::ShapeMismatch { expected: dim, got: k + 1 });
        }
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[k] = C64::new(1.0, 0.0);
        Self::new(&[label], &[dim], amps)
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_in<S: AsRef<str>>(&self, order: &[S]) -> Result<Vec<C64>, QmathError> {
        let map = self.space.index_map(order)?;
        let mut out = vec![C64::new(0.0, 0.0); self.amps.len()];
        for (canon, &dst) in map.iter().enumerate() {
            out[dst] = self.amps[canon];
        }
        Ok(out)
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Result<Self, QmathError> {
        let n = self.norm();
        if n < 1e-300 {
            return Err(QmathError::ZeroNorm);
        }
        Ok(Self { space: self.space.clone(), amps: self.amps.iter().map(|a| a / n).collect() })
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { space: self.space.clone(), amps: self.amps.iter().map(|a| a * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self, QmathError> {
        self.check_space(other)?;
        Ok(Self { space: self.space.clone(), amps: self.amps.iter().zip(&other.amps).map(|(a, b)| a + b).collect() })
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &Self) -> Result<C64, QmathError> {
        self.check_space(other)?;
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn to_density(&self) -> LabeledOperator {
        LabeledOperator::from_space_unchecked(self.space.clone(), CMatrix::outer(&self.amps, &self.amps))
    }

    /// Applies an operator acting on a subset of the labels.
    pub fn apply(&self, op: &LabeledOperator) -> Result<Self, QmathError> {
        let full = op.embed(&self.space)?;
        Ok(Self { space: self.space.clone(), amps: full.matrix().matvec(&self.amps) })
    }

    /// Contracts the `labels` of `self` against the same labels of `bra`:
    /// returns Σ conj(bra_k) self_{k,rest} over the remaining labels.
    pub fn project_onto(&self, bra: &LabeledVector) -> Result<Self, QmathError> {
        for l in bra.space.labels() {
            let d = self.space.dim_of(l).ok_or_else(|| QmathError::UnknownLabel(l.clone()))?;
            if d != bra.space.dim_of(l).expect("own label") {
                return Err(QmathError::DimensionMismatch(l.clone()));
            }
        }
        let rest = self.space.complement(&bra.space);
        let order: Vec<&str> = bra.space.labels().iter().chain(rest.labels()).map(String::as_str).collect();
        let data = self.amplitudes_in(&order)?;
        let (db, dr) = (bra.space.total_dim(), rest.total_dim());
        let mut out = vec![C64::new(0.0, 0.0); dr];
        for k in 0..db {
            let c = bra.amps[k].conj();
            for (o, v) in out.iter_mut().zip(&data[k * dr..(k + 1) * dr]) {
                *o += c * v;
            }
        }
        Self::from_space(rest, out)
    }

    fn check_space(&self, other: &Self) -> Result<(), QmathError> {
        if self.space != other.space {
            return Err(QmathError::SpaceMismatch(self.space.to_string(), other.space.to_string()));
        }
        Ok(())
    }
}

/// Operator over a labeled tensor-product space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledOperator {
    space: Space,
    mat: CMatrix,
    hermitian: bool,
}

impl LabeledOperator {
    /// `matrix` rows/columns follow the row-major order of `labels` as passed.
    pub fn new<S: AsRef<str>>(labels: &[S], dims: &[usize], matrix: CMatrix) -> Result<Self, QmathError> {
        let (space, _) = Space::canonicalize(labels, dims)?;
        let total = space.total_dim();
        if matrix.rows() != total || matrix.cols() != total {
            return Err(QmathError::ShapeMismatch { expected: total, got: matrix.rows().max(matrix.cols()) });
        }
        let map = canonical_from_input(&space, labels)?;
        let mat = CMatrix::from_fn(total, total, |r, c| matrix[(map[r], map[c])]);
        Ok(Self::from_space_unchecked(space, mat))
    }

    pub fn from_space(space: Space, matrix: CMatrix) -> Result<Self, QmathError> {
        let total = space.total_dim();
        if matrix.rows() != total || matrix.cols() != total {
            return Err(QmathError::ShapeMismatch { expected: total, got: matrix.rows().max(matrix.cols()) });
        }
        Ok(Self::from_space_unchecked(space, matrix))
    }

    pub(crate) fn from_space_unchecked(space: Space, mat: CMatrix) -> Self {
        let hermitian = mat.is_hermitian(HERMITIAN_FLAG_TOL);
        Self { space, mat, hermitian }
    }

    pub fn single(label: &str, matrix: CMatrix) -> Result<Self, QmathError> {
        let d = matrix.rows();
        Self::new(&[label], &[d], matrix)
    }

    pub fn identity(space: &Space) -> Self {
        Self::from_space_unchecked(space.clone(), CMatrix::identity(space.total_dim()))
    }

    pub fn zeros(space: &Space) -> Self {
        let n = space.total_dim();
        Self::from_space_unchecked(space.clone(), CMatrix::zeros(n, n))
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Matrix with rows/columns laid out in the given label order.
    pub fn matrix_in<S: AsRef<str>>(&self, order: &[S]) -> Result<CMatrix, QmathError> {
        let map = self.space.index_map(order)?;
        let n = map.len();
        let mut out = CMatrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                out[(map[r], map[c])] = self.mat[(r, c)];
            }
        }
        Ok(out)
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_space_unchecked(self.space.clone(), self.mat.adjoint())
    }

    /// Full transpose in the canonical product basis.
    pub fn transpose(&self) -> Self {
        Self::from_space_unchecked(self.space.clone(), self.mat.transpose())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_space_unchecked(self.space.clone(), self.mat.scale(s))
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self::from_space_unchecked(self.space.clone(), self.mat.scale_real(s))
    }

    pub fn add(&self, other: &Self) -> Result<Self, QmathError> {
        self.check_space(other)?;
        Ok(Self::from_space_unchecked(self.space.clone(), &self.mat + &other.mat))
    }

    pub fn sub(&self, other: &Self) -> Result<Self, QmathError> {
        self.check_space(other)?;
        Ok(Self::from_space_unchecked(self.space.clone(), &self.mat - &other.mat))
    }

    /// Operator product `self · other`; operators on sub-spaces are embedded first.
    pub fn compose(&self, other: &Self) -> Result<Self, QmathError> {
        let space = union_space(&self.space, &other.space)?;
        let a = self.embed(&space)?;
        let b = other.embed(&space)?;
        Ok(Self::from_space_unchecked(space, &a.mat * &b.mat))
    }

    /// Hilbert-Schmidt inner product Tr(self† other).
    pub fn hs_inner(&self, other: &Self) -> Result<C64, QmathError> {
        self.check_space(other)?;
        Ok(self.mat.hs_inner(&other.mat))
    }

    /// Tr(self · other).
    pub fn trace_product(&self, other: &Self) -> Result<C64, QmathError> {
        self.check_space(other)?;
        Ok(self.mat.trace_product(&other.mat))
    }

    pub fn expectation(&self, ket: &LabeledVector) -> Result<C64, QmathError> {
        let v = ket.apply(self)?;
        ket.inner(&v)
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64, QmathError> {
        self.check_space(other)?;
        Ok(self.mat.max_abs_diff(&other.mat))
    }

    /// Tensor with the identity on every label of `target` missing from `self`.
    pub fn embed(&self, target: &Space) -> Result<Self, QmathError> {
        for l in self.space.labels() {
            let d = target.dim_of(l).ok_or_else(|| QmathError::UnknownLabel(l.clone()))?;
            if d != self.space.dim_of(l).expect("own label") {
                return Err(QmathError::DimensionMismatch(l.clone()));
            }
        }
        if &self.space == target {
            return Ok(self.clone());
        }
        let rest = target.complement(&self.space);
        tensor_operators(&[self, &Self::identity(&rest)])
    }

    /// Trace over all labels not in `keep`.
    pub fn partial_trace<S: AsRef<str>>(&self, keep: &[S]) -> Result<Self, QmathError> {
        let kept = self.space.subspace(keep)?;
        let traced = self.space.complement(&kept);
        if traced.is_empty() {
            return Ok(self.clone());
        }
        let order: Vec<&str> = kept.labels().iter().chain(traced.labels()).map(String::as_str).collect();
        let m = self.matrix_in(&order)?;
        let (dk, dt) = (kept.total_dim(), traced.total_dim());
        let n = dk * dt;
        let mut out = CMatrix::zeros(dk, dk);
        let data = m.as_slice();
        for i in 0..dk {
            for j in 0..dk {
                let mut acc = C64::new(0.0, 0.0);
                for t in 0..dt {
                    acc += data[(i * dt + t) * n + j * dt + t];
                }
                out[(i, j)] = acc;
            }
        }
        Ok(Self::from_space_unchecked(kept, out))
    }

    /// Partial transpose on the given labels.
    pub fn partial_transpose<S: AsRef<str>>(&self, labels: &[S]) -> Result<Self, QmathError> {
        let sub = self.space.subspace(labels)?;
        let rest = self.space.complement(&sub);
        let order: Vec<&str> = sub.labels().iter().chain(rest.labels()).map(String::as_str).collect();
        let m = self.matrix_in(&order)?;
        let (ds, dr) = (sub.total_dim(), rest.total_dim());
        let t = CMatrix::from_fn(ds * dr, ds * dr, |r, c| {
            let (rs, rr) = (r / dr, r % dr);
            let (cs, cr) = (c / dr, c % dr);
            m[(cs * dr + rr, rs * dr + cr)]
        });
        let out = Self::new(&order, &order.iter().map(|l| self.space.dim_of(l).unwrap()).collect::<Vec<_>>(), t)?;
        Ok(out)
    }

    fn check_space(&self, other: &Self) -> Result<(), QmathError> {
        if self.space != other.space {
            return Err(QmathError::SpaceMismatch(self.space.to_string(), other.space.to_string()));
        }
        Ok(())
    }
}

fn union_space(a: &Space, b: &Space) -> Result<Space, QmathError> {
    let extra = b.complement(a);
    for l in b.labels() {
        if let Some(d) = a.dim_of(l) {
            if d != b.dim_of(l).expect("own label") {
                return Err(QmathError::DimensionMismatch(l.clone()));
            }
        }
    }
    a.join(&extra)
}

/// Kronecker product in factor order, re-expressed in canonical label order.
pub trait Tensor: Sized {
    fn tensor_all(factors: &[&Self]) -> Result<Self, QmathError>;
}

pub fn tensor<T: Tensor>(factors: &[&T]) -> Result<T, QmathError> {
    T::tensor_all(factors)
}

fn concat_labels<'a>(spaces: impl Iterator<Item = &'a Space>) -> (Vec<String>, Vec<usize>) {
    let mut labels = Vec::new();
    let mut dims = Vec::new();
    for s in spaces {
        labels.extend(s.labels().iter().cloned());
        dims.extend(s.dims().iter().copied());
    }
    (labels, dims)
}

pub fn tensor_vectors(factors: &[&LabeledVector]) -> Result<LabeledVector, QmathError> {
    let (labels, dims) = concat_labels(factors.iter().map(|f| f.space()));
    Space::canonicalize(&labels, &dims)?;
    let mut amps = vec![C64::new(1.0, 0.0)];
    for f in factors {
        let mut next = Vec::with_capacity(amps.len() * f.amps.len());
        for a in &amps {
            next.extend(f.amps.iter().map(|b| a * b));
        }
        amps = next;
    }
    LabeledVector::new(&labels, &dims, amps)
}

pub fn tensor_operators(factors: &[&LabeledOperator]) -> Result<LabeledOperator, QmathError> {
    let (labels, dims) = concat_labels(factors.iter().map(|f| f.space()));
    Space::canonicalize(&labels, &dims)?;
    let mut m = CMatrix::identity(1);
    for f in factors {
        m = m.kron(&f.mat);
    }
    LabeledOperator::new(&labels, &dims, m)
}

impl Tensor for LabeledVector {
    fn tensor_all(factors: &[&Self]) -> Result<Self, QmathError> {
        tensor_vectors(factors)
    }
}

impl Tensor for LabeledOperator {
    fn tensor_all(factors: &[&Self]) -> Result<Self, QmathError> {
        tensor_operators(factors)
    }
}

/// Σ_i |i⟩_a |i⟩_b, unnormalized.
pub fn link_vector(a: &str, b: &str, dim: usize) -> Result<LabeledVector, QmathError> {
    if dim == 0 {
        return Err(QmathError::ZeroLinkDimension);
    }
    let mut amps = vec![C64::new(0.0, 0.0); dim * dim];
    for i in 0..dim {
        amps[i * dim + i] = C64::new(1.0, 0.0);
    }
    LabeledVector::new(&[a, b], &[dim, dim], amps)
}
