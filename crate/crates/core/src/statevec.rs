//! Dense tensor-product state vectors.
//!
//! A [`SystemLayout`] fixes the order of the subsystems. Joint indices are
//! row-major over that order: the last subsystem varies fastest, so on the
//! layout `[S:2, A:2, B:2]` the amplitude of `|s, a, b⟩` sits at
//! `4 s + 2 a + b`. Golden amplitude tables throughout the crate rely on this
//! ordering.

use std::collections::HashSet;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix used for unitaries and operators.
pub type CMatrix = DMatrix<Complex64>;

/// Tolerance for normalization, unitarity and orthonormality checks.
pub const NORM_TOLERANCE: f64 = 1e-10;

/// Below this amplitude norm a branch is treated as absent.
pub const ZERO_BRANCH_NORM: f64 = 1e-12;

#[inline]
pub(crate) fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// One named tensor factor.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Subsystem {
    name: String,
    dim: usize,
}

impl Subsystem {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Ordered list of subsystems defining the tensor-product structure.
///
/// An empty layout is allowed and describes the one-dimensional space of
/// scalars; it appears as the residual when the last subsystem of a state is
/// decomposed away.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct SystemLayout {
    subsystems: Vec<Subsystem>,
}

impl SystemLayout {
    pub fn new<I, S>(subsystems: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        let mut layout = SystemLayout::default();
        for (name, dim) in subsystems {
            layout = layout.appended(name, dim)?;
        }
        Ok(layout)
    }

    /// Layout with no subsystems.
    pub fn empty() -> Self {
        Self::default()
    }

    /// Returns a copy with one more subsystem at the end.
    pub fn appended(&self, name: impl Into<String>, dim: usize) -> Result<Self> {
        self.with_inserted(self.len(), name, dim)
    }

    /// Returns a copy with a new subsystem inserted at `position`.
    pub fn with_inserted(&self, position: usize, name: impl Into<String>, dim: usize) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::InvalidLayout("subsystem names must be nonempty".into()));
        }
        if dim < 2 {
            return Err(Error::InvalidLayout(format!(
                "subsystem `{name}` has dimension {dim}, need at least 2"
            )));
        }
        if self.position(&name).is_some() {
            return Err(Error::InvalidLayout(format!("duplicate subsystem name `{name}`")));
        }
        if position > self.len() {
            return Err(Error::InvalidLayout(format!(
                "insertion position {position} past the end of a {}-subsystem layout",
                self.len()
            )));
        }
        let mut subsystems = self.subsystems.clone();
        subsystems.insert(position, Subsystem { name, dim });
        Ok(Self { subsystems })
    }

    /// Returns a copy without the subsystem at `position`.
    pub fn without(&self, position: usize) -> Self {
        let mut subsystems = self.subsystems.clone();
        subsystems.remove(position);
        Self { subsystems }
    }

    pub fn len(&self) -> usize {
        self.subsystems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsystems.is_empty()
    }

    pub fn subsystems(&self) -> &[Subsystem] {
        &self.subsystems
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.subsystems.iter().map(|s| s.name.as_str())
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.subsystems.iter().position(|s| s.name == name)
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.position(name)
            .ok_or_else(|| Error::UnknownSubsystem(name.to_string()))
    }

    pub fn dim_of(&self, name: &str) -> Result<usize> {
        Ok(self.subsystems[self.index_of(name)?].dim)
    }

    pub fn total_dim(&self) -> usize {
        self.subsystems.iter().map(|s| s.dim).product()
    }

    /// Row-major strides: the last subsystem has stride 1.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.len()];
        for k in (0..self.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.subsystems[k + 1].dim;
        }
        strides
    }

    /// Splits a joint index into per-subsystem digits.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut digits = vec![0; self.len()];
        for (k, sub) in self.subsystems.iter().enumerate().rev() {
            digits[k] = index % sub.dim;
            index /= sub.dim;
        }
        digits
    }

    /// Inverse of [`digits`](Self::digits).
    pub fn joint_index(&self, digits: &[usize]) -> Result<usize> {
        if digits.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} digits for a {}-subsystem layout",
                digits.len(),
                self.len()
            )));
        }
        let mut index = 0;
        for (digit, sub) in digits.iter().zip(&self.subsystems) {
            if *digit >= sub.dim {
                return Err(Error::DimensionMismatch(format!(
                    "digit {digit} out of range for `{}` (dimension {})",
                    sub.name, sub.dim
                )));
            }
            index = index * sub.dim + digit;
        }
        Ok(index)
    }
}

impl fmt::Display for SystemLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (k, s) in self.subsystems.iter().enumerate() {
            if k > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}:{}", s.name, s.dim)?;
        }
        f.write_str("]")
    }
}

/// A labeled vector of a [`Basis`].
#[derive(Debug, Clone, PartialEq)]
pub struct BasisVector {
    label: String,
    components: Vec<Complex64>,
}

impl BasisVector {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn components(&self) -> &[Complex64] {
        &self.components
    }
}

/// A named orthonormal basis of one subsystem.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    name: String,
    subsystem: String,
    vectors: Vec<BasisVector>,
}

impl Basis {
    /// Builds a basis and checks that it is complete and orthonormal.
    ///
    /// Vectors are stored as given; they are not re-normalized, so the Gram
    /// matrix must already be the identity within [`NORM_TOLERANCE`].
    pub fn new<L>(
        name: impl Into<String>,
        subsystem: impl Into<String>,
        vectors: Vec<(L, Vec<Complex64>)>,
    ) -> Result<Self>
    where
        L: Into<String>,
    {
        let name = name.into();
        let subsystem = subsystem.into();
        let vectors: Vec<BasisVector> = vectors
            .into_iter()
            .map(|(label, components)| BasisVector {
                label: label.into(),
                components,
            })
            .collect();
        let dim = vectors.len();
        if dim < 2 {
            return Err(Error::InvalidBasis(format!("`{name}` needs at least two vectors")));
        }
        let mut seen = HashSet::new();
        for v in &vectors {
            if v.components.len() != dim {
                return Err(Error::InvalidBasis(format!(
                    "`{name}`: vector `{}` has {} components, expected {dim}",
                    v.label,
                    v.components.len()
                )));
            }
            if !seen.insert(v.label.as_str()) {
                return Err(Error::InvalidBasis(format!(
                    "`{name}`: duplicate label `{}`",
                    v.label
                )));
            }
        }
        let basis = Self {
            name,
            subsystem,
            vectors,
        };
        let defect = basis.gram_defect();
        if defect > NORM_TOLERANCE {
            return Err(Error::InvalidBasis(format!(
                "`{}` is not orthonormal (Gram deviation {defect:.3e})",
                basis.name
            )));
        }
        Ok(basis)
    }

    /// The computational basis with the given labels.
    pub fn computational<L>(name: impl Into<String>, subsystem: impl Into<String>, labels: &[L]) -> Result<Self>
    where
        L: AsRef<str>,
    {
        let dim = labels.len();
        let vectors = labels
            .iter()
            .enumerate()
            .map(|(k, label)| {
                let mut v = vec![Complex64::default(); dim];
                v[k] = c64(1.0, 0.0);
                (label.as_ref().to_string(), v)
            })
            .collect();
        Self::new(name, subsystem, vectors)
    }

    /// Largest deviation of the Gram matrix from the identity.
    pub fn gram_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.vectors.iter().enumerate() {
            for (j, b) in self.vectors.iter().enumerate() {
                let g = dot(&a.components, &b.components);
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - c64(target, 0.0)).norm());
            }
        }
        worst
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn subsystem(&self) -> &str {
        &self.subsystem
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[BasisVector] {
        &self.vectors
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.vectors.iter().map(|v| v.label.as_str())
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.vectors.iter().position(|v| v.label == label)
    }

    pub fn vector(&self, label: &str) -> Option<&[Complex64]> {
        self.index_of(label).map(|k| self.vectors[k].components.as_slice())
    }

    /// Checks that the basis can act on `subsystem` of `layout` and returns
    /// the subsystem's position.
    pub fn position_in(&self, layout: &SystemLayout, subsystem: &str) -> Result<usize> {
        let pos = layout.index_of(subsystem)?;
        if self.subsystem != subsystem {
            return Err(Error::BasisMismatch {
                basis: self.name.clone(),
                declared: self.subsystem.clone(),
                requested: subsystem.to_string(),
            });
        }
        let dim = layout.subsystems()[pos].dim();
        if dim != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "basis `{}` has dimension {}, subsystem `{subsystem}` has {dim}",
                self.name,
                self.dim()
            )));
        }
        Ok(pos)
    }

    /// Matrix whose columns are the basis vectors.
    pub fn to_matrix(&self) -> CMatrix {
        let d = self.dim();
        CMatrix::from_fn(d, d, |r, c| self.vectors[c].components[r])
    }
}

/// `⟨a|b⟩` on plain component slices.
pub(crate) fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// A normalized complex amplitude array over a [`SystemLayout`].
///
/// Values are immutable; every operation returns a new state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    layout: SystemLayout,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Builds a state from raw amplitudes, normalizing them.
    pub fn new(layout: SystemLayout, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != layout.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for layout {layout} of dimension {}",
                amplitudes.len(),
                layout.total_dim()
            )));
        }
        let norm = norm_of(&amplitudes);
        if norm <= ZERO_BRANCH_NORM || !norm.is_finite() {
            return Err(Error::ZeroVector("state amplitudes".into()));
        }
        let amplitudes = amplitudes.into_iter().map(|a| a / norm).collect();
        Ok(Self { layout, amplitudes })
    }

    /// Computational basis state with the given per-subsystem digits.
    pub fn basis_state(layout: SystemLayout, digits: &[usize]) -> Result<Self> {
        let index = layout.joint_index(digits)?;
        let mut amplitudes = vec![Complex64::default(); layout.total_dim()];
        amplitudes[index] = c64(1.0, 0.0);
        Ok(Self { layout, amplitudes })
    }

    /// Normalized tensor product of one factor per subsystem.
    pub fn product<F>(layout: SystemLayout, factors: &[F]) -> Result<Self>
    where
        F: AsRef<[Complex64]>,
    {
        if factors.len() != layout.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} factors for {} subsystems",
                factors.len(),
                layout.len()
            )));
        }
        let mut amplitudes = vec![c64(1.0, 0.0)];
        for (factor, sub) in factors.iter().zip(layout.subsystems()) {
            let factor = factor.as_ref();
            if factor.len() != sub.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "factor for `{}` has {} components, expected {}",
                    sub.name(),
                    factor.len(),
                    sub.dim()
                )));
            }
            let norm = norm_of(factor);
            if norm <= ZERO_BRANCH_NORM {
                return Err(Error::ZeroVector(format!("factor for `{}`", sub.name())));
            }
            amplitudes = amplitudes
                .iter()
                .flat_map(|a| factor.iter().map(move |f| a * f / norm))
                .collect();
        }
        Ok(Self { layout, amplitudes })
    }

    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    /// Amplitude of the computational basis state with the given digits.
    pub fn amplitude(&self, digits: &[usize]) -> Result<Complex64> {
        Ok(self.amplitudes[self.layout.joint_index(digits)?])
    }

    pub fn norm(&self) -> f64 {
        norm_of(&self.amplitudes)
    }

    /// Sesquilinear inner product `⟨self|other⟩`.
    pub fn inner_product(&self, other: &Self) -> Result<Complex64> {
        if self.layout != other.layout {
            return Err(Error::LayoutMismatch);
        }
        Ok(dot(&self.amplitudes, &other.amplitudes))
    }

    /// `|⟨self|other⟩|²`, clamped to `[0, 1]`.
    pub fn fidelity(&self, other: &Self) -> Result<f64> {
        Ok(self.inner_product(other)?.norm_sqr().clamp(0.0, 1.0))
    }

    /// Largest component-wise difference; used for state-for-state comparisons.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.layout != other.layout {
            return Err(Error::LayoutMismatch);
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Copy with the global phase chosen so that the first nonzero amplitude
    /// is real and nonnegative.
    pub fn phase_normalized(&self) -> Self {
        let first = self
            .amplitudes
            .iter()
            .find(|a| a.norm() > ZERO_BRANCH_NORM)
            .copied()
            .unwrap_or(c64(1.0, 0.0));
        let phase = first.conj() / first.norm();
        Self {
            layout: self.layout.clone(),
            amplitudes: self.amplitudes.iter().map(|a| a * phase).collect(),
        }
    }

    /// Applies `matrix` to the named subsystems (in the given order), acting
    /// as the identity elsewhere.
    pub fn apply_unitary(&self, targets: &[&str], matrix: &CMatrix) -> Result<Self> {
        let positions = self.target_positions(targets)?;
        let dim: usize = positions.iter().map(|&p| self.layout.subsystems()[p].dim()).product();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix on targets of total dimension {dim}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let defect = unitarity_defect(matrix);
        if defect > NORM_TOLERANCE {
            return Err(Error::NotUnitary(defect));
        }
        Ok(Self {
            layout: self.layout.clone(),
            amplitudes: self.apply_local(&positions, matrix),
        })
    }

    fn target_positions(&self, targets: &[&str]) -> Result<Vec<usize>> {
        if targets.is_empty() {
            return Err(Error::DimensionMismatch("no target subsystems".into()));
        }
        let mut positions = Vec::with_capacity(targets.len());
        for t in targets {
            let p = self.layout.index_of(t)?;
            if positions.contains(&p) {
                return Err(Error::DimensionMismatch(format!("subsystem `{t}` targeted twice")));
            }
            positions.push(p);
        }
        Ok(positions)
    }

    /// Unchecked local action of a `dim(targets)`-square matrix.
    pub(crate) fn apply_local(&self, positions: &[usize], matrix: &CMatrix) -> Vec<Complex64> {
        let strides = self.layout.strides();
        let subs = self.layout.subsystems();
        // offsets of every target configuration, row-major over `positions`
        let mut offsets = vec![0usize];
        for &p in positions {
            let stride = strides[p];
            offsets = offsets
                .iter()
                .flat_map(|o| (0..subs[p].dim()).map(move |d| o + d * stride))
                .collect();
        }
        let mut out = vec![Complex64::default(); self.amplitudes.len()];
        let mut local = vec![Complex64::default(); offsets.len()];
        for base in 0..self.amplitudes.len() {
            let digits = self.layout.digits(base);
            if positions.iter().any(|&p| digits[p] != 0) {
                continue;
            }
            for (slot, off) in local.iter_mut().zip(&offsets) {
                *slot = self.amplitudes[base + off];
            }
            for (r, off) in offsets.iter().enumerate() {
                out[base + off] = (0..offsets.len()).map(|c| matrix[(r, c)] * local[c]).sum();
            }
        }
        out
    }

    /// Tensor product `self ⊗ other`; subsystem names must not clash.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let mut layout = self.layout.clone();
        for s in other.layout.subsystems() {
            layout = layout.appended(s.name(), s.dim())?;
        }
        let amplitudes = self
            .amplitudes
            .iter()
            .flat_map(|a| other.amplitudes.iter().map(move |b| a * b))
            .collect();
        Ok(Self { layout, amplitudes })
    }

    /// Inserts a new unentangled subsystem in state `vector` at `position`.
    pub fn insert_factor(
        &self,
        position: usize,
        name: impl Into<String>,
        vector: &[Complex64],
    ) -> Result<Self> {
        let layout = self.layout.with_inserted(position, name, vector.len())?;
        let norm = norm_of(vector);
        if norm <= ZERO_BRANCH_NORM {
            return Err(Error::ZeroVector("inserted factor".into()));
        }
        let strides = layout.strides();
        let stride = strides[position];
        let dim = vector.len();
        let amplitudes = (0..layout.total_dim())
            .map(|i| {
                let high = i / (stride * dim);
                let digit = (i / stride) % dim;
                let low = i % stride;
                self.amplitudes[high * stride + low] * vector[digit] / norm
            })
            .collect();
        Ok(Self { layout, amplitudes })
    }

    /// Appends a fresh subsystem in state `vector` at the end of the layout.
    pub fn with_fresh(&self, name: impl Into<String>, vector: &[Complex64]) -> Result<Self> {
        self.insert_factor(self.layout.len(), name, vector)
    }

    /// Partial inner product `(⟨v|_position ⊗ I) |ψ⟩`, unnormalized, over the
    /// layout without `position`.
    pub(crate) fn contract(&self, position: usize, vector: &[Complex64]) -> Vec<Complex64> {
        let stride = self.layout.strides()[position];
        let dim = self.layout.subsystems()[position].dim();
        let rest = self.amplitudes.len() / dim;
        (0..rest)
            .map(|r| {
                let high = r / stride;
                let low = r % stride;
                (0..dim)
                    .map(|d| vector[d].conj() * self.amplitudes[high * stride * dim + d * stride + low])
                    .sum()
            })
            .collect()
    }

    /// Projects `subsystem` onto `vector` and renormalizes, keeping the layout.
    /// Returns the probability of the projection and the conditioned state.
    pub fn condition_on(&self, subsystem: &str, vector: &[Complex64]) -> Result<(f64, Self)> {
        let position = self.layout.index_of(subsystem)?;
        let dim = self.layout.subsystems()[position].dim();
        if vector.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "conditioning vector has {} components, `{subsystem}` has dimension {dim}",
                vector.len()
            )));
        }
        let residual = self.contract(position, vector);
        let weight = norm_of(&residual).powi(2);
        if weight.sqrt() <= ZERO_BRANCH_NORM {
            return Err(Error::ZeroProbability(subsystem.to_string()));
        }
        let residual = Self::new(self.layout.without(position), residual)?;
        let state = residual.insert_factor(position, subsystem, vector)?;
        Ok((weight, state))
    }

    /// Rewrites the state as `Σ_k √w_k |b_k⟩ ⊗ |r_k⟩` for the given basis of
    /// `subsystem`. One branch per basis vector is returned, in basis order.
    pub fn branch_decompose(&self, subsystem: &str, basis: &Basis) -> Result<Vec<Branch>> {
        let position = basis.position_in(&self.layout, subsystem)?;
        let rest = self.layout.without(position);
        Ok(basis
            .vectors()
            .iter()
            .map(|v| {
                let residual = self.contract(position, v.components());
                let norm = norm_of(&residual);
                if norm <= ZERO_BRANCH_NORM {
                    let mut placeholder = vec![Complex64::default(); rest.total_dim()];
                    placeholder[0] = c64(1.0, 0.0);
                    Branch {
                        label: v.label().to_string(),
                        weight: 0.0,
                        residual: StateVector {
                            layout: rest.clone(),
                            amplitudes: placeholder,
                        },
                        defined: false,
                    }
                } else {
                    Branch {
                        label: v.label().to_string(),
                        weight: norm * norm,
                        residual: StateVector {
                            layout: rest.clone(),
                            amplitudes: residual.into_iter().map(|a| a / norm).collect(),
                        },
                        defined: true,
                    }
                }
            })
            .collect())
    }
}

/// One term of a branch decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub label: String,
    pub weight: f64,
    /// Normalized state of the remaining subsystems. Arbitrary when
    /// `defined` is false.
    pub residual: StateVector,
    /// False for zero-weight branches.
    pub defined: bool,
}

/// Reassembles `Σ_k √w_k |b_k⟩ ⊗ |r_k⟩` with the basis vector inserted at
/// `position`. Returns raw (unnormalized) amplitudes.
pub fn resum_branches(branches: &[Branch], basis: &Basis, position: usize) -> Result<Vec<Complex64>> {
    let mut total: Option<Vec<Complex64>> = None;
    for (branch, v) in branches.iter().zip(basis.vectors()) {
        let term = branch
            .residual
            .insert_factor(position, basis.subsystem(), v.components())?;
        let scale = branch.weight.sqrt();
        let acc = total.get_or_insert_with(|| vec![Complex64::default(); term.amplitudes.len()]);
        for (a, t) in acc.iter_mut().zip(term.amplitudes) {
            *a += t * scale;
        }
    }
    total.ok_or_else(|| Error::InvalidBasis("no branches to resum".into()))
}

pub(crate) fn norm_of(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest entry of `|M†M − I|`.
pub fn unitarity_defect(matrix: &CMatrix) -> f64 {
    let n = matrix.nrows();
    let product = matrix.adjoint() * matrix;
    let mut worst: f64 = 0.0;
    for r in 0..n {
        for c in 0..n {
            let target = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((product[(r, c)] - c64(target, 0.0)).norm());
        }
    }
    worst
}
