//! Dense complex linear algebra for small qutrit registers.
//!
//! Basis labels are big-endian over sites: `|q0 q1 q2>` maps to
//! `9*q0 + 3*q1 + q2` for three qutrits. Channels are stored as
//! column-stacking superoperators, `vec(A X B) = (B^T kron A) vec(X)`.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const UNITARY_TOL: f64 = 1e-10;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

/// `e^{i phi}`
#[inline]
pub fn cis(phi: f64) -> C64 {
    Complex::from_polar(1.0, phi)
}

/// Standard Kronecker product.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn kron_all(ops: &[CMatrix]) -> CMatrix {
    ops.iter()
        .skip(1)
        .fold(ops[0].clone(), |acc, op| acc.kronecker(op))
}

/// Big-endian flat index of a multi-level label.
pub fn basis_index(levels: &[usize], local_dim: usize) -> usize {
    levels.iter().fold(0, |acc, &l| acc * local_dim + l)
}

pub fn basis_digits(mut index: usize, n_sites: usize, local_dim: usize) -> Vec<usize> {
    let mut digits = vec![0; n_sites];
    for slot in digits.iter_mut().rev() {
        *slot = index % local_dim;
        index /= local_dim;
    }
    digits
}

/// Ket label such as `|011>`.
pub fn ket_label(index: usize, n_sites: usize, local_dim: usize) -> String {
    let body: String = basis_digits(index, n_sites, local_dim)
        .iter()
        .map(|d| char::from(b'0' + *d as u8))
        .collect();
    format!("|{body}>")
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// `min_phi ||a - e^{i phi} b||_F`, closed form through the trace inner product.
pub fn phase_insensitive_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let overlap: C64 = b.iter().zip(a.iter()).map(|(x, y)| x.conj() * y).sum();
    let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { c64(1.0, 0.0) };
    a.iter().zip(b.iter()).map(|(x, y)| (x - phase * y).norm_sqr()).sum::<f64>().sqrt()
}

/// Haar-random unitary via QR of a complex Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| {
        c64(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut u = q;
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c64(1.0, 0.0) };
        for i in 0..dim {
            u[(i, j)] *= phase;
        }
    }
    u
}

pub fn hermitian_eigen(m: &CMatrix) -> SymmetricEigen<C64, nalgebra::Dyn> {
    let herm = (m + m.adjoint()).scale(0.5);
    SymmetricEigen::new(herm)
}

pub fn min_hermitian_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigen(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Nearest positive semidefinite matrix (Frobenius norm) of the Hermitian part.
pub fn project_psd(m: &CMatrix) -> CMatrix {
    let eig = hermitian_eigen(m);
    let n = m.nrows();
    let mut out = CMatrix::zeros(n, n);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda <= 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        out += (v * v.adjoint()).scale(lambda);
    }
    out
}

/// Pure state of `n_sites` qutrits.
#[derive(Debug, Clone, PartialEq)]
pub struct QutritRegisterState {
    n_sites: usize,
    amplitudes: CVector,
}

impl QutritRegisterState {
    pub fn basis(levels: &[usize]) -> Self {
        let n = levels.len();
        let mut amplitudes = CVector::zeros(3usize.pow(n as u32));
        amplitudes[basis_index(levels, 3)] = c64(1.0, 0.0);
        Self { n_sites: n, amplitudes }
    }

    pub fn from_amplitudes(n_sites: usize, amplitudes: CVector) -> Result<Self> {
        let dim = 3usize.pow(n_sites as u32);
        if amplitudes.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: amplitudes.len() });
        }
        Ok(Self { n_sites, amplitudes })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.amplitudes.norm();
        if n > 0.0 {
            self.amplitudes.unscale_mut(n);
        }
        self
    }

    pub fn evolve(&self, u: &UnitaryMatrix) -> Result<Self> {
        if u.dim() != self.amplitudes.len() {
            return Err(Error::DimensionMismatch { expected: self.amplitudes.len(), got: u.dim() });
        }
        Ok(Self { n_sites: self.n_sites, amplitudes: u.matrix() * &self.amplitudes })
    }
}

/// Mixed state of `n_sites` qutrits.
#[derive(Debug, Clone, PartialEq)]
pub struct QutritDensityMatrix {
    n_sites: usize,
    matrix: CMatrix,
}

impl QutritDensityMatrix {
    pub fn from_state(state: &QutritRegisterState) -> Self {
        let a = state.amplitudes();
        Self { n_sites: state.n_sites(), matrix: a * a.adjoint() }
    }

    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(n_sites: usize, matrix: CMatrix) -> Result<Self> {
        let dim = 3usize.pow(n_sites as u32);
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: matrix.nrows() });
        }
        let herm = max_abs_diff(&matrix, &matrix.adjoint());
        if herm > 1e-10 {
            return Err(Error::Invariant {
                constraint: "hermitian".into(),
                detail: format!("max |rho - rho^dag| = {herm:.3e}"),
            });
        }
        let tr = matrix.trace();
        if (tr - c64(1.0, 0.0)).norm() > 1e-10 {
            return Err(Error::Invariant {
                constraint: "unit trace".into(),
                detail: format!("trace = {tr}"),
            });
        }
        let min_eig = min_hermitian_eigenvalue(&matrix);
        if min_eig < -1e-9 {
            return Err(Error::Invariant {
                constraint: "positive semidefinite".into(),
                detail: format!("min eigenvalue {min_eig:.3e}"),
            });
        }
        Ok(Self { n_sites, matrix })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }
}

/// Square matrix with `U^dag U = I` checked at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix {
    matrix: CMatrix,
}

impl UnitaryMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), got: matrix.ncols() });
        }
        let dev = unitarity_deviation(&matrix);
        if dev > UNITARY_TOL {
            return Err(Error::NotUnitary(dev));
        }
        Ok(Self { matrix })
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: CMatrix::identity(dim, dim) }
    }

    pub fn diagonal(phases: &[f64]) -> Self {
        let d = CVector::from_iterator(phases.len(), phases.iter().map(|&p| cis(p)));
        Self { matrix: CMatrix::from_diagonal(&d) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn adjoint(&self) -> Self {
        Self { matrix: self.matrix.adjoint() }
    }

    /// `self * other`, i.e. `other` acts first.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(Self { matrix: &self.matrix * &other.matrix })
    }
}

pub fn unitarity_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    max_abs_diff(&(m.adjoint() * m), &CMatrix::identity(n, n))
}

/// Injective map from qubit labels to qutrit labels with levels 0 and 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComputationalEmbedding {
    site_count: usize,
    index_map: Vec<usize>,
}

impl ComputationalEmbedding {
    pub fn new(site_count: usize) -> Self {
        let index_map = (0..1usize << site_count)
            .map(|q| basis_index(&basis_digits(q, site_count, 2), 3))
            .collect();
        Self { site_count, index_map }
    }

    pub fn site_count(&self) -> usize {
        self.site_count
    }

    pub fn qubit_dim(&self) -> usize {
        1 << self.site_count
    }

    pub fn qutrit_dim(&self) -> usize {
        3usize.pow(self.site_count as u32)
    }

    pub fn index_map(&self) -> &[usize] {
        &self.index_map
    }

    pub fn qutrit_index(&self, qubit_index: usize) -> usize {
        self.index_map[qubit_index]
    }

    /// Isometry `E` of shape `3^n x 2^n`.
    pub fn isometry(&self) -> CMatrix {
        let mut e = CMatrix::zeros(self.qutrit_dim(), self.qubit_dim());
        for (q, &t) in self.index_map.iter().enumerate() {
            e[(t, q)] = c64(1.0, 0.0);
        }
        e
    }
}

/// Lifts a qubit unitary into the qutrit space, acting as identity off the
/// computational subspace.
pub fn embed_qubit_unitary(u: &CMatrix, emb: &ComputationalEmbedding) -> Result<UnitaryMatrix> {
    if u.nrows() != emb.qubit_dim() || u.ncols() != emb.qubit_dim() {
        return Err(Error::DimensionMismatch { expected: emb.qubit_dim(), got: u.nrows() });
    }
    let dev = unitarity_deviation(u);
    if dev > UNITARY_TOL {
        return Err(Error::NotUnitary(dev));
    }
    let mut out = CMatrix::identity(emb.qutrit_dim(), emb.qutrit_dim());
    for (i, &ti) in emb.index_map.iter().enumerate() {
        for (j, &tj) in emb.index_map.iter().enumerate() {
            out[(ti, tj)] = u[(i, j)];
        }
    }
    Ok(UnitaryMatrix { matrix: out })
}

/// Computational block of a qutrit operator plus how much of it escapes.
#[derive(Debug, Clone)]
pub struct Restriction {
    pub block: CMatrix,
    /// Max over embedded columns of the l2 mass outside the embedded rows.
    pub leakage: f64,
    pub column_leakage: Vec<f64>,
}

pub fn restrict_to_computational(u: &CMatrix, emb: &ComputationalEmbedding) -> Result<Restriction> {
    if u.nrows() != emb.qutrit_dim() || u.ncols() != emb.qutrit_dim() {
        return Err(Error::DimensionMismatch { expected: emb.qutrit_dim(), got: u.nrows() });
    }
    let map = emb.index_map();
    let block = CMatrix::from_fn(map.len(), map.len(), |i, j| u[(map[i], map[j])]);
    let mut inside = vec![false; emb.qutrit_dim()];
    for &t in map {
        inside[t] = true;
    }
    let column_leakage: Vec<f64> = map
        .iter()
        .map(|&col| {
            (0..emb.qutrit_dim())
                .filter(|&r| !inside[r])
                .map(|r| u[(r, col)].norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let leakage = column_leakage.iter().copied().fold(0.0, f64::max);
    Ok(Restriction { block, leakage, column_leakage })
}

/// Column-stacking superoperator of a linear map on `dim x dim` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    dim: usize,
    matrix: CMatrix,
}

impl Superoperator {
    pub fn from_matrix(dim: usize, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != dim * dim || matrix.ncols() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, got: matrix.nrows() });
        }
        Ok(Self { dim, matrix })
    }

    pub fn identity(dim: usize) -> Self {
        Self { dim, matrix: CMatrix::identity(dim * dim, dim * dim) }
    }

    pub fn from_unitary(u: &CMatrix) -> Self {
        Self { dim: u.nrows(), matrix: kron(&u.conjugate(), u) }
    }

    pub fn from_kraus(ops: &[CMatrix]) -> Self {
        let dim = ops[0].nrows();
        let mut m = CMatrix::zeros(dim * dim, dim * dim);
        for k in ops {
            m += kron(&k.conjugate(), k);
        }
        Self { dim, matrix: m }
    }

    /// `rho -> (1 - p) rho + p Tr(rho) I / d`.
    pub fn depolarizing(dim: usize, p: f64) -> Self {
        let mut m = CMatrix::identity(dim * dim, dim * dim).scale(1.0 - p);
        let w = c64(p / dim as f64, 0.0);
        for i in 0..dim {
            for j in 0..dim {
                m[(i + i * dim, j + j * dim)] += w;
            }
        }
        Self { dim, matrix: m }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// `other` after `self`.
    pub fn then(&self, other: &Self) -> Self {
        Self { dim: self.dim, matrix: &other.matrix * &self.matrix }
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let v = CVector::from_column_slice(rho.as_slice());
        let out = &self.matrix * v;
        CMatrix::from_column_slice(self.dim, self.dim, out.as_slice())
    }

    /// `J = sum_ij |i><j| kron L(|i><j|)` (input factor first).
    pub fn choi(&self) -> CMatrix {
        let d = self.dim;
        CMatrix::from_fn(d * d, d * d, |r, c| {
            let (i, a) = (r / d, r % d);
            let (j, b) = (c / d, c % d);
            self.matrix[(a + b * d, i + j * d)]
        })
    }

    pub fn from_choi(dim: usize, choi: &CMatrix) -> Self {
        let d = dim;
        let matrix = CMatrix::from_fn(d * d, d * d, |r, c| {
            let (a, b) = (r % d, r / d);
            let (i, j) = (c % d, c / d);
            choi[(i * d + a, j * d + b)]
        });
        Self { dim, matrix }
    }

    /// `Tr_out J`, the operator that equals `I` for trace-preserving maps.
    pub fn trace_operator(&self) -> CMatrix {
        let d = self.dim;
        CMatrix::from_fn(d, d, |i, j| (0..d).map(|a| self.matrix[(a + a * d, i + j * d)]).sum())
    }

    pub fn trace_preservation_error(&self) -> f64 {
        max_abs_diff(&self.trace_operator(), &CMatrix::identity(self.dim, self.dim))
    }

    pub fn min_choi_eigenvalue(&self) -> f64 {
        min_hermitian_eigenvalue(&self.choi())
    }

    /// Kraus decomposition from the Choi eigensystem; drops eigenvalues below `cutoff`.
    pub fn to_kraus(&self, cutoff: f64) -> Vec<CMatrix> {
        let d = self.dim;
        let eig = hermitian_eigen(&self.choi());
        let mut ops = Vec::new();
        for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda <= cutoff {
                continue;
            }
            let s = lambda.sqrt();
            let v = eig.eigenvectors.column(k);
            ops.push(CMatrix::from_fn(d, d, |a, i| v[i * d + a] * s));
        }
        ops
    }

    /// Computational-subspace block (trace non-increasing if the map leaks).
    pub fn restrict(&self, emb: &ComputationalEmbedding) -> Result<Self> {
        if self.dim != emb.qutrit_dim() {
            return Err(Error::DimensionMismatch { expected: emb.qutrit_dim(), got: self.dim });
        }
        let map = emb.index_map();
        let (d, q) = (self.dim, map.len());
        let matrix = CMatrix::from_fn(q * q, q * q, |r, c| {
            let (a, b) = (map[r % q], map[r / q]);
            let (i, j) = (map[c % q], map[c / q]);
            self.matrix[(a + b * d, i + j * d)]
        });
        Ok(Self { dim: q, matrix })
    }
}

/// Entanglement fidelity `Tr(S_V^dag S) / d^2` of a channel against a unitary.
fn raw_process_fidelity(channel: &Superoperator, target: &CMatrix) -> Result<f64> {
    if target.nrows() != channel.dim() {
        return Err(Error::DimensionMismatch { expected: channel.dim(), got: target.nrows() });
    }
    let sv = Superoperator::from_unitary(target);
    let overlap: C64 = sv.matrix.iter().zip(channel.matrix.iter()).map(|(a, b)| a.conj() * b).sum();
    let d2 = (channel.dim() * channel.dim()) as f64;
    Ok((overlap.re / d2).clamp(0.0, 1.0))
}

fn check_cp(channel: &Superoperator) -> Result<()> {
    let min_eig = channel.min_choi_eigenvalue();
    if min_eig < -1e-8 {
        return Err(Error::NotCompletelyPositive(min_eig));
    }
    Ok(())
}

/// Process (entanglement) fidelity of a trace-preserving channel against a unitary target.
pub fn process_fidelity(channel: &Superoperator, target: &CMatrix) -> Result<f64> {
    let tp = channel.trace_preservation_error();
    if tp > 1e-8 {
        return Err(Error::NotTracePreserving(tp));
    }
    check_cp(channel)?;
    raw_process_fidelity(channel, target)
}

/// Like [`process_fidelity`] but accepts trace-decreasing maps such as a
/// leaky channel restricted to the computational subspace. Lost population
/// counts as error.
pub fn subspace_process_fidelity(channel: &Superoperator, target: &CMatrix) -> Result<f64> {
    let max_tr = hermitian_eigen(&channel.trace_operator())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if max_tr > 1.0 + 1e-8 {
        return Err(Error::NotTracePreserving(max_tr - 1.0));
    }
    check_cp(channel)?;
    raw_process_fidelity(channel, target)
}

pub fn unitary_process_fidelity(u: &CMatrix, target: &CMatrix) -> f64 {
    let d = u.nrows() as f64;
    (target.adjoint() * u).trace().norm_sqr() / (d * d)
}

/// `F_avg = (d F + 1) / (d + 1)`.
pub fn average_gate_fidelity(process_fidelity: f64, dim: usize) -> f64 {
    let d = dim as f64;
    (d * process_fidelity + 1.0) / (d + 1.0)
}

/// Precomputed scatter pattern for acting on a subset of sites.
#[derive(Debug, Clone)]
pub struct LocalIndexer {
    offsets: Vec<usize>,
    bases: Vec<usize>,
}

impl LocalIndexer {
    pub fn new(dims: &[usize], sites: &[usize]) -> Self {
        let n = dims.len();
        let mut strides = vec![1usize; n];
        for k in (0..n.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        let total: usize = dims.iter().product();
        let local_dims: Vec<usize> = sites.iter().map(|&s| dims[s]).collect();
        let local_total: usize = local_dims.iter().product();
        let offsets = (0..local_total)
            .map(|l| {
                let mut rem = l;
                let mut off = 0;
                for (k, &s) in sites.iter().enumerate().rev() {
                    off += (rem % local_dims[k]) * strides[s];
                    rem /= local_dims[k];
                }
                off
            })
            .collect();
        let bases = (0..total)
            .filter(|&idx| sites.iter().all(|&s| (idx / strides[s]) % dims[s] == 0))
            .collect();
        Self { offsets, bases }
    }

    pub fn apply(&self, v: &mut [C64], op: &CMatrix) {
        let m = self.offsets.len();
        let mut buf = vec![c64(0.0, 0.0); m];
        for &base in &self.bases {
            for (r, slot) in buf.iter_mut().enumerate() {
                let mut acc = c64(0.0, 0.0);
                for c in 0..m {
                    let a = op[(r, c)];
                    if a.re != 0.0 || a.im != 0.0 {
                        acc += a * v[base + self.offsets[c]];
                    }
                }
                *slot = acc;
            }
            for (r, val) in buf.iter().enumerate() {
                v[base + self.offsets[r]] = *val;
            }
        }
    }

    /// `sum_k K rho K^dag` for local Kraus operators.
    pub fn apply_kraus(&self, rho: &CMatrix, kraus: &[CMatrix]) -> CMatrix {
        let n = rho.nrows();
        let mut out = CMatrix::zeros(n, n);
        for k in kraus {
            let mut tmp = rho.clone();
            for col in tmp.as_mut_slice().chunks_mut(n) {
                self.apply(col, k);
            }
            let mut tmp = tmp.adjoint();
            for col in tmp.as_mut_slice().chunks_mut(n) {
                self.apply(col, k);
            }
            out += tmp.adjoint();
        }
        out
    }
}

/// One step of a [`ChannelCircuit`].
#[derive(Debug, Clone)]
pub enum Step {
    Full(CMatrix),
    Local { sites: Vec<usize>, kraus: Vec<CMatrix> },
}

/// Ordered list of unitaries and local channels on a register with mixed local dimensions.
#[derive(Debug, Clone)]
pub struct ChannelCircuit {
    dims: Vec<usize>,
    steps: Vec<Step>,
}

impl ChannelCircuit {
    pub fn new(dims: Vec<usize>) -> Self {
        Self { dims, steps: Vec::new() }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn push_full(&mut self, u: CMatrix) {
        self.steps.push(Step::Full(u));
    }

    pub fn push_local(&mut self, sites: Vec<usize>, kraus: Vec<CMatrix>) {
        self.steps.push(Step::Local { sites, kraus });
    }

    pub fn extend(&mut self, other: &ChannelCircuit) {
        self.steps.extend(other.steps.iter().cloned());
    }

    pub fn is_unitary(&self) -> bool {
        self.steps.iter().all(|s| match s {
            Step::Full(_) => true,
            Step::Local { kraus, .. } => kraus.len() == 1,
        })
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let mut rho = rho.clone();
        for step in &self.steps {
            rho = match step {
                Step::Full(u) => u * &rho * u.adjoint(),
                Step::Local { sites, kraus } => LocalIndexer::new(&self.dims, sites).apply_kraus(&rho, kraus),
            };
        }
        rho
    }

    /// Product of all steps; `None` if any step is not unitary.
    pub fn unitary(&self) -> Option<CMatrix> {
        if !self.is_unitary() {
            return None;
        }
        let d = self.dim();
        let mut u = CMatrix::identity(d, d);
        for step in &self.steps {
            match step {
                Step::Full(m) => u = m * u,
                Step::Local { sites, kraus } => {
                    let idx = LocalIndexer::new(&self.dims, sites);
                    for col in u.as_mut_slice().chunks_mut(d) {
                        idx.apply(col, &kraus[0]);
                    }
                }
            }
        }
        Some(u)
    }

    /// Superoperator restricted to the given input/output basis indices.
    pub fn superoperator_on(&self, indices: &[usize]) -> Superoperator {
        let d = self.dim();
        let q = indices.len();
        let mut m = CMatrix::zeros(q * q, q * q);
        for (jj, &j) in indices.iter().enumerate() {
            for (ii, &i) in indices.iter().enumerate() {
                let mut rho = CMatrix::zeros(d, d);
                rho[(i, j)] = c64(1.0, 0.0);
                let out = self.apply(&rho);
                for (bb, &b) in indices.iter().enumerate() {
                    for (aa, &a) in indices.iter().enumerate() {
                        m[(aa + bb * q, ii + jj * q)] = out[(a, b)];
                    }
                }
            }
        }
        Superoperator { dim: q, matrix: m }
    }

    pub fn superoperator(&self) -> Superoperator {
        let all: Vec<usize> = (0..self.dim()).collect();
        self.superoperator_on(&all)
    }

    /// Channel on the embedded qubit subspace; leaked population is dropped.
    pub fn restricted_superoperator(&self, emb: &ComputationalEmbedding) -> Superoperator {
        self.superoperator_on(emb.index_map())
    }
}

/// Serializable complex number, `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexPair(pub f64, pub f64);

impl From<C64> for ComplexPair {
    fn from(z: C64) -> Self {
        Self(z.re, z.im)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn omega() -> C64 {
        cis(2.0 * std::f64::consts::PI / 3.0)
    }

    #[test]
    fn kron_identity() {
        let i3 = CMatrix::identity(3, 3);
        assert_eq!(kron(&i3, &i3), CMatrix::identity(9, 9));
    }

    #[test]
    fn kron_diagonal_structure() {
        let w = omega();
        let d = CMatrix::from_diagonal(&CVector::from_vec(vec![c64(1.0, 0.0), w, w * w]));
        let k = kron(&d, &CMatrix::identity(3, 3));
        let expected = [1, 1, 1, 0, 0, 0, 0, 0, 0].iter().enumerate().map(|(i, _)| match i / 3 {
            0 => c64(1.0, 0.0),
            1 => w,
            _ => w * w,
        });
        for (i, e) in expected.enumerate() {
            assert!((k[(i, i)] - e).norm() < 1e-15);
        }
    }

    #[test]
    fn kron_acts_factorwise_on_product_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let a = random_unitary(3, &mut rng);
            let b = random_unitary(3, &mut rng);
            let x = CVector::from_fn(3, |_, _| c64(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let y = CVector::from_fn(3, |_, _| c64(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let xy = CMatrix::from_column_slice(9, 1, x.kronecker(&y).as_slice());
            let lhs = kron(&a, &b) * xy;
            let rhs = (&a * &x).kronecker(&(&b * &y));
            let dev = lhs.iter().zip(rhs.iter()).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
            assert!(dev < 1e-12);
        }
    }

    #[test]
    fn embed_identity_and_ccz() {
        let emb = ComputationalEmbedding::new(3);
        let id = embed_qubit_unitary(&CMatrix::identity(8, 8), &emb).unwrap();
        assert_eq!(id.matrix(), &CMatrix::identity(27, 27));

        let mut phases = [0.0; 8];
        phases[3] = std::f64::consts::PI;
        let u = UnitaryMatrix::diagonal(&phases);
        let big = embed_qubit_unitary(u.matrix(), &emb).unwrap();
        // |011> -> 0*9 + 1*3 + 1 = 4
        for i in 0..27 {
            let expected = if i == 4 { c64(-1.0, 0.0) } else { c64(1.0, 0.0) };
            assert!((big.matrix()[(i, i)] - expected).norm() < 1e-15);
        }
    }

    #[test]
    fn embed_then_restrict_round_trips() {
        let emb = ComputationalEmbedding::new(3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let u = random_unitary(8, &mut rng);
            let big = embed_qubit_unitary(&u, &emb).unwrap();
            assert!(unitarity_deviation(big.matrix()) < 1e-10);
            let r = restrict_to_computational(big.matrix(), &emb).unwrap();
            assert!(max_abs_diff(&r.block, &u) < 1e-12);
            assert!(r.leakage < 1e-12);
        }
    }

    #[test]
    fn embed_rejects_wrong_dimension() {
        let emb = ComputationalEmbedding::new(3);
        assert!(matches!(
            embed_qubit_unitary(&CMatrix::identity(4, 4), &emb),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn restrict_detects_swap_leakage() {
        let emb = ComputationalEmbedding::new(3);
        let mut u = CMatrix::identity(27, 27);
        // swap |001> (index 1) with |002> (index 2)
        u[(1, 1)] = c64(0.0, 0.0);
        u[(2, 2)] = c64(0.0, 0.0);
        u[(1, 2)] = c64(1.0, 0.0);
        u[(2, 1)] = c64(1.0, 0.0);
        let r = restrict_to_computational(&u, &emb).unwrap();
        assert!((r.column_leakage[1] - 1.0).abs() < 1e-15);
        assert!((r.leakage - 1.0).abs() < 1e-15);
        assert_eq!(r.column_leakage.iter().filter(|&&l| l > 0.0).count(), 1);
    }

    #[test]
    fn superoperator_choi_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_unitary(4, &mut rng);
        let s = Superoperator::from_unitary(&u).then(&Superoperator::depolarizing(4, 0.2));
        let back = Superoperator::from_choi(4, &s.choi());
        assert!(max_abs_diff(back.matrix(), s.matrix()) < 1e-14);
        let kraus = s.to_kraus(1e-14);
        let again = Superoperator::from_kraus(&kraus);
        assert!(max_abs_diff(again.matrix(), s.matrix()) < 1e-10);
    }

    #[test]
    fn depolarizing_fidelity_closed_form() {
        let p = 0.1;
        let s = Superoperator::depolarizing(8, p);
        let f = process_fidelity(&s, &CMatrix::identity(8, 8)).unwrap();
        assert!((f - ((1.0 - p) + p / 64.0)).abs() < 1e-12);
    }

    #[test]
    fn fidelity_is_global_phase_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_unitary(8, &mut rng);
        let s = Superoperator::from_unitary(&u).then(&Superoperator::depolarizing(8, 0.05));
        let f1 = process_fidelity(&s, &u).unwrap();
        let f2 = process_fidelity(&s, &(u.clone() * cis(0.77))).unwrap();
        assert!((f1 - f2).abs() < 1e-12);
    }

    #[test]
    fn non_cp_channel_rejected() {
        // transpose map is positive but not completely positive
        let d = 2;
        let mut m = CMatrix::zeros(4, 4);
        for i in 0..d {
            for j in 0..d {
                m[(j + i * d, i + j * d)] = c64(1.0, 0.0);
            }
        }
        let s = Superoperator::from_matrix(2, m).unwrap();
        assert!(matches!(
            process_fidelity(&s, &CMatrix::identity(2, 2)),
            Err(Error::NotCompletelyPositive(_))
        ));
    }

    #[test]
    fn non_tp_channel_rejected() {
        let s = Superoperator::from_kraus(&[CMatrix::identity(2, 2).scale(0.5)]);
        assert!(matches!(
            process_fidelity(&s, &CMatrix::identity(2, 2)),
            Err(Error::NotTracePreserving(_))
        ));
        assert!(subspace_process_fidelity(&s, &CMatrix::identity(2, 2)).is_ok());
    }

    #[test]
    fn local_indexer_matches_kron() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_unitary(3, &mut rng);
        let dims = [3, 3, 3];
        // op on middle site
        let full = kron_all(&[CMatrix::identity(3, 3), a.clone(), CMatrix::identity(3, 3)]);
        let mut v: Vec<C64> = (0..27).map(|i| c64(i as f64, -(i as f64) / 2.0)).collect();
        let expected = &full * CVector::from_column_slice(&v);
        LocalIndexer::new(&dims, &[1]).apply(&mut v, &a);
        for i in 0..27 {
            assert!((v[i] - expected[i]).norm() < 1e-12);
        }
        // two-site op on (2, 0): ordering of sites matters
        let b = random_unitary(9, &mut rng);
        let mut circ = ChannelCircuit::new(dims.to_vec());
        circ.push_local(vec![2, 0], vec![b.clone()]);
        let u = circ.unitary().unwrap();
        // check one matrix element: <q0 q1 q2| U |p0 p1 p2> = b[(q2 q0),(p2 p0)] delta(q1,p1)
        let el = |q: [usize; 3], p: [usize; 3]| u[(basis_index(&q, 3), basis_index(&p, 3))];
        assert!((el([1, 2, 0], [2, 2, 1]) - b[(0 * 3 + 1, 1 * 3 + 2)]).norm() < 1e-12);
        assert!(el([1, 0, 0], [2, 2, 1]).norm() < 1e-15);
    }

    #[test]
    fn density_matrix_validation() {
        let s = QutritRegisterState::basis(&[0, 1, 2]);
        let rho = QutritDensityMatrix::from_state(&s);
        assert!(QutritDensityMatrix::new(3, rho.matrix().clone()).is_ok());
        let bad = rho.matrix().scale(2.0);
        assert!(QutritDensityMatrix::new(3, bad).is_err());
    }
}
