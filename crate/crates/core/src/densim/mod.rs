//! Exact density-matrix simulation of small qubit registers.
//!
//! Qubit 0 is the most significant bit of a basis label. Time evolution
//! alternates gate layers with noise layers; the same single-qubit channel acts
//! on every qubit except those flagged as [`Role::Reference`].

mod circuit;

pub use circuit::{
    named_unitary, parse_circuit, permutation_unitary, Gate, GateLayer, PROTOCOL_MAX_ARITY,
    UNITARY_TOL,
};

use nalgebra::Matrix2;
use rand::Rng;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::channel::{ChannelError, SuperOp};
use crate::linalg::{eigh, eigvalsh, frobenius, haar_state, hermitian_part, r, random_density, CMatrix, CVector, C64, ZERO};

pub const MAX_QUBITS: usize = 12;
pub const TRACE_TOL: f64 = 1e-10;
/// Eigenvalues below `-PSD_TOL` are a hard error.
pub const PSD_TOL: f64 = 1e-9;
/// Eigenvalues below this are treated as zero inside logarithms.
pub const EIGEN_CLAMP: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("{n} qubits exceeds the simulator cap of {MAX_QUBITS}")]
    TooManyQubits { n: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("qubit {qubit} out of range for a {n}-qubit register")]
    TargetOutOfRange { qubit: usize, n: usize },
    #[error("gate targets overlap on qubit {qubit}")]
    OverlappingTargets { qubit: usize },
    #[error("gate matrix is not unitary")]
    NonUnitary,
    #[error("gate of arity {arity} has a {rows}x{cols} matrix")]
    GateShape { arity: usize, rows: usize, cols: usize },
    #[error("gate arity {arity} exceeds the limit {max}")]
    ArityExceeded { arity: usize, max: usize },
    #[error("register invariant violated: {0}")]
    InvariantViolated(String),
    #[error("subsets overlap")]
    OverlappingSubsets,
    #[error("subset is empty")]
    EmptySubset,
    #[error("qubit {0} is not a reference qubit")]
    MissingReference(usize),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("could not parse circuit: {0}")]
    Parse(String),
}

/// A density operator on `n` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n: usize,
    mat: CMatrix,
}

impl DensityMatrix {
    /// Validate trace, Hermiticity and positivity (to [`PSD_TOL`]).
    pub fn new(mat: CMatrix) -> Result<Self, SimError> {
        let d = Self::from_matrix_unchecked(mat)?;
        d.check_invariants()?;
        Ok(d)
    }

    /// Only the shape is checked.
    pub fn from_matrix_unchecked(mat: CMatrix) -> Result<Self, SimError> {
        let dim = mat.nrows();
        if mat.ncols() != dim || dim == 0 || !dim.is_power_of_two() {
            return Err(SimError::DimensionMismatch { expected: dim.next_power_of_two(), found: mat.ncols() });
        }
        let n = dim.trailing_zeros() as usize;
        if n > MAX_QUBITS {
            return Err(SimError::TooManyQubits { n });
        }
        Ok(Self { n, mat })
    }

    pub fn basis_state(n: usize, label: usize) -> Self {
        assert!(n <= MAX_QUBITS && label < 1 << n);
        let mut mat = CMatrix::zeros(1 << n, 1 << n);
        mat[(label, label)] = r(1.0);
        Self { n, mat }
    }

    pub fn zero_state(n: usize) -> Self {
        Self::basis_state(n, 0)
    }

    pub fn maximally_mixed(n: usize) -> Self {
        assert!(n <= MAX_QUBITS);
        let dim = 1usize << n;
        Self { n, mat: CMatrix::identity(dim, dim) * r(1.0 / dim as f64) }
    }

    /// `|ψ⟩⟨ψ|` for a normalized state vector.
    pub fn from_pure(psi: &CVector) -> Result<Self, SimError> {
        Self::new(psi * psi.adjoint())
    }

    pub fn from_qubit(m: &Matrix2<C64>) -> Self {
        Self { n: 1, mat: CMatrix::from_fn(2, 2, |i, j| m[(i, j)]) }
    }

    /// `(|00⟩ + |11⟩)/√2`.
    pub fn bell_pair() -> Self {
        let mut mat = CMatrix::zeros(4, 4);
        for i in [0, 3] {
            for j in [0, 3] {
                mat[(i, j)] = r(0.5);
            }
        }
        Self { n: 2, mat }
    }

    pub fn random_pure<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let psi = haar_state(1 << n, rng);
        Self { n, mat: &psi * psi.adjoint() }
    }

    pub fn random_mixed<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self { n, mat: random_density(1 << n, rng) }
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn trace(&self) -> C64 {
        crate::linalg::trace(&self.mat)
    }

    /// `self ⊗ other`, with `self` on the low-index qubits.
    pub fn tensor(&self, other: &DensityMatrix) -> Self {
        Self { n: self.n + other.n, mat: self.mat.kronecker(&other.mat) }
    }

    pub fn product(states: &[DensityMatrix]) -> Self {
        let mut it = states.iter();
        let first = it.next().expect("at least one factor").clone();
        it.fold(first, |acc, s| acc.tensor(s))
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eigvalsh(&self.mat)
    }

    pub fn check_invariants(&self) -> Result<(), SimError> {
        let tr = self.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(SimError::InvariantViolated(format!("trace {tr}")));
        }
        let herm = max_abs(&(&self.mat - self.mat.adjoint()));
        if herm > TRACE_TOL {
            return Err(SimError::InvariantViolated(format!("anti-Hermitian part {herm:.3e}")));
        }
        // ρ + tol·I is positive definite exactly when no eigenvalue is below
        // −tol; Cholesky decides that far faster than a full spectrum. The
        // complex factorization takes complex square roots of negative
        // pivots, so positivity shows up as a real positive diagonal.
        let shifted = hermitian_part(&self.mat) + CMatrix::identity(self.dim(), self.dim()) * r(PSD_TOL);
        let definite = shifted
            .cholesky()
            .is_some_and(|c| c.l_dirty().diagonal().iter().all(|z| z.re > 0.0 && z.im.abs() <= 1e-6 * z.re));
        if !definite {
            let min = self.eigenvalues().first().copied().unwrap_or(0.0);
            if min < -PSD_TOL {
                return Err(SimError::InvariantViolated(format!("eigenvalue {min:.3e}")));
            }
        }
        Ok(())
    }

    /// Von Neumann entropy in bits.
    pub fn entropy(&self) -> f64 {
        entropy_of_spectrum(&self.eigenvalues())
    }

    /// Reduced state on `keep`; the result lists the kept qubits in ascending order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self, SimError> {
        let mut keep: Vec<usize> = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        for &q in &keep {
            self.check_qubit(q)?;
        }
        if keep.len() == self.n {
            return Ok(self.clone());
        }
        let traced: Vec<usize> = (0..self.n).filter(|q| !keep.contains(q)).collect();
        let keep_off = offsets(self.n, &keep);
        let trace_off = offsets(self.n, &traced);
        let dk = keep_off.len();
        let mut out = CMatrix::zeros(dk, dk);
        for a in 0..dk {
            for b in 0..dk {
                let mut s = ZERO;
                for &t in &trace_off {
                    s += self.mat[(keep_off[a] + t, keep_off[b] + t)];
                }
                out[(a, b)] = s;
            }
        }
        Ok(Self { n: keep.len(), mat: out })
    }

    /// The 2×2 reduced state of one qubit.
    pub fn qubit(&self, q: usize) -> Result<Matrix2<C64>, SimError> {
        let m = self.partial_trace(&[q])?.mat;
        Ok(Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]))
    }

    /// `ρ ↦ U ρ U†` with `U` acting on `targets` (`targets[0]` most significant).
    pub fn apply_unitary(&mut self, u: &CMatrix, targets: &[usize]) -> Result<(), SimError> {
        for &q in targets {
            self.check_qubit(q)?;
        }
        if u.nrows() != 1 << targets.len() {
            return Err(SimError::DimensionMismatch { expected: 1 << targets.len(), found: u.nrows() });
        }
        apply_left(&mut self.mat, self.n, u, targets);
        apply_right_adjoint(&mut self.mat, self.n, u, targets);
        Ok(())
    }

    pub fn apply_gate(&mut self, g: &Gate) -> Result<(), SimError> {
        self.apply_unitary(&g.unitary, &g.targets)
    }

    pub fn apply_layer(&mut self, layer: &GateLayer) -> Result<(), SimError> {
        layer.check_targets(self.n)?;
        for g in layer.gates() {
            self.apply_gate(g)?;
        }
        Ok(())
    }

    /// Apply a single-qubit channel to qubit `q`.
    pub fn apply_channel(&mut self, c: &SuperOp, q: usize) -> Result<(), SimError> {
        self.check_qubit(q)?;
        if *c.ptm() == *SuperOp::identity().ptm() {
            return Ok(());
        }
        let nat = c.natural_matrix();
        let s = 1usize << (self.n - 1 - q);
        let bases: Vec<usize> = (0..self.dim()).filter(|i| i & s == 0).collect();
        for &rb in &bases {
            for &cb in &bases {
                let x = [
                    self.mat[(rb, cb)],
                    self.mat[(rb, cb + s)],
                    self.mat[(rb + s, cb)],
                    self.mat[(rb + s, cb + s)],
                ];
                let mut y = [ZERO; 4];
                for (i, yi) in y.iter_mut().enumerate() {
                    for (j, xj) in x.iter().enumerate() {
                        *yi += nat[(i, j)] * xj;
                    }
                }
                self.mat[(rb, cb)] = y[0];
                self.mat[(rb, cb + s)] = y[1];
                self.mat[(rb + s, cb)] = y[2];
                self.mat[(rb + s, cb + s)] = y[3];
            }
        }
        Ok(())
    }

    /// Completely dephase the qubits in `qubits` in the computational basis.
    pub fn dephase(&mut self, qubits: &[usize]) -> Result<(), SimError> {
        let mut mask = 0usize;
        for &q in qubits {
            self.check_qubit(q)?;
            mask |= 1 << (self.n - 1 - q);
        }
        let dim = self.dim();
        for j in 0..dim {
            for i in 0..dim {
                if (i ^ j) & mask != 0 {
                    self.mat[(i, j)] = ZERO;
                }
            }
        }
        Ok(())
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn fidelity_with_pure(&self, psi: &CVector) -> f64 {
        (psi.adjoint() * &self.mat * psi)[(0, 0)].re
    }

    /// Probability that qubit `q` reads `bit` in the computational basis.
    pub fn population(&self, q: usize, bit: bool) -> Result<f64, SimError> {
        self.check_qubit(q)?;
        let s = 1usize << (self.n - 1 - q);
        Ok((0..self.dim()).filter(|i| (i & s != 0) == bit).map(|i| self.mat[(i, i)].re).sum())
    }

    fn check_qubit(&self, q: usize) -> Result<(), SimError> {
        if q >= self.n {
            Err(SimError::TargetOutOfRange { qubit: q, n: self.n })
        } else {
            Ok(())
        }
    }
}

/// Serialized as `{"n": n, "re": rows, "im": rows}`.
impl Serialize for DensityMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            n: usize,
            re: Vec<Vec<f64>>,
            im: Vec<Vec<f64>>,
        }
        let dim = self.dim();
        let rows = |f: fn(&C64) -> f64| {
            (0..dim).map(|i| (0..dim).map(|j| f(&self.mat[(i, j)])).collect()).collect()
        };
        Repr { n: self.n, re: rows(|z| z.re), im: rows(|z| z.im) }.serialize(s)
    }
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `-Σ μ log₂ μ`, treating eigenvalues below [`EIGEN_CLAMP`] as zero.
pub fn entropy_of_spectrum(vals: &[f64]) -> f64 {
    vals.iter().filter(|&&v| v > EIGEN_CLAMP).map(|&v| -v * v.log2()).sum::<f64>().max(0.0)
}

/// Offset added to a base index for each local index over `qubits`
/// (`qubits[0]` most significant).
fn offsets(n: usize, qubits: &[usize]) -> Vec<usize> {
    let k = qubits.len();
    (0..1usize << k)
        .map(|a| {
            (0..k).filter(|m| a >> (k - 1 - m) & 1 == 1).map(|m| 1usize << (n - 1 - qubits[m])).sum()
        })
        .collect()
}

fn bases(n: usize, qubits: &[usize]) -> Vec<usize> {
    let mask: usize = qubits.iter().map(|&q| 1usize << (n - 1 - q)).sum();
    (0..1usize << n).filter(|i| i & mask == 0).collect()
}

/// `m ← (U on targets) · m`.
pub(crate) fn apply_left(m: &mut CMatrix, n: usize, u: &CMatrix, targets: &[usize]) {
    let off = offsets(n, targets);
    let bases = bases(n, targets);
    let k = off.len();
    let mut v = vec![ZERO; k];
    for col in 0..m.ncols() {
        for &b in &bases {
            for a in 0..k {
                v[a] = m[(b + off[a], col)];
            }
            for a in 0..k {
                let mut s = ZERO;
                for (l, vl) in v.iter().enumerate() {
                    s += u[(a, l)] * vl;
                }
                m[(b + off[a], col)] = s;
            }
        }
    }
}

/// `m ← m · (U on targets)†`.
fn apply_right_adjoint(m: &mut CMatrix, n: usize, u: &CMatrix, targets: &[usize]) {
    let off = offsets(n, targets);
    let bases = bases(n, targets);
    let k = off.len();
    let mut v = vec![ZERO; k];
    for row in 0..m.nrows() {
        for &b in &bases {
            for a in 0..k {
                v[a] = m[(row, b + off[a])];
            }
            for a in 0..k {
                let mut s = ZERO;
                for (l, vl) in v.iter().enumerate() {
                    s += u[(a, l)].conj() * vl;
                }
                m[(row, b + off[a])] = s;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Data,
    Ancilla,
    /// Noise-free reference system.
    Reference,
}

/// A register state together with the role of each qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct QRegister {
    rho: DensityMatrix,
    roles: Vec<Role>,
}

impl QRegister {
    pub fn new(rho: DensityMatrix, roles: Vec<Role>) -> Result<Self, SimError> {
        if roles.len() != rho.n_qubits() {
            return Err(SimError::DimensionMismatch { expected: rho.n_qubits(), found: roles.len() });
        }
        Ok(Self { rho, roles })
    }

    pub fn data(rho: DensityMatrix) -> Self {
        let roles = vec![Role::Data; rho.n_qubits()];
        Self { rho, roles }
    }

    pub fn state(&self) -> &DensityMatrix {
        &self.rho
    }

    pub fn state_mut(&mut self) -> &mut DensityMatrix {
        &mut self.rho
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn n_qubits(&self) -> usize {
        self.rho.n_qubits()
    }

    /// Qubits that see noise.
    pub fn noisy_qubits(&self) -> Vec<usize> {
        (0..self.n_qubits()).filter(|&q| self.roles[q] != Role::Reference).collect()
    }

    pub fn reference_qubits(&self) -> Vec<usize> {
        (0..self.n_qubits()).filter(|&q| self.roles[q] == Role::Reference).collect()
    }

    /// Apply the noise channel to every non-reference qubit.
    pub fn apply_noise(&mut self, noise: &NoiseLayer) -> Result<(), SimError> {
        for q in self.noisy_qubits() {
            self.rho.apply_channel(&noise.channel, q)?;
        }
        Ok(())
    }
}

/// The same single-qubit channel on every non-reference qubit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseLayer {
    pub channel: SuperOp,
}

impl NoiseLayer {
    pub fn new(channel: SuperOp) -> Self {
        Self { channel }
    }

    pub fn noiseless() -> Self {
        Self { channel: SuperOp::identity() }
    }
}

/// One time step: the gate layer, then the noise layer.
pub fn step(reg: &QRegister, layer: &GateLayer, noise: &NoiseLayer) -> Result<QRegister, SimError> {
    let mut out = reg.clone();
    out.rho.apply_layer(layer)?;
    out.apply_noise(noise)?;
    out.rho.check_invariants()?;
    Ok(out)
}

fn check_subset(reg: &QRegister, subset: &[usize]) -> Result<(), SimError> {
    if subset.is_empty() {
        return Err(SimError::EmptySubset);
    }
    for &q in subset {
        if q >= reg.n_qubits() {
            return Err(SimError::TargetOutOfRange { qubit: q, n: reg.n_qubits() });
        }
    }
    Ok(())
}

/// Entropy in bits of the reduced state on `subset`.
pub fn von_neumann_entropy(reg: &QRegister, subset: &[usize]) -> Result<f64, SimError> {
    check_subset(reg, subset)?;
    Ok(reg.rho.partial_trace(subset)?.entropy())
}

/// `S(A|B) = S(AB) − S(B)`.
pub fn conditional_entropy(reg: &QRegister, a: &[usize], b: &[usize]) -> Result<f64, SimError> {
    check_subset(reg, a)?;
    if a.iter().any(|q| b.contains(q)) {
        return Err(SimError::OverlappingSubsets);
    }
    let ab: Vec<usize> = a.iter().chain(b).copied().collect();
    let s_ab = reg.rho.partial_trace(&ab)?.entropy();
    let s_b = if b.is_empty() { 0.0 } else { reg.rho.partial_trace(b)?.entropy() };
    Ok(s_ab - s_b)
}

/// `n − S(ρ)` over the non-reference qubits.
pub fn information(reg: &QRegister) -> f64 {
    let qs = reg.noisy_qubits();
    if qs.is_empty() {
        return 0.0;
    }
    let s = reg.rho.partial_trace(&qs).expect("in range").entropy();
    qs.len() as f64 - s
}

/// Completely dephase every non-reference qubit.
pub fn dephase_all(reg: &QRegister) -> QRegister {
    let mut out = reg.clone();
    out.rho.dephase(&reg.noisy_qubits()).expect("in range");
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    One,
    Two,
}

/// Schatten 1-norm or Frobenius norm of `a − b`.
pub fn distance(a: &DensityMatrix, b: &DensityMatrix, norm: Norm) -> Result<f64, SimError> {
    if a.dim() != b.dim() {
        return Err(SimError::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    let d = &a.mat - &b.mat;
    Ok(match norm {
        Norm::One => crate::linalg::trace_norm_hermitian(&d),
        Norm::Two => frobenius(&d),
    })
}

/// `S(a‖b)` in bits; `f64::INFINITY` when the support of `a` is not inside
/// that of `b`.
pub fn relative_entropy(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64, SimError> {
    if a.dim() != b.dim() {
        return Err(SimError::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    let (vals, vecs) = eigh(&b.mat);
    let mut cross = 0.0;
    for (k, &mu) in vals.iter().enumerate() {
        let v = vecs.column(k);
        let weight = (v.adjoint() * &a.mat * v)[(0, 0)].re;
        if mu > EIGEN_CLAMP {
            cross += weight * mu.log2();
        } else if weight > 1e-10 {
            return Ok(f64::INFINITY);
        }
    }
    Ok((-a.entropy() - cross).max(0.0))
}

/// Apply `decoder` to a copy of the register, then return `⟨Φ⁺|ρ|Φ⁺⟩` on
/// (`system`, `reference`).
pub fn epr_fidelity(
    reg: &QRegister,
    decoder: &[GateLayer],
    system: usize,
    reference: usize,
) -> Result<f64, SimError> {
    if reference >= reg.n_qubits() || reg.roles[reference] != Role::Reference {
        return Err(SimError::MissingReference(reference));
    }
    if system == reference {
        return Err(SimError::OverlappingSubsets);
    }
    let mut rho = reg.rho.clone();
    for layer in decoder {
        rho.apply_layer(layer)?;
    }
    let pair = rho.partial_trace(&[system, reference])?.mat;
    Ok(0.5 * (pair[(0, 0)] + pair[(0, 3)] + pair[(3, 0)] + pair[(3, 3)]).re)
}
