//! Single-qubit channels in Kraus, Pauli-transfer-matrix and canonical
//! (shift + diagonal scaling between two rotations) form.
//!
//! The PTM convention is `R[i][j] = tr[σ_i C(σ_j)] / 2` over the Pauli basis
//! `(I, X, Y, Z)`. For a trace-preserving channel the first row is
//! `(1, 0, 0, 0)`, the lower-left column is the Bloch shift and the lower-right
//! 3×3 block acts linearly on Bloch vectors: `w ↦ shift + block · w`.

mod canonical;
mod distance;
pub mod io;

pub use canonical::{
    canonical_form, choi_positive, cp_check, fixed_point, pauli_probs, CanonicalForm,
    PauliChannelParams,
};
pub use distance::{channel_distance, channel_distance_with, DistanceEstimate, DistanceOptions};

use nalgebra::{Matrix2, Matrix3, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{paulis, r, C64, ONE, ZERO};

/// Structural tolerance for trace preservation and reconstruction checks.
pub const STRUCTURAL_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("channel is not trace preserving (deviation {deviation:.3e})")]
    NotTracePreserving { deviation: f64 },
    #[error("Bloch vector has norm {norm} > 1")]
    InvalidBlochVector { norm: f64 },
    #[error("non-contractive axis {axis}: |lambda| = {lambda} with nonzero shift")]
    NonContractiveAxis { axis: usize, lambda: f64 },
    #[error("operation requires a unital channel (|t| = {shift_norm:.3e})")]
    NonUnital { shift_norm: f64 },
    #[error("channel is not completely positive: {0}")]
    NotCompletelyPositive(String),
    #[error("distance refinement did not stabilize within {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("invalid Kraus set: {0}")]
    InvalidKraus(String),
    #[error("could not parse channel description: {0}")]
    Parse(String),
}

/// A qubit state as a real 3-vector inside the closed unit ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector(Vector3<f64>);

impl BlochVector {
    pub const NORM_TOL: f64 = 1e-12;

    pub fn new(x: f64, y: f64, z: f64) -> Result<Self, ChannelError> {
        Self::from_vector(Vector3::new(x, y, z))
    }

    pub fn from_vector(w: Vector3<f64>) -> Result<Self, ChannelError> {
        let norm = w.norm();
        if !norm.is_finite() || norm > 1.0 + Self::NORM_TOL {
            return Err(ChannelError::InvalidBlochVector { norm });
        }
        Ok(Self(w))
    }

    pub fn center() -> Self {
        Self(Vector3::zeros())
    }

    pub fn vector(&self) -> &Vector3<f64> {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.0.x, self.0.y, self.0.z]
    }

    /// `(I + w·σ)/2`.
    pub fn density(&self) -> Matrix2<C64> {
        let [_, x, y, z] = paulis();
        (Matrix2::identity() + x * r(self.0.x) + y * r(self.0.y) + z * r(self.0.z)) * r(0.5)
    }

    /// Bloch vector of a 2×2 density matrix (no validation of positivity).
    pub fn from_density(rho: &Matrix2<C64>) -> Self {
        let [_, x, y, z] = paulis();
        let comp = |p: &Matrix2<C64>| (p * rho).trace().re;
        Self(Vector3::new(comp(&x), comp(&y), comp(&z)))
    }
}

/// A set of 2×2 Kraus operators satisfying `Σ A† A = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausSet {
    ops: Vec<Matrix2<C64>>,
}

impl KrausSet {
    pub fn new(ops: Vec<Matrix2<C64>>) -> Result<Self, ChannelError> {
        if ops.is_empty() {
            return Err(ChannelError::InvalidKraus("empty Kraus set".into()));
        }
        let sum: Matrix2<C64> = ops.iter().map(|a| a.adjoint() * a).sum();
        let deviation = (sum - Matrix2::identity()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if !(deviation <= STRUCTURAL_TOL) {
            return Err(ChannelError::NotTracePreserving { deviation });
        }
        Ok(Self { ops })
    }

    pub fn ops(&self) -> &[Matrix2<C64>] {
        &self.ops
    }

    pub fn identity() -> Self {
        Self { ops: vec![Matrix2::identity()] }
    }

    pub fn unitary(u: Matrix2<C64>) -> Result<Self, ChannelError> {
        Self::new(vec![u])
    }

    /// `ρ ↦ (1-p)ρ + p ZρZ`.
    pub fn dephasing(p: f64) -> Result<Self, ChannelError> {
        check_probability(p)?;
        let [id, _, _, z] = paulis();
        Self::new(vec![id * r((1.0 - p).sqrt()), z * r(p.sqrt())])
    }

    /// `ρ ↦ (1-p)ρ + (p/3)(XρX + YρY + ZρZ)`.
    pub fn depolarizing(p: f64) -> Result<Self, ChannelError> {
        Self::pauli(p / 3.0, p / 3.0, p / 3.0)
    }

    pub fn pauli(px: f64, py: f64, pz: f64) -> Result<Self, ChannelError> {
        for p in [px, py, pz, px + py + pz] {
            check_probability(p)?;
        }
        let [id, x, y, z] = paulis();
        Self::new(vec![
            id * r((1.0 - px - py - pz).sqrt()),
            x * r(px.sqrt()),
            y * r(py.sqrt()),
            z * r(pz.sqrt()),
        ])
    }

    /// Decay `|1⟩ → |0⟩` with probability `p`.
    pub fn amplitude_damping(p: f64) -> Result<Self, ChannelError> {
        check_probability(p)?;
        Self::new(vec![
            Matrix2::new(ONE, ZERO, ZERO, r((1.0 - p).sqrt())),
            Matrix2::new(ZERO, r(p.sqrt()), ZERO, ZERO),
        ])
    }

    /// Amplitude damping with rate `gamma` toward a thermal state whose
    /// excited population is `excited`; the fixed point has Bloch z = 1 - 2·excited.
    pub fn generalized_amplitude_damping(gamma: f64, excited: f64) -> Result<Self, ChannelError> {
        check_probability(gamma)?;
        check_probability(excited)?;
        let g = (1.0 - excited).sqrt();
        let e = excited.sqrt();
        Self::new(vec![
            Matrix2::new(ONE, ZERO, ZERO, r((1.0 - gamma).sqrt())) * r(g),
            Matrix2::new(ZERO, r(gamma.sqrt()), ZERO, ZERO) * r(g),
            Matrix2::new(r((1.0 - gamma).sqrt()), ZERO, ZERO, ONE) * r(e),
            Matrix2::new(ZERO, ZERO, r(gamma.sqrt()), ZERO) * r(e),
        ])
    }
}

fn check_probability(p: f64) -> Result<(), ChannelError> {
    if (-1e-15..=1.0 + 1e-15).contains(&p) {
        Ok(())
    } else {
        Err(ChannelError::InvalidKraus(format!("probability {p} outside [0, 1]")))
    }
}

/// A trace-preserving qubit map as its 4×4 real Pauli transfer matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuperOp {
    ptm: Matrix4<f64>,
}

impl SuperOp {
    pub fn from_ptm(ptm: Matrix4<f64>) -> Result<Self, ChannelError> {
        if ptm.iter().any(|v| !v.is_finite()) {
            return Err(ChannelError::Parse("non-finite PTM entry".into()));
        }
        let deviation = (ptm[(0, 0)] - 1.0)
            .abs()
            .max(ptm[(0, 1)].abs())
            .max(ptm[(0, 2)].abs())
            .max(ptm[(0, 3)].abs());
        if deviation > STRUCTURAL_TOL {
            return Err(ChannelError::NotTracePreserving { deviation });
        }
        let mut ptm = ptm;
        ptm[(0, 0)] = 1.0;
        ptm[(0, 1)] = 0.0;
        ptm[(0, 2)] = 0.0;
        ptm[(0, 3)] = 0.0;
        Ok(Self { ptm })
    }

    /// Build from the affine Bloch action `w ↦ shift + block·w`.
    pub fn from_affine(shift: Vector3<f64>, block: Matrix3<f64>) -> Self {
        let mut ptm = Matrix4::zeros();
        ptm[(0, 0)] = 1.0;
        for i in 0..3 {
            ptm[(i + 1, 0)] = shift[i];
            for j in 0..3 {
                ptm[(i + 1, j + 1)] = block[(i, j)];
            }
        }
        Self { ptm }
    }

    pub fn identity() -> Self {
        Self { ptm: Matrix4::identity() }
    }

    pub fn ptm(&self) -> &Matrix4<f64> {
        &self.ptm
    }

    pub fn shift(&self) -> Vector3<f64> {
        Vector3::new(self.ptm[(1, 0)], self.ptm[(2, 0)], self.ptm[(3, 0)])
    }

    pub fn block(&self) -> Matrix3<f64> {
        self.ptm.fixed_view::<3, 3>(1, 1).into_owned()
    }

    pub fn unitary(u: &Matrix2<C64>) -> Result<Self, ChannelError> {
        Ok(kraus_to_superop(&KrausSet::unitary(*u)?))
    }

    pub fn dephasing(p: f64) -> Result<Self, ChannelError> {
        Ok(kraus_to_superop(&KrausSet::dephasing(p)?))
    }

    pub fn depolarizing(p: f64) -> Result<Self, ChannelError> {
        Ok(kraus_to_superop(&KrausSet::depolarizing(p)?))
    }

    pub fn pauli(px: f64, py: f64, pz: f64) -> Result<Self, ChannelError> {
        Ok(kraus_to_superop(&KrausSet::pauli(px, py, pz)?))
    }

    pub fn amplitude_damping(p: f64) -> Result<Self, ChannelError> {
        Ok(kraus_to_superop(&KrausSet::amplitude_damping(p)?))
    }

    pub fn generalized_amplitude_damping(gamma: f64, excited: f64) -> Result<Self, ChannelError> {
        Ok(kraus_to_superop(&KrausSet::generalized_amplitude_damping(gamma, excited)?))
    }

    /// The transpose map `ρ ↦ ρᵀ`: positive and trace preserving but not CP.
    pub fn transpose_map() -> Self {
        Self { ptm: Matrix4::from_diagonal(&Vector4::new(1.0, 1.0, -1.0, 1.0)) }
    }

    pub fn apply_bloch(&self, w: &Vector3<f64>) -> Vector3<f64> {
        self.shift() + self.block() * w
    }

    /// Linear extension of the map to an arbitrary 2×2 operator.
    pub fn apply_operator(&self, m: &Matrix2<C64>) -> Matrix2<C64> {
        let basis = paulis();
        let coeffs: [C64; 4] = std::array::from_fn(|j| (basis[j] * m).trace() * r(0.5));
        let mut out = Matrix2::zeros();
        for i in 0..4 {
            let mut d = ZERO;
            for (j, cj) in coeffs.iter().enumerate() {
                d += r(self.ptm[(i, j)]) * cj;
            }
            out += basis[i] * d;
        }
        out
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn compose(&self, first: &SuperOp) -> SuperOp {
        SuperOp { ptm: self.ptm * first.ptm }
    }

    /// `next ∘ self`.
    pub fn then(&self, next: &SuperOp) -> SuperOp {
        next.compose(self)
    }

    /// Action on row-major `vec(B) = (B00, B01, B10, B11)`.
    pub fn natural_matrix(&self) -> Matrix4<C64> {
        let mut out = Matrix4::zeros();
        for col in 0..4 {
            let mut e = Matrix2::zeros();
            e[(col / 2, col % 2)] = ONE;
            let img = self.apply_operator(&e);
            for row in 0..4 {
                out[(row, col)] = img[(row / 2, row % 2)];
            }
        }
        out
    }

    /// Unnormalized Choi matrix `Σ_ij |i⟩⟨j| ⊗ C(|i⟩⟨j|)` (input factor first).
    pub fn choi(&self) -> Matrix4<C64> {
        let mut out = Matrix4::zeros();
        for i in 0..2 {
            for j in 0..2 {
                let mut e = Matrix2::zeros();
                e[(i, j)] = ONE;
                let img = self.apply_operator(&e);
                for k in 0..2 {
                    for l in 0..2 {
                        out[(2 * i + k, 2 * j + l)] = img[(k, l)];
                    }
                }
            }
        }
        out
    }

    /// Largest output Bloch norm over all pure inputs, `max_{|w|=1} |t + M w|`.
    ///
    /// Solved exactly as a trust-region subproblem on the sphere.
    pub fn max_output_norm(&self) -> f64 {
        let t = self.shift();
        let m = self.block();
        let a = m.transpose() * m;
        let b = m.transpose() * t;
        let eig = a.symmetric_eigen();
        let q = eig.eigenvectors;
        let lam = eig.eigenvalues;
        let bp = q.transpose() * b;
        let value = |w: &Vector3<f64>| (t + m * w).norm();

        let top = lam.imax();
        let lmax = lam[top];
        // w(mu) = -Σ bp_i / (lam_i - mu) e_i for mu > lmax; |w| decreases in mu.
        let norm_at = |mu: f64| {
            (0..3).map(|i| (bp[i] / (lam[i] - mu)).powi(2)).sum::<f64>().sqrt()
        };
        let w_at = |mu: f64| {
            let coords = Vector3::from_fn(|i, _| -bp[i] / (lam[i] - mu));
            q * coords
        };
        let mut candidates: Vec<Vector3<f64>> = Vec::new();
        let degenerate = bp[top].abs() < 1e-14;
        if !degenerate || norm_at(lmax + 1e-12) > 1.0 {
            let mut lo = lmax + 1e-15;
            let mut hi = lmax + b.norm() + 1.0;
            while norm_at(hi) > 1.0 {
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if norm_at(mid) > 1.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let w = w_at(hi);
            candidates.push(w / w.norm().max(1e-300));
        }
        // Hard case (and a safety net): complete along the top eigenvector.
        let mut partial = Vector3::zeros();
        for i in 0..3 {
            if i != top && (lam[i] - lmax).abs() > 1e-14 {
                partial += q.column(i) * (-bp[i] / (lam[i] - lmax));
            }
        }
        let rem = (1.0 - partial.norm_squared()).max(0.0).sqrt();
        let e = q.column(top).into_owned();
        candidates.push(partial + e * rem);
        candidates.push(partial - e * rem);
        for i in 0..3 {
            let ei = q.column(i).into_owned();
            candidates.push(ei);
            candidates.push(-ei);
        }
        candidates
            .iter()
            .filter(|w| w.norm() > 0.0)
            .map(|w| value(&(w / w.norm())))
            .fold(0.0, f64::max)
    }

    /// Positivity on single-qubit inputs: every Bloch vector stays in the ball.
    pub fn is_positive(&self, tol: f64) -> bool {
        self.max_output_norm() <= 1.0 + tol
    }
}

/// `R[i][j] = ½ tr[σ_i Σ_k A_k σ_j A_k†]`.
pub fn kraus_to_superop(k: &KrausSet) -> SuperOp {
    let basis = paulis();
    let mut ptm = Matrix4::zeros();
    // Trace preservation is validated on construction; pin the first row so
    // round-off does not grow under long powers.
    ptm[(0, 0)] = 1.0;
    for j in 0..4 {
        let img: Matrix2<C64> = k.ops().iter().map(|a| a * basis[j] * a.adjoint()).sum();
        for i in 1..4 {
            ptm[(i, j)] = 0.5 * (basis[i] * img).trace().re;
        }
    }
    SuperOp::from_ptm(ptm).expect("Kraus sets are validated as trace preserving")
}

/// `k`-fold composition; `power(c, 0)` is the identity.
pub fn power(c: &SuperOp, k: u64) -> SuperOp {
    let mut result = Matrix4::identity();
    let mut base = c.ptm;
    let mut k = k;
    while k > 0 {
        if k & 1 == 1 {
            result = base * result;
        }
        base = base * base;
        k >>= 1;
    }
    SuperOp { ptm: result }
}

/// The channel that discards its input and prepares `p`.
pub fn replacement_channel(p: &BlochVector) -> SuperOp {
    SuperOp::from_affine(*p.vector(), Matrix3::zeros())
}
