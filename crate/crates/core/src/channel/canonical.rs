use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use super::{BlochVector, ChannelError, SuperOp, STRUCTURAL_TOL};
use crate::linalg::eigvalsh;

/// `C = U ∘ C′ ∘ V` where `C′` maps `w ↦ t + diag(λ) w`.
///
/// In Bloch coordinates the full channel acts as
/// `w ↦ U t + U diag(λ) V w`. `U` and `V` are proper rotations; a reflection
/// in the singular vectors is absorbed as a sign flip of one `λ` entry, so
/// `λ` may contain negative values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalForm {
    pub t: Vector3<f64>,
    pub lambda: Vector3<f64>,
    /// `V`, applied to the input first.
    pub pre_rot: Matrix3<f64>,
    /// `U`, applied to the output last.
    pub post_rot: Matrix3<f64>,
}

impl CanonicalForm {
    /// A form that is already diagonal (`U = V = I`).
    pub fn diagonal(t: Vector3<f64>, lambda: Vector3<f64>) -> Self {
        Self { t, lambda, pre_rot: Matrix3::identity(), post_rot: Matrix3::identity() }
    }

    pub fn shift(&self) -> Vector3<f64> {
        self.post_rot * self.t
    }

    pub fn block(&self) -> Matrix3<f64> {
        self.post_rot * Matrix3::from_diagonal(&self.lambda) * self.pre_rot
    }

    pub fn reconstruct(&self) -> SuperOp {
        SuperOp::from_affine(self.shift(), self.block())
    }

    pub fn is_unital(&self, tol: f64) -> bool {
        self.t.norm() <= tol
    }

    /// True when `V = U⁻¹`, i.e. the channel is a rotation-conjugate of its
    /// diagonal core.
    pub fn is_aligned(&self, tol: f64) -> bool {
        (self.pre_rot * self.post_rot - Matrix3::identity()).abs().max() <= tol
    }

    /// Output-frame direction of canonical axis `k`.
    pub fn axis(&self, k: usize) -> Vector3<f64> {
        self.post_rot.column(k).into_owned()
    }
}

/// Decompose a channel via a real SVD of its Bloch block.
pub fn canonical_form(c: &SuperOp) -> CanonicalForm {
    let shift = c.shift();
    let m = c.block();
    let off_diag = (0..3)
        .flat_map(|i| (0..3).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| m[(i, j)].abs())
        .fold(0.0, f64::max);
    if off_diag == 0.0 {
        return CanonicalForm::diagonal(shift, m.diagonal());
    }
    let svd = m.svd(true, true);
    let mut u = svd.u.expect("u requested");
    let mut v_t = svd.v_t.expect("v_t requested");
    let mut lambda = svd.singular_values;
    if u.determinant() < 0.0 {
        u.column_mut(2).neg_mut();
        lambda[2] = -lambda[2];
    }
    if v_t.determinant() < 0.0 {
        v_t.row_mut(2).neg_mut();
        lambda[2] = -lambda[2];
    }
    CanonicalForm { t: u.transpose() * shift, lambda, pre_rot: v_t, post_rot: u }
}

/// Complete-positivity verdict. Unital forms use the tetrahedron inequalities
/// `|λ_i ± λ_j| ≤ |1 ± λ_k|`; non-unital forms fall back to the Choi test.
pub fn cp_check(f: &CanonicalForm) -> bool {
    if !f.is_unital(STRUCTURAL_TOL) {
        return choi_positive(&f.reconstruct());
    }
    let l = f.lambda;
    if l.iter().any(|v| v.abs() > 1.0 + STRUCTURAL_TOL) {
        return false;
    }
    for (i, j, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
        if (l[i] + l[j]).abs() > (1.0 + l[k]).abs() + STRUCTURAL_TOL {
            return false;
        }
        if (l[i] - l[j]).abs() > (1.0 - l[k]).abs() + STRUCTURAL_TOL {
            return false;
        }
    }
    true
}

/// Minimum eigenvalue of the Choi matrix is ≥ -1e-10.
pub fn choi_positive(c: &SuperOp) -> bool {
    let choi = c.choi();
    let dynamic = nalgebra::DMatrix::from_fn(4, 4, |i, j| choi[(i, j)]);
    eigvalsh(&dynamic)[0] >= -STRUCTURAL_TOL
}

/// The unique fixed point of a strictly contractive channel.
///
/// Per axis in the canonical frame this is `t_i / (1 - λ_i)`, carried back to
/// the output frame by `U`. When `V ≠ U⁻¹` the per-axis formula no longer
/// describes the undressed channel, and the equivalent linear solve
/// `(I - M) w = U t` is used instead.
pub fn fixed_point(f: &CanonicalForm, tol: f64) -> Result<BlochVector, ChannelError> {
    if f.t.norm() <= tol {
        return Ok(BlochVector::center());
    }
    if let Some(axis) = (0..3).find(|&i| f.lambda[i].abs() >= 1.0 - tol) {
        return Err(ChannelError::NonContractiveAxis { axis, lambda: f.lambda[axis] });
    }
    let w = if f.is_aligned(1e-12) {
        let core = Vector3::from_fn(|i, _| f.t[i] / (1.0 - f.lambda[i]));
        f.post_rot * core
    } else {
        let system = Matrix3::identity() - f.block();
        system.lu().solve(&f.shift()).ok_or(ChannelError::NonContractiveAxis {
            axis: f.lambda.iamax(),
            lambda: f.lambda[f.lambda.iamax()],
        })?
    };
    BlochVector::from_vector(w)
}

/// Pauli error probabilities of a unital channel (in its canonical frame).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PauliChannelParams {
    pub p_x: f64,
    pub p_y: f64,
    pub p_z: f64,
}

impl PauliChannelParams {
    pub fn lambda(&self) -> Vector3<f64> {
        Vector3::new(
            1.0 - 2.0 * (self.p_y + self.p_z),
            1.0 - 2.0 * (self.p_x + self.p_z),
            1.0 - 2.0 * (self.p_x + self.p_y),
        )
    }

    pub fn to_superop(&self) -> SuperOp {
        let mut ptm = Matrix4::identity();
        let l = self.lambda();
        for i in 0..3 {
            ptm[(i + 1, i + 1)] = l[i];
        }
        SuperOp::from_affine(Vector3::zeros(), ptm.fixed_view::<3, 3>(1, 1).into_owned())
    }
}

pub fn pauli_probs(f: &CanonicalForm) -> Result<PauliChannelParams, ChannelError> {
    let shift_norm = f.t.norm();
    if shift_norm > STRUCTURAL_TOL {
        return Err(ChannelError::NonUnital { shift_norm });
    }
    let [lx, ly, lz] = [f.lambda[0], f.lambda[1], f.lambda[2]];
    let params = PauliChannelParams {
        p_x: (1.0 + lx - ly - lz) / 4.0,
        p_y: (1.0 - lx + ly - lz) / 4.0,
        p_z: (1.0 - lx - ly + lz) / 4.0,
    };
    let p_i = 1.0 - params.p_x - params.p_y - params.p_z;
    if [params.p_x, params.p_y, params.p_z, p_i].iter().any(|&p| p < -1e-12) {
        return Err(ChannelError::NotCompletelyPositive(format!(
            "negative Pauli probability in {params:?}"
        )));
    }
    Ok(params)
}
