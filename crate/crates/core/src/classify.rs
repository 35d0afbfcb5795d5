//! Three-way classification of non-unitary qubit channels by the limit of
//! repeated application: the center of the Bloch ball, a diameter, or an
//! off-center point.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{
    canonical_form, channel_distance_with, fixed_point, power, replacement_channel, BlochVector,
    CanonicalForm, ChannelError, DistanceOptions, SuperOp,
};
use crate::linalg::{binary_entropy, random_ball_point};

/// `|λ| ≥ 1 - CLASSIFICATION_TOL` counts as an uncontracted axis.
pub const CLASSIFICATION_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("channel is unitary; there is no noise to classify")]
    Unitary,
    #[error("{count} uncontracted axes on a non-unitary channel (not completely positive)")]
    Ambiguous { count: usize },
    #[error("channel is not strictly contractive (axis {axis}, |lambda| = {lambda})")]
    NotContractive { axis: usize, lambda: f64 },
    #[error("relaxation target must be positive and finite, got {0}")]
    InvalidTarget(f64),
    #[error("relaxation did not reach the target within 2^{0} steps")]
    TargetUnreachable(u32),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LimitSet {
    Point { point: [f64; 3] },
    Diameter { axis: [f64; 3] },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum ChannelClass {
    Depolarizing,
    Dephasing { axis: [f64; 3] },
    NonUnital { fixed_point: [f64; 3] },
}

impl ChannelClass {
    pub fn label(&self) -> &'static str {
        match self {
            ChannelClass::Depolarizing => "depolarizing",
            ChannelClass::Dephasing { .. } => "dephasing",
            ChannelClass::NonUnital { .. } => "non_unital",
        }
    }
}

fn uncontracted_axes(f: &CanonicalForm, tol: f64) -> Vec<usize> {
    (0..3).filter(|&k| f.lambda[k].abs() >= 1.0 - tol).collect()
}

pub fn limit_set(f: &CanonicalForm, tol: f64) -> Result<LimitSet, ClassifyError> {
    let fixed_axes = uncontracted_axes(f, tol);
    let unital = f.is_unital(tol);
    if unital && fixed_axes.len() == 3 {
        return Err(ClassifyError::Unitary);
    }
    if !unital {
        let p = fixed_point(f, tol)?;
        return Ok(LimitSet::Point { point: p.to_array() });
    }
    match fixed_axes.as_slice() {
        [] => Ok(LimitSet::Point { point: [0.0; 3] }),
        [k] => {
            let a = f.axis(*k);
            Ok(LimitSet::Diameter { axis: [a.x, a.y, a.z] })
        }
        more => Err(ClassifyError::Ambiguous { count: more.len() }),
    }
}

pub fn classify(c: &SuperOp, tol: f64) -> Result<ChannelClass, ClassifyError> {
    let f = canonical_form(c);
    Ok(match limit_set(&f, tol)? {
        LimitSet::Diameter { axis } => ChannelClass::Dephasing { axis },
        LimitSet::Point { point } if f.is_unital(tol) => {
            debug_assert_eq!(point, [0.0; 3]);
            ChannelClass::Depolarizing
        }
        LimitSet::Point { point } => ChannelClass::NonUnital { fixed_point: point },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxationReport {
    pub steps: u64,
    pub achieved_distance: f64,
    pub target: f64,
}

pub fn relaxation_time(c: &SuperOp, target: f64) -> Result<RelaxationReport, ClassifyError> {
    relaxation_time_with(c, target, &DistanceOptions::default())
}

/// Smallest `T` with `‖C^T − C_P‖ < target` (upper estimate), by doubling and
/// then bisection. The distance is non-increasing in `T` because
/// `C^{T+1} − C_P = (C^T − C_P) ∘ C`.
pub fn relaxation_time_with(
    c: &SuperOp,
    target: f64,
    opts: &DistanceOptions,
) -> Result<RelaxationReport, ClassifyError> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(ClassifyError::InvalidTarget(target));
    }
    let f = canonical_form(c);
    if let Some(&axis) = uncontracted_axes(&f, CLASSIFICATION_TOL).first() {
        return Err(ClassifyError::NotContractive { axis, lambda: f.lambda[axis] });
    }
    let cp = replacement_channel(&fixed_point(&f, CLASSIFICATION_TOL)?);
    let distance = |steps: u64| -> Result<f64, ClassifyError> {
        Ok(channel_distance_with(&power(c, steps), &cp, opts)?.upper)
    };

    let d0 = distance(0)?;
    if d0 < target {
        return Ok(RelaxationReport { steps: 0, achieved_distance: d0, target });
    }
    let mut failing = 0u64;
    let mut hi = 1u64;
    let mut d_hi = distance(hi)?;
    let mut doublings = 0;
    while d_hi >= target {
        failing = hi;
        doublings += 1;
        if doublings > 62 {
            return Err(ClassifyError::TargetUnreachable(62));
        }
        hi *= 2;
        d_hi = distance(hi)?;
    }
    while hi - failing > 1 {
        let mid = failing + (hi - failing) / 2;
        let d_mid = distance(mid)?;
        if d_mid < target {
            hi = mid;
            d_hi = d_mid;
        } else {
            failing = mid;
        }
    }
    Ok(RelaxationReport { steps: hi, achieved_distance: d_hi, target })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyBehavior {
    StrictlyIncreasing,
    NonDecreasing,
    CanDecrease,
}

fn bloch_entropy(w: &Vector3<f64>) -> f64 {
    binary_entropy((1.0 + w.norm().min(1.0)) / 2.0)
}

/// Empirical entropy response of a channel on single-qubit inputs.
///
/// The sample always contains the six cardinal pure states, the maximally
/// mixed state and the canonical-axis states of the channel itself, followed by
/// `samples` uniform draws from the Bloch ball.
pub fn entropy_behavior(c: &SuperOp, samples: usize, seed: u64) -> EntropyBehavior {
    const STEP_TOL: f64 = 1e-9;
    // States this close to maximal entropy are excluded from the strict test.
    const NEAR_MAXIMAL: f64 = 1e-6;

    let f = canonical_form(c);
    let mut inputs: Vec<Vector3<f64>> = vec![Vector3::zeros()];
    for k in 0..3 {
        let e = Vector3::from_fn(|i, _| if i == k { 1.0 } else { 0.0 });
        let pre = f.pre_rot.row(k).transpose();
        let post = f.axis(k);
        inputs.extend([e, -e, pre, -pre, post, -post]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        inputs.push(Vector3::from(random_ball_point(&mut rng)));
    }

    let mut strictly = true;
    for w in inputs {
        let before = bloch_entropy(&w);
        let after = bloch_entropy(&c.apply_bloch(&w));
        if before - after > STEP_TOL {
            return EntropyBehavior::CanDecrease;
        }
        if before < 1.0 - NEAR_MAXIMAL && after - before <= STEP_TOL {
            strictly = false;
        }
    }
    if strictly {
        EntropyBehavior::StrictlyIncreasing
    } else {
        EntropyBehavior::NonDecreasing
    }
}

/// Bloch-ball entropy witness: `S(C(I/2))` in bits.
pub fn entropy_of_image_of_center(c: &SuperOp) -> f64 {
    bloch_entropy(&c.apply_bloch(&Vector3::zeros()))
}

/// Convenience: fixed point of the channel if it is strictly contractive.
pub fn channel_fixed_point(c: &SuperOp) -> Result<BlochVector, ClassifyError> {
    Ok(fixed_point(&canonical_form(c), CLASSIFICATION_TOL)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hadamard2, paulis};
    use approx::assert_abs_diff_eq;

    const TOL: f64 = CLASSIFICATION_TOL;

    #[test]
    fn limit_sets_of_named_channels() {
        let f = canonical_form(&SuperOp::depolarizing(0.1).unwrap());
        assert_eq!(limit_set(&f, TOL).unwrap(), LimitSet::Point { point: [0.0; 3] });
        let f = canonical_form(&SuperOp::dephasing(0.1).unwrap());
        assert_eq!(limit_set(&f, TOL).unwrap(), LimitSet::Diameter { axis: [0.0, 0.0, 1.0] });
        let f = canonical_form(&SuperOp::amplitude_damping(0.1).unwrap());
        match limit_set(&f, TOL).unwrap() {
            LimitSet::Point { point } => {
                assert_abs_diff_eq!(point[2], 1.0, epsilon = 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unitary_and_ambiguous_are_rejected() {
        let z = SuperOp::unitary(&paulis()[3]).unwrap();
        assert_eq!(classify(&z, TOL), Err(ClassifyError::Unitary));
        assert_eq!(classify(&SuperOp::identity(), TOL), Err(ClassifyError::Unitary));
        let bad = CanonicalForm::diagonal(Vector3::zeros(), Vector3::new(1.0, 1.0, 0.5));
        assert_eq!(limit_set(&bad, TOL), Err(ClassifyError::Ambiguous { count: 2 }));
    }

    #[test]
    fn rotated_dephasing_reports_x_axis() {
        let h = SuperOp::unitary(&hadamard2()).unwrap();
        let c = h.compose(&SuperOp::dephasing(0.1).unwrap()).compose(&h);
        match classify(&c, TOL).unwrap() {
            ChannelClass::Dephasing { axis } => {
                assert_abs_diff_eq!(axis[0].abs(), 1.0, epsilon = 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn asymmetric_pauli_channel_is_depolarizing_class() {
        let c = SuperOp::pauli(0.01, 0.02, 0.03).unwrap();
        assert_eq!(classify(&c, TOL).unwrap(), ChannelClass::Depolarizing);
    }

    #[test]
    fn dephasing_composed_with_pi_rotation_stays_dephasing_class() {
        let c = SuperOp::unitary(&paulis()[1]).unwrap().compose(&SuperOp::dephasing(0.1).unwrap());
        assert!(matches!(classify(&c, TOL).unwrap(), ChannelClass::Dephasing { .. }));
    }

    #[test]
    fn relaxation_of_replacement_channel_is_one_step() {
        let p = BlochVector::new(0.0, 0.2, 0.5).unwrap();
        // C_P is non-unital and contractive; one application lands on C_P.
        let cp = replacement_channel(&p);
        let rep = relaxation_time(&cp, 1e-6).unwrap();
        assert_eq!(rep.steps, 1);
        assert_eq!(rep.achieved_distance, 0.0);
    }

    #[test]
    fn relaxation_rejects_non_contractive() {
        let c = SuperOp::dephasing(0.1).unwrap();
        assert!(matches!(relaxation_time(&c, 1e-3), Err(ClassifyError::NotContractive { .. })));
        let ad = SuperOp::amplitude_damping(0.1).unwrap();
        assert!(matches!(relaxation_time(&ad, 0.0), Err(ClassifyError::InvalidTarget(_))));
    }

    #[test]
    fn relaxation_is_minimal() {
        let c = SuperOp::amplitude_damping(0.36).unwrap();
        let cp = replacement_channel(&channel_fixed_point(&c).unwrap());
        let rep = relaxation_time(&c, 1e-3).unwrap();
        assert!(rep.achieved_distance < 1e-3);
        let before = crate::channel::channel_distance(&power(&c, rep.steps - 1), &cp).unwrap();
        assert!(before.upper >= 1e-3);
    }

    #[test]
    fn entropy_taxonomy() {
        let ad = SuperOp::amplitude_damping(0.1).unwrap();
        assert_eq!(entropy_behavior(&ad, 200, 0), EntropyBehavior::CanDecrease);
        assert_abs_diff_eq!(entropy_of_image_of_center(&ad), binary_entropy(0.55), epsilon = 1e-12);
        let deph = SuperOp::dephasing(0.1).unwrap();
        assert_eq!(entropy_behavior(&deph, 200, 0), EntropyBehavior::NonDecreasing);
        let dep = SuperOp::depolarizing(0.1).unwrap();
        assert_eq!(entropy_behavior(&dep, 200, 0), EntropyBehavior::StrictlyIncreasing);
    }
}
