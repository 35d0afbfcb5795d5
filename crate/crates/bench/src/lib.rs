//! Fixtures shared by the benchmarks.

use qrefrig_core::channel::{kraus_to_superop, KrausSet, SuperOp};
use qrefrig_core::densim::{DensityMatrix, Gate, GateLayer};
use qrefrig_core::linalg::{haar_unitary, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random channel from a Haar-random Stinespring dilation with `env` Kraus
/// operators.
pub fn random_channel(env: usize, seed: u64) -> SuperOp {
    let u = haar_unitary(2 * env, &mut rng(seed));
    let ops = (0..env)
        .map(|e| nalgebra::Matrix2::<C64>::from_fn(|a, b| u[(env * a + e, env * b)]))
        .collect();
    kraus_to_superop(&KrausSet::new(ops).expect("isometry columns"))
}

pub fn random_state(n: usize, seed: u64) -> DensityMatrix {
    DensityMatrix::random_mixed(n, &mut rng(seed))
}

/// Brickwork layer of Haar two-qubit gates on `n` qubits.
pub fn brickwork(n: usize, offset: usize, seed: u64) -> GateLayer {
    let mut g = rng(seed);
    let gates = (offset..n.saturating_sub(1))
        .step_by(2)
        .map(|q| Gate::new(haar_unitary(4, &mut g), vec![q, q + 1]).expect("unitary"))
        .collect();
    GateLayer::new(gates).expect("disjoint targets")
}
