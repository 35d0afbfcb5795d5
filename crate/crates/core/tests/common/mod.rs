#![allow(dead_code)]

use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qrefrig_core::channel::{kraus_to_superop, KrausSet, SuperOp};
use qrefrig_core::linalg::{haar_unitary, C64};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn qubit_unitary<G: Rng>(rng: &mut G) -> Matrix2<C64> {
    let u = haar_unitary(2, rng);
    Matrix2::from_fn(|i, j| u[(i, j)])
}

/// Random channel of Kraus rank at most `env` via a Haar-random dilation.
pub fn random_channel<G: Rng>(env: usize, rng: &mut G) -> SuperOp {
    let u = haar_unitary(2 * env, rng);
    let ops = (0..env).map(|e| Matrix2::<C64>::from_fn(|a, b| u[(env * a + e, env * b)])).collect();
    kraus_to_superop(&KrausSet::new(ops).expect("isometry"))
}

pub fn h2(p: f64) -> f64 {
    let t = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    t(p) + t(1.0 - p)
}
