//! Single-shot algorithmic cooling.
//!
//! `R` qubits, each in the fixed point `P` of the noise, enter a reversible
//! circuit that permutes computational basis states so the `2^{R-1}` most
//! likely strings all carry a leading 0. Qubit 0 of the output is the reset
//! qubit; qubits `1..R` are waste.
//!
//! The permutation is compiled into stages of mixed-polarity multi-controlled
//! NOT gates, one gate per stage. Each stage occupies one location per qubit,
//! so `F = max(stages, 1) · R`.

use nalgebra::{Matrix2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{channel_distance, BlochVector, ChannelError, SuperOp};
use crate::densim::{permutation_unitary, distance, DensityMatrix, Gate, GateLayer, Norm, SimError};
use crate::linalg::{c, r, to_dynamic, C64, ZERO};

/// Largest block size considered by [`choose_r`].
pub const MAX_BLOCK: usize = 1000;
/// Largest block size that can be simulated or compiled.
pub const MAX_SIMULATED_BLOCK: usize = 10;
/// Relative slack allowed on the noisy-run bound for estimator looseness.
pub const BOUND_SLACK: f64 = 0.10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FridgeError {
    #[error("no cooling possible: bias q = {q} (fixed point at or past the center)")]
    Unreachable { q: f64 },
    #[error("invalid bias q = {0}")]
    InvalidBias(f64),
    #[error("invalid 1-norm target {0}")]
    InvalidTarget(f64),
    #[error("no block size up to {MAX_BLOCK} reaches the target")]
    BlockTooLarge,
    #[error("block size {0} is too large to simulate")]
    TooLargeToSimulate(usize),
    #[error("input has {found} qubits, expected {expected}")]
    Arity { expected: usize, found: usize },
    #[error("noisy reset distance {observed} exceeds the bound {bound}")]
    BoundViolated { observed: f64, bound: f64 },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

fn check_bias(q: f64) -> Result<(), FridgeError> {
    if q.is_nan() || q < 0.0 {
        Err(FridgeError::InvalidBias(q))
    } else if q >= 0.5 {
        Err(FridgeError::Unreachable { q })
    } else {
        Ok(())
    }
}

/// Probability of each `R`-bit label when every bit is 1 with probability `q`.
pub fn product_probabilities(q: f64, r_block: usize) -> Vec<f64> {
    (0..1usize << r_block)
        .map(|label| {
            let k = label.count_ones() as i32;
            q.powi(k) * (1.0 - q).powi(r_block as i32 - k)
        })
        .collect()
}

/// Total probability of the `2^{R-1}` most likely labels.
///
/// Strings with fewer ones are more likely when `q < 1/2`, so the sum runs
/// over Hamming weights in increasing order.
pub fn top_mass(q: f64, r_block: usize) -> f64 {
    assert!(r_block >= 1);
    if q == 0.0 {
        return 1.0;
    }
    let (lq, lp) = (q.ln(), (1.0 - q).ln());
    let mut remaining = 2f64.powi(r_block as i32 - 1);
    let mut ln_binom: f64 = 0.0;
    let mut mass: f64 = 0.0;
    for k in 0..=r_block {
        if remaining <= 0.0 {
            break;
        }
        let count = ln_binom.exp().round();
        let take = count.min(remaining);
        mass += take * (k as f64 * lq + (r_block - k) as f64 * lp).exp();
        remaining -= take;
        ln_binom += ((r_block - k) as f64).ln() - ((k + 1) as f64).ln();
    }
    mass.min(1.0)
}

/// Minimal block size with `2(1 − top_mass(q, R)) < eps2`.
pub fn choose_r(q: f64, eps2: f64) -> Result<usize, FridgeError> {
    check_bias(q)?;
    if !(eps2 > 0.0) {
        return Err(FridgeError::InvalidTarget(eps2));
    }
    (1..=MAX_BLOCK)
        .find(|&r| 2.0 * (1.0 - top_mass(q, r)) < eps2)
        .ok_or(FridgeError::BlockTooLarge)
}

/// An immutable refrigerator design for one block size.
#[derive(Debug, Clone, PartialEq)]
pub struct FridgeSpec {
    pub q: f64,
    pub r_block: usize,
    /// `permutation[label]` is the output label of basis state `label`.
    pub permutation: Vec<usize>,
    /// Single-qubit unitary taking the fixed point to the +z hemisphere.
    pub pre_rotation: Matrix2<C64>,
    /// Compiled circuit, one gate layer per stage.
    pub stages: Vec<GateLayer>,
    pub f_count: usize,
}

impl FridgeSpec {
    pub fn locations(&self) -> usize {
        self.f_count
    }

    /// The permutation as a 0/1 unitary on `R` qubits.
    pub fn permutation_unitary(&self) -> crate::linalg::CMatrix {
        permutation_unitary(&self.permutation)
    }

    /// The fixed point in the rotated frame, `diag(1 − q, q)`.
    pub fn rotated_fixed_point(&self) -> DensityMatrix {
        let mut m = Matrix2::zeros();
        m[(0, 0)] = r(1.0 - self.q);
        m[(1, 1)] = r(self.q);
        DensityMatrix::from_qubit(&m)
    }

    /// `P^{⊗R}` in the lab frame.
    pub fn ideal_input(&self) -> DensityMatrix {
        let u = self.pre_rotation;
        let p = u.adjoint() * qubit_matrix(&self.rotated_fixed_point()) * u;
        let one = DensityMatrix::from_qubit(&p);
        DensityMatrix::product(&vec![one; self.r_block])
    }

    /// Design a refrigerator for the fixed point `p` of a channel.
    pub fn from_fixed_point(p: &BlochVector, r_block: usize) -> Result<Self, FridgeError> {
        let norm = p.norm().min(1.0);
        let q = (1.0 - norm) / 2.0;
        check_bias(q)?;
        let mut spec = build_cooling_circuit(q, r_block)?;
        spec.pre_rotation = rotation_to_plus_z(p.vector());
        if !is_identity(&spec.pre_rotation) {
            let layer = GateLayer::new(
                (0..r_block).map(|k| Gate::new(to_dynamic(&spec.pre_rotation), vec![k])).collect::<Result<_, _>>()?,
            )?;
            spec.stages.insert(0, layer);
            spec.f_count = spec.stages.len().max(1) * r_block;
        }
        Ok(spec)
    }
}

fn qubit_matrix(d: &DensityMatrix) -> Matrix2<C64> {
    let m = d.matrix();
    Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
}

fn is_identity(u: &Matrix2<C64>) -> bool {
    (u - Matrix2::identity()).iter().all(|z| z.norm() < 1e-15)
}

/// A unitary `U` with `U (I + n̂·σ) U† = I + Z` for the direction of `w`;
/// the identity when `w` already points along +z or vanishes.
pub fn rotation_to_plus_z(w: &Vector3<f64>) -> Matrix2<C64> {
    let norm = w.norm();
    if norm < 1e-15 {
        return Matrix2::identity();
    }
    let n = w / norm;
    // Polar angle theta, azimuth phi. U = Ry(-theta) Rz(-phi).
    let theta = n.z.clamp(-1.0, 1.0).acos();
    if theta.abs() < 1e-15 {
        return Matrix2::identity();
    }
    let phi = n.y.atan2(n.x);
    let (ct, st) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let ry = Matrix2::new(r(ct), r(st), r(-st), r(ct));
    let rz = Matrix2::new(c((phi / 2.0).cos(), (phi / 2.0).sin()), ZERO, ZERO, c((phi / 2.0).cos(), -(phi / 2.0).sin()));
    ry * rz
}

/// Sort labels by descending probability (ties by ascending label) and send
/// rank `k` to label `k`.
pub fn cooling_permutation(q: f64, r_block: usize) -> Vec<usize> {
    let probs = product_probabilities(q, r_block);
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].partial_cmp(&probs[a]).unwrap().then(a.cmp(&b)));
    let mut perm = vec![0; probs.len()];
    for (rank, &label) in order.iter().enumerate() {
        perm[label] = rank;
    }
    perm
}

pub fn build_cooling_circuit(q: f64, r_block: usize) -> Result<FridgeSpec, FridgeError> {
    check_bias(q)?;
    if r_block == 0 {
        return Err(FridgeError::Arity { expected: 1, found: 0 });
    }
    if r_block > MAX_SIMULATED_BLOCK {
        return Err(FridgeError::TooLargeToSimulate(r_block));
    }
    let permutation = cooling_permutation(q, r_block);
    let stages = compile_permutation(&permutation, r_block);
    let f_count = stages.len().max(1) * r_block;
    Ok(FridgeSpec { q, r_block, permutation, pre_rotation: Matrix2::identity(), stages, f_count })
}

fn bit(label: usize, qubit: usize, n: usize) -> bool {
    label >> (n - 1 - qubit) & 1 == 1
}

/// Compile a permutation of `n`-bit labels into single-gate stages.
///
/// Each cycle is split into transpositions; a transposition `a ↔ b` is
/// conjugated by CNOTs from a pivot bit onto the other differing bits so
/// that `a` and the image of `b` differ in the pivot only, then swapped by a
/// NOT on the pivot controlled by every other bit of `a`.
pub fn compile_permutation(perm: &[usize], n: usize) -> Vec<GateLayer> {
    let mut stages = Vec::new();
    let mut seen = vec![false; perm.len()];
    for start in 0..perm.len() {
        if seen[start] || perm[start] == start {
            seen[start] = true;
            continue;
        }
        let mut cycle = vec![start];
        seen[start] = true;
        let mut next = perm[start];
        while next != start {
            cycle.push(next);
            seen[next] = true;
            next = perm[next];
        }
        // (c0 c1 ... ck) as c0→c1→...→ck→c0 = (c0 ck)…(c0 c2)(c0 c1), rightmost first.
        for &other in &cycle[1..] {
            stages.extend(transposition(cycle[0], other, n));
        }
    }
    stages
}

fn transposition(a: usize, b: usize, n: usize) -> Vec<GateLayer> {
    let differing: Vec<usize> = (0..n).filter(|&k| bit(a, k, n) != bit(b, k, n)).collect();
    let pivot = differing[0];
    let fanout: Vec<GateLayer> = differing[1..]
        .iter()
        .map(|&j| GateLayer::single(Gate::controlled_x(&[(pivot, bit(b, pivot, n))], j)))
        .collect();
    let controls: Vec<(usize, bool)> = (0..n).filter(|&k| k != pivot).map(|k| (k, bit(a, k, n))).collect();
    let swap = if controls.is_empty() {
        GateLayer::single(Gate::x(pivot))
    } else {
        GateLayer::single(Gate::controlled_x(&controls, pivot))
    };
    let mut out = fanout.clone();
    out.push(swap);
    out.extend(fanout.into_iter().rev());
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoolingMode {
    Ideal,
    Noisy,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoolingReport {
    pub reset_state: DensityMatrix,
    pub reset_population: f64,
    pub reset_distance: f64,
    pub waste_entropy: f64,
    pub mode: CoolingMode,
    /// Bound checked on noisy runs: ideal distance + `F·d` + input deviation.
    pub bound: Option<f64>,
}

/// Run the compiled circuit, applying `noise` to every qubit after each stage.
pub fn run_circuit(
    spec: &FridgeSpec,
    noise: Option<&SuperOp>,
    input: &DensityMatrix,
) -> Result<DensityMatrix, FridgeError> {
    if input.n_qubits() != spec.r_block {
        return Err(FridgeError::Arity { expected: spec.r_block, found: input.n_qubits() });
    }
    let mut rho = input.clone();
    let noise_layer = |rho: &mut DensityMatrix| -> Result<(), SimError> {
        if let Some(ch) = noise {
            for k in 0..spec.r_block {
                rho.apply_channel(ch, k)?;
            }
        }
        Ok(())
    };
    if spec.stages.is_empty() {
        noise_layer(&mut rho)?;
    }
    for layer in &spec.stages {
        rho.apply_layer(layer)?;
        noise_layer(&mut rho)?;
    }
    Ok(rho)
}

fn report(output: &DensityMatrix, mode: CoolingMode, bound: Option<f64>) -> Result<CoolingReport, FridgeError> {
    let reset_state = output.partial_trace(&[0])?;
    let reset_population = reset_state.matrix()[(0, 0)].re;
    let target = DensityMatrix::zero_state(1);
    let reset_distance = distance(&reset_state, &target, Norm::One)?;
    let waste_entropy = if output.n_qubits() > 1 {
        let waste: Vec<usize> = (1..output.n_qubits()).collect();
        output.partial_trace(&waste)?.entropy()
    } else {
        0.0
    };
    Ok(CoolingReport { reset_state, reset_population, reset_distance, waste_entropy, mode, bound })
}

pub fn run_fridge_ideal(spec: &FridgeSpec, input: &DensityMatrix) -> Result<CoolingReport, FridgeError> {
    let out = run_circuit(spec, None, input)?;
    report(&out, CoolingMode::Ideal, None)
}

/// Noisy run; fails with [`FridgeError::BoundViolated`] if the reset distance
/// exceeds `(ideal + F·d + ‖input − P^{⊗R}‖₁)·(1 + BOUND_SLACK)`, where `d` is
/// the certified diamond-distance bound between `noise` and the identity.
pub fn run_fridge_noisy(
    spec: &FridgeSpec,
    noise: &SuperOp,
    input: &DensityMatrix,
) -> Result<CoolingReport, FridgeError> {
    let ideal_in = spec.ideal_input();
    let ideal = run_fridge_ideal(spec, &ideal_in)?;
    let deviation = distance(input, &ideal_in, Norm::One)?;
    let d = channel_distance(noise, &SuperOp::identity())?;
    let bound = ideal.reset_distance + spec.f_count as f64 * d.dual_bound.max(d.upper) + deviation;
    let out = run_circuit(spec, Some(noise), input)?;
    let rep = report(&out, CoolingMode::Noisy, Some(bound))?;
    if rep.reset_distance > bound * (1.0 + BOUND_SLACK) + 1e-12 {
        return Err(FridgeError::BoundViolated { observed: rep.reset_distance, bound });
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Oracle: enumerate all labels, sort probabilities, sum the top half.
    fn top_mass_by_enumeration(q: f64, r_block: usize) -> f64 {
        let mut probs = product_probabilities(q, r_block);
        probs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        probs[..1 << (r_block - 1)].iter().sum()
    }

    #[test]
    fn top_mass_matches_enumeration() {
        for q in [0.0, 0.05, 0.1, 0.25, 0.4, 0.49] {
            for r_block in 1..=12 {
                assert_abs_diff_eq!(top_mass(q, r_block), top_mass_by_enumeration(q, r_block), epsilon = 1e-12);
            }
        }
        assert_abs_diff_eq!(top_mass(0.1, 3), 0.972, epsilon = 1e-12);
        assert_abs_diff_eq!(top_mass(0.25, 3), 0.84375, epsilon = 1e-12);
    }

    #[test]
    fn choose_r_examples() {
        assert_eq!(choose_r(0.0, 0.01), Ok(1));
        assert_eq!(choose_r(0.1, 0.06), Ok(3));
        // R = 1 already leaves 2q = 0.2 < 0.25.
        assert_eq!(choose_r(0.1, 0.25), Ok(1));
        // R = 2 leaves the same 0.20 as R = 1, so the next step down is R = 3.
        assert_eq!(choose_r(0.1, 0.15), Ok(3));
        assert_eq!(choose_r(0.25, 0.4), Ok(3));
        assert!(matches!(choose_r(0.5, 0.1), Err(FridgeError::Unreachable { .. })));
        assert!(matches!(choose_r(-0.1, 0.1), Err(FridgeError::InvalidBias(_))));
        assert!(matches!(choose_r(0.1, 0.0), Err(FridgeError::InvalidTarget(_))));
    }

    #[test]
    fn permutations_for_small_blocks() {
        assert_eq!(cooling_permutation(0.1, 1), vec![0, 1]);
        assert_eq!(cooling_permutation(0.1, 2), vec![0, 1, 2, 3]);
        // 011 and 100 trade places; everything else is fixed.
        assert_eq!(cooling_permutation(0.1, 3), vec![0, 1, 2, 4, 3, 5, 6, 7]);
        let spec = build_cooling_circuit(0.1, 1).unwrap();
        assert_eq!(spec.f_count, 1);
        assert!(spec.stages.is_empty());
    }

    #[test]
    fn compiled_network_realizes_the_permutation() {
        for (q, r_block) in [(0.1, 3), (0.3, 4), (0.2, 5)] {
            let spec = build_cooling_circuit(q, r_block).unwrap();
            let dim = 1 << r_block;
            let mut u = crate::linalg::CMatrix::identity(dim, dim);
            for layer in &spec.stages {
                u = layer.to_unitary(r_block).unwrap() * u;
            }
            assert_eq!(u, spec.permutation_unitary(), "q={q} R={r_block}");
            assert_eq!(spec.f_count, spec.stages.len() * r_block);
        }
        // A random permutation exercises longer cycles.
        let perm = vec![3, 0, 6, 1, 7, 2, 4, 5];
        let mut u = crate::linalg::CMatrix::identity(8, 8);
        for layer in compile_permutation(&perm, 3) {
            u = layer.to_unitary(3).unwrap() * u;
        }
        assert_eq!(u, permutation_unitary(&perm));
    }

    #[test]
    fn ideal_run_reaches_top_mass() {
        let spec = build_cooling_circuit(0.1, 3).unwrap();
        let rep = run_fridge_ideal(&spec, &spec.ideal_input()).unwrap();
        assert_abs_diff_eq!(rep.reset_population, 0.972, epsilon = 1e-12);
        assert_abs_diff_eq!(rep.reset_distance, 0.056, epsilon = 1e-12);
        assert!(rep.waste_entropy <= 2.0);
        let pure = build_cooling_circuit(0.0, 4).unwrap();
        assert_abs_diff_eq!(run_fridge_ideal(&pure, &pure.ideal_input()).unwrap().reset_distance, 0.0);
    }

    #[test]
    fn identity_noise_matches_ideal() {
        let spec = build_cooling_circuit(0.25, 3).unwrap();
        let ideal = run_fridge_ideal(&spec, &spec.ideal_input()).unwrap();
        let noisy = run_fridge_noisy(&spec, &SuperOp::identity(), &spec.ideal_input()).unwrap();
        assert!(distance(&ideal.reset_state, &noisy.reset_state, Norm::One).unwrap() < 1e-12);
        assert_abs_diff_eq!(ideal.reset_population, 0.84375, epsilon = 1e-12);
    }

    #[test]
    fn rotated_fixed_point_is_cooled_in_its_own_frame() {
        let w = Vector3::new(0.3, -0.4, 0.5);
        let p = BlochVector::from_vector(w).unwrap();
        let spec = FridgeSpec::from_fixed_point(&p, 3).unwrap();
        assert_abs_diff_eq!(spec.q, (1.0 - w.norm()) / 2.0, epsilon = 1e-15);
        let rep = run_fridge_ideal(&spec, &spec.ideal_input()).unwrap();
        assert_abs_diff_eq!(rep.reset_population, top_mass(spec.q, 3), epsilon = 1e-12);
        let u = rotation_to_plus_z(&w);
        let rotated = BlochVector::from_density(&(u * p.density() * u.adjoint()));
        assert_abs_diff_eq!(rotated.vector().z, w.norm(), epsilon = 1e-14);
        assert!(matches!(
            FridgeSpec::from_fixed_point(&BlochVector::center(), 2),
            Err(FridgeError::Unreachable { .. })
        ));
    }
}
