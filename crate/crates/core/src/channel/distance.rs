//! Bounded numerical estimate of the diamond distance between two qubit
//! channels.
//!
//! Three numbers are produced for `Δ = A − B` with unnormalized Choi matrix `J`:
//!
//! * `lower`: `‖J‖₁ / 2`, the value at the maximally entangled input;
//! * `upper`: the best `‖(Δ ⊗ id)(|ψ⟩⟨ψ|)‖₁` found by multi-start
//!   alternating maximization over inputs on system ⊗ one ancilla qubit (a single ancilla qubit
//!   is enough to attain the optimum for qubit channels);
//! * `dual_bound`: `‖Tr_out |J|‖_∞`, the value of a feasible point of the dual
//!   semidefinite program, hence a certified upper bound.
//!
//! `lower ≤ upper` always holds because the maximally entangled input is one of
//! the search starts.

use nalgebra::{Matrix2, Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{ChannelError, SuperOp};
use crate::linalg::{r, C64, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    pub lower: f64,
    pub upper: f64,
    pub dual_bound: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct DistanceOptions {
    pub restarts: usize,
    pub seed: u64,
    /// Alternating steps allowed per start before reporting non-convergence.
    pub max_iterations: usize,
    /// Relative objective gain below which a start counts as converged.
    pub tol: f64,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        Self { restarts: 64, seed: 0, max_iterations: 20_000, tol: 1e-13 }
    }
}

pub fn channel_distance(a: &SuperOp, b: &SuperOp) -> Result<DistanceEstimate, ChannelError> {
    channel_distance_with(a, b, &DistanceOptions::default())
}

pub fn channel_distance_with(
    a: &SuperOp,
    b: &SuperOp,
    opts: &DistanceOptions,
) -> Result<DistanceEstimate, ChannelError> {
    let diff_ptm = a.ptm() - b.ptm();
    if diff_ptm.abs().max() == 0.0 {
        return Ok(DistanceEstimate { lower: 0.0, upper: 0.0, dual_bound: 0.0 });
    }
    let choi = a.choi() - b.choi();
    let lower = 0.5 * trace_norm4(&choi);
    let dual_bound = dual_bound(&choi);

    let images = DifferenceImages::new(a, b);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let h = r(std::f64::consts::FRAC_1_SQRT_2);
    let mut starts: Vec<Vector4<C64>> = vec![Vector4::new(h, ZERO, ZERO, h)];
    // Product inputs along the six cardinal Bloch directions.
    for (u, v) in [(1.0, 0.0), (0.0, 1.0)] {
        starts.push(Vector4::new(r(u), ZERO, r(v), ZERO));
    }
    for s in [1.0, -1.0] {
        starts.push(Vector4::new(h, ZERO, r(s) * h, ZERO));
        starts.push(Vector4::new(h, ZERO, C64::new(0.0, s) * h, ZERO));
    }
    while starts.len() < opts.restarts.max(1) {
        let v = Vector4::from_fn(|_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        starts.push(v.normalize());
    }
    starts.truncate(opts.restarts.max(1));
    let mut best = lower;
    for start in starts {
        best = best.max(see_saw(&images, start, opts)?);
    }
    Ok(DistanceEstimate { lower, upper: best, dual_bound })
}

/// `Δ(|i⟩⟨j|)` for the four matrix units.
struct DifferenceImages {
    img: [[Matrix2<C64>; 2]; 2],
}

impl DifferenceImages {
    fn new(a: &SuperOp, b: &SuperOp) -> Self {
        let img = std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let mut e = Matrix2::zeros();
                e[(i, j)] = r(1.0);
                a.apply_operator(&e) - b.apply_operator(&e)
            })
        });
        Self { img }
    }

    /// `(Δ ⊗ id)(|ψ⟩⟨ψ|)`, system first.
    fn output(&self, psi: &Vector4<C64>) -> Matrix4<C64> {
        let mut out = Matrix4::<C64>::zeros();
        for i in 0..2 {
            for ip in 0..2 {
                let d = &self.img[i][ip];
                for j in 0..2 {
                    for jp in 0..2 {
                        let coeff = psi[2 * i + j] * psi[2 * ip + jp].conj();
                        for k in 0..2 {
                            for kp in 0..2 {
                                out[(2 * k + j, 2 * kp + jp)] += d[(k, kp)] * coeff;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// `(Δ† ⊗ id)(X)`, so that `⟨ψ|H|ψ⟩ = Tr[X (Δ ⊗ id)(|ψ⟩⟨ψ|)]`.
    fn adjoint(&self, x: &Matrix4<C64>) -> Matrix4<C64> {
        let mut h = Matrix4::<C64>::zeros();
        for i in 0..2 {
            for ip in 0..2 {
                let d = &self.img[i][ip];
                for j in 0..2 {
                    for jp in 0..2 {
                        let mut acc = ZERO;
                        for k in 0..2 {
                            for kp in 0..2 {
                                acc += x[(2 * kp + jp, 2 * k + j)] * d[(k, kp)];
                            }
                        }
                        h[(2 * ip + jp, 2 * i + j)] += acc;
                    }
                }
            }
        }
        h
    }
}

/// Alternate between the best observable `X = sign(O)` for the current input
/// and the best input (top eigenvector of the adjoint image of `X`). Both
/// steps can only raise `‖O‖₁`. Each step is followed by a line search along
/// the last move, which shortcuts the slow linear crawl near flat optima.
fn see_saw(images: &DifferenceImages, start: Vector4<C64>, opts: &DistanceOptions) -> Result<f64, ChannelError> {
    let objective = |psi: &Vector4<C64>| trace_norm4(&images.output(psi));
    let mut psi = start;
    let mut value = objective(&psi);
    for _ in 0..opts.max_iterations {
        let eig = hermitian4(&images.output(&psi)).symmetric_eigen();
        let signs = eig.eigenvalues.map(|v| r(if v >= 0.0 { 1.0 } else { -1.0 }));
        let x = &eig.eigenvectors * Matrix4::from_diagonal(&signs) * eig.eigenvectors.adjoint();
        let heig = hermitian4(&images.adjoint(&x)).symmetric_eigen();
        let mut next = heig.eigenvectors.column(heig.eigenvalues.imax()).into_owned();
        let overlap = psi.dotc(&next);
        if overlap.norm() > 0.0 {
            next *= overlap.conj() / overlap.norm();
        }
        let mut next_value = objective(&next);
        let dir = next - psi;
        let mut t = 2.0;
        while t < 1e6 {
            let trial = (psi + dir * r(t)).normalize();
            let v = objective(&trial);
            if v <= next_value {
                break;
            }
            (next, next_value) = (trial, v);
            t *= 2.0;
        }
        if next_value - value <= opts.tol * value.max(1.0) {
            return Ok(value.max(next_value));
        }
        (psi, value) = (next, next_value);
    }
    Err(ChannelError::NonConvergence { iterations: opts.max_iterations })
}

fn hermitian4(m: &Matrix4<C64>) -> Matrix4<C64> {
    (m + m.adjoint()) * r(0.5)
}

fn trace_norm4(m: &Matrix4<C64>) -> f64 {
    let eig = hermitian4(m).symmetric_eigenvalues();
    eig.iter().map(|v| v.abs()).sum()
}

fn dual_bound(choi: &Matrix4<C64>) -> f64 {
    let eig = hermitian4(choi).symmetric_eigen();
    let vecs = eig.eigenvectors;
    let abs_diag = Matrix4::from_diagonal(&eig.eigenvalues.map(|v| r(v.abs())));
    let abs_j = vecs * abs_diag * vecs.adjoint();
    // Partial trace over the output factor (second tensor slot).
    let mut reduced = Matrix2::<C64>::zeros();
    for i in 0..2 {
        for j in 0..2 {
            reduced[(i, j)] = abs_j[(2 * i, 2 * j)] + abs_j[(2 * i + 1, 2 * j + 1)];
        }
    }
    let reduced = (reduced + reduced.adjoint()) * r(0.5);
    reduced.symmetric_eigenvalues().iter().map(|v| v.abs()).fold(0.0, f64::max)
}
