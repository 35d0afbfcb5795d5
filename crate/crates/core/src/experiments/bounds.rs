//! Entropy inequalities behind the dephasing storage bound.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{default_seed, ExperimentError, RunOutput};
use crate::densim::{distance, relative_entropy, DensityMatrix, Norm, NoiseLayer, QRegister};
use crate::linalg::r;

/// Which constant to use in the tightened concavity inequality.
///
/// `Paper` is `2/ln 2`, which fails on `(|0⟩⟨0|, |1⟩⟨1|, 1/2)`; `Safe` is
/// `1/(2 ln 2)`, which follows from Pinsker's inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantMode {
    Paper,
    #[default]
    Safe,
}

impl ConstantMode {
    pub fn concavity_constant(self) -> f64 {
        match self {
            Self::Paper => 2.0 / std::f64::consts::LN_2,
            Self::Safe => 1.0 / (2.0 * std::f64::consts::LN_2),
        }
    }

    fn delta_factor(self) -> f64 {
        match self {
            Self::Paper => 8.0,
            Self::Safe => 2.0,
        }
    }
}

/// `S(a‖b) − ‖a − b‖₂² / (2 ln 2)`; infinite when the relative entropy is.
pub fn pinsker_margin(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64, ExperimentError> {
    let rel = relative_entropy(a, b)?;
    if rel.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let d2 = distance(a, b, Norm::Two)?.powi(2);
    Ok(rel - d2 / (2.0 * std::f64::consts::LN_2))
}

/// `S[(1−p)a + pb] − (1−p)S(a) − pS(b) − k·p(1−p)·‖a − b‖₂²`.
pub fn concavity_margin(
    a: &DensityMatrix,
    b: &DensityMatrix,
    p: f64,
    mode: ConstantMode,
) -> Result<f64, ExperimentError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(ExperimentError::InvalidConfig(format!("mix weight {p} outside [0, 1]")));
    }
    let d2 = distance(a, b, Norm::Two)?.powi(2);
    let mix = DensityMatrix::from_matrix_unchecked(a.matrix() * r(1.0 - p) + b.matrix() * r(p))?;
    Ok(mix.entropy() - (1.0 - p) * a.entropy() - p * b.entropy() - mode.concavity_constant() * p * (1.0 - p) * d2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DephasingBoundParams {
    pub p: f64,
    pub eps: f64,
    pub n: usize,
    pub constant_mode: ConstantMode,
    pub delta: f64,
    pub t_bound: f64,
}

/// `δ = c·p(1−p)ε²/((ln 2)n²)` with `c = 8` (paper) or `2` (safe), and `T = n/δ`.
pub fn dephasing_bound(p: f64, eps: f64, n: usize, mode: ConstantMode) -> Result<DephasingBoundParams, ExperimentError> {
    if !(p > 0.0 && p < 1.0) || !(eps > 0.0) || n == 0 {
        return Err(ExperimentError::InvalidConfig(format!("dephasing bound needs 0 < p < 1, eps > 0, n >= 1 (p={p}, eps={eps}, n={n})")));
    }
    let nf = n as f64;
    let delta = mode.delta_factor() * p * (1.0 - p) * eps * eps / (std::f64::consts::LN_2 * nf * nf);
    Ok(DephasingBoundParams { p, eps, n, constant_mode: mode, delta, t_bound: nf / delta })
}

/// Conditional-entropy bookkeeping for one noise layer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyLedger {
    /// Noisy qubits, in the order of `gaps`.
    pub qubits: Vec<usize>,
    /// `S(qᵢ′|q₋ᵢ) − S(qᵢ|q₋ᵢ)`, i.e. `S(Nᵢ ρ) − S(ρ)`.
    pub gaps: Vec<f64>,
    pub max_gap: f64,
    pub entropy_before: f64,
    pub entropy_after: f64,
    pub increase: f64,
    pub orderings: Vec<Vec<usize>>,
    /// Smallest slack over all checked inequalities (negative means violated).
    pub worst_slack: f64,
    pub holds: bool,
}

/// Violations smaller than this are numerical noise.
pub const LEDGER_TOL: f64 = 1e-9;

/// Compute the per-qubit gaps and check, for `ordering` and three random
/// orderings, the chain-rule inequalities
///
/// `S(q′,R) ≥ Σᵢ S(q′_σᵢ | q_σ(>i), R) + S(R)` and
/// `S(q′,R) ≥ S(q,R) + gap_σ₁`.
pub fn entropy_ledger_step<G: Rng + ?Sized>(
    before: &QRegister,
    after: &QRegister,
    noise: &NoiseLayer,
    ordering: &[usize],
    rng: &mut G,
) -> Result<EntropyLedger, ExperimentError> {
    let noisy = before.noisy_qubits();
    let mut sorted = ordering.to_vec();
    sorted.sort_unstable();
    if sorted != noisy {
        return Err(ExperimentError::InvalidConfig("ordering must be a permutation of the noisy qubits".into()));
    }
    let mut orderings = vec![ordering.to_vec()];
    for _ in 0..3 {
        let mut o = noisy.clone();
        o.shuffle(rng);
        orderings.push(o);
    }
    ledger(before, after, noise, orderings)
}

/// As [`entropy_ledger_step`], over every ordering of the noisy qubits.
pub fn entropy_ledger_exhaustive(
    before: &QRegister,
    after: &QRegister,
    noise: &NoiseLayer,
) -> Result<EntropyLedger, ExperimentError> {
    let noisy = before.noisy_qubits();
    if noisy.len() > 7 {
        return Err(ExperimentError::InvalidConfig("too many qubits for exhaustive orderings".into()));
    }
    ledger(before, after, noise, permutations(&noisy))
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (i, &head) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

fn ledger(
    before: &QRegister,
    after: &QRegister,
    noise: &NoiseLayer,
    orderings: Vec<Vec<usize>>,
) -> Result<EntropyLedger, ExperimentError> {
    if before.n_qubits() != after.n_qubits() || before.roles() != after.roles() {
        return Err(ExperimentError::ShapeMismatch);
    }
    let mut expected = before.clone();
    expected.apply_noise(noise)?;
    if distance(expected.state(), after.state(), Norm::Two)? > 1e-8 {
        return Err(ExperimentError::InvalidConfig("`after` is not the noise image of `before`".into()));
    }
    let rho = before.state();
    let refs = before.reference_qubits();
    let qubits = before.noisy_qubits();
    let entropy_before = rho.entropy();
    let entropy_after = after.state().entropy();
    let increase = entropy_after - entropy_before;
    let s_ref = if refs.is_empty() { 0.0 } else { rho.partial_trace(&refs)?.entropy() };

    let mut single: Vec<DensityMatrix> = Vec::with_capacity(qubits.len());
    let mut gaps = Vec::with_capacity(qubits.len());
    for &q in &qubits {
        let mut s = rho.clone();
        s.apply_channel(&noise.channel, q)?;
        gaps.push(s.entropy() - entropy_before);
        single.push(s);
    }
    let max_gap = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut worst_slack = f64::INFINITY;
    for ordering in &orderings {
        // S(q'_σi | q_σ(>i), R) on the state with noise on σi alone.
        let mut chain = s_ref;
        for (i, &q) in ordering.iter().enumerate() {
            let state = &single[qubits.iter().position(|&x| x == q).expect("noisy qubit")];
            let mut cond: Vec<usize> = ordering[i + 1..].to_vec();
            cond.extend(&refs);
            let mut joint = cond.clone();
            joint.push(q);
            let s_joint = state.partial_trace(&joint)?.entropy();
            let s_cond = if cond.is_empty() { 0.0 } else { state.partial_trace(&cond)?.entropy() };
            chain += s_joint - s_cond;
        }
        let first = qubits.iter().position(|&x| x == ordering[0]).expect("noisy qubit");
        worst_slack = worst_slack.min(entropy_after - chain).min(increase - gaps[first]);
    }
    Ok(EntropyLedger {
        qubits,
        gaps,
        max_gap,
        entropy_before,
        entropy_after,
        increase,
        orderings,
        worst_slack,
        holds: worst_slack >= -LEDGER_TOL,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    #[serde(default)]
    pub mode: ConstantMode,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Random pairs / triples per property sweep.
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_ns")]
    pub n_values: Vec<usize>,
}

fn default_trials() -> usize {
    1000
}
fn default_p() -> f64 {
    0.1
}
fn default_eps() -> f64 {
    0.5
}
fn default_ns() -> Vec<usize> {
    vec![2, 4, 8]
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            mode: ConstantMode::default(),
            seed: 0,
            trials: default_trials(),
            p: default_p(),
            eps: default_eps(),
            n_values: default_ns(),
        }
    }
}

/// A random state on 1–3 qubits; one in four is pure.
fn random_state<G: Rng + ?Sized>(n: usize, rng: &mut G) -> DensityMatrix {
    if rng.random_range(0..4) == 0 {
        DensityMatrix::random_pure(n, rng)
    } else {
        DensityMatrix::random_mixed(n, rng)
    }
}

pub fn run_bounds(cfg: &BoundsConfig) -> Result<RunOutput, ExperimentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = RunOutput::default();
    out.set("mode", cfg.mode);

    let mut pinsker_min = f64::INFINITY;
    for _ in 0..cfg.trials {
        let n = rng.random_range(1..=3);
        let a = random_state(n, &mut rng);
        let b = DensityMatrix::random_mixed(n, &mut rng);
        pinsker_min = pinsker_min.min(pinsker_margin(&a, &b)?);
    }
    out.set("pinsker_min_margin", pinsker_min);
    out.check("pinsker_margin_nonnegative", pinsker_min >= -1e-9, format!("min margin {pinsker_min:.3e}"));

    let mut safe_min = f64::INFINITY;
    for _ in 0..cfg.trials {
        let n = rng.random_range(1..=3);
        let a = random_state(n, &mut rng);
        let b = random_state(n, &mut rng);
        let p: f64 = rng.random();
        safe_min = safe_min.min(concavity_margin(&a, &b, p, ConstantMode::Safe)?);
    }
    out.set("safe_concavity_min_margin", safe_min);
    out.check("safe_concavity_nonnegative", safe_min >= -1e-9, format!("min margin {safe_min:.3e}"));

    let z0 = DensityMatrix::basis_state(1, 0);
    let z1 = DensityMatrix::basis_state(1, 1);
    let counter = concavity_margin(&z0, &z1, 0.5, cfg.mode)?;
    out.set("concavity_counterexample_margin", counter);
    if cfg.mode == ConstantMode::Paper {
        out.check("paper_constant_counterexample", counter <= -0.4, format!("margin {counter:.6}"));
    } else {
        out.check("safe_constant_counterexample", counter >= 0.0, format!("margin {counter:.6}"));
    }

    let mut t_values = Vec::new();
    for &n in &cfg.n_values {
        let b = dephasing_bound(cfg.p, cfg.eps, n, cfg.mode)?;
        out.set(&format!("delta_n{n}"), b.delta);
        out.set(&format!("t_bound_n{n}"), b.t_bound);
        t_values.push((n, b.t_bound));
    }
    for w in t_values.windows(2) {
        let (n0, t0) = w[0];
        let (n1, t1) = w[1];
        let expected = (n1 as f64 / n0 as f64).powi(3);
        let ratio = t1 / t0;
        out.check(
            &format!("cubic_scaling_n{n0}_to_n{n1}"),
            (ratio - expected).abs() <= 1e-9 * expected,
            format!("ratio {ratio} vs {expected}"),
        );
    }
    Ok(out)
}
