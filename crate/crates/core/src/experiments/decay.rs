//! Information decay under depolarizing-class noise.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{default_seed, ExperimentError, NoiseSpec, RunOutput, TraceRecord};
use crate::channel::canonical_form;
use crate::classify::{classify, ChannelClass, CLASSIFICATION_TOL};
use crate::densim::{
    epr_fidelity, information, step, DensityMatrix, Gate, GateLayer, NoiseLayer, QRegister, Role,
};
use crate::linalg::{binary_entropy, haar_unitary, CMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CircuitPolicy {
    #[default]
    Idle,
    /// A layer of Haar-random two-qubit gates on a random pairing each step.
    RandomCircuit,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    pub n: usize,
    #[serde(default = "default_noise")]
    pub noise: NoiseSpec,
    pub steps: usize,
    #[serde(default)]
    pub policy: CircuitPolicy,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Entangle qubit 0 with a noise-free reference and track EPR fidelity.
    #[serde(default)]
    pub reference: bool,
    /// Start from the maximally mixed state instead of a random pure state.
    #[serde(default)]
    pub mixed_start: bool,
}

fn default_noise() -> NoiseSpec {
    NoiseSpec::Depolarizing { p: 0.1 }
}

/// Least-squares slope of `ln I` against the step index.
fn fit_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let m = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (num, den) = points.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + (x - mx) * (y - my), b + (x - mx).powi(2)));
    (den > 0.0).then(|| num / den)
}

pub fn run_depolarizing_decay(cfg: &DecayConfig) -> Result<RunOutput, ExperimentError> {
    if cfg.n == 0 || cfg.n > 8 {
        return Err(ExperimentError::InvalidConfig(format!("n = {} outside 1..=8", cfg.n)));
    }
    let channel = cfg.noise.to_superop()?;
    if classify(&channel, CLASSIFICATION_TOL)? != ChannelClass::Depolarizing {
        return Err(ExperimentError::InvalidConfig("noise is not in the depolarizing class".into()));
    }
    let lambda = canonical_form(&channel).lambda;
    let lambda_max = lambda.abs().max();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n;
    let data: Vec<usize> = (0..n).collect();

    let mut rho = if cfg.mixed_start {
        DensityMatrix::maximally_mixed(n)
    } else {
        DensityMatrix::random_pure(n, &mut rng)
    };
    let mut roles = vec![Role::Data; n];
    if cfg.reference {
        rho = if cfg.mixed_start {
            rho.tensor(&DensityMatrix::maximally_mixed(1))
        } else {
            let rest = if n > 1 { Some(DensityMatrix::random_pure(n - 1, &mut rng)) } else { None };
            let mut s = DensityMatrix::zero_state(1);
            if let Some(rest) = rest {
                s = s.tensor(&rest);
            }
            let mut s = s.tensor(&DensityMatrix::zero_state(1));
            s.apply_layer(&GateLayer::single(Gate::h(0)))?;
            s.apply_layer(&GateLayer::single(Gate::cnot(0, n)))?;
            s
        };
        roles.push(Role::Reference);
    }
    let mut reg = QRegister::new(rho, roles)?;
    let noise = NoiseLayer::new(channel);
    let dim = 1usize << n;
    let mut acc = CMatrix::identity(dim, dim);

    let record = |t: usize, reg: &QRegister, acc: &CMatrix| -> Result<TraceRecord, ExperimentError> {
        let info = information(reg);
        let mut rec = TraceRecord::new(t, n as f64 - info, info);
        if cfg.reference {
            let decoder = GateLayer::single(Gate::new(acc.adjoint(), data.clone())?);
            rec.epr_fidelity = Some(epr_fidelity(reg, &[decoder], 0, n)?);
        }
        Ok(rec)
    };

    let mut out = RunOutput::default();
    out.records.push(record(0, &reg, &acc)?);
    for t in 1..=cfg.steps {
        let layer = match cfg.policy {
            CircuitPolicy::Idle => GateLayer::empty(),
            CircuitPolicy::RandomCircuit => {
                let mut order = data.clone();
                order.shuffle(&mut rng);
                let gates = order
                    .chunks_exact(2)
                    .map(|pair| Gate::new(haar_unitary(4, &mut rng), pair.to_vec()))
                    .collect::<Result<Vec<_>, _>>()?;
                GateLayer::new(gates)?
            }
        };
        if !layer.is_empty() {
            acc = layer.to_unitary(n)? * acc;
        }
        reg = step(&reg, &layer, &noise)?;
        out.records.push(record(t, &reg, &acc)?);
    }

    let mut worst_rise = f64::NEG_INFINITY;
    for w in out.records.windows(2) {
        worst_rise = worst_rise.max(w[1].information_bits - w[0].information_bits);
    }
    if out.records.len() > 1 {
        out.check("information_non_increasing", worst_rise <= 1e-9, format!("largest rise {worst_rise:.3e}"));
    }

    let points: Vec<(f64, f64)> = out
        .records
        .iter()
        .filter(|r| r.information_bits > 1e-6)
        .map(|r| (r.step as f64, r.information_bits.ln()))
        .collect();
    let contraction = 1.0 - lambda_max;
    out.set("contraction", contraction);
    if let Some(slope) = fit_log_slope(&points) {
        let factor = slope.exp();
        let c = (1.0 - factor) / contraction;
        out.set("fitted_decay_factor", factor);
        out.set("fitted_c", c);
        out.check("positive_decay_constant", c > 0.0, format!("factor {factor:.6}, c {c:.4}"));
    }
    if cfg.reference {
        let below = out.records.iter().find(|r| r.epr_fidelity.is_some_and(|f| f < 0.6)).map(|r| r.step);
        out.set("first_step_epr_below_0_6", below);
    }
    if n == 1 && !cfg.reference && !cfg.mixed_start && (lambda.max() - lambda.min()).abs() < 1e-15 {
        let l = lambda[0];
        let err = out
            .records
            .iter()
            .map(|r| (r.information_bits - (1.0 - binary_entropy((1.0 + l.powi(r.step as i32)) / 2.0))).abs())
            .fold(0.0, f64::max);
        out.set("closed_form_max_error", err);
        out.check("matches_single_qubit_closed_form", err <= 1e-9, format!("max error {err:.3e}"));
    }
    out.set("final_information", out.records.last().map(|r| r.information_bits));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, steps: usize) -> DecayConfig {
        DecayConfig {
            n,
            noise: NoiseSpec::Depolarizing { p: 0.1 },
            steps,
            policy: CircuitPolicy::Idle,
            seed: 0,
            reference: false,
            mixed_start: false,
        }
    }

    #[test]
    fn maximally_mixed_start_stays_at_zero() {
        let out = run_depolarizing_decay(&DecayConfig { mixed_start: true, ..cfg(3, 5) }).unwrap();
        assert!(out.records.iter().all(|r| r.information_bits.abs() < 1e-12));
        assert!(out.all_passed());
    }

    #[test]
    fn single_qubit_idle_matches_closed_form() {
        let out = run_depolarizing_decay(&cfg(1, 30)).unwrap();
        assert!(out.all_passed(), "{:?}", out.checks);
        assert!(out.get_f64("closed_form_max_error").unwrap() <= 1e-9);
    }

    #[test]
    fn random_circuits_decay_and_lose_the_epr_pair() {
        let out = run_depolarizing_decay(&DecayConfig {
            policy: CircuitPolicy::RandomCircuit,
            reference: true,
            ..cfg(4, 30)
        })
        .unwrap();
        assert!(out.all_passed(), "{:?}", out.checks);
        assert!(out.get_f64("fitted_c").unwrap() > 0.0);
        assert!(out.summary["first_step_epr_below_0_6"].as_u64().is_some());
        assert!((out.records[0].epr_fidelity.unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn non_depolarizing_noise_is_rejected() {
        let c = DecayConfig { noise: NoiseSpec::AmplitudeDamping { p: 0.1 }, ..cfg(2, 3) };
        assert!(matches!(run_depolarizing_decay(&c), Err(ExperimentError::InvalidConfig(_))));
    }
}
