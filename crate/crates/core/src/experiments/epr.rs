//! Storing half of an EPR pair under dephasing.
//!
//! The system half is either left bare or encoded in the three-qubit
//! phase-flip code. The code runs one coherent correction per step: two fresh
//! `|0⟩` ancillas (which dephasing leaves untouched) collect the syndrome, a
//! Toffoli network corrects, and the ancillas are discarded. The correction
//! is applied without noise inside the step, so coded fidelities are an
//! upper bound on what a noisy implementation would reach.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bounds::{dephasing_bound, entropy_ledger_step, ConstantMode};
use super::{default_seed, ExperimentError, RunOutput, TraceRecord};
use crate::channel::SuperOp;
use crate::densim::{
    dephase_all, distance, epr_fidelity, information, step, DensityMatrix, Gate, GateLayer, Norm, NoiseLayer,
    QRegister, Role,
};
use crate::linalg::haar_unitary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EprCode {
    #[default]
    None,
    PhaseFlip3,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EprConfig {
    #[serde(default)]
    pub code: EprCode,
    pub p: f64,
    pub steps: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// 2-norm distance to the dephased state below which decoding must fail.
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub mode: ConstantMode,
    /// Random decoders tried on the fully dephased final state.
    #[serde(default = "default_trials")]
    pub decoder_trials: usize,
}

fn default_eps() -> f64 {
    0.5
}
fn default_trials() -> usize {
    100
}

/// Best `⟨Φ⁺|·|Φ⁺⟩` over `trials` Haar-random decoders on the data qubits
/// after completely dephasing them.
pub fn max_dephased_decoder_fidelity<G: Rng + ?Sized>(
    reg: &QRegister,
    system: usize,
    reference: usize,
    trials: usize,
    rng: &mut G,
) -> Result<f64, ExperimentError> {
    let dephased = dephase_all(reg);
    let data = reg.noisy_qubits();
    let mut best = epr_fidelity(&dephased, &[], system, reference)?;
    for _ in 0..trials {
        let decoder = GateLayer::single(Gate::new(haar_unitary(1 << data.len(), rng), data.clone())?);
        best = best.max(epr_fidelity(&dephased, &[decoder], system, reference)?);
    }
    Ok(best)
}

fn layers(gates: Vec<Vec<Gate>>) -> Result<Vec<GateLayer>, ExperimentError> {
    gates.into_iter().map(|g| GateLayer::new(g).map_err(Into::into)).collect()
}

fn hadamards() -> Vec<Gate> {
    (0..3).map(Gate::h).collect()
}

fn decoder(code: EprCode) -> Result<Vec<GateLayer>, ExperimentError> {
    match code {
        EprCode::None => Ok(Vec::new()),
        EprCode::PhaseFlip3 => layers(vec![
            hadamards(),
            vec![Gate::cnot(0, 1)],
            vec![Gate::cnot(0, 2)],
            vec![Gate::toffoli(1, 2, 0)],
        ]),
    }
}

/// Syndrome extraction onto ancillas 4, 5 and correction, in the phase basis.
fn correction() -> Result<Vec<GateLayer>, ExperimentError> {
    layers(vec![
        hadamards(),
        vec![Gate::cnot(0, 4), Gate::cnot(2, 5)],
        vec![Gate::cnot(1, 4)],
        vec![Gate::cnot(1, 5)],
        vec![Gate::controlled_x(&[(4, true), (5, false)], 0)],
        vec![Gate::controlled_x(&[(4, true), (5, true)], 1)],
        vec![Gate::controlled_x(&[(4, false), (5, true)], 2)],
        hadamards(),
    ])
}

pub fn run_epr_storage(cfg: &EprConfig) -> Result<RunOutput, ExperimentError> {
    let channel = SuperOp::dephasing(cfg.p)?;
    let noise = NoiseLayer::new(channel);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_data = match cfg.code {
        EprCode::None => 1,
        EprCode::PhaseFlip3 => 3,
    };
    let reference = n_data;

    // Bell pair on (data 0, reference), other data qubits in |0⟩.
    let mut rho = DensityMatrix::zero_state(n_data + 1);
    let mut prep = vec![GateLayer::single(Gate::h(0)), GateLayer::single(Gate::cnot(0, reference))];
    if cfg.code == EprCode::PhaseFlip3 {
        prep.extend(layers(vec![vec![Gate::cnot(0, 1)], vec![Gate::cnot(0, 2)], hadamards()])?);
    }
    for l in &prep {
        rho.apply_layer(l)?;
    }
    let mut roles = vec![Role::Data; n_data];
    roles.push(Role::Reference);
    let mut reg = QRegister::new(rho, roles)?;
    let dec = decoder(cfg.code)?;
    let corr = correction()?;
    let ordering: Vec<usize> = (0..n_data).collect();

    let mut out = RunOutput::default();
    let record = |t: usize, reg: &QRegister| -> Result<TraceRecord, ExperimentError> {
        let info = information(reg);
        let mut rec = TraceRecord::new(t, n_data as f64 - info, info);
        rec.epr_fidelity = Some(epr_fidelity(reg, &dec, 0, reference)?);
        Ok(rec)
    };
    out.records.push(record(0, &reg)?);

    let mut increases = Vec::with_capacity(cfg.steps);
    let mut ledger_ok = true;
    let mut worst_ledger_slack = f64::INFINITY;
    let mut separable_checks = 0usize;
    let mut separable_ok = true;
    for t in 1..=cfg.steps {
        let before = reg.clone();
        reg = step(&reg, &GateLayer::empty(), &noise)?;
        let ledger = entropy_ledger_step(&before, &reg, &noise, &ordering, &mut rng)?;
        ledger_ok &= ledger.holds;
        worst_ledger_slack = worst_ledger_slack.min(ledger.worst_slack);
        increases.push(ledger.increase);

        if cfg.code == EprCode::PhaseFlip3 {
            let mut roles = reg.roles().to_vec();
            roles.extend([Role::Ancilla, Role::Ancilla]);
            let mut joint = reg.state().tensor(&DensityMatrix::zero_state(2));
            for l in &corr {
                joint.apply_layer(l)?;
            }
            joint.check_invariants()?;
            let kept = joint.partial_trace(&[0, 1, 2, 3])?;
            reg = QRegister::new(kept, reg.roles().to_vec())?;
        }

        let mut rec = record(t, &reg)?;
        rec.gaps = ledger.gaps.clone();
        rec.max_gap = Some(ledger.max_gap);
        let sigma = dephase_all(&reg);
        let d2 = distance(reg.state(), sigma.state(), Norm::Two)?;
        if d2 <= cfg.eps {
            separable_checks += 1;
            let d1 = distance(reg.state(), sigma.state(), Norm::One)?;
            let f = rec.epr_fidelity.expect("recorded");
            separable_ok &= f <= 0.5 + d1 / 2.0 + 1e-9;
        }
        out.records.push(rec);
    }
    out.check("chain_rule_inequality", ledger_ok, format!("worst slack {worst_ledger_slack:.3e}"));
    out.check(
        "near_dephased_states_decode_poorly",
        separable_ok,
        format!("{separable_checks} steps within 2-norm {} of the dephased state", cfg.eps),
    );

    if cfg.p > 0.0 && cfg.p < 1.0 {
        // Physical qubits: the data plus every ancilla drawn so far.
        let n_phys = n_data + if cfg.code == EprCode::PhaseFlip3 { 2 * cfg.steps } else { 0 };
        let b = dephasing_bound(cfg.p, cfg.eps, n_phys, cfg.mode)?;
        let window = (n_phys as f64 / b.delta).ceil() as usize;
        let mut windows = 0usize;
        let mut pigeonhole_ok = true;
        if window >= 1 && window <= increases.len() {
            for w in increases.windows(window) {
                windows += 1;
                pigeonhole_ok &= w.iter().any(|&inc| inc <= b.delta);
            }
        }
        out.set("delta", b.delta);
        out.set("pigeonhole_window", window);
        out.set("pigeonhole_windows_checked", windows);
        out.check("pigeonhole_window", pigeonhole_ok, format!("{windows} windows of {window} steps"));
    }

    if cfg.code == EprCode::None {
        let err = out
            .records
            .iter()
            .map(|r| (r.epr_fidelity.unwrap() - (1.0 + (1.0 - 2.0 * cfg.p).powi(r.step as i32)) / 2.0).abs())
            .fold(0.0, f64::max);
        out.set("closed_form_max_error", err);
        out.check("matches_closed_form", err <= 1e-9, format!("max error {err:.3e}"));
    }

    let dephased_best = max_dephased_decoder_fidelity(&reg, 0, reference, cfg.decoder_trials, &mut rng)?;
    out.set("dephased_decoder_max_fidelity", dephased_best);
    out.check("dephased_state_is_separable", dephased_best <= 0.5 + 1e-9, format!("best {dephased_best:.12}"));
    out.set("final_fidelity", out.records.last().and_then(|r| r.epr_fidelity));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(code: EprCode, p: f64, steps: usize) -> EprConfig {
        EprConfig { code, p, steps, seed: 0, eps: 0.5, mode: ConstantMode::Safe, decoder_trials: 20 }
    }

    #[test]
    fn noiseless_storage_keeps_the_pair() {
        for code in [EprCode::None, EprCode::PhaseFlip3] {
            let out = run_epr_storage(&cfg(code, 0.0, 5)).unwrap();
            assert!(out.records.iter().all(|r| (r.epr_fidelity.unwrap() - 1.0).abs() < 1e-12));
            assert!(out.all_passed(), "{:?}", out.checks);
        }
    }

    #[test]
    fn uncoded_matches_closed_form() {
        let out = run_epr_storage(&cfg(EprCode::None, 0.1, 50)).unwrap();
        assert!(out.all_passed(), "{:?}", out.checks);
    }

    #[test]
    fn code_beats_bare_storage() {
        let bare = run_epr_storage(&cfg(EprCode::None, 0.02, 10)).unwrap();
        let coded = run_epr_storage(&cfg(EprCode::PhaseFlip3, 0.02, 10)).unwrap();
        let (fb, fc) = (bare.records[10].epr_fidelity.unwrap(), coded.records[10].epr_fidelity.unwrap());
        assert!(fc > fb, "coded {fc} bare {fb}");
        assert!(coded.all_passed(), "{:?}", coded.checks);
    }
}
