mod common;

use proptest::prelude::*;

use qrefrig_core::channel::SuperOp;
use qrefrig_core::densim::{DensityMatrix, NoiseLayer, QRegister, Role};
use qrefrig_core::experiments::{
    entropy_ledger_step, run_epr_storage, run_refrigerator_protocol, to_jsonl, EprCode, EprConfig, NoiseSpec,
    ProtocolParams, SimMode,
};

use common::{h2, rng};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn global_increase_covers_every_single_qubit_gap(seed in any::<u64>(), p in 0.0f64..=1.0, with_ref in any::<bool>()) {
        let mut g = rng(seed);
        let mut roles = vec![Role::Data; 3];
        roles.push(if with_ref { Role::Reference } else { Role::Data });
        let before = QRegister::new(DensityMatrix::random_mixed(4, &mut g), roles).unwrap();
        let noise = NoiseLayer::new(SuperOp::dephasing(p).unwrap());
        let mut after = before.clone();
        after.apply_noise(&noise).unwrap();
        let ordering = before.noisy_qubits();
        let ledger = entropy_ledger_step(&before, &after, &noise, &ordering, &mut g).unwrap();
        prop_assert!(ledger.holds, "worst slack {}", ledger.worst_slack);
        prop_assert!(ledger.increase >= ledger.max_gap - 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn bare_pair_traces_show_a_small_increase_in_every_window(p in 0.2f64..0.8, steps in 10usize..60) {
        let cfg = EprConfig {
            code: EprCode::None,
            p,
            steps,
            seed: 3,
            eps: 0.5,
            mode: Default::default(),
            decoder_trials: 10,
        };
        let out = run_epr_storage(&cfg).unwrap();
        prop_assert!(out.all_passed(), "{:?}", out.failed().collect::<Vec<_>>());
        // Closed form: the Bell pair with coherence c has entropy h((1 + c)/2).
        let delta = 2.0 * p * (1.0 - p) * cfg.eps * cfg.eps / std::f64::consts::LN_2;
        let window = (1.0 / delta).ceil() as usize;
        let entropy = |t: usize| h2((1.0 + (1.0 - 2.0 * p).powi(t as i32)) / 2.0);
        let increases: Vec<f64> = (1..=steps).map(|t| entropy(t) - entropy(t - 1)).collect();
        if window <= steps {
            for w in increases.windows(window) {
                prop_assert!(w.iter().any(|&d| d <= delta));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn protocol_runs_respect_storage_budgets(p in 0.005f64..0.05, cycles in 1usize..6, r_block in 1usize..4) {
        let mut params = ProtocolParams::new(NoiseSpec::AmplitudeDamping { p }, cycles, SimMode::Factorized);
        params.r_block = Some(r_block);
        let out = run_refrigerator_protocol(&params).unwrap();
        for name in ["storage_exit_within_target", "storage_throughput"] {
            prop_assert!(out.checks.iter().any(|c| c.name == name && c.passed), "{name} failed");
        }
        let drawn = out.get_f64("storage_qubits_drawn").unwrap();
        prop_assert!(drawn <= (5 * r_block * 5 * cycles) as f64);
        prop_assert_eq!(out.records.len(), out.baseline.as_ref().unwrap().len());
        let again = run_refrigerator_protocol(&params).unwrap();
        prop_assert_eq!(to_jsonl(&out.records), to_jsonl(&again.records));
    }
}
