//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line even when all of them pass.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use nalgebra::{Matrix2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qrefrig_core::channel::{
    canonical_form, choi_positive, cp_check, fixed_point, kraus_to_superop, CanonicalForm, KrausSet, SuperOp,
};
use qrefrig_core::classify::{
    classify, entropy_behavior, entropy_of_image_of_center, relaxation_time, ChannelClass, EntropyBehavior,
    CLASSIFICATION_TOL,
};
use qrefrig_core::densim::{step, DensityMatrix, GateLayer, NoiseLayer, QRegister};
use qrefrig_core::experiments::{
    concavity_margin, dephasing_bound, entropy_ledger_exhaustive, pinsker_margin, run_epr_storage,
    run_refrigerator_protocol, ConstantMode, EprCode, EprConfig, NoiseSpec, ProtocolParams, SimMode,
};
use qrefrig_core::fridge::{build_cooling_circuit, choose_r, run_circuit, run_fridge_ideal, run_fridge_noisy, top_mass};
use qrefrig_core::linalg::{haar_unitary, C64};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn h2(p: f64) -> f64 {
    let t = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    t(p) + t(1.0 - p)
}

/// A random channel from a Haar-random system-environment unitary with the
/// environment starting in |0⟩.
fn random_stinespring<G: Rng>(rng: &mut G) -> SuperOp {
    let u = haar_unitary(4, rng);
    let ops = (0..2)
        .map(|e| Matrix2::<C64>::from_fn(|a, b| u[(2 * a + e, 2 * b)]))
        .collect();
    kraus_to_superop(&KrausSet::new(ops).expect("isometry"))
}

fn iterate_to_fixed_point(c: &SuperOp) -> Vector3<f64> {
    let mut w = Vector3::zeros();
    for _ in 0..1_000_000 {
        let next = c.apply_bloch(&w);
        let done = (next - w).norm() == 0.0;
        w = next;
        if done {
            break;
        }
    }
    w
}

fn c1_classification() -> Outcome {
    let start = Instant::now();
    let mut correct = 0;
    for p in [0.01, 0.05, 0.1, 0.2, 0.3] {
        let cases = [
            (SuperOp::depolarizing(p).unwrap(), "depolarizing"),
            (SuperOp::dephasing(p).unwrap(), "dephasing"),
            (SuperOp::amplitude_damping(p).unwrap(), "non_unital"),
        ];
        for (c, want) in cases {
            if classify(&c, CLASSIFICATION_TOL).map(|k| k.label()) == Ok(want) {
                correct += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(correct == 15, "{correct}/15 correct");
    ensure!(secs < 1.0, "took {secs:.3} s");
    Ok(format!("15/15 correct in {:.1} ms", secs * 1e3))
}

fn c2_fixed_point() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut n = 0;
    while n < 1000 {
        let c = random_stinespring(&mut rng);
        if !matches!(classify(&c, CLASSIFICATION_TOL), Ok(ChannelClass::NonUnital { .. })) {
            continue;
        }
        let closed = fixed_point(&canonical_form(&c), CLASSIFICATION_TOL).map_err(|e| e.to_string())?;
        worst = worst.max((closed.vector() - iterate_to_fixed_point(&c)).norm());
        n += 1;
    }
    ensure!(worst <= 1e-10, "worst deviation {worst:.3e} over 1000 channels");
    let ad = fixed_point(&canonical_form(&SuperOp::amplitude_damping(0.3).unwrap()), CLASSIFICATION_TOL)
        .map_err(|e| e.to_string())?;
    let ad_err = (ad.vector() - Vector3::new(0.0, 0.0, 1.0)).norm();
    ensure!(ad_err <= 1e-12, "amplitude damping fixed point off by {ad_err:.3e}");
    Ok(format!("1000 random channels, worst {worst:.2e}; amplitude damping off by {ad_err:.1e}"))
}

fn c3_cp_conditions() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut agree = 0;
    let mut positive = 0;
    for _ in 0..10_000 {
        let lambda = Vector3::from_fn(|_, _| rng.random_range(-1.0..=1.0));
        let f = CanonicalForm::diagonal(Vector3::zeros(), lambda);
        let oracle = choi_positive(&f.reconstruct());
        positive += oracle as usize;
        if cp_check(&f) == oracle {
            agree += 1;
        }
    }
    ensure!(agree == 10_000, "{agree}/10000 agree");
    Ok(format!("10000/10000 agree ({positive} completely positive)"))
}

fn c4_entropy_taxonomy() -> Outcome {
    let cases = [
        (SuperOp::depolarizing(0.1).unwrap(), EntropyBehavior::StrictlyIncreasing),
        (SuperOp::dephasing(0.1).unwrap(), EntropyBehavior::NonDecreasing),
        (SuperOp::amplitude_damping(0.1).unwrap(), EntropyBehavior::CanDecrease),
    ];
    for (c, want) in cases {
        let got = entropy_behavior(&c, 1000, 4);
        ensure!(got == want, "expected {want:?}, got {got:?}");
    }
    let s = entropy_of_image_of_center(&SuperOp::amplitude_damping(0.1).unwrap());
    let want = h2(0.55);
    ensure!((s - want).abs() <= 1e-9 && s < 1.0, "S(AD(I/2)) = {s}, h(0.55) = {want}");
    Ok(format!("taxonomy matches; S(AD_0.1(I/2)) = {s:.10}"))
}

fn random_state<G: Rng>(n: usize, rng: &mut G) -> DensityMatrix {
    if rng.random_range(0..4) == 0 {
        DensityMatrix::random_pure(n, rng)
    } else {
        DensityMatrix::random_mixed(n, rng)
    }
}

fn c5_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut pinsker_min = f64::INFINITY;
    let mut concavity_min = f64::INFINITY;
    for _ in 0..10_000 {
        let n = rng.random_range(1..=3);
        let a = random_state(n, &mut rng);
        let b = random_state(n, &mut rng);
        pinsker_min = pinsker_min.min(pinsker_margin(&a, &b).map_err(|e| e.to_string())?);
        let n = rng.random_range(1..=3);
        let a = random_state(n, &mut rng);
        let b = random_state(n, &mut rng);
        let p = rng.random_range(0.0..=1.0);
        concavity_min = concavity_min.min(concavity_margin(&a, &b, p, ConstantMode::Safe).map_err(|e| e.to_string())?);
    }
    ensure!(pinsker_min >= -1e-9, "pinsker margin {pinsker_min:.3e}");
    ensure!(concavity_min >= -1e-9, "safe concavity margin {concavity_min:.3e}");

    let zero = DensityMatrix::basis_state(1, 0);
    let one = DensityMatrix::basis_state(1, 1);
    let counter = concavity_margin(&zero, &one, 0.5, ConstantMode::Paper).map_err(|e| e.to_string())?;
    // 1 − (2/ln 2)·(1/4)·2 = 1 − 1/ln 2.
    let pinned = 1.0 - 1.0 / std::f64::consts::LN_2;
    ensure!(counter <= -0.4 && (counter - pinned).abs() < 1e-12, "counterexample margin {counter}");

    let (p, eps) = (0.1, 0.5);
    let mut worst_rel: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    let mut prev: Option<f64> = None;
    for n in [2usize, 4, 8, 16] {
        let t = dephasing_bound(p, eps, n, ConstantMode::Paper).map_err(|e| e.to_string())?.t_bound;
        let want = std::f64::consts::LN_2 * (n as f64).powi(3) / (8.0 * p * (1.0 - p) * eps * eps);
        worst_rel = worst_rel.max((t - want).abs() / want);
        if let Some(prev) = prev {
            worst_ratio = worst_ratio.max((t / prev - 8.0).abs());
        }
        prev = Some(t);
    }
    ensure!(worst_rel <= 1e-12, "T formula relative error {worst_rel:.3e}");
    ensure!(worst_ratio <= 1e-9, "doubling ratio off 8 by {worst_ratio:.3e}");
    Ok(format!(
        "pinsker min {pinsker_min:.3e}, safe concavity min {concavity_min:.3e}, counterexample {counter:.6}, T rel err {worst_rel:.1e}"
    ))
}

fn c6_chain_rule() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = f64::INFINITY;
    let mut orderings = 0;
    for _ in 0..1000 {
        let p = rng.random_range(0.01..=0.5);
        let noise = NoiseLayer::new(SuperOp::dephasing(p).unwrap());
        let before = QRegister::data(random_state(4, &mut rng));
        let after = step(&before, &GateLayer::empty(), &noise).map_err(|e| e.to_string())?;
        let ledger = entropy_ledger_exhaustive(&before, &after, &noise).map_err(|e| e.to_string())?;
        ensure!(ledger.orderings.len() == 24, "{} orderings checked", ledger.orderings.len());
        orderings += ledger.orderings.len();
        worst = worst.min(ledger.worst_slack);
        ensure!(ledger.increase >= ledger.max_gap - 1e-9, "increase {} < max gap {}", ledger.increase, ledger.max_gap);
    }
    ensure!(worst >= -1e-9, "worst slack {worst:.3e}");
    Ok(format!("1000 states, {orderings} orderings, worst slack {worst:.3e}"))
}

fn c7_epr_storage() -> Outcome {
    let cfg = |code, p, steps| EprConfig { code, p, steps, seed: 7, eps: 0.5, mode: ConstantMode::Safe, decoder_trials: 100 };
    let bare = run_epr_storage(&cfg(EprCode::None, 0.1, 50)).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for r in &bare.records {
        let want = (1.0 + (1.0 - 2.0 * 0.1f64).powi(r.step as i32)) / 2.0;
        worst = worst.max((r.epr_fidelity.unwrap() - want).abs());
    }
    ensure!(worst <= 1e-9, "closed form error {worst:.3e}");
    let dephased = bare.get_f64("dephased_decoder_max_fidelity").unwrap();
    ensure!(dephased <= 0.5 + 1e-9, "dephased state decodes to {dephased}");

    let bare = run_epr_storage(&cfg(EprCode::None, 0.02, 10)).map_err(|e| e.to_string())?;
    let coded = run_epr_storage(&cfg(EprCode::PhaseFlip3, 0.02, 10)).map_err(|e| e.to_string())?;
    let (fb, fc) = (bare.records[10].epr_fidelity.unwrap(), coded.records[10].epr_fidelity.unwrap());
    ensure!(fc - fb > 0.0, "coded {fc} vs bare {fb}");
    Ok(format!("closed form error {worst:.1e}; dephased best {dephased:.12}; coded beats bare by {:.3e}", fc - fb))
}

fn enumerate_top_half(q: f64, r: usize) -> f64 {
    let mut probs: Vec<f64> = (0..1usize << r)
        .map(|label| (0..r).map(|k| if label >> k & 1 == 1 { q } else { 1.0 - q }).product())
        .collect();
    probs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    probs[..1 << (r - 1)].iter().sum()
}

fn c8_fridge() -> Outcome {
    let spec = build_cooling_circuit(0.1, 3).map_err(|e| e.to_string())?;
    let ideal = run_fridge_ideal(&spec, &spec.ideal_input()).map_err(|e| e.to_string())?;
    let oracle = enumerate_top_half(0.1, 3);
    ensure!(
        (ideal.reset_population - 0.972).abs() <= 1e-12 && (oracle - 0.972).abs() <= 1e-12,
        "reset population {} (oracle {oracle})",
        ideal.reset_population
    );

    let qs: Vec<f64> = (1..=9).map(|k| 0.05 * k as f64).collect();
    let eps: Vec<f64> = vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5];
    let r_of = |q: f64, e: f64| choose_r(q, e).map_or(usize::MAX, |r| r);
    let mut grid_points = 0;
    for &q in &qs {
        for (j, &e) in eps.iter().enumerate() {
            let r = r_of(q, e);
            if r != usize::MAX {
                ensure!(2.0 * (1.0 - top_mass(q, r)) < e, "q={q} eps2={e}: R={r} misses the target");
                ensure!(r == 1 || 2.0 * (1.0 - top_mass(q, r - 1)) >= e, "q={q} eps2={e}: R={r} not minimal");
                if r <= 12 {
                    ensure!((top_mass(q, r) - enumerate_top_half(q, r)).abs() < 1e-12, "top mass mismatch q={q} R={r}");
                }
            }
            if j > 0 {
                ensure!(r <= r_of(q, eps[j - 1]), "not non-increasing in eps2 at q={q} eps2={e}");
            }
            grid_points += 1;
        }
    }
    for &e in &eps {
        for w in qs.windows(2) {
            ensure!(r_of(w[0], e) <= r_of(w[1], e), "not non-decreasing in q at eps2={e}");
        }
    }

    let mut worst_entropy: f64 = 0.0;
    for (q, r) in [(0.1, 3), (0.2, 4), (0.3, 5), (0.05, 2)] {
        let spec = build_cooling_circuit(q, r).map_err(|e| e.to_string())?;
        let out = run_circuit(&spec, None, &spec.ideal_input()).map_err(|e| e.to_string())?;
        worst_entropy = worst_entropy.max((out.entropy() - r as f64 * h2(q)).abs());
    }
    ensure!(worst_entropy <= 1e-10, "entropy not conserved: {worst_entropy:.3e}");

    let mut worst_ratio: f64 = 0.0;
    for p in [0.001, 0.005, 0.01, 0.02] {
        let noise = SuperOp::amplitude_damping(p).unwrap();
        let rep = run_fridge_noisy(&spec, &noise, &spec.ideal_input()).map_err(|e| e.to_string())?;
        let bound = rep.bound.unwrap();
        ensure!(rep.reset_distance <= bound * 1.1, "p={p}: {} > {bound}", rep.reset_distance);
        worst_ratio = worst_ratio.max(rep.reset_distance / bound);
    }
    Ok(format!(
        "reset population {:.12}; {grid_points} grid points minimal and monotone; entropy error {worst_entropy:.1e}; noisy/bound ≤ {worst_ratio:.3}",
        ideal.reset_population
    ))
}

fn c9_relaxation() -> Outcome {
    let mut details = Vec::new();
    for p in [0.19, 0.36, 0.5] {
        let c = SuperOp::amplitude_damping(p).unwrap();
        let pts: Vec<(f64, f64)> = (2..=14)
            .map(|k| {
                let target = 10f64.powi(-k);
                relaxation_time(&c, target).map(|r| ((1.0 / target).ln(), r.steps as f64))
            })
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let m = pts.len() as f64;
        let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / m, pts.iter().map(|p| p.1).sum::<f64>() / m);
        let slope = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / pts.iter().map(|(x, _)| (x - mx).powi(2)).sum::<f64>();
        let want = -1.0 / (1.0 - p).sqrt().ln();
        let rel = (slope - want).abs() / want;
        ensure!(rel <= 0.05, "p={p}: slope {slope:.4} vs {want:.4} ({:.1}%)", rel * 100.0);
        details.push(format!("p={p} slope {slope:.3}/{want:.3}"));

        let run = run_refrigerator_protocol(&ProtocolParams::new(NoiseSpec::AmplitudeDamping { p }, 5, SimMode::Factorized))
            .map_err(|e| e.to_string())?;
        for name in ["storage_exit_within_target", "storage_throughput"] {
            let check = run.checks.iter().find(|c| c.name == name).expect("check recorded");
            ensure!(check.passed, "p={p}: {name}: {}", check.detail);
        }
    }
    Ok(format!("{}; storage targets and throughput hold", details.join(", ")))
}

fn c10_protocol() -> Outcome {
    let params = ProtocolParams { seed: 10, ..ProtocolParams::new(NoiseSpec::AmplitudeDamping { p: 0.01 }, 50, SimMode::Factorized) };
    let run = run_refrigerator_protocol(&params).map_err(|e| e.to_string())?;
    let margin = run.get_f64("refrigeration_margin").unwrap();
    ensure!(margin >= 0.0, "refrigerated below stale by {:.3e}", -margin);
    ensure!(run.all_passed(), "failed checks: {:?}", run.failed().collect::<Vec<_>>());

    let minimal = ProtocolParams { r_block: Some(2), ..ProtocolParams::new(NoiseSpec::AmplitudeDamping { p: 0.01 }, 4, SimMode::Exact) };
    let exact = run_refrigerator_protocol(&minimal).map_err(|e| e.to_string())?;
    let fact = run_refrigerator_protocol(&ProtocolParams { mode: SimMode::Factorized, ..minimal.clone() })
        .map_err(|e| e.to_string())?;
    let depth = exact.summary["config"]["d_prime"].as_u64().unwrap();
    ensure!(depth <= 20, "depth {depth}");
    let worst = exact
        .records
        .iter()
        .zip(&fact.records)
        .map(|(e, f)| (e.logical_fidelity.unwrap() - f.logical_fidelity.unwrap()).abs())
        .fold(0.0, f64::max);
    ensure!(worst <= 0.05, "exact vs factorized differ by {worst:.3e}");
    Ok(format!(
        "final fidelity {:.6} vs stale {:.6} (margin {margin:.4}); exact vs factorized max gap {worst:.2e} at depth {depth}",
        run.get_f64("final_logical_fidelity").unwrap(),
        run.get_f64("stale_final_logical_fidelity").unwrap()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("classification", c1_classification),
        ("fixed point", c2_fixed_point),
        ("cp conditions", c3_cp_conditions),
        ("entropy taxonomy", c4_entropy_taxonomy),
        ("bound machinery", c5_bounds),
        ("chain-rule inequality", c6_chain_rule),
        ("epr storage", c7_epr_storage),
        ("fridge exactness", c8_fridge),
        ("relaxation", c9_relaxation),
        ("protocol demonstration", c10_protocol),
    ];
    let start = Instant::now();
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail}; {secs:.2} s)", i + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {:>2} {name}: FAIL ({detail}; {secs:.2} s)", i + 1);
            }
        }
    }
    println!("acceptance: {}/10 passed in {:.1} s", 10 - failures, start.elapsed().as_secs_f64());
    if failures > 0 {
        std::process::exit(1);
    }
}
