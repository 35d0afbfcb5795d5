//! JSON reports printed by `classify` and `fridge`.

use serde::Serialize;

use qrefrig_core::channel::{canonical_form, choi_positive, pauli_probs, PauliChannelParams};
use qrefrig_core::classify::{classify, entropy_behavior, relaxation_time, CLASSIFICATION_TOL};
use qrefrig_core::fridge::{build_cooling_circuit, choose_r, run_fridge_ideal, run_fridge_noisy, CoolingReport};
use qrefrig_core::{EntropyBehavior, SuperOp};

use crate::Failure;

const RELAXATION_TARGETS: [f64; 3] = [1e-2, 1e-4, 1e-6];
const DEFAULT_EPS2: f64 = 0.1;

#[derive(Serialize)]
pub struct CanonicalReport {
    pub t: [f64; 3],
    pub lambda: [f64; 3],
    pub pre_rotation: [[f64; 3]; 3],
    pub post_rotation: [[f64; 3]; 3],
}

#[derive(Serialize)]
pub struct RelaxationRow {
    pub target: f64,
    pub steps: u64,
    pub achieved_distance: f64,
}

#[derive(Serialize)]
pub struct ClassifyReport {
    /// `null` when the channel is unitary or sits on a class boundary.
    pub class: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axis: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_point: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub lambda: [f64; 3],
    pub t: [f64; 3],
    pub canonical_form: CanonicalReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pauli_probs: Option<PauliChannelParams>,
    pub completely_positive: bool,
    pub entropy_behavior: EntropyBehavior,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub relaxation_table: Vec<RelaxationRow>,
}

fn rows(m: &impl std::ops::Index<(usize, usize), Output = f64>) -> [[f64; 3]; 3] {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

pub fn classify_report(c: &SuperOp) -> ClassifyReport {
    let f = canonical_form(c);
    let cp = choi_positive(c);
    let (class, note) = match classify(c, CLASSIFICATION_TOL) {
        Ok(k) => (Some(k), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let relaxation_table = match class {
        Some(qrefrig_core::ChannelClass::NonUnital { .. }) => RELAXATION_TARGETS
            .iter()
            .filter_map(|&target| relaxation_time(c, target).ok())
            .map(|r| RelaxationRow { target: r.target, steps: r.steps, achieved_distance: r.achieved_distance })
            .collect(),
        _ => Vec::new(),
    };
    ClassifyReport {
        class: class.map(|k| k.label().to_string()),
        axis: match class {
            Some(qrefrig_core::ChannelClass::Dephasing { axis }) => Some(axis),
            _ => None,
        },
        fixed_point: match class {
            Some(qrefrig_core::ChannelClass::NonUnital { fixed_point }) => Some(fixed_point),
            _ => None,
        },
        note,
        lambda: f.lambda.into(),
        t: f.t.into(),
        canonical_form: CanonicalReport {
            t: f.t.into(),
            lambda: f.lambda.into(),
            pre_rotation: rows(&f.pre_rot),
            post_rotation: rows(&f.post_rot),
        },
        pauli_probs: pauli_probs(&f).ok(),
        completely_positive: cp,
        entropy_behavior: entropy_behavior(c, 256, 0),
        relaxation_table,
    }
}

#[derive(Serialize)]
pub struct CoolingSummary {
    pub reset_population: f64,
    pub reset_distance: f64,
    pub waste_entropy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
}

impl From<&CoolingReport> for CoolingSummary {
    fn from(r: &CoolingReport) -> Self {
        Self {
            reset_population: r.reset_population,
            reset_distance: r.reset_distance,
            waste_entropy: r.waste_entropy,
            bound: r.bound,
        }
    }
}

#[derive(Serialize)]
pub struct FridgeReport {
    pub q: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps2: Option<f64>,
    pub r_block: usize,
    pub f_count: usize,
    pub stages: usize,
    pub permutation: Vec<usize>,
    pub reset_population: f64,
    pub reset_distance: f64,
    pub ideal: CoolingSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noisy: Option<CoolingSummary>,
}

pub fn fridge_report(
    q: f64,
    eps2: Option<f64>,
    r: Option<usize>,
    noise: Option<&SuperOp>,
) -> Result<FridgeReport, Failure> {
    let (r_block, eps2) = match r {
        Some(r) => (r, None),
        None => {
            let eps2 = eps2.unwrap_or(DEFAULT_EPS2);
            (choose_r(q, eps2)?, Some(eps2))
        }
    };
    let spec = build_cooling_circuit(q, r_block)?;
    let input = spec.ideal_input();
    let ideal = run_fridge_ideal(&spec, &input)?;
    let noisy = noise.map(|n| run_fridge_noisy(&spec, n, &input)).transpose()?;
    Ok(FridgeReport {
        q,
        eps2,
        r_block,
        f_count: spec.f_count,
        stages: spec.stages.len(),
        permutation: spec.permutation.clone(),
        reset_population: ideal.reset_population,
        reset_distance: ideal.reset_distance,
        ideal: (&ideal).into(),
        noisy: noisy.as_ref().map(Into::into),
    })
}
