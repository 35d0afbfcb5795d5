//! Gates, gate layers and the JSON circuit format.
//!
//! ```json
//! [{"gates": [{"u": "H", "targets": [0]}]},
//!  {"gates": [{"u": "CNOT", "targets": [0, 1]}]}]
//! ```
//!
//! `u` is either a gate name (`H`, `X`, `Z`, `CNOT`, `TOFFOLI`) or an explicit
//! matrix given as rows of `[re, im]` pairs. `targets[0]` is the most
//! significant bit of the gate's local index, so for `CNOT` it is the control.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::linalg::{c, is_unitary, r, CMatrix, ONE, ZERO};

/// Unitarity tolerance `‖U†U − I‖_max`.
pub const UNITARY_TOL: f64 = 1e-10;

/// Largest gate arity used by the refrigerator protocol (Toffoli stages).
pub const PROTOCOL_MAX_ARITY: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub unitary: CMatrix,
    pub targets: Vec<usize>,
}

impl Gate {
    pub fn new(unitary: CMatrix, targets: Vec<usize>) -> Result<Self, SimError> {
        let k = targets.len();
        if k == 0 || unitary.nrows() != 1 << k || unitary.ncols() != 1 << k {
            return Err(SimError::GateShape { arity: k, rows: unitary.nrows(), cols: unitary.ncols() });
        }
        if !is_unitary(&unitary, UNITARY_TOL) {
            return Err(SimError::NonUnitary);
        }
        let distinct: BTreeSet<_> = targets.iter().collect();
        if distinct.len() != k {
            return Err(SimError::OverlappingTargets { qubit: duplicate(&targets) });
        }
        Ok(Self { unitary, targets })
    }

    pub fn named(name: &str, targets: Vec<usize>) -> Result<Self, SimError> {
        Self::new(named_unitary(name)?, targets)
    }

    pub fn h(q: usize) -> Self {
        Self::named("H", vec![q]).expect("valid")
    }

    pub fn x(q: usize) -> Self {
        Self::named("X", vec![q]).expect("valid")
    }

    pub fn z(q: usize) -> Self {
        Self::named("Z", vec![q]).expect("valid")
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Self::controlled_x(&[(control, true)], target)
    }

    pub fn toffoli(c0: usize, c1: usize, target: usize) -> Self {
        Self::controlled_x(&[(c0, true), (c1, true)], target)
    }

    /// X on `target` when every control `(qubit, polarity)` reads `polarity`.
    ///
    /// Panics if the qubits are not distinct.
    pub fn controlled_x(controls: &[(usize, bool)], target: usize) -> Self {
        let k = controls.len() + 1;
        let dim = 1usize << k;
        let mut pattern = 0usize;
        for (i, &(_, pol)) in controls.iter().enumerate() {
            if pol {
                pattern |= 1 << (k - 1 - i);
            }
        }
        let mut u = CMatrix::zeros(dim, dim);
        for col in 0..dim {
            let row = if col & !1 == pattern { col ^ 1 } else { col };
            u[(row, col)] = ONE;
        }
        let mut targets: Vec<usize> = controls.iter().map(|&(q, _)| q).collect();
        targets.push(target);
        Self::new(u, targets).expect("controlled-X qubits must be distinct")
    }

    pub fn arity(&self) -> usize {
        self.targets.len()
    }
}

fn duplicate(targets: &[usize]) -> usize {
    let mut seen = BTreeSet::new();
    for &t in targets {
        if !seen.insert(t) {
            return t;
        }
    }
    usize::MAX
}

pub fn named_unitary(name: &str) -> Result<CMatrix, SimError> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let m = match name {
        "H" => CMatrix::from_row_slice(2, 2, &[r(h), r(h), r(h), r(-h)]),
        "X" => CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        "Z" => CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        "CNOT" => permutation_unitary(&[0, 1, 3, 2]),
        "TOFFOLI" => permutation_unitary(&[0, 1, 2, 3, 4, 5, 7, 6]),
        other => return Err(SimError::Parse(format!("unknown gate {other:?}"))),
    };
    Ok(m)
}

/// The 0/1 matrix sending basis state `i` to `perm[i]`.
pub fn permutation_unitary(perm: &[usize]) -> CMatrix {
    let dim = perm.len();
    let mut u = CMatrix::zeros(dim, dim);
    for (i, &j) in perm.iter().enumerate() {
        u[(j, i)] = ONE;
    }
    u
}

/// Gates acting on pairwise disjoint qubits within one time step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GateLayer {
    gates: Vec<Gate>,
}

impl GateLayer {
    pub fn new(gates: Vec<Gate>) -> Result<Self, SimError> {
        let mut used = BTreeSet::new();
        for g in &gates {
            for &t in &g.targets {
                if !used.insert(t) {
                    return Err(SimError::OverlappingTargets { qubit: t });
                }
            }
        }
        Ok(Self { gates })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn single(gate: Gate) -> Self {
        Self { gates: vec![gate] }
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn max_arity(&self) -> usize {
        self.gates.iter().map(Gate::arity).max().unwrap_or(0)
    }

    pub fn check_arity(&self, max: usize) -> Result<(), SimError> {
        match self.max_arity() {
            a if a > max => Err(SimError::ArityExceeded { arity: a, max }),
            _ => Ok(()),
        }
    }

    pub fn check_targets(&self, n: usize) -> Result<(), SimError> {
        for g in &self.gates {
            if let Some(&q) = g.targets.iter().find(|&&q| q >= n) {
                return Err(SimError::TargetOutOfRange { qubit: q, n });
            }
        }
        Ok(())
    }

    /// Product of the layer's gates as one unitary on `n` qubits (test helper
    /// for small `n`).
    pub fn to_unitary(&self, n: usize) -> Result<CMatrix, SimError> {
        self.check_targets(n)?;
        let dim = 1usize << n;
        let mut rho = CMatrix::identity(dim, dim);
        for g in &self.gates {
            super::apply_left(&mut rho, n, &g.unitary, &g.targets);
        }
        Ok(rho)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum GateSpec {
    Named(String),
    Matrix(Vec<Vec<[f64; 2]>>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GateEntry {
    u: GateSpec,
    targets: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerEntry {
    gates: Vec<GateEntry>,
}

pub fn parse_circuit(text: &str) -> Result<Vec<GateLayer>, SimError> {
    let layers: Vec<LayerEntry> =
        serde_json::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
    layers
        .into_iter()
        .map(|layer| {
            let gates = layer
                .gates
                .into_iter()
                .map(|g| {
                    let u = match g.u {
                        GateSpec::Named(name) => named_unitary(&name)?,
                        GateSpec::Matrix(rows) => {
                            let dim = rows.len();
                            if rows.iter().any(|row| row.len() != dim) {
                                return Err(SimError::Parse("gate matrix must be square".into()));
                            }
                            CMatrix::from_fn(dim, dim, |i, j| c(rows[i][j][0], rows[i][j][1]))
                        }
                    };
                    Gate::new(u, g.targets)
                })
                .collect::<Result<Vec<_>, _>>()?;
            GateLayer::new(gates)
        })
        .collect()
}
