//! Simulation of noisy quantum memories and computations with fresh-qubit
//! supplies: single-qubit channel algebra, small density-matrix registers,
//! a heat-bath style refrigerator, and the experiments built from them.

pub mod channel;
pub mod classify;
pub mod densim;
pub mod experiments;
pub mod fridge;
pub mod linalg;

pub use channel::{BlochVector, CanonicalForm, ChannelError, DistanceEstimate, KrausSet, SuperOp};
pub use classify::{ChannelClass, ClassifyError, EntropyBehavior, LimitSet, RelaxationReport};
pub use densim::{DensityMatrix, Gate, GateLayer, NoiseLayer, Norm, QRegister, Role, SimError};
pub use experiments::{Check, ExperimentError, NoiseSpec, RunOutput, TraceRecord};
pub use fridge::{CoolingMode, CoolingReport, FridgeError, FridgeSpec};
