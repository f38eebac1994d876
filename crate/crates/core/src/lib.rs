//! Pseudo-spectral simulation of the two-dimensional Beris–Edwards system for
//! nematic liquid crystals on the periodic unit square, with a Landau–de
//! Gennes energy that includes the cubic `L4` elastic term.

pub mod diagnostics;
pub mod dynamics;
pub mod energetics;
pub mod field;
pub mod spectral;
pub mod stress;

pub use dynamics::{run, RunOutput, SimulationState, Stepper, StepperConfig};
pub use energetics::EnergyLedger;
pub use field::{Coefficients, GridSpec, QTensorField, ScalarField, TensorField, VelocityField};
pub use spectral::Spectral;
