//! Finite-difference micromagnetics with Gauss-Seidel projection steppers.
//!
//! The magnetization lives on a cell-centred grid with one ghost layer. The
//! local field combines exchange, anisotropy, the applied field, the stray
//! field (FFT convolution with the Newell tensor) and Zhang-Li spin torque.
//! Three steppers advance the Landau-Lifshitz equation while keeping `|m| = 1`.

pub mod config;
pub mod demag;
pub mod error;
pub mod grid;
pub mod linsolve;
pub mod mms;
pub mod output;
pub mod physics;
pub mod problems;
pub mod steppers;

pub use config::{Command, RunConfig};
pub use demag::DemagKernel;
pub use error::{Error, Result};
pub use grid::{Grid, ScalarField, VectorField};
pub use physics::{EquationForm, FieldConfig, LocalField, MaterialConfig, NondimScaling};
pub use problems::{ProblemSpec, Setup};
pub use steppers::{Counters, Sample, Stepper, StepperKind};
