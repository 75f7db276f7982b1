//! Spin–mechanical thermal machines under Lindblad dynamics.
//!
//! The numerical core is generic over the real scalar `T` ([`Real`], f32 or
//! f64). The aliases at the bottom fix `T = f64`, which is what the
//! protocols and the command-line front end use.

pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod model;
pub mod operator;
pub mod protocols;
pub mod scalar;
pub mod space;
pub mod state;
pub mod thermo;
pub mod validate;

pub use error::{Error, Result};
pub use model::{derive, DerivedParams, GradientInputs, LabTerms, ModelParams};
pub use operator::{
    annihilation, creation, displacement_operator, number, spin_operator, OperatorMatrix, SpinOp,
};
pub use protocols::{
    cooling_map, otto_inset, otto_sweep, run_battery, run_cooling, run_otto, BatteryPlan,
    CoolingPlan, MapGrid, OttoPlan, StrokeRate,
};
pub use scalar::{CMatrix, Real};
pub use space::{make_space, HilbertSpace, SpinLevel, DEFAULT_TRUNCATION_TOL};
pub use state::{
    expectation, fidelity, partial_trace, thermal_state, von_neumann_entropy, DensityMatrix,
    StateDiagnostics, Subsystem,
};

pub type Operator = OperatorMatrix<f64>;
pub type Density = DensityMatrix<f64>;
pub type Matrix = CMatrix<f64>;
