//! Multi-level school attendance boundary optimization.

pub mod error;
pub mod fixtures;
pub mod instance;
pub mod constraints;
pub mod objectives;
pub mod solver;
pub mod eval;
pub mod calibration;
pub mod weights;
pub mod synth;
pub mod experiment;

pub use error::{Error, EvalError, LoadError, SolveError};
