//! Model knot solutions of the twisted extended Bogomolny equations.

pub mod cli;
pub mod continuation;
pub mod error;
pub mod fields;
pub mod integrator;
pub mod interp;
pub mod io;
pub mod jet;
pub mod linop;
pub mod ode;
pub mod params;
pub mod series;
pub mod solver;
pub mod verify;

pub use error::{Result, TebeError};
pub use params::{param_conversions, Coords, ModelParams, State};
