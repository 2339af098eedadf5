//! Real-time evolution of local quenches in infinite spin-1 chains with
//! matrix product states and infinite boundary conditions.

pub mod boundary;
pub mod ed;
pub mod error;
pub mod groundstate;
pub mod io;
pub mod model;
pub mod observables;
pub mod tebd;
pub mod tensor;
pub mod window;

pub use error::{Error, Result};
